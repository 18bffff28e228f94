//! Quadrature rules shared by the drift probes and the bound evaluator.

use crate::model::DomainBox;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Tensor midpoint rule on `box^dim` with `q` points per axis: calls `f` on
/// every node and returns `Σ f(node) h^dim`.
pub fn midpoint_tensor(dim: usize, b: DomainBox, q: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let h = (b.hi - b.lo) / q as f64;
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut acc = crate::stats::KahanSum::default();
    loop {
        for (xi, &i) in x.iter_mut().zip(&idx) {
            *xi = b.lo + (i as f64 + 0.5) * h;
        }
        acc.add(f(&x));
        let mut c = 0;
        loop {
            if c == dim {
                return acc.total() * h.powi(dim as i32);
            }
            idx[c] += 1;
            if idx[c] < q {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1usize, 2, 5, 8, 16] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let num: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((num - exact).abs() < 1e-13, "n={n} deg={deg}: {num} vs {exact}");
            }
        }
    }

    #[test]
    fn midpoint_area() {
        let v = midpoint_tensor(2, DomainBox { lo: 0.0, hi: 2.0 }, 10, |_| 1.0);
        assert!((v - 4.0).abs() < 1e-13);
        let v = midpoint_tensor(1, DomainBox { lo: 0.0, hi: 1.0 }, 1000, |x| x[0] * x[0]);
        assert!((v - 1.0 / 3.0).abs() < 1e-6);
    }
}
