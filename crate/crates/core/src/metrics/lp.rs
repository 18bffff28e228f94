use crate::error::{invalid, Error, Result};
use crate::model::{norm_diff, EmpiricalMeasure};
use crate::stats::KahanSum;

/// Largest support the transport oracle accepts per measure.
pub const LP_MAX_SUPPORT: usize = 64;

const EPS: f64 = 1e-15;

struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
}

/// Min-cost flow by successive shortest paths (Dijkstra with potentials).
struct Network {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Network {
    fn new(n: usize) -> Self {
        Self { edges: Vec::new(), adj: vec![Vec::new(); n] }
    }

    fn add(&mut self, from: usize, to: usize, cap: f64, cost: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap, cost });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0.0, cost: -cost });
    }

    fn min_cost(&mut self, s: usize, t: usize) -> f64 {
        let n = self.adj.len();
        let mut potential = vec![0.0; n];
        let mut cost = KahanSum::default();
        loop {
            let mut dist = vec![f64::INFINITY; n];
            let mut via = vec![usize::MAX; n];
            let mut done = vec![false; n];
            dist[s] = 0.0;
            for _ in 0..n {
                let u = (0..n).filter(|&v| !done[v]).min_by(|&a, &b| dist[a].total_cmp(&dist[b]));
                let Some(u) = u else { break };
                if !dist[u].is_finite() {
                    break;
                }
                done[u] = true;
                for &e in &self.adj[u] {
                    let edge = &self.edges[e];
                    if edge.cap > EPS {
                        // reduced costs are nonnegative up to rounding
                        let nd = dist[u] + (edge.cost + potential[u] - potential[edge.to]).max(0.0);
                        if nd < dist[edge.to] {
                            dist[edge.to] = nd;
                            via[edge.to] = e;
                        }
                    }
                }
            }
            if !dist[t].is_finite() {
                break;
            }
            for v in 0..n {
                if dist[v].is_finite() {
                    potential[v] += dist[v];
                }
            }
            let mut push = f64::INFINITY;
            let mut v = t;
            while v != s {
                let e = via[v];
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let e = via[v];
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                cost.add(push * self.edges[e].cost);
                v = self.edges[e ^ 1].to;
            }
        }
        cost.total()
    }
}

/// Exact `W1` between two discrete measures in any dimension by solving the
/// transport linear program over couplings with Euclidean ground cost.
pub fn w1_lp_oracle(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::Dimension { expected: mu.dim(), got: nu.dim() });
    }
    for m in [mu, nu] {
        if m.len() > LP_MAX_SUPPORT {
            return Err(Error::SupportTooLarge { size: m.len(), max: LP_MAX_SUPPORT });
        }
        if m.is_empty() {
            return Err(invalid("empty measure"));
        }
    }
    let (a, b) = (mu.normalized_weights(), nu.normalized_weights());
    let (n, m) = (a.len(), b.len());
    let (s, t) = (0, n + m + 1);
    let mut net = Network::new(n + m + 2);
    for (i, w) in a.iter().enumerate() {
        net.add(s, 1 + i, *w, 0.0);
    }
    for (j, w) in b.iter().enumerate() {
        net.add(1 + n + j, t, *w, 0.0);
    }
    for i in 0..n {
        for j in 0..m {
            net.add(1 + i, 1 + n + j, f64::INFINITY, norm_diff(mu.sample(i), nu.sample(j)));
        }
    }
    Ok(net.min_cost(s, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::w1_exact_1d;
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn random_measure(rng: &mut ChaCha8Rng, dim: usize, max_n: usize) -> EmpiricalMeasure {
        let n = 1 + (rng.next_u64() % max_n as u64) as usize;
        let samples = (0..n * dim).map(|_| 4.0 * uniform(rng) - 2.0).collect();
        let lw = (0..n).map(|_| 2.0 * uniform(rng) - 1.0).collect();
        EmpiricalMeasure::weighted(dim, samples, lw)
    }

    #[test]
    fn examples() {
        let p = EmpiricalMeasure::from_points(&[vec![0.0, 0.0]]);
        let q = EmpiricalMeasure::from_points(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((w1_lp_oracle(&p, &q).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(w1_lp_oracle(&q, &q).unwrap(), 0.0);
        let big = EmpiricalMeasure::unweighted(1, vec![0.0; 65]);
        assert!(matches!(w1_lp_oracle(&big, &big), Err(Error::SupportTooLarge { size: 65, max: 64 })));
    }

    #[test]
    fn agrees_with_quantile_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let a = random_measure(&mut rng, 1, 32);
            let b = random_measure(&mut rng, 1, 32);
            let lp = w1_lp_oracle(&a, &b).unwrap();
            let ex = w1_exact_1d(&a, &b).unwrap();
            assert!((lp - ex).abs() < 1e-10, "{lp} vs {ex}");
        }
    }

    #[test]
    fn metric_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a = random_measure(&mut rng, 2, 12);
            let b = random_measure(&mut rng, 2, 12);
            let c = random_measure(&mut rng, 2, 12);
            let ab = w1_lp_oracle(&a, &b).unwrap();
            let ba = w1_lp_oracle(&b, &a).unwrap();
            let bc = w1_lp_oracle(&b, &c).unwrap();
            let ac = w1_lp_oracle(&a, &c).unwrap();
            assert!((ab - ba).abs() < 1e-10);
            assert!(ac <= ab + bc + 1e-8);
            assert!(ab > 0.0);
            assert!(w1_lp_oracle(&a, &a).unwrap() < 1e-12);
        }
    }
}
