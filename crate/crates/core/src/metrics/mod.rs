//! Distances between empirical laws and weak errors on bounded test functions.

mod family;
mod lp;
mod w1;
mod weak;

pub use family::{wbl_estimate, BoundedFunction, Profile, TestFunction, TestFunctionFamily, WblBracket};
pub use lp::{w1_lp_oracle, LP_MAX_SUPPORT};
pub use w1::{coupling_cost_upper, subtract_floor, w1_exact_1d, w1_floor};
pub use weak::{paired_weak_error, weak_error, WeakError};
