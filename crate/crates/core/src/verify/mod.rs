//! Norm estimation, exact oracles, and property suites.
//!
//! Operator norms `‖T‖_{L^p(V)→L^q(U)}` are estimated in the unweighted
//! form `‖U^{1/q} T V^{-1/p}‖_{L^p→L^q}` (the matrix maximal operators are
//! already defined that way). Every estimate is a lower bound realized by a
//! stored test function.

mod estimate;
mod oracles;
mod suites;

pub use estimate::{estimate_norm, reevaluate, weak_norm_estimate, weak_quasinorm, NormEstimate, NormOperator, OperatorSpec, TraceStep, WeightedOperator};
pub use oracles::{exact_avg_norm_p2, scalar_ap, scalar_apq};
pub use suites::{run_suite, Check, Relation, Series, SuiteConfig, SuiteReport, SUITES};
