//! Deployment optimisation: subproblem assembly, branch-and-bound and the
//! outer successive-approximation loop.

mod bnb;
mod fpp;
mod p3;
mod quad;
mod sweep;

pub use bnb::{branch_and_bound, exhaustive_enumeration, BnbConfig, BnbNode, BnbOutcome};
pub use fpp::{
    fpp_sca, fpp_sca_from, normalize_z, phases_from_z, repair_time_allocation, FppConfig, FppError, FppOutcome,
    ScaState,
};
pub use p3::{build_p3, P3Error, P3Form, P3Layout, P3};
pub use quad::{build_quad_data, stacked_cascade, surrogate_lhs, Linearization, QuadData, QuadModel};
pub use sweep::{run_threshold_sweep, SweepEntry};
