//! RIS deployment planning for mmWave coverage in indoor dense spaces.
//!
//! The crate is organised bottom-up:
//!
//! - [`scene`]: cabin geometry, candidate RIS placements and radio parameters.
//! - [`channel`]: direct, BS→RIS and RIS→UE channels, either synthesised from a
//!   geometric line-of-sight model or imported from a CIR text file.
//! - [`radio`]: effective channels, MRT precoding, SNR/rate and certification of
//!   a deployment.
//! - [`conic`]: real conic programs over nonnegative, second-order and
//!   exponential cones, plus the complex→real lifting.
//! - [`optimizer`]: the linearised deployment subproblem, branch-and-bound over
//!   the RIS selection variables and the FPP-SCA outer loop.
//! - [`report`]: CSV/JSON emitters shared by the command-line tool.

pub mod channel;
pub mod conic;
pub mod optimizer;
pub mod radio;
pub mod report;
pub mod scene;

pub use num_complex::Complex64 as C64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

pub(crate) fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub(crate) fn linear_to_db(x: f64) -> f64 {
    if x > 0.0 {
        10.0 * x.log10()
    } else {
        f64::NEG_INFINITY
    }
}
