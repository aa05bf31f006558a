//! Simulation of dynamical-decoupling sequences acting on an electron spin
//! qubit coupled to a single nuclear spin: Floquet spectra, θ extraction,
//! dip prediction, coherence and polarization dynamics.
//!
//! ```
//! use dnss::floquet::predict_dips;
//! use dnss::seqdsl::{Preset, Sequence};
//! use dnss::spinsys::SpinSystemParams;
//!
//! let p = SpinSystemParams::new(2.1e6).with_hyperfine(44e3, 0.0);
//! let dips = predict_dips(&p, &Sequence::preset(Preset::Cpmg), 1).unwrap();
//! assert!((dips.tau_plus_s - 1.0 / 4.2e6).abs() < 1e-18);
//! ```

pub mod dynamics;
pub mod export;
pub mod floquet;
pub mod kernel;
pub mod seqdsl;
pub mod spinsys;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Kernel(#[from] kernel::KernelError),
    #[error(transparent)]
    Param(#[from] spinsys::ParamError),
    #[error(transparent)]
    Dsl(#[from] seqdsl::DslError),
    #[error("out of regime at tau = {tau_s:.6e} s: rotation axis x-weight {axis_x_sq:.4} < 0.99")]
    OutOfRegime { tau_s: f64, axis_x_sq: f64 },
    #[error(
        "branch tracking lost between tau = {from_tau_s:.6e} s and {to_tau_s:.6e} s \
         (overlap {overlap:.3}); refine the grid"
    )]
    BranchTrackingLost {
        from_tau_s: f64,
        to_tau_s: f64,
        overlap: f64,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
