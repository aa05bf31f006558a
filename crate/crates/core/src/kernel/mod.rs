//! Dense complex linear algebra for the 2- and 4-dimensional Hilbert spaces
//! of one electron pseudo-spin and one nuclear spin.
//!
//! Everything here is a pure function on `Copy` values.

mod cmat;
mod eig;
mod unitary;

use thiserror::Error;

pub use cmat::{pauli, CMat, C64};
pub use eig::{expm_i, expm_i_eig, herm_eig, HermEig};
pub use unitary::{su2_axis_angle, unitary_phases, wrap_phase, AxisAngle, UnitaryPhases};


#[derive(Debug, Clone, Error, PartialEq)]
pub enum KernelError {
    #[error("matrix is not Hermitian (‖H − H†‖ = {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (‖U†U − 𝟙‖ = {0:.3e})")]
    NotUnitary(f64),
    #[error("diagonalization failed: {0}")]
    Diverged(&'static str),
    #[error("density matrix trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("unsupported matrix dimension {0}")]
    BadDimension(usize),
}

/// Subsystem of the electron ⊗ nuclear product space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    Electron,
    Nuclear,
}

/// Kronecker product A ⊗ B of two 2×2 matrices, electron factor first.
pub fn kron(a: &CMat, b: &CMat) -> Result<CMat, KernelError> {
    if a.dim() != 2 {
        return Err(KernelError::BadDimension(a.dim()));
    }
    if b.dim() != 2 {
        return Err(KernelError::BadDimension(b.dim()));
    }
    let mut out = CMat::zeros(4);
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product of two 2-vectors.
pub fn kron_vec(a: &[C64; 2], b: &[C64; 2]) -> [C64; 4] {
    [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
}

/// Reduced density matrix of the `keep` subsystem.
pub fn partial_trace(rho: &CMat, keep: Subsystem) -> Result<CMat, KernelError> {
    if rho.dim() != 4 {
        return Err(KernelError::BadDimension(rho.dim()));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
        return Err(KernelError::BadTrace(tr.re));
    }
    let mut out = CMat::zeros(2);
    for a in 0..2 {
        for b in 0..2 {
            out[(a, b)] = match keep {
                Subsystem::Nuclear => rho[(a, b)] + rho[(2 + a, 2 + b)],
                Subsystem::Electron => rho[(2 * a, 2 * b)] + rho[(2 * a + 1, 2 * b + 1)],
            };
        }
    }
    Ok(out)
}
