//! One-period propagators, θ(τ) extraction, Floquet spectra and the τ± dip
//! predictor.
//!
//! Eigenphases follow `U·v = exp(−iε)·v`. At A = 0 a CPMG-type period has
//! the four phases ε = π + Δτ ± θ ± ωLτ, labelled by electron parity X± and
//! nuclear state ↑↓.

mod spectrum;

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::kernel::{su2_axis_angle, CMat};
use crate::seqdsl::{SegmentList, Sequence};
use crate::spinsys::{PropagatorCache, Resolved, SpinSystemParams};
use crate::{Error, Result};

pub use spectrum::{
    full_spectrum, locate_crossing, pair_gap, pair_gap_of, unperturbed_spectrum, BranchPoint,
    Crossing, CrossingPair, FloquetSpectrum, Label,
};

/// Points whose pulse rotation axis has less x-weight than this are outside
/// the small-error regime.
pub const REGIME_AXIS_X_SQ: f64 = 0.99;

const DIP_TOL_S: f64 = 1e-15;
const DIP_MAX_ITER: usize = 200;

/// Ordered product of segment propagators over one period, last segment
/// leftmost, polished back to unitarity so that high powers stay unitary.
pub fn period_propagator(p: &SpinSystemParams, seg: &SegmentList) -> Result<CMat> {
    period_propagator_resolved(&p.resolve()?, seg)
}

pub(crate) fn period_propagator_resolved(r: &Resolved, seg: &SegmentList) -> Result<CMat> {
    let mut cache = PropagatorCache::new(*r);
    let mut u = CMat::identity(4);
    for s in &seg.period {
        u = cache.propagator(s)? * u;
    }
    Ok(u.reunitarize())
}

/// θ and diagnostics at one pulse spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaPoint {
    pub tau_s: f64,
    /// Signed residual x rotation, (angle/2)·axis_x.
    pub theta_rad: f64,
    /// Full rotation angle of the pulse-only electron propagator.
    pub angle_rad: f64,
    pub axis_x_sq: f64,
}

impl ThetaPoint {
    pub fn in_regime(&self) -> bool {
        self.axis_x_sq >= REGIME_AXIS_X_SQ
    }
}

/// θ read from the electron block of the A = 0 period propagator.
pub fn theta_at(p: &SpinSystemParams, seq: &Sequence, tau_s: f64) -> Result<ThetaPoint> {
    theta_at_resolved(&p.clone().uncoupled().resolve()?, seq, tau_s)
}

fn theta_at_resolved(r0: &Resolved, seq: &Sequence, tau_s: f64) -> Result<ThetaPoint> {
    let seg = seq.compile_at(tau_s, r0)?;
    let u = period_propagator_resolved(r0, &seg)?;
    // With A = 0 the nuclear factor is diagonal; the ↑ sector carries the
    // electron block up to a global phase.
    let mut block = CMat::zeros(2);
    for (i, &a) in [0usize, 2].iter().enumerate() {
        for (j, &b) in [0usize, 2].iter().enumerate() {
            block[(i, j)] = u[(a, b)];
        }
    }
    let aa = su2_axis_angle(&(-block))?;
    Ok(ThetaPoint {
        tau_s,
        theta_rad: 0.5 * aa.angle * aa.axis[0],
        angle_rad: aa.angle,
        axis_x_sq: aa.axis[0] * aa.axis[0],
    })
}

/// Signed θ(τ); fails with `OutOfRegime` when the rotation is not mainly
/// about x.
pub fn extract_theta(p: &SpinSystemParams, seq: &Sequence, tau_s: f64) -> Result<f64> {
    let t = theta_at(p, seq, tau_s)?;
    if !t.in_regime() {
        return Err(Error::OutOfRegime {
            tau_s,
            axis_x_sq: t.axis_x_sq,
        });
    }
    Ok(t.theta_rad)
}

/// θ over a τ grid. Out-of-regime points are kept and flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaCurve {
    pub tau_s: Vec<f64>,
    pub theta_rad: Vec<f64>,
    pub axis_x_sq: Vec<f64>,
    pub detuning_hz: f64,
    pub pulse_width_s: f64,
}

impl ThetaCurve {
    pub fn in_regime(&self, i: usize) -> bool {
        self.axis_x_sq[i] >= REGIME_AXIS_X_SQ
    }
}

pub fn theta_curve(p: &SpinSystemParams, seq: &Sequence, tau_grid: &[f64]) -> Result<ThetaCurve> {
    let r0 = p.clone().uncoupled().resolve()?;
    let pts: Vec<ThetaPoint> = tau_grid
        .par_iter()
        .map(|&t| theta_at_resolved(&r0, seq, t))
        .collect::<Result<_>>()?;
    Ok(ThetaCurve {
        tau_s: tau_grid.to_vec(),
        theta_rad: pts.iter().map(|t| t.theta_rad).collect(),
        axis_x_sq: pts.iter().map(|t| t.axis_x_sq).collect(),
        detuning_hz: p.detuning_hz,
        pulse_width_s: p.pulse_width_s,
    })
}

/// Predicted positions of the two dips of harmonic `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipPrediction {
    pub harmonic_k: u32,
    pub tau_plus_s: f64,
    pub tau_minus_s: f64,
    /// Signed θ at τ+.
    pub theta_plus_rad: f64,
    /// Signed θ at τ−.
    pub theta_minus_rad: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl DipPrediction {
    pub fn splitting_s(&self) -> f64 {
        self.tau_plus_s - self.tau_minus_s
    }

    /// The dip at which an electron prepared in X+ (`electron_plus`) or X−
    /// exchanges polarization with a nucleus in ↑ (`nuclear_up`) or ↓.
    ///
    /// X+↑ meets X−↓ where ωLτ = (2k−1)π − θ, X+↓ meets X−↑ where
    /// ωLτ = (2k−1)π + θ.
    pub fn selective_tau(&self, electron_plus: bool, nuclear_up: bool) -> f64 {
        let minus_side = electron_plus == nuclear_up;
        let theta_positive = if minus_side {
            self.theta_minus_rad >= 0.0
        } else {
            self.theta_plus_rad >= 0.0
        };
        if minus_side == theta_positive {
            self.tau_minus_s
        } else {
            self.tau_plus_s
        }
    }
}

/// τ = ((2k−1)π + sign·2|θ|/P)/|ωL| for a period with P pulses.
pub fn dip_formula(omega_l: f64, k: u32, theta_rad: f64, sign: f64, pulses_per_period: usize) -> f64 {
    let pairs = 0.5 * pulses_per_period.max(1) as f64;
    ((2 * k - 1) as f64 * PI + sign * theta_rad.abs() / pairs) / omega_l.abs()
}

/// Solves the dip equation by fixed-point iteration from (2k−1)π/ωL.
///
/// The prediction uses the A = 0 propagator, so it does not depend on the
/// hyperfine coupling. A run that hits the iteration cap is returned with
/// `converged = false`.
pub fn predict_dips(p: &SpinSystemParams, seq: &Sequence, k: u32) -> Result<DipPrediction> {
    if k == 0 {
        return Err(Error::InvalidInput("harmonic must be at least 1".into()));
    }
    let r0 = p.clone().uncoupled().resolve()?;
    if r0.omega_l == 0.0 {
        return Err(Error::InvalidInput("dip prediction needs a non-zero Larmor frequency".into()));
    }
    let seed = dip_formula(r0.omega_l, k, 0.0, 1.0, 2);
    let pulses = seq.compile_at(seed, &r0)?.pulses_per_period;

    let solve = |sign: f64| -> Result<(f64, f64, bool, usize)> {
        let mut tau = seed;
        for it in 1..=DIP_MAX_ITER {
            let t = theta_at_resolved(&r0, seq, tau)?;
            if !t.in_regime() {
                return Err(Error::OutOfRegime {
                    tau_s: tau,
                    axis_x_sq: t.axis_x_sq,
                });
            }
            let next = dip_formula(r0.omega_l, k, t.theta_rad, sign, pulses);
            if (next - tau).abs() < DIP_TOL_S {
                let th = theta_at_resolved(&r0, seq, next)?.theta_rad;
                return Ok((next, th, true, it));
            }
            tau = next;
        }
        let th = theta_at_resolved(&r0, seq, tau)?.theta_rad;
        Ok((tau, th, false, DIP_MAX_ITER))
    };
    let (tau_plus_s, theta_plus_rad, cp, ip) = solve(1.0)?;
    let (tau_minus_s, theta_minus_rad, cm, im) = solve(-1.0)?;
    Ok(DipPrediction {
        harmonic_k: k,
        tau_plus_s,
        tau_minus_s,
        theta_plus_rad,
        theta_minus_rad,
        converged: cp && cm,
        iterations: ip.max(im),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdsl::Preset;

    #[test]
    fn ideal_dips_sit_at_odd_harmonics() {
        let p = SpinSystemParams::new(2.1e6).with_hyperfine(44e3, 0.0);
        let seq = Sequence::preset(Preset::Cpmg);
        let d = predict_dips(&p, &seq, 1).unwrap();
        assert!(d.converged);
        assert!((d.tau_plus_s - 1.0 / 4.2e6).abs() < 1e-20);
        assert_eq!(d.tau_plus_s, d.tau_minus_s);
        let d2 = predict_dips(&p, &seq, 2).unwrap();
        assert!((d2.tau_plus_s - 3.0 / 4.2e6).abs() < 1e-20);
    }

    #[test]
    fn rejects_bad_harmonic_and_zero_larmor() {
        let seq = Sequence::preset(Preset::Cpmg);
        let p = SpinSystemParams::new(2.1e6);
        assert!(matches!(predict_dips(&p, &seq, 0), Err(Error::InvalidInput(_))));
        let p = SpinSystemParams::new(0.0);
        assert!(matches!(predict_dips(&p, &seq, 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn selective_tau_follows_theta_sign() {
        let mut d = DipPrediction {
            harmonic_k: 1,
            tau_plus_s: 2.0,
            tau_minus_s: 1.0,
            theta_plus_rad: 0.1,
            theta_minus_rad: 0.1,
            converged: true,
            iterations: 3,
        };
        assert_eq!(d.selective_tau(true, true), 1.0);
        assert_eq!(d.selective_tau(true, false), 2.0);
        assert_eq!(d.selective_tau(false, true), 2.0);
        d.theta_plus_rad = -0.1;
        d.theta_minus_rad = -0.1;
        assert_eq!(d.selective_tau(true, true), 2.0);
        assert_eq!(d.selective_tau(true, false), 1.0);
    }
}
