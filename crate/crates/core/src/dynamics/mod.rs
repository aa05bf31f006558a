//! Density-matrix evolution under repeated periods, the coherence
//! L = ⟨2Sx⟩ and polarization P = ⟨2Iz⟩ observables, and sweeps built on
//! them.

mod oracle;

use std::f64::consts::FRAC_1_SQRT_2;

use rayon::prelude::*;

use crate::export::Metadata;
use crate::floquet::period_propagator_resolved;
use crate::kernel::{herm_eig, kron, partial_trace, CMat, Subsystem, C64};
use crate::seqdsl::Sequence;
use crate::spinsys::{Operators, Resolved, SpinSystemParams};
use crate::{Error, Result};

pub use oracle::oracle_evolve;

const STATE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-12;
const IMAG_TOL: f64 = 1e-10;

/// Electron preparation. |X±⟩ = (|u⟩ ± |d⟩)/√2; `ZeroKet` is |d⟩ (ms = 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElectronState {
    XPlus,
    XMinus,
    ZeroKet,
    Custom(CMat),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NuclearState {
    MixedHalf,
    Up,
    Down,
    Custom(CMat),
}

impl ElectronState {
    pub fn density(&self) -> CMat {
        let r = FRAC_1_SQRT_2;
        match self {
            ElectronState::XPlus => ket_density(&[r, r]),
            ElectronState::XMinus => ket_density(&[r, -r]),
            ElectronState::ZeroKet => ket_density(&[0.0, 1.0]),
            ElectronState::Custom(m) => *m,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ElectronState::XPlus => "X+",
            ElectronState::XMinus => "X-",
            ElectronState::ZeroKet => "0",
            ElectronState::Custom(_) => "custom",
        }
    }
}

impl NuclearState {
    pub fn density(&self) -> CMat {
        match self {
            NuclearState::MixedHalf => CMat::identity(2).scale_re(0.5),
            NuclearState::Up => ket_density(&[1.0, 0.0]),
            NuclearState::Down => ket_density(&[0.0, 1.0]),
            NuclearState::Custom(m) => *m,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NuclearState::MixedHalf => "mixed",
            NuclearState::Up => "up",
            NuclearState::Down => "down",
            NuclearState::Custom(_) => "custom",
        }
    }
}

fn ket_density(v: &[f64; 2]) -> CMat {
    let c = [C64::new(v[0], 0.0), C64::new(v[1], 0.0)];
    CMat::outer(&c, &c).expect("2-vectors")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState {
    pub electron: ElectronState,
    pub nuclear: NuclearState,
}

impl InitialState {
    pub fn new(electron: ElectronState, nuclear: NuclearState) -> Self {
        InitialState { electron, nuclear }
    }

    /// ρe ⊗ ρn, validated.
    pub fn density(&self) -> Result<DensityState> {
        let e = self.electron.density();
        let n = self.nuclear.density();
        for (name, m) in [("electron", &e), ("nuclear", &n)] {
            if m.dim() != 2 {
                return Err(Error::InvalidInput(format!("{name} state must be 2×2")));
            }
        }
        DensityState::new(kron(&e, &n)?)
    }
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::new(ElectronState::XPlus, NuclearState::MixedHalf)
    }
}

/// A validated 4×4 density matrix: unit trace, Hermitian, positive
/// semidefinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityState(CMat);

impl DensityState {
    pub fn new(m: CMat) -> Result<Self> {
        if m.dim() != 4 {
            return Err(Error::InvalidInput(format!("density matrix must be 4×4, got {}", m.dim())));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidInput(format!("density matrix trace is {tr}")));
        }
        if m.hermiticity_error() > STATE_TOL {
            return Err(Error::InvalidInput("density matrix is not Hermitian".into()));
        }
        let min = herm_eig(&m)?.values()[0];
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidInput(format!(
                "density matrix has negative eigenvalue {min:e}"
            )));
        }
        Ok(DensityState(m))
    }

    pub(crate) fn new_unchecked(m: CMat) -> Self {
        DensityState(m)
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(herm_eig(&self.0)?.values()[0])
    }

    pub fn reduced(&self, keep: Subsystem) -> Result<CMat> {
        Ok(partial_trace(&self.0, keep)?)
    }
}

fn expectation(rho: &DensityState, op: &CMat) -> f64 {
    let v = (*rho.matrix() * *op).trace();
    debug_assert!(v.im.abs() < IMAG_TOL, "expectation has imaginary part {}", v.im);
    v.re
}

/// L = Tr(ρ·2Sx)
pub fn coherence(rho: &DensityState) -> f64 {
    expectation(rho, &Operators::get().sx.scale_re(2.0))
}

/// P = Tr(ρ·2Iz)
pub fn polarization(rho: &DensityState) -> f64 {
    expectation(rho, &Operators::get().iz.scale_re(2.0))
}

/// Optical reset of the electron to |d⟩, keeping the nuclear marginal.
pub fn electron_reset(rho: &DensityState) -> Result<DensityState> {
    let n = partial_trace(rho.matrix(), Subsystem::Nuclear)?;
    Ok(DensityState(kron(&ElectronState::ZeroKet.density(), &n)?))
}

/// ρ → Uⁿ·ρ·U†ⁿ with U the period propagator.
pub fn evolve(
    rho0: &DensityState,
    p: &SpinSystemParams,
    seg: &crate::seqdsl::SegmentList,
    n_periods: u64,
) -> Result<DensityState> {
    let u = period_propagator_resolved(&p.resolve()?, seg)?;
    Ok(evolve_with(rho0, &u, n_periods))
}

fn evolve_with(rho0: &DensityState, u: &CMat, n_periods: u64) -> DensityState {
    if n_periods == 0 {
        return *rho0;
    }
    DensityState(rho0.matrix().conjugate_by(&u.pow(n_periods)))
}

/// Number of periods that realize `n_pulses` pulses.
pub fn periods_for(n_pulses: u64, pulses_per_period: usize) -> Result<u64> {
    let ppp = pulses_per_period as u64;
    if ppp == 0 {
        return Err(Error::InvalidInput("sequence period has no pulses".into()));
    }
    if n_pulses % ppp != 0 {
        return Err(Error::InvalidInput(format!(
            "{n_pulses} pulses is not a whole number of {ppp}-pulse periods"
        )));
    }
    Ok(n_pulses / ppp)
}

fn final_state(
    r: &Resolved,
    seq: &Sequence,
    tau_s: f64,
    n_pulses: u64,
    rho0: &DensityState,
) -> Result<DensityState> {
    let seg = seq.compile_at(tau_s, r)?;
    let n = periods_for(n_pulses, seg.pulses_per_period)?;
    let u = period_propagator_resolved(r, &seg)?;
    Ok(evolve_with(rho0, &u, n))
}

/// Coherence (and polarization) over a τ grid, one row per detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    pub tau_s: Vec<f64>,
    pub detuning_hz: Vec<f64>,
    pub pulse_width_s: f64,
    pub n_pulses: u64,
    /// Row-major over (detuning, τ).
    pub coherence: Vec<f64>,
    /// Row-major over (detuning, τ).
    pub polarization: Vec<f64>,
    pub metadata: Metadata,
}

impl TraceResult {
    pub fn row(&self, d: usize) -> &[f64] {
        let n = self.tau_s.len();
        &self.coherence[d * n..(d + 1) * n]
    }
}

fn check_grid(name: &str, g: &[f64]) -> Result<()> {
    if g.is_empty() {
        return Err(Error::InvalidInput(format!("{name} grid is empty")));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{name} grid has non-finite values")));
    }
    Ok(())
}

pub fn coherence_trace(
    p: &SpinSystemParams,
    seq: &Sequence,
    tau_grid: &[f64],
    n_pulses: u64,
    initial: &InitialState,
) -> Result<TraceResult> {
    check_grid("tau", tau_grid)?;
    let r = p.resolve()?;
    let rho0 = initial.density()?;
    let out: Vec<(f64, f64)> = tau_grid
        .par_iter()
        .map(|&t| {
            let rho = final_state(&r, seq, t, n_pulses, &rho0)?;
            Ok((coherence(&rho), polarization(&rho)))
        })
        .collect::<Result<_>>()?;
    let mut metadata = Metadata::for_run(p, seq);
    metadata.push("n_pulses", n_pulses);
    metadata.push("electron_initial", initial.electron.name());
    metadata.push("nuclear_initial", initial.nuclear.name());
    Ok(TraceResult {
        tau_s: tau_grid.to_vec(),
        detuning_hz: vec![p.detuning_hz],
        pulse_width_s: p.pulse_width_s,
        n_pulses,
        coherence: out.iter().map(|o| o.0).collect(),
        polarization: out.iter().map(|o| o.1).collect(),
        metadata,
    })
}

/// One (detuning × τ) coherence map per pulse width.
pub fn detuning_sweep(
    p: &SpinSystemParams,
    seq: &Sequence,
    tau_grid: &[f64],
    delta_grid: &[f64],
    n_pulses: u64,
    tp_list: &[f64],
    initial: &InitialState,
) -> Result<Vec<TraceResult>> {
    check_grid("tau", tau_grid)?;
    check_grid("detuning", delta_grid)?;
    check_grid("pulse width", tp_list)?;
    let rho0 = initial.density()?;
    let mut maps = Vec::with_capacity(tp_list.len());
    for &tp in tp_list {
        let base = p.clone().with_pulse_width(tp);
        let resolved: Vec<Resolved> = delta_grid
            .iter()
            .map(|&d| base.clone().with_detuning(d).resolve())
            .collect::<std::result::Result<_, _>>()?;
        let cells: Vec<(usize, usize)> = (0..delta_grid.len())
            .flat_map(|d| (0..tau_grid.len()).map(move |t| (d, t)))
            .collect();
        let out: Vec<(f64, f64)> = cells
            .par_iter()
            .map(|&(d, t)| {
                let rho = final_state(&resolved[d], seq, tau_grid[t], n_pulses, &rho0)?;
                Ok((coherence(&rho), polarization(&rho)))
            })
            .collect::<Result<_>>()?;
        let mut metadata = Metadata::for_run(&base, seq);
        metadata.push("n_pulses", n_pulses);
        metadata.push("electron_initial", initial.electron.name());
        metadata.push("nuclear_initial", initial.nuclear.name());
        maps.push(TraceResult {
            tau_s: tau_grid.to_vec(),
            detuning_hz: delta_grid.to_vec(),
            pulse_width_s: tp,
            n_pulses,
            coherence: out.iter().map(|o| o.0).collect(),
            polarization: out.iter().map(|o| o.1).collect(),
            metadata,
        });
    }
    Ok(maps)
}

/// Target of a nuclear gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateTarget {
    /// Start from |↑⟩ (`from_up`) or |↓⟩ and score the flipped population.
    Flip { from_up: bool },
    PolarizeUp,
    PolarizeDown,
}

/// Population of the gate's target nuclear state after `n_pulses` pulses
/// at spacing `tau_s`.
pub fn nuclear_gate_fidelity(
    p: &SpinSystemParams,
    seq: &Sequence,
    tau_s: f64,
    n_pulses: u64,
    target: GateTarget,
    electron: ElectronState,
) -> Result<f64> {
    let r = p.resolve()?;
    let (nuclear, want_up) = match target {
        GateTarget::Flip { from_up } => (if from_up { NuclearState::Up } else { NuclearState::Down }, !from_up),
        GateTarget::PolarizeUp => (NuclearState::MixedHalf, true),
        GateTarget::PolarizeDown => (NuclearState::MixedHalf, false),
    };
    let rho0 = InitialState::new(electron, nuclear).density()?;
    let mut rho = final_state(&r, seq, tau_s, n_pulses, &rho0)?;
    if !matches!(target, GateTarget::Flip { .. }) {
        rho = electron_reset(&rho)?;
    }
    let n = partial_trace(rho.matrix(), Subsystem::Nuclear)?;
    let k = if want_up { 0 } else { 1 };
    Ok(n[(k, k)].re.clamp(0.0, 1.0))
}

/// L(N) and P(N) for N = P, 2P, … ≤ `n_max` where P is the number of pulses
/// per period.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationScan {
    pub tau_s: f64,
    pub pulse_counts: Vec<u64>,
    pub polarization: Vec<f64>,
    pub coherence: Vec<f64>,
    /// Smallest N with |P(N)| ≥ 0.999·max|P|.
    pub n_init: Option<u64>,
    /// Flip fidelity at `n_init` for the nuclear state the scan pumps away
    /// from.
    pub fidelity: Option<f64>,
    pub metadata: Metadata,
}

pub const N_INIT_FRACTION: f64 = 0.999;

pub fn pulse_number_scan(
    p: &SpinSystemParams,
    seq: &Sequence,
    tau_s: f64,
    n_max: u64,
    initial: &InitialState,
) -> Result<PolarizationScan> {
    let r = p.resolve()?;
    let seg = seq.compile_at(tau_s, &r)?;
    let ppp = seg.pulses_per_period as u64;
    if ppp == 0 || n_max < ppp {
        return Err(Error::InvalidInput(format!(
            "pulse number scan needs n_max ≥ {ppp} pulses"
        )));
    }
    let u = period_propagator_resolved(&r, &seg)?;
    let mut rho = initial.density()?;
    let (mut counts, mut pol, mut coh) = (Vec::new(), Vec::new(), Vec::new());
    let mut n = 0;
    while n + ppp <= n_max {
        rho = DensityState(rho.matrix().conjugate_by(&u));
        n += ppp;
        counts.push(n);
        pol.push(polarization(&rho));
        coh.push(coherence(&rho));
    }
    let max = pol.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let idx = (max > 0.0).then(|| {
        pol.iter()
            .position(|v| v.abs() >= N_INIT_FRACTION * max)
            .expect("the maximum qualifies")
    });
    let n_init = idx.map(|i| counts[i]);
    let fidelity = match idx {
        Some(i) => Some(nuclear_gate_fidelity(
            p,
            seq,
            tau_s,
            counts[i],
            GateTarget::Flip { from_up: pol[i] < 0.0 },
            initial.electron,
        )?),
        None => None,
    };
    let mut metadata = Metadata::for_run(p, seq);
    metadata.push("tau_s", crate::export::sci(tau_s));
    metadata.push("n_max", n_max);
    metadata.push("electron_initial", initial.electron.name());
    metadata.push("nuclear_initial", initial.nuclear.name());
    metadata.push("n_init_fraction", N_INIT_FRACTION);
    match n_init {
        Some(v) => metadata.push("n_init", v),
        None => metadata.push("n_init", "none"),
    }
    match fidelity {
        Some(f) => metadata.push("flip_fidelity", crate::export::sci(f)),
        None => metadata.push("flip_fidelity", "none"),
    }
    Ok(PolarizationScan {
        tau_s,
        pulse_counts: counts,
        polarization: pol,
        coherence: coh,
        n_init,
        fidelity,
        metadata,
    })
}

/// Half-width of the window used by [`dip_center`]: two nuclear periods
/// divided by the pulse count, 2/(N·fL).
pub fn dip_window(n_pulses: u64, larmor_hz: f64) -> f64 {
    2.0 / (n_pulses as f64 * larmor_hz.abs())
}

/// Centre of the coherence dip around the grid minimum: the centroid of
/// 1 − L within ±`half_window`, recentred until it stops moving.
///
/// Returns `None` for an empty grid or a window that contains no dip weight.
pub fn dip_center(tau_s: &[f64], coherence: &[f64], half_window: f64) -> Option<f64> {
    if tau_s.is_empty() || tau_s.len() != coherence.len() {
        return None;
    }
    let imin = (0..coherence.len()).min_by(|&a, &b| coherence[a].total_cmp(&coherence[b]))?;
    let mut c = tau_s[imin];
    for _ in 0..100 {
        let (mut num, mut den) = (0.0, 0.0);
        for (&t, &l) in tau_s.iter().zip(coherence) {
            if (t - c).abs() <= half_window {
                let w = 1.0 - l;
                num += w * t;
                den += w;
            }
        }
        if den <= 0.0 {
            return None;
        }
        let next = num / den;
        if (next - c).abs() < 1e-18 {
            return Some(next);
        }
        c = next;
    }
    Some(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observables_on_simple_states() {
        let rho = InitialState::new(ElectronState::XPlus, NuclearState::MixedHalf)
            .density()
            .unwrap();
        assert!((coherence(&rho) - 1.0).abs() < 1e-15);
        assert!(polarization(&rho).abs() < 1e-15);
        let u = CMat::diag(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        let rho = DensityState::new(u).unwrap();
        assert_eq!(coherence(&rho), 0.0);
        assert_eq!(polarization(&rho), 1.0);
        let mixed = DensityState::new(CMat::identity(4).scale_re(0.25)).unwrap();
        assert_eq!(coherence(&mixed), 0.0);
        assert_eq!(polarization(&mixed), 0.0);
    }

    #[test]
    fn rejects_invalid_states() {
        assert!(DensityState::new(CMat::identity(4)).is_err());
        assert!(DensityState::new(CMat::identity(2)).is_err());
        let neg = CMat::diag(&[C64::new(1.5, 0.0), C64::new(-0.5, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        assert!(DensityState::new(neg).is_err());
    }

    #[test]
    fn reset_keeps_nuclear_marginal() {
        let rho = InitialState::new(ElectronState::XMinus, NuclearState::Up).density().unwrap();
        let r = electron_reset(&rho).unwrap();
        let want = InitialState::new(ElectronState::ZeroKet, NuclearState::Up).density().unwrap();
        assert!(r.matrix().distance(want.matrix()) < 1e-15);
    }

    #[test]
    fn periods_must_divide() {
        assert_eq!(periods_for(336, 2).unwrap(), 168);
        assert!(periods_for(10, 8).is_err());
        assert!(periods_for(10, 0).is_err());
    }

    #[test]
    fn centroid_of_symmetric_dip() {
        let taus: Vec<f64> = (0..201).map(|i| i as f64 * 0.01).collect();
        let l: Vec<f64> = taus.iter().map(|t| 1.0 - (-((t - 1.234) / 0.05f64).powi(2)).exp()).collect();
        let c = dip_center(&taus, &l, 0.3).unwrap();
        assert!((c - 1.234).abs() < 1e-6, "{c}");
        assert!(dip_center(&[], &[], 1.0).is_none());
        assert!(dip_center(&[0.0, 1.0], &[1.0, 1.0], 0.5).is_none());
    }
}
