//! Electron pseudo-spin-½ ⊗ nuclear spin-½ Hamiltonians in the frame
//! rotating at the microwave drive.
//!
//! Basis order is |u↑⟩, |u↓⟩, |d↑⟩, |d↓⟩ with |u⟩ the driven level
//! (ms = −1) and |d⟩ the optically pumped ms = 0 level. The electron
//! operator Sz is the projector onto |u⟩, so the conditional nuclear
//! Hamiltonians are ωL·Iz for |d⟩ and ωL·Iz + A⃗·I⃗ for |u⟩.
//!
//! Inputs are ordinary frequencies in Hz; everything inside is rad/s.

use std::f64::consts::PI;
use std::sync::OnceLock;

use thiserror::Error;

use crate::kernel::{expm_i, expm_i_eig, kron, pauli, CMat, HermEig, KernelError, C64};

/// γ/2π for ¹H in Hz per gauss.
pub const GAMMA_H1_HZ_PER_G: f64 = 4257.7;
/// γ/2π for ¹³C in Hz per gauss.
pub const GAMMA_C13_HZ_PER_G: f64 = 1070.5;

/// Relative tolerance when both `larmor_hz` and `bz_gauss` are given.
const LARMOR_CONSISTENCY: f64 = 1e-6;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParamError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unknown nuclear species `{0}`")]
    UnknownSpecies(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Species {
    H1,
    C13,
    Custom { gamma_hz_per_gauss: f64 },
}

impl Species {
    pub fn gamma_hz_per_gauss(&self) -> f64 {
        match *self {
            Species::H1 => GAMMA_H1_HZ_PER_G,
            Species::C13 => GAMMA_C13_HZ_PER_G,
            Species::Custom { gamma_hz_per_gauss } => gamma_hz_per_gauss,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Species::H1 => "H1",
            Species::C13 => "C13",
            Species::Custom { .. } => "custom",
        }
    }
}

impl std::str::FromStr for Species {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "h1" | "1h" | "proton" => Ok(Species::H1),
            "c13" | "13c" => Ok(Species::C13),
            _ => Err(ParamError::UnknownSpecies(s.to_string())),
        }
    }
}

/// Nuclear Larmor frequency (Hz) of `species` in a static field of `bz_gauss`.
pub fn larmor_from_field(species: Species, bz_gauss: f64) -> f64 {
    species.gamma_hz_per_gauss() * bz_gauss
}

/// Drive strength during finite-width pulses.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Rabi {
    /// Ω = π/tp, a resonant π rotation per pulse.
    #[default]
    Auto,
    /// Ω/2π in Hz.
    Hz(f64),
}

/// Physical constants of one electron–nuclear pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSystemParams {
    pub larmor_hz: Option<f64>,
    pub a_perp_hz: f64,
    pub a_par_hz: f64,
    pub detuning_hz: f64,
    pub rabi: Rabi,
    pub pulse_width_s: f64,
    pub bz_gauss: Option<f64>,
    pub species: Option<Species>,
}

impl SpinSystemParams {
    pub fn new(larmor_hz: f64) -> Self {
        SpinSystemParams {
            larmor_hz: Some(larmor_hz),
            a_perp_hz: 0.0,
            a_par_hz: 0.0,
            detuning_hz: 0.0,
            rabi: Rabi::Auto,
            pulse_width_s: 0.0,
            bz_gauss: None,
            species: None,
        }
    }

    /// Larmor frequency taken from a species and field.
    pub fn from_field(species: Species, bz_gauss: f64) -> Self {
        SpinSystemParams {
            larmor_hz: None,
            bz_gauss: Some(bz_gauss),
            species: Some(species),
            ..Self::new(0.0)
        }
    }

    pub fn with_hyperfine(mut self, a_perp_hz: f64, a_par_hz: f64) -> Self {
        self.a_perp_hz = a_perp_hz;
        self.a_par_hz = a_par_hz;
        self
    }

    pub fn with_detuning(mut self, detuning_hz: f64) -> Self {
        self.detuning_hz = detuning_hz;
        self
    }

    pub fn with_pulse_width(mut self, pulse_width_s: f64) -> Self {
        self.pulse_width_s = pulse_width_s;
        self
    }

    pub fn with_rabi(mut self, rabi: Rabi) -> Self {
        self.rabi = rabi;
        self
    }

    /// Same system with the hyperfine coupling switched off.
    pub fn uncoupled(mut self) -> Self {
        self.a_perp_hz = 0.0;
        self.a_par_hz = 0.0;
        self
    }

    /// Resolved Larmor frequency in Hz.
    pub fn larmor(&self) -> Result<f64, ParamError> {
        let derived = match (self.species, self.bz_gauss) {
            (Some(sp), Some(bz)) => Some(larmor_from_field(sp, bz)),
            (None, Some(_)) => {
                return Err(ParamError::InvalidParams(
                    "bz_gauss given without a nuclear species".into(),
                ))
            }
            _ => None,
        };
        match (self.larmor_hz, derived) {
            (Some(f), Some(d)) => {
                let scale = f.abs().max(d.abs());
                if scale > 0.0 && (f - d).abs() > LARMOR_CONSISTENCY * scale {
                    Err(ParamError::InvalidParams(format!(
                        "larmor_hz = {f} Hz disagrees with γ·Bz = {d} Hz"
                    )))
                } else {
                    Ok(f)
                }
            }
            (Some(f), None) => Ok(f),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(ParamError::InvalidParams(
                "no Larmor frequency: give larmor_hz or species + bz_gauss".into(),
            )),
        }
    }

    /// Checks every field and returns the angular-frequency form.
    pub fn resolve(&self) -> Result<Resolved, ParamError> {
        let larmor = self.larmor()?;
        let finite = [
            ("larmor_hz", larmor),
            ("a_perp_hz", self.a_perp_hz),
            ("a_par_hz", self.a_par_hz),
            ("detuning_hz", self.detuning_hz),
            ("pulse_width_s", self.pulse_width_s),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(ParamError::InvalidParams(format!("{name} is not finite")));
            }
        }
        if self.pulse_width_s < 0.0 {
            return Err(ParamError::InvalidParams(format!(
                "pulse_width_s = {} is negative",
                self.pulse_width_s
            )));
        }
        let pi_rabi = if self.pulse_width_s == 0.0 {
            None
        } else {
            match self.rabi {
                Rabi::Auto => Some(PI / self.pulse_width_s),
                Rabi::Hz(hz) if hz.is_finite() && hz > 0.0 => Some(2.0 * PI * hz),
                Rabi::Hz(hz) => {
                    return Err(ParamError::InvalidParams(format!(
                        "rabi_hz = {hz} must be positive"
                    )))
                }
            }
        };
        Ok(Resolved {
            omega_l: 2.0 * PI * larmor,
            a_perp: 2.0 * PI * self.a_perp_hz,
            a_par: 2.0 * PI * self.a_par_hz,
            delta: 2.0 * PI * self.detuning_hz,
            pulse_width_s: self.pulse_width_s,
            pi_rabi,
        })
    }
}

/// Angular-frequency form of [`SpinSystemParams`] (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub omega_l: f64,
    pub a_perp: f64,
    pub a_par: f64,
    pub delta: f64,
    pub pulse_width_s: f64,
    /// Drive strength that makes a π rotation in one pulse width; `None` for
    /// delta pulses.
    pub pi_rabi: Option<f64>,
}

/// Spin operators on the 4-dimensional product space.
#[derive(Debug, Clone, Copy)]
pub struct Operators {
    pub sx: CMat,
    pub sy: CMat,
    pub sz: CMat,
    pub ix: CMat,
    pub iy: CMat,
    pub iz: CMat,
}

impl Operators {
    pub fn get() -> &'static Operators {
        static OPS: OnceLock<Operators> = OnceLock::new();
        OPS.get_or_init(|| {
            let id = pauli::id();
            let half = |m: CMat| m.scale_re(0.5);
            let k = |a: &CMat, b: &CMat| kron(a, b).expect("2×2 factors");
            let projector_u = half(pauli::z() + id);
            Operators {
                sx: k(&half(pauli::x()), &id),
                sy: k(&half(pauli::y()), &id),
                sz: k(&projector_u, &id),
                ix: k(&id, &half(pauli::x())),
                iy: k(&id, &half(pauli::y())),
                iz: k(&id, &half(pauli::z())),
            }
        })
    }
}

/// One piecewise-constant interval of a pulse sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Free {
        duration_s: f64,
    },
    /// A drive pulse with carrier phase φ. With `duration_s = 0` it is an
    /// instantaneous rotation by `angle_rad`; otherwise the drive is
    /// `rabi_rad_s·(cosφ·Sx + sinφ·Sy)` for `duration_s`.
    Pulse {
        duration_s: f64,
        angle_rad: f64,
        phase_rad: f64,
        rabi_rad_s: f64,
    },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Free { duration_s } | Segment::Pulse { duration_s, .. } => duration_s,
        }
    }

    pub fn is_pulse(&self) -> bool {
        matches!(self, Segment::Pulse { .. })
    }

    pub fn is_delta_pulse(&self) -> bool {
        matches!(self, Segment::Pulse { duration_s, .. } if *duration_s == 0.0)
    }
}

/// Hamiltonian (rad/s) of the free part: ωL·Iz + Sz(A⊥·Ix + A∥·Iz) + Δ·Sz.
pub fn free_hamiltonian(r: &Resolved) -> CMat {
    let ops = Operators::get();
    let coupling = ops.ix.scale_re(r.a_perp) + ops.iz.scale_re(r.a_par);
    ops.iz.scale_re(r.omega_l) + ops.sz * coupling + ops.sz.scale_re(r.delta)
}

/// Drive term Ω(cosφ·Sx + sinφ·Sy).
pub fn drive_hamiltonian(rabi_rad_s: f64, phase_rad: f64) -> CMat {
    let ops = Operators::get();
    let (s, c) = phase_rad.sin_cos();
    ops.sx.scale_re(rabi_rad_s * c) + ops.sy.scale_re(rabi_rad_s * s)
}

/// Hamiltonian of a finite-duration segment. Hyperfine and Larmor terms stay
/// on during pulses.
pub fn segment_hamiltonian(p: &SpinSystemParams, s: &Segment) -> Result<CMat, ParamError> {
    let r = p.resolve()?;
    segment_hamiltonian_resolved(&r, s)
}

pub(crate) fn segment_hamiltonian_resolved(r: &Resolved, s: &Segment) -> Result<CMat, ParamError> {
    match *s {
        Segment::Free { .. } => Ok(free_hamiltonian(r)),
        Segment::Pulse { duration_s, .. } if duration_s == 0.0 => Err(ParamError::InvalidParams(
            "an instantaneous pulse has no finite Hamiltonian".into(),
        )),
        Segment::Pulse {
            rabi_rad_s,
            phase_rad,
            ..
        } => Ok(free_hamiltonian(r) + drive_hamiltonian(rabi_rad_s, phase_rad)),
    }
}

/// Instantaneous rotation exp(−i·α·(cosφ·Sx + sinφ·Sy)).
pub fn delta_rotation(angle_rad: f64, phase_rad: f64) -> CMat {
    // (cosφ σx + sinφ σy)² = 𝟙, so the exponential has a closed form.
    let (s, c) = (0.5 * angle_rad).sin_cos();
    let e = C64::new(phase_rad.cos(), phase_rad.sin());
    let minus_i_s = C64::new(0.0, -s);
    let mut r = CMat::zeros(2);
    r[(0, 0)] = C64::new(c, 0.0);
    r[(1, 1)] = C64::new(c, 0.0);
    // cosφ σx + sinφ σy = [[0, e*], [e, 0]]
    r[(0, 1)] = minus_i_s * e.conj();
    r[(1, 0)] = minus_i_s * e;
    kron(&r, &pauli::id()).expect("2×2 factors")
}

/// exp(−i·H(s)·duration), or the instantaneous rotation for delta pulses.
pub fn segment_propagator(p: &SpinSystemParams, s: &Segment) -> Result<CMat, ParamError> {
    let r = p.resolve()?;
    segment_propagator_resolved(&r, s)
}

pub(crate) fn segment_propagator_resolved(r: &Resolved, s: &Segment) -> Result<CMat, ParamError> {
    match *s {
        Segment::Pulse {
            duration_s,
            angle_rad,
            phase_rad,
            ..
        } if duration_s == 0.0 => Ok(delta_rotation(angle_rad, phase_rad)),
        _ => {
            let h = segment_hamiltonian_resolved(r, s)?;
            Ok(expm_i(&h, s.duration())?)
        }
    }
}

/// Memoizes eigendecompositions for a period whose segments reuse a few
/// distinct Hamiltonians.
pub(crate) struct PropagatorCache {
    resolved: Resolved,
    free: Option<HermEig>,
    drives: Vec<((u64, u64), HermEig)>,
}

impl PropagatorCache {
    pub(crate) fn new(resolved: Resolved) -> Self {
        PropagatorCache {
            resolved,
            free: None,
            drives: Vec::new(),
        }
    }

    pub(crate) fn propagator(&mut self, s: &Segment) -> Result<CMat, ParamError> {
        match *s {
            Segment::Free { duration_s } => {
                if duration_s == 0.0 {
                    return Ok(CMat::identity(4));
                }
                if self.free.is_none() {
                    self.free = Some(crate::kernel::herm_eig(&free_hamiltonian(&self.resolved))?);
                }
                Ok(expm_i_eig(self.free.as_ref().expect("set above"), duration_s))
            }
            Segment::Pulse {
                duration_s,
                angle_rad,
                phase_rad,
                ..
            } if duration_s == 0.0 => Ok(delta_rotation(angle_rad, phase_rad)),
            Segment::Pulse {
                duration_s,
                phase_rad,
                rabi_rad_s,
                ..
            } => {
                let key = (rabi_rad_s.to_bits(), phase_rad.to_bits());
                if let Some((_, eig)) = self.drives.iter().find(|(k, _)| *k == key) {
                    return Ok(expm_i_eig(eig, duration_s));
                }
                let h = free_hamiltonian(&self.resolved) + drive_hamiltonian(rabi_rad_s, phase_rad);
                let eig = crate::kernel::herm_eig(&h)?;
                let u = expm_i_eig(&eig, duration_s);
                self.drives.push((key, eig));
                Ok(u)
            }
        }
    }
}
