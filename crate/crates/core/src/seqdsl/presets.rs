use std::fmt;
use std::str::FromStr;

use super::{parse, DslError, SequenceProgram};
use crate::spinsys::SpinSystemParams;

/// Built-in sequences. Each program describes one period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// CPMG: two π pulses about x per period.
    Cpmg,
    /// CPMG run with finite pulses off resonance.
    DnssDetuned,
    /// CPMG with every pulse over-rotated by `eps`.
    DnssFlip,
    /// XY-8 phase cycle, eight π pulses per period.
    Xy8,
}

const CPMG_SRC: &str = "\
wait tau/2;
pulse pi x;
wait tau;
pulse pi x;
wait tau/2;
";

const FLIP_SRC: &str = "\
param eps = 0;
wait tau/2;
pulse pi+eps x;
wait tau;
pulse pi+eps x;
wait tau/2;
";

const XY8_SRC: &str = "\
wait tau/2;
pulse pi x; wait tau;
pulse pi y; wait tau;
pulse pi x; wait tau;
pulse pi y; wait tau;
pulse pi y; wait tau;
pulse pi x; wait tau;
pulse pi y; wait tau;
pulse pi x;
wait tau/2;
";

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Cpmg, Preset::DnssDetuned, Preset::DnssFlip, Preset::Xy8];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Cpmg => "cpmg",
            Preset::DnssDetuned => "dnss_detuned",
            Preset::DnssFlip => "dnss_flip",
            Preset::Xy8 => "xy8",
        }
    }

    pub fn source(self) -> &'static str {
        match self {
            Preset::Cpmg | Preset::DnssDetuned => CPMG_SRC,
            Preset::DnssFlip => FLIP_SRC,
            Preset::Xy8 => XY8_SRC,
        }
    }

    pub fn program(self) -> SequenceProgram {
        parse(self.source()).expect("built-in preset parses")
    }

    /// Checks that `p` is a setting the preset is meant for.
    pub fn validate(self, p: &SpinSystemParams) -> Result<(), DslError> {
        let bad = |m: &str| Err(DslError::InvalidPreset(format!("{}: {m}", self.name())));
        match self {
            Preset::DnssDetuned => {
                if p.detuning_hz == 0.0 {
                    return bad("requires a non-zero detuning");
                }
                if p.pulse_width_s <= 0.0 {
                    return bad("requires a finite pulse width");
                }
            }
            Preset::DnssFlip => {
                if p.detuning_hz != 0.0 {
                    return bad("requires zero detuning");
                }
            }
            Preset::Cpmg | Preset::Xy8 => {}
        }
        Ok(())
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = DslError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| DslError::InvalidPreset(format!("unknown preset `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdsl::{compile, Bindings, PulseDrive, TimingConvention};
    use std::f64::consts::PI;

    fn compiled(p: Preset, tau: f64, drive: PulseDrive, extra: &[(&str, f64)]) -> super::super::SegmentList {
        let mut b = Bindings::from([("tau".to_string(), tau)]);
        for (k, v) in extra {
            b.insert(k.to_string(), *v);
        }
        compile(&p.program(), &b, TimingConvention::Center, drive).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!(matches!("xy4".parse::<Preset>(), Err(DslError::InvalidPreset(_))));
    }

    #[test]
    fn cpmg_has_two_pulses() {
        let s = compiled(Preset::Cpmg, 238e-9, PulseDrive::delta(), &[]);
        assert_eq!(s.pulses_per_period, 2);
        assert_eq!(s.period.len(), 5);
    }

    #[test]
    fn flip_with_zero_eps_is_cpmg() {
        for drive in [PulseDrive::delta(), PulseDrive::top_hat(40e-9)] {
            let a = compiled(Preset::Cpmg, 238e-9, drive, &[]);
            let b = compiled(Preset::DnssFlip, 238e-9, drive, &[]);
            let c = compiled(Preset::DnssFlip, 238e-9, drive, &[("eps", 0.0)]);
            assert_eq!(a, b);
            assert_eq!(a, c);
        }
    }

    #[test]
    fn xy8_phase_table() {
        let s = compiled(Preset::Xy8, 238e-9, PulseDrive::top_hat(40e-9), &[]);
        let phases: Vec<f64> = s
            .period
            .iter()
            .filter_map(|seg| match seg {
                crate::spinsys::Segment::Pulse { phase_rad, .. } => Some(*phase_rad),
                _ => None,
            })
            .collect();
        let h = PI / 2.0;
        assert_eq!(phases, [0.0, h, 0.0, h, h, 0.0, h, 0.0]);
        assert!(((s.period_duration_s - 8.0 * 238e-9) / (8.0 * 238e-9)).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        let base = SpinSystemParams::new(2.1e6).with_pulse_width(40e-9);
        assert!(Preset::DnssDetuned.validate(&base).is_err());
        assert!(Preset::DnssDetuned.validate(&base.clone().with_detuning(1e6)).is_ok());
        assert!(Preset::DnssDetuned
            .validate(&base.clone().with_detuning(1e6).with_pulse_width(0.0))
            .is_err());
        assert!(Preset::DnssFlip.validate(&base).is_ok());
        assert!(Preset::DnssFlip.validate(&base.clone().with_detuning(1e6)).is_err());
        assert!(Preset::Cpmg.validate(&base).is_ok());
    }
}
