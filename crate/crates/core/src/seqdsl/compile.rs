use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use super::{DslError, SequenceProgram, Span, Stmt};
use crate::spinsys::{Resolved, Segment};

pub type Bindings = BTreeMap<String, f64>;

/// How `tau` relates to the pulses around it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimingConvention {
    /// Waits are measured pulse centre to pulse centre: each pulse takes
    /// half its width from the wait on either side.
    #[default]
    Center,
    /// Waits are the free gaps between pulse edges; pulses add to the period.
    Edge,
}

impl TimingConvention {
    pub fn name(self) -> &'static str {
        match self {
            TimingConvention::Center => "center",
            TimingConvention::Edge => "edge",
        }
    }
}

impl fmt::Display for TimingConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TimingConvention {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "center" | "centre" => Ok(TimingConvention::Center),
            "edge" => Ok(TimingConvention::Edge),
            _ => Err(format!("unknown timing convention `{s}` (expected center or edge)")),
        }
    }
}

/// Pulse hardware settings used when compiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseDrive {
    /// Pulse width in seconds; 0 gives instantaneous rotations.
    pub width_s: f64,
    /// Drive strength (rad/s) that produces a π rotation in `width_s`.
    pub pi_rabi: Option<f64>,
}

impl PulseDrive {
    pub fn delta() -> Self {
        PulseDrive {
            width_s: 0.0,
            pi_rabi: None,
        }
    }

    /// Top-hat pulses of width `width_s` with Ω = π/width.
    pub fn top_hat(width_s: f64) -> Self {
        if width_s == 0.0 {
            return PulseDrive::delta();
        }
        PulseDrive {
            width_s,
            pi_rabi: Some(PI / width_s),
        }
    }

    pub fn from_resolved(r: &Resolved) -> Self {
        PulseDrive {
            width_s: r.pulse_width_s,
            pi_rabi: r.pi_rabi,
        }
    }
}

/// One compiled period.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentList {
    pub period: Vec<Segment>,
    pub period_duration_s: f64,
    pub pulses_per_period: usize,
}

impl SegmentList {
    /// Segment durations in order.
    pub fn durations(&self) -> Vec<f64> {
        self.period.iter().map(Segment::duration).collect()
    }
}

enum Flat {
    Wait { length: f64, span: Span },
    Pulse { angle: f64, phase: f64 },
}

/// Compiles a program into one period of timed segments.
pub fn compile(
    prog: &SequenceProgram,
    bindings: &Bindings,
    timing: TimingConvention,
    drive: PulseDrive,
) -> Result<SegmentList, DslError> {
    let mut env: Bindings = BTreeMap::new();
    env.insert("pi".into(), PI);
    env.insert("tp".into(), drive.width_s);
    for name in ["pi", "tp"] {
        if bindings.contains_key(name) {
            return Err(DslError::InvalidValue {
                span: Span::default(),
                message: format!("`{name}` cannot be rebound"),
            });
        }
    }
    for p in &prog.params {
        if let Some(v) = bindings.get(&p.name) {
            env.insert(p.name.clone(), *v);
            continue;
        }
        match &p.default {
            Some(d) => {
                let v = eval(d, &env, bindings, p.span)?;
                env.insert(p.name.clone(), v);
            }
            None => {
                return Err(DslError::UnboundParameter {
                    name: p.name.clone(),
                    span: Some(p.span),
                })
            }
        }
    }
    for (k, v) in bindings {
        env.entry(k.clone()).or_insert(*v);
    }

    let mut flat = Vec::new();
    flatten(&prog.body, &env, &mut flat)?;
    if flat.is_empty() {
        return Err(DslError::EmptyPeriod);
    }

    let n = flat.len();
    let width = drive.width_s;
    let mut lengths: Vec<f64> = flat
        .iter()
        .map(|f| match f {
            Flat::Wait { length, .. } => *length,
            Flat::Pulse { .. } => 0.0,
        })
        .collect();
    let mut absorbed = vec![false; n];
    if timing == TimingConvention::Center && width > 0.0 {
        for (i, f) in flat.iter().enumerate() {
            if !matches!(f, Flat::Pulse { .. }) {
                continue;
            }
            for j in [(i + n - 1) % n, (i + 1) % n] {
                if matches!(flat[j], Flat::Wait { .. }) {
                    lengths[j] -= 0.5 * width;
                    absorbed[j] = true;
                }
            }
        }
    }

    let mut period = Vec::with_capacity(n);
    let mut pulses = 0;
    for (i, f) in flat.iter().enumerate() {
        match *f {
            Flat::Wait { span, .. } => {
                let len = lengths[i];
                if len < 0.0 || (absorbed[i] && len <= 0.0) {
                    return Err(DslError::NegativeDuration { span, value: len });
                }
                period.push(Segment::Free { duration_s: len });
            }
            Flat::Pulse { angle, phase } => {
                pulses += 1;
                period.push(match drive.pi_rabi {
                    Some(pi_rabi) if width > 0.0 => {
                        let rabi = angle / PI * pi_rabi;
                        Segment::Pulse {
                            duration_s: width,
                            angle_rad: rabi * width,
                            phase_rad: phase,
                            rabi_rad_s: rabi,
                        }
                    }
                    _ => Segment::Pulse {
                        duration_s: 0.0,
                        angle_rad: angle,
                        phase_rad: phase,
                        rabi_rad_s: 0.0,
                    },
                });
            }
        }
    }

    let period_duration_s = neumaier_sum(period.iter().map(Segment::duration));
    Ok(SegmentList {
        period,
        period_duration_s,
        pulses_per_period: pulses,
    })
}

fn eval(e: &super::Expr, env: &Bindings, extra: &Bindings, span: Span) -> Result<f64, DslError> {
    let lookup = |n: &str| env.get(n).or_else(|| extra.get(n)).copied();
    let v = e.eval(&lookup).map_err(|name| DslError::UnboundParameter {
        name,
        span: Some(span),
    })?;
    if !v.is_finite() {
        return Err(DslError::InvalidValue {
            span,
            message: format!("expression `{e}` is not finite"),
        });
    }
    Ok(v)
}

fn flatten(stmts: &[Stmt], env: &Bindings, out: &mut Vec<Flat>) -> Result<(), DslError> {
    let none = Bindings::new();
    for s in stmts {
        match s {
            Stmt::Wait { duration, span } => {
                let length = eval(duration, env, &none, *span)?;
                if length < 0.0 {
                    return Err(DslError::NegativeDuration {
                        span: *span,
                        value: length,
                    });
                }
                out.push(Flat::Wait {
                    length,
                    span: *span,
                });
            }
            Stmt::Pulse { angle, axis, span } => {
                let a = eval(angle, env, &none, *span)?;
                if a < 0.0 {
                    return Err(DslError::InvalidValue {
                        span: *span,
                        message: format!("pulse angle {a} is negative"),
                    });
                }
                out.push(Flat::Pulse {
                    angle: a,
                    phase: axis.phase(),
                });
            }
            Stmt::Repeat { count, body, .. } => {
                for _ in 0..*count {
                    flatten(body, env, out)?;
                }
            }
        }
    }
    Ok(())
}

fn neumaier_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdsl::parse;

    const CPMG: &str = "wait tau/2; pulse pi x; wait tau; pulse pi x; wait tau/2;";

    fn bind(tau: f64) -> Bindings {
        Bindings::from([("tau".to_string(), tau)])
    }

    fn assert_durations(got: &[f64], want: &[f64]) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-21, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn delta_pulse_timing() {
        let prog = parse(CPMG).unwrap();
        let s = compile(&prog, &bind(238e-9), TimingConvention::Center, PulseDrive::delta()).unwrap();
        assert_durations(&s.durations(), &[119e-9, 0.0, 238e-9, 0.0, 119e-9]);
        assert_eq!(s.pulses_per_period, 2);
        assert!(((s.period_duration_s - 476e-9) / 476e-9).abs() < 1e-15);
    }

    #[test]
    fn finite_pulse_center_timing() {
        let prog = parse(CPMG).unwrap();
        let s = compile(&prog, &bind(238e-9), TimingConvention::Center, PulseDrive::top_hat(40e-9)).unwrap();
        assert_durations(&s.durations(), &[99e-9, 40e-9, 198e-9, 40e-9, 99e-9]);
        assert!(((s.period_duration_s - 476e-9) / 476e-9).abs() < 1e-15);
        let Segment::Pulse { rabi_rad_s, angle_rad, .. } = s.period[1] else {
            panic!()
        };
        assert!((rabi_rad_s - PI / 40e-9).abs() < 1e-3);
        assert!((angle_rad - PI).abs() < 1e-15);
    }

    #[test]
    fn edge_timing_adds_pulse_widths() {
        let prog = parse(CPMG).unwrap();
        let s = compile(&prog, &bind(238e-9), TimingConvention::Edge, PulseDrive::top_hat(40e-9)).unwrap();
        assert_durations(&s.durations(), &[119e-9, 40e-9, 238e-9, 40e-9, 119e-9]);
    }

    #[test]
    fn spacing_shorter_than_pulse_is_rejected() {
        let prog = parse(CPMG).unwrap();
        let err = compile(&prog, &bind(30e-9), TimingConvention::Center, PulseDrive::top_hat(40e-9));
        assert!(matches!(err, Err(DslError::NegativeDuration { .. })), "{err:?}");
        let err = compile(&prog, &bind(40e-9), TimingConvention::Center, PulseDrive::top_hat(40e-9));
        assert!(matches!(err, Err(DslError::NegativeDuration { .. })), "{err:?}");
    }

    #[test]
    fn unbound_and_rebound_names() {
        let prog = parse("wait tau; pulse pi+eps x;").unwrap();
        let err = compile(&prog, &bind(1e-7), TimingConvention::Center, PulseDrive::delta());
        assert!(matches!(err, Err(DslError::UnboundParameter { ref name, .. }) if name == "eps"));
        let prog = parse("param n; wait tau*n; pulse pi x;").unwrap();
        let err = compile(&prog, &bind(1e-7), TimingConvention::Center, PulseDrive::delta());
        assert!(matches!(err, Err(DslError::UnboundParameter { ref name, .. }) if name == "n"));
        let mut b = bind(1e-7);
        b.insert("tp".into(), 1.0);
        assert!(compile(&prog, &b, TimingConvention::Center, PulseDrive::delta()).is_err());
    }

    #[test]
    fn empty_period() {
        let prog = parse("param eps = 1;").unwrap();
        assert_eq!(
            compile(&prog, &bind(1e-7), TimingConvention::Center, PulseDrive::delta()),
            Err(DslError::EmptyPeriod)
        );
    }

    #[test]
    fn repeat_unrolls() {
        let prog = parse(&format!("repeat 3 {{ {CPMG} }}")).unwrap();
        let s = compile(&prog, &bind(200e-9), TimingConvention::Center, PulseDrive::top_hat(20e-9)).unwrap();
        assert_eq!(s.period.len(), 15);
        assert_eq!(s.pulses_per_period, 6);
        assert!(((s.period_duration_s - 1200e-9) / 1200e-9).abs() < 1e-15);
    }

    #[test]
    fn wrap_around_absorption() {
        // The trailing pulse borrows from the leading wait.
        let prog = parse("wait tau; pulse pi x;").unwrap();
        let s = compile(&prog, &bind(100e-9), TimingConvention::Center, PulseDrive::top_hat(10e-9)).unwrap();
        assert_durations(&s.durations(), &[90e-9, 10e-9]);
    }
}
