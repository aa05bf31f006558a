//! CSV output: `# key=value` metadata lines, one header row, then data in
//! scientific notation with 12 significant digits.

use std::fmt::Display;
use std::io::{self, Write};

use crate::dynamics::{PolarizationScan, TraceResult};
use crate::floquet::{CrossingPair, FloquetSpectrum, ThetaCurve};
use crate::seqdsl::Sequence;
use crate::spinsys::{Rabi, SpinSystemParams};

/// Formats a number with 12 significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

/// Ordered key/value pairs written ahead of every table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata(Vec<(String, String)>);

impl Metadata {
    pub fn new() -> Self {
        Metadata(Vec::new())
    }

    /// Parameters and conventions of a run.
    pub fn for_run(p: &SpinSystemParams, seq: &Sequence) -> Self {
        let mut m = Metadata::new();
        m.push("frequency_convention", "ordinary");
        m.push("larmor_hz", sci(p.larmor().unwrap_or(f64::NAN)));
        if let Some(sp) = p.species {
            m.push("species", sp.name());
        }
        if let Some(bz) = p.bz_gauss {
            m.push("bz_gauss", sci(bz));
        }
        m.push("a_perp_hz", sci(p.a_perp_hz));
        m.push("a_par_hz", sci(p.a_par_hz));
        m.push("detuning_hz", sci(p.detuning_hz));
        m.push("pulse_width_s", sci(p.pulse_width_s));
        match p.rabi {
            Rabi::Auto => m.push("rabi_hz", "auto"),
            Rabi::Hz(v) => m.push("rabi_hz", sci(v)),
        }
        m.push("sequence", &seq.name);
        m.push("timing_convention", seq.timing.name());
        for (k, v) in &seq.bindings {
            m.push(format!("binding.{k}"), sci(*v));
        }
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.0.push((key.into(), value.to_string()));
    }

    /// Replaces the value of `key`, appending it if absent.
    pub fn set(&mut self, key: &str, value: impl Display) {
        match self.0.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value.to_string(),
            None => self.push(key, value),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn write(&self, w: &mut impl Write) -> io::Result<()> {
        for (k, v) in &self.0 {
            writeln!(w, "# {k}={v}")?;
        }
        Ok(())
    }
}

/// Columns `detuning_hz,tau_s,coherence,polarization`, detuning-major.
pub fn write_trace(w: &mut impl Write, t: &TraceResult) -> io::Result<()> {
    t.metadata.write(w)?;
    writeln!(w, "detuning_hz,tau_s,coherence,polarization")?;
    let n = t.tau_s.len();
    for (d, &delta) in t.detuning_hz.iter().enumerate() {
        for (i, &tau) in t.tau_s.iter().enumerate() {
            let k = d * n + i;
            writeln!(
                w,
                "{},{},{},{}",
                sci(delta),
                sci(tau),
                sci(t.coherence[k]),
                sci(t.polarization[k])
            )?;
        }
    }
    Ok(())
}

/// Columns `n_pulses,polarization,coherence,n_init_marker`; the marker is 1
/// on the N_I row.
pub fn write_scan(w: &mut impl Write, s: &PolarizationScan) -> io::Result<()> {
    s.metadata.write(w)?;
    writeln!(w, "n_pulses,polarization,coherence,n_init_marker")?;
    for (i, &n) in s.pulse_counts.iter().enumerate() {
        let marker = u8::from(s.n_init == Some(n));
        writeln!(w, "{n},{},{},{marker}", sci(s.polarization[i]), sci(s.coherence[i]))?;
    }
    Ok(())
}

/// Columns `tau_s`, then per branch `phase_b,unwrapped_b,label_b`, then one
/// gap column per crossing pair.
pub fn write_spectrum(w: &mut impl Write, s: &FloquetSpectrum, meta: &Metadata) -> io::Result<()> {
    meta.write(w)?;
    let mut header = vec!["tau_s".to_string()];
    for b in 0..4 {
        header.push(format!("phase_{b}"));
        header.push(format!("unwrapped_{b}"));
        header.push(format!("label_{b}"));
    }
    for pair in CrossingPair::ALL {
        header.push(format!("gap_{}", pair.name()));
    }
    writeln!(w, "{}", header.join(","))?;
    for (i, &tau) in s.tau_s.iter().enumerate() {
        let mut row = vec![sci(tau)];
        for bp in &s.points[i] {
            row.push(sci(bp.phase_rad));
            row.push(sci(bp.unwrapped()));
            row.push(bp.label.name().to_string());
        }
        for pair in CrossingPair::ALL {
            row.push(sci(s.pair_gap(i, pair)));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Columns `tau_s,theta_rad,axis_x_sq,in_regime`.
pub fn write_theta(w: &mut impl Write, c: &ThetaCurve, meta: &Metadata) -> io::Result<()> {
    meta.write(w)?;
    writeln!(w, "tau_s,theta_rad,axis_x_sq,in_regime")?;
    for i in 0..c.tau_s.len() {
        writeln!(
            w,
            "{},{},{},{}",
            sci(c.tau_s[i]),
            sci(c.theta_rad[i]),
            sci(c.axis_x_sq[i]),
            u8::from(c.in_regime(i))
        )?;
    }
    Ok(())
}
