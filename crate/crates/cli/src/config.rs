//! Strict TOML run configuration.
//!
//! Every key is checked against the schema; unknown keys, type errors and
//! out-of-range values are all collected so a single pass reports everything.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dnss::dynamics::{ElectronState, InitialState, NuclearState};
use dnss::seqdsl::{DslError, Preset, Sequence, TimingConvention};
use dnss::spinsys::{Rabi, Species, SpinSystemParams};
use toml::{Table, Value};

const SECTIONS: &[&str] = &["system", "sequence", "experiment", "grids", "output"];
const SYSTEM_KEYS: &[&str] = &[
    "larmor_hz",
    "species",
    "bz_gauss",
    "a_perp_hz",
    "a_par_hz",
    "detuning_hz",
    "pulse_width_s",
    "rabi_hz",
    "frequency_convention",
];
const SEQUENCE_KEYS: &[&str] = &["preset", "file", "timing", "bindings"];
const EXPERIMENT_KEYS: &[&str] = &[
    "kind",
    "n_pulses",
    "electron",
    "nuclear",
    "harmonics",
    "pulse_widths_s",
    "tau",
    "harmonic",
    "n_max",
    "unperturbed",
];
const GRID_NAMES: &[&str] = &["tau", "detuning"];
const GRID_KEYS: &[&str] = &["start", "stop", "points", "unit"];
const OUTPUT_KEYS: &[&str] = &["path", "plot_script"];

/// One problem found in a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// All diagnostics of a rejected configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub Vec<Diagnostic>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0.len();
        writeln!(f, "{n} configuration error{}", if n == 1 { "" } else { "s" })?;
        for d in &self.0 {
            writeln!(f, "  {d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrequencyConvention {
    /// Frequencies in Hz.
    #[default]
    Ordinary,
    /// Frequencies in rad/s; divided by 2π on input.
    Angular,
}

impl FrequencyConvention {
    pub fn name(self) -> &'static str {
        match self {
            FrequencyConvention::Ordinary => "ordinary",
            FrequencyConvention::Angular => "angular",
        }
    }

    fn to_hz(self, v: f64) -> f64 {
        match self {
            FrequencyConvention::Ordinary => v,
            FrequencyConvention::Angular => v / (2.0 * PI),
        }
    }
}

impl FromStr for FrequencyConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ordinary" | "hz" => Ok(FrequencyConvention::Ordinary),
            "angular" | "rad/s" => Ok(FrequencyConvention::Angular),
            _ => Err(format!("unknown frequency convention `{s}` (expected ordinary or angular)")),
        }
    }
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub timing: Option<TimingConvention>,
    pub frequency: Option<FrequencyConvention>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceSource {
    Preset(Preset),
    File { path: PathBuf, text: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Trace,
    Sweep,
    Spectrum,
    Theta,
    Dips,
    Polarize,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Trace,
        ExperimentKind::Sweep,
        ExperimentKind::Spectrum,
        ExperimentKind::Theta,
        ExperimentKind::Dips,
        ExperimentKind::Polarize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Trace => "trace",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Theta => "theta",
            ExperimentKind::Dips => "dips",
            ExperimentKind::Polarize => "polarize",
        }
    }

    /// Experiment keys besides `kind` that this kind accepts.
    fn keys(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Trace => &["n_pulses", "electron", "nuclear"],
            ExperimentKind::Sweep => &["n_pulses", "electron", "nuclear", "pulse_widths_s"],
            ExperimentKind::Spectrum => &["unperturbed"],
            ExperimentKind::Theta => &[],
            ExperimentKind::Dips => &["harmonics"],
            ExperimentKind::Polarize => &["electron", "nuclear", "tau", "harmonic", "n_max"],
        }
    }

    fn grids(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Trace | ExperimentKind::Spectrum | ExperimentKind::Theta => &["tau"],
            ExperimentKind::Sweep => &["tau", "detuning"],
            ExperimentKind::Dips | ExperimentKind::Polarize => &[],
        }
    }
}

/// Pulse spacing of a pulse-number scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauChoice {
    Seconds(f64),
    Plus,
    Minus,
    /// The dip that addresses nuclear |↑⟩ for the chosen electron state.
    Up,
    Down,
}

impl TauChoice {
    pub fn name(self) -> String {
        match self {
            TauChoice::Seconds(v) => dnss::export::sci(v),
            TauChoice::Plus => "tau_plus".into(),
            TauChoice::Minus => "tau_minus".into(),
            TauChoice::Up => "up".into(),
            TauChoice::Down => "down".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridUnit {
    Seconds,
    /// Multiples of π/ωL.
    Dip,
    Hz,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub unit: GridUnit,
}

impl GridSpec {
    /// Grid values in SI units; `larmor_hz` converts the `dip` unit.
    pub fn values(&self, larmor_hz: f64) -> Vec<f64> {
        let scale = match self.unit {
            GridUnit::Dip => 1.0 / (2.0 * larmor_hz.abs()),
            GridUnit::Seconds | GridUnit::Hz => 1.0,
        };
        let n = self.points;
        (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                (self.start + f * (self.stop - self.start)) * scale
            })
            .collect()
    }

    pub fn describe(&self) -> String {
        let unit = match self.unit {
            GridUnit::Seconds => "s",
            GridUnit::Dip => "dip",
            GridUnit::Hz => "hz",
        };
        format!(
            "{}:{}:{}:{unit}",
            dnss::export::sci(self.start),
            dnss::export::sci(self.stop),
            self.points
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub kind: ExperimentKind,
    pub n_pulses: u64,
    pub initial: InitialState,
    pub harmonics: Vec<u32>,
    pub pulse_widths_s: Vec<f64>,
    pub tau: TauChoice,
    pub harmonic: u32,
    pub n_max: u64,
    pub unperturbed: bool,
}

/// A validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SpinSystemParams,
    pub frequency_convention: FrequencyConvention,
    pub source: SequenceSource,
    pub sequence: Sequence,
    pub experiment: Experiment,
    pub tau_grid: Option<GridSpec>,
    pub detuning_grid: Option<GridSpec>,
    pub output_path: PathBuf,
    pub plot_script: bool,
}

impl RunConfig {
    /// Pulse-spacing grid in seconds.
    pub fn tau_values(&self) -> Option<Vec<f64>> {
        let fl = self.system.larmor().ok()?;
        self.tau_grid.map(|g| g.values(fl))
    }

    pub fn detuning_values(&self) -> Option<Vec<f64>> {
        self.detuning_grid.map(|g| {
            g.values(1.0)
                .into_iter()
                .map(|v| self.frequency_convention.to_hz(v))
                .collect()
        })
    }
}

/// Suggests the closest of `candidates` to `key`, if any is close enough.
pub fn nearest<'a>(key: &str, candidates: &[&'a str]) -> Option<&'a str> {
    candidates
        .iter()
        .map(|c| (strsim::normalized_damerau_levenshtein(key, c), *c))
        .filter(|(s, _)| *s >= 0.6)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}

struct Ctx<'a> {
    file: &'a str,
    diags: Vec<Diagnostic>,
}

impl Ctx<'_> {
    fn err(&mut self, at: &str, message: impl Into<String>) {
        let location = if at.is_empty() {
            self.file.to_string()
        } else {
            format!("{}: {at}", self.file)
        };
        self.diags.push(Diagnostic {
            location,
            message: message.into(),
        });
    }

    fn unknown_keys(&mut self, section: &str, table: &Table, allowed: &[&str]) {
        for key in table.keys() {
            if allowed.contains(&key.as_str()) {
                continue;
            }
            let at = if section.is_empty() { key.clone() } else { format!("{section}.{key}") };
            let msg = match nearest(key, allowed) {
                Some(s) => format!("unknown key `{key}`; did you mean `{s}`?"),
                None => format!("unknown key `{key}`; expected one of {}", allowed.join(", ")),
            };
            self.err(&at, msg);
        }
    }

    fn table<'t>(&mut self, parent: &'t Table, section: &str, key: &str) -> Option<&'t Table> {
        match parent.get(key) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(v) => {
                let at = join(section, key);
                self.err(&at, format!("expected a table, found {}", v.type_str()));
                None
            }
        }
    }

    fn f64(&mut self, t: &Table, section: &str, key: &str) -> Option<f64> {
        let v = t.get(key)?;
        let x = match v {
            Value::Float(f) => *f,
            Value::Integer(i) => *i as f64,
            _ => {
                self.err(&join(section, key), format!("expected a number, found {}", v.type_str()));
                return None;
            }
        };
        if !x.is_finite() {
            self.err(&join(section, key), "value must be finite");
            return None;
        }
        Some(x)
    }

    fn nonneg(&mut self, t: &Table, section: &str, key: &str) -> Option<f64> {
        let x = self.f64(t, section, key)?;
        if x < 0.0 {
            self.err(&join(section, key), format!("must be ≥ 0, got {x}"));
            return None;
        }
        Some(x)
    }

    fn str<'t>(&mut self, t: &'t Table, section: &str, key: &str) -> Option<&'t str> {
        match t.get(key)? {
            Value::String(s) => Some(s),
            v => {
                self.err(&join(section, key), format!("expected a string, found {}", v.type_str()));
                None
            }
        }
    }

    fn bool(&mut self, t: &Table, section: &str, key: &str) -> Option<bool> {
        match t.get(key)? {
            Value::Boolean(b) => Some(*b),
            v => {
                self.err(&join(section, key), format!("expected true or false, found {}", v.type_str()));
                None
            }
        }
    }

    fn positive_int(&mut self, t: &Table, section: &str, key: &str) -> Option<u64> {
        match t.get(key)? {
            Value::Integer(i) if *i > 0 => Some(*i as u64),
            v => {
                self.err(&join(section, key), format!("expected a positive integer, found {v}"));
                None
            }
        }
    }

    fn parse_enum<T: FromStr>(&mut self, t: &Table, section: &str, key: &str, names: &[&str]) -> Option<T> {
        let s = self.str(t, section, key)?;
        match s.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                let hint = match nearest(s, names) {
                    Some(n) => format!("; did you mean `{n}`?"),
                    None => format!("; expected one of {}", names.join(", ")),
                };
                self.err(&join(section, key), format!("unknown value `{s}`{hint}"));
                None
            }
        }
    }
}

fn join(section: &str, key: &str) -> String {
    format!("{section}.{key}")
}

struct Electron(ElectronState);
struct Nuclear(NuclearState);

impl FromStr for Electron {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(Electron(match s {
            "x_plus" => ElectronState::XPlus,
            "x_minus" => ElectronState::XMinus,
            "zero" => ElectronState::ZeroKet,
            _ => return Err(()),
        }))
    }
}

impl FromStr for Nuclear {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(Nuclear(match s {
            "mixed" => NuclearState::MixedHalf,
            "up" => NuclearState::Up,
            "down" => NuclearState::Down,
            _ => return Err(()),
        }))
    }
}

impl FromStr for ExperimentKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        ExperimentKind::ALL.into_iter().find(|k| k.name() == s).ok_or(())
    }
}

/// Parses and validates a configuration. `name` labels diagnostics and
/// `base_dir` resolves relative sequence file paths.
pub fn parse_config(text: &str, name: &str, base_dir: &Path, ov: Overrides) -> Result<RunConfig, ConfigError> {
    let root: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            let msg = e.to_string().lines().next().unwrap_or("invalid TOML").to_string();
            let at = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_default();
            return Err(ConfigError(vec![Diagnostic {
                location: if at.is_empty() { name.to_string() } else { format!("{name}: {at}") },
                message: msg,
            }]));
        }
    };
    from_table(&root, name, base_dir, ov)
}

/// Validates an already parsed TOML table.
pub fn from_table(root: &Table, name: &str, base_dir: &Path, ov: Overrides) -> Result<RunConfig, ConfigError> {
    let mut cx = Ctx {
        file: name,
        diags: Vec::new(),
    };
    cx.unknown_keys("", root, SECTIONS);
    let empty = Table::new();

    // [system]
    let sys = cx.table(root, "", "system").unwrap_or(&empty);
    cx.unknown_keys("system", sys, SYSTEM_KEYS);
    let file_conv = cx.parse_enum::<FrequencyConvention>(sys, "system", "frequency_convention", &["ordinary", "angular"]);
    let conv = ov.frequency.or(file_conv).unwrap_or_default();
    let larmor = cx.f64(sys, "system", "larmor_hz").map(|v| conv.to_hz(v));
    let species = cx.parse_enum::<Species>(sys, "system", "species", &["h1", "c13"]);
    let bz = cx.f64(sys, "system", "bz_gauss");
    let mut params = match (larmor, species, bz) {
        (_, Some(sp), Some(b)) => {
            let mut p = SpinSystemParams::from_field(sp, b);
            if larmor.is_some() {
                p.larmor_hz = larmor;
            }
            p
        }
        (Some(fl), None, None) => SpinSystemParams::new(fl),
        (None, None, None) => {
            if !sys.contains_key("larmor_hz") {
                cx.err("system", "set `larmor_hz`, or `species` together with `bz_gauss`");
            }
            SpinSystemParams::new(f64::NAN)
        }
        _ => {
            if sys.contains_key("species") != sys.contains_key("bz_gauss") {
                cx.err("system", "`species` and `bz_gauss` must be given together");
            }
            SpinSystemParams::new(larmor.unwrap_or(f64::NAN))
        }
    };
    let a_perp = cx.f64(sys, "system", "a_perp_hz").map(|v| conv.to_hz(v)).unwrap_or(0.0);
    let a_par = cx.f64(sys, "system", "a_par_hz").map(|v| conv.to_hz(v)).unwrap_or(0.0);
    params = params.with_hyperfine(a_perp, a_par);
    if let Some(d) = cx.f64(sys, "system", "detuning_hz") {
        params = params.with_detuning(conv.to_hz(d));
    }
    if let Some(tp) = cx.nonneg(sys, "system", "pulse_width_s") {
        params = params.with_pulse_width(tp);
    }
    match sys.get("rabi_hz") {
        None => {}
        Some(Value::String(s)) if s == "auto" => params = params.with_rabi(Rabi::Auto),
        Some(_) => {
            if let Some(v) = cx.f64(sys, "system", "rabi_hz") {
                params = params.with_rabi(Rabi::Hz(conv.to_hz(v)));
            }
        }
    }
    let system_ok = cx.diags.is_empty();
    if system_ok {
        if let Err(e) = params.resolve() {
            cx.err("system", e.to_string());
        }
    }

    // [sequence]
    let seq_t = cx.table(root, "", "sequence").unwrap_or(&empty);
    cx.unknown_keys("sequence", seq_t, SEQUENCE_KEYS);
    let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
    let source = match (seq_t.contains_key("preset"), seq_t.contains_key("file")) {
        (true, true) => {
            cx.err("sequence", "give either `preset` or `file`, not both");
            None
        }
        (false, false) => {
            cx.err("sequence", "missing `preset` or `file`");
            None
        }
        (true, false) => cx
            .parse_enum::<Preset>(seq_t, "sequence", "preset", &names)
            .map(SequenceSource::Preset),
        (false, true) => cx.str(seq_t, "sequence", "file").and_then(|f| {
            let path = base_dir.join(f);
            match std::fs::read_to_string(&path) {
                Ok(text) => Some(SequenceSource::File { path, text }),
                Err(e) => {
                    cx.err("sequence.file", format!("cannot read {}: {e}", path.display()));
                    None
                }
            }
        }),
    };
    let file_timing = cx.parse_enum::<TimingConvention>(seq_t, "sequence", "timing", &["center", "edge"]);
    let timing = ov.timing.or(file_timing).unwrap_or_default();
    let mut bindings = BTreeMap::new();
    if let Some(b) = cx.table(seq_t, "sequence", "bindings") {
        for key in b.keys() {
            if let Some(v) = cx.f64(b, "sequence.bindings", key) {
                bindings.insert(key.clone(), v);
            }
        }
    }
    let sequence = source.as_ref().and_then(|src| {
        let (label, built) = match src {
            SequenceSource::Preset(p) => {
                if let Err(e) = p.validate(&params) {
                    if system_ok {
                        cx.err("sequence.preset", e.to_string());
                    }
                }
                (p.name().to_string(), Ok(Sequence::preset(*p)))
            }
            SequenceSource::File { path, text } => {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sequence").to_string();
                (path.display().to_string(), Sequence::from_source(stem, text))
            }
        };
        match built {
            Ok(mut s) => {
                for (k, v) in &bindings {
                    s = s.bind(k, *v);
                }
                Some(s.with_timing(timing))
            }
            Err(e) => {
                cx.err("sequence", dsl_message(&label, &e));
                None
            }
        }
    });

    // [experiment]
    let exp_t = cx.table(root, "", "experiment").unwrap_or(&empty);
    cx.unknown_keys("experiment", exp_t, EXPERIMENT_KEYS);
    let kind_names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
    let kind = if exp_t.contains_key("kind") {
        cx.parse_enum::<ExperimentKind>(exp_t, "experiment", "kind", &kind_names)
    } else {
        cx.err("experiment", "missing `kind`");
        None
    };
    if let Some(k) = kind {
        for key in exp_t.keys() {
            if key != "kind" && EXPERIMENT_KEYS.contains(&key.as_str()) && !k.keys().contains(&key.as_str()) {
                cx.err(&join("experiment", key), format!("not used by experiment kind `{}`", k.name()));
            }
        }
    }
    let n_pulses = cx.positive_int(exp_t, "experiment", "n_pulses").unwrap_or(336);
    let electron = cx
        .parse_enum::<Electron>(exp_t, "experiment", "electron", &["x_plus", "x_minus", "zero"])
        .map(|e| e.0)
        .unwrap_or(ElectronState::XPlus);
    let nuclear = cx
        .parse_enum::<Nuclear>(exp_t, "experiment", "nuclear", &["mixed", "up", "down"])
        .map(|n| n.0)
        .unwrap_or(NuclearState::MixedHalf);
    let harmonics = match exp_t.get("harmonics") {
        None => vec![1],
        Some(Value::Array(a)) if !a.is_empty() => {
            let mut out = Vec::new();
            for v in a {
                match v {
                    Value::Integer(i) if *i > 0 && *i <= u32::MAX as i64 => out.push(*i as u32),
                    _ => cx.err("experiment.harmonics", format!("expected positive integers, found {v}")),
                }
            }
            out
        }
        Some(v) => {
            cx.err("experiment.harmonics", format!("expected a non-empty list, found {v}"));
            vec![1]
        }
    };
    let pulse_widths_s = match exp_t.get("pulse_widths_s") {
        None => vec![params.pulse_width_s],
        Some(Value::Array(a)) if !a.is_empty() => {
            let mut out = Vec::new();
            for v in a {
                match v.as_float().or_else(|| v.as_integer().map(|i| i as f64)) {
                    Some(x) if x >= 0.0 && x.is_finite() => out.push(x),
                    _ => cx.err("experiment.pulse_widths_s", format!("expected non-negative numbers, found {v}")),
                }
            }
            out
        }
        Some(v) => {
            cx.err("experiment.pulse_widths_s", format!("expected a non-empty list, found {v}"));
            vec![params.pulse_width_s]
        }
    };
    let tau = match exp_t.get("tau") {
        None => TauChoice::Plus,
        Some(Value::String(s)) => match s.as_str() {
            "tau_plus" => TauChoice::Plus,
            "tau_minus" => TauChoice::Minus,
            "up" => TauChoice::Up,
            "down" => TauChoice::Down,
            other => {
                let hint = nearest(other, &["tau_plus", "tau_minus", "up", "down"])
                    .map(|n| format!("; did you mean `{n}`?"))
                    .unwrap_or_default();
                cx.err("experiment.tau", format!("unknown value `{other}`{hint}"));
                TauChoice::Plus
            }
        },
        Some(_) => match cx.f64(exp_t, "experiment", "tau") {
            Some(v) if v > 0.0 => TauChoice::Seconds(v),
            Some(v) => {
                cx.err("experiment.tau", format!("must be positive, got {v}"));
                TauChoice::Plus
            }
            None => TauChoice::Plus,
        },
    };
    let harmonic = cx.positive_int(exp_t, "experiment", "harmonic").unwrap_or(1);
    let harmonic = u32::try_from(harmonic).unwrap_or(1);
    let n_max = cx.positive_int(exp_t, "experiment", "n_max").unwrap_or(300);
    let unperturbed = cx.bool(exp_t, "experiment", "unperturbed").unwrap_or(false);
    if n_pulses % 2 == 1 && exp_t.contains_key("n_pulses") {
        cx.err("experiment.n_pulses", format!("must be even, got {n_pulses}"));
    }

    // [grids]
    let grids_t = cx.table(root, "", "grids").unwrap_or(&empty);
    cx.unknown_keys("grids", grids_t, GRID_NAMES);
    let grid = |cx: &mut Ctx, gname: &str, default_unit: GridUnit| -> Option<GridSpec> {
        let section = format!("grids.{gname}");
        let t = cx.table(grids_t, "grids", gname)?;
        cx.unknown_keys(&section, t, GRID_KEYS);
        let start = cx.f64(t, &section, "start");
        let stop = cx.f64(t, &section, "stop");
        let points = cx.positive_int(t, &section, "points");
        for key in ["start", "stop", "points"] {
            if !t.contains_key(key) {
                cx.err(&section, format!("missing `{key}`"));
            }
        }
        let units: &[&str] = if gname == "tau" { &["s", "dip"] } else { &["hz"] };
        let unit = match cx.str(t, &section, "unit") {
            None => Some(default_unit),
            Some("s") if gname == "tau" => Some(GridUnit::Seconds),
            Some("dip") if gname == "tau" => Some(GridUnit::Dip),
            Some("hz") if gname == "detuning" => Some(GridUnit::Hz),
            Some(u) => {
                cx.err(&join(&section, "unit"), format!("unknown unit `{u}`; expected one of {}", units.join(", ")));
                None
            }
        };
        let (start, stop, points, unit) = (start?, stop?, points?, unit?);
        let mut ok = true;
        if points < 2 {
            cx.err(&join(&section, "points"), format!("need at least 2 points, got {points}"));
            ok = false;
        }
        if start >= stop {
            cx.err(&section, format!("start ({start}) must be below stop ({stop})"));
            ok = false;
        }
        if gname == "tau" && start <= 0.0 {
            cx.err(&join(&section, "start"), "pulse spacing must be positive");
            ok = false;
        }
        ok.then_some(GridSpec {
            start,
            stop,
            points: points as usize,
            unit,
        })
    };
    let tau_grid = grid(&mut cx, "tau", GridUnit::Seconds);
    let detuning_grid = grid(&mut cx, "detuning", GridUnit::Hz);
    if let Some(k) = kind {
        for g in GRID_NAMES {
            let wanted = k.grids().contains(g);
            let given = grids_t.contains_key(*g);
            if wanted && !given {
                cx.err("grids", format!("experiment kind `{}` needs [grids.{g}]", k.name()));
            }
            if given && !wanted {
                cx.err(&format!("grids.{g}"), format!("not used by experiment kind `{}`", k.name()));
            }
        }
    }

    // [output]
    let out_t = cx.table(root, "", "output").unwrap_or(&empty);
    cx.unknown_keys("output", out_t, OUTPUT_KEYS);
    let output_path = cx
        .str(out_t, "output", "path")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", kind.map(|k| k.name()).unwrap_or("run"))));
    let plot_script = cx.bool(out_t, "output", "plot_script").unwrap_or(false);

    let (Some(source), Some(sequence), Some(kind)) = (source, sequence, kind) else {
        return Err(ConfigError(cx.diags));
    };
    let cfg = RunConfig {
        system: params,
        frequency_convention: conv,
        source,
        sequence,
        experiment: Experiment {
            kind,
            n_pulses,
            initial: InitialState::new(electron, nuclear),
            harmonics,
            pulse_widths_s,
            tau,
            harmonic,
            n_max,
            unperturbed,
        },
        tau_grid,
        detuning_grid,
        output_path,
        plot_script,
    };
    if cx.diags.is_empty() {
        check_compiles(&cfg, &mut cx);
    }
    if cx.diags.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError(cx.diags))
    }
}

fn dsl_message(label: &str, e: &DslError) -> String {
    match e {
        DslError::Syntax { span, .. }
        | DslError::NegativeDuration { span, .. }
        | DslError::InvalidValue { span, .. }
        | DslError::UnboundParameter { span: Some(span), .. } => {
            // Positions inside the error text refer to the sequence source.
            format!("{label}:{}:{}: {e}", span.line, span.col)
        }
        _ => format!("{label}: {e}"),
    }
}

/// Compiles the sequence at every pulse spacing the run will visit, or at
/// the ends of the grid for large grids, so that binding and timing errors
/// surface before any computation.
fn check_compiles(cfg: &RunConfig, cx: &mut Ctx) {
    let label = match &cfg.source {
        SequenceSource::Preset(p) => p.name().to_string(),
        SequenceSource::File { path, .. } => path.display().to_string(),
    };
    let fl = match cfg.system.larmor() {
        Ok(v) => v,
        Err(_) => return,
    };
    let mut taus = match cfg.tau_values() {
        Some(v) => vec![v[0], v[v.len() - 1]],
        None => {
            let ks: Vec<u32> = match cfg.experiment.kind {
                ExperimentKind::Dips => cfg.experiment.harmonics.clone(),
                _ => vec![cfg.experiment.harmonic],
            };
            ks.iter().map(|&k| (2 * k - 1) as f64 / (2.0 * fl.abs())).collect()
        }
    };
    if let TauChoice::Seconds(t) = cfg.experiment.tau {
        if cfg.experiment.kind == ExperimentKind::Polarize {
            taus = vec![t];
        }
    }
    let widths: Vec<f64> = match cfg.experiment.kind {
        ExperimentKind::Sweep => cfg.experiment.pulse_widths_s.clone(),
        _ => vec![cfg.system.pulse_width_s],
    };
    for tp in widths {
        let p = cfg.system.with_pulse_width(tp);
        let r = match p.resolve() {
            Ok(r) => r,
            Err(e) => {
                cx.err("system", e.to_string());
                return;
            }
        };
        for &t in &taus {
            if let Err(e) = cfg.sequence.compile_at(t, &r) {
                let tau = dnss::export::sci(t);
                cx.err("sequence", format!("{} (tau = {tau} s, tp = {} s)", dsl_message(&label, &e), dnss::export::sci(tp)));
                return;
            }
        }
    }
}
