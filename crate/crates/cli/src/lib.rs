//! Command-line front end for the `dnss` simulator: strict run
//! configurations, built-in figure presets and CSV output.

pub mod config;
pub mod figures;
pub mod runner;

use std::path::{Path, PathBuf};

use config::{parse_config, ConfigError, Diagnostic, Overrides, RunConfig};
use figures::Figure;
use runner::Artifact;

/// What `run` and `validate` operate on.
#[derive(Debug, Clone)]
pub enum Target {
    File(PathBuf),
    Figure(&'static Figure),
}

impl Target {
    /// Resolves a figure preset name, suggesting the nearest on a typo.
    pub fn figure(name: &str) -> Result<Target, ConfigError> {
        match figures::find(name) {
            Some(f) => Ok(Target::Figure(f)),
            None => {
                let names = figures::names();
                let hint = match config::nearest(name, &names) {
                    Some(n) => format!("; did you mean `{n}`?"),
                    None => format!("; available: {}", names.join(", ")),
                };
                Err(ConfigError(vec![Diagnostic {
                    location: "--preset".into(),
                    message: format!("unknown figure preset `{name}`{hint}"),
                }]))
            }
        }
    }
}

/// Parses every configuration of `target`, collecting all diagnostics.
pub fn load(target: &Target, ov: Overrides) -> Result<Vec<RunConfig>, ConfigError> {
    match target {
        Target::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                ConfigError(vec![Diagnostic {
                    location: path.display().to_string(),
                    message: format!("cannot read: {e}"),
                }])
            })?;
            let base = path.parent().unwrap_or(Path::new("."));
            Ok(vec![parse_config(&text, &path.display().to_string(), base, ov)?])
        }
        Target::Figure(f) => {
            let mut cfgs = Vec::new();
            let mut diags = Vec::new();
            for (name, text) in f.runs {
                match parse_config(text, &format!("{}/{name}", f.name), Path::new("."), ov) {
                    Ok(c) => cfgs.push(c),
                    Err(e) => diags.extend(e.0),
                }
            }
            if diags.is_empty() {
                Ok(cfgs)
            } else {
                Err(ConfigError(diags))
            }
        }
    }
}

/// Loads and executes `target`; `plot_script` forces plot-script emission.
pub fn run(target: &Target, ov: Overrides, plot_script: bool) -> anyhow::Result<Vec<Artifact>> {
    let cfgs = load(target, ov)?;
    let mut out = Vec::new();
    for mut cfg in cfgs {
        cfg.plot_script |= plot_script;
        out.extend(runner::execute(&cfg)?);
    }
    Ok(out)
}
