//! Executes validated configurations into CSV artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dnss::dynamics::{coherence_trace, detuning_sweep, pulse_number_scan, ElectronState};
use dnss::export::{sci, write_scan, write_spectrum, write_theta, write_trace, Metadata};
use dnss::floquet::{full_spectrum, predict_dips, theta_curve, unperturbed_spectrum, DipPrediction};

use crate::config::{ExperimentKind, RunConfig, SequenceSource, TauChoice};

/// One output file, named relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub path: PathBuf,
    pub contents: String,
}

fn run_metadata(cfg: &RunConfig, meta: &mut Metadata) {
    meta.push("generator", concat!("dnss-cli ", env!("CARGO_PKG_VERSION")));
    meta.push("experiment", cfg.experiment.kind.name());
    meta.push("input_frequency_convention", cfg.frequency_convention.name());
    if let SequenceSource::File { path, .. } = &cfg.source {
        meta.push("sequence_file", path.display());
    }
    if let Some(g) = cfg.tau_grid {
        meta.push("grid.tau", g.describe());
    }
    if let Some(g) = cfg.detuning_grid {
        meta.push("grid.detuning", g.describe());
    }
}

fn to_string(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(String::from_utf8(buf)?)
}

fn tp_suffix(tp: f64) -> String {
    let ns = (tp * 1e9 * 1e3).round() / 1e3;
    format!("_tp{ns}ns")
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// Key/value summary of a dip prediction on one line.
pub fn dips_line(d: &DipPrediction) -> String {
    format!(
        "k={} tau_plus_s={} tau_minus_s={} theta_plus_rad={} theta_minus_rad={} splitting_s={} converged={} iterations={}",
        d.harmonic_k,
        sci(d.tau_plus_s),
        sci(d.tau_minus_s),
        sci(d.theta_plus_rad),
        sci(d.theta_minus_rad),
        sci(d.splitting_s()),
        d.converged,
        d.iterations
    )
}

/// Pulse spacing selected by a polarization run.
pub fn resolve_tau(cfg: &RunConfig) -> Result<(f64, Option<DipPrediction>)> {
    let e = &cfg.experiment;
    if let TauChoice::Seconds(t) = e.tau {
        return Ok((t, None));
    }
    let d = predict_dips(&cfg.system, &cfg.sequence, e.harmonic).context("predicting dip positions")?;
    if !d.converged {
        anyhow::bail!("dip prediction did not converge: {}", dips_line(&d));
    }
    let plus = !matches!(e.initial.electron, ElectronState::XMinus);
    let tau = match e.tau {
        TauChoice::Plus => d.tau_plus_s,
        TauChoice::Minus => d.tau_minus_s,
        TauChoice::Up => d.selective_tau(plus, true),
        TauChoice::Down => d.selective_tau(plus, false),
        TauChoice::Seconds(_) => unreachable!(),
    };
    Ok((tau, Some(d)))
}

/// Runs one configuration. Parallel sections use the current rayon pool.
pub fn execute(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let e = &cfg.experiment;
    let p = &cfg.system;
    let seq = &cfg.sequence;
    let taus = || cfg.tau_values().context("missing tau grid");
    let mut out = Vec::new();
    match e.kind {
        ExperimentKind::Trace => {
            let mut t = coherence_trace(p, seq, &taus()?, e.n_pulses, &e.initial)?;
            run_metadata(cfg, &mut t.metadata);
            out.push(Artifact {
                path: cfg.output_path.clone(),
                contents: to_string(|w| write_trace(w, &t))?,
            });
        }
        ExperimentKind::Sweep => {
            let deltas = cfg.detuning_values().context("missing detuning grid")?;
            let maps = detuning_sweep(p, seq, &taus()?, &deltas, e.n_pulses, &e.pulse_widths_s, &e.initial)?;
            let many = maps.len() > 1;
            for mut m in maps {
                run_metadata(cfg, &mut m.metadata);
                let path = if many {
                    with_suffix(&cfg.output_path, &tp_suffix(m.pulse_width_s))
                } else {
                    cfg.output_path.clone()
                };
                out.push(Artifact {
                    path,
                    contents: to_string(|w| write_trace(w, &m))?,
                });
            }
        }
        ExperimentKind::Spectrum => {
            let grid = taus()?;
            let s = if e.unperturbed {
                unperturbed_spectrum(p, seq, &grid)?
            } else {
                full_spectrum(p, seq, &grid)?
            };
            let mut meta = Metadata::for_run(p, seq);
            meta.push("coupling", if e.unperturbed { "none" } else { "full" });
            meta.push("phase_convention", "U v = exp(-i phase) v");
            run_metadata(cfg, &mut meta);
            out.push(Artifact {
                path: cfg.output_path.clone(),
                contents: to_string(|w| write_spectrum(w, &s, &meta))?,
            });
        }
        ExperimentKind::Theta => {
            let c = theta_curve(p, seq, &taus()?)?;
            let mut meta = Metadata::for_run(p, seq);
            meta.push("regime_axis_x_sq", dnss::floquet::REGIME_AXIS_X_SQ);
            run_metadata(cfg, &mut meta);
            out.push(Artifact {
                path: cfg.output_path.clone(),
                contents: to_string(|w| write_theta(w, &c, &meta))?,
            });
        }
        ExperimentKind::Dips => {
            let mut meta = Metadata::for_run(p, seq);
            run_metadata(cfg, &mut meta);
            let mut text = to_string(|w| meta.write(w))?;
            text.push_str("harmonic_k,tau_plus_s,tau_minus_s,theta_plus_rad,theta_minus_rad,splitting_s,converged,iterations\n");
            for &k in &e.harmonics {
                let d = predict_dips(p, seq, k)?;
                writeln!(
                    text,
                    "{k},{},{},{},{},{},{},{}",
                    sci(d.tau_plus_s),
                    sci(d.tau_minus_s),
                    sci(d.theta_plus_rad),
                    sci(d.theta_minus_rad),
                    sci(d.splitting_s()),
                    u8::from(d.converged),
                    d.iterations
                )?;
            }
            out.push(Artifact {
                path: cfg.output_path.clone(),
                contents: text,
            });
        }
        ExperimentKind::Polarize => {
            let (tau, pred) = resolve_tau(cfg)?;
            let mut s = pulse_number_scan(p, seq, tau, e.n_max, &e.initial)?;
            s.metadata.push("tau_choice", e.tau.name());
            s.metadata.push("harmonic", e.harmonic);
            if let Some(d) = pred {
                s.metadata.push("tau_plus_s", sci(d.tau_plus_s));
                s.metadata.push("tau_minus_s", sci(d.tau_minus_s));
            }
            run_metadata(cfg, &mut s.metadata);
            out.push(Artifact {
                path: cfg.output_path.clone(),
                contents: to_string(|w| write_scan(w, &s))?,
            });
        }
    }
    if cfg.plot_script {
        let scripts: Vec<Artifact> = out.iter().map(|a| plot_script(e.kind, a)).collect();
        out.extend(scripts);
    }
    Ok(out)
}

/// A gnuplot script that plots `csv` from its own directory.
pub fn plot_script(kind: ExperimentKind, csv: &Artifact) -> Artifact {
    let file = csv.path.file_name().and_then(|s| s.to_str()).unwrap_or("out.csv");
    let body = match kind {
        ExperimentKind::Trace => format!(
            "set xlabel 'tau (s)'\nset ylabel 'coherence'\nplot '{file}' using 2:3 with lines title 'L'\n"
        ),
        ExperimentKind::Sweep => format!(
            "set xlabel 'tau (s)'\nset ylabel 'detuning (Hz)'\nset cblabel 'coherence'\n\
             plot '{file}' using 2:1:3 with points pointtype 5 pointsize 0.4 palette notitle\n"
        ),
        ExperimentKind::Spectrum => format!(
            "set xlabel 'tau (s)'\nset ylabel 'Floquet phase (rad)'\n\
             plot for [b=0:3] '{file}' using 1:(column(3+3*b)) with lines title sprintf('branch %d', b)\n"
        ),
        ExperimentKind::Theta => format!(
            "set xlabel 'tau (s)'\nset ylabel 'theta (rad)'\nplot '{file}' using 1:2 with lines title 'theta'\n"
        ),
        ExperimentKind::Dips => format!(
            "set xlabel 'harmonic'\nset ylabel 'tau (s)'\n\
             plot '{file}' using 1:2 with points title 'tau+', '' using 1:3 with points title 'tau-'\n"
        ),
        ExperimentKind::Polarize => format!(
            "set xlabel 'pulses'\nset yrange [-1.05:1.05]\n\
             plot '{file}' using 1:2 with lines title 'P', '' using 1:3 with lines title 'L'\n"
        ),
    };
    Artifact {
        path: csv.path.with_extension("gp"),
        contents: format!("set datafile separator ','\nset key autotitle columnhead\n{body}"),
    }
}

/// Writes artifacts below `dir`, creating directories as needed.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = dir.join(&a.path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&path, &a.contents).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

/// Runs `f` on a pool of `jobs` threads, or on the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => anyhow::bail!("--jobs must be at least 1"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            Ok(pool.install(f))
        }
    }
}
