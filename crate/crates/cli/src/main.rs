use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dnss::seqdsl::{Preset, TimingConvention};
use dnss_cli::config::{self, ConfigError, FrequencyConvention, Overrides};
use dnss_cli::{runner, Target};
use toml::{Table, Value};

#[derive(Parser)]
#[command(name = "dnss", version, about = "Nuclear-spin-selective dynamical decoupling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for grid sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Where pulses sit relative to the nominal spacing.
    #[arg(long, global = true, value_enum)]
    timing_convention: Option<Timing>,

    /// Units of frequency inputs.
    #[arg(long, global = true, value_enum)]
    frequency_convention: Option<Frequency>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Timing {
    Center,
    Edge,
}

#[derive(Clone, Copy, ValueEnum)]
enum Frequency {
    Ordinary,
    Angular,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file or a figure preset and write CSV files.
    Run {
        #[command(flatten)]
        target: TargetArgs,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write a gnuplot script next to every CSV file.
        #[arg(long)]
        plot_script: bool,
    },
    /// Predict dip positions and print them as one key=value line.
    Dips {
        #[command(flatten)]
        system: SystemArgs,
        /// Odd harmonic index: the k-th dip sits near (2k-1)π/ωL.
        #[arg(long, default_value_t = 1)]
        harmonic: u32,
    },
    /// Write the branch-tracked Floquet spectrum over a τ grid.
    Spectrum {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        grid: TauGridArgs,
        /// Drop the hyperfine coupling.
        #[arg(long)]
        unperturbed: bool,
    },
    /// Write the pulse-propagator rotation angle over a τ grid.
    Theta {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        grid: TauGridArgs,
    },
    /// Check a configuration file or figure preset without running it.
    Validate {
        #[command(flatten)]
        target: TargetArgs,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct TargetArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in figure preset: fig1c, fig2b, fig2c, fig3a, fig3b or fig3c.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct SystemArgs {
    /// TOML file supplying [system] and [sequence]; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    larmor_hz: Option<f64>,
    /// Nuclear species (h1, c13), used with --bz-gauss.
    #[arg(long)]
    species: Option<String>,
    #[arg(long)]
    bz_gauss: Option<f64>,
    #[arg(long)]
    a_perp_hz: Option<f64>,
    #[arg(long)]
    a_par_hz: Option<f64>,
    #[arg(long)]
    detuning_hz: Option<f64>,
    #[arg(long)]
    pulse_width_s: Option<f64>,
    #[arg(long)]
    rabi_hz: Option<f64>,
    /// Sequence preset name or path to a .seq file.
    #[arg(long)]
    sequence: Option<String>,
    /// Sequence parameter binding, NAME=VALUE (repeatable).
    #[arg(long = "bind", value_parser = parse_binding)]
    bindings: Vec<(String, f64)>,
}

#[derive(Args)]
struct TauGridArgs {
    #[arg(long)]
    tau_start: f64,
    #[arg(long)]
    tau_stop: f64,
    #[arg(long, default_value_t = 401)]
    points: i64,
    /// Grid unit: s, or dip for multiples of π/ωL.
    #[arg(long, default_value = "s")]
    unit: String,
    /// Output CSV file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_binding(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value in `{s}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

impl TargetArgs {
    fn target(&self) -> Result<Target, ConfigError> {
        match (&self.config, &self.preset) {
            (Some(path), _) => Ok(Target::File(path.clone())),
            (None, Some(name)) => Target::figure(name),
            (None, None) => unreachable!("clap enforces one of --config/--preset"),
        }
    }
}

impl SystemArgs {
    /// Builds a configuration table: the optional file first, then flags.
    fn table(&self) -> Result<(Table, PathBuf)> {
        let (mut root, base) = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let t: Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
                (t, path.parent().unwrap_or(Path::new(".")).to_path_buf())
            }
            None => (Table::new(), PathBuf::from(".")),
        };
        for key in ["experiment", "grids", "output"] {
            root.remove(key);
        }
        let sys = section(&mut root, "system");
        let floats = [
            ("larmor_hz", self.larmor_hz),
            ("bz_gauss", self.bz_gauss),
            ("a_perp_hz", self.a_perp_hz),
            ("a_par_hz", self.a_par_hz),
            ("detuning_hz", self.detuning_hz),
            ("pulse_width_s", self.pulse_width_s),
            ("rabi_hz", self.rabi_hz),
        ];
        for (k, v) in floats {
            if let Some(v) = v {
                sys.insert(k.into(), Value::Float(v));
            }
        }
        if let Some(s) = &self.species {
            sys.insert("species".into(), Value::String(s.clone()));
        }
        let seq = section(&mut root, "sequence");
        if let Some(s) = &self.sequence {
            seq.remove("preset");
            seq.remove("file");
            if s.parse::<Preset>().is_ok() {
                seq.insert("preset".into(), Value::String(s.clone()));
            } else {
                seq.insert("file".into(), Value::String(s.clone()));
            }
        }
        if !self.bindings.is_empty() {
            let b = section(seq, "bindings");
            for (k, v) in &self.bindings {
                b.insert(k.clone(), Value::Float(*v));
            }
        }
        Ok((root, base))
    }
}

fn section<'a>(t: &'a mut Table, key: &str) -> &'a mut Table {
    let entry = t.entry(key.to_string()).or_insert_with(|| Value::Table(Table::new()));
    if !entry.is_table() {
        *entry = Value::Table(Table::new());
    }
    entry.as_table_mut().expect("just ensured a table")
}

fn experiment(root: &mut Table, kind: &str, extra: &[(&str, Value)]) {
    let e = section(root, "experiment");
    e.insert("kind".into(), Value::String(kind.into()));
    for (k, v) in extra {
        e.insert((*k).into(), v.clone());
    }
}

fn tau_grid(root: &mut Table, g: &TauGridArgs) {
    let grids = section(root, "grids");
    let t = section(grids, "tau");
    t.insert("start".into(), Value::Float(g.tau_start));
    t.insert("stop".into(), Value::Float(g.tau_stop));
    t.insert("points".into(), Value::Integer(g.points));
    t.insert("unit".into(), Value::String(g.unit.clone()));
}

fn emit(artifacts: &[runner::Artifact], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let dir = path.parent().unwrap_or(Path::new("."));
            let renamed: Vec<runner::Artifact> = artifacts
                .iter()
                .map(|a| runner::Artifact {
                    path: path.file_name().map(PathBuf::from).unwrap_or_else(|| a.path.clone()),
                    contents: a.contents.clone(),
                })
                .collect();
            for p in runner::write_artifacts(dir, &renamed)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            for a in artifacts {
                stdout.write_all(a.contents.as_bytes())?;
            }
        }
    }
    Ok(())
}

enum Failure {
    Config(ConfigError),
    NotConverged,
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<ConfigError>() {
            Ok(c) => Failure::Config(c),
            Err(e) => Failure::Other(e),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn real_main(cli: Cli) -> Result<(), Failure> {
    let ov = Overrides {
        timing: cli.timing_convention.map(|t| match t {
            Timing::Center => TimingConvention::Center,
            Timing::Edge => TimingConvention::Edge,
        }),
        frequency: cli.frequency_convention.map(|f| match f {
            Frequency::Ordinary => FrequencyConvention::Ordinary,
            Frequency::Angular => FrequencyConvention::Angular,
        }),
    };
    let jobs = cli.jobs;
    match cli.command {
        Command::Run { target, out, plot_script } => {
            let target = target.target()?;
            let artifacts = runner::with_jobs(jobs, || dnss_cli::run(&target, ov, plot_script))??;
            for p in runner::write_artifacts(&out, &artifacts)? {
                println!("{}", p.display());
            }
        }
        Command::Validate { target } => {
            let target = target.target()?;
            let cfgs = dnss_cli::load(&target, ov)?;
            println!("ok: {} run{}", cfgs.len(), if cfgs.len() == 1 { "" } else { "s" });
        }
        Command::Dips { system, harmonic } => {
            let (mut root, base) = system.table()?;
            experiment(&mut root, "dips", &[("harmonics", Value::Array(vec![Value::Integer(harmonic.into())]))]);
            let cfg = config::from_table(&root, "dips", &base, ov)?;
            let d = runner::with_jobs(jobs, || dnss::floquet::predict_dips(&cfg.system, &cfg.sequence, harmonic))?
                .map_err(|e| anyhow!(e))?;
            println!("{}", runner::dips_line(&d));
            if !d.converged {
                return Err(Failure::NotConverged);
            }
        }
        Command::Spectrum { system, grid, unperturbed } => {
            let (mut root, base) = system.table()?;
            experiment(&mut root, "spectrum", &[("unperturbed", Value::Boolean(unperturbed))]);
            tau_grid(&mut root, &grid);
            let cfg = config::from_table(&root, "spectrum", &base, ov)?;
            let artifacts = runner::with_jobs(jobs, || runner::execute(&cfg))??;
            emit(&artifacts, grid.out.as_deref())?;
        }
        Command::Theta { system, grid } => {
            let (mut root, base) = system.table()?;
            experiment(&mut root, "theta", &[]);
            tau_grid(&mut root, &grid);
            let cfg = config::from_table(&root, "theta", &base, ov)?;
            let artifacts = runner::with_jobs(jobs, || runner::execute(&cfg))??;
            emit(&artifacts, grid.out.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprint!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::NotConverged) => {
            eprintln!("error: dip prediction did not converge");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
