use std::path::Path;
use std::process::{Command, Output};

fn dnss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnss")).args(args).output().expect("spawn dnss")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field<'a>(line: &'a str, key: &str) -> &'a str {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no `{key}` in {line}"))
}

const SMALL_TRACE: &str = r#"
[system]
larmor_hz = 2.1e6
a_perp_hz = 44e3
detuning_hz = 1e6
pulse_width_s = 40e-9

[sequence]
preset = "dnss_detuned"

[experiment]
kind = "trace"
n_pulses = 336
nuclear = "up"

[grids.tau]
start = 0.9
stop = 1.1
points = 161
unit = "dip"

[output]
path = "trace.csv"
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn dips_for_ideal_cpmg() {
    let o = dnss(&["dips", "--larmor-hz", "2.1e6", "--sequence", "cpmg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    assert_eq!(line.lines().count(), 1);
    assert_eq!(field(&line, "tau_plus_s"), "2.38095238095e-7");
    assert_eq!(field(&line, "tau_minus_s"), "2.38095238095e-7");
    assert_eq!(field(&line, "converged"), "true");
}

#[test]
fn dips_for_unrotated_flip_preset_match_ideal() {
    let o = dnss(&["dips", "--larmor-hz", "2.1e6", "--sequence", "dnss_flip", "--bind", "eps=0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "tau_plus_s"), "2.38095238095e-7");
}

#[test]
fn dips_second_harmonic() {
    let o = dnss(&["dips", "--larmor-hz", "2.1e6", "--sequence", "cpmg", "--harmonic", "2"]);
    assert!(o.status.success());
    assert_eq!(field(&stdout(&o), "tau_plus_s"), "7.14285714286e-7");
}

#[test]
fn dips_out_of_regime_fails() {
    let o = dnss(&[
        "dips",
        "--larmor-hz",
        "2.1e6",
        "--detuning-hz",
        "5e6",
        "--pulse-width-s",
        "40e-9",
        "--sequence",
        "dnss_detuned",
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("out of regime"), "{}", stderr(&o));
}

#[test]
fn angular_frequency_flag() {
    let w = format!("{:e}", 2.1e6 * 2.0 * std::f64::consts::PI);
    let o = dnss(&["--frequency-convention", "angular", "dips", "--larmor-hz", &w, "--sequence", "cpmg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "tau_plus_s"), "2.38095238095e-7");
}

#[test]
fn every_figure_preset_validates() {
    for name in ["fig1c", "fig2b", "fig2c", "fig3a", "fig3b", "fig3c"] {
        let o = dnss(&["validate", "--preset", name]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
    }
    let o = dnss(&["validate", "--preset", "fig2d"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("did you mean `fig2c`"));
}

#[test]
fn validate_names_the_nearest_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &SMALL_TRACE.replace("detuning_hz", "detunning_hz"));
    let o = dnss(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("system.detunning_hz"), "{err}");
    assert!(err.contains("did you mean `detuning_hz`"), "{err}");
}

#[test]
fn validate_reports_all_errors() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_TRACE
        .replace("detuning_hz", "detunning_hz")
        .replace("points = 161", "points = 1")
        .replace("nuclear = \"up\"", "nuclear = \"sideways\"");
    let cfg = write(dir.path(), "bad.toml", &text);
    let err = stderr(&dnss(&["validate", "--config", &cfg]));
    assert!(err.starts_with("error: 3 configuration errors"), "{err}");
}

#[test]
fn short_spacing_reports_negative_duration_in_sequence_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "echo.seq", "# spin echo pair\nwait tau/2;\npulse pi x;\nwait tau;\npulse pi x;\nwait tau/2;\n");
    let text = SMALL_TRACE
        .replace("preset = \"dnss_detuned\"", "file = \"echo.seq\"")
        .replace("start = 0.9", "start = 0.1");
    let cfg = write(dir.path(), "run.toml", &text);
    let o = dnss(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("negative duration"), "{err}");
    assert!(err.contains("echo.seq:2:1"), "{err}");
}

#[test]
fn sequence_syntax_errors_carry_file_positions() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.seq", "wait tau;\npulse pi q;\n");
    let cfg = write(dir.path(), "run.toml", &SMALL_TRACE.replace("preset = \"dnss_detuned\"", "file = \"bad.seq\""));
    let err = stderr(&dnss(&["validate", "--config", &cfg]));
    assert!(err.contains("bad.seq:2:10"), "{err}");
}

#[test]
fn run_is_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL_TRACE);
    let mut outputs = Vec::new();
    for jobs in ["1", "3", "1"] {
        let out = dir.path().join(format!("out{jobs}{}", outputs.len()));
        let o = dnss(&["--jobs", jobs, "run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(std::fs::read(out.join("trace.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let text = String::from_utf8(outputs.swap_remove(0)).unwrap();
    assert!(text.starts_with("# frequency_convention=ordinary\n"));
    assert!(text.contains("\n# nuclear_initial=up\n"));
    assert!(text.contains("\ndetuning_hz,tau_s,coherence,polarization\n"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 162);
}

#[test]
fn plot_script_is_written_next_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL_TRACE);
    let out = dir.path().join("o");
    let o = dnss(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--plot-script"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gp = std::fs::read_to_string(out.join("trace.gp")).unwrap();
    assert!(gp.contains("'trace.csv'"));
}

#[test]
fn timing_convention_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL_TRACE);
    let out = dir.path().join("o");
    let o = dnss(&["--timing-convention", "edge", "run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(text.contains("# timing_convention=edge\n"));
}

#[test]
fn theta_and_spectrum_write_to_stdout() {
    let base = [
        "--larmor-hz",
        "2.1e6",
        "--a-perp-hz",
        "44e3",
        "--detuning-hz",
        "1e6",
        "--pulse-width-s",
        "40e-9",
        "--sequence",
        "dnss_detuned",
        "--tau-start",
        "0.95",
        "--tau-stop",
        "1.05",
        "--points",
        "101",
        "--unit",
        "dip",
    ];
    let o = dnss(&[&["theta"], &base[..]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("\ntau_s,theta_rad,axis_x_sq,in_regime\n"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 102);

    let o = dnss(&[&["spectrum"], &base[..]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("tau_s,phase_0,unwrapped_0,label_0"));
    assert!(header.ends_with("gap_same_minus"), "{header}");
}

#[test]
fn polarize_config_marks_n_init() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = dnss(&["run", "--preset", "fig3c", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("fig3c.csv")).unwrap();
    let marked: Vec<&str> = text.lines().filter(|l| l.ends_with(",1")).collect();
    assert_eq!(marked.len(), 1);
    assert!(text.contains("# tau_choice=tau_plus\n"));
}
