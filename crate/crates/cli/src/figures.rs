//! Built-in figure presets. Each is a list of complete run configurations.

/// A named group of runs.
#[derive(Debug, Clone, Copy)]
pub struct Figure {
    pub name: &'static str,
    pub about: &'static str,
    pub runs: &'static [(&'static str, &'static str)],
}

macro_rules! proton {
    ($rest:expr) => {
        concat!(
            "[system]\nlarmor_hz = 2.1e6\na_perp_hz = 44e3\na_par_hz = 0\n",
            $rest
        )
    };
}

pub const FIGURES: &[Figure] = &[
    Figure {
        name: "fig1c",
        about: "standard DD dip versus the DNSS dip pair, mixed and pure nuclear input",
        runs: &[
            (
                "fig1c_dd",
                proton!(
                    r#"
[sequence]
preset = "cpmg"

[experiment]
kind = "trace"
n_pulses = 336

[grids.tau]
start = 0.9
stop = 1.1
points = 801
unit = "dip"

[output]
path = "fig1c_dd.csv"
"#
                ),
            ),
            (
                "fig1c_dnss_mixed",
                proton!(
                    r#"detuning_hz = 1e6
pulse_width_s = 40e-9

[sequence]
preset = "dnss_detuned"

[experiment]
kind = "trace"
n_pulses = 336
nuclear = "mixed"

[grids.tau]
start = 0.9
stop = 1.1
points = 801
unit = "dip"

[output]
path = "fig1c_dnss_mixed.csv"
"#
                ),
            ),
            (
                "fig1c_dnss_up",
                proton!(
                    r#"detuning_hz = 1e6
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
points = 801
unit = "dip"

[output]
path = "fig1c_dnss_up.csv"
"#
                ),
            ),
        ],
    },
    Figure {
        name: "fig2b",
        about: "Floquet phases near the first dip for ideal and finite pulses",
        runs: &[
            (
                "fig2b_tp0ns",
                proton!(
                    r#"
[sequence]
preset = "cpmg"

[experiment]
kind = "spectrum"

[grids.tau]
start = 0.9
stop = 1.1
points = 801
unit = "dip"

[output]
path = "fig2b_tp0ns.csv"
"#
                ),
            ),
            (
                "fig2b_tp40ns",
                proton!(
                    r#"detuning_hz = 1e6
pulse_width_s = 40e-9

[sequence]
preset = "dnss_detuned"

[experiment]
kind = "spectrum"

[grids.tau]
start = 0.9
stop = 1.1
points = 801
unit = "dip"

[output]
path = "fig2b_tp40ns.csv"
"#
                ),
            ),
        ],
    },
    Figure {
        name: "fig2c",
        about: "coherence maps over detuning and pulse spacing for tp = 0, 20, 40 ns",
        runs: &[(
            "fig2c",
            proton!(
                r#"
[sequence]
preset = "cpmg"

[experiment]
kind = "sweep"
n_pulses = 336
pulse_widths_s = [0.0, 20e-9, 40e-9]

[grids.tau]
start = 0.8
stop = 1.2
points = 401
unit = "dip"

[grids.detuning]
start = 0.0
stop = 4e6
points = 81

[output]
path = "fig2c.csv"
"#
            ),
        )],
    },
    Figure {
        name: "fig3a",
        about: "first two harmonics with mixed, up and down nuclear input",
        runs: &[
            ("fig3a_mixed", FIG3A_MIXED),
            ("fig3a_up", FIG3A_UP),
            ("fig3a_down", FIG3A_DOWN),
        ],
    },
    Figure {
        name: "fig3b",
        about: "pulse-propagator rotation angle and unperturbed Floquet phases",
        runs: &[
            (
                "fig3b_theta",
                proton!(
                    r#"detuning_hz = 1e6
pulse_width_s = 40e-9

[sequence]
preset = "dnss_detuned"

[experiment]
kind = "theta"

[grids.tau]
start = 0.8
stop = 3.4
points = 1301
unit = "dip"

[output]
path = "fig3b_theta.csv"
"#
                ),
            ),
            (
                "fig3b_unperturbed",
                proton!(
                    r#"detuning_hz = 1e6
pulse_width_s = 40e-9

[sequence]
preset = "dnss_detuned"

[experiment]
kind = "spectrum"
unperturbed = true

[grids.tau]
start = 0.8
stop = 3.4
points = 1301
unit = "dip"

[output]
path = "fig3b_unperturbed.csv"
"#
                ),
            ),
        ],
    },
    Figure {
        name: "fig3c",
        about: "pulse-number scan of polarization and coherence at a selective dip",
        runs: &[("fig3c", FIG3C)],
    },
];

macro_rules! fig3a {
    ($nuc:literal) => {
        proton!(concat!(
            r#"detuning_hz = 1e6
pulse_width_s = 40e-9

[sequence]
preset = "dnss_detuned"

[experiment]
kind = "trace"
n_pulses = 336
nuclear = ""#,
            $nuc,
            r#""

[grids.tau]
start = 0.8
stop = 3.4
points = 2601
unit = "dip"

[output]
path = "fig3a_"#,
            $nuc,
            r#".csv"
"#
        ))
    };
}

const FIG3A_MIXED: &str = fig3a!("mixed");
const FIG3A_UP: &str = fig3a!("up");
const FIG3A_DOWN: &str = fig3a!("down");

/// ¹³C at 400 G with (A⊥, A∥) = (10, 0) kHz. Detuning and pulse width are
/// not fixed by the physics; these values give a single-pass flip above
/// 0.999 fidelity within 300 pulses.
pub const FIG3C: &str = r#"
[system]
species = "c13"
bz_gauss = 400
a_perp_hz = 10e3
a_par_hz = 0
detuning_hz = 200e3
pulse_width_s = 40e-9

[sequence]
preset = "dnss_detuned"

[experiment]
kind = "polarize"
electron = "x_plus"
nuclear = "mixed"
tau = "tau_plus"
harmonic = 1
n_max = 300

[output]
path = "fig3c.csv"
"#;

pub fn find(name: &str) -> Option<&'static Figure> {
    FIGURES.iter().find(|f| f.name == name)
}

pub fn names() -> Vec<&'static str> {
    FIGURES.iter().map(|f| f.name).collect()
}
