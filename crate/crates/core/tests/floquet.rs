use std::f64::consts::PI;

use dnss::floquet::{
    extract_theta, full_spectrum, locate_crossing, pair_gap, period_propagator, predict_dips,
    theta_at, theta_curve, unperturbed_spectrum, CrossingPair, Label,
};
use dnss::kernel::{unitary_phases, wrap_phase, CMat};
use dnss::seqdsl::{Preset, Sequence};
use dnss::spinsys::SpinSystemParams;
use dnss::Error;

const FL: f64 = 2.1e6;

fn proton(delta_hz: f64, tp: f64) -> SpinSystemParams {
    SpinSystemParams::new(FL)
        .with_hyperfine(44e3, 0.0)
        .with_detuning(delta_hz)
        .with_pulse_width(tp)
}

fn cpmg() -> Sequence {
    Sequence::preset(Preset::Cpmg)
}

fn tau0() -> f64 {
    1.0 / (2.0 * FL)
}

#[test]
fn ideal_pulse_part_is_minus_identity() {
    let p = SpinSystemParams::new(FL);
    let r = p.resolve().unwrap();
    let seg = cpmg().compile_at(tau0(), &r).unwrap();
    let u = period_propagator(&p, &seg).unwrap();
    // Strip the nuclear precession exp(−iωL·Iz·T).
    let larmor = dnss::kernel::expm_i(&dnss::spinsys::Operators::get().iz, r.omega_l * seg.period_duration_s)
        .unwrap();
    let up = larmor.adjoint() * u;
    assert!(up.distance(&-CMat::identity(4)) < 1e-12);
}

#[test]
fn zero_duration_period_is_identity() {
    let p = SpinSystemParams::new(FL);
    let seq = Sequence::from_source("z", "wait 0;").unwrap();
    let seg = seq.compile_at(1e-7, &p.resolve().unwrap()).unwrap();
    assert_eq!(period_propagator(&p, &seg).unwrap(), CMat::identity(4));
}

#[test]
fn propagators_are_unitary() {
    for (d, tp) in [(0.0, 0.0), (1e6, 40e-9), (3e6, 20e-9)] {
        let p = proton(d, tp);
        for seq in [cpmg(), Sequence::preset(Preset::Xy8)] {
            let seg = seq.compile_at(241e-9, &p.resolve().unwrap()).unwrap();
            let u = period_propagator(&p, &seg).unwrap();
            assert!(u.unitarity_error() < 1e-12);
        }
    }
}

#[test]
fn theta_vanishes_for_perfect_pulses() {
    let th = extract_theta(&proton(0.0, 0.0), &cpmg(), 230e-9).unwrap();
    assert!(th.abs() < 1e-15, "{th}");
    let th = extract_theta(&proton(0.0, 40e-9), &cpmg(), 230e-9).unwrap();
    assert!(th.abs() < 1e-12, "{th}");
}

// Values frozen from an independent dense-matrix implementation using
// generic matrix exponentials.
#[test]
fn theta_matches_reference_values() {
    let cases = [
        (0.5e6, 0.026847377738449),
        (1.0e6, 0.1009752826085848),
        (1.5e6, 0.20487787703858),
        (2.0e6, 0.31318595583224),
        (2.5e6, 0.39533864812156),
    ];
    for (d, want) in cases {
        let th = extract_theta(&proton(d, 40e-9), &cpmg(), tau0()).unwrap();
        assert!((th - want).abs() < 1e-9, "delta {d}: {th} vs {want}");
    }
    let t = theta_at(&proton(1e6, 40e-9), &cpmg(), tau0()).unwrap();
    assert!((t.axis_x_sq - 0.99616).abs() < 1e-4);
}

#[test]
fn strong_detuning_is_out_of_regime() {
    let err = extract_theta(&proton(3e6, 40e-9), &cpmg(), tau0()).unwrap_err();
    assert!(matches!(err, Error::OutOfRegime { axis_x_sq, .. } if axis_x_sq < 0.99));
    let curve = theta_curve(&proton(4e6, 40e-9), &cpmg(), &[tau0(), 1.1 * tau0()]).unwrap();
    assert!(!curve.in_regime(0));
}

#[test]
fn theta_changes_sign_near_four_and_a_half_megahertz() {
    let a = theta_at(&proton(4.4e6, 40e-9), &cpmg(), tau0()).unwrap().theta_rad;
    let b = theta_at(&proton(4.8e6, 40e-9), &cpmg(), tau0()).unwrap().theta_rad;
    assert!(a * b < 0.0, "{a} {b}");
}

#[test]
fn flip_angle_theta_is_linear_in_eps() {
    let p = SpinSystemParams::new(FL).with_hyperfine(44e3, 0.0);
    for eps in [0.0, 0.01, 0.03, 0.05, 0.09] {
        let seq = Sequence::preset(Preset::DnssFlip).bind("eps", eps);
        let th = extract_theta(&p, &seq, 233e-9).unwrap();
        assert!((th - eps).abs() < 1e-13, "{eps}: {th}");
    }
}

#[test]
fn reference_dip_positions() {
    let d = predict_dips(&proton(1e6, 40e-9), &cpmg(), 1).unwrap();
    assert!(d.converged);
    // The iteration stops once a step is below 1e-15 s.
    assert!((d.tau_minus_s - 230.66391130101e-9).abs() < 2e-15, "{}", d.tau_minus_s);
    assert!((d.tau_plus_s - 245.97830582098e-9).abs() < 2e-15, "{}", d.tau_plus_s);
    assert!(d.theta_minus_rad > 0.0);
    assert_eq!(d.selective_tau(true, true), d.tau_minus_s);

    for (delta, lo, hi) in [(0.5e6, 236.0786e-9, 240.1483e-9), (2e6, 215.3185e-9, 262.3028e-9)] {
        let d = predict_dips(&proton(delta, 40e-9), &cpmg(), 1).unwrap();
        assert!((d.tau_minus_s - lo).abs() < 1e-13);
        assert!((d.tau_plus_s - hi).abs() < 1e-13);
    }
}

#[test]
fn dip_equation_holds_at_solution() {
    let p = proton(1.5e6, 40e-9);
    let d = predict_dips(&p, &cpmg(), 1).unwrap();
    let wl = 2.0 * PI * FL;
    let tp = extract_theta(&p, &cpmg(), d.tau_plus_s).unwrap();
    assert!((d.tau_plus_s - (PI + tp.abs()) / wl).abs() < 1e-15);
    let tm = extract_theta(&p, &cpmg(), d.tau_minus_s).unwrap();
    assert!((d.tau_minus_s - (PI - tm.abs()) / wl).abs() < 1e-15);
}

#[test]
fn prediction_ignores_hyperfine() {
    let a = predict_dips(&proton(1e6, 40e-9), &cpmg(), 1).unwrap();
    let b = predict_dips(&proton(1e6, 40e-9).with_hyperfine(100e3, 30e3), &cpmg(), 1).unwrap();
    assert_eq!(a, b);
}

#[test]
fn second_harmonic() {
    let d = predict_dips(&proton(0.0, 0.0), &cpmg(), 2).unwrap();
    assert!((d.tau_plus_s - 714.2857142857e-9).abs() < 1e-18);
}

fn closed_form_residual(p: &SpinSystemParams, seq: &Sequence) -> f64 {
    let taus: Vec<f64> = (0..200).map(|i| 225e-9 + i as f64 * 0.1e-9).collect();
    let s = unperturbed_spectrum(p, seq, &taus).unwrap();
    let wl = 2.0 * PI * FL;
    let delta = 2.0 * PI * p.detuning_hz;
    let mut worst: f64 = 0.0;
    for (i, &tau) in taus.iter().enumerate() {
        let th = extract_theta(p, seq, tau).unwrap();
        for (label, s_th, s_l) in [
            (Label::XPlusUp, 1.0, 1.0),
            (Label::XPlusDown, 1.0, -1.0),
            (Label::XMinusUp, -1.0, 1.0),
            (Label::XMinusDown, -1.0, -1.0),
        ] {
            let b = s.find(i, label).unwrap_or_else(|| panic!("{label:?} missing at {tau}"));
            let want = PI + delta * tau + s_th * th + s_l * wl * tau;
            worst = worst.max(wrap_phase(s.points[i][b].phase_rad - want).abs());
        }
    }
    worst
}

#[test]
fn unperturbed_spectrum_matches_closed_form() {
    // Small θ: the z tilt of the rotation axis enters at fourth order in Δ.
    let r = closed_form_residual(&proton(0.2e6, 40e-9), &cpmg());
    assert!(r < 1e-6, "{r}");
    // A pure x over-rotation has no tilt at all.
    let flip = Sequence::preset(Preset::DnssFlip).bind("eps", 0.08);
    let r = closed_form_residual(&proton(0.0, 0.0), &flip);
    assert!(r < 1e-12, "{r}");
}

#[test]
fn ideal_spectrum_is_two_degenerate_lines() {
    let p = SpinSystemParams::new(FL);
    let taus: Vec<f64> = (0..50).map(|i| 200e-9 + i as f64 * 1e-9).collect();
    let s = unperturbed_spectrum(&p, &cpmg(), &taus).unwrap();
    let wl = 2.0 * PI * FL;
    for (i, &tau) in taus.iter().enumerate() {
        let mut phases: Vec<f64> = s.points[i].iter().map(|b| b.phase_rad).collect();
        phases.sort_by(f64::total_cmp);
        let mut want = [wrap_phase(PI + wl * tau), wrap_phase(PI + wl * tau), wrap_phase(PI - wl * tau), wrap_phase(PI - wl * tau)];
        want.sort_by(f64::total_cmp);
        for (a, b) in phases.iter().zip(want) {
            assert!(wrap_phase(a - b).abs() < 1e-12);
        }
    }
    let s0 = unperturbed_spectrum(&p, &cpmg(), &[0.0]).unwrap();
    for b in &s0.points[0] {
        assert!((b.phase_rad - PI).abs() < 1e-15);
    }
}

#[test]
fn full_spectrum_tracks_winding_across_the_seam() {
    let p = proton(1e6, 40e-9);
    let taus: Vec<f64> = (0..2001).map(|i| 200e-9 + i as f64 * 0.04e-9).collect();
    let s = full_spectrum(&p, &cpmg(), &taus).unwrap();
    for b in 0..4 {
        let ph: Vec<f64> = s.branch(b).map(|bp| bp.unwrapped()).collect();
        for w in ph.windows(2) {
            assert!((w[1] - w[0]).abs() < 0.05, "branch {b} jumps");
        }
    }
    let seg = cpmg().compile_at(taus[1000], &p.resolve().unwrap()).unwrap();
    let up = unitary_phases(&period_propagator(&p, &seg).unwrap()).unwrap();
    let mut got: Vec<f64> = s.points[1000].iter().map(|b| b.phase_rad).collect();
    got.sort_by(f64::total_cmp);
    for (a, b) in got.iter().zip(up.phases()) {
        assert_eq!(a, b);
    }
}

#[test]
fn uncoupled_full_spectrum_equals_unperturbed() {
    let p = proton(1e6, 40e-9);
    let taus: Vec<f64> = (0..100).map(|i| 220e-9 + i as f64 * 0.3e-9).collect();
    let a = unperturbed_spectrum(&p, &cpmg(), &taus).unwrap();
    let b = full_spectrum(&p.clone().uncoupled(), &cpmg(), &taus).unwrap();
    assert_eq!(a, b);
}

#[test]
fn phases_invariant_under_cyclic_shift() {
    let p = proton(1e6, 40e-9);
    let r = p.resolve().unwrap();
    let seg = cpmg().compile_at(233e-9, &r).unwrap();
    let base = unitary_phases(&period_propagator(&p, &seg).unwrap()).unwrap();
    for shift in 1..seg.period.len() {
        let mut s = seg.clone();
        s.period.rotate_left(shift);
        let up = unitary_phases(&period_propagator(&p, &s).unwrap()).unwrap();
        for (a, b) in up.phases().iter().zip(base.phases()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn avoided_crossing_gap_opens_with_coupling() {
    let d = predict_dips(&proton(1e6, 40e-9), &cpmg(), 1).unwrap();
    let tau = d.selective_tau(true, true);
    let c0 = locate_crossing(&proton(1e6, 40e-9).uncoupled(), &cpmg(), CrossingPair::UpFlip, tau - 2e-9, tau + 2e-9, 41).unwrap();
    assert!(c0.gap_rad < 1e-10, "{c0:?}");
    assert!(pair_gap(&proton(1e6, 40e-9), &cpmg(), c0.tau_s, CrossingPair::UpFlip).unwrap() > 1e-4);
    let mut gaps = Vec::new();
    for a in [10e3, 20e3, 40e3] {
        let p = proton(1e6, 40e-9).with_hyperfine(a, 0.0);
        let c = locate_crossing(&p, &cpmg(), CrossingPair::UpFlip, tau - 2e-9, tau + 2e-9, 41).unwrap();
        assert!(c.gap_rad > 0.0);
        gaps.push((a, c.gap_rad));
    }
    // Least-squares line through the three points.
    let n = gaps.len() as f64;
    let mx = gaps.iter().map(|g| g.0).sum::<f64>() / n;
    let my = gaps.iter().map(|g| g.1).sum::<f64>() / n;
    let sxy: f64 = gaps.iter().map(|g| (g.0 - mx) * (g.1 - my)).sum();
    let sxx: f64 = gaps.iter().map(|g| (g.0 - mx).powi(2)).sum();
    let syy: f64 = gaps.iter().map(|g| (g.1 - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 > 0.999, "{gaps:?} r2 = {r2}");
}

#[test]
fn same_symmetry_branches_cross_exactly() {
    let p = proton(1e6, 40e-9);
    for pair in [CrossingPair::SamePlus, CrossingPair::SameMinus] {
        let c = locate_crossing(&p, &cpmg(), pair, tau0() - 3e-9, tau0() + 3e-9, 61).unwrap();
        assert!(c.gap_rad < 1e-10, "{pair:?}: {c:?}");
        assert!(((c.tau_s - tau0()) / tau0()).abs() < 1e-3, "{pair:?}: {c:?}");
    }
}
