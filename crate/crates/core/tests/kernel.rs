use dnss::kernel::{
    expm_i, herm_eig, kron, partial_trace, pauli, su2_axis_angle, unitary_phases, wrap_phase, AxisAngle, CMat,
    Subsystem, C64,
};
use proptest::prelude::*;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Hermitian 4×4 built from 16 reals.
fn hermitian(x: &[f64]) -> CMat {
    let mut h = CMat::zeros(4);
    let mut k = 0;
    for i in 0..4 {
        h[(i, i)] = c(x[k], 0.0);
        k += 1;
    }
    for i in 0..4 {
        for j in i + 1..4 {
            h[(i, j)] = c(x[k], x[k + 1]);
            h[(j, i)] = c(x[k], -x[k + 1]);
            k += 2;
        }
    }
    h
}

fn taylor(h: &CMat, t: f64) -> CMat {
    let a = h.scale(c(0.0, -t));
    let mut norm = a.frobenius_norm();
    let mut sq = 0;
    while norm > 0.1 {
        norm *= 0.5;
        sq += 1;
    }
    let a = a.scale_re(0.5f64.powi(sq));
    let mut sum = CMat::identity(4);
    let mut term = CMat::identity(4);
    for k in 1..30 {
        term = (term * a).scale_re(1.0 / k as f64);
        sum = sum + term;
    }
    for _ in 0..sq {
        sum = sum * sum;
    }
    sum
}

fn herm_strategy() -> impl Strategy<Value = CMat> {
    prop::collection::vec(-1.0f64..1.0, 16).prop_map(|v| hermitian(&v))
}

fn density_strategy() -> impl Strategy<Value = CMat> {
    herm_strategy().prop_map(|h| {
        let m = h * h.adjoint();
        let t = m.trace().re;
        m.scale_re(1.0 / t)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn exponential_matches_taylor(h in herm_strategy(), t in -3.0f64..3.0) {
        let u = expm_i(&h, t).unwrap();
        prop_assert!(u.distance(&taylor(&h, t)) < 1e-11);
        prop_assert!(u.unitarity_error() < 1e-12);
    }

    #[test]
    fn exponential_composes(h in herm_strategy(), s in -2.0f64..2.0, t in -2.0f64..2.0) {
        let a = expm_i(&h, s).unwrap() * expm_i(&h, t).unwrap();
        prop_assert!(a.distance(&expm_i(&h, s + t).unwrap()) < 1e-12);
    }

    #[test]
    fn hermitian_eigenpairs_have_small_residual(h in herm_strategy()) {
        let e = herm_eig(&h).unwrap();
        let v = e.vectors();
        for (i, &l) in e.values().iter().enumerate() {
            let col = v.column(i);
            let hv = h.apply(&col);
            let r: f64 = (0..4).map(|k| (hv[k] - col[k] * l).norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(r < 1e-12);
        }
        prop_assert!(v.unitarity_error() < 1e-12);
        prop_assert!(e.values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn random_unitary_phases_are_recovered(h in herm_strategy(), t in 0.1f64..3.0) {
        let u = expm_i(&h, t).unwrap();
        let ph = unitary_phases(&u).unwrap();
        let v = ph.vectors();
        for (i, &p) in ph.phases().iter().enumerate() {
            let col = v.column(i);
            let uv = u.apply(&col);
            let z = c(0.0, -p).exp();
            let r: f64 = (0..4).map(|k| (uv[k] - col[k] * z).norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(r < 1e-10);
            prop_assert!(p > -PI && p <= PI);
        }
        // Recovered phases match those of the generating Hamiltonian modulo 2π.
        let mut want: Vec<f64> = herm_eig(&h).unwrap().values().iter().map(|l| wrap_phase(l * t)).collect();
        want.sort_by(f64::total_cmp);
        for w in want {
            prop_assert!(ph.phases().iter().any(|p| wrap_phase(p - w).abs() < 1e-10));
        }
    }

    #[test]
    fn su2_round_trip(theta in 0.0f64..PI, az in 0.0f64..(2.0 * PI), pol in 0.0f64..PI, g in -PI..PI) {
        let axis = [pol.sin() * az.cos(), pol.sin() * az.sin(), pol.cos()];
        let aa = AxisAngle { angle: theta, axis, global_phase: g };
        let u = aa.to_matrix();
        let back = su2_axis_angle(&u).unwrap();
        prop_assert!(back.to_matrix().distance(&u) < 1e-12);
        prop_assert!((back.angle - theta).abs() < 1e-7);
        if theta > 1e-3 && theta < PI - 1e-3 {
            for k in 0..3 {
                prop_assert!((back.axis[k] - axis[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn partial_trace_of_products(a in density_strategy(), b in density_strategy()) {
        let ea = partial_trace(&a, Subsystem::Electron).unwrap();
        let nb = partial_trace(&b, Subsystem::Nuclear).unwrap();
        let prod = kron(&ea, &nb).unwrap();
        prop_assert!(partial_trace(&prod, Subsystem::Electron).unwrap().distance(&ea) < 1e-14);
        prop_assert!(partial_trace(&prod, Subsystem::Nuclear).unwrap().distance(&nb) < 1e-14);
        prop_assert!((partial_trace(&a, Subsystem::Nuclear).unwrap().trace().re - 1.0).abs() < 1e-14);
    }
}

#[test]
fn pauli_algebra() {
    let (x, y, z) = (pauli::x(), pauli::y(), pauli::z());
    assert!((x * y).distance(&z.scale(c(0.0, 1.0))) < 1e-15);
    assert!((x * x).distance(&pauli::id()) < 1e-15);
}

#[test]
fn degenerate_unitary_is_handled() {
    let u = -CMat::identity(4);
    let ph = unitary_phases(&u).unwrap();
    assert!(ph.phases().iter().all(|p| (p - PI).abs() < 1e-12));
    let sz = kron(&pauli::z(), &pauli::id()).unwrap();
    let u = expm_i(&sz, 0.3).unwrap();
    let ph = unitary_phases(&u).unwrap();
    let mut p = ph.phases().to_vec();
    p.sort_by(f64::total_cmp);
    assert!((p[0] + 0.3).abs() < 1e-12 && (p[1] + 0.3).abs() < 1e-12);
    assert!((p[2] - 0.3).abs() < 1e-12 && (p[3] - 0.3).abs() < 1e-12);
}

#[test]
fn wrap_phase_range() {
    assert_eq!(wrap_phase(PI), PI);
    assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
    assert!((wrap_phase(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(su2_axis_angle(&CMat::identity(4)).is_err());
    assert!(su2_axis_angle(&CMat::identity(2).scale_re(2.0)).is_err());
    assert!(partial_trace(&CMat::zeros(4), Subsystem::Nuclear).is_err());
    assert!(kron(&CMat::identity(4), &CMat::identity(2)).is_err());
}

#[test]
fn reunitarize_squares_the_unitarity_error() {
    let h = hermitian(&[0.3, -1.1, 0.7, 2.0, 0.4, -0.2, 1.3, 0.9, -0.6, 0.1, 0.5, -1.7, 0.8, 0.25, -0.35, 1.05]);
    let u = expm_i(&h, 0.8).unwrap();
    let mut drift = u;
    drift[(0, 1)] += c(1e-7, -2e-7);
    let before = drift.unitarity_error();
    let after = drift.reunitarize().unitarity_error();
    assert!(before > 1e-7);
    assert!(after < 4.0 * before * before, "{before} -> {after}");
    let d = u.reunitarize().distance(&u);
    assert!(d < 1e-14, "{d}");
}
