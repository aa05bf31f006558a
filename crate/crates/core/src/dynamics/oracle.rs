//! Reference propagation that shares no propagator code with the fast path:
//! Hamiltonians are written out entry by entry, exponentials come from a
//! scaled Taylor series, and the density matrix is stepped in increments of
//! at most `dt_max`.

use num_complex::Complex64 as C;

use super::DensityState;
use crate::kernel::CMat;
use crate::seqdsl::SegmentList;
use crate::spinsys::{Segment, SpinSystemParams};
use crate::{Error, Result};

type M4 = [[C; 4]; 4];

const Z: C = C::new(0.0, 0.0);
const TAYLOR_TERMS: usize = 24;

fn zero() -> M4 {
    [[Z; 4]; 4]
}

fn eye() -> M4 {
    let mut m = zero();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = C::new(1.0, 0.0);
    }
    m
}

fn mul(a: &M4, b: &M4) -> M4 {
    let mut out = zero();
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            for j in 0..4 {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

fn dagger(a: &M4) -> M4 {
    let mut out = zero();
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

fn norm1(a: &M4) -> f64 {
    (0..4)
        .map(|j| (0..4).map(|i| a[i][j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// exp(−i·H·t) by scaling and squaring a truncated Taylor series.
fn expm_taylor(h: &M4, t: f64) -> M4 {
    let mut a = zero();
    for i in 0..4 {
        for j in 0..4 {
            a[i][j] = h[i][j] * C::new(0.0, -t);
        }
    }
    let mut squarings = 0;
    let mut n = norm1(&a);
    while n > 0.25 {
        n *= 0.5;
        squarings += 1;
    }
    let scale = 0.5f64.powi(squarings);
    for row in a.iter_mut() {
        for x in row.iter_mut() {
            *x *= scale;
        }
    }
    let mut sum = eye();
    let mut term = eye();
    for k in 1..=TAYLOR_TERMS {
        term = mul(&term, &a);
        let inv = 1.0 / k as f64;
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x *= inv;
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = mul(&sum, &sum);
    }
    sum
}

/// Free Hamiltonian in the basis |u↑⟩, |u↓⟩, |d↑⟩, |d↓⟩ (rad/s).
fn free_h(wl: f64, a_perp: f64, a_par: f64, delta: f64) -> M4 {
    let mut h = zero();
    h[0][0] = C::new(0.5 * wl + 0.5 * a_par + delta, 0.0);
    h[1][1] = C::new(-0.5 * wl - 0.5 * a_par + delta, 0.0);
    h[2][2] = C::new(0.5 * wl, 0.0);
    h[3][3] = C::new(-0.5 * wl, 0.0);
    h[0][1] = C::new(0.5 * a_perp, 0.0);
    h[1][0] = C::new(0.5 * a_perp, 0.0);
    h
}

/// Ω·(cosφ·Sx + sinφ·Sy) added onto `h`.
fn add_drive(h: &mut M4, omega: f64, phi: f64) {
    let down = C::new(0.5 * omega * phi.cos(), -0.5 * omega * phi.sin());
    for (u, d) in [(0, 2), (1, 3)] {
        h[u][d] += down;
        h[d][u] += down.conj();
    }
}

fn to_m4(m: &CMat) -> M4 {
    let mut out = zero();
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = m[(i, j)];
        }
    }
    out
}

fn from_m4(m: &M4) -> CMat {
    let mut out = CMat::zeros(4);
    for i in 0..4 {
        for j in 0..4 {
            out[(i, j)] = m[i][j];
        }
    }
    out
}

/// Evolves `rho0` through `n_periods` periods, stepping every segment in
/// equal steps no longer than `dt_max`.
pub fn oracle_evolve(
    rho0: &DensityState,
    p: &SpinSystemParams,
    seg: &SegmentList,
    n_periods: u64,
    dt_max: f64,
) -> Result<DensityState> {
    if !(dt_max > 0.0) {
        return Err(Error::InvalidInput("dt_max must be positive".into()));
    }
    let r = p.resolve()?;
    let h0 = free_h(r.omega_l, r.a_perp, r.a_par, r.delta);

    // (step unitary, number of steps) per segment
    let mut steps: Vec<(M4, u64)> = Vec::with_capacity(seg.period.len());
    for s in &seg.period {
        match *s {
            Segment::Free { duration_s } => {
                if duration_s > 0.0 {
                    let n = (duration_s / dt_max).ceil().max(1.0) as u64;
                    steps.push((expm_taylor(&h0, duration_s / n as f64), n));
                }
            }
            Segment::Pulse {
                duration_s,
                angle_rad,
                phase_rad,
                rabi_rad_s,
            } => {
                if duration_s == 0.0 {
                    let mut g = zero();
                    add_drive(&mut g, 1.0, phase_rad);
                    steps.push((expm_taylor(&g, angle_rad), 1));
                } else {
                    let mut h = h0;
                    add_drive(&mut h, rabi_rad_s, phase_rad);
                    let n = (duration_s / dt_max).ceil().max(1.0) as u64;
                    steps.push((expm_taylor(&h, duration_s / n as f64), n));
                }
            }
        }
    }
    let steps: Vec<(M4, M4, u64)> = steps.into_iter().map(|(u, n)| (u, dagger(&u), n)).collect();

    let mut rho = to_m4(rho0.matrix());
    for _ in 0..n_periods {
        for (u, ud, n) in &steps {
            for _ in 0..*n {
                rho = mul(&mul(u, &rho), ud);
            }
        }
    }
    Ok(DensityState::new_unchecked(from_m4(&rho)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::expm_i;
    use crate::spinsys::{drive_hamiltonian, free_hamiltonian};

    #[test]
    fn hand_written_hamiltonians_agree_with_operator_algebra() {
        let p = SpinSystemParams::new(2.1e6).with_hyperfine(44e3, 12e3).with_detuning(0.7e6);
        let r = p.resolve().unwrap();
        let mut h = free_h(r.omega_l, r.a_perp, r.a_par, r.delta);
        assert!(from_m4(&h).distance(&free_hamiltonian(&r)) < 1e-6);
        add_drive(&mut h, 7.8e7, 0.3);
        let want = free_hamiltonian(&r) + drive_hamiltonian(7.8e7, 0.3);
        assert!(from_m4(&h).distance(&want) < 1e-6);
    }

    #[test]
    fn taylor_exponential_matches_eigen_route() {
        let p = SpinSystemParams::new(2.1e6).with_hyperfine(44e3, 12e3).with_detuning(0.7e6);
        let r = p.resolve().unwrap();
        let h = free_hamiltonian(&r);
        let t = 237e-9;
        let a = from_m4(&expm_taylor(&to_m4(&h), t));
        let b = expm_i(&h, t).unwrap();
        assert!(a.distance(&b) < 1e-13, "{}", a.distance(&b));
    }
}
