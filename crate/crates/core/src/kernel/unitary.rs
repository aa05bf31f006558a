use std::f64::consts::PI;

use super::cmat::{CMat, C64};
use super::eig::{fix_phase, herm_eig};
use super::KernelError;

const UNITARY_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-10;
/// Pencil mixing weights: golden-ratio conjugate first, then 1 − √2.
const PENCIL_MU: [f64; 2] = [0.618_033_988_7, -0.414_213_562_4];
/// Pencil eigenvalues closer than this are treated as one cluster and
/// re-split with the anti-Hermitian part.
const CLUSTER_TOL: f64 = 1e-5;

/// Eigenphases of a unitary: `U·v_i = exp(−i·phases_i)·v_i`, phases in
/// (−π, π] and ascending.
#[derive(Clone, Copy, Debug)]
pub struct UnitaryPhases {
    phases: [f64; 4],
    vectors: CMat,
}

impl UnitaryPhases {
    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases[..self.dim()]
    }

    pub fn vectors(&self) -> &CMat {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> [C64; 4] {
        self.vectors.column(i)
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let mut x = phi.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

/// Diagonalizes a unitary through the Hermitian pencil
/// C(μ) = (U+U†)/2 + μ·(U−U†)/(2i).
///
/// Both Hermitian parts commute with U, so every eigenvector of U is an
/// eigenvector of C(μ). Distinct eigenphases can collide in C(μ); such
/// clusters are split by diagonalizing (U−U†)/(2i) on the cluster subspace.
/// Each vector is then checked against U directly.
pub fn unitary_phases(u: &CMat) -> Result<UnitaryPhases, KernelError> {
    let uerr = u.unitarity_error();
    if uerr > UNITARY_TOL {
        return Err(KernelError::NotUnitary(uerr));
    }
    let n = u.dim();
    let ud = u.adjoint();
    let re_part = (*u + ud).scale_re(0.5);
    let im_part = (*u - ud).scale(C64::new(0.0, -0.5));

    for &mu in &PENCIL_MU {
        let pencil = re_part + im_part.scale_re(mu);
        let eig = herm_eig(&pencil)?;
        let mut vecs = *eig.vectors();
        let values = eig.values();

        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && values[end] - values[end - 1] < CLUSTER_TOL {
                end += 1;
            }
            if end - start > 1 {
                split_cluster(&mut vecs, start, end, &im_part)?;
            }
            start = end;
        }

        if let Some(result) = accept(u, &vecs) {
            return Ok(result);
        }
    }
    Err(KernelError::Diverged("unitary eigenvectors failed residual check"))
}

/// Replaces columns `start..end` of `vecs` with eigenvectors of `s`
/// restricted to their span.
fn split_cluster(
    vecs: &mut CMat,
    start: usize,
    end: usize,
    s: &CMat,
) -> Result<(), KernelError> {
    let n = vecs.dim();
    let mut proj = CMat::zeros(n);
    for k in start..end {
        let col = vecs.column(k);
        proj = proj + CMat::outer(&col[..n], &col[..n])?;
    }
    // Eigenvalues of (U−U†)/(2i) lie in [−1, 1]; the complement is pushed to 4.
    let complement = CMat::identity(n) - proj;
    let restricted = proj * *s * proj + complement.scale_re(4.0);
    let eig = herm_eig(&restricted)?;
    for (slot, k) in (start..end).enumerate() {
        let col = eig.vectors().column(slot);
        vecs.set_column(k, &col[..n]);
    }
    Ok(())
}

fn accept(u: &CMat, vecs: &CMat) -> Option<UnitaryPhases> {
    let n = u.dim();
    let mut pairs: Vec<(f64, [C64; 4])> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v = vecs.column(k);
        let norm = v[..n].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v[..n].iter_mut() {
            *z /= norm;
        }
        let uv = u.apply(&v[..n]);
        let lambda: C64 = (0..n).map(|i| v[i].conj() * uv[i]).sum();
        let resid = (0..n)
            .map(|i| (uv[i] - lambda * v[i]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if resid > RESIDUAL_TOL {
            return None;
        }
        fix_phase(&mut v[..n]);
        pairs.push((wrap_phase(-lambda.arg()), v));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut phases = [0.0; 4];
    let mut vectors = CMat::zeros(n);
    for (k, (phi, v)) in pairs.iter().enumerate() {
        phases[k] = *phi;
        vectors.set_column(k, &v[..n]);
    }
    Some(UnitaryPhases { phases, vectors })
}

/// Decomposition U = exp(−i·global_phase)·exp(−i·(angle/2)·(axis·σ⃗)).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisAngle {
    pub angle: f64,
    pub axis: [f64; 3],
    pub global_phase: f64,
}

impl AxisAngle {
    pub fn to_matrix(&self) -> CMat {
        let half = 0.5 * self.angle;
        let (s, c) = half.sin_cos();
        let [nx, ny, nz] = self.axis;
        let mut r = CMat::zeros(2);
        r[(0, 0)] = C64::new(c, -s * nz);
        r[(0, 1)] = C64::new(-s * ny, -s * nx);
        r[(1, 0)] = C64::new(s * ny, -s * nx);
        r[(1, 1)] = C64::new(c, s * nz);
        let g = -self.global_phase;
        r.scale(C64::new(g.cos(), g.sin()))
    }
}

/// Axis–angle form of a 2×2 unitary with `angle ∈ [0, π]`.
///
/// For a vanishing rotation the axis is reported as (1, 0, 0).
pub fn su2_axis_angle(u: &CMat) -> Result<AxisAngle, KernelError> {
    if u.dim() != 2 {
        return Err(KernelError::BadDimension(u.dim()));
    }
    let uerr = u.unitarity_error();
    if uerr > UNITARY_TOL {
        return Err(KernelError::NotUnitary(uerr));
    }
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let mut gamma = -0.5 * det.arg();
    let mut r = u.scale(C64::new(0.0, gamma).exp());
    if (r[(0, 0)] + r[(1, 1)]).re < 0.0 {
        r = -r;
        gamma += PI;
    }
    let c = 0.5 * (r[(0, 0)] + r[(1, 1)]).re;
    let sx = -0.5 * (r[(0, 1)] + r[(1, 0)]).im;
    let sy = 0.5 * (r[(1, 0)] - r[(0, 1)]).re;
    let sz = -0.5 * (r[(0, 0)] - r[(1, 1)]).im;
    let s = (sx * sx + sy * sy + sz * sz).sqrt();
    let angle = 2.0 * s.atan2(c);
    let axis = if s < 1e-14 {
        [1.0, 0.0, 0.0]
    } else {
        [sx / s, sy / s, sz / s]
    };
    Ok(AxisAngle {
        angle,
        axis,
        global_phase: wrap_phase(gamma),
    })
}
