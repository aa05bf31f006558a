use super::cmat::{CMat, C64, ZERO};
use super::KernelError;

const HERMITIAN_TOL: f64 = 1e-10;
const OFFDIAG_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a Hermitian matrix.
///
/// `values` are ascending; column `i` of `vectors` is the eigenvector for
/// `values[i]`, normalized, with its largest-modulus component real and
/// positive.
#[derive(Clone, Copy, Debug)]
pub struct HermEig {
    values: [f64; 4],
    vectors: CMat,
}

impl HermEig {
    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values[..self.dim()]
    }

    pub fn vectors(&self) -> &CMat {
        &self.vectors
    }

    /// V·f(Λ)·V†
    pub fn map_values(&self, f: impl Fn(f64) -> C64) -> CMat {
        let n = self.dim();
        let mut out = CMat::zeros(n);
        let fv: Vec<C64> = self.values().iter().map(|&l| f(l)).collect();
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for (k, &w) in fv.iter().enumerate() {
                    acc += self.vectors[(i, k)] * w * self.vectors[(j, k)].conj();
                }
                out[(i, j)] = acc;
            }
        }
        out
    }
}

/// Makes the largest-modulus component of `v` real and positive. The first
/// such component wins ties (within a relative 1e-12).
pub(crate) fn fix_phase(v: &mut [C64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-12))
        .unwrap_or(0);
    let phase = v[pivot].conj() / v[pivot].norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[pivot] = C64::new(v[pivot].re, 0.0);
}

/// Cyclic complex Jacobi diagonalization of a Hermitian matrix.
pub fn herm_eig(h: &CMat) -> Result<HermEig, KernelError> {
    let norm = h.frobenius_norm();
    let herr = h.hermiticity_error();
    if herr > HERMITIAN_TOL * norm {
        return Err(KernelError::NotHermitian(herr));
    }
    let n = h.dim();
    // Symmetrize so that round-off in the input cannot bias the rotations.
    let mut a = (*h + h.adjoint()).scale_re(0.5);
    let mut v = CMat::identity(n);

    let off = |a: &CMat| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let target = OFFDIAG_TOL * norm;
    let mut sweeps = 0;
    while off(&a) > target {
        if sweeps == MAX_SWEEPS {
            return Err(KernelError::Diverged("Jacobi sweeps exhausted"));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));

    let mut values = [0.0; 4];
    let mut vectors = CMat::zeros(n);
    for (slot, &k) in order.iter().enumerate() {
        values[slot] = a[(k, k)].re;
        let mut col = v.column(k);
        fix_phase(&mut col[..n]);
        vectors.set_column(slot, &col[..n]);
    }
    Ok(HermEig { values, vectors })
}

/// One Jacobi rotation annihilating `a[p][q]`.
fn rotate(a: &mut CMat, v: &mut CMat, p: usize, q: usize) {
    let apq = a[(p, q)];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // Skip rotations that cannot change the diagonal at working precision.
    if g < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = ZERO;
        a[(q, p)] = ZERO;
        return;
    }
    let e = apq / g;
    let zeta = (aqq - app) / (2.0 * g);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + (zeta * zeta + 1.0).sqrt())
    } else {
        -1.0 / (-zeta + (zeta * zeta + 1.0).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let ec = e.conj();
    let n = a.dim();

    // A ← A·G, columns p and q.
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * s * ec;
        a[(k, q)] = akp * s + akq * c * ec;
    }
    // A ← G†·A, rows p and q.
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * s * e;
        a[(q, k)] = apk * s + aqk * c * e;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

    // V ← V·G
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * s * ec;
        v[(k, q)] = vkp * s + vkq * c * ec;
    }
}

/// exp(−i·H·t) for Hermitian `h`.
pub fn expm_i(h: &CMat, t: f64) -> Result<CMat, KernelError> {
    if t == 0.0 {
        let herr = h.hermiticity_error();
        if herr > HERMITIAN_TOL * h.frobenius_norm() {
            return Err(KernelError::NotHermitian(herr));
        }
        return Ok(CMat::identity(h.dim()));
    }
    let eig = herm_eig(h)?;
    Ok(expm_i_eig(&eig, t))
}

/// exp(−i·H·t) from a precomputed decomposition of H.
pub fn expm_i_eig(eig: &HermEig, t: f64) -> CMat {
    if t == 0.0 {
        return CMat::identity(eig.dim());
    }
    eig.map_values(|l| {
        let phi = -l * t;
        C64::new(phi.cos(), phi.sin())
    })
}
