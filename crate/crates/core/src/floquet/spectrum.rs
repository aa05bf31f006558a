use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rayon::prelude::*;

use super::period_propagator_resolved;
use crate::kernel::{unitary_phases, wrap_phase, CMat, UnitaryPhases, C64};
use crate::seqdsl::Sequence;
use crate::spinsys::{Resolved, SpinSystemParams};
use crate::{Error, Result};

/// Amplitude overlap above which a branch gets a product-state label.
pub const LABEL_OVERLAP: f64 = 0.99;
/// Minimum overlap between consecutive grid points within one branch.
pub const TRACKING_OVERLAP: f64 = 0.5;

const GOLDEN_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    XPlusUp,
    XPlusDown,
    XMinusUp,
    XMinusDown,
    Mixed,
}

impl Label {
    pub const PRODUCT: [Label; 4] = [
        Label::XPlusUp,
        Label::XPlusDown,
        Label::XMinusUp,
        Label::XMinusDown,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Label::XPlusUp => "X+up",
            Label::XPlusDown => "X+down",
            Label::XMinusUp => "X-up",
            Label::XMinusDown => "X-down",
            Label::Mixed => "mixed",
        }
    }

    /// The labelled product state |X±⟩|↑↓⟩; `None` for `Mixed`.
    pub fn state(self) -> Option<[C64; 4]> {
        let (sign, up) = match self {
            Label::XPlusUp => (1.0, true),
            Label::XPlusDown => (1.0, false),
            Label::XMinusUp => (-1.0, true),
            Label::XMinusDown => (-1.0, false),
            Label::Mixed => return None,
        };
        let a = C64::new(FRAC_1_SQRT_2, 0.0);
        let b = C64::new(sign * FRAC_1_SQRT_2, 0.0);
        let z = C64::new(0.0, 0.0);
        Some(if up { [a, z, b, z] } else { [z, a, z, b] })
    }
}

fn overlap(a: &[C64; 4], b: &[C64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm()
}

/// One branch at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    /// Principal eigenphase in (−π, π].
    pub phase_rad: f64,
    /// 2π winding count accumulated along the branch.
    pub winding: i64,
    pub vector: [C64; 4],
    pub label: Label,
}

impl BranchPoint {
    pub fn unwrapped(&self) -> f64 {
        self.phase_rad + 2.0 * PI * self.winding as f64
    }
}

/// Four tracked eigenphase branches over a τ grid. `points[i][b]` is branch
/// `b` at `tau_s[i]`; branch indices are fixed by phase order at the first
/// grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetSpectrum {
    pub tau_s: Vec<f64>,
    pub points: Vec<[BranchPoint; 4]>,
}

impl FloquetSpectrum {
    pub fn len(&self) -> usize {
        self.tau_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_s.is_empty()
    }

    pub fn branch(&self, b: usize) -> impl Iterator<Item = &BranchPoint> + '_ {
        self.points.iter().map(move |row| &row[b])
    }

    /// Gap between the pair's branches at grid point `i`, as in
    /// [`pair_gap_of`].
    pub fn pair_gap(&self, i: usize, pair: CrossingPair) -> f64 {
        let row = &self.points[i];
        gap_from(
            &std::array::from_fn(|b| row[b].phase_rad),
            &std::array::from_fn(|b| row[b].vector),
            pair,
        )
    }

    /// Index of the branch carrying `label` at grid point `i`.
    pub fn find(&self, i: usize, label: Label) -> Option<usize> {
        self.points[i].iter().position(|bp| bp.label == label)
    }
}

fn label_of(v: &[C64; 4]) -> Label {
    Label::PRODUCT
        .into_iter()
        .find(|l| overlap(&l.state().expect("product label"), v) > LABEL_OVERLAP)
        .unwrap_or(Label::Mixed)
}

fn phases_on_grid(r: &Resolved, seq: &Sequence, tau_grid: &[f64]) -> Result<Vec<UnitaryPhases>> {
    tau_grid
        .par_iter()
        .map(|&tau| {
            let seg = seq.compile_at(tau, r)?;
            let u = period_propagator_resolved(r, &seg)?;
            Ok(unitary_phases(&u)?)
        })
        .collect()
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    if (0..4).all(|i| (i + 1..4).all(|j| p[i] != p[j])) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

fn track(tau_grid: &[f64], raw: Vec<UnitaryPhases>) -> Result<FloquetSpectrum> {
    let perms = permutations4();
    let mut points: Vec<[BranchPoint; 4]> = Vec::with_capacity(raw.len());
    for (i, up) in raw.iter().enumerate() {
        let vecs: Vec<[C64; 4]> = (0..4).map(|k| up.vector(k)).collect();
        let make = |k: usize, winding: i64| BranchPoint {
            phase_rad: up.phases()[k],
            winding,
            vector: vecs[k],
            label: label_of(&vecs[k]),
        };
        let Some(prev) = points.last() else {
            points.push(std::array::from_fn(|k| make(k, 0)));
            continue;
        };
        let ov: Vec<[f64; 4]> = prev
            .iter()
            .map(|bp| std::array::from_fn(|k| overlap(&bp.vector, &vecs[k])))
            .collect();
        let best = perms
            .iter()
            .max_by(|p, q| {
                let s = |p: &[usize; 4]| (0..4).map(|b| ov[b][p[b]].powi(2)).sum::<f64>();
                s(p).total_cmp(&s(q))
            })
            .expect("24 permutations");
        let worst = (0..4).map(|b| ov[b][best[b]]).fold(f64::INFINITY, f64::min);
        if worst <= TRACKING_OVERLAP {
            return Err(Error::BranchTrackingLost {
                from_tau_s: tau_grid[i - 1],
                to_tau_s: tau_grid[i],
                overlap: worst,
            });
        }
        let row = std::array::from_fn(|b| {
            let k = best[b];
            let prev_unwrapped = prev[b].unwrapped();
            let winding = ((prev_unwrapped - up.phases()[k]) / (2.0 * PI)).round() as i64;
            make(k, winding)
        });
        points.push(row);
    }
    Ok(FloquetSpectrum {
        tau_s: tau_grid.to_vec(),
        points,
    })
}

/// Spectrum of the A = 0 period propagator.
pub fn unperturbed_spectrum(
    p: &SpinSystemParams,
    seq: &Sequence,
    tau_grid: &[f64],
) -> Result<FloquetSpectrum> {
    full_spectrum(&p.clone().uncoupled(), seq, tau_grid)
}

/// Spectrum of the full period propagator, branch-tracked by eigenvector
/// continuity. A grid too coarse to follow the branches through an avoided
/// crossing yields `BranchTrackingLost`.
pub fn full_spectrum(
    p: &SpinSystemParams,
    seq: &Sequence,
    tau_grid: &[f64],
) -> Result<FloquetSpectrum> {
    if tau_grid.is_empty() {
        return Err(Error::InvalidInput("empty tau grid".into()));
    }
    let r = p.resolve()?;
    let raw = phases_on_grid(&r, seq, tau_grid)?;
    track(tau_grid, raw)
}

/// Pairs of product states whose branches cross near the dips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CrossingPair {
    /// X+↑ with X−↓, coupled by the hyperfine interaction.
    UpFlip,
    /// X+↓ with X−↑, coupled by the hyperfine interaction.
    DownFlip,
    /// X+↑ with X+↓, uncoupled by symmetry.
    SamePlus,
    /// X−↑ with X−↓, uncoupled by symmetry.
    SameMinus,
}

impl CrossingPair {
    pub const ALL: [CrossingPair; 4] = [
        CrossingPair::UpFlip,
        CrossingPair::DownFlip,
        CrossingPair::SamePlus,
        CrossingPair::SameMinus,
    ];

    pub fn labels(self) -> [Label; 2] {
        match self {
            CrossingPair::UpFlip => [Label::XPlusUp, Label::XMinusDown],
            CrossingPair::DownFlip => [Label::XPlusDown, Label::XMinusUp],
            CrossingPair::SamePlus => [Label::XPlusUp, Label::XPlusDown],
            CrossingPair::SameMinus => [Label::XMinusUp, Label::XMinusDown],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CrossingPair::UpFlip => "up_flip",
            CrossingPair::DownFlip => "down_flip",
            CrossingPair::SamePlus => "same_plus",
            CrossingPair::SameMinus => "same_minus",
        }
    }
}

/// Phase distance between the two eigenvectors of `u` that lie most in the
/// span of the pair's product states.
pub fn pair_gap_of(u: &CMat, pair: CrossingPair) -> Result<f64> {
    let up = unitary_phases(u)?;
    let vecs: [[C64; 4]; 4] = std::array::from_fn(|k| up.vector(k));
    let phases: [f64; 4] = std::array::from_fn(|k| up.phases()[k]);
    Ok(gap_from(&phases, &vecs, pair))
}

fn gap_from(phases: &[f64; 4], vecs: &[[C64; 4]; 4], pair: CrossingPair) -> f64 {
    let states = pair.labels().map(|l| l.state().expect("product label"));
    let mut weights: Vec<(f64, usize)> = (0..4)
        .map(|k| {
            let w = states.iter().map(|s| overlap(s, &vecs[k]).powi(2)).sum::<f64>();
            (w, k)
        })
        .collect();
    weights.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (a, b) = (weights[0].1, weights[1].1);
    wrap_phase(phases[a] - phases[b]).abs()
}

pub fn pair_gap(p: &SpinSystemParams, seq: &Sequence, tau_s: f64, pair: CrossingPair) -> Result<f64> {
    let r = p.resolve()?;
    gap_resolved(&r, seq, tau_s, pair)
}

fn gap_resolved(r: &Resolved, seq: &Sequence, tau_s: f64, pair: CrossingPair) -> Result<f64> {
    let seg = seq.compile_at(tau_s, r)?;
    pair_gap_of(&period_propagator_resolved(r, &seg)?, pair)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub tau_s: f64,
    pub gap_rad: f64,
}

/// Minimum of the pair gap on [lo, hi]: a coarse scan of `coarse_points`
/// followed by golden-section refinement around the best point.
pub fn locate_crossing(
    p: &SpinSystemParams,
    seq: &Sequence,
    pair: CrossingPair,
    lo: f64,
    hi: f64,
    coarse_points: usize,
) -> Result<Crossing> {
    if !(lo < hi) || coarse_points < 3 {
        return Err(Error::InvalidInput(
            "crossing search needs lo < hi and at least 3 points".into(),
        ));
    }
    let r = p.resolve()?;
    let step = (hi - lo) / (coarse_points - 1) as f64;
    let grid: Vec<f64> = (0..coarse_points).map(|i| lo + step * i as f64).collect();
    let gaps: Vec<f64> = grid
        .par_iter()
        .map(|&t| gap_resolved(&r, seq, t, pair))
        .collect::<Result<_>>()?;
    let best = (0..gaps.len())
        .min_by(|&a, &b| gaps[a].total_cmp(&gaps[b]))
        .expect("non-empty grid");
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(coarse_points - 1)];

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |t: f64| gap_resolved(&r, seq, t, pair);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..GOLDEN_ITER {
        if b - a <= 4.0 * f64::EPSILON * b.abs() {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let (tau_s, gap_rad) = if fc < fd { (c, fc) } else { (d, fd) };
    let (tau_s, gap_rad) = if gaps[best] < gap_rad {
        (grid[best], gaps[best])
    } else {
        (tau_s, gap_rad)
    };
    Ok(Crossing { tau_s, gap_rad })
}
