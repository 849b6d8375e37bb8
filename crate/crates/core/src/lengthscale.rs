//! Dimensionless length-scale roots.
//!
//! Per point and dimension the diagonal balance `R = x^2 dH` fixes the
//! magnitude of the length scale `x`; density, modulus and time step are
//! absorbed into `x`. Each of the `2^D` sign branches is then refined
//! against the symmetrized cross-dimension balance. A branch that fails to
//! converge keeps its diagonal magnitudes.

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;

/// Below this `|dH|` the Borda count did not move and the length scale is
/// unbounded.
pub const SENTINEL_DH: f64 = 1e-12;
const DAMPING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    ClosedForm,
    Refined,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalRoot {
    /// `sqrt(|R / dH|)`, or `None` for the infinite sentinel.
    pub magnitude: Option<f64>,
    pub negative_ratio: bool,
}

pub fn diagonal_root(rank: f64, dh: f64) -> DiagonalRoot {
    if dh.abs() < SENTINEL_DH {
        return DiagonalRoot {
            magnitude: None,
            negative_ratio: false,
        };
    }
    let ratio = rank / dh;
    DiagonalRoot {
        magnitude: Some(ratio.abs().sqrt()),
        negative_ratio: ratio < 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ComponentFlags {
    pub infinite_sentinel: bool,
    pub negative_ratio: bool,
}

/// One sign branch: signed length scale per dimension. Sentinel components
/// hold a signed infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct RootVector {
    pub x: Vec<f64>,
    pub flags: Vec<ComponentFlags>,
    pub convergence: Convergence,
}

impl RootVector {
    pub fn is_finite(&self, d: usize) -> bool {
        !self.flags[d].infinite_sentinel
    }
}

/// Sign of dimension `d` in branch `k`: bit `d` set means negative.
fn branch_sign(k: usize, d: usize) -> f64 {
    if (k >> d) & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// All `2^D` root vectors of one point.
pub fn enumerate_roots(ranks: &[f64], dh: &[f64], config: &PipelineConfig) -> Vec<RootVector> {
    let dims = ranks.len();
    let diag: Vec<DiagonalRoot> = ranks.iter().zip(dh).map(|(r, h)| diagonal_root(*r, *h)).collect();
    let flags: Vec<ComponentFlags> = diag
        .iter()
        .map(|g| ComponentFlags {
            infinite_sentinel: g.magnitude.is_none(),
            negative_ratio: g.negative_ratio,
        })
        .collect();
    let finite: Vec<usize> = (0..dims).filter(|&d| diag[d].magnitude.is_some()).collect();

    (0..1usize << dims)
        .map(|k| {
            let sign: Vec<f64> = (0..dims).map(|d| branch_sign(k, d)).collect();
            let closed: Vec<f64> = (0..dims)
                .map(|d| sign[d] * diag[d].magnitude.unwrap_or(f64::INFINITY))
                .collect();
            let (x, convergence) = if finite.len() < 2 {
                (closed, Convergence::ClosedForm)
            } else {
                match refine(&closed, &sign, ranks, dh, &finite, config) {
                    Some(x) => (x, Convergence::Refined),
                    None => (closed, Convergence::Fallback),
                }
            };
            RootVector {
                x,
                flags: flags.clone(),
                convergence,
            }
        })
        .collect()
}

/// Damped fixed point of `x_d = 4 R_d / (S_d * g_d)` over the finite
/// dimensions, where `g_d` is the geometric mean of the other dimensions'
/// `|x|` and `S_d = 2 dH_d + 2 mean_e(s_d s_e dH_e)` sums the four index
/// slots with the partner slots oriented by the branch signs. Signs are
/// held fixed; only magnitudes move.
fn refine(
    start: &[f64],
    sign: &[f64],
    ranks: &[f64],
    dh: &[f64],
    finite: &[usize],
    config: &PipelineConfig,
) -> Option<Vec<f64>> {
    let mut x = start.to_vec();
    let partners = (finite.len() - 1) as f64;
    let slot_sum: Vec<f64> = finite
        .iter()
        .map(|&d| {
            let cross: f64 = finite
                .iter()
                .filter(|&&e| e != d)
                .map(|&e| sign[d] * sign[e] * dh[e])
                .sum::<f64>()
                / partners;
            2.0 * dh[d] + 2.0 * cross
        })
        .collect();
    if slot_sum.iter().any(|s| *s == 0.0 || !s.is_finite()) {
        return None;
    }

    let mut next = x.clone();
    for _ in 0..config.refinement_max_iter {
        let log_sum: f64 = finite.iter().map(|&e| x[e].abs().ln()).sum();
        let mut worst = 0.0f64;
        for (i, &d) in finite.iter().enumerate() {
            let partner = ((log_sum - x[d].abs().ln()) / partners).exp();
            let target = (4.0 * ranks[d] / (slot_sum[i] * partner)).abs();
            let mag = (1.0 - DAMPING) * x[d].abs() + DAMPING * target;
            if !mag.is_finite() || mag == 0.0 {
                return None;
            }
            worst = worst.max((mag - x[d].abs()).abs() / x[d].abs());
            next[d] = sign[d] * mag;
        }
        std::mem::swap(&mut x, &mut next);
        if worst < config.refinement_tol {
            return Some(x);
        }
    }
    None
}

/// Roots of every point of a frame: `points[A][k]` is branch `k` of point `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthScaleRoots {
    pub points: Vec<Vec<RootVector>>,
}

impl LengthScaleRoots {
    pub fn solve(ranks: &[Vec<f64>], dh: &[Vec<f64>], config: &PipelineConfig) -> Self {
        let dims = ranks.len();
        let n = ranks.first().map_or(0, Vec::len);
        let points = (0..n)
            .map(|a| {
                let r: Vec<f64> = (0..dims).map(|d| ranks[d][a]).collect();
                let h: Vec<f64> = (0..dims).map(|d| dh[d][a]).collect();
                enumerate_roots(&r, &h, config)
            })
            .collect();
        Self { points }
    }

    pub fn fallback_fraction(&self) -> f64 {
        let total: usize = self.points.iter().map(Vec::len).sum();
        if total == 0 {
            return 0.0;
        }
        let fallback = self
            .points
            .iter()
            .flatten()
            .filter(|r| r.convergence == Convergence::Fallback)
            .count();
        fallback as f64 / total as f64
    }
}
