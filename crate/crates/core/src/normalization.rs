//! Pairwise normalized margins and the datum that sets their origin.
//!
//! For two points `A`, `B` of one dimension the margin is
//! `a = (uA - uB) / (uA + uB + 2 m)`. Each pair has its own constant `m`
//! making `da/duA = 1`; writing `s = uA + uB + 2 m` that condition reads
//! `s^2 - s + (uA - uB) = 0`. The datum used for every pair is the
//! least-squares constant through all admissible pair constants, i.e. their
//! mean.

use serde::{Deserialize, Serialize};

use crate::error::{DdpError, Result};
use crate::ingest::DataBurst;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairConstantError {
    /// `1 - 4 (uA - uB) < 0`.
    NoRealRoot,
    /// Both roots put the denominator within epsilon of zero.
    Degenerate,
}

/// Gradient-matching constant for one ordered pair.
///
/// Of the two roots, those with `|s| > epsilon` are admissible; the one with
/// the smaller `|m|` wins, ties going to the positive root.
pub fn pair_constant(ua: f64, ub: f64, epsilon: f64) -> Result<f64, PairConstantError> {
    let disc = 1.0 - 4.0 * (ua - ub);
    if disc < 0.0 {
        return Err(PairConstantError::NoRealRoot);
    }
    let root = disc.sqrt();
    let sum = ua + ub;
    let mut best: Option<f64> = None;
    for s in [(1.0 + root) / 2.0, (1.0 - root) / 2.0] {
        if s.abs() <= epsilon {
            continue;
        }
        let m = (s - sum) / 2.0;
        best = Some(match best {
            None => m,
            Some(b) if m.abs() < b.abs() || (m.abs() == b.abs() && m > b) => m,
            Some(b) => b,
        });
    }
    best.ok_or(PairConstantError::Degenerate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatumFit {
    pub datum: f64,
    /// Pairs `(A, B)`, `A < B`, with no admissible constant.
    pub excluded: Vec<(usize, usize)>,
    /// RMS deviation of the pair constants about the datum.
    pub residual: f64,
    pub admissible: usize,
}

impl DatumFit {
    pub fn excluded_fraction(&self) -> f64 {
        let total = self.excluded.len() + self.admissible;
        if total == 0 {
            0.0
        } else {
            self.excluded.len() as f64 / total as f64
        }
    }
}

/// Least-squares datum over all pairs `A < B` of one dimension's values.
pub fn fit_datum_values(values: &[f64], dimension: usize, epsilon: f64) -> Result<DatumFit> {
    let mut constants = Vec::with_capacity(values.len() * values.len().saturating_sub(1) / 2);
    let mut excluded = Vec::new();
    for a in 0..values.len() {
        for b in a + 1..values.len() {
            match pair_constant(values[a], values[b], epsilon) {
                Ok(m) => constants.push(m),
                Err(_) => excluded.push((a, b)),
            }
        }
    }
    if constants.is_empty() {
        return Err(DdpError::DatumUnfittable { dimension });
    }
    let n = constants.len() as f64;
    let datum = constants.iter().sum::<f64>() / n;
    let residual = (constants.iter().map(|m| (m - datum).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DatumFit {
        datum,
        excluded,
        residual,
        admissible: constants.len(),
    })
}

pub fn fit_datum(burst: &DataBurst, dimension: usize, epsilon: f64) -> Result<DatumFit> {
    fit_datum_values(&burst.column(dimension), dimension, epsilon)
}

/// Normalized margins of every dimension of one burst.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedField {
    points: usize,
    /// Row-major `points x points` matrix per dimension.
    margins: Vec<Vec<f64>>,
    /// `None` where the datum could not be fitted; margins are zero there.
    pub datum: Vec<Option<f64>>,
    pub datum_residual: Vec<Option<f64>>,
    /// Fraction of pairs excluded from each dimension's datum fit.
    pub datum_excluded_fraction: Vec<f64>,
    /// Ordered pairs whose denominator vanished, per dimension.
    pub degenerate_pairs: Vec<Vec<(usize, usize)>>,
}

impl NormalizedField {
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dims(&self) -> usize {
        self.margins.len()
    }

    pub fn margin(&self, d: usize, a: usize, b: usize) -> f64 {
        self.margins[d][a * self.points + b]
    }

    /// Row `a` of dimension `d`: margins of `a` against every point.
    pub fn row(&self, d: usize, a: usize) -> &[f64] {
        &self.margins[d][a * self.points..(a + 1) * self.points]
    }

    pub fn is_fitted(&self, d: usize) -> bool {
        self.datum[d].is_some()
    }
}

/// Fill the margin matrices given a datum per dimension.
pub fn normalize_pairs(burst: &DataBurst, datum: &[Option<f64>], epsilon: f64) -> NormalizedField {
    let n = burst.len();
    let dims = burst.dims();
    let mut margins = Vec::with_capacity(dims);
    let mut degenerate_pairs = Vec::with_capacity(dims);
    for (d, fitted) in datum.iter().enumerate().take(dims) {
        let u = burst.column(d);
        let mut m = vec![0.0; n * n];
        let mut degenerate = Vec::new();
        if let Some(mbar) = *fitted {
            for a in 0..n {
                for b in a + 1..n {
                    let denom = u[a] + u[b] + 2.0 * mbar;
                    if denom.abs() <= epsilon {
                        degenerate.push((a, b));
                        degenerate.push((b, a));
                        continue;
                    }
                    let v = (u[a] - u[b]) / denom;
                    m[a * n + b] = v;
                    m[b * n + a] = -v;
                }
            }
        }
        margins.push(m);
        degenerate_pairs.push(degenerate);
    }
    NormalizedField {
        points: n,
        margins,
        datum: datum.to_vec(),
        datum_residual: vec![None; dims],
        datum_excluded_fraction: vec![0.0; dims],
        degenerate_pairs,
    }
}

/// Fit the datum of every dimension and build the normalized field.
///
/// A dimension with no admissible pair is left unfitted (zero margins)
/// rather than failing the whole burst.
pub fn normalize_burst(burst: &DataBurst, epsilon: f64) -> NormalizedField {
    let dims = burst.dims();
    let fits: Vec<Option<DatumFit>> = (0..dims).map(|d| fit_datum(burst, d, epsilon).ok()).collect();
    let datum: Vec<Option<f64>> = fits.iter().map(|f| f.as_ref().map(|f| f.datum)).collect();
    let mut field = normalize_pairs(burst, &datum, epsilon);
    for (d, fit) in fits.iter().enumerate() {
        field.datum_residual[d] = fit.as_ref().map(|f| f.residual);
        field.datum_excluded_fraction[d] = fit.as_ref().map_or(1.0, DatumFit::excluded_fraction);
    }
    field
}
