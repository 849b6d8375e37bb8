//! Local curvature, instability thresholds, Path Dependency Index and chains.

use serde::{Deserialize, Serialize};

use crate::lengthscale::LengthScaleRoots;
use crate::stats::median;

/// Lowest point category that counts as a local instability.
pub const UNSTABLE_CATEGORY: u8 = 5;

/// `|dH| / x^2`; zero for an unbounded length scale.
pub fn local_curvature(dh: f64, x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        dh.abs() / (x * x)
    }
}

/// Running mean of the length-scale magnitude per point and dimension,
/// carried from one frame pair to the next.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdHistory {
    pub count: Vec<Vec<u32>>,
    pub mean: Vec<Vec<f64>>,
}

/// Short- and long-term curvature thresholds, `None` where every root is
/// a sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub short: Vec<Vec<Option<f64>>>,
    pub long: Vec<Vec<Option<f64>>>,
}

/// Median `|x_d|` across the root branches of each point, `None` for sentinels.
pub fn root_magnitudes(roots: &LengthScaleRoots) -> Vec<Vec<Option<f64>>> {
    roots
        .points
        .iter()
        .map(|branches| {
            let dims = branches.first().map_or(0, |r| r.x.len());
            (0..dims)
                .map(|d| {
                    let mags: Vec<f64> = branches
                        .iter()
                        .filter(|r| r.is_finite(d))
                        .map(|r| r.x[d].abs())
                        .collect();
                    median(&mags)
                })
                .collect()
        })
        .collect()
}

/// `kappa_short = 1 / |x|` of this frame pair, `kappa_long = 1 / mean |x|`
/// over every frame pair so far including this one.
pub fn update_thresholds(roots: &LengthScaleRoots, history: &ThresholdHistory) -> (Thresholds, ThresholdHistory) {
    let mags = root_magnitudes(roots);
    let mut next = history.clone();
    if next.count.len() != mags.len() {
        next.count = mags.iter().map(|m| vec![0; m.len()]).collect();
        next.mean = mags.iter().map(|m| vec![0.0; m.len()]).collect();
    }
    let mut short = Vec::with_capacity(mags.len());
    let mut long = Vec::with_capacity(mags.len());
    for (a, point) in mags.iter().enumerate() {
        let mut s = Vec::with_capacity(point.len());
        let mut l = Vec::with_capacity(point.len());
        for (d, mag) in point.iter().enumerate() {
            match mag {
                Some(m) => {
                    let c = next.count[a][d] as f64;
                    let mean = (next.mean[a][d] * c + m) / (c + 1.0);
                    next.count[a][d] += 1;
                    next.mean[a][d] = mean;
                    s.push(Some(1.0 / m));
                    l.push(Some(1.0 / mean));
                }
                None => {
                    s.push(None);
                    l.push(None);
                }
            }
        }
        short.push(s);
        long.push(l);
    }
    (Thresholds { short, long }, next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdiRecord {
    pub category: u8,
    pub short_unstable: Vec<bool>,
    pub long_unstable: Vec<bool>,
    pub mode_mixity_controllable: bool,
    /// Short-only and long-only violations in different dimensions.
    pub mixed_short_long: bool,
}

impl PdiRecord {
    pub fn unstable_dimensions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.short_unstable.len()).filter(|&d| self.short_unstable[d] && self.long_unstable[d])
    }
}

/// Point-level category 1..=7.
///
/// `kappa` is the per-dimension classification curvature (median over
/// roots). Dimensions whose thresholds are undefined take no part. For
/// category 4 the curvature is recomputed from the distortional part of
/// `dh` (the dimension mean removed); if that alone is below both
/// thresholds in every doubly-unstable dimension, the instability is
/// carried by the dilatational mode and can be controlled.
pub fn classify_pdi(kappa: &[f64], short: &[Option<f64>], long: &[Option<f64>], dh: &[f64]) -> PdiRecord {
    let dims = kappa.len();
    let over = |k: f64, t: Option<f64>| t.is_some_and(|t| k / t > 1.0);
    let short_unstable: Vec<bool> = (0..dims).map(|d| over(kappa[d], short[d])).collect();
    let long_unstable: Vec<bool> = (0..dims).map(|d| over(kappa[d], long[d])).collect();
    let both: Vec<usize> = (0..dims).filter(|&d| short_unstable[d] && long_unstable[d]).collect();
    let any_short = short_unstable.iter().any(|b| *b);
    let any_long = long_unstable.iter().any(|b| *b);

    let mut record = PdiRecord {
        category: 1,
        short_unstable,
        long_unstable,
        mode_mixity_controllable: false,
        mixed_short_long: false,
    };
    if both.is_empty() {
        record.category = match (any_short, any_long) {
            (false, false) => 1,
            (true, false) => 2,
            (false, true) => 3,
            (true, true) => {
                record.mixed_short_long = true;
                2
            }
        };
        return record;
    }

    let dilatation = dh.iter().sum::<f64>() / dims as f64;
    let controllable = both.iter().all(|&d| {
        let dev = (dh[d] - dilatation).abs();
        let k = if dh[d] == 0.0 {
            0.0
        } else {
            kappa[d] * dev / dh[d].abs()
        };
        short[d].is_some_and(|t| k < t) && long[d].is_some_and(|t| k < t)
    });
    record.mode_mixity_controllable = controllable;
    record.category = if controllable {
        4
    } else {
        match both.len() {
            1 => 5,
            2 => 6,
            _ => 7,
        }
    };
    record
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    pub start: usize,
    pub length: usize,
    pub dimensions: Vec<usize>,
}

/// Maximal runs of consecutive points with category >= 5.
pub fn detect_chains(records: &[PdiRecord]) -> Vec<Chain> {
    let mut chains = Vec::new();
    let mut i = 0;
    while i < records.len() {
        if records[i].category < UNSTABLE_CATEGORY {
            i += 1;
            continue;
        }
        let start = i;
        let mut dims = Vec::new();
        while i < records.len() && records[i].category >= UNSTABLE_CATEGORY {
            dims.extend(records[i].unstable_dimensions());
            i += 1;
        }
        dims.sort_unstable();
        dims.dedup();
        chains.push(Chain {
            start,
            length: i - start,
            dimensions: dims,
        });
    }
    chains
}

/// Frame-level index: the worst point category, raised to 8 or 9 when a
/// chain outgrows the short- or long-term critical length.
pub fn frame_category(records: &[PdiRecord], chains: &[Chain], critical_short: f64, critical_long: f64) -> u8 {
    let worst = records.iter().map(|r| r.category).max().unwrap_or(1);
    let longest = chains.iter().map(|c| c.length).max().unwrap_or(0) as f64;
    if longest > critical_long {
        9
    } else if longest > critical_short {
        8
    } else {
        worst
    }
}
