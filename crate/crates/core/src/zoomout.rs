//! Zoom-out: repeated coarsening of a frame pair, residual curvature,
//! critical chain lengths and the Global Transition Indicator.

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::curvature::{classify_pdi, local_curvature, update_thresholds, PdiRecord, ThresholdHistory, Thresholds};
use crate::error::{DdpError, Result};
use crate::ingest::{DataBurst, Sample};
use crate::lengthscale::LengthScaleRoots;
use crate::normalization::normalize_burst;
use crate::ranking::{borda_state, delta_borda, BordaState, DeltaBorda};
use crate::report::{boxplot_stats, BoxplotStats};
use crate::stats::median;

/// Replace each run of `factor` consecutive samples by its mean.
pub fn aggregate(burst: &DataBurst, factor: usize) -> Result<DataBurst> {
    if factor == 0 || !burst.len().is_multiple_of(factor) {
        return Err(DdpError::ShapeMismatch(format!(
            "{} points are not divisible by aggregation factor {factor}",
            burst.len()
        )));
    }
    let dims = burst.dims();
    let samples = burst
        .samples
        .chunks(factor)
        .enumerate()
        .map(|(i, group)| {
            let values = (0..dims)
                .map(|d| group.iter().map(|s| s.values[d]).sum::<f64>() / factor as f64)
                .collect();
            Sample {
                values,
                time_index: i as u64,
            }
        })
        .collect();
    Ok(DataBurst {
        samples,
        dt: burst.dt * factor as f64,
        ..burst.clone()
    })
}

/// Full state of one aggregation level of one frame pair.
#[derive(Debug, Clone)]
pub struct LevelAnalysis {
    pub points: usize,
    /// Finest points per unit at this level (1, factor, factor^2, ...).
    pub scale: f64,
    pub datum: Vec<Option<f64>>,
    pub datum_residual: Vec<Option<f64>>,
    pub datum_excluded_fraction: Vec<f64>,
    pub borda: BordaState,
    pub delta: DeltaBorda,
    pub roots: LengthScaleRoots,
    /// `kappa[A][d][k]`: point, dimension, root branch.
    pub kappa: Vec<Vec<Vec<f64>>>,
    /// Median over branches, the classification statistic.
    pub kappa_median: Vec<Vec<f64>>,
    pub thresholds: Thresholds,
    pub pdi: Vec<PdiRecord>,
    /// Dimensions whose datum could not be fitted in either frame.
    pub partial: Vec<bool>,
}

/// Run normalization, ranking, length scales and curvature on one level.
pub fn analyze_level(
    previous: &DataBurst,
    current: &DataBurst,
    scale: f64,
    history: &ThresholdHistory,
    config: &PipelineConfig,
) -> Result<(LevelAnalysis, ThresholdHistory)> {
    if previous.len() != current.len() || previous.dims() != current.dims() {
        return Err(DdpError::ShapeMismatch("frames of a pair differ in shape".into()));
    }
    let eps = config.epsilon_denominator;
    let prev_field = normalize_burst(previous, eps);
    let cur_field = normalize_burst(current, eps);
    let dims = current.dims();
    let partial: Vec<bool> = (0..dims)
        .map(|d| !prev_field.is_fitted(d) || !cur_field.is_fitted(d))
        .collect();

    let prev_state = borda_state(&prev_field, previous.burst_index);
    let cur_state = borda_state(&cur_field, current.burst_index);
    let dt_span = current.dt * config.stride as f64;
    let mut delta = delta_borda(&cur_state, &prev_state, dt_span)?;
    for (d, row) in delta.dh.iter_mut().enumerate() {
        if partial[d] {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    let roots = LengthScaleRoots::solve(&cur_state.r, &delta.dh, config);
    let (thresholds, history) = update_thresholds(&roots, history);

    let n = current.len();
    let mut kappa = Vec::with_capacity(n);
    let mut kappa_median = Vec::with_capacity(n);
    let mut pdi = Vec::with_capacity(n);
    for a in 0..n {
        let per_dim: Vec<Vec<f64>> = (0..dims)
            .map(|d| {
                roots.points[a]
                    .iter()
                    .map(|r| local_curvature(delta.dh[d][a], r.x[d]))
                    .collect()
            })
            .collect();
        let med: Vec<f64> = per_dim.iter().map(|k| median(k).unwrap_or(0.0)).collect();
        let dh: Vec<f64> = (0..dims).map(|d| delta.dh[d][a]).collect();
        pdi.push(classify_pdi(&med, &thresholds.short[a], &thresholds.long[a], &dh));
        kappa.push(per_dim);
        kappa_median.push(med);
    }

    Ok((
        LevelAnalysis {
            points: n,
            scale,
            datum: cur_field.datum.clone(),
            datum_residual: cur_field.datum_residual.clone(),
            datum_excluded_fraction: cur_field.datum_excluded_fraction.clone(),
            borda: cur_state,
            delta,
            roots,
            kappa,
            kappa_median,
            thresholds,
            pdi,
            partial,
        },
        history,
    ))
}

/// Per-level summary used for the residual curvature and the chain-length
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoomLevel {
    pub point_count: usize,
    /// Finest points per unit; 1 at the finest level.
    pub x: f64,
    /// Median curvature per dimension over points and branches.
    pub kappa_dim: Vec<Option<f64>>,
    /// Median curvature over points, per dimension and branch.
    pub kappa_root: Vec<Option<Vec<f64>>>,
    pub kappa: Option<f64>,
    /// Median short-term threshold `1 / L~`.
    pub inv_ltilde: Option<f64>,
    /// Median long-term threshold `1 / L`.
    pub inv_l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoomProfile {
    pub levels: Vec<ZoomLevel>,
    pub partial: Vec<bool>,
}

impl ZoomLevel {
    fn from_analysis(level: &LevelAnalysis) -> Self {
        let dims = level.partial.len();
        let roots = level.roots.points.first().map_or(0, Vec::len);
        let mut kappa_dim = Vec::with_capacity(dims);
        let mut kappa_root = Vec::with_capacity(dims);
        let mut pooled = Vec::new();
        for d in 0..dims {
            if level.partial[d] {
                kappa_dim.push(None);
                kappa_root.push(None);
                continue;
            }
            let all: Vec<f64> = level.kappa.iter().flat_map(|p| p[d].iter().copied()).collect();
            kappa_dim.push(median(&all));
            kappa_root.push(Some(
                (0..roots)
                    .map(|k| {
                        let col: Vec<f64> = level.kappa.iter().map(|p| p[d][k]).collect();
                        median(&col).unwrap_or(0.0)
                    })
                    .collect(),
            ));
            pooled.extend(all);
        }
        let defined = |t: &[Vec<Option<f64>>]| -> Vec<f64> { t.iter().flatten().flatten().copied().collect() };
        ZoomLevel {
            point_count: level.points,
            x: level.scale,
            kappa_dim,
            kappa_root,
            kappa: median(&pooled),
            inv_ltilde: median(&defined(&level.thresholds.short)),
            inv_l: median(&defined(&level.thresholds.long)),
        }
    }
}

/// Analyze a frame pair at every level of the zoom-out ladder.
///
/// Both frames are pre-scaled by their own per-dimension maximum before
/// coarsening. `histories` holds one threshold history per level and is
/// returned advanced.
pub fn zoom_profile(
    previous: &DataBurst,
    current: &DataBurst,
    histories: &[ThresholdHistory],
    config: &PipelineConfig,
) -> Result<(ZoomProfile, Vec<LevelAnalysis>, Vec<ThresholdHistory>)> {
    let sizes = config
        .level_sizes()
        .ok_or_else(|| DdpError::Config("burst length does not reduce to nine points".into()))?;
    if current.len() != sizes[0] || previous.len() != sizes[0] {
        return Err(DdpError::ShapeMismatch(format!(
            "frames have {} and {} points, expected {}",
            previous.len(),
            current.len(),
            sizes[0]
        )));
    }
    let (mut prev, _) = previous.prescaled();
    let (mut cur, _) = current.prescaled();
    let mut analyses = Vec::with_capacity(sizes.len());
    let mut next_histories = Vec::with_capacity(sizes.len());
    let mut scale = 1.0;
    for (i, _) in sizes.iter().enumerate() {
        if i > 0 {
            prev = aggregate(&prev, config.aggregation_factor)?;
            cur = aggregate(&cur, config.aggregation_factor)?;
            scale *= config.aggregation_factor as f64;
        }
        let empty = ThresholdHistory::default();
        let history = histories.get(i).unwrap_or(&empty);
        let (analysis, h) = analyze_level(&prev, &cur, scale, history, config)?;
        analyses.push(analysis);
        next_histories.push(h);
    }
    let dims = current.dims();
    let partial = (0..dims).map(|d| analyses.iter().any(|a| a.partial[d])).collect();
    let profile = ZoomProfile {
        levels: analyses.iter().map(ZoomLevel::from_analysis).collect(),
        partial,
    };
    Ok((profile, analyses, next_histories))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualCurvatureRecord {
    /// Per dimension, one value per root branch; `None` for partial dimensions.
    pub rc: Vec<Option<Vec<f64>>>,
    /// Median over branches per dimension.
    pub rc_dim: Vec<Option<f64>>,
    /// Median of `rc_dim` over the defined dimensions.
    pub rc_combined: Option<f64>,
    /// Spread of the branch distribution per dimension.
    pub modulation: Vec<Option<BoxplotStats>>,
}

/// Curvature magnitude left at the coarsest level.
pub fn residual_curvature(profile: &ZoomProfile) -> Result<ResidualCurvatureRecord> {
    let last = profile
        .levels
        .last()
        .ok_or(DdpError::Empty("zoom profile has no levels"))?;
    let rc: Vec<Option<Vec<f64>>> = last
        .kappa_root
        .iter()
        .map(|r| r.as_ref().map(|v| v.iter().map(|k| k.abs()).collect()))
        .collect();
    let rc_dim: Vec<Option<f64>> = rc.iter().map(|r| r.as_deref().and_then(median)).collect();
    let defined: Vec<f64> = rc_dim.iter().flatten().copied().collect();
    let modulation = rc
        .iter()
        .map(|r| r.as_deref().and_then(|v| boxplot_stats(v).ok()))
        .collect();
    Ok(ResidualCurvatureRecord {
        rc_combined: median(&defined),
        rc,
        rc_dim,
        modulation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalLengths {
    /// From the long-term threshold line `1 / L`.
    pub short: f64,
    /// From the instantaneous threshold line `1 / L~`.
    pub long: f64,
}

/// Least-squares line `y = intercept + slope * t`.
pub fn fit_line(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mt, slope))
}

/// Intersections of a line with a polyline, ordered along the polyline.
/// Vertices must be sorted by `t`. Coincident stretches report their
/// endpoints.
pub fn line_polyline_intersections(line: (f64, f64), poly: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let (c, m) = line;
    let gap = |p: (f64, f64)| p.1 - (c + m * p.0);
    let mut hits: Vec<(f64, f64)> = Vec::new();
    let push = |p: (f64, f64), hits: &mut Vec<(f64, f64)>| {
        if hits
            .last()
            .is_none_or(|q| (q.0 - p.0).abs() > 1e-12 * (1.0 + p.0.abs()))
        {
            hits.push(p);
        }
    };
    for w in poly.windows(2) {
        let (p, q) = (w[0], w[1]);
        let (g0, g1) = (gap(p), gap(q));
        if g0 == 0.0 {
            push(p, &mut hits);
        }
        if g0 != 0.0 && g1 != 0.0 && (g0 < 0.0) != (g1 < 0.0) {
            let f = g0 / (g0 - g1);
            let t = p.0 + f * (q.0 - p.0);
            push((t, p.1 + f * (q.1 - p.1)), &mut hits);
        }
        if g1 == 0.0 {
            push(q, &mut hits);
        }
    }
    hits
}

/// Chain length from the intersection of a threshold line with the mirrored
/// curvature curve.
///
/// Curvature medians sit at `t = ln x` for each level and are mirrored about
/// `t = 0`, so the curve is symmetric; beyond the coarsest level it stays
/// flat at the residual curvature out to `|t| = ln N`. The line fitted to
/// the threshold medians is extended over the whole range. Walking outwards
/// from `t = 0`, the first crossing is taken unless a farther crossing sits
/// at lower curvature, in which case the process zone jumps there. A
/// crossing at `t` corresponds to `exp(|t|)` finest points; no crossing
/// yields the unreachable length `N + 1`.
pub fn chain_length_from_line(profile: &ZoomProfile, line: Option<(f64, f64)>, finest_points: usize) -> f64 {
    let unreachable = (finest_points + 1) as f64;
    let Some(line) = line else {
        return unreachable;
    };
    let mut curve: Vec<(f64, f64)> = Vec::new();
    for level in &profile.levels {
        if let Some(k) = level.kappa {
            let t = level.x.ln();
            curve.push((t, k));
            if t != 0.0 {
                curve.push((-t, k));
            }
        }
    }
    if curve.len() < 2 {
        return unreachable;
    }
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    let far = (finest_points as f64).ln();
    let (first, last) = (curve[0], curve[curve.len() - 1]);
    if -far < first.0 {
        curve.insert(0, (-far, first.1));
    }
    if far > last.0 {
        curve.push((far, last.1));
    }
    let mut hits = line_polyline_intersections(line, &curve);
    hits.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    let Some(mut chosen) = hits.first().copied() else {
        return unreachable;
    };
    for h in &hits[1..] {
        if h.1 < chosen.1 {
            chosen = *h;
        }
    }
    chosen.0.abs().exp()
}

pub fn critical_chain_lengths(profile: &ZoomProfile, finest_points: usize) -> CriticalLengths {
    let series = |pick: fn(&ZoomLevel) -> Option<f64>| -> Vec<(f64, f64)> {
        profile
            .levels
            .iter()
            .filter_map(|l| pick(l).map(|y| (l.x.ln(), y)))
            .collect()
    };
    let inv_l = fit_line(&series(|l| l.inv_l));
    let inv_ltilde = fit_line(&series(|l| l.inv_ltilde));
    CriticalLengths {
        short: chain_length_from_line(profile, inv_l, finest_points),
        long: chain_length_from_line(profile, inv_ltilde, finest_points),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtiRecord {
    pub chain_max_length: usize,
    pub critical_short: f64,
    pub critical_long: f64,
    pub energy_drop_fraction: Option<f64>,
    pub triggered: bool,
    pub imminent: bool,
}

/// Global Transition Indicator for the latest frame pair.
///
/// `rc_history` is the combined residual curvature of every frame pair so
/// far, latest last. A rise counts as zero drop.
pub fn gti(
    rc_history: &[Option<f64>],
    chain_max_length: usize,
    critical: CriticalLengths,
    any_unstable_point: bool,
    drop_threshold: f64,
) -> GtiRecord {
    let energy_drop_fraction = match rc_history {
        [.., Some(prev), Some(now)] if *prev > 0.0 => Some(((prev - now) / prev).clamp(0.0, 1.0)),
        _ => None,
    };
    let triggered =
        chain_max_length as f64 > critical.short && energy_drop_fraction.is_some_and(|d| d >= drop_threshold);
    GtiRecord {
        chain_max_length,
        critical_short: critical.short,
        critical_long: critical.long,
        energy_drop_fraction,
        triggered,
        imminent: triggered && any_unstable_point,
    }
}
