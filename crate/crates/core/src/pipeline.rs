//! End-to-end analysis of subjects and datasets.
//!
//! Subjects are independent and run in parallel when the `parallel` feature
//! is enabled; frame pairs within a subject run in order because the
//! threshold and residual-curvature histories are threaded through them.

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::curvature::{detect_chains, frame_category, Chain, ThresholdHistory, UNSTABLE_CATEGORY};
use crate::error::Result;
use crate::ingest::{frame_pairs, DataBurst, Dataset, GroupLabel, SubjectMeta, DEFAULT_MASS_KG};
use crate::report::{energy_exchange_amplitude, AnalysisReport, SubjectReport};
use crate::zoomout::{
    critical_chain_lengths, gti, residual_curvature, zoom_profile, CriticalLengths, GtiRecord, LevelAnalysis,
    ResidualCurvatureRecord, ZoomProfile,
};

/// Environment variable capping the number of subjects analyzed at once.
pub const MAX_PARALLEL_ENV: &str = "DDP_MAX_PARALLEL_SUBJECTS";

/// Everything reported for one frame pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub previous_burst: u64,
    pub burst: u64,
    pub dt_span: f64,
    /// Per-dimension divisors applied to the current burst.
    pub prescale_factors: Vec<f64>,
    pub datum: Vec<Option<f64>>,
    pub datum_residual: Vec<Option<f64>>,
    pub datum_excluded_fraction: Vec<f64>,
    pub root_count: usize,
    pub root_fallback_fraction: f64,
    /// Point categories at the finest level.
    pub categories: Vec<u8>,
    /// Points where short-only and long-only violations met in different dimensions.
    pub mixed_points: Vec<usize>,
    pub chains: Vec<Chain>,
    pub frame_pdi: u8,
    pub critical: CriticalLengths,
    pub zoom: ZoomProfile,
    pub rc: ResidualCurvatureRecord,
    /// Interquartile range of the residual-curvature branches per dimension.
    pub modulation_amplitude: Vec<Option<f64>>,
    pub gti: GtiRecord,
    pub energy_exchange_amplitude: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SubjectAnalysis {
    pub subject_id: String,
    pub group: GroupLabel,
    pub mass_kg: f64,
    pub mass_defaulted: bool,
    pub bursts: usize,
    pub frames: Vec<FrameRecord>,
    /// Per frame pair, every zoom level in full; only kept on request.
    pub levels: Vec<Vec<LevelAnalysis>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AnalyzeOptions {
    /// Retain the full per-level state for dumps.
    pub keep_levels: bool,
}

#[derive(Debug, Clone)]
pub struct DatasetAnalysis {
    pub subjects: Vec<SubjectAnalysis>,
    /// Subjects with no more than `stride` bursts.
    pub skipped: Vec<String>,
}

impl DatasetAnalysis {
    pub fn report(&self, config: &PipelineConfig) -> AnalysisReport {
        let subjects = self
            .subjects
            .iter()
            .map(|s| SubjectReport::from_analysis(s, config.dims))
            .collect();
        AnalysisReport::new(config, subjects, self.skipped.clone())
    }
}

/// Run every frame pair of one subject in order.
pub fn analyze_subject(
    subject_id: &str,
    bursts: &[&DataBurst],
    meta: Option<&SubjectMeta>,
    config: &PipelineConfig,
    options: AnalyzeOptions,
) -> Result<SubjectAnalysis> {
    let mass = meta.and_then(|m| m.mass);
    let mut histories: Vec<ThresholdHistory> = Vec::new();
    let mut rc_history: Vec<Option<f64>> = Vec::new();
    let mut frames = Vec::new();
    let mut levels = Vec::new();

    for (prev, cur) in frame_pairs(bursts, config.stride) {
        let (profile, analyses, next) = zoom_profile(prev, cur, &histories, config)?;
        histories = next;
        let finest = &analyses[0];
        let categories: Vec<u8> = finest.pdi.iter().map(|r| r.category).collect();
        let mixed_points = finest
            .pdi
            .iter()
            .enumerate()
            .filter(|(_, r)| r.mixed_short_long)
            .map(|(i, _)| i)
            .collect();
        let chains = detect_chains(&finest.pdi);
        let critical = critical_chain_lengths(&profile, cur.len());
        let rc = residual_curvature(&profile)?;
        rc_history.push(rc.rc_combined);
        let chain_max = chains.iter().map(|c| c.length).max().unwrap_or(0);
        let any_unstable = categories.iter().any(|c| *c >= UNSTABLE_CATEGORY);
        let gti_record = gti(&rc_history, chain_max, critical, any_unstable, config.drop_threshold);

        let energy = meta
            .and_then(|m| m.com_displacement.get(&cur.burst_index))
            .and_then(|com| {
                let rc_vec: Option<Vec<f64>> = rc.rc_dim.iter().copied().collect();
                energy_exchange_amplitude(&rc_vec?, com, mass.unwrap_or(DEFAULT_MASS_KG)).ok()
            });

        frames.push(FrameRecord {
            previous_burst: prev.burst_index,
            burst: cur.burst_index,
            dt_span: finest.delta.dt_span,
            prescale_factors: cur.prescaled().1,
            datum: finest.datum.clone(),
            datum_residual: finest.datum_residual.clone(),
            datum_excluded_fraction: finest.datum_excluded_fraction.clone(),
            root_count: config.root_count(),
            root_fallback_fraction: finest.roots.fallback_fraction(),
            frame_pdi: frame_category(&finest.pdi, &chains, critical.short, critical.long),
            categories,
            mixed_points,
            chains,
            critical,
            modulation_amplitude: rc.modulation.iter().map(|m| m.as_ref().map(|b| b.iqr())).collect(),
            zoom: profile,
            rc,
            gti: gti_record,
            energy_exchange_amplitude: energy,
        });
        if options.keep_levels {
            levels.push(analyses);
        }
    }

    Ok(SubjectAnalysis {
        subject_id: subject_id.to_string(),
        group: bursts.first().map(|b| b.group).unwrap_or_default(),
        mass_kg: mass.unwrap_or(DEFAULT_MASS_KG),
        mass_defaulted: mass.is_none(),
        bursts: bursts.len(),
        frames,
        levels,
    })
}

fn prepare<'a>(dataset: &'a Dataset, config: &PipelineConfig) -> Result<Vec<(&'a str, Vec<&'a DataBurst>)>> {
    config.validate()?;
    dataset.validate(config.dims)?;
    Ok(dataset.subjects())
}

fn collect(results: Vec<Result<SubjectAnalysis>>, config: &PipelineConfig) -> Result<DatasetAnalysis> {
    let mut subjects = Vec::with_capacity(results.len());
    let mut skipped = Vec::new();
    for r in results {
        let s = r?;
        if s.bursts <= config.stride {
            log::info!(
                "subject {:?} has {} bursts; no frame pair at stride {}",
                s.subject_id,
                s.bursts,
                config.stride
            );
            skipped.push(s.subject_id.clone());
        }
        subjects.push(s);
    }
    Ok(DatasetAnalysis { subjects, skipped })
}

/// Analyze subjects one after another on the calling thread.
pub fn analyze_dataset_sequential(
    dataset: &Dataset,
    config: &PipelineConfig,
    options: AnalyzeOptions,
) -> Result<DatasetAnalysis> {
    let subjects = prepare(dataset, config)?;
    let results = subjects
        .iter()
        .map(|(id, bursts)| analyze_subject(id, bursts, dataset.metadata.get(*id), config, options))
        .collect();
    collect(results, config)
}

/// Analyze subjects concurrently. Output order and content are identical
/// to [`analyze_dataset_sequential`].
#[cfg(feature = "parallel")]
pub fn analyze_dataset(dataset: &Dataset, config: &PipelineConfig, options: AnalyzeOptions) -> Result<DatasetAnalysis> {
    use rayon::prelude::*;

    let subjects = prepare(dataset, config)?;
    let results = subjects
        .par_iter()
        .map(|(id, bursts)| analyze_subject(id, bursts, dataset.metadata.get(*id), config, options))
        .collect();
    collect(results, config)
}

#[cfg(not(feature = "parallel"))]
pub fn analyze_dataset(dataset: &Dataset, config: &PipelineConfig, options: AnalyzeOptions) -> Result<DatasetAnalysis> {
    analyze_dataset_sequential(dataset, config, options)
}

/// Like [`analyze_dataset`] but with at most `max_parallel` subjects in
/// flight; `None` reads [`MAX_PARALLEL_ENV`] and otherwise uses every core.
#[cfg(feature = "parallel")]
pub fn analyze_dataset_limited(
    dataset: &Dataset,
    config: &PipelineConfig,
    options: AnalyzeOptions,
    max_parallel: Option<usize>,
) -> Result<DatasetAnalysis> {
    let limit = max_parallel.or_else(max_parallel_from_env);
    match limit {
        Some(1) => analyze_dataset_sequential(dataset, config, options),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| crate::error::DdpError::Config(format!("thread pool: {e}")))?;
            pool.install(|| analyze_dataset(dataset, config, options))
        }
        None => analyze_dataset(dataset, config, options),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn analyze_dataset_limited(
    dataset: &Dataset,
    config: &PipelineConfig,
    options: AnalyzeOptions,
    _max_parallel: Option<usize>,
) -> Result<DatasetAnalysis> {
    analyze_dataset_sequential(dataset, config, options)
}

/// Positive integer from [`MAX_PARALLEL_ENV`], if set.
pub fn max_parallel_from_env() -> Option<usize> {
    std::env::var(MAX_PARALLEL_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synthesize, CorpusShape, Profile};

    fn small() -> PipelineConfig {
        PipelineConfig {
            burst_len: 27,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn one_frame_record_per_pair() {
        let cfg = small();
        let ds = synthesize(
            Profile::Stable,
            &cfg,
            CorpusShape {
                subjects: 2,
                bursts_per_subject: 4,
            },
        )
        .unwrap();
        let a = analyze_dataset(&ds, &cfg, AnalyzeOptions::default()).unwrap();
        assert_eq!(a.subjects.len(), 2);
        for s in &a.subjects {
            assert_eq!(s.frames.len(), 3);
            assert!(s.levels.is_empty());
            for f in &s.frames {
                assert_eq!(f.categories.len(), 27);
                assert_eq!(f.zoom.levels.len(), 2);
                assert!(f.energy_exchange_amplitude.is_some());
            }
        }
        assert!(a.skipped.is_empty());
    }

    #[test]
    fn short_subject_is_skipped_not_failed() {
        let cfg = small();
        let ds = synthesize(
            Profile::Stable,
            &cfg,
            CorpusShape {
                subjects: 1,
                bursts_per_subject: 1,
            },
        )
        .unwrap();
        let a = analyze_dataset_sequential(&ds, &cfg, AnalyzeOptions::default()).unwrap();
        assert_eq!(a.skipped, vec!["syn000".to_string()]);
        assert!(a.subjects[0].frames.is_empty());
    }

    #[test]
    fn parallel_matches_sequential() {
        let cfg = small();
        let ds = synthesize(
            Profile::Burst,
            &cfg,
            CorpusShape {
                subjects: 4,
                bursts_per_subject: 3,
            },
        )
        .unwrap();
        let seq = analyze_dataset_sequential(&ds, &cfg, AnalyzeOptions::default()).unwrap();
        let par = analyze_dataset_limited(&ds, &cfg, AnalyzeOptions::default(), Some(2)).unwrap();
        let frames = |a: &DatasetAnalysis| a.subjects.iter().map(|s| s.frames.clone()).collect::<Vec<_>>();
        assert_eq!(frames(&seq), frames(&par));
    }
}
