//! Deterministic synthetic corpora with known ground truth.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DataBurst, Dataset, GroupLabel, Sample, SubjectMeta};
use crate::config::PipelineConfig;
use crate::error::{DdpError, Result};

/// Fraction of the signal left after a step collapse.
const COLLAPSE_RESIDUAL: f64 = 0.05;
/// Noise standard deviation relative to the summed harmonic amplitude.
const NOISE_FRACTION: f64 = 0.01;
/// Total drift over the whole corpus, as a fraction of the baseline level.
const DRIFT_SPAN: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Stable,
    Burst,
    Drift,
}

impl FromStr for Profile {
    type Err = DdpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stable" => Ok(Profile::Stable),
            "burst" => Ok(Profile::Burst),
            "drift" => Ok(Profile::Drift),
            other => Err(DdpError::Config(format!("unknown profile {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusShape {
    pub subjects: usize,
    pub bursts_per_subject: usize,
}

impl Default for CorpusShape {
    fn default() -> Self {
        Self {
            subjects: 1,
            bursts_per_subject: 10,
        }
    }
}

/// Where a synthetic anomaly was planted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub profile: Profile,
    pub subject_id: String,
    pub burst_index: u64,
    pub time_index: u64,
    pub dimension: usize,
}

/// Generate a corpus that is a pure function of `(profile, config, shape)`.
///
/// Every dimension is a positive baseline modulated by a few low-amplitude
/// harmonics of the burst length (so consecutive bursts repeat the same
/// waveform) plus Gaussian noise at 1% of the harmonic amplitude. `Burst`
/// collapses one dimension to 5% of its level from a random time index
/// onwards; `Drift` adds a slow linear trend to one dimension.
pub fn synthesize(profile: Profile, config: &PipelineConfig, shape: CorpusShape) -> Result<Dataset> {
    config.validate()?;
    if profile == Profile::Burst && shape.bursts_per_subject < 2 {
        return Err(DdpError::Config(
            "burst profile needs at least two bursts per subject".into(),
        ));
    }
    let n = config.burst_len;
    let dims = config.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut ds = Dataset::default();

    for s in 0..shape.subjects {
        let subject_id = format!("syn{s:03}");
        let group = if s % 2 == 0 {
            GroupLabel::Control
        } else {
            GroupLabel::PostAclr
        };
        let offsets: Vec<f64> = (0..dims).map(|_| rng.random_range(0.75..1.25)).collect();
        let harmonics: Vec<[(f64, f64); 3]> = (0..dims)
            .map(|_| {
                let mut h = [(0.0, 0.0); 3];
                for (k, slot) in h.iter_mut().enumerate() {
                    let amp = rng.random_range(0.02..0.05) / (k + 1) as f64;
                    *slot = (amp, rng.random_range(0.0..TAU));
                }
                h
            })
            .collect();

        let injection = match profile {
            Profile::Stable => None,
            Profile::Burst => Some(Injection {
                profile,
                subject_id: subject_id.clone(),
                burst_index: (shape.bursts_per_subject / 2).max(1) as u64,
                time_index: rng.random_range(n / 4..3 * n / 4) as u64,
                dimension: rng.random_range(0..dims),
            }),
            Profile::Drift => Some(Injection {
                profile,
                subject_id: subject_id.clone(),
                burst_index: 0,
                time_index: 0,
                dimension: rng.random_range(0..dims),
            }),
        };
        let total_points = (shape.bursts_per_subject * n) as f64;

        let mut meta = SubjectMeta {
            mass: Some(rng.random_range(55.0..95.0)),
            com_displacement: BTreeMap::new(),
        };
        for b in 0..shape.bursts_per_subject {
            let mut samples = Vec::with_capacity(n);
            for i in 0..n {
                let phase = TAU * i as f64 / n as f64;
                let values = (0..dims)
                    .map(|d| {
                        let wave: f64 = harmonics[d]
                            .iter()
                            .enumerate()
                            .map(|(k, (amp, phi))| amp * ((k + 1) as f64 * phase + phi).sin())
                            .sum();
                        let amplitude: f64 = harmonics[d].iter().map(|h| h.0).sum();
                        let noise = NOISE_FRACTION * amplitude * unit.sample(&mut rng);
                        let mut v = offsets[d] * (1.0 + wave + noise);
                        if let Some(inj) = injection.as_ref().filter(|inj| inj.dimension == d) {
                            match profile {
                                Profile::Burst => {
                                    let after = (b as u64, i as u64) >= (inj.burst_index, inj.time_index);
                                    if after {
                                        v *= COLLAPSE_RESIDUAL;
                                    }
                                }
                                Profile::Drift => {
                                    let t = (b * n + i) as f64;
                                    v += offsets[d] * DRIFT_SPAN * t / total_points;
                                }
                                Profile::Stable => {}
                            }
                        }
                        v
                    })
                    .collect();
                samples.push(Sample {
                    values,
                    time_index: i as u64,
                });
            }
            meta.com_displacement
                .insert(b as u64, (0..dims).map(|_| 0.01 * unit.sample(&mut rng)).collect());
            ds.bursts.push(DataBurst {
                samples,
                dt: 1.0 / 160.0,
                burst_index: b as u64,
                subject_id: subject_id.clone(),
                group,
            });
        }
        ds.metadata.insert(subject_id, meta);
        ds.injections.extend(injection);
    }
    Ok(ds)
}
