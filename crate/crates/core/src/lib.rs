//! Data driven prognosis of instabilities in multi-dimensional time series.
//!
//! A data burst is a short frame of `N` samples by `D` dimensions treated as
//! one interacting system. For two bursts `n` steps apart the pipeline
//!
//! 1. normalizes every pair of points per dimension against a fitted datum
//!    ([`normalization`]),
//! 2. aggregates the margins into Borda counts and objective ranks and
//!    differences them between the frames ([`ranking`]),
//! 3. solves for the `2^D` dimensionless length-scale roots of each point
//!    ([`lengthscale`]),
//! 4. turns Borda change and length scale into local curvature, compares it
//!    with short- and long-term thresholds and assigns a Path Dependency
//!    Index, grouping unstable runs into chains ([`curvature`]),
//! 5. repeats the above on coarsened frames down to nine points to obtain the
//!    residual curvature, the critical chain lengths and the Global
//!    Transition Indicator ([`zoomout`]),
//! 6. summarizes subjects and groups ([`report`]).
//!
//! ```
//! use ddp::{analyze_dataset, synthesize, AnalyzeOptions, CorpusShape, PipelineConfig, Profile};
//!
//! let config = PipelineConfig { burst_len: 27, ..Default::default() };
//! let data = synthesize(Profile::Stable, &config, CorpusShape { subjects: 1, bursts_per_subject: 3 }).unwrap();
//! let analysis = analyze_dataset(&data, &config, AnalyzeOptions::default()).unwrap();
//! assert_eq!(analysis.subjects[0].frames.len(), 2);
//! ```

pub mod config;
pub mod curvature;
pub mod dump;
pub mod error;
pub mod ingest;
pub mod lengthscale;
pub mod normalization;
pub mod pipeline;
pub mod ranking;
pub mod report;
pub mod stats;
pub mod zoomout;

pub use config::PipelineConfig;
pub use error::{DdpError, Result};
pub use ingest::{
    emit_xyzm, frame_pairs, parse_xyzm, parse_xyzm_str, synthesize, CorpusShape, DataBurst, Dataset, GroupLabel,
    Profile,
};
pub use pipeline::{
    analyze_dataset, analyze_dataset_limited, analyze_dataset_sequential, analyze_subject, AnalyzeOptions,
    DatasetAnalysis, FrameRecord, SubjectAnalysis,
};
pub use report::{AnalysisReport, GroupStats, SubjectReport};
