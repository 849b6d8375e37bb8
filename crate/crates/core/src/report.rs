//! Subject and group statistics and their JSON / CSV encodings.
//!
//! JSON documents carry a top-level `schema_version`; CSV root tables have
//! one row per subject, frame pair, dimension and root branch.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{DdpError, Result};
use crate::ingest::GroupLabel;
use crate::pipeline::{FrameRecord, SubjectAnalysis};
use crate::stats::{mean, median, quantile_sorted, sorted_finite, std_dev};

pub const SCHEMA_VERSION: &str = "1.0";
/// Whisker half-width in standard deviations.
pub const WHISKER_SIGMAS: f64 = 2.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

impl BoxplotStats {
    /// Box width, reported as the modulation amplitude.
    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

/// Quartile box with whiskers at `mean +- 2.7 sd` (population sd).
pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats> {
    let sorted = sorted_finite(values);
    if sorted.is_empty() {
        return Err(DdpError::Empty("boxplot of no finite values"));
    }
    let m = mean(&sorted).unwrap();
    let sd = std_dev(&sorted).unwrap();
    let (lo, hi) = (m - WHISKER_SIGMAS * sd, m + WHISKER_SIGMAS * sd);
    Ok(BoxplotStats {
        q25: quantile_sorted(&sorted, 0.25).unwrap(),
        median: quantile_sorted(&sorted, 0.5).unwrap(),
        q75: quantile_sorted(&sorted, 0.75).unwrap(),
        mean: m,
        std_dev: sd,
        whisker_low: lo,
        whisker_high: hi,
        outliers: sorted.iter().copied().filter(|v| *v < lo || *v > hi).collect(),
    })
}

/// `|sum_d rc_d * dcom_d| / mass`.
pub fn energy_exchange_amplitude(rc: &[f64], com_displacement: &[f64], mass: f64) -> Result<f64> {
    if rc.len() != com_displacement.len() {
        return Err(DdpError::ShapeMismatch(format!(
            "rc has {} dimensions, com displacement {}",
            rc.len(),
            com_displacement.len()
        )));
    }
    if mass.is_nan() || mass <= 0.0 {
        return Err(DdpError::InvalidData("mass must be positive".into()));
    }
    let dot: f64 = rc.iter().zip(com_displacement).map(|(a, b)| a * b).sum();
    Ok(dot.abs() / mass)
}

/// Median, exceedance and histogram of one pooled sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSummary {
    pub count: usize,
    pub median: f64,
    pub percent_above: f64,
    /// `bins[0]` below the first edge, `bins[i]` in `[edge[i-1], edge[i])`,
    /// last bin at or above the final edge.
    pub bins: Vec<usize>,
}

pub fn summarize_values(values: &[f64], threshold: f64, edges: &[f64]) -> Result<ValueSummary> {
    let sorted = sorted_finite(values);
    if sorted.is_empty() {
        return Err(DdpError::Empty("no finite values to summarize"));
    }
    let above = sorted.iter().filter(|v| **v > threshold).count();
    let mut bins = vec![0; edges.len() + 1];
    for v in &sorted {
        bins[edges.partition_point(|e| e <= v)] += 1;
    }
    Ok(ValueSummary {
        count: sorted.len(),
        median: quantile_sorted(&sorted, 0.5).unwrap(),
        percent_above: 100.0 * above as f64 / sorted.len() as f64,
        bins,
    })
}

/// `(post - control) / control * 100`.
pub fn percent_change(control: f64, post: f64) -> Option<f64> {
    (control != 0.0).then(|| (post - control) / control * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectReport {
    pub subject_id: String,
    pub group: GroupLabel,
    pub mass_kg: f64,
    pub mass_defaulted: bool,
    /// Bursts available and frame pairs analyzed.
    pub bursts: usize,
    pub frames: Vec<FrameRecord>,
    /// Median residual curvature per dimension over every branch and frame.
    pub rc_median: Vec<Option<f64>>,
    pub rc_median_combined: Option<f64>,
    /// Residual curvature branch values per dimension, pooled over frames.
    pub rc_roots: Vec<Vec<f64>>,
    /// Counts of point categories; index 0 is category 1.
    pub pdi_histogram: [usize; 9],
    pub boxplots: Vec<Option<BoxplotStats>>,
}

impl SubjectReport {
    pub fn from_analysis(analysis: &SubjectAnalysis, dims: usize) -> Self {
        let mut rc_roots = vec![Vec::new(); dims];
        let mut pdi_histogram = [0usize; 9];
        for f in &analysis.frames {
            for (d, values) in f.rc.rc.iter().enumerate() {
                if let Some(v) = values {
                    rc_roots[d].extend(v.iter().copied().filter(|x| x.is_finite()));
                }
            }
            for c in &f.categories {
                pdi_histogram[(*c as usize).clamp(1, 9) - 1] += 1;
            }
        }
        let pooled: Vec<f64> = rc_roots.iter().flatten().copied().collect();
        SubjectReport {
            subject_id: analysis.subject_id.clone(),
            group: analysis.group,
            mass_kg: analysis.mass_kg,
            mass_defaulted: analysis.mass_defaulted,
            bursts: analysis.bursts,
            rc_median: rc_roots.iter().map(|v| median(v)).collect(),
            rc_median_combined: median(&pooled),
            boxplots: rc_roots.iter().map(|v| boxplot_stats(v).ok()).collect(),
            rc_roots,
            pdi_histogram,
            frames: analysis.frames.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: GroupLabel,
    pub subjects: usize,
    pub dims: Vec<Option<ValueSummary>>,
    pub combined: Option<ValueSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    /// Multiplier times the median of every pooled value.
    pub rc_threshold: f64,
    pub bin_edges: Vec<f64>,
    pub groups: Vec<GroupSummary>,
    /// Groups asked for that had no values.
    pub unavailable: Vec<GroupLabel>,
    /// Post-ACLR versus control median change in percent, per dimension.
    pub percent_change: Vec<Option<f64>>,
    pub percent_change_combined: Option<f64>,
}

/// Pool residual-curvature branch values per group and compare groups.
pub fn group_stats(reports: &[SubjectReport], groups: &[GroupLabel], config: &PipelineConfig) -> Result<GroupStats> {
    let dims = reports.iter().map(|r| r.rc_roots.len()).max().unwrap_or(config.dims);
    let all: Vec<f64> = reports
        .iter()
        .flat_map(|r| r.rc_roots.iter().flatten().copied())
        .collect();
    let overall = median(&all).ok_or(DdpError::Empty("no residual curvature values in any report"))?;
    let rc_threshold = config.rc_threshold_multiplier * overall;

    let mut summaries = Vec::new();
    let mut unavailable = Vec::new();
    for &g in groups {
        let members: Vec<&SubjectReport> = reports.iter().filter(|r| r.group == g).collect();
        let per_dim: Vec<Vec<f64>> = (0..dims)
            .map(|d| {
                members
                    .iter()
                    .filter_map(|r| r.rc_roots.get(d))
                    .flatten()
                    .copied()
                    .collect()
            })
            .collect();
        let pooled: Vec<f64> = per_dim.iter().flatten().copied().collect();
        if pooled.is_empty() {
            unavailable.push(g);
            continue;
        }
        summaries.push(GroupSummary {
            group: g,
            subjects: members.len(),
            dims: per_dim
                .iter()
                .map(|v| summarize_values(v, rc_threshold, &config.bin_edges).ok())
                .collect(),
            combined: summarize_values(&pooled, rc_threshold, &config.bin_edges).ok(),
        });
    }

    let find = |g: GroupLabel| summaries.iter().find(|s| s.group == g);
    let (percent_change_dims, percent_change_combined) = match (find(GroupLabel::Control), find(GroupLabel::PostAclr)) {
        (Some(c), Some(p)) => (
            (0..dims)
                .map(|d| match (&c.dims[d], &p.dims[d]) {
                    (Some(a), Some(b)) => percent_change(a.median, b.median),
                    _ => None,
                })
                .collect(),
            match (&c.combined, &p.combined) {
                (Some(a), Some(b)) => percent_change(a.median, b.median),
                _ => None,
            },
        ),
        _ => (vec![None; dims], None),
    };

    Ok(GroupStats {
        rc_threshold,
        bin_edges: config.bin_edges.clone(),
        groups: summaries,
        unavailable,
        percent_change: percent_change_dims,
        percent_change_combined,
    })
}

/// Top-level JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: String,
    pub config: PipelineConfig,
    /// Every burst is divided per dimension by its maximum magnitude
    /// before analysis; the divisors are in each frame record.
    pub prescaling: String,
    pub subjects: Vec<SubjectReport>,
    /// Subjects with too few bursts for a single frame pair.
    pub skipped_subjects: Vec<String>,
    pub group_stats: Option<GroupStats>,
}

impl AnalysisReport {
    pub fn new(config: &PipelineConfig, subjects: Vec<SubjectReport>, skipped: Vec<String>) -> Self {
        let groups = [GroupLabel::Control, GroupLabel::PostAclr];
        let group_stats = subjects
            .iter()
            .any(|s| s.group != GroupLabel::Unlabeled)
            .then(|| group_stats(&subjects, &groups, config).ok())
            .flatten();
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            config: config.clone(),
            prescaling: "per-burst per-dimension max-abs".to_string(),
            subjects,
            skipped_subjects: skipped,
            group_stats,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| DdpError::Serialize(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| DdpError::Serialize(e.to_string()))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        std::fs::write(path, text + "\n").map_err(|e| DdpError::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DdpError::io(path, e))?;
        Self::from_json(&text)
    }
}

fn csv_err(e: csv::Error) -> DdpError {
    DdpError::Serialize(e.to_string())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Residual curvature per subject, frame pair, dimension and branch.
pub fn write_root_table<W: Write>(reports: &[SubjectReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["subject", "group", "previous_burst", "burst", "dimension", "root", "rc"])
        .map_err(csv_err)?;
    for r in reports {
        for f in &r.frames {
            for (d, values) in f.rc.rc.iter().enumerate() {
                let roots = f.root_count;
                for k in 0..roots {
                    let v = values.as_ref().map(|v| v[k]);
                    w.write_record([
                        r.subject_id.clone(),
                        r.group.to_string(),
                        f.previous_burst.to_string(),
                        f.burst.to_string(),
                        d.to_string(),
                        k.to_string(),
                        opt(v),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
    }
    w.flush().map_err(|e| DdpError::io("<csv>", e))
}

/// Group statistics as a flat table: one row per group and dimension
/// (`combined` for the pooled row), plus percent-change rows.
pub fn write_group_table<W: Write>(stats: &GroupStats, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "group".to_string(),
        "dimension".to_string(),
        "count".to_string(),
        "median".to_string(),
        format!("percent_above_{}", stats.rc_threshold),
    ];
    let mut lower = "0".to_string();
    for e in &stats.bin_edges {
        header.push(format!("bin_{lower}_{e}"));
        lower = e.to_string();
    }
    header.push(format!("bin_ge_{lower}"));
    header.push("percent_change".to_string());
    w.write_record(&header).map_err(csv_err)?;

    let blank_bins = vec![String::new(); stats.bin_edges.len() + 1];
    for g in &stats.groups {
        let rows = g
            .dims
            .iter()
            .enumerate()
            .map(|(d, s)| (d.to_string(), s))
            .chain(std::iter::once(("combined".to_string(), &g.combined)));
        for (dim, s) in rows {
            let mut rec = vec![g.group.to_string(), dim];
            match s {
                Some(s) => {
                    rec.push(s.count.to_string());
                    rec.push(s.median.to_string());
                    rec.push(s.percent_above.to_string());
                    rec.extend(s.bins.iter().map(|b| b.to_string()));
                }
                None => {
                    rec.extend(["0".to_string(), String::new(), String::new()]);
                    rec.extend(blank_bins.iter().cloned());
                }
            }
            rec.push(String::new());
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    let changes = stats
        .percent_change
        .iter()
        .enumerate()
        .map(|(d, p)| (d.to_string(), *p))
        .chain(std::iter::once(("combined".to_string(), stats.percent_change_combined)));
    for (dim, p) in changes {
        let mut rec = vec!["post_aclr_vs_control".to_string(), dim];
        rec.extend(std::iter::repeat_n(String::new(), 3 + blank_bins.len()));
        rec.push(opt(p));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| DdpError::io("<csv>", e))
}

/// Reports grouped by label, in label order.
pub fn by_group(reports: &[SubjectReport]) -> BTreeMap<GroupLabel, Vec<&SubjectReport>> {
    let mut map: BTreeMap<GroupLabel, Vec<&SubjectReport>> = BTreeMap::new();
    for r in reports {
        map.entry(r.group).or_default().push(r);
    }
    map
}
