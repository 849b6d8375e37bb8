//! Data bursts, their text encoding, and deterministic synthetic corpora.

mod synth;
mod xyzm;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DdpError, Result};

pub use synth::{synthesize, CorpusShape, Injection, Profile};
pub use xyzm::{emit_xyzm, parse_xyzm, parse_xyzm_str};

/// Default time step when a file carries no `#dt` directive.
pub const DEFAULT_DT: f64 = 1.0;
/// Mass assumed when a subject has no `#mass` directive.
pub const DEFAULT_MASS_KG: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub values: Vec<f64>,
    pub time_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GroupLabel {
    Control,
    PostAclr,
    #[default]
    Unlabeled,
}

impl GroupLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupLabel::Control => "control",
            GroupLabel::PostAclr => "post_aclr",
            GroupLabel::Unlabeled => "unlabeled",
        }
    }
}

impl fmt::Display for GroupLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupLabel {
    type Err = DdpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "control" => Ok(GroupLabel::Control),
            "post_aclr" | "post-aclr" | "aclr" => Ok(GroupLabel::PostAclr),
            "unlabeled" | "" => Ok(GroupLabel::Unlabeled),
            other => Err(DdpError::InvalidData(format!("unknown group label {other:?}"))),
        }
    }
}

/// One frame of `N` observation points by `D` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataBurst {
    pub samples: Vec<Sample>,
    pub dt: f64,
    pub burst_index: u64,
    pub subject_id: String,
    pub group: GroupLabel,
}

impl DataBurst {
    /// Build a burst from row-major values with time indices `0..N`.
    pub fn from_rows(rows: Vec<Vec<f64>>, dt: f64, burst_index: u64, subject_id: impl Into<String>) -> Self {
        let samples = rows
            .into_iter()
            .enumerate()
            .map(|(i, values)| Sample {
                values,
                time_index: i as u64,
            })
            .collect();
        Self {
            samples,
            dt,
            burst_index,
            subject_id: subject_id.into(),
            group: GroupLabel::Unlabeled,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.samples.first().map_or(0, |s| s.values.len())
    }

    /// Values of one dimension across all points.
    pub fn column(&self, d: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.values[d]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 3 {
            return Err(DdpError::InvalidData(format!(
                "burst {} of {:?} has {} samples, need at least 3",
                self.burst_index,
                self.subject_id,
                self.samples.len()
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DdpError::InvalidData(format!("non-positive dt {}", self.dt)));
        }
        let d = self.dims();
        if d == 0 {
            return Err(DdpError::InvalidData("samples have no dimensions".into()));
        }
        for w in self.samples.windows(2) {
            if w[1].time_index <= w[0].time_index {
                return Err(DdpError::InvalidData(format!(
                    "time indices not strictly increasing in burst {}",
                    self.burst_index
                )));
            }
        }
        for s in &self.samples {
            if s.values.len() != d {
                return Err(DdpError::ShapeMismatch(format!(
                    "sample {} has {} dims, expected {d}",
                    s.time_index,
                    s.values.len()
                )));
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                return Err(DdpError::InvalidData(format!(
                    "non-finite value at sample {} of burst {}",
                    s.time_index, self.burst_index
                )));
            }
        }
        Ok(())
    }

    /// Divide each dimension by its in-burst maximum magnitude (dimensions
    /// that are identically zero are left alone). Returns the scaled burst
    /// and the per-dimension divisors.
    pub fn prescaled(&self) -> (DataBurst, Vec<f64>) {
        let dims = self.dims();
        let factors: Vec<f64> = (0..dims)
            .map(|d| {
                let max = self.samples.iter().map(|s| s.values[d].abs()).fold(0.0, f64::max);
                if max > 0.0 {
                    max
                } else {
                    1.0
                }
            })
            .collect();
        let mut out = self.clone();
        for s in &mut out.samples {
            for (v, f) in s.values.iter_mut().zip(&factors) {
                *v /= f;
            }
        }
        (out, factors)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubjectMeta {
    pub mass: Option<f64>,
    /// Centre-of-mass displacement per burst index, one entry per dimension.
    pub com_displacement: BTreeMap<u64, Vec<f64>>,
}

impl SubjectMeta {
    pub fn mass_or_default(&self) -> f64 {
        self.mass.unwrap_or(DEFAULT_MASS_KG)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub bursts: Vec<DataBurst>,
    pub metadata: BTreeMap<String, SubjectMeta>,
    /// Ground truth recorded by the synthesizer; empty for parsed files.
    #[serde(default)]
    pub injections: Vec<Injection>,
}

impl Dataset {
    /// Subjects in order of first appearance, each with its bursts in file order.
    pub fn subjects(&self) -> Vec<(&str, Vec<&DataBurst>)> {
        let mut order: Vec<(&str, Vec<&DataBurst>)> = Vec::new();
        for b in &self.bursts {
            match order.iter_mut().find(|(id, _)| *id == b.subject_id) {
                Some((_, v)) => v.push(b),
                None => order.push((b.subject_id.as_str(), vec![b])),
            }
        }
        order
    }

    pub fn validate(&self, dims: usize) -> Result<()> {
        for b in &self.bursts {
            b.validate()?;
            if b.dims() != dims {
                return Err(DdpError::ShapeMismatch(format!(
                    "burst {} of {:?} has {} dims, expected {dims}",
                    b.burst_index,
                    b.subject_id,
                    b.dims()
                )));
            }
        }
        for (id, bursts) in self.subjects() {
            if bursts.windows(2).any(|w| w[1].burst_index <= w[0].burst_index) {
                return Err(DdpError::InvalidData(format!(
                    "burst indices of {id:?} are not strictly increasing"
                )));
            }
        }
        for (id, meta) in &self.metadata {
            if let Some(m) = meta.mass {
                if !(m > 0.0 && m.is_finite()) {
                    return Err(DdpError::InvalidData(format!("mass of {id:?} must be positive")));
                }
            }
            if meta.com_displacement.values().any(|c| c.len() != dims) {
                return Err(DdpError::ShapeMismatch(format!(
                    "com displacement of {id:?} must have {dims} entries"
                )));
            }
        }
        Ok(())
    }

    /// Append another dataset, e.g. when reading a directory of files.
    pub fn extend(&mut self, other: Dataset) {
        self.bursts.extend(other.bursts);
        for (id, meta) in other.metadata {
            let entry = self.metadata.entry(id).or_default();
            if meta.mass.is_some() {
                entry.mass = meta.mass;
            }
            entry.com_displacement.extend(meta.com_displacement);
        }
        self.injections.extend(other.injections);
    }
}

/// `(burst[t - stride], burst[t])` for every valid `t`, in order.
///
/// A subject with `stride` or fewer bursts yields nothing.
pub fn frame_pairs<'a>(bursts: &[&'a DataBurst], stride: usize) -> Vec<(&'a DataBurst, &'a DataBurst)> {
    if stride == 0 || bursts.len() <= stride {
        return Vec::new();
    }
    (stride..bursts.len())
        .map(|t| (bursts[t - stride], bursts[t]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn burst(i: u64) -> DataBurst {
        DataBurst::from_rows(vec![vec![1.0], vec![2.0], vec![3.0]], 0.1, i, "s")
    }

    #[test]
    fn frame_pairs_by_stride() {
        let bs = [burst(0), burst(1), burst(2)];
        let refs: Vec<&DataBurst> = bs.iter().collect();
        let idx = |pairs: Vec<(&DataBurst, &DataBurst)>| {
            pairs
                .iter()
                .map(|(a, b)| (a.burst_index, b.burst_index))
                .collect::<Vec<_>>()
        };
        assert_eq!(idx(frame_pairs(&refs, 1)), vec![(0, 1), (1, 2)]);
        assert_eq!(idx(frame_pairs(&refs, 2)), vec![(0, 2)]);
        assert!(frame_pairs(&refs, 3).is_empty());
        assert!(frame_pairs(&refs[..1], 1).is_empty());
    }

    #[test]
    fn prescale_divides_by_max_magnitude() {
        let b = DataBurst::from_rows(vec![vec![2.0, 0.0], vec![-4.0, 0.0], vec![1.0, 0.0]], 1.0, 0, "s");
        let (p, f) = b.prescaled();
        assert_eq!(f, vec![4.0, 1.0]);
        assert_eq!(p.column(0), vec![0.5, -1.0, 0.25]);
        assert_eq!(p.column(1), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn validate_rejects_short_and_unordered() {
        let mut b = burst(0);
        b.samples.truncate(2);
        assert!(b.validate().is_err());
        let mut b = burst(0);
        b.samples[2].time_index = 1;
        assert!(b.validate().is_err());
        let mut b = burst(0);
        b.samples[1].values[0] = f64::NAN;
        assert!(b.validate().is_err());
    }

    #[test]
    fn group_labels_parse() {
        assert_eq!("control".parse::<GroupLabel>().unwrap(), GroupLabel::Control);
        assert_eq!("post_aclr".parse::<GroupLabel>().unwrap(), GroupLabel::PostAclr);
        assert!("other".parse::<GroupLabel>().is_err());
    }
}
