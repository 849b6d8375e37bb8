//! Flat CSV tables of intermediate state, for debugging and plotting.
//!
//! `borda`, `roots` and `pdi` need the per-level state, so the analysis
//! must have been run with [`AnalyzeOptions::keep_levels`](crate::AnalyzeOptions).

use std::io::Write;
use std::str::FromStr;

use crate::error::{DdpError, Result};
use crate::lengthscale::Convergence;
use crate::pipeline::{DatasetAnalysis, SubjectAnalysis};
use crate::zoomout::LevelAnalysis;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpKind {
    /// `H`, `R` and `dH` per point and dimension.
    Borda,
    /// Every root branch per point with its curvature.
    Roots,
    /// Point categories and threshold violations.
    Pdi,
    /// Per-level curvature and threshold medians with the critical lengths.
    Zoom,
}

impl DumpKind {
    pub fn needs_levels(self) -> bool {
        !matches!(self, DumpKind::Zoom)
    }
}

impl FromStr for DumpKind {
    type Err = DdpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "borda" => Ok(DumpKind::Borda),
            "roots" => Ok(DumpKind::Roots),
            "pdi" => Ok(DumpKind::Pdi),
            "zoom" => Ok(DumpKind::Zoom),
            other => Err(DdpError::Config(format!("unknown dump table `{other}`"))),
        }
    }
}

pub fn write_dump<W: Write>(kind: DumpKind, analysis: &DatasetAnalysis, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: &[&str] = match kind {
        DumpKind::Borda => &[
            "subject",
            "previous_burst",
            "burst",
            "level_points",
            "point",
            "dimension",
            "h",
            "r",
            "dh",
        ],
        DumpKind::Roots => &[
            "subject",
            "previous_burst",
            "burst",
            "level_points",
            "point",
            "root",
            "dimension",
            "x",
            "kappa",
            "sentinel",
            "negative_ratio",
            "convergence",
        ],
        DumpKind::Pdi => &[
            "subject",
            "previous_burst",
            "burst",
            "level_points",
            "point",
            "category",
            "short_unstable",
            "long_unstable",
            "mode_mixity_controllable",
            "mixed_short_long",
        ],
        DumpKind::Zoom => &[
            "subject",
            "previous_burst",
            "burst",
            "level_points",
            "x",
            "ln_x",
            "kappa",
            "inv_ltilde",
            "inv_l",
            "critical_short",
            "critical_long",
        ],
    };
    w.write_record(header).map_err(csv_err)?;
    for subject in &analysis.subjects {
        if kind.needs_levels() && subject.levels.len() != subject.frames.len() {
            return Err(DdpError::Config(
                "per-level state was not kept; rerun with keep_levels".into(),
            ));
        }
        for (i, frame) in subject.frames.iter().enumerate() {
            let key = [
                subject.subject_id.clone(),
                frame.previous_burst.to_string(),
                frame.burst.to_string(),
            ];
            match kind {
                DumpKind::Zoom => {
                    for level in &frame.zoom.levels {
                        let mut rec = key.to_vec();
                        rec.extend([
                            level.point_count.to_string(),
                            level.x.to_string(),
                            level.x.ln().to_string(),
                            opt(level.kappa),
                            opt(level.inv_ltilde),
                            opt(level.inv_l),
                            frame.critical.short.to_string(),
                            frame.critical.long.to_string(),
                        ]);
                        w.write_record(&rec).map_err(csv_err)?;
                    }
                }
                _ => {
                    for level in &subject.levels[i] {
                        write_level(&mut w, kind, &key, level)?;
                    }
                }
            }
        }
    }
    w.flush().map_err(|e| DdpError::io("<dump>", e))
}

fn write_level<W: Write>(
    w: &mut csv::Writer<W>,
    kind: DumpKind,
    key: &[String; 3],
    level: &LevelAnalysis,
) -> Result<()> {
    let dims = level.borda.h.len();
    let base = |point: usize| {
        let mut rec = key.to_vec();
        rec.push(level.points.to_string());
        rec.push(point.to_string());
        rec
    };
    for a in 0..level.points {
        match kind {
            DumpKind::Borda => {
                for d in 0..dims {
                    let mut rec = base(a);
                    rec.extend([
                        d.to_string(),
                        level.borda.h[d][a].to_string(),
                        level.borda.r[d][a].to_string(),
                        level.delta.dh[d][a].to_string(),
                    ]);
                    w.write_record(&rec).map_err(csv_err)?;
                }
            }
            DumpKind::Roots => {
                for (k, root) in level.roots.points[a].iter().enumerate() {
                    for d in 0..dims {
                        let mut rec = base(a);
                        rec.extend([
                            k.to_string(),
                            d.to_string(),
                            root.x[d].to_string(),
                            level.kappa[a][d][k].to_string(),
                            root.flags[d].infinite_sentinel.to_string(),
                            root.flags[d].negative_ratio.to_string(),
                            convergence_name(root.convergence).to_string(),
                        ]);
                        w.write_record(&rec).map_err(csv_err)?;
                    }
                }
            }
            DumpKind::Pdi => {
                let p = &level.pdi[a];
                let mut rec = base(a);
                rec.extend([
                    p.category.to_string(),
                    dim_list(&p.short_unstable),
                    dim_list(&p.long_unstable),
                    p.mode_mixity_controllable.to_string(),
                    p.mixed_short_long.to_string(),
                ]);
                w.write_record(&rec).map_err(csv_err)?;
            }
            DumpKind::Zoom => unreachable!("zoom rows come from the frame profile"),
        }
    }
    Ok(())
}

/// Rows a dump of `kind` will hold for one subject, excluding the header.
pub fn dump_rows(kind: DumpKind, subject: &SubjectAnalysis) -> usize {
    match kind {
        DumpKind::Zoom => subject.frames.iter().map(|f| f.zoom.levels.len()).sum(),
        _ => subject
            .levels
            .iter()
            .flatten()
            .map(|l| {
                let dims = l.borda.h.len();
                match kind {
                    DumpKind::Borda => l.points * dims,
                    DumpKind::Roots => l.roots.points.iter().map(|p| p.len() * dims).sum(),
                    _ => l.points,
                }
            })
            .sum(),
    }
}

fn convergence_name(c: Convergence) -> &'static str {
    match c {
        Convergence::ClosedForm => "closed_form",
        Convergence::Refined => "refined",
        Convergence::Fallback => "fallback",
    }
}

/// Unstable dimensions as `0;2`.
fn dim_list(flags: &[bool]) -> String {
    flags
        .iter()
        .enumerate()
        .filter(|(_, f)| **f)
        .map(|(d, _)| d.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> DdpError {
    DdpError::Serialize(e.to_string())
}
