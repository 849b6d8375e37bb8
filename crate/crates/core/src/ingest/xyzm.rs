//! Line-oriented `xyzm` text format.
//!
//! One sample per line as `D` whitespace-separated reals; every `N`
//! consecutive sample lines form one burst. Lines starting with `#` are
//! comments unless the first word is a directive:
//!
//! ```text
//! #subject <id>        subject of the following bursts
//! #group <label>       control | post_aclr | unlabeled
//! #mass <kg>           subject body mass
//! #dt <seconds>        time step of the following bursts
//! #burst <index>       index of the next burst (defaults to previous + 1)
//! #com <d1> .. <dD>    centre-of-mass displacement of the next burst
//! ```
//!
//! Directives may only appear between bursts.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{DataBurst, Dataset, GroupLabel, Sample, DEFAULT_DT};
use crate::config::PipelineConfig;
use crate::error::{DdpError, Result};

const DIRECTIVES: &[&str] = &["subject", "group", "mass", "dt", "burst", "com"];

struct State {
    burst_len: usize,
    subject: String,
    group: GroupLabel,
    dt: f64,
    next_burst: HashMap<String, u64>,
    explicit_burst: Option<u64>,
    pending_com: Option<Vec<f64>>,
    rows: Vec<Vec<f64>>,
}

pub fn parse_xyzm_str(text: &str, config: &PipelineConfig) -> Result<Dataset> {
    parse_xyzm(text.as_bytes(), config)
}

pub fn parse_xyzm<R: BufRead>(reader: R, config: &PipelineConfig) -> Result<Dataset> {
    let dims = config.dims;
    let n = config.burst_len;
    let mut ds = Dataset::default();
    let mut st = State {
        burst_len: n,
        subject: "subject".to_string(),
        group: GroupLabel::Unlabeled,
        dt: DEFAULT_DT,
        next_burst: HashMap::new(),
        explicit_burst: None,
        pending_com: None,
        rows: Vec::with_capacity(n),
    };
    let mut last_line = 0;

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = line.map_err(|e| DdpError::io("<xyzm stream>", e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            apply_directive(rest, lineno, dims, &mut st, &mut ds)?;
            continue;
        }

        let mut values = Vec::with_capacity(dims);
        for token in trimmed.split_whitespace() {
            let v: f64 = token.parse().map_err(|_| DdpError::Parse {
                line: lineno,
                token: token.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DdpError::NonFinite { line: lineno });
            }
            values.push(v);
        }
        if values.len() != dims {
            return Err(DdpError::SampleWidth {
                line: lineno,
                expected: dims,
                found: values.len(),
            });
        }
        st.rows.push(values);
        if st.rows.len() == n {
            finish_burst(&mut st, &mut ds);
        }
    }

    if !st.rows.is_empty() {
        return Err(DdpError::Truncated {
            line: last_line,
            have: st.rows.len(),
            expected: n,
        });
    }
    for id in ds.subjects().iter().map(|(id, _)| id.to_string()).collect::<Vec<_>>() {
        let meta = ds.metadata.entry(id.clone()).or_default();
        if meta.mass.is_none() {
            log::warn!("subject {id:?} has no #mass directive; assuming 1.0 kg");
        }
    }
    Ok(ds)
}

fn apply_directive(rest: &str, line: usize, dims: usize, st: &mut State, ds: &mut Dataset) -> Result<()> {
    let mut words = rest.split_whitespace();
    let Some(keyword) = words.next() else {
        return Ok(());
    };
    // "# free text" and unknown keywords are comments.
    if rest.starts_with(char::is_whitespace) || !DIRECTIVES.contains(&keyword) {
        return Ok(());
    }
    if !st.rows.is_empty() {
        return Err(DdpError::Truncated {
            line,
            have: st.rows.len(),
            expected: st.burst_len,
        });
    }
    let args: Vec<&str> = words.collect();
    let bad = |message: String| DdpError::Directive { line, message };
    let single = |args: &[&str]| -> Result<String> {
        match args {
            [one] => Ok(one.to_string()),
            _ => Err(bad(format!("#{keyword} takes exactly one argument"))),
        }
    };
    let real = |token: &str| -> Result<f64> {
        let v: f64 = token.parse().map_err(|_| DdpError::Parse {
            line,
            token: token.to_string(),
        })?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DdpError::NonFinite { line })
        }
    };

    match keyword {
        "subject" => st.subject = single(&args)?,
        "group" => st.group = single(&args)?.parse().map_err(|e: DdpError| bad(e.to_string()))?,
        "mass" => {
            let m = real(&single(&args)?)?;
            if m <= 0.0 {
                return Err(bad("mass must be positive".into()));
            }
            ds.metadata.entry(st.subject.clone()).or_default().mass = Some(m);
        }
        "dt" => {
            let dt = real(&single(&args)?)?;
            if dt <= 0.0 {
                return Err(bad("dt must be positive".into()));
            }
            st.dt = dt;
        }
        "burst" => {
            let idx = single(&args)?
                .parse::<u64>()
                .map_err(|_| bad("#burst takes a non-negative integer".into()))?;
            st.explicit_burst = Some(idx);
        }
        "com" => {
            if args.len() != dims {
                return Err(bad(format!("#com needs {dims} values, found {}", args.len())));
            }
            st.pending_com = Some(args.iter().map(|t| real(t)).collect::<Result<_>>()?);
        }
        _ => unreachable!(),
    }
    Ok(())
}

fn finish_burst(st: &mut State, ds: &mut Dataset) {
    let counter = st.next_burst.entry(st.subject.clone()).or_insert(0);
    let index = st.explicit_burst.take().unwrap_or(*counter);
    *counter = index + 1;

    let rows = std::mem::take(&mut st.rows);
    let samples = rows
        .into_iter()
        .enumerate()
        .map(|(t, values)| Sample {
            values,
            time_index: t as u64,
        })
        .collect();
    ds.bursts.push(DataBurst {
        samples,
        dt: st.dt,
        burst_index: index,
        subject_id: st.subject.clone(),
        group: st.group,
    });
    let meta = ds.metadata.entry(st.subject.clone()).or_default();
    if let Some(com) = st.pending_com.take() {
        meta.com_displacement.insert(index, com);
    }
}

/// Write a dataset in the same format `parse_xyzm` reads. Reals are printed
/// with the shortest representation that parses back to the same bits.
pub fn emit_xyzm<W: Write>(dataset: &Dataset, mut out: W) -> std::io::Result<()> {
    let mut text = String::new();
    for (id, bursts) in dataset.subjects() {
        let meta = dataset.metadata.get(id);
        let _ = writeln!(text, "#subject {id}");
        if let Some(group) = bursts.first().map(|b| b.group) {
            let _ = writeln!(text, "#group {group}");
        }
        if let Some(m) = meta.and_then(|m| m.mass) {
            let _ = writeln!(text, "#mass {m}");
        }
        let mut dt = None;
        for b in bursts {
            if dt != Some(b.dt) {
                let _ = writeln!(text, "#dt {}", b.dt);
                dt = Some(b.dt);
            }
            let _ = writeln!(text, "#burst {}", b.burst_index);
            if let Some(com) = meta.and_then(|m| m.com_displacement.get(&b.burst_index)) {
                let _ = writeln!(text, "#com {}", join(com));
            }
            for s in &b.samples {
                let _ = writeln!(text, "{}", join(&s.values));
            }
        }
        out.write_all(text.as_bytes())?;
        text.clear();
    }
    out.flush()
}

fn join(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v}");
    }
    s
}
