//! Borda counts, objective ranks and their change between frames.

use serde::{Deserialize, Serialize};

use crate::error::{DdpError, Result};
use crate::normalization::NormalizedField;

/// Per-dimension Borda counts `h[d][A]` and objective ranks `r[d][A]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BordaState {
    pub h: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub frame_ref: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaBorda {
    pub dh: Vec<Vec<f64>>,
    /// `stride * dt` seconds between the two frames.
    pub dt_span: f64,
}

/// Neumaier-compensated sum; keeps row sums of large opposing margins exact
/// to about one ulp so the zero-sum property survives.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// `H_d[A] = sum over B of a_d[A][B]`.
pub fn borda_counts(field: &NormalizedField) -> Vec<Vec<f64>> {
    (0..field.dims())
        .map(|d| (0..field.points()).map(|a| compensated_sum(field.row(d, a))).collect())
        .collect()
}

/// Ascending fractional ranks in `[1, N]`; tied values share the mean of
/// the positions they occupy.
pub fn objective_ranks(h: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..h.len()).collect();
    order.sort_by(|&i, &j| h[i].total_cmp(&h[j]));
    let mut ranks = vec![0.0; h.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && h[order[end]] == h[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end, averaged
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

pub fn borda_state(field: &NormalizedField, frame_ref: u64) -> BordaState {
    let h = borda_counts(field);
    let r = h.iter().map(|hd| objective_ranks(hd)).collect();
    BordaState { h, r, frame_ref }
}

/// `dH = H(t) - H(t - n)`, points matched by position.
pub fn delta_borda(current: &BordaState, previous: &BordaState, dt_span: f64) -> Result<DeltaBorda> {
    let same_shape =
        current.h.len() == previous.h.len() && current.h.iter().zip(&previous.h).all(|(a, b)| a.len() == b.len());
    if !same_shape {
        return Err(DdpError::ShapeMismatch(format!(
            "Borda states of frames {} and {} differ in shape",
            previous.frame_ref, current.frame_ref
        )));
    }
    let dh = current
        .h
        .iter()
        .zip(&previous.h)
        .map(|(c, p)| c.iter().zip(p).map(|(x, y)| x - y).collect())
        .collect();
    Ok(DeltaBorda { dh, dt_span })
}
