use serde::{Deserialize, Serialize};

use crate::error::{DdpError, Result};

/// Tunables shared by every stage of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Dimensions per sample.
    pub dims: usize,
    /// Samples per data burst.
    pub burst_len: usize,
    /// Frame-pair stride in bursts.
    pub stride: usize,
    pub aggregation_factor: usize,
    /// Fractional single-step drop in residual curvature that arms the GTI.
    pub drop_threshold: f64,
    /// Group-level "excessive" residual curvature is this multiple of the pooled median.
    pub rc_threshold_multiplier: f64,
    pub bin_edges: Vec<f64>,
    pub epsilon_denominator: f64,
    pub refinement_max_iter: usize,
    pub refinement_tol: f64,
    pub seed: u64,
}

/// Point count of the coarsest zoom level.
pub const FINAL_LEVEL_POINTS: usize = 9;

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dims: 4,
            burst_len: 81,
            stride: 1,
            aggregation_factor: 3,
            drop_threshold: 0.8,
            rc_threshold_multiplier: 10.0,
            bin_edges: vec![0.3, 1.5, 3.0],
            epsilon_denominator: 1e-9,
            refinement_max_iter: 100,
            refinement_tol: 1e-10,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(DdpError::Config(msg));
        if self.dims == 0 {
            return fail("dims must be positive".into());
        }
        if self.dims > 16 {
            return fail(format!("dims = {} exceeds the supported maximum of 16", self.dims));
        }
        if self.stride == 0 {
            return fail("stride must be positive".into());
        }
        if self.aggregation_factor < 2 {
            return fail("aggregation_factor must be at least 2".into());
        }
        if self.level_sizes().is_none() {
            return fail(format!(
                "burst_len {} is not aggregation_factor^k x {} (factor {})",
                self.burst_len, FINAL_LEVEL_POINTS, self.aggregation_factor
            ));
        }
        if !(self.drop_threshold > 0.0 && self.drop_threshold < 1.0) {
            return fail("drop_threshold must lie in (0, 1)".into());
        }
        if !(self.rc_threshold_multiplier > 0.0 && self.rc_threshold_multiplier.is_finite()) {
            return fail("rc_threshold_multiplier must be positive".into());
        }
        if self.bin_edges.iter().any(|e| !e.is_finite()) || self.bin_edges.windows(2).any(|w| w[0] >= w[1]) {
            return fail("bin_edges must be finite and strictly ascending".into());
        }
        if self.epsilon_denominator.is_nan() || self.epsilon_denominator <= 0.0 {
            return fail("epsilon_denominator must be positive".into());
        }
        if self.refinement_max_iter == 0 || self.refinement_tol.is_nan() || self.refinement_tol <= 0.0 {
            return fail("refinement_max_iter and refinement_tol must be positive".into());
        }
        Ok(())
    }

    /// Point counts of the zoom-out ladder from finest to coarsest, or `None`
    /// when `burst_len` does not reduce to exactly nine points.
    pub fn level_sizes(&self) -> Option<Vec<usize>> {
        if self.aggregation_factor < 2 || self.burst_len < FINAL_LEVEL_POINTS {
            return None;
        }
        let mut sizes = vec![self.burst_len];
        let mut n = self.burst_len;
        while n > FINAL_LEVEL_POINTS {
            if !n.is_multiple_of(self.aggregation_factor) {
                return None;
            }
            n /= self.aggregation_factor;
            sizes.push(n);
        }
        (n == FINAL_LEVEL_POINTS).then_some(sizes)
    }

    /// Number of length-scale root vectors per point, `2^dims`.
    pub fn root_count(&self) -> usize {
        1usize << self.dims
    }
}
