//! Solver overrides read from `--config <json>`.

use std::path::Path;

use netcal_core::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::error::{FormatError, Result};
use crate::format::read_json;

/// Every field is optional; absent fields keep their defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub lambda0: Option<f64>,
    pub max_iterations: Option<usize>,
    pub sanity_gate_px: Option<f64>,
    pub rotation_diversity: Option<f64>,
}

impl SolverOverrides {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn apply(&self, mut cfg: PipelineConfig) -> Result<PipelineConfig> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(FormatError::Schema(format!("{name} must be positive, got {v}")))
            }
        };
        if let Some(v) = self.lambda0 {
            cfg.refine.lambda0 = positive("lambda0", v)?;
        }
        if let Some(v) = self.max_iterations {
            cfg.refine.max_iterations = v;
        }
        if let Some(v) = self.sanity_gate_px {
            cfg.sanity_gate_px = positive("sanity_gate_px", v)?;
        }
        if let Some(v) = self.rotation_diversity {
            cfg.init.rotation_diversity = positive("rotation_diversity", v)?;
        }
        Ok(cfg)
    }
}
