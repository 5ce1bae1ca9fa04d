//! Calibration report, metrics document and schedule log records.

use std::collections::BTreeMap;

use netcal_core::init::ScheduleEntry;
use netcal_core::metrics::Evaluation;
use netcal_core::pipeline::{Calibration, Snapshot};
use netcal_core::refine::RefineReport;
use serde::{Deserialize, Serialize};

use crate::format::{Matrix4Rows, ReferenceRecord, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub ae: f64,
    pub rrmse: f64,
    /// `null` when no corner is seen by two relationships.
    pub rae_median: Option<f64>,
    pub rae_count: usize,
}

impl From<&Snapshot> for StepMetrics {
    fn from(s: &Snapshot) -> Self {
        Self {
            ae: s.ae,
            rrmse: s.rrmse,
            rae_median: s.rae_median(),
            rae_count: s.rae_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSummary {
    pub steps: usize,
    pub seeded: usize,
    pub single_solves: usize,
    pub pair_solves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRecord {
    pub re_initial: f64,
    pub re_final: f64,
    pub rrmse_initial: f64,
    pub rrmse_final: f64,
    pub iterations: usize,
    pub termination: String,
}

impl From<&RefineReport> for RefinementRecord {
    fn from(r: &RefineReport) -> Self {
        Self {
            re_initial: r.re_initial,
            re_final: r.re_final,
            rrmse_initial: r.rrmse_initial,
            rrmse_final: r.rrmse_final,
            iterations: r.iterations,
            termination: r.termination.as_str().to_string(),
        }
    }
}

/// `report.json`. Wall-clock time lives in `timing.json` so that reports of
/// identical runs are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub schema_version: u32,
    pub reference: ReferenceRecord,
    pub components: usize,
    /// Index of the calibrated component when one was selected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
    pub relationships: usize,
    pub observations: usize,
    pub schedule: ScheduleSummary,
    pub step4: StepMetrics,
    pub step5: StepMetrics,
    pub refinement: RefinementRecord,
    /// Final poses keyed `C0`, `P1`, `T12`, ….
    pub poses: BTreeMap<String, Matrix4Rows>,
}

impl CalibrationReport {
    pub fn new(cal: &Calibration, component: Option<usize>) -> Self {
        let count = |kind| cal.schedule.iter().filter(|e| e.task_kind == kind).count();
        use netcal_core::init::TaskKind;
        Self {
            schema_version: SCHEMA_VERSION,
            reference: cal.reference.into(),
            components: cal.components,
            component,
            relationships: cal.frs.len(),
            observations: netcal_core::refine::observation_count(&cal.frs),
            schedule: ScheduleSummary {
                steps: cal.schedule.len(),
                seeded: cal
                    .schedule
                    .iter()
                    .filter(|e| e.task_kind == TaskKind::Seed)
                    .map(|e| e.variables.len())
                    .sum(),
                single_solves: count(TaskKind::Single),
                pair_solves: count(TaskKind::Pair),
            },
            step4: (&cal.initial).into(),
            step5: (&cal.refined).into(),
            refinement: (&cal.refinement).into(),
            poses: cal
                .refined
                .pool
                .values()
                .iter()
                .map(|(v, p)| (v.to_string(), p.to_rows()))
                .collect(),
        }
    }
}

/// One line of the `--log-init` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub iter: usize,
    pub task_kind: String,
    pub variables: Vec<String>,
    pub fr_count: usize,
    pub residual_fro: f64,
}

impl From<&ScheduleEntry> for ScheduleRecord {
    fn from(e: &ScheduleEntry) -> Self {
        Self {
            iter: e.iter,
            task_kind: e.task_kind.as_str().to_string(),
            variables: e.variables.iter().map(|v| v.to_string()).collect(),
            fr_count: e.fr_count,
            residual_fro: e.residual_fro,
        }
    }
}

pub fn schedule_jsonl(entries: &[ScheduleEntry]) -> String {
    entries
        .iter()
        .map(|e| serde_json::to_string(&ScheduleRecord::from(e)).expect("record serializes") + "\n")
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub pattern: u32,
    pub corner: u32,
    pub observations: usize,
    pub estimate: [f64; 3],
    pub squared_error: f64,
}

/// Output of `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub ae: f64,
    pub rrmse: f64,
    pub rae_median: f64,
    pub rae_count: usize,
    pub single_view_corners: usize,
    pub degenerate_corners: usize,
    pub per_point: Vec<PointRecord>,
}

impl From<&Evaluation> for MetricsReport {
    fn from(e: &Evaluation) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            ae: e.ae,
            rrmse: e.rrmse,
            rae_median: e.rae.median,
            rae_count: e.rae.points.len(),
            single_view_corners: e.rae.single_view,
            degenerate_corners: e.rae.degenerate,
            per_point: e
                .rae
                .points
                .iter()
                .map(|p| PointRecord {
                    pattern: p.pattern,
                    corner: p.corner,
                    observations: p.observations,
                    estimate: [p.estimate.x, p.estimate.y, p.estimate.z],
                    squared_error: p.squared_error,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub schema_version: u32,
    pub seconds: f64,
}
