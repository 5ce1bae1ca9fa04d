//! End-to-end calibration: relationships, connectivity gate, reference
//! selection, closed-form initialization and refinement, with metric
//! snapshots after initialization and after refinement.

use alloc::vec::Vec;

use crate::connectivity::{
    build_interaction_graph, connected_components, partition_by_component, select_reference,
    InteractionGraph, Reference,
};
use crate::dataset::{build_frs, Dataset, FoundationalRelationship, DEFAULT_SANITY_GATE_PX};
use crate::error::{Error, Result};
use crate::init::{run_initialization, InitConfig, ScheduleEntry, VariablePool};
use crate::metrics::{evaluate, Evaluation};
use crate::refine::{refine, RefineConfig, RefineReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub sanity_gate_px: f64,
    pub init: InitConfig,
    pub refine: RefineConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sanity_gate_px: DEFAULT_SANITY_GATE_PX,
            init: InitConfig::default(),
            refine: RefineConfig::default(),
        }
    }
}

/// Metrics of a snapshot. `rae` is absent when no corner is seen by two
/// relationships.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub pool: VariablePool,
    pub ae: f64,
    pub rrmse: f64,
    pub evaluation: Option<Evaluation>,
}

impl Snapshot {
    fn new(pool: VariablePool, frs: &[FoundationalRelationship], data: &Dataset) -> Result<Self> {
        let ae = crate::metrics::algebraic_error(&pool, frs)?;
        let rrmse = crate::metrics::rrmse(&pool, frs, data)?;
        let evaluation = match evaluate(&pool, frs, data) {
            Ok(e) => Some(e),
            Err(Error::NoTriangulatablePoints) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            pool,
            ae,
            rrmse,
            evaluation,
        })
    }

    pub fn rae_median(&self) -> Option<f64> {
        self.evaluation.as_ref().map(|e| e.rae.median)
    }

    pub fn rae_count(&self) -> usize {
        self.evaluation.as_ref().map_or(0, |e| e.rae.points.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub reference: Reference,
    pub components: usize,
    pub graph: InteractionGraph,
    pub frs: Vec<FoundationalRelationship>,
    pub schedule: Vec<ScheduleEntry>,
    /// After closed-form initialization.
    pub initial: Snapshot,
    /// After refinement.
    pub refined: Snapshot,
    pub refinement: RefineReport,
}

impl Calibration {
    pub fn pair_solves(&self) -> usize {
        self.schedule
            .iter()
            .filter(|e| e.task_kind == crate::init::TaskKind::Pair)
            .count()
    }
}

/// Validates the dataset and builds its relationships.
pub fn relationships(data: &Dataset, cfg: &PipelineConfig) -> Result<Vec<FoundationalRelationship>> {
    data.validate()?;
    let frs = build_frs(data, cfg.sanity_gate_px)?;
    if frs.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(frs)
}

/// Calibrates a dataset whose interaction graph must be connected.
pub fn calibrate(data: &Dataset, cfg: &PipelineConfig) -> Result<Calibration> {
    let frs = relationships(data, cfg)?;
    calibrate_frs(frs, data, cfg)
}

/// Calibrates connected component `component` (in label order) only.
pub fn calibrate_component(data: &Dataset, component: usize, cfg: &PipelineConfig) -> Result<Calibration> {
    let frs = relationships(data, cfg)?;
    let mut parts = partition_by_component(&frs)?;
    if component >= parts.len() {
        return Err(Error::InvalidConfig(alloc::format!(
            "component {component} out of range ({} components)",
            parts.len()
        )));
    }
    calibrate_frs(parts.swap_remove(component), data, cfg)
}

/// Steps after relationship construction.
pub fn calibrate_frs(
    frs: Vec<FoundationalRelationship>,
    data: &Dataset,
    cfg: &PipelineConfig,
) -> Result<Calibration> {
    let graph = build_interaction_graph(&frs)?;
    let components = connected_components(&graph);
    if !components.is_calibratable() {
        return Err(Error::Disconnected {
            count: components.count,
        });
    }
    let reference = select_reference(&frs)?;
    let init = run_initialization(&frs, reference, &cfg.init)?;
    let initial = Snapshot::new(init.pool, &frs, data)?;
    let (pool, refinement) = refine(&initial.pool, &frs, data, &cfg.refine)?;
    let refined = Snapshot::new(pool, &frs, data)?;
    Ok(Calibration {
        reference,
        components: components.count,
        graph,
        frs,
        schedule: init.log,
        initial,
        refined,
        refinement,
    })
}
