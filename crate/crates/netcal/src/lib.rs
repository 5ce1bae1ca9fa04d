//! File formats, PLY export and command-line plumbing around `netcal-core`.
//!
//! The core crate is `no_std` and single-threaded; this crate adds JSON
//! documents, parallel relationship construction and the `netcal` binary.

pub mod config;
pub mod error;
pub mod format;
pub mod ply;
pub mod report;

use std::collections::BTreeMap;

use netcal_core::connectivity::{build_interaction_graph, connected_components, select_reference, Components};
use netcal_core::dataset::{fr_from_detection, sort_frs, Dataset, FoundationalRelationship};
use netcal_core::metrics::{evaluate, virtual_cameras, Evaluation};
use netcal_core::pipeline::{calibrate_frs, Calibration, PipelineConfig};
use netcal_core::{Error, VariableId, VariableKind, VariablePool};
use rayon::prelude::*;

pub use error::{FormatError, Result};

/// Process exit status for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Disconnected { .. } => 2,
        Error::Stuck { .. } => 3,
        Error::NumericalFailure(_) | Error::NonPositiveDepthAt { .. } | Error::DegenerateMatrix => 4,
        _ => 1,
    }
}

/// Validated relationships, estimated in parallel and returned in the
/// canonical `(time, camera, pattern)` order.
pub fn relationships(data: &Dataset, cfg: &PipelineConfig) -> std::result::Result<Vec<FoundationalRelationship>, Error> {
    data.validate()?;
    let mut frs = data
        .detections
        .par_iter()
        .map(|det| fr_from_detection(data, det, cfg.sanity_gate_px))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if frs.is_empty() {
        return Err(Error::EmptyInput);
    }
    sort_frs(&mut frs);
    Ok(frs)
}

pub fn components(frs: &[FoundationalRelationship]) -> std::result::Result<Components, Error> {
    Ok(connected_components(&build_interaction_graph(frs)?))
}

/// Relationships of component `k`, or all of them.
pub fn select_component(
    frs: Vec<FoundationalRelationship>,
    component: Option<usize>,
) -> std::result::Result<Vec<FoundationalRelationship>, Error> {
    let Some(k) = component else { return Ok(frs) };
    let comps = components(&frs)?;
    if k >= comps.count {
        return Err(Error::InvalidConfig(format!(
            "component {k} out of range ({} components)",
            comps.count
        )));
    }
    Ok(frs
        .into_iter()
        .filter(|f| comps.labels[&VariableId::camera(f.camera)] == k)
        .collect())
}

pub fn calibrate(data: &Dataset, component: Option<usize>, cfg: &PipelineConfig) -> std::result::Result<Calibration, Error> {
    let frs = select_component(relationships(data, cfg)?, component)?;
    calibrate_frs(frs, data, cfg)
}

/// Metrics of an existing solution against a dataset, without solving.
/// Every variable the dataset touches must be present in the solution.
pub fn evaluate_solution(
    solution: &format::PosesFile,
    data: &Dataset,
    cfg: &PipelineConfig,
) -> Result<Evaluation> {
    let frs = relationships(data, cfg)?;
    let pool = solution.to_pool(select_reference(&frs)?)?;
    check_coverage(&pool, &frs)?;
    Ok(evaluate(&pool, &frs, data)?)
}

fn check_coverage(pool: &VariablePool, frs: &[FoundationalRelationship]) -> std::result::Result<(), Error> {
    for f in frs {
        for v in netcal_core::connectivity::fr_variables(f) {
            if pool.get(v).is_none() {
                return Err(Error::MismatchedIds(v));
            }
        }
    }
    Ok(())
}

/// PLY mesh of a solution. With `virtual_track` the single camera is drawn
/// once per time as `C·T⁻¹`.
pub fn solution_mesh(solution: &format::PosesFile, virtual_track: bool, opts: &ply::PlyOptions) -> Result<ply::Mesh> {
    let truth = solution.to_truth()?;
    let geometry = solution.pattern_geometries();
    let cameras = if virtual_track {
        let reference = solution.reference.map(Into::into).unwrap_or(netcal_core::Reference { pattern: 0, time: 0 });
        let pool = solution.to_pool(reference)?;
        virtual_cameras(&pool)?.into_iter().collect::<BTreeMap<_, _>>()
    } else {
        truth.cameras
    };
    Ok(ply::scene_mesh(&cameras, &truth.patterns, &geometry, opts))
}

/// Variables of each component, for error listings.
pub fn component_listing(c: &Components) -> Vec<Vec<VariableId>> {
    (0..c.count).map(|k| c.members(k)).collect()
}

pub fn count_kind(vars: &[VariableId], kind: VariableKind) -> usize {
    vars.iter().filter(|v| v.kind == kind).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use netcal_core::sim::{preset_scene, Preset};

    #[test]
    fn parallel_relationships_match_sequential() {
        let s = preset_scene(Preset::Net1, 0.5, None, 3).unwrap();
        let cfg = PipelineConfig::default();
        assert_eq!(relationships(&s.dataset, &cfg).unwrap(), netcal_core::pipeline::relationships(&s.dataset, &cfg).unwrap());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Disconnected { count: 2 }), 2);
        assert_eq!(exit_code(&Error::Stuck { remaining: 1, uninitialized: vec![] }), 3);
        assert_eq!(exit_code(&Error::NumericalFailure("x".into())), 4);
        assert_eq!(exit_code(&Error::EmptyInput), 1);
    }

    #[test]
    fn missing_variable_is_mismatched() {
        let s = preset_scene(Preset::Mult1, 0.0, None, 0).unwrap();
        let mut truth = s.truth.clone();
        truth.cameras.remove(&1);
        let file = format::PosesFile::from_truth(&truth, &s.dataset.patterns);
        let err = evaluate_solution(&file, &s.dataset, &PipelineConfig::default()).unwrap_err();
        assert!(matches!(err, FormatError::Calibration(Error::MismatchedIds(v)) if v == VariableId::camera(1)));
    }
}
