//! Joint refinement of all non-reference transforms by Levenberg-Marquardt
//! on the total reprojection error.
//!
//! Each corner of relationship `(c, p, t)` is predicted through the chain
//! `C·T⁻¹·P⁻¹` followed by the camera model. Every non-reference variable
//! owns a 6-parameter block `(ω, δt)` applied as `(exp(ω)·R, t + δt)`; the
//! blocks are re-centered on the current poses after each accepted step.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix2x3, SMatrix, Vector2, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::connectivity::VariableId;
use crate::dataset::{Dataset, FoundationalRelationship};
use crate::error::{Error, ObsKey, Result};
use crate::geometry::{skew, AxisAngleParam, Pose};
use crate::init::VariablePool;

pub type BlockJacobian = SMatrix<f64, 2, 6>;

/// One observed corner and its reprojection residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRecord {
    pub key: ObsKey,
    pub corner: u32,
    pub predicted: Vector2<f64>,
    pub observed: Vector2<f64>,
    pub residual: Vector2<f64>,
}

/// Residual of one corner and its Jacobians with respect to the camera,
/// pattern and time blocks (in that order).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerJacobian {
    pub residual: Vector2<f64>,
    pub blocks: [BlockJacobian; 3],
}

fn chain_poses(pool: &VariablePool, fr: &FoundationalRelationship) -> Result<(Pose, Pose, Pose)> {
    Ok((
        *pool.value(VariableId::camera(fr.camera))?,
        *pool.value(VariableId::pattern(fr.pattern))?,
        *pool.value(VariableId::time(fr.time))?,
    ))
}

fn context<'a>(
    data: &'a Dataset,
    fr: &FoundationalRelationship,
) -> Result<(&'a crate::geometry::CameraIntrinsics, &'a crate::dataset::PatternGeometry)> {
    let key = fr.key();
    let k = data.cameras.get(&fr.camera).ok_or_else(|| {
        Error::Validation(alloc::vec![crate::error::ValidationIssue::UnknownCamera { key }])
    })?;
    let g = data.patterns.get(&fr.pattern).ok_or_else(|| {
        Error::Validation(alloc::vec![crate::error::ValidationIssue::UnknownPattern { key }])
    })?;
    Ok((k, g))
}

/// Residual and analytic Jacobians for corner `corner` of `fr`.
pub fn corner_jacobian(
    pool: &VariablePool,
    data: &Dataset,
    fr: &FoundationalRelationship,
    corner: usize,
) -> Result<CornerJacobian> {
    let (k, geom) = context(data, fr)?;
    let (c, p, t) = chain_poses(pool, fr)?;
    let obs = fr.detection.corners[corner];
    let x = geom
        .corner_point(obs.index)
        .ok_or(Error::DegenerateConfiguration)?;
    corner_jacobian_raw(k, &c, &p, &t, &x, &obs.pixel).map_err(|_| Error::NonPositiveDepthAt {
        key: fr.key(),
        corner: obs.index,
    })
}

fn corner_jacobian_raw(
    k: &crate::geometry::CameraIntrinsics,
    c: &Pose,
    p: &Pose,
    t: &Pose,
    x: &Vector3<f64>,
    observed: &Vector2<f64>,
) -> Result<CornerJacobian> {
    let rpt = p.rotation().transpose();
    let rtt = t.rotation().transpose();
    let v = x - p.translation();
    let y = rpt * v;
    let u = y - t.translation();
    let z = rtt * u;
    let rcz = c.rotation() * z;
    let w = rcz + c.translation();
    let (pixel, jp) = k.project_camera_point(&w)?;

    let jc_rot = -(jp * skew(&rcz));
    let jz = jp * c.rotation();
    let jy = jz * rtt;
    let mut blocks = [BlockJacobian::zeros(); 3];
    blocks[0].fixed_view_mut::<2, 3>(0, 0).copy_from(&jc_rot);
    blocks[0].fixed_view_mut::<2, 3>(0, 3).copy_from(&jp);
    let jp_rot: Matrix2x3<f64> = jy * rpt * skew(&v);
    blocks[1].fixed_view_mut::<2, 3>(0, 0).copy_from(&jp_rot);
    blocks[1].fixed_view_mut::<2, 3>(0, 3).copy_from(&(-(jy * rpt)));
    blocks[2].fixed_view_mut::<2, 3>(0, 0).copy_from(&(jz * rtt * skew(&u)));
    blocks[2].fixed_view_mut::<2, 3>(0, 3).copy_from(&(-jy));
    Ok(CornerJacobian {
        residual: pixel - observed,
        blocks,
    })
}

/// Every `(relationship, corner)` residual, in relationship order.
pub fn residual_records(
    pool: &VariablePool,
    frs: &[FoundationalRelationship],
    data: &Dataset,
) -> Result<Vec<ResidualRecord>> {
    let mut out = Vec::new();
    for fr in frs {
        let (k, geom) = context(data, fr)?;
        let pose = pool.predicted_a(fr.camera, fr.pattern, fr.time)?;
        for obs in &fr.detection.corners {
            let x = geom
                .corner_point(obs.index)
                .ok_or(Error::DegenerateConfiguration)?;
            let predicted = crate::geometry::project_point(k, &pose, &x).map_err(|_| {
                Error::NonPositiveDepthAt {
                    key: fr.key(),
                    corner: obs.index,
                }
            })?;
            out.push(ResidualRecord {
                key: fr.key(),
                corner: obs.index,
                predicted,
                observed: obs.pixel,
                residual: predicted - obs.pixel,
            });
        }
    }
    Ok(out)
}

/// Total reprojection error `re` (px², summed over every observed corner).
pub fn total_reprojection_error(
    pool: &VariablePool,
    frs: &[FoundationalRelationship],
    data: &Dataset,
) -> Result<f64> {
    let mut re = 0.0;
    for fr in frs {
        let (k, geom) = context(data, fr)?;
        let (c, p, t) = chain_poses(pool, fr)?;
        for obs in &fr.detection.corners {
            let x = geom
                .corner_point(obs.index)
                .ok_or(Error::DegenerateConfiguration)?;
            let w = c.transform_point(&t.inverse().transform_point(&p.inverse().transform_point(&x)));
            let (pixel, _) = k.project_camera_point(&w).map_err(|_| Error::NonPositiveDepthAt {
                key: fr.key(),
                corner: obs.index,
            })?;
            re += (pixel - obs.pixel).norm_squared();
        }
    }
    Ok(re)
}

/// Number of observed corners `N`.
pub fn observation_count(frs: &[FoundationalRelationship]) -> usize {
    frs.iter().map(|f| f.detection.corners.len()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_iterations: usize,
    /// Stop when an accepted step lowers `re` by less than this fraction.
    pub relative_decrease_tol: f64,
    /// Stop when `‖Jᵀr‖∞` falls below this.
    pub gradient_tol: f64,
    /// Stop when the mean squared residual reaches this floor (px²); the
    /// remaining error is rounding noise.
    pub cost_floor: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            lambda0: 1e-4,
            lambda_up: 10.0,
            lambda_down: 10.0,
            max_iterations: 200,
            relative_decrease_tol: 1e-12,
            gradient_tol: 1e-12,
            cost_floor: 1e-24,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    RelativeDecrease,
    Gradient,
    MaxIterations,
    CostFloor,
    /// Damping grew so large that no step can be taken.
    DampingLimit,
    /// Nothing to optimize (only reference variables).
    NoParameters,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::RelativeDecrease => "relative_decrease",
            Termination::Gradient => "gradient",
            Termination::MaxIterations => "max_iterations",
            Termination::CostFloor => "cost_floor",
            Termination::DampingLimit => "damping_limit",
            Termination::NoParameters => "no_parameters",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineReport {
    pub re_initial: f64,
    pub re_final: f64,
    pub rrmse_initial: f64,
    pub rrmse_final: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// `re` after every accepted step, starting with `re_initial`.
    pub history: Vec<f64>,
}

/// Parameter layout: one 6-block per non-reference variable, in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBlocks {
    pub index: BTreeMap<VariableId, usize>,
}

impl ParameterBlocks {
    pub fn new(pool: &VariablePool) -> Self {
        let index = pool
            .variables()
            .filter(|v| !pool.is_reference(*v))
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        Self { index }
    }

    pub fn len(&self) -> usize {
        6 * self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Applies a stacked increment to every non-reference block.
    pub fn apply(&self, pool: &VariablePool, delta: &DVector<f64>) -> Result<VariablePool> {
        let mut out = pool.clone();
        for (&v, &b) in &self.index {
            let d = AxisAngleParam::from_slice(&delta.as_slice()[6 * b..6 * b + 6]);
            let updated = pool.value(v)?.perturb(&d).renormalized();
            out.set(v, updated);
        }
        Ok(out)
    }
}

struct Normal {
    jtj: DMatrix<f64>,
    jtr: DVector<f64>,
    cost: f64,
}

fn normal_equations(
    pool: &VariablePool,
    frs: &[FoundationalRelationship],
    data: &Dataset,
    blocks: &ParameterBlocks,
) -> Result<Normal> {
    let n = blocks.len();
    let mut jtj = DMatrix::<f64>::zeros(n, n);
    let mut jtr = DVector::<f64>::zeros(n);
    let mut cost = 0.0;
    for fr in frs {
        let (k, geom) = context(data, fr)?;
        let (c, p, t) = chain_poses(pool, fr)?;
        let ids = [
            blocks.index.get(&VariableId::camera(fr.camera)).copied(),
            blocks.index.get(&VariableId::pattern(fr.pattern)).copied(),
            blocks.index.get(&VariableId::time(fr.time)).copied(),
        ];
        for obs in &fr.detection.corners {
            let x = geom
                .corner_point(obs.index)
                .ok_or(Error::DegenerateConfiguration)?;
            let cj = corner_jacobian_raw(k, &c, &p, &t, &x, &obs.pixel).map_err(|_| {
                Error::NonPositiveDepthAt {
                    key: fr.key(),
                    corner: obs.index,
                }
            })?;
            cost += cj.residual.norm_squared();
            for (a, ia) in ids.iter().enumerate() {
                let Some(ia) = ia else { continue };
                let ja = &cj.blocks[a];
                let g = ja.transpose() * cj.residual;
                let mut seg = jtr.fixed_rows_mut::<6>(6 * ia);
                seg += g;
                for (b, ib) in ids.iter().enumerate() {
                    let Some(ib) = ib else { continue };
                    let h = ja.transpose() * cj.blocks[b];
                    let mut blk = jtj.fixed_view_mut::<6, 6>(6 * ia, 6 * ib);
                    blk += h;
                }
            }
        }
    }
    if !cost.is_finite() || jtj.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(format!(
            "non-finite residual or Jacobian (re = {cost})"
        )));
    }
    Ok(Normal { jtj, jtr, cost })
}

/// Refines every non-reference transform. Reference entries never move.
pub fn refine(
    pool: &VariablePool,
    frs: &[FoundationalRelationship],
    data: &Dataset,
    cfg: &RefineConfig,
) -> Result<(VariablePool, RefineReport)> {
    let n_obs = observation_count(frs).max(1) as f64;
    let blocks = ParameterBlocks::new(pool);
    let mut current = pool.clone();
    let mut normal = normal_equations(&current, frs, data, &blocks)?;
    let re_initial = normal.cost;
    let mut lambda = cfg.lambda0;
    let mut iterations = 0;
    let mut history = alloc::vec![re_initial];

    let termination = loop {
        if blocks.is_empty() {
            break Termination::NoParameters;
        }
        if normal.cost / n_obs <= cfg.cost_floor {
            break Termination::CostFloor;
        }
        if normal.jtr.amax() < cfg.gradient_tol {
            break Termination::Gradient;
        }
        if iterations >= cfg.max_iterations {
            break Termination::MaxIterations;
        }
        if lambda > 1e32 {
            break Termination::DampingLimit;
        }
        iterations += 1;

        let mut damped = normal.jtj.clone();
        let max_diag = (0..damped.nrows()).map(|i| damped[(i, i)]).fold(0.0, f64::max);
        let floor = 1e-12 * max_diag.max(1e-12);
        for i in 0..damped.nrows() {
            let d = normal.jtj[(i, i)].max(floor);
            damped[(i, i)] += lambda * d;
        }
        let Some(chol) = damped.cholesky() else {
            lambda *= cfg.lambda_up;
            continue;
        };
        let step = -chol.solve(&normal.jtr);
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite step at iteration {iterations}"
            )));
        }
        let candidate = blocks.apply(&current, &step)?;
        match normal_equations(&candidate, frs, data, &blocks) {
            Ok(next) if next.cost.is_finite() && next.cost < normal.cost => {
                let rel = (normal.cost - next.cost) / normal.cost;
                current = candidate;
                normal = next;
                history.push(normal.cost);
                lambda = (lambda / cfg.lambda_down).max(1e-15);
                if rel < cfg.relative_decrease_tol {
                    break Termination::RelativeDecrease;
                }
            }
            _ => lambda *= cfg.lambda_up,
        }
    };

    let re_final = normal.cost;
    Ok((
        current,
        RefineReport {
            re_initial,
            re_final,
            rrmse_initial: (re_initial / n_obs).sqrt(),
            rrmse_final: (re_final / n_obs).sqrt(),
            iterations,
            termination,
            history,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn termination_names_are_distinct() {
        let all = [
            Termination::RelativeDecrease,
            Termination::Gradient,
            Termination::MaxIterations,
            Termination::CostFloor,
            Termination::DampingLimit,
            Termination::NoParameters,
        ];
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                assert_ne!(a.as_str(), b.as_str());
            }
        }
    }
}
