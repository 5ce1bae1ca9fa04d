//! Closed-form initialization of every unknown transform.
//!
//! After the reference pair is substituted, relationships with a single
//! unknown are solved first (`X·𝒜 = ℬ`), then pairs of unknowns through the
//! robot-world hand-eye form `𝒜·X = Z·ℬ`. Each step picks the variable (or
//! pair) supported by the most relationships; ties go to kind order
//! camera, pattern, time and then to the smallest index.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::connectivity::{fr_variables, Reference, VariableId, VariableKind};
use crate::dataset::FoundationalRelationship;
use crate::error::{Error, Result};
use crate::geometry::{rotation_angle, so3_project, Pose};

/// Unknown transforms and their current values.
#[derive(Debug, Clone, PartialEq)]
pub struct VariablePool {
    variables: BTreeSet<VariableId>,
    values: BTreeMap<VariableId, Pose>,
    reference: Reference,
}

impl VariablePool {
    /// Pool over every variable referenced by `frs`, with only the reference
    /// pair initialized (to identity).
    pub fn new(frs: &[FoundationalRelationship], reference: Reference) -> Self {
        let mut variables: BTreeSet<VariableId> = frs.iter().flat_map(fr_variables).collect();
        let p = VariableId::pattern(reference.pattern);
        let t = VariableId::time(reference.time);
        variables.insert(p);
        variables.insert(t);
        let values = BTreeMap::from([(p, Pose::identity()), (t, Pose::identity())]);
        Self {
            variables,
            values,
            reference,
        }
    }

    /// Fully specified pool, e.g. a solution read from disk.
    pub fn from_values(values: BTreeMap<VariableId, Pose>, reference: Reference) -> Self {
        Self {
            variables: values.keys().copied().collect(),
            values,
            reference,
        }
    }

    pub fn reference(&self) -> Reference {
        self.reference
    }

    pub fn is_reference(&self, v: VariableId) -> bool {
        v == VariableId::pattern(self.reference.pattern) || v == VariableId::time(self.reference.time)
    }

    pub fn variables(&self) -> impl Iterator<Item = VariableId> + '_ {
        self.variables.iter().copied()
    }

    pub fn values(&self) -> &BTreeMap<VariableId, Pose> {
        &self.values
    }

    pub fn get(&self, v: VariableId) -> Option<&Pose> {
        self.values.get(&v)
    }

    pub fn value(&self, v: VariableId) -> Result<&Pose> {
        self.values.get(&v).ok_or(Error::Uninitialized(v))
    }

    pub fn is_initialized(&self, v: VariableId) -> bool {
        self.values.contains_key(&v)
    }

    pub fn uninitialized(&self) -> Vec<VariableId> {
        self.variables
            .iter()
            .filter(|v| !self.values.contains_key(v))
            .copied()
            .collect()
    }

    pub fn initialized(&self) -> Vec<VariableId> {
        self.values.keys().copied().collect()
    }

    pub fn is_complete(&self) -> bool {
        self.values.len() == self.variables.len()
    }

    /// Sets a non-reference variable. Reference entries stay identity.
    pub(crate) fn set(&mut self, v: VariableId, pose: Pose) {
        if self.is_reference(v) {
            return;
        }
        self.variables.insert(v);
        self.values.insert(v, pose);
    }

    pub fn cameras(&self) -> impl Iterator<Item = (u32, &Pose)> + '_ {
        self.values
            .iter()
            .filter(|(v, _)| v.kind == VariableKind::Camera)
            .map(|(v, p)| (v.index, p))
    }

    pub fn times(&self) -> impl Iterator<Item = (u32, &Pose)> + '_ {
        self.values
            .iter()
            .filter(|(v, _)| v.kind == VariableKind::Time)
            .map(|(v, p)| (v.index, p))
    }

    /// Pattern→camera transform `C·T⁻¹·P⁻¹` predicted for a relationship.
    pub fn predicted_a(&self, camera: u32, pattern: u32, time: u32) -> Result<Pose> {
        let c = self.value(VariableId::camera(camera))?;
        let p = self.value(VariableId::pattern(pattern))?;
        let t = self.value(VariableId::time(time))?;
        Ok(c.compose(&t.inverse()).compose(&p.inverse()))
    }

    /// `‖C − A·P·T‖²_F` for one relationship.
    pub fn algebraic_residual(&self, fr: &FoundationalRelationship) -> Result<f64> {
        let c = self.value(VariableId::camera(fr.camera))?;
        let p = self.value(VariableId::pattern(fr.pattern))?;
        let t = self.value(VariableId::time(fr.time))?;
        let rhs = fr.a.compose(p).compose(t);
        Ok((c.to_homogeneous() - rhs.to_homogeneous()).norm_squared())
    }
}

/// A relationship together with its still-uninitialized variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualFR {
    pub fr_index: usize,
    pub unknowns: Vec<VariableId>,
}

/// Relationships that still have at least one unknown.
pub fn residual_frs(pool: &VariablePool, frs: &[FoundationalRelationship]) -> Vec<ResidualFR> {
    frs.iter()
        .enumerate()
        .filter_map(|(i, fr)| {
            let unknowns: Vec<VariableId> = fr_variables(fr)
                .into_iter()
                .filter(|v| !pool.is_initialized(*v))
                .collect();
            (!unknowns.is_empty()).then_some(ResidualFR {
                fr_index: i,
                unknowns,
            })
        })
        .collect()
}

/// Tunable thresholds of the closed-form stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    /// Minimum rotation difference (radians) between two `𝒜` samples of a pair solve.
    pub rotation_diversity: f64,
    /// Minimum relative gap between the two largest singular values of the
    /// Kronecker system; smaller gaps leave a rotation family unresolved.
    pub min_singular_gap: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            rotation_diversity: 1e-3,
            min_singular_gap: 1e-7,
        }
    }
}

/// Seeds `P_{p*} = T_{t*} = I` and every camera that sees the reference pair.
pub fn seed_reference(pool: &mut VariablePool, frs: &[FoundationalRelationship]) -> Result<usize> {
    let r = pool.reference();
    let mut seeded = 0;
    for fr in frs.iter().filter(|f| f.pattern == r.pattern && f.time == r.time) {
        pool.set(VariableId::camera(fr.camera), fr.a);
        seeded += 1;
    }
    if seeded == 0 {
        return Err(Error::NoReferenceObservation {
            pattern: r.pattern,
            time: r.time,
        });
    }
    Ok(seeded)
}

/// Closed-form rigid `X` minimizing `Σ‖X·𝒜ᵢ − ℬᵢ‖²_F`.
///
/// With `t_X = mean(t_ℬ − R_X t_𝒜)` substituted, the objective reduces to
/// orthogonal Procrustes on `Σ R_ℬ R_𝒜ᵀ + Σ (t_ℬ − t̄_ℬ)(t_𝒜 − t̄_𝒜)ᵀ`.
/// A single equation gives `X = ℬ·𝒜⁻¹` exactly.
pub fn solve_single(eqs: &[(Pose, Pose)]) -> Result<Pose> {
    match eqs {
        [] => Err(Error::EmptyInput),
        [(a, b)] => Ok(b.compose(&a.inverse())),
        _ => {
            let n = eqs.len() as f64;
            let mean_a = eqs.iter().fold(Vector3::zeros(), |acc, (a, _)| acc + a.translation()) / n;
            let mean_b = eqs.iter().fold(Vector3::zeros(), |acc, (_, b)| acc + b.translation()) / n;
            let mut m = Matrix3::zeros();
            for (a, b) in eqs {
                m += b.rotation() * a.rotation().transpose();
                m += (b.translation() - mean_b) * (a.translation() - mean_a).transpose();
            }
            let r = so3_project(&m)?;
            let t = mean_b - r * mean_a;
            Ok(Pose::from_parts(r, t))
        }
    }
}

/// Solution of `𝒜ᵢ·X = Z·ℬᵢ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSolution {
    pub x: Pose,
    pub z: Pose,
    /// `Σ‖𝒜ᵢX − Zℬᵢ‖²_F`.
    pub residual: f64,
    /// One side was identity in every equation, so only the relative
    /// transform `Z·X⁻¹` (or `X·Z⁻¹`) is determined. The returned pair
    /// fixes the free side to identity.
    pub gauge_free: bool,
}

fn pair_residual(eqs: &[(Pose, Pose)], x: &Pose, z: &Pose) -> f64 {
    eqs.iter()
        .map(|(a, b)| (a.compose(x).to_homogeneous() - z.compose(b).to_homogeneous()).norm_squared())
        .sum()
}

fn max_rotation_spread(poses: impl Iterator<Item = Matrix3<f64>> + Clone) -> f64 {
    let mut spread: f64 = 0.0;
    for (i, ri) in poses.clone().enumerate() {
        for rj in poses.clone().skip(i + 1) {
            spread = spread.max(rotation_angle(&(ri.transpose() * rj)));
        }
    }
    spread
}

fn is_identity(p: &Pose) -> bool {
    p.frobenius_distance(&Pose::identity()) < 1e-12
}

/// Robot-world hand-eye solve of `𝒜ᵢ·X = Z·ℬᵢ`.
///
/// Rotations come from the dominant singular pair of
/// `K = Σ R_ℬᵢ ⊗ R_𝒜ᵢ`, since `(R_ℬ ⊗ R_𝒜)·vec(R_X) = vec(R_Z)` for
/// column-major `vec`. Translations solve `R_𝒜ᵢ t_X − t_Z = R_Z t_ℬᵢ − t_𝒜ᵢ`
/// in the least-squares sense.
pub fn solve_pair(eqs: &[(Pose, Pose)], cfg: &InitConfig) -> Result<PairSolution> {
    if eqs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if eqs.iter().all(|(_, b)| is_identity(b)) {
        let flipped: Vec<(Pose, Pose)> = eqs.iter().map(|(a, _)| (Pose::identity(), *a)).collect();
        let z = solve_single(&flipped)?;
        let x = Pose::identity();
        return Ok(PairSolution {
            residual: pair_residual(eqs, &x, &z),
            x,
            z,
            gauge_free: true,
        });
    }
    if eqs.iter().all(|(a, _)| is_identity(a)) {
        let flipped: Vec<(Pose, Pose)> = eqs.iter().map(|(_, b)| (Pose::identity(), *b)).collect();
        let x = solve_single(&flipped)?;
        let z = Pose::identity();
        return Ok(PairSolution {
            residual: pair_residual(eqs, &x, &z),
            x,
            z,
            gauge_free: true,
        });
    }
    if eqs.len() < 2 || max_rotation_spread(eqs.iter().map(|(a, _)| *a.rotation())) <= cfg.rotation_diversity {
        return Err(Error::InsufficientMotion);
    }

    let mut k = SMatrix::<f64, 9, 9>::zeros();
    for (a, b) in eqs {
        k += b.rotation().kronecker(a.rotation());
    }
    // Eigen decomposition of KᵀK stays accurate when the top value repeats.
    let eig = (k.transpose() * k).symmetric_eigen();
    let ev = eig.eigenvalues;
    let top = ev.imax();
    let second = (0..9).filter(|&i| i != top).map(|i| ev[i]).fold(0.0, f64::max);
    if !(ev[top] > 0.0) || (ev[top] - second) <= cfg.min_singular_gap * ev[top] {
        return Err(Error::InsufficientMotion);
    }
    let v = eig.eigenvectors.column(top).into_owned();
    let w = k * v / ev[top].sqrt();
    let mut vx = Matrix3::from_column_slice(v.as_slice());
    let mut vz = Matrix3::from_column_slice(w.as_slice());
    if vx.determinant() < 0.0 {
        vx = -vx;
        vz = -vz;
    }
    let rx = so3_project(&vx)?;
    let rz = so3_project(&vz)?;

    let mut ltl = SMatrix::<f64, 6, 6>::zeros();
    let mut ltr = SVector::<f64, 6>::zeros();
    for (a, b) in eqs {
        let mut l = SMatrix::<f64, 3, 6>::zeros();
        l.fixed_view_mut::<3, 3>(0, 0).copy_from(a.rotation());
        l.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-Matrix3::identity()));
        ltl += l.transpose() * l;
        ltr += l.transpose() * (rz * b.translation() - a.translation());
    }
    let eig = ltl.symmetric_eigen();
    let largest = eig.eigenvalues.max();
    if !(eig.eigenvalues.min() > 1e-12 * largest) {
        return Err(Error::InsufficientMotion);
    }
    let proj = eig.eigenvectors.transpose() * ltr;
    let sol = eig.eigenvectors * proj.component_div(&eig.eigenvalues);
    let x = Pose::from_parts(rx, Vector3::new(sol[0], sol[1], sol[2]));
    let z = Pose::from_parts(rz, Vector3::new(sol[3], sol[4], sol[5]));
    if !(x.is_finite() && z.is_finite()) {
        return Err(Error::DegenerateMatrix);
    }
    Ok(PairSolution {
        residual: pair_residual(eqs, &x, &z),
        x,
        z,
        gauge_free: false,
    })
}

/// Next step of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveTask {
    Single { var: VariableId, fr_count: usize },
    Pair { first: VariableId, second: VariableId, fr_count: usize },
    Done,
}

fn rank<K: Ord + Copy>(counts: BTreeMap<K, usize>) -> Vec<(K, usize)> {
    let mut ranked: Vec<(K, usize)> = counts.into_iter().collect();
    // stable sort keeps ascending key order among equal counts
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    ranked
}

/// Pair candidates in schedule order, skipping `postponed` ones.
pub fn pair_candidates(
    residual: &[ResidualFR],
    postponed: &BTreeSet<(VariableId, VariableId)>,
) -> Vec<((VariableId, VariableId), usize)> {
    let mut pairs: BTreeMap<(VariableId, VariableId), usize> = BTreeMap::new();
    for r in residual {
        if let [a, b] = r.unknowns[..] {
            let key = if a < b { (a, b) } else { (b, a) };
            if !postponed.contains(&key) {
                *pairs.entry(key).or_default() += 1;
            }
        }
    }
    rank(pairs)
}

/// Chooses the next task: any single-unknown variable first (most
/// supporting relationships, then kind order, then index), otherwise the
/// best pair not in `postponed`.
pub fn choose_next(
    residual: &[ResidualFR],
    postponed: &BTreeSet<(VariableId, VariableId)>,
) -> Result<SolveTask> {
    if residual.is_empty() {
        return Ok(SolveTask::Done);
    }
    let mut singles: BTreeMap<VariableId, usize> = BTreeMap::new();
    for r in residual {
        if let [v] = r.unknowns[..] {
            *singles.entry(v).or_default() += 1;
        }
    }
    if let Some(&(var, fr_count)) = rank(singles).first() {
        return Ok(SolveTask::Single { var, fr_count });
    }
    if let Some(&((first, second), fr_count)) = pair_candidates(residual, postponed).first() {
        return Ok(SolveTask::Pair {
            first,
            second,
            fr_count,
        });
    }
    let uninitialized: BTreeSet<VariableId> =
        residual.iter().flat_map(|r| r.unknowns.iter().copied()).collect();
    Err(Error::Stuck {
        remaining: residual.len(),
        uninitialized: uninitialized.into_iter().collect(),
    })
}

/// Rearranges a relationship with sole unknown `var` to `X·𝒜 = ℬ`.
fn single_equation(pool: &VariablePool, fr: &FoundationalRelationship, var: VariableId) -> Result<(Pose, Pose)> {
    let c = || pool.value(VariableId::camera(fr.camera)).copied();
    let p = || pool.value(VariableId::pattern(fr.pattern)).copied();
    let t = || pool.value(VariableId::time(fr.time)).copied();
    let a_inv = fr.a.inverse();
    Ok(match var.kind {
        VariableKind::Camera => (Pose::identity(), fr.a.compose(&p()?).compose(&t()?)),
        VariableKind::Pattern => (t()?, a_inv.compose(&c()?)),
        VariableKind::Time => (Pose::identity(), p()?.inverse().compose(&a_inv).compose(&c()?)),
    })
}

/// Rearranges a relationship with unknowns `(first, second)` (kind order) to
/// `𝒜·X = Z·ℬ`.
fn pair_equation(pool: &VariablePool, fr: &FoundationalRelationship, kinds: (VariableKind, VariableKind)) -> Result<(Pose, Pose)> {
    use VariableKind::*;
    let a_inv = fr.a.inverse();
    Ok(match kinds {
        // A⁻¹·C = P·T
        (Camera, Pattern) => (a_inv, *pool.value(VariableId::time(fr.time))?),
        // (A·P)⁻¹·C = T
        (Camera, Time) => (
            fr.a.compose(pool.value(VariableId::pattern(fr.pattern))?).inverse(),
            Pose::identity(),
        ),
        // T = P⁻¹·(A⁻¹·C), with Z = P⁻¹
        (Pattern, Time) => (
            Pose::identity(),
            a_inv.compose(pool.value(VariableId::camera(fr.camera))?),
        ),
        _ => return Err(Error::InsufficientMotion),
    })
}

/// Maps a pair solution back to `(first, second)` values.
fn pair_values(kinds: (VariableKind, VariableKind), sol: &PairSolution) -> (Pose, Pose) {
    match kinds {
        (VariableKind::Pattern, VariableKind::Time) => (sol.z.inverse(), sol.x),
        _ => (sol.x, sol.z),
    }
}

/// One line of the initialization schedule log.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    pub iter: usize,
    pub task_kind: TaskKind,
    pub variables: Vec<VariableId>,
    pub fr_count: usize,
    /// `sqrt(Σ‖C − A·P·T‖²_F)` over the relationships used.
    pub residual_fro: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Seed,
    Single,
    Pair,
}

impl TaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Seed => "seed",
            TaskKind::Single => "single",
            TaskKind::Pair => "pair",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitOutcome {
    pub pool: VariablePool,
    pub log: Vec<ScheduleEntry>,
}

impl InitOutcome {
    pub fn pair_solves(&self) -> usize {
        self.log.iter().filter(|e| e.task_kind == TaskKind::Pair).count()
    }
}

fn fro_over(pool: &VariablePool, frs: &[FoundationalRelationship], idx: &[usize]) -> f64 {
    idx.iter()
        .filter_map(|&i| pool.algebraic_residual(&frs[i]).ok())
        .sum::<f64>()
        .sqrt()
}

/// Seeds the reference and runs the single/pair schedule until every
/// relationship is fully determined.
pub fn run_initialization(
    frs: &[FoundationalRelationship],
    reference: Reference,
    cfg: &InitConfig,
) -> Result<InitOutcome> {
    if frs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = frs.to_vec();
    crate::dataset::sort_frs(&mut sorted);
    let frs = &sorted[..];
    let mut pool = VariablePool::new(frs, reference);
    seed_reference(&mut pool, frs)?;
    let seed_idx: Vec<usize> = (0..frs.len())
        .filter(|&i| frs[i].pattern == reference.pattern && frs[i].time == reference.time)
        .collect();
    let mut log = alloc::vec![ScheduleEntry {
        iter: 0,
        task_kind: TaskKind::Seed,
        variables: pool.initialized(),
        fr_count: seed_idx.len(),
        residual_fro: fro_over(&pool, frs, &seed_idx),
    }];
    let mut postponed = BTreeSet::new();
    loop {
        let residual = residual_frs(&pool, frs);
        match choose_next(&residual, &postponed)? {
            SolveTask::Done => break,
            SolveTask::Single { var, fr_count } => {
                let idx: Vec<usize> = residual
                    .iter()
                    .filter(|r| r.unknowns[..] == [var])
                    .map(|r| r.fr_index)
                    .collect();
                let eqs = idx
                    .iter()
                    .map(|&i| single_equation(&pool, &frs[i], var))
                    .collect::<Result<Vec<_>>>()?;
                pool.set(var, solve_single(&eqs)?);
                postponed.clear();
                log.push(ScheduleEntry {
                    iter: log.len(),
                    task_kind: TaskKind::Single,
                    variables: alloc::vec![var],
                    fr_count,
                    residual_fro: fro_over(&pool, frs, &idx),
                });
            }
            SolveTask::Pair {
                first,
                second,
                fr_count,
            } => {
                let idx: Vec<usize> = residual
                    .iter()
                    .filter(|r| {
                        r.unknowns.len() == 2 && r.unknowns.contains(&first) && r.unknowns.contains(&second)
                    })
                    .map(|r| r.fr_index)
                    .collect();
                let kinds = (first.kind, second.kind);
                let eqs = idx
                    .iter()
                    .map(|&i| pair_equation(&pool, &frs[i], kinds))
                    .collect::<Result<Vec<_>>>()?;
                match solve_pair(&eqs, cfg) {
                    Ok(sol) if !sol.gauge_free => {
                        let (v1, v2) = pair_values(kinds, &sol);
                        pool.set(first, v1.renormalized());
                        pool.set(second, v2.renormalized());
                        postponed.clear();
                        log.push(ScheduleEntry {
                            iter: log.len(),
                            task_kind: TaskKind::Pair,
                            variables: alloc::vec![first, second],
                            fr_count,
                            residual_fro: fro_over(&pool, frs, &idx),
                        });
                    }
                    Ok(_) | Err(Error::InsufficientMotion) | Err(Error::DegenerateMatrix) => {
                        postponed.insert((first, second));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(InitOutcome { pool, log })
}
