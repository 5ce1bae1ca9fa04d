use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::connectivity::VariableId;

pub type Result<T> = core::result::Result<T, Error>;

/// Observation key `(camera, pattern, time)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObsKey {
    pub camera: u32,
    pub pattern: u32,
    pub time: u32,
}

impl ObsKey {
    pub fn new(camera: u32, pattern: u32, time: u32) -> Self {
        Self {
            camera,
            pattern,
            time,
        }
    }
}

impl fmt::Display for ObsKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(c{}, p{}, t{})", self.camera, self.pattern, self.time)
    }
}

/// One broken dataset invariant, naming the offending record.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    UnknownCamera { key: ObsKey },
    UnknownPattern { key: ObsKey },
    TimeOutOfRange { key: ObsKey, time_count: u32 },
    DuplicateTriple { key: ObsKey },
    DuplicateCorner { key: ObsKey, corner: u32 },
    CornerOutOfRange { key: ObsKey, corner: u32 },
    TooFewCorners { key: ObsKey, count: usize },
    CollinearCorners { key: ObsKey },
    NonFiniteCorner { key: ObsKey, corner: u32 },
    BadIntrinsics { camera: u32, reason: String },
    BadPattern { pattern: u32, reason: String },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownCamera { key } => write!(f, "detection {key} references unknown camera"),
            Self::UnknownPattern { key } => {
                write!(f, "detection {key} references unknown pattern")
            }
            Self::TimeOutOfRange { key, time_count } => {
                write!(f, "detection {key} has time >= time_count {time_count}")
            }
            Self::DuplicateTriple { key } => write!(f, "duplicate detection triple {key}"),
            Self::DuplicateCorner { key, corner } => {
                write!(f, "detection {key} lists corner {corner} twice")
            }
            Self::CornerOutOfRange { key, corner } => {
                write!(f, "detection {key} corner index {corner} is not on the pattern")
            }
            Self::TooFewCorners { key, count } => {
                write!(f, "detection {key} has {count} corners, need at least 4")
            }
            Self::CollinearCorners { key } => write!(f, "detection {key} corners are collinear"),
            Self::NonFiniteCorner { key, corner } => {
                write!(f, "detection {key} corner {corner} is not finite")
            }
            Self::BadIntrinsics { camera, reason } => {
                write!(f, "camera {camera} intrinsics invalid: {reason}")
            }
            Self::BadPattern { pattern, reason } => {
                write!(f, "pattern {pattern} geometry invalid: {reason}")
            }
        }
    }
}

/// Errors produced anywhere in the calibration pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("rotation is not orthonormal with det +1 (deviation {deviation:e})")]
    InvalidRotation { deviation: f64 },
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("point at or behind the camera plane (z = {depth:e} mm)")]
    NonPositiveDepth { depth: f64 },
    #[error("point behind camera for {key}, corner {corner}")]
    NonPositiveDepthAt { key: ObsKey, corner: u32 },
    #[error("matrix is singular or degenerate")]
    DegenerateMatrix,
    #[error("rotation angle within 1e-6 rad of pi has no canonical axis-angle encoding")]
    NearPiRotation,
    #[error("dataset failed validation: {}", join_issues(.0))]
    Validation(Vec<ValidationIssue>),
    #[error("detection corners are collinear or too few")]
    DegenerateConfiguration,
    #[error("homography decomposition puts the pattern behind the camera")]
    BehindCamera,
    #[error("pattern pose for {key} failed: {source}")]
    PatternPose {
        key: ObsKey,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("single-view reprojection rmse {rmse:.3} px for {key} exceeds the {gate} px gate")]
    SanityGate { key: ObsKey, rmse: f64, gate: f64 },
    #[error("no foundational relationships")]
    EmptyInput,
    #[error("interaction graph has {count} connected components")]
    Disconnected { count: usize },
    #[error("no observation of reference pattern {pattern} at time {time}")]
    NoReferenceObservation { pattern: u32, time: u32 },
    #[error("insufficient rotation diversity to solve the pair")]
    InsufficientMotion,
    #[error(
        "initialization stuck with {remaining} unresolved relationships; uninitialized: {}",
        join_ids(uninitialized)
    )]
    Stuck {
        remaining: usize,
        uninitialized: Vec<VariableId>,
    },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("rays are degenerate (baseline below 1e-6 mm)")]
    DegenerateRays,
    #[error("no pattern corner is observed in two or more relationships")]
    NoTriangulatablePoints,
    #[error("virtual cameras need exactly one physical camera, found {0}")]
    MultipleCameras(usize),
    #[error("layout is infeasible: no camera ever sees a pattern")]
    InfeasibleLayout,
    #[error("solution does not cover variable {0}")]
    MismatchedIds(VariableId),
    #[error("variable {0} is not initialized")]
    Uninitialized(VariableId),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn join_issues(issues: &[ValidationIssue]) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    for (i, issue) in issues.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        let _ = write!(out, "{issue}");
    }
    out
}

fn join_ids(ids: &[VariableId]) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{id}");
    }
    out
}
