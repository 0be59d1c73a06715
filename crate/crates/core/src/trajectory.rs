//! Camera paths aimed at a pivot: azimuthal orbit, vertical hop, closed ground-parallel spin,
//! plus pose-chain utilities.
//!
//! World convention: `x` right, `y` up, `z` backward; the default up axis is `+y`.

use nalgebra::{Rotation3, Unit, Vector3};

use crate::camera::{relative_pose, Camera, Extrinsics, Intrinsics};
use crate::error::{Error, Result};

const PARALLEL_TOLERANCE: f64 = 1e-9;
const MIN_RADIUS: f64 = 1e-9;

pub fn default_up() -> Vector3<f64> {
    Vector3::y()
}

/// Extrinsics for a camera at `eye` whose optical axis (`+z`) passes through `target`.
/// Image `y` points along the component of `-up` orthogonal to the viewing direction.
pub fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>, up: &Vector3<f64>) -> Result<Extrinsics> {
    let forward = target - eye;
    if forward.norm() < MIN_RADIUS {
        return Err(Error::InvalidTrajectory("eye and target coincide".into()));
    }
    let forward = forward.normalize();
    let up_norm = up.norm();
    if up_norm.is_nan() || up_norm <= 0.0 {
        return Err(Error::DegenerateUp);
    }
    if (up.dot(&forward) / up_norm).abs() > 1.0 - PARALLEL_TOLERANCE {
        return Err(Error::DegenerateUp);
    }
    let right = forward.cross(up).normalize();
    let down = forward.cross(&right);
    let rotation =
        nalgebra::Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    Extrinsics::new(rotation, -(rotation * eye))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    Orbit,
    Hop,
    Spin,
}

impl TrajectoryKind {
    pub fn default_total_degrees(self) -> f64 {
        match self {
            TrajectoryKind::Orbit => 90.0,
            TrajectoryKind::Hop => 180.0,
            TrajectoryKind::Spin => 360.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub start: Camera,
    pub pivot: Vector3<f64>,
    pub frames: usize,
    pub total_degrees: f64,
    pub up: Vector3<f64>,
}

impl TrajectorySpec {
    pub fn new(kind: TrajectoryKind, start: Camera, pivot: Vector3<f64>, frames: usize) -> Self {
        TrajectorySpec {
            kind,
            start,
            pivot,
            frames,
            total_degrees: kind.default_total_degrees(),
            up: default_up(),
        }
    }

    pub fn with_total_degrees(mut self, degrees: f64) -> Self {
        self.total_degrees = degrees;
        self
    }

    pub fn with_up(mut self, up: Vector3<f64>) -> Self {
        self.up = up;
        self
    }

    fn validate(&self) -> Result<Unit<Vector3<f64>>> {
        if self.frames < 2 {
            return Err(Error::InvalidTrajectory(format!(
                "need at least 2 frames, got {}",
                self.frames
            )));
        }
        if !(self.total_degrees > 0.0 && self.total_degrees <= 360.0) {
            return Err(Error::InvalidTrajectory(format!(
                "total angle {} is outside (0, 360]",
                self.total_degrees
            )));
        }
        if (self.start.center() - self.pivot).norm() < MIN_RADIUS {
            return Err(Error::InvalidTrajectory(
                "start camera sits on the pivot".into(),
            ));
        }
        Unit::try_new(self.up, 1e-12).ok_or(Error::DegenerateUp)
    }

    fn expect_kind(&self, kind: TrajectoryKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidTrajectory(format!(
                "expected a {kind:?} spec, got {:?}",
                self.kind
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub intrinsics: Intrinsics,
    pub poses: Vec<Extrinsics>,
}

impl PoseSequence {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn cameras(&self) -> impl Iterator<Item = Camera> + '_ {
        self.poses.iter().map(|&extrinsics| Camera {
            intrinsics: self.intrinsics,
            extrinsics,
        })
    }
}

/// Rotates the start center about the vertical axis through the pivot.
fn azimuthal(
    spec: &TrajectorySpec,
    up: &Unit<Vector3<f64>>,
    step_degrees: f64,
) -> Result<PoseSequence> {
    let offset = spec.start.center() - spec.pivot;
    let horizontal = offset - up.as_ref() * offset.dot(up);
    if horizontal.norm() < MIN_RADIUS {
        return Err(Error::ZeroRadius);
    }
    let poses = (0..spec.frames)
        .map(|k| {
            let rot = Rotation3::from_axis_angle(up, (k as f64 * step_degrees).to_radians());
            look_at(&(spec.pivot + rot * offset), &spec.pivot, up)
        })
        .collect::<Result<_>>()?;
    Ok(PoseSequence {
        intrinsics: spec.start.intrinsics,
        poses,
    })
}

/// Azimuthal orbit about the pivot spanning the total angle from the first to the last pose.
pub fn generate_orbit(spec: &TrajectorySpec) -> Result<PoseSequence> {
    spec.expect_kind(TrajectoryKind::Orbit)?;
    let up = spec.validate()?;
    azimuthal(spec, &up, spec.total_degrees / (spec.frames - 1) as f64)
}

/// Closed ground-parallel loop: the step from the last pose back to the first equals every other step.
pub fn generate_spin(spec: &TrajectorySpec) -> Result<PoseSequence> {
    spec.expect_kind(TrajectoryKind::Spin)?;
    let up = spec.validate()?;
    azimuthal(spec, &up, spec.total_degrees / spec.frames as f64)
}

/// Vertical arc over the pivot in the plane spanned by `up` and the start offset.
///
/// The whole camera frame is carried rigidly along the arc, so the image up direction is
/// transported with it and never becomes parallel to the optical axis at the zenith.
pub fn generate_hop(spec: &TrajectorySpec) -> Result<PoseSequence> {
    spec.expect_kind(TrajectoryKind::Hop)?;
    let up = spec.validate()?;
    let offset = spec.start.center() - spec.pivot;
    let axis = Unit::try_new(offset.cross(&up), MIN_RADIUS).ok_or(Error::DegenerateUp)?;
    let step = spec.total_degrees / (spec.frames - 1) as f64;
    let poses = (0..spec.frames)
        .map(|k| {
            let rot = Rotation3::from_axis_angle(&axis, (k as f64 * step).to_radians());
            look_at(
                &(spec.pivot + rot * offset),
                &spec.pivot,
                &(rot * up.as_ref()),
            )
        })
        .collect::<Result<_>>()?;
    Ok(PoseSequence {
        intrinsics: spec.start.intrinsics,
        poses,
    })
}

pub fn generate(spec: &TrajectorySpec) -> Result<PoseSequence> {
    match spec.kind {
        TrajectoryKind::Orbit => generate_orbit(spec),
        TrajectoryKind::Hop => generate_hop(spec),
        TrajectoryKind::Spin => generate_spin(spec),
    }
}

/// Ablation orbit about the scene center: the pivot is the world origin and the start height is kept.
pub fn generate_center_orbit_clevr(start: &Camera, frames: usize) -> Result<PoseSequence> {
    generate_orbit(&TrajectorySpec::new(
        TrajectoryKind::Orbit,
        *start,
        Vector3::zeros(),
        frames,
    ))
}

/// `relative_pose(seq[i], seq[i + 1])` for every neighbouring pair.
pub fn relative_chain(seq: &PoseSequence) -> Result<Vec<Extrinsics>> {
    if seq.len() < 2 {
        return Err(Error::InvalidTrajectory(
            "a chain needs at least 2 poses".into(),
        ));
    }
    Ok(seq
        .poses
        .windows(2)
        .map(|w| relative_pose(&w[0], &w[1]))
        .collect())
}

/// Inverse of [`relative_chain`]: replays the steps from `first`.
pub fn compose_chain(first: &Extrinsics, chain: &[Extrinsics]) -> Vec<Extrinsics> {
    let mut poses = Vec::with_capacity(chain.len() + 1);
    poses.push(*first);
    for step in chain {
        let next = poses.last().expect("nonempty").then(step);
        poses.push(next);
    }
    poses
}

/// Distance from `point` to the optical axis of a camera with these extrinsics.
pub fn distance_to_optical_axis(ext: &Extrinsics, point: &Vector3<f64>) -> f64 {
    let center = ext.center();
    let axis = ext.rotation().row(2).transpose();
    let v = point - center;
    (v - axis * v.dot(&axis)).norm()
}
