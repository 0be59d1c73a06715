//! Pinhole cameras, pose algebra, per-pixel ray maps and their frequency encoding.
//!
//! Conventions used throughout the crate:
//!
//! * Extrinsics map world points into the camera frame: `x_cam = R * x_world + t`.
//! * The camera looks down its `+z` axis; `x` points right and `y` points down in the image.
//! * Pixel `(u, v)` has `u` growing rightward and `v` downward, with the origin at the
//!   center of the top-left pixel.

use nalgebra::{Matrix3, Point2, Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `RᵀR = I` and `det R = 1` for every accepted rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Points with camera-frame depth at or below this value are behind the camera.
pub const DEPTH_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let intrinsics = Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intrinsics.validate()?;
        Ok(intrinsics)
    }

    /// Square-pixel camera with the principal point at the image center.
    pub fn centered(focal: f64, width: u32, height: u32) -> Result<Self> {
        Self::new(
            focal,
            focal,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidIntrinsics(
                "principal point must be finite".into(),
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidIntrinsics(format!(
                "image size must be at least 1x1 (got {}x{})",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        p.x >= 0.0
            && p.y >= 0.0
            && p.x <= (self.width - 1) as f64
            && p.y <= (self.height - 1) as f64
    }

    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }
}

/// Largest absolute entry of `RᵀR - I`, combined with `|det R - 1|`.
pub fn rotation_residual(r: &Matrix3<f64>) -> f64 {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    ortho.max((r.determinant() - 1.0).abs())
}

/// Projects an arbitrary 3x3 matrix onto the closest rotation in the Frobenius sense.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut flip = Matrix3::identity();
        flip[(2, 2)] = -1.0;
        r = u * flip * v_t;
    }
    r
}

/// Rotation residuals above this cannot be repaired by projection.
pub const MAX_REPAIRABLE_RESIDUAL: f64 = 1e-3;

/// Accepts `m` as-is when it is a rotation within [`ROTATION_TOLERANCE`], projects it onto the
/// nearest rotation when the residual is at most `max_residual`, and otherwise returns the residual.
pub fn repair_rotation(
    m: &Matrix3<f64>,
    max_residual: f64,
) -> std::result::Result<Matrix3<f64>, f64> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(f64::INFINITY);
    }
    let residual = rotation_residual(m);
    if residual <= ROTATION_TOLERANCE {
        Ok(*m)
    } else if residual <= max_residual {
        Ok(nearest_rotation(m))
    } else {
        Err(residual)
    }
}

/// World-to-camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Extrinsics {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation
            .iter()
            .chain(translation.iter())
            .all(|x| x.is_finite())
        {
            return Err(Error::InvalidRotation {
                residual: f64::INFINITY,
            });
        }
        let residual = rotation_residual(&rotation);
        if residual > ROTATION_TOLERANCE {
            return Err(Error::InvalidRotation { residual });
        }
        Ok(Extrinsics {
            rotation,
            translation,
        })
    }

    /// Skips validation; only for products of rotations that are already valid.
    pub(crate) fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        debug_assert!(rotation_residual(&rotation) <= ROTATION_TOLERANCE);
        Extrinsics {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Extrinsics {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_row_major(r: &[f64; 9], t: &[f64; 3]) -> Result<Self> {
        Self::new(Matrix3::from_row_slice(r), Vector3::from_row_slice(t))
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    pub fn translation_array(&self) -> [f64; 3] {
        [self.translation.x, self.translation.y, self.translation.z]
    }

    pub fn transform_point(&self, x_world: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * x_world.coords + self.translation)
    }

    /// Applies `self` first, then `next`.
    pub fn then(&self, next: &Extrinsics) -> Extrinsics {
        Extrinsics::from_parts(
            next.rotation * self.rotation,
            next.rotation * self.translation + next.translation,
        )
    }

    /// Same rotation, translation multiplied by `factor`; moves the camera center by the same factor.
    pub fn scale_translation(&self, factor: f64) -> Extrinsics {
        Extrinsics::from_parts(self.rotation, self.translation * factor)
    }

    pub fn center(&self) -> Vector3<f64> {
        camera_center(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub extrinsics: Extrinsics,
}

impl Camera {
    pub fn new(intrinsics: Intrinsics, extrinsics: Extrinsics) -> Result<Self> {
        intrinsics.validate()?;
        Ok(Camera {
            intrinsics,
            extrinsics,
        })
    }

    /// `P = K [R | t]` as a row-major 3x4 array.
    pub fn projection_matrix(&self) -> [[f64; 4]; 3] {
        let k = self.intrinsics.matrix();
        let kr = k * self.extrinsics.rotation;
        let kt = k * self.extrinsics.translation;
        let mut p = [[0.0; 4]; 3];
        for (i, row) in p.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().take(3).enumerate() {
                *x = kr[(i, j)];
            }
            row[3] = kt[i];
        }
        p
    }

    pub fn center(&self) -> Vector3<f64> {
        camera_center(&self.extrinsics)
    }

    pub fn with_extrinsics(&self, extrinsics: Extrinsics) -> Camera {
        Camera {
            intrinsics: self.intrinsics,
            extrinsics,
        }
    }
}

/// `τ = -Rᵀ t`, the camera center in world coordinates.
pub fn camera_center(ext: &Extrinsics) -> Vector3<f64> {
    -(ext.rotation.transpose() * ext.translation)
}

/// Pose of `dst` expressed relative to `src`: `x_dst = R_rel * x_src + t_rel` for camera-frame points.
pub fn relative_pose(src: &Extrinsics, dst: &Extrinsics) -> Extrinsics {
    let rotation = dst.rotation * src.rotation.transpose();
    let translation = dst.translation - rotation * src.translation;
    Extrinsics::from_parts(rotation, translation)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Visible(Point2<f64>),
    BehindCamera,
}

impl Projection {
    pub fn pixel(self) -> Option<Point2<f64>> {
        match self {
            Projection::Visible(p) => Some(p),
            Projection::BehindCamera => None,
        }
    }
}

/// Pinhole projection without clipping to the image bounds.
pub fn project_point(cam: &Camera, x_world: &Point3<f64>) -> Projection {
    let x = cam.extrinsics.transform_point(x_world);
    if x.z <= DEPTH_EPSILON {
        return Projection::BehindCamera;
    }
    let k = &cam.intrinsics;
    Projection::Visible(Point2::new(
        k.fx * x.x / x.z + k.cx,
        k.fy * x.y / x.z + k.cy,
    ))
}

/// Unit world-frame direction of the ray through pixel `(u, v)`.
pub fn ray_direction(cam: &Camera, u: f64, v: f64) -> Vector3<f64> {
    let k = &cam.intrinsics;
    let local = Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
    (cam.extrinsics.rotation.transpose() * local).normalize()
}

/// Per-pixel `[direction, center]` records, row-major over the image.
#[derive(Debug, Clone, PartialEq)]
pub struct RayMap {
    pub width: u32,
    pub height: u32,
    pub records: Vec<[f64; 6]>,
}

impl RayMap {
    pub fn record(&self, u: u32, v: u32) -> &[f64; 6] {
        &self.records[(v * self.width + u) as usize]
    }
}

pub fn build_ray_map(cam: &Camera) -> RayMap {
    let (width, height) = (cam.intrinsics.width, cam.intrinsics.height);
    let center = cam.center();
    let records = (0..height)
        .into_par_iter()
        .flat_map_iter(|v| {
            (0..width).map(move |u| {
                let d = ray_direction(cam, u as f64, v as f64);
                [d.x, d.y, d.z, center.x, center.y, center.z]
            })
        })
        .collect();
    RayMap {
        width,
        height,
        records,
    }
}

/// Re-expresses `cam` in the frame of `reference`; the reference camera itself becomes the identity.
pub fn localize_camera(cam: &Camera, reference: &Extrinsics) -> Camera {
    cam.with_extrinsics(relative_pose(reference, &cam.extrinsics))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodingConfig {
    pub n_freq: usize,
    /// Frequency of the first band; band `k` uses `f1 * 2^(k-1)`.
    pub f1: f64,
    /// Multiplier applied to the camera-center half of each record before encoding.
    pub center_scale: f64,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            n_freq: 8,
            f1: 1.0,
            center_scale: 1.0,
        }
    }
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_freq == 0 {
            return Err(Error::InvalidConfig("n_freq must be at least 1".into()));
        }
        if !(self.f1.is_finite() && self.f1 > 0.0) {
            return Err(Error::InvalidConfig(
                "base frequency must be positive".into(),
            ));
        }
        if !self.center_scale.is_finite() {
            return Err(Error::InvalidConfig("center scale must be finite".into()));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        12 * self.n_freq
    }

    pub fn frequency(&self, band: usize) -> f64 {
        self.f1 * 2f64.powi(band as i32)
    }
}

/// Sinusoidal encoding of a ray map. Each pixel holds, for every band `k`,
/// six sines followed by six cosines of `f_k * π * r`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRayMap {
    pub width: u32,
    pub height: u32,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl EncodedRayMap {
    pub fn pixel(&self, u: u32, v: u32) -> &[f64] {
        let start = (v * self.width + u) as usize * self.channels;
        &self.data[start..start + self.channels]
    }
}

pub fn encode_record(record: &[f64; 6], cfg: &EncodingConfig, out: &mut [f64]) {
    let mut r = *record;
    for x in &mut r[3..] {
        *x *= cfg.center_scale;
    }
    for band in 0..cfg.n_freq {
        let w = cfg.frequency(band) * std::f64::consts::PI;
        let block = &mut out[band * 12..band * 12 + 12];
        for (i, x) in r.iter().enumerate() {
            let (s, c) = (w * x).sin_cos();
            block[i] = s;
            block[6 + i] = c;
        }
    }
}

pub fn frequency_encode(map: &RayMap, cfg: &EncodingConfig) -> Result<EncodedRayMap> {
    cfg.validate()?;
    let channels = cfg.channels();
    let mut data = vec![0.0; map.records.len() * channels];
    data.par_chunks_mut(channels)
        .zip(map.records.par_iter())
        .for_each(|(out, record)| encode_record(record, cfg, out));
    Ok(EncodedRayMap {
        width: map.width,
        height: map.height,
        channels,
        data,
    })
}
