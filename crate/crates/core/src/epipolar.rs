//! Essential and fundamental matrices from known poses, and the symmetric epipolar distance.

use nalgebra::{Matrix3, Point2, Vector3};
use serde::Serialize;

use crate::camera::{relative_pose, Camera, Extrinsics};
use crate::error::{Error, Result};

/// Camera pairs whose centers are closer than this (world units) have no epipolar geometry.
pub const DEFAULT_BASELINE_EPSILON: f64 = 1e-6;

/// Lines whose normal `(a, b)` is shorter than this are treated as degenerate.
pub const LINE_EPSILON: f64 = 1e-15;

const RANK_TOLERANCE: f64 = 1e-9;

pub fn skew(t: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0)
}

/// `E = [t]ₓ R` for the relative pose; acts on normalized image coordinates.
pub fn essential_from_relative(rel: &Extrinsics, baseline_epsilon: f64) -> Result<Matrix3<f64>> {
    let baseline = rel.translation().norm();
    if baseline.is_nan() || baseline < baseline_epsilon {
        return Err(Error::DegenerateBaseline { baseline });
    }
    Ok(skew(rel.translation()) * rel.rotation())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FundamentalMatrix {
    #[serde(serialize_with = "serialize_row_major")]
    matrix: Matrix3<f64>,
    pub src_size: (u32, u32),
    pub dst_size: (u32, u32),
}

fn serialize_row_major<S: serde::Serializer>(m: &Matrix3<f64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(row_major(m))
}

fn row_major(m: &Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for (i, x) in out.iter_mut().enumerate() {
        *x = m[(i / 3, i % 3)];
    }
    out
}

impl FundamentalMatrix {
    /// Validates rank 2 and rescales so the largest-magnitude entry is `+1`.
    pub fn from_matrix(
        m: Matrix3<f64>,
        src_size: (u32, u32),
        dst_size: (u32, u32),
    ) -> Result<Self> {
        let largest = m
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .expect("3x3 matrix is nonempty");
        if !(largest.is_finite() && largest != 0.0) {
            return Err(Error::InvalidConfig(
                "fundamental matrix is zero or non-finite".into(),
            ));
        }
        let matrix = m / largest;
        let sv = matrix.singular_values();
        let (max_sv, min_sv) = (sv.max(), sv.min());
        if min_sv >= RANK_TOLERANCE * max_sv {
            return Err(Error::InvalidConfig(format!(
                "fundamental matrix is not rank 2 (singular value ratio {:.3e})",
                min_sv / max_sv
            )));
        }
        Ok(FundamentalMatrix {
            matrix,
            src_size,
            dst_size,
        })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn row_major(&self) -> [f64; 9] {
        row_major(&self.matrix)
    }

    /// The matrix for the reversed pair (image 2 to image 1).
    pub fn transposed(&self) -> FundamentalMatrix {
        FundamentalMatrix {
            matrix: self.matrix.transpose(),
            src_size: self.dst_size,
            dst_size: self.src_size,
        }
    }
}

pub fn fundamental_from_cameras(cam1: &Camera, cam2: &Camera) -> Result<FundamentalMatrix> {
    fundamental_from_cameras_with(cam1, cam2, DEFAULT_BASELINE_EPSILON)
}

pub fn fundamental_from_cameras_with(
    cam1: &Camera,
    cam2: &Camera,
    baseline_epsilon: f64,
) -> Result<FundamentalMatrix> {
    let rel = relative_pose(&cam1.extrinsics, &cam2.extrinsics);
    let e = essential_from_relative(&rel, baseline_epsilon)?;
    let f = cam2.intrinsics.inverse_matrix().transpose() * e * cam1.intrinsics.inverse_matrix();
    FundamentalMatrix::from_matrix(
        f,
        (cam1.intrinsics.width, cam1.intrinsics.height),
        (cam2.intrinsics.width, cam2.intrinsics.height),
    )
}

/// Homogeneous line `a u + b v + c = 0` in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpipolarLine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl EpipolarLine {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        EpipolarLine { a, b, c }
    }

    fn normal_length(&self) -> f64 {
        self.a.hypot(self.b)
    }

    /// Unit normal `(a, b) / |(a, b)|`.
    pub fn unit_normal(&self) -> Result<(f64, f64)> {
        let n = self.normal_length();
        if n.is_nan() || n <= LINE_EPSILON {
            return Err(Error::DegenerateLine);
        }
        Ok((self.a / n, self.b / n))
    }

    pub fn scaled(&self, s: f64) -> EpipolarLine {
        EpipolarLine::new(self.a * s, self.b * s, self.c * s)
    }
}

fn homogeneous(p: &Point2<f64>) -> Vector3<f64> {
    Vector3::new(p.x, p.y, 1.0)
}

/// `F p̃`: the line in image 2 on which the match of `p` must lie.
pub fn epipolar_line(f: &FundamentalMatrix, p: &Point2<f64>) -> Result<EpipolarLine> {
    line_from(&(f.matrix * homogeneous(p)))
}

fn line_from(l: &Vector3<f64>) -> Result<EpipolarLine> {
    let line = EpipolarLine::new(l.x, l.y, l.z);
    let n = line.normal_length();
    if n.is_nan() || n <= LINE_EPSILON {
        return Err(Error::DegenerateLine);
    }
    Ok(line)
}

pub fn point_line_distance(p: &Point2<f64>, l: &EpipolarLine) -> Result<f64> {
    let n = l.normal_length();
    if n.is_nan() || n <= LINE_EPSILON {
        return Err(Error::DegenerateLine);
    }
    Ok((l.a * p.x + l.b * p.y + l.c).abs() / n)
}

/// The two point-to-line distances `(d(p', F p), d(p, Fᵀ p'))`.
pub fn sed_terms(
    p: &Point2<f64>,
    p_prime: &Point2<f64>,
    f: &FundamentalMatrix,
) -> Result<(f64, f64)> {
    let forward = line_from(&(f.matrix * homogeneous(p)))?;
    let backward = line_from(&(f.matrix.transpose() * homogeneous(p_prime)))?;
    Ok((
        point_line_distance(p_prime, &forward)?,
        point_line_distance(p, &backward)?,
    ))
}

/// Mean of the two point-to-epipolar-line distances, in pixels.
pub fn sed(p: &Point2<f64>, p_prime: &Point2<f64>, f: &FundamentalMatrix) -> Result<f64> {
    let (forward, backward) = sed_terms(p, p_prime, f)?;
    Ok(0.5 * (forward + backward))
}
