//! Synthetic point scenes with analytic projections: exact correspondences, controlled
//! perturbations and a Gaussian-dot renderer for end-to-end matcher runs.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`, so results are byte-stable
//! for a given seed.

use std::collections::HashSet;

use nalgebra::{Point2, Point3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{project_point, Camera, Extrinsics};
use crate::epipolar::{epipolar_line, FundamentalMatrix};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::matching::{Correspondence, MatchSet, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenePoint {
    pub id: u32,
    pub xyz: [f64; 3],
    pub intensity: f64,
}

impl ScenePoint {
    pub fn position(&self) -> Point3<f64> {
        Point3::from(self.xyz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointScene {
    pub seed: u64,
    pub bbox_min: [f64; 3],
    pub bbox_max: [f64; 3],
    pub points: Vec<ScenePoint>,
}

/// `n_points` uniform in the cube of side `extent` centered on the origin.
pub fn make_scene(seed: u64, n_points: usize, extent: f64) -> Result<PointScene> {
    make_scene_in_box(seed, n_points, [extent; 3])
}

/// `n_points` uniform in the origin-centered box with the given side lengths.
pub fn make_scene_in_box(seed: u64, n_points: usize, extent: [f64; 3]) -> Result<PointScene> {
    if n_points == 0 {
        return Err(Error::InvalidConfig(
            "a scene needs at least one point".into(),
        ));
    }
    if !extent.iter().all(|e| e.is_finite() && *e > 0.0) {
        return Err(Error::InvalidConfig("scene extent must be positive".into()));
    }
    let half = extent.map(|e| e / 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n_points as u32)
        .map(|id| ScenePoint {
            id,
            xyz: [
                rng.gen_range(-half[0]..half[0]),
                rng.gen_range(-half[1]..half[1]),
                rng.gen_range(-half[2]..half[2]),
            ],
            intensity: rng.gen_range(0.25..1.0),
        })
        .collect();
    Ok(PointScene {
        seed,
        bbox_min: half.map(|h| -h),
        bbox_max: half,
        points,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthMatches {
    pub matches: MatchSet,
    /// Source point of each correspondence, in the same order.
    pub point_ids: Vec<u32>,
}

/// Exact projections of every point in front of both cameras and inside both images.
pub fn exact_correspondences(
    scene: &PointScene,
    cam1: &Camera,
    cam2: &Camera,
) -> GroundTruthMatches {
    let mut seen = HashSet::new();
    let mut correspondences = Vec::new();
    let mut point_ids = Vec::new();
    for point in &scene.points {
        let x = point.position();
        let (Some(p1), Some(p2)) = (
            project_point(cam1, &x).pixel(),
            project_point(cam2, &x).pixel(),
        ) else {
            continue;
        };
        if !(cam1.intrinsics.contains(&p1) && cam2.intrinsics.contains(&p2)) {
            continue;
        }
        if !seen.insert([
            p1.x.to_bits(),
            p1.y.to_bits(),
            p2.x.to_bits(),
            p2.y.to_bits(),
        ]) {
            continue;
        }
        correspondences.push(Correspondence::new(p1, p2, 1.0));
        point_ids.push(point.id);
    }
    GroundTruthMatches {
        matches: MatchSet::new((0, 1), correspondences, Provenance::Detected)
            .expect("projections are finite and deduplicated"),
        point_ids,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbMode {
    /// Along the unit normal of the epipolar line of `p` in image 2.
    Perpendicular,
    /// Along a seeded uniformly random direction.
    Random,
}

/// Moves every `p'` by exactly `delta` pixels.
pub fn perturb_matches(
    matches: &MatchSet,
    delta: f64,
    mode: PerturbMode,
    f: &FundamentalMatrix,
    seed: u64,
) -> Result<MatchSet> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidConfig(
            "perturbation magnitude must be non-negative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifted = matches
        .correspondences()
        .iter()
        .map(|c| {
            let (nx, ny) = match mode {
                PerturbMode::Perpendicular => epipolar_line(f, &c.p)?.unit_normal()?,
                PerturbMode::Random => {
                    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    (angle.cos(), angle.sin())
                }
            };
            Ok(Correspondence::new(
                c.p,
                Point2::new(c.p_prime.x + delta * nx, c.p_prime.y + delta * ny),
                c.score,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    MatchSet::new(matches.pair, shifted, matches.provenance)
}

fn random_unit(rng: &mut impl Rng) -> Unit<Vector3<f64>> {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    Unit::new_unchecked(Vector3::new(r * phi.cos(), r * phi.sin(), z))
}

/// Applies a seeded rigid motion of rotation angle `rot_deg` and translation length `trans`
/// after `ext`.
pub fn perturb_pose(ext: &Extrinsics, rot_deg: f64, trans: f64, seed: u64) -> Result<Extrinsics> {
    if !(rot_deg.is_finite() && rot_deg >= 0.0 && trans.is_finite() && trans >= 0.0) {
        return Err(Error::InvalidConfig(
            "pose perturbation magnitudes must be non-negative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = random_unit(&mut rng);
    let direction = random_unit(&mut rng);
    let rot = Rotation3::from_axis_angle(&axis, rot_deg.to_radians());
    let delta = Extrinsics::new(*rot.matrix(), direction.as_ref() * trans)?;
    let out = ext.then(&delta);
    Extrinsics::new(*out.rotation(), *out.translation())
}

/// Geodesic angle between two rotations, in degrees.
pub fn rotation_angle_deg(a: &Extrinsics, b: &Extrinsics) -> f64 {
    let rel = b.rotation() * a.rotation().transpose();
    ((rel.trace() - 1.0) / 2.0)
        .clamp(-1.0, 1.0)
        .acos()
        .to_degrees()
}

/// Splats each visible point as an isotropic Gaussian dot of its intensity.
pub fn render_view(scene: &PointScene, cam: &Camera, dot_sigma: f64) -> Result<GrayImage> {
    if !(dot_sigma.is_finite() && dot_sigma > 0.0) {
        return Err(Error::InvalidConfig("dot sigma must be positive".into()));
    }
    let (w, h) = (cam.intrinsics.width, cam.intrinsics.height);
    let mut acc = vec![0.0f64; w as usize * h as usize];
    let reach = (4.0 * dot_sigma).ceil();
    let inv = 1.0 / (2.0 * dot_sigma * dot_sigma);
    for point in &scene.points {
        let Some(p) = project_point(cam, &point.position()).pixel() else {
            continue;
        };
        let x0 = (p.x - reach).ceil().max(0.0);
        let x1 = (p.x + reach).floor().min((w - 1) as f64);
        let y0 = (p.y - reach).ceil().max(0.0);
        let y1 = (p.y + reach).floor().min((h - 1) as f64);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        for y in y0 as u32..=y1 as u32 {
            for x in x0 as u32..=x1 as u32 {
                let d2 = (x as f64 - p.x).powi(2) + (y as f64 - p.y).powi(2);
                acc[(y * w + x) as usize] += point.intensity * (-d2 * inv).exp();
            }
        }
    }
    Ok(GrayImage {
        width: w,
        height: h,
        data: acc.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;
    use crate::epipolar::{fundamental_from_cameras, sed, sed_terms};
    use crate::trajectory::look_at;

    fn camera_at(eye: Vector3<f64>) -> Camera {
        Camera::new(
            Intrinsics::centered(200.0, 256, 256).unwrap(),
            look_at(&eye, &Vector3::zeros(), &Vector3::y()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn scenes_are_deterministic() {
        let a = make_scene(7, 500, 4.0).unwrap();
        let b = make_scene(7, 500, 4.0).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let ids: HashSet<u32> = a.points.iter().map(|p| p.id).collect();
        assert_eq!(ids.len(), 500);
        let c = make_scene(8, 500, 4.0).unwrap();
        assert_ne!(a.points[0].xyz, c.points[0].xyz);
        assert!(a
            .points
            .iter()
            .all(|p| p.xyz.iter().all(|x| x.abs() <= 2.0)));
        assert!(make_scene(1, 0, 1.0).is_err());
    }

    #[test]
    fn identical_views_match_themselves() {
        let scene = make_scene(1, 200, 2.0).unwrap();
        let cam = camera_at(Vector3::new(0.0, 1.0, 6.0));
        let gt = exact_correspondences(&scene, &cam, &cam);
        assert!(!gt.matches.is_empty());
        assert!(gt
            .matches
            .correspondences()
            .iter()
            .all(|c| c.p == c.p_prime));
        assert_eq!(gt.point_ids.len(), gt.matches.len());
    }

    #[test]
    fn exact_matches_have_zero_distance() {
        let scene = make_scene(2, 300, 2.0).unwrap();
        let (c1, c2) = (
            camera_at(Vector3::new(0.0, 1.0, 6.0)),
            camera_at(Vector3::new(1.5, 1.2, 5.5)),
        );
        let f = fundamental_from_cameras(&c1, &c2).unwrap();
        let gt = exact_correspondences(&scene, &c1, &c2);
        assert!(gt.matches.len() > 100);
        for c in gt.matches.correspondences() {
            assert!(sed(&c.p, &c.p_prime, &f).unwrap() < 1e-6);
        }
    }

    #[test]
    fn far_camera_sees_nothing() {
        let scene = make_scene(3, 100, 2.0).unwrap();
        let c1 = camera_at(Vector3::new(0.0, 1.0, 6.0));
        // Looking away from the scene.
        let away = Camera::new(
            c1.intrinsics,
            look_at(
                &Vector3::new(0.0, 0.0, 50.0),
                &Vector3::new(0.0, 0.0, 100.0),
                &Vector3::y(),
            )
            .unwrap(),
        )
        .unwrap();
        assert!(exact_correspondences(&scene, &c1, &away).matches.is_empty());
    }

    #[test]
    fn perpendicular_shift_sets_forward_distance() {
        let scene = make_scene(4, 300, 2.0).unwrap();
        let (c1, c2) = (
            camera_at(Vector3::new(0.0, 1.0, 6.0)),
            camera_at(Vector3::new(1.0, 1.0, 5.8)),
        );
        let f = fundamental_from_cameras(&c1, &c2).unwrap();
        let gt = exact_correspondences(&scene, &c1, &c2);

        let same = perturb_matches(&gt.matches, 0.0, PerturbMode::Perpendicular, &f, 0).unwrap();
        assert_eq!(same, gt.matches);

        let moved = perturb_matches(&gt.matches, 3.0, PerturbMode::Perpendicular, &f, 0).unwrap();
        for c in moved.correspondences() {
            let (forward, _) = sed_terms(&c.p, &c.p_prime, &f).unwrap();
            assert!((forward - 3.0).abs() < 1e-9);
            assert!(sed(&c.p, &c.p_prime, &f).unwrap() >= 1.5 - 1e-9);
        }

        let r1 = perturb_matches(&gt.matches, 2.0, PerturbMode::Random, &f, 9).unwrap();
        let r2 = perturb_matches(&gt.matches, 2.0, PerturbMode::Random, &f, 9).unwrap();
        assert_eq!(r1, r2);
        for (a, b) in r1
            .correspondences()
            .iter()
            .zip(gt.matches.correspondences())
        {
            assert!(((a.p_prime - b.p_prime).norm() - 2.0).abs() < 1e-9);
        }
        assert!(perturb_matches(&gt.matches, -1.0, PerturbMode::Random, &f, 0).is_err());
    }

    #[test]
    fn pose_perturbation() {
        let ext = camera_at(Vector3::new(0.0, 1.0, 6.0)).extrinsics;
        let same = perturb_pose(&ext, 0.0, 0.0, 5).unwrap();
        assert!((same.rotation() - ext.rotation()).abs().max() < 1e-15);
        assert!((same.translation() - ext.translation()).norm() < 1e-15);

        let moved = perturb_pose(&ext, 1.0, 0.5, 5).unwrap();
        assert!((rotation_angle_deg(&ext, &moved) - 1.0).abs() < 1e-6);
        assert_eq!(moved, perturb_pose(&ext, 1.0, 0.5, 5).unwrap());
        assert_ne!(moved, perturb_pose(&ext, 1.0, 0.5, 6).unwrap());
    }

    #[test]
    fn rendering() {
        let cam = camera_at(Vector3::new(0.0, 0.0, 5.0));
        let empty = PointScene {
            seed: 0,
            bbox_min: [0.0; 3],
            bbox_max: [0.0; 3],
            points: vec![],
        };
        let img = render_view(&empty, &cam, 1.0).unwrap();
        assert!(img.data.iter().all(|&v| v == 0.0));

        let cam = Camera::new(
            Intrinsics::new(100.0, 100.0, 64.0, 64.0, 128, 128).unwrap(),
            cam.extrinsics,
        )
        .unwrap();
        let single = PointScene {
            points: vec![ScenePoint {
                id: 0,
                xyz: [0.0; 3],
                intensity: 0.8,
            }],
            ..empty
        };
        let img = render_view(&single, &cam, 1.5).unwrap();
        let (argmax, max) = img
            .data
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert_eq!((argmax % 128, argmax / 128), (64, 64));
        assert!((max - 0.8).abs() < 1e-6);
        assert!(render_view(&single, &cam, 0.0).is_err());
    }
}
