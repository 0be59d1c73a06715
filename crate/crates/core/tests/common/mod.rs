#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::Vector3;
use rand::Rng;
use tsed_core::camera::{Camera, Intrinsics};
use tsed_core::matching::MatchSet;
use tsed_core::metric::{pair_indices, Frame, PairMode};
use tsed_core::synthetic::{exact_correspondences, PointScene};
use tsed_core::trajectory::{generate, look_at, TrajectoryKind, TrajectorySpec};

pub const SIZE: u32 = 256;
pub const FOCAL: f64 = 256.0;

pub fn intrinsics() -> Intrinsics {
    Intrinsics::centered(FOCAL, SIZE, SIZE).unwrap()
}

pub fn start_camera(eye: Vector3<f64>, target: Vector3<f64>) -> Camera {
    Camera::new(intrinsics(), look_at(&eye, &target, &Vector3::y()).unwrap()).unwrap()
}

/// Orbit about the origin starting from `(0, 3, 7)`.
pub fn orbit(frames: usize, total_degrees: f64) -> Vec<Camera> {
    let start = start_camera(Vector3::new(0.0, 3.0, 7.0), Vector3::zeros());
    let spec = TrajectorySpec::new(TrajectoryKind::Orbit, start, Vector3::zeros(), frames)
        .with_total_degrees(total_degrees);
    generate(&spec).unwrap().cameras().collect()
}

/// Two cameras looking roughly at the origin from random positions 4 to 8 units away.
pub fn random_pair(rng: &mut impl Rng) -> (Camera, Camera) {
    let mut cam = || {
        let k = Intrinsics::new(
            rng.gen_range(150.0..450.0),
            rng.gen_range(150.0..450.0),
            rng.gen_range(140.0..180.0),
            rng.gen_range(100.0..140.0),
            320,
            240,
        )
        .unwrap();
        let dir = loop {
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let n: f64 = v.norm();
            if n > 0.2 && n <= 1.0 && (v.y / n).abs() < 0.9 {
                break v / n;
            }
        };
        let eye = dir * rng.gen_range(4.0..8.0);
        let target = Vector3::new(
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-0.3..0.3),
        );
        Camera::new(k, look_at(&eye, &target, &Vector3::y()).unwrap()).unwrap()
    };
    (cam(), cam())
}

pub fn frames(cameras: &[Camera]) -> Vec<Frame> {
    cameras
        .iter()
        .enumerate()
        .map(|(k, c)| Frame::new(format!("{k:04}"), *c))
        .collect()
}

pub fn exact_match_map(
    scene: &PointScene,
    cameras: &[Camera],
    mode: PairMode,
) -> HashMap<(usize, usize), MatchSet> {
    pair_indices(cameras.len(), mode)
        .into_iter()
        .map(|(i, j)| {
            let mut set = exact_correspondences(scene, &cameras[i], &cameras[j]).matches;
            set.pair = (i, j);
            ((i, j), set)
        })
        .collect()
}
