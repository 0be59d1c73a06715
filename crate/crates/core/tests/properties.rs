mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsed_core::camera::Camera;
use tsed_core::epipolar::fundamental_from_cameras;
use tsed_core::matching::{Correspondence, MatchSet, Provenance};
use tsed_core::metric::{
    default_t_errors, default_t_matches, evaluate_sequence, sweep_from_seds, EvalOptions,
    PairGeometry, PairMode, PairSeds, Status, Thresholds,
};
use tsed_core::synthetic::{
    exact_correspondences, make_scene, perturb_matches, perturb_pose, PerturbMode,
};

use common::*;

fn scaled(cam: &Camera, factor: f64) -> Camera {
    cam.with_extrinsics(cam.extrinsics.scale_translation(factor))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn verdicts_ignore_world_scale(seed in 0u64..10_000, noise in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c1, c2) = random_pair(&mut rng);
        let scene = make_scene(seed, 200, 2.0).unwrap();
        let truth = exact_correspondences(&scene, &c1, &c2).matches;
        let noisy = c2.with_extrinsics(perturb_pose(&c2.extrinsics, noise, 0.0, seed).unwrap());
        let th = Thresholds::default();
        let base = PairSeds::compute(&truth, PairGeometry::from_cameras(&c1, &noisy, 1e-6).unwrap(), 1.0);
        let big = PairSeds::compute(
            &truth,
            PairGeometry::from_cameras(&scaled(&c1, 1000.0), &scaled(&noisy, 1000.0), 1e-6).unwrap(),
            1.0,
        );
        prop_assert_eq!(base.status(&th), big.status(&th));
        if let (Some(a), Some(b)) = (base.median(), big.median()) {
            prop_assert!((a - b).abs() <= 1e-6 * a.max(1e-3), "{} vs {}", a, b);
        }
    }

    #[test]
    fn sweep_is_monotone(seds in proptest::collection::vec(proptest::collection::vec(0.0f64..10.0, 0..60), 1..12)) {
        let cams = orbit(2, 10.0);
        let f = fundamental_from_cameras(&cams[0], &cams[1]).unwrap();
        // Arbitrary pairs: each drawn value offsets one match away from the identity.
        let pairs: Vec<PairSeds> = seds
            .iter()
            .enumerate()
            .map(|(k, values)| {
                let base: Vec<_> = values
                    .iter()
                    .enumerate()
                    .map(|(m, &v)| {
                        let p = nalgebra::Point2::new(20.0 + m as f64 * 3.0, 40.0 + k as f64);
                        Correspondence::new(p, nalgebra::Point2::new(p.x + v, p.y + 2.0 * v), 1.0)
                    })
                    .collect();
                let set = MatchSet::new((k, k + 1), base, Provenance::Ingested).unwrap();
                PairSeds::compute(&set, PairGeometry::Valid(f), 1.0)
            })
            .collect();
        let grid = sweep_from_seds(&pairs, &default_t_errors(), &default_t_matches()).unwrap();
        for row in &grid.cells {
            for w in row.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
        }
        for col in 0..grid.t_errors.len() {
            for r in 1..grid.cells.len() {
                prop_assert!(grid.cells[r][col] <= grid.cells[r - 1][col]);
            }
        }
    }

    #[test]
    fn verdict_flips_exactly_at_the_median(seed in 0u64..10_000, delta in 0.1f64..6.0) {
        let cams = orbit(2, 12.0);
        let scene = make_scene(seed, 150, 2.0).unwrap();
        let truth = exact_correspondences(&scene, &cams[0], &cams[1]).matches;
        prop_assume!(truth.len() >= 10);
        let f = fundamental_from_cameras(&cams[0], &cams[1]).unwrap();
        let shifted = perturb_matches(&truth, delta, PerturbMode::Random, &f, seed).unwrap();
        let seds = PairSeds::compute(&shifted, PairGeometry::Valid(f), 1.0);
        let m = seds.median().unwrap();
        prop_assert_eq!(seds.status(&Thresholds::new(10, m).unwrap()), Status::ExceedsError);
        prop_assert_eq!(seds.status(&Thresholds::new(10, m.next_up()).unwrap()), Status::Consistent);
    }
}

#[test]
fn nine_matches_are_never_enough_by_default() {
    let cams = orbit(2, 10.0);
    let scene = make_scene(1, 300, 2.0).unwrap();
    let truth = exact_correspondences(&scene, &cams[0], &cams[1]).matches;
    let nine = MatchSet::new(
        (0, 1),
        truth.correspondences()[..9].to_vec(),
        Provenance::Ingested,
    )
    .unwrap();
    let f = fundamental_from_cameras(&cams[0], &cams[1]).unwrap();
    let seds = PairSeds::compute(&nine, PairGeometry::Valid(f), 1.0);
    assert_eq!(seds.median(), Some(seds.seds()[4]));
    assert!(seds.median().unwrap() < 1e-9);
    assert_eq!(
        seds.status(&Thresholds::default()),
        Status::InsufficientMatches
    );
}

#[test]
fn stationary_frames_are_excluded_not_failed() {
    let mut cams = orbit(4, 30.0);
    cams[2] = cams[1];
    let scene = make_scene(2, 300, 2.0).unwrap();
    let matches = exact_match_map(&scene, &cams, PairMode::Neighbors);
    let pairs = evaluate_sequence(&frames(&cams), &matches, &EvalOptions::default()).unwrap();
    let th = Thresholds::default();
    let statuses: Vec<_> = pairs.iter().map(|p| p.status(&th)).collect();
    assert_eq!(
        statuses,
        vec![
            Status::Consistent,
            Status::DegenerateBaseline,
            Status::Consistent
        ]
    );
    let report = tsed_core::metric::report_from_seds(&pairs, &th, false);
    assert_eq!(report.fraction, 1.0);
    assert_eq!(report.counts.degenerate_baseline, 1);
}
