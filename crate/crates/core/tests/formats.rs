use nalgebra::Vector3;
use proptest::prelude::*;
use tsed_core::camera::{Camera, Intrinsics};
use tsed_core::image::Image8;
use tsed_core::io::{self, format_re10k, parse_re10k, PosesFile, Re10kFrame, Re10kSequence};
use tsed_core::metric::{default_t_errors, default_t_matches, SweepGrid};
use tsed_core::trajectory::look_at;
use tsed_core::Error;

fn arb_camera() -> impl Strategy<Value = Camera> {
    (
        (100.0f64..900.0, 100.0f64..900.0, 0.3f64..0.7, 0.3f64..0.7),
        (-5.0f64..5.0, -5.0f64..5.0, 2.0f64..9.0),
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
    )
        .prop_map(|((fx, fy, cx, cy), (ex, ey, ez), (tx, ty, tz))| {
            let (w, h) = (640, 360);
            let k = Intrinsics::new(fx, fy, cx * w as f64, cy * h as f64, w, h).unwrap();
            let eye = Vector3::new(ex, ey, ez);
            let ext = look_at(&eye, &Vector3::new(tx, ty, tz), &Vector3::y()).unwrap();
            Camera::new(k, ext).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn re10k_round_trip(cams in proptest::collection::vec(arb_camera(), 1..12)) {
        let seq = Re10kSequence {
            url: "https://www.youtube.com/watch?v=xyz".into(),
            frames: cams.iter().enumerate().map(|(k, c)| Re10kFrame { timestamp: 33_366 * k as i64, camera: *c }).collect(),
        };
        let back = parse_re10k(&format_re10k(&seq), 640, 360).unwrap();
        prop_assert_eq!(&back.url, &seq.url);
        prop_assert_eq!(back.frames.len(), seq.frames.len());
        for (a, b) in seq.frames.iter().zip(&back.frames) {
            prop_assert_eq!(a.timestamp, b.timestamp);
            let (ka, kb) = (a.camera.intrinsics, b.camera.intrinsics);
            for (x, y) in [(ka.fx, kb.fx), (ka.fy, kb.fy), (ka.cx, kb.cx), (ka.cy, kb.cy)] {
                prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
            }
            let (ea, eb) = (a.camera.extrinsics, b.camera.extrinsics);
            prop_assert!((ea.rotation() - eb.rotation()).amax() <= 1e-9);
            prop_assert!((ea.translation() - eb.translation()).amax() <= 1e-9);
        }
    }

    #[test]
    fn sweep_csv_round_trip(cells in proptest::collection::vec(0.0f64..=1.0, 160)) {
        let grid = SweepGrid {
            t_errors: default_t_errors(),
            t_matches: default_t_matches(),
            cells: cells.chunks(16).map(|r| r.to_vec()).collect(),
        };
        let back = SweepGrid::from_csv(&grid.to_csv()).unwrap();
        prop_assert_eq!(&back.t_errors, &grid.t_errors);
        prop_assert_eq!(&back.t_matches, &grid.t_matches);
        for (ra, rb) in grid.cells.iter().zip(&back.cells) {
            for (a, b) in ra.iter().zip(rb) {
                prop_assert!((a - b).abs() <= 5e-7);
            }
        }
    }
}

#[test]
fn re10k_errors_carry_line_numbers() {
    let good = "0 0.5 0.9 0.5 0.5 0 0 1 0 0 0 0 1 0 0 0 0 1 0";
    let cases = [
        (format!("u\n{good}\n{good} 7\n"), 3),
        (
            format!("u\n{good}\n\n{}\n", good.replace(" 0.9 ", " x ")),
            4,
        ),
        (format!("u\n{}\n", good.replacen(" 1 0 0", " 2 0 0", 1)), 2),
    ];
    for (text, expected) in cases {
        let err = parse_re10k(&text, 64, 64).unwrap_err();
        let line = match err {
            Error::FieldCount { line, .. }
            | Error::Parse { line, .. }
            | Error::NonRotation { line, .. } => line,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(line, expected);
        assert!(
            err.to_string().contains(&format!("line {expected}")),
            "{err}"
        );
    }
    assert!(parse_re10k("", 64, 64).is_err());
}

#[test]
fn files_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let k = Intrinsics::centered(300.0, 320, 240).unwrap();
    let poses: Vec<_> = (0..4)
        .map(|i| {
            look_at(
                &Vector3::new(i as f64, 2.0, 6.0),
                &Vector3::zeros(),
                &Vector3::y(),
            )
            .unwrap()
        })
        .collect();
    let file = PosesFile::from_sequence(k, &poses);
    let path = dir.path().join("poses.json");
    io::write_poses(&file, &path).unwrap();
    assert_eq!(io::read_poses(&path).unwrap(), file);

    let img = Image8::new(5, 3, 3, (0..45).collect()).unwrap();
    let path = dir.path().join("img.ppm");
    io::write_image(&img, &path).unwrap();
    assert_eq!(io::read_image(&path, None).unwrap(), img);

    let grid = SweepGrid {
        t_errors: vec![0.5, 1.0],
        t_matches: vec![5],
        cells: vec![vec![0.25, 0.123456]],
    };
    let path = dir.path().join("grid.csv");
    io::write_sweep(&grid, &path).unwrap();
    assert_eq!(io::read_sweep(&path).unwrap(), grid);

    let missing = dir.path().join("nope.json");
    let err = io::read_poses(&missing).unwrap_err();
    assert!(err.is_io());
    assert!(err.to_string().contains("nope.json"));
}
