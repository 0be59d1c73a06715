use std::path::Path;
use std::process::{Command, Output};

use tsed_core::io::{self, decode_raye, Payload};
use tsed_core::metric::SweepGrid;

fn tsed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsed"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = tsed(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "tsed {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    let out = tsed(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["eval", "sweep", "traj", "rays", "scene", "ingest-re10k"] {
        assert!(text.contains(cmd), "{text}");
    }
    assert_eq!(tsed(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    let out = tsed(&["eval", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(
        tsed(&["traj", "--kind", "zigzag", "--out", "x"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        tsed(&["eval", "--poses", "p.json", "--t-error", "abc"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn scene_then_eval_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["scene", "--seed", "5", "--render", "--out", p(d)]);
    for name in [
        "poses.json",
        "scene.json",
        "0000.pgm",
        "0009.pgm",
        "matches_0000_0001.csv",
        "matches_0008_0009.csv",
    ] {
        assert!(d.join(name).is_file(), "missing {name}");
    }

    // Ground-truth matches.
    let report = d.join("gt.json");
    let stdout = ok(&[
        "eval",
        "--poses",
        p(&d.join("poses.json")),
        "--matches",
        p(d),
        "--emit-F",
        "--out",
        p(&report),
    ]);
    assert!(stdout.starts_with("fraction 1.000000"), "{stdout}");
    let doc = io::read_report(&report).unwrap();
    assert!(doc.verify_hash().unwrap());
    assert_eq!(doc.inputs.len(), 10);
    let Payload::ConsistencyReport(r) = &doc.payload else {
        panic!("wrong payload")
    };
    assert_eq!(r.pairs.len(), 9);
    assert!(r.pairs.iter().all(|p| p.fundamental.is_some()));
    assert!(r.pairs.iter().all(|p| p.median_sed.unwrap() < 1e-6));

    // Built-in matcher on the rendered frames, JSON on stdout.
    let stdout = ok(&[
        "eval",
        "--poses",
        p(&d.join("poses.json")),
        "--images",
        p(d),
    ]);
    let value: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(value["payload_type"], "consistency_report");
    assert_eq!(value["fraction"], 1.0);
    assert!(value["pairs"][0].get("F").is_none());

    // Reruns hash identically.
    let again = ok(&[
        "eval",
        "--poses",
        p(&d.join("poses.json")),
        "--images",
        p(d),
    ]);
    let again: serde_json::Value = serde_json::from_str(&again).unwrap();
    assert_eq!(value["payload_sha256"], again["payload_sha256"]);

    let grid_path = d.join("grid.csv");
    let report_path = d.join("grid.json");
    ok(&[
        "sweep",
        "--poses",
        p(&d.join("poses.json")),
        "--matches",
        p(d),
        "--out",
        p(&grid_path),
        "--report",
        p(&report_path),
    ]);
    let grid: SweepGrid = io::read_sweep(&grid_path).unwrap();
    assert_eq!((grid.t_matches.len(), grid.t_errors.len()), (10, 16));
    let doc = io::read_report(&report_path).unwrap();
    assert!(matches!(doc.payload, Payload::SweepGrid(_)));

    let custom = ok(&[
        "sweep",
        "--poses",
        p(&d.join("poses.json")),
        "--matches",
        p(d),
        "--t-error",
        "1:2:0.5",
        "--t-matches",
        "10:20:10",
    ]);
    let grid = SweepGrid::from_csv(&custom).unwrap();
    assert_eq!(grid.t_errors, vec![1.0, 1.5, 2.0]);
    assert_eq!(grid.t_matches, vec![10, 20]);
}

#[test]
fn missing_inputs_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "traj",
        "--kind",
        "orbit",
        "--frames",
        "4",
        "--out",
        p(&d.join("poses.json")),
    ]);
    let poses = d.join("poses.json");

    let out = tsed(&[
        "eval",
        "--poses",
        p(&d.join("absent.json")),
        "--matches",
        p(d),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let out = tsed(&["eval", "--poses", p(&poses), "--matches", p(d)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0"));
    let out = tsed(&["eval", "--poses", p(&poses), "--images", p(d)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.json"), "{ not json").unwrap();
    assert_eq!(
        tsed(&["eval", "--poses", p(&d.join("bad.json")), "--matches", p(d)])
            .status
            .code(),
        Some(2)
    );

    ok(&["scene", "--frames", "3", "--out", p(d)]);
    let poses = d.join("poses.json");
    assert_eq!(tsed(&["eval", "--poses", p(&poses)]).status.code(), Some(2));
    assert_eq!(
        tsed(&[
            "eval",
            "--poses",
            p(&poses),
            "--matches",
            p(d),
            "--t-error",
            "-1"
        ])
        .status
        .code(),
        Some(2)
    );
    std::fs::write(d.join("matches_0000_0001.csv"), "u1,v1,u2,v2\n1,2,3\n").unwrap();
    assert_eq!(
        tsed(&["eval", "--poses", p(&poses), "--matches", p(d)])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        tsed(&[
            "sweep",
            "--poses",
            p(&poses),
            "--matches",
            p(d),
            "--t-error",
            "1:2"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        tsed(&[
            "traj",
            "--kind",
            "orbit",
            "--frames",
            "1",
            "--out",
            p(&d.join("t.json"))
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        tsed(&[
            "traj",
            "--kind",
            "orbit",
            "--start",
            "0,0",
            "--out",
            p(&d.join("t.json"))
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn trajectories_have_expected_lengths() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, frames) in [("orbit", 10), ("hop", 7), ("spin", 12), ("clevr-orbit", 10)] {
        let path = dir.path().join(format!("{kind}.json"));
        ok(&[
            "traj",
            "--kind",
            kind,
            "--frames",
            &frames.to_string(),
            "--pivot",
            "0,0,0",
            "--out",
            p(&path),
        ]);
        let poses = io::read_poses(&path).unwrap();
        assert_eq!(poses.frames.len(), frames);
        assert_eq!(poses.intrinsics.width, 256);
        poses.cameras().unwrap();
    }
}

#[test]
fn rays_binary_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let poses = d.join("poses.json");
    ok(&[
        "traj",
        "--kind",
        "orbit",
        "--frames",
        "3",
        "--width",
        "16",
        "--height",
        "12",
        "--focal",
        "20",
        "--out",
        p(&poses),
    ]);
    let bin = d.join("r.raye");
    ok(&[
        "rays",
        "--poses",
        p(&poses),
        "--frame",
        "0001",
        "--reference",
        "0000",
        "--n-freq",
        "4",
        "--out",
        p(&bin),
    ]);
    let data = decode_raye(&std::fs::read(&bin).unwrap()).unwrap();
    assert_eq!((data.height, data.width, data.channels), (12, 16, 48));

    let csv = d.join("r.csv");
    ok(&[
        "rays",
        "--poses",
        p(&poses),
        "--csv",
        "--n-freq",
        "1",
        "--out",
        p(&csv),
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 16 * 12);

    assert_eq!(
        tsed(&[
            "rays",
            "--poses",
            p(&poses),
            "--frame",
            "nope",
            "--out",
            p(&bin)
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        tsed(&[
            "rays",
            "--poses",
            p(&poses),
            "--n-freq",
            "0",
            "--out",
            p(&bin)
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn ingest_re10k_subsamples() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut text = String::from("https://www.youtube.com/watch?v=abc\n");
    for k in 0..201 {
        let z = 0.01 * k as f64;
        text.push_str(&format!(
            "{} 0.5 0.9 0.5 0.5 0 0 1 0 0 0 0 1 0 0 0 0 1 {z}\n",
            1000 * k
        ));
    }
    std::fs::write(d.join("clip.txt"), &text).unwrap();
    let out = d.join("poses.json");
    let stdout = ok(&[
        "ingest-re10k",
        p(&d.join("clip.txt")),
        "--width",
        "640",
        "--height",
        "360",
        "--out",
        p(&out),
    ]);
    assert!(stdout.contains("21 frames"));
    let poses = io::read_poses(&out).unwrap();
    assert_eq!(poses.frames.len(), 21);
    assert_eq!(poses.frames[1].id, "10000");
    assert_eq!(poses.intrinsics.fx, 320.0);
    assert_eq!(poses.intrinsics.fy, 324.0);

    std::fs::write(d.join("bad.txt"), "url\n1 2 3\n").unwrap();
    let out = tsed(&[
        "ingest-re10k",
        p(&d.join("bad.txt")),
        "--width",
        "10",
        "--height",
        "10",
        "--out",
        p(&d.join("x.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn conversion_hook_feeds_non_pnm_images() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "scene",
        "--seed",
        "2",
        "--frames",
        "3",
        "--render",
        "--out",
        p(d),
    ]);
    // Rename the renders so only the hook can read them.
    for k in 0..3 {
        std::fs::rename(d.join(format!("{k:04}.pgm")), d.join(format!("{k:04}.img"))).unwrap();
    }
    let poses = d.join("poses.json");
    assert_eq!(
        tsed(&["eval", "--poses", p(&poses), "--images", p(d)])
            .status
            .code(),
        Some(3)
    );
    let stdout = ok(&[
        "eval",
        "--poses",
        p(&poses),
        "--images",
        p(d),
        "--convert-cmd",
        "cat",
    ]);
    let value: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(value["pairs"].as_array().unwrap().len(), 2);
}

#[test]
fn generated_orbit_renders_and_evaluates_to_nine_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let poses = d.join("orbit.json");
    ok(&[
        "traj",
        "--kind",
        "orbit",
        "--frames",
        "10",
        "--start",
        "0,3,7",
        "--pivot",
        "0,0,0",
        "--out",
        p(&poses),
    ]);
    let views = d.join("views");
    ok(&[
        "scene",
        "--seed",
        "9",
        "--poses",
        p(&poses),
        "--render",
        "--out",
        p(&views),
    ]);
    let stdout = ok(&[
        "eval",
        "--poses",
        p(&views.join("poses.json")),
        "--images",
        p(&views),
    ]);
    let value: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(value["pairs"].as_array().unwrap().len(), 9);
    assert_eq!(value["thresholds"]["t_matches"], 10);
    assert_eq!(value["fraction"], 1.0);
}

#[test]
fn single_cell_sweep_matches_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "scene",
        "--seed",
        "4",
        "--frames",
        "6",
        "--render",
        "--out",
        p(d),
    ]);
    let poses = d.join("poses.json");
    for (t_error, t_matches) in [("0.2", "40"), ("2", "10"), ("0.5", "60")] {
        let eval = ok(&[
            "eval",
            "--poses",
            p(&poses),
            "--images",
            p(d),
            "--t-error",
            t_error,
            "--t-matches",
            t_matches,
        ]);
        let fraction = serde_json::from_str::<serde_json::Value>(&eval).unwrap()["fraction"]
            .as_f64()
            .unwrap();
        let csv = ok(&[
            "sweep",
            "--poses",
            p(&poses),
            "--images",
            p(d),
            "--t-error",
            &format!("{t_error}:{t_error}:1"),
            "--t-matches",
            &format!("{t_matches}:{t_matches}:1"),
        ]);
        let grid = SweepGrid::from_csv(&csv).unwrap();
        assert_eq!(grid.cells.len(), 1);
        assert!(
            (grid.cells[0][0] - fraction).abs() < 5e-7,
            "{t_error}/{t_matches}: {} vs {fraction}",
            grid.cells[0][0]
        );
    }
}
