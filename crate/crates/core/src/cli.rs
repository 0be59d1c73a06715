//! The `tsed` command line.
//!
//! Exit codes: 0 on success, 2 for usage and validation errors, 3 for I/O errors.

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;

use crate::camera::{
    build_ray_map, frequency_encode, localize_camera, Camera, EncodingConfig, Intrinsics,
};
use crate::error::{Error, Result};
use crate::io::{self, ConversionHook, InputFile, Payload, PosesFile, ReportDocument};
use crate::matching::{load_matches, match_file_name, save_matches, MatchSet, MatcherConfig};
use crate::metric::{
    count_range, evaluate_sequence, float_range, pair_indices, report_from_seds, sweep_from_seds,
    Detect, EvalOptions, Frame, MatchSource, PairMode, PairSeds, Thresholds, DEFAULT_T_ERROR,
    DEFAULT_T_MATCHES,
};
use crate::synthetic::{exact_correspondences, make_scene_in_box, render_view};
use crate::trajectory::{
    generate, generate_center_orbit_clevr, look_at, TrajectoryKind, TrajectorySpec,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "tsed",
    version,
    about = "Epipolar consistency of camera-conditioned image sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score a sequence and write a JSON report.
    Eval(EvalArgs),
    /// Consistent-pair fraction over a grid of thresholds, as CSV.
    Sweep(SweepArgs),
    /// Generate a camera trajectory.
    Traj(TrajArgs),
    /// Export the encoded ray map of one frame.
    Rays(RaysArgs),
    /// Create a synthetic point scene with exact matches and optional renders.
    Scene(SceneArgs),
    /// Convert a RealEstate10K camera file to poses JSON.
    #[command(name = "ingest-re10k")]
    IngestRe10k(IngestArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Poses JSON for the sequence.
    #[arg(long)]
    poses: PathBuf,
    /// Directory of frame images named `<id>.pgm` or `<id>.ppm`.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Directory of precomputed `matches_IIII_JJJJ.csv` files; skips the built-in matcher.
    #[arg(long)]
    matches: Option<PathBuf>,
    /// Measure distances as fractions of the image diagonal.
    #[arg(long)]
    normalize: bool,
    /// Evaluate every frame pair instead of neighbours only.
    #[arg(long)]
    all_pairs: bool,
    /// Command that converts a non-PNM image (path appended) to PNM on stdout.
    #[arg(long, value_name = "CMD")]
    convert_cmd: Option<String>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_T_ERROR)]
    t_error: f64,
    #[arg(long, default_value_t = DEFAULT_T_MATCHES)]
    t_matches: usize,
    /// Include each pair's fundamental matrix in the report.
    #[arg(long = "emit-F")]
    emit_f: bool,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    /// `START:END:STEP`, inclusive.
    #[arg(long, default_value = "0.5:8:0.5")]
    t_error: String,
    /// `START:END:STEP`, inclusive.
    #[arg(long, default_value = "5:50:5")]
    t_matches: String,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a JSON report document with the grid.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Orbit,
    Hop,
    Spin,
    ClevrOrbit,
}

#[derive(Debug, Args)]
struct CameraArgs {
    #[arg(long, default_value_t = 256)]
    width: u32,
    #[arg(long, default_value_t = 256)]
    height: u32,
    #[arg(long, default_value_t = 256.0)]
    focal: f64,
}

impl CameraArgs {
    fn intrinsics(&self) -> Result<Intrinsics> {
        Intrinsics::centered(self.focal, self.width, self.height)
    }
}

#[derive(Debug, Args)]
struct TrajArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    /// Starting camera center `X,Y,Z`; the camera looks at the pivot.
    #[arg(long, default_value = "0,3,7")]
    start: String,
    #[arg(long, default_value = "0,0,0")]
    pivot: String,
    /// World up `X,Y,Z`.
    #[arg(long, default_value = "0,1,0")]
    up: String,
    /// Total sweep angle in degrees; defaults to 90 (orbit), 180 (hop) or 360 (spin).
    #[arg(long)]
    total_deg: Option<f64>,
    #[command(flatten)]
    camera: CameraArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RaysArgs {
    #[arg(long)]
    poses: PathBuf,
    /// Frame id; the first frame when omitted.
    #[arg(long)]
    frame: Option<String>,
    /// Express rays relative to this frame's pose.
    #[arg(long)]
    reference: Option<String>,
    #[arg(long, default_value_t = 8)]
    n_freq: usize,
    #[arg(long, default_value_t = 1.0)]
    f1: f64,
    #[arg(long, default_value_t = 1.0)]
    center_scale: f64,
    /// Write CSV instead of the binary RAYE format.
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SceneArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    points: usize,
    /// Per-axis extent `X,Y,Z` of the point box centered at the origin.
    #[arg(long, default_value = "4,0.25,4")]
    extent: String,
    /// Use these cameras instead of generating an orbit.
    #[arg(long)]
    poses: Option<PathBuf>,
    /// Frames of the generated orbit about the origin.
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long, default_value = "0,3,7")]
    start: String,
    #[command(flatten)]
    camera: CameraArgs,
    /// Write ground-truth matches for every pair instead of neighbours only.
    #[arg(long)]
    all_pairs: bool,
    /// Also render each frame to `<id>.pgm`.
    #[arg(long)]
    render: bool,
    /// Gaussian dot radius in pixels for renders.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IngestArgs {
    file: PathBuf,
    #[arg(long)]
    width: u32,
    #[arg(long)]
    height: u32,
    #[arg(long, default_value_t = 10)]
    stride: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_io() {
                EXIT_IO
            } else {
                EXIT_INVALID
            }
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Eval(args) => eval(args),
        Command::Sweep(args) => sweep(args),
        Command::Traj(args) => traj(args),
        Command::Rays(args) => rays(args),
        Command::Scene(args) => scene(args),
        Command::IngestRe10k(args) => ingest(args),
    }
}

fn parse_vec3(text: &str, what: &str) -> Result<Vector3<f64>> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidConfig(format!("{what}: expected X,Y,Z, got {text:?}")))?;
    match parts[..] {
        [x, y, z] if parts.iter().all(|v| v.is_finite()) => Ok(Vector3::new(x, y, z)),
        _ => Err(Error::InvalidConfig(format!(
            "{what}: expected X,Y,Z, got {text:?}"
        ))),
    }
}

fn parse_range<T: std::str::FromStr>(text: &str, what: &str) -> Result<(T, T, T)> {
    let bad = || Error::InvalidConfig(format!("{what}: expected START:END:STEP, got {text:?}"));
    let parts: Vec<T> = text
        .split(':')
        .map(|s| s.trim().parse::<T>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match <[T; 3]>::try_from(parts) {
        Ok([a, b, c]) => Ok((a, b, c)),
        Err(_) => Err(bad()),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::file(path, e)),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::file(path, e))
}

struct LoadedSequence {
    frames: Vec<Frame>,
    source: Box<dyn MatchSource>,
    inputs: Vec<InputFile>,
    opts: EvalOptions,
}

fn find_image(dir: &Path, id: &str, hook: Option<&ConversionHook>) -> Result<PathBuf> {
    for ext in ["pgm", "ppm", "pnm"] {
        let path = dir.join(format!("{id}.{ext}"));
        if path.is_file() {
            return Ok(path);
        }
    }
    if hook.is_some() {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::file(dir, e))?;
        let mut candidates: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.file_stem().and_then(|s| s.to_str()) == Some(id))
            .collect();
        candidates.sort();
        if let Some(path) = candidates.into_iter().next() {
            return Ok(path);
        }
    }
    Err(Error::MissingImage(format!("{id} in {}", dir.display())))
}

fn load_sequence(args: &InputArgs) -> Result<LoadedSequence> {
    let poses = io::read_poses(&args.poses)?;
    let mut inputs = vec![InputFile::from_path(&args.poses)?];
    let mut frames: Vec<Frame> = poses
        .cameras()?
        .into_iter()
        .map(|(id, cam)| Frame::new(id, cam))
        .collect();
    let opts = EvalOptions {
        normalize_by_diagonal: args.normalize,
        pairs: if args.all_pairs {
            PairMode::All
        } else {
            PairMode::Neighbors
        },
        ..EvalOptions::default()
    };

    let source: Box<dyn MatchSource> = if let Some(dir) = &args.matches {
        let mut sets: HashMap<(usize, usize), MatchSet> = HashMap::new();
        for (i, j) in pair_indices(frames.len(), opts.pairs) {
            let forward = dir.join(match_file_name(i, j));
            let backward = dir.join(match_file_name(j, i));
            let (path, key) = if forward.is_file() {
                (forward, (i, j))
            } else if backward.is_file() {
                (backward, (j, i))
            } else {
                return Err(Error::MissingMatches { i, j });
            };
            sets.insert(key, load_matches(&path, key)?);
            inputs.push(InputFile::from_path(&path)?);
        }
        Box::new(sets)
    } else if let Some(dir) = &args.images {
        let hook = args
            .convert_cmd
            .as_deref()
            .map(ConversionHook::parse)
            .transpose()?;
        for frame in &mut frames {
            let path = find_image(dir, &frame.id, hook.as_ref())?;
            let image = io::read_image(&path, hook.as_ref())?;
            inputs.push(InputFile::from_path(&path)?);
            frame.image = Some(image.to_gray());
        }
        Box::new(Detect(MatcherConfig::default()))
    } else {
        return Err(Error::InvalidConfig(
            "either --images or --matches is required".into(),
        ));
    };
    Ok(LoadedSequence {
        frames,
        source,
        inputs,
        opts,
    })
}

fn evaluate(loaded: &LoadedSequence) -> Result<Vec<PairSeds>> {
    evaluate_sequence(&loaded.frames, loaded.source.as_ref(), &loaded.opts)
}

fn eval(args: EvalArgs) -> Result<()> {
    let th = Thresholds::new(args.t_matches, args.t_error)?;
    let loaded = load_sequence(&args.input)?;
    let report = report_from_seds(&evaluate(&loaded)?, &th, args.emit_f);
    let summary = format!(
        "fraction {:.6} ({} of {} evaluable pairs consistent, {} degenerate)",
        report.fraction,
        report.counts.consistent,
        report.counts.evaluable(),
        report.counts.degenerate_baseline
    );
    let doc = ReportDocument::new(loaded.inputs, Payload::ConsistencyReport(report))?;
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    write_output(args.out.as_deref(), &text)?;
    if args.out.is_some() {
        println!("{summary}");
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let (e0, e1, es) = parse_range::<f64>(&args.t_error, "--t-error")?;
    let (m0, m1, ms) = parse_range::<usize>(&args.t_matches, "--t-matches")?;
    let t_errors = float_range(e0, e1, es)?;
    let t_matches = count_range(m0, m1, ms)?;
    let loaded = load_sequence(&args.input)?;
    let grid = sweep_from_seds(&evaluate(&loaded)?, &t_errors, &t_matches)?;
    write_output(args.out.as_deref(), &grid.to_csv())?;
    if let Some(path) = &args.report {
        let doc = ReportDocument::new(loaded.inputs, Payload::SweepGrid(grid))?;
        io::write_report(&doc, path)?;
    }
    Ok(())
}

fn traj(args: TrajArgs) -> Result<()> {
    let intrinsics = args.camera.intrinsics()?;
    let eye = parse_vec3(&args.start, "--start")?;
    let pivot = parse_vec3(&args.pivot, "--pivot")?;
    let up = parse_vec3(&args.up, "--up")?;
    let kind = match args.kind {
        KindArg::Orbit | KindArg::ClevrOrbit => TrajectoryKind::Orbit,
        KindArg::Hop => TrajectoryKind::Hop,
        KindArg::Spin => TrajectoryKind::Spin,
    };
    // The ablation orbit always circles the world origin.
    let pivot = if let KindArg::ClevrOrbit = args.kind {
        Vector3::zeros()
    } else {
        pivot
    };
    let start = Camera::new(intrinsics, look_at(&eye, &pivot, &up)?)?;
    let mut spec = TrajectorySpec::new(kind, start, pivot, args.frames).with_up(up);
    if let Some(deg) = args.total_deg {
        spec = spec.with_total_degrees(deg);
    }
    let seq = generate(&spec)?;
    io::write_poses(
        &PosesFile::from_sequence(seq.intrinsics, &seq.poses),
        &args.out,
    )
}

fn rays(args: RaysArgs) -> Result<()> {
    let poses = io::read_poses(&args.poses)?;
    let cameras = poses.cameras()?;
    let lookup = |id: &str| {
        cameras
            .iter()
            .find(|(fid, _)| fid == id)
            .map(|(_, cam)| *cam)
            .ok_or_else(|| Error::MissingPose(id.to_string()))
    };
    let mut cam = match &args.frame {
        Some(id) => lookup(id)?,
        None => cameras[0].1,
    };
    if let Some(reference) = &args.reference {
        cam = localize_camera(&cam, &lookup(reference)?.extrinsics);
    }
    let cfg = EncodingConfig {
        n_freq: args.n_freq,
        f1: args.f1,
        center_scale: args.center_scale,
    };
    let encoded = frequency_encode(&build_ray_map(&cam), &cfg)?;
    io::write_rays(&encoded, &args.out, args.csv)
}

fn scene(args: SceneArgs) -> Result<()> {
    let extent = parse_vec3(&args.extent, "--extent")?;
    let scene = make_scene_in_box(args.seed, args.points, [extent.x, extent.y, extent.z])?;
    let poses = match &args.poses {
        Some(path) => io::read_poses(path)?,
        None => {
            let intrinsics = args.camera.intrinsics()?;
            let eye = parse_vec3(&args.start, "--start")?;
            let start = Camera::new(intrinsics, look_at(&eye, &Vector3::zeros(), &Vector3::y())?)?;
            let seq = generate_center_orbit_clevr(&start, args.frames)?;
            PosesFile::from_sequence(seq.intrinsics, &seq.poses)
        }
    };
    let cameras = poses.cameras()?;

    create_dir(&args.out)?;
    io::write_poses(&poses, args.out.join("poses.json"))?;
    let scene_path = args.out.join("scene.json");
    let scene_text = serde_json::to_string_pretty(&scene)? + "\n";
    std::fs::write(&scene_path, scene_text).map_err(|e| Error::file(&scene_path, e))?;

    let mode = if args.all_pairs {
        PairMode::All
    } else {
        PairMode::Neighbors
    };
    for (i, j) in pair_indices(cameras.len(), mode) {
        let mut gt = exact_correspondences(&scene, &cameras[i].1, &cameras[j].1).matches;
        gt.pair = (i, j);
        save_matches(&gt, args.out.join(match_file_name(i, j)))?;
    }
    if args.render {
        for (id, cam) in &cameras {
            let image = render_view(&scene, cam, args.sigma)?.to_image8();
            io::write_image(&image, args.out.join(format!("{id}.pgm")))?;
        }
    }
    Ok(())
}

fn ingest(args: IngestArgs) -> Result<()> {
    let seq = io::read_re10k(&args.file, args.width, args.height)?.subsample(args.stride)?;
    let first = seq.frames.first().ok_or(Error::EmptyInput)?;
    let intrinsics = first.camera.intrinsics;
    if let Some(f) = seq
        .frames
        .iter()
        .find(|f| f.camera.intrinsics != intrinsics)
    {
        return Err(Error::InvalidConfig(format!(
            "frame {} has different intrinsics; poses JSON needs one shared camera",
            f.timestamp
        )));
    }
    let poses = PosesFile::from_cameras(
        intrinsics,
        seq.frames
            .iter()
            .map(|f| (f.timestamp.to_string(), &f.camera.extrinsics)),
    );
    io::write_poses(&poses, &args.out)?;
    println!(
        "{} frames written to {}",
        poses.frames.len(),
        args.out.display()
    );
    Ok(())
}
