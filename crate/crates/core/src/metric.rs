//! Pair-level consistency verdicts, the sequence-level consistent-pair fraction, and
//! threshold sweeps that reuse per-pair distances.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::epipolar::{
    fundamental_from_cameras_with, sed, FundamentalMatrix, DEFAULT_BASELINE_EPSILON,
};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::matching::{detect_and_match, MatchSet, MatcherConfig};

pub const DEFAULT_T_MATCHES: usize = 10;
pub const DEFAULT_T_ERROR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t_matches: usize,
    pub t_error: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            t_matches: DEFAULT_T_MATCHES,
            t_error: DEFAULT_T_ERROR,
        }
    }
}

impl Thresholds {
    pub fn new(t_matches: usize, t_error: f64) -> Result<Self> {
        let th = Thresholds { t_matches, t_error };
        th.validate()?;
        Ok(th)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_matches < 1 {
            return Err(Error::InvalidConfig("t_matches must be at least 1".into()));
        }
        if !(self.t_error.is_finite() && self.t_error > 0.0) {
            return Err(Error::InvalidConfig("t_error must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Consistent,
    InsufficientMatches,
    ExceedsError,
    DegenerateBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub i: usize,
    pub j: usize,
    /// Correspondences that produced a finite distance.
    pub n_matches: usize,
    pub median_sed: Option<f64>,
    pub status: Status,
    /// Correspondences dropped because one of their points is an epipole.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub excluded_matches: usize,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub fundamental: Option<[f64; 9]>,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub consistent: usize,
    pub insufficient_matches: usize,
    pub exceeds_error: usize,
    pub degenerate_baseline: usize,
}

impl StatusCounts {
    pub fn add(&mut self, status: Status) {
        match status {
            Status::Consistent => self.consistent += 1,
            Status::InsufficientMatches => self.insufficient_matches += 1,
            Status::ExceedsError => self.exceeds_error += 1,
            Status::DegenerateBaseline => self.degenerate_baseline += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.consistent + self.insufficient_matches + self.exceeds_error + self.degenerate_baseline
    }

    /// Pairs with defined epipolar geometry.
    pub fn evaluable(&self) -> usize {
        self.total() - self.degenerate_baseline
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub pairs: Vec<PairVerdict>,
    /// Consistent pairs over evaluable pairs; zero when nothing is evaluable.
    pub fraction: f64,
    pub counts: StatusCounts,
    pub thresholds: Thresholds,
}

impl ConsistencyReport {
    pub fn from_verdicts(pairs: Vec<PairVerdict>, thresholds: Thresholds) -> Self {
        let mut counts = StatusCounts::default();
        pairs.iter().for_each(|p| counts.add(p.status));
        ConsistencyReport {
            fraction: fraction(counts.consistent, counts.evaluable()),
            pairs,
            counts,
            thresholds,
        }
    }
}

fn fraction(consistent: usize, evaluable: usize) -> f64 {
    if evaluable == 0 {
        0.0
    } else {
        consistent as f64 / evaluable as f64
    }
}

/// Median of a sorted, nonempty slice; even lengths average the two middle values.
fn sorted_median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn median_sed(seds: &[f64]) -> Result<f64> {
    if seds.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = seds.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "distance {bad} is not a finite non-negative value"
        )));
    }
    let mut sorted = seds.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted_median(&sorted))
}

/// Epipolar geometry of a pair, or the marker that the baseline is too short to have any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairGeometry {
    Valid(FundamentalMatrix),
    DegenerateBaseline,
}

impl PairGeometry {
    pub fn from_cameras(cam1: &Camera, cam2: &Camera, baseline_epsilon: f64) -> Result<Self> {
        match fundamental_from_cameras_with(cam1, cam2, baseline_epsilon) {
            Ok(f) => Ok(PairGeometry::Valid(f)),
            Err(Error::DegenerateBaseline { .. }) => Ok(PairGeometry::DegenerateBaseline),
            Err(e) => Err(e),
        }
    }
}

/// Per-pair distances computed once and reused for every threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSeds {
    pub i: usize,
    pub j: usize,
    pub geometry: PairGeometry,
    /// Finite distances in ascending order; empty for degenerate pairs.
    sorted: Vec<f64>,
    pub excluded: usize,
}

impl PairSeds {
    pub fn compute(matches: &MatchSet, geometry: PairGeometry, scale: f64) -> PairSeds {
        let (i, j) = matches.pair;
        let PairGeometry::Valid(f) = geometry else {
            return PairSeds {
                i,
                j,
                geometry,
                sorted: Vec::new(),
                excluded: 0,
            };
        };
        let mut sorted = Vec::with_capacity(matches.len());
        let mut excluded = 0;
        for c in matches.correspondences() {
            match sed(&c.p, &c.p_prime, &f) {
                Ok(d) => sorted.push(d * scale),
                Err(_) => excluded += 1,
            }
        }
        sorted.sort_by(f64::total_cmp);
        PairSeds {
            i,
            j,
            geometry,
            sorted,
            excluded,
        }
    }

    pub fn seds(&self) -> &[f64] {
        &self.sorted
    }

    pub fn median(&self) -> Option<f64> {
        match self.geometry {
            PairGeometry::DegenerateBaseline => None,
            PairGeometry::Valid(_) if self.sorted.is_empty() => None,
            PairGeometry::Valid(_) => Some(sorted_median(&self.sorted)),
        }
    }

    pub fn status(&self, th: &Thresholds) -> Status {
        if self.geometry == PairGeometry::DegenerateBaseline {
            return Status::DegenerateBaseline;
        }
        if self.sorted.len() < th.t_matches {
            return Status::InsufficientMatches;
        }
        match self.median() {
            Some(m) if m < th.t_error => Status::Consistent,
            _ => Status::ExceedsError,
        }
    }

    pub fn verdict(&self, th: &Thresholds, emit_fundamental: bool) -> PairVerdict {
        let fundamental = match (&self.geometry, emit_fundamental) {
            (PairGeometry::Valid(f), true) => Some(f.row_major()),
            _ => None,
        };
        PairVerdict {
            i: self.i,
            j: self.j,
            n_matches: self.sorted.len(),
            median_sed: self.median(),
            status: self.status(th),
            excluded_matches: self.excluded,
            fundamental,
        }
    }
}

pub fn pair_consistency(
    matches: &MatchSet,
    geometry: &PairGeometry,
    th: &Thresholds,
) -> PairVerdict {
    PairSeds::compute(matches, *geometry, 1.0).verdict(th, false)
}

pub fn report_from_seds(
    pairs: &[PairSeds],
    th: &Thresholds,
    emit_fundamental: bool,
) -> ConsistencyReport {
    let verdicts = pairs
        .iter()
        .map(|p| p.verdict(th, emit_fundamental))
        .collect();
    ConsistencyReport::from_verdicts(verdicts, *th)
}

#[derive(Debug, Clone, Default)]
pub struct Frame {
    pub id: String,
    pub camera: Option<Camera>,
    pub image: Option<GrayImage>,
}

impl Frame {
    pub fn new(id: impl Into<String>, camera: Camera) -> Self {
        Frame {
            id: id.into(),
            camera: Some(camera),
            image: None,
        }
    }

    pub fn with_image(mut self, image: GrayImage) -> Self {
        self.image = Some(image);
        self
    }
}

/// Supplies correspondences for frame pair `(i, j)`, with `p` in frame `i`.
pub trait MatchSource: Sync {
    fn matches(&self, frames: &[Frame], i: usize, j: usize) -> Result<MatchSet>;
}

/// Runs the built-in matcher on the frame images.
#[derive(Debug, Clone, Copy, Default)]
pub struct Detect(pub MatcherConfig);

impl MatchSource for Detect {
    fn matches(&self, frames: &[Frame], i: usize, j: usize) -> Result<MatchSet> {
        let image = |k: usize| {
            frames[k]
                .image
                .as_ref()
                .ok_or_else(|| Error::MissingImage(frames[k].id.clone()))
        };
        let mut set = detect_and_match(image(i)?, image(j)?, &self.0)?;
        set.pair = (i, j);
        Ok(set)
    }
}

/// Precomputed matches keyed by frame pair. A set stored for `(j, i)` serves `(i, j)` swapped.
impl MatchSource for HashMap<(usize, usize), MatchSet> {
    fn matches(&self, _frames: &[Frame], i: usize, j: usize) -> Result<MatchSet> {
        if let Some(set) = self.get(&(i, j)) {
            let mut set = set.clone();
            set.pair = (i, j);
            return Ok(set);
        }
        if let Some(set) = self.get(&(j, i)) {
            let mut set = set.swapped();
            set.pair = (i, j);
            return Ok(set);
        }
        Err(Error::MissingMatches { i, j })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairMode {
    /// `(i, i+1)` for consecutive frames.
    #[default]
    Neighbors,
    /// Every `(i, j)` with `i < j`.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub baseline_epsilon: f64,
    /// Report distances as fractions of the image diagonal instead of pixels.
    pub normalize_by_diagonal: bool,
    pub pairs: PairMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            baseline_epsilon: DEFAULT_BASELINE_EPSILON,
            normalize_by_diagonal: false,
            pairs: PairMode::Neighbors,
        }
    }
}

pub fn pair_indices(n_frames: usize, mode: PairMode) -> Vec<(usize, usize)> {
    match mode {
        PairMode::Neighbors => (1..n_frames).map(|j| (j - 1, j)).collect(),
        PairMode::All => (0..n_frames)
            .flat_map(|i| (i + 1..n_frames).map(move |j| (i, j)))
            .collect(),
    }
}

/// Distances for every evaluated pair, in pair order.
pub fn evaluate_sequence(
    frames: &[Frame],
    source: &dyn MatchSource,
    opts: &EvalOptions,
) -> Result<Vec<PairSeds>> {
    if frames.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "a sequence needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    let cameras: Vec<&Camera> = frames
        .iter()
        .map(|f| {
            f.camera
                .as_ref()
                .ok_or_else(|| Error::MissingPose(f.id.clone()))
        })
        .collect::<Result<_>>()?;

    let results: Vec<Result<PairSeds>> = pair_indices(frames.len(), opts.pairs)
        .into_par_iter()
        .map(|(i, j)| {
            let geometry =
                PairGeometry::from_cameras(cameras[i], cameras[j], opts.baseline_epsilon)?;
            let matches = source.matches(frames, i, j)?;
            let scale = if opts.normalize_by_diagonal {
                1.0 / cameras[i].intrinsics.diagonal()
            } else {
                1.0
            };
            Ok(PairSeds::compute(&matches, geometry, scale))
        })
        .collect();
    results.into_iter().collect()
}

pub fn sequence_tsed(
    frames: &[Frame],
    source: &dyn MatchSource,
    th: &Thresholds,
    opts: &EvalOptions,
) -> Result<ConsistencyReport> {
    th.validate()?;
    let pairs = evaluate_sequence(frames, source, opts)?;
    Ok(report_from_seds(&pairs, th, false))
}

/// Fraction of consistent pairs for each `(t_matches, t_error)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub t_errors: Vec<f64>,
    pub t_matches: Vec<usize>,
    /// `cells[row][col]` for `t_matches[row]` and `t_errors[col]`.
    pub cells: Vec<Vec<f64>>,
}

impl SweepGrid {
    pub fn cell(&self, t_matches: usize, t_error: f64) -> Option<f64> {
        let row = self.t_matches.iter().position(|&m| m == t_matches)?;
        let col = self.t_errors.iter().position(|&e| e == t_error)?;
        Some(self.cells[row][col])
    }

    /// Header row of `t_error` values, then one row per `t_matches` value; six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_matches\\t_error");
        for e in &self.t_errors {
            let _ = write!(out, ",{e}");
        }
        out.push('\n');
        for (m, row) in self.t_matches.iter().zip(&self.cells) {
            let _ = write!(out, "{m}");
            for v in row {
                let _ = write!(out, ",{v:.6}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<SweepGrid> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::EmptyInput)?;
        let num = |line: usize, s: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("`{s}` is not a number"),
            })
        };
        let t_errors = header
            .split(',')
            .skip(1)
            .map(|s| num(1, s))
            .collect::<Result<Vec<_>>>()?;
        let mut t_matches = Vec::new();
        let mut cells = Vec::new();
        for (idx, line) in lines {
            let mut fields = line.split(',');
            let m = fields.next().unwrap_or_default().trim();
            t_matches.push(m.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("`{m}` is not a count"),
            })?);
            let row = fields
                .map(|s| num(idx + 1, s))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != t_errors.len() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected {} cells, found {}", t_errors.len(), row.len()),
                });
            }
            cells.push(row);
        }
        Ok(SweepGrid {
            t_errors,
            t_matches,
            cells,
        })
    }
}

pub fn sweep_from_seds(
    pairs: &[PairSeds],
    t_errors: &[f64],
    t_matches: &[usize],
) -> Result<SweepGrid> {
    if t_errors.is_empty() || t_matches.is_empty() {
        return Err(Error::EmptyInput);
    }
    for &t_error in t_errors {
        Thresholds::new(1, t_error)?;
    }
    if t_matches.contains(&0) {
        return Err(Error::InvalidConfig("t_matches must be at least 1".into()));
    }
    let evaluable: Vec<(usize, f64)> = pairs
        .iter()
        .filter(|p| p.geometry != PairGeometry::DegenerateBaseline)
        .map(|p| (p.seds().len(), p.median().unwrap_or(f64::INFINITY)))
        .collect();
    let cells = t_matches
        .iter()
        .map(|&m| {
            t_errors
                .iter()
                .map(|&e| {
                    let consistent = evaluable
                        .iter()
                        .filter(|&&(n, med)| n >= m && med < e)
                        .count();
                    fraction(consistent, evaluable.len())
                })
                .collect()
        })
        .collect();
    Ok(SweepGrid {
        t_errors: t_errors.to_vec(),
        t_matches: t_matches.to_vec(),
        cells,
    })
}

pub fn threshold_sweep(
    frames: &[Frame],
    source: &dyn MatchSource,
    t_errors: &[f64],
    t_matches: &[usize],
    opts: &EvalOptions,
) -> Result<SweepGrid> {
    let pairs = evaluate_sequence(frames, source, opts)?;
    sweep_from_seds(&pairs, t_errors, t_matches)
}

/// Inclusive `start..=end` in steps of `step`, tolerant to accumulated rounding.
pub fn float_range(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && end.is_finite() && step.is_finite() && step > 0.0 && end >= start) {
        return Err(Error::InvalidConfig(format!(
            "invalid range {start}:{end}:{step}"
        )));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

pub fn count_range(start: usize, end: usize, step: usize) -> Result<Vec<usize>> {
    if step == 0 || end < start {
        return Err(Error::InvalidConfig(format!(
            "invalid range {start}:{end}:{step}"
        )));
    }
    Ok((start..=end).step_by(step).collect())
}

pub fn default_t_errors() -> Vec<f64> {
    float_range(0.5, 8.0, 0.5).expect("static range is valid")
}

pub fn default_t_matches() -> Vec<usize> {
    count_range(5, 50, 5).expect("static range is valid")
}
