//! Pixel correspondences between two images: the built-in corner matcher and the match CSV format.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub p: Point2<f64>,
    pub p_prime: Point2<f64>,
    pub score: f64,
}

impl Correspondence {
    pub fn new(p: Point2<f64>, p_prime: Point2<f64>, score: f64) -> Self {
        Correspondence { p, p_prime, score }
    }

    fn is_valid(&self) -> bool {
        [self.p.x, self.p.y, self.p_prime.x, self.p_prime.y]
            .iter()
            .all(|x| x.is_finite())
            && (0.0..=1.0).contains(&self.score)
    }

    fn key(&self) -> [u64; 4] {
        [
            self.p.x.to_bits(),
            self.p.y.to_bits(),
            self.p_prime.x.to_bits(),
            self.p_prime.y.to_bits(),
        ]
    }

    pub fn swapped(&self) -> Correspondence {
        Correspondence::new(self.p_prime, self.p, self.score)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Detected,
    Ingested,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchSet {
    /// Frame indices `(i, j)`: `p` lives in frame `i`, `p_prime` in frame `j`.
    pub pair: (usize, usize),
    correspondences: Vec<Correspondence>,
    pub provenance: Provenance,
}

impl MatchSet {
    pub fn new(
        pair: (usize, usize),
        correspondences: Vec<Correspondence>,
        provenance: Provenance,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(correspondences.len());
        for (idx, c) in correspondences.iter().enumerate() {
            if !c.is_valid() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "correspondence has non-finite pixels or a score outside [0, 1]"
                        .into(),
                });
            }
            if !seen.insert(c.key()) {
                return Err(Error::DuplicateMatch { line: idx + 1 });
            }
        }
        Ok(MatchSet {
            pair,
            correspondences,
            provenance,
        })
    }

    pub fn empty(pair: (usize, usize), provenance: Provenance) -> Self {
        MatchSet {
            pair,
            correspondences: Vec::new(),
            provenance,
        }
    }

    pub fn correspondences(&self) -> &[Correspondence] {
        &self.correspondences
    }

    pub fn len(&self) -> usize {
        self.correspondences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.correspondences.is_empty()
    }

    /// The same matches seen from the other image.
    pub fn swapped(&self) -> MatchSet {
        MatchSet {
            pair: (self.pair.1, self.pair.0),
            correspondences: self
                .correspondences
                .iter()
                .map(Correspondence::swapped)
                .collect(),
            provenance: self.provenance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatcherConfig {
    pub levels: usize,
    /// Harris response threshold relative to the strongest response in the level.
    pub corner_threshold: f64,
    pub patch_radius: usize,
    /// Minimum normalized cross-correlation for an accepted match.
    pub ncc_threshold: f64,
    /// Maximum ratio of best to second-best descriptor distance.
    pub ratio_threshold: f64,
    pub max_matches: usize,
    /// Strongest corners kept per pyramid level.
    pub max_corners_per_level: usize,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            levels: 4,
            corner_threshold: 0.01,
            patch_radius: 5,
            ncc_threshold: 0.8,
            ratio_threshold: 0.9,
            max_matches: 2000,
            max_corners_per_level: 600,
        }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if self.levels == 0 {
            return Err(Error::InvalidConfig(
                "matcher needs at least one pyramid level".into(),
            ));
        }
        if self.patch_radius < 2 {
            return Err(Error::InvalidConfig(
                "patch radius must be at least 2".into(),
            ));
        }
        if !(unit(self.corner_threshold) && unit(self.ncc_threshold) && unit(self.ratio_threshold))
        {
            return Err(Error::InvalidConfig(
                "matcher thresholds must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

const HARRIS_K: f32 = 0.04;
const TENSOR_SIGMA: f32 = 1.0;
// Below this the image is treated as flat.
const MIN_RESPONSE: f32 = 1e-12;

#[derive(Debug, Clone)]
struct Keypoint {
    level: usize,
    /// Position in level-0 pixel coordinates.
    position: Point2<f64>,
    descriptor: Vec<f32>,
}

fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil() as i32;
    let mut k: Vec<f32> = (-radius..=radius)
        .map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f32 = k.iter().sum();
    k.iter_mut().for_each(|x| *x /= sum);
    k
}

fn blur(data: &[f32], w: usize, h: usize, kernel: &[f32]) -> Vec<f32> {
    let r = (kernel.len() / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, c)| c * data[y * w + clamp(x as isize + k as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, c)| c * tmp[clamp(y as isize + k as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

fn harris_response(img: &GrayImage) -> Vec<f32> {
    let (w, h) = (img.width as usize, img.height as usize);
    let at = |x: usize, y: usize| img.data[y * w + x];
    let mut ixx = vec![0.0; w * h];
    let mut iyy = vec![0.0; w * h];
    let mut ixy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let gx = 0.5 * (at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y));
            let gy = 0.5 * (at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1)));
            ixx[y * w + x] = gx * gx;
            iyy[y * w + x] = gy * gy;
            ixy[y * w + x] = gx * gy;
        }
    }
    let kernel = gaussian_kernel(TENSOR_SIGMA);
    let (sxx, syy, sxy) = (
        blur(&ixx, w, h, &kernel),
        blur(&iyy, w, h, &kernel),
        blur(&ixy, w, h, &kernel),
    );
    (0..w * h)
        .map(|i| {
            let det = sxx[i] * syy[i] - sxy[i] * sxy[i];
            let trace = sxx[i] + syy[i];
            det - HARRIS_K * trace * trace
        })
        .collect()
}

/// Vertex offset of the parabola through three samples, clamped to half a pixel.
fn parabolic_offset(left: f32, center: f32, right: f32) -> f64 {
    let denom = left - 2.0 * center + right;
    if denom.abs() < f32::EPSILON {
        return 0.0;
    }
    (0.5 * (left - right) / denom).clamp(-0.5, 0.5) as f64
}

fn describe(img: &GrayImage, x: f64, y: f64, radius: usize) -> Option<Vec<f32>> {
    let r = radius as isize;
    let mut patch = Vec::with_capacity((2 * radius + 1).pow(2));
    for dy in -r..=r {
        for dx in -r..=r {
            patch.push(img.sample(x + dx as f64, y + dy as f64));
        }
    }
    let mean = patch.iter().sum::<f32>() / patch.len() as f32;
    patch.iter_mut().for_each(|v| *v -= mean);
    let norm = patch.iter().map(|v| v * v).sum::<f32>().sqrt();
    if norm < 1e-4 {
        return None;
    }
    patch.iter_mut().for_each(|v| *v /= norm);
    Some(patch)
}

fn detect_level(img: &GrayImage, level: usize, cfg: &MatcherConfig) -> Vec<Keypoint> {
    let (w, h) = (img.width as usize, img.height as usize);
    let border = cfg.patch_radius + 1;
    if w <= 2 * border || h <= 2 * border {
        return Vec::new();
    }
    let response = harris_response(img);
    let peak = response.iter().copied().fold(0.0f32, f32::max);
    if peak < MIN_RESPONSE {
        return Vec::new();
    }
    let threshold = (cfg.corner_threshold as f32 * peak).max(MIN_RESPONSE);

    let mut candidates = Vec::new();
    for y in border..h - border {
        for x in border..w - border {
            let r = response[y * w + x];
            if r <= threshold {
                continue;
            }
            // Strict maximum against earlier neighbours, non-strict against later ones,
            // so plateaus yield exactly one corner.
            let is_max = (-1isize..=1).all(|dy| {
                (-1isize..=1).all(|dx| {
                    if dx == 0 && dy == 0 {
                        return true;
                    }
                    let n = response[(y as isize + dy) as usize * w + (x as isize + dx) as usize];
                    if (dy, dx) < (0, 0) {
                        r > n
                    } else {
                        r >= n
                    }
                })
            });
            if is_max {
                candidates.push((r, x, y));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.2, a.1).cmp(&(b.2, b.1))));
    candidates.truncate(cfg.max_corners_per_level);

    let scale = (1u64 << level) as f64;
    candidates
        .into_iter()
        .filter_map(|(r, x, y)| {
            let ox = parabolic_offset(response[y * w + x - 1], r, response[y * w + x + 1]);
            let oy = parabolic_offset(response[(y - 1) * w + x], r, response[(y + 1) * w + x]);
            let (lx, ly) = (x as f64 + ox, y as f64 + oy);
            let descriptor = describe(img, lx, ly, cfg.patch_radius)?;
            Some(Keypoint {
                level,
                position: Point2::new(
                    scale * lx + (scale - 1.0) / 2.0,
                    scale * ly + (scale - 1.0) / 2.0,
                ),
                descriptor,
            })
        })
        .collect()
}

fn detect(img: &GrayImage, cfg: &MatcherConfig) -> Vec<Vec<Keypoint>> {
    let mut pyramid = vec![img.clone()];
    for _ in 1..cfg.levels {
        let next = pyramid.last().expect("pyramid is nonempty").half();
        if next.width < 4 || next.height < 4 {
            break;
        }
        pyramid.push(next);
    }
    pyramid
        .par_iter()
        .enumerate()
        .map(|(level, im)| detect_level(im, level, cfg))
        .collect()
}

fn ncc(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Best and second-best similarity of each query against all candidates.
fn best_two(queries: &[Keypoint], candidates: &[Keypoint]) -> Vec<(usize, f32, f32)> {
    queries
        .par_iter()
        .map(|q| {
            let (mut best, mut first, mut second) =
                (usize::MAX, f32::NEG_INFINITY, f32::NEG_INFINITY);
            for (idx, c) in candidates.iter().enumerate() {
                let s = ncc(&q.descriptor, &c.descriptor);
                if s > first {
                    second = first;
                    first = s;
                    best = idx;
                } else if s > second {
                    second = s;
                }
            }
            (best, first, second)
        })
        .collect()
}

fn passes_ratio(first: f32, second: f32, ratio: f64) -> bool {
    if second == f32::NEG_INFINITY {
        return true;
    }
    let d1 = (2.0 - 2.0 * first as f64).max(0.0).sqrt();
    let d2 = (2.0 - 2.0 * second as f64).max(0.0).sqrt();
    d1 <= ratio * d2
}

/// Mutual-nearest-neighbour matching of multi-scale Harris corners described by
/// normalized intensity patches. Deterministic for identical inputs.
pub fn detect_and_match(
    img1: &GrayImage,
    img2: &GrayImage,
    cfg: &MatcherConfig,
) -> Result<MatchSet> {
    cfg.validate()?;
    if img1.is_empty() || img2.is_empty() {
        return Err(Error::EmptyImage);
    }
    let (k1, k2) = (detect(img1, cfg), detect(img2, cfg));

    let mut matches = Vec::new();
    for (a, b) in k1.iter().zip(&k2) {
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let forward = best_two(a, b);
        let backward = best_two(b, a);
        for (ia, &(ib, s, s2)) in forward.iter().enumerate() {
            let (back, _, back_s2) = backward[ib];
            if back != ia || (s as f64) < cfg.ncc_threshold {
                continue;
            }
            if !passes_ratio(s, s2, cfg.ratio_threshold)
                || !passes_ratio(s, back_s2, cfg.ratio_threshold)
            {
                continue;
            }
            debug_assert_eq!(a[ia].level, b[ib].level);
            matches.push(Correspondence::new(
                a[ia].position,
                b[ib].position,
                (s as f64).clamp(0.0, 1.0),
            ));
        }
    }

    matches.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then(x.p.x.total_cmp(&y.p.x))
            .then(x.p.y.total_cmp(&y.p.y))
            .then(x.p_prime.x.total_cmp(&y.p_prime.x))
            .then(x.p_prime.y.total_cmp(&y.p_prime.y))
    });
    let mut seen = HashSet::new();
    matches.retain(|c| seen.insert(c.key()));
    matches.truncate(cfg.max_matches);
    Ok(MatchSet {
        pair: (0, 1),
        correspondences: matches,
        provenance: Provenance::Detected,
    })
}

/// Shortest decimal that reproduces `x` rounded to nine significant digits.
fn format_sig9(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub const MATCH_CSV_HEADER: &str = "u1,v1,u2,v2,score";

pub fn format_matches(set: &MatchSet) -> String {
    let mut out = String::with_capacity(32 * (set.len() + 1));
    out.push_str(MATCH_CSV_HEADER);
    out.push('\n');
    for c in &set.correspondences {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_sig9(c.p.x),
            format_sig9(c.p.y),
            format_sig9(c.p_prime.x),
            format_sig9(c.p_prime.y),
            format_sig9(c.score)
        );
    }
    out
}

/// Parses a match CSV. A leading non-numeric row is taken as a header; the score column is
/// optional and defaults to 1.
pub fn parse_matches(text: &str, pair: (usize, usize)) -> Result<MatchSet> {
    let mut correspondences = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        let parsed: Vec<Option<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        if idx == 0 && parsed.iter().all(Option::is_none) {
            continue;
        }
        if fields.len() < 4 {
            return Err(Error::Dimension {
                line,
                found: fields.len(),
            });
        }
        if fields.len() > 5 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 or 5 fields, found {}", fields.len()),
            });
        }
        let mut values = [0.0; 5];
        values[4] = 1.0;
        for (k, (field, value)) in fields.iter().zip(&parsed).enumerate() {
            values[k] = value.ok_or_else(|| Error::Parse {
                line,
                message: format!("`{field}` is not a number"),
            })?;
        }
        let c = Correspondence::new(
            Point2::new(values[0], values[1]),
            Point2::new(values[2], values[3]),
            values[4],
        );
        if !c.is_valid() {
            return Err(Error::Parse {
                line,
                message: "non-finite pixel or score outside [0, 1]".into(),
            });
        }
        if !seen.insert(c.key()) {
            return Err(Error::DuplicateMatch { line });
        }
        correspondences.push(c);
    }
    Ok(MatchSet {
        pair,
        correspondences,
        provenance: Provenance::Ingested,
    })
}

pub fn load_matches(path: impl AsRef<Path>, pair: (usize, usize)) -> Result<MatchSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_matches(&text, pair)
}

pub fn save_matches(set: &MatchSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_matches(set)).map_err(|e| Error::file(path, e))
}

/// File name used for per-pair match files inside a match directory.
pub fn match_file_name(i: usize, j: usize) -> String {
    format!("matches_{i:04}_{j:04}.csv")
}
