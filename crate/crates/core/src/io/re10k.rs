//! RealEstate10K camera text files.
//!
//! The first line is the source video URL. Every further line holds 19 whitespace-separated
//! fields: timestamp (microseconds), normalized `fx fy cx cy`, two zeros, then the 3x4
//! world-to-camera matrix row-major.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};

use crate::camera::{repair_rotation, Camera, Extrinsics, Intrinsics, MAX_REPAIRABLE_RESIDUAL};
use crate::error::{Error, Result};

pub const FIELDS_PER_LINE: usize = 19;

#[derive(Debug, Clone, PartialEq)]
pub struct Re10kFrame {
    pub timestamp: i64,
    pub camera: Camera,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Re10kSequence {
    pub url: String,
    pub frames: Vec<Re10kFrame>,
}

impl Re10kSequence {
    /// Keeps frames `0, stride, 2*stride, ...`.
    pub fn subsample(&self, stride: usize) -> Result<Re10kSequence> {
        if stride == 0 {
            return Err(Error::InvalidConfig("stride must be at least 1".into()));
        }
        Ok(Re10kSequence {
            url: self.url.clone(),
            frames: self.frames.iter().step_by(stride).cloned().collect(),
        })
    }
}

/// Parses a file for images of `width` x `height` pixels. Line numbers in errors are 1-based.
pub fn parse_re10k(text: &str, width: u32, height: u32) -> Result<Re10kSequence> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidIntrinsics(format!(
            "image size {width}x{height}"
        )));
    }
    let mut lines = text.lines().enumerate();
    let url = lines
        .next()
        .map(|(_, l)| l.trim().to_string())
        .ok_or(Error::EmptyInput)?;
    let (w, h) = (width as f64, height as f64);

    let mut frames = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != FIELDS_PER_LINE {
            return Err(Error::FieldCount {
                line,
                found: fields.len(),
            });
        }
        let timestamp: i64 = fields[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad timestamp {:?}", fields[0]),
        })?;
        let mut v = [0.0; FIELDS_PER_LINE - 1];
        for (slot, tok) in v.iter_mut().zip(&fields[1..]) {
            *slot = tok.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad number {tok:?}"),
            })?;
        }
        let intrinsics = Intrinsics::new(v[0] * w, v[1] * h, v[2] * w, v[3] * h, width, height)
            .map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        let p = &v[6..];
        let m = Matrix3::new(p[0], p[1], p[2], p[4], p[5], p[6], p[8], p[9], p[10]);
        let r = repair_rotation(&m, MAX_REPAIRABLE_RESIDUAL)
            .map_err(|residual| Error::NonRotation { line, residual })?;
        let t = Vector3::new(p[3], p[7], p[11]);
        let ext = Extrinsics::new(r, t).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        frames.push(Re10kFrame {
            timestamp,
            camera: Camera::new(intrinsics, ext)?,
        });
    }
    Ok(Re10kSequence { url, frames })
}

/// Writes normalized intrinsics and poses using shortest round-trip float formatting.
pub fn format_re10k(seq: &Re10kSequence) -> String {
    let mut out = String::new();
    out.push_str(&seq.url);
    out.push('\n');
    for f in &seq.frames {
        let k = &f.camera.intrinsics;
        let (w, h) = (k.width as f64, k.height as f64);
        let r = f.camera.extrinsics.rotation();
        let t = f.camera.extrinsics.translation();
        write!(
            out,
            "{} {} {} {} {} 0 0",
            f.timestamp,
            k.fx / w,
            k.fy / h,
            k.cx / w,
            k.cy / h
        )
        .unwrap();
        for row in 0..3 {
            for col in 0..3 {
                write!(out, " {}", r[(row, col)]).unwrap();
            }
            write!(out, " {}", t[row]).unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = "0 0.5 0.9 0.5 0.5 0 0 1 0 0 0 0 1 0 0 0 0 1 0";

    #[test]
    fn denormalizes_intrinsics() {
        let text = format!("https://example.com/v\n{LINE}\n");
        let seq = parse_re10k(&text, 640, 360).unwrap();
        assert_eq!(seq.url, "https://example.com/v");
        let k = seq.frames[0].camera.intrinsics;
        assert_eq!((k.fx, k.fy, k.cx, k.cy), (320.0, 324.0, 320.0, 180.0));
    }

    #[test]
    fn field_count_error_has_line_number() {
        let text = format!("url\n{LINE}\n0 1 2\n");
        assert!(matches!(
            parse_re10k(&text, 10, 10),
            Err(Error::FieldCount { line: 3, found: 3 })
        ));
        let text = format!("url\n{}\n", LINE.replace("0.9", "abc"));
        assert!(matches!(
            parse_re10k(&text, 10, 10),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn near_rotations_are_projected_and_far_ones_rejected() {
        let slightly = LINE.replacen(" 1 0 0 0 0 1", " 1.0000001 0 0 0 0 1", 1);
        let seq = parse_re10k(&format!("u\n{slightly}\n"), 10, 10).unwrap();
        let r = seq.frames[0].camera.extrinsics.rotation();
        assert!(crate::camera::rotation_residual(r) < 1e-12);

        let bad = LINE.replacen(" 1 0 0 0 0 1", " 1.1 0 0 0 0 1", 1);
        assert!(matches!(
            parse_re10k(&format!("u\n{bad}\n"), 10, 10),
            Err(Error::NonRotation { line: 2, .. })
        ));
    }

    #[test]
    fn stride_subsampling() {
        let body: String = (0..201).map(|i| format!("{i}{}\n", &LINE[1..])).collect();
        let seq = parse_re10k(&format!("u\n{body}"), 10, 10).unwrap();
        assert_eq!(seq.frames.len(), 201);
        let sub = seq.subsample(10).unwrap();
        assert_eq!(sub.frames.len(), 21);
        assert_eq!(sub.frames[20].timestamp, 200);
        assert!(seq.subsample(0).is_err());
    }
}
