//! Encoded ray maps on disk.
//!
//! Binary layout: magic `RAYE`, little-endian `u32` height, width and channel count, then
//! `height * width * channels` little-endian `f32` values in row-major pixel order.

use std::fmt::Write as _;
use std::path::Path;

use crate::camera::EncodedRayMap;
use crate::error::{Error, Result};

pub const RAYE_MAGIC: &[u8; 4] = b"RAYE";

pub fn encode_raye(map: &EncodedRayMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + map.data.len() * 4);
    out.extend_from_slice(RAYE_MAGIC);
    for v in [map.height, map.width, map.channels as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &x in &map.data {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    out
}

/// Decoded binary ray map, at the stored `f32` precision.
#[derive(Debug, Clone, PartialEq)]
pub struct RayeData {
    pub height: u32,
    pub width: u32,
    pub channels: u32,
    pub data: Vec<f32>,
}

pub fn decode_raye(bytes: &[u8]) -> Result<RayeData> {
    if bytes.len() < 16 || &bytes[..4] != RAYE_MAGIC {
        return Err(Error::UnsupportedFormat("missing RAYE header".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap());
    let (height, width, channels) = (word(0), word(1), word(2));
    let count = height as usize * width as usize * channels as usize;
    let payload = &bytes[16..];
    if payload.len() != count * 4 {
        return Err(Error::CorruptHeader(format!(
            "expected {} payload bytes, found {}",
            count * 4,
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RayeData {
        height,
        width,
        channels,
        data,
    })
}

/// One row per pixel: `u,v,c0,c1,...`.
pub fn format_rays_csv(map: &EncodedRayMap) -> String {
    let mut out = String::from("u,v");
    for c in 0..map.channels {
        write!(out, ",c{c}").unwrap();
    }
    out.push('\n');
    for v in 0..map.height {
        for u in 0..map.width {
            write!(out, "{u},{v}").unwrap();
            for x in map.pixel(u, v) {
                write!(out, ",{x}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_rays(map: &EncodedRayMap, path: impl AsRef<Path>, csv: bool) -> Result<()> {
    let path = path.as_ref();
    let result = if csv {
        std::fs::write(path, format_rays_csv(map))
    } else {
        std::fs::write(path, encode_raye(map))
    };
    result.map_err(|e| Error::file(path, e))
}
