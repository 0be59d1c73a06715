//! File formats: images, poses, RealEstate10K cameras, ray maps and reports.

pub mod pnm;
pub mod poses;
pub mod rays;
pub mod re10k;
pub mod report;

use std::path::Path;

use crate::error::{Error, Result};
use crate::metric::SweepGrid;

pub use pnm::{decode_pnm, encode_pnm, read_image, write_image, ConversionHook};
pub use poses::{frame_id, read_poses, write_poses, FramePose, PosesFile};
pub use rays::{decode_raye, encode_raye, format_rays_csv, write_rays, RayeData};
pub use re10k::{format_re10k, parse_re10k, Re10kFrame, Re10kSequence};
pub use report::{read_report, sha256_hex, write_report, InputFile, Payload, ReportDocument};

pub fn read_re10k(path: impl AsRef<Path>, width: u32, height: u32) -> Result<Re10kSequence> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_re10k(&text, width, height)
}

pub fn write_sweep(grid: &SweepGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, grid.to_csv()).map_err(|e| Error::file(path, e))
}

pub fn read_sweep(path: impl AsRef<Path>) -> Result<SweepGrid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    SweepGrid::from_csv(&text)
}
