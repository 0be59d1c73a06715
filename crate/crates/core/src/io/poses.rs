//! Camera sequence JSON: shared intrinsics plus per-frame world-to-camera poses.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{repair_rotation, Camera, Extrinsics, Intrinsics, MAX_REPAIRABLE_RESIDUAL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePose {
    pub id: String,
    /// Row-major world-to-camera rotation.
    #[serde(rename = "R")]
    pub r: [f64; 9],
    #[serde(rename = "t")]
    pub t: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosesFile {
    pub intrinsics: Intrinsics,
    pub frames: Vec<FramePose>,
}

impl PosesFile {
    pub fn from_cameras<'a>(
        intrinsics: Intrinsics,
        frames: impl IntoIterator<Item = (String, &'a Extrinsics)>,
    ) -> Self {
        let frames = frames
            .into_iter()
            .map(|(id, ext)| FramePose {
                id,
                r: ext.rotation_row_major(),
                t: ext.translation_array(),
            })
            .collect();
        PosesFile { intrinsics, frames }
    }

    /// Frames get ids `0000`, `0001`, ...
    pub fn from_sequence(intrinsics: Intrinsics, poses: &[Extrinsics]) -> Self {
        Self::from_cameras(
            intrinsics,
            poses.iter().enumerate().map(|(k, e)| (frame_id(k), e)),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if self.frames.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut seen = std::collections::HashSet::new();
        for f in &self.frames {
            if !seen.insert(f.id.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate frame id {:?}",
                    f.id
                )));
            }
        }
        Ok(())
    }

    /// Rotations slightly off the rotation group (e.g. from rounded text) are projected back.
    pub fn cameras(&self) -> Result<Vec<(String, Camera)>> {
        self.validate()?;
        self.frames
            .iter()
            .map(|f| {
                let m = Matrix3::from_row_slice(&f.r);
                let r = repair_rotation(&m, MAX_REPAIRABLE_RESIDUAL)
                    .map_err(|residual| Error::InvalidRotation { residual })?;
                let ext = Extrinsics::new(r, Vector3::from_row_slice(&f.t))?;
                Ok((f.id.clone(), Camera::new(self.intrinsics, ext)?))
            })
            .collect()
    }

    pub fn find(&self, id: &str) -> Option<usize> {
        self.frames.iter().position(|f| f.id == id)
    }
}

pub fn frame_id(index: usize) -> String {
    format!("{index:04}")
}

pub fn read_poses(path: impl AsRef<Path>) -> Result<PosesFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let poses: PosesFile = serde_json::from_str(&text)?;
    poses.validate()?;
    Ok(poses)
}

pub fn write_poses(poses: &PosesFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(poses)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::file(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::look_at;

    #[test]
    fn json_round_trip_is_exact() {
        let k = Intrinsics::centered(256.0, 256, 256).unwrap();
        let poses: Vec<_> = (0..5)
            .map(|i| {
                let eye = Vector3::new(i as f64 * 0.37, 1.3, 6.1);
                look_at(&eye, &Vector3::zeros(), &Vector3::y()).unwrap()
            })
            .collect();
        let file = PosesFile::from_sequence(k, &poses);
        let text = serde_json::to_string(&file).unwrap();
        assert!(text.contains("\"R\":[") && text.contains("\"t\":["));
        let back: PosesFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
        let cams = back.cameras().unwrap();
        assert_eq!(cams[3].0, "0003");
        assert_eq!(cams[3].1.extrinsics, poses[3]);
    }

    #[test]
    fn rounded_rotations_are_repaired() {
        let k = Intrinsics::centered(100.0, 64, 64).unwrap();
        let c = 30f64.to_radians().cos();
        let file = PosesFile {
            intrinsics: k,
            frames: vec![FramePose {
                id: "a".into(),
                r: [0.866025, 0.0, 0.5, 0.0, 1.0, 0.0, -0.5, 0.0, 0.866025],
                t: [0.0; 3],
            }],
        };
        let cams = file.cameras().unwrap();
        assert!((cams[0].1.extrinsics.rotation()[(0, 0)] - c).abs() < 1e-6);

        let mut bad = file.clone();
        bad.frames[0].r[0] = 0.9;
        assert!(matches!(bad.cameras(), Err(Error::InvalidRotation { .. })));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let k = Intrinsics::centered(100.0, 64, 64).unwrap();
        let id = Extrinsics::identity();
        let file = PosesFile::from_cameras(k, [("x".to_string(), &id), ("x".to_string(), &id)]);
        assert!(matches!(file.validate(), Err(Error::InvalidConfig(_))));
    }
}
