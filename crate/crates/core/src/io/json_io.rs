//! JSON sidecar documents: camera calibration, ground plane, scene spec.
//!
//! Every document carries a `schema_version` field; loaders reject any
//! version other than the one this build writes.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{atomic_write, IoError};
use crate::geometry::{CameraIntrinsics, GroundPlane};
use crate::synthscene::SceneSpec;

/// Version written by this build and required on load.
pub const SCHEMA_VERSION: u32 = 1;

/// `calib.json`: pinhole intrinsics, image size and camera mounting.
/// `mounting_height_m` is the camera height above the road plane and
/// `canonical_normal` the nominal plane normal in the camera frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub schema_version: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub mounting_height_m: f64,
    pub canonical_normal: [f64; 3],
}

impl CalibrationFile {
    pub fn new(intrinsics: &CameraIntrinsics, mounting_height_m: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            fx: intrinsics.fx,
            fy: intrinsics.fy,
            cx: intrinsics.cx,
            cy: intrinsics.cy,
            width: intrinsics.width,
            height: intrinsics.height,
            mounting_height_m,
            canonical_normal: [0.0, -1.0, 0.0],
        }
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics, IoError> {
        Ok(CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)?)
    }

    fn validate(&self, path: &Path) -> Result<(), IoError> {
        self.intrinsics()?;
        if !(self.mounting_height_m.is_finite() && self.mounting_height_m > 0.0) {
            return Err(IoError::format(
                path,
                format!("mounting_height_m must be positive, got {}", self.mounting_height_m),
            ));
        }
        let n = nalgebra::Vector3::from(self.canonical_normal);
        if !n.iter().all(|v| v.is_finite()) || (n.norm() - 1.0).abs() > 1e-6 {
            return Err(IoError::format(
                path,
                format!("canonical_normal must be a unit vector, got {:?}", self.canonical_normal),
            ));
        }
        Ok(())
    }
}

/// `plane.json`: the ground plane `{P : NᵀP + h = 0}` of the world frame
/// (for a level camera rig this coincides with the per-frame camera-frame
/// plane).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneFile {
    pub schema_version: u32,
    pub normal: [f64; 3],
    pub height_m: f64,
}

impl PlaneFile {
    pub fn from_plane(plane: &GroundPlane) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            normal: plane.normal().into(),
            height_m: plane.height(),
        }
    }

    pub fn plane(&self) -> Result<GroundPlane, IoError> {
        Ok(GroundPlane::new(nalgebra::Vector3::from(self.normal), self.height_m)?)
    }
}

/// `scene.json`: a full synthetic scene specification, stored flat next to
/// the schema version so the document doubles as the scene's provenance
/// record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFile {
    pub schema_version: u32,
    #[serde(flatten)]
    pub scene: SceneSpec,
}

impl SceneFile {
    pub fn new(scene: SceneSpec) -> Self {
        Self { schema_version: SCHEMA_VERSION, scene }
    }
}

/// Serializes any value as pretty-printed JSON with a trailing newline,
/// written atomically.
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| IoError::Json { path: path.to_path_buf(), source: e })?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Parses a JSON file into any deserializable value (no schema check; the
/// typed loaders below add one).
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::file(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| IoError::Json { path: path.to_path_buf(), source: e })
}

fn check_schema(path: &Path, found: u32) -> Result<(), IoError> {
    if found != SCHEMA_VERSION {
        return Err(IoError::SchemaVersion {
            path: path.to_path_buf(),
            expected: SCHEMA_VERSION,
            found,
        });
    }
    Ok(())
}

pub fn save_calibration(calib: &CalibrationFile, path: &Path) -> Result<(), IoError> {
    save_json(calib, path)
}

pub fn load_calibration(path: &Path) -> Result<CalibrationFile, IoError> {
    let calib: CalibrationFile = load_json(path)?;
    check_schema(path, calib.schema_version)?;
    calib.validate(path)?;
    Ok(calib)
}

pub fn save_plane(plane: &GroundPlane, path: &Path) -> Result<(), IoError> {
    save_json(&PlaneFile::from_plane(plane), path)
}

pub fn load_plane(path: &Path) -> Result<GroundPlane, IoError> {
    let file: PlaneFile = load_json(path)?;
    check_schema(path, file.schema_version)?;
    file.plane()
}

pub fn save_scene(scene: &SceneSpec, path: &Path) -> Result<(), IoError> {
    save_json(&SceneFile::new(scene.clone()), path)
}

pub fn load_scene(path: &Path) -> Result<SceneSpec, IoError> {
    let file: SceneFile = load_json(path)?;
    check_schema(path, file.schema_version)?;
    file.scene.validate().map_err(|e| IoError::format(path, e.to_string()))?;
    Ok(file.scene)
}
