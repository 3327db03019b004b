//! Dataset and result persistence in KITTI-compatible conventions.
//!
//! The on-disk layout is one directory per sequence: `frame_%04d.png`
//! (16-bit grayscale), optional `depth_%04d.png` (16-bit, meters × 256,
//! 0 = invalid) and `mask_%04d.png` (8-bit, nonzero = road), `poses.txt`
//! (12 floats per line, row-major 3×4 world-to-camera), plus JSON sidecars
//! `calib.json`, `plane.json` and `scene.json`, every JSON document carrying
//! a `schema_version` field.
//!
//! Loader/saver pairs round-trip exactly up to the documented quantization
//! of each format. Loaders never silently repair data: the only tolerated
//! deviation is a drifted rotation block in `poses.txt`, which is replaced
//! by the nearest rotation and reported, and everything else is an error.
//! All writes go through a temp-file-and-rename so readers never observe a
//! partially written file.

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::imaging::ImagingError;

mod corr;
mod dataset;
mod image_io;
mod json_io;
mod poses;

pub use corr::{load_correspondences, save_correspondences, CORRESPONDENCE_HEADER};
pub use dataset::{
    depth_file_name, frame_file_name, mask_file_name, load_dataset, DatasetHandle, CALIB_FILE,
    PLANE_FILE, POSES_FILE, SCENE_FILE,
};
pub use image_io::{
    load_depth_png, load_image, load_mask, save_depth_png, save_image, save_mask,
};
pub use json_io::{
    load_calibration, load_json, load_plane, load_scene, save_calibration, save_json, save_plane,
    save_scene, CalibrationFile, PlaneFile, SceneFile, SCHEMA_VERSION,
};
pub use poses::{load_poses, save_poses, LoadedTrajectory};

/// Persistence failure. File contents that violate a format are reported
/// with the offending path (and, for line-oriented formats, the 1-based
/// line number).
#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: unsupported schema version {found}, this build reads version {expected}")]
    SchemaVersion {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("dataset {root}: {message}")]
    Dataset { root: PathBuf, message: String },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl IoError {
    fn file(path: &Path, source: std::io::Error) -> Self {
        IoError::File { path: path.to_path_buf(), source }
    }

    fn format(path: &Path, message: impl Into<String>) -> Self {
        IoError::Format { path: path.to_path_buf(), message: message.into() }
    }

    fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        IoError::Parse { path: path.to_path_buf(), line, message: message.into() }
    }
}

/// Writes `bytes` to `path` atomically: the content lands in a temporary
/// file in the same directory and is renamed over the target, so a crash
/// mid-write can never leave a truncated file behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(parent).map_err(|e| IoError::file(path, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::file(path, e))?;
    tmp.persist(path).map_err(|e| IoError::file(path, e.error))?;
    Ok(())
}
