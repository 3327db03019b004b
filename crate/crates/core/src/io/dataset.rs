//! Sequence directories: discovery and validated lazy access.
//!
//! A dataset directory holds `frame_%04d.png` numbered contiguously from 0,
//! `calib.json`, and optionally `depth_%04d.png`, `mask_%04d.png` (each
//! all-or-nothing across frames), `poses.txt` and `plane.json`. Loading
//! validates everything cheap up front — calibration, pose parse, image
//! header sizes — and leaves pixel data to per-frame accessors.

use std::path::{Path, PathBuf};

use super::image_io::{load_depth_png, load_image, load_mask};
use super::json_io::{load_calibration, load_plane, CalibrationFile};
use super::poses::{load_poses, LoadedTrajectory};
use super::IoError;
use crate::geometry::GroundPlane;
use crate::imaging::{DepthMap, ImageBuffer, RoadMask};

pub const POSES_FILE: &str = "poses.txt";
pub const CALIB_FILE: &str = "calib.json";
pub const PLANE_FILE: &str = "plane.json";
pub const SCENE_FILE: &str = "scene.json";

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:04}.png")
}

pub fn depth_file_name(index: usize) -> String {
    format!("depth_{index:04}.png")
}

pub fn mask_file_name(index: usize) -> String {
    format!("mask_{index:04}.png")
}

/// A discovered and validated sequence directory. Construction proves that
/// calibration parses, frames are contiguous with consistent header sizes,
/// optional per-frame files cover either no frame or every frame, and the
/// pose file (when present) parses with one line per frame.
#[derive(Debug, Clone)]
pub struct DatasetHandle {
    root: PathBuf,
    frame_count: usize,
    calibration: CalibrationFile,
    poses: Option<LoadedTrajectory>,
    plane: Option<GroundPlane>,
    has_depth: bool,
    has_masks: bool,
}

impl DatasetHandle {
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn calibration(&self) -> &CalibrationFile {
        &self.calibration
    }

    /// Ground-truth trajectory, when `poses.txt` is present.
    pub fn poses(&self) -> Option<&LoadedTrajectory> {
        self.poses.as_ref()
    }

    /// Ground-truth world plane, when `plane.json` is present.
    pub fn plane(&self) -> Option<&GroundPlane> {
        self.plane.as_ref()
    }

    pub fn has_depth(&self) -> bool {
        self.has_depth
    }

    pub fn has_masks(&self) -> bool {
        self.has_masks
    }

    pub fn frame_path(&self, index: usize) -> PathBuf {
        self.root.join(frame_file_name(index))
    }

    pub fn depth_path(&self, index: usize) -> PathBuf {
        self.root.join(depth_file_name(index))
    }

    pub fn mask_path(&self, index: usize) -> PathBuf {
        self.root.join(mask_file_name(index))
    }

    fn check_index(&self, index: usize) -> Result<(), IoError> {
        if index >= self.frame_count {
            return Err(IoError::Dataset {
                root: self.root.clone(),
                message: format!(
                    "frame index {index} out of range (dataset has {} frames)",
                    self.frame_count
                ),
            });
        }
        Ok(())
    }

    pub fn load_frame(&self, index: usize) -> Result<ImageBuffer, IoError> {
        self.check_index(index)?;
        load_image(&self.frame_path(index))
    }

    pub fn load_depth(&self, index: usize) -> Result<DepthMap, IoError> {
        self.check_index(index)?;
        if !self.has_depth {
            return Err(IoError::Dataset {
                root: self.root.clone(),
                message: "dataset has no depth maps".into(),
            });
        }
        load_depth_png(&self.depth_path(index))
    }

    pub fn load_mask(&self, index: usize) -> Result<RoadMask, IoError> {
        self.check_index(index)?;
        if !self.has_masks {
            return Err(IoError::Dataset {
                root: self.root.clone(),
                message: "dataset has no road masks".into(),
            });
        }
        load_mask(&self.mask_path(index))
    }
}

fn dataset_err(root: &Path, message: impl Into<String>) -> IoError {
    IoError::Dataset { root: root.to_path_buf(), message: message.into() }
}

/// Counts files named by `name(i)` for i = 0, 1, … until the first gap,
/// then rejects any stragglers beyond it (a gap in the numbering is a
/// mangled dataset, not a shorter one).
fn contiguous_count(
    root: &Path,
    name: impl Fn(usize) -> String,
    kind: &str,
) -> Result<usize, IoError> {
    let mut count = 0;
    while root.join(name(count)).is_file() {
        count += 1;
    }
    for probe in count + 1..count + 10_000 {
        if root.join(name(probe)).is_file() {
            return Err(dataset_err(
                root,
                format!(
                    "non-contiguous {kind} numbering: {} exists but {} is missing",
                    name(probe),
                    name(count)
                ),
            ));
        }
    }
    Ok(count)
}

fn check_size(path: &Path, calib: &CalibrationFile, root: &Path) -> Result<(), IoError> {
    let (w, h) = image::image_dimensions(path)
        .map_err(|e| IoError::Image { path: path.to_path_buf(), source: e })?;
    if (w as usize, h as usize) != (calib.width, calib.height) {
        return Err(dataset_err(
            root,
            format!(
                "{} is {w}x{h} but calibration says {}x{}",
                path.file_name().unwrap_or_default().to_string_lossy(),
                calib.width,
                calib.height
            ),
        ));
    }
    Ok(())
}

/// Discovers and validates a sequence directory.
pub fn load_dataset(root: &Path) -> Result<DatasetHandle, IoError> {
    if !root.is_dir() {
        return Err(dataset_err(root, "not a directory"));
    }
    let calib_path = root.join(CALIB_FILE);
    if !calib_path.is_file() {
        return Err(dataset_err(root, format!("missing calibration file {CALIB_FILE}")));
    }
    let calibration = load_calibration(&calib_path)?;

    let frame_count = contiguous_count(root, frame_file_name, "frame")?;
    if frame_count == 0 {
        return Err(dataset_err(root, "no frames (expected frame_0000.png, …)"));
    }
    let depth_count = contiguous_count(root, depth_file_name, "depth")?;
    let mask_count = contiguous_count(root, mask_file_name, "mask")?;
    if depth_count != 0 && depth_count != frame_count {
        return Err(dataset_err(
            root,
            format!("partial depth coverage: {depth_count} depth maps for {frame_count} frames"),
        ));
    }
    if mask_count != 0 && mask_count != frame_count {
        return Err(dataset_err(
            root,
            format!("partial mask coverage: {mask_count} masks for {frame_count} frames"),
        ));
    }

    for i in 0..frame_count {
        check_size(&root.join(frame_file_name(i)), &calibration, root)?;
        if depth_count != 0 {
            check_size(&root.join(depth_file_name(i)), &calibration, root)?;
        }
        if mask_count != 0 {
            check_size(&root.join(mask_file_name(i)), &calibration, root)?;
        }
    }

    let poses_path = root.join(POSES_FILE);
    let poses = if poses_path.is_file() {
        let loaded = load_poses(&poses_path)?;
        if loaded.trajectory.len() != frame_count {
            return Err(dataset_err(
                root,
                format!(
                    "{POSES_FILE} has {} poses for {frame_count} frames",
                    loaded.trajectory.len()
                ),
            ));
        }
        Some(loaded)
    } else {
        None
    };

    let plane_path = root.join(PLANE_FILE);
    let plane = if plane_path.is_file() { Some(load_plane(&plane_path)?) } else { None };

    Ok(DatasetHandle {
        root: root.to_path_buf(),
        frame_count,
        calibration,
        poses,
        plane,
        has_depth: depth_count != 0,
        has_masks: mask_count != 0,
    })
}
