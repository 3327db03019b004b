//! KITTI odometry pose files.
//!
//! One frame per line, 12 whitespace-separated floats: the row-major 3×4
//! world-to-camera matrix `[R | t]`. Saves print 17 fractional digits so
//! every f64 entry survives the text round trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use super::{atomic_write, IoError};
use crate::geometry::Pose;
use crate::metrics::Trajectory;

/// Frobenius drift `‖RᵀR − I‖_F` above which a rotation block is replaced
/// by its nearest rotation instead of being trusted as-is.
const ORTHONORMALITY_TOLERANCE: f64 = 1e-6;

/// A pose file's content: the trajectory, plus the indices of any frames
/// whose rotation block drifted from orthonormality and was replaced by the
/// nearest rotation (polar decomposition). An empty list means the file was
/// loaded verbatim.
#[derive(Debug, Clone)]
pub struct LoadedTrajectory {
    pub trajectory: Trajectory,
    pub reorthonormalized: Vec<usize>,
}

/// Nearest rotation to `m` in the Frobenius sense: the orthogonal polar
/// factor, with the last singular direction flipped if needed to keep the
/// determinant positive.
fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("3x3 SVD always yields U");
    let v_t = svd.v_t.expect("3x3 SVD always yields Vᵀ");
    let r = u * v_t;
    if r.determinant() < 0.0 {
        let mut flipped = u;
        flipped.column_mut(2).neg_mut();
        flipped * v_t
    } else {
        r
    }
}

/// Parses a KITTI pose file. Rotation blocks whose orthonormality drift
/// exceeds 1e-6 (or whose determinant is not positive) are replaced by the
/// nearest rotation and their frame indices reported; malformed lines are
/// errors naming the 1-based line number.
pub fn load_poses(path: &Path) -> Result<LoadedTrajectory, IoError> {
    let content = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    let mut poses = Vec::new();
    let mut reorthonormalized = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            return Err(IoError::parse(path, line_no, "blank line in pose file"));
        }
        let mut values = [0.0f64; 12];
        let mut count = 0;
        for token in line.split_whitespace() {
            if count == 12 {
                count += 1;
                break;
            }
            values[count] = token.parse::<f64>().map_err(|_| {
                IoError::parse(path, line_no, format!("invalid float {token:?}"))
            })?;
            count += 1;
        }
        if count != 12 {
            return Err(IoError::parse(
                path,
                line_no,
                format!("expected 12 values, found {}", line.split_whitespace().count()),
            ));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(IoError::parse(path, line_no, format!("non-finite value {bad}")));
        }
        let r = Matrix3::new(
            values[0], values[1], values[2], values[4], values[5], values[6], values[8],
            values[9], values[10],
        );
        let t = Vector3::new(values[3], values[7], values[11]);
        let drift = (r.transpose() * r - Matrix3::identity()).norm();
        let rotation = if drift > ORTHONORMALITY_TOLERANCE || r.determinant() <= 0.0 {
            reorthonormalized.push(poses.len());
            nearest_rotation(&r)
        } else {
            r
        };
        poses.push(Pose::from_parts(&rotation, t));
    }
    if poses.is_empty() {
        return Err(IoError::format(path, "pose file is empty"));
    }
    let trajectory =
        Trajectory::from_poses(poses).expect("non-empty by the check above");
    Ok(LoadedTrajectory { trajectory, reorthonormalized })
}

/// Writes a trajectory in the KITTI odometry format, one row-major 3×4
/// world-to-camera matrix per line.
pub fn save_poses(trajectory: &Trajectory, path: &Path) -> Result<(), IoError> {
    let mut out = String::new();
    for pose in trajectory.poses() {
        let r = pose.rotation_matrix();
        let t = pose.translation();
        for row in 0..3 {
            let sep = if row == 0 { "" } else { " " };
            write!(
                out,
                "{sep}{:.17e} {:.17e} {:.17e} {:.17e}",
                r[(row, 0)],
                r[(row, 1)],
                r[(row, 2)],
                t[row]
            )
            .expect("writing to String cannot fail");
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}
