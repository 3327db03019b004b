use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{SceneError, TextureSpec, SKY_INTENSITY};
use crate::geometry::{
    plane_residual, ray_plane_depth, transform_plane, CameraIntrinsics, GroundPlane, Pose,
};
use crate::imaging::{DepthMap, ImageBuffer, RoadMask};

/// Rays closer than this along the view direction do not count as hits, so
/// surfaces behind (or enclosing) the camera never occlude.
const NEAR_LIMIT: f64 = 1e-6;

/// Oriented box obstacle. `pose` maps world coordinates into the box frame,
/// where the box occupies `[-size_i/2, size_i/2]` on each axis. Faces are
/// shaded with `albedo` in the order +x, -x, +y, -y, +z, -z, modulated by
/// the scene texture at the world hit point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxSpec {
    pub pose: Pose,
    pub size: [f64; 3],
    pub albedo: [f64; 6],
}

impl BoxSpec {
    fn validate(&self, ground: &GroundPlane) -> Result<(), SceneError> {
        if self.size.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(SceneError::InvalidSpec(format!(
                "box sizes must be positive, got {:?}",
                self.size
            )));
        }
        if self.albedo.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(SceneError::InvalidSpec(format!(
                "box albedo must lie in [0, 1], got {:?}",
                self.albedo
            )));
        }
        let to_world = self.pose.inverse();
        for corner in 0..8u32 {
            let local = Vector3::new(
                0.5 * self.size[0] * if corner & 1 == 1 { 1.0 } else { -1.0 },
                0.5 * self.size[1] * if corner & 2 == 2 { 1.0 } else { -1.0 },
                0.5 * self.size[2] * if corner & 4 == 4 { 1.0 } else { -1.0 },
            );
            if plane_residual(ground, to_world.transform_point(local)) < -1e-9 {
                return Err(SceneError::InvalidSpec(
                    "box extends below the ground plane".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Complete scene: world ground plane, its texture, box obstacles, the
/// camera, and one world-to-camera pose per frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub plane: GroundPlane,
    pub texture: TextureSpec,
    pub boxes: Vec<BoxSpec>,
    pub intrinsics: CameraIntrinsics,
    pub trajectory: Vec<Pose>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        self.intrinsics.validate()?;
        self.texture.validate()?;
        if self.trajectory.is_empty() {
            return Err(SceneError::InvalidSpec("trajectory is empty".into()));
        }
        for (i, pose) in self.trajectory.iter().enumerate() {
            let center = pose.inverse().translation();
            if plane_residual(&self.plane, center) < 1e-6 {
                return Err(SceneError::InvalidSpec(format!(
                    "camera {i} is at or below the ground plane"
                )));
            }
        }
        for b in &self.boxes {
            b.validate(&self.plane)?;
        }
        Ok(())
    }
}

/// One rendered frame with its exact ground truth.
#[derive(Debug, Clone)]
pub struct RenderedFrame {
    pub image: ImageBuffer,
    /// Exact camera-frame depth; invalid where the ray escapes the scene.
    pub depth: DepthMap,
    /// Pixels whose first ray hit is the ground plane.
    pub mask: RoadMask,
    /// World-to-camera pose of this frame.
    pub pose: Pose,
    /// The ground plane expressed in this camera's frame.
    pub plane: GroundPlane,
}

/// First intersection of the ray `o + t*d` with the origin-centered box of
/// half-extents `half`, as the parameter `t` (slab method). `None` when the
/// ray misses or the entry point is behind the near limit.
fn ray_box_entry(o: Vector3<f64>, d: Vector3<f64>, half: Vector3<f64>) -> Option<f64> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for i in 0..3 {
        if d[i].abs() < 1e-12 {
            if o[i].abs() > half[i] {
                return None;
            }
        } else {
            let inv = 1.0 / d[i];
            let (near, far) = ((-half[i] - o[i]) * inv, (half[i] - o[i]) * inv);
            let (near, far) = if near <= far { (near, far) } else { (far, near) };
            t_enter = t_enter.max(near);
            t_exit = t_exit.min(far);
            if t_enter > t_exit {
                return None;
            }
        }
    }
    (t_enter > NEAR_LIMIT).then_some(t_enter)
}

/// World-space extent a pixel covers on a surface: the geometric mean of the
/// footprint across and along the slant, where `t * ray_norm` is the
/// Euclidean hit distance, `focal` the pixel angular resolution, and
/// `normal_dot_dir` the (unnormalized) surface-normal / ray-direction dot
/// product whose vanishing means grazing incidence.
fn pixel_footprint(t: f64, ray_norm: f64, focal: f64, normal_dot_dir: f64) -> f64 {
    let cos_incidence = (normal_dot_dir.abs() / ray_norm).clamp(1e-6, 1.0);
    // Cube root rather than the square root of the geometric mean: biased
    // toward the short (cross-slant) axis, the way anisotropic filtering
    // picks its detail level.
    t * ray_norm / (focal * cos_incidence.cbrt())
}

/// Albedo index of the box face containing a surface point (largest
/// coordinate relative to its half-extent wins).
fn face_index(p: Vector3<f64>, half: Vector3<f64>) -> usize {
    let mut best_axis = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..3 {
        let r = p[i].abs() / half[i];
        if r > best {
            best = r;
            best_axis = i;
        }
    }
    2 * best_axis + usize::from(p[best_axis] < 0.0)
}

/// Renders one frame of the scene by per-pixel ray casting.
///
/// Texture is evaluated at world coordinates, so intensities of a surface
/// point agree across frames; depths are exact ray-hit distances along the
/// camera z axis; the mask marks exactly the pixels whose nearest hit is the
/// ground plane.
pub fn render(spec: &SceneSpec, index: usize) -> Result<RenderedFrame, SceneError> {
    spec.validate()?;
    if index >= spec.trajectory.len() {
        return Err(SceneError::FrameOutOfRange { index, count: spec.trajectory.len() });
    }
    let k = &spec.intrinsics;
    let pose = spec.trajectory[index];
    let plane_cam = transform_plane(&pose, &spec.plane)?;
    let cam_to_world = pose.inverse();
    let r_wc = cam_to_world.rotation_matrix();
    let origin_w = cam_to_world.translation();
    let boxes: Vec<_> = spec
        .boxes
        .iter()
        .map(|b| {
            (
                b.pose.rotation_matrix(),
                b.pose.transform_point(origin_w),
                Vector3::new(0.5 * b.size[0], 0.5 * b.size[1], 0.5 * b.size[2]),
                b,
            )
        })
        .collect();

    let (w, h) = (k.width, k.height);
    let focal = k.fx.min(k.fy);
    let mut intensity = vec![0.0; w * h];
    let mut depth = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    let mut mask = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let pixel = Vector2::new(x as f64, y as f64);
            let dir_cam = k.ray(pixel);
            let dir_w = r_wc * dir_cam;
            // dir_cam.z == 1, so the ray parameter is camera-frame depth.
            let ground_t = ray_plane_depth(k, &plane_cam, pixel).ok();
            let mut nearest = ground_t.map(|t| (t, None));
            for (rot, o_b, half, b) in &boxes {
                let Some(t) = ray_box_entry(*o_b, rot * dir_w, *half) else { continue };
                if nearest.is_none_or(|(best, _)| t < best) {
                    nearest = Some((t, Some((*o_b, rot * dir_w, *half, *b))));
                }
            }
            let i = y * w + x;
            match nearest {
                None => intensity[i] = SKY_INTENSITY,
                Some((t, hit)) => {
                    let world = origin_w + t * dir_w;
                    let ray_norm = dir_cam.norm();
                    depth[i] = t;
                    valid[i] = true;
                    match hit {
                        None => {
                            let fp =
                                pixel_footprint(t, ray_norm, focal, plane_cam.normal().dot(&dir_cam));
                            let noise =
                                spec.texture.sample_filtered(world.x, world.y, world.z, fp);
                            mask[i] = true;
                            intensity[i] =
                                (0.5 + spec.texture.contrast * (noise - 0.5)).clamp(0.0, 1.0);
                        }
                        Some((o_b, dir_b, half, b)) => {
                            let local = o_b + t * dir_b;
                            let face = face_index(local, half);
                            let fp = pixel_footprint(t, ray_norm, focal, dir_b[face / 2]);
                            let noise =
                                spec.texture.sample_filtered(world.x, world.y, world.z, fp);
                            let albedo = b.albedo[face];
                            intensity[i] = (albedo * (0.75 + 0.5 * noise)).clamp(0.0, 1.0);
                        }
                    }
                }
            }
        }
    }
    Ok(RenderedFrame {
        image: ImageBuffer::from_vec(w, h, 1, intensity)?,
        depth: DepthMap::from_vec(w, h, depth, valid)?,
        mask: RoadMask::from_vec(w, h, mask)?,
        pose,
        plane: plane_cam,
    })
}
