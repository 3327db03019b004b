use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Threshold below which trigonometric ratios switch to Taylor expansions.
const SMALL_ANGLE: f64 = 1e-6;

/// Skew-symmetric cross-product matrix: `skew(v) * w == v.cross(&w)`.
pub fn skew(v: Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues formula. `v` is an angle-axis vector (axis * angle, radians).
///
/// The `sin(t)/t` and `(1-cos(t))/t^2` coefficients switch to second-order
/// Taylor expansions below `1e-6` rad so the map stays smooth through zero.
pub fn rotation_from_angle_axis(v: Vector3<f64>) -> Matrix3<f64> {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let vx = skew(v);
    Matrix3::identity() + vx * a + vx * vx * b
}

/// Logarithm map: recovers the canonical angle-axis vector (angle in
/// `[0, pi]`) from a rotation matrix.
pub fn angle_axis_from_rotation(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = cos.acos();
    // Twice the axis scaled by sin(theta).
    let w = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    if theta < SMALL_ANGLE {
        // v = theta * axis = w / 2 to first order.
        return w * 0.5;
    }
    if theta < std::f64::consts::PI - 1e-4 {
        return w * (theta / (2.0 * theta.sin()));
    }
    // Near pi the skew part vanishes; recover the axis from the symmetric
    // part  (R + R^T)/2 = cos*I + (1-cos) * a a^T.
    let d = 1.0 - cos;
    let sym = (r + r.transpose()) * 0.5;
    let sq = Vector3::new(
        ((sym[(0, 0)] - cos) / d).max(0.0),
        ((sym[(1, 1)] - cos) / d).max(0.0),
        ((sym[(2, 2)] - cos) / d).max(0.0),
    );
    let k = sq.imax();
    let mut axis = Vector3::zeros();
    axis[k] = sq[k].sqrt();
    for j in 0..3 {
        if j != k {
            axis[j] = sym[(j, k)] / (d * axis[k]);
        }
    }
    axis.normalize_mut();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Derivatives of the Rodrigues map: `d R / d v_i` for the three angle-axis
/// components, evaluated at `v`.
///
/// Uses the closed form
/// `dR/dv_i = (v_i [v]x + [ v x ((I - R) e_i) ]x) / |v|^2 * R`,
/// falling back to `dR/dv_i = [e_i]x` at the origin (exact at v = 0).
pub fn rotation_jacobians(v: Vector3<f64>) -> [Matrix3<f64>; 3] {
    let theta2 = v.norm_squared();
    if theta2.sqrt() < SMALL_ANGLE {
        return [
            skew(Vector3::x()),
            skew(Vector3::y()),
            skew(Vector3::z()),
        ];
    }
    let r = rotation_from_angle_axis(v);
    let i_minus_r = Matrix3::identity() - r;
    std::array::from_fn(|i| {
        let e = Vector3::ith(i, 1.0);
        let num = skew(v) * v[i] + skew(v.cross(&(i_minus_r * e)));
        num * r / theta2
    })
}

/// Rigid transform mapping source-frame points to target-frame points:
/// `P_target = R * P_source + t`.
///
/// The rotation is stored as a canonical angle-axis vector with angle in
/// `[0, pi]`; constructors wrap larger angles back into that range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    rotation: Vector3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation: canonicalize(rotation), translation }
    }

    pub fn identity() -> Self {
        Self { rotation: Vector3::zeros(), translation: Vector3::zeros() }
    }

    /// Builds a pose from a rotation matrix and translation vector.
    pub fn from_parts(rotation: &Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation: angle_axis_from_rotation(rotation), translation }
    }

    pub fn angle_axis(&self) -> Vector3<f64> {
        self.rotation
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        rotation_from_angle_axis(self.rotation)
    }

    pub fn transform_point(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.rotation_matrix() * p + self.translation
    }

    /// `self.compose(other)` applies `other` first: the result maps
    /// `other`'s source frame into `self`'s target frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        let ra = self.rotation_matrix();
        let rb = other.rotation_matrix();
        Pose::from_parts(&(ra * rb), ra * other.translation + self.translation)
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation_matrix().transpose();
        Pose { rotation: -self.rotation, translation: -(rt * self.translation) }
    }

    /// Rotation angle in radians (always in `[0, pi]`).
    pub fn rotation_angle(&self) -> f64 {
        self.rotation.norm()
    }
}

/// Relative motion mapping current-frame points into previous-frame points,
/// from two world-to-camera poses: `T_rel = T_prev o T_cur^-1`.
pub fn relative_pose(world_to_prev: &Pose, world_to_cur: &Pose) -> Pose {
    world_to_prev.compose(&world_to_cur.inverse())
}

fn canonicalize(v: Vector3<f64>) -> Vector3<f64> {
    let theta = v.norm();
    if theta <= std::f64::consts::PI {
        return v;
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let wrapped = theta % two_pi;
    let axis = v / theta;
    if wrapped <= std::f64::consts::PI {
        axis * wrapped
    } else {
        -axis * (two_pi - wrapped)
    }
}
