use nalgebra::{Matrix2x3, Vector2};

use super::{rotation_jacobians, CameraIntrinsics, GeometryError, GroundPlane, Pose};

/// Partial derivatives of the homography-mapped (inhomogeneous) pixel with
/// respect to the motion and plane parameters.
///
/// Columns of `rotation` correspond to the three angle-axis components of
/// the pose; columns of `translation` and `normal` to the vector entries.
/// `normal` differentiates the raw (unconstrained) normal entries of
/// `H = K (R - t N^T / h) K^-1`; constrained parameterizations of `N` chain
/// their own `dN/dparam` onto it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomographyJacobians {
    pub rotation: Matrix2x3<f64>,
    pub translation: Matrix2x3<f64>,
    pub height: Vector2<f64>,
    pub normal: Matrix2x3<f64>,
    /// The mapped pixel the derivatives are taken at.
    pub mapped: Vector2<f64>,
}

/// Derivatives of the mapped pixel `pi(K (R - t N^T / h) K^-1 x)` at pixel
/// `x`, with respect to rotation (angle-axis), translation, plane height,
/// and plane normal.
///
/// Writing `m = K^-1 x` and `y = K (R - t N^T / h) m`, the projective
/// division contributes `dpi/dy` and the chain rule gives
///   dy/dv_i = K (dR/dv_i) m,
///   dy/dt   = -(N.m / h) K,
///   dy/dh   =  (N.m / h^2) K t,
///   dy/dN_j = -(m_j / h) K t.
/// At `t = 0` the height and normal blocks vanish identically.
pub fn homography_jacobians(
    k: &CameraIntrinsics,
    pose: &Pose,
    plane: &GroundPlane,
    x: Vector2<f64>,
) -> Result<HomographyJacobians, GeometryError> {
    let km = k.matrix();
    let m = k.ray(x);
    let r = pose.rotation_matrix();
    let t = pose.translation();
    let n = plane.normal();
    let h = plane.height();
    let n_dot_m = n.dot(&m);

    let y = km * (r * m - t * (n_dot_m / h));
    if y.z.abs() < 1e-12 {
        return Err(GeometryError::MapsToInfinity { w: y.z });
    }
    let w = y.z;
    let dpi = Matrix2x3::new(
        1.0 / w,
        0.0,
        -y.x / (w * w),
        0.0,
        1.0 / w,
        -y.y / (w * w),
    );

    let dr = rotation_jacobians(pose.angle_axis());
    let mut rotation = Matrix2x3::zeros();
    for i in 0..3 {
        rotation.set_column(i, &(dpi * (km * (dr[i] * m))));
    }

    let dpi_k = dpi * km;
    let translation = dpi_k * (-n_dot_m / h);
    let dpi_kt = dpi_k * t;
    let height = dpi_kt * (n_dot_m / (h * h));
    let normal = dpi_kt * (-m.transpose() / h);

    Ok(HomographyJacobians {
        rotation,
        translation,
        height,
        normal,
        mapped: Vector2::new(y.x / w, y.y / w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_from_angle_axis;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent forward map: built from raw matrices, not from
    /// `compose_homography`, and taking the normal unconstrained.
    fn map_raw(
        k: &CameraIntrinsics,
        v: Vector3<f64>,
        t: Vector3<f64>,
        n: Vector3<f64>,
        h: f64,
        x: Vector2<f64>,
    ) -> Option<Vector2<f64>> {
        let hm = k.matrix()
            * (rotation_from_angle_axis(v) - t * n.transpose() / h)
            * k.inverse_matrix();
        let y = hm * Vector3::new(x.x, x.y, 1.0);
        (y.z.abs() > 1e-9).then(|| Vector2::new(y.x / y.z, y.y / y.z))
    }

    struct RandomState {
        k: CameraIntrinsics,
        v: Vector3<f64>,
        t: Vector3<f64>,
        n: Vector3<f64>,
        h: f64,
        x: Vector2<f64>,
    }

    fn sample_state(rng: &mut impl Rng) -> RandomState {
        let k = CameraIntrinsics::new(
            rng.random_range(60.0..400.0),
            rng.random_range(60.0..400.0),
            rng.random_range(50.0..80.0),
            rng.random_range(35.0..60.0),
            128,
            96,
        )
        .unwrap();
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalize();
        let dir = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalize();
        RandomState {
            k,
            v: axis * rng.random_range(0.0..0.4),
            t: dir * rng.random_range(0.01..2.0),
            n: Vector3::new(
                rng.random_range(-0.2..0.2),
                -1.0,
                rng.random_range(-0.2..0.2),
            )
            .normalize(),
            h: rng.random_range(0.5..3.0),
            x: Vector2::new(rng.random_range(10.0..118.0), rng.random_range(10.0..86.0)),
        }
    }

    fn central_diff(
        f: impl Fn(f64) -> Option<Vector2<f64>>,
        eps: f64,
    ) -> Option<Vector2<f64>> {
        Some((f(eps)? - f(-eps)?) / (2.0 * eps))
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        diff / scale.max(1.0)
    }

    #[test]
    fn all_blocks_match_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let eps = 1e-6;
        let mut tested = 0usize;
        while tested < 1000 {
            let s = sample_state(&mut rng);
            let pose = Pose::new(s.v, s.t);
            let plane = GroundPlane::new(s.n, s.h).unwrap();
            let Ok(jac) = homography_jacobians(&s.k, &pose, &plane, s.x) else { continue };

            let mut analytic: Vec<f64> = Vec::with_capacity(20);
            let mut numeric: Vec<f64> = Vec::with_capacity(20);
            let mut push = |a: Vector2<f64>, f: Vector2<f64>| {
                analytic.extend_from_slice(&[a.x, a.y]);
                numeric.extend_from_slice(&[f.x, f.y]);
            };

            let mut valid = true;
            for i in 0..3 {
                let fd = central_diff(
                    |e| {
                        let mut v = s.v;
                        v[i] += e;
                        map_raw(&s.k, v, s.t, s.n, s.h, s.x)
                    },
                    eps,
                );
                match fd {
                    Some(fd) => push(jac.rotation.column(i).into(), fd),
                    None => valid = false,
                }
            }
            for i in 0..3 {
                let fd = central_diff(
                    |e| {
                        let mut t = s.t;
                        t[i] += e;
                        map_raw(&s.k, s.v, t, s.n, s.h, s.x)
                    },
                    eps,
                );
                match fd {
                    Some(fd) => push(jac.translation.column(i).into(), fd),
                    None => valid = false,
                }
            }
            for i in 0..3 {
                let fd = central_diff(
                    |e| {
                        let mut n = s.n;
                        n[i] += e;
                        map_raw(&s.k, s.v, s.t, n, s.h, s.x)
                    },
                    eps,
                );
                match fd {
                    Some(fd) => push(jac.normal.column(i).into(), fd),
                    None => valid = false,
                }
            }
            match central_diff(|e| map_raw(&s.k, s.v, s.t, s.n, s.h + e, s.x), eps) {
                Some(fd) => push(jac.height, fd),
                None => valid = false,
            }
            if !valid {
                continue;
            }
            assert!(
                rel_err(&analytic, &numeric) < 1e-5,
                "jacobian mismatch at state {tested}: rel err {}",
                rel_err(&analytic, &numeric)
            );
            tested += 1;
        }
    }

    #[test]
    fn zero_translation_zeroes_height_and_normal_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..50 {
            let s = sample_state(&mut rng);
            let pose = Pose::new(s.v, Vector3::zeros());
            let plane = GroundPlane::new(s.n, s.h).unwrap();
            let jac = homography_jacobians(&s.k, &pose, &plane, s.x).unwrap();
            assert_eq!(jac.height, Vector2::zeros());
            assert_eq!(jac.normal, Matrix2x3::zeros());
        }
    }

    #[test]
    fn mapped_pixel_agrees_with_homography_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..100 {
            let s = sample_state(&mut rng);
            let pose = Pose::new(s.v, s.t);
            let plane = GroundPlane::new(s.n, s.h).unwrap();
            let Ok(jac) = homography_jacobians(&s.k, &pose, &plane, s.x) else { continue };
            let h = crate::geometry::compose_homography(&s.k, &pose, &plane).unwrap();
            let mapped = h.apply(s.x).unwrap();
            assert_abs_diff_eq!(jac.mapped, mapped, epsilon = 1e-9);
        }
    }
}
