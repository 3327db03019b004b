use super::ImageBuffer;

/// Cell index and fractional offsets for a sample point, `None` when the
/// point leaves the closed image domain `[0, w-1] x [0, h-1]`.
///
/// The cell index is clamped to `w-2` so integer border coordinates sample
/// the stored pixel exactly (the interpolant extends continuously to the
/// domain boundary).
#[inline]
fn cell(x: f64, y: f64, w: usize, h: usize) -> Option<(usize, usize, f64, f64)> {
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return None;
    }
    let x0 = (x as usize).min(w.saturating_sub(2));
    let y0 = (y as usize).min(h.saturating_sub(2));
    Some((x0, y0, x - x0 as f64, y - y0 as f64))
}

/// 4-neighbor bilinear interpolation of one channel; `None` out of bounds.
pub fn bilinear_sample(img: &ImageBuffer, x: f64, y: f64, channel: usize) -> Option<f64> {
    let (w, h) = (img.width(), img.height());
    let (x0, y0, dx, dy) = cell(x, y, w, h)?;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let v00 = img.get(x0, y0, channel);
    let v10 = img.get(x1, y0, channel);
    let v01 = img.get(x0, y1, channel);
    let v11 = img.get(x1, y1, channel);
    Some(
        v00 * (1.0 - dx) * (1.0 - dy)
            + v10 * dx * (1.0 - dy)
            + v01 * (1.0 - dx) * dy
            + v11 * dx * dy,
    )
}

/// Bilinear value plus its exact spatial derivatives `(value, d/dx, d/dy)`
/// of the piecewise-bilinear interpolant (constant per cell edge direction).
pub fn bilinear_sample_with_grad(
    img: &ImageBuffer,
    x: f64,
    y: f64,
    channel: usize,
) -> Option<(f64, f64, f64)> {
    let (w, h) = (img.width(), img.height());
    let (x0, y0, dx, dy) = cell(x, y, w, h)?;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let v00 = img.get(x0, y0, channel);
    let v10 = img.get(x1, y0, channel);
    let v01 = img.get(x0, y1, channel);
    let v11 = img.get(x1, y1, channel);
    let value = v00 * (1.0 - dx) * (1.0 - dy)
        + v10 * dx * (1.0 - dy)
        + v01 * (1.0 - dx) * dy
        + v11 * dx * dy;
    let gx = (v10 - v00) * (1.0 - dy) + (v11 - v01) * dy;
    let gy = (v01 - v00) * (1.0 - dx) + (v11 - v10) * dx;
    Some((value, gx, gy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> ImageBuffer {
        // 1x2 image holding 0 and 1.
        ImageBuffer::from_vec(2, 1, 1, vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn integer_coordinates_return_stored_values() {
        let img = ImageBuffer::from_vec(3, 2, 1, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        for y in 0..2 {
            for x in 0..3 {
                let v = bilinear_sample(&img, x as f64, y as f64, 0).unwrap();
                assert_eq!(v, img.get(x, y, 0));
            }
        }
    }

    #[test]
    fn midpoint_of_linear_ramp() {
        assert_eq!(bilinear_sample(&ramp(), 0.5, 0.0, 0).unwrap(), 0.5);
        assert_eq!(bilinear_sample(&ramp(), 0.25, 0.0, 0).unwrap(), 0.25);
    }

    #[test]
    fn out_of_bounds_is_invalid() {
        let img = ramp();
        assert!(bilinear_sample(&img, -0.5, 0.0, 0).is_none());
        assert!(bilinear_sample(&img, 0.0, -0.001, 0).is_none());
        assert!(bilinear_sample(&img, 1.001, 0.0, 0).is_none());
        assert!(bilinear_sample(&img, 0.0, f64::NAN, 0).is_none());
        // The closed border itself is valid.
        assert!(bilinear_sample(&img, 1.0, 0.0, 0).is_some());
    }

    #[test]
    fn gradient_matches_finite_differences_inside_cells() {
        let img = ImageBuffer::from_fn(8, 8, |x, y| {
            0.5 + 0.3 * ((x as f64) * 0.7).sin() * ((y as f64) * 0.4).cos()
        })
        .unwrap();
        let eps = 1e-7;
        for &(x, y) in &[(1.3, 2.7), (4.5, 5.2), (6.1, 0.4), (2.9, 6.6)] {
            let (_, gx, gy) = bilinear_sample_with_grad(&img, x, y, 0).unwrap();
            let fx = (bilinear_sample(&img, x + eps, y, 0).unwrap()
                - bilinear_sample(&img, x - eps, y, 0).unwrap())
                / (2.0 * eps);
            let fy = (bilinear_sample(&img, x, y + eps, 0).unwrap()
                - bilinear_sample(&img, x, y - eps, 0).unwrap())
                / (2.0 * eps);
            assert!((gx - fx).abs() < 1e-8, "gx {gx} vs fd {fx}");
            assert!((gy - fy).abs() < 1e-8, "gy {gy} vs fd {fy}");
        }
    }

    #[test]
    fn single_pixel_image_samples_its_value() {
        let img = ImageBuffer::from_vec(1, 1, 1, vec![0.42]).unwrap();
        assert_eq!(bilinear_sample(&img, 0.0, 0.0, 0).unwrap(), 0.42);
        assert!(bilinear_sample(&img, 0.5, 0.0, 0).is_none());
    }
}
