use super::{check_same_size, ImageBuffer, ImagingError, ScalarField};

/// SSIM stabilization constants for intensities in `[0, 1]`: `(0.01)^2` and
/// `(0.03)^2`.
pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;

/// 3x3 mean filter with boundary renormalization: each output is the mean
/// over the window clipped to the image (9 interior, 6 edge, 4 corner).
pub(crate) fn box3_mean(f: &[f64], w: usize, h: usize) -> Vec<f64> {
    debug_assert_eq!(f.len(), w * h);
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let y0 = y.saturating_sub(1);
        let y1 = (y + 1).min(h - 1);
        for x in 0..w {
            let x0 = x.saturating_sub(1);
            let x1 = (x + 1).min(w - 1);
            let mut sum = 0.0;
            for yy in y0..=y1 {
                for xx in x0..=x1 {
                    sum += f[yy * w + xx];
                }
            }
            out[y * w + x] = sum / ((y1 - y0 + 1) * (x1 - x0 + 1)) as f64;
        }
    }
    out
}

/// Adjoint of [`box3_mean`]: `box3_adjoint(g)[q] = sum_{p: q in W(p)} g[p] / n(p)`.
///
/// Because the clipped window relation is symmetric (`q in W(p)` iff
/// `p in W(q)`), this gathers over the same 3x3 neighborhood but divides by
/// the *source* pixel's window size.
pub(crate) fn box3_adjoint(g: &[f64], w: usize, h: usize) -> Vec<f64> {
    debug_assert_eq!(g.len(), w * h);
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let y0 = y.saturating_sub(1);
        let y1 = (y + 1).min(h - 1);
        for x in 0..w {
            let x0 = x.saturating_sub(1);
            let x1 = (x + 1).min(w - 1);
            let mut sum = 0.0;
            for yy in y0..=y1 {
                let wy0 = yy.saturating_sub(1);
                let wy1 = (yy + 1).min(h - 1);
                for xx in x0..=x1 {
                    let wx0 = xx.saturating_sub(1);
                    let wx1 = (xx + 1).min(w - 1);
                    let n = ((wy1 - wy0 + 1) * (wx1 - wx0 + 1)) as f64;
                    sum += g[yy * w + xx] / n;
                }
            }
            out[y * w + x] = sum;
        }
    }
    out
}

/// Windowed statistics shared by the SSIM forward pass and its adjoint.
pub(crate) struct SsimStats {
    pub mu_a: Vec<f64>,
    pub mu_b: Vec<f64>,
    pub var_a: Vec<f64>,
    pub var_b: Vec<f64>,
    pub cov: Vec<f64>,
}

pub(crate) fn ssim_stats(a: &[f64], b: &[f64], w: usize, h: usize) -> SsimStats {
    let mu_a = box3_mean(a, w, h);
    let mu_b = box3_mean(b, w, h);
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mut var_a = box3_mean(&aa, w, h);
    let mut var_b = box3_mean(&bb, w, h);
    let mut cov = box3_mean(&ab, w, h);
    for i in 0..w * h {
        var_a[i] -= mu_a[i] * mu_a[i];
        var_b[i] -= mu_b[i] * mu_b[i];
        cov[i] -= mu_a[i] * mu_b[i];
    }
    SsimStats { mu_a, mu_b, var_a, var_b, cov }
}

pub(crate) fn ssim_from_stats(stats: &SsimStats, i: usize) -> f64 {
    let num = (2.0 * stats.mu_a[i] * stats.mu_b[i] + SSIM_C1)
        * (2.0 * stats.cov[i] + SSIM_C2);
    let den = (stats.mu_a[i] * stats.mu_a[i] + stats.mu_b[i] * stats.mu_b[i] + SSIM_C1)
        * (stats.var_a[i] + stats.var_b[i] + SSIM_C2);
    num / den
}

/// Per-pixel SSIM between the channel-mean images of `a` and `b`, using 3x3
/// mean pooling with boundary renormalization.
pub fn ssim_map(a: &ImageBuffer, b: &ImageBuffer) -> Result<ScalarField, ImagingError> {
    check_same_size(a.width(), a.height(), b.width(), b.height())?;
    let (w, h) = (a.width(), a.height());
    let la = a.luma();
    let lb = b.luma();
    let stats = ssim_stats(la.data(), lb.data(), w, h);
    let values = (0..w * h).map(|i| ssim_from_stats(&stats, i)).collect();
    Ok(ScalarField::new(w, h, values))
}
