use serde::{Deserialize, Serialize};

use super::SceneError;

/// Procedural surface texture: seeded multi-octave value noise evaluated at
/// world coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TextureSpec {
    pub seed: u64,
    /// Number of octaves; each halves the wavelength of the previous one.
    pub octaves: u32,
    /// Peak-to-peak intensity swing in `[0, 1]`; 0 renders a flat surface.
    pub contrast: f64,
    /// Wavelength of the coarsest octave, meters.
    pub scale: f64,
}

/// Amplitude ratio between consecutive octaves.
const PERSISTENCE: f64 = 0.65;

impl Default for TextureSpec {
    fn default() -> Self {
        Self { seed: 16, octaves: 5, contrast: 1.0, scale: 1.0 }
    }
}

impl TextureSpec {
    /// Constant-intensity surface, for tests that need zero texture gradient.
    pub fn flat() -> Self {
        Self { contrast: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.octaves == 0 || self.octaves > 16 {
            return Err(SceneError::InvalidSpec(format!(
                "texture octaves must be in 1..=16, got {}",
                self.octaves
            )));
        }
        if !(0.0..=1.0).contains(&self.contrast) {
            return Err(SceneError::InvalidSpec(format!(
                "texture contrast must be in [0, 1], got {}",
                self.contrast
            )));
        }
        if !(self.scale > 1e-6 && self.scale.is_finite()) {
            return Err(SceneError::InvalidSpec(format!(
                "texture scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }

    /// Noise value in `[0, 1]` at a world point; smooth in the point and
    /// fully determined by the spec.
    pub fn sample(&self, x: f64, y: f64, z: f64) -> f64 {
        self.sample_filtered(x, y, z, 0.0)
    }

    /// Like [`TextureSpec::sample`], but band-limited for a sampling
    /// footprint of `footprint` meters: octaves whose wavelength is not
    /// comfortably above the footprint fade toward their mean, which is the
    /// prefiltering a real camera's pixel integration performs. Without it,
    /// distant surfaces alias into per-pixel speckle that no two viewpoints
    /// agree on.
    pub fn sample_filtered(&self, x: f64, y: f64, z: f64, footprint: f64) -> f64 {
        if self.contrast == 0.0 {
            return 0.5;
        }
        let mut total = 0.0;
        let mut amplitude = 1.0;
        let mut norm = 0.0;
        let mut wavelength = self.scale;
        for octave in 0..self.octaves {
            // Full weight when the wavelength is >= 2.2 footprints, zero at
            // <= 0.8, smoothstepped in between.
            let weight = if footprint > 0.0 {
                smoothstep(((wavelength / footprint - 0.8) / 1.4).clamp(0.0, 1.0))
            } else {
                1.0
            };
            let value = if weight > 0.0 {
                // Anisotropic lattice: double frequency across the road (x),
                // where pixel footprints are smallest, so small patches span
                // enough texture cells without aliasing the long axis.
                value_noise(
                    self.seed,
                    octave,
                    2.0 * x / wavelength,
                    y / wavelength,
                    z / wavelength,
                )
            } else {
                0.5
            };
            total += amplitude * (weight * value + (1.0 - weight) * 0.5);
            norm += amplitude;
            amplitude *= PERSISTENCE;
            wavelength *= 0.5;
        }
        total / norm
    }
}

/// Deterministic lattice value in `[0, 1)` (splitmix64-style finalizer over
/// the seed, octave and cell coordinates).
fn lattice(seed: u64, octave: u32, ix: i64, iy: i64, iz: i64) -> f64 {
    let mut h = seed ^ (u64::from(octave)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for v in [ix, iy, iz] {
        h ^= (v as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Quintic interpolation weight: C2-continuous, so resampled renders carry
/// less high-order content than the cubic smoothstep would leave.
fn smootherstep(t: f64) -> f64 {
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Trilinear value noise: smoothstep-interpolated random lattice values.
fn value_noise(seed: u64, octave: u32, x: f64, y: f64, z: f64) -> f64 {
    let (x0, y0, z0) = (x.floor(), y.floor(), z.floor());
    let (ix, iy, iz) = (x0 as i64, y0 as i64, z0 as i64);
    let (tx, ty, tz) = (smootherstep(x - x0), smootherstep(y - y0), smootherstep(z - z0));
    let axis_weight = |d: u32, t: f64| if d == 1 { t } else { 1.0 - t };
    let mut value = 0.0;
    for corner in 0..8u32 {
        let (dx, dy, dz) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
        let weight = axis_weight(dx, tx) * axis_weight(dy, ty) * axis_weight(dz, tz);
        value += weight
            * lattice(seed, octave, ix + i64::from(dx), iy + i64::from(dy), iz + i64::from(dz));
    }
    value
}
