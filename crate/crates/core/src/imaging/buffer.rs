use super::{check_same_size, ImagingError};

/// Row-major image with 1 or 3 channels and intensities in `[0, 1]`.
///
/// Channel values of one pixel are contiguous (interleaved layout).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        fill: f64,
    ) -> Result<Self, ImagingError> {
        Self::from_vec(width, height, channels, vec![fill; width * height * channels])
    }

    pub fn from_vec(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidBuffer("zero dimensions".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(ImagingError::InvalidBuffer(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(ImagingError::InvalidBuffer(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ImagingError::InvalidBuffer(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Builds a single-channel image from a per-pixel function.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, ImagingError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_vec(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.index(x, y, c)]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        debug_assert!((0.0..=1.0).contains(&value), "intensity {value} outside [0, 1]");
        let i = self.index(x, y, c);
        self.data[i] = value;
    }

    /// Channel-mean grayscale view; clones single-channel images.
    pub fn luma(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.width * self.height);
        for px in self.data.chunks_exact(self.channels) {
            data.push(px.iter().sum::<f64>() / self.channels as f64);
        }
        ImageBuffer { width: self.width, height: self.height, channels: 1, data }
    }

    /// 2x mean-pooled half-resolution image (odd trailing row/column dropped).
    pub fn downscale_half(&self) -> ImageBuffer {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        let mut data = vec![0.0; w * h * self.channels];
        for y in 0..h {
            for x in 0..w {
                for c in 0..self.channels {
                    let (x0, y0) = (2 * x, 2 * y);
                    let x1 = (x0 + 1).min(self.width - 1);
                    let y1 = (y0 + 1).min(self.height - 1);
                    let sum = self.get(x0, y0, c)
                        + self.get(x1, y0, c)
                        + self.get(x0, y1, c)
                        + self.get(x1, y1, c);
                    data[(y * w + x) * self.channels + c] = sum * 0.25;
                }
            }
        }
        ImageBuffer { width: w, height: h, channels: self.channels, data }
    }
}

/// Per-pixel boolean road mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl RoadMask {
    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self, ImagingError> {
        if data.len() != width * height {
            return Err(ImagingError::InvalidBuffer(format!(
                "mask length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / (self.width * self.height) as f64
    }

    /// 0/1 single-channel image (used to warp masks alongside images).
    pub fn to_image(&self) -> ImageBuffer {
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.data.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Conservative 2x downscale: a coarse pixel is road only if all child
    /// pixels are road.
    pub fn downscale_half(&self) -> RoadMask {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        RoadMask::from_fn(w, h, |x, y| {
            let (x0, y0) = (2 * x, 2 * y);
            let x1 = (x0 + 1).min(self.width - 1);
            let y1 = (y0 + 1).min(self.height - 1);
            self.get(x0, y0) && self.get(x1, y0) && self.get(x0, y1) && self.get(x1, y1)
        })
    }
}

/// Per-pixel metric depth with validity; valid depths are finite and > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    pub fn from_vec(
        width: usize,
        height: usize,
        depth: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self, ImagingError> {
        if depth.len() != width * height || valid.len() != width * height {
            return Err(ImagingError::InvalidBuffer(format!(
                "depth/valid length {}/{} does not match {width}x{height}",
                depth.len(),
                valid.len()
            )));
        }
        for (d, &v) in depth.iter().zip(&valid) {
            if v && !(d.is_finite() && *d > 0.0) {
                return Err(ImagingError::InvalidBuffer(format!(
                    "valid pixel carries nonpositive depth {d}"
                )));
            }
        }
        Ok(Self { width, height, depth, valid })
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Result<Self, ImagingError> {
        Self::from_vec(width, height, vec![depth; width * height], vec![true; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    /// Depth at a pixel, `None` when invalid.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.is_valid(x, y).then(|| self.depth[y * self.width + x])
    }

    /// Raw stored value, meaningful only where valid.
    #[inline]
    pub fn raw(&self, x: usize, y: usize) -> f64 {
        self.depth[y * self.width + x]
    }

    pub fn depths(&self) -> &[f64] {
        &self.depth
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Uniformly rescaled copy (`scale > 0`).
    pub fn scaled(&self, scale: f64) -> Result<DepthMap, ImagingError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(ImagingError::InvalidBuffer(format!(
                "depth scale must be positive and finite, got {scale}"
            )));
        }
        Ok(DepthMap {
            width: self.width,
            height: self.height,
            depth: self.depth.iter().map(|d| d * scale).collect(),
            valid: self.valid.clone(),
        })
    }
}

/// A synthesized view: intensities plus per-pixel validity. Invalid pixels
/// carry intensity 0 and are excluded from every loss.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpResult {
    pub image: ImageBuffer,
    pub validity: Vec<bool>,
}

impl WarpResult {
    /// Fully valid wrapper around an existing image.
    pub fn trivial(image: ImageBuffer) -> Self {
        let validity = vec![true; image.width() * image.height()];
        Self { image, validity }
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.validity[y * self.image.width() + x]
    }

    pub fn valid_count(&self) -> usize {
        self.validity.iter().filter(|&&v| v).count()
    }
}

/// Unconstrained per-pixel scalar field (SSIM maps, loss maps).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height);
        Self { width, height, values }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Forward-difference gradients, one pair per pixel and channel; the last
/// column (for dx) and last row (for dy) are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGradients {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl ImageGradients {
    #[inline]
    pub fn dx_at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.dx[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn dy_at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.dy[(y * self.width + x) * self.channels + c]
    }
}

/// Forward-difference image gradients per channel.
pub fn image_gradients(img: &ImageBuffer) -> ImageGradients {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut dx = vec![0.0; w * h * ch];
    let mut dy = vec![0.0; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let i = (y * w + x) * ch + c;
                if x + 1 < w {
                    dx[i] = img.get(x + 1, y, c) - img.get(x, y, c);
                }
                if y + 1 < h {
                    dy[i] = img.get(x, y + 1, c) - img.get(x, y, c);
                }
            }
        }
    }
    ImageGradients { width: w, height: h, channels: ch, dx, dy }
}

/// Gradients of the channel-mean image (single channel).
pub(crate) fn image_gradients_luma(img: &ImageBuffer) -> ImageGradients {
    image_gradients(&img.luma())
}

/// Elementwise image/mask product.
pub fn apply_mask_impl(img: &ImageBuffer, mask: &RoadMask) -> Result<ImageBuffer, ImagingError> {
    check_same_size(img.width(), img.height(), mask.width(), mask.height())?;
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            if !mask.get(x, y) {
                for c in 0..img.channels() {
                    out.set(x, y, c, 0.0);
                }
            }
        }
    }
    Ok(out)
}
