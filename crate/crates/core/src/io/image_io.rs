//! Image, road-mask and depth-map codecs.
//!
//! Frames are stored as 16-bit grayscale PNG; 8-bit PNG and binary or ASCII
//! PGM/PPM load equally well, normalized to `[0, 1]`. Masks are 8-bit PNG
//! with nonzero = road. Depth maps follow the KITTI convention: 16-bit
//! single-channel PNG holding `meters × 256`, with raw 0 marking an invalid
//! pixel.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use super::{atomic_write, IoError};
use crate::imaging::{DepthMap, ImageBuffer, RoadMask};

fn open(path: &Path) -> Result<DynamicImage, IoError> {
    image::open(path).map_err(|e| IoError::Image { path: path.to_path_buf(), source: e })
}

fn encode_png(img: &DynamicImage, path: &Path) -> Result<(), IoError> {
    let mut bytes = Vec::new();
    img.write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)
        .map_err(|e| IoError::Image { path: path.to_path_buf(), source: e })?;
    atomic_write(path, &bytes)
}

/// Loads an 8- or 16-bit PNG/PGM/PPM into `[0, 1]` intensities. Grayscale
/// sources become 1-channel buffers, color sources 3-channel; a possible
/// alpha channel is dropped.
pub fn load_image(path: &Path) -> Result<ImageBuffer, IoError> {
    let img = open(path)?;
    let grayscale = matches!(
        img,
        DynamicImage::ImageLuma8(_)
            | DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
    );
    let (width, height) = (img.width() as usize, img.height() as usize);
    let buffer = if grayscale {
        let gray = img.into_luma16();
        let data = gray.pixels().map(|p| f64::from(p.0[0]) / 65535.0).collect();
        ImageBuffer::from_vec(width, height, 1, data)?
    } else {
        let rgb = img.into_rgb16();
        let data = rgb.pixels().flat_map(|p| p.0).map(|v| f64::from(v) / 65535.0).collect();
        ImageBuffer::from_vec(width, height, 3, data)?
    };
    Ok(buffer)
}

/// Saves an image as 16-bit PNG (grayscale or RGB following the channel
/// count), quantizing each intensity to the nearest of 65536 levels.
pub fn save_image(img: &ImageBuffer, path: &Path) -> Result<(), IoError> {
    let quantize = |v: f64| (v * 65535.0).round() as u16;
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = if img.channels() == 1 {
        let raw: Vec<u16> = img.data().iter().map(|&v| quantize(v)).collect();
        DynamicImage::ImageLuma16(
            image::ImageBuffer::from_raw(w, h, raw).expect("buffer sized by construction"),
        )
    } else {
        let raw: Vec<u16> = img.data().iter().map(|&v| quantize(v)).collect();
        DynamicImage::ImageRgb16(
            image::ImageBuffer::from_raw(w, h, raw).expect("buffer sized by construction"),
        )
    };
    encode_png(&dynamic, path)
}

/// Loads a road mask: any image decodes, nonzero luma = road.
pub fn load_mask(path: &Path) -> Result<RoadMask, IoError> {
    let gray = open(path)?.into_luma8();
    let (width, height) = (gray.width() as usize, gray.height() as usize);
    let data = gray.pixels().map(|p| p.0[0] != 0).collect();
    Ok(RoadMask::from_vec(width, height, data)?)
}

/// Saves a road mask as 8-bit PNG, road = 255.
pub fn save_mask(mask: &RoadMask, path: &Path) -> Result<(), IoError> {
    let raw: Vec<u8> = mask.data().iter().map(|&v| if v { 255 } else { 0 }).collect();
    let img = image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("buffer sized by construction");
    encode_png(&DynamicImage::ImageLuma8(img), path)
}

/// Loads a KITTI-convention depth map: 16-bit single-channel PNG, depth =
/// raw / 256 meters, raw 0 = invalid. Any other bit depth or channel count
/// is rejected.
pub fn load_depth_png(path: &Path) -> Result<DepthMap, IoError> {
    let img = open(path)?;
    let gray = match img {
        DynamicImage::ImageLuma16(g) => g,
        other => {
            return Err(IoError::format(
                path,
                format!(
                    "depth maps must be 16-bit single-channel PNG, got {:?}",
                    other.color()
                ),
            ));
        }
    };
    let (width, height) = (gray.width() as usize, gray.height() as usize);
    let mut depth = Vec::with_capacity(width * height);
    let mut valid = Vec::with_capacity(width * height);
    for p in gray.pixels() {
        let raw = p.0[0];
        depth.push(f64::from(raw) / 256.0);
        valid.push(raw != 0);
    }
    Ok(DepthMap::from_vec(width, height, depth, valid)?)
}

/// Saves a depth map in the KITTI 16-bit convention: raw = `depth × 256`
/// rounded, clamped to the representable range `[1, 65535]`; invalid
/// pixels store 0. Loading back reproduces valid depths to within the
/// quantization step of 1/256 m.
pub fn save_depth_png(depth: &DepthMap, path: &Path) -> Result<(), IoError> {
    let (w, h) = (depth.width(), depth.height());
    let mut raw = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let value = match depth.get(x, y) {
                Some(d) => ((d * 256.0).round() as i64).clamp(1, 65535) as u16,
                None => 0,
            };
            raw.push(value);
        }
    }
    let img = image::ImageBuffer::from_raw(w as u32, h as u32, raw)
        .expect("buffer sized by construction");
    encode_png(&DynamicImage::ImageLuma16(img), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn sixteen_bit_gray_round_trip_is_exact_on_representable_values() {
        let dir = tmp();
        let path = dir.path().join("img.png");
        // Every value is an exact 16-bit level, so the round trip is exact.
        let img = ImageBuffer::from_fn(7, 5, |x, y| {
            f64::from((x * 9391 + y * 31 + 17) as u32 % 65536) / 65535.0
        })
        .unwrap();
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.channels(), 1);
        assert_eq!(back.data(), img.data());
    }

    #[test]
    fn arbitrary_intensities_round_trip_within_one_quantization_step() {
        let dir = tmp();
        let path = dir.path().join("img.png");
        let img = ImageBuffer::from_fn(16, 12, |x, y| {
            ((x as f64 * 0.137 + y as f64 * 0.311).sin()).mul_add(0.5, 0.5)
        })
        .unwrap();
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
    }

    #[test]
    fn rgb_images_keep_three_channels() {
        let dir = tmp();
        let path = dir.path().join("rgb.png");
        let mut data = Vec::new();
        for y in 0..3usize {
            for x in 0..4usize {
                for c in 0..3usize {
                    data.push(f64::from((x + 2 * y + 5 * c) as u32 % 11) / 10.0);
                }
            }
        }
        let img = ImageBuffer::from_vec(4, 3, 3, data).unwrap();
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.channels(), 3);
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
    }

    #[test]
    fn eight_bit_pgm_loads_as_its_255_levels() {
        let dir = tmp();
        let path = dir.path().join("img.pgm");
        let raw: Vec<u8> = (0..20u8).map(|v| v * 12).collect();
        let gray = image::GrayImage::from_raw(5, 4, raw.clone()).unwrap();
        gray.save_with_format(&path, ImageFormat::Pnm).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.channels(), 1);
        for (i, &v) in raw.iter().enumerate() {
            // 8-bit samples widen to 16 bits as v*257, so /65535 == v/255.
            assert_eq!(back.data()[i], f64::from(v) / 255.0);
        }
    }

    #[test]
    fn mask_round_trip_preserves_membership() {
        let dir = tmp();
        let path = dir.path().join("mask.png");
        let mask = RoadMask::from_fn(9, 6, |x, y| (x + y) % 3 == 0);
        save_mask(&mask, &path).unwrap();
        let back = load_mask(&path).unwrap();
        assert_eq!(back.data(), mask.data());
    }

    #[test]
    fn any_nonzero_mask_value_counts_as_road() {
        let dir = tmp();
        let path = dir.path().join("mask.png");
        let gray = image::GrayImage::from_raw(3, 1, vec![0, 1, 200]).unwrap();
        gray.save(&path).unwrap();
        let mask = load_mask(&path).unwrap();
        assert_eq!(mask.data(), &[false, true, true]);
    }

    #[test]
    fn depth_raw_256_is_one_meter_and_raw_0_is_invalid() {
        let dir = tmp();
        let path = dir.path().join("depth.png");
        let img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(3, 1, vec![256u16, 0, 1300])
            .unwrap();
        img.save(&path).unwrap();
        let depth = load_depth_png(&path).unwrap();
        assert_eq!(depth.get(0, 0), Some(1.0));
        assert_eq!(depth.get(1, 0), None);
        assert_eq!(depth.get(2, 0), Some(1300.0 / 256.0));
    }

    #[test]
    fn depth_round_trip_holds_to_the_quantization_step() {
        let dir = tmp();
        let path = dir.path().join("depth.png");
        let depth = DepthMap::from_vec(
            4,
            2,
            vec![0.7, 1.0, 5.33, 80.0, 0.0, 12.345, 254.9, 3.125],
            vec![true, true, true, true, false, true, true, true],
        )
        .unwrap();
        save_depth_png(&depth, &path).unwrap();
        let back = load_depth_png(&path).unwrap();
        assert_eq!(back.validity(), depth.validity());
        for y in 0..2 {
            for x in 0..4 {
                if let Some(d) = depth.get(x, y) {
                    assert!((back.get(x, y).unwrap() - d).abs() <= 0.5 / 256.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn depth_clamps_to_the_representable_range() {
        let dir = tmp();
        let path = dir.path().join("depth.png");
        // 300 m overflows 16 bits; 1e-4 m rounds to raw 0 but stays valid.
        let depth =
            DepthMap::from_vec(2, 1, vec![300.0, 1e-4], vec![true, true]).unwrap();
        save_depth_png(&depth, &path).unwrap();
        let back = load_depth_png(&path).unwrap();
        assert_eq!(back.get(0, 0), Some(65535.0 / 256.0));
        assert_eq!(back.get(1, 0), Some(1.0 / 256.0));
    }

    #[test]
    fn eight_bit_png_is_rejected_as_depth() {
        let dir = tmp();
        let path = dir.path().join("depth.png");
        let gray = image::GrayImage::from_raw(2, 2, vec![1, 2, 3, 4]).unwrap();
        gray.save(&path).unwrap();
        let err = load_depth_png(&path).unwrap_err();
        assert!(matches!(err, IoError::Format { .. }), "{err}");
    }
}
