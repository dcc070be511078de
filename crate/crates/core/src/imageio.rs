//! Image ingestion, coordinate grids and reconstruction metrics.
//!
//! Pixel coordinates are laid out row-major with the row coordinate first;
//! each axis is an independent linspace over `[-1, 1]`. RGB targets are
//! stored as `byte / 255` in single precision.

use std::path::Path;

use image::{ImageFormat, ImageReader, RgbImage};

use crate::error::{Error, Result};

/// An image as a supervised regression problem: one coordinate and one RGB
/// target per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelDataset {
    pub height: usize,
    pub width: usize,
    pub coords: Vec<[f32; 2]>,
    pub targets: Vec<[f32; 3]>,
}

impl PixelDataset {
    /// Builds a dataset from interleaved 8-bit RGB bytes.
    pub fn from_rgb8(height: usize, width: usize, rgb: &[u8]) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyImage { height, width });
        }
        let expected = height * width * 3;
        if rgb.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: rgb.len(),
            });
        }
        Ok(Self {
            height,
            width,
            coords: make_coord_grid(height, width),
            targets: rgb8_to_unit(rgb),
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    /// Targets re-quantized to bytes. Exact for datasets built from 8-bit data.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.targets
            .iter()
            .flatten()
            .map(|&v| quantize(v))
            .collect()
    }
}

fn unit(byte: u8) -> f32 {
    f32::from(byte) / 255.0
}

fn axis_value(index: usize, points: usize) -> f32 {
    if points == 1 {
        -1.0
    } else {
        (2.0 * index as f64 / (points - 1) as f64 - 1.0) as f32
    }
}

/// Row-major grid of `(row, col)` coordinates in `[-1, 1]²`.
///
/// An axis with a single point maps to `-1`.
pub fn make_coord_grid(height: usize, width: usize) -> Vec<[f32; 2]> {
    let cols: Vec<f32> = (0..width).map(|c| axis_value(c, width)).collect();
    let mut grid = Vec::with_capacity(height * width);
    for r in 0..height {
        let y = axis_value(r, height);
        grid.extend(cols.iter().map(|&x| [y, x]));
    }
    grid
}

/// Loads an 8-bit PNG (RGB or RGBA, alpha dropped) or binary PPM.
pub fn load_image(path: impl AsRef<Path>) -> Result<PixelDataset> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        Some(other) => return Err(Error::UnsupportedFormat(format!("{other:?}"))),
        None => {
            return Err(Error::UnsupportedFormat(format!(
                "unrecognized contents in {}",
                path.display()
            )))
        }
    }
    let img = reader.decode().map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    use image::ColorType::*;
    match img.color() {
        Rgb8 | Rgba8 | L8 | La8 => {}
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "color type {other:?} (8-bit RGB/RGBA expected)"
            )))
        }
    }
    let rgb = img.to_rgb8();
    let (width, height) = (rgb.width() as usize, rgb.height() as usize);
    PixelDataset::from_rgb8(height, width, rgb.as_raw())
}

/// Clips to `[0, 1]` and rounds half away from zero onto the 8-bit scale.
pub fn quantize(value: f32) -> u8 {
    // NaN maps to 0 through `clamp`'s propagation followed by the `as` cast.
    (value.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Quantizes predictions to interleaved RGB bytes.
pub fn quantize_rgb(predictions: &[[f32; 3]]) -> Vec<u8> {
    predictions.iter().flatten().map(|&v| quantize(v)).collect()
}

/// Writes predictions as an 8-bit PNG after clipping and quantization.
pub fn save_image(
    predictions: &[[f32; 3]],
    height: usize,
    width: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let expected = height * width;
    if predictions.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: predictions.len(),
        });
    }
    save_rgb8(&quantize_rgb(predictions), height, width, path)
}

/// Writes interleaved RGB bytes as PNG.
pub fn save_rgb8(rgb: &[u8], height: usize, width: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let expected = height * width * 3;
    if rgb.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: rgb.len(),
        });
    }
    let img = RgbImage::from_raw(width as u32, height as u32, rgb.to_vec())
        .ok_or_else(|| Error::ShapeMismatch(format!("{height}x{width} image buffer")))?;
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|source| match source {
            image::ImageError::IoError(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            source => Error::Image {
                path: path.to_path_buf(),
                source,
            },
        })
}

/// Peak signal-to-noise ratio in dB for unit-range signals.
///
/// Both inputs are clipped to `[0, 1]`; identical inputs give `f64::INFINITY`.
pub fn psnr(reference: &[[f32; 3]], reconstruction: &[[f32; 3]]) -> Result<f64> {
    if reference.len() != reconstruction.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            actual: reconstruction.len(),
        });
    }
    if reference.is_empty() {
        return Err(Error::LengthMismatch {
            expected: 1,
            actual: 0,
        });
    }
    let sse: f64 = reference
        .iter()
        .flatten()
        .zip(reconstruction.iter().flatten())
        .map(|(&a, &b)| {
            let d = f64::from(a.clamp(0.0, 1.0)) - f64::from(b.clamp(0.0, 1.0));
            d * d
        })
        .sum();
    let mse = sse / (reference.len() * 3) as f64;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// Interleaved RGB bytes as unit-range triples.
pub fn rgb8_to_unit(rgb: &[u8]) -> Vec<[f32; 3]> {
    rgb.chunks_exact(3)
        .map(|px| [unit(px[0]), unit(px[1]), unit(px[2])])
        .collect()
}

/// PSNR between two interleaved 8-bit RGB buffers.
pub fn psnr_rgb8(reference: &[u8], reconstruction: &[u8]) -> Result<f64> {
    if reference.len() != reconstruction.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            actual: reconstruction.len(),
        });
    }
    psnr(&rgb8_to_unit(reference), &rgb8_to_unit(reconstruction))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_axes_map_to_minus_one() {
        assert_eq!(make_coord_grid(1, 1), vec![[-1.0, -1.0]]);
        assert_eq!(
            make_coord_grid(1, 3),
            vec![[-1.0, -1.0], [-1.0, 0.0], [-1.0, 1.0]]
        );
        assert_eq!(
            make_coord_grid(3, 1),
            vec![[-1.0, -1.0], [0.0, -1.0], [1.0, -1.0]]
        );
    }

    #[test]
    fn two_by_two_grid_is_the_corners_in_row_major_order() {
        assert_eq!(
            make_coord_grid(2, 2),
            vec![[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]]
        );
    }

    #[test]
    fn grid_endpoints_are_exact() {
        for n in 2..40 {
            let g = make_coord_grid(n, n + 3);
            assert_eq!(g[0], [-1.0, -1.0]);
            assert_eq!(*g.last().unwrap(), [1.0, 1.0]);
            assert!(g.iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn white_pixel_dataset() {
        let ds = PixelDataset::from_rgb8(1, 1, &[255, 255, 255]).unwrap();
        assert_eq!(ds.coords, vec![[-1.0, -1.0]]);
        assert_eq!(ds.targets, vec![[1.0, 1.0, 1.0]]);
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(matches!(
            PixelDataset::from_rgb8(0, 4, &[]),
            Err(Error::EmptyImage { .. })
        ));
    }

    #[test]
    fn psnr_reference_values() {
        let a = vec![[0.2f32, 0.4, 0.6]; 5];
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);

        let zeros = vec![[0.0f32; 3]; 4];
        let ones = vec![[1.0f32; 3]; 4];
        assert_eq!(psnr(&zeros, &ones).unwrap(), 0.0);

        assert!((psnr_from_mse(0.01) - 20.0).abs() < 1e-12);
        assert!(psnr(&a, &a[..3]).is_err());
    }

    #[test]
    fn psnr_clips_before_comparing() {
        let reference = vec![[1.0f32, 0.0, 0.5]];
        let overshoot = vec![[1.7f32, -0.3, 0.5]];
        assert_eq!(psnr(&reference, &overshoot).unwrap(), f64::INFINITY);
    }

    #[test]
    fn quantization_rule() {
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(7.0), 255);
        assert_eq!(quantize(f32::NAN), 0);
    }
}
