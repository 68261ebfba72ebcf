//! Raster types and PNG I/O.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageReader, RgbImage};

use crate::error::{Error, Result};

/// Luma weights for RGB to grayscale conversion.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// An `height × width × channels` raster with samples in `[0, 1]`.
///
/// Samples are stored row-major with interleaved channels. Every constructor
/// clamps, so the range invariant holds for any value that escapes this module.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image from raw samples, clamping each one into `[0, 1]`.
    /// NaN samples are mapped to 0.
    pub fn new(height: usize, width: usize, channels: usize, mut data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for {height}x{width}x{channels}",
                data.len()
            )));
        }
        for v in data.iter_mut() {
            *v = clamp_unit(*v);
        }
        Ok(Image {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Sample at a signed coordinate with edge-replicate padding.
    #[inline]
    pub fn get_clamped(&self, y: isize, x: isize, c: usize) -> f64 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.get(y, x, c)
    }

    /// All channels of pixel `index` (row-major pixel index).
    #[inline]
    pub fn pixel(&self, index: usize) -> &[f64] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }

    /// Applies `f` to every sample, clamping the result.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Image {
        Image {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| clamp_unit(f(v))).collect(),
        }
    }

    /// Overwrites pixel `index` with `values` (one per channel), clamped.
    pub fn set_pixel(&mut self, index: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.channels);
        let c = self.channels;
        for (dst, &v) in self.data[index * c..(index + 1) * c].iter_mut().zip(values) {
            *dst = clamp_unit(v);
        }
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn ensure_same_dims(&self, other: &Image) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.dims(),
                other.dims()
            )))
        }
    }

    /// Single-channel luma image; identity (a clone) for 1-channel input.
    pub fn to_grayscale(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|px| {
                clamp_unit(
                    LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2],
                )
            })
            .collect();
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    /// Luma as an unconstrained plane.
    pub fn luma_plane(&self) -> Plane {
        let g = self.to_grayscale();
        Plane {
            height: g.height,
            width: g.width,
            data: g.data,
        }
    }

    /// Extracts channel `c` as a plane.
    pub fn channel_plane(&self, c: usize) -> Plane {
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Plane {
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Reads an 8-bit grayscale or RGB PNG.
    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
        let decoded = reader.decode().map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let (w, h) = (decoded.width() as usize, decoded.height() as usize);
        let (channels, bytes) = match decoded {
            DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
            DynamicImage::ImageRgb8(buf) => (3, buf.into_raw()),
            other => {
                return Err(Error::Decode {
                    path: path.to_path_buf(),
                    reason: format!(
                        "unsupported color type {:?}; expected 8-bit gray or RGB",
                        other.color()
                    ),
                })
            }
        };
        let data = bytes.into_iter().map(|b| b as f64 / 255.0).collect();
        Image::new(h, w, channels, data)
    }

    /// Quantizes to 8 bits (`round(v·255)`) and writes a PNG.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes();
        let (w, h) = (self.width as u32, self.height as u32);
        let result = if self.channels == 1 {
            GrayImage::from_raw(w, h, bytes).map(|b| b.save(path))
        } else {
            RgbImage::from_raw(w, h, bytes).map(|b| b.save(path))
        };
        match result {
            Some(Ok(())) => Ok(()),
            Some(Err(image::ImageError::IoError(e))) => Err(Error::io(path, e)),
            Some(Err(e)) => Err(Error::Encode {
                path: path.to_path_buf(),
                reason: e.to_string(),
            }),
            None => Err(Error::Encode {
                path: path.to_path_buf(),
                reason: "buffer size mismatch".into(),
            }),
        }
    }

    /// 8-bit quantized samples in storage order.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }
}

#[inline]
pub fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

#[inline]
pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// A single-channel raster with unconstrained (possibly negative) values.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(height: usize, width: usize) -> Self {
        Plane {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {height}x{width} plane",
                data.len()
            )));
        }
        Ok(Plane {
            height,
            width,
            data,
        })
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_clamped(&self, y: isize, x: isize) -> f64 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.get(y, x)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}
