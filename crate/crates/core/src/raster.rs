//! Planar `C x H x W` floating-point images.
//!
//! Intensities are nominally in `[0, 1]`; 8-bit files are mapped by `v / 255`.

use std::path::Path;

use image::{DynamicImage, Rgb, RgbImage};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: u32,
    height: u32,
    channels: u32,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: u32, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions {channels}x{height}x{width} must be positive"
            )));
        }
        let expected = channels as usize * height as usize * width as usize;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "buffer has {} values, expected {expected}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite intensity".into()));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Constant-color image with one value per channel.
    pub fn filled(width: u32, height: u32, color: &[f32]) -> Result<Self> {
        let plane = width as usize * height as usize;
        let data = color
            .iter()
            .flat_map(|&c| std::iter::repeat_n(c, plane))
            .collect();
        Self::new(width, height, color.len() as u32, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    fn index(&self, c: u32, x: u32, y: u32) -> usize {
        (c as usize * self.height as usize + y as usize) * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, c: u32, x: u32, y: u32) -> f32 {
        self.data[self.index(c, x, y)]
    }

    #[inline]
    pub fn set(&mut self, c: u32, x: u32, y: u32, v: f32) {
        let i = self.index(c, x, y);
        self.data[i] = v;
    }

    /// All channel values at one pixel.
    pub fn pixel(&self, x: u32, y: u32) -> Vec<f32> {
        (0..self.channels).map(|c| self.get(c, x, y)).collect()
    }

    /// Copy of the integer rectangle starting at `(x0, y0)`.
    pub fn crop(&self, x0: u32, y0: u32, width: u32, height: u32) -> Result<Image> {
        if width == 0
            || height == 0
            || x0 as u64 + width as u64 > self.width as u64
            || y0 as u64 + height as u64 > self.height as u64
        {
            return Err(Error::Precondition(format!(
                "crop {width}x{height}+{x0}+{y0} outside {}x{} image",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity((self.channels * width * height) as usize);
        for c in 0..self.channels {
            for y in y0..y0 + height {
                let start = self.index(c, x0, y);
                data.extend_from_slice(&self.data[start..start + width as usize]);
            }
        }
        Image::new(width, height, self.channels, data)
    }

    /// Bilinear resampling with half-pixel centers (edge samples clamp).
    pub fn resize_bilinear(&self, width: u32, height: u32) -> Result<Image> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "target size {width}x{height} must be positive"
            )));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let taps = |dst: u32, scale: f64, src_len: u32| {
            let s = ((dst as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (s.floor() as u32).min(src_len - 1);
            let i1 = (i0 + 1).min(src_len - 1);
            let t = (s - i0 as f64).clamp(0.0, 1.0) as f32;
            (i0, i1, t)
        };
        let xs: Vec<_> = (0..width).map(|x| taps(x, sx, self.width)).collect();
        let ys: Vec<_> = (0..height).map(|y| taps(y, sy, self.height)).collect();

        let mut data = Vec::with_capacity((self.channels * width * height) as usize);
        for c in 0..self.channels {
            for &(y0, y1, ty) in &ys {
                for &(x0, x1, tx) in &xs {
                    let top = self.get(c, x0, y0) * (1.0 - tx) + self.get(c, x1, y0) * tx;
                    let bot = self.get(c, x0, y1) * (1.0 - tx) + self.get(c, x1, y1) * tx;
                    data.push(top * (1.0 - ty) + bot * ty);
                }
            }
        }
        Image::new(width, height, self.channels, data)
    }

    pub fn from_rgb8(img: &RgbImage) -> Image {
        let (w, h) = img.dimensions();
        let plane = (w * h) as usize;
        let mut data = vec![0.0f32; plane * 3];
        for (x, y, p) in img.enumerate_pixels() {
            let i = (y * w + x) as usize;
            for c in 0..3 {
                data[c * plane + i] = p[c] as f32 / 255.0;
            }
        }
        Image::new(w, h, 3, data).expect("rgb buffer is well-formed")
    }

    /// 8-bit RGB view; single-channel images are replicated, extra channels ignored.
    pub fn to_rgb8(&self) -> RgbImage {
        let q = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        RgbImage::from_fn(self.width, self.height, |x, y| {
            let ch = |c: u32| q(self.get(c.min(self.channels - 1), x, y));
            Rgb([ch(0), ch(1), ch(2)])
        })
    }

    /// Load an 8-bit PNG or TIFF; grayscale is promoted to three channels.
    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let dynamic = image::open(path).map_err(|source| Error::Codec {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = match dynamic {
            DynamicImage::ImageRgb8(rgb) => rgb,
            other => other.to_rgb8(),
        };
        Ok(Image::from_rgb8(&rgb))
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_rgb8()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Codec {
                path: path.to_path_buf(),
                source,
            })
    }
}
