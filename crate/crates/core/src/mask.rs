//! Binary instance masks and integer label maps.

use std::path::Path;

use image::{GrayImage, Luma};

use crate::error::{Error, Result};
use crate::geometry::ClassId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<bool>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::Dimension(format!(
                "mask buffer has {} values, expected {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Mask of the integer rectangle `[x0, x1) x [y0, y1)`, clamped to the canvas.
    pub fn from_rect(width: u32, height: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        let mut m = Self::empty(width, height);
        for y in y0.min(height)..y1.min(height) {
            for x in x0.min(width)..x1.min(width) {
                m.set(x, y, true);
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let i = (y * self.width + x) as usize;
        self.data[i] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    /// Nonzero pixels of a grayscale PNG are foreground.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let gray = load_gray(path.as_ref())?;
        let (w, h) = gray.dimensions();
        Self::from_vec(w, h, gray.pixels().map(|p| p[0] != 0).collect())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let gray = GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        });
        save_gray(&gray, path.as_ref())
    }
}

/// `H x W` map of class ids, `0` = background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    width: u32,
    height: u32,
    class_number: ClassId,
    labels: Vec<ClassId>,
}

impl LabelMask {
    pub fn background(width: u32, height: u32, class_number: ClassId) -> Self {
        Self {
            width,
            height,
            class_number,
            labels: vec![0; width as usize * height as usize],
        }
    }

    pub fn from_vec(
        width: u32,
        height: u32,
        class_number: ClassId,
        labels: Vec<ClassId>,
    ) -> Result<Self> {
        if labels.len() != width as usize * height as usize {
            return Err(Error::Dimension(format!(
                "label buffer has {} values, expected {width}x{height}",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > class_number) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} exceeds class number {class_number}"
            )));
        }
        Ok(Self {
            width,
            height,
            class_number,
            labels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn class_number(&self) -> ClassId {
        self.class_number
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> ClassId {
        self.labels[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, class: ClassId) -> Result<()> {
        if class > self.class_number {
            return Err(Error::InvalidArgument(format!(
                "label {class} exceeds class number {}",
                self.class_number
            )));
        }
        let i = (y * self.width + x) as usize;
        self.labels[i] = class;
        Ok(())
    }

    /// Read a single-channel 8-bit PNG whose values are class ids.
    pub fn load_png(path: impl AsRef<Path>, class_number: ClassId) -> Result<Self> {
        let path = path.as_ref();
        let gray = load_gray(path)?;
        let (w, h) = gray.dimensions();
        Self::from_vec(w, h, class_number, gray.into_raw()).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::parse(path, m),
            other => other,
        })
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let gray = GrayImage::from_raw(self.width, self.height, self.labels.clone())
            .expect("label buffer matches dimensions");
        save_gray(&gray, path.as_ref())
    }
}

fn load_gray(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(|source| Error::Codec {
        path: path.to_path_buf(),
        source,
    })?;
    match img {
        image::DynamicImage::ImageLuma8(g) => Ok(g),
        other => Err(Error::parse(
            path,
            format!(
                "expected a single-channel 8-bit image, found {:?}",
                other.color()
            ),
        )),
    }
}

fn save_gray(gray: &GrayImage, path: &Path) -> Result<()> {
    gray.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Codec {
            path: path.to_path_buf(),
            source,
        })
}
