//! Intensity images and binary masks on the pixel grid.

use crate::error::{Error, Result};

/// Rec. 601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// `height x width x channels` intensities in `[0, 1]`, interleaved row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidParameter(format!(
                "image buffer holds {} values, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for j in 0..height {
            for i in 0..width {
                for c in 0..channels {
                    data.push(f(i, j, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn constant(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
        )
    }

    /// Skips the range check; used for values produced by convex blends of
    /// valid images.
    pub(crate) fn from_raw(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        Self {
            width,
            height,
            channels,
            data,
        }
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

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.data[(j * self.width + i) * self.channels + c]
    }

    /// Single-channel luminance; a 1-channel image is returned as-is.
    pub fn luminance(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|px| {
                (LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2])
                    .clamp(0.0, 1.0)
            })
            .collect();
        Image::from_raw(self.width, self.height, 1, data)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Binary validity grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidParameter("mask buffer size mismatch".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[j * self.width + i]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|m| **m).count()
    }

    pub fn and(&self, other: &Mask) -> Result<Mask> {
        if self.dims() != other.dims() {
            return Err(Error::dims("mask", other.dims(), self.dims()));
        }
        Ok(Mask {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a && *b)
                .collect(),
        })
    }

    /// Keeps a pixel only if its whole `(2r+1)^2` window is inside the image
    /// and set.
    pub fn erode(&self, radius: usize) -> Mask {
        let (w, h) = (self.width, self.height);
        let mut out = vec![false; w * h];
        if w > 2 * radius && h > 2 * radius {
            for j in radius..h - radius {
                for i in radius..w - radius {
                    out[j * w + i] = (j - radius..=j + radius)
                        .all(|y| (i - radius..=i + radius).all(|x| self.data[y * w + x]));
                }
            }
        }
        Mask {
            width: w,
            height: h,
            data: out,
        }
    }
}
