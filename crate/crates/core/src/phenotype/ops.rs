//! Subsampling operators: valid cross-correlation, non-overlapping pooling,
//! elementwise activation.

use crate::activation::ActivationKind;
use crate::genome::{conv_output_shape, pool_output_shape, Kernel, Shape, ShapeError};

/// Row-major real-valued 2D map.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    shape: Shape,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ShapeError> {
        let shape = Shape::new(width, height);
        if shape.is_empty() {
            return Err(ShapeError::Empty);
        }
        if data.len() != shape.len() {
            return Err(ShapeError::Mismatch {
                expected: shape,
                actual: Shape::new(data.len(), 1),
            });
        }
        Ok(FeatureMap { shape, data })
    }

    /// Build from rows; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ShapeError> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(ShapeError::Empty);
        }
        FeatureMap::new(width, rows.len(), rows.concat())
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.shape.width + col]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.shape.width)
            .map(<[f64]>::to_vec)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImageError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("pixel {index} is {value}, expected a finite value in [0, 1]")]
    PixelRange { index: usize, value: f64 },
}

/// Grayscale image with intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageMatrix(FeatureMap);

impl ImageMatrix {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        if let Some((index, &value)) = pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(ImageError::PixelRange { index, value });
        }
        Ok(ImageMatrix(FeatureMap::new(width, height, pixels)?))
    }

    pub fn shape(&self) -> Shape {
        self.0.shape()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn pixels(&self) -> &[f64] {
        self.0.data()
    }

    pub fn as_map(&self) -> &FeatureMap {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Average,
}

/// Valid-padding cross-correlation (the kernel is not flipped).
pub fn convolve(
    map: &FeatureMap,
    kernel: &Kernel,
    stride: usize,
) -> Result<FeatureMap, ShapeError> {
    let out = conv_output_shape(map.shape(), kernel.rows(), kernel.cols(), stride)?;
    let mut data = Vec::with_capacity(out.len());
    let width = map.width();
    let src = map.data();
    let k = kernel.values();
    for i in 0..out.height {
        for j in 0..out.width {
            let mut acc = 0.0;
            for a in 0..kernel.rows() {
                let row = &src[(i * stride + a) * width + j * stride..];
                let krow = &k[a * kernel.cols()..(a + 1) * kernel.cols()];
                for (kv, pv) in krow.iter().zip(row) {
                    acc += kv * pv;
                }
            }
            data.push(acc);
        }
    }
    FeatureMap::new(out.width, out.height, data)
}

/// Non-overlapping `window x window` pooling; partial windows at the right and
/// bottom edges are dropped.
pub fn pool(map: &FeatureMap, kind: PoolKind, window: usize) -> Result<FeatureMap, ShapeError> {
    let out = pool_output_shape(map.shape(), window)?;
    let mut data = Vec::with_capacity(out.len());
    let area = (window * window) as f64;
    for i in 0..out.height {
        for j in 0..out.width {
            let cells = (0..window)
                .flat_map(|a| (0..window).map(move |b| map.get(i * window + a, j * window + b)));
            data.push(match kind {
                PoolKind::Max => cells.fold(f64::NEG_INFINITY, f64::max),
                PoolKind::Average => cells.sum::<f64>() / area,
            });
        }
    }
    FeatureMap::new(out.width, out.height, data)
}

#[inline]
pub fn activate(x: f64, kind: ActivationKind) -> f64 {
    kind.apply(x)
}

pub fn activate_map(map: FeatureMap, kind: ActivationKind) -> FeatureMap {
    let FeatureMap { shape, mut data } = map;
    data.iter_mut().for_each(|v| *v = kind.apply(*v));
    FeatureMap { shape, data }
}
