//! Convolutional stage genes and the shape algebra of the conv pipeline.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::activation::ActivationKind;

/// Kernel side lengths a stage may use.
pub const KERNEL_SIDES: [usize; 3] = [1, 3, 5];

/// Spatial extent of an image or feature map, in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub width: usize,
    pub height: usize,
}

impl Shape {
    pub const fn new(width: usize, height: usize) -> Self {
        Shape { width, height }
    }

    pub const fn len(&self) -> usize {
        self.width * self.height
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ShapeError {
    #[error("kernel {kernel_rows}x{kernel_cols} (rows x cols) does not fit a {input} map")]
    KernelTooLarge {
        kernel_rows: usize,
        kernel_cols: usize,
        input: Shape,
    },
    #[error("pool window {window} does not fit a {input} map")]
    WindowTooLarge { window: usize, input: Shape },
    #[error("stride must be positive")]
    ZeroStride,
    #[error("pool window must be at least 2 for {pooler} pooling, got {window}")]
    WindowTooSmall { pooler: Pooler, window: usize },
    #[error("expected a {expected} input, got {actual}")]
    Mismatch { expected: Shape, actual: Shape },
    #[error("empty map")]
    Empty,
}

/// Dense row-major kernel.
///
/// Serialized as an array of rows so documents read like the matrix they hold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Kernel {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Kernel {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, String> {
        if rows == 0 || cols == 0 {
            return Err("kernel must have at least one row and column".into());
        }
        if values.len() != rows * cols {
            return Err(format!(
                "kernel {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err("kernel values must be finite".into());
        }
        Ok(Kernel { rows, cols, values })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Kernel::new(rows, cols, vec![value; rows * cols]).expect("non-empty finite kernel")
    }

    /// 1x1 kernel holding `1.0`.
    pub fn identity() -> Self {
        Kernel::filled(1, 1, 1.0)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }
}

impl TryFrom<Vec<Vec<f64>>> for Kernel {
    type Error = String;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err("kernel rows must all have the same length".into());
        }
        let n = rows.len();
        Kernel::new(n, cols, rows.into_iter().flatten().collect())
    }
}

impl From<Kernel> for Vec<Vec<f64>> {
    fn from(k: Kernel) -> Self {
        k.values.chunks(k.cols).map(<[f64]>::to_vec).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooler {
    Max,
    Average,
    None,
}

impl Pooler {
    pub const ALL: [Pooler; 3] = [Pooler::Max, Pooler::Average, Pooler::None];
}

impl fmt::Display for Pooler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooler::Max => "max",
            Pooler::Average => "average",
            Pooler::None => "none",
        })
    }
}

/// One subsampling stage: convolve, then pool, then activate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvStageGene {
    pub stage_index: usize,
    pub kernel: Kernel,
    pub stride: usize,
    pub pooler: Pooler,
    /// Ignored when `pooler` is [`Pooler::None`].
    pub pool_window: usize,
    pub activation: ActivationKind,
}

impl ConvStageGene {
    /// Output shape of this stage for a given input, or why it cannot be applied.
    pub fn output_shape(&self, input: Shape) -> Result<Shape, ShapeError> {
        let conv = conv_output_shape(input, self.kernel.rows, self.kernel.cols, self.stride)?;
        match self.pooler {
            Pooler::None => Ok(conv),
            pooler => {
                if self.pool_window < 2 {
                    return Err(ShapeError::WindowTooSmall {
                        pooler,
                        window: self.pool_window,
                    });
                }
                pool_output_shape(conv, self.pool_window)
            }
        }
    }
}

pub fn conv_output_shape(
    input: Shape,
    kernel_rows: usize,
    kernel_cols: usize,
    stride: usize,
) -> Result<Shape, ShapeError> {
    if stride == 0 {
        return Err(ShapeError::ZeroStride);
    }
    if input.is_empty() {
        return Err(ShapeError::Empty);
    }
    if kernel_rows > input.height
        || kernel_cols > input.width
        || kernel_rows == 0
        || kernel_cols == 0
    {
        return Err(ShapeError::KernelTooLarge {
            kernel_rows,
            kernel_cols,
            input,
        });
    }
    Ok(Shape::new(
        (input.width - kernel_cols) / stride + 1,
        (input.height - kernel_rows) / stride + 1,
    ))
}

pub fn pool_output_shape(input: Shape, window: usize) -> Result<Shape, ShapeError> {
    if window == 0 || window > input.width || window > input.height {
        return Err(ShapeError::WindowTooLarge { window, input });
    }
    Ok(Shape::new(input.width / window, input.height / window))
}

/// Shape after running every stage in order.
pub fn pipeline_output_shape(stages: &[ConvStageGene], input: Shape) -> Result<Shape, ShapeError> {
    stages
        .iter()
        .try_fold(input, |shape, stage| stage.output_shape(shape))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stage(k: usize, stride: usize, pooler: Pooler, window: usize) -> ConvStageGene {
        ConvStageGene {
            stage_index: 0,
            kernel: Kernel::filled(k, k, 0.5),
            stride,
            pooler,
            pool_window: window,
            activation: ActivationKind::Relu,
        }
    }

    #[test]
    fn shape_chain() {
        let s = stage(3, 1, Pooler::Max, 2);
        assert_eq!(s.output_shape(Shape::new(16, 16)), Ok(Shape::new(7, 7)));
        let s = stage(3, 2, Pooler::None, 1);
        assert_eq!(s.output_shape(Shape::new(8, 5)), Ok(Shape::new(3, 2)));
    }

    #[test]
    fn rejects_oversized_kernel_and_window() {
        assert!(matches!(
            stage(5, 1, Pooler::None, 1).output_shape(Shape::new(4, 4)),
            Err(ShapeError::KernelTooLarge { .. })
        ));
        assert!(matches!(
            stage(3, 1, Pooler::Average, 3).output_shape(Shape::new(4, 4)),
            Err(ShapeError::WindowTooLarge { .. })
        ));
        assert!(matches!(
            stage(1, 1, Pooler::Max, 1).output_shape(Shape::new(4, 4)),
            Err(ShapeError::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn kernel_serializes_row_major() {
        let k = Kernel::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let json = serde_json::to_string(&k).unwrap();
        assert_eq!(json, "[[1.0,2.0,3.0],[4.0,5.0,6.0]]");
        let back: Kernel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, k);
        assert!(serde_json::from_str::<Kernel>("[[1.0],[2.0,3.0]]").is_err());
        assert!(serde_json::from_str::<Kernel>("[]").is_err());
    }
}
