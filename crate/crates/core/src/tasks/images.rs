//! Image decoding and labeled-image classification.

use image::{DynamicImage, ImageReader};
use std::path::{Path, PathBuf};

use super::{accuracy, FitnessTask, TaskError};
use crate::activation::ActivationKind;
use crate::genome::{pipeline_output_shape, ConvStageGene, Kernel, Pooler, Shape};
use crate::phenotype::{ImageMatrix, Phenotype};

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

fn luminance(r: f64, g: f64, b: f64) -> f64 {
    LUMA_R * r + LUMA_G * g + LUMA_B * b
}

/// Decode a png or bmp file into a grayscale matrix in `[0, 1]`.
///
/// Gray channels are divided by their maximum value; color images are
/// collapsed with `0.299 R + 0.587 G + 0.114 B` first. Alpha is ignored.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageMatrix, TaskError> {
    let path = path.as_ref();
    let decode_err = |message: String| TaskError::Decode {
        path: path.to_path_buf(),
        message,
    };
    let reader = ImageReader::open(path).map_err(|source| TaskError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = reader
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?;
    let decoded = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);

    let pixels: Vec<f64> = match &decoded {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => decoded
            .to_luma8()
            .pixels()
            .map(|p| f64::from(p.0[0]) / 255.0)
            .collect(),
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => decoded
            .to_luma16()
            .pixels()
            .map(|p| f64::from(p.0[0]) / 65535.0)
            .collect(),
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => decoded
            .to_rgb16()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0.map(f64::from);
                luminance(r, g, b) / 65535.0
            })
            .collect(),
        DynamicImage::ImageRgb32F(_) | DynamicImage::ImageRgba32F(_) => decoded
            .to_rgb32f()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0.map(f64::from);
                luminance(r, g, b)
            })
            .collect(),
        _ => decoded
            .to_rgb8()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0.map(f64::from);
                luminance(r, g, b) / 255.0
            })
            .collect(),
    };
    let pixels = pixels.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    ImageMatrix::new(width, height, pixels).map_err(|e| decode_err(e.to_string()))
}

/// Center-crop `image` to the aspect ratio of `width x height`, then
/// resample with nearest neighbor: output `(i, j)` reads crop pixel
/// `(⌊i·ch/height⌋, ⌊j·cw/width⌋)`.
pub fn resample_nearest(image: &ImageMatrix, width: usize, height: usize) -> ImageMatrix {
    let (src_w, src_h) = (image.width(), image.height());
    let (crop_w, crop_h) = if src_w * height > width * src_h {
        ((src_h * width / height).max(1), src_h)
    } else {
        (src_w, (src_w * height / width).max(1))
    };
    let (x0, y0) = ((src_w - crop_w) / 2, (src_h - crop_h) / 2);
    let map = image.as_map();
    let mut pixels = Vec::with_capacity(width * height);
    for i in 0..height {
        for j in 0..width {
            pixels.push(map.get(y0 + i * crop_h / height, x0 + j * crop_w / width));
        }
    }
    ImageMatrix::new(width, height, pixels).expect("resampled pixels stay in range")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRecord {
    /// As written in the manifest, usually relative to it.
    pub image_path: PathBuf,
    pub label: u8,
}

/// Labeled image list. Relative paths resolve against `base_dir`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub base_dir: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        self.base_dir.join(&record.image_path)
    }
}

/// Parse manifest text: one `path,label` record per line, `#` comment lines
/// and blank lines skipped, labels 0 or 1.
pub fn parse_manifest(
    text: &str,
    base_dir: impl Into<PathBuf>,
    source: &Path,
) -> Result<DatasetManifest, TaskError> {
    let mut records = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| TaskError::Manifest {
            path: source.to_path_buf(),
            line: n + 1,
            message,
        };
        let (path, label) = line
            .rsplit_once(',')
            .ok_or_else(|| err(format!("expected `path,label`, got `{line}`")))?;
        let label = match label.trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(err(format!("label must be 0 or 1, got `{other}`"))),
        };
        let path = path.trim();
        if path.is_empty() {
            return Err(err("empty image path".into()));
        }
        records.push(ManifestRecord {
            image_path: PathBuf::from(path),
            label,
        });
    }
    Ok(DatasetManifest {
        base_dir: base_dir.into(),
        records,
    })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, TaskError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| TaskError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest(&text, base, path)
}

/// Binary classification over decoded manifest images. Fitness is accuracy
/// with the first output thresholded at 0.5.
#[derive(Clone, Debug)]
pub struct ImageClassificationTask {
    shape: Shape,
    samples: Vec<(ImageMatrix, u8)>,
}

impl ImageClassificationTask {
    pub const TARGET: f64 = 0.95;

    /// Decode every image once and resample it to `width x height`.
    /// Fails listing every path that could not be decoded.
    pub fn new(manifest: &DatasetManifest, width: usize, height: usize) -> Result<Self, TaskError> {
        if manifest.records.is_empty() {
            return Err(TaskError::EmptyManifest);
        }
        if width == 0 || height == 0 {
            return Err(TaskError::Parameter(format!(
                "image dims must be positive, got {width}x{height}"
            )));
        }
        let mut samples = Vec::with_capacity(manifest.records.len());
        let mut failed = Vec::new();
        for record in &manifest.records {
            let path = manifest.resolve(record);
            match load_image(&path) {
                Ok(img) => samples.push((resample_nearest(&img, width, height), record.label)),
                Err(_) => failed.push(path),
            }
        }
        if !failed.is_empty() {
            return Err(TaskError::Undecodable(failed));
        }
        Ok(ImageClassificationTask {
            shape: Shape::new(width, height),
            samples,
        })
    }

    pub fn from_samples(samples: Vec<(ImageMatrix, u8)>) -> Result<Self, TaskError> {
        let shape = samples.first().ok_or(TaskError::EmptyManifest)?.0.shape();
        if let Some((img, _)) = samples.iter().find(|(img, _)| img.shape() != shape) {
            return Err(TaskError::Shape(crate::genome::ShapeError::Mismatch {
                expected: shape,
                actual: img.shape(),
            }));
        }
        Ok(ImageClassificationTask { shape, samples })
    }

    pub fn samples(&self) -> &[(ImageMatrix, u8)] {
        &self.samples
    }
}

impl FitnessTask for ImageClassificationTask {
    fn name(&self) -> &str {
        "images"
    }

    fn input_shape(&self) -> Shape {
        self.shape
    }

    /// A 3x3 ReLU stage followed by 2x2 max pooling when the image is big
    /// enough for both, else a plain 1x1 pass-through.
    fn conv_seed(&self) -> Vec<ConvStageGene> {
        let stage = ConvStageGene {
            stage_index: 0,
            kernel: Kernel::filled(3, 3, 0.0),
            stride: 1,
            pooler: Pooler::Max,
            pool_window: 2,
            activation: ActivationKind::Relu,
        };
        if pipeline_output_shape(std::slice::from_ref(&stage), self.shape).is_ok() {
            vec![stage]
        } else {
            vec![ConvStageGene {
                kernel: Kernel::identity(),
                pooler: Pooler::None,
                pool_window: 1,
                activation: ActivationKind::Linear,
                ..stage
            }]
        }
    }

    fn fitness_target(&self) -> Option<f64> {
        Some(Self::TARGET)
    }

    fn evaluate(&self, phenotype: &Phenotype) -> Result<f64, TaskError> {
        accuracy(
            phenotype,
            self.samples.iter().map(|(img, label)| (img, *label)),
        )
    }
}
