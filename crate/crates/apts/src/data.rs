//! Datasets, the IDX image/label codec, and deterministic batch schedules.

use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::objective::BatchRef;

/// Supervision targets: regression values or class labels.
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    /// One row of target values per sample.
    Values(Matrix),
    /// One class label per sample, each in `0..classes`.
    Labels { labels: Vec<usize>, classes: usize },
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Values(m) => m.rows(),
            Targets::Labels { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Output width the network head must produce.
    pub fn output_dim(&self) -> usize {
        match self {
            Targets::Values(m) => m.cols(),
            Targets::Labels { classes, .. } => *classes,
        }
    }

    fn select(&self, indices: &[usize]) -> Result<Targets> {
        match self {
            Targets::Values(m) => Ok(Targets::Values(m.select_rows(indices)?)),
            Targets::Labels { labels, classes } => {
                let mut out = Vec::with_capacity(indices.len());
                for &i in indices {
                    let label = *labels.get(i).ok_or(Error::Range {
                        what: "labels",
                        index: i,
                        len: labels.len(),
                    })?;
                    out.push(label);
                }
                Ok(Targets::Labels {
                    labels: out,
                    classes: *classes,
                })
            }
        }
    }
}

/// An in-memory supervised dataset with one input row per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Matrix,
    targets: Targets,
    image_shape: Option<(u32, u32)>,
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Targets) -> Result<Self> {
        if inputs.rows() != targets.len() {
            return Err(Error::Dimension {
                context: "dataset construction",
                expected: inputs.rows(),
                actual: targets.len(),
            });
        }
        if inputs.rows() == 0 {
            return Err(Error::domain("dataset must contain at least one sample"));
        }
        Ok(Dataset {
            inputs,
            targets,
            image_shape: None,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.targets.output_dim()
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    /// Materializes the rows a batch refers to, validating indices.
    pub fn select_batch(&self, batch: &BatchRef) -> Result<(Matrix, Targets)> {
        match batch {
            BatchRef::Full => Ok((self.inputs.clone(), self.targets.clone())),
            BatchRef::Indices(idx) => {
                let inputs = self.inputs.select_rows(idx)?;
                let targets = self.targets.select(idx)?;
                Ok((inputs, targets))
            }
        }
    }
}

/// Two interleaved half-circles ("moons"), one per class, with Gaussian
/// jitter. Class 0 sits on a unit circle centered at the origin, class 1 on
/// a unit circle centered at (1.0, 0.5), both traced over angles [0, π].
pub fn two_moons(samples: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if samples < 2 {
        return Err(Error::domain("two_moons needs at least 2 samples"));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::domain(format!(
            "two_moons noise must be finite and non-negative, got {noise}"
        )));
    }
    let c0 = samples - samples / 2;
    let c1 = samples / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut data = Vec::with_capacity(samples * 2);
    let mut labels = Vec::with_capacity(samples);
    let arc = |count: usize, i: usize| {
        if count == 1 {
            0.0
        } else {
            std::f64::consts::PI * i as f64 / (count - 1) as f64
        }
    };
    for i in 0..c0 {
        let t = arc(c0, i);
        let z1: f64 = normal.sample(&mut rng);
        let z2: f64 = normal.sample(&mut rng);
        data.push(t.cos() + noise * z1);
        data.push(t.sin() + noise * z2);
        labels.push(0);
    }
    for i in 0..c1 {
        let t = arc(c1, i);
        let z1: f64 = normal.sample(&mut rng);
        let z2: f64 = normal.sample(&mut rng);
        data.push(1.0 - t.cos() + noise * z1);
        data.push(0.5 - t.sin() + noise * z2);
        labels.push(1);
    }
    Dataset::new(
        Matrix::from_vec(samples, 2, data)?,
        Targets::Labels { labels, classes: 2 },
    )
}

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset.checked_add(4).filter(|&e| e <= bytes.len());
    match end {
        Some(e) => {
            let mut b = [0u8; 4];
            b.copy_from_slice(&bytes[offset..e]);
            Ok(u32::from_be_bytes(b))
        }
        None => Err(Error::format(
            bytes.len(),
            format!("truncated header: missing {what}"),
        )),
    }
}

/// Decodes an IDX image file (magic `0x00000803`, big-endian dimensions,
/// unsigned-byte pixels) into a row-per-image matrix with pixels scaled to
/// `[0, 1]`. Returns the matrix and the `(rows, cols)` image shape.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(Matrix, (u32, u32))> {
    let magic = read_u32_be(bytes, 0, "image magic")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::format(
            0,
            format!("bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}"),
        ));
    }
    let count = read_u32_be(bytes, 4, "image count")? as usize;
    let rows = read_u32_be(bytes, 8, "image rows")? as usize;
    let cols = read_u32_be(bytes, 12, "image cols")? as usize;
    if count == 0 || rows == 0 || cols == 0 {
        return Err(Error::format(4, "image dimensions must be non-zero"));
    }
    let pixels = count
        .checked_mul(rows)
        .and_then(|p| p.checked_mul(cols))
        .ok_or_else(|| Error::format(4, "image dimensions overflow"))?;
    let payload = &bytes[16..];
    if payload.len() != pixels {
        return Err(Error::format(
            16,
            format!("payload has {} bytes, expected {pixels}", payload.len()),
        ));
    }
    let data = payload.iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok((
        Matrix::from_vec(count, rows * cols, data)?,
        (rows as u32, cols as u32),
    ))
}

/// Decodes an IDX label file (magic `0x00000801`): one digit label `0..=9`
/// per sample.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = read_u32_be(bytes, 0, "label magic")?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::format(
            0,
            format!("bad label magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}"),
        ));
    }
    let count = read_u32_be(bytes, 4, "label count")? as usize;
    if count == 0 {
        return Err(Error::format(4, "label count must be non-zero"));
    }
    let payload = &bytes[8..];
    if payload.len() != count {
        return Err(Error::format(
            8,
            format!("payload has {} bytes, expected {count}", payload.len()),
        ));
    }
    let mut labels = Vec::with_capacity(count);
    for (i, &b) in payload.iter().enumerate() {
        if b > 9 {
            return Err(Error::format(8 + i, format!("label value {b} exceeds 9")));
        }
        labels.push(b as usize);
    }
    Ok(labels)
}

/// Loads a paired IDX image/label file set as a 10-class dataset.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let (inputs, shape) = parse_idx_images(&std::fs::read(images)?)?;
    let labels = parse_idx_labels(&std::fs::read(labels)?)?;
    if inputs.rows() != labels.len() {
        return Err(Error::Dimension {
            context: "idx image/label pairing",
            expected: inputs.rows(),
            actual: labels.len(),
        });
    }
    let mut ds = Dataset::new(inputs, Targets::Labels { labels, classes: 10 })?;
    ds.image_shape = Some(shape);
    Ok(ds)
}

/// Writes a label-target dataset whose inputs are `[0, 1]`-scaled 8-bit
/// pixels back out as an IDX image/label file pair.
pub fn write_idx(ds: &Dataset, images: &Path, labels: &Path) -> Result<()> {
    let Targets::Labels { labels: ys, .. } = &ds.targets else {
        return Err(Error::domain("write_idx requires label targets"));
    };
    let (rows, cols) = match ds.image_shape {
        Some(shape) => shape,
        None => (1, ds.input_dim() as u32),
    };
    if (rows as usize) * (cols as usize) != ds.input_dim() {
        return Err(Error::domain("image shape does not match input width"));
    }

    let mut img = Vec::with_capacity(16 + ds.len() * ds.input_dim());
    img.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    img.extend_from_slice(&rows.to_be_bytes());
    img.extend_from_slice(&cols.to_be_bytes());
    for &v in ds.inputs.data() {
        let scaled = v * 255.0;
        let byte = scaled.round();
        if !(0.0..=255.0).contains(&byte) || (scaled - byte).abs() > 1e-6 {
            return Err(Error::domain(format!(
                "input value {v} is not an 8-bit pixel intensity"
            )));
        }
        img.push(byte as u8);
    }

    let mut lab = Vec::with_capacity(8 + ys.len());
    lab.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(ys.len() as u32).to_be_bytes());
    for &y in ys {
        if y > 9 {
            return Err(Error::domain(format!("label value {y} exceeds 9")));
        }
        lab.push(y as u8);
    }

    std::fs::write(images, img)?;
    std::fs::write(labels, lab)?;
    Ok(())
}

/// How an epoch is cut into batches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchMode {
    /// One batch covering the whole dataset.
    Full,
    /// Fixed-size chunks in sample order; the final short chunk is kept.
    Sequential,
    /// Fixed-size chunks of a seeded per-epoch permutation.
    Shuffled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchSchedule {
    pub mode: BatchMode,
    pub batch_size: usize,
    pub seed: u64,
}

/// The batch list for one epoch. Identical `(schedule, epoch)` pairs always
/// produce identical batches; shuffling never depends on prior epochs.
pub fn batches(ds: &Dataset, schedule: &BatchSchedule, epoch: u64) -> Result<Vec<BatchRef>> {
    match schedule.mode {
        BatchMode::Full => Ok(vec![BatchRef::Full]),
        BatchMode::Sequential | BatchMode::Shuffled => {
            if schedule.batch_size == 0 {
                return Err(Error::domain("batch size must be at least 1"));
            }
            let mut order: Vec<usize> = (0..ds.len()).collect();
            if schedule.mode == BatchMode::Shuffled {
                let mix = schedule
                    .seed
                    .wrapping_add(epoch.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix));
            }
            Ok(order
                .chunks(schedule.batch_size)
                .map(|c| BatchRef::Indices(Arc::from(c.to_vec())))
                .collect())
        }
    }
}
