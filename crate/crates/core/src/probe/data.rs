use std::fs;
use std::io::Cursor;
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};
use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sampling::substream;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Labeled samples, one input vector per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<DVector<f64>>,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<DVector<f64>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::invalid("dataset is empty"));
        }
        if inputs.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "dataset labels",
                expected: inputs.len(),
                found: labels.len(),
            });
        }
        let d = inputs[0].len();
        if let Some(bad) = inputs.iter().find(|x| x.len() != d) {
            return Err(Error::DimensionMismatch {
                context: "dataset row",
                expected: d,
                found: bad.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::invalid(format!("label {bad} outside [0, {classes})")));
        }
        Ok(Self {
            inputs,
            labels,
            classes,
        })
    }

    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn of_class(&self, class: usize) -> Vec<DVector<f64>> {
        self.inputs
            .iter()
            .zip(&self.labels)
            .filter(|(_, &y)| y == class)
            .map(|(x, _)| x.clone())
            .collect()
    }

    /// Drop the `excluded` classes and relabel the rest to `0..k` in increasing order.
    /// Returns the remaining dataset and the original class of each new label.
    pub fn without_classes(&self, excluded: &[usize]) -> Result<(Dataset, Vec<usize>)> {
        let kept: Vec<usize> = (0..self.classes).filter(|c| !excluded.contains(c)).collect();
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for (x, y) in self.inputs.iter().zip(&self.labels) {
            if let Some(new) = kept.iter().position(|c| c == y) {
                inputs.push(x.clone());
                labels.push(new);
            }
        }
        Ok((Dataset::new(inputs, labels, kept.len())?, kept))
    }

    /// Smallest and largest input coordinate over the whole set.
    pub fn value_range(&self) -> (f64, f64) {
        self.inputs.iter().flat_map(|x| x.iter()).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), &v| (lo.min(v), hi.max(v)),
        )
    }
}

fn read_header(bytes: &[u8], path: &str, magic: u32, dims: usize) -> Result<Vec<usize>> {
    let short = |needed: usize| Error::Length {
        path: path.to_string(),
        needed,
        found: bytes.len(),
    };
    let mut cur = Cursor::new(bytes);
    let found = cur.read_u32::<BigEndian>().map_err(|_| short(4))?;
    if found != magic {
        return Err(Error::Format {
            path: path.to_string(),
            expected: magic,
            found,
        });
    }
    (0..dims)
        .map(|_| Ok(cur.read_u32::<BigEndian>().map_err(|_| short(4 * (dims + 1)))? as usize))
        .collect()
}

/// Reads an IDX image/label pair, keeps the first `max_items` in file order and
/// scales pixel bytes by 1/255.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>, max_items: usize) -> Result<Dataset> {
    let img_path = images.as_ref().display().to_string();
    let lbl_path = labels.as_ref().display().to_string();
    let img = fs::read(images.as_ref())?;
    let lbl = fs::read(labels.as_ref())?;

    let dims = read_header(&img, &img_path, IMAGE_MAGIC, 3)?;
    let (count, pixels) = (dims[0], dims[1] * dims[2]);
    let needed = 16 + count * pixels;
    if img.len() < needed {
        return Err(Error::Length {
            path: img_path,
            needed,
            found: img.len(),
        });
    }
    let label_count = read_header(&lbl, &lbl_path, LABEL_MAGIC, 1)?[0];
    if lbl.len() < 8 + label_count {
        return Err(Error::Length {
            path: lbl_path,
            needed: 8 + label_count,
            found: lbl.len(),
        });
    }
    if label_count != count {
        return Err(Error::invalid(format!(
            "{img_path} has {count} images but {lbl_path} has {label_count} labels"
        )));
    }

    let take = count.min(max_items);
    let inputs = (0..take)
        .map(|i| {
            let start = 16 + i * pixels;
            DVector::from_iterator(pixels, img[start..start + pixels].iter().map(|&p| f64::from(p) / 255.0))
        })
        .collect();
    let labels: Vec<usize> = lbl[8..8 + take].iter().map(|&y| usize::from(y)).collect();
    let classes = labels.iter().max().map_or(1, |m| m + 1).max(10);
    Dataset::new(inputs, labels, classes)
}

/// Isotropic unit-variance Gaussian clusters centred at `separation/√2 · e_c`,
/// so every pair of centres is `separation` apart. Samples are grouped by class.
pub fn synth_blobs(classes: usize, d: usize, per_class: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if d < classes {
        return Err(Error::invalid(format!("dimension {d} cannot hold {classes} simplex vertices")));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::invalid("separation must be finite and non-negative"));
    }
    if per_class == 0 {
        return Err(Error::invalid("per_class must be positive"));
    }
    let mut rng = substream(seed, "blobs");
    let offset = separation / std::f64::consts::SQRT_2;
    let mut inputs = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        for _ in 0..per_class {
            let mut x = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            x[c] += offset;
            inputs.push(x);
            labels.push(c);
        }
    }
    Dataset::new(inputs, labels, classes)
}
