//! Desk-scale classifier whose input-output Jacobians are probed for
//! singular-value stratification during training.

mod data;
mod train;

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynsys::{matrix_from_rows, rows_of, Activation};
use crate::error::{Error, Result};
use crate::sampling::substream;

pub use data::{load_idx, synth_blobs, Dataset};
pub use train::{
    build_probes, stratification_study, train, Category, CheckpointSchedule, CvRecord, CvTrace,
    GroupStats, Probe, StudyReport, TrainConfig, TrainOutcome,
};

/// Hidden sizes of the default architecture `[d, 128, 64, C]`.
pub const DEFAULT_HIDDEN: [usize; 2] = [128, 64];

/// Which map the probe Jacobian is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianTarget {
    Logits,
    #[default]
    Softmax,
}

impl std::str::FromStr for JacobianTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logits" => Ok(Self::Logits),
            "softmax" => Ok(Self::Softmax),
            other => Err(Error::invalid(format!("unknown jacobian target `{other}`"))),
        }
    }
}

/// One affine layer, `y = W x + b` with `W` of shape out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Fully connected network with a shared hidden activation and raw logit outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyNet {
    layers: Vec<Dense>,
    hidden: Activation,
}

/// Per-layer parameter gradients, same shapes as the layers.
pub type Gradients = Vec<Dense>;

struct Cache {
    // activations[0] is the input; pre[l] feeds activations[l + 1]
    activations: Vec<DVector<f64>>,
    pre: Vec<DVector<f64>>,
}

impl TinyNet {
    /// He-normal weights, zero biases.
    pub fn new(dims: &[usize], hidden: Activation, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::invalid(format!("bad layer dims {dims:?}")));
        }
        let mut rng = substream(seed, "init");
        let layers = dims
            .windows(2)
            .map(|io| {
                let normal = Normal::new(0.0, (2.0 / io[0] as f64).sqrt()).expect("positive std");
                Dense {
                    w: DMatrix::from_fn(io[1], io[0], |_, _| normal.sample(&mut rng)),
                    b: DVector::zeros(io[1]),
                }
            })
            .collect();
        Ok(Self { layers, hidden })
    }

    /// `[d, 128, 64, classes]` with relu.
    pub fn desk_scale(d: usize, classes: usize, seed: u64) -> Result<Self> {
        Self::new(&[d, DEFAULT_HIDDEN[0], DEFAULT_HIDDEN[1], classes], Activation::Relu, seed)
    }

    pub fn from_layers(layers: Vec<Dense>, hidden: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network has no layers"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.b.len() != l.w.nrows() {
                return Err(Error::DimensionMismatch {
                    context: "layer bias",
                    expected: l.w.nrows(),
                    found: l.b.len(),
                });
            }
            if i > 0 && l.w.ncols() != layers[i - 1].w.nrows() {
                return Err(Error::DimensionMismatch {
                    context: "layer input",
                    expected: layers[i - 1].w.nrows(),
                    found: l.w.ncols(),
                });
            }
            if l.w.iter().chain(l.b.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("network parameters"));
            }
        }
        Ok(Self { layers, hidden })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn hidden(&self) -> Activation {
        self.hidden
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.w.nrows()))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn classes(&self) -> usize {
        self.layers[self.layers.len() - 1].w.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn forward_cache(&self, x: &DVector<f64>) -> Cache {
        let mut activations = vec![x.clone()];
        let mut pre = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let z = &l.w * &activations[i] + &l.b;
            let a = if i == last {
                z.clone()
            } else {
                z.map(|u| self.hidden.value(u))
            };
            pre.push(z);
            activations.push(a);
        }
        Cache { activations, pre }
    }

    pub fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        Ok(self.forward_cache(x).activations.pop().expect("at least one layer"))
    }

    pub fn predict(&self, x: &DVector<f64>) -> Result<usize> {
        Ok(self.forward(x)?.argmax().0)
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let mut hits = 0usize;
        for (x, &y) in data.inputs().iter().zip(data.labels()) {
            hits += usize::from(self.predict(x)? == y);
        }
        Ok(hits as f64 / data.len() as f64)
    }

    /// Mean cross-entropy of softmaxed logits over `idx` (all samples when `None`).
    pub fn loss(&self, data: &Dataset, idx: Option<&[usize]>) -> Result<f64> {
        let all: Vec<usize>;
        let idx = match idx {
            Some(i) => i,
            None => {
                all = (0..data.len()).collect();
                &all
            }
        };
        let mut total = 0.0;
        for &i in idx {
            let logits = self.forward(&data.inputs()[i])?;
            total += cross_entropy(&logits, data.labels()[i]);
        }
        Ok(total / idx.len() as f64)
    }

    /// Mean cross-entropy over the batch and its exact parameter gradient (no weight decay).
    pub fn loss_and_grad(&self, data: &Dataset, batch: &[usize]) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let mut grads: Gradients = self
            .layers
            .iter()
            .map(|l| Dense {
                w: DMatrix::zeros(l.w.nrows(), l.w.ncols()),
                b: DVector::zeros(l.b.len()),
            })
            .collect();
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &i in batch {
            let x = &data.inputs()[i];
            self.check_input(x)?;
            let label = data.labels()[i];
            let cache = self.forward_cache(x);
            let logits = cache.activations.last().expect("output");
            loss += cross_entropy(logits, label);
            let mut delta = softmax(logits);
            delta[label] -= 1.0;
            delta *= scale;
            for l in (0..self.layers.len()).rev() {
                grads[l].w.ger(1.0, &delta, &cache.activations[l], 1.0);
                grads[l].b += &delta;
                if l > 0 {
                    let back = self.layers[l].w.tr_mul(&delta);
                    delta = back.zip_map(&cache.pre[l - 1], |g, z| g * self.hidden.derivative(z));
                }
            }
        }
        Ok((loss * scale, grads))
    }

    /// Exact C×d Jacobian of the logits with respect to the input, one
    /// reverse sweep per output row.
    pub fn classifier_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        let cache = self.forward_cache(x);
        let c = self.classes();
        let mut jac = DMatrix::zeros(c, self.input_dim());
        let masks: Vec<DVector<f64>> = cache
            .pre
            .iter()
            .map(|z| z.map(|u| self.hidden.derivative(u)))
            .collect();
        for k in 0..c {
            let mut g = DVector::zeros(c);
            g[k] = 1.0;
            for l in (0..self.layers.len()).rev() {
                g = self.layers[l].w.tr_mul(&g);
                if l > 0 {
                    g.component_mul_assign(&masks[l - 1]);
                }
            }
            jac.row_mut(k).tr_copy_from(&g);
        }
        Ok(jac)
    }

    pub fn jacobian(&self, x: &DVector<f64>, target: JacobianTarget) -> Result<DMatrix<f64>> {
        let jac = self.classifier_jacobian(x)?;
        Ok(match target {
            JacobianTarget::Logits => jac,
            JacobianTarget::Softmax => {
                let p = softmax(&self.forward(x)?);
                (DMatrix::from_diagonal(&p) - &p * p.transpose()) * jac
            }
        })
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            layer_dims: self.dims(),
            activation: self.hidden,
            weights: self.layers.iter().map(|l| rows_of(&l.w)).collect(),
            biases: self.layers.iter().map(|l| l.b.iter().copied().collect()).collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        file.into_net()
    }
}

/// Checkpoint JSON: layer dims and row-major weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn into_net(self) -> Result<TinyNet> {
        if self.weights.len() + 1 != self.layer_dims.len() || self.biases.len() != self.weights.len() {
            return Err(Error::invalid("model file layer counts disagree"));
        }
        let mut layers = Vec::with_capacity(self.weights.len());
        for (i, (w, b)) in self.weights.iter().zip(self.biases).enumerate() {
            let w = matrix_from_rows(w, "layer weights")?;
            if w.shape() != (self.layer_dims[i + 1], self.layer_dims[i]) {
                return Err(Error::invalid(format!(
                    "layer {i} weights are {}x{}, dims say {}x{}",
                    w.nrows(),
                    w.ncols(),
                    self.layer_dims[i + 1],
                    self.layer_dims[i]
                )));
            }
            layers.push(Dense {
                w,
                b: DVector::from_vec(b),
            });
        }
        TinyNet::from_layers(layers, self.activation)
    }
}

pub fn softmax(logits: &DVector<f64>) -> DVector<f64> {
    let top = logits.max();
    let e = logits.map(|v| (v - top).exp());
    let s = e.sum();
    e / s
}

fn cross_entropy(logits: &DVector<f64>, label: usize) -> f64 {
    let top = logits.max();
    let lse = top + logits.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
    lse - logits[label]
}
