use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{Dataset, Dense, JacobianTarget, TinyNet};
use crate::error::{Error, Result};
use crate::sampling::substream;
use crate::simulate::fmt_f64;
use crate::spectral;

/// Minibatch SGD settings. Weight decay is added to the gradient as `λw`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 32,
            epochs: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight decay must be non-negative"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("batch size and epochs must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    TrainClass,
    HeldOutClass,
    NaturalNoise,
    RandomNoise,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::TrainClass,
        Category::HeldOutClass,
        Category::NaturalNoise,
        Category::RandomNoise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::TrainClass => "train_class",
            Category::HeldOutClass => "held_out_class",
            Category::NaturalNoise => "natural_noise",
            Category::RandomNoise => "random_noise",
        }
    }
}

/// A tracked input whose Jacobian spectrum is recorded at every checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub id: usize,
    pub category: Category,
    pub x: DVector<f64>,
}

/// Up to `per_category` probes of each kind. Train-class probes are drawn from
/// `train`; random-noise probes are uniform on [0, 1] per coordinate.
pub fn build_probes(
    train: &Dataset,
    held_out: &[DVector<f64>],
    natural: &[DVector<f64>],
    per_category: usize,
    seed: u64,
) -> Vec<Probe> {
    let mut rng = substream(seed, "probes");
    let mut pick = |pool: &[DVector<f64>]| -> Vec<DVector<f64>> {
        let k = per_category.min(pool.len());
        let mut idx = index::sample(&mut rng, pool.len(), k).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| pool[i].clone()).collect()
    };
    let mut groups = vec![
        (Category::TrainClass, pick(train.inputs())),
        (Category::HeldOutClass, pick(held_out)),
        (Category::NaturalNoise, pick(natural)),
    ];
    let noise = (0..per_category)
        .map(|_| DVector::from_fn(train.dim(), |_, _| rng.random::<f64>()))
        .collect();
    groups.push((Category::RandomNoise, noise));
    groups
        .into_iter()
        .flat_map(|(category, xs)| xs.into_iter().map(move |x| (category, x)))
        .enumerate()
        .map(|(id, (category, x))| Probe { id, category, x })
        .collect()
}

/// When probe spectra are recorded: every `first_epoch_every` batches during
/// the first epoch, at the end of every epoch, and optionally before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointSchedule {
    pub first_epoch_every: usize,
    pub per_epoch: bool,
    pub initial: bool,
}

impl Default for CheckpointSchedule {
    fn default() -> Self {
        Self {
            first_epoch_every: 10,
            per_epoch: true,
            initial: true,
        }
    }
}

impl CheckpointSchedule {
    /// `batch` is 1-based within `epoch` (0-based).
    fn fires(&self, epoch: usize, batch: usize, batches_per_epoch: usize) -> bool {
        (epoch == 0 && self.first_epoch_every > 0 && batch.is_multiple_of(self.first_epoch_every))
            || (self.per_epoch && batch == batches_per_epoch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvRecord {
    /// Number of batches seen when the record was taken.
    pub checkpoint: usize,
    pub epoch: usize,
    pub sample_id: usize,
    pub category: Category,
    /// `None` when every singular value is zero.
    pub cv: Option<f64>,
    /// All singular values, descending.
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CvTrace {
    pub records: Vec<CvRecord>,
}

impl CvTrace {
    pub fn checkpoints(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.records.iter().map(|r| r.checkpoint).collect();
        c.dedup();
        c
    }

    /// Mean of the defined CVs of one category at one checkpoint.
    pub fn mean_cv(&self, checkpoint: usize, category: Category) -> Option<f64> {
        let v = self.cvs(checkpoint, category);
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn cvs(&self, checkpoint: usize, category: Category) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.checkpoint == checkpoint && r.category == category)
            .filter_map(|r| r.cv)
            .collect()
    }

    /// Every stored CV equals the CV recomputed from its stored singular values.
    pub fn is_consistent(&self) -> bool {
        self.records
            .iter()
            .all(|r| r.cv == spectral::cv_metric(&r.singular_values).ok())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["checkpoint", "sample_id", "category", "cv", "sv_1", "sv_2", "sv_3", "sv_4"])?;
        for r in &self.records {
            let mut row = vec![
                r.checkpoint.to_string(),
                r.sample_id.to_string(),
                r.category.name().to_string(),
                r.cv.map(fmt_f64).unwrap_or_default(),
            ];
            row.extend((0..4).map(|i| r.singular_values.get(i).copied().map(fmt_f64).unwrap_or_default()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn spectrum_of(net: &TinyNet, x: &DVector<f64>, target: JacobianTarget) -> Result<(Option<f64>, Vec<f64>)> {
    let sv = spectral::singular_values(&net.jacobian(x, target)?)?;
    let cv = match spectral::cv_metric(&sv) {
        Ok(cv) => Some(cv),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((cv, sv))
}

fn record_probes(
    net: &TinyNet,
    probes: &[Probe],
    target: JacobianTarget,
    checkpoint: usize,
    epoch: usize,
) -> Result<Vec<CvRecord>> {
    probes
        .par_iter()
        .map(|p| {
            let (cv, singular_values) = spectrum_of(net, &p.x, target)?;
            Ok(CvRecord {
                checkpoint,
                epoch,
                sample_id: p.id,
                category: p.category,
                cv,
                singular_values,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: TinyNet,
    pub trace: CvTrace,
    /// Full training-set loss before training and after each epoch.
    pub epoch_losses: Vec<f64>,
    pub final_accuracy: f64,
}

/// Minibatch SGD with momentum (`v ← μv + g + λw`, `w ← w − ηv`) on mean
/// cross-entropy. The shuffle of each epoch comes from the seed.
pub fn train(
    mut net: TinyNet,
    data: &Dataset,
    cfg: &TrainConfig,
    schedule: &CheckpointSchedule,
    probes: &[Probe],
    target: JacobianTarget,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "training inputs",
            expected: net.input_dim(),
            found: data.dim(),
        });
    }
    if data.classes() > net.classes() {
        return Err(Error::DimensionMismatch {
            context: "class count",
            expected: net.classes(),
            found: data.classes(),
        });
    }
    let mut rng = substream(cfg.seed, "shuffling");
    let mut velocity: Vec<Dense> = net
        .layers()
        .iter()
        .map(|l| Dense {
            w: DMatrix::zeros(l.w.nrows(), l.w.ncols()),
            b: DVector::zeros(l.b.len()),
        })
        .collect();
    let mut trace = CvTrace::default();
    if schedule.initial {
        trace.records.extend(record_probes(&net, probes, target, 0, 0)?);
    }
    let mut epoch_losses = vec![net.loss(data, None)?];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let batches = data.len().div_ceil(cfg.batch_size);
    let mut seen = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, grads) = net.loss_and_grad(data, batch)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch: epoch + 1,
                    batch: b + 1,
                    loss,
                });
            }
            for ((layer, g), v) in net.layers_mut().iter_mut().zip(&grads).zip(&mut velocity) {
                v.w *= cfg.momentum;
                v.w += &g.w + cfg.weight_decay * &layer.w;
                v.b *= cfg.momentum;
                v.b += &g.b + cfg.weight_decay * &layer.b;
                layer.w -= cfg.learning_rate * &v.w;
                layer.b -= cfg.learning_rate * &v.b;
            }
            seen += 1;
            if schedule.fires(epoch, b + 1, batches) {
                trace.records.extend(record_probes(&net, probes, target, seen, epoch + 1)?);
            }
        }
        let loss = net.loss(data, None)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch: epoch + 1,
                batch: batches,
                loss,
            });
        }
        epoch_losses.push(loss);
    }
    let final_accuracy = net.accuracy(data)?;
    Ok(TrainOutcome {
        net,
        trace,
        epoch_losses,
        final_accuracy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStats {
    pub name: String,
    pub samples: usize,
    pub mean_cv: f64,
    pub median_cv: f64,
    pub cvs: Vec<f64>,
    /// Per-sample singular values, descending.
    pub singular_values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StudyReport {
    pub groups: Vec<GroupStats>,
    /// Groups left out because they had no samples (or no defined CV).
    pub skipped: Vec<String>,
}

impl StudyReport {
    pub fn group(&self, name: &str) -> Option<&GroupStats> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// One row per group: `group,samples,mean_cv,median_cv`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["group", "samples", "mean_cv", "median_cv"])?;
        for g in &self.groups {
            w.write_record([g.name.clone(), g.samples.to_string(), fmt_f64(g.mean_cv), fmt_f64(g.median_cv)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per sample: `group,sample,cv,sv_1,...,sv_k`.
    pub fn write_samples_csv<W: Write>(&self, out: W) -> Result<()> {
        let k = self
            .groups
            .iter()
            .flat_map(|g| g.singular_values.iter().map(Vec::len))
            .max()
            .unwrap_or(0);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["group".to_string(), "sample".to_string(), "cv".to_string()];
        header.extend((1..=k).map(|i| format!("sv_{i}")));
        w.write_record(&header)?;
        for g in &self.groups {
            for (i, (cv, sv)) in g.cvs.iter().zip(&g.singular_values).enumerate() {
                let mut row = vec![g.name.clone(), i.to_string(), fmt_f64(*cv)];
                row.extend((0..k).map(|j| sv.get(j).copied().map(fmt_f64).unwrap_or_default()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Per-group CV statistics over the first `per_group` samples of each group.
pub fn stratification_study(
    net: &TinyNet,
    groups: &[(String, Vec<DVector<f64>>)],
    per_group: usize,
    target: JacobianTarget,
) -> Result<StudyReport> {
    let mut report = StudyReport::default();
    for (name, xs) in groups {
        let xs = &xs[..per_group.min(xs.len())];
        let spectra: Vec<(Option<f64>, Vec<f64>)> =
            xs.par_iter().map(|x| spectrum_of(net, x, target)).collect::<Result<_>>()?;
        let (cvs, singular_values): (Vec<f64>, Vec<Vec<f64>>) = spectra
            .into_iter()
            .filter_map(|(cv, sv)| cv.map(|c| (c, sv)))
            .unzip();
        if cvs.is_empty() {
            report.skipped.push(name.clone());
            continue;
        }
        let mut sorted = cvs.clone();
        sorted.sort_by(f64::total_cmp);
        report.groups.push(GroupStats {
            name: name.clone(),
            samples: cvs.len(),
            mean_cv: cvs.iter().sum::<f64>() / cvs.len() as f64,
            median_cv: median(&sorted),
            cvs,
            singular_values,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::Activation;
    use crate::probe::synth_blobs;

    fn blob_setup(seed: u64) -> (Dataset, Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let all = synth_blobs(5, 16, 100, 8.0, seed).unwrap();
        let held = all.of_class(3);
        let natural = all.of_class(4);
        let (train, _) = all.without_classes(&[3, 4]).unwrap();
        (train, held, natural)
    }

    #[test]
    fn schedule_fires_where_expected() {
        let s = CheckpointSchedule::default();
        let fired: Vec<usize> = (1..=35).filter(|&b| s.fires(0, b, 35)).collect();
        assert_eq!(fired, vec![10, 20, 30, 35]);
        let later: Vec<usize> = (1..=35).filter(|&b| s.fires(1, b, 35)).collect();
        assert_eq!(later, vec![35]);
    }

    #[test]
    fn small_net_learns_blobs() {
        let (train_set, _, _) = blob_setup(0);
        let net = TinyNet::new(&[16, 32, 3], Activation::Relu, 0).unwrap();
        let out = train(
            net,
            &train_set,
            &TrainConfig::default(),
            &CheckpointSchedule::default(),
            &[],
            JacobianTarget::Logits,
        )
        .unwrap();
        assert!(out.final_accuracy >= 0.95, "{}", out.final_accuracy);
        assert!(out.trace.records.is_empty());
    }

    #[test]
    fn training_is_deterministic_and_trace_consistent() {
        let (train_set, held, natural) = blob_setup(1);
        let probes = build_probes(&train_set, &held, &natural, 4, 1);
        assert_eq!(probes.len(), 16);
        let run = || {
            let cfg = TrainConfig {
                epochs: 2,
                seed: 3,
                ..TrainConfig::default()
            };
            let net = TinyNet::desk_scale(16, 3, 3).unwrap();
            train(net, &train_set, &cfg, &CheckpointSchedule::default(), &probes, JacobianTarget::Logits).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.net, b.net);
        assert_eq!(a.trace, b.trace);
        assert!(a.trace.is_consistent());
        // 300 samples / 32 = 10 batches per epoch: initial, 10 (end of epoch 1), 20
        assert_eq!(a.trace.checkpoints(), vec![0, 10, 20]);
        let mut csv = Vec::new();
        a.trace.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("checkpoint,sample_id,category,cv,sv_1,sv_2,sv_3,sv_4\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 16);
    }

    #[test]
    fn loss_mostly_decreases_over_epochs() {
        let mut transitions = 0;
        let mut decreasing = 0;
        for seed in 0..10 {
            let (train_set, _, _) = blob_setup(seed);
            let cfg = TrainConfig {
                epochs: 5,
                seed,
                ..TrainConfig::default()
            };
            let net = TinyNet::new(&[16, 32, 3], Activation::Relu, seed).unwrap();
            let out = train(net, &train_set, &cfg, &CheckpointSchedule::default(), &[], JacobianTarget::Logits).unwrap();
            for w in out.epoch_losses.windows(2) {
                transitions += 1;
                decreasing += usize::from(w[1] <= w[0]);
            }
        }
        assert!(decreasing as f64 >= 0.9 * transitions as f64, "{decreasing}/{transitions}");
    }

    #[test]
    fn huge_learning_rate_aborts() {
        let (train_set, _, _) = blob_setup(2);
        let cfg = TrainConfig {
            learning_rate: 1e6,
            ..TrainConfig::default()
        };
        let net = TinyNet::new(&[16, 32, 3], Activation::Relu, 0).unwrap();
        let err = train(net, &train_set, &cfg, &CheckpointSchedule::default(), &[], JacobianTarget::Logits);
        assert!(matches!(err, Err(Error::TrainingDiverged { .. })), "{err:?}");
    }

    #[test]
    fn bad_configs_are_rejected() {
        let bad = [
            TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
            TrainConfig { momentum: 1.0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { epochs: 0, ..TrainConfig::default() },
        ];
        assert!(bad.iter().all(|c| c.validate().is_err()));
    }

    #[test]
    fn study_statistics() {
        let net = TinyNet::new(&[4, 8, 3], Activation::Relu, 1).unwrap();
        let x = DVector::from_vec(vec![0.2, -0.1, 0.5, 0.3]);
        let groups = vec![
            ("same".to_string(), vec![x.clone(); 5]),
            ("empty".to_string(), vec![]),
        ];
        let report = stratification_study(&net, &groups, 50, JacobianTarget::Logits).unwrap();
        assert_eq!(report.skipped, vec!["empty".to_string()]);
        let g = report.group("same").unwrap();
        assert_eq!(g.samples, 5);
        assert!(g.cvs.iter().all(|&c| c == g.cvs[0]));
        assert!((g.mean_cv - g.cvs[0]).abs() <= 1e-15 * g.cvs[0]);
        assert_eq!(g.median_cv, g.cvs[0]);
        assert_eq!(median(&[1.0, 2.0, 4.0, 8.0]), 3.0);
    }
}
