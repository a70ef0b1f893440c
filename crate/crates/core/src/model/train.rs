use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::network::FusionNet;
use crate::dataset::LabeledSet;
use crate::error::{bail, Result};
use crate::nn::{softmax_ce, AdadeltaState, Scalar, Tensor};

/// Patches (unit scaled), optional scaled handcrafted features and labels,
/// laid out contiguously for batching.
#[derive(Debug, Clone)]
pub struct ModelInputs<T> {
    height: usize,
    width: usize,
    channels: usize,
    images: Vec<T>,
    feature_width: usize,
    features: Vec<T>,
    labels: Vec<usize>,
}

impl<T: Scalar> ModelInputs<T> {
    /// `features`, when given, must hold one row per patch in set order.
    pub fn new(set: &LabeledSet, features: Option<&[Vec<f64>]>) -> Result<Self> {
        let (height, width) = set.patch_dims().unwrap_or((0, 0));
        let channels = crate::dataset::CHANNELS;
        let mut images = Vec::with_capacity(set.len() * height * width * channels);
        for p in set.patches() {
            if (p.height(), p.width()) != (height, width) {
                bail!(Argument, "patches of mixed sizes cannot be batched");
            }
            images.extend(p.to_unit().into_iter().map(T::from_f64_lossy));
        }
        let (feature_width, flat) = match features {
            None => (0, Vec::new()),
            Some(rows) => {
                if rows.len() != set.len() {
                    bail!(
                        Argument,
                        "{} feature rows for {} patches",
                        rows.len(),
                        set.len()
                    );
                }
                let w = rows.first().map_or(0, |r| r.len());
                if rows.iter().any(|r| r.len() != w) {
                    bail!(Argument, "feature rows have differing widths");
                }
                let flat = rows
                    .iter()
                    .flat_map(|r| r.iter().map(|&v| T::from_f64_lossy(v)))
                    .collect();
                (w, flat)
            }
        };
        Ok(Self {
            height,
            width,
            channels,
            images,
            feature_width,
            features: flat,
            labels: set.labels().iter().map(|&l| l as usize).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_width(&self) -> usize {
        self.feature_width
    }

    pub fn batch(&self, indices: &[usize]) -> (Tensor<T>, Option<Tensor<T>>, Vec<usize>) {
        let sz = self.height * self.width * self.channels;
        let mut img = Vec::with_capacity(indices.len() * sz);
        let mut feat = Vec::with_capacity(indices.len() * self.feature_width);
        let fw = self.feature_width;
        for &i in indices {
            img.extend_from_slice(&self.images[i * sz..(i + 1) * sz]);
            feat.extend_from_slice(&self.features[i * fw..(i + 1) * fw]);
        }
        let x = Tensor::new(
            vec![indices.len(), self.height, self.width, self.channels],
            img,
        )
        .expect("batch shape");
        let f = (fw > 0).then(|| Tensor::new(vec![indices.len(), fw], feat).expect("feature shape"));
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        (x, f, labels)
    }
}

/// One Adadelta accumulator pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Adadelta<T> {
    pub states: Vec<AdadeltaState<T>>,
    /// Completed optimizer steps; also keys the dropout masks.
    pub steps: u64,
}

impl<T: Scalar> Adadelta<T> {
    pub fn new(net: &FusionNet<T>) -> Result<Self> {
        let cfg = net.config();
        let states = net
            .params()
            .iter()
            .map(|(_, t)| AdadeltaState::new(t.len(), cfg.rho, cfg.epsilon))
            .collect::<Result<_>>()?;
        Ok(Self { states, steps: 0 })
    }

    pub fn step(&mut self, net: &mut FusionNet<T>, grads: &[Tensor<T>]) -> Result<()> {
        let params = net.params_mut();
        if params.len() != grads.len() || params.len() != self.states.len() {
            bail!(
                Argument,
                "optimizer: {} params, {} grads, {} states",
                params.len(),
                grads.len(),
                self.states.len()
            );
        }
        for ((p, g), s) in params.into_iter().zip(grads).zip(&mut self.states) {
            if p.shape() != g.shape() {
                bail!(Argument, "optimizer: grad shape {:?} vs param {:?}", g.shape(), p.shape());
            }
            s.step(p.data_mut(), g.data())?;
        }
        self.steps += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    pub wall_seconds: f64,
    pub config: ModelConfig,
}

impl TrainReport {
    /// Per-epoch CSV; the wall-clock column is omitted in reproducible runs.
    pub fn to_csv(&self) -> String {
        let timed = !self.config.reproducible;
        let mut s = String::from("epoch,train_loss,train_accuracy,test_accuracy");
        if timed {
            s.push_str(",wall_seconds");
        }
        s.push('\n');
        for e in &self.epochs {
            let test = e.test_accuracy.map(|v| v.to_string()).unwrap_or_default();
            let _ = write!(s, "{},{},{},{}", e.epoch, e.train_loss, e.train_accuracy, test);
            if timed {
                let _ = write!(s, ",{}", self.wall_seconds);
            }
            s.push('\n');
        }
        s
    }

    pub fn final_test_accuracy(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.test_accuracy)
    }
}

fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0000_0000_0000);
    rng.set_stream(epoch as u64 + 1);
    order.shuffle(&mut rng);
    order
}

/// Mini-batch Adadelta on softmax cross-entropy for the configured number of
/// epochs, evaluating `test` after each epoch when provided.
pub fn train<T: Scalar>(
    net: &mut FusionNet<T>,
    optimizer: &mut Adadelta<T>,
    train: &ModelInputs<T>,
    test: Option<&ModelInputs<T>>,
) -> Result<TrainReport> {
    let cfg = net.config().clone();
    for (name, inputs) in std::iter::once(("train", train)).chain(test.map(|t| ("test", t))) {
        let expected = if cfg.fused_feature_width > 0 {
            cfg.fused_feature_width
        } else {
            inputs.feature_width()
        };
        if inputs.feature_width() != expected {
            bail!(
                Argument,
                "{name} features have width {}, model fuses {}",
                inputs.feature_width(),
                cfg.fused_feature_width
            );
        }
        if let Some(&bad) = inputs.labels().iter().find(|&&l| l >= cfg.num_classes) {
            bail!(Argument, "{name} label {bad} exceeds num_classes {}", cfg.num_classes);
        }
    }
    if train.len() < 2 {
        bail!(Argument, "training needs at least 2 samples");
    }
    let started = Instant::now();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = epoch_order(cfg.seed, epoch, train.len());
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut seen = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            if idx.len() < 2 {
                continue;
            }
            let (x, f, labels) = train.batch(idx);
            let feats = if cfg.fused_feature_width > 0 { f.as_ref() } else { None };
            let (logits, trace) = net.forward_train(&x, feats, optimizer.steps)?;
            let out = softmax_ce(&logits, &labels)?;
            let grads = net.backward(&trace, &out.grad)?;
            net.commit_batch_stats(&trace);
            optimizer.step(net, &grads)?;

            loss_sum += out.loss.as_f64() * idx.len() as f64;
            correct += argmax_rows(&out.probs)
                .iter()
                .zip(&labels)
                .filter(|(p, l)| p == l)
                .count();
            seen += idx.len();
        }
        if seen == 0 {
            bail!(Argument, "no training batch had at least 2 samples");
        }
        let test_accuracy = match test {
            Some(t) => Some(accuracy_of(net, t)?),
            None => None,
        };
        epochs.push(EpochMetrics {
            epoch: epoch + 1,
            train_loss: loss_sum / seen as f64,
            train_accuracy: correct as f64 / seen as f64,
            test_accuracy,
        });
    }
    Ok(TrainReport {
        epochs,
        wall_seconds: started.elapsed().as_secs_f64(),
        config: cfg,
    })
}

pub fn argmax_rows<T: Scalar>(probs: &Tensor<T>) -> Vec<usize> {
    let k = probs.dim(1);
    probs
        .data()
        .chunks(k.max(1))
        .map(|row| {
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Class probabilities for every sample, batched by the configured size.
pub fn predict_proba<T: Scalar>(net: &FusionNet<T>, inputs: &ModelInputs<T>) -> Result<Vec<Vec<f64>>> {
    let cfg = net.config();
    let all: Vec<usize> = (0..inputs.len()).collect();
    let mut out = Vec::with_capacity(inputs.len());
    for idx in all.chunks(cfg.batch_size.max(1)) {
        let (x, f, _) = inputs.batch(idx);
        let feats = if cfg.fused_feature_width > 0 { f.as_ref() } else { None };
        let p = net.forward(&x, feats)?;
        out.extend(
            p.data()
                .chunks(cfg.num_classes)
                .map(|row| row.iter().map(|v| v.as_f64()).collect::<Vec<_>>()),
        );
    }
    Ok(out)
}

pub fn predict_labels(probs: &[Vec<f64>]) -> Vec<usize> {
    probs
        .iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn accuracy_of<T: Scalar>(net: &FusionNet<T>, inputs: &ModelInputs<T>) -> Result<f64> {
    let preds = predict_labels(&predict_proba(net, inputs)?);
    crate::eval::accuracy(&preds, inputs.labels())
}
