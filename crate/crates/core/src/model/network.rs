//! The fused classifier: conv/ReLU stack, max pool, dropout, concatenation
//! with handcrafted features, dense head with batch normalization, softmax.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::{bail, Result};
use crate::nn::{
    self, concat, conv2d_backward, conv2d_backward_params, conv2d_forward, dense_backward, dense_forward, dropout,
    dropout_backward, maxpool2, maxpool2_backward, relu, relu_backward, split_columns,
    BatchNormCache, BatchNormState, BatchStats, Mode, Scalar, Tensor,
};

/// Weight and bias of one affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionNet<T> {
    config: ModelConfig,
    convs: Vec<Affine<T>>,
    denses: Vec<Affine<T>>,
    batchnorm: Option<BatchNormState<T>>,
    head: Affine<T>,
}

/// Activations kept from a training forward pass for backpropagation.
#[derive(Debug)]
pub struct Trace<T> {
    conv_inputs: Vec<Tensor<T>>,
    conv_pre: Vec<Tensor<T>>,
    pool_input_shape: Vec<usize>,
    pool_argmax: Vec<usize>,
    pooled_shape: Vec<usize>,
    bottleneck_mask: Option<Vec<T>>,
    dense_inputs: Vec<Tensor<T>>,
    dense_pre: Vec<Tensor<T>>,
    bn_cache: Option<BatchNormCache<T>>,
    bn_stats: Option<BatchStats<T>>,
    head_mask: Option<Vec<T>>,
    head_input: Tensor<T>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the dropout mask for `layer` at optimizer step `step`.
fn dropout_seed(seed: u64, step: u64, layer: u64) -> u64 {
    splitmix(splitmix(seed ^ 0xD0D0) ^ splitmix(step.wrapping_mul(4).wrapping_add(layer)))
}

fn glorot<T: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len: usize = shape.iter().product();
    let data = (0..len)
        .map(|_| T::from_f64_lossy((rng.gen::<f64>() * 2.0 - 1.0) * limit))
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches length")
}

impl<T: Scalar> FusionNet<T> {
    /// Builds the layer stack with seeded Glorot-uniform weights and zero biases.
    pub fn build(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let k = config.kernel;
        let mut convs = Vec::with_capacity(config.conv_maps.len());
        let mut cin = config.input_channels;
        for &cout in &config.conv_maps {
            convs.push(Affine {
                weight: glorot(&mut rng, &[k, k, cin, cout], k * k * cin, k * k * cout),
                bias: Tensor::zeros(&[cout]),
            });
            cin = cout;
        }
        let mut denses = Vec::with_capacity(config.dense_widths.len());
        let mut din = config.fused_width();
        for &dout in &config.dense_widths {
            denses.push(Affine {
                weight: glorot(&mut rng, &[din, dout], din, dout),
                bias: Tensor::zeros(&[dout]),
            });
            din = dout;
        }
        let head = Affine {
            weight: glorot(&mut rng, &[din, config.num_classes], din, config.num_classes),
            bias: Tensor::zeros(&[config.num_classes]),
        };
        let batchnorm = config.batchnorm.then(|| {
            BatchNormState::new(config.dense_widths[0], config.bn_momentum, config.bn_epsilon)
        });
        Ok(Self {
            config: config.clone(),
            convs,
            denses,
            batchnorm,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Learnable tensors in canonical order, with names.
    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            out.push((format!("conv{}.weight", i + 1), &c.weight));
            out.push((format!("conv{}.bias", i + 1), &c.bias));
        }
        for (i, d) in self.denses.iter().enumerate() {
            out.push((format!("dense{}.weight", i + 1), &d.weight));
            out.push((format!("dense{}.bias", i + 1), &d.bias));
            if i == 0 {
                if let Some(bn) = &self.batchnorm {
                    out.push(("bn1.gamma".to_string(), &bn.gamma));
                    out.push(("bn1.beta".to_string(), &bn.beta));
                }
            }
        }
        out.push(("head.weight".to_string(), &self.head.weight));
        out.push(("head.bias".to_string(), &self.head.bias));
        out
    }

    /// Same order as [`Self::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for c in &mut self.convs {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        let mut bn = self.batchnorm.as_mut();
        for (i, d) in self.denses.iter_mut().enumerate() {
            out.push(&mut d.weight);
            out.push(&mut d.bias);
            if i == 0 {
                if let Some(bn) = bn.take() {
                    out.push(&mut bn.gamma);
                    out.push(&mut bn.beta);
                }
            }
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    /// Non-learned state (batch-norm running statistics).
    pub fn buffers(&self) -> Vec<(String, &Tensor<T>)> {
        match &self.batchnorm {
            Some(bn) => vec![
                ("bn1.running_mean".to_string(), &bn.running_mean),
                ("bn1.running_var".to_string(), &bn.running_var),
            ],
            None => Vec::new(),
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match &mut self.batchnorm {
            Some(bn) => vec![&mut bn.running_mean, &mut bn.running_var],
            None => Vec::new(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Per-stage activation shapes for a batch of `n`, as `(stage, shape)`.
    pub fn layer_shapes(&self, n: usize) -> Vec<(String, Vec<usize>)> {
        let c = &self.config;
        let mut out = Vec::new();
        let (mut h, mut w) = (c.input_height, c.input_width);
        out.push(("input".to_string(), vec![n, h, w, c.input_channels]));
        for (i, &maps) in c.conv_maps.iter().enumerate() {
            h = c.padding.output_size(h, c.kernel);
            w = c.padding.output_size(w, c.kernel);
            out.push((format!("conv{}", i + 1), vec![n, h, w, maps]));
        }
        let maps = *c.conv_maps.last().unwrap();
        out.push(("pool".to_string(), vec![n, h / 2, w / 2, maps]));
        out.push(("bottleneck".to_string(), vec![n, c.bottleneck_width()]));
        out.push(("fused".to_string(), vec![n, c.fused_width()]));
        for (i, &d) in c.dense_widths.iter().enumerate() {
            out.push((format!("dense{}", i + 1), vec![n, d]));
        }
        out.push(("logits".to_string(), vec![n, c.num_classes]));
        out
    }

    fn check_inputs(&self, patches: &Tensor<T>, features: Option<&Tensor<T>>) -> Result<usize> {
        let c = &self.config;
        patches.expect_rank(4, "model input")?;
        let n = patches.dim(0);
        if patches.shape()[1..] != [c.input_height, c.input_width, c.input_channels] {
            bail!(
                Argument,
                "model expects patches of {}x{}x{}, got {:?}",
                c.input_height,
                c.input_width,
                c.input_channels,
                patches.shape()
            );
        }
        if c.fused_feature_width > 0 {
            let Some(f) = features else {
                bail!(Argument, "model fuses {} features but none were given", c.fused_feature_width);
            };
            if f.shape() != [n, c.fused_feature_width] {
                bail!(
                    Argument,
                    "feature batch {:?} does not match [{n}, {}]",
                    f.shape(),
                    c.fused_feature_width
                );
            }
        }
        Ok(n)
    }

    fn run(
        &self,
        patches: &Tensor<T>,
        features: Option<&Tensor<T>>,
        mode: Mode,
        step: u64,
    ) -> Result<(Tensor<T>, Option<Trace<T>>)> {
        let n = self.check_inputs(patches, features)?;
        let train = mode == Mode::Train;
        let c = &self.config;

        let mut conv_inputs = Vec::new();
        let mut conv_pre = Vec::new();
        let mut x = patches.clone();
        for layer in &self.convs {
            let z = conv2d_forward(&x, &layer.weight, &layer.bias, c.padding)?;
            let a = relu(&z);
            if train {
                conv_inputs.push(x);
                conv_pre.push(z);
            }
            x = a;
        }
        let pool_input_shape = x.shape().to_vec();
        let pooled = maxpool2(&x)?;
        let pooled_shape = pooled.output.shape().to_vec();
        let (dropped, bottleneck_mask) = dropout(
            &pooled.output,
            c.dropout_after_pool,
            mode,
            dropout_seed(c.seed, step, 0),
        )?;
        let flat = dropped.reshape(&[n, c.bottleneck_width()])?;
        let mut h = match features {
            Some(f) if c.fused_feature_width > 0 => concat(&flat, f)?,
            _ => flat,
        };

        let mut dense_inputs = Vec::new();
        let mut dense_pre = Vec::new();
        let mut bn_cache = None;
        let mut bn_stats = None;
        for (i, layer) in self.denses.iter().enumerate() {
            let mut z = dense_forward(&h, &layer.weight, &layer.bias)?;
            if i == 0 {
                if let Some(bn) = &self.batchnorm {
                    z = if train {
                        let (y, cache, stats) = bn.normalize_batch(&z)?;
                        bn_cache = Some(cache);
                        bn_stats = Some(stats);
                        y
                    } else {
                        bn.infer(&z)?
                    };
                }
            }
            let a = relu(&z);
            if train {
                dense_inputs.push(h);
                dense_pre.push(z);
            }
            h = a;
        }
        let (head_input, head_mask) = dropout(
            &h,
            c.dropout_before_final,
            mode,
            dropout_seed(c.seed, step, 1),
        )?;
        let logits = dense_forward(&head_input, &self.head.weight, &self.head.bias)?;
        let trace = train.then(|| Trace {
            conv_inputs,
            conv_pre,
            pool_input_shape,
            pool_argmax: pooled.argmax,
            pooled_shape,
            bottleneck_mask,
            dense_inputs,
            dense_pre,
            bn_cache,
            bn_stats,
            head_mask,
            head_input,
        });
        Ok((logits, trace))
    }

    /// Inference-mode logits.
    pub fn logits(&self, patches: &Tensor<T>, features: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        Ok(self.run(patches, features, Mode::Inference, 0)?.0)
    }

    /// Inference-mode class probabilities, `N x K`.
    pub fn forward(&self, patches: &Tensor<T>, features: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        nn::softmax(&self.logits(patches, features)?)
    }

    /// Training-mode logits plus the trace for [`Self::backward`]. Dropout
    /// masks derive from `(seed, step)`. Running statistics are not updated
    /// here; see [`Self::commit_batch_stats`].
    pub fn forward_train(
        &self,
        patches: &Tensor<T>,
        features: Option<&Tensor<T>>,
        step: u64,
    ) -> Result<(Tensor<T>, Trace<T>)> {
        let (logits, trace) = self.run(patches, features, Mode::Train, step)?;
        Ok((logits, trace.expect("training pass records a trace")))
    }

    pub fn commit_batch_stats(&mut self, trace: &Trace<T>) {
        if let (Some(bn), Some(stats)) = (self.batchnorm.as_mut(), trace.bn_stats.as_ref()) {
            bn.update_running(stats);
        }
    }

    /// Gradients of the loss for every parameter, ordered as [`Self::params`].
    pub fn backward(&self, trace: &Trace<T>, dlogits: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let c = &self.config;
        let head = dense_backward(dlogits, &trace.head_input, &self.head.weight)?;
        let mut dh = dropout_backward(&head.input, trace.head_mask.as_deref());

        let mut dense_grads = Vec::with_capacity(self.denses.len());
        let mut bn_grads = None;
        for i in (0..self.denses.len()).rev() {
            let mut dz = relu_backward(&dh, &trace.dense_pre[i])?;
            if i == 0 {
                if let (Some(bn), Some(cache)) = (&self.batchnorm, &trace.bn_cache) {
                    let g = bn.backward(&dz, cache)?;
                    dz = g.input;
                    bn_grads = Some((g.gamma, g.beta));
                }
            }
            let g = dense_backward(&dz, &trace.dense_inputs[i], &self.denses[i].weight)?;
            dh = g.input;
            dense_grads.push((g.weight, g.bias));
        }
        dense_grads.reverse();

        let (dflat, _dfeatures) = split_columns(&dh, c.bottleneck_width())?;
        let dpooled = dflat.reshape(&trace.pooled_shape)?;
        let dpooled = dropout_backward(&dpooled, trace.bottleneck_mask.as_deref());
        let mut dx = maxpool2_backward(&dpooled, &trace.pool_argmax, &trace.pool_input_shape)?;

        let mut conv_grads = Vec::with_capacity(self.convs.len());
        for i in (0..self.convs.len()).rev() {
            let dz = relu_backward(&dx, &trace.conv_pre[i])?;
            let (input, weight) = (&trace.conv_inputs[i], &self.convs[i].weight);
            if i == 0 {
                conv_grads.push(conv2d_backward_params(&dz, input, weight, c.padding)?);
            } else {
                let g = conv2d_backward(&dz, input, weight, c.padding)?;
                dx = g.input;
                conv_grads.push((g.kernels, g.bias));
            }
        }
        conv_grads.reverse();

        let mut out = Vec::new();
        for (w, b) in conv_grads {
            out.push(w);
            out.push(b);
        }
        for (i, (w, b)) in dense_grads.into_iter().enumerate() {
            out.push(w);
            out.push(b);
            if i == 0 {
                if let Some((g, b)) = bn_grads.take() {
                    out.push(g);
                    out.push(b);
                }
            }
        }
        out.push(head.weight);
        out.push(head.bias);
        Ok(out)
    }
}
