use std::fmt::Write as _;

use crate::error::{bail, Result};
use crate::nn::Padding;

/// Architecture and training settings for [`super::FusionNet`].
///
/// Serialized as plain `key = value` lines (see [`ModelConfig::parse`]);
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_height: usize,
    pub input_width: usize,
    pub input_channels: usize,
    /// Feature maps of each convolution, applied in order, each followed by ReLU.
    pub conv_maps: Vec<usize>,
    pub kernel: usize,
    pub pool: usize,
    pub padding: Padding,
    pub dropout_after_pool: f64,
    /// Handcrafted features concatenated after the bottleneck; 0 disables fusion.
    pub fused_feature_width: usize,
    pub dense_widths: Vec<usize>,
    /// Batch normalization on the first dense layer's output.
    pub batchnorm: bool,
    pub dropout_before_final: f64,
    pub num_classes: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub rho: f64,
    pub epsilon: f64,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    /// Strip wall-clock data from reports so reruns are byte-identical.
    pub reproducible: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_height: 28,
            input_width: 28,
            input_channels: 4,
            conv_maps: vec![32, 64],
            kernel: 3,
            pool: 2,
            padding: Padding::Valid,
            dropout_after_pool: 0.25,
            fused_feature_width: 22,
            dense_widths: vec![32, 128],
            batchnorm: true,
            dropout_before_final: 0.2,
            num_classes: 4,
            batch_size: 128,
            epochs: 20,
            seed: 0,
            rho: crate::nn::adadelta::DEFAULT_RHO,
            epsilon: crate::nn::adadelta::DEFAULT_EPSILON,
            bn_momentum: crate::nn::batchnorm::DEFAULT_MOMENTUM,
            bn_epsilon: crate::nn::batchnorm::DEFAULT_EPSILON,
            reproducible: false,
        }
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| crate::Error::Config(format!("{key}: '{s}' is not an integer")))
        })
        .collect()
}

fn parse_num<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse::<V>()
        .map_err(|_| crate::Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => bail!(Config, "{key}: expected a boolean, got '{value}'"),
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ModelConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "input_height" => self.input_height = parse_num(key, value)?,
            "input_width" => self.input_width = parse_num(key, value)?,
            "input_channels" => self.input_channels = parse_num(key, value)?,
            "conv_maps" => self.conv_maps = parse_list(key, value)?,
            "kernel" => self.kernel = parse_num(key, value)?,
            "pool" => self.pool = parse_num(key, value)?,
            "padding" => {
                self.padding = Padding::parse(value).ok_or_else(|| {
                    crate::Error::Config(format!("padding: expected valid|same, got '{value}'"))
                })?
            }
            "dropout_after_pool" => self.dropout_after_pool = parse_num(key, value)?,
            "fused_feature_width" => self.fused_feature_width = parse_num(key, value)?,
            "dense_widths" => self.dense_widths = parse_list(key, value)?,
            "batchnorm" => self.batchnorm = parse_bool(key, value)?,
            "dropout_before_final" => self.dropout_before_final = parse_num(key, value)?,
            "num_classes" => self.num_classes = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "rho" => self.rho = parse_num(key, value)?,
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "bn_momentum" => self.bn_momentum = parse_num(key, value)?,
            "bn_epsilon" => self.bn_epsilon = parse_num(key, value)?,
            "reproducible" => self.reproducible = parse_bool(key, value)?,
            other => bail!(Config, "unknown configuration key '{other}'"),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(Config, "line {}: expected 'key = value', got '{raw}'", lineno + 1);
            };
            self.set(key, value)?;
        }
        self.validate()
    }

    /// Full effective configuration, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("input_height", self.input_height.to_string());
        put("input_width", self.input_width.to_string());
        put("input_channels", self.input_channels.to_string());
        put("conv_maps", join(&self.conv_maps));
        put("kernel", self.kernel.to_string());
        put("pool", self.pool.to_string());
        put("padding", self.padding.as_str().to_string());
        put("dropout_after_pool", self.dropout_after_pool.to_string());
        put("fused_feature_width", self.fused_feature_width.to_string());
        put("dense_widths", join(&self.dense_widths));
        put("batchnorm", self.batchnorm.to_string());
        put("dropout_before_final", self.dropout_before_final.to_string());
        put("num_classes", self.num_classes.to_string());
        put("batch_size", self.batch_size.to_string());
        put("epochs", self.epochs.to_string());
        put("seed", self.seed.to_string());
        put("rho", self.rho.to_string());
        put("epsilon", self.epsilon.to_string());
        put("bn_momentum", self.bn_momentum.to_string());
        put("bn_epsilon", self.bn_epsilon.to_string());
        put("reproducible", self.reproducible.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_height == 0 || self.input_width == 0 || self.input_channels == 0 {
            bail!(Config, "input dimensions must be positive");
        }
        if self.conv_maps.is_empty() || self.conv_maps.contains(&0) {
            bail!(Config, "conv_maps must list positive widths");
        }
        if self.dense_widths.is_empty() || self.dense_widths.contains(&0) {
            bail!(Config, "dense_widths must list positive widths");
        }
        if self.kernel == 0 {
            bail!(Config, "kernel must be positive");
        }
        if self.pool != 2 {
            bail!(Config, "only 2x2 max pooling is supported (pool = {})", self.pool);
        }
        for (name, rate) in [
            ("dropout_after_pool", self.dropout_after_pool),
            ("dropout_before_final", self.dropout_before_final),
        ] {
            if !(0.0..1.0).contains(&rate) {
                bail!(Config, "{name} = {rate} outside [0, 1)");
            }
        }
        if self.num_classes < 2 {
            bail!(Config, "num_classes must be at least 2");
        }
        if self.batch_size < 2 {
            bail!(Config, "batch_size must be at least 2");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) || !(self.epsilon > 0.0) {
            bail!(Config, "adadelta needs rho in (0, 1) and epsilon > 0");
        }
        if !(0.0..1.0).contains(&self.bn_momentum) || !(self.bn_epsilon > 0.0) {
            bail!(Config, "batchnorm needs momentum in [0, 1) and epsilon > 0");
        }
        let (h, w) = self.conv_output_size()?;
        if h % 2 != 0 || w % 2 != 0 || h == 0 || w == 0 {
            bail!(Config, "pool input {h}x{w} must have even positive dims");
        }
        Ok(())
    }

    /// Spatial size after the convolution stack.
    pub fn conv_output_size(&self) -> Result<(usize, usize)> {
        let (mut h, mut w) = (self.input_height, self.input_width);
        for _ in &self.conv_maps {
            match self.padding {
                Padding::Valid => {
                    if self.kernel > h || self.kernel > w {
                        bail!(Config, "kernel {} does not fit a {h}x{w} map", self.kernel);
                    }
                }
                Padding::Same => {
                    if self.kernel % 2 == 0 {
                        bail!(Config, "same padding needs an odd kernel");
                    }
                }
            }
            h = self.padding.output_size(h, self.kernel);
            w = self.padding.output_size(w, self.kernel);
        }
        Ok((h, w))
    }

    /// Width of the flattened, pooled convolution output.
    pub fn bottleneck_width(&self) -> usize {
        let (h, w) = self.conv_output_size().unwrap_or((0, 0));
        (h / 2) * (w / 2) * self.conv_maps.last().copied().unwrap_or(0)
    }

    pub fn fused_width(&self) -> usize {
        self.bottleneck_width() + self.fused_feature_width
    }
}
