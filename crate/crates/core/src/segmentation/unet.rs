//! Encoder-decoder network with skip connections, inference only.
//!
//! Layer sequence for `levels = L` and `base = B` (level `l` has `B * 2^l`
//! channels):
//!
//! - `enc{l}.conv1`, `enc{l}.conv2`: 3x3 conv + ReLU, followed by 2x2 max-pool
//!   for every level except the deepest.
//! - for `l = L-2 ..= 0`: 2x nearest upsample, `dec{l}.up` (3x3 conv, no
//!   activation), concatenate `[up, skip]`, then `dec{l}.conv1`,
//!   `dec{l}.conv2` (3x3 conv + ReLU).
//! - `head`: 1x1 conv followed by the logistic function.
//!
//! Each layer `name` owns archive entries `name.weight` (`kh x kw x in x out`)
//! and `name.bias` (`out`).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tensor::{concat_channels, conv2d, max_pool2, upsample2, Kernel, Tensor};
use super::weights::{WeightArchive, WeightEntry};
use super::SegmentationError;
use crate::raster::{ImageRaster, ProbabilityMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UNetConfig {
    pub levels: usize,
    pub base_channels: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Default for UNetConfig {
    fn default() -> Self {
        UNetConfig {
            levels: 4,
            base_channels: 16,
            in_channels: 3,
            out_channels: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub activation: Activation,
}

impl UNetConfig {
    pub fn validate(&self) -> Result<(), SegmentationError> {
        if self.levels == 0 || self.base_channels == 0 || self.in_channels == 0 {
            return Err(SegmentationError::WeightMismatch(format!(
                "invalid config {self:?}: levels and channel counts must be >= 1"
            )));
        }
        if self.out_channels != 1 {
            return Err(SegmentationError::WeightMismatch(format!(
                "out_channels must be 1, got {}",
                self.out_channels
            )));
        }
        if self.levels > 16 {
            return Err(SegmentationError::WeightMismatch(format!(
                "{} levels is not supported",
                self.levels
            )));
        }
        Ok(())
    }

    fn width_at(&self, level: usize) -> usize {
        self.base_channels << level
    }

    /// Spatial dimensions must be multiples of this.
    pub fn size_multiple(&self) -> usize {
        1 << (self.levels - 1)
    }

    /// All parameterised layers in forward order.
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let conv = |name: String, kernel, cin, cout, activation| LayerSpec {
            name,
            kernel,
            in_channels: cin,
            out_channels: cout,
            activation,
        };
        let mut specs = Vec::new();
        for l in 0..self.levels {
            let cin = if l == 0 {
                self.in_channels
            } else {
                self.width_at(l - 1)
            };
            let c = self.width_at(l);
            specs.push(conv(format!("enc{l}.conv1"), 3, cin, c, Activation::Relu));
            specs.push(conv(format!("enc{l}.conv2"), 3, c, c, Activation::Relu));
        }
        for l in (0..self.levels - 1).rev() {
            let c = self.width_at(l);
            let deeper = self.width_at(l + 1);
            specs.push(conv(format!("dec{l}.up"), 3, deeper, c, Activation::Identity));
            specs.push(conv(format!("dec{l}.conv1"), 3, 2 * c, c, Activation::Relu));
            specs.push(conv(format!("dec{l}.conv2"), 3, c, c, Activation::Relu));
        }
        specs.push(conv(
            "head".into(),
            1,
            self.base_channels,
            self.out_channels,
            Activation::Logistic,
        ));
        specs
    }

    /// Recover the configuration from archive entry shapes.
    pub fn infer(archive: &WeightArchive) -> Result<Self, SegmentationError> {
        let first = archive.get("enc0.conv1.weight").ok_or_else(|| {
            SegmentationError::WeightMismatch("archive has no enc0.conv1.weight".into())
        })?;
        let &[_, _, in_channels, base_channels] = first.shape() else {
            return Err(SegmentationError::WeightMismatch(format!(
                "enc0.conv1.weight has shape {:?}",
                first.shape()
            )));
        };
        let levels = (0..)
            .take_while(|l| archive.get(&format!("enc{l}.conv1.weight")).is_some())
            .count();
        let cfg = UNetConfig {
            levels,
            base_channels,
            in_channels,
            out_channels: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Archive with every parameter set to zero.
    pub fn zero_weights(&self) -> WeightArchive {
        self.build_archive(|_, n| vec![0.0; n])
    }

    /// He-normal kernels and zero biases from a fixed seed.
    pub fn random_weights(&self, seed: u64) -> WeightArchive {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.build_archive(|spec, n| {
            let fan_in = (spec.kernel * spec.kernel * spec.in_channels) as f32;
            let dist = Normal::new(0.0f32, (2.0 / fan_in).sqrt()).expect("positive std");
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        })
    }

    fn build_archive(&self, mut kernel_values: impl FnMut(&LayerSpec, usize) -> Vec<f32>) -> WeightArchive {
        let mut entries = Vec::new();
        for s in self.layer_specs() {
            let shape = vec![s.kernel, s.kernel, s.in_channels, s.out_channels];
            let n = shape.iter().product();
            let values = kernel_values(&s, n);
            entries.push(
                WeightEntry::new(format!("{}.weight", s.name), shape, values).expect("valid shape"),
            );
            entries.push(
                WeightEntry::new(format!("{}.bias", s.name), vec![s.out_channels], vec![0.0; s.out_channels])
                    .expect("valid shape"),
            );
        }
        WeightArchive::new(entries).expect("unique layer names")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub spec: LayerSpec,
    pub kernel: Kernel,
    pub bias: Vec<f32>,
}

impl ConvLayer {
    fn apply(&self, x: &Tensor) -> Result<Tensor, SegmentationError> {
        let mut y = conv2d(x, &self.kernel, 1, self.spec.kernel / 2)?;
        y.add_channel_bias(&self.bias);
        match self.spec.activation {
            Activation::Identity => {}
            Activation::Relu => y.map_inplace(|v| v.max(0.0)),
            Activation::Logistic => y.map_inplace(|v| 1.0 / (1.0 + (-v).exp())),
        }
        Ok(y)
    }

    fn zeroed(&self) -> ConvLayer {
        let [kh, kw, cin, cout] = self.kernel.shape();
        ConvLayer {
            spec: self.spec.clone(),
            kernel: Kernel::new(kh, kw, cin, cout, vec![0.0; kh * kw * cin * cout]).expect("same shape"),
            bias: vec![0.0; self.bias.len()],
        }
    }
}

/// A UNet with its parameters bound.
#[derive(Debug, Clone, PartialEq)]
pub struct UNet {
    config: UNetConfig,
    layers: Vec<ConvLayer>,
}

impl UNet {
    /// Bind `weights` to the layer sequence of `config`. Every expected entry
    /// must be present with the exact shape, and no others may exist.
    pub fn new(config: UNetConfig, weights: &WeightArchive) -> Result<Self, SegmentationError> {
        config.validate()?;
        let specs = config.layer_specs();
        if weights.len() != 2 * specs.len() {
            return Err(SegmentationError::WeightMismatch(format!(
                "archive has {} entries, config expects {}",
                weights.len(),
                2 * specs.len()
            )));
        }
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let lookup = |suffix: &str, shape: &[usize]| {
                let key = format!("{}.{suffix}", spec.name);
                let e = weights
                    .get(&key)
                    .ok_or_else(|| SegmentationError::WeightMismatch(format!("missing entry {key}")))?;
                if e.shape() != shape {
                    return Err(SegmentationError::WeightMismatch(format!(
                        "{key} has shape {:?}, expected {shape:?}",
                        e.shape()
                    )));
                }
                Ok(e.values().to_vec())
            };
            let k = spec.kernel;
            let w = lookup("weight", &[k, k, spec.in_channels, spec.out_channels])?;
            let bias = lookup("bias", &[spec.out_channels])?;
            let kernel = Kernel::new(k, k, spec.in_channels, spec.out_channels, w)?;
            layers.push(ConvLayer { spec, kernel, bias });
        }
        Ok(UNet { config, layers })
    }

    pub fn config(&self) -> &UNetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn layer_names(&self) -> Vec<String> {
        self.layers.iter().map(|l| l.spec.name.clone()).collect()
    }

    /// Copy with the named layer's kernel and bias set to zero.
    pub fn with_layer_zeroed(&self, name: &str) -> Result<UNet, SegmentationError> {
        let idx = self
            .layers
            .iter()
            .position(|l| l.spec.name == name)
            .ok_or_else(|| SegmentationError::UnknownLayer(name.to_owned()))?;
        let mut out = self.clone();
        out.layers[idx] = self.layers[idx].zeroed();
        Ok(out)
    }

    /// Export the bound parameters back into an archive.
    pub fn to_archive(&self) -> WeightArchive {
        let mut entries = Vec::new();
        for l in &self.layers {
            entries.push(
                WeightEntry::new(format!("{}.weight", l.spec.name), l.kernel.shape().to_vec(), l.kernel.data().to_vec())
                    .expect("validated on load"),
            );
            entries.push(
                WeightEntry::new(format!("{}.bias", l.spec.name), vec![l.bias.len()], l.bias.clone())
                    .expect("validated on load"),
            );
        }
        WeightArchive::new(entries).expect("unique layer names")
    }

    pub fn predict(&self, img: &ImageRaster) -> Result<ProbabilityMap, SegmentationError> {
        self.forward_observed(img, |_, _| {})
    }

    /// Forward pass invoking `observe(layer_name, output)` after every layer's
    /// activation, in forward order.
    pub fn forward_observed(
        &self,
        img: &ImageRaster,
        mut observe: impl FnMut(&str, &Tensor),
    ) -> Result<ProbabilityMap, SegmentationError> {
        let x = self.input_tensor(img)?;
        let mut layers = self.layers.iter();
        let mut run = |x: &Tensor| -> Result<Tensor, SegmentationError> {
            let layer = layers.next().expect("layer sequence matches config");
            let y = layer.apply(x)?;
            observe(&layer.spec.name, &y);
            Ok(y)
        };

        let levels = self.config.levels;
        let mut skips = Vec::with_capacity(levels);
        let mut cur = x;
        for l in 0..levels {
            let a = run(&cur)?;
            let b = run(&a)?;
            if l + 1 < levels {
                cur = max_pool2(&b);
                skips.push(b);
            } else {
                cur = b;
            }
        }
        for _ in (0..levels - 1).rev() {
            let skip = skips.pop().expect("one skip per pooled level");
            let up = run(&upsample2(&cur))?;
            let merged = concat_channels(&up, &skip)?;
            let a = run(&merged)?;
            cur = run(&a)?;
        }
        let out = run(&cur)?;
        let (h, w) = (out.height(), out.width());
        let values = out.into_data().into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(ProbabilityMap::new(w, h, values)?)
    }

    fn input_tensor(&self, img: &ImageRaster) -> Result<Tensor, SegmentationError> {
        let m = self.config.size_multiple();
        let (h, w) = (img.height(), img.width());
        if h % m != 0 || w % m != 0 {
            return Err(SegmentationError::BadDimensions(format!(
                "{w}x{h} input is not divisible by {m}"
            )));
        }
        let cin = self.config.in_channels;
        if img.color_channels() < cin {
            return Err(SegmentationError::BadDimensions(format!(
                "input has {} colour channels, network expects {cin}",
                img.color_channels()
            )));
        }
        let mut data = Vec::with_capacity(h * w * cin);
        for y in 0..h {
            for x in 0..w {
                for c in 0..cin {
                    data.push(img.get_unit(y, x, c));
                }
            }
        }
        Tensor::new(h, w, cin, data)
    }
}
