//! Weight-carrying model: deterministic init, forward, and hand-derived
//! backward over the whole composition.

use crate::error::{Error, Result};
use crate::ops::{
    batchnorm_backward, batchnorm_forward, bce_with_logits_backward, bce_with_logits_loss,
    conv1d_backward, conv1d_forward, dropout_backward, dropout_forward, global_avg_pool,
    global_avg_pool_backward, linear_backward, linear_forward, maxpool1d_backward,
    maxpool1d_forward, relu_backward, relu_forward, BatchNormCache, BatchNormState, BnMode,
    ConvParams, DropoutMask, GradCheckEntry, GradCheckReport, LinearParams, MaxPoolCache,
};
use crate::resnet::{NetworkSpec, ScaleConfig, ShortcutKind, INPUT_LEADS, STEM_POOL};
use crate::rng::named_stream;
use crate::tensor::Tensor;
use rand_chacha::ChaCha8Rng;

const BN_MOMENTUM: f64 = 0.1;
const BN_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone)]
struct Stem {
    conv: ConvParams,
    bn: BatchNormState,
}

#[derive(Debug, Clone)]
enum Shortcut {
    Identity,
    Pool,
    PoolConv(ConvParams),
}

#[derive(Debug, Clone)]
struct ResidualLayer {
    conv1: ConvParams,
    bn1: BatchNormState,
    conv2: ConvParams,
    bn2: BatchNormState,
    shortcut: Shortcut,
}

#[derive(Debug, Clone)]
struct Head {
    fc: LinearParams,
}

/// A built network instance.
#[derive(Debug, Clone)]
pub struct ResNet1d {
    spec: NetworkSpec,
    stem: Stem,
    blocks: Vec<Vec<ResidualLayer>>,
    head: Head,
    /// Probability of zeroing a GAP feature during training (0 disables).
    pub dropout_rate: f64,
    seed: u64,
}

/// Kaiming fan-in init: Normal(0, sqrt(2 / fan_in)), one named stream per
/// tensor so init does not depend on construction order.
fn kaiming_conv(name: &str, seed: u64, kernel: usize, c_in: usize, c_out: usize) -> Tensor {
    let std = (2.0 / (kernel * c_in) as f64).sqrt();
    let mut rng = named_stream(seed, name);
    Tensor::randn(&[kernel, c_in, c_out], std, &mut rng)
}

/// Builds the network for a scale triple with deterministic weights.
pub fn build_network(scale: ScaleConfig, num_labels: usize, seed: u64) -> Result<ResNet1d> {
    let spec = NetworkSpec::new(scale, num_labels)?;
    ResNet1d::from_spec(spec, seed)
}

impl ResNet1d {
    pub fn from_spec(spec: NetworkSpec, seed: u64) -> Result<ResNet1d> {
        let k = spec.scale.kernel;
        let c = spec.stem_out_channels;
        let stem = Stem {
            conv: ConvParams::new(
                k,
                2,
                k / 2,
                INPUT_LEADS,
                c,
                kaiming_conv("stem.conv.weight", seed, k, INPUT_LEADS, c),
            )?,
            bn: BatchNormState::new(c, BN_MOMENTUM, BN_EPSILON)?,
        };

        let mut blocks = Vec::with_capacity(spec.blocks.len());
        for (bi, block_spec) in spec.blocks.iter().enumerate() {
            let mut layers = Vec::with_capacity(block_spec.len());
            for (li, ls) in block_spec.iter().enumerate() {
                let prefix = format!("blocks.{bi}.layers.{li}");
                let conv1 = ConvParams::new(
                    k,
                    ls.stride,
                    k / 2,
                    ls.in_channels,
                    ls.out_channels,
                    kaiming_conv(&format!("{prefix}.conv1.weight"), seed, k, ls.in_channels, ls.out_channels),
                )?;
                let conv2 = ConvParams::new(
                    k,
                    1,
                    k / 2,
                    ls.out_channels,
                    ls.out_channels,
                    kaiming_conv(&format!("{prefix}.conv2.weight"), seed, k, ls.out_channels, ls.out_channels),
                )?;
                let shortcut = match ls.shortcut {
                    ShortcutKind::Identity => Shortcut::Identity,
                    ShortcutKind::PoolOnly => Shortcut::Pool,
                    ShortcutKind::PoolConv => Shortcut::PoolConv(ConvParams::new(
                        1,
                        1,
                        0,
                        ls.in_channels,
                        ls.out_channels,
                        kaiming_conv(&format!("{prefix}.shortcut.weight"), seed, 1, ls.in_channels, ls.out_channels),
                    )?),
                };
                layers.push(ResidualLayer {
                    conv1,
                    bn1: BatchNormState::new(ls.out_channels, BN_MOMENTUM, BN_EPSILON)?,
                    conv2,
                    bn2: BatchNormState::new(ls.out_channels, BN_MOMENTUM, BN_EPSILON)?,
                    shortcut,
                });
            }
            blocks.push(layers);
        }

        let in_f = spec.head_in_features;
        let std = (2.0 / in_f as f64).sqrt();
        let mut rng = named_stream(seed, "head.fc.weight");
        let head = Head {
            fc: LinearParams::new(
                Tensor::randn(&[in_f, num_labels_of(&spec)], std, &mut rng),
                Tensor::zeros(&[num_labels_of(&spec)]),
            )?,
        };

        Ok(ResNet1d { spec, stem, blocks, head, dropout_rate: 0.0, seed })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn num_labels(&self) -> usize {
        self.spec.num_labels
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Visits every learnable tensor in canonical (checkpoint) order.
    pub fn visit_params(&self, f: &mut dyn FnMut(&str, &str, &Tensor)) {
        f("stem.conv.weight", "conv", &self.stem.conv.weights);
        f("stem.bn.gamma", "batchnorm", &self.stem.bn.gamma);
        f("stem.bn.beta", "batchnorm", &self.stem.bn.beta);
        for (bi, block) in self.blocks.iter().enumerate() {
            for (li, layer) in block.iter().enumerate() {
                let p = format!("blocks.{bi}.layers.{li}");
                f(&format!("{p}.conv1.weight"), "conv", &layer.conv1.weights);
                f(&format!("{p}.bn1.gamma"), "batchnorm", &layer.bn1.gamma);
                f(&format!("{p}.bn1.beta"), "batchnorm", &layer.bn1.beta);
                f(&format!("{p}.conv2.weight"), "conv", &layer.conv2.weights);
                f(&format!("{p}.bn2.gamma"), "batchnorm", &layer.bn2.gamma);
                f(&format!("{p}.bn2.beta"), "batchnorm", &layer.bn2.beta);
                if let Shortcut::PoolConv(sc) = &layer.shortcut {
                    f(&format!("{p}.shortcut.weight"), "conv", &sc.weights);
                }
            }
        }
        f("head.fc.weight", "fc", &self.head.fc.weights);
        f("head.fc.bias", "fc", &self.head.fc.bias);
    }

    /// Mutable counterpart of [`Self::visit_params`], same order.
    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &str, &mut Tensor)) {
        f("stem.conv.weight", "conv", &mut self.stem.conv.weights);
        f("stem.bn.gamma", "batchnorm", &mut self.stem.bn.gamma);
        f("stem.bn.beta", "batchnorm", &mut self.stem.bn.beta);
        for (bi, block) in self.blocks.iter_mut().enumerate() {
            for (li, layer) in block.iter_mut().enumerate() {
                let p = format!("blocks.{bi}.layers.{li}");
                f(&format!("{p}.conv1.weight"), "conv", &mut layer.conv1.weights);
                f(&format!("{p}.bn1.gamma"), "batchnorm", &mut layer.bn1.gamma);
                f(&format!("{p}.bn1.beta"), "batchnorm", &mut layer.bn1.beta);
                f(&format!("{p}.conv2.weight"), "conv", &mut layer.conv2.weights);
                f(&format!("{p}.bn2.gamma"), "batchnorm", &mut layer.bn2.gamma);
                f(&format!("{p}.bn2.beta"), "batchnorm", &mut layer.bn2.beta);
                if let Shortcut::PoolConv(sc) = &mut layer.shortcut {
                    f(&format!("{p}.shortcut.weight"), "conv", &mut sc.weights);
                }
            }
        }
        f("head.fc.weight", "fc", &mut self.head.fc.weights);
        f("head.fc.bias", "fc", &mut self.head.fc.bias);
    }

    /// Visits BN running statistics (non-learnable buffers), canonical order.
    pub fn visit_buffers(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("stem.bn.running_mean", &self.stem.bn.running_mean);
        f("stem.bn.running_var", &self.stem.bn.running_var);
        for (bi, block) in self.blocks.iter().enumerate() {
            for (li, layer) in block.iter().enumerate() {
                let p = format!("blocks.{bi}.layers.{li}");
                f(&format!("{p}.bn1.running_mean"), &layer.bn1.running_mean);
                f(&format!("{p}.bn1.running_var"), &layer.bn1.running_var);
                f(&format!("{p}.bn2.running_mean"), &layer.bn2.running_mean);
                f(&format!("{p}.bn2.running_var"), &layer.bn2.running_var);
            }
        }
    }

    pub fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("stem.bn.running_mean", &mut self.stem.bn.running_mean);
        f("stem.bn.running_var", &mut self.stem.bn.running_var);
        for (bi, block) in self.blocks.iter_mut().enumerate() {
            for (li, layer) in block.iter_mut().enumerate() {
                let p = format!("blocks.{bi}.layers.{li}");
                f(&format!("{p}.bn1.running_mean"), &mut layer.bn1.running_mean);
                f(&format!("{p}.bn1.running_var"), &mut layer.bn1.running_var);
                f(&format!("{p}.bn2.running_mean"), &mut layer.bn2.running_mean);
                f(&format!("{p}.bn2.running_var"), &mut layer.bn2.running_var);
            }
        }
    }

    /// Overwrites every conv/FC weight with a constant; used by the
    /// receptive-field probe, which needs strictly positive weights.
    pub fn set_all_weights(&mut self, value: f64) {
        self.visit_params_mut(&mut |_, kind, t| {
            if kind == "conv" || kind == "fc" {
                t.fill(value);
            }
        });
    }

    /// Stem + residual blocks only; the `[batch, 8C, L]` pre-GAP features.
    pub fn forward_features(
        &mut self,
        x: &Tensor,
        mode: BnMode,
    ) -> Result<(Tensor, FeatureCache)> {
        if x.rank() != 3 || x.dim(1) != INPUT_LEADS {
            return Err(Error::ShapeMismatch {
                op: "ResNet1d::forward",
                axis: "leads",
                expected: INPUT_LEADS,
                actual: if x.rank() == 3 { x.dim(1) } else { 0 },
            });
        }
        // stem
        let conv_out = conv1d_forward(x, &self.stem.conv)?;
        let (bn_out, bn_cache) = batchnorm_forward(&conv_out, &mut self.stem.bn, mode)?;
        let relu_out = relu_forward(&bn_out);
        let (pk, ps, pp) = STEM_POOL;
        let (pooled, pool_cache) = maxpool1d_forward(&relu_out, pk, ps, pp)?;
        let stem_cache = StemCache {
            x_in: x.clone(),
            bn: bn_cache,
            pre_relu: bn_out,
            pool: pool_cache,
        };

        let mut cur = pooled;
        let mut layer_caches: Vec<LayerCache> = Vec::new();
        for block in &mut self.blocks {
            for layer in block.iter_mut() {
                let (out, cache) = layer_forward(layer, &cur, mode)?;
                layer_caches.push(cache);
                cur = out;
            }
        }
        Ok((cur, FeatureCache { stem: stem_cache, layers: layer_caches }))
    }

    /// Full forward pass to logits.
    ///
    /// `rng` feeds head dropout and is only consulted in training mode with
    /// a non-zero dropout rate.
    pub fn forward(
        &mut self,
        x: &Tensor,
        mode: BnMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Tensor, ModelCache)> {
        let (features, feat_cache) = self.forward_features(x, mode)?;
        let gap = global_avg_pool(&features)?;
        let keep = 1.0 - self.dropout_rate;
        let (dropped, mask) = dropout_forward(&gap, keep, mode == BnMode::Training, rng)?;
        let logits = linear_forward(&dropped, &self.head.fc)?;
        let cache = ModelCache {
            features_len: features.dim(2),
            feat: feat_cache,
            gap_in_channels: features.dim(1),
            dropout_mask: mask,
            fc_in: dropped,
        };
        Ok((logits, cache))
    }

    /// Convenience: logits without keeping caches (inference).
    pub fn infer(&mut self, x: &Tensor) -> Result<Tensor> {
        let mut rng = named_stream(0, "unused-inference");
        Ok(self.forward(x, BnMode::Inference, &mut rng)?.0)
    }

    /// Backward from logits gradient; returns gradients aligned with
    /// [`Self::visit_params`] order.
    pub fn backward(&self, grad_logits: &Tensor, cache: &ModelCache) -> Result<Gradients> {
        let (g_fc_in, g_fc_w, g_fc_b) = linear_backward(grad_logits, &cache.fc_in, &self.head.fc)?;
        let g_gap = dropout_backward(&g_fc_in, cache.dropout_mask.as_ref());
        let mut g = global_avg_pool_backward(&g_gap, cache.features_len)?;
        debug_assert_eq!(g.dim(1), cache.gap_in_channels);

        // residual layers in reverse
        let mut layer_grads: Vec<LayerGrads> = Vec::with_capacity(cache.feat.layers.len());
        let flat_layers: Vec<&ResidualLayer> = self.blocks.iter().flatten().collect();
        for (layer, lcache) in flat_layers.iter().zip(&cache.feat.layers).rev() {
            let (g_in, grads) = layer_backward(layer, lcache, &g)?;
            layer_grads.push(grads);
            g = g_in;
        }
        layer_grads.reverse();

        // stem
        let sc = &cache.feat.stem;
        let g_pool_in = maxpool1d_backward(&g, &sc.pool)?;
        let g_bn_out = relu_backward(&g_pool_in, &sc.pre_relu);
        let (g_conv_out, g_gamma, g_beta) = batchnorm_backward(&g_bn_out, &sc.bn)?;
        let (_, g_stem_w) = conv1d_backward(&g_conv_out, &sc.x_in, &self.stem.conv)?;

        // assemble in canonical order
        let mut tensors = Vec::new();
        tensors.push(g_stem_w);
        tensors.push(g_gamma);
        tensors.push(g_beta);
        for lg in layer_grads {
            tensors.push(lg.conv1);
            tensors.push(lg.bn1_gamma);
            tensors.push(lg.bn1_beta);
            tensors.push(lg.conv2);
            tensors.push(lg.bn2_gamma);
            tensors.push(lg.bn2_beta);
            if let Some(sc_w) = lg.shortcut {
                tensors.push(sc_w);
            }
        }
        tensors.push(g_fc_w);
        tensors.push(g_fc_b);
        Ok(Gradients { tensors })
    }

    /// Forward + BCE loss + backward in one call; the training-loop
    /// workhorse. Returns `(loss, gradients)`.
    pub fn loss_and_gradients(
        &mut self,
        x: &Tensor,
        targets: &Tensor,
        mode: BnMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Gradients)> {
        let (logits, cache) = self.forward(x, mode, rng)?;
        logits.check_finite("logits")?;
        let loss = bce_with_logits_loss(&logits, targets)?;
        let grad_logits = bce_with_logits_backward(&logits, targets)?;
        let grads = self.backward(&grad_logits, &cache)?;
        Ok((loss, grads))
    }
}

fn num_labels_of(spec: &NetworkSpec) -> usize {
    spec.num_labels
}

/// Snapshot of BN running statistics, used to restore state after probing.
fn snapshot_buffers(model: &ResNet1d) -> Vec<Tensor> {
    let mut out = Vec::new();
    model.visit_buffers(&mut |_, t| out.push(t.clone()));
    out
}

fn restore_buffers(model: &mut ResNet1d, saved: &[Tensor]) {
    let mut idx = 0;
    model.visit_buffers_mut(&mut |_, t| {
        *t = saved[idx].clone();
        idx += 1;
    });
}

/// Parameter gradients in [`ResNet1d::visit_params`] order.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn check_finite(&self) -> Result<()> {
        for t in &self.tensors {
            t.check_finite("gradients")?;
        }
        Ok(())
    }
}

#[derive(Debug)]
struct StemCache {
    x_in: Tensor,
    bn: BatchNormCache,
    pre_relu: Tensor,
    pool: MaxPoolCache,
}

#[derive(Debug)]
struct LayerCache {
    x_in: Tensor,
    bn1: BatchNormCache,
    pre_relu1: Tensor,
    conv2_in: Tensor,
    bn2: BatchNormCache,
    /// Skip join result before the final activation.
    pre_act: Tensor,
    /// Shortcut subsample cache (`d == 1` layers).
    pool: Option<MaxPoolCache>,
    /// Input to the shortcut 1x1 conv (blocks 2-4, `d == 1`).
    pool_out: Option<Tensor>,
}

#[derive(Debug)]
pub struct FeatureCache {
    stem: StemCache,
    layers: Vec<LayerCache>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug)]
pub struct ModelCache {
    feat: FeatureCache,
    features_len: usize,
    gap_in_channels: usize,
    dropout_mask: Option<DropoutMask>,
    fc_in: Tensor,
}

struct LayerGrads {
    conv1: Tensor,
    bn1_gamma: Tensor,
    bn1_beta: Tensor,
    conv2: Tensor,
    bn2_gamma: Tensor,
    bn2_beta: Tensor,
    shortcut: Option<Tensor>,
}

/// One residual layer: `ReLU(BN2(Conv2(ReLU(BN1(Conv1(x))))) + shortcut(x))`.
/// The skip joins after the second batch normalization, before the final
/// activation.
fn layer_forward(layer: &mut ResidualLayer, x: &Tensor, mode: BnMode) -> Result<(Tensor, LayerCache)> {
    let c1 = conv1d_forward(x, &layer.conv1)?;
    let (b1, bn1_cache) = batchnorm_forward(&c1, &mut layer.bn1, mode)?;
    let r1 = relu_forward(&b1);
    let c2 = conv1d_forward(&r1, &layer.conv2)?;
    let (b2, bn2_cache) = batchnorm_forward(&c2, &mut layer.bn2, mode)?;

    let (pre_act, pool_cache, pool_out) = match &layer.shortcut {
        Shortcut::Identity => {
            let mut sum = b2;
            sum.axpy(1.0, x)?;
            (sum, None, None)
        }
        Shortcut::Pool => {
            let (pooled, pc) = maxpool1d_forward(x, 1, 2, 0)?;
            let mut sum = b2;
            sum.axpy(1.0, &pooled)?;
            (sum, Some(pc), None)
        }
        Shortcut::PoolConv(sc) => {
            let (pooled, pc) = maxpool1d_forward(x, 1, 2, 0)?;
            let projected = conv1d_forward(&pooled, sc)?;
            let mut sum = b2;
            sum.axpy(1.0, &projected)?;
            (sum, Some(pc), Some(pooled))
        }
    };
    let out = relu_forward(&pre_act);
    pre_act.check_finite("residual layer pre-activation")?;

    let cache = LayerCache {
        x_in: x.clone(),
        bn1: bn1_cache,
        pre_relu1: b1,
        conv2_in: r1,
        bn2: bn2_cache,
        pre_act,
        pool: pool_cache,
        pool_out,
    };
    Ok((out, cache))
}

fn layer_backward(layer: &ResidualLayer, cache: &LayerCache, grad_out: &Tensor) -> Result<(Tensor, LayerGrads)> {
    // through the final activation; both branches receive this gradient
    let g_pre = relu_backward(grad_out, &cache.pre_act);

    // main path
    let (g_c2, g_bn2_gamma, g_bn2_beta) = batchnorm_backward(&g_pre, &cache.bn2)?;
    let (g_r1, g_conv2_w) = conv1d_backward(&g_c2, &cache.conv2_in, &layer.conv2)?;
    let g_b1 = relu_backward(&g_r1, &cache.pre_relu1);
    let (g_c1, g_bn1_gamma, g_bn1_beta) = batchnorm_backward(&g_b1, &cache.bn1)?;
    let (mut g_x, g_conv1_w) = conv1d_backward(&g_c1, &cache.x_in, &layer.conv1)?;

    // shortcut path
    let mut g_shortcut_w = None;
    match &layer.shortcut {
        Shortcut::Identity => {
            g_x.axpy(1.0, &g_pre)?;
        }
        Shortcut::Pool => {
            let pc = cache.pool.as_ref().expect("pool cache for PoolOnly shortcut");
            let g_pool = maxpool1d_backward(&g_pre, pc)?;
            g_x.axpy(1.0, &g_pool)?;
        }
        Shortcut::PoolConv(sc) => {
            let pooled = cache.pool_out.as_ref().expect("pool output for PoolConv shortcut");
            let (g_pooled, g_sc_w) = conv1d_backward(&g_pre, pooled, sc)?;
            let pc = cache.pool.as_ref().expect("pool cache for PoolConv shortcut");
            let g_pool = maxpool1d_backward(&g_pooled, pc)?;
            g_x.axpy(1.0, &g_pool)?;
            g_shortcut_w = Some(g_sc_w);
        }
    }

    let grads = LayerGrads {
        conv1: g_conv1_w,
        bn1_gamma: g_bn1_gamma,
        bn1_beta: g_bn1_beta,
        conv2: g_conv2_w,
        bn2_gamma: g_bn2_gamma,
        bn2_beta: g_bn2_beta,
        shortcut: g_shortcut_w,
    };
    Ok((g_x, grads))
}

/// Central finite-difference check of every parameter against the analytic
/// backward pass.
///
/// The objective is the inner product of the logits with a fixed random
/// probe, which exercises the whole Jacobian while keeping gradient
/// magnitudes well above the floating-point noise floor of the forward
/// pass (a mean-reduced loss shrinks them below it for deep stacks). The
/// loss kernels carry their own finite-difference tests.
pub fn gradient_check_model(model: &mut ResNet1d, x: &Tensor, h: f64) -> Result<GradCheckReport> {
    // Dropout off so the objective is deterministic; BN stays in training
    // mode (its batch-statistics dependency is part of the check). Running
    // stats drift across probe evaluations but never enter the objective;
    // they are restored afterwards.
    let saved_dropout = model.dropout_rate;
    let saved_buffers = snapshot_buffers(model);
    model.dropout_rate = 0.0;

    let mut rng = named_stream(0, "gradcheck");
    let (logits, cache) = model.forward(x, BnMode::Training, &mut rng)?;
    let probe = {
        let mut pr = named_stream(0, "gradcheck-probe");
        Tensor::randn(logits.shape(), 1.0, &mut pr)
    };
    let analytic = model.backward(&probe, &cache)?;

    // collect parameter names/kinds/sizes in canonical order
    let mut names: Vec<(String, String, usize)> = Vec::new();
    model.visit_params(&mut |name, kind, t| {
        names.push((name.to_string(), kind.to_string(), t.len()));
    });

    // Error floor for the relative comparison. Two f64 effects bound what a
    // finite difference can certify: the forward pass carries rounding noise
    // of order eps * |objective| which corrupts small steps, and ReLU /
    // max-pool kinks corrupt large steps. Each coordinate therefore takes
    // the best agreement across a step ladder, and coordinates whose
    // gradient is too small to rise above the noise at any step are judged
    // against an absolute floor instead of a pure ratio.
    let grad_scale = analytic
        .tensors
        .iter()
        .flat_map(|t| t.data().iter())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-3 * grad_scale;
    // mid steps first so the early exit usually fires on the second probe
    let ladder = [10.0 * h, h, 100.0 * h, h / 10.0, h / 100.0];

    let mut entries = Vec::with_capacity(names.len());
    for (pi, (name, kind, len)) in names.iter().enumerate() {
        let mut worst = 0.0f64;
        for j in 0..*len {
            let mut eval_at = |delta: f64| -> Result<f64> {
                let mut idx = 0;
                model.visit_params_mut(&mut |_, _, t| {
                    if idx == pi {
                        t.data_mut()[j] += delta;
                    }
                    idx += 1;
                });
                let mut r = named_stream(0, "gradcheck");
                let (logits, _) = model.forward(x, BnMode::Training, &mut r)?;
                let mut idx = 0;
                model.visit_params_mut(&mut |_, _, t| {
                    if idx == pi {
                        t.data_mut()[j] -= delta;
                    }
                    idx += 1;
                });
                Ok(logits.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum())
            };
            let analytic_v = analytic.tensors[pi].data()[j];
            let mut best = f64::INFINITY;
            for step in ladder {
                let plus = eval_at(step)?;
                let minus = eval_at(-step)?;
                let numeric = (plus - minus) / (2.0 * step);
                let rel = (analytic_v - numeric).abs() / analytic_v.abs().max(numeric.abs()).max(floor);
                best = best.min(rel);
                if best < 1e-6 {
                    break;
                }
            }
            worst = worst.max(best);
        }
        entries.push(GradCheckEntry { name: name.clone(), kind: kind.clone(), max_rel_error: worst });
    }

    model.dropout_rate = saved_dropout;
    restore_buffers(model, &saved_buffers);
    Ok(GradCheckReport { entries })
}
