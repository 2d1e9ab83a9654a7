//! The scaled 1D residual network family.
//!
//! A [`ScaleConfig`] `(D, C, K)` fully determines one network: a stem block
//! (conv + BN + ReLU + max pool), four residual blocks of `D` two-conv
//! layers each with channel widths `C, 2C, 4C, 8C`, and a GAP → dropout →
//! FC head. [`NetworkSpec`] is the weight-free structural description from
//! which parameter counts, output shapes, and receptive fields are
//! computed; [`model::ResNet1d`] instantiates it with weights.

mod checkpoint;
mod model;
mod probe;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use model::{build_network, gradient_check_model, Gradients, ModelCache, ResNet1d};
pub use probe::probe_receptive_field;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Number of ECG leads the network consumes.
pub const INPUT_LEADS: usize = 12;
/// Residual blocks in the family (fixed by the architecture).
pub const NUM_BLOCKS: usize = 4;
/// Stem max pool: kernel 3, stride 2, padding 1.
pub const STEM_POOL: (usize, usize, usize) = (3, 2, 1);

/// The scaling triple: residual-layer depth per block, base channel width,
/// and convolution kernel size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScaleConfig {
    pub depth: usize,
    pub channels: usize,
    pub kernel: usize,
}

impl ScaleConfig {
    pub fn new(depth: usize, channels: usize, kernel: usize) -> Result<Self> {
        if depth < 1 {
            return Err(Error::InvalidConfig("depth D must be >= 1".into()));
        }
        if channels < 1 {
            return Err(Error::InvalidConfig("channels C must be >= 1".into()));
        }
        if kernel < 3 || kernel % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "kernel K must be an odd integer >= 3, got {kernel}"
            )));
        }
        Ok(ScaleConfig { depth, channels, kernel })
    }
}

impl fmt::Display for ScaleConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D{}-C{}-K{}", self.depth, self.channels, self.kernel)
    }
}

impl FromStr for ScaleConfig {
    type Err = Error;

    /// Parses the grid notation `D{d}-C{c}-K{k}`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('-').collect();
        let bad = || Error::Parse(format!("expected scale notation like D4-C128-K3, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let field = |part: &str, tag: char| -> Result<usize> {
            part.strip_prefix(tag)
                .ok_or_else(bad)?
                .parse::<usize>()
                .map_err(|_| bad())
        };
        ScaleConfig::new(field(parts[0], 'D')?, field(parts[1], 'C')?, field(parts[2], 'K')?)
    }
}

/// How a residual layer joins its input to the main path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShortcutKind {
    /// `d > 1`: plain skip, no resampling.
    Identity,
    /// Block 1, `d = 1`: stride-2 subsampling only (channels already match).
    PoolOnly,
    /// Blocks 2-4, `d = 1`: stride-2 subsampling then a 1x1 conv doubling
    /// the channels.
    PoolConv,
}

/// Structural description of one residual layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerSpec {
    /// Block index `n` in `1..=4`.
    pub block_index: usize,
    /// Layer index `d` in `1..=D`.
    pub layer_index: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Stride of the first conv (2 when `d == 1`, else 1).
    pub stride: usize,
    pub shortcut: ShortcutKind,
}

/// Weight-free description of the whole network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub scale: ScaleConfig,
    pub num_labels: usize,
    /// Stem conv: 12 -> C, kernel K, stride 2, padding K/2.
    pub stem_out_channels: usize,
    pub blocks: Vec<Vec<LayerSpec>>,
    /// FC input width; always `8 * C`.
    pub head_in_features: usize,
}

impl NetworkSpec {
    pub fn new(scale: ScaleConfig, num_labels: usize) -> Result<Self> {
        if num_labels < 1 {
            return Err(Error::InvalidConfig("num_labels must be >= 1".into()));
        }
        let c = scale.channels;
        let mut blocks = Vec::with_capacity(NUM_BLOCKS);
        for n in 1..=NUM_BLOCKS {
            // widths along blocks: C, 2C, 4C, 8C
            let out_ch = c << (n - 1);
            let mut layers = Vec::with_capacity(scale.depth);
            for d in 1..=scale.depth {
                let (in_ch, stride, shortcut) = if d == 1 {
                    if n == 1 {
                        // R1 halves the length but keeps C, so the shortcut
                        // needs no channel projection
                        (out_ch, 2, ShortcutKind::PoolOnly)
                    } else {
                        (out_ch / 2, 2, ShortcutKind::PoolConv)
                    }
                } else {
                    (out_ch, 1, ShortcutKind::Identity)
                };
                layers.push(LayerSpec {
                    block_index: n,
                    layer_index: d,
                    in_channels: in_ch,
                    out_channels: out_ch,
                    stride,
                    shortcut,
                });
            }
            blocks.push(layers);
        }
        Ok(NetworkSpec {
            scale,
            num_labels,
            stem_out_channels: c,
            blocks,
            head_in_features: 8 * c,
        })
    }

    /// Number of weight-carrying layers counted the way the depth sequence
    /// 18/34/66/130 counts them: stem conv + two convs per residual layer +
    /// the FC, shortcut projections excluded. Equals `8D + 2`.
    pub fn weighted_layer_count(&self) -> usize {
        1 + self.blocks.iter().map(|b| 2 * b.len()).sum::<usize>() + 1
    }
}

/// Which population of parameters to count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    /// Exactly the closed-form rows: stem `K*12*C`, the per-layer main-path
    /// conv pairs, and `8C * labels` for the FC. Shortcut projections, BN
    /// affine parameters, and the FC bias are excluded.
    Table1,
    /// Every learnable scalar (adds shortcut convs, BN gamma/beta, FC bias).
    Total,
}

/// Parameter count of the assembled structure.
pub fn count_parameters(spec: &NetworkSpec, mode: CountMode) -> usize {
    let k = spec.scale.kernel;
    let stem = k * INPUT_LEADS * spec.stem_out_channels;
    let mut main = 0usize;
    let mut shortcut = 0usize;
    let mut bn_affine = 2 * spec.stem_out_channels;
    for block in &spec.blocks {
        for layer in block {
            main += k * layer.in_channels * layer.out_channels; // conv1
            main += k * layer.out_channels * layer.out_channels; // conv2
            bn_affine += 4 * layer.out_channels; // bn1 + bn2
            if layer.shortcut == ShortcutKind::PoolConv {
                shortcut += layer.in_channels * layer.out_channels; // 1x1 conv
            }
        }
    }
    let fc = spec.head_in_features * spec.num_labels;
    match mode {
        CountMode::Table1 => stem + main + fc,
        CountMode::Total => stem + main + fc + shortcut + bn_affine + spec.num_labels,
    }
}

/// One row of the per-stage shape table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageShape {
    pub stage: String,
    pub length: usize,
    pub channels: usize,
}

/// Per-stage `(length, channels)` from the exact floor-division formulas.
///
/// Stages are `input`, `stem` (after conv and pool), then `R1..R4`.
pub fn output_shapes(spec: &NetworkSpec, input_length: usize) -> Result<Vec<StageShape>> {
    if input_length < 64 {
        return Err(Error::InvalidInput(format!(
            "input length {input_length} below minimum 64 at stage stem"
        )));
    }
    let k = spec.scale.kernel;
    let mut shapes = vec![StageShape { stage: "input".into(), length: input_length, channels: INPUT_LEADS }];

    let conv_out = |len: usize, kernel: usize, stride: usize, stage: &str| -> Result<usize> {
        let padded = len + 2 * (kernel / 2);
        if padded < kernel {
            return Err(Error::InvalidInput(format!(
                "input too short for the pooling stack at stage {stage}"
            )));
        }
        Ok((padded - kernel) / stride + 1)
    };

    let mut len = conv_out(input_length, k, 2, "stem")?;
    let (pk, ps, pp) = STEM_POOL;
    let padded = len + 2 * pp;
    if padded < pk {
        return Err(Error::InvalidInput("input too short for the pooling stack at stage stem".into()));
    }
    len = (padded - pk) / ps + 1;
    shapes.push(StageShape { stage: "stem".into(), length: len, channels: spec.stem_out_channels });

    for (i, block) in spec.blocks.iter().enumerate() {
        let stage = format!("R{}", i + 1);
        for layer in block {
            if layer.stride == 2 {
                len = conv_out(len, k, 2, &stage)?;
            }
            if len == 0 {
                return Err(Error::InvalidInput(format!(
                    "input too short for the pooling stack at stage {stage}"
                )));
            }
        }
        let channels = block.last().map(|l| l.out_channels).unwrap_or(0);
        shapes.push(StageShape { stage, length: len, channels });
    }
    Ok(shapes)
}

/// Closed-form receptive field at the pre-GAP feature map, in input samples.
///
/// `RF = 1 + sum over layers of (k_i - 1) * J_i`, where `J_i` is the product
/// of all strides before layer `i`. The walk covers the stem conv, the stem
/// pool, and both convs of every residual layer; shortcut paths are strictly
/// narrower and do not extend the field.
pub fn receptive_field(spec: &NetworkSpec) -> usize {
    let k = spec.scale.kernel;
    let mut rf = 1usize;
    let mut jump = 1usize;

    // stem conv (K, stride 2), stem pool (3, stride 2)
    rf += (k - 1) * jump;
    jump *= 2;
    let (pk, ps, _) = STEM_POOL;
    rf += (pk - 1) * jump;
    jump *= ps;

    for block in &spec.blocks {
        for layer in block {
            rf += (k - 1) * jump; // conv1
            jump *= layer.stride;
            rf += (k - 1) * jump; // conv2, stride 1
        }
    }
    rf
}

/// Product of all strides from input to the pre-GAP feature map.
pub fn total_stride(spec: &NetworkSpec) -> usize {
    let mut jump = 4; // stem conv * stem pool
    for block in &spec.blocks {
        for layer in block {
            jump *= layer.stride;
        }
    }
    jump
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_notation_round_trips() {
        let s = ScaleConfig::new(4, 128, 3).unwrap();
        assert_eq!(s.to_string(), "D4-C128-K3");
        let parsed: ScaleConfig = "D4-C128-K3".parse().unwrap();
        assert_eq!(parsed, s);
        assert!("D4-C128".parse::<ScaleConfig>().is_err());
        assert!("D4-C128-K4".parse::<ScaleConfig>().is_err());
        assert!("4-128-3".parse::<ScaleConfig>().is_err());
    }

    #[test]
    fn even_or_small_kernels_rejected() {
        assert!(ScaleConfig::new(2, 16, 2).is_err());
        assert!(ScaleConfig::new(2, 16, 1).is_err());
        assert!(ScaleConfig::new(0, 16, 3).is_err());
        assert!(ScaleConfig::new(1, 1, 3).is_ok());
    }

    #[test]
    fn channel_widths_follow_doubling_rule() {
        let spec = NetworkSpec::new(ScaleConfig::new(3, 16, 3).unwrap(), 26).unwrap();
        assert_eq!(spec.blocks.len(), 4);
        let widths: Vec<usize> = spec.blocks.iter().map(|b| b[0].out_channels).collect();
        assert_eq!(widths, [16, 32, 64, 128]);
        assert_eq!(spec.head_in_features, 128);
        for block in &spec.blocks {
            for layer in block {
                if layer.layer_index == 1 {
                    assert_eq!(layer.stride, 2);
                    if layer.block_index == 1 {
                        assert_eq!(layer.shortcut, ShortcutKind::PoolOnly);
                        assert_eq!(layer.in_channels, layer.out_channels);
                    } else {
                        assert_eq!(layer.shortcut, ShortcutKind::PoolConv);
                        assert_eq!(layer.out_channels, 2 * layer.in_channels);
                    }
                } else {
                    assert_eq!(layer.stride, 1);
                    assert_eq!(layer.shortcut, ShortcutKind::Identity);
                    assert_eq!(layer.in_channels, layer.out_channels);
                }
            }
        }
    }

    #[test]
    fn weighted_layer_count_is_8d_plus_2() {
        for (d, expect) in [(2usize, 18usize), (4, 34), (8, 66), (16, 130)] {
            let spec = NetworkSpec::new(ScaleConfig::new(d, 16, 3).unwrap(), 26).unwrap();
            assert_eq!(spec.weighted_layer_count(), expect);
            assert_eq!(spec.weighted_layer_count(), 8 * d + 2);
        }
    }

    #[test]
    fn table1_counts_match_hand_worked_rows() {
        // stem, K=3, C=16 -> 576
        let spec = NetworkSpec::new(ScaleConfig::new(2, 16, 3).unwrap(), 26).unwrap();
        assert_eq!(spec.scale.kernel * INPUT_LEADS * spec.stem_out_channels, 576);

        // R2 with K=3, C=16, D=2 -> (3*16*32 + 3*32*32) + (3*32*32 + 3*32*32) = 10752
        let r2: usize = spec.blocks[1]
            .iter()
            .map(|l| 3 * l.in_channels * l.out_channels + 3 * l.out_channels * l.out_channels)
            .sum();
        assert_eq!(r2, 10752);

        // FC, C=64, labels=26 -> 13312
        let spec64 = NetworkSpec::new(ScaleConfig::new(2, 64, 3).unwrap(), 26).unwrap();
        assert_eq!(spec64.head_in_features * spec64.num_labels, 13312);
    }

    #[test]
    fn total_count_exceeds_table1_by_shortcuts_bn_and_bias() {
        let spec = NetworkSpec::new(ScaleConfig::new(2, 16, 3).unwrap(), 26).unwrap();
        let t1 = count_parameters(&spec, CountMode::Table1);
        let total = count_parameters(&spec, CountMode::Total);
        // shortcut 1x1 convs in R2..R4: 16*32 + 32*64 + 64*128
        let shortcuts = 16 * 32 + 32 * 64 + 64 * 128;
        // BN affine: stem 2*16 + per layer 4*out across 4 blocks * 2 layers
        let bn = 2 * 16
            + spec
                .blocks
                .iter()
                .flat_map(|b| b.iter())
                .map(|l| 4 * l.out_channels)
                .sum::<usize>();
        assert_eq!(total, t1 + shortcuts + bn + 26);
    }

    #[test]
    fn output_shapes_for_2500_match_documented_floor_formula() {
        let spec = NetworkSpec::new(ScaleConfig::new(2, 16, 3).unwrap(), 26).unwrap();
        let shapes = output_shapes(&spec, 2500).unwrap();
        let lengths: Vec<usize> = shapes.iter().map(|s| s.length).collect();
        assert_eq!(lengths, [2500, 625, 313, 157, 79, 40]);
        let channels: Vec<usize> = shapes.iter().map(|s| s.channels).collect();
        assert_eq!(channels, [12, 16, 16, 32, 64, 128]);
    }

    #[test]
    fn output_shapes_for_2560_are_exact_powers_of_two() {
        // kernel size must not change the stride-2 lengths
        for k in [3usize, 5, 9, 15] {
            let spec = NetworkSpec::new(ScaleConfig::new(2, 16, k).unwrap(), 26).unwrap();
            let shapes = output_shapes(&spec, 2560).unwrap();
            let lengths: Vec<usize> = shapes.iter().map(|s| s.length).collect();
            assert_eq!(lengths, [2560, 640, 320, 160, 80, 40], "K={k}");
        }
        let spec = NetworkSpec::new(ScaleConfig::new(2, 16, 3).unwrap(), 26).unwrap();
        let shapes = output_shapes(&spec, 2560).unwrap();
        assert_eq!(shapes[1].length, 640);
        assert_eq!(shapes[1].channels, 16);
        assert_eq!(shapes[5].length, 40);
        assert_eq!(shapes[5].channels, 128);
    }

    #[test]
    fn too_short_input_is_rejected() {
        let spec = NetworkSpec::new(ScaleConfig::new(2, 16, 3).unwrap(), 26).unwrap();
        let err = output_shapes(&spec, 63).unwrap_err();
        assert!(err.to_string().contains("below minimum"));
    }

    #[test]
    fn receptive_field_hand_examples() {
        // stem only: 1 + (K-1)*1 + 2*2 = 7 for K=3. Emulate with a depth-1
        // spec and subtract the block contributions via a direct walk.
        let spec = NetworkSpec::new(ScaleConfig::new(1, 4, 3).unwrap(), 2).unwrap();
        let k = 3usize;
        let stem_rf = 1 + (k - 1) + 2 * 2;
        assert_eq!(stem_rf, 7);
        // full walk for D=1, K=3: stem 7, then per block (J entering 4,8,16,32):
        // conv1 (k-1)*J, conv2 (k-1)*2J
        let mut expect = 7;
        let mut j = 4;
        for _ in 0..4 {
            expect += 2 * j + 2 * (2 * j);
            j *= 2;
        }
        assert_eq!(receptive_field(&spec), expect);
    }

    #[test]
    fn receptive_field_monotone_in_depth_and_kernel() {
        let rf = |d, k| {
            receptive_field(&NetworkSpec::new(ScaleConfig::new(d, 8, k).unwrap(), 2).unwrap())
        };
        assert!(rf(2, 3) < rf(4, 3));
        assert!(rf(4, 3) < rf(8, 3));
        assert!(rf(2, 3) < rf(2, 5));
        assert!(rf(2, 5) < rf(2, 9));
    }

    #[test]
    fn total_stride_is_64() {
        let spec = NetworkSpec::new(ScaleConfig::new(3, 8, 5).unwrap(), 4).unwrap();
        assert_eq!(total_stride(&spec), 64);
    }
}
