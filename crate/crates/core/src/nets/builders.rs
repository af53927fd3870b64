use std::fmt;
use std::str::FromStr;

use super::{shape_trace, InceptionSpec, LayerKind, LayerSpec, NetworkDesc};
use crate::error::{Error, Result};
use crate::ops::{Activation, ConvSpec, PoolKind, PoolSpec};

use super::attention::CA_REDUCTION;

/// Clip geometry fed to the networks: frame count and square side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputProfile {
    pub frames: usize,
    pub size: usize,
}

impl InputProfile {
    pub const FULL: InputProfile = InputProfile {
        frames: 79,
        size: 224,
    };
    /// Reduced geometry for quick end-to-end runs.
    pub const SMALL: InputProfile = InputProfile {
        frames: 32,
        size: 112,
    };
}

/// One row of the Inception-V1 channel table.
#[derive(Debug, Clone, Copy)]
pub struct InceptionPlanRow {
    pub name: &'static str,
    pub b0: usize,
    pub b1: (usize, usize),
    pub b2: (usize, usize),
    pub b3: usize,
}

impl InceptionPlanRow {
    pub fn spec(&self, in_channels: usize) -> InceptionSpec {
        InceptionSpec {
            in_channels,
            b0: self.b0,
            b1: self.b1,
            b2: self.b2,
            b3: self.b3,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.b0 + self.b1.1 + self.b2.1 + self.b3
    }
}

const fn row(
    name: &'static str,
    b0: usize,
    b1: (usize, usize),
    b2: (usize, usize),
    b3: usize,
) -> InceptionPlanRow {
    InceptionPlanRow {
        name,
        b0,
        b1,
        b2,
        b3,
    }
}

/// Standard Inception-V1 channel plan (blocks 3b through 5c).
pub const INCEPTION_PLAN: [InceptionPlanRow; 9] = [
    row("mixed_3b", 64, (96, 128), (16, 32), 32),
    row("mixed_3c", 128, (128, 192), (32, 96), 64),
    row("mixed_4b", 192, (96, 208), (16, 48), 64),
    row("mixed_4c", 160, (112, 224), (24, 64), 64),
    row("mixed_4d", 128, (128, 256), (24, 64), 64),
    row("mixed_4e", 112, (144, 288), (32, 64), 64),
    row("mixed_4f", 256, (160, 320), (32, 128), 128),
    row("mixed_5b", 256, (160, 320), (32, 128), 128),
    row("mixed_5c", 384, (192, 384), (48, 128), 128),
];

fn conv3(
    name: &str,
    cin: usize,
    cout: usize,
    k: [usize; 3],
    s: [usize; 3],
    p: [usize; 3],
    act: Option<Activation>,
) -> LayerSpec {
    LayerSpec::new(
        name,
        LayerKind::Conv {
            spec: ConvSpec {
                in_channels: cin,
                out_channels: cout,
                kernel: k.to_vec(),
                stride: s.to_vec(),
                padding: p.to_vec(),
            },
            activation: act,
        },
    )
}

fn pool3(name: &str, kind: PoolKind, k: [usize; 3], s: [usize; 3], p: [usize; 3]) -> LayerSpec {
    LayerSpec::new(
        name,
        LayerKind::Pool {
            spec: PoolSpec::new(kind, &k, &s, &p),
        },
    )
}

/// Inflated Inception-V1 over `[in_channels x T x S x S]` clips.
///
/// The final average pool covers the whole remaining spatial extent and two
/// time steps, so the full profile reproduces the canonical `K(2,7,7)`.
pub fn build_i3d(in_channels: usize, num_classes: usize, profile: InputProfile) -> NetworkDesc {
    let relu = Some(Activation::Relu);
    let stem_pool = |name: &str| pool3(name, PoolKind::Max, [1, 3, 3], [1, 2, 2], [0, 1, 1]);
    let mut layers = vec![
        conv3(
            "conv1",
            in_channels,
            64,
            [7, 7, 7],
            [2, 2, 2],
            [3, 3, 3],
            relu,
        ),
        stem_pool("pool1"),
        conv3("conv2", 64, 64, [1, 1, 1], [1, 1, 1], [0, 0, 0], relu),
        conv3("conv3", 64, 192, [3, 3, 3], [1, 1, 1], [1, 1, 1], relu),
        stem_pool("pool2"),
    ];
    let mut channels = 192;
    let mut push_inception = |layers: &mut Vec<LayerSpec>, r: &InceptionPlanRow| {
        layers.push(LayerSpec::new(
            r.name,
            LayerKind::InceptionBlock {
                spec: r.spec(channels),
            },
        ));
        channels = r.out_channels();
    };
    for r in &INCEPTION_PLAN[0..2] {
        push_inception(&mut layers, r);
    }
    layers.push(pool3(
        "pool3",
        PoolKind::Max,
        [3, 3, 3],
        [2, 2, 2],
        [1, 1, 1],
    ));
    for r in &INCEPTION_PLAN[2..7] {
        push_inception(&mut layers, r);
    }
    layers.push(pool3(
        "pool4",
        PoolKind::Max,
        [2, 2, 2],
        [2, 2, 2],
        [0, 0, 0],
    ));
    for r in &INCEPTION_PLAN[7..9] {
        push_inception(&mut layers, r);
    }

    let mut net = NetworkDesc {
        name: if in_channels == 2 {
            "flow_i3d"
        } else {
            "rgb_i3d"
        }
        .to_string(),
        input_shape: vec![in_channels, profile.frames, profile.size, profile.size],
        num_classes,
        layers,
    };
    let before_avg = trailing_dims(&net);
    net.layers.push(pool3(
        "avgpool",
        PoolKind::Avg,
        [before_avg[1].min(2), before_avg[2], before_avg[3]],
        [1, 1, 1],
        [0, 0, 0],
    ));
    net.layers.push(conv3(
        "logits",
        channels,
        num_classes,
        [1, 1, 1],
        [1, 1, 1],
        [0, 0, 0],
        None,
    ));
    net.layers
        .push(LayerSpec::new("temporal_mean", LayerKind::TemporalMean));
    net
}

/// Output dims of the partially built network, bypassing the class-count check.
fn trailing_dims(net: &NetworkDesc) -> Vec<usize> {
    let mut dims = net.input_shape.clone();
    for l in &net.layers {
        dims = l
            .output_dims(&dims)
            .unwrap_or_else(|e| panic!("invalid builder geometry for {}: {e}", net.name));
    }
    dims
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaVariant {
    /// Attention after blocks 1, 4 and 5.
    Three,
    /// Attention after every block.
    Five,
}

impl CaVariant {
    pub fn blocks(self) -> &'static [usize] {
        match self {
            CaVariant::Three => &[1, 4, 5],
            CaVariant::Five => &[1, 2, 3, 4, 5],
        }
    }
}

/// VGG16 with coordinate attention after selected blocks, on `[3 x S x S]` input.
pub fn build_cavgg16(variant: CaVariant, num_classes: usize, size: usize) -> NetworkDesc {
    const BLOCKS: [(usize, usize); 5] = [(2, 64), (2, 128), (3, 256), (3, 512), (3, 512)];
    let relu = Some(Activation::Relu);
    let mut layers = Vec::new();
    let mut channels = 3;
    let mut side = size;
    for (b, &(convs, width)) in BLOCKS.iter().enumerate() {
        let b = b + 1;
        for i in 1..=convs {
            layers.push(LayerSpec::new(
                format!("conv{b}_{i}"),
                LayerKind::Conv {
                    spec: ConvSpec::uniform(2, channels, width, 3, 1, 1),
                    activation: relu,
                },
            ));
            channels = width;
        }
        layers.push(LayerSpec::new(
            format!("pool{b}"),
            LayerKind::Pool {
                spec: PoolSpec::uniform(PoolKind::Max, 2, 2, 2, 0),
            },
        ));
        side /= 2;
        if variant.blocks().contains(&b) {
            layers.push(LayerSpec::new(
                format!("ca{b}"),
                LayerKind::CaModule {
                    channels,
                    reduction: CA_REDUCTION,
                },
            ));
        }
    }
    let flat = channels * side * side;
    layers.push(LayerSpec::new("flatten", LayerKind::Flatten));
    layers.push(LayerSpec::new(
        "fc6",
        LayerKind::Dense {
            in_features: flat,
            out_features: 4096,
            activation: relu,
        },
    ));
    layers.push(LayerSpec::new(
        "fc7",
        LayerKind::Dense {
            in_features: 4096,
            out_features: 4096,
            activation: relu,
        },
    ));
    layers.push(LayerSpec::new(
        "fc8",
        LayerKind::Dense {
            in_features: 4096,
            out_features: num_classes,
            activation: None,
        },
    ));
    NetworkDesc {
        name: match variant {
            CaVariant::Three => "cavgg16-3",
            CaVariant::Five => "cavgg16-5",
        }
        .to_string(),
        input_shape: vec![3, size, size],
        num_classes,
        layers,
    }
}

/// The four buildable networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    RgbI3d,
    FlowI3d,
    CaVgg16Three,
    CaVgg16Five,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::RgbI3d,
        Architecture::FlowI3d,
        Architecture::CaVgg16Three,
        Architecture::CaVgg16Five,
    ];

    pub fn build(self, num_classes: usize, profile: InputProfile) -> NetworkDesc {
        match self {
            Architecture::RgbI3d => build_i3d(3, num_classes, profile),
            Architecture::FlowI3d => build_i3d(2, num_classes, profile),
            Architecture::CaVgg16Three => {
                build_cavgg16(CaVariant::Three, num_classes, profile.size)
            }
            Architecture::CaVgg16Five => build_cavgg16(CaVariant::Five, num_classes, profile.size),
        }
    }

    /// Builds and validates the shape chain.
    pub fn build_checked(self, num_classes: usize, profile: InputProfile) -> Result<NetworkDesc> {
        let net = self.build(num_classes, profile);
        shape_trace(&net, &net.input_shape)?;
        Ok(net)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::RgbI3d => "rgb_i3d",
            Architecture::FlowI3d => "flow_i3d",
            Architecture::CaVgg16Three => "cavgg16-3",
            Architecture::CaVgg16Five => "cavgg16-5",
        })
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgb_i3d" => Ok(Architecture::RgbI3d),
            "flow_i3d" => Ok(Architecture::FlowI3d),
            "cavgg16" | "cavgg16-3" => Ok(Architecture::CaVgg16Three),
            "cavgg16-5" => Ok(Architecture::CaVgg16Five),
            other => Err(Error::param(format!(
                "unknown network `{other}` (expected rgb_i3d, flow_i3d, cavgg16-3 or cavgg16-5)"
            ))),
        }
    }
}
