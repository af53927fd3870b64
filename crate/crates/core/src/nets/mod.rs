//! Layer-graph descriptions of the three feature networks, their symbolic
//! shape trace, and the forward pass.

mod attention;
mod builders;

pub use attention::{ca_mid_channels, coordinate_attention, CaParams, CA_REDUCTION};
pub use builders::{
    build_cavgg16, build_i3d, Architecture, CaVariant, InputProfile, INCEPTION_PLAN,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::ScoreVector;
use crate::io::WeightStore;
use crate::ops::{self, Activation, ConvSpec, PoolSpec};
use crate::tensor::{fmt_dims, Tensor};

/// Inception block: four stride-1 branches concatenated on channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InceptionSpec {
    pub in_channels: usize,
    /// 1x1x1 branch.
    pub b0: usize,
    /// 1x1x1 reduce, then 3x3x3.
    pub b1: (usize, usize),
    /// 1x1x1 reduce, then 3x3x3.
    pub b2: (usize, usize),
    /// 3x3x3 max pool, then 1x1x1.
    pub b3: usize,
}

impl InceptionSpec {
    pub fn out_channels(&self) -> usize {
        self.b0 + self.b1.1 + self.b2.1 + self.b3
    }

    /// `(suffix, spec)` for each convolution, in execution order.
    pub fn convs(&self) -> Vec<(&'static str, ConvSpec)> {
        let c = self.in_channels;
        vec![
            ("b0", ConvSpec::uniform(3, c, self.b0, 1, 1, 0)),
            ("b1a", ConvSpec::uniform(3, c, self.b1.0, 1, 1, 0)),
            ("b1b", ConvSpec::uniform(3, self.b1.0, self.b1.1, 3, 1, 1)),
            ("b2a", ConvSpec::uniform(3, c, self.b2.0, 1, 1, 0)),
            ("b2b", ConvSpec::uniform(3, self.b2.0, self.b2.1, 3, 1, 1)),
            ("b3", ConvSpec::uniform(3, c, self.b3, 1, 1, 0)),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Conv {
        spec: ConvSpec,
        activation: Option<Activation>,
    },
    Pool {
        spec: PoolSpec,
    },
    Dense {
        in_features: usize,
        out_features: usize,
        activation: Option<Activation>,
    },
    Activation {
        function: Activation,
    },
    Softmax,
    CaModule {
        channels: usize,
        reduction: usize,
    },
    InceptionBlock {
        spec: InceptionSpec,
    },
    Flatten,
    /// Mean over every non-channel axis, leaving `[C]`.
    TemporalMean,
}

impl LayerKind {
    pub fn label(&self) -> &'static str {
        match self {
            LayerKind::Conv { .. } => "conv",
            LayerKind::Pool { .. } => "pool",
            LayerKind::Dense { .. } => "dense",
            LayerKind::Activation { .. } => "activation",
            LayerKind::Softmax => "softmax",
            LayerKind::CaModule { .. } => "ca_module",
            LayerKind::InceptionBlock { .. } => "inception_block",
            LayerKind::Flatten => "flatten",
            LayerKind::TemporalMean => "temporal_mean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }

    /// Every learnable tensor of this layer.
    pub fn parameters(&self) -> Vec<ParamSpec> {
        let n = &self.name;
        match &self.kind {
            LayerKind::Conv { spec, .. } => conv_params(n, spec),
            LayerKind::Dense {
                in_features,
                out_features,
                ..
            } => vec![
                ParamSpec::weight(
                    format!("{n}.weight"),
                    vec![*out_features, *in_features],
                    *in_features,
                    *out_features,
                ),
                ParamSpec::bias(format!("{n}.bias"), *out_features),
            ],
            LayerKind::CaModule {
                channels,
                reduction,
            } => {
                let mid = ca_mid_channels(*channels, *reduction);
                let c = *channels;
                vec![
                    ParamSpec::weight(format!("{n}.shared.weight"), vec![mid, c], c, mid),
                    ParamSpec::bias(format!("{n}.shared.bias"), mid),
                    ParamSpec::weight(format!("{n}.gate_h.weight"), vec![c, mid], mid, c),
                    ParamSpec::bias(format!("{n}.gate_h.bias"), c),
                    ParamSpec::weight(format!("{n}.gate_w.weight"), vec![c, mid], mid, c),
                    ParamSpec::bias(format!("{n}.gate_w.bias"), c),
                ]
            }
            LayerKind::InceptionBlock { spec } => spec
                .convs()
                .iter()
                .flat_map(|(suffix, s)| conv_params(&format!("{n}.{suffix}"), s))
                .collect(),
            LayerKind::Pool { .. }
            | LayerKind::Activation { .. }
            | LayerKind::Softmax
            | LayerKind::Flatten
            | LayerKind::TemporalMean => Vec::new(),
        }
    }

    /// Symbolic output dims for the given input dims.
    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        let fail = |msg: String| Error::Layer {
            layer: self.name.clone(),
            msg,
        };
        match &self.kind {
            LayerKind::Conv { spec, .. } => {
                spec.output_dims(input).map_err(|e| fail(e.to_string()))
            }
            LayerKind::Pool { spec } => spec.output_dims(input).map_err(|e| fail(e.to_string())),
            LayerKind::Dense {
                in_features,
                out_features,
                ..
            } => {
                if input != [*in_features] {
                    return Err(fail(format!(
                        "expects input ({in_features}), got ({})",
                        fmt_dims(input)
                    )));
                }
                Ok(vec![*out_features])
            }
            LayerKind::Activation { .. } | LayerKind::Softmax => Ok(input.to_vec()),
            LayerKind::CaModule { channels, .. } => {
                if input.len() != 3 || input[0] != *channels {
                    return Err(fail(format!(
                        "expects input ({channels}xHxW), got ({})",
                        fmt_dims(input)
                    )));
                }
                Ok(input.to_vec())
            }
            LayerKind::InceptionBlock { spec } => {
                if input.len() != 4 || input[0] != spec.in_channels {
                    return Err(fail(format!(
                        "expects input ({}xTxHxW), got ({})",
                        spec.in_channels,
                        fmt_dims(input)
                    )));
                }
                let mut out = input.to_vec();
                out[0] = spec.out_channels();
                Ok(out)
            }
            LayerKind::Flatten => Ok(vec![input.iter().product()]),
            LayerKind::TemporalMean => Ok(vec![input[0]]),
        }
    }
}

fn conv_params(name: &str, spec: &ConvSpec) -> Vec<ParamSpec> {
    vec![
        ParamSpec::weight(
            format!("{name}.weight"),
            spec.weight_dims(),
            spec.fan_in(),
            spec.fan_out(),
        ),
        ParamSpec::bias(format!("{name}.bias"), spec.out_channels),
    ]
}

/// Name, shape and fan of one learnable tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub dims: Vec<usize>,
    pub fan_in: usize,
    pub fan_out: usize,
    pub is_bias: bool,
}

impl ParamSpec {
    fn weight(name: String, dims: Vec<usize>, fan_in: usize, fan_out: usize) -> Self {
        Self {
            name,
            dims,
            fan_in,
            fan_out,
            is_bias: false,
        }
    }

    fn bias(name: String, len: usize) -> Self {
        Self {
            name,
            dims: vec![len],
            fan_in: len,
            fan_out: len,
            is_bias: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDesc {
    pub name: String,
    pub input_shape: Vec<usize>,
    pub num_classes: usize,
    pub layers: Vec<LayerSpec>,
}

/// One row of the architecture table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceRow {
    pub name: String,
    pub kind: &'static str,
    pub dims: Vec<usize>,
}

impl NetworkDesc {
    pub fn parameters(&self) -> Vec<ParamSpec> {
        self.layers.iter().flat_map(LayerSpec::parameters).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters()
            .iter()
            .map(|p| p.dims.iter().product::<usize>())
            .sum()
    }

    pub fn ca_layers(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l.kind, LayerKind::CaModule { .. }))
            .count()
    }

    /// Checks that every parameter exists in `store` with the expected dims.
    ///
    /// Reports the first offending tensor in network order.
    pub fn validate_weights(&self, store: &WeightStore) -> Result<()> {
        for p in self.parameters() {
            match store.get(&p.name) {
                None => {
                    return Err(Error::Weights(format!(
                        "network `{}` needs tensor `{}` ({}), which is missing",
                        self.name,
                        p.name,
                        fmt_dims(&p.dims)
                    )))
                }
                Some(t) if t.dims() != p.dims.as_slice() => {
                    return Err(Error::Weights(format!(
                        "network `{}`: tensor `{}` has dims ({}), expected ({})",
                        self.name,
                        p.name,
                        fmt_dims(t.dims()),
                        fmt_dims(&p.dims)
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// Applies each layer's shape rule in order; fails at the first inconsistency.
pub fn shape_trace(net: &NetworkDesc, input_shape: &[usize]) -> Result<Vec<TraceRow>> {
    let mut names = std::collections::HashSet::new();
    let mut dims = input_shape.to_vec();
    let mut rows = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        if !names.insert(layer.name.as_str()) {
            return Err(Error::Layer {
                layer: layer.name.clone(),
                msg: "duplicate layer name".into(),
            });
        }
        dims = layer.output_dims(&dims)?;
        rows.push(TraceRow {
            name: layer.name.clone(),
            kind: layer.kind.label(),
            dims: dims.clone(),
        });
    }
    if dims != [net.num_classes] {
        return Err(Error::Layer {
            layer: net
                .layers
                .last()
                .map(|l| l.name.clone())
                .unwrap_or_default(),
            msg: format!(
                "network ends in ({}), expected ({})",
                fmt_dims(&dims),
                net.num_classes
            ),
        });
    }
    Ok(rows)
}

/// Aligned plain-text table: name, kind, output dims.
pub fn format_trace(net: &NetworkDesc, rows: &[TraceRow]) -> String {
    let name_w = rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(5);
    let kind_w = rows.iter().map(|r| r.kind.len()).max().unwrap_or(4).max(4);
    let mut out = format!("{:<name_w$}  {:<kind_w$}  {}\n", "layer", "kind", "output");
    out.push_str(&format!(
        "{:<name_w$}  {:<kind_w$}  {}\n",
        "input",
        "-",
        fmt_dims(&net.input_shape)
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<name_w$}  {:<kind_w$}  {}\n",
            r.name,
            r.kind,
            fmt_dims(&r.dims)
        ));
    }
    out
}

fn param<'a>(store: &'a WeightStore, name: &str, layer: &str) -> Result<&'a Tensor> {
    store.get(name).ok_or_else(|| Error::Layer {
        layer: layer.to_string(),
        msg: format!("missing weight tensor `{name}`"),
    })
}

fn run_conv(
    x: &Tensor,
    spec: &ConvSpec,
    prefix: &str,
    layer: &str,
    store: &WeightStore,
    act: Option<Activation>,
) -> Result<Tensor> {
    let w = param(store, &format!("{prefix}.weight"), layer)?;
    let b = param(store, &format!("{prefix}.bias"), layer)?;
    let mut y = ops::conv(x, w, b, spec).map_err(|e| Error::Layer {
        layer: layer.to_string(),
        msg: e.to_string(),
    })?;
    if let Some(a) = act {
        ops::activate_in_place(&mut y, a);
    }
    Ok(y)
}

fn inception(x: &Tensor, spec: &InceptionSpec, name: &str, store: &WeightStore) -> Result<Tensor> {
    let relu = Some(Activation::Relu);
    let convs = spec.convs();
    let c = |i: usize, input: &Tensor| {
        let (suffix, s) = &convs[i];
        run_conv(input, s, &format!("{name}.{suffix}"), name, store, relu)
    };
    let b0 = c(0, x)?;
    let b1 = c(2, &c(1, x)?)?;
    let b2 = c(4, &c(3, x)?)?;
    let pooled = ops::pool(x, &PoolSpec::uniform(ops::PoolKind::Max, 3, 3, 1, 1))?;
    let b3 = c(5, &pooled)?;
    ops::concat_channels(&[&b0, &b1, &b2, &b3])
}

fn temporal_mean(x: &Tensor) -> Result<Tensor> {
    let c = x.dims()[0];
    let per = x.len() / c;
    let data = x
        .data()
        .chunks(per)
        .map(|row| (row.iter().map(|&v| v as f64).sum::<f64>() / per as f64) as f32)
        .collect();
    Tensor::new(&[c], data)
}

/// Runs every layer in order and returns the final layer's output (the logits).
pub fn forward_logits(net: &NetworkDesc, weights: &WeightStore, input: &Tensor) -> Result<Tensor> {
    if input.dims() != net.input_shape.as_slice() {
        return Err(Error::shape(format!(
            "network `{}` expects input ({}), got ({})",
            net.name,
            fmt_dims(&net.input_shape),
            fmt_dims(input.dims())
        )));
    }
    shape_trace(net, &net.input_shape)?;
    net.validate_weights(weights)?;

    let mut x = input.clone();
    for layer in &net.layers {
        let name = layer.name.as_str();
        x = match &layer.kind {
            LayerKind::Conv { spec, activation } => {
                run_conv(&x, spec, name, name, weights, *activation)?
            }
            LayerKind::Pool { spec } => ops::pool(&x, spec)?,
            LayerKind::Dense { activation, .. } => {
                let w = param(weights, &format!("{name}.weight"), name)?;
                let b = param(weights, &format!("{name}.bias"), name)?;
                let mut y = ops::dense(&x, w, b)?;
                if let Some(a) = activation {
                    ops::activate_in_place(&mut y, *a);
                }
                y
            }
            LayerKind::Activation { function } => ops::activation(&x, *function),
            LayerKind::Softmax => ops::softmax(&x),
            LayerKind::CaModule {
                channels,
                reduction,
            } => {
                let p = CaParams::from_store(weights, name, *channels, *reduction)?;
                coordinate_attention(&x, &p)?
            }
            LayerKind::InceptionBlock { spec } => inception(&x, spec, name, weights)?,
            LayerKind::Flatten => {
                let n = x.len();
                x.reshape(&[n])?
            }
            LayerKind::TemporalMean => temporal_mean(&x)?,
        };
    }
    Ok(x)
}

/// Forward pass ending in class probabilities.
///
/// Softmax is applied to the final layer's output unless the network already
/// ends with a softmax layer.
pub fn forward(net: &NetworkDesc, weights: &WeightStore, input: &Tensor) -> Result<ScoreVector> {
    let out = forward_logits(net, weights, input)?;
    let probs = match net.layers.last().map(|l| &l.kind) {
        Some(LayerKind::Softmax) => out,
        _ => ops::softmax(&out),
    };
    ScoreVector::from_f32(probs.data())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_dense_named_in_error() {
        let mut net = build_cavgg16(CaVariant::Three, 4, InputProfile::FULL.size);
        let fc6 = net.layers.iter_mut().find(|l| l.name == "fc6").unwrap();
        if let LayerKind::Dense { in_features, .. } = &mut fc6.kind {
            *in_features = 25089;
        }
        let err = shape_trace(&net, &net.input_shape.clone()).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("fc6") && msg.contains("25089") && msg.contains("25088"),
            "{msg}"
        );
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut net = build_cavgg16(CaVariant::Three, 4, 32);
        let first = net.layers[0].name.clone();
        net.layers[1].name = first;
        assert!(shape_trace(&net, &net.input_shape.clone()).is_err());
    }

    #[test]
    fn inception_channel_arithmetic() {
        let net = build_i3d(3, 4, InputProfile::SMALL);
        let mut blocks = 0;
        for l in &net.layers {
            if let LayerKind::InceptionBlock { spec } = &l.kind {
                assert_eq!(
                    spec.out_channels(),
                    spec.b0 + spec.b1.1 + spec.b2.1 + spec.b3
                );
                blocks += 1;
            }
        }
        assert_eq!(blocks, INCEPTION_PLAN.len());
    }
}
