//! Coordinate attention: direction-aware pooling produces per-row and
//! per-column sigmoid gates for every channel.

use crate::error::{Error, Result};
use crate::io::WeightStore;
use crate::ops::Activation;
use crate::tensor::Tensor;

pub const CA_REDUCTION: usize = 16;
const CA_MIN_MID: usize = 8;

pub fn ca_mid_channels(channels: usize, reduction: usize) -> usize {
    (channels / reduction.max(1)).max(CA_MIN_MID)
}

/// Weights of one attention module. Transforms are 1x1, stored as `[out x in]` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CaParams {
    pub channels: usize,
    pub mid_channels: usize,
    pub shared_weight: Tensor,
    pub shared_bias: Tensor,
    pub gate_h_weight: Tensor,
    pub gate_h_bias: Tensor,
    pub gate_w_weight: Tensor,
    pub gate_w_bias: Tensor,
}

impl CaParams {
    /// All-zero parameters: every gate is exactly `sigmoid(0) = 0.5`.
    pub fn zeros(channels: usize, reduction: usize) -> Self {
        let mid = ca_mid_channels(channels, reduction);
        let z = |d: &[usize]| Tensor::zeros(d).expect("positive dims");
        Self {
            channels,
            mid_channels: mid,
            shared_weight: z(&[mid, channels]),
            shared_bias: z(&[mid]),
            gate_h_weight: z(&[channels, mid]),
            gate_h_bias: z(&[channels]),
            gate_w_weight: z(&[channels, mid]),
            gate_w_bias: z(&[channels]),
        }
    }

    pub fn from_store(
        store: &WeightStore,
        layer: &str,
        channels: usize,
        reduction: usize,
    ) -> Result<Self> {
        let mid = ca_mid_channels(channels, reduction);
        let get = |suffix: &str, dims: &[usize]| -> Result<Tensor> {
            let name = format!("{layer}.{suffix}");
            let t = store.get(&name).ok_or_else(|| Error::Layer {
                layer: layer.to_string(),
                msg: format!("missing weight tensor `{name}`"),
            })?;
            if t.dims() != dims {
                return Err(Error::Layer {
                    layer: layer.to_string(),
                    msg: format!("tensor `{name}` has dims {:?}, expected {dims:?}", t.dims()),
                });
            }
            Ok(t.clone())
        };
        Ok(Self {
            channels,
            mid_channels: mid,
            shared_weight: get("shared.weight", &[mid, channels])?,
            shared_bias: get("shared.bias", &[mid])?,
            gate_h_weight: get("gate_h.weight", &[channels, mid])?,
            gate_h_bias: get("gate_h.bias", &[channels])?,
            gate_w_weight: get("gate_w.weight", &[channels, mid])?,
            gate_w_bias: get("gate_w.bias", &[channels])?,
        })
    }

    /// Row gates `[C x H]` and column gates `[C x W]` for `x`.
    pub fn gates(&self, x: &Tensor) -> Result<(Vec<f32>, Vec<f32>)> {
        let d = x.dims();
        if d.len() != 3 || d[0] != self.channels {
            return Err(Error::shape(format!(
                "coordinate attention expects [{} x H x W], got {:?}",
                self.channels, d
            )));
        }
        let (c_n, h_n, w_n) = (d[0], d[1], d[2]);
        let len = h_n + w_n;
        let src = x.data();

        // Direction-wise average pooling, concatenated along the pooled axis.
        let mut pooled = vec![0f64; c_n * len];
        for c in 0..c_n {
            let plane = &src[c * h_n * w_n..(c + 1) * h_n * w_n];
            for h in 0..h_n {
                let row = &plane[h * w_n..(h + 1) * w_n];
                pooled[c * len + h] = row.iter().map(|&v| v as f64).sum::<f64>() / w_n as f64;
            }
            for w in 0..w_n {
                let s: f64 = (0..h_n).map(|h| plane[h * w_n + w] as f64).sum();
                pooled[c * len + h_n + w] = s / h_n as f64;
            }
        }

        let mid = self.mid_channels;
        let ws = self.shared_weight.data();
        let bs = self.shared_bias.data();
        let mut hidden = vec![0f64; mid * len];
        for j in 0..mid {
            for k in 0..len {
                let acc: f64 = (0..c_n)
                    .map(|c| ws[j * c_n + c] as f64 * pooled[c * len + k])
                    .sum();
                hidden[j * len + k] =
                    Activation::Hswish.apply_scalar((acc + bs[j] as f64) as f32) as f64;
            }
        }

        let gate = |weight: &Tensor, bias: &Tensor, offset: usize, n: usize| {
            let w = weight.data();
            let b = bias.data();
            let mut g = vec![0f32; c_n * n];
            for c in 0..c_n {
                for k in 0..n {
                    let acc: f64 = (0..mid)
                        .map(|j| w[c * mid + j] as f64 * hidden[j * len + offset + k])
                        .sum();
                    g[c * n + k] = Activation::Sigmoid.apply_scalar((acc + b[c] as f64) as f32);
                }
            }
            g
        };
        Ok((
            gate(&self.gate_h_weight, &self.gate_h_bias, 0, h_n),
            gate(&self.gate_w_weight, &self.gate_w_bias, h_n, w_n),
        ))
    }
}

/// `y[c,h,w] = x[c,h,w] * g_h[c,h] * g_w[c,w]`; output shape equals input shape.
pub fn coordinate_attention(x: &Tensor, params: &CaParams) -> Result<Tensor> {
    let (gh, gw) = params.gates(x)?;
    let d = x.dims();
    let (c_n, h_n, w_n) = (d[0], d[1], d[2]);
    let mut y = x.clone();
    let out = y.data_mut();
    for c in 0..c_n {
        for h in 0..h_n {
            let row_gate = gh[c * h_n + h];
            let base = (c * h_n + h) * w_n;
            for w in 0..w_n {
                out[base + w] *= row_gate * gw[c * w_n + w];
            }
        }
    }
    Ok(y)
}
