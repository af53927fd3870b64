//! Dense-tensor kernels the networks are assembled from.
//!
//! Spatial extents follow `floor((ext + 2P - K) / S) + 1` for both
//! convolution and pooling. No batch axis: every tensor is `[C, spatial...]`.

mod conv;
mod pool;

pub use conv::{conv, ConvSpec};
pub use pool::{pool, PoolKind, PoolSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Output extent of a sliding window, or `None` when the kernel does not fit.
pub fn output_extent(extent: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = extent + 2 * padding;
    if stride == 0 || kernel == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Window geometry lifted to three spatial axes; 2-D ops get a unit depth axis.
#[derive(Debug, Clone)]
pub(crate) struct Geometry {
    pub channels: usize,
    pub ext: [usize; 3],
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub pad: [usize; 3],
    pub out: [usize; 3],
}

impl Geometry {
    /// Callers must have validated the spec against `dims` first.
    pub fn lift(dims: &[usize], kernel: &[usize], stride: &[usize], padding: &[usize]) -> Self {
        let lead = 3 - kernel.len();
        let mut g = Geometry {
            channels: dims[0],
            ext: [1; 3],
            kernel: [1; 3],
            stride: [1; 3],
            pad: [0; 3],
            out: [1; 3],
        };
        g.ext[lead..].copy_from_slice(&dims[1..]);
        g.kernel[lead..].copy_from_slice(kernel);
        g.stride[lead..].copy_from_slice(stride);
        g.pad[lead..].copy_from_slice(padding);
        for a in 0..3 {
            g.out[a] = output_extent(g.ext[a], g.kernel[a], g.stride[a], g.pad[a])
                .expect("geometry validated by caller");
        }
        g
    }

    pub fn is_pointwise(&self) -> bool {
        self.kernel == [1; 3] && self.stride == [1; 3] && self.pad == [0; 3]
    }

    /// In-bounds input range `[start, end)` covered by output index `o` on `axis`.
    pub fn window(&self, axis: usize, o: usize) -> (usize, usize) {
        let start = (o * self.stride[axis]) as isize - self.pad[axis] as isize;
        let end = start + self.kernel[axis] as isize;
        (
            start.max(0) as usize,
            end.min(self.ext[axis] as isize) as usize,
        )
    }
}

/// `out[m] = sum_n weights[m, n] * input[n] + bias[m]`.
pub fn dense(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let n = input.len();
    let wd = weights.dims();
    if wd.len() != 2 || wd[1] != n {
        return Err(Error::shape(format!(
            "dense: input length {n} does not match weight dims {wd:?}"
        )));
    }
    let m = wd[0];
    if bias.dims() != [m] {
        return Err(Error::shape(format!(
            "dense: bias dims {:?}, expected [{m}]",
            bias.dims()
        )));
    }
    let x = input.data();
    let out: Vec<f32> = weights
        .data()
        .chunks(n)
        .zip(bias.data())
        .map(|(row, &b)| {
            let acc: f64 = row.iter().zip(x).map(|(&w, &v)| w as f64 * v as f64).sum();
            (acc + b as f64) as f32
        })
        .collect();
    Tensor::new(&[m], out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Hswish,
}

impl Activation {
    pub fn apply_scalar(self, x: f32) -> f32 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Hswish => x * (x + 3.0).clamp(0.0, 6.0) / 6.0,
        }
    }
}

pub fn activation(input: &Tensor, kind: Activation) -> Tensor {
    input.map(|x| kind.apply_scalar(x))
}

pub(crate) fn activate_in_place(t: &mut Tensor, kind: Activation) {
    for v in t.data_mut() {
        *v = kind.apply_scalar(*v);
    }
}

/// Max-shifted softmax over a flat vector.
pub fn softmax(input: &Tensor) -> Tensor {
    let x = input.data();
    let max = x.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f64> = x.iter().map(|&v| ((v - max) as f64).exp()).collect();
    let total: f64 = exps.iter().sum();
    let data = exps.iter().map(|&e| (e / total) as f32).collect();
    Tensor::new(input.dims(), data).expect("softmax preserves dims")
}

/// Concatenate along axis 0; all other axes must agree.
pub fn concat_channels(inputs: &[&Tensor]) -> Result<Tensor> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::shape("concat_channels: no inputs"))?;
    let rest = &first.dims()[1..];
    for (i, t) in inputs.iter().enumerate() {
        if &t.dims()[1..] != rest {
            return Err(Error::shape(format!(
                "concat_channels: input {i} has dims {:?}, expected [_, {:?}]",
                t.dims(),
                rest
            )));
        }
    }
    let channels: usize = inputs.iter().map(|t| t.dims()[0]).sum();
    let mut dims = first.dims().to_vec();
    dims[0] = channels;
    let mut data = Vec::with_capacity(dims.iter().product());
    for t in inputs {
        data.extend_from_slice(t.data());
    }
    Tensor::new(&dims, data)
}
