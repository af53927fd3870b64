//! Cross-correlation over 2 or 3 spatial axes, lowered onto chunked im2col + GEMM.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{output_extent, Geometry};
use crate::tensor::Tensor;

/// Patch-matrix budget per chunk, in f64 elements (~4 MiB).
const PATCH_BUDGET: usize = 1 << 19;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: Vec<usize>,
    pub stride: Vec<usize>,
    pub padding: Vec<usize>,
}

impl ConvSpec {
    /// Cubic/square kernel with the same stride and padding on every spatial axis.
    pub fn uniform(
        rank: usize,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel: vec![kernel; rank],
            stride: vec![stride; rank],
            padding: vec![padding; rank],
        }
    }

    pub fn rank(&self) -> usize {
        self.kernel.len()
    }

    pub fn weight_dims(&self) -> Vec<usize> {
        let mut d = vec![self.out_channels, self.in_channels];
        d.extend_from_slice(&self.kernel);
        d
    }

    /// Number of multiply-accumulates feeding one output value.
    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel.iter().product::<usize>()
    }

    pub fn fan_out(&self) -> usize {
        self.out_channels * self.kernel.iter().product::<usize>()
    }

    fn validate(&self) -> Result<()> {
        let r = self.rank();
        if !(2..=3).contains(&r) {
            return Err(Error::param(format!("conv rank {r} not in 2..=3")));
        }
        if self.stride.len() != r || self.padding.len() != r {
            return Err(Error::param(
                "conv kernel/stride/padding ranks disagree".to_string(),
            ));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::param("conv channel counts must be positive"));
        }
        if self.kernel.contains(&0) || self.stride.contains(&0) {
            return Err(Error::param("conv kernel and stride must be positive"));
        }
        Ok(())
    }

    /// Output dims `[C_out, spatial'...]` for an input of dims `[C_in, spatial...]`.
    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.validate()?;
        if input.len() != self.rank() + 1 {
            return Err(Error::shape(format!(
                "conv expects {} spatial axes, input has dims {:?}",
                self.rank(),
                input
            )));
        }
        if input[0] != self.in_channels {
            return Err(Error::shape(format!(
                "conv channel axis: input has {} channels, spec expects {}",
                input[0], self.in_channels
            )));
        }
        let mut out = vec![self.out_channels];
        for axis in 0..self.rank() {
            let ext = input[axis + 1];
            let o = output_extent(ext, self.kernel[axis], self.stride[axis], self.padding[axis])
                .ok_or_else(|| {
                    Error::shape(format!(
                        "conv spatial axis {axis}: extent {ext} with padding {} is smaller than kernel {}",
                        self.padding[axis], self.kernel[axis]
                    ))
                })?;
            out.push(o);
        }
        Ok(out)
    }
}

/// Cross-correlation (no kernel flip) with zero padding, plus bias.
pub fn conv(input: &Tensor, weights: &Tensor, bias: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    let out_dims = spec.output_dims(input.dims())?;
    let wdims = spec.weight_dims();
    if weights.dims() != wdims.as_slice() {
        let axis = weights
            .dims()
            .iter()
            .zip(&wdims)
            .position(|(a, b)| a != b)
            .unwrap_or(wdims.len().min(weights.rank()));
        return Err(Error::shape(format!(
            "conv weights axis {axis}: got dims {:?}, spec requires {:?}",
            weights.dims(),
            wdims
        )));
    }
    if bias.dims() != [spec.out_channels] {
        return Err(Error::shape(format!(
            "conv bias axis 0: got dims {:?}, expected [{}]",
            bias.dims(),
            spec.out_channels
        )));
    }

    let g = Geometry::lift(input.dims(), &spec.kernel, &spec.stride, &spec.padding);
    let positions = g.out[0] * g.out[1] * g.out[2];
    let kvol = g.channels * g.kernel.iter().product::<usize>();
    let c_out = spec.out_channels;

    let w64: Vec<f64> = weights.data().iter().map(|&w| w as f64).collect();
    let b64: Vec<f64> = bias.data().iter().map(|&b| b as f64).collect();

    let chunk = (PATCH_BUDGET / kvol).clamp(64, 4096).min(positions);
    let n_chunks = positions.div_ceil(chunk);
    let pointwise = g.is_pointwise();

    let pieces: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let p0 = ci * chunk;
            let p1 = (p0 + chunk).min(positions);
            let len = p1 - p0;
            let patch = if pointwise {
                pointwise_patch(input.data(), g.channels, positions, p0, p1)
            } else {
                im2col(input.data(), &g, p0, p1)
            };
            let mut out = vec![0f64; c_out * len];
            for (o, row) in out.chunks_mut(len).enumerate() {
                row.fill(b64[o]);
            }
            // SAFETY: all pointers address live, correctly sized buffers and
            // the strides describe their row-major layouts.
            unsafe {
                matrixmultiply::dgemm(
                    c_out,
                    kvol,
                    len,
                    1.0,
                    w64.as_ptr(),
                    kvol as isize,
                    1,
                    patch.as_ptr(),
                    len as isize,
                    1,
                    1.0,
                    out.as_mut_ptr(),
                    len as isize,
                    1,
                );
            }
            out
        })
        .collect();

    let mut data = vec![0f32; c_out * positions];
    for (ci, piece) in pieces.iter().enumerate() {
        let p0 = ci * chunk;
        let len = piece.len() / c_out;
        for o in 0..c_out {
            let dst = &mut data[o * positions + p0..o * positions + p0 + len];
            for (d, &s) in dst.iter_mut().zip(&piece[o * len..(o + 1) * len]) {
                *d = s as f32;
            }
        }
    }
    Tensor::new(&out_dims, data)
}

fn pointwise_patch(
    input: &[f32],
    channels: usize,
    positions: usize,
    p0: usize,
    p1: usize,
) -> Vec<f64> {
    let len = p1 - p0;
    let mut patch = Vec::with_capacity(channels * len);
    for c in 0..channels {
        patch.extend(
            input[c * positions + p0..c * positions + p1]
                .iter()
                .map(|&v| v as f64),
        );
    }
    patch
}

/// Patch matrix `[C_in*kd*kh*kw, p1-p0]` for output positions `p0..p1`.
fn im2col(input: &[f32], g: &Geometry, p0: usize, p1: usize) -> Vec<f64> {
    let len = p1 - p0;
    let [d, h, w] = g.ext;
    let [kd, kh, kw] = g.kernel;
    let [sd, sh, sw] = g.stride;
    let [pd, ph, pw] = g.pad;
    let [_, oh, ow] = g.out;
    let plane = oh * ow;

    let mut patch = vec![0f64; g.channels * kd * kh * kw * len];
    let mut row = 0;
    for c in 0..g.channels {
        let base = c * d * h * w;
        for a in 0..kd {
            for b in 0..kh {
                for e in 0..kw {
                    let dst = &mut patch[row * len..(row + 1) * len];
                    for (j, p) in (p0..p1).enumerate() {
                        let z = p / plane;
                        let y = (p % plane) / ow;
                        let x = p % ow;
                        let iz = (z * sd + a) as isize - pd as isize;
                        let iy = (y * sh + b) as isize - ph as isize;
                        let ix = (x * sw + e) as isize - pw as isize;
                        if iz >= 0
                            && iy >= 0
                            && ix >= 0
                            && (iz as usize) < d
                            && (iy as usize) < h
                            && (ix as usize) < w
                        {
                            dst[j] = input[base + (iz as usize * h + iy as usize) * w + ix as usize]
                                as f64;
                        }
                    }
                    row += 1;
                }
            }
        }
    }
    patch
}
