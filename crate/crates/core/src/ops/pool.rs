use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{output_extent, Geometry};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Max,
    Avg,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub kind: PoolKind,
    pub kernel: Vec<usize>,
    pub stride: Vec<usize>,
    pub padding: Vec<usize>,
}

impl PoolSpec {
    pub fn new(kind: PoolKind, kernel: &[usize], stride: &[usize], padding: &[usize]) -> Self {
        Self {
            kind,
            kernel: kernel.to_vec(),
            stride: stride.to_vec(),
            padding: padding.to_vec(),
        }
    }

    pub fn uniform(
        kind: PoolKind,
        rank: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        Self {
            kind,
            kernel: vec![kernel; rank],
            stride: vec![stride; rank],
            padding: vec![padding; rank],
        }
    }

    pub fn rank(&self) -> usize {
        self.kernel.len()
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        let r = self.rank();
        if !(2..=3).contains(&r) || self.stride.len() != r || self.padding.len() != r {
            return Err(Error::param(format!(
                "pool kernel/stride/padding must share rank 2 or 3, got {:?}/{:?}/{:?}",
                self.kernel, self.stride, self.padding
            )));
        }
        if self.kernel.contains(&0) || self.stride.contains(&0) {
            return Err(Error::param("pool kernel and stride must be positive"));
        }
        if input.len() != r + 1 {
            return Err(Error::shape(format!(
                "pool expects {r} spatial axes, input has dims {input:?}"
            )));
        }
        let mut out = vec![input[0]];
        for axis in 0..r {
            let (ext, k, p) = (input[axis + 1], self.kernel[axis], self.padding[axis]);
            if p >= k {
                return Err(Error::param(format!(
                    "pool spatial axis {axis}: padding {p} would create windows outside the input (kernel {k})"
                )));
            }
            let o = output_extent(ext, k, self.stride[axis], p).ok_or_else(|| {
                Error::shape(format!(
                    "pool spatial axis {axis}: kernel {k} larger than padded extent {}",
                    ext + 2 * p
                ))
            })?;
            out.push(o);
        }
        Ok(out)
    }
}

/// Max or average pooling. Padded cells never win a max and are not counted in an average.
pub fn pool(input: &Tensor, spec: &PoolSpec) -> Result<Tensor> {
    let out_dims = spec.output_dims(input.dims())?;
    let g = Geometry::lift(input.dims(), &spec.kernel, &spec.stride, &spec.padding);
    let [d, h, w] = g.ext;
    let [od, oh, ow] = g.out;
    let src = input.data();
    let mut data = Vec::with_capacity(g.channels * od * oh * ow);

    for c in 0..g.channels {
        let base = c * d * h * w;
        for z in 0..od {
            let (z0, z1) = g.window(0, z);
            for y in 0..oh {
                let (y0, y1) = g.window(1, y);
                for x in 0..ow {
                    let (x0, x1) = g.window(2, x);
                    let v = match spec.kind {
                        PoolKind::Max => {
                            let mut m = f32::NEG_INFINITY;
                            for iz in z0..z1 {
                                for iy in y0..y1 {
                                    let row = base + (iz * h + iy) * w;
                                    for &v in &src[row + x0..row + x1] {
                                        m = m.max(v);
                                    }
                                }
                            }
                            m
                        }
                        PoolKind::Avg => {
                            let mut acc = 0f64;
                            for iz in z0..z1 {
                                for iy in y0..y1 {
                                    let row = base + (iz * h + iy) * w;
                                    acc += src[row + x0..row + x1]
                                        .iter()
                                        .map(|&v| v as f64)
                                        .sum::<f64>();
                                }
                            }
                            let n = (z1 - z0) * (y1 - y0) * (x1 - x0);
                            (acc / n as f64) as f32
                        }
                    };
                    data.push(v);
                }
            }
        }
    }
    Tensor::new(&out_dims, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halving_pool_extent() {
        let spec = PoolSpec::uniform(PoolKind::Max, 2, 2, 2, 0);
        assert_eq!(spec.output_dims(&[1, 224, 224]).unwrap(), vec![1, 112, 112]);
    }

    #[test]
    fn max_pool_windows_by_hand() {
        let x = Tensor::from_fn(&[1, 4, 4], |i| (i + 1) as f32).unwrap();
        let spec = PoolSpec::uniform(PoolKind::Max, 2, 2, 2, 0);
        let y = pool(&x, &spec).unwrap();
        assert_eq!(y.data(), &[6.0, 8.0, 14.0, 16.0]);
    }

    #[test]
    fn avg_preserves_constants_even_with_padding() {
        let x = Tensor::full(&[2, 3, 5, 5], 1.75).unwrap();
        let spec = PoolSpec::uniform(PoolKind::Avg, 3, 3, 2, 1);
        let y = pool(&x, &spec).unwrap();
        assert!(y.data().iter().all(|&v| v == 1.75));
    }

    #[test]
    fn max_padding_ignored_for_negative_inputs() {
        let x = Tensor::full(&[1, 3, 3], -2.0).unwrap();
        let spec = PoolSpec::uniform(PoolKind::Max, 2, 3, 2, 1);
        let y = pool(&x, &spec).unwrap();
        assert!(y.data().iter().all(|&v| v == -2.0));
    }

    #[test]
    fn rejects_oversized_kernel() {
        let spec = PoolSpec::uniform(PoolKind::Max, 2, 7, 1, 0);
        let x = Tensor::zeros(&[1, 3, 3]).unwrap();
        assert!(pool(&x, &spec).is_err());
    }
}
