//! Slow, obviously-correct reference implementations used only by tests.
//! Nothing here calls into the library.
#![allow(dead_code)]

use std::f64::consts::PI;

/// `floor((n + 2p - k) / s) + 1`, or `None` when the window does not fit.
pub fn extent(n: usize, k: usize, s: usize, p: usize) -> Option<usize> {
    let span = n as i64 + 2 * p as i64 - k as i64;
    if s == 0 || span < 0 {
        None
    } else {
        Some((span / s as i64) as usize + 1)
    }
}

/// Advances a multi-index in row-major order; false once it wraps.
fn next_index(idx: &mut [usize], dims: &[usize]) -> bool {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] < dims[a] {
            return true;
        }
        idx[a] = 0;
    }
    false
}

fn flat(idx: &[usize], dims: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (i, d)| acc * d + i)
}

/// Input `[C, spatial...]`, weights `[Cout, C, kernel...]`; returns output dims and values.
pub fn conv(
    input: &[f32],
    in_dims: &[usize],
    weights: &[f32],
    cout: usize,
    bias: &[f32],
    kernel: &[usize],
    stride: &[usize],
    pad: &[usize],
) -> (Vec<usize>, Vec<f64>) {
    let cin = in_dims[0];
    let sp = &in_dims[1..];
    let nd = sp.len();
    let out_sp: Vec<usize> = (0..nd)
        .map(|d| extent(sp[d], kernel[d], stride[d], pad[d]).expect("window fits"))
        .collect();
    let mut out_dims = vec![cout];
    out_dims.extend(&out_sp);
    let mut w_dims = vec![cout, cin];
    w_dims.extend(kernel);

    let mut out = Vec::new();
    for co in 0..cout {
        let mut o = vec![0; nd];
        loop {
            let mut acc = bias[co] as f64;
            for ci in 0..cin {
                let mut k = vec![0; nd];
                loop {
                    let pos: Vec<i64> = (0..nd)
                        .map(|d| (o[d] * stride[d] + k[d]) as i64 - pad[d] as i64)
                        .collect();
                    if pos
                        .iter()
                        .zip(sp)
                        .all(|(&p, &n)| p >= 0 && (p as usize) < n)
                    {
                        let mut ii = vec![ci];
                        ii.extend(pos.iter().map(|&p| p as usize));
                        let mut wi = vec![co, ci];
                        wi.extend(&k);
                        acc +=
                            input[flat(&ii, in_dims)] as f64 * weights[flat(&wi, &w_dims)] as f64;
                    }
                    if !next_index(&mut k, kernel) {
                        break;
                    }
                }
            }
            out.push(acc);
            if !next_index(&mut o, &out_sp) {
                break;
            }
        }
    }
    (out_dims, out)
}

/// Max ignores padded cells; average divides by the in-bounds count.
pub fn pool(
    input: &[f32],
    in_dims: &[usize],
    max: bool,
    kernel: &[usize],
    stride: &[usize],
    pad: &[usize],
) -> (Vec<usize>, Vec<f64>) {
    let c_n = in_dims[0];
    let sp = &in_dims[1..];
    let nd = sp.len();
    let out_sp: Vec<usize> = (0..nd)
        .map(|d| extent(sp[d], kernel[d], stride[d], pad[d]).expect("window fits"))
        .collect();
    let mut out_dims = vec![c_n];
    out_dims.extend(&out_sp);
    let mut out = Vec::new();
    for c in 0..c_n {
        let mut o = vec![0; nd];
        loop {
            let mut vals = Vec::new();
            let mut k = vec![0; nd];
            loop {
                let pos: Vec<i64> = (0..nd)
                    .map(|d| (o[d] * stride[d] + k[d]) as i64 - pad[d] as i64)
                    .collect();
                if pos
                    .iter()
                    .zip(sp)
                    .all(|(&p, &n)| p >= 0 && (p as usize) < n)
                {
                    let mut ii = vec![c];
                    ii.extend(pos.iter().map(|&p| p as usize));
                    vals.push(input[flat(&ii, in_dims)] as f64);
                }
                if !next_index(&mut k, kernel) {
                    break;
                }
            }
            out.push(if max {
                vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            });
            if !next_index(&mut o, &out_sp) {
                break;
            }
        }
    }
    (out_dims, out)
}

/// `|X_j|^2 / n` for `j = 0..=n/2` by direct summation.
pub fn dft_power(x: &[f64], n: usize) -> Vec<f64> {
    (0..=n / 2)
        .map(|j| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &v) in x.iter().enumerate().take(n) {
                let ang = -2.0 * PI * (j * i) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            (re * re + im * im) / n as f64
        })
        .collect()
}

/// Strongest triangular linear-frequency filter per frame, computed from scratch.
pub fn filterbank_argmax(
    samples: &[f32],
    sr: f64,
    frame: usize,
    hop: usize,
    nfft: usize,
    num_filters: usize,
    pre_emphasis: f64,
) -> Vec<usize> {
    let emph: Vec<f64> = samples
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            s as f64
                - if i > 0 {
                    pre_emphasis * samples[i - 1] as f64
                } else {
                    0.0
                }
        })
        .collect();
    let step = sr / 2.0 / (num_filters + 1) as f64;
    let mut result = Vec::new();
    let mut start = 0;
    while start + frame <= emph.len() {
        let windowed: Vec<f64> = (0..frame)
            .map(|i| {
                emph[start + i] * (0.54 - 0.46 * (2.0 * PI * i as f64 / (frame - 1) as f64).cos())
            })
            .collect();
        let power = dft_power(&windowed, nfft);
        let energies: Vec<f64> = (0..num_filters)
            .map(|k| {
                let (lo, mid, hi) = (
                    k as f64 * step,
                    (k + 1) as f64 * step,
                    (k + 2) as f64 * step,
                );
                power
                    .iter()
                    .enumerate()
                    .map(|(j, p)| {
                        let f = j as f64 * sr / nfft as f64;
                        let w = if f > lo && f <= mid {
                            (f - lo) / (mid - lo)
                        } else if f > mid && f < hi {
                            (hi - f) / (hi - mid)
                        } else {
                            0.0
                        };
                        w * p
                    })
                    .sum()
            })
            .collect();
        let best = (0..num_filters)
            .max_by(|&a, &b| {
                energies[a]
                    .partial_cmp(&energies[b])
                    .unwrap()
                    .then(b.cmp(&a))
            })
            .unwrap();
        result.push(best);
        start += hop;
    }
    result
}

/// Textured test pattern with features at several scales.
pub fn texture(seed: u64, x: f64, y: f64) -> f64 {
    let s = seed as f64;
    0.5 + 0.2 * (0.31 * x + 0.17 * y + s).sin() * (0.23 * y - 0.11 * x + 0.7 * s).cos()
        + 0.15 * (0.9 * x + 0.05 * s).sin() * (0.8 * y + 0.3 * s).sin()
        + 0.1 * ((0.45 * (x + y) + s).sin()).signum()
}

fn hswish(x: f64) -> f64 {
    x * (x + 3.0).clamp(0.0, 6.0) / 6.0
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Coordinate attention on `[C x H x W]`: pool along each axis, shared 1x1
/// transform with hswish, then per-direction sigmoid gates.
/// `w1` is `[M x C]`, `wh`/`ww` are `[C x M]`.
#[allow(clippy::too_many_arguments)]
pub fn coordinate_attention(
    x: &[f32],
    c: usize,
    h: usize,
    w: usize,
    w1: &[f32],
    b1: &[f32],
    wh: &[f32],
    bh: &[f32],
    ww: &[f32],
    bw: &[f32],
) -> Vec<f64> {
    let m = b1.len();
    let at = |ci: usize, y: usize, xx: usize| x[(ci * h + y) * w + xx] as f64;
    let hidden = |pooled: &dyn Fn(usize) -> f64, j: usize| {
        let mut acc = b1[j] as f64;
        for ci in 0..c {
            acc += w1[j * c + ci] as f64 * pooled(ci);
        }
        hswish(acc)
    };
    let mut out = vec![0.0; c * h * w];
    for y in 0..h {
        let row_pool = |ci: usize| (0..w).map(|xx| at(ci, y, xx)).sum::<f64>() / w as f64;
        let hid: Vec<f64> = (0..m).map(|j| hidden(&row_pool, j)).collect();
        for xx in 0..w {
            let col_pool = |ci: usize| (0..h).map(|yy| at(ci, yy, xx)).sum::<f64>() / h as f64;
            let hid_w: Vec<f64> = (0..m).map(|j| hidden(&col_pool, j)).collect();
            for ci in 0..c {
                let gh = sigmoid(
                    bh[ci] as f64 + (0..m).map(|j| wh[ci * m + j] as f64 * hid[j]).sum::<f64>(),
                );
                let gw = sigmoid(
                    bw[ci] as f64
                        + (0..m)
                            .map(|j| ww[ci * m + j] as f64 * hid_w[j])
                            .sum::<f64>(),
                );
                out[(ci * h + y) * w + xx] = at(ci, y, xx) * gh * gw;
            }
        }
    }
    out
}
