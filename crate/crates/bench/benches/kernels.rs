use criterion::{black_box, criterion_group, criterion_main, Criterion};

use icanet_core::audio::{lfcc_features, render_spectrogram, AudioSignal, Colormap, LfccParams};
use icanet_core::flow::{pyr_lk_flow, shi_tomasi_corners, GrayImage, LkParams};
use icanet_core::io::SplitMix64;
use icanet_core::nets::{coordinate_attention, CaParams, CA_REDUCTION};
use icanet_core::ops::{conv, ConvSpec};
use icanet_core::Tensor;

fn random(dims: &[usize], seed: u64) -> Tensor {
    let mut rng = SplitMix64::new(seed);
    Tensor::from_fn(dims, |_| rng.uniform(-1.0, 1.0) as f32).unwrap()
}

fn convolution(c: &mut Criterion) {
    let spec3 = ConvSpec::uniform(3, 64, 192, 3, 1, 1);
    let x3 = random(&[64, 8, 28, 28], 1);
    let w3 = random(&spec3.weight_dims(), 2);
    let b3 = Tensor::zeros(&[192]).unwrap();
    c.bench_function("conv3d 64->192 k3 8x28x28", |b| {
        b.iter(|| conv(black_box(&x3), &w3, &b3, &spec3).unwrap())
    });

    let spec2 = ConvSpec::uniform(2, 64, 64, 3, 1, 1);
    let x2 = random(&[64, 56, 56], 3);
    let w2 = random(&spec2.weight_dims(), 4);
    let b2 = Tensor::zeros(&[64]).unwrap();
    c.bench_function("conv2d 64->64 k3 56x56", |b| {
        b.iter(|| conv(black_box(&x2), &w2, &b2, &spec2).unwrap())
    });

    let x = random(&[128, 56, 56], 5);
    let p = CaParams::zeros(128, CA_REDUCTION);
    c.bench_function("coordinate attention 128x56x56", |b| {
        b.iter(|| coordinate_attention(black_box(&x), &p).unwrap())
    });
}

fn audio(c: &mut Criterion) {
    let samples = (0..48_000).map(|i| (i as f32 * 0.3).sin() * 0.5).collect();
    let sig = AudioSignal::new(samples, 16_000).unwrap();
    let params = LfccParams::default();
    c.bench_function("lfcc 3 s", |b| {
        b.iter(|| lfcc_features(black_box(&sig), &params).unwrap())
    });
    let feats = lfcc_features(&sig, &params).unwrap();
    c.bench_function("render 224", |b| {
        b.iter(|| render_spectrogram(black_box(&feats), 224, Colormap::builtin()).unwrap())
    });
}

fn flow(c: &mut Criterion) {
    let tex = |dx: f32| {
        GrayImage::from_fn(112, 112, move |x, y| {
            let (x, y) = (x as f32 - dx, y as f32);
            0.5 + 0.25 * (0.3 * x).sin() * (0.2 * y).cos() + 0.2 * (0.11 * (x + y)).sin()
        })
        .unwrap()
    };
    let (a, b) = (tex(0.0), tex(2.0));
    let params = LkParams::default();
    c.bench_function("shi-tomasi 112", |bn| {
        bn.iter(|| shi_tomasi_corners(black_box(&a), &params))
    });
    let pts = shi_tomasi_corners(&a, &params);
    c.bench_function("pyramidal lk 112", |bn| {
        bn.iter(|| pyr_lk_flow(black_box(&a), &b, &pts, &params).unwrap())
    });
}

criterion_group!(benches, convolution, audio, flow);
criterion_main!(benches);
