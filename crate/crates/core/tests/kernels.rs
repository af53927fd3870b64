mod support;

use icanet_core::ops::{conv, output_extent, pool, softmax, ConvSpec, PoolKind, PoolSpec};
use icanet_core::Tensor;
use proptest::prelude::*;
use support::oracle;

fn spatial(rank: usize) -> impl Strategy<Value = Vec<(usize, usize, usize, usize)>> {
    // (extent, kernel, stride, padding) per axis
    prop::collection::vec((1usize..40, 1usize..8, 1usize..5, 0usize..4), rank)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn conv_shape_law(rank in 2usize..=3, cin in 1usize..5, cout in 1usize..5, axes in spatial(3)) {
        let axes = &axes[..rank];
        let spec = ConvSpec {
            in_channels: cin,
            out_channels: cout,
            kernel: axes.iter().map(|a| a.1).collect(),
            stride: axes.iter().map(|a| a.2).collect(),
            padding: axes.iter().map(|a| a.3).collect(),
        };
        let mut input = vec![cin];
        input.extend(axes.iter().map(|a| a.0));
        let expected: Option<Vec<usize>> = axes
            .iter()
            .map(|&(n, k, s, p)| oracle::extent(n, k, s, p))
            .collect();
        match (spec.output_dims(&input), expected) {
            (Ok(got), Some(sp)) => {
                prop_assert_eq!(got[0], cout);
                prop_assert_eq!(&got[1..], &sp[..]);
            }
            (Err(_), None) => {}
            (got, want) => prop_assert!(false, "engine {:?} vs oracle {:?}", got, want),
        }
    }

    #[test]
    fn pool_shape_law(rank in 2usize..=3, c in 1usize..5, axes in spatial(3)) {
        let axes = &axes[..rank];
        let k: Vec<usize> = axes.iter().map(|a| a.1).collect();
        let s: Vec<usize> = axes.iter().map(|a| a.2).collect();
        let p: Vec<usize> = axes.iter().map(|a| a.3).collect();
        let spec = PoolSpec::new(PoolKind::Max, &k, &s, &p);
        let mut input = vec![c];
        input.extend(axes.iter().map(|a| a.0));
        let got = spec.output_dims(&input);
        if axes.iter().any(|a| a.3 >= a.1) {
            prop_assert!(got.is_err());
        } else {
            let expected: Option<Vec<usize>> = axes.iter().map(|&(n, k, s, p)| oracle::extent(n, k, s, p)).collect();
            match (got, expected) {
                (Ok(got), Some(sp)) => prop_assert_eq!(&got[1..], &sp[..]),
                (Err(_), None) => {}
                (got, want) => prop_assert!(false, "engine {:?} vs oracle {:?}", got, want),
            }
        }
    }

    #[test]
    fn softmax_sums_to_one_and_ignores_shift(v in prop::collection::vec(-50f32..50.0, 1..12), shift in -20f32..20.0) {
        let x = Tensor::vector(&v).unwrap();
        let y = softmax(&x);
        let total: f64 = y.data().iter().map(|&p| p as f64).sum();
        prop_assert!((total - 1.0).abs() < 1e-5);
        prop_assert!(y.data().iter().all(|&p| (0.0..=1.0).contains(&p)));
        let shifted = softmax(&Tensor::vector(&v.iter().map(|a| a + shift).collect::<Vec<_>>()).unwrap());
        prop_assert!(y.max_abs_diff(&shifted) < 1e-5);
    }
}

#[test]
fn shape_law_known_instances() {
    assert_eq!(output_extent(224, 3, 1, 1), Some(224));
    assert_eq!(output_extent(224, 2, 2, 0), Some(112));
    assert_eq!(output_extent(79, 7, 2, 3), Some(40));
    assert_eq!(output_extent(2, 3, 1, 0), None);
}

fn rand_tensor(rng: &mut icanet_core::io::SplitMix64, dims: &[usize]) -> Tensor {
    Tensor::from_fn(dims, |_| rng.uniform(-1.0, 1.0) as f32).unwrap()
}

#[test]
fn conv_and_pool_match_loop_oracle() {
    let mut rng = icanet_core::io::SplitMix64::new(2024);
    for case in 0..50 {
        let rank = 2 + case % 2;
        let cin = 1 + rng.below(3) as usize;
        let cout = 1 + rng.below(3) as usize;
        let mut dims = vec![cin];
        let (mut k, mut s, mut p) = (vec![], vec![], vec![]);
        for _ in 0..rank {
            let kk = 1 + rng.below(3) as usize;
            dims.push(kk + rng.below(6) as usize);
            k.push(kk);
            s.push(1 + rng.below(2) as usize);
            p.push(rng.below(kk as u64) as usize);
        }
        let spec = ConvSpec {
            in_channels: cin,
            out_channels: cout,
            kernel: k.clone(),
            stride: s.clone(),
            padding: p.clone(),
        };
        let x = rand_tensor(&mut rng, &dims);
        let w = rand_tensor(&mut rng, &spec.weight_dims());
        let b = rand_tensor(&mut rng, &[cout]);

        let got = conv(&x, &w, &b, &spec).unwrap();
        let (odims, want) = oracle::conv(x.data(), &dims, w.data(), cout, b.data(), &k, &s, &p);
        assert_eq!(got.dims(), odims.as_slice(), "case {case}");
        for (g, w) in got.data().iter().zip(&want) {
            assert!((*g as f64 - w).abs() < 1e-6, "conv case {case}: {g} vs {w}");
        }

        for (kind, max) in [(PoolKind::Max, true), (PoolKind::Avg, false)] {
            let got = pool(&x, &PoolSpec::new(kind, &k, &s, &p)).unwrap();
            let (odims, want) = oracle::pool(x.data(), &dims, max, &k, &s, &p);
            assert_eq!(got.dims(), odims.as_slice());
            for (g, w) in got.data().iter().zip(&want) {
                assert!((*g as f64 - w).abs() < 1e-6, "pool case {case}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn conv_is_linear_in_input() {
    let mut rng = icanet_core::io::SplitMix64::new(5);
    let spec = ConvSpec::uniform(3, 2, 3, 3, 1, 1);
    let a = rand_tensor(&mut rng, &[2, 4, 5, 6]);
    let b = rand_tensor(&mut rng, &[2, 4, 5, 6]);
    let w = rand_tensor(&mut rng, &spec.weight_dims());
    let zero = Tensor::zeros(&[3]).unwrap();
    let sum = Tensor::new(
        a.dims(),
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| 2.0 * x + y)
            .collect(),
    )
    .unwrap();
    let lhs = conv(&sum, &w, &zero, &spec).unwrap();
    let ca = conv(&a, &w, &zero, &spec).unwrap();
    let cb = conv(&b, &w, &zero, &spec).unwrap();
    let rhs = Tensor::new(
        ca.dims(),
        ca.data()
            .iter()
            .zip(cb.data())
            .map(|(x, y)| 2.0 * x + y)
            .collect(),
    )
    .unwrap();
    assert!(lhs.max_abs_diff(&rhs) < 1e-5);
}

#[test]
fn conv_is_deterministic_across_thread_counts() {
    let mut rng = icanet_core::io::SplitMix64::new(9);
    let spec = ConvSpec::uniform(3, 8, 16, 3, 1, 1);
    let x = rand_tensor(&mut rng, &[8, 6, 20, 20]);
    let w = rand_tensor(&mut rng, &spec.weight_dims());
    let b = rand_tensor(&mut rng, &[16]);
    let run = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| conv(&x, &w, &b, &spec).unwrap())
    };
    assert_eq!(run(1), run(4));
}
