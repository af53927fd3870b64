mod support;

use icanet_core::flow::{pyr_lk_flow, shi_tomasi_corners, GrayImage, LkParams};
use support::oracle::texture;

fn pattern(seed: u64, dx: f64, dy: f64) -> GrayImage {
    GrayImage::from_fn(64, 64, |x, y| {
        texture(seed, x as f64 - dx, y as f64 - dy) as f32
    })
    .unwrap()
}

fn interior(p: (f32, f32)) -> bool {
    let m = 12.0;
    p.0 >= m && p.1 >= m && p.0 < 64.0 - m && p.1 < 64.0 - m
}

#[test]
fn recovers_integer_translations() {
    let params = LkParams::default();
    let mut rng = icanet_core::io::SplitMix64::new(77);
    for seed in 0..20u64 {
        let (dx, dy) = loop {
            let d = (rng.below(7) as i64 - 3, rng.below(7) as i64 - 3);
            if d != (0, 0) {
                break d;
            }
        };
        let a = pattern(seed, 0.0, 0.0);
        let b = pattern(seed, dx as f64, dy as f64);
        let pts = shi_tomasi_corners(&a, &params);
        let v = pyr_lk_flow(&a, &b, &pts, &params).unwrap();
        let mut checked = 0;
        for (p, d) in v.valid().filter(|(p, _)| interior(*p)) {
            let err = ((d.0 - dx as f32).powi(2) + (d.1 - dy as f32).powi(2)).sqrt();
            assert!(
                err <= 0.2,
                "seed {seed} shift ({dx},{dy}) at {p:?}: got {d:?}"
            );
            checked += 1;
        }
        assert!(
            checked >= 5,
            "seed {seed}: only {checked} interior points tracked"
        );
    }
}

#[test]
fn zero_motion_stays_put() {
    let params = LkParams::default();
    for seed in 0..5 {
        let a = pattern(seed, 0.0, 0.0);
        let v = pyr_lk_flow(&a, &a, &shi_tomasi_corners(&a, &params), &params).unwrap();
        assert!(v.valid().count() > 0);
        for (_, d) in v.valid() {
            assert!(d.0.abs() < 1e-3 && d.1.abs() < 1e-3, "{d:?}");
        }
    }
}

#[test]
fn forward_and_backward_flow_cancel() {
    let params = LkParams::default();
    let a = pattern(3, 0.0, 0.0);
    let b = pattern(3, 2.0, -1.0);
    let pts = shi_tomasi_corners(&a, &params);
    let fwd = pyr_lk_flow(&a, &b, &pts, &params).unwrap();
    let moved: Vec<(f32, f32)> = fwd.valid().map(|(p, d)| (p.0 + d.0, p.1 + d.1)).collect();
    let bwd = pyr_lk_flow(&b, &a, &moved, &params).unwrap();
    let fwd_d: Vec<_> = fwd.valid().map(|(_, d)| d).collect();
    for (i, ok) in bwd.status.iter().enumerate() {
        if *ok && interior(moved[i]) {
            let (f, r) = (fwd_d[i], bwd.displacements[i]);
            assert!(
                (f.0 + r.0).abs() <= 0.4 && (f.1 + r.1).abs() <= 0.4,
                "{f:?} vs {r:?}"
            );
        }
    }
}
