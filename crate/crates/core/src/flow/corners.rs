use super::{GrayImage, LkParams};

/// Central-difference gradients; zero on the one-pixel border.
pub(super) fn gradients(img: &GrayImage) -> (Vec<f32>, Vec<f32>) {
    let (h, w) = (img.height(), img.width());
    let p = img.data();
    let mut gx = vec![0f32; h * w];
    let mut gy = vec![0f32; h * w];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            gx[i] = (p[i + 1] - p[i - 1]) * 0.5;
            gy[i] = (p[i + w] - p[i - w]) * 0.5;
        }
    }
    (gx, gy)
}

/// Minimum eigenvalue of the symmetric 2x2 matrix `[[a, b], [b, c]]`.
pub(crate) fn min_eigenvalue(a: f64, b: f64, c: f64) -> f64 {
    let half_tr = (a + c) * 0.5;
    let half_diff = (a - c) * 0.5;
    half_tr - (half_diff * half_diff + b * b).sqrt()
}

/// Shi-Tomasi "good features": minimum eigenvalue of the 3x3 structure tensor,
/// thresholded relative to the strongest response and thinned greedily.
///
/// Returns points sorted by response (descending), ties by `(y, x)`.
pub fn shi_tomasi_corners(img: &GrayImage, params: &LkParams) -> Vec<(f32, f32)> {
    let (h, w) = (img.height(), img.width());
    let (gx, gy) = gradients(img);

    let mut responses = Vec::new();
    let mut best = 0f64;
    for y in 2..h - 2 {
        for x in 2..w - 2 {
            let (mut a, mut b, mut c) = (0f64, 0f64, 0f64);
            for dy in 0..3 {
                for dx in 0..3 {
                    let i = (y + dy - 1) * w + (x + dx - 1);
                    let (ix, iy) = (gx[i] as f64, gy[i] as f64);
                    a += ix * ix;
                    b += ix * iy;
                    c += iy * iy;
                }
            }
            let r = min_eigenvalue(a, b, c);
            best = best.max(r);
            responses.push((r, y, x));
        }
    }
    if best <= 0.0 {
        return Vec::new();
    }

    let threshold = params.quality_level as f64 * best;
    let mut candidates: Vec<(f64, usize, usize)> = responses
        .into_iter()
        .filter(|&(r, _, _)| r > threshold)
        .collect();
    candidates.sort_by(|l, r| r.0.total_cmp(&l.0).then(l.1.cmp(&r.1)).then(l.2.cmp(&r.2)));

    let min_d2 = params.min_distance * params.min_distance;
    let mut picked: Vec<(f32, f32)> = Vec::new();
    for (_, y, x) in candidates {
        if picked.len() >= params.max_corners {
            break;
        }
        let (px, py) = (x as f32, y as f32);
        let clear = picked
            .iter()
            .all(|&(qx, qy)| (qx - px).powi(2) + (qy - py).powi(2) >= min_d2);
        if clear {
            picked.push((px, py));
        }
    }
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(size: usize, x0: usize, y0: usize, side: usize) -> GrayImage {
        GrayImage::from_fn(size, size, |x, y| {
            if (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn flat_image_has_no_corners() {
        let img = GrayImage::from_fn(32, 32, |_, _| 0.4).unwrap();
        assert!(shi_tomasi_corners(&img, &LkParams::default()).is_empty());
    }

    #[test]
    fn square_corners_found() {
        let img = square(32, 12, 12, 4);
        let params = LkParams {
            min_distance: 2.0,
            ..Default::default()
        };
        let pts = shi_tomasi_corners(&img, &params);
        // geometric corners of pixels 12..=15 sit on the pixel boundaries
        for (cx, cy) in [(11.5, 11.5), (15.5, 11.5), (11.5, 15.5), (15.5, 15.5)] {
            assert!(
                pts.iter()
                    .any(|&(x, y)| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() <= 1.5),
                "no point near ({cx}, {cy}) in {pts:?}"
            );
        }
    }

    #[test]
    fn diagonal_min_distance_keeps_one() {
        let img = square(32, 8, 10, 6);
        let params = LkParams {
            min_distance: (32f32 * 32.0 * 2.0).sqrt(),
            ..Default::default()
        };
        assert_eq!(shi_tomasi_corners(&img, &params).len(), 1);
    }

    #[test]
    fn respects_max_corners() {
        let img = GrayImage::from_fn(48, 48, |x, y| ((x * 7 + y * 13) % 5) as f32 / 4.0).unwrap();
        let params = LkParams {
            max_corners: 5,
            min_distance: 1.0,
            ..Default::default()
        };
        assert!(shi_tomasi_corners(&img, &params).len() <= 5);
    }
}
