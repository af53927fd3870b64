//! Coarse-to-fine iterative Lucas-Kanade (Bouguet's formulation).

use super::corners::min_eigenvalue;
use super::{FlowVectors, GrayImage, LkParams};
use crate::error::{Error, Result};

/// Points whose structure tensor has a smaller minimum eigenvalue are untrackable.
pub const MIN_EIGEN_THRESHOLD: f64 = 1e-6;

/// One pyramid level stored as a plain row-major plane.
#[derive(Debug, Clone)]
pub struct Level {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Level {
    fn from_image(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.data().to_vec(),
        }
    }

    /// 2x2 box mean; an odd trailing row/column is dropped.
    fn downsample(&self) -> Self {
        let (w, h) = (self.width / 2, self.height / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * self.width + 2 * x;
                let s = self.data[i]
                    + self.data[i + 1]
                    + self.data[i + self.width]
                    + self.data[i + self.width + 1];
                data.push(s * 0.25);
            }
        }
        Self {
            width: w,
            height: h,
            data,
        }
    }

    fn at(&self, x: isize, y: isize) -> f32 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    /// Bilinear read with edge replication.
    pub fn sample(&self, x: f32, y: f32) -> f32 {
        let x0 = x.floor();
        let y0 = y.floor();
        let (fx, fy) = (x - x0, y - y0);
        let (xi, yi) = (x0 as isize, y0 as isize);
        let top = self.at(xi, yi) * (1.0 - fx) + self.at(xi + 1, yi) * fx;
        let bottom = self.at(xi, yi + 1) * (1.0 - fx) + self.at(xi + 1, yi + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    fn gradient(&self, x: f32, y: f32) -> (f32, f32) {
        (
            (self.sample(x + 1.0, y) - self.sample(x - 1.0, y)) * 0.5,
            (self.sample(x, y + 1.0) - self.sample(x, y - 1.0)) * 0.5,
        )
    }
}

/// Image pyramid, finest level first. Stops early once a level would drop below 8 px.
pub fn build_pyramid(img: &GrayImage, levels: usize) -> Vec<Level> {
    let mut pyr = vec![Level::from_image(img)];
    while pyr.len() < levels {
        let last = pyr.last().expect("non-empty");
        if last.width / 2 < 8 || last.height / 2 < 8 {
            break;
        }
        pyr.push(last.downsample());
    }
    pyr
}

pub fn pyr_lk_flow(
    prev: &GrayImage,
    next: &GrayImage,
    points: &[(f32, f32)],
    params: &LkParams,
) -> Result<FlowVectors> {
    params.validate()?;
    if prev.height() != next.height() || prev.width() != next.width() {
        return Err(Error::shape(format!(
            "LK frames differ in shape: {}x{} vs {}x{}",
            prev.height(),
            prev.width(),
            next.height(),
            next.width()
        )));
    }
    let prev_pyr = build_pyramid(prev, params.pyramid_levels);
    let next_pyr = build_pyramid(next, params.pyramid_levels);

    let mut displacements = Vec::with_capacity(points.len());
    let mut status = Vec::with_capacity(points.len());
    for &p in points {
        match track(&prev_pyr, &next_pyr, p, params) {
            Some(d) => {
                displacements.push(d);
                status.push(true);
            }
            None => {
                displacements.push((0.0, 0.0));
                status.push(false);
            }
        }
    }
    Ok(FlowVectors {
        points: points.to_vec(),
        displacements,
        status,
    })
}

fn track(
    prev: &[Level],
    next: &[Level],
    point: (f32, f32),
    params: &LkParams,
) -> Option<(f32, f32)> {
    let base = &prev[0];
    let inside = |x: f32, y: f32| {
        x >= 0.0 && y >= 0.0 && x <= (base.width - 1) as f32 && y <= (base.height - 1) as f32
    };
    if !inside(point.0, point.1) {
        return None;
    }

    let r = (params.window / 2) as isize;
    let n = params.window * params.window;
    let mut tmpl = Vec::with_capacity(n);
    let mut grads = Vec::with_capacity(n);
    let mut guess = (0f32, 0f32);

    for level in (0..prev.len()).rev() {
        let scale = (1u32 << level) as f32;
        let (px, py) = (point.0 / scale, point.1 / scale);
        let (pl, nl) = (&prev[level], &next[level]);

        tmpl.clear();
        grads.clear();
        let (mut gxx, mut gxy, mut gyy) = (0f64, 0f64, 0f64);
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (px + dx as f32, py + dy as f32);
                let (ix, iy) = pl.gradient(x, y);
                gxx += (ix * ix) as f64;
                gxy += (ix * iy) as f64;
                gyy += (iy * iy) as f64;
                tmpl.push(pl.sample(x, y));
                grads.push((ix, iy));
            }
        }

        if min_eigenvalue(gxx, gxy, gyy) < MIN_EIGEN_THRESHOLD {
            if level == 0 {
                return None;
            }
            guess = (guess.0 * 2.0, guess.1 * 2.0);
            continue;
        }
        let det = gxx * gyy - gxy * gxy;

        let mut nu = (0f32, 0f32);
        for _ in 0..params.max_iters {
            let (ox, oy) = (px + guess.0 + nu.0, py + guess.1 + nu.1);
            let (mut bx, mut by) = (0f64, 0f64);
            let mut k = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let diff = tmpl[k] - nl.sample(ox + dx as f32, oy + dy as f32);
                    bx += (diff * grads[k].0) as f64;
                    by += (diff * grads[k].1) as f64;
                    k += 1;
                }
            }
            let ex = ((gyy * bx - gxy * by) / det) as f32;
            let ey = ((gxx * by - gxy * bx) / det) as f32;
            nu = (nu.0 + ex, nu.1 + ey);
            if !(nu.0.is_finite() && nu.1.is_finite()) {
                return None;
            }
            if (ex * ex + ey * ey).sqrt() < params.epsilon {
                break;
            }
        }
        guess = (guess.0 + nu.0, guess.1 + nu.1);
        if level > 0 {
            guess = (guess.0 * 2.0, guess.1 * 2.0);
        }
    }

    inside(point.0 + guess.0, point.1 + guess.1).then_some(guess)
}
