//! Sparse pyramidal Lucas-Kanade flow and its dense rasterization for the
//! motion stream.

mod corners;
mod lk;
mod raster;

pub use corners::shi_tomasi_corners;
pub use lk::{build_pyramid, pyr_lk_flow};
pub use raster::{rasterize_flow, FLOW_CLAMP_PX};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Smallest accepted image side; leaves room for a few pyramid levels.
pub const MIN_IMAGE_SIDE: usize = 16;

/// Single-channel image with values in `[0, 1]`, stored `[H x W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pixels: Tensor,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height < MIN_IMAGE_SIDE || width < MIN_IMAGE_SIDE {
            return Err(Error::shape(format!(
                "gray image {height}x{width} is smaller than {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}"
            )));
        }
        Ok(Self {
            pixels: Tensor::new(&[height, width], data)?,
        })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f32) -> Result<Self> {
        let data = (0..height * width)
            .map(|i| f(i % width, i / width))
            .collect();
        Self::new(height, width, data)
    }

    /// Luma (0.299 R + 0.587 G + 0.114 B) of a `[3 x H x W]` frame.
    pub fn from_rgb(frame: &Tensor) -> Result<Self> {
        let d = frame.dims();
        if d.len() != 3 || d[0] != 3 {
            return Err(Error::shape(format!(
                "expected an RGB frame [3 x H x W], got {d:?}"
            )));
        }
        let plane = d[1] * d[2];
        let p = frame.data();
        let data = (0..plane)
            .map(|i| 0.299 * p[i] + 0.587 * p[plane + i] + 0.114 * p[2 * plane + i])
            .collect();
        Self::new(d[1], d[2], data)
    }

    pub fn height(&self) -> usize {
        self.pixels.dims()[0]
    }

    pub fn width(&self) -> usize {
        self.pixels.dims()[1]
    }

    pub fn data(&self) -> &[f32] {
        self.pixels.data()
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels.data()[y * self.width() + x]
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.pixels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LkParams {
    /// Odd tracking window side.
    pub window: usize,
    /// Total pyramid levels including full resolution.
    pub pyramid_levels: usize,
    pub max_iters: usize,
    /// Stop when the per-iteration update is below this many pixels.
    pub epsilon: f32,
    pub max_corners: usize,
    pub quality_level: f32,
    pub min_distance: f32,
}

impl Default for LkParams {
    fn default() -> Self {
        Self {
            window: 21,
            pyramid_levels: 3,
            max_iters: 30,
            epsilon: 0.01,
            max_corners: 200,
            quality_level: 0.01,
            min_distance: 7.0,
        }
    }
}

impl LkParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::param(format!(
                "LK window {} must be odd and >= 3",
                self.window
            )));
        }
        if self.pyramid_levels == 0 {
            return Err(Error::param("LK needs at least one pyramid level"));
        }
        Ok(())
    }
}

/// Tracked points: `status[i]` false means `displacements[i]` is `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowVectors {
    pub points: Vec<(f32, f32)>,
    pub displacements: Vec<(f32, f32)>,
    pub status: Vec<bool>,
}

impl FlowVectors {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn valid(&self) -> impl Iterator<Item = ((f32, f32), (f32, f32))> + '_ {
        self.points
            .iter()
            .zip(&self.displacements)
            .zip(&self.status)
            .filter(|(_, &ok)| ok)
            .map(|((&p, &d), _)| (p, d))
    }
}

/// Dense `[2 x H x W]` field; channel 0 is u, channel 1 is v.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub field: Tensor,
}

/// Per-pair flow over a clip, stacked `[2 x T x H x W]`.
///
/// Corners are re-detected on every frame `t` and tracked into `t + 1`; the
/// final field is repeated once so the temporal extent equals `frames.len()`.
pub fn flow_sequence(
    frames: &[GrayImage],
    expected_frames: usize,
    params: &LkParams,
) -> Result<Tensor> {
    params.validate()?;
    if frames.len() != expected_frames {
        return Err(Error::param(format!(
            "flow sequence needs exactly {expected_frames} frames, got {}",
            frames.len()
        )));
    }
    if expected_frames < 2 {
        return Err(Error::param("flow sequence needs at least two frames"));
    }
    let (h, w) = (frames[0].height(), frames[0].width());
    if let Some(i) = frames
        .iter()
        .position(|f| f.height() != h || f.width() != w)
    {
        return Err(Error::shape(format!(
            "frame {i} is {}x{}, expected {h}x{w}",
            frames[i].height(),
            frames[i].width()
        )));
    }

    let fields: Vec<Tensor> = frames
        .par_windows(2)
        .map(|pair| {
            let points = shi_tomasi_corners(&pair[0], params);
            let vectors = pyr_lk_flow(&pair[0], &pair[1], &points, params)?;
            Ok(rasterize_flow(&vectors, h, w).field)
        })
        .collect::<Result<_>>()?;

    let t_len = expected_frames;
    let plane = h * w;
    let mut data = vec![0f32; 2 * t_len * plane];
    for t in 0..t_len {
        let src = &fields[t.min(fields.len() - 1)];
        for c in 0..2 {
            let dst = (c * t_len + t) * plane;
            data[dst..dst + plane].copy_from_slice(&src.data()[c * plane..(c + 1) * plane]);
        }
    }
    Tensor::new(&[2, t_len, h, w], data)
}
