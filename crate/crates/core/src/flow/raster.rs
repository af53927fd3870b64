use super::{FlowField, FlowVectors};
use crate::tensor::Tensor;

/// Displacements are clamped to this many pixels, then scaled into `[-1, 1]`.
pub const FLOW_CLAMP_PX: f32 = 20.0;

/// Splats each valid vector at the nearest pixel of its source point.
///
/// When two vectors land on the same pixel the one whose source point has
/// the smaller `(y, x)` wins.
pub fn rasterize_flow(vectors: &FlowVectors, height: usize, width: usize) -> FlowField {
    let plane = height * width;
    let mut data = vec![0f32; 2 * plane];
    let mut owner: Vec<Option<(f32, f32)>> = vec![None; plane];

    for ((x, y), (u, v)) in vectors.valid() {
        let (cx, cy) = ((x + 0.5).floor(), (y + 0.5).floor());
        if cx < 0.0 || cy < 0.0 || cx >= width as f32 || cy >= height as f32 {
            continue;
        }
        let i = cy as usize * width + cx as usize;
        let wins = match owner[i] {
            None => true,
            Some((oy, ox)) => (y, x) < (oy, ox),
        };
        if wins {
            owner[i] = Some((y, x));
            data[i] = u.clamp(-FLOW_CLAMP_PX, FLOW_CLAMP_PX) / FLOW_CLAMP_PX;
            data[plane + i] = v.clamp(-FLOW_CLAMP_PX, FLOW_CLAMP_PX) / FLOW_CLAMP_PX;
        }
    }
    FlowField {
        field: Tensor::new(&[2, height, width], data).expect("positive dims"),
    }
}
