//! Pre-extracted frame directories (`frame_%05d.ppm`, binary P6, maxval 255),
//! uniform temporal sampling, and square resizing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.ppm")
}

fn parse_frame_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".ppm")?;
    if digits.len() != 5 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Reads every `frame_NNNNN.ppm` in `dir` as `[3 x H x W]` in `[0, 1]`.
pub fn read_frames(dir: &Path) -> Result<Vec<Tensor>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut indices = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if let Some(i) = entry.file_name().to_str().and_then(parse_frame_index) {
            indices.push(i);
        }
    }
    indices.sort_unstable();
    if indices.is_empty() {
        return Err(Error::Frames(format!(
            "no frame_NNNNN.ppm files in {}",
            dir.display()
        )));
    }
    if let Some(gap) = indices.iter().enumerate().find(|(pos, &i)| *pos != i) {
        return Err(Error::Frames(format!(
            "missing {} in {}",
            frame_file_name(gap.0),
            dir.display()
        )));
    }

    let mut frames: Vec<Tensor> = Vec::with_capacity(indices.len());
    for i in indices {
        let path = dir.join(frame_file_name(i));
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let frame =
            parse_ppm(&bytes).map_err(|e| Error::Frames(format!("{}: {e}", path.display())))?;
        if let Some(first) = frames.first() {
            if first.dims() != frame.dims() {
                return Err(Error::Frames(format!(
                    "{} is {:?}, earlier frames are {:?}",
                    path.display(),
                    frame.dims(),
                    first.dims()
                )));
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Binary P6 with maxval 255 into `[3 x H x W]` planes scaled by 1/255.
pub fn parse_ppm(bytes: &[u8]) -> std::result::Result<Tensor, String> {
    let mut pos = 0;
    let mut header = Vec::with_capacity(4);
    while header.len() < 4 {
        while pos < bytes.len() {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PPM header".into());
        }
        header.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if header[0] != "P6" {
        return Err(format!("magic `{}` is not P6", header[0]));
    }
    let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| format!("bad {what} `{s}`"));
    let (w, h, maxval) = (
        num(&header[1], "width")?,
        num(&header[2], "height")?,
        num(&header[3], "maxval")?,
    );
    if maxval != 255 {
        return Err(format!("maxval {maxval} is not 255"));
    }
    if w == 0 || h == 0 {
        return Err("zero image dimension".into());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = w * h * 3;
    if bytes.len() < pos + need {
        return Err(format!(
            "raster has {} bytes, expected {need}",
            bytes.len().saturating_sub(pos)
        ));
    }
    let raster = &bytes[pos..pos + need];
    let plane = w * h;
    let mut data = vec![0f32; 3 * plane];
    for (i, px) in raster.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * plane + i] = px[c] as f32 / 255.0;
        }
    }
    Tensor::new(&[3, h, w], data).map_err(|e| e.to_string())
}

pub fn encode_ppm(frame: &Tensor) -> Result<Vec<u8>> {
    let d = frame.dims();
    if d.len() != 3 || d[0] != 3 {
        return Err(Error::shape(format!("PPM needs [3 x H x W], got {d:?}")));
    }
    let (h, w) = (d[1], d[2]);
    let plane = h * w;
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    let p = frame.data();
    for i in 0..plane {
        for c in 0..3 {
            out.push((p[c * plane + i].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    Ok(out)
}

pub fn write_ppm(path: &Path, frame: &Tensor) -> Result<()> {
    fs::write(path, encode_ppm(frame)?).map_err(|e| Error::io(path, e))
}

/// `round(i * (n - 1) / (target - 1))` for `i in 0..target`, rounding halves up.
pub fn sample_indices(n: usize, target: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::Frames("cannot sample from an empty clip".into()));
    }
    if target == 0 {
        return Err(Error::param("sample target must be positive"));
    }
    if target == 1 {
        return Ok(vec![0]);
    }
    let den = target - 1;
    Ok((0..target)
        .map(|i| (2 * i * (n - 1) + den) / (2 * den))
        .collect())
}

pub fn sample_frames<T: Clone>(frames: &[T], target: usize) -> Result<Vec<T>> {
    Ok(sample_indices(frames.len(), target)?
        .into_iter()
        .map(|i| frames[i].clone())
        .collect())
}

/// Center-crops `[C x H x W]` to a square, then nearest-neighbour resizes to `size`.
pub fn fit_square(frame: &Tensor, size: usize) -> Result<Tensor> {
    let d = frame.dims();
    if d.len() != 3 {
        return Err(Error::shape(format!("expected [C x H x W], got {d:?}")));
    }
    let (c, h, w) = (d[0], d[1], d[2]);
    let side = h.min(w);
    let (y0, x0) = ((h - side) / 2, (w - side) / 2);
    let map: Vec<usize> = (0..size).map(|o| o * side / size).collect();
    let src = frame.data();
    let mut data = Vec::with_capacity(c * size * size);
    for ch in 0..c {
        for &sy in &map {
            let row = (ch * h + y0 + sy) * w + x0;
            data.extend(map.iter().map(|&sx| src[row + sx]));
        }
    }
    Tensor::new(&[c, size, size], data)
}
