//! Deterministic fixtures: Glorot-initialised weight stores and small
//! synthetic clips (a textured square drifting over a static background,
//! plus a pure tone).

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use super::frames::{frame_file_name, write_ppm};
use super::manifest::ClipRecord;
use super::rng::SplitMix64;
use super::wav::{write_wav, WAV_SAMPLE_RATE};
use super::weights::WeightStore;
use crate::audio::AudioSignal;
use crate::error::{Error, Result};
use crate::fusion::Emotion;
use crate::nets::NetworkDesc;
use crate::tensor::Tensor;

const CLIP_TAG: u64 = 0xC11B;
pub const SYNTH_FRAME_SIZE: usize = 64;
const SQUARE: usize = 16;
pub const SYNTH_AUDIO_SECS: f64 = 2.0;

/// Weights ~ U(-a, a) with `a = sqrt(6 / (fan_in + fan_out))`; biases are zero.
///
/// Each tensor draws from its own stream keyed by its position in network
/// order, so adding a layer at the end leaves earlier tensors unchanged.
pub fn glorot_weights(net: &NetworkDesc, seed: u64) -> Result<WeightStore> {
    let mut store = WeightStore::new();
    for (i, p) in net.parameters().into_iter().enumerate() {
        let t = if p.is_bias {
            Tensor::zeros(&p.dims)?
        } else {
            let a = (6.0 / (p.fan_in + p.fan_out) as f64).sqrt();
            let mut rng = SplitMix64::stream(seed, i as u64);
            Tensor::from_fn(&p.dims, |_| rng.uniform(-a, a) as f32)?
        };
        store.insert(p.name, t)?;
    }
    Ok(store)
}

/// Everything a synthetic clip is made of, before it touches disk.
#[derive(Debug, Clone)]
pub struct SynthClip {
    pub clip_id: String,
    pub session: u8,
    pub label: Emotion,
    pub frames: Vec<Tensor>,
    pub audio: AudioSignal,
}

pub fn synth_clip(seed: u64) -> Result<SynthClip> {
    let mut rng = SplitMix64::stream(seed, CLIP_TAG);
    let num_frames = 60 + rng.below(41) as usize;
    let vx = rng.below(5) as i64 - 2;
    let vy = rng.below(5) as i64 - 2;
    let span = (SYNTH_FRAME_SIZE - SQUARE) as i64;
    let x0 = rng.below(span as u64) as i64;
    let y0 = rng.below(span as u64) as i64;
    let (fa, fb, phase) = (
        rng.uniform(0.05, 0.3),
        rng.uniform(0.05, 0.3),
        rng.uniform(0.0, 2.0 * PI),
    );
    let tint = [
        rng.uniform(0.5, 1.0),
        rng.uniform(0.5, 1.0),
        rng.uniform(0.5, 1.0),
    ];
    let texture: Vec<f64> = (0..SQUARE * SQUARE)
        .map(|_| rng.uniform(0.55, 1.0))
        .collect();
    let tone_hz = 200.0 + rng.below(1800) as f64;

    let n = SYNTH_FRAME_SIZE;
    let background: Vec<f64> = (0..n * n)
        .map(|i| {
            let (x, y) = ((i % n) as f64, (i / n) as f64);
            0.3 + 0.1 * (fa * x + fb * y + phase).sin()
        })
        .collect();

    let mut frames = Vec::with_capacity(num_frames);
    for t in 0..num_frames as i64 {
        let sx = (x0 + vx * t).rem_euclid(span + 1) as usize;
        let sy = (y0 + vy * t).rem_euclid(span + 1) as usize;
        let frame = Tensor::from_fn(&[3, n, n], |i| {
            let c = i / (n * n);
            let p = i % (n * n);
            let (x, y) = (p % n, p / n);
            let inside = x >= sx && x < sx + SQUARE && y >= sy && y < sy + SQUARE;
            let v = if inside {
                tint[c] * texture[(y - sy) * SQUARE + (x - sx)]
            } else {
                background[p]
            };
            v as f32
        })?;
        frames.push(frame);
    }

    let len = (SYNTH_AUDIO_SECS * WAV_SAMPLE_RATE as f64) as usize;
    let samples = (0..len)
        .map(|i| (0.5 * (2.0 * PI * tone_hz * i as f64 / WAV_SAMPLE_RATE as f64).sin()) as f32)
        .collect();

    Ok(SynthClip {
        clip_id: format!("synth_{seed:06}"),
        session: (seed % 5) as u8 + 1,
        label: Emotion::from_index((seed % 4) as usize)?,
        frames,
        audio: AudioSignal::new(samples, WAV_SAMPLE_RATE)?,
    })
}

/// Writes `<out>/<clip_id>/audio.wav` and `<out>/<clip_id>/frames/`.
///
/// The returned record holds paths relative to `out`, ready for a manifest there.
pub fn write_synth_clip(clip: &SynthClip, out: &Path) -> Result<ClipRecord> {
    let rel_dir = PathBuf::from(&clip.clip_id);
    let frames_rel = rel_dir.join("frames");
    let frames_dir = out.join(&frames_rel);
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    for (i, f) in clip.frames.iter().enumerate() {
        write_ppm(&frames_dir.join(frame_file_name(i)), f)?;
    }
    let wav_rel = rel_dir.join("audio.wav");
    write_wav(&out.join(&wav_rel), &clip.audio)?;
    Ok(ClipRecord {
        clip_id: clip.clip_id.clone(),
        session: clip.session,
        label: clip.label,
        wav_path: wav_rel,
        frames_dir: frames_rel,
        num_frames: clip.frames.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{Architecture, InputProfile};

    #[test]
    fn clip_is_deterministic() {
        let a = synth_clip(11).unwrap();
        let b = synth_clip(11).unwrap();
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.audio, b.audio);
        assert_ne!(a.frames, synth_clip(12).unwrap().frames);
        assert_eq!(a.label, Emotion::Anger);
        assert_eq!(a.session, 2);
        assert!((60..=100).contains(&a.frames.len()));
    }

    #[test]
    fn glorot_bounds_and_shapes() {
        let net = Architecture::CaVgg16Three.build(4, InputProfile::SMALL);
        let store = glorot_weights(&net, 3).unwrap();
        net.validate_weights(&store).unwrap();
        for p in net.parameters() {
            let t = store.get(&p.name).unwrap();
            if p.is_bias {
                assert!(t.data().iter().all(|&v| v == 0.0));
            } else {
                let a = (6.0 / (p.fan_in + p.fan_out) as f64).sqrt() as f32;
                assert!(t.data().iter().all(|v| v.abs() <= a), "{}", p.name);
            }
        }
    }
}
