//! RIFF/WAVE reader and writer restricted to 16-bit PCM mono at 16 kHz.

use std::fs;
use std::path::Path;

use crate::audio::AudioSignal;
use crate::error::{Error, Result};

pub const WAV_SAMPLE_RATE: u32 = 16_000;

pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&bytes)
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Format {
    audio_format: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

pub fn parse_wav(bytes: &[u8]) -> Result<AudioSignal> {
    if bytes.len() < 12 {
        return Err(Error::Wav(format!(
            "file of {} bytes is too short for a RIFF header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(Error::Wav("missing RIFF magic".into()));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::Wav("RIFF form type is not WAVE".into()));
    }

    let mut pos = 12;
    let mut format: Option<Format> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        if body + size > bytes.len() {
            return Err(Error::Wav(format!(
                "chunk `{}` claims {size} bytes but only {} remain",
                String::from_utf8_lossy(id),
                bytes.len() - body
            )));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::Wav(format!("fmt chunk size {size} < 16")));
                }
                format = Some(Format {
                    audio_format: u16_at(bytes, body),
                    channels: u16_at(bytes, body + 2),
                    sample_rate: u32_at(bytes, body + 4),
                    bits_per_sample: u16_at(bytes, body + 14),
                });
            }
            b"data" => {
                let fmt = format
                    .as_ref()
                    .ok_or_else(|| Error::Wav("data chunk precedes fmt chunk".into()))?;
                check_format(fmt)?;
                if !size.is_multiple_of(2) {
                    return Err(Error::Wav(format!(
                        "data chunk size {size} is not a whole number of 16-bit samples"
                    )));
                }
                let samples = bytes[body..body + size]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
                    .collect();
                return AudioSignal::new(samples, fmt.sample_rate)
                    .map_err(|_| Error::Wav("data chunk holds no samples".into()));
            }
            _ => {}
        }
        pos = body + size + (size & 1);
    }
    Err(Error::Wav(if format.is_none() {
        "no fmt chunk".into()
    } else {
        "no data chunk".into()
    }))
}

fn check_format(f: &Format) -> Result<()> {
    if f.audio_format != 1 {
        return Err(Error::Wav(format!(
            "audio format {} is not PCM (1)",
            f.audio_format
        )));
    }
    if f.channels != 1 {
        return Err(Error::Wav(format!(
            "channel count {} is not mono (1)",
            f.channels
        )));
    }
    if f.bits_per_sample != 16 {
        return Err(Error::Wav(format!(
            "bits per sample {} is not 16",
            f.bits_per_sample
        )));
    }
    if f.sample_rate != WAV_SAMPLE_RATE {
        return Err(Error::Wav(format!(
            "sample rate {} Hz is not {WAV_SAMPLE_RATE} Hz",
            f.sample_rate
        )));
    }
    Ok(())
}

/// Quantizes to 16-bit PCM (`round(x * 32768)`, saturating).
pub fn encode_wav(signal: &AudioSignal) -> Vec<u8> {
    encode_pcm16(signal, 1)
}

fn encode_pcm16(signal: &AudioSignal, channels: u16) -> Vec<u8> {
    let data_len = signal.samples.len() * 2 * channels as usize;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&signal.sample_rate.to_le_bytes());
    let block = 2 * channels as u32;
    out.extend_from_slice(&(signal.sample_rate * block).to_le_bytes());
    out.extend_from_slice(&(block as u16).to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &signal.samples {
        let q = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        for _ in 0..channels {
            out.extend_from_slice(&q.to_le_bytes());
        }
    }
    out
}

pub fn write_wav(path: &Path, signal: &AudioSignal) -> Result<()> {
    fs::write(path, encode_wav(signal)).map_err(|e| Error::io(path, e))
}
