//! LFCC features and spectrogram rendering for the audio stream.
//!
//! Pipeline per clip: pre-emphasis, framing, Hamming window, power spectrum,
//! a triangular filterbank whose centers are equally spaced in *linear*
//! frequency over `[0, sr/2]`, log energies, then an orthonormal DCT-II.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Floor added to filterbank energies before the log.
pub const ENERGY_FLOOR: f64 = 1e-10;

/// Side length of the spectrogram image fed to the audio network.
pub const SPECTROGRAM_SIZE: usize = 224;

const COLORMAP_V1: &str = include_str!("../data/colormap_v1.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("audio signal is empty"));
        }
        if sample_rate == 0 {
            return Err(Error::param("sample rate must be positive"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LfccParams {
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub pre_emphasis: f64,
    pub fft_size: usize,
    pub num_filters: usize,
    pub num_ceps: usize,
    /// When off, the output is the log filterbank energies.
    pub use_dct: bool,
}

impl Default for LfccParams {
    fn default() -> Self {
        Self {
            frame_len_ms: 25.0,
            hop_ms: 10.0,
            pre_emphasis: 0.97,
            fft_size: 512,
            num_filters: 40,
            num_ceps: 40,
            use_dct: true,
        }
    }
}

impl LfccParams {
    pub fn frame_samples(&self, sample_rate: u32) -> usize {
        (self.frame_len_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if !(self.hop_ms > 0.0 && self.hop_ms <= self.frame_len_ms) {
            return Err(Error::param(format!(
                "hop {} ms must be in (0, frame length {} ms]",
                self.hop_ms, self.frame_len_ms
            )));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return Err(Error::param(format!(
                "pre-emphasis {} outside [0, 1)",
                self.pre_emphasis
            )));
        }
        if self.num_filters == 0 || self.num_ceps == 0 || self.num_ceps > self.num_filters {
            return Err(Error::param(format!(
                "need 0 < num_ceps ({}) <= num_filters ({})",
                self.num_ceps, self.num_filters
            )));
        }
        let frame = self.frame_samples(sample_rate);
        let hop = self.hop_samples(sample_rate);
        if frame == 0 || hop == 0 {
            return Err(Error::param("frame and hop must span at least one sample"));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < frame {
            return Err(Error::param(format!(
                "fft size {} must be a power of two >= frame length {frame}",
                self.fft_size
            )));
        }
        Ok(())
    }
}

/// Number of full frames: `1 + floor((n - frame) / hop)`, or 0 when `n < frame`.
pub fn frame_count(n: usize, frame: usize, hop: usize) -> usize {
    if n < frame {
        0
    } else {
        1 + (n - frame) / hop
    }
}

/// Center frequencies (Hz) of `num_filters` filters equally spaced over `(0, sr/2)`.
pub fn filter_centers(num_filters: usize, sample_rate: u32) -> Vec<f64> {
    let spacing = sample_rate as f64 / 2.0 / (num_filters + 1) as f64;
    (1..=num_filters).map(|k| k as f64 * spacing).collect()
}

/// Triangular filters over the `fft_size/2 + 1` non-negative bins.
///
/// Filter `k` rises linearly from center `k-1` to 1 at its own center and
/// falls to 0 at center `k+1` (the band edges 0 Hz and sr/2 act as the
/// outer neighbours).
pub fn linear_filterbank(num_filters: usize, fft_size: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let bins = fft_size / 2 + 1;
    let spacing = sample_rate as f64 / 2.0 / (num_filters + 1) as f64;
    let bin_hz = sample_rate as f64 / fft_size as f64;
    filter_centers(num_filters, sample_rate)
        .into_iter()
        .map(|center| {
            (0..bins)
                .map(|j| (1.0 - (j as f64 * bin_hz - center).abs() / spacing).max(0.0))
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II matrix, `n_out` rows by `n` columns.
pub fn dct_matrix(n: usize, n_out: usize) -> Vec<Vec<f64>> {
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// LFCC matrix `[T x num_ceps]` (or `[T x num_filters]` log energies with `use_dct` off).
pub fn lfcc_features(signal: &AudioSignal, params: &LfccParams) -> Result<Tensor> {
    params.validate(signal.sample_rate)?;
    let frame = params.frame_samples(signal.sample_rate);
    let hop = params.hop_samples(signal.sample_rate);
    let n = signal.samples.len();
    let frames = frame_count(n, frame, hop);
    if frames == 0 {
        return Err(Error::param(format!(
            "signal of {n} samples is shorter than one frame ({frame} samples)"
        )));
    }

    let alpha = params.pre_emphasis;
    let x = &signal.samples;
    let emphasized: Vec<f64> = (0..n)
        .map(|i| {
            let prev = if i == 0 { 0.0 } else { x[i - 1] as f64 };
            x[i] as f64 - alpha * prev
        })
        .collect();

    let window = hamming(frame);
    let bank = linear_filterbank(params.num_filters, params.fft_size, signal.sample_rate);
    let width = if params.use_dct {
        params.num_ceps
    } else {
        params.num_filters
    };
    let dct = params
        .use_dct
        .then(|| dct_matrix(params.num_filters, params.num_ceps));

    let fft = FftPlanner::<f64>::new().plan_fft_forward(params.fft_size);
    let mut buf = vec![Complex::new(0.0, 0.0); params.fft_size];
    let mut power = vec![0f64; params.fft_size / 2 + 1];
    let mut log_energy = vec![0f64; params.num_filters];
    let mut out = Vec::with_capacity(frames * width);

    for t in 0..frames {
        let start = t * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = if i < frame {
                Complex::new(emphasized[start + i] * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr() / params.fft_size as f64;
        }
        for (e, filter) in log_energy.iter_mut().zip(&bank) {
            let energy: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
            *e = (energy + ENERGY_FLOOR).ln();
        }
        match &dct {
            Some(m) => out
                .extend(m.iter().map(|row| {
                    row.iter().zip(&log_energy).map(|(a, b)| a * b).sum::<f64>() as f32
                })),
            None => out.extend(log_energy.iter().map(|&v| v as f32)),
        }
    }
    Tensor::new(&[frames, width], out)
}

/// 256-entry RGB lookup table.
#[derive(Debug, Clone, PartialEq)]
pub struct Colormap {
    entries: Vec<[f32; 3]>,
}

impl Colormap {
    /// The shipped viridis-like table (`data/colormap_v1.txt`).
    pub fn builtin() -> &'static Colormap {
        static MAP: OnceLock<Colormap> = OnceLock::new();
        MAP.get_or_init(|| Colormap::parse(COLORMAP_V1).expect("shipped colormap parses"))
    }

    pub fn builtin_source() -> &'static str {
        COLORMAP_V1
    }

    /// One `r g b` line per entry, reals in `[0, 1]`, exactly 256 lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::with_capacity(256);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f32> = line
                .split_whitespace()
                .map(|s| s.parse::<f32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::param(format!("colormap line {}: {e}", i + 1)))?;
            if vals.len() != 3 || vals.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::param(format!(
                    "colormap line {}: expected three reals in [0, 1]",
                    i + 1
                )));
            }
            entries.push([vals[0], vals[1], vals[2]]);
        }
        if entries.len() != 256 {
            return Err(Error::param(format!(
                "colormap has {} entries, expected 256",
                entries.len()
            )));
        }
        Ok(Self { entries })
    }

    pub fn index_of(v: f32) -> usize {
        ((v.clamp(0.0, 1.0) * 256.0) as usize).min(255)
    }

    pub fn color(&self, v: f32) -> [f32; 3] {
        self.entries[Self::index_of(v)]
    }

    pub fn entry(&self, i: usize) -> [f32; 3] {
        self.entries[i]
    }
}

/// Spectrogram image `[3 x S x S]`, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramImage {
    pub pixels: Tensor,
}

/// Renders `[T x F]` features: time runs along x, feature index 0 is the bottom row.
///
/// Features are min-max normalized (a constant matrix maps to 0.5), resampled
/// to `size x size` by nearest neighbour and mapped through `colormap`.
pub fn render_spectrogram(
    features: &Tensor,
    size: usize,
    colormap: &Colormap,
) -> Result<SpectrogramImage> {
    if features.rank() != 2 {
        return Err(Error::shape(format!(
            "spectrogram features must be [T x F], got {:?}",
            features.dims()
        )));
    }
    if size == 0 {
        return Err(Error::param("spectrogram size must be positive"));
    }
    let (t_len, f_len) = (features.dims()[0], features.dims()[1]);
    let data = features.data();
    let (lo, hi) = data
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    let range = hi - lo;
    let normalize = |v: f32| if range > 0.0 { (v - lo) / range } else { 0.5 };

    let cols: Vec<usize> = (0..size).map(|x| x * t_len / size).collect();
    let rows: Vec<usize> = (0..size).map(|y| (size - 1 - y) * f_len / size).collect();

    let plane = size * size;
    let mut pixels = vec![0f32; 3 * plane];
    for (y, &f) in rows.iter().enumerate() {
        for (x, &t) in cols.iter().enumerate() {
            let rgb = colormap.color(normalize(data[t * f_len + f]));
            for (c, v) in rgb.iter().enumerate() {
                pixels[c * plane + y * size + x] = *v;
            }
        }
    }
    Ok(SpectrogramImage {
        pixels: Tensor::new(&[3, size, size], pixels)?,
    })
}
