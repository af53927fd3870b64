//! Clip-level inference and manifest evaluation.
//!
//! Each clip is decoded, sampled to the profile's frame count and resized to
//! the network side before optical flow is computed, so flow is measured in
//! network pixels. Clips run on a worker pool; results are reduced in
//! manifest order so reports do not depend on the worker count.

use std::fmt::Write as _;

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::audio::{lfcc_features, render_spectrogram, Colormap, LfccParams};
use crate::error::{Error, Result};
use crate::flow::{flow_sequence, GrayImage, LkParams};
use crate::fusion::{
    confusion, BinaryCounts, ConfusionMatrix, Emotion, FusionWeights, ModalityScores, ScoreVector,
};
use crate::io::{
    fit_square, glorot_weights, read_frames, read_wav, sample_frames, ClipRecord, WeightStore,
};
use crate::nets::{forward, Architecture, CaVariant, InputProfile, NetworkDesc};
use crate::tensor::Tensor;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// A network together with its parameters.
#[derive(Debug, Clone)]
pub struct Stream {
    pub net: NetworkDesc,
    pub weights: WeightStore,
}

impl Stream {
    pub fn new(net: NetworkDesc, weights: WeightStore) -> Result<Self> {
        net.validate_weights(&weights)?;
        Ok(Self { net, weights })
    }

    pub fn score(&self, input: &Tensor) -> Result<ScoreVector> {
        forward(&self.net, &self.weights, input)
    }
}

#[derive(Debug, Clone)]
pub struct Models {
    pub profile: InputProfile,
    pub rgb: Stream,
    pub flow: Stream,
    pub audio: Stream,
}

impl Models {
    pub fn new(
        profile: InputProfile,
        variant: CaVariant,
        rgb: WeightStore,
        flow: WeightStore,
        audio: WeightStore,
    ) -> Result<Self> {
        let arch = match variant {
            CaVariant::Three => Architecture::CaVgg16Three,
            CaVariant::Five => Architecture::CaVgg16Five,
        };
        Ok(Self {
            profile,
            rgb: Stream::new(Architecture::RgbI3d.build_checked(4, profile)?, rgb)?,
            flow: Stream::new(Architecture::FlowI3d.build_checked(4, profile)?, flow)?,
            audio: Stream::new(arch.build_checked(4, profile)?, audio)?,
        })
    }

    /// Glorot-initialised models; the three streams use seeds `seed`, `seed + 1`, `seed + 2`.
    pub fn synthetic(profile: InputProfile, variant: CaVariant, seed: u64) -> Result<Self> {
        let arch = match variant {
            CaVariant::Three => Architecture::CaVgg16Three,
            CaVariant::Five => Architecture::CaVgg16Five,
        };
        let rgb = glorot_weights(&Architecture::RgbI3d.build(4, profile), seed)?;
        let flow = glorot_weights(
            &Architecture::FlowI3d.build(4, profile),
            seed.wrapping_add(1),
        )?;
        let audio = glorot_weights(&arch.build(4, profile), seed.wrapping_add(2))?;
        Self::new(profile, variant, rgb, flow, audio)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub lfcc: LfccParams,
    pub lk: LkParams,
    pub fusion: FusionWeights,
    /// Concurrent clips; 0 uses every available core.
    pub jobs: usize,
    /// Record failing clips and carry on instead of aborting.
    pub skip_bad: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            lfcc: LfccParams::default(),
            lk: LkParams::default(),
            fusion: FusionWeights::default(),
            jobs: 1,
            skip_bad: false,
        }
    }
}

/// Network inputs of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipInputs {
    /// `[3 x T x S x S]`
    pub rgb: Tensor,
    /// `[2 x T x S x S]`
    pub flow: Tensor,
    /// `[3 x S x S]`
    pub audio: Tensor,
}

/// Stacks `[3 x S x S]` frames into `[3 x T x S x S]`.
fn stack_frames(frames: &[Tensor], size: usize) -> Result<Tensor> {
    let t_len = frames.len();
    let plane = size * size;
    let mut data = vec![0f32; 3 * t_len * plane];
    for (t, f) in frames.iter().enumerate() {
        for c in 0..3 {
            let dst = (c * t_len + t) * plane;
            data[dst..dst + plane].copy_from_slice(&f.data()[c * plane..(c + 1) * plane]);
        }
    }
    Tensor::new(&[3, t_len, size, size], data)
}

pub fn prepare_clip(
    record: &ClipRecord,
    profile: InputProfile,
    config: &PipelineConfig,
) -> Result<ClipInputs> {
    let raw = read_frames(&record.frames_dir)?;
    if raw.len() != record.num_frames {
        return Err(Error::Frames(format!(
            "{} holds {} frames, manifest says {}",
            record.frames_dir.display(),
            raw.len(),
            record.num_frames
        )));
    }
    let frames = sample_frames(&raw, profile.frames)?
        .iter()
        .map(|f| fit_square(f, profile.size))
        .collect::<Result<Vec<_>>>()?;
    let gray = frames
        .iter()
        .map(GrayImage::from_rgb)
        .collect::<Result<Vec<_>>>()?;
    let flow = flow_sequence(&gray, profile.frames, &config.lk)?;
    let rgb = stack_frames(&frames, profile.size)?;

    let signal = read_wav(&record.wav_path)?;
    let features = lfcc_features(&signal, &config.lfcc)?;
    let audio = render_spectrogram(&features, profile.size, Colormap::builtin())?.pixels;
    Ok(ClipInputs { rgb, flow, audio })
}

pub fn score_inputs(models: &Models, inputs: &ClipInputs) -> Result<ModalityScores> {
    Ok(ModalityScores {
        rgb: models.rgb.score(&inputs.rgb)?,
        flow: models.flow.score(&inputs.flow)?,
        audio: models.audio.score(&inputs.audio)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClipResult {
    pub clip_id: String,
    pub session: u8,
    pub label: Emotion,
    pub scores: ModalityScores,
    pub fused: ScoreVector,
    pub predicted: Emotion,
}

pub fn run_clip(
    record: &ClipRecord,
    models: &Models,
    config: &PipelineConfig,
) -> Result<ClipResult> {
    let inputs = prepare_clip(record, models.profile, config)?;
    let scores = score_inputs(models, &inputs)?;
    let fused = scores.fuse(&config.fusion)?;
    Ok(ClipResult {
        clip_id: record.clip_id.clone(),
        session: record.session,
        label: record.label,
        scores,
        fused,
        predicted: Emotion::from_index(crate::fusion::predict(&fused))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedClip {
    pub clip_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub emotion: Emotion,
    pub counts: BinaryCounts,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileReport {
    pub frames: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub profile: ProfileReport,
    pub fusion: FusionWeights,
    pub num_clips: usize,
    pub accuracy: f64,
    pub per_class: Vec<ClassReport>,
    pub confusion: ConfusionMatrix,
    pub clips: Vec<ClipResult>,
    pub skipped: Vec<SkippedClip>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "clips {}  skipped {}  fusion {}  ACC {:.4}",
            self.num_clips,
            self.skipped.len(),
            self.fusion,
            self.accuracy
        );
        let _ = writeln!(
            s,
            "{:<8} {:>6} {:>6} {:>6} {:>6} {:>8}",
            "class", "TP", "TN", "FP", "FN", "ACC"
        );
        for c in &self.per_class {
            let _ = writeln!(
                s,
                "{:<8} {:>6} {:>6} {:>6} {:>6} {:>8.4}",
                c.emotion.name(),
                c.counts.tp,
                c.counts.tn,
                c.counts.fp,
                c.counts.fn_,
                c.accuracy
            );
        }
        let _ = writeln!(s, "confusion (rows true, columns predicted)");
        for (i, row) in self.confusion.counts.iter().enumerate() {
            let _ = write!(s, "{:<8}", Emotion::ALL[i].name());
            for v in row {
                let _ = write!(s, " {v:>6}");
            }
            s.push('\n');
        }
        for k in &self.skipped {
            let _ = writeln!(s, "skipped {}: {}", k.clip_id, k.error);
        }
        s
    }
}

/// Runs `f` inside a pool of `jobs` workers (0 means all cores).
pub fn with_workers<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Eval(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Per-clip results in manifest order; failures are returned alongside.
pub fn run_clips(
    records: &[ClipRecord],
    models: &Models,
    config: &PipelineConfig,
) -> Result<(Vec<ClipResult>, Vec<SkippedClip>)> {
    if records.is_empty() {
        return Err(Error::Eval("no clips".into()));
    }
    config.fusion.validate()?;
    let outcomes: Vec<Result<ClipResult>> = with_workers(config.jobs, || {
        records
            .par_iter()
            .map(|r| {
                debug!("clip {}", r.clip_id);
                run_clip(r, models, config)
            })
            .collect()
    })?;

    let mut results = Vec::with_capacity(records.len());
    let mut skipped = Vec::new();
    for (record, outcome) in records.iter().zip(outcomes) {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) if config.skip_bad => {
                warn!("skipping {}: {e}", record.clip_id);
                skipped.push(SkippedClip {
                    clip_id: record.clip_id.clone(),
                    error: e.to_string(),
                });
            }
            Err(e) => return Err(Error::Eval(format!("clip `{}`: {e}", record.clip_id))),
        }
    }
    Ok((results, skipped))
}

pub fn build_report(
    profile: InputProfile,
    fusion: FusionWeights,
    clips: Vec<ClipResult>,
    skipped: Vec<SkippedClip>,
) -> Result<EvalReport> {
    if clips.is_empty() {
        return Err(Error::Eval("no clips were scored".into()));
    }
    let preds: Vec<usize> = clips.iter().map(|c| c.predicted.index()).collect();
    let labels: Vec<usize> = clips.iter().map(|c| c.label.index()).collect();
    let cm = confusion(&preds, &labels)?;
    let per_class = Emotion::ALL
        .iter()
        .map(|&e| {
            let counts = cm.one_vs_rest(e.index());
            ClassReport {
                emotion: e,
                counts,
                accuracy: counts.accuracy(),
            }
        })
        .collect();
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        profile: ProfileReport {
            frames: profile.frames,
            size: profile.size,
        },
        fusion,
        num_clips: clips.len(),
        accuracy: cm.accuracy(),
        per_class,
        confusion: cm,
        clips,
        skipped,
    })
}

pub fn evaluate(
    records: &[ClipRecord],
    models: &Models,
    config: &PipelineConfig,
) -> Result<EvalReport> {
    info!(
        "evaluating {} clips with {} workers",
        records.len(),
        config.jobs
    );
    let (clips, skipped) = run_clips(records, models, config)?;
    build_report(models.profile, config.fusion, clips, skipped)
}
