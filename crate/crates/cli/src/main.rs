use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use icanet_core::audio::{lfcc_features, render_spectrogram, Colormap, LfccParams};
use icanet_core::flow::{flow_sequence, GrayImage, LkParams};
use icanet_core::fusion::{default_grid, weight_grid_search, ModalityScores};
use icanet_core::io::{
    fit_square, glorot_weights, load_manifest, load_weights, read_frames, read_wav, sample_frames,
    save_weights, synth_clip, write_manifest, write_ppm, write_synth_clip, Distribution,
    WeightStore,
};
use icanet_core::nets::{format_trace, shape_trace, Architecture, CaVariant, InputProfile};
use icanet_core::pipeline::{evaluate, run_clips, Models, PipelineConfig};
use icanet_core::{Emotion, FusionWeights};

#[derive(Parser)]
#[command(
    name = "icanet",
    version,
    about = "Tri-modal short-video emotion recognition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// WAV file to LFCC features and the spectrogram image.
    Lfcc {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        small: bool,
    },
    /// Frame directory to the stacked optical-flow tensor.
    Flow {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        small: bool,
    },
    /// Print the layer-by-layer architecture table.
    Shapes {
        arch: Architecture,
        #[arg(long)]
        small: bool,
    },
    /// Write deterministic fixtures.
    Synth {
        #[arg(value_enum)]
        kind: SynthKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of clips (seeds `seed..seed + count`).
        #[arg(long, default_value_t = 1)]
        count: u64,
        /// Target network for weights.
        #[arg(long)]
        net: Option<Architecture>,
        #[arg(long)]
        small: bool,
    },
    /// Per-clip scores from the three streams plus the fused prediction.
    Infer {
        #[command(flatten)]
        run: RunArgs,
        /// Only this clip.
        #[arg(long)]
        clip: Option<String>,
        /// Write score triples to `<out>/scores.json` for `gridsearch`.
        #[arg(long)]
        dump_scores: bool,
    },
    /// Evaluate a manifest and write `report.json` and `report.txt`.
    Eval {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Search fusion ratios over cached scores.
    Gridsearch {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count clips per session and emotion.
    ValidateManifest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        expect_iemocap: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Clip,
    Weights,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    weights_rgb: Option<PathBuf>,
    #[arg(long)]
    weights_flow: Option<PathBuf>,
    #[arg(long)]
    weights_audio: Option<PathBuf>,
    /// Audio network variant.
    #[arg(long, default_value = "cavgg16-3")]
    audio_net: Architecture,
    #[arg(long, default_value = "4:2:4")]
    fusion: FusionWeights,
    /// Concurrent clips (0 = all cores).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Seed for Glorot weights in any slot without a weights file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    skip_bad: bool,
    /// 32 frames at 112x112 instead of 79 at 224x224.
    #[arg(long)]
    small: bool,
}

fn profile(small: bool) -> InputProfile {
    if small {
        InputProfile::SMALL
    } else {
        InputProfile::FULL
    }
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_lfcc(wav: &Path, out: &Path, small: bool) -> Result<()> {
    let signal = read_wav(wav)?;
    let features = lfcc_features(&signal, &LfccParams::default())?;
    let image = render_spectrogram(&features, profile(small).size, Colormap::builtin())?;
    create_dir(out)?;
    let mut store = WeightStore::new();
    store.insert("lfcc", features.clone())?;
    save_weights(&store, &out.join("lfcc.icaw"))?;
    write_ppm(&out.join("spectrogram.ppm"), &image.pixels)?;
    println!(
        "{} frames x {} coefficients -> {}",
        features.dims()[0],
        features.dims()[1],
        out.join("spectrogram.ppm").display()
    );
    Ok(())
}

fn cmd_flow(frames_dir: &Path, out: &Path, small: bool) -> Result<()> {
    let p = profile(small);
    let frames = read_frames(frames_dir)?;
    let gray = sample_frames(&frames, p.frames)?
        .iter()
        .map(|f| fit_square(f, p.size).and_then(|s| GrayImage::from_rgb(&s)))
        .collect::<icanet_core::Result<Vec<_>>>()?;
    let flow = flow_sequence(&gray, p.frames, &LkParams::default())?;
    create_dir(out)?;
    let mut store = WeightStore::new();
    store.insert("flow", flow.clone())?;
    save_weights(&store, &out.join("flow.icaw"))?;
    let moving = flow.data().iter().filter(|v| **v != 0.0).count();
    println!(
        "flow {:?} ({} non-zero components) -> {}",
        flow.dims(),
        moving,
        out.join("flow.icaw").display()
    );
    Ok(())
}

fn cmd_shapes(arch: Architecture, small: bool) -> Result<()> {
    let net = arch.build(4, profile(small));
    let rows = shape_trace(&net, &net.input_shape)?;
    print!("{}", format_trace(&net, &rows));
    Ok(())
}

fn cmd_synth(
    kind: SynthKind,
    out: &Path,
    seed: u64,
    count: u64,
    net: Option<Architecture>,
    small: bool,
) -> Result<()> {
    create_dir(out)?;
    match kind {
        SynthKind::Clip => {
            if count == 0 {
                bail!("--count must be positive");
            }
            let mut records = Vec::new();
            for s in seed..seed + count {
                records.push(write_synth_clip(&synth_clip(s)?, out)?);
            }
            let manifest = out.join("manifest.csv");
            write_manifest(&manifest, &records)?;
            println!("{} clips -> {}", records.len(), manifest.display());
        }
        SynthKind::Weights => {
            let arch = net.context("synth weights needs --net")?;
            let desc = arch.build(4, profile(small));
            let store = glorot_weights(&desc, seed)?;
            let path = out.join(format!("{arch}.icaw"));
            save_weights(&store, &path)?;
            println!(
                "{} tensors, {} parameters -> {}",
                store.len(),
                desc.parameter_count(),
                path.display()
            );
        }
    }
    Ok(())
}

fn load_slot(
    path: Option<&Path>,
    arch: Architecture,
    p: InputProfile,
    seed: Option<u64>,
    offset: u64,
) -> Result<WeightStore> {
    match (path, seed) {
        (Some(path), _) => Ok(load_weights(path)?),
        (None, Some(seed)) => {
            warn!(
                "no weights for {arch}; using Glorot weights from seed {}",
                seed.wrapping_add(offset)
            );
            Ok(glorot_weights(
                &arch.build(4, p),
                seed.wrapping_add(offset),
            )?)
        }
        (None, None) => bail!("missing weights for {arch}: pass its --weights-* flag or --seed"),
    }
}

fn load_models(run: &RunArgs) -> Result<Models> {
    let p = profile(run.small);
    let variant = match run.audio_net {
        Architecture::CaVgg16Three => CaVariant::Three,
        Architecture::CaVgg16Five => CaVariant::Five,
        other => bail!("--audio-net must be cavgg16-3 or cavgg16-5, got {other}"),
    };
    // Seed offsets match Models::synthetic.
    let rgb = load_slot(
        run.weights_rgb.as_deref(),
        Architecture::RgbI3d,
        p,
        run.seed,
        0,
    )?;
    let flow = load_slot(
        run.weights_flow.as_deref(),
        Architecture::FlowI3d,
        p,
        run.seed,
        1,
    )?;
    let audio = load_slot(run.weights_audio.as_deref(), run.audio_net, p, run.seed, 2)?;
    Ok(Models::new(p, variant, rgb, flow, audio)?)
}

fn pipeline_config(run: &RunArgs) -> PipelineConfig {
    PipelineConfig {
        fusion: run.fusion,
        jobs: run.jobs,
        skip_bad: run.skip_bad,
        ..PipelineConfig::default()
    }
}

#[derive(Serialize, Deserialize)]
struct ScoreDump {
    clip_id: String,
    label: Emotion,
    scores: ModalityScores,
}

fn cmd_infer(run: &RunArgs, clip: Option<&str>, dump: bool) -> Result<()> {
    let mut records = load_manifest(&run.manifest)?;
    if let Some(id) = clip {
        records.retain(|r| r.clip_id == id);
        if records.is_empty() {
            bail!("clip `{id}` is not in {}", run.manifest.display());
        }
    }
    let models = load_models(run)?;
    let config = pipeline_config(run);
    let (results, skipped) = run_clips(&records, &models, &config)?;
    for r in &results {
        let fmt = |s: &icanet_core::ScoreVector| {
            s.probs()
                .iter()
                .map(|p| format!("{p:.4}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        println!("{} label {} predicted {}", r.clip_id, r.label, r.predicted);
        println!("  rgb   {}", fmt(&r.scores.rgb));
        println!("  flow  {}", fmt(&r.scores.flow));
        println!("  audio {}", fmt(&r.scores.audio));
        println!("  fused {}", fmt(&r.fused));
    }
    for s in &skipped {
        println!("skipped {}: {}", s.clip_id, s.error);
    }
    if dump {
        create_dir(&run.out)?;
        let dumps: Vec<ScoreDump> = results
            .iter()
            .map(|r| ScoreDump {
                clip_id: r.clip_id.clone(),
                label: r.label,
                scores: r.scores,
            })
            .collect();
        let path = run.out.join("scores.json");
        write_text(&path, &serde_json::to_string_pretty(&dumps)?)?;
        info!("scores -> {}", path.display());
    }
    Ok(())
}

fn cmd_eval(run: &RunArgs) -> Result<()> {
    let records = load_manifest(&run.manifest)?;
    let models = load_models(run)?;
    let config = pipeline_config(run);
    let report = evaluate(&records, &models, &config)?;
    create_dir(&run.out)?;
    let text = report.to_text();
    write_text(&run.out.join("report.json"), &report.to_json()?)?;
    write_text(&run.out.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_gridsearch(scores: &Path, out: Option<&Path>) -> Result<()> {
    let text =
        fs::read_to_string(scores).with_context(|| format!("cannot read {}", scores.display()))?;
    let dumps: Vec<ScoreDump> = serde_json::from_str(&text).context("malformed score dump")?;
    if dumps.is_empty() {
        bail!("no clips");
    }
    let triples: Vec<ModalityScores> = dumps.iter().map(|d| d.scores).collect();
    let labels: Vec<usize> = dumps.iter().map(|d| d.label.index()).collect();
    let result = weight_grid_search(&triples, &labels, &default_grid())?;
    println!(
        "best {}:{}:{}  ACC {:.4} over {} clips",
        result.ratio[0],
        result.ratio[1],
        result.ratio[2],
        result.accuracy,
        dumps.len()
    );
    if let Some(out) = out {
        create_dir(out)?;
        write_text(
            &out.join("gridsearch.json"),
            &serde_json::to_string_pretty(&result)?,
        )?;
    }
    Ok(())
}

fn cmd_validate(manifest: &Path, expect_iemocap: bool) -> Result<()> {
    let records = load_manifest(manifest)?;
    let dist = Distribution::of(&records);
    print!("{dist}");
    if expect_iemocap {
        dist.check_against(&Distribution::iemocap())?;
        println!("matches the IEMOCAP four-class distribution");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Lfcc { wav, out, small } => cmd_lfcc(&wav, &out, small),
        Command::Flow { frames, out, small } => cmd_flow(&frames, &out, small),
        Command::Shapes { arch, small } => cmd_shapes(arch, small),
        Command::Synth {
            kind,
            out,
            seed,
            count,
            net,
            small,
        } => cmd_synth(kind, &out, seed, count, net, small),
        Command::Infer {
            run,
            clip,
            dump_scores,
        } => cmd_infer(&run, clip.as_deref(), dump_scores),
        Command::Eval { run } => cmd_eval(&run),
        Command::Gridsearch { scores, out } => cmd_gridsearch(&scores, out.as_deref()),
        Command::ValidateManifest {
            manifest,
            expect_iemocap,
        } => cmd_validate(&manifest, expect_iemocap),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ICANET_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
