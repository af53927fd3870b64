//! File formats and fixtures: weights, WAV, PPM frames, manifests.

mod frames;
mod manifest;
mod rng;
mod synth;
mod wav;
mod weights;

pub use frames::{
    encode_ppm, fit_square, frame_file_name, parse_ppm, read_frames, sample_frames, sample_indices,
    write_ppm,
};
pub use manifest::{
    format_manifest, load_manifest, parse_manifest, write_manifest, ClipRecord, Distribution,
    IEMOCAP_COUNTS, MANIFEST_HEADER, NUM_SESSIONS,
};
pub use rng::SplitMix64;
pub use synth::{
    glorot_weights, synth_clip, write_synth_clip, SynthClip, SYNTH_AUDIO_SECS, SYNTH_FRAME_SIZE,
};
pub use wav::{encode_wav, parse_wav, read_wav, write_wav, WAV_SAMPLE_RATE};
pub use weights::{load_weights, save_weights, WeightStore, FORMAT_VERSION, MAGIC};
