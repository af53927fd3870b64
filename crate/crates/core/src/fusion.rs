//! Decision-level fusion, classification, and accuracy bookkeeping.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 4;
const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Happy,
    Sad,
    Neutral,
    Anger,
}

impl Emotion {
    pub const ALL: [Emotion; NUM_CLASSES] = [
        Emotion::Happy,
        Emotion::Sad,
        Emotion::Neutral,
        Emotion::Anger,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Eval(format!("class index {i} outside 0..{NUM_CLASSES}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Neutral => "neutral",
            Emotion::Anger => "anger",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::param(format!("unknown emotion label `{s}`")))
    }
}

/// Class probabilities in happy, sad, neutral, anger order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct ScoreVector([f64; NUM_CLASSES]);

impl ScoreVector {
    pub fn new(probs: [f64; NUM_CLASSES]) -> Result<Self> {
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Eval(format!(
                "score components must be in [0, 1]: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Eval(format!(
                "scores sum to {sum}, not 1: {probs:?}"
            )));
        }
        Ok(Self(probs))
    }

    pub fn from_f32(values: &[f32]) -> Result<Self> {
        let arr: [f32; NUM_CLASSES] = values.try_into().map_err(|_| {
            Error::Eval(format!(
                "expected {NUM_CLASSES} class scores, got {}",
                values.len()
            ))
        })?;
        Self::new(arr.map(|v| v as f64))
    }

    pub fn uniform() -> Self {
        Self([0.25; NUM_CLASSES])
    }

    pub fn probs(&self) -> &[f64; NUM_CLASSES] {
        &self.0
    }
}

impl TryFrom<[f64; 4]> for ScoreVector {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ScoreVector> for [f64; 4] {
    fn from(s: ScoreVector) -> Self {
        s.0
    }
}

/// Per-modality fusion weights (rgb, flow, audio).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub rgb: f64,
    pub flow: f64,
    pub audio: f64,
}

impl Default for FusionWeights {
    /// The 4:2:4 ratio.
    fn default() -> Self {
        Self {
            rgb: 4.0,
            flow: 2.0,
            audio: 4.0,
        }
    }
}

impl FusionWeights {
    pub fn new(rgb: f64, flow: f64, audio: f64) -> Result<Self> {
        let w = Self { rgb, flow, audio };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.rgb, self.flow, self.audio];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::param(format!(
                "fusion weights must be non-negative: {all:?}"
            )));
        }
        if all.iter().all(|&w| w == 0.0) {
            return Err(Error::param("fusion weights are all zero"));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.rgb + self.flow + self.audio
    }

    pub fn normalized(&self) -> [f64; 3] {
        let t = self.total();
        [self.rgb / t, self.flow / t, self.audio / t]
    }
}

impl fmt::Display for FusionWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.rgb, self.flow, self.audio)
    }
}

impl FromStr for FusionWeights {
    type Err = Error;

    /// Parses `w_r:w_f:w_a`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::param(format!(
                "fusion weights `{s}` must look like 4:2:4"
            )));
        }
        let v = parts
            .iter()
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::param(format!("fusion weight `{p}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(v[0], v[1], v[2])
    }
}

/// Weighted average of the three modality score vectors.
pub fn fuse_scores(
    rgb: &ScoreVector,
    flow: &ScoreVector,
    audio: &ScoreVector,
    w: &FusionWeights,
) -> Result<ScoreVector> {
    w.validate()?;
    let total = w.total();
    let mut out = [0f64; NUM_CLASSES];
    for (i, o) in out.iter_mut().enumerate() {
        *o = (w.rgb * rgb.0[i] + w.flow * flow.0[i] + w.audio * audio.0[i]) / total;
    }
    ScoreVector::new(out)
}

/// Argmax; ties go to the lowest class index.
pub fn predict(fused: &ScoreVector) -> usize {
    let p = &fused.0;
    (1..NUM_CLASSES).fold(0, |best, i| if p[i] > p[best] { i } else { best })
}

fn check_pairs(preds: &[usize], labels: &[usize]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::Eval("no predictions to score".into()));
    }
    if preds.len() != labels.len() {
        return Err(Error::Eval(format!(
            "{} predictions but {} labels",
            preds.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Multiclass accuracy: matches / total.
pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check_pairs(preds, labels)?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl BinaryCounts {
    /// `(TP + TN) / (TP + TN + FP + FN)`.
    pub fn accuracy(&self) -> f64 {
        let total = self.tp + self.tn + self.fp + self.fn_;
        (self.tp + self.tn) as f64 / total as f64
    }
}

/// `counts[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    pub fn one_vs_rest(&self, class: usize) -> BinaryCounts {
        let total = self.total();
        let tp = self.counts[class][class];
        let fn_: u64 = self.counts[class].iter().sum::<u64>() - tp;
        let fp: u64 = (0..NUM_CLASSES).map(|t| self.counts[t][class]).sum::<u64>() - tp;
        BinaryCounts {
            tp,
            tn: total - tp - fn_ - fp,
            fp,
            fn_,
        }
    }

    /// Binary-form accuracy for each class against the rest.
    pub fn per_class_accuracy(&self) -> [f64; NUM_CLASSES] {
        std::array::from_fn(|c| self.one_vs_rest(c).accuracy())
    }
}

pub fn confusion(preds: &[usize], labels: &[usize]) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::Eval(format!(
            "{} predictions but {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (&p, &l) in preds.iter().zip(labels) {
        if p >= NUM_CLASSES || l >= NUM_CLASSES {
            return Err(Error::Eval(format!(
                "class index outside 0..{NUM_CLASSES}: predicted {p}, true {l}"
            )));
        }
        counts[l][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Scores of one clip from the three streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalityScores {
    pub rgb: ScoreVector,
    pub flow: ScoreVector,
    pub audio: ScoreVector,
}

impl ModalityScores {
    pub fn fuse(&self, w: &FusionWeights) -> Result<ScoreVector> {
        fuse_scores(&self.rgb, &self.flow, &self.audio, w)
    }
}

/// All non-negative integer triples summing to 10, in lexicographic order.
pub fn default_grid() -> Vec<[u32; 3]> {
    let mut grid = Vec::new();
    for r in 0..=10 {
        for f in 0..=10 - r {
            grid.push([r, f, 10 - r - f]);
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub ratio: [u32; 3],
    pub weights: FusionWeights,
    pub accuracy: f64,
    /// Accuracy of every evaluated ratio, in grid order.
    pub evaluated: Vec<([u32; 3], f64)>,
}

/// Best fusion ratio by accuracy; ties go to the lexicographically smallest triple.
pub fn weight_grid_search(
    scores: &[ModalityScores],
    labels: &[usize],
    grid: &[[u32; 3]],
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::Eval("empty weight grid".into()));
    }
    check_pairs(&vec![0; scores.len()], labels)?;
    let mut evaluated = Vec::with_capacity(grid.len());
    for &ratio in grid {
        let w = FusionWeights::new(ratio[0] as f64, ratio[1] as f64, ratio[2] as f64)?;
        let preds = scores
            .iter()
            .map(|s| s.fuse(&w).map(|f| predict(&f)))
            .collect::<Result<Vec<_>>>()?;
        evaluated.push((ratio, accuracy(&preds, labels)?));
    }
    let &(ratio, acc) = evaluated
        .iter()
        .fold(None::<&([u32; 3], f64)>, |best, cand| match best {
            None => Some(cand),
            Some(b) if cand.1 > b.1 || (cand.1 == b.1 && cand.0 < b.0) => Some(cand),
            Some(b) => Some(b),
        })
        .expect("grid is non-empty");
    Ok(GridResult {
        ratio,
        weights: FusionWeights::new(ratio[0] as f64, ratio[1] as f64, ratio[2] as f64)?,
        accuracy: acc,
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(p: [f64; 4]) -> ScoreVector {
        ScoreVector::new(p).unwrap()
    }

    #[test]
    fn worked_fusion_example() {
        let rgb = sv([0.7, 0.1, 0.1, 0.1]);
        let flow = ScoreVector::uniform();
        let audio = sv([0.1, 0.7, 0.1, 0.1]);
        let fused = fuse_scores(&rgb, &flow, &audio, &FusionWeights::default()).unwrap();
        let expect = [0.37, 0.37, 0.13, 0.13];
        for (a, b) in fused.probs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(predict(&fused), 0);
    }

    #[test]
    fn equal_inputs_are_a_fixed_point() {
        let v = sv([0.1, 0.2, 0.3, 0.4]);
        let w = FusionWeights::new(1.0, 7.0, 0.5).unwrap();
        let f = fuse_scores(&v, &v, &v, &w).unwrap();
        for (a, b) in f.probs().iter().zip(v.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_weights_rejected() {
        assert!(FusionWeights::new(0.0, 0.0, 0.0).is_err());
        assert!("0:0:0".parse::<FusionWeights>().is_err());
        assert!("1:-1:2".parse::<FusionWeights>().is_err());
        assert_eq!(
            "4:2:4".parse::<FusionWeights>().unwrap(),
            FusionWeights::default()
        );
    }

    #[test]
    fn predict_examples() {
        assert_eq!(predict(&sv([0.0, 0.0, 1.0, 0.0])), 2);
        assert_eq!(predict(&ScoreVector::uniform()), 0);
    }

    #[test]
    fn accuracy_examples() {
        let labels: Vec<usize> = (0..52).map(|i| i % 4).collect();
        let preds: Vec<usize> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| if i < 42 { l } else { (l + 1) % 4 })
            .collect();
        let acc = accuracy(&preds, &labels).unwrap();
        assert!((acc - 42.0 / 52.0).abs() < 1e-15);
        assert!((acc - 0.8077).abs() < 1e-4);
        assert_eq!(accuracy(&labels, &labels).unwrap(), 1.0);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn confusion_examples() {
        let c = confusion(&[3], &[1]).unwrap();
        assert_eq!(c.counts[1][3], 1);
        assert_eq!(c.total(), 1);
        let d = confusion(&[0, 1, 2, 3], &[0, 1, 2, 3]).unwrap();
        assert_eq!(d.trace(), 4);
        assert!(confusion(&[4], &[0]).is_err());
    }

    #[test]
    fn singleton_grid() {
        let s = ModalityScores {
            rgb: ScoreVector::uniform(),
            flow: ScoreVector::uniform(),
            audio: ScoreVector::uniform(),
        };
        let r = weight_grid_search(&[s], &[0], &[[4, 2, 4]]).unwrap();
        assert_eq!(r.ratio, [4, 2, 4]);
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 66);
        assert!(g.iter().all(|t| t.iter().sum::<u32>() == 10));
    }

    #[test]
    fn score_vector_validation() {
        assert!(ScoreVector::new([0.5, 0.5, 0.5, 0.0]).is_err());
        assert!(ScoreVector::new([1.5, -0.5, 0.0, 0.0]).is_err());
        assert!(ScoreVector::from_f32(&[0.5, 0.5]).is_err());
    }
}
