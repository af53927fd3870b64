//! Clip manifests: CSV with header
//! `clip_id,session,label,wav_path,frames_dir,num_frames`.
//! Relative paths resolve against the manifest's directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fusion::{Emotion, NUM_CLASSES};

pub const MANIFEST_HEADER: &str = "clip_id,session,label,wav_path,frames_dir,num_frames";
pub const NUM_SESSIONS: usize = 5;

/// Reference IEMOCAP clip counts, `[session][happy, sad, neutral, anger]`.
pub const IEMOCAP_COUNTS: [[u64; NUM_CLASSES]; NUM_SESSIONS] = [
    [278, 194, 384, 229],
    [327, 197, 362, 137],
    [286, 305, 320, 240],
    [303, 143, 258, 327],
    [442, 245, 384, 170],
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub session: u8,
    pub label: Emotion,
    pub wav_path: PathBuf,
    pub frames_dir: PathBuf,
    pub num_frames: usize,
}

impl ClipRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.clip_id,
            self.session,
            self.label,
            self.wav_path.display(),
            self.frames_dir.display(),
            self.num_frames
        )
    }
}

pub fn load_manifest(path: &Path) -> Result<Vec<ClipRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base)
}

pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<ClipRecord>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, h)) if h.trim() == MANIFEST_HEADER => {}
        Some((n, h)) => {
            return Err(Error::Manifest {
                line: n,
                msg: format!("header `{h}` is not `{MANIFEST_HEADER}`"),
            })
        }
        None => {
            return Err(Error::Manifest {
                line: 1,
                msg: "missing header".into(),
            })
        }
    }

    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (line, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Manifest { line, msg };
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", fields.len())));
        }
        let clip_id = fields[0];
        if clip_id.is_empty() {
            return Err(bad("empty clip_id".into()));
        }
        if !seen.insert(clip_id.to_string()) {
            return Err(bad(format!("duplicate clip_id `{clip_id}`")));
        }
        let session: u8 = fields[1]
            .parse()
            .ok()
            .filter(|s| (1..=NUM_SESSIONS as u8).contains(s))
            .ok_or_else(|| bad(format!("session `{}` is not in 1..=5", fields[1])))?;
        let label: Emotion = fields[2]
            .parse()
            .map_err(|_| bad(format!("unknown label `{}`", fields[2])))?;
        let num_frames: usize = fields[5].parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            bad(format!(
                "num_frames `{}` is not a positive integer",
                fields[5]
            ))
        })?;
        let resolve = |p: &str, what: &str| -> Result<PathBuf> {
            if p.is_empty() {
                return Err(bad(format!("empty {what}")));
            }
            let p = Path::new(p);
            Ok(if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            })
        };
        records.push(ClipRecord {
            clip_id: clip_id.to_string(),
            session,
            label,
            wav_path: resolve(fields[3], "wav_path")?,
            frames_dir: resolve(fields[4], "frames_dir")?,
            num_frames,
        });
    }
    Ok(records)
}

pub fn format_manifest(records: &[ClipRecord]) -> String {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

pub fn write_manifest(path: &Path, records: &[ClipRecord]) -> Result<()> {
    fs::write(path, format_manifest(records)).map_err(|e| Error::io(path, e))
}

/// Clip counts per session and emotion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Distribution {
    pub counts: [[u64; NUM_CLASSES]; NUM_SESSIONS],
}

impl Distribution {
    pub fn of(records: &[ClipRecord]) -> Self {
        let mut counts = [[0u64; NUM_CLASSES]; NUM_SESSIONS];
        for r in records {
            counts[r.session as usize - 1][r.label.index()] += 1;
        }
        Self { counts }
    }

    pub fn iemocap() -> Self {
        Self {
            counts: IEMOCAP_COUNTS,
        }
    }

    pub fn class_totals(&self) -> [u64; NUM_CLASSES] {
        let mut t = [0; NUM_CLASSES];
        for row in &self.counts {
            for (c, v) in row.iter().enumerate() {
                t[c] += v;
            }
        }
        t
    }

    pub fn total(&self) -> u64 {
        self.class_totals().iter().sum()
    }

    /// Errors on the first cell that differs from the reference table.
    pub fn check_against(&self, reference: &Distribution) -> Result<()> {
        for s in 0..NUM_SESSIONS {
            for c in 0..NUM_CLASSES {
                let (got, want) = (self.counts[s][c], reference.counts[s][c]);
                if got != want {
                    return Err(Error::Distribution(format!(
                        "session {} {}: {got} clips, expected {want}",
                        s + 1,
                        Emotion::ALL[c]
                    )));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<8}", "session")?;
        for e in Emotion::ALL {
            write!(f, "{:>9}", e.name())?;
        }
        writeln!(f, "{:>9}", "total")?;
        for (s, row) in self.counts.iter().enumerate() {
            write!(f, "{:<8}", s + 1)?;
            for v in row {
                write!(f, "{v:>9}")?;
            }
            writeln!(f, "{:>9}", row.iter().sum::<u64>())?;
        }
        write!(f, "{:<8}", "total")?;
        for v in self.class_totals() {
            write!(f, "{v:>9}")?;
        }
        writeln!(f, "{:>9}", self.total())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, session: u8, label: &str) -> String {
        format!("{id},{session},{label},a/{id}.wav,f/{id},79\n")
    }

    #[test]
    fn reference_totals() {
        let d = Distribution::iemocap();
        assert_eq!(d.class_totals(), [1636, 1084, 1708, 1103]);
        assert_eq!(d.total(), 5531);
    }

    #[test]
    fn parses_and_resolves_paths() {
        let text = format!(
            "{MANIFEST_HEADER}\n{}\n{}",
            row("c1", 1, "happy"),
            row("c2", 5, "anger")
        );
        let recs = parse_manifest(&text, Path::new("/data")).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].wav_path, Path::new("/data/a/c1.wav"));
        assert_eq!(recs[1].label, Emotion::Anger);
        let d = Distribution::of(&recs);
        assert_eq!(d.counts[0][0], 1);
        assert_eq!(d.counts[4][3], 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = format!(
            "{MANIFEST_HEADER}\n{}{}",
            row("c1", 1, "happy"),
            row("c2", 6, "sad")
        );
        match parse_manifest(&text, Path::new("")) {
            Err(Error::Manifest { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("session"));
            }
            other => panic!("{other:?}"),
        }
        let text = format!(
            "{MANIFEST_HEADER}\n{}{}",
            row("c1", 1, "happy"),
            row("c1", 2, "sad")
        );
        assert!(matches!(
            parse_manifest(&text, Path::new("")),
            Err(Error::Manifest { line: 3, .. })
        ));
        let text = format!("{MANIFEST_HEADER}\n{}", row("c1", 1, "excited"));
        assert!(matches!(
            parse_manifest(&text, Path::new("")),
            Err(Error::Manifest { line: 2, .. })
        ));
        assert!(matches!(
            parse_manifest("id,x\n", Path::new("")),
            Err(Error::Manifest { line: 1, .. })
        ));
    }

    #[test]
    fn format_round_trip() {
        let text = format!(
            "{MANIFEST_HEADER}\n{}{}",
            row("c1", 1, "happy"),
            row("c2", 3, "neutral")
        );
        let recs = parse_manifest(&text, Path::new("")).unwrap();
        assert_eq!(format_manifest(&recs), text);
    }

    #[test]
    fn check_names_the_cell() {
        let mut d = Distribution::iemocap();
        assert!(d.check_against(&Distribution::iemocap()).is_ok());
        d.counts[2][1] -= 1;
        let err = d
            .check_against(&Distribution::iemocap())
            .unwrap_err()
            .to_string();
        assert!(err.contains("session 3 sad: 304"), "{err}");
    }
}
