//! Transcription and lexicon files.
//!
//! Transcriptions are one file per utterance: either timed lines
//! "start_sample end_sample phone" or a single whitespace-separated phone
//! line. Lexica are lines "WORD ph1 ph2 …".

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Lexicon, PhoneId, PhoneInventory, PhoneSequence};
use crate::error::{Error, Result};

/// A phone with its sample extent `[start_sample, end_sample)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedSegment {
    pub start_sample: u64,
    pub end_sample: u64,
    pub phone: PhoneId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transcript {
    Timed(Vec<TimedSegment>),
    Untimed(PhoneSequence),
}

impl Transcript {
    pub fn phone_sequence(&self) -> PhoneSequence {
        match self {
            Transcript::Timed(segs) => {
                PhoneSequence::new(segs.iter().map(|s| s.phone).collect())
            }
            Transcript::Untimed(seq) => seq.clone(),
        }
    }
}

pub fn read_transcript(path: impl AsRef<Path>, inv: &PhoneInventory) -> Result<Transcript> {
    let path = path.as_ref();
    let r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let lines: Vec<(usize, String)> = r
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|s| (i + 1, s)).map_err(|e| Error::io(path, e)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    if lines.is_empty() {
        return Err(Error::EmptyPayload {
            what: "transcription",
        });
    }

    let first_fields: Vec<&str> = lines[0].1.split_whitespace().collect();
    let timed = first_fields.len() == 3 && first_fields[0].parse::<u64>().is_ok();
    if timed {
        let mut segs = Vec::with_capacity(lines.len());
        for (lineno, line) in &lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: *lineno,
                    detail: "expected 'start_sample end_sample phone'".into(),
                });
            }
            let parse_u64 = |s: &str| {
                s.parse::<u64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: *lineno,
                    detail: format!("bad sample index '{s}'"),
                })
            };
            let start = parse_u64(fields[0])?;
            let end = parse_u64(fields[1])?;
            if end <= start {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: *lineno,
                    detail: format!("empty segment [{start}, {end})"),
                });
            }
            segs.push(TimedSegment {
                start_sample: start,
                end_sample: end,
                phone: inv.id(fields[2])?,
            });
        }
        Ok(Transcript::Timed(segs))
    } else {
        if lines.len() != 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lines[1].0,
                detail: "untimed transcription must be a single line".into(),
            });
        }
        let labels: Vec<&str> = lines[0].1.split_whitespace().collect();
        Ok(Transcript::Untimed(PhoneSequence::from_labels(
            inv, &labels,
        )?))
    }
}

pub fn write_timed_transcript(
    segs: &[TimedSegment],
    inv: &PhoneInventory,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for s in segs {
        writeln!(
            w,
            "{} {} {}",
            s.start_sample,
            s.end_sample,
            inv.label(s.phone)
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_untimed_transcript(
    seq: &PhoneSequence,
    inv: &PhoneInventory,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    writeln!(w, "{}", seq.labels(inv).join(" ")).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Convert timed segments to one phone label per feature frame. Frame t is
/// labelled by the segment containing its center sample; frames outside the
/// transcribed span clamp to the first/last segment.
pub fn timed_to_frame_labels(
    segs: &[TimedSegment],
    sample_rate_hz: u32,
    frame_shift_s: f64,
    n_frames: usize,
) -> Result<Vec<PhoneId>> {
    if segs.is_empty() {
        return Err(Error::EmptyPayload {
            what: "timed transcription",
        });
    }
    let hop = frame_shift_s * sample_rate_hz as f64;
    let mut labels = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let center = (t as f64 + 0.5) * hop;
        let phone = if center < segs[0].start_sample as f64 {
            segs[0].phone
        } else {
            segs.iter()
                .find(|s| center < s.end_sample as f64)
                .map(|s| s.phone)
                .unwrap_or_else(|| segs.last().unwrap().phone)
        };
        labels.push(phone);
    }
    Ok(labels)
}

/// Write a phone inventory as one label per line.
pub fn write_inventory(inv: &PhoneInventory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for l in inv.labels() {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a phone inventory file (one label per line, '#' comments).
pub fn read_inventory(path: impl AsRef<Path>) -> Result<PhoneInventory> {
    let path = path.as_ref();
    let r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut labels = Vec::new();
    for line in r.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let label = line.split('#').next().unwrap_or("").trim();
        if !label.is_empty() {
            labels.push(label.to_string());
        }
    }
    PhoneInventory::from_labels(&labels)
}

/// Read a lexicon file: lines "WORD ph1 ph2 …", '#' comments allowed.
pub fn read_lexicon(path: impl AsRef<Path>, inv: &PhoneInventory) -> Result<Lexicon> {
    let path = path.as_ref();
    let r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut lex = Lexicon::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            detail: "missing word".into(),
        })?;
        let phones: Vec<&str> = fields.collect();
        if phones.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                detail: format!("word '{word}' has no pronunciation"),
            });
        }
        let pron = PhoneSequence::from_labels(inv, &phones)?;
        lex.insert(word, pron)?;
    }
    Ok(lex)
}

pub fn write_lexicon(lex: &Lexicon, inv: &PhoneInventory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for word in lex.words() {
        let pron = lex.lookup(word).expect("iterating own keys");
        writeln!(w, "{} {}", word, pron.labels(inv).join(" "))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
