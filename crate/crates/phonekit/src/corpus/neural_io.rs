//! Multichannel neural recording I/O.
//!
//! Binary format: magic "NRC1", little-endian u32 channel count, u32 sample
//! rate, u64 sample count, then channel-major float32 data. CSV fallback:
//! one row per channel, comma-separated.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::NeuralRecording;
use crate::error::{Error, Result};
use crate::feat::{read_f32, read_u32, read_u64};
use crate::linalg::Mat;

pub const DEFAULT_NEURAL_RATE_HZ: u32 = 3052;

/// Load a recording, dispatching on the "NRC1" magic; anything else is
/// parsed as CSV with the default 3052 Hz rate.
pub fn load_neural_recording(path: impl AsRef<Path>) -> Result<NeuralRecording> {
    let path = path.as_ref();
    let mut probe = [0u8; 4];
    {
        let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
        let n = f.read(&mut probe).map_err(|e| Error::io(path, e))?;
        if n < 4 {
            return Err(Error::MalformedHeader {
                what: "neural recording",
                detail: "file shorter than 4 bytes".into(),
            });
        }
    }
    if &probe == b"NRC1" {
        load_neural_binary(path)
    } else {
        load_neural_csv(path, DEFAULT_NEURAL_RATE_HZ)
    }
}

pub fn load_neural_binary(path: impl AsRef<Path>) -> Result<NeuralRecording> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != b"NRC1" {
        return Err(Error::MalformedHeader {
            what: "neural recording",
            detail: format!("bad magic {magic:?}"),
        });
    }
    let channels = read_u32(&mut r, path)? as usize;
    let rate = read_u32(&mut r, path)?;
    let samples = read_u64(&mut r, path)? as usize;
    if channels == 0 || rate == 0 {
        return Err(Error::MalformedHeader {
            what: "neural recording",
            detail: format!("channels={channels}, rate={rate}"),
        });
    }
    let mut data = Vec::with_capacity(channels * samples);
    for _ in 0..channels * samples {
        data.push(read_f32(&mut r, path)? as f64);
    }
    // Trailing bytes mean the header lied about the shape.
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::ShapeMismatch {
            what: "neural recording payload".into(),
            expected: format!("{channels}x{samples} float32 samples"),
            actual: "extra trailing bytes".into(),
        });
    }
    let id = file_stem(path);
    NeuralRecording::new(Mat::from_vec(channels, samples, data), rate, id)
}

pub fn load_neural_csv(path: impl AsRef<Path>, sample_rate_hz: u32) -> Result<NeuralRecording> {
    let path = path.as_ref();
    let r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f32 = field.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                detail: format!("bad float '{}'", field.trim()),
            })?;
            row.push(v as f64);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::ShapeMismatch {
                    what: format!("csv row {}", lineno + 1),
                    expected: format!("{} columns", first.len()),
                    actual: format!("{} columns", row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyPayload {
            what: "neural recording csv",
        });
    }
    NeuralRecording::new(Mat::from_rows(&rows), sample_rate_hz, file_stem(path))
}

pub fn save_neural_binary(r: &NeuralRecording, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let io = |e| Error::io(path, e);
    w.write_all(b"NRC1").map_err(io)?;
    w.write_all(&(r.channels() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&r.sample_rate_hz().to_le_bytes()).map_err(io)?;
    w.write_all(&(r.samples() as u64).to_le_bytes()).map_err(io)?;
    for v in r.data().data() {
        w.write_all(&(*v as f32).to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn save_neural_csv(r: &NeuralRecording, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let io = |e| Error::io(path, e);
    for ch in 0..r.channels() {
        let row = r.data().row(ch);
        let line: Vec<String> = row.iter().map(|v| format!("{}", *v as f32)).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
