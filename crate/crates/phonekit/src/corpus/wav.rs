//! RIFF/WAVE reading and writing, PCM 16-bit mono only.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Waveform;
use crate::error::{Error, Result};

/// Load a mono 16-bit PCM WAV file, normalizing samples by 1/32768.
pub fn load_waveform(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut hdr = [0u8; 12];
    r.read_exact(&mut hdr).map_err(|_| Error::MalformedHeader {
        what: "wav",
        detail: "file shorter than RIFF header".into(),
    })?;
    if &hdr[0..4] != b"RIFF" || &hdr[8..12] != b"WAVE" {
        return Err(Error::MalformedHeader {
            what: "wav",
            detail: "missing RIFF/WAVE magic".into(),
        });
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<Vec<u8>> = None;
    loop {
        let mut chunk_hdr = [0u8; 8];
        match r.read_exact(&mut chunk_hdr) {
            Ok(()) => {}
            Err(_) => break,
        }
        let id = [chunk_hdr[0], chunk_hdr[1], chunk_hdr[2], chunk_hdr[3]];
        let size = u32::from_le_bytes([chunk_hdr[4], chunk_hdr[5], chunk_hdr[6], chunk_hdr[7]]);
        let mut payload = vec![0u8; size as usize];
        r.read_exact(&mut payload).map_err(|_| Error::MalformedHeader {
            what: "wav",
            detail: format!("truncated '{}' chunk", String::from_utf8_lossy(&id)),
        })?;
        match &id {
            b"fmt " => {
                if payload.len() < 16 {
                    return Err(Error::MalformedHeader {
                        what: "wav",
                        detail: "fmt chunk too short".into(),
                    });
                }
                let audio_format = u16::from_le_bytes([payload[0], payload[1]]);
                let channels = u16::from_le_bytes([payload[2], payload[3]]);
                let sample_rate =
                    u32::from_le_bytes([payload[4], payload[5], payload[6], payload[7]]);
                let bits = u16::from_le_bytes([payload[14], payload[15]]);
                fmt = Some((audio_format, channels, sample_rate, bits));
            }
            b"data" => data = Some(payload),
            _ => {} // skip unknown chunks
        }
        // Chunks are word-aligned; consume the pad byte if present.
        if size % 2 == 1 {
            let mut pad = [0u8; 1];
            let _ = r.read_exact(&mut pad);
        }
    }

    let (audio_format, channels, sample_rate, bits) = fmt.ok_or(Error::MalformedHeader {
        what: "wav",
        detail: "missing fmt chunk".into(),
    })?;
    if audio_format != 1 {
        return Err(Error::UnsupportedEncoding {
            what: "wav",
            detail: format!("audio format {audio_format}, only PCM (1) supported"),
        });
    }
    if channels != 1 {
        return Err(Error::UnsupportedEncoding {
            what: "wav",
            detail: format!("{channels} channels, only mono supported"),
        });
    }
    if bits != 16 {
        return Err(Error::UnsupportedEncoding {
            what: "wav",
            detail: format!("{bits} bits per sample, only 16 supported"),
        });
    }
    if sample_rate == 0 {
        return Err(Error::MalformedHeader {
            what: "wav",
            detail: "zero sample rate".into(),
        });
    }
    let data = data.ok_or(Error::MalformedHeader {
        what: "wav",
        detail: "missing data chunk".into(),
    })?;
    if data.is_empty() {
        return Err(Error::EmptyPayload { what: "wav" });
    }
    if data.len() % 2 != 0 {
        return Err(Error::MalformedHeader {
            what: "wav",
            detail: "data chunk length not a multiple of the sample size".into(),
        });
    }

    let samples: Vec<f64> = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
        .collect();
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Waveform::new(samples, sample_rate, id)
}

/// Write a waveform as mono PCM 16-bit, quantizing with round-to-nearest.
pub fn save_waveform(w: &Waveform, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let io = |e| Error::io(path, e);
    let n = w.samples().len();
    let data_len = (n * 2) as u32;
    f.write_all(b"RIFF").map_err(io)?;
    f.write_all(&(36 + data_len).to_le_bytes()).map_err(io)?;
    f.write_all(b"WAVE").map_err(io)?;
    f.write_all(b"fmt ").map_err(io)?;
    f.write_all(&16u32.to_le_bytes()).map_err(io)?;
    f.write_all(&1u16.to_le_bytes()).map_err(io)?; // PCM
    f.write_all(&1u16.to_le_bytes()).map_err(io)?; // mono
    f.write_all(&w.sample_rate_hz().to_le_bytes()).map_err(io)?;
    f.write_all(&(w.sample_rate_hz() * 2).to_le_bytes()).map_err(io)?;
    f.write_all(&2u16.to_le_bytes()).map_err(io)?; // block align
    f.write_all(&16u16.to_le_bytes()).map_err(io)?;
    f.write_all(b"data").map_err(io)?;
    f.write_all(&data_len.to_le_bytes()).map_err(io)?;
    for &s in w.samples() {
        let q = (s * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        f.write_all(&q.to_le_bytes()).map_err(io)?;
    }
    f.flush().map_err(io)
}
