//! Frame-based feature sequences shared by the acoustic and neural streams,
//! plus the "FTR1" on-disk format and delta-coefficient cascading.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Which front-end produced a feature stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    Acoustic,
    Neural,
}

/// A frames × dim feature sequence with frame-rate metadata.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    values: Mat,
    frame_shift_s: f64,
    stream_tag: StreamTag,
}

impl FeatureMatrix {
    pub fn new(values: Mat, frame_shift_s: f64, stream_tag: StreamTag) -> Result<Self> {
        if values.cols() == 0 {
            return Err(Error::InvalidParam("feature dimension must be > 0".into()));
        }
        if !(frame_shift_s > 0.0) {
            return Err(Error::InvalidParam("frame shift must be > 0".into()));
        }
        if !values.is_finite() {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(FeatureMatrix {
            values,
            frame_shift_s,
            stream_tag,
        })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn frame_shift_s(&self) -> f64 {
        self.frame_shift_s
    }

    pub fn stream_tag(&self) -> StreamTag {
        self.stream_tag
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        self.values.row(t)
    }

    /// Feature files: magic "FTR1", u32 rows, u32 dim, f32 frame shift,
    /// row-major float32, all little-endian.
    pub fn write_ftr(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        w.write_all(b"FTR1").map_err(io)?;
        w.write_all(&(self.rows() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.dim() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.frame_shift_s as f32).to_le_bytes())
            .map_err(io)?;
        for v in self.values.data() {
            w.write_all(&(*v as f32).to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_ftr(path: impl AsRef<Path>, tag: StreamTag) -> Result<Self> {
        let path = path.as_ref();
        let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != b"FTR1" {
            return Err(Error::MalformedHeader {
                what: "feature file",
                detail: format!("bad magic {:?}", magic),
            });
        }
        let rows = read_u32(&mut r, path)? as usize;
        let dim = read_u32(&mut r, path)? as usize;
        let shift = read_f32(&mut r, path)? as f64;
        if dim == 0 {
            return Err(Error::MalformedHeader {
                what: "feature file",
                detail: "zero feature dimension".into(),
            });
        }
        let mut data = Vec::with_capacity(rows * dim);
        for _ in 0..rows * dim {
            data.push(read_f32(&mut r, path)? as f64);
        }
        FeatureMatrix::new(Mat::from_vec(rows, dim, data), shift, tag)
    }
}

pub(crate) fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64(r: &mut impl Read, path: &Path) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f32(r: &mut impl Read, path: &Path) -> Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(f32::from_le_bytes(b))
}

/// Append first and second derivatives: per frame the output is
/// [static, Δ, ΔΔ] computed with a ±2-frame regression window and edge
/// replication, tripling the dimension.
pub fn append_deltas(f: &FeatureMatrix) -> FeatureMatrix {
    let deltas = regression_deltas(f.values());
    let ddeltas = regression_deltas(&deltas);
    let rows = f.rows();
    let dim = f.dim();
    let mut out = Mat::zeros(rows, dim * 3);
    for t in 0..rows {
        out.row_mut(t)[..dim].copy_from_slice(f.frame(t));
        out.row_mut(t)[dim..2 * dim].copy_from_slice(deltas.row(t));
        out.row_mut(t)[2 * dim..].copy_from_slice(ddeltas.row(t));
    }
    FeatureMatrix::new(out, f.frame_shift_s(), f.stream_tag())
        .expect("deltas of finite input are finite")
}

/// d_t = Σ_{n=1..2} n·(x_{t+n} − x_{t−n}) / (2·Σ n²), clamping indices at
/// the edges (replication).
fn regression_deltas(x: &Mat) -> Mat {
    let rows = x.rows();
    let dim = x.cols();
    let denom = 2.0 * (1.0 + 4.0); // 2 Σ n² for n in 1..=2
    let mut out = Mat::zeros(rows, dim);
    let clamp = |t: isize| -> usize { t.clamp(0, rows as isize - 1) as usize };
    for t in 0..rows {
        for n in 1..=2isize {
            let fwd = x.row(clamp(t as isize + n));
            let bwd = x.row(clamp(t as isize - n));
            let w = n as f64 / denom;
            let orow = out.row_mut(t);
            for d in 0..dim {
                orow[d] += w * (fwd[d] - bwd[d]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::new(Mat::from_rows(rows), 0.010, StreamTag::Acoustic).unwrap()
    }

    #[test]
    fn constant_stream_has_zero_deltas() {
        let f = fm(&vec![vec![1.0, -2.0]; 6]);
        let out = append_deltas(&f);
        assert_eq!(out.dim(), 6);
        for t in 0..out.rows() {
            assert_eq!(&out.frame(t)[..2], f.frame(t));
            for v in &out.frame(t)[2..] {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn thirteen_dim_becomes_thirty_nine() {
        let f = fm(&vec![vec![0.5; 13]; 4]);
        assert_eq!(append_deltas(&f).dim(), 39);
    }

    #[test]
    fn linear_ramp_delta_equals_slope() {
        // x_t = 0.25 t per dim; interior Δ = (1·2s + 2·4s)/10 = s. Edge
        // replication perturbs Δ within two frames of either end, so ΔΔ is
        // exactly zero only where the ±2 window sees constant Δ.
        let slope = 0.25;
        let rows: Vec<Vec<f64>> = (0..15).map(|t| vec![slope * t as f64; 3]).collect();
        let out = append_deltas(&fm(&rows));
        for t in 2..13 {
            for d in 0..3 {
                assert!((out.frame(t)[3 + d] - slope).abs() < 1e-12);
            }
        }
        for t in 4..11 {
            for d in 0..3 {
                assert!(out.frame(t)[6 + d].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn statics_preserved_exactly() {
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|t| vec![(t as f64).sin(), (t as f64).cos()])
            .collect();
        let f = fm(&rows);
        let out = append_deltas(&f);
        for t in 0..5 {
            assert_eq!(&out.frame(t)[..2], f.frame(t));
        }
    }

    #[test]
    fn ftr_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ftr");
        let f = fm(&[vec![0.125, -3.5], vec![7.25, 0.0]]);
        f.write_ftr(&path).unwrap();
        let g = FeatureMatrix::read_ftr(&path, StreamTag::Acoustic).unwrap();
        assert_eq!(g.rows(), 2);
        assert_eq!(g.dim(), 2);
        assert_eq!(g.frame_shift_s(), 0.010f32 as f64);
        // Values chosen exactly representable in f32.
        assert_eq!(g.values().data(), f.values().data());
    }

    #[test]
    fn rejects_non_finite() {
        let m = Mat::from_rows(&[vec![f64::NAN]]);
        assert!(FeatureMatrix::new(m, 0.01, StreamTag::Neural).is_err());
    }
}
