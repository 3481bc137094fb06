//! Acoustic front-end: 13 mel-frequency cepstral coefficients every 10 ms
//! from a 25 ms Hamming window; deltas are cascaded via
//! [`crate::feat::append_deltas`] to reach the 39-dimensional stream.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::corpus::Waveform;
use crate::error::{Error, Result};
use crate::feat::{FeatureMatrix, StreamTag};
use crate::linalg::Mat;

#[derive(Debug, Clone)]
pub struct MfccConfig {
    pub n_ceps: usize,
    pub win_s: f64,
    pub shift_s: f64,
    pub n_mel_filters: usize,
    pub fmin_hz: f64,
    /// Upper filterbank edge; `None` means Nyquist.
    pub fmax_hz: Option<f64>,
    pub pre_emphasis: f64,
    pub log_floor: f64,
    /// Use the cepstral c0 as the first coefficient (default). When false,
    /// the first coefficient is the log frame energy instead.
    pub use_c0: bool,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            n_ceps: 13,
            win_s: 0.025,
            shift_s: 0.010,
            n_mel_filters: 23,
            fmin_hz: 20.0,
            fmax_hz: None,
            pre_emphasis: 0.97,
            log_floor: 1e-10,
            use_c0: true,
        }
    }
}

impl MfccConfig {
    fn validate(&self) -> Result<()> {
        if !(self.win_s > self.shift_s && self.shift_s > 0.0) {
            return Err(Error::InvalidParam(
                "require win_s > shift_s > 0".into(),
            ));
        }
        if self.n_ceps > self.n_mel_filters {
            return Err(Error::InvalidParam(
                "n_ceps must not exceed n_mel_filters".into(),
            ));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::InvalidParam("log_floor must be positive".into()));
        }
        Ok(())
    }
}

pub fn mel_from_hz(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn hz_from_mel(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Center frequencies (Hz) of the mel filterbank for a given sample rate.
pub fn mel_filter_centers(cfg: &MfccConfig, sample_rate_hz: u32) -> Vec<f64> {
    let fmax = cfg.fmax_hz.unwrap_or(sample_rate_hz as f64 / 2.0);
    let lo = mel_from_hz(cfg.fmin_hz);
    let hi = mel_from_hz(fmax);
    (1..=cfg.n_mel_filters)
        .map(|m| hz_from_mel(lo + (hi - lo) * m as f64 / (cfg.n_mel_filters + 1) as f64))
        .collect()
}

/// Number of frames produced by `(N − win)/shift + 1` framing.
pub fn frame_count(n_samples: usize, win: usize, shift: usize) -> Option<usize> {
    if n_samples < win {
        None
    } else {
        Some((n_samples - win) / shift + 1)
    }
}

struct Framing {
    win: usize,
    shift: usize,
    n_frames: usize,
    nfft: usize,
}

fn framing(w: &Waveform, cfg: &MfccConfig) -> Result<Framing> {
    let fs = w.sample_rate_hz() as f64;
    let win = (cfg.win_s * fs).round() as usize;
    let shift = (cfg.shift_s * fs).round() as usize;
    if win == 0 || shift == 0 {
        return Err(Error::InvalidParam("window or shift rounds to zero samples".into()));
    }
    let n_frames = frame_count(w.samples().len(), win, shift).ok_or_else(|| {
        Error::InvalidParam(format!(
            "waveform of {} samples shorter than one {win}-sample window",
            w.samples().len()
        ))
    })?;
    Ok(Framing {
        win,
        shift,
        n_frames,
        nfft: win.next_power_of_two(),
    })
}

/// Log mel-filterbank energies per frame (frames × n_mel_filters); the
/// stage ahead of the DCT, exposed for inspection and tests.
pub fn mel_spectrogram(w: &Waveform, cfg: &MfccConfig) -> Result<Mat> {
    cfg.validate()?;
    let fr = framing(w, cfg)?;
    let fs = w.sample_rate_hz() as f64;

    // Pre-emphasis over the whole signal, first sample replicated.
    let x = w.samples();
    let mut pre = Vec::with_capacity(x.len());
    pre.push(x[0] - cfg.pre_emphasis * x[0]);
    for n in 1..x.len() {
        pre.push(x[n] - cfg.pre_emphasis * x[n - 1]);
    }

    let window: Vec<f64> = (0..fr.win)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (fr.win - 1) as f64).cos())
        .collect();

    let fbank = mel_filterbank(cfg, fs, fr.nfft);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(fr.nfft);

    let mut out = Mat::zeros(fr.n_frames, cfg.n_mel_filters);
    let mut buf = vec![Complex::new(0.0, 0.0); fr.nfft];
    for t in 0..fr.n_frames {
        let start = t * fr.shift;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = if i < fr.win {
                Complex::new(pre[start + i] * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        let n_bins = fr.nfft / 2 + 1;
        let power: Vec<f64> = buf[..n_bins].iter().map(|c| c.norm_sqr()).collect();
        for (m, filt) in fbank.iter().enumerate() {
            let mut e = 0.0;
            for &(bin, wgt) in filt {
                e += wgt * power[bin];
            }
            out[(t, m)] = e.max(cfg.log_floor).ln();
        }
    }
    Ok(out)
}

/// 13 MFCCs per 10 ms frame: pre-emphasis, Hamming window, power spectrum,
/// mel filterbank, floored log, DCT-II (orthonormal) keeping `n_ceps`
/// coefficients with c0 included.
pub fn compute_mfcc(w: &Waveform, cfg: &MfccConfig) -> Result<FeatureMatrix> {
    let logmel = mel_spectrogram(w, cfg)?;
    let n_mel = cfg.n_mel_filters;
    let n_frames = logmel.rows();

    // Orthonormal DCT-II basis, n_ceps × n_mel.
    let mut dct = Mat::zeros(cfg.n_ceps, n_mel);
    for i in 0..cfg.n_ceps {
        let scale = if i == 0 {
            (1.0 / n_mel as f64).sqrt()
        } else {
            (2.0 / n_mel as f64).sqrt()
        };
        for j in 0..n_mel {
            dct[(i, j)] = scale * (PI * i as f64 * (j as f64 + 0.5) / n_mel as f64).cos();
        }
    }

    let mut out = Mat::zeros(n_frames, cfg.n_ceps);
    for t in 0..n_frames {
        let ceps = dct.matvec(logmel.row(t));
        out.row_mut(t).copy_from_slice(&ceps);
    }

    if !cfg.use_c0 {
        // Replace c0 with the floored log energy of the windowed frame.
        let fr = framing(w, cfg)?;
        for t in 0..n_frames {
            let start = t * fr.shift;
            let e: f64 = w.samples()[start..start + fr.win].iter().map(|s| s * s).sum();
            out[(t, 0)] = e.max(cfg.log_floor).ln();
        }
    }

    FeatureMatrix::new(out, cfg.shift_s, StreamTag::Acoustic)
}

/// Sparse triangular filters: per filter a list of (bin, weight).
fn mel_filterbank(cfg: &MfccConfig, fs: f64, nfft: usize) -> Vec<Vec<(usize, f64)>> {
    let fmax = cfg.fmax_hz.unwrap_or(fs / 2.0);
    let lo = mel_from_hz(cfg.fmin_hz);
    let hi = mel_from_hz(fmax);
    let edges: Vec<f64> = (0..cfg.n_mel_filters + 2)
        .map(|m| hz_from_mel(lo + (hi - lo) * m as f64 / (cfg.n_mel_filters + 1) as f64))
        .collect();
    let n_bins = nfft / 2 + 1;
    let bin_hz = fs / nfft as f64;
    (0..cfg.n_mel_filters)
        .map(|m| {
            let (fl, fc, fr) = (edges[m], edges[m + 1], edges[m + 2]);
            let mut filt = Vec::new();
            for bin in 0..n_bins {
                let f = bin as f64 * bin_hz;
                let wgt = if f > fl && f < fc {
                    (f - fl) / (fc - fl)
                } else if (f - fc).abs() < 1e-12 {
                    1.0
                } else if f > fc && f < fr {
                    (fr - f) / (fr - fc)
                } else {
                    0.0
                };
                if wgt > 0.0 {
                    filt.push((bin, wgt));
                }
            }
            filt
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, fs: u32, secs: f64, amp: f64) -> Waveform {
        let n = (secs * fs as f64) as usize;
        let samples: Vec<f64> = (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / fs as f64).sin())
            .collect();
        Waveform::new(samples, fs, "tone".into()).unwrap()
    }

    #[test]
    fn one_second_gives_98_frames() {
        let w = tone(440.0, 16_000, 1.0, 0.5);
        let f = compute_mfcc(&w, &MfccConfig::default()).unwrap();
        assert_eq!(f.rows(), 98);
        assert_eq!(f.dim(), 13);
        assert_eq!(f.frame_shift_s(), 0.010);
    }

    #[test]
    fn all_zero_waveform_constant_coefficients() {
        let w = Waveform::new(vec![0.0; 8000], 16_000, "z".into()).unwrap();
        let cfg = MfccConfig::default();
        let f = compute_mfcc(&w, &cfg).unwrap();
        // Expected: DCT of the constant log(log_floor) vector.
        let lf = cfg.log_floor.ln();
        let expect_c0 = (cfg.n_mel_filters as f64).sqrt() * lf;
        for t in 0..f.rows() {
            assert!((f.frame(t)[0] - expect_c0).abs() < 1e-9);
            for d in 1..13 {
                assert!(f.frame(t)[d].abs() < 1e-9);
                assert_eq!(f.frame(t)[d], f.frame(0)[d]);
            }
        }
    }

    #[test]
    fn tone_peaks_at_covering_filter() {
        let cfg = MfccConfig::default();
        let fs = 16_000u32;
        let w = tone(1000.0, fs, 0.5, 0.5);
        let logmel = mel_spectrogram(&w, &cfg).unwrap();
        let centers = mel_filter_centers(&cfg, fs);
        // Filter whose center is closest to 1 kHz.
        let expect = centers
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 1000.0).abs().partial_cmp(&(b.1 - 1000.0).abs()).unwrap())
            .unwrap()
            .0;
        // Use an interior frame to avoid edge transients.
        let t = logmel.rows() / 2;
        let argmax = logmel
            .row(t)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!(
            (argmax as isize - expect as isize).abs() <= 1,
            "argmax {argmax} vs expected {expect}"
        );
    }

    #[test]
    fn scaling_shifts_c0_only() {
        let w1 = tone(700.0, 16_000, 0.3, 0.25);
        let w2 = tone(700.0, 16_000, 0.3, 0.5);
        let cfg = MfccConfig::default();
        let f1 = compute_mfcc(&w1, &cfg).unwrap();
        let f2 = compute_mfcc(&w2, &cfg).unwrap();
        // Doubling amplitude adds sqrt(M)·ln(4) to c0 and leaves c1.. intact.
        let expect_shift = (cfg.n_mel_filters as f64).sqrt() * 4.0f64.ln();
        for t in 1..f1.rows() - 1 {
            let got_shift = f2.frame(t)[0] - f1.frame(t)[0];
            assert!(
                (got_shift - expect_shift).abs() / expect_shift.abs() < 1e-6,
                "frame {t}: shift {got_shift} vs {expect_shift}"
            );
            for d in 1..13 {
                let a = f1.frame(t)[d];
                let b = f2.frame(t)[d];
                assert!(
                    (a - b).abs() <= 1e-6 * a.abs().max(1.0),
                    "frame {t} dim {d}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn too_short_waveform_rejected() {
        let w = Waveform::new(vec![0.1; 100], 16_000, "s".into()).unwrap();
        assert!(compute_mfcc(&w, &MfccConfig::default()).is_err());
    }
}
