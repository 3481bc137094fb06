//! Gaussian analytic filterbank and high-gamma log-envelope extraction.
//!
//! Each filter multiplies the discrete spectrum by a one-sided Gaussian
//! window with unit peak gain (factor-2 positive-frequency convention),
//! yielding one analytic signal per filter at the raw sampling rate.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// 42 Gaussian filters log-spaced over [4, 250] Hz by default; the
/// bandwidth is a fraction of the center frequency (σ = fc/4 by default).
#[derive(Debug, Clone)]
pub struct FilterbankSpec {
    pub center_freqs_hz: Vec<f64>,
    pub fractional_bandwidth: f64,
}

impl FilterbankSpec {
    pub fn log_spaced(n_filters: usize, lo_hz: f64, hi_hz: f64, fractional_bandwidth: f64) -> Result<Self> {
        if n_filters < 1 || !(lo_hz > 0.0) || !(hi_hz > lo_hz) {
            return Err(Error::InvalidParam(format!(
                "bad filterbank range: {n_filters} filters over [{lo_hz}, {hi_hz}]"
            )));
        }
        if !(fractional_bandwidth > 0.0) {
            return Err(Error::InvalidParam("fractional bandwidth must be > 0".into()));
        }
        let ratio = hi_hz / lo_hz;
        let centers = (0..n_filters)
            .map(|i| {
                if n_filters == 1 {
                    lo_hz
                } else {
                    lo_hz * ratio.powf(i as f64 / (n_filters - 1) as f64)
                }
            })
            .collect();
        Ok(FilterbankSpec {
            center_freqs_hz: centers,
            fractional_bandwidth,
        })
    }

    pub fn default_ecog() -> Self {
        FilterbankSpec::log_spaced(42, 4.0, 250.0, 0.25).expect("default spec is valid")
    }

    pub fn n_filters(&self) -> usize {
        self.center_freqs_hz.len()
    }

    pub fn sigma_hz(&self, filter: usize) -> f64 {
        self.center_freqs_hz[filter] * self.fractional_bandwidth
    }

    /// Indices of filters with center frequency inside [lo, hi].
    pub fn filters_in_band(&self, lo_hz: f64, hi_hz: f64) -> Vec<usize> {
        self.center_freqs_hz
            .iter()
            .enumerate()
            .filter(|(_, &fc)| fc >= lo_hz && fc <= hi_hz)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Analytic signals for every filter: an `n_filters × N` complex matrix.
pub fn analytic_filterbank(
    x: &[f64],
    fs_hz: f64,
    spec: &FilterbankSpec,
) -> Result<Vec<Vec<Complex<f64>>>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidParam("signal shorter than 2 samples".into()));
    }
    let nyquist = fs_hz / 2.0;
    if let Some(&bad) = spec.center_freqs_hz.iter().find(|&&fc| fc >= nyquist) {
        return Err(Error::InvalidParam(format!(
            "filter center {bad} Hz at or above Nyquist {nyquist} Hz"
        )));
    }

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let mut spectrum: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut spectrum);

    let df = fs_hz / n as f64;
    let half = n / 2;
    let mut out = Vec::with_capacity(spec.n_filters());
    for f in 0..spec.n_filters() {
        let fc = spec.center_freqs_hz[f];
        let sigma = spec.sigma_hz(f);
        let mut band = vec![Complex::new(0.0, 0.0); n];
        for k in 0..=half {
            let freq = k as f64 * df;
            let w = (-((freq - fc) * (freq - fc)) / (2.0 * sigma * sigma)).exp();
            // Positive-frequency doubling; DC and (for even n) Nyquist stay single.
            let h = if k == 0 || (n % 2 == 0 && k == half) {
                1.0
            } else {
                2.0
            };
            band[k] = spectrum[k] * (w * h);
        }
        ifft.process(&mut band);
        let scale = 1.0 / n as f64;
        for v in band.iter_mut() {
            *v *= scale;
        }
        out.push(band);
    }
    Ok(out)
}

/// Anti-aliased windowed-sinc resampling; unit DC gain by per-sample
/// weight normalization. Output length floor((N−1)·out/in) + 1.
pub fn resample(x: &[f64], fs_in_hz: f64, fs_out_hz: f64) -> Vec<f64> {
    assert!(!x.is_empty());
    if (fs_in_hz - fs_out_hz).abs() < 1e-12 {
        return x.to_vec();
    }
    let n_in = x.len();
    let n_out = ((n_in - 1) as f64 * fs_out_hz / fs_in_hz).floor() as usize + 1;
    let cutoff_hz = 0.45 * fs_in_hz.min(fs_out_hz);
    let cutoff_n = cutoff_hz / fs_in_hz; // cycles per input sample
    // Kernel half-width: four sinc lobes.
    let half_width = (2.0 / cutoff_n).ceil() as isize;
    let step = fs_in_hz / fs_out_hz;

    let kernel = |u: f64| -> f64 {
        if u.abs() >= half_width as f64 {
            return 0.0;
        }
        let s = if u == 0.0 {
            1.0
        } else {
            let arg = std::f64::consts::PI * 2.0 * cutoff_n * u;
            arg.sin() / arg
        };
        let hann = 0.5 * (1.0 + (std::f64::consts::PI * u / half_width as f64).cos());
        s * hann
    };

    (0..n_out)
        .map(|m| {
            let center = m as f64 * step;
            let lo = ((center - half_width as f64).ceil() as isize).max(0);
            let hi = ((center + half_width as f64).floor() as isize).min(n_in as isize - 1);
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for i in lo..=hi {
                let w = kernel(i as f64 - center);
                acc += w * x[i as usize];
                wsum += w;
            }
            if wsum.abs() > 0.0 {
                acc / wsum
            } else {
                0.0
            }
        })
        .collect()
}

/// Average the analytic amplitudes of the filters with centers in
/// [band_lo, band_hi] Hz, take ln(·+ε), then resample to `out_rate_hz`.
pub fn high_gamma_envelope(
    analytic: &[Vec<Complex<f64>>],
    spec: &FilterbankSpec,
    fs_hz: f64,
    band_lo_hz: f64,
    band_hi_hz: f64,
    log_eps: f64,
    out_rate_hz: f64,
) -> Result<Vec<f64>> {
    let band = spec.filters_in_band(band_lo_hz, band_hi_hz);
    if band.is_empty() {
        return Err(Error::NoFiltersInBand {
            lo: band_lo_hz,
            hi: band_hi_hz,
        });
    }
    let n = analytic
        .first()
        .map(|v| v.len())
        .ok_or_else(|| Error::InvalidParam("empty analytic matrix".into()))?;
    let mut env = vec![0.0; n];
    for &f in &band {
        for (e, z) in env.iter_mut().zip(&analytic[f]) {
            *e += z.norm();
        }
    }
    let inv = 1.0 / band.len() as f64;
    for e in env.iter_mut() {
        *e = (*e * inv + log_eps).ln();
    }
    Ok(resample(&env, fs_hz, out_rate_hz))
}
