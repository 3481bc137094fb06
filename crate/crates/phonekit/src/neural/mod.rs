//! Neural front-end: channel cleanup, Gaussian analytic filterbank,
//! log high-gamma envelopes at 100 Hz, spatial PCA with Varimax rotation,
//! convex NMF clustering and delta cascading to the final 144-dim stream.

mod filterbank;
mod nmf;
mod pca;

pub use filterbank::{analytic_filterbank, high_gamma_envelope, resample, FilterbankSpec};
pub use nmf::{convex_nmf, NmfFactors};
pub use pca::{fit_spatial_basis, varimax, varimax_criterion, SpatialBasis};

use crate::corpus::NeuralRecording;
use crate::error::{Error, Result};
use crate::feat::{append_deltas, FeatureMatrix, StreamTag};
use crate::linalg::Mat;

/// Front-end settings; defaults follow the reference recipe (42 filters
/// over [4, 250] Hz, 70–160 Hz band, 100 Hz output, 48 components).
#[derive(Debug, Clone)]
pub struct NeuralConfig {
    pub n_filters: usize,
    pub filter_lo_hz: f64,
    pub filter_hi_hz: f64,
    pub fractional_bandwidth: f64,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub log_eps: f64,
    pub out_rate_hz: f64,
    pub pca_dim: usize,
    pub nmf_dim: usize,
    pub nmf_iters: usize,
    pub reject_z: f64,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        NeuralConfig {
            n_filters: 42,
            filter_lo_hz: 4.0,
            filter_hi_hz: 250.0,
            fractional_bandwidth: 0.25,
            band_lo_hz: 70.0,
            band_hi_hz: 160.0,
            log_eps: 1e-8,
            out_rate_hz: 100.0,
            pca_dim: 48,
            nmf_dim: 48,
            nmf_iters: 100,
            reject_z: 3.0,
        }
    }
}

impl NeuralConfig {
    pub fn filterbank(&self) -> Result<FilterbankSpec> {
        FilterbankSpec::log_spaced(
            self.n_filters,
            self.filter_lo_hz,
            self.filter_hi_hz,
            self.fractional_bandwidth,
        )
    }
}

/// Mask channels whose log-variance is an outlier relative to the other
/// channels (leave-one-out z-score above `z_threshold` in magnitude).
pub fn reject_channels(r: &NeuralRecording, z_threshold: f64) -> Result<NeuralRecording> {
    if r.channels() < 2 {
        return Err(Error::InvalidParam(
            "channel rejection needs at least 2 channels".into(),
        ));
    }
    let usable = r.usable_channels();
    let log_vars: Vec<f64> = usable
        .iter()
        .map(|&c| {
            let row = r.data().row(c);
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / row.len() as f64;
            (var + f64::MIN_POSITIVE).ln()
        })
        .collect();

    let mut mask = r.channel_mask().to_vec();
    for (i, &c) in usable.iter().enumerate() {
        let others: Vec<f64> = log_vars
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, &v)| v)
            .collect();
        let mean = others.iter().sum::<f64>() / others.len() as f64;
        let var = others.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / others.len() as f64;
        let dev = log_vars[i] - mean;
        let z = if dev == 0.0 {
            0.0
        } else if var == 0.0 {
            f64::INFINITY
        } else {
            dev.abs() / var.sqrt()
        };
        if z > z_threshold {
            mask[c] = false;
        }
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::AllChannelsRejected);
    }
    NeuralRecording::with_mask(r.data().clone(), r.sample_rate_hz(), mask, r.id().to_string())
}

/// Subtract the per-sample mean over usable channels from every usable
/// channel; masked channels pass through untouched.
pub fn common_average_reference(r: &NeuralRecording) -> Result<NeuralRecording> {
    let usable = r.usable_channels();
    if usable.is_empty() {
        return Err(Error::AllChannelsRejected);
    }
    let mut data = r.data().clone();
    let inv = 1.0 / usable.len() as f64;
    for t in 0..r.samples() {
        let mean: f64 = usable.iter().map(|&c| data[(c, t)]).sum::<f64>() * inv;
        for &c in &usable {
            data[(c, t)] -= mean;
        }
    }
    NeuralRecording::with_mask(
        data,
        r.sample_rate_hz(),
        r.channel_mask().to_vec(),
        r.id().to_string(),
    )
}

/// Per-channel log high-gamma envelopes at the output rate, stacked as a
/// usable-channels × frames matrix. The common average reference is
/// applied first.
pub fn envelope_stack(r: &NeuralRecording, cfg: &NeuralConfig) -> Result<Mat> {
    let referenced = common_average_reference(r)?;
    let spec = cfg.filterbank()?;
    let usable = referenced.usable_channels();
    let fs = referenced.sample_rate_hz() as f64;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(usable.len());
    for &c in &usable {
        let analytic = analytic_filterbank(referenced.data().row(c), fs, &spec)?;
        rows.push(high_gamma_envelope(
            &analytic,
            &spec,
            fs,
            cfg.band_lo_hz,
            cfg.band_hi_hz,
            cfg.log_eps,
            cfg.out_rate_hz,
        )?);
    }
    Ok(Mat::from_rows(&rows))
}

/// The fitted stage of the neural front-end: spatial basis plus NMF
/// mixing weights, trained on training-cut envelopes only.
#[derive(Debug, Clone)]
pub struct NeuralModel {
    pub basis: SpatialBasis,
    pub nmf: NmfFactors,
}

/// Fit PCA/Varimax and convex NMF on the stacked envelopes of the given
/// training recordings.
pub fn fit_neural_model(
    recordings: &[NeuralRecording],
    cfg: &NeuralConfig,
    seed: u64,
) -> Result<NeuralModel> {
    if recordings.is_empty() {
        return Err(Error::InvalidParam("no training recordings".into()));
    }
    let stacks: Vec<Mat> = recordings
        .iter()
        .map(|r| envelope_stack(r, cfg))
        .collect::<Result<Vec<_>>>()?;
    let channels = stacks[0].rows();
    if stacks.iter().any(|s| s.rows() != channels) {
        return Err(Error::ShapeMismatch {
            what: "training envelope stacks".into(),
            expected: format!("{channels} usable channels"),
            actual: "mismatched channel counts across recordings".into(),
        });
    }
    let total_frames: usize = stacks.iter().map(|s| s.cols()).sum();
    let mut all = Mat::zeros(channels, total_frames);
    let mut offset = 0;
    for s in &stacks {
        for c in 0..channels {
            for t in 0..s.cols() {
                all[(c, offset + t)] = s[(c, t)];
            }
        }
        offset += s.cols();
    }

    let basis = fit_spatial_basis(&all, cfg.pca_dim)?;
    let rotated = basis.transform(&all)?; // frames × pca_dim
    let nmf = convex_nmf(&rotated, cfg.nmf_dim, cfg.nmf_iters, seed)?;
    Ok(NeuralModel { basis, nmf })
}

/// Full apply path: envelopes → project/rotate → NMF mapping → deltas.
/// Output dimension is 3 · nmf_dim (144 with defaults) at 100 Hz.
pub fn assemble_neural_features(
    r: &NeuralRecording,
    model: &NeuralModel,
    cfg: &NeuralConfig,
) -> Result<FeatureMatrix> {
    let stack = envelope_stack(r, cfg)?;
    if stack.rows() != model.basis.n_channels() {
        return Err(Error::ShapeMismatch {
            what: "neural feature assembly".into(),
            expected: format!("{} usable channels", model.basis.n_channels()),
            actual: format!("{} usable channels", stack.rows()),
        });
    }
    let rotated = model.basis.transform(&stack)?;
    let mapped = model.nmf.map_rows(&rotated)?;
    let statics = FeatureMatrix::new(mapped, 1.0 / cfg.out_rate_hz, StreamTag::Neural)?;
    Ok(append_deltas(&statics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn recording_with_variances(vars: &[f64], n: usize) -> NeuralRecording {
        // Deterministic zero-mean unit-variance base signal, scaled per
        // channel so sample variances are exact multiples.
        let base: Vec<f64> = (0..n)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let rows: Vec<Vec<f64>> = vars
            .iter()
            .map(|&v| base.iter().map(|b| b * v.sqrt()).collect())
            .collect();
        NeuralRecording::new(Mat::from_rows(&rows), 3052, "test".into()).unwrap()
    }

    #[test]
    fn identical_channels_none_rejected() {
        let r = recording_with_variances(&[1.0; 8], 100);
        let out = reject_channels(&r, 3.0).unwrap();
        assert_eq!(out.channel_mask(), &[true; 8]);
    }

    #[test]
    fn single_outlier_rejected_at_z3() {
        let r = recording_with_variances(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1e6], 100);
        let out = reject_channels(&r, 3.0).unwrap();
        let expect: Vec<bool> = (0..8).map(|c| c != 7).collect();
        assert_eq!(out.channel_mask(), expect.as_slice());
    }

    #[test]
    fn infinite_threshold_keeps_mask() {
        let r = recording_with_variances(&[1.0, 100.0, 0.01, 1.0], 64);
        let out = reject_channels(&r, f64::INFINITY).unwrap();
        assert_eq!(out.channel_mask(), &[true; 4]);
    }

    #[test]
    fn car_single_channel_zeroed() {
        let m = Mat::from_rows(&[vec![1.0, -2.0, 3.0]]);
        let r = NeuralRecording::new(m, 3052, "one".into()).unwrap();
        let out = common_average_reference(&r).unwrap();
        assert!(out.data().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn car_antisymmetric_pair_unchanged() {
        let m = Mat::from_rows(&[vec![1.0, -0.5, 2.0], vec![-1.0, 0.5, -2.0]]);
        let r = NeuralRecording::new(m.clone(), 3052, "pm".into()).unwrap();
        let out = common_average_reference(&r).unwrap();
        assert_eq!(out.data().data(), m.data());
    }

    #[test]
    fn car_zero_mean_after() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = Mat::zeros(4, 100);
        for v in m.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let r = NeuralRecording::new(m, 3052, "rnd".into()).unwrap();
        let out = common_average_reference(&r).unwrap();
        for t in 0..100 {
            let mean: f64 = (0..4).map(|c| out.data()[(c, t)]).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn car_skips_masked_channels() {
        let m = Mat::from_rows(&[vec![1.0, 1.0], vec![3.0, 3.0], vec![100.0, 100.0]]);
        let r =
            NeuralRecording::with_mask(m, 3052, vec![true, true, false], "mask".into()).unwrap();
        let out = common_average_reference(&r).unwrap();
        // Usable mean was 2; masked channel untouched.
        assert_eq!(out.data().row(0), &[-1.0, -1.0]);
        assert_eq!(out.data().row(1), &[1.0, 1.0]);
        assert_eq!(out.data().row(2), &[100.0, 100.0]);
    }

    #[test]
    fn assembled_features_have_expected_dim_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let channels = 6;
        let n = 3052; // 1 s at the reference rate
        let mut m = Mat::zeros(channels, n);
        for v in m.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let rec = NeuralRecording::new(m, 3052, "synthetic".into()).unwrap();
        let cfg = NeuralConfig {
            pca_dim: 4,
            nmf_dim: 4,
            nmf_iters: 20,
            ..NeuralConfig::default()
        };
        let model = fit_neural_model(std::slice::from_ref(&rec), &cfg, 5).unwrap();
        let f1 = assemble_neural_features(&rec, &model, &cfg).unwrap();
        let f2 = assemble_neural_features(&rec, &model, &cfg).unwrap();
        assert_eq!(f1.dim(), 12); // 3 × nmf_dim
        assert_eq!(f1.frame_shift_s(), 0.010);
        assert_eq!(f1.values().data(), f2.values().data());
        assert!((f1.rows() as isize - 100).abs() <= 1);
    }
}
