//! Spatial PCA with Varimax rotation of the retained components.

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, Mat};

/// Mean, projection and rotation fitted on training data. Applying the
/// basis maps a channel vector x to rotationᵀ · projectionᵀ · (x − mean).
#[derive(Debug, Clone)]
pub struct SpatialBasis {
    pub mean: Vec<f64>,
    /// channels × k, orthonormal columns (descending eigenvalue order).
    pub projection: Mat,
    /// k × k orthogonal Varimax rotation.
    pub rotation: Mat,
    /// Eigenvalues of the retained components.
    pub eigenvalues: Vec<f64>,
}

impl SpatialBasis {
    pub fn n_channels(&self) -> usize {
        self.projection.rows()
    }

    pub fn dim(&self) -> usize {
        self.projection.cols()
    }

    /// Transform a channels × frames matrix to frames × k coordinates.
    pub fn transform(&self, x: &Mat) -> Result<Mat> {
        if x.rows() != self.n_channels() {
            return Err(Error::ShapeMismatch {
                what: "spatial basis input".into(),
                expected: format!("{} channels", self.n_channels()),
                actual: format!("{} channels", x.rows()),
            });
        }
        let k = self.dim();
        let frames = x.cols();
        let mut out = Mat::zeros(frames, k);
        let mut centered = vec![0.0; self.n_channels()];
        for t in 0..frames {
            for c in 0..self.n_channels() {
                centered[c] = x[(c, t)] - self.mean[c];
            }
            let proj = self.projection.matvec_t(&centered);
            let rot = self.rotation.matvec_t(&proj);
            out.row_mut(t).copy_from_slice(&rot);
        }
        Ok(out)
    }
}

/// Mean-centered PCA to `k` components followed by Varimax rotation.
/// Component sign is fixed so the largest-magnitude loading is positive.
pub fn fit_spatial_basis(x: &Mat, k: usize) -> Result<SpatialBasis> {
    let channels = x.rows();
    let frames = x.cols();
    if k == 0 || k > channels {
        return Err(Error::InvalidParam(format!(
            "k={k} outside [1, {channels}]"
        )));
    }
    if frames < 2 {
        return Err(Error::InvalidParam("need at least 2 frames for PCA".into()));
    }

    let mean: Vec<f64> = (0..channels)
        .map(|c| x.row(c).iter().sum::<f64>() / frames as f64)
        .collect();
    // Covariance over frames as observations.
    let mut cov = Mat::zeros(channels, channels);
    for t in 0..frames {
        for a in 0..channels {
            let xa = x[(a, t)] - mean[a];
            for b in a..channels {
                cov[(a, b)] += xa * (x[(b, t)] - mean[b]);
            }
        }
    }
    let norm = 1.0 / (frames - 1) as f64;
    for a in 0..channels {
        for b in a..channels {
            let v = cov[(a, b)] * norm;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let (eigvals, eigvecs) = sym_eig(&cov)?;
    let max_eig = eigvals[0].max(0.0);
    let rank = eigvals
        .iter()
        .filter(|&&v| v > 1e-12 * max_eig.max(f64::MIN_POSITIVE))
        .count();
    if rank < k {
        return Err(Error::InsufficientRank { rank, requested: k });
    }

    let mut projection = Mat::zeros(channels, k);
    for j in 0..k {
        let mut col: Vec<f64> = (0..channels).map(|r| eigvecs[(r, j)]).collect();
        fix_sign(&mut col);
        for r in 0..channels {
            projection[(r, j)] = col[r];
        }
    }

    let (rotation, _trace) = varimax(&projection, 200, 1e-8);
    Ok(SpatialBasis {
        mean,
        projection,
        rotation,
        eigenvalues: eigvals[..k].to_vec(),
    })
}

fn fix_sign(col: &mut [f64]) {
    let mut best = 0;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > col[best].abs() {
            best = i;
        }
    }
    if col[best] < 0.0 {
        for v in col.iter_mut() {
            *v = -*v;
        }
    }
}

/// Raw varimax criterion: per factor, the variance of squared loadings.
pub fn varimax_criterion(loadings: &Mat) -> f64 {
    let p = loadings.rows() as f64;
    let mut total = 0.0;
    for j in 0..loadings.cols() {
        let mut s2 = 0.0;
        let mut s4 = 0.0;
        for i in 0..loadings.rows() {
            let l2 = loadings[(i, j)] * loadings[(i, j)];
            s2 += l2;
            s4 += l2 * l2;
        }
        total += s4 / p - (s2 / p) * (s2 / p);
    }
    total
}

/// Pairwise-rotation Varimax. Returns the accumulated orthogonal rotation
/// and the criterion value after each sweep (non-decreasing).
pub fn varimax(loadings: &Mat, max_sweeps: usize, tol: f64) -> (Mat, Vec<f64>) {
    let p = loadings.rows();
    let k = loadings.cols();
    let mut lam = loadings.clone();
    let mut rot = Mat::identity(k);
    let mut trace = vec![varimax_criterion(&lam)];

    for _sweep in 0..max_sweeps {
        for a in 0..k {
            for b in (a + 1)..k {
                let (mut aa, mut bb, mut cc, mut dd) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..p {
                    let x = lam[(i, a)];
                    let y = lam[(i, b)];
                    let u = x * x - y * y;
                    let v = 2.0 * x * y;
                    aa += u;
                    bb += v;
                    cc += u * u - v * v;
                    dd += 2.0 * u * v;
                }
                let num = dd - 2.0 * aa * bb / p as f64;
                let den = cc - (aa * aa - bb * bb) / p as f64;
                if num.abs() < 1e-15 && den.abs() < 1e-15 {
                    continue;
                }
                let phi = 0.25 * num.atan2(den);
                if phi.abs() < 1e-15 {
                    continue;
                }
                let (s, c) = phi.sin_cos();
                for i in 0..p {
                    let x = lam[(i, a)];
                    let y = lam[(i, b)];
                    lam[(i, a)] = c * x + s * y;
                    lam[(i, b)] = -s * x + c * y;
                }
                for i in 0..k {
                    let x = rot[(i, a)];
                    let y = rot[(i, b)];
                    rot[(i, a)] = c * x + s * y;
                    rot[(i, b)] = -s * x + c * y;
                }
            }
        }
        let v = varimax_criterion(&lam);
        let gain = v - trace.last().unwrap();
        trace.push(v);
        if gain < tol {
            break;
        }
    }

    // Deterministic column signs on the rotated loadings.
    for j in 0..k {
        let mut col: Vec<f64> = (0..p).map(|i| lam[(i, j)]).collect();
        let before = col.clone();
        fix_sign(&mut col);
        if col != before {
            for i in 0..k {
                rot[(i, j)] = -rot[(i, j)];
            }
        }
    }
    (rot, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn rank_one_data_single_component() {
        // x_t = s_t · d for a fixed direction d.
        let d = [1.0, -2.0, 0.5, 3.0];
        let frames = 40;
        let mut x = Mat::zeros(4, frames);
        for t in 0..frames {
            let s = (t as f64 * 0.3).sin();
            for c in 0..4 {
                x[(c, t)] = s * d[c];
            }
        }
        let basis = fit_spatial_basis(&x, 1).unwrap();
        // Reconstruction from one component is exact for rank-1 data.
        let coords = basis.transform(&x).unwrap();
        for t in 0..frames {
            for c in 0..4 {
                let recon = basis.mean[c] + basis.projection[(c, 0)] * basis.rotation[(0, 0)] * coords[(t, 0)];
                assert!((recon - x[(c, t)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn projection_orthonormal_rotation_orthogonal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut x = Mat::zeros(10, 300);
        for v in x.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let basis = fit_spatial_basis(&x, 6).unwrap();
        let ptp = basis.projection.matmul_tn(&basis.projection);
        for a in 0..6 {
            for b in 0..6 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ptp[(a, b)] - want).abs() < 1e-8);
            }
        }
        let rtr = basis.rotation.matmul_tn(&basis.rotation);
        for a in 0..6 {
            for b in 0..6 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((rtr[(a, b)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rank_deficient_rejected() {
        // 3 channels but rank 1.
        let mut x = Mat::zeros(3, 50);
        for t in 0..50 {
            let s = t as f64;
            x[(0, t)] = s;
            x[(1, t)] = 2.0 * s;
            x[(2, t)] = -s;
        }
        assert!(matches!(
            fit_spatial_basis(&x, 2),
            Err(Error::InsufficientRank { .. })
        ));
    }

    #[test]
    fn varimax_fixed_point_on_axis_aligned_loadings() {
        // Loadings already maximally sparse: identity block plus zeros.
        let mut lam = Mat::zeros(6, 3);
        lam[(0, 0)] = 1.0;
        lam[(1, 1)] = 1.0;
        lam[(2, 2)] = 1.0;
        let (rot, trace) = varimax(&lam, 50, 1e-10);
        // Rotation must be a signed permutation ≈ identity here.
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((rot[(a, b)].abs() - want).abs() < 1e-9);
            }
        }
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn varimax_criterion_non_decreasing_per_sweep() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut lam = Mat::zeros(20, 5);
        for v in lam.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let (rot, trace) = varimax(&lam, 200, 1e-8);
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "criterion decreased: {w:?}");
        }
        let rtr = rot.matmul_tn(&rot);
        for a in 0..5 {
            for b in 0..5 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((rtr[(a, b)] - want).abs() < 1e-10);
            }
        }
    }
}
