//! Convex non-negative matrix factorization X ≈ X·W·Gᵀ with multiplicative
//! updates, used to cluster correlated feature columns.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Mat;

const UPDATE_EPS: f64 = 1e-12;

/// Factor pair for X ≈ X·W·Gᵀ with X holding one clustered object per
/// column. W mixes data columns into cluster centroids, G holds the
/// per-column cluster weights.
#[derive(Debug, Clone)]
pub struct NmfFactors {
    /// n × k nonnegative column-mixing weights.
    pub w: Mat,
    /// n × k nonnegative assignments.
    pub g: Mat,
    /// ‖X − XWGᵀ‖²_F after initialization and after every iteration.
    pub objective: Vec<f64>,
}

impl NmfFactors {
    pub fn n(&self) -> usize {
        self.w.rows()
    }

    pub fn k(&self) -> usize {
        self.w.cols()
    }

    /// Map rows of new data (frames × n) through the fitted mixing
    /// weights: frames × k output.
    pub fn map_rows(&self, data: &Mat) -> Result<Mat> {
        if data.cols() != self.n() {
            return Err(Error::ShapeMismatch {
                what: "nmf feature mapping".into(),
                expected: format!("{} columns", self.n()),
                actual: format!("{} columns", data.cols()),
            });
        }
        Ok(data.matmul(&self.w))
    }
}

/// Multiplicative-update convex NMF from a seeded k-means-style cluster
/// indicator. The objective trace is non-increasing.
pub fn convex_nmf(x: &Mat, k: usize, iters: usize, seed: u64) -> Result<NmfFactors> {
    let n = x.cols();
    if k == 0 || k > n {
        return Err(Error::InvalidParam(format!("k={k} outside [1, {n}]")));
    }
    if iters == 0 {
        return Err(Error::InvalidParam("iters must be >= 1".into()));
    }
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::InvalidParam("zero data matrix".into()));
    }

    // Seeded k-means on columns for the cluster indicator.
    let assign = kmeans_columns(x, k, seed);
    let mut counts = vec![0usize; k];
    for &a in &assign {
        counts[a] += 1;
    }
    let mut g = Mat::zeros(n, k);
    let mut w = Mat::zeros(n, k);
    for i in 0..n {
        for j in 0..k {
            let ind = if assign[i] == j { 1.0 } else { 0.0 };
            g[(i, j)] = ind + 0.2;
            w[(i, j)] = (ind + 0.2) / (counts[j] as f64 + 0.2 * n as f64);
        }
    }

    // Y = XᵀX split into positive and negative parts.
    let y = x.matmul_tn(x);
    let mut y_pos = Mat::zeros(n, n);
    let mut y_neg = Mat::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let v = y[(r, c)];
            if v >= 0.0 {
                y_pos[(r, c)] = v;
            } else {
                y_neg[(r, c)] = -v;
            }
        }
    }

    let mut objective = Vec::with_capacity(iters + 1);
    objective.push(reconstruction_error(x, &w, &g));

    for _ in 0..iters {
        // G update with W fixed.
        {
            let yp_w = y_pos.matmul(&w); // n×k
            let yn_w = y_neg.matmul(&w);
            let wt_ypw = w.matmul_tn(&yp_w); // k×k
            let wt_ynw = w.matmul_tn(&yn_w);
            let g_wt_ynw = g.matmul(&wt_ynw); // n×k
            let g_wt_ypw = g.matmul(&wt_ypw);
            for i in 0..n {
                for j in 0..k {
                    let numer = yp_w[(i, j)] + g_wt_ynw[(i, j)];
                    let denom = yn_w[(i, j)] + g_wt_ypw[(i, j)];
                    g[(i, j)] *= (numer / (denom + UPDATE_EPS)).sqrt();
                }
            }
        }
        // W update with G fixed.
        {
            let yp_g = y_pos.matmul(&g); // n×k
            let yn_g = y_neg.matmul(&g);
            let gt_g = g.matmul_tn(&g); // k×k
            let w_gtg = w.matmul(&gt_g); // n×k
            let yn_w_gtg = y_neg.matmul(&w_gtg);
            let yp_w_gtg = y_pos.matmul(&w_gtg);
            for i in 0..n {
                for j in 0..k {
                    let numer = yp_g[(i, j)] + yn_w_gtg[(i, j)];
                    let denom = yn_g[(i, j)] + yp_w_gtg[(i, j)];
                    w[(i, j)] *= (numer / (denom + UPDATE_EPS)).sqrt();
                }
            }
        }
        objective.push(reconstruction_error(x, &w, &g));
    }

    if objective.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            what: "convex_nmf",
            detail: "non-finite objective".into(),
        });
    }
    Ok(NmfFactors { w, g, objective })
}

fn reconstruction_error(x: &Mat, w: &Mat, g: &Mat) -> f64 {
    let xw = x.matmul(w); // d×k
    let recon = xw.matmul_nt(g); // d×n via (XW)·Gᵀ
    let mut err = 0.0;
    for (a, b) in x.data().iter().zip(recon.data()) {
        let d = a - b;
        err += d * d;
    }
    err
}

/// A few rounds of seeded Lloyd iterations over the columns of X.
fn kmeans_columns(x: &Mat, k: usize, seed: u64) -> Vec<usize> {
    let n = x.cols();
    let d = x.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroid_idx: Vec<usize> = sample(&mut rng, n, k).into_vec();
    centroid_idx.sort_unstable();
    let mut centroids: Vec<Vec<f64>> = centroid_idx.iter().map(|&i| x.col(i)).collect();
    let mut assign = vec![0usize; n];

    for _round in 0..10 {
        // Assignment step, lowest index wins ties.
        for i in 0..n {
            let col = x.col(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in centroids.iter().enumerate() {
                let dist: f64 = col.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist < best_d {
                    best_d = dist;
                    best = j;
                }
            }
            assign[i] = best;
        }
        // Update step.
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assign[i]] += 1;
            for r in 0..d {
                sums[assign[i]][r] += x[(r, i)];
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // Reseed an empty cluster with the column farthest from
                // its centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = dist_to(&x.col(a), &centroids[assign[a]]);
                        let db = dist_to(&x.col(b), &centroids[assign[b]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centroids[j] = x.col(far);
                assign[far] = j;
            } else {
                for r in 0..d {
                    centroids[j][r] = sums[j][r] / counts[j] as f64;
                }
            }
        }
    }
    assign
}

fn dist_to(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
