//! Hybrid DNN/HMM back-end: frame splicing, LDA dimension reduction, a
//! tanh feed-forward network with softmax outputs trained by SGD on
//! frame-state targets, and prior-scaled likelihood scoring for decoding.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::feat::FeatureMatrix;
use crate::linalg::{cholesky, solve_lower, solve_lower_transpose, sym_eig, Mat};

/// Concatenate frames t−context..t+context per frame with edge
/// replication: dim × (2·context + 1) output columns, left context first.
pub fn splice_frames(f: &FeatureMatrix, context: usize) -> FeatureMatrix {
    let rows = f.rows();
    let dim = f.dim();
    let width = 2 * context + 1;
    let mut out = Mat::zeros(rows, dim * width);
    for t in 0..rows {
        for (w, offset) in (-(context as isize)..=context as isize).enumerate() {
            let src = (t as isize + offset).clamp(0, rows as isize - 1) as usize;
            out.row_mut(t)[w * dim..(w + 1) * dim].copy_from_slice(f.frame(src));
        }
    }
    FeatureMatrix::new(out, f.frame_shift_s(), f.stream_tag()).expect("splice preserves finiteness")
}

/// Multi-class LDA projection with a shrinkage-regularized within-class
/// scatter (the projected within-class scatter is whitened on the
/// training data).
#[derive(Debug, Clone)]
pub struct LdaTransform {
    pub mean: Vec<f64>,
    /// input dim × output dim.
    pub matrix: Mat,
    /// Discriminant eigenvalues of the retained directions.
    pub eigenvalues: Vec<f64>,
}

impl LdaTransform {
    pub fn in_dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn apply(&self, f: &FeatureMatrix) -> Result<FeatureMatrix> {
        if f.dim() != self.in_dim() {
            return Err(Error::ShapeMismatch {
                what: "lda input".into(),
                expected: format!("dim {}", self.in_dim()),
                actual: format!("dim {}", f.dim()),
            });
        }
        let mut out = Mat::zeros(f.rows(), self.out_dim());
        let mut centered = vec![0.0; self.in_dim()];
        for t in 0..f.rows() {
            for (c, (x, m)) in f.frame(t).iter().zip(&self.mean).enumerate() {
                centered[c] = x - m;
            }
            out.row_mut(t).copy_from_slice(&self.matrix.matvec_t(&centered));
        }
        FeatureMatrix::new(out, f.frame_shift_s(), f.stream_tag())
    }
}

/// Estimate LDA on frame-state classes. `labels[t]` must index a class in
/// 0..n_classes; `shrinkage` blends the within-class scatter toward the
/// scaled identity so the factorization never goes singular.
pub fn estimate_lda(
    spliced: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    out_dim: usize,
    shrinkage: f64,
) -> Result<LdaTransform> {
    let n = spliced.rows();
    let d = spliced.dim();
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            what: "lda labels".into(),
            expected: format!("{n} labels"),
            actual: format!("{}", labels.len()),
        });
    }
    if out_dim == 0 || out_dim > d {
        return Err(Error::InvalidParam(format!(
            "lda out_dim {out_dim} outside [1, {d}]"
        )));
    }
    if !(shrinkage > 0.0 && shrinkage <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "lda shrinkage {shrinkage} outside (0, 1]"
        )));
    }

    // Per-class sums and the total second moment in one pass.
    let mut class_sum = vec![vec![0.0f64; d]; n_classes];
    let mut class_count = vec![0.0f64; n_classes];
    let mut total_sq = Mat::zeros(d, d);
    let mut total_sum = vec![0.0f64; d];
    for t in 0..n {
        let c = labels[t];
        if c >= n_classes {
            return Err(Error::InvalidParam(format!(
                "label {c} outside 0..{n_classes}"
            )));
        }
        let x = spliced.frame(t);
        class_count[c] += 1.0;
        for a in 0..d {
            class_sum[c][a] += x[a];
            total_sum[a] += x[a];
            let row = total_sq.row_mut(a);
            let xa = x[a];
            for b in a..d {
                row[b] += xa * x[b];
            }
        }
    }
    let present: Vec<usize> = (0..n_classes).filter(|&c| class_count[c] > 0.0).collect();
    if present.len() < 2 {
        return Err(Error::InvalidParam(
            "lda needs at least 2 classes present".into(),
        ));
    }

    let global_mean: Vec<f64> = total_sum.iter().map(|s| s / n as f64).collect();
    // Sw = (Σxxᵀ − Σ_c N_c m_c m_cᵀ)/N, Sb = Σ_c N_c (m_c−m)(m_c−m)ᵀ / N.
    let mut sw = Mat::zeros(d, d);
    let mut sb = Mat::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            sw[(a, b)] = total_sq[(a, b)];
        }
    }
    for &c in &present {
        let nc = class_count[c];
        let mc: Vec<f64> = class_sum[c].iter().map(|s| s / nc).collect();
        for a in 0..d {
            for b in a..d {
                sw[(a, b)] -= nc * mc[a] * mc[b];
                sb[(a, b)] += nc * (mc[a] - global_mean[a]) * (mc[b] - global_mean[b]);
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for a in 0..d {
        for b in a..d {
            let w = sw[(a, b)] * inv_n;
            let bt = sb[(a, b)] * inv_n;
            sw[(a, b)] = w;
            sw[(b, a)] = w;
            sb[(a, b)] = bt;
            sb[(b, a)] = bt;
        }
    }
    let trace: f64 = (0..d).map(|i| sw[(i, i)]).sum();
    let ridge = shrinkage * (trace / d as f64).max(1e-12);
    for a in 0..d {
        for b in 0..d {
            sw[(a, b)] *= 1.0 - shrinkage;
        }
        sw[(a, a)] += ridge;
    }

    // Whiten Sb by Sw via Cholesky, then take the top eigenvectors.
    let l = cholesky(&sw)?;
    let tmp = solve_lower(&l, &sb); // L⁻¹ Sb
    let m = solve_lower(&l, &tmp.transpose()); // L⁻¹ Sb L⁻ᵀ
    let (eigvals, eigvecs) = sym_eig(&m)?;
    let mut u = Mat::zeros(d, out_dim);
    for j in 0..out_dim {
        for r in 0..d {
            u[(r, j)] = eigvecs[(r, j)];
        }
    }
    let mut v = solve_lower_transpose(&l, &u); // L⁻ᵀ U
    // Deterministic sign per column.
    for j in 0..out_dim {
        let mut best = 0;
        for r in 0..d {
            if v[(r, j)].abs() > v[(best, j)].abs() {
                best = r;
            }
        }
        if v[(best, j)] < 0.0 {
            for r in 0..d {
                v[(r, j)] = -v[(r, j)];
            }
        }
    }
    Ok(LdaTransform {
        mean: global_mean,
        matrix: v,
        eigenvalues: eigvals[..out_dim].to_vec(),
    })
}

/// Global mean/variance normalization fitted on training data.
#[derive(Debug, Clone)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl Normalizer {
    pub fn fit(f: &FeatureMatrix) -> Normalizer {
        let n = f.rows().max(1) as f64;
        let d = f.dim();
        let mut mean = vec![0.0; d];
        let mut sq = vec![0.0; d];
        for t in 0..f.rows() {
            for (i, &x) in f.frame(t).iter().enumerate() {
                mean[i] += x;
                sq[i] += x * x;
            }
        }
        for i in 0..d {
            mean[i] /= n;
            sq[i] = (sq[i] / n - mean[i] * mean[i]).max(1e-12);
        }
        Normalizer {
            mean,
            inv_std: sq.iter().map(|v| 1.0 / v.sqrt()).collect(),
        }
    }

    pub fn apply(&self, f: &FeatureMatrix) -> Result<FeatureMatrix> {
        if f.dim() != self.mean.len() {
            return Err(Error::ShapeMismatch {
                what: "normalizer input".into(),
                expected: format!("dim {}", self.mean.len()),
                actual: format!("dim {}", f.dim()),
            });
        }
        let mut out = Mat::zeros(f.rows(), f.dim());
        for t in 0..f.rows() {
            let row = out.row_mut(t);
            for (i, &x) in f.frame(t).iter().enumerate() {
                row[i] = (x - self.mean[i]) * self.inv_std[i];
            }
        }
        FeatureMatrix::new(out, f.frame_shift_s(), f.stream_tag())
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    /// Halve the rate when the relative epoch-loss improvement drops
    /// below this.
    pub halve_threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![1100, 1100],
            epochs: 20,
            minibatch: 128,
            learning_rate: 0.01,
            halve_threshold: 1e-3,
            seed: 0,
        }
    }
}

/// Feed-forward network with tanh hidden layers, softmax output and
/// smoothed state priors.
#[derive(Debug, Clone)]
pub struct DnnModel {
    pub layer_sizes: Vec<usize>,
    /// Per layer: out × in.
    pub weights: Vec<Mat>,
    pub biases: Vec<Vec<f64>>,
    /// Strictly positive, sums to 1.
    pub priors: Vec<f64>,
    /// Mean cross-entropy per training epoch.
    pub epoch_losses: Vec<f64>,
}

impl DnnModel {
    pub fn in_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Random fan-in-scaled initialization; priors start uniform.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<DnnModel> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidParam(format!(
                "bad layer sizes {layer_sizes:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_sizes.len() - 1 {
            let fan_in = layer_sizes[l];
            let scale = 1.0 / (fan_in as f64).sqrt();
            let mut w = Mat::zeros(layer_sizes[l + 1], fan_in);
            for v in w.data_mut() {
                *v = rng.random_range(-scale..scale);
            }
            weights.push(w);
            biases.push(vec![0.0; layer_sizes[l + 1]]);
        }
        let out = *layer_sizes.last().unwrap();
        Ok(DnnModel {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            priors: vec![1.0 / out as f64; out],
            epoch_losses: Vec::new(),
        })
    }

    /// Batch forward pass: hidden activations per layer plus the output
    /// log-softmax (batch × out).
    fn forward(&self, x: &Mat) -> (Vec<Mat>, Mat) {
        let mut acts = vec![x.clone()];
        for l in 0..self.weights.len() {
            let mut z = acts[l].matmul_nt(&self.weights[l]);
            for r in 0..z.rows() {
                let row = z.row_mut(r);
                for (v, b) in row.iter_mut().zip(&self.biases[l]) {
                    *v += b;
                }
            }
            if l + 1 < self.weights.len() {
                for v in z.data_mut() {
                    *v = v.tanh();
                }
            }
            acts.push(z);
        }
        let logits = acts.pop().unwrap();
        let mut log_softmax = logits;
        for r in 0..log_softmax.rows() {
            let row = log_softmax.row_mut(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        (acts, log_softmax)
    }

    pub fn log_posterior(&self, x: &[f64]) -> Vec<f64> {
        let batch = Mat::from_rows(&[x.to_vec()]);
        let (_, ls) = self.forward(&batch);
        ls.row(0).to_vec()
    }

    /// Log posterior minus log prior: the hybrid pseudo-log-likelihood.
    pub fn scaled_loglik(&self, x: &[f64]) -> Vec<f64> {
        let post = self.log_posterior(x);
        post.iter()
            .zip(&self.priors)
            .map(|(lp, pr)| lp - pr.ln())
            .collect()
    }

    /// Mean cross-entropy and gradients for a batch; the code path under
    /// SGD and the subject of the finite-difference check.
    pub fn loss_and_gradients(
        &self,
        x: &Mat,
        labels: &[usize],
    ) -> Result<(f64, Vec<Mat>, Vec<Vec<f64>>)> {
        assert_eq!(x.rows(), labels.len());
        let batch = x.rows() as f64;
        let (acts, log_softmax) = self.forward(x);
        let mut loss = 0.0;
        for (r, &lab) in labels.iter().enumerate() {
            loss -= log_softmax[(r, lab)];
        }
        loss /= batch;
        if !loss.is_finite() {
            return Err(Error::Numeric {
                what: "dnn training",
                detail: format!("non-finite loss {loss}"),
            });
        }

        // dLogits = (softmax − onehot)/batch.
        let mut delta = Mat::zeros(x.rows(), self.out_dim());
        for r in 0..x.rows() {
            for c in 0..self.out_dim() {
                delta[(r, c)] = log_softmax[(r, c)].exp() / batch;
            }
            delta[(r, labels[r])] -= 1.0 / batch;
        }

        let n_layers = self.weights.len();
        let mut grad_w = vec![Mat::zeros(0, 0); n_layers];
        let mut grad_b = vec![Vec::new(); n_layers];
        let mut cur = delta;
        for l in (0..n_layers).rev() {
            grad_w[l] = cur.matmul_tn(&acts[l]); // out × in
            grad_b[l] = (0..cur.cols())
                .map(|c| (0..cur.rows()).map(|r| cur[(r, c)]).sum())
                .collect();
            if l > 0 {
                // Backprop through tanh: dA = (cur · W) ∘ (1 − a²).
                let mut prev = cur.matmul(&self.weights[l]);
                for r in 0..prev.rows() {
                    for c in 0..prev.cols() {
                        let a = acts[l][(r, c)];
                        prev[(r, c)] *= 1.0 - a * a;
                    }
                }
                cur = prev;
            }
        }
        Ok((loss, grad_w, grad_b))
    }

    /// Fraction of frames whose argmax posterior matches the label.
    pub fn frame_accuracy(&self, x: &Mat, labels: &[usize]) -> f64 {
        let (_, ls) = self.forward(x);
        let mut hits = 0usize;
        for (r, &lab) in labels.iter().enumerate() {
            let arg = ls
                .row(r)
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            if arg == lab {
                hits += 1;
            }
        }
        hits as f64 / labels.len().max(1) as f64
    }
}

/// Cross-entropy SGD on frame-state targets. Labels index the output
/// layer; priors become add-one-smoothed label frequencies.
pub fn train_dnn(
    inputs: &FeatureMatrix,
    labels: &[usize],
    n_out: usize,
    cfg: &TrainConfig,
) -> Result<DnnModel> {
    if labels.len() != inputs.rows() {
        return Err(Error::ShapeMismatch {
            what: "dnn labels".into(),
            expected: format!("{} labels", inputs.rows()),
            actual: format!("{}", labels.len()),
        });
    }
    if inputs.rows() == 0 {
        return Err(Error::InvalidParam("no training frames".into()));
    }
    if cfg.epochs == 0 || cfg.minibatch == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidParam("bad dnn training config".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_out) {
        return Err(Error::InvalidParam(format!(
            "label {bad} outside 0..{n_out}"
        )));
    }

    let mut layer_sizes = vec![inputs.dim()];
    layer_sizes.extend_from_slice(&cfg.hidden);
    layer_sizes.push(n_out);
    let mut model = DnnModel::init(&layer_sizes, cfg.seed)?;

    // Add-one smoothed priors.
    let mut counts = vec![1.0f64; n_out];
    for &l in labels {
        counts[l] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    model.priors = counts.iter().map(|c| c / total).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..inputs.rows()).collect();
    let mut lr = cfg.learning_rate;
    let mut prev_loss = f64::INFINITY;

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0.0;
        for chunk in order.chunks(cfg.minibatch) {
            let x = Mat::from_rows(
                &chunk
                    .iter()
                    .map(|&i| inputs.frame(i).to_vec())
                    .collect::<Vec<_>>(),
            );
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grad_w, grad_b) = model.loss_and_gradients(&x, &y)?;
            epoch_loss += loss;
            n_batches += 1.0;
            for l in 0..model.weights.len() {
                let w = model.weights[l].data_mut();
                for (v, g) in w.iter_mut().zip(grad_w[l].data()) {
                    *v -= lr * g;
                }
                for (b, g) in model.biases[l].iter_mut().zip(&grad_b[l]) {
                    *b -= lr * g;
                }
            }
        }
        epoch_loss /= n_batches;
        if !epoch_loss.is_finite() {
            return Err(Error::Numeric {
                what: "dnn training",
                detail: format!(
                    "non-finite epoch loss at epoch {} (lr {lr})",
                    model.epoch_losses.len()
                ),
            });
        }
        model.epoch_losses.push(epoch_loss);
        if prev_loss.is_finite() {
            let improvement = (prev_loss - epoch_loss) / prev_loss.abs().max(1e-12);
            if improvement < cfg.halve_threshold {
                lr *= 0.5;
            }
        }
        prev_loss = epoch_loss;
    }
    Ok(model)
}

/// Splice → LDA → normalize → DNN chain packaged as a decoder scorer.
#[derive(Debug, Clone)]
pub struct HybridModel {
    pub splice_context: usize,
    pub lda: LdaTransform,
    pub norm: Normalizer,
    pub dnn: DnnModel,
}

impl HybridModel {
    /// Prior-scaled log-likelihoods per frame: frames × n_states.
    pub fn score_matrix(&self, feats: &FeatureMatrix) -> Result<Mat> {
        let spliced = splice_frames(feats, self.splice_context);
        let reduced = self.lda.apply(&spliced)?;
        let normed = self.norm.apply(&reduced)?;
        let mut out = Mat::zeros(normed.rows(), self.dnn.out_dim());
        for t in 0..normed.rows() {
            out.row_mut(t)
                .copy_from_slice(&self.dnn.scaled_loglik(normed.frame(t)));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feat::StreamTag;

    fn fm(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::new(Mat::from_rows(rows), 0.01, StreamTag::Acoustic).unwrap()
    }

    #[test]
    fn splice_constant_stream_tiles() {
        let f = fm(&vec![vec![1.0, 2.0]; 5]);
        let s = splice_frames(&f, 8);
        assert_eq!(s.dim(), 2 * 17);
        for t in 0..5 {
            for w in 0..17 {
                assert_eq!(s.frame(t)[2 * w], 1.0);
                assert_eq!(s.frame(t)[2 * w + 1], 2.0);
            }
        }
    }

    #[test]
    fn splice_edge_replication_and_interior_order() {
        let rows: Vec<Vec<f64>> = (0..9).map(|t| vec![t as f64]).collect();
        let f = fm(&rows);
        let s = splice_frames(&f, 2);
        assert_eq!(s.dim(), 5);
        // Frame 0: left context replicates frame 0.
        assert_eq!(s.frame(0), &[0.0, 0.0, 0.0, 1.0, 2.0]);
        // Interior frame 4: consecutive values.
        assert_eq!(s.frame(4), &[2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn thirty_nine_dim_context8_gives_663() {
        let f = fm(&vec![vec![0.0; 39]; 3]);
        assert_eq!(splice_frames(&f, 8).dim(), 663);
    }

    #[test]
    fn lda_two_class_direction() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..400 {
            let class = i % 2;
            let center = if class == 0 { -4.0 } else { 4.0 };
            rows.push(vec![
                center + rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]);
            labels.push(class);
        }
        let lda = estimate_lda(&fm(&rows), &labels, 2, 1, 0.1).unwrap();
        let dir = lda.matrix.col(0);
        let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cosine = dir[0].abs() / norm;
        assert!(cosine > 0.999, "cosine {cosine}");
    }

    #[test]
    fn lda_shuffled_labels_collapse_spectrum() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..600 {
            let class = i % 3;
            let center = class as f64 * 5.0;
            rows.push(vec![
                center + rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]);
            labels.push(class);
        }
        let f = fm(&rows);
        let true_lda = estimate_lda(&f, &labels, 3, 1, 0.1).unwrap();
        let mut shuffled = labels.clone();
        shuffled.shuffle(&mut rng);
        let null_lda = estimate_lda(&f, &shuffled, 3, 1, 0.1).unwrap();
        assert!(
            null_lda.eigenvalues[0] < 0.05 * true_lda.eigenvalues[0],
            "true {} vs shuffled {}",
            true_lda.eigenvalues[0],
            null_lda.eigenvalues[0]
        );
    }

    #[test]
    fn lda_apply_deterministic() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|t| vec![t as f64, (t as f64).sin(), 1.0 - t as f64])
            .collect();
        let labels: Vec<usize> = (0..40).map(|t| t % 2).collect();
        let f = fm(&rows);
        let lda = estimate_lda(&f, &labels, 2, 2, 0.1).unwrap();
        let a = lda.apply(&f).unwrap();
        let b = lda.apply(&f).unwrap();
        assert_eq!(a.values().data(), b.values().data());
    }

    #[test]
    fn gradients_match_finite_differences_tiny_net() {
        let mut model = DnnModel::init(&[4, 3, 2], 11).unwrap();
        let x = Mat::from_rows(&[
            vec![0.2, -0.4, 0.1, 0.9],
            vec![-0.7, 0.3, 0.5, -0.2],
            vec![0.0, 0.1, -0.3, 0.4],
        ]);
        let labels = vec![0, 1, 0];
        let (_, grad_w, grad_b) = model.loss_and_gradients(&x, &labels).unwrap();
        let eps = 1e-6;
        let mut max_rel = 0.0f64;
        for l in 0..model.weights.len() {
            for idx in 0..model.weights[l].data().len() {
                let orig = model.weights[l].data()[idx];
                model.weights[l].data_mut()[idx] = orig + eps;
                let (lp, _, _) = model.loss_and_gradients(&x, &labels).unwrap();
                model.weights[l].data_mut()[idx] = orig - eps;
                let (lm, _, _) = model.loss_and_gradients(&x, &labels).unwrap();
                model.weights[l].data_mut()[idx] = orig;
                let fd = (lp - lm) / (2.0 * eps);
                let an = grad_w[l].data()[idx];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                max_rel = max_rel.max(rel);
            }
            for idx in 0..model.biases[l].len() {
                let orig = model.biases[l][idx];
                model.biases[l][idx] = orig + eps;
                let (lp, _, _) = model.loss_and_gradients(&x, &labels).unwrap();
                model.biases[l][idx] = orig - eps;
                let (lm, _, _) = model.loss_and_gradients(&x, &labels).unwrap();
                model.biases[l][idx] = orig;
                let fd = (lp - lm) / (2.0 * eps);
                let rel = (fd - grad_b[l][idx]).abs() / fd.abs().max(1e-8);
                max_rel = max_rel.max(rel);
            }
        }
        assert!(max_rel < 1e-4, "max relative gradient error {max_rel}");
    }

    #[test]
    fn overfits_separable_frames() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let c = if i < 5 { -1.0 } else { 1.0 };
                vec![c, c * 0.5]
            })
            .collect();
        let labels: Vec<usize> = (0..10).map(|i| usize::from(i >= 5)).collect();
        let cfg = TrainConfig {
            hidden: vec![8],
            epochs: 200,
            minibatch: 4,
            learning_rate: 0.1,
            halve_threshold: 0.0,
            seed: 3,
        };
        let f = fm(&rows);
        let model = train_dnn(&f, &labels, 2, &cfg).unwrap();
        assert_eq!(model.frame_accuracy(f.values(), &labels), 1.0);
    }

    #[test]
    fn epoch_loss_mostly_non_increasing_with_conservative_rate() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|i| {
                let c = (i % 3) as f64;
                vec![
                    2.0 * c + rng.random_range(-0.5..0.5),
                    -c + rng.random_range(-0.5..0.5),
                ]
            })
            .collect();
        let labels: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let cfg = TrainConfig {
            hidden: vec![16],
            epochs: 20,
            minibatch: 32,
            learning_rate: 0.01,
            halve_threshold: 1e-3,
            seed: 5,
        };
        let model = train_dnn(&fm(&rows), &labels, 3, &cfg).unwrap();
        assert_eq!(model.epoch_losses.len(), 20);
        let non_increasing = model
            .epoch_losses
            .windows(2)
            .filter(|w| w[1] <= w[0])
            .count();
        assert!(
            non_increasing >= 17,
            "only {non_increasing}/19 epoch steps non-increasing: {:?}",
            model.epoch_losses
        );
    }

    #[test]
    fn softmax_normalized_and_prior_scaling_invariances() {
        let model = DnnModel::init(&[5, 4, 3], 7).unwrap();
        let x = vec![0.3, -0.2, 0.9, 0.0, -0.5];
        let post = model.log_posterior(&x);
        let total: f64 = post.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-6);

        // Uniform priors: scaled loglik = posterior + constant.
        let mut uniform = model.clone();
        uniform.priors = vec![1.0 / 3.0; 3];
        let sl = uniform.scaled_loglik(&x);
        for (a, b) in sl.iter().zip(&post) {
            assert!((a - b - 3.0f64.ln()).abs() < 1e-12);
        }

        // Rescaling priors before normalization changes nothing.
        let mut m2 = model.clone();
        m2.priors = model.priors.iter().map(|p| 2.0 * p).collect();
        let total: f64 = m2.priors.iter().sum();
        for p in m2.priors.iter_mut() {
            *p /= total;
        }
        let a = model.scaled_loglik(&x);
        let b = m2.scaled_loglik(&x);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_computed_two_state_scaled_loglik() {
        // Single linear layer 1→2 with known weights; softmax and priors
        // worked through by hand.
        let mut model = DnnModel::init(&[1, 2], 0).unwrap();
        model.weights[0] = Mat::from_rows(&[vec![1.0], vec![-1.0]]);
        model.biases[0] = vec![0.5, 0.0];
        model.priors = vec![0.25, 0.75];
        let x = [2.0];
        // logits: [2.5, -2.0]; lse = ln(e^2.5 + e^-2).
        let lse = (2.5f64.exp() + (-2.0f64).exp()).ln();
        let expect = [2.5 - lse - 0.25f64.ln(), -2.0 - lse - 0.75f64.ln()];
        let got = model.scaled_loglik(&x);
        assert!((got[0] - expect[0]).abs() < 1e-12);
        assert!((got[1] - expect[1]).abs() < 1e-12);
    }

    #[test]
    fn pipeline_dimensionality_chain() {
        // 39 → 663 → 8 → 5 with a tiny network, checked at each boundary.
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..39).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..60).map(|t| t % 5).collect();
        let f = fm(&rows);
        let spliced = splice_frames(&f, 8);
        assert_eq!(spliced.dim(), 663);
        let lda = estimate_lda(&spliced, &labels, 5, 8, 0.1).unwrap();
        let reduced = lda.apply(&spliced).unwrap();
        assert_eq!(reduced.dim(), 8);
        let norm = Normalizer::fit(&reduced);
        let normed = norm.apply(&reduced).unwrap();
        let cfg = TrainConfig {
            hidden: vec![16],
            epochs: 2,
            minibatch: 16,
            learning_rate: 0.05,
            halve_threshold: 1e-3,
            seed: 1,
        };
        let dnn = train_dnn(&normed, &labels, 5, &cfg).unwrap();
        assert_eq!(dnn.out_dim(), 5);
        let hybrid = HybridModel {
            splice_context: 8,
            lda,
            norm,
            dnn,
        };
        let scores = hybrid.score_matrix(&f).unwrap();
        assert_eq!(scores.rows(), 60);
        assert_eq!(scores.cols(), 5);
    }
}
