//! Baum-Welch reestimation over lattice-expanded state graphs with scaled
//! forward-backward arithmetic (no log-domain underflow in the
//! accumulators by construction).

use rayon::prelude::*;

use super::graph::ExpandedGraph;
use super::{GmmComponent, GmmHmmSet, GmmState, PhoneHmm};
use crate::error::{Error, Result};
use crate::feat::FeatureMatrix;
use crate::lattice::Lattice;
use crate::linalg::log_sum_exp;

const MIN_OCCUPANCY: f64 = 1e-8;

/// Per-utterance sufficient statistics, merged by addition.
struct BwAcc {
    // slot = phone · states_per_phone + state; comp-major within slot.
    comp_occ: Vec<f64>,
    comp_sum: Vec<f64>,
    comp_sq: Vec<f64>,
    self_counts: Vec<f64>,
    fwd_counts: Vec<f64>,
    loglik: f64,
}

impl BwAcc {
    fn new(n_slots: usize, n_comps: usize, dim: usize) -> Self {
        BwAcc {
            comp_occ: vec![0.0; n_slots * n_comps],
            comp_sum: vec![0.0; n_slots * n_comps * dim],
            comp_sq: vec![0.0; n_slots * n_comps * dim],
            self_counts: vec![0.0; n_slots],
            fwd_counts: vec![0.0; n_slots],
            loglik: 0.0,
        }
    }

    fn merge(&mut self, other: &BwAcc) {
        for (a, b) in self.comp_occ.iter_mut().zip(&other.comp_occ) {
            *a += b;
        }
        for (a, b) in self.comp_sum.iter_mut().zip(&other.comp_sum) {
            *a += b;
        }
        for (a, b) in self.comp_sq.iter_mut().zip(&other.comp_sq) {
            *a += b;
        }
        for (a, b) in self.self_counts.iter_mut().zip(&other.self_counts) {
            *a += b;
        }
        for (a, b) in self.fwd_counts.iter_mut().zip(&other.fwd_counts) {
            *a += b;
        }
        self.loglik += other.loglik;
    }
}

/// Reestimate `models` on lattice-constrained utterances for `iters`
/// iterations. Returns the updated set and the total log-likelihood
/// observed at the start of each iteration (non-decreasing under EM).
pub fn baum_welch(
    models: &GmmHmmSet,
    data: &[(&FeatureMatrix, &Lattice)],
    iters: usize,
) -> Result<(GmmHmmSet, Vec<f64>)> {
    if iters == 0 {
        return Err(Error::InvalidParam("iters must be >= 1".into()));
    }
    if data.is_empty() {
        return Err(Error::InvalidParam("no training utterances".into()));
    }
    let spp = models.states_per_phone();
    let graphs: Vec<ExpandedGraph> = data
        .iter()
        .map(|(_, lat)| ExpandedGraph::from_lattice(lat, spp))
        .collect::<Result<Vec<_>>>()?;
    for ((f, _), g) in data.iter().zip(&graphs) {
        if f.rows() < g.min_frames {
            return Err(Error::NoFeasiblePath(format!(
                "{} frames cannot traverse a lattice needing at least {}",
                f.rows(),
                g.min_frames
            )));
        }
    }

    let mut current = models.clone();
    let mut loglik_trace = Vec::with_capacity(iters);
    let max_comps = super::MAX_MIXTURE_COMPONENTS;
    let n_slots = current.n_states();
    let dim = current.dim();

    for _iter in 0..iters {
        let per_utt: Vec<Result<BwAcc>> = data
            .par_iter()
            .zip(graphs.par_iter())
            .map(|((f, _), g)| accumulate_utterance(&current, g, f, n_slots, max_comps, dim))
            .collect();
        let mut total = BwAcc::new(n_slots, max_comps, dim);
        for acc in per_utt {
            total.merge(&acc?);
        }
        loglik_trace.push(total.loglik);
        current = reestimate(&current, &total, max_comps)?;
        current.check_invariants()?;
    }
    Ok((current, loglik_trace))
}

/// Total lattice-constrained log-likelihood of the data under the models,
/// without updating anything.
pub fn total_log_likelihood(
    models: &GmmHmmSet,
    data: &[(&FeatureMatrix, &Lattice)],
) -> Result<f64> {
    let spp = models.states_per_phone();
    let mut total = 0.0;
    for (f, lat) in data {
        let g = ExpandedGraph::from_lattice(lat, spp)?;
        let acc = accumulate_utterance(
            models,
            &g,
            f,
            models.n_states(),
            super::MAX_MIXTURE_COMPONENTS,
            models.dim(),
        )?;
        total += acc.loglik;
    }
    Ok(total)
}

fn accumulate_utterance(
    models: &GmmHmmSet,
    g: &ExpandedGraph,
    feats: &FeatureMatrix,
    n_slots: usize,
    max_comps: usize,
    dim: usize,
) -> Result<BwAcc> {
    let n = g.n_states();
    let t_len = feats.rows();
    let probs = g.runtime_probs(models, false);

    // Emission log-likelihoods for the distinct (phone, state) columns.
    let mut used_cols: Vec<usize> = (0..n).map(|j| g.score_column(models, j)).collect();
    let mut sorted = used_cols.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let col_pos: std::collections::HashMap<usize, usize> =
        sorted.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    for c in used_cols.iter_mut() {
        *c = col_pos[c];
    }
    let scores = models.score_columns(feats, &sorted)?;

    // Scaled emissions: ê_t(j) = exp(loglik − c_t) with c_t the frame max.
    let mut shifts = Vec::with_capacity(t_len);
    let mut emis = vec![0.0f64; t_len * n];
    for t in 0..t_len {
        let row = scores.row(t);
        let c_t = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !c_t.is_finite() {
            return Err(Error::Numeric {
                what: "baum_welch",
                detail: format!("non-finite emission at frame {t}"),
            });
        }
        shifts.push(c_t);
        for j in 0..n {
            emis[t * n + j] = (row[used_cols[j]] - c_t).exp();
        }
    }

    // Scaled forward pass.
    let mut alpha = vec![0.0f64; t_len * n];
    let mut scales = vec![0.0f64; t_len];
    for &(j, p) in &probs.entry_p {
        alpha[j] = p * emis[j];
    }
    let s0: f64 = alpha[..n].iter().sum();
    if s0 <= 0.0 {
        return Err(Error::NoFeasiblePath("no alive state at frame 0".into()));
    }
    for v in alpha[..n].iter_mut() {
        *v /= s0;
    }
    scales[0] = s0;
    for t in 1..t_len {
        let (prev, cur) = alpha.split_at_mut(t * n);
        let prev = &prev[(t - 1) * n..];
        let cur = &mut cur[..n];
        for j in 0..n {
            let mut acc = prev[j] * probs.self_p[j];
            if j % g.states_per_phone != 0 {
                acc += prev[j - 1] * probs.fwd_p[j - 1];
            }
            cur[j] = acc;
        }
        for &(from, to, p) in &probs.link_p {
            cur[to] += prev[from] * p;
        }
        for j in 0..n {
            cur[j] *= emis[t * n + j];
        }
        let s: f64 = cur.iter().sum();
        if s <= 0.0 || !s.is_finite() {
            return Err(Error::Numeric {
                what: "baum_welch",
                detail: format!("forward scale {s} at frame {t}"),
            });
        }
        for v in cur.iter_mut() {
            *v /= s;
        }
        scales[t] = s;
    }

    // Final weights.
    let mut final_w = vec![0.0f64; n];
    for &(j, p) in &probs.final_p {
        final_w[j] = p;
    }
    let tail: f64 = (0..n).map(|j| alpha[(t_len - 1) * n + j] * final_w[j]).sum();
    if tail <= 0.0 {
        return Err(Error::NoFeasiblePath(
            "no final state reachable at the last frame".into(),
        ));
    }
    let loglik: f64 =
        scales.iter().map(|s| s.ln()).sum::<f64>() + shifts.iter().sum::<f64>() + tail.ln();

    // Scaled backward pass: β̂_{T−1} = final weights, each step divided by
    // the forward scale of the later frame.
    let mut beta = vec![0.0f64; t_len * n];
    beta[(t_len - 1) * n..].copy_from_slice(&final_w);
    for t in (0..t_len - 1).rev() {
        let (head, tail_slice) = beta.split_at_mut((t + 1) * n);
        let next = &tail_slice[..n];
        let cur = &mut head[t * n..];
        for j in 0..n {
            let mut acc = probs.self_p[j] * emis[(t + 1) * n + j] * next[j];
            if (j + 1) % g.states_per_phone != 0 {
                acc += probs.fwd_p[j] * emis[(t + 1) * n + j + 1] * next[j + 1];
            }
            cur[j] = acc;
        }
        for &(from, to, p) in &probs.link_p {
            cur[from] += p * emis[(t + 1) * n + to] * next[to];
        }
        let s = scales[t + 1];
        for v in cur[..n].iter_mut() {
            *v /= s;
        }
    }

    let mut acc = BwAcc::new(n_slots, max_comps, dim);
    acc.loglik = loglik;

    // State occupancies (γ) and component statistics.
    let mut gamma = vec![0.0f64; n];
    for t in 0..t_len {
        let arow = &alpha[t * n..(t + 1) * n];
        let brow = &beta[t * n..(t + 1) * n];
        let mut norm = 0.0;
        for j in 0..n {
            gamma[j] = arow[j] * brow[j];
            norm += gamma[j];
        }
        if norm <= 0.0 {
            return Err(Error::Numeric {
                what: "baum_welch",
                detail: format!("zero posterior mass at frame {t}"),
            });
        }
        // Collapse to (phone, state) columns shared across arcs.
        let mut col_gamma = vec![0.0f64; sorted.len()];
        for j in 0..n {
            col_gamma[used_cols[j]] += gamma[j] / norm;
        }
        let x = feats.frame(t);
        for (ci, &col) in sorted.iter().enumerate() {
            let occ = col_gamma[ci];
            if occ <= 0.0 {
                continue;
            }
            let phone = crate::corpus::PhoneId(col / models.states_per_phone());
            let state = col % models.states_per_phone();
            let comp_ll = models.component_log_likes(phone, state, x);
            let total_ll = log_sum_exp(&comp_ll);
            for (m, ll) in comp_ll.iter().enumerate() {
                let resp = occ * (ll - total_ll).exp();
                let base = (col * max_comps + m) * dim;
                acc.comp_occ[col * max_comps + m] += resp;
                for d in 0..dim {
                    acc.comp_sum[base + d] += resp * x[d];
                    acc.comp_sq[base + d] += resp * x[d] * x[d];
                }
            }
        }

        // Transition statistics (ξ), normalized per frame.
        if t + 1 < t_len {
            let nrow = &beta[(t + 1) * n..(t + 2) * n];
            let mut numers: Vec<(usize, bool, f64)> = Vec::new();
            let mut z = 0.0;
            for j in 0..n {
                let stay = arow[j] * probs.self_p[j] * emis[(t + 1) * n + j] * nrow[j];
                if stay > 0.0 {
                    numers.push((j, true, stay));
                    z += stay;
                }
                if (j + 1) % g.states_per_phone != 0 {
                    let step = arow[j] * probs.fwd_p[j] * emis[(t + 1) * n + j + 1] * nrow[j + 1];
                    if step > 0.0 {
                        numers.push((j, false, step));
                        z += step;
                    }
                }
            }
            for &(from, to, p) in &probs.link_p {
                let cross = arow[from] * p * emis[(t + 1) * n + to] * nrow[to];
                if cross > 0.0 {
                    numers.push((from, false, cross));
                    z += cross;
                }
            }
            if z > 0.0 {
                for (j, is_self, v) in numers {
                    let slot = g.score_column(models, j);
                    if is_self {
                        acc.self_counts[slot] += v / z;
                    } else {
                        acc.fwd_counts[slot] += v / z;
                    }
                }
            }
        }
    }

    // The exit taken after the last frame.
    {
        let t = t_len - 1;
        let arow = &alpha[t * n..(t + 1) * n];
        let mut z = 0.0;
        let mut numers: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            let v = arow[j] * final_w[j];
            if v > 0.0 {
                numers.push((j, v));
                z += v;
            }
        }
        for (j, v) in numers {
            acc.fwd_counts[g.score_column(models, j)] += v / z;
        }
    }

    Ok(acc)
}

fn reestimate(models: &GmmHmmSet, acc: &BwAcc, max_comps: usize) -> Result<GmmHmmSet> {
    let spp = models.states_per_phone();
    let dim = models.dim();
    let floor = models.var_floor().to_vec();
    let mut out = models.clone();

    for (p, hmm) in out.models_mut().iter_mut().enumerate() {
        let old: &PhoneHmm = &models.models()[p];
        for s in 0..spp {
            let slot = p * spp + s;
            let n_comps = old.states[s].components.len();
            let state_occ: f64 = (0..n_comps)
                .map(|m| acc.comp_occ[slot * max_comps + m])
                .sum();
            if state_occ < MIN_OCCUPANCY {
                // No evidence for this state in this batch; keep it.
                continue;
            }
            let mut comps = Vec::with_capacity(n_comps);
            for m in 0..n_comps {
                let occ = acc.comp_occ[slot * max_comps + m];
                let old_comp = &old.states[s].components[m];
                if occ < MIN_OCCUPANCY {
                    comps.push(GmmComponent {
                        weight: MIN_OCCUPANCY,
                        mean: old_comp.mean.clone(),
                        var: old_comp.var.clone(),
                    });
                    continue;
                }
                let base = (slot * max_comps + m) * dim;
                let mean: Vec<f64> = (0..dim).map(|d| acc.comp_sum[base + d] / occ).collect();
                let var: Vec<f64> = (0..dim)
                    .map(|d| (acc.comp_sq[base + d] / occ - mean[d] * mean[d]).max(floor[d]))
                    .collect();
                comps.push(GmmComponent {
                    weight: occ,
                    mean,
                    var,
                });
            }
            let wsum: f64 = comps.iter().map(|c| c.weight).sum();
            for c in comps.iter_mut() {
                c.weight /= wsum;
            }
            hmm.states[s] = GmmState { components: comps };

            let self_c = acc.self_counts[slot];
            let fwd_c = acc.fwd_counts[slot];
            if self_c + fwd_c > 0.0 {
                let p_self = (self_c / (self_c + fwd_c))
                    .clamp(super::TRANS_CLAMP, 1.0 - super::TRANS_CLAMP);
                hmm.log_self[s] = p_self.ln();
                hmm.log_fwd[s] = (1.0 - p_self).ln();
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PhoneInventory, PhoneSequence};
    use crate::feat::StreamTag;
    use crate::hmm::flat_start_init;
    use crate::lattice::linear_lattice;
    use crate::linalg::Mat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn feats(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::new(Mat::from_rows(rows), 0.01, StreamTag::Acoustic).unwrap()
    }

    #[test]
    fn collapsed_topology_recovers_sample_stats() {
        // One phone, one state, one Gaussian: a single BW iteration must
        // set mean/variance to the sample statistics (occupancy is 1
        // everywhere since there is only one path).
        let inv = PhoneInventory::from_labels(&["a", "sil"]).unwrap();
        let rows: Vec<Vec<f64>> = vec![vec![1.0], vec![2.0], vec![4.0], vec![9.0]];
        let f = feats(&rows);
        let init = flat_start_init(&[&f], &inv, 1).unwrap();
        let seq = PhoneSequence::from_labels(&inv, &["a"]).unwrap();
        let lat = linear_lattice(&seq).unwrap();
        let (updated, _) = baum_welch(&init, &[(&f, &lat)], 1).unwrap();
        let comp = &updated.model(inv.id("a").unwrap()).states[0].components[0];
        let mean = (1.0 + 2.0 + 4.0 + 9.0) / 4.0;
        let var = (1.0 + 4.0 + 16.0 + 81.0) / 4.0 - mean * mean;
        assert!((comp.mean[0] - mean).abs() < 1e-12);
        assert!((comp.var[0] - var).abs() < 1e-10);
    }

    #[test]
    fn loglik_non_decreasing_over_iterations() {
        let inv = PhoneInventory::from_labels(&["a", "b", "sil"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut data_owned = Vec::new();
        for _ in 0..6 {
            let n = rng.random_range(12..24);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|t| {
                    let c = if t < n / 2 { 0.0 } else { 3.0 };
                    vec![c + rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]
                })
                .collect();
            data_owned.push(feats(&rows));
        }
        let refs: Vec<&FeatureMatrix> = data_owned.iter().collect();
        let init = flat_start_init(&refs, &inv, 2).unwrap();
        let seq = PhoneSequence::from_labels(&inv, &["a", "b"]).unwrap();
        let lat = linear_lattice(&seq).unwrap();
        let pairs: Vec<(&FeatureMatrix, &Lattice)> =
            data_owned.iter().map(|f| (f, &lat)).collect();
        let (_, trace) = baum_welch(&init, &pairs, 10).unwrap();
        assert_eq!(trace.len(), 10);
        for w in trace.windows(2) {
            let slack = 1e-8 * w[0].abs().max(1.0);
            assert!(w[1] >= w[0] - slack, "loglik fell: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn flat_start_symmetry_breaks_on_structured_data() {
        let inv = PhoneInventory::from_labels(&["a", "b", "sil"]).unwrap();
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|t| vec![if t < 10 { -2.0 } else { 2.0 }])
            .collect();
        let f = feats(&rows);
        let init = flat_start_init(&[&f], &inv, 1).unwrap();
        let seq = PhoneSequence::from_labels(&inv, &["a", "b"]).unwrap();
        let lat = linear_lattice(&seq).unwrap();
        let (updated, _) = baum_welch(&init, &[(&f, &lat)], 2).unwrap();
        let ma = updated.model(inv.id("a").unwrap()).states[0].components[0].mean[0];
        let mb = updated.model(inv.id("b").unwrap()).states[0].components[0].mean[0];
        assert!((ma - mb).abs() > 1.0, "states failed to diverge: {ma} vs {mb}");
    }

    #[test]
    fn constant_data_keeps_states_identical() {
        let inv = PhoneInventory::from_labels(&["a", "b", "sil"]).unwrap();
        let f = feats(&vec![vec![1.5]; 16]);
        let init = flat_start_init(&[&f], &inv, 1).unwrap();
        let seq = PhoneSequence::from_labels(&inv, &["a", "b"]).unwrap();
        let lat = linear_lattice(&seq).unwrap();
        let (updated, _) = baum_welch(&init, &[(&f, &lat)], 3).unwrap();
        let ma = &updated.model(inv.id("a").unwrap()).states[0].components[0];
        let mb = &updated.model(inv.id("b").unwrap()).states[0].components[0];
        assert!((ma.mean[0] - mb.mean[0]).abs() < 1e-9);
        assert!((ma.var[0] - mb.var[0]).abs() < 1e-12);
    }

    #[test]
    fn occupancies_match_hand_computed_paths() {
        // Optional-silence lattice around one single-state phone, two
        // frames: exactly three paths ("a a", "sil a", "a sil"). The
        // posterior path masses, and hence the one-iteration update
        // equations, are hand-computable.
        let inv = PhoneInventory::from_labels(&["a", "sil"]).unwrap();
        let a = inv.id("a").unwrap();
        let sil = inv.silence();
        let f = feats(&[vec![0.0], vec![1.0]]);
        let mut models = flat_start_init(&[&f], &inv, 1).unwrap();
        {
            let ms = models.models_mut();
            ms[a.0].states[0].components[0].mean = vec![1.0];
            ms[a.0].states[0].components[0].var = vec![1.0];
            ms[a.0].log_self = vec![0.4f64.ln()];
            ms[a.0].log_fwd = vec![0.6f64.ln()];
            ms[sil.0].states[0].components[0].mean = vec![0.0];
            ms[sil.0].states[0].components[0].var = vec![1.0];
            ms[sil.0].log_self = vec![0.3f64.ln()];
            ms[sil.0].log_fwd = vec![0.7f64.ln()];
        }
        let seq = PhoneSequence::from_labels(&inv, &["a"]).unwrap();
        let lat = linear_lattice(&seq).unwrap();
        let aug = crate::lattice::insert_optional_silences(&lat, 0.9, sil, true).unwrap();

        // Hand-computed path probabilities.
        let norm = |x: f64, m: f64| (-0.5 * (x - m) * (x - m)).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let (ea0, ea1) = (norm(0.0, 1.0), norm(1.0, 1.0));
        let (es0, es1) = (norm(0.0, 0.0), norm(1.0, 0.0));
        let p_aa = 0.9 * ea0 * 0.4 * ea1 * 0.6 * 0.9;
        let p_sa = 0.1 * es0 * 0.7 * ea1 * 0.6 * 0.9;
        let p_as = 0.9 * ea0 * 0.6 * 0.1 * es1 * 0.7;
        let total = p_aa + p_sa + p_as;

        let (updated, trace) = baum_welch(&models, &[(&f, &aug)], 1).unwrap();
        assert!((trace[0] - total.ln()).abs() < 1e-12, "log-likelihood");

        // Occupancies: γ_a(0) = (p_aa + p_as)/L, γ_a(1) = (p_aa + p_sa)/L;
        // one-iteration mean update of 'a' is the occupancy-weighted mean
        // of the observations.
        let ga0 = (p_aa + p_as) / total;
        let ga1 = (p_aa + p_sa) / total;
        let expect_mean_a = ga1 / (ga0 + ga1); // obs are 0 and 1
        let expect_var_a = ga1 / (ga0 + ga1) - expect_mean_a * expect_mean_a;
        let comp_a = &updated.model(a).states[0].components[0];
        assert!((comp_a.mean[0] - expect_mean_a).abs() < 1e-12);
        assert!((comp_a.var[0] - expect_var_a).abs() < 1e-12);

        // Silence occupies frame 0 in "sil a" and frame 1 in "a sil".
        let expect_mean_sil = p_as / (p_sa + p_as);
        let comp_s = &updated.model(sil).states[0].components[0];
        assert!((comp_s.mean[0] - expect_mean_sil).abs() < 1e-12);

        // Transitions of 'a': one self transition (in "a a") against the
        // cross/final exits.
        let self_occ = p_aa / total;
        let fwd_occ = (p_as + p_aa + p_sa) / total;
        let expect_self = self_occ / (self_occ + fwd_occ);
        assert!((updated.log_self(a, 0).exp() - expect_self).abs() < 1e-12);
        // Silence never self-loops here, so its row hits the clamp.
        assert!((updated.log_self(sil, 0).exp() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn split_then_reestimate_recovers_bimodal_modes() {
        // One phone, one state; emissions drawn around two modes 10σ
        // apart. After splitting to two components and reestimating, the
        // component means must sit near the true modes.
        let inv = PhoneInventory::from_labels(&["a", "sil"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let sigma = 0.5;
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|i| {
                let mode = if i % 2 == 0 { 0.0 } else { 10.0 * sigma };
                vec![mode + sigma * (rng.random_range(-1.0f64..1.0) + rng.random_range(-1.0..1.0))]
            })
            .collect();
        let f = feats(&rows);
        let init = flat_start_init(&[&f], &inv, 1).unwrap();
        let seq = PhoneSequence::from_labels(&inv, &["a"]).unwrap();
        let lat = linear_lattice(&seq).unwrap();
        let (one, _) = baum_welch(&init, &[(&f, &lat)], 2).unwrap();
        let split = crate::hmm::split_mixtures(&one, 2).unwrap();
        let (two, _) = baum_welch(&split, &[(&f, &lat)], 60).unwrap();
        let comps = &two.model(inv.id("a").unwrap()).states[0].components;
        let mut means: Vec<f64> = comps.iter().map(|c| c.mean[0]).collect();
        means.sort_by(|x, y| x.partial_cmp(y).unwrap());
        // Empirical mode centers of the uniform-sum noise are the modes
        // themselves.
        assert!(
            (means[0] - 0.0).abs() < 0.1,
            "low mode recovered at {}",
            means[0]
        );
        assert!(
            (means[1] - 5.0).abs() < 0.1,
            "high mode recovered at {}",
            means[1]
        );
    }

    #[test]
    fn infeasible_lattice_rejected() {
        let inv = PhoneInventory::from_labels(&["a", "b", "sil"]).unwrap();
        let f = feats(&[vec![0.0], vec![1.0]]); // 2 frames
        let init = flat_start_init(&[&f], &inv, 3).unwrap();
        let seq = PhoneSequence::from_labels(&inv, &["a", "b"]).unwrap(); // needs ≥ 6
        let lat = linear_lattice(&seq).unwrap();
        assert!(matches!(
            baum_welch(&init, &[(&f, &lat)], 1),
            Err(Error::NoFeasiblePath(_))
        ));
    }
}
