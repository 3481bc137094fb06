//! 3-state left-to-right monophone GMM/HMMs: initialization from timed
//! transcriptions, flat start, or transferred frame-state alignments;
//! Baum-Welch reestimation over training lattices; mixture splitting; and
//! lattice-constrained forced alignment.

mod align;
mod baumwelch;
mod graph;

pub use align::{forced_align, forced_align_with_scores, Alignment};
pub use baumwelch::{baum_welch, total_log_likelihood};
pub use graph::ExpandedGraph;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::corpus::{PhoneId, PhoneInventory};
use crate::error::{Error, Result};
use crate::feat::FeatureMatrix;
use crate::linalg::{log_sum_exp, Mat};

pub const DEFAULT_STATES_PER_PHONE: usize = 3;
pub const MAX_MIXTURE_COMPONENTS: usize = 8;

const LOG_2PI: f64 = 1.8378770664093453;
/// Transition probabilities are kept off exact 0/1 so log scores stay finite.
const TRANS_CLAMP: f64 = 1e-3;

/// One diagonal-covariance Gaussian mixture component.
#[derive(Debug, Clone)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Emission model of one HMM state: up to 8 diagonal Gaussians.
#[derive(Debug, Clone)]
pub struct GmmState {
    pub components: Vec<GmmComponent>,
}

impl GmmState {
    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        let per_comp: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let mut acc = c.weight.ln();
                for d in 0..x.len() {
                    let diff = x[d] - c.mean[d];
                    acc -= 0.5 * (LOG_2PI + c.var[d].ln() + diff * diff / c.var[d]);
                }
                acc
            })
            .collect();
        log_sum_exp(&per_comp)
    }
}

/// HMM parameters for one phone: per-state emissions plus strictly
/// left-to-right self-loop/forward transitions (no skips).
#[derive(Debug, Clone)]
pub struct PhoneHmm {
    pub states: Vec<GmmState>,
    pub log_self: Vec<f64>,
    pub log_fwd: Vec<f64>,
}

/// One model per inventory phone.
#[derive(Debug, Clone)]
pub struct GmmHmmSet {
    inventory: PhoneInventory,
    states_per_phone: usize,
    dim: usize,
    models: Vec<PhoneHmm>,
    var_floor: Vec<f64>,
}

impl GmmHmmSet {
    /// Rebuild a set from serialized parts, validating shapes.
    pub fn from_parts(
        inventory: PhoneInventory,
        states_per_phone: usize,
        dim: usize,
        models: Vec<PhoneHmm>,
        var_floor: Vec<f64>,
    ) -> Result<GmmHmmSet> {
        if models.len() != inventory.len() {
            return Err(Error::ShapeMismatch {
                what: "gmm set".into(),
                expected: format!("{} phone models", inventory.len()),
                actual: format!("{}", models.len()),
            });
        }
        if var_floor.len() != dim {
            return Err(Error::ShapeMismatch {
                what: "gmm variance floor".into(),
                expected: format!("dim {dim}"),
                actual: format!("{}", var_floor.len()),
            });
        }
        for hmm in &models {
            if hmm.states.len() != states_per_phone
                || hmm.log_self.len() != states_per_phone
                || hmm.log_fwd.len() != states_per_phone
            {
                return Err(Error::ShapeMismatch {
                    what: "gmm topology".into(),
                    expected: format!("{states_per_phone} states"),
                    actual: format!("{}", hmm.states.len()),
                });
            }
        }
        Ok(GmmHmmSet {
            inventory,
            states_per_phone,
            dim,
            models,
            var_floor,
        })
    }

    pub fn inventory(&self) -> &PhoneInventory {
        &self.inventory
    }

    pub fn states_per_phone(&self) -> usize {
        self.states_per_phone
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_states(&self) -> usize {
        self.inventory.len() * self.states_per_phone
    }

    pub fn model(&self, phone: PhoneId) -> &PhoneHmm {
        &self.models[phone.0]
    }

    pub fn models(&self) -> &[PhoneHmm] {
        &self.models
    }

    pub fn models_mut(&mut self) -> &mut [PhoneHmm] {
        &mut self.models
    }

    pub fn var_floor(&self) -> &[f64] {
        &self.var_floor
    }

    /// Column index of (phone, state) in score matrices.
    pub fn state_index(&self, phone: PhoneId, state: usize) -> usize {
        phone.0 * self.states_per_phone + state
    }

    pub fn log_self(&self, phone: PhoneId, state: usize) -> f64 {
        self.models[phone.0].log_self[state]
    }

    pub fn log_fwd(&self, phone: PhoneId, state: usize) -> f64 {
        self.models[phone.0].log_fwd[state]
    }

    /// Per-frame state log-likelihoods: frames × n_states.
    pub fn score_matrix(&self, feats: &FeatureMatrix) -> Result<Mat> {
        if feats.dim() != self.dim {
            return Err(Error::ShapeMismatch {
                what: "gmm scoring".into(),
                expected: format!("dim {}", self.dim),
                actual: format!("dim {}", feats.dim()),
            });
        }
        let mut out = Mat::zeros(feats.rows(), self.n_states());
        for t in 0..feats.rows() {
            let x = feats.frame(t);
            let row = out.row_mut(t);
            for (p, hmm) in self.models.iter().enumerate() {
                for (s, state) in hmm.states.iter().enumerate() {
                    row[p * self.states_per_phone + s] = state.log_likelihood(x);
                }
            }
        }
        Ok(out)
    }

    /// Like [`GmmHmmSet::score_matrix`] but restricted to the given
    /// (phone, state) columns; output column i scores `columns[i]`.
    pub fn score_columns(&self, feats: &FeatureMatrix, columns: &[usize]) -> Result<Mat> {
        if feats.dim() != self.dim {
            return Err(Error::ShapeMismatch {
                what: "gmm scoring".into(),
                expected: format!("dim {}", self.dim),
                actual: format!("dim {}", feats.dim()),
            });
        }
        let mut out = Mat::zeros(feats.rows(), columns.len());
        for t in 0..feats.rows() {
            let x = feats.frame(t);
            let row = out.row_mut(t);
            for (i, &col) in columns.iter().enumerate() {
                let p = col / self.states_per_phone;
                let s = col % self.states_per_phone;
                row[i] = self.models[p].states[s].log_likelihood(x);
            }
        }
        Ok(out)
    }

    /// Per-component log-likelihoods of one state for one frame.
    pub(crate) fn component_log_likes(&self, phone: PhoneId, state: usize, x: &[f64]) -> Vec<f64> {
        self.models[phone.0].states[state]
            .components
            .iter()
            .map(|c| {
                let mut acc = c.weight.ln();
                for d in 0..x.len() {
                    let diff = x[d] - c.mean[d];
                    acc -= 0.5 * (LOG_2PI + c.var[d].ln() + diff * diff / c.var[d]);
                }
                acc
            })
            .collect()
    }

    /// Post-reestimation sanity: weights sum to 1, variances floored,
    /// transition rows stochastic.
    pub fn check_invariants(&self) -> Result<()> {
        for (p, hmm) in self.models.iter().enumerate() {
            for (s, st) in hmm.states.iter().enumerate() {
                let wsum: f64 = st.components.iter().map(|c| c.weight).sum();
                if (wsum - 1.0).abs() > 1e-10 {
                    return Err(Error::Numeric {
                        what: "gmm weights",
                        detail: format!("phone {p} state {s}: weights sum to {wsum}"),
                    });
                }
                for c in &st.components {
                    if c.weight <= 0.0 {
                        return Err(Error::Numeric {
                            what: "gmm weights",
                            detail: format!("phone {p} state {s}: non-positive weight"),
                        });
                    }
                    for (d, &v) in c.var.iter().enumerate() {
                        if v < self.var_floor[d] * (1.0 - 1e-12) {
                            return Err(Error::Numeric {
                                what: "gmm variances",
                                detail: format!("phone {p} state {s} dim {d}: {v} below floor"),
                            });
                        }
                    }
                }
                let tsum = hmm.log_self[s].exp() + hmm.log_fwd[s].exp();
                if (tsum - 1.0).abs() > 1e-10 {
                    return Err(Error::Numeric {
                        what: "hmm transitions",
                        detail: format!("phone {p} state {s}: row sums to {tsum}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// A phone occupying feature frames [start, end).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameSegment {
    pub phone: PhoneId,
    pub start: usize,
    pub end: usize,
}

struct MomentAcc {
    count: f64,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl MomentAcc {
    fn new(dim: usize) -> Self {
        MomentAcc {
            count: 0.0,
            sum: vec![0.0; dim],
            sq: vec![0.0; dim],
        }
    }

    fn add(&mut self, x: &[f64], w: f64) {
        self.count += w;
        for d in 0..x.len() {
            self.sum[d] += w * x[d];
            self.sq[d] += w * x[d] * x[d];
        }
    }

    fn mean_var(&self, floor: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mean: Vec<f64> = self.sum.iter().map(|s| s / self.count).collect();
        let var: Vec<f64> = self
            .sq
            .iter()
            .zip(&mean)
            .enumerate()
            .map(|(d, (sq, m))| (sq / self.count - m * m).max(floor[d]))
            .collect();
        (mean, var)
    }
}

fn global_stats(data: &[&FeatureMatrix]) -> Result<(usize, MomentAcc)> {
    let dim = data
        .first()
        .map(|f| f.dim())
        .ok_or_else(|| Error::InvalidParam("no training data".into()))?;
    let mut acc = MomentAcc::new(dim);
    for f in data {
        if f.dim() != dim {
            return Err(Error::ShapeMismatch {
                what: "training features".into(),
                expected: format!("dim {dim}"),
                actual: format!("dim {}", f.dim()),
            });
        }
        for t in 0..f.rows() {
            acc.add(f.frame(t), 1.0);
        }
    }
    if acc.count == 0.0 {
        return Err(Error::InvalidParam("training data has zero frames".into()));
    }
    Ok((dim, acc))
}

/// Variance floor: 1e-3 of the global per-dimension variance, with a small
/// absolute minimum so constant dimensions stay usable.
fn variance_floor(global: &MomentAcc) -> Vec<f64> {
    let (_, gvar) = global.mean_var(&vec![0.0; global.sum.len()]);
    gvar.iter().map(|v| (1e-3 * v).max(1e-8)).collect()
}

fn clamped_transitions(mean_duration: f64) -> (f64, f64) {
    // Geometric duration MLE: self-loop (d−1)/d.
    let p_self = if mean_duration <= 1.0 {
        TRANS_CLAMP
    } else {
        ((mean_duration - 1.0) / mean_duration).clamp(TRANS_CLAMP, 1.0 - TRANS_CLAMP)
    };
    (p_self.ln(), (1.0 - p_self).ln())
}

/// Initialize one single-Gaussian model per phone from timed segments:
/// each occurrence is split into `states_per_phone` near-equal spans whose
/// pooled frames give the state statistics. Phones without data fall back
/// to the global mean/variance and are reported back.
pub fn init_from_timed_transcriptions(
    data: &[(&FeatureMatrix, Vec<FrameSegment>)],
    inv: &PhoneInventory,
    states_per_phone: usize,
) -> Result<(GmmHmmSet, Vec<PhoneId>)> {
    let feats: Vec<&FeatureMatrix> = data.iter().map(|(f, _)| *f).collect();
    let (dim, global) = global_stats(&feats)?;
    let floor = variance_floor(&global);

    let n_slots = inv.len() * states_per_phone;
    let mut accs: Vec<MomentAcc> = (0..n_slots).map(|_| MomentAcc::new(dim)).collect();
    let mut durations: Vec<(f64, f64)> = vec![(0.0, 0.0); n_slots]; // (frames, occurrences)

    for (f, segs) in data {
        for seg in segs {
            if seg.end > f.rows() || seg.start >= seg.end {
                return Err(Error::InvalidParam(format!(
                    "segment [{}, {}) outside {} frames",
                    seg.start,
                    seg.end,
                    f.rows()
                )));
            }
            let len = seg.end - seg.start;
            for s in 0..states_per_phone {
                let lo = seg.start + len * s / states_per_phone;
                let hi = seg.start + len * (s + 1) / states_per_phone;
                let slot = seg.phone.0 * states_per_phone + s;
                for t in lo..hi {
                    accs[slot].add(f.frame(t), 1.0);
                }
                durations[slot].0 += (hi - lo) as f64;
                durations[slot].1 += 1.0;
            }
        }
    }

    let (gmean, gvar) = global.mean_var(&floor);
    let mut missing = Vec::new();
    let mut models = Vec::with_capacity(inv.len());
    for p in 0..inv.len() {
        let mut states = Vec::with_capacity(states_per_phone);
        let mut log_self = Vec::with_capacity(states_per_phone);
        let mut log_fwd = Vec::with_capacity(states_per_phone);
        let mut phone_missing = false;
        for s in 0..states_per_phone {
            let slot = p * states_per_phone + s;
            let (mean, var) = if accs[slot].count > 0.0 {
                accs[slot].mean_var(&floor)
            } else {
                phone_missing = true;
                (gmean.clone(), gvar.clone())
            };
            states.push(GmmState {
                components: vec![GmmComponent {
                    weight: 1.0,
                    mean,
                    var,
                }],
            });
            let mean_dur = if durations[slot].1 > 0.0 {
                durations[slot].0 / durations[slot].1
            } else {
                2.0
            };
            let (ls, lf) = clamped_transitions(mean_dur);
            log_self.push(ls);
            log_fwd.push(lf);
        }
        if phone_missing {
            missing.push(PhoneId(p));
        }
        models.push(PhoneHmm {
            states,
            log_self,
            log_fwd,
        });
    }

    Ok((
        GmmHmmSet {
            inventory: inv.clone(),
            states_per_phone,
            dim,
            models,
            var_floor: floor,
        },
        missing,
    ))
}

/// Flat start: every state of every phone gets the global mean/variance
/// and uniform transitions.
pub fn flat_start_init(
    data: &[&FeatureMatrix],
    inv: &PhoneInventory,
    states_per_phone: usize,
) -> Result<GmmHmmSet> {
    let (dim, global) = global_stats(data)?;
    let floor = variance_floor(&global);
    let (gmean, gvar) = global.mean_var(&floor);
    let state = GmmState {
        components: vec![GmmComponent {
            weight: 1.0,
            mean: gmean,
            var: gvar,
        }],
    };
    let half = 0.5f64.ln();
    let models = (0..inv.len())
        .map(|_| PhoneHmm {
            states: vec![state.clone(); states_per_phone],
            log_self: vec![half; states_per_phone],
            log_fwd: vec![half; states_per_phone],
        })
        .collect();
    Ok(GmmHmmSet {
        inventory: inv.clone(),
        states_per_phone,
        dim,
        models,
        var_floor: floor,
    })
}

/// Initialize from transferred frame-state alignments: state occupancies
/// are fixed by the alignment. When an alignment is longer or shorter than
/// its feature matrix, only the overlapping frames contribute.
pub fn init_from_alignments(
    data: &[(&FeatureMatrix, &Alignment)],
    inv: &PhoneInventory,
    states_per_phone: usize,
) -> Result<(GmmHmmSet, Vec<PhoneId>)> {
    let feats: Vec<&FeatureMatrix> = data.iter().map(|(f, _)| *f).collect();
    let (dim, global) = global_stats(&feats)?;
    let floor = variance_floor(&global);

    let n_slots = inv.len() * states_per_phone;
    let mut accs: Vec<MomentAcc> = (0..n_slots).map(|_| MomentAcc::new(dim)).collect();
    let mut self_counts = vec![0.0f64; n_slots];
    let mut fwd_counts = vec![0.0f64; n_slots];

    for (f, ali) in data {
        let n = f.rows().min(ali.frames.len());
        for t in 0..n {
            let (p, s) = ali.frames[t];
            if s >= states_per_phone {
                return Err(Error::InvalidParam(format!(
                    "alignment state {s} exceeds topology ({states_per_phone} states)"
                )));
            }
            let slot = p.0 * states_per_phone + s;
            accs[slot].add(f.frame(t), 1.0);
            if t + 1 < n {
                let (np, ns) = ali.frames[t + 1];
                if np == p && ns == s {
                    self_counts[slot] += 1.0;
                } else {
                    fwd_counts[slot] += 1.0;
                }
            } else {
                fwd_counts[slot] += 1.0;
            }
        }
    }

    let (gmean, gvar) = global.mean_var(&floor);
    let mut missing = Vec::new();
    let mut models = Vec::with_capacity(inv.len());
    for p in 0..inv.len() {
        let mut states = Vec::with_capacity(states_per_phone);
        let mut log_self = Vec::with_capacity(states_per_phone);
        let mut log_fwd = Vec::with_capacity(states_per_phone);
        let mut phone_missing = false;
        for s in 0..states_per_phone {
            let slot = p * states_per_phone + s;
            let (mean, var) = if accs[slot].count > 0.0 {
                accs[slot].mean_var(&floor)
            } else {
                phone_missing = true;
                (gmean.clone(), gvar.clone())
            };
            states.push(GmmState {
                components: vec![GmmComponent {
                    weight: 1.0,
                    mean,
                    var,
                }],
            });
            let total = self_counts[slot] + fwd_counts[slot];
            let mean_dur = if fwd_counts[slot] > 0.0 {
                total / fwd_counts[slot]
            } else {
                2.0
            };
            let (ls, lf) = clamped_transitions(mean_dur);
            log_self.push(ls);
            log_fwd.push(lf);
        }
        if phone_missing {
            missing.push(PhoneId(p));
        }
        models.push(PhoneHmm {
            states,
            log_self,
            log_fwd,
        });
    }

    Ok((
        GmmHmmSet {
            inventory: inv.clone(),
            states_per_phone,
            dim,
            models,
            var_floor: floor,
        },
        missing,
    ))
}

/// Split the largest-weight component of every state until `target`
/// components: the split halves the weight and perturbs the mean by
/// ±0.2·stddev. Targets beyond 8 are rejected.
pub fn split_mixtures(models: &GmmHmmSet, target: usize) -> Result<GmmHmmSet> {
    if target > MAX_MIXTURE_COMPONENTS {
        return Err(Error::InvalidParam(format!(
            "mixture target {target} exceeds the maximum {MAX_MIXTURE_COMPONENTS}"
        )));
    }
    let current = models.models[0].states[0].components.len();
    if target < current {
        return Err(Error::InvalidParam(format!(
            "mixture target {target} below current {current}"
        )));
    }
    let mut out = models.clone();
    for hmm in out.models.iter_mut() {
        for state in hmm.states.iter_mut() {
            while state.components.len() < target {
                let idx = state
                    .components
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.weight.partial_cmp(&b.1.weight).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                let parent = state.components[idx].clone();
                let half = parent.weight / 2.0;
                let offset: Vec<f64> = parent.var.iter().map(|v| 0.2 * v.sqrt()).collect();
                let plus: Vec<f64> = parent
                    .mean
                    .iter()
                    .zip(&offset)
                    .map(|(m, o)| m + o)
                    .collect();
                let minus: Vec<f64> = parent
                    .mean
                    .iter()
                    .zip(&offset)
                    .map(|(m, o)| m - o)
                    .collect();
                state.components[idx] = GmmComponent {
                    weight: half,
                    mean: plus,
                    var: parent.var.clone(),
                };
                state.components.push(GmmComponent {
                    weight: half,
                    mean: minus,
                    var: parent.var,
                });
            }
        }
    }
    Ok(out)
}

/// Alignments serialize as one line per frame: "frame_index phone state".
pub fn write_alignment(
    ali: &Alignment,
    inv: &PhoneInventory,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for (t, (p, s)) in ali.frames.iter().enumerate() {
        writeln!(w, "{} {} {}", t, inv.label(*p), s).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_alignment(path: impl AsRef<Path>, inv: &PhoneInventory) -> Result<Alignment> {
    use std::io::BufRead;
    let path = path.as_ref();
    let r = std::io::BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut frames = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                detail: "expected 'frame_index phone state'".into(),
            });
        }
        let idx: usize = f[0].parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            detail: format!("bad frame index '{}'", f[0]),
        })?;
        if idx != frames.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                detail: format!("frame index {idx} out of order"),
            });
        }
        let state: usize = f[2].parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            detail: format!("bad state '{}'", f[2]),
        })?;
        frames.push((inv.id(f[1])?, state));
    }
    Ok(Alignment { frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feat::StreamTag;

    fn inv() -> PhoneInventory {
        PhoneInventory::from_labels(&["a", "b", "sil"]).unwrap()
    }

    fn feats(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::new(Mat::from_rows(rows), 0.01, StreamTag::Acoustic).unwrap()
    }

    #[test]
    fn timed_init_splits_into_thirds() {
        let inv = inv();
        let f = feats(&(0..9).map(|t| vec![t as f64]).collect::<Vec<_>>());
        let segs = vec![FrameSegment {
            phone: inv.id("a").unwrap(),
            start: 0,
            end: 9,
        }];
        let (set, missing) = init_from_timed_transcriptions(&[(&f, segs)], &inv, 3).unwrap();
        let a = set.model(inv.id("a").unwrap());
        // Thirds {0,1,2}, {3,4,5}, {6,7,8} → means 1, 4, 7.
        assert!((a.states[0].components[0].mean[0] - 1.0).abs() < 1e-12);
        assert!((a.states[1].components[0].mean[0] - 4.0).abs() < 1e-12);
        assert!((a.states[2].components[0].mean[0] - 7.0).abs() < 1e-12);
        // b and sil had no data.
        assert_eq!(missing.len(), 2);
    }

    #[test]
    fn timed_init_pools_occurrences() {
        let inv = inv();
        let f = feats(&(0..6).map(|t| vec![t as f64]).collect::<Vec<_>>());
        // Two occurrences of 'a': frames [0,3) and [3,6), one state.
        let segs = vec![
            FrameSegment {
                phone: inv.id("a").unwrap(),
                start: 0,
                end: 3,
            },
            FrameSegment {
                phone: inv.id("a").unwrap(),
                start: 3,
                end: 6,
            },
        ];
        let (set, _) = init_from_timed_transcriptions(&[(&f, segs)], &inv, 1).unwrap();
        // Pooled frames 0..6 → mean 2.5.
        let a = set.model(inv.id("a").unwrap());
        assert!((a.states[0].components[0].mean[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn flat_start_all_states_identical() {
        let inv = inv();
        let f = feats(&(0..20).map(|t| vec![(t as f64).sin(), t as f64]).collect::<Vec<_>>());
        let set = flat_start_init(&[&f], &inv, 3).unwrap();
        let reference = &set.models()[0].states[0].components[0];
        for hmm in set.models() {
            for st in &hmm.states {
                assert_eq!(st.components[0].mean, reference.mean);
                assert_eq!(st.components[0].var, reference.var);
            }
        }
        assert_eq!(set.n_states(), 9);
        set.check_invariants().unwrap();
    }

    #[test]
    fn split_one_to_two() {
        let inv = inv();
        let f = feats(&(0..10).map(|t| vec![t as f64]).collect::<Vec<_>>());
        let set = flat_start_init(&[&f], &inv, 1).unwrap();
        let split = split_mixtures(&set, 2).unwrap();
        for hmm in split.models() {
            let st = &hmm.states[0];
            assert_eq!(st.components.len(), 2);
            assert!((st.components[0].weight - 0.5).abs() < 1e-15);
            assert!((st.components[1].weight - 0.5).abs() < 1e-15);
            let sigma = st.components[0].var[0].sqrt();
            let gap = st.components[0].mean[0] - st.components[1].mean[0];
            assert!((gap - 0.4 * sigma).abs() < 1e-12);
            let wsum: f64 = st.components.iter().map(|c| c.weight).sum();
            assert!((wsum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn split_cap_enforced() {
        let inv = inv();
        let f = feats(&(0..10).map(|t| vec![t as f64]).collect::<Vec<_>>());
        let set = flat_start_init(&[&f], &inv, 1).unwrap();
        assert!(split_mixtures(&set, 9).is_err());
    }

    #[test]
    fn alignment_roundtrip() {
        let inv = inv();
        let a = inv.id("a").unwrap();
        let sil = inv.silence();
        let ali = Alignment {
            frames: vec![(sil, 0), (a, 0), (a, 1), (a, 2), (sil, 0)],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ali");
        write_alignment(&ali, &inv, &path).unwrap();
        let back = read_alignment(&path, &inv).unwrap();
        assert_eq!(back.frames, ali.frames);
    }
}
