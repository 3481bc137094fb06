//! Lattice-constrained Viterbi forced alignment.

use super::graph::ExpandedGraph;
use super::GmmHmmSet;
use crate::corpus::{PhoneId, PhoneInventory, PhoneSequence};
use crate::error::{Error, Result};
use crate::feat::FeatureMatrix;
use crate::lattice::Lattice;
use crate::linalg::Mat;

/// Per-frame (phone, state) labels; always exactly one entry per frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub frames: Vec<(PhoneId, usize)>,
}

impl Alignment {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Collapse to the phone sequence, starting a new phone whenever the
    /// label changes or the state index moves backwards.
    pub fn phone_sequence(&self) -> PhoneSequence {
        let mut phones = Vec::new();
        for (i, &(p, s)) in self.frames.iter().enumerate() {
            let boundary = match i {
                0 => true,
                _ => {
                    let (pp, ps) = self.frames[i - 1];
                    pp != p || s < ps
                }
            };
            if boundary {
                phones.push(p);
            }
        }
        PhoneSequence::new(phones)
    }

    pub fn labels<'a>(&self, inv: &'a PhoneInventory) -> Vec<(&'a str, usize)> {
        self.frames.iter().map(|&(p, s)| (inv.label(p), s)).collect()
    }
}

/// Forced alignment with GMM emissions.
pub fn forced_align(
    models: &GmmHmmSet,
    feats: &FeatureMatrix,
    lat: &Lattice,
) -> Result<Alignment> {
    let scores = models.score_matrix(feats)?;
    forced_align_with_scores(models, &scores, lat)
}

/// Forced alignment over precomputed per-frame state log-likelihoods
/// (frames × n_states, phone-major layout). This is the entry point for
/// hybrid scorers.
pub fn forced_align_with_scores(
    models: &GmmHmmSet,
    scores: &Mat,
    lat: &Lattice,
) -> Result<Alignment> {
    if scores.rows() == 0 {
        return Err(Error::InvalidParam("empty feature matrix".into()));
    }
    if scores.cols() != models.n_states() {
        return Err(Error::ShapeMismatch {
            what: "alignment scores".into(),
            expected: format!("{} states", models.n_states()),
            actual: format!("{} states", scores.cols()),
        });
    }
    let g = ExpandedGraph::from_lattice(lat, models.states_per_phone())?;
    let t_len = scores.rows();
    if t_len < g.min_frames {
        return Err(Error::NoFeasiblePath(format!(
            "{t_len} frames cannot traverse a lattice needing at least {}",
            g.min_frames
        )));
    }
    let (path, _score) = viterbi_expanded(&g, models, scores)?;
    Ok(Alignment {
        frames: path
            .into_iter()
            .map(|j| (g.states[j].phone, g.states[j].state))
            .collect(),
    })
}

/// Viterbi over an expanded graph. Returns the per-frame expanded-state
/// path and its total log score. Ties prefer the lowest (arc id, state).
pub(crate) fn viterbi_expanded(
    g: &ExpandedGraph,
    models: &GmmHmmSet,
    scores: &Mat,
) -> Result<(Vec<usize>, f64)> {
    let n = g.n_states();
    let t_len = scores.rows();
    let spp = g.states_per_phone;
    let probs = g.runtime_probs(models, true);

    let log_self: Vec<f64> = probs.self_p.iter().map(|p| p.ln()).collect();
    let log_fwd: Vec<f64> = probs.fwd_p.iter().map(|p| p.ln()).collect();
    let cols: Vec<usize> = (0..n).map(|j| g.score_column(models, j)).collect();

    // Candidate predecessors per destination state, in canonical
    // (source arc id, source state) order so ties resolve deterministically.
    #[derive(Clone, Copy)]
    struct Cand {
        src: usize,
        logp: f64,
    }
    let mut cands: Vec<Vec<Cand>> = vec![Vec::new(); n];
    for j in 0..n {
        if j % spp != 0 {
            cands[j].push(Cand {
                src: j - 1,
                logp: log_fwd[j - 1],
            });
        }
        cands[j].push(Cand {
            src: j,
            logp: log_self[j],
        });
    }
    for l in &probs.link_p {
        cands[l.1].push(Cand {
            src: l.0,
            logp: l.2.ln(),
        });
    }
    for list in cands.iter_mut() {
        list.sort_by_key(|c| (g.states[c.src].arc_id, g.states[c.src].state));
    }

    const NEG: f64 = f64::NEG_INFINITY;
    let mut delta = vec![NEG; t_len * n];
    let mut back: Vec<u32> = vec![u32::MAX; t_len * n];

    for &(j, p) in &probs.entry_p {
        delta[j] = p.ln() + scores[(0, cols[j])];
    }
    for t in 1..t_len {
        let (prev_all, cur_all) = delta.split_at_mut(t * n);
        let prev = &prev_all[(t - 1) * n..];
        let cur = &mut cur_all[..n];
        for j in 0..n {
            let mut best = NEG;
            let mut best_src = u32::MAX;
            for c in &cands[j] {
                let v = prev[c.src] + c.logp;
                if v > best {
                    best = v;
                    best_src = c.src as u32;
                }
            }
            if best > NEG {
                cur[j] = best + scores[(t, cols[j])];
                back[t * n + j] = best_src;
            }
        }
    }

    let mut best_final = NEG;
    let mut best_state = usize::MAX;
    for &(j, p) in &probs.final_p {
        let v = delta[(t_len - 1) * n + j] + p.ln();
        if v > best_final {
            best_final = v;
            best_state = j;
        }
    }
    if !best_final.is_finite() {
        return Err(Error::NoFeasiblePath(
            "no complete path through the lattice for this frame count".into(),
        ));
    }

    let mut path = vec![0usize; t_len];
    path[t_len - 1] = best_state;
    for t in (1..t_len).rev() {
        let b = back[t * n + path[t]];
        debug_assert_ne!(b, u32::MAX);
        path[t - 1] = b as usize;
    }
    Ok((path, best_final))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PhoneInventory;
    use crate::feat::StreamTag;
    use crate::hmm::flat_start_init;
    use crate::lattice::{insert_optional_silences, linear_lattice};

    fn feats(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::new(Mat::from_rows(rows), 0.01, StreamTag::Acoustic).unwrap()
    }

    #[test]
    fn three_frames_one_phone_forced_through_states() {
        let inv = PhoneInventory::from_labels(&["a", "sil"]).unwrap();
        let f = feats(&[vec![0.0], vec![0.1], vec![-0.1]]);
        let models = flat_start_init(&[&f], &inv, 3).unwrap();
        let seq = PhoneSequence::from_labels(&inv, &["a"]).unwrap();
        let lat = linear_lattice(&seq).unwrap();
        let ali = forced_align(&models, &f, &lat).unwrap();
        let a = inv.id("a").unwrap();
        assert_eq!(ali.frames, vec![(a, 0), (a, 1), (a, 2)]);
        assert_eq!(ali.phone_sequence().phones(), &[a]);
    }

    #[test]
    fn alignment_length_equals_frames() {
        let inv = PhoneInventory::from_labels(&["a", "b", "sil"]).unwrap();
        let rows: Vec<Vec<f64>> = (0..17).map(|t| vec![t as f64 * 0.1]).collect();
        let f = feats(&rows);
        let models = flat_start_init(&[&f], &inv, 3).unwrap();
        let seq = PhoneSequence::from_labels(&inv, &["a", "b"]).unwrap();
        let lat = linear_lattice(&seq).unwrap();
        let ali = forced_align(&models, &f, &lat).unwrap();
        assert_eq!(ali.len(), 17);
    }

    #[test]
    fn low_energy_gap_claimed_by_optional_silence() {
        // 'a' frames near +5, sil frames near 0; a gap of near-zero frames
        // in the middle should map onto the optional silence arc.
        let inv = PhoneInventory::from_labels(&["a", "sil"]).unwrap();
        let mut rows = Vec::new();
        for _ in 0..4 {
            rows.push(vec![5.0]);
        }
        for _ in 0..3 {
            rows.push(vec![0.0]);
        }
        for _ in 0..4 {
            rows.push(vec![5.0]);
        }
        let f = feats(&rows);
        let mut models = flat_start_init(&[&f], &inv, 1).unwrap();
        // Hand-set emissions: 'a' at 5, sil at 0, unit variance.
        {
            let a = inv.id("a").unwrap().0;
            let s = inv.silence().0;
            models.models_mut()[a].states[0].components[0].mean = vec![5.0];
            models.models_mut()[a].states[0].components[0].var = vec![1.0];
            models.models_mut()[s].states[0].components[0].mean = vec![0.0];
            models.models_mut()[s].states[0].components[0].var = vec![1.0];
        }
        let seq = PhoneSequence::from_labels(&inv, &["a", "a"]).unwrap();
        let lat = linear_lattice(&seq).unwrap();
        let aug = insert_optional_silences(&lat, 0.9, inv.silence(), true).unwrap();
        let ali = forced_align(&models, &f, &aug).unwrap();
        let sil = inv.silence();
        for t in 4..7 {
            assert_eq!(ali.frames[t].0, sil, "frame {t} not silence");
        }
        assert_ne!(ali.frames[0].0, sil);
        assert_ne!(ali.frames[10].0, sil);
    }

    #[test]
    fn infeasible_alignment_is_an_error() {
        let inv = PhoneInventory::from_labels(&["a", "b", "sil"]).unwrap();
        let f = feats(&vec![vec![0.0]; 2]);
        let models = flat_start_init(&[&f], &inv, 3).unwrap();
        let seq = PhoneSequence::from_labels(&inv, &["a", "b"]).unwrap();
        let lat = linear_lattice(&seq).unwrap();
        assert!(matches!(
            forced_align(&models, &f, &lat),
            Err(Error::NoFeasiblePath(_))
        ));
    }
}
