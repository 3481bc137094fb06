//! Biphone-LM phone-loop decoding graph and Viterbi search.

use super::BiphoneLm;
use crate::corpus::{PhoneId, PhoneSequence};
use crate::error::{Error, Result};
use crate::hmm::GmmHmmSet;
use crate::linalg::Mat;

/// One phone instance in the decoding graph: entering `phone` out of the
/// LM context `from_ctx` (index n_phones = sentence begin).
#[derive(Debug, Clone)]
pub struct DecodeArc {
    pub from_ctx: usize,
    pub phone: PhoneId,
    pub lm_logp: f64,
    pub id: usize,
}

/// Phone-bigram loop expanded to HMM states; weights combine acoustic
/// scores with `lm_scale`-scaled LM terms.
#[derive(Debug, Clone)]
pub struct DecodeGraph {
    n_phones: usize,
    states_per_phone: usize,
    arcs: Vec<DecodeArc>,
    /// Unscaled LM log-probability of ending after each phone context.
    end_logp: Vec<f64>,
    lm_scale: f64,
    /// Arc indices grouped by the phone they emit (exit bookkeeping).
    arcs_of_phone: Vec<Vec<usize>>,
}

impl DecodeGraph {
    pub fn n_phones(&self) -> usize {
        self.n_phones
    }

    pub fn arcs(&self) -> &[DecodeArc] {
        &self.arcs
    }

    pub fn lm_scale(&self) -> f64 {
        self.lm_scale
    }

    pub fn end_logp(&self, phone: PhoneId) -> f64 {
        self.end_logp[phone.0]
    }
}

/// Compile the phone-loop graph: one arc per (history, phone) pair with a
/// finite LM probability, each expanded to the phone's HMM at search time.
/// Arc ids are assigned deterministically (begin context first, then each
/// phone context in inventory order).
pub fn compile_decode_graph(
    lm: &BiphoneLm,
    models: &GmmHmmSet,
    lm_scale: f64,
) -> Result<DecodeGraph> {
    let n = models.inventory().len();
    if lm.n_phones() != n {
        return Err(Error::ShapeMismatch {
            what: "decode graph inventory".into(),
            expected: format!("{n} phones"),
            actual: format!("{} phones", lm.n_phones()),
        });
    }
    if !lm_scale.is_finite() || lm_scale < 0.0 {
        return Err(Error::InvalidParam(format!("lm scale {lm_scale}")));
    }
    let mut arcs = Vec::new();
    let mut arcs_of_phone = vec![Vec::new(); n];
    let push = |from_ctx: usize, hist: Option<PhoneId>, arcs: &mut Vec<DecodeArc>, arcs_of_phone: &mut Vec<Vec<usize>>| {
        for p in 0..n {
            let logp = lm.log_prob(hist, Some(PhoneId(p)));
            if logp.is_finite() {
                let id = arcs.len();
                arcs.push(DecodeArc {
                    from_ctx,
                    phone: PhoneId(p),
                    lm_logp: logp,
                    id,
                });
                arcs_of_phone[p].push(id);
            }
        }
    };
    push(n, None, &mut arcs, &mut arcs_of_phone);
    for h in 0..n {
        push(h, Some(PhoneId(h)), &mut arcs, &mut arcs_of_phone);
    }
    if arcs.is_empty() {
        return Err(Error::InvalidParam("LM admits no phone at all".into()));
    }
    let end_logp: Vec<f64> = (0..n).map(|h| lm.log_prob(Some(PhoneId(h)), None)).collect();
    Ok(DecodeGraph {
        n_phones: n,
        states_per_phone: models.states_per_phone(),
        arcs,
        end_logp,
        lm_scale,
        arcs_of_phone,
    })
}

/// Decoder output. `log_score` is exactly `acoustic_logp +
/// lm_scale · lm_logp`, where the acoustic part carries emissions plus HMM
/// transition terms and the LM part carries the entered arcs plus the end
/// probability.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    pub phones: PhoneSequence,
    pub raw_phones: PhoneSequence,
    pub frame_states: Vec<(PhoneId, usize)>,
    pub log_score: f64,
    pub acoustic_logp: f64,
    pub lm_logp: f64,
}

/// Best path under acoustic + scaled LM score; ties prefer the lowest arc
/// id. Silence is stripped from `phones` when `strip_silence` is set (the
/// default pipeline behaviour); `raw_phones` always keeps it.
pub fn viterbi_decode(
    g: &DecodeGraph,
    models: &GmmHmmSet,
    scores: &Mat,
    strip_silence: bool,
) -> Result<DecodeResult> {
    if scores.rows() == 0 {
        return Err(Error::InvalidParam("empty feature matrix".into()));
    }
    if scores.cols() != models.n_states() {
        return Err(Error::ShapeMismatch {
            what: "decode scores".into(),
            expected: format!("{} states", models.n_states()),
            actual: format!("{} states", scores.cols()),
        });
    }
    if models.states_per_phone() != g.states_per_phone || models.inventory().len() != g.n_phones {
        return Err(Error::ShapeMismatch {
            what: "decode topology".into(),
            expected: format!(
                "{} phones × {} states",
                g.n_phones, g.states_per_phone
            ),
            actual: format!(
                "{} phones × {} states",
                models.inventory().len(),
                models.states_per_phone()
            ),
        });
    }

    let spp = g.states_per_phone;
    let n_arcs = g.arcs.len();
    let n_search = n_arcs * spp;
    let t_len = scores.rows();
    const NEG: f64 = f64::NEG_INFINITY;

    // Cached per-arc pieces.
    let col = |arc: usize, s: usize| g.arcs[arc].phone.0 * spp + s;
    let log_self: Vec<f64> = (0..n_arcs)
        .flat_map(|a| (0..spp).map(move |s| (a, s)))
        .map(|(a, s)| models.log_self(g.arcs[a].phone, s))
        .collect();
    let log_fwd: Vec<f64> = (0..n_arcs)
        .flat_map(|a| (0..spp).map(move |s| (a, s)))
        .map(|(a, s)| models.log_fwd(g.arcs[a].phone, s))
        .collect();

    // Backpointers encode the source search state shifted left once, with
    // the low bit marking a cross-arc entry. The flag matters when a path
    // leaves an arc and re-enters the same arc (repeated phone in the
    // same context): source state alone cannot distinguish that from a
    // self-loop.
    const ENTRY: u32 = 1;
    let mut delta = vec![NEG; n_search];
    let mut back = vec![vec![u32::MAX; n_search]; t_len];

    // t = 0: enter from the begin context only.
    for arc in &g.arcs {
        if arc.from_ctx == g.n_phones {
            let j = arc.id * spp;
            delta[j] = g.lm_scale * arc.lm_logp + scores[(0, col(arc.id, 0))];
        }
    }

    let mut next = vec![NEG; n_search];
    for t in 1..t_len {
        // Best exit per phone context, lowest arc id on ties.
        let mut exit_best = vec![NEG; g.n_phones];
        let mut exit_arg = vec![u32::MAX; g.n_phones];
        for p in 0..g.n_phones {
            for &a in &g.arcs_of_phone[p] {
                let j = a * spp + spp - 1;
                let v = delta[j] + log_fwd[j];
                if v > exit_best[p] {
                    exit_best[p] = v;
                    exit_arg[p] = j as u32;
                }
            }
        }
        for j in 0..n_search {
            next[j] = NEG;
        }
        for arc in &g.arcs {
            let base = arc.id * spp;
            // State 0: cross entry vs self-loop.
            let mut best;
            let mut src;
            if arc.from_ctx < g.n_phones && exit_best[arc.from_ctx] > NEG {
                best = exit_best[arc.from_ctx] + g.lm_scale * arc.lm_logp;
                src = (exit_arg[arc.from_ctx] << 1) | ENTRY;
            } else {
                best = NEG;
                src = u32::MAX;
            }
            let stay = delta[base] + log_self[base];
            if stay > best {
                best = stay;
                src = (base as u32) << 1;
            }
            if best > NEG {
                next[base] = best + scores[(t, col(arc.id, 0))];
                back[t][base] = src;
            }
            // Later states: forward vs self-loop.
            for s in 1..spp {
                let j = base + s;
                let fwd = delta[j - 1] + log_fwd[j - 1];
                let stay = delta[j] + log_self[j];
                let (v, b) = if fwd >= stay {
                    (fwd, ((j - 1) as u32) << 1)
                } else {
                    (stay, (j as u32) << 1)
                };
                if v > NEG {
                    next[j] = v + scores[(t, col(arc.id, s))];
                    back[t][j] = b;
                }
            }
        }
        std::mem::swap(&mut delta, &mut next);
    }

    // Termination: exit plus scaled end probability.
    let mut best_final = NEG;
    let mut best_state = u32::MAX;
    for arc in &g.arcs {
        let j = arc.id * spp + spp - 1;
        let end = g.end_logp[arc.phone.0];
        if !end.is_finite() {
            continue;
        }
        let v = delta[j] + log_fwd[j] + g.lm_scale * end;
        if v > best_final {
            best_final = v;
            best_state = j as u32;
        }
    }
    if !best_final.is_finite() {
        return Err(Error::NoFeasiblePath(
            "no complete decoding path (check the LM end probabilities)".into(),
        ));
    }

    // Backtrace, keeping the entry flags.
    let mut path = vec![0usize; t_len];
    let mut entered_at = vec![false; t_len];
    entered_at[0] = true;
    path[t_len - 1] = best_state as usize;
    for t in (1..t_len).rev() {
        let b = back[t][path[t]];
        entered_at[t] = b & ENTRY != 0;
        path[t - 1] = (b >> 1) as usize;
    }

    // Reconstruct per-frame labels, the phone string and the exact score
    // bookkeeping.
    let mut frame_states = Vec::with_capacity(t_len);
    let mut raw = Vec::new();
    let mut acoustic = 0.0;
    let mut lm_total = 0.0;
    for t in 0..t_len {
        let j = path[t];
        let arc = j / spp;
        let s = j % spp;
        frame_states.push((g.arcs[arc].phone, s));
        acoustic += scores[(t, col(arc, s))];
        if entered_at[t] {
            raw.push(g.arcs[arc].phone);
            lm_total += g.arcs[arc].lm_logp;
        }
        if t + 1 < t_len {
            let j_next = path[t + 1];
            if entered_at[t + 1] {
                acoustic += log_fwd[j]; // exit before the next entry
            } else if j_next == j {
                acoustic += log_self[j];
            } else {
                acoustic += log_fwd[j];
            }
        }
    }
    let last = path[t_len - 1];
    acoustic += log_fwd[last];
    lm_total += g.end_logp[g.arcs[last / spp].phone.0];

    let raw_phones = PhoneSequence::new(raw);
    let phones = if strip_silence {
        raw_phones.strip_silence(models.inventory().silence())
    } else {
        raw_phones.clone()
    };
    Ok(DecodeResult {
        phones,
        raw_phones,
        frame_states,
        log_score: best_final,
        acoustic_logp: acoustic,
        lm_logp: lm_total,
    })
}
