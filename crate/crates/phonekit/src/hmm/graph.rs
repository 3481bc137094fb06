//! Expansion of a phone lattice into an HMM state graph.
//!
//! Every labeled lattice arc becomes a block of left-to-right emitting
//! states; epsilon arcs collapse into entry/link/final weights via epsilon
//! closure. Parallel epsilon paths keep both their probability sum (for
//! forward-backward) and max (for Viterbi).

use std::collections::HashMap;

use super::GmmHmmSet;
use crate::corpus::PhoneId;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::linalg::log_sum_exp;

/// Log-weight of a bundle of epsilon paths.
#[derive(Debug, Clone, Copy)]
pub struct EpsWeight {
    pub sum: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct ExpandedState {
    pub arc_id: usize,
    pub phone: PhoneId,
    pub state: usize,
}

#[derive(Debug, Clone)]
pub struct Link {
    pub from_state: usize,
    pub to_state: usize,
    pub weight: EpsWeight,
}

/// Lattice expanded against a model topology. States are ordered by
/// (arc id, state index), which fixes the deterministic tie-break.
#[derive(Debug, Clone)]
pub struct ExpandedGraph {
    pub states: Vec<ExpandedState>,
    pub states_per_phone: usize,
    /// (state index, lattice weight incl. the arc probability).
    pub entries: Vec<(usize, EpsWeight)>,
    /// Cross-arc connections, sorted by (to_state, from arc id).
    pub links: Vec<Link>,
    /// (state index, epsilon-closure weight to the lattice end).
    pub finals: Vec<(usize, EpsWeight)>,
    /// Minimum number of frames any path must emit.
    pub min_frames: usize,
}

impl ExpandedGraph {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn from_lattice(lat: &Lattice, states_per_phone: usize) -> Result<ExpandedGraph> {
        if states_per_phone == 0 {
            return Err(Error::InvalidParam("states_per_phone must be >= 1".into()));
        }
        // Labeled arcs in id order become state blocks.
        let mut labeled: Vec<&crate::lattice::LatticeArc> =
            lat.arcs().iter().filter(|a| a.label.is_some()).collect();
        labeled.sort_by_key(|a| a.id);
        if labeled.is_empty() {
            return Err(Error::InvalidParam("lattice has no labeled arcs".into()));
        }
        let mut states = Vec::with_capacity(labeled.len() * states_per_phone);
        let mut block_of_arc: HashMap<usize, usize> = HashMap::new();
        for (bi, arc) in labeled.iter().enumerate() {
            block_of_arc.insert(arc.id, bi);
            for s in 0..states_per_phone {
                states.push(ExpandedState {
                    arc_id: arc.id,
                    phone: arc.label.unwrap(),
                    state: s,
                });
            }
        }
        let first_state = |block: usize| block * states_per_phone;
        let last_state = |block: usize| block * states_per_phone + states_per_phone - 1;

        // Epsilon closure from a node: reachable nodes with path weights.
        let closure = |from: usize| -> HashMap<usize, Vec<f64>> {
            let mut weights: HashMap<usize, Vec<f64>> = HashMap::new();
            let mut stack = vec![(from, 0.0)];
            while let Some((node, logp)) = stack.pop() {
                weights.entry(node).or_default().push(logp);
                for a in lat.arcs_from(node).filter(|a| a.label.is_none()) {
                    stack.push((a.to, logp + a.log_prob));
                }
            }
            weights
        };
        let combine = |paths: &[f64]| EpsWeight {
            sum: log_sum_exp(paths),
            max: paths.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        };

        // Entries: closure from the lattice start into each labeled arc.
        let start_closure = closure(lat.start());
        let mut entry_paths: HashMap<usize, Vec<f64>> = HashMap::new();
        for (&node, paths) in &start_closure {
            for arc in lat.arcs_from(node).filter(|a| a.label.is_some()) {
                let bucket = entry_paths.entry(arc.id).or_default();
                for &p in paths {
                    bucket.push(p + arc.log_prob);
                }
            }
        }
        let mut entries: Vec<(usize, EpsWeight)> = entry_paths
            .iter()
            .map(|(&arc_id, paths)| (first_state(block_of_arc[&arc_id]), combine(paths)))
            .collect();
        entries.sort_by_key(|(s, _)| *s);

        // Links and finals from each labeled arc's destination.
        let mut links = Vec::new();
        let mut finals = Vec::new();
        for arc in &labeled {
            let cl = closure(arc.to);
            let mut into: HashMap<usize, Vec<f64>> = HashMap::new();
            for (&node, paths) in &cl {
                for succ in lat.arcs_from(node).filter(|a| a.label.is_some()) {
                    let bucket = into.entry(succ.id).or_default();
                    for &p in paths {
                        bucket.push(p + succ.log_prob);
                    }
                }
            }
            for (&succ_id, paths) in &into {
                links.push(Link {
                    from_state: last_state(block_of_arc[&arc.id]),
                    to_state: first_state(block_of_arc[&succ_id]),
                    weight: combine(paths),
                });
            }
            if let Some(paths) = cl.get(&lat.end()) {
                finals.push((last_state(block_of_arc[&arc.id]), combine(paths)));
            }
        }
        links.sort_by(|a, b| {
            (a.to_state, states[a.from_state].arc_id)
                .cmp(&(b.to_state, states[b.from_state].arc_id))
        });
        finals.sort_by_key(|(s, _)| *s);

        if entries.is_empty() || finals.is_empty() {
            return Err(Error::NoFeasiblePath(
                "lattice has no labeled path from start to end".into(),
            ));
        }

        // Minimum emitted frames: shortest labeled-arc count through the
        // lattice, times states per phone.
        let min_arcs = {
            let mut dist = vec![usize::MAX; lat.n_nodes()];
            dist[lat.start()] = 0;
            // Relax in topological fashion: iterate until fixpoint
            // (lattices are small and acyclic).
            let mut changed = true;
            while changed {
                changed = false;
                for a in lat.arcs() {
                    if dist[a.from] == usize::MAX {
                        continue;
                    }
                    let step = usize::from(a.label.is_some());
                    let cand = dist[a.from] + step;
                    if cand < dist[a.to] {
                        dist[a.to] = cand;
                        changed = true;
                    }
                }
            }
            dist[lat.end()]
        };
        if min_arcs == usize::MAX {
            return Err(Error::NoFeasiblePath("lattice end unreachable".into()));
        }

        Ok(ExpandedGraph {
            states,
            states_per_phone,
            entries,
            links,
            finals,
            min_frames: min_arcs * states_per_phone,
        })
    }

    /// Per-state column in a score matrix laid out phone-major.
    pub fn score_column(&self, models: &GmmHmmSet, state: usize) -> usize {
        models.state_index(self.states[state].phone, self.states[state].state)
    }

    /// Linear-domain transition pieces under the given models:
    /// (self_prob, fwd_prob, link probs, entry probs, final probs), where
    /// link/final probs include the HMM exit probability of the source.
    pub(crate) fn runtime_probs(&self, models: &GmmHmmSet, viterbi: bool) -> RuntimeProbs {
        let pick = |w: EpsWeight| if viterbi { w.max } else { w.sum };
        let n = self.n_states();
        let mut self_p = vec![0.0; n];
        let mut fwd_p = vec![0.0; n];
        for (j, st) in self.states.iter().enumerate() {
            self_p[j] = models.log_self(st.phone, st.state).exp();
            fwd_p[j] = models.log_fwd(st.phone, st.state).exp();
        }
        let entry_p: Vec<(usize, f64)> = self
            .entries
            .iter()
            .map(|&(j, w)| (j, pick(w).exp()))
            .collect();
        let link_p: Vec<(usize, usize, f64)> = self
            .links
            .iter()
            .map(|l| {
                let src = &self.states[l.from_state];
                let exit = models.log_fwd(src.phone, src.state).exp();
                (l.from_state, l.to_state, exit * pick(l.weight).exp())
            })
            .collect();
        let final_p: Vec<(usize, f64)> = self
            .finals
            .iter()
            .map(|&(j, w)| {
                let src = &self.states[j];
                let exit = models.log_fwd(src.phone, src.state).exp();
                (j, exit * pick(w).exp())
            })
            .collect();
        RuntimeProbs {
            self_p,
            fwd_p,
            entry_p,
            link_p,
            final_p,
        }
    }
}

pub(crate) struct RuntimeProbs {
    pub self_p: Vec<f64>,
    pub fwd_p: Vec<f64>,
    pub entry_p: Vec<(usize, f64)>,
    pub link_p: Vec<(usize, usize, f64)>,
    pub final_p: Vec<(usize, f64)>,
}
