//! Shared test support: brute-force enumeration oracles that are kept
//! structurally independent of the dynamic-programming search paths they
//! verify, plus small fixture builders.

use phonekit::corpus::{PhoneId, PhoneInventory};
use phonekit::feat::{FeatureMatrix, StreamTag};
use phonekit::hmm::{flat_start_init, GmmHmmSet};
use phonekit::lattice::{BiphoneLm, Lattice, LatticeArc};
use phonekit::linalg::Mat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn feats(rows: &[Vec<f64>]) -> FeatureMatrix {
    FeatureMatrix::new(Mat::from_rows(rows), 0.01, StreamTag::Acoustic).unwrap()
}

/// Random single-Gaussian models with distinct means per (phone, state).
pub fn random_models(
    inv: &PhoneInventory,
    spp: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> GmmHmmSet {
    let warm: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let f = feats(&warm);
    let mut set = flat_start_init(&[&f], inv, spp).unwrap();
    for hmm in set.models_mut() {
        for s in 0..spp {
            let comp = &mut hmm.states[s].components[0];
            for d in 0..dim {
                comp.mean[d] = rng.random_range(-3.0..3.0);
                comp.var[d] = rng.random_range(0.3..2.0);
            }
            let p_self: f64 = rng.random_range(0.2..0.8);
            hmm.log_self[s] = p_self.ln();
            hmm.log_fwd[s] = (1.0 - p_self).ln();
        }
    }
    set
}

fn gaussian_loglik(mean: &[f64], var: &[f64], x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for d in 0..x.len() {
        let diff = x[d] - mean[d];
        acc -= 0.5 * ((2.0 * std::f64::consts::PI * var[d]).ln() + diff * diff / var[d]);
    }
    acc
}

pub fn state_loglik(models: &GmmHmmSet, phone: PhoneId, state: usize, x: &[f64]) -> f64 {
    let comps = &models.model(phone).states[state].components;
    let terms: Vec<f64> = comps
        .iter()
        .map(|c| c.weight.ln() + gaussian_loglik(&c.mean, &c.var, x))
        .collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// All epsilon paths from `node`, as (destination, log-probability).
fn eps_paths(lat: &Lattice, node: usize) -> Vec<(usize, f64)> {
    let mut out = vec![(node, 0.0)];
    let mut stack = vec![(node, 0.0)];
    while let Some((n, w)) = stack.pop() {
        for a in lat.arcs_from(n).filter(|a| a.label.is_none()) {
            out.push((a.to, w + a.log_prob));
            stack.push((a.to, w + a.log_prob));
        }
    }
    out
}

/// Exhaustive best forced-alignment path over the lattice-constrained HMM.
pub fn brute_force_align(
    models: &GmmHmmSet,
    lat: &Lattice,
    f: &FeatureMatrix,
) -> Option<(Vec<(PhoneId, usize)>, f64)> {
    let spp = models.states_per_phone();
    let t_len = f.rows();
    let mut best: Option<(Vec<(PhoneId, usize)>, f64)> = None;

    struct Ctx<'a> {
        models: &'a GmmHmmSet,
        lat: &'a Lattice,
        f: &'a FeatureMatrix,
        spp: usize,
        t_len: usize,
    }

    fn extend(
        ctx: &Ctx,
        arc: &LatticeArc,
        state: usize,
        t: usize,
        score: f64,
        path: &mut Vec<(PhoneId, usize)>,
        best: &mut Option<(Vec<(PhoneId, usize)>, f64)>,
    ) {
        let phone = arc.label.unwrap();
        let score = score + state_loglik(ctx.models, phone, state, ctx.f.frame(t));
        path.push((phone, state));
        if t + 1 == ctx.t_len {
            if state == ctx.spp - 1 {
                for (node, w) in eps_paths(ctx.lat, arc.to) {
                    if node == ctx.lat.end() {
                        let total = score + ctx.models.log_fwd(phone, state) + w;
                        if best.as_ref().map(|(_, s)| total > *s).unwrap_or(true) {
                            *best = Some((path.clone(), total));
                        }
                    }
                }
            }
        } else {
            extend(
                ctx,
                arc,
                state,
                t + 1,
                score + ctx.models.log_self(phone, state),
                path,
                best,
            );
            if state + 1 < ctx.spp {
                extend(
                    ctx,
                    arc,
                    state + 1,
                    t + 1,
                    score + ctx.models.log_fwd(phone, state),
                    path,
                    best,
                );
            } else {
                let exit = score + ctx.models.log_fwd(phone, state);
                for (node, w) in eps_paths(ctx.lat, arc.to) {
                    for next in ctx.lat.arcs_from(node).filter(|a| a.label.is_some()) {
                        extend(ctx, next, 0, t + 1, exit + w + next.log_prob, path, best);
                    }
                }
            }
        }
        path.pop();
    }

    let ctx = Ctx {
        models,
        lat,
        f,
        spp,
        t_len,
    };
    for (node, w) in eps_paths(lat, lat.start()) {
        for arc in lat.arcs_from(node).filter(|a| a.label.is_some()) {
            let mut path = Vec::new();
            extend(&ctx, arc, 0, 0, w + arc.log_prob, &mut path, &mut best);
        }
    }
    best
}

/// Exhaustive best decoding path under the phone-loop bigram model,
/// built directly on the LM rather than the compiled graph.
pub fn brute_force_decode(
    models: &GmmHmmSet,
    lm: &BiphoneLm,
    lm_scale: f64,
    f: &FeatureMatrix,
) -> Option<(Vec<PhoneId>, f64)> {
    let spp = models.states_per_phone();
    let t_len = f.rows();
    let n = models.inventory().len();
    let mut best: Option<(Vec<PhoneId>, f64)> = None;

    struct Ctx<'a> {
        models: &'a GmmHmmSet,
        lm: &'a BiphoneLm,
        lm_scale: f64,
        f: &'a FeatureMatrix,
        spp: usize,
        t_len: usize,
        n: usize,
    }

    fn extend(
        ctx: &Ctx,
        phone: PhoneId,
        state: usize,
        t: usize,
        score: f64,
        phones: &mut Vec<PhoneId>,
        best: &mut Option<(Vec<PhoneId>, f64)>,
    ) {
        let score = score + state_loglik(ctx.models, phone, state, ctx.f.frame(t));
        if t + 1 == ctx.t_len {
            if state == ctx.spp - 1 {
                let end = ctx.lm.log_prob(Some(phone), None);
                if end.is_finite() {
                    let total =
                        score + ctx.models.log_fwd(phone, state) + ctx.lm_scale * end;
                    if best.as_ref().map(|(_, s)| total > *s).unwrap_or(true) {
                        *best = Some((phones.clone(), total));
                    }
                }
            }
            return;
        }
        extend(
            ctx,
            phone,
            state,
            t + 1,
            score + ctx.models.log_self(phone, state),
            phones,
            best,
        );
        if state + 1 < ctx.spp {
            extend(
                ctx,
                phone,
                state + 1,
                t + 1,
                score + ctx.models.log_fwd(phone, state),
                phones,
                best,
            );
        } else {
            let exit = score + ctx.models.log_fwd(phone, state);
            for q in 0..ctx.n {
                let lp = ctx.lm.log_prob(Some(phone), Some(PhoneId(q)));
                if !lp.is_finite() {
                    continue;
                }
                phones.push(PhoneId(q));
                extend(
                    ctx,
                    PhoneId(q),
                    0,
                    t + 1,
                    exit + ctx.lm_scale * lp,
                    phones,
                    best,
                );
                phones.pop();
            }
        }
    }

    let ctx = Ctx {
        models,
        lm,
        lm_scale,
        f,
        spp,
        t_len,
        n,
    };
    for p in 0..n {
        let lp = lm.log_prob(None, Some(PhoneId(p)));
        if !lp.is_finite() {
            continue;
        }
        let mut phones = vec![PhoneId(p)];
        extend(&ctx, PhoneId(p), 0, 0, lm_scale * lp, &mut phones, &mut best);
    }
    best
}

/// Independent recursive memoized edit distance.
pub fn edit_distance_oracle(a: &[PhoneId], b: &[PhoneId]) -> usize {
    fn rec(
        a: &[PhoneId],
        b: &[PhoneId],
        i: usize,
        j: usize,
        memo: &mut std::collections::HashMap<(usize, usize), usize>,
    ) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let sub = rec(a, b, i + 1, j + 1, memo) + usize::from(a[i] != b[j]);
        let del = rec(a, b, i + 1, j, memo) + 1;
        let ins = rec(a, b, i, j + 1, memo) + 1;
        let v = sub.min(del).min(ins);
        memo.insert((i, j), v);
        v
    }
    rec(a, b, 0, 0, &mut std::collections::HashMap::new())
}
