//! Synthetic paired-corpus generator: ground-truth HMM emissions for an
//! acoustic and a neural stream sharing one transcript, with controllable
//! silence-insertion mismatch in the neural stream. This is the
//! verification fixture for alignment transfer and the optional-silence
//! mechanism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::corpus::{
    crm_utterance, default_crm_lexicon, CrmWordLists, Lexicon, PhoneId, PhoneInventory,
    PhoneSequence,
};
use crate::error::{Error, Result};
use crate::feat::{FeatureMatrix, StreamTag};
use crate::hmm::Alignment;
use crate::linalg::Mat;

/// Ground-truth generator parameters. State (phone, s) emits a diagonal
/// Gaussian around its per-stream mean row; durations are shifted Poisson
/// (minimum one frame).
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub inventory: PhoneInventory,
    pub states_per_phone: usize,
    /// (phones · states_per_phone) × acoustic_dim.
    pub acoustic_means: Mat,
    /// (phones · states_per_phone) × neural_dim.
    pub neural_means: Mat,
    pub emission_std: f64,
    pub duration_lambda: f64,
    /// Probability of inserting a silence span at each eligible phone
    /// boundary of the neural stream only.
    pub sil_insert_prob: f64,
    pub sil_duration_lambda: f64,
    pub word_lists: CrmWordLists,
    pub lexicon: Lexicon,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Random ground-truth means (unit scale) over the default CRM word
    /// lists and built-in lexicon.
    pub fn random(
        inventory: &PhoneInventory,
        states_per_phone: usize,
        acoustic_dim: usize,
        neural_dim: usize,
        seed: u64,
    ) -> Result<GeneratorSpec> {
        if acoustic_dim == 0 || neural_dim == 0 || states_per_phone == 0 {
            return Err(Error::InvalidParam("zero generator dimension".into()));
        }
        let n_states = inventory.len() * states_per_phone;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |rows: usize, cols: usize| {
            let mut m = Mat::zeros(rows, cols);
            for v in m.data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            m
        };
        let acoustic_means = fill(n_states, acoustic_dim);
        let neural_means = fill(n_states, neural_dim);
        let lexicon = default_crm_lexicon(inventory);
        Ok(GeneratorSpec {
            inventory: inventory.clone(),
            states_per_phone,
            acoustic_means,
            neural_means,
            emission_std: 1.0,
            duration_lambda: 2.0,
            sil_insert_prob: 0.0,
            sil_duration_lambda: 2.0,
            word_lists: CrmWordLists::default(),
            lexicon,
            seed,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.emission_std > 0.0) {
            return Err(Error::InvalidParam("emission std must be > 0".into()));
        }
        if !(self.duration_lambda >= 0.0) || !(self.sil_duration_lambda >= 0.0) {
            return Err(Error::InvalidParam(
                "duration distribution is degenerate".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.sil_insert_prob) {
            return Err(Error::InvalidParam(format!(
                "sil_insert_prob {} outside [0, 1]",
                self.sil_insert_prob
            )));
        }
        let n_states = self.inventory.len() * self.states_per_phone;
        if self.acoustic_means.rows() != n_states || self.neural_means.rows() != n_states {
            return Err(Error::ShapeMismatch {
                what: "generator means".into(),
                expected: format!("{n_states} state rows"),
                actual: format!(
                    "{} acoustic, {} neural",
                    self.acoustic_means.rows(),
                    self.neural_means.rows()
                ),
            });
        }
        Ok(())
    }

    /// Minimum pairwise Mahalanobis distance between state means.
    fn min_separation(means: &Mat, std: f64) -> f64 {
        let mut min = f64::INFINITY;
        for a in 0..means.rows() {
            for b in (a + 1)..means.rows() {
                let d: f64 = means
                    .row(a)
                    .iter()
                    .zip(means.row(b))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                min = min.min(d.sqrt() / std);
            }
        }
        min
    }
}

/// Rescale the ground-truth means so the minimum pairwise Mahalanobis
/// distance between state emissions equals `separation`.
pub fn separation_control(spec: &GeneratorSpec, separation: f64) -> Result<GeneratorSpec> {
    if !(separation >= 0.0) {
        return Err(Error::InvalidParam(format!("separation {separation}")));
    }
    let mut out = spec.clone();
    for means in [&mut out.acoustic_means, &mut out.neural_means] {
        let current = GeneratorSpec::min_separation(means, spec.emission_std);
        let scale = if current > 0.0 && current.is_finite() {
            separation / current
        } else {
            0.0
        };
        for v in means.data_mut() {
            *v *= scale;
        }
    }
    Ok(out)
}

/// One generated utterance: paired feature streams, the shared transcript
/// and both ground-truth alignments.
#[derive(Debug, Clone)]
pub struct SyntheticUtterance {
    pub id: String,
    pub acoustic: FeatureMatrix,
    pub neural: FeatureMatrix,
    pub transcript: PhoneSequence,
    pub acoustic_alignment: Alignment,
    pub neural_alignment: Alignment,
}

fn sample_duration(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 1;
    }
    let pois = Poisson::new(lambda).expect("validated lambda");
    1 + pois.sample(rng) as usize
}

/// Emit frames for one phone traversal, appending to `frames` and `ali`.
fn emit_phone(
    spec: &GeneratorSpec,
    means: &Mat,
    phone: PhoneId,
    duration_lambda: f64,
    rng: &mut ChaCha8Rng,
    frames: &mut Vec<Vec<f64>>,
    ali: &mut Vec<(PhoneId, usize)>,
) {
    let normal = Normal::new(0.0, spec.emission_std).expect("validated std");
    for s in 0..spec.states_per_phone {
        let d = sample_duration(rng, duration_lambda);
        let mean = means.row(phone.0 * spec.states_per_phone + s);
        for _ in 0..d {
            let frame: Vec<f64> = mean.iter().map(|m| m + normal.sample(rng)).collect();
            frames.push(frame);
            ali.push((phone, s));
        }
    }
}

/// Generate `n` utterances: CRM-grammar transcripts, Gaussian emissions
/// for both streams, independent neural durations, and neural-only
/// silence insertions at eligible boundaries (between non-silence
/// phones) with probability `sil_insert_prob`. Deterministic given the
/// spec seed.
pub fn generate_corpus(spec: &GeneratorSpec, n: usize) -> Result<Vec<SyntheticUtterance>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidParam("n_utterances must be >= 1".into()));
    }
    let sil = spec.inventory.silence();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(
            spec.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let cs = &spec.word_lists.call_signs[rng.random_range(0..spec.word_lists.call_signs.len())];
        let color = &spec.word_lists.colors[rng.random_range(0..spec.word_lists.colors.len())];
        let number = &spec.word_lists.numbers[rng.random_range(0..spec.word_lists.numbers.len())];
        let transcript = crm_utterance(cs, color, number, &spec.lexicon, &spec.inventory)?;

        let mut a_frames = Vec::new();
        let mut a_ali = Vec::new();
        for &p in transcript.phones() {
            emit_phone(
                spec,
                &spec.acoustic_means,
                p,
                spec.duration_lambda,
                &mut rng,
                &mut a_frames,
                &mut a_ali,
            );
        }

        let mut n_frames = Vec::new();
        let mut n_ali = Vec::new();
        let phones = transcript.phones();
        for (j, &p) in phones.iter().enumerate() {
            emit_phone(
                spec,
                &spec.neural_means,
                p,
                spec.duration_lambda,
                &mut rng,
                &mut n_frames,
                &mut n_ali,
            );
            let next_non_sil = phones.get(j + 1).map(|&q| q != sil).unwrap_or(false);
            if p != sil && next_non_sil && rng.random_range(0.0..1.0) < spec.sil_insert_prob {
                emit_phone(
                    spec,
                    &spec.neural_means,
                    sil,
                    spec.sil_duration_lambda,
                    &mut rng,
                    &mut n_frames,
                    &mut n_ali,
                );
            }
        }

        out.push(SyntheticUtterance {
            id: format!("synth{i:05}"),
            acoustic: FeatureMatrix::new(
                Mat::from_rows(&a_frames),
                0.010,
                StreamTag::Acoustic,
            )?,
            neural: FeatureMatrix::new(Mat::from_rows(&n_frames), 0.010, StreamTag::Neural)?,
            transcript,
            acoustic_alignment: Alignment { frames: a_ali },
            neural_alignment: Alignment { frames: n_ali },
        });
    }
    Ok(out)
}

/// Feature-level mixed-source stand-in: merge the two utterances'
/// ground-truth state sequences in random order (preserving each one's
/// internal order) and emit fresh frames along the merged sequence.
/// The scoring reference is the first utterance's transcript.
pub fn mix_utterances(
    spec: &GeneratorSpec,
    a: &SyntheticUtterance,
    b: &SyntheticUtterance,
    stream: StreamTag,
    seed: u64,
) -> Result<FeatureMatrix> {
    spec.validate()?;
    let (ali_a, ali_b, means) = match stream {
        StreamTag::Acoustic => (
            &a.acoustic_alignment,
            &b.acoustic_alignment,
            &spec.acoustic_means,
        ),
        StreamTag::Neural => (&a.neural_alignment, &b.neural_alignment, &spec.neural_means),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, spec.emission_std).expect("validated std");
    let mut ia = 0;
    let mut ib = 0;
    let mut frames = Vec::with_capacity(ali_a.len() + ali_b.len());
    while ia < ali_a.len() || ib < ali_b.len() {
        let take_a = if ia >= ali_a.len() {
            false
        } else if ib >= ali_b.len() {
            true
        } else {
            rng.random_range(0.0..1.0) < 0.5
        };
        let (p, s) = if take_a {
            let f = ali_a.frames[ia];
            ia += 1;
            f
        } else {
            let f = ali_b.frames[ib];
            ib += 1;
            f
        };
        let mean = means.row(p.0 * spec.states_per_phone + s);
        frames.push(mean.iter().map(|m| m + normal.sample(&mut rng)).collect::<Vec<f64>>());
    }
    FeatureMatrix::new(Mat::from_rows(&frames), 0.010, stream)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GeneratorSpec {
        let inv = PhoneInventory::default_folded();
        GeneratorSpec::random(&inv, 3, 6, 8, 42).unwrap()
    }

    #[test]
    fn no_insertions_alignments_share_phone_boundaries() {
        let spec = spec();
        let corpus = generate_corpus(&spec, 4).unwrap();
        for u in &corpus {
            let a_seq = u.acoustic_alignment.phone_sequence();
            let n_seq = u.neural_alignment.phone_sequence();
            assert_eq!(a_seq, u.transcript);
            assert_eq!(n_seq, u.transcript);
        }
    }

    #[test]
    fn insertion_rate_matches_binomial() {
        let mut s = spec();
        s.sil_insert_prob = 0.3;
        let corpus = generate_corpus(&s, 400).unwrap();
        let sil = s.inventory.silence();
        let mut eligible = 0usize;
        let mut inserted = 0usize;
        for u in &corpus {
            let phones = u.transcript.phones();
            let boundaries = phones
                .windows(2)
                .filter(|w| w[0] != sil && w[1] != sil)
                .count();
            eligible += boundaries;
            let extra = u.neural_alignment.phone_sequence().strip_silence(sil);
            // Extra sils = neural phone count − transcript phone count.
            let n_sils_neural = u
                .neural_alignment
                .phone_sequence()
                .phones()
                .iter()
                .filter(|&&p| p == sil)
                .count();
            let n_sils_transcript =
                phones.iter().filter(|&&p| p == sil).count();
            inserted += n_sils_neural - n_sils_transcript;
            assert_eq!(extra.phones(), u.transcript.strip_silence(sil).phones());
        }
        let rate = inserted as f64 / eligible as f64;
        assert!(
            (rate - 0.3).abs() < 0.02,
            "insertion rate {rate} over {eligible} boundaries"
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let s = spec();
        let a = generate_corpus(&s, 3).unwrap();
        let b = generate_corpus(&s, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.acoustic.values().data(), y.acoustic.values().data());
            assert_eq!(x.neural.values().data(), y.neural.values().data());
            assert_eq!(x.transcript, y.transcript);
        }
    }

    #[test]
    fn frame_counts_match_alignments() {
        let s = spec();
        for u in generate_corpus(&s, 5).unwrap() {
            assert_eq!(u.acoustic.rows(), u.acoustic_alignment.len());
            assert_eq!(u.neural.rows(), u.neural_alignment.len());
        }
    }

    #[test]
    fn separation_zero_collapses_states() {
        let s = separation_control(&spec(), 0.0).unwrap();
        assert!(s.acoustic_means.data().iter().all(|&v| v == 0.0));
        let s10 = separation_control(&spec(), 10.0).unwrap();
        let d = GeneratorSpec::min_separation(&s10.acoustic_means, s10.emission_std);
        assert!((d - 10.0).abs() < 1e-9, "min separation {d}");
        let dn = GeneratorSpec::min_separation(&s10.neural_means, s10.emission_std);
        assert!((dn - 10.0).abs() < 1e-9);
    }

    #[test]
    fn empirical_means_approach_ground_truth() {
        let mut s = separation_control(&spec(), 4.0).unwrap();
        s.duration_lambda = 1.0;
        let corpus = generate_corpus(&s, 300).unwrap();
        // Pool acoustic frames by ground-truth state, compare to means.
        let spp = s.states_per_phone;
        let dim = s.acoustic_means.cols();
        let n_states = s.acoustic_means.rows();
        let mut sums = vec![vec![0.0f64; dim]; n_states];
        let mut counts = vec![0usize; n_states];
        for u in &corpus {
            for (t, &(p, st)) in u.acoustic_alignment.frames.iter().enumerate() {
                let slot = p.0 * spp + st;
                counts[slot] += 1;
                for (acc, v) in sums[slot].iter_mut().zip(u.acoustic.frame(t)) {
                    *acc += v;
                }
            }
        }
        // A 3σ/√n bound is exceeded by chance in ~0.3% of cells, so allow
        // that rate across the hundreds of (state, dim) comparisons while
        // holding every cell to 5σ/√n.
        let mut total = 0usize;
        let mut beyond_3s = 0usize;
        for slot in 0..n_states {
            if counts[slot] < 50 {
                continue;
            }
            let n = counts[slot] as f64;
            let sigma_n = s.emission_std / n.sqrt();
            for d in 0..dim {
                let emp = sums[slot][d] / n;
                let truth = s.acoustic_means[(slot, d)];
                let err = (emp - truth).abs();
                total += 1;
                if err >= 3.0 * sigma_n {
                    beyond_3s += 1;
                }
                assert!(
                    err < 5.0 * sigma_n,
                    "slot {slot} dim {d}: {emp} vs {truth} (n={n})"
                );
            }
        }
        assert!(total > 100, "too few populated cells ({total})");
        assert!(
            (beyond_3s as f64) < 0.01 * total as f64 + 1.0,
            "{beyond_3s} of {total} cells beyond 3σ/√n"
        );
    }

    #[test]
    fn mixing_produces_merged_length() {
        let s = spec();
        let corpus = generate_corpus(&s, 2).unwrap();
        let mixed = mix_utterances(&s, &corpus[0], &corpus[1], StreamTag::Acoustic, 7).unwrap();
        assert_eq!(
            mixed.rows(),
            corpus[0].acoustic.rows() + corpus[1].acoustic.rows()
        );
        assert_eq!(mixed.dim(), corpus[0].acoustic.dim());
    }
}
