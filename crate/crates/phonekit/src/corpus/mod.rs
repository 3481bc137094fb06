//! Corpus ingestion: waveforms, multichannel neural recordings, phone
//! inventories, lexica, CRM-grammar utterances, artificial signal mixing
//! and Monte Carlo train/test splits.

mod neural_io;
mod transcript;
mod wav;

pub use neural_io::{
    load_neural_binary, load_neural_csv, load_neural_recording, save_neural_binary,
    save_neural_csv, DEFAULT_NEURAL_RATE_HZ,
};
pub use transcript::{
    read_inventory, read_lexicon, read_transcript, timed_to_frame_labels, write_inventory,
    write_lexicon, write_timed_transcript, write_untimed_transcript, TimedSegment, Transcript,
};
pub use wav::{load_waveform, save_waveform};

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Raw single-channel audio with samples in [-1, 1].
#[derive(Debug, Clone)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: u32,
    id: String,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32, id: String) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyPayload { what: "waveform" });
        }
        if sample_rate_hz == 0 {
            return Err(Error::InvalidParam("waveform sample rate must be > 0".into()));
        }
        if !samples.iter().all(|s| s.is_finite()) {
            return Err(Error::NonFinite(format!("waveform {id}")));
        }
        if samples.iter().any(|s| s.abs() > 1.0) {
            return Err(Error::InvalidParam(format!(
                "waveform {id} has samples outside [-1, 1]"
            )));
        }
        Ok(Waveform {
            samples,
            sample_rate_hz,
            id,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// Multichannel neural time series in arbitrary units.
#[derive(Debug, Clone)]
pub struct NeuralRecording {
    data: Mat,
    sample_rate_hz: u32,
    channel_mask: Vec<bool>,
    id: String,
}

impl NeuralRecording {
    /// Builds a recording with an all-true channel mask.
    pub fn new(data: Mat, sample_rate_hz: u32, id: String) -> Result<Self> {
        let mask = vec![true; data.rows()];
        NeuralRecording::with_mask(data, sample_rate_hz, mask, id)
    }

    pub fn with_mask(
        data: Mat,
        sample_rate_hz: u32,
        channel_mask: Vec<bool>,
        id: String,
    ) -> Result<Self> {
        if data.rows() == 0 || data.cols() == 0 {
            return Err(Error::EmptyPayload {
                what: "neural recording",
            });
        }
        if sample_rate_hz == 0 {
            return Err(Error::InvalidParam("neural sample rate must be > 0".into()));
        }
        if channel_mask.len() != data.rows() {
            return Err(Error::ShapeMismatch {
                what: "channel mask".into(),
                expected: format!("{} entries", data.rows()),
                actual: format!("{} entries", channel_mask.len()),
            });
        }
        if !channel_mask.iter().any(|&m| m) {
            return Err(Error::AllChannelsRejected);
        }
        if !data.is_finite() {
            return Err(Error::NonFinite(format!("neural recording {id}")));
        }
        Ok(NeuralRecording {
            data,
            sample_rate_hz,
            channel_mask,
            id,
        })
    }

    pub fn data(&self) -> &Mat {
        &self.data
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn channel_mask(&self) -> &[bool] {
        &self.channel_mask
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn channels(&self) -> usize {
        self.data.rows()
    }

    pub fn samples(&self) -> usize {
        self.data.cols()
    }

    pub fn usable_channels(&self) -> Vec<usize> {
        (0..self.channels())
            .filter(|&c| self.channel_mask[c])
            .collect()
    }
}

/// Index of a phone within a [`PhoneInventory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhoneId(pub usize);

/// Closed phone label set; always contains the silence label "sil".
#[derive(Debug, Clone)]
pub struct PhoneInventory {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    sil: PhoneId,
}

pub const SILENCE_LABEL: &str = "sil";

/// The folded 39-label phone set shipped as the default inventory.
pub const DEFAULT_PHONE_LABELS: [&str; 39] = [
    "iy", "ih", "eh", "ae", "ah", "uw", "uh", "aa", "ey", "ay", "oy", "aw", "ow", "er", "l", "r",
    "w", "y", "m", "n", "ng", "ch", "jh", "dh", "b", "d", "dx", "g", "p", "t", "k", "z", "v", "f",
    "th", "s", "sh", "hh", "sil",
];

impl PhoneInventory {
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let mut index = HashMap::new();
        let mut owned = Vec::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            let l = l.as_ref().to_string();
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::InvalidParam(format!("duplicate phone label '{l}'")));
            }
            owned.push(l);
        }
        let sil = *index
            .get(SILENCE_LABEL)
            .ok_or_else(|| Error::InvalidParam("inventory must contain 'sil'".into()))?;
        Ok(PhoneInventory {
            labels: owned,
            index,
            sil: PhoneId(sil),
        })
    }

    pub fn default_folded() -> Self {
        PhoneInventory::from_labels(&DEFAULT_PHONE_LABELS).expect("default inventory is valid")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn silence(&self) -> PhoneId {
        self.sil
    }

    pub fn id(&self, label: &str) -> Result<PhoneId> {
        self.index
            .get(label)
            .map(|&i| PhoneId(i))
            .ok_or_else(|| Error::UnknownPhone(label.to_string()))
    }

    pub fn label(&self, id: PhoneId) -> &str {
        &self.labels[id.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// An ordered list of phones drawn from a closed inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhoneSequence {
    phones: Vec<PhoneId>,
}

impl PhoneSequence {
    pub fn new(phones: Vec<PhoneId>) -> Self {
        PhoneSequence { phones }
    }

    pub fn from_labels<S: AsRef<str>>(inv: &PhoneInventory, labels: &[S]) -> Result<Self> {
        let phones = labels
            .iter()
            .map(|l| inv.id(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(PhoneSequence { phones })
    }

    pub fn phones(&self) -> &[PhoneId] {
        &self.phones
    }

    pub fn len(&self) -> usize {
        self.phones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phones.is_empty()
    }

    pub fn labels<'a>(&self, inv: &'a PhoneInventory) -> Vec<&'a str> {
        self.phones.iter().map(|&p| inv.label(p)).collect()
    }

    /// Copy with every silence label removed.
    pub fn strip_silence(&self, sil: PhoneId) -> PhoneSequence {
        PhoneSequence {
            phones: self.phones.iter().cloned().filter(|&p| p != sil).collect(),
        }
    }
}

/// word → pronunciation map.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: std::collections::BTreeMap<String, PhoneSequence>,
}

impl Lexicon {
    pub fn new() -> Self {
        Lexicon::default()
    }

    pub fn insert(&mut self, word: &str, pron: PhoneSequence) -> Result<()> {
        if self.entries.insert(word.to_string(), pron).is_some() {
            return Err(Error::InvalidParam(format!("duplicate lexicon word '{word}'")));
        }
        Ok(())
    }

    pub fn lookup(&self, word: &str) -> Result<&PhoneSequence> {
        self.entries
            .get(word)
            .ok_or_else(|| Error::OutOfVocabulary(word.to_string()))
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// CRM grammar word lists. The exact lists are configuration; these
/// defaults cover the fixed carrier words plus common slot fillers.
#[derive(Debug, Clone)]
pub struct CrmWordLists {
    pub call_signs: Vec<String>,
    pub colors: Vec<String>,
    pub numbers: Vec<String>,
}

impl Default for CrmWordLists {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        CrmWordLists {
            call_signs: v(&["Ringo", "Tiger"]),
            colors: v(&["Blue", "Green", "Red"]),
            numbers: v(&["Two", "Five", "Eight"]),
        }
    }
}

impl CrmWordLists {
    pub fn validate_slots(&self, call_sign: &str, color: &str, number: &str) -> Result<()> {
        let has = |xs: &[String], w: &str, slot: &str| {
            if xs.iter().any(|x| x == w) {
                Ok(())
            } else {
                Err(Error::InvalidParam(format!("'{w}' is not a known {slot}")))
            }
        };
        has(&self.call_signs, call_sign, "call sign")?;
        has(&self.colors, color, "color")?;
        has(&self.numbers, number, "number")
    }
}

/// Built-in pronunciations for the default CRM word lists, over the folded
/// 39-phone inventory.
pub fn default_crm_lexicon(inv: &PhoneInventory) -> Lexicon {
    let defs: [(&str, &[&str]); 12] = [
        ("Ready", &["r", "eh", "d", "iy"]),
        ("Ringo", &["r", "ih", "ng", "g", "ow"]),
        ("Tiger", &["t", "ay", "g", "er"]),
        ("Go", &["g", "ow"]),
        ("To", &["t", "uw"]),
        ("Now", &["n", "aw"]),
        ("Blue", &["b", "l", "uw"]),
        ("Green", &["g", "r", "iy", "n"]),
        ("Red", &["r", "eh", "d"]),
        ("Two", &["t", "uw"]),
        ("Five", &["f", "ay", "v"]),
        ("Eight", &["ey", "t"]),
    ];
    let mut lex = Lexicon::new();
    for (word, phones) in defs {
        let pron = PhoneSequence::from_labels(inv, phones).expect("built-in lexicon is valid");
        lex.insert(word, pron).expect("built-in lexicon has unique words");
    }
    lex
}

/// Expand "Ready `<call_sign>` Go To `<color>` `<number>` Now" to phones, with a
/// silence prepended and appended.
pub fn crm_utterance(
    call_sign: &str,
    color: &str,
    number: &str,
    lexicon: &Lexicon,
    inv: &PhoneInventory,
) -> Result<PhoneSequence> {
    let words = ["Ready", call_sign, "Go", "To", color, number, "Now"];
    let mut phones = vec![inv.silence()];
    for w in words {
        phones.extend_from_slice(lexicon.lookup(w)?.phones());
    }
    phones.push(inv.silence());
    Ok(PhoneSequence::new(phones))
}

/// Sample-wise sum of two equal-rate waveforms, zero-padding the shorter at
/// the tail. If the peak exceeds 1, the whole mixture is rescaled by 1/peak.
pub fn mix_waveforms(a: &Waveform, b: &Waveform) -> Result<Waveform> {
    mix_waveforms_gained(a, b, 1.0)
}

/// Like [`mix_waveforms`] but applies `gain_b` to the second signal before
/// summation; the mixing gain is a config knob, default 1.
pub fn mix_waveforms_gained(a: &Waveform, b: &Waveform, gain_b: f64) -> Result<Waveform> {
    if a.sample_rate_hz() != b.sample_rate_hz() {
        return Err(Error::SampleRateMismatch {
            a: a.sample_rate_hz(),
            b: b.sample_rate_hz(),
        });
    }
    if !(gain_b.is_finite() && gain_b >= 0.0) {
        return Err(Error::InvalidParam(format!("mixing gain {gain_b}")));
    }
    let n = a.samples().len().max(b.samples().len());
    let mut sum = vec![0.0; n];
    for (s, &x) in sum.iter_mut().zip(a.samples()) {
        *s += x;
    }
    for (s, &x) in sum.iter_mut().zip(b.samples()) {
        *s += gain_b * x;
    }
    let peak = sum.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 1.0 {
        for s in sum.iter_mut() {
            *s /= peak;
        }
    }
    Waveform::new(
        sum,
        a.sample_rate_hz(),
        format!("{}+{}", a.id(), b.id()),
    )
}

/// One Monte Carlo cross-validation cut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train_ids: Vec<String>,
    pub test_single_ids: Vec<String>,
    /// Pairs of test items mixed together for the mixed-source condition.
    pub test_mixed: Vec<(String, String)>,
    pub seed: u64,
    pub cut_index: usize,
}

/// `n_cuts` independent random splits of `pool`, each drawing
/// round(train_fraction·|pool|) training ids without replacement.
/// Deterministic given the seed; ids are canonicalized by sorting.
pub fn monte_carlo_split(
    pool: &[String],
    n_cuts: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<Vec<CorpusSplit>> {
    if pool.is_empty() {
        return Err(Error::InvalidParam("empty id pool".into()));
    }
    if n_cuts == 0 {
        return Err(Error::InvalidParam("n_cuts must be >= 1".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParam(format!(
            "train_fraction {train_fraction} outside (0, 1)"
        )));
    }
    let mut ids: Vec<String> = pool.to_vec();
    ids.sort();
    ids.dedup();
    let n_train = (train_fraction * ids.len() as f64).round() as usize;
    if n_train == 0 || n_train >= ids.len() {
        return Err(Error::InvalidParam(format!(
            "train_fraction {train_fraction} leaves an empty train or test set for pool of {}",
            ids.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cuts = Vec::with_capacity(n_cuts);
    for cut in 1..=n_cuts {
        let chosen = rand::seq::index::sample(&mut rng, ids.len(), n_train);
        let mut in_train = vec![false; ids.len()];
        for i in chosen {
            in_train[i] = true;
        }
        let train_ids: Vec<String> = ids
            .iter()
            .enumerate()
            .filter(|(i, _)| in_train[*i])
            .map(|(_, s)| s.clone())
            .collect();
        let mut test_single_ids: Vec<String> = ids
            .iter()
            .enumerate()
            .filter(|(i, _)| !in_train[*i])
            .map(|(_, s)| s.clone())
            .collect();
        // Mixed pairs: seeded shuffle of the test list, then adjacent pairs.
        let mut shuffled = test_single_ids.clone();
        shuffled.shuffle(&mut rng);
        let test_mixed: Vec<(String, String)> = shuffled
            .chunks_exact(2)
            .map(|c| (c[0].clone(), c[1].clone()))
            .collect();
        test_single_ids.sort();
        cuts.push(CorpusSplit {
            train_ids,
            test_single_ids,
            test_mixed,
            seed,
            cut_index: cut,
        });
    }
    Ok(cuts)
}
