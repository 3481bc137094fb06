//! Versioned binary model container: magic "MDL1", schema version, then
//! named sections with length prefixes. Payloads are little-endian with
//! float64 numeric data.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::PhoneInventory;
use crate::dnn::{DnnModel, LdaTransform, Normalizer};
use crate::error::{Error, Result};
use crate::hmm::{GmmComponent, GmmHmmSet, GmmState, PhoneHmm};
use crate::lattice::BiphoneLm;
use crate::linalg::Mat;
use crate::neural::{NmfFactors, SpatialBasis};

pub const SCHEMA_VERSION: u32 = 1;

/// Section names used by the toolkit.
pub mod sections {
    pub const GMM: &str = "GMM";
    pub const LM: &str = "LM";
    pub const LDA: &str = "LDA";
    pub const DNN: &str = "DNN";
    pub const PRIORS: &str = "PRIORS";
    pub const NORM: &str = "NORM";
    pub const BASIS: &str = "BASIS";
    pub const NMF: &str = "NMF";
    pub const META: &str = "META";
}

#[derive(Debug, Clone, Default)]
pub struct ModelContainer {
    sections: BTreeMap<String, Vec<u8>>,
}

impl ModelContainer {
    pub fn new() -> Self {
        ModelContainer::default()
    }

    pub fn insert(&mut self, name: &str, payload: Vec<u8>) {
        self.sections.insert(name.to_string(), payload);
    }

    pub fn get(&self, name: &str) -> Result<&[u8]> {
        self.sections
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::MissingPrerequisite {
                artifact: format!("container section '{name}'"),
                command: "the producing training stage".into(),
            })
    }

    pub fn has(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(|s| s.as_str())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        w.write_all(b"MDL1").map_err(io)?;
        w.write_all(&SCHEMA_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.sections.len() as u32).to_le_bytes())
            .map_err(io)?;
        for (name, payload) in &self.sections {
            w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io)?;
            w.write_all(name.as_bytes()).map_err(io)?;
            w.write_all(&(payload.len() as u64).to_le_bytes()).map_err(io)?;
            w.write_all(payload).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<ModelContainer> {
        let path = path.as_ref();
        let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != b"MDL1" {
            return Err(Error::MalformedHeader {
                what: "model container",
                detail: format!("bad magic {magic:?}"),
            });
        }
        let version = crate::feat::read_u32(&mut r, path)?;
        if version != SCHEMA_VERSION {
            return Err(Error::UnsupportedEncoding {
                what: "model container",
                detail: format!("schema version {version}, expected {SCHEMA_VERSION}"),
            });
        }
        let n = crate::feat::read_u32(&mut r, path)? as usize;
        let mut sections = BTreeMap::new();
        for _ in 0..n {
            let name_len = crate::feat::read_u32(&mut r, path)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name).map_err(|e| Error::io(path, e))?;
            let name = String::from_utf8(name).map_err(|_| Error::MalformedHeader {
                what: "model container",
                detail: "non-utf8 section name".into(),
            })?;
            let len = crate::feat::read_u64(&mut r, path)? as usize;
            let mut payload = vec![0u8; len];
            r.read_exact(&mut payload).map_err(|e| Error::io(path, e))?;
            sections.insert(name, payload);
        }
        Ok(ModelContainer { sections })
    }
}

// ── Payload encoding helpers ────────────────────────────────────────────

struct Enc {
    buf: Vec<u8>,
}

impl Enc {
    fn new() -> Self {
        Enc { buf: Vec::new() }
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        self.u32(vs.len() as u32);
        for v in vs {
            self.f64(*v);
        }
    }
    fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
    fn mat(&mut self, m: &Mat) {
        self.u32(m.rows() as u32);
        self.u32(m.cols() as u32);
        for v in m.data() {
            self.f64(*v);
        }
    }
}

struct Dec<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Dec<'a> {
    fn new(data: &'a [u8]) -> Self {
        Dec { data, pos: 0 }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::MalformedHeader {
                what: "container section",
                detail: format!("truncated at byte {}", self.pos),
            });
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.f64()).collect()
    }
    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::MalformedHeader {
            what: "container section",
            detail: "non-utf8 string".into(),
        })
    }
    fn mat(&mut self) -> Result<Mat> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.f64()?);
        }
        Ok(Mat::from_vec(rows, cols, data))
    }
}

// ── Per-model encodings ─────────────────────────────────────────────────

pub fn encode_inventory(inv: &PhoneInventory) -> Vec<u8> {
    let mut e = Enc::new();
    e.u32(inv.len() as u32);
    for l in inv.labels() {
        e.string(l);
    }
    e.buf
}

pub fn decode_inventory(bytes: &[u8]) -> Result<PhoneInventory> {
    let mut d = Dec::new(bytes);
    let n = d.u32()? as usize;
    let labels: Vec<String> = (0..n).map(|_| d.string()).collect::<Result<_>>()?;
    PhoneInventory::from_labels(&labels)
}

pub fn encode_gmm(set: &GmmHmmSet) -> Vec<u8> {
    let mut e = Enc::new();
    e.buf.extend_from_slice(&encode_inventory(set.inventory()));
    e.u32(set.states_per_phone() as u32);
    e.u32(set.dim() as u32);
    e.f64s(set.var_floor());
    for hmm in set.models() {
        for s in 0..set.states_per_phone() {
            let st = &hmm.states[s];
            e.u32(st.components.len() as u32);
            for c in &st.components {
                e.f64(c.weight);
                e.f64s(&c.mean);
                e.f64s(&c.var);
            }
            e.f64(hmm.log_self[s]);
            e.f64(hmm.log_fwd[s]);
        }
    }
    e.buf
}

pub fn decode_gmm(bytes: &[u8]) -> Result<GmmHmmSet> {
    let mut d = Dec::new(bytes);
    let n_phones = d.u32()? as usize;
    let labels: Vec<String> = (0..n_phones).map(|_| d.string()).collect::<Result<_>>()?;
    let inventory = PhoneInventory::from_labels(&labels)?;
    let spp = d.u32()? as usize;
    let dim = d.u32()? as usize;
    let var_floor = d.f64s()?;
    let mut models = Vec::with_capacity(n_phones);
    for _ in 0..n_phones {
        let mut states = Vec::with_capacity(spp);
        let mut log_self = Vec::with_capacity(spp);
        let mut log_fwd = Vec::with_capacity(spp);
        for _ in 0..spp {
            let n_comps = d.u32()? as usize;
            let mut components = Vec::with_capacity(n_comps);
            for _ in 0..n_comps {
                let weight = d.f64()?;
                let mean = d.f64s()?;
                let var = d.f64s()?;
                if mean.len() != dim || var.len() != dim {
                    return Err(Error::MalformedHeader {
                        what: "gmm section",
                        detail: "component dimension mismatch".into(),
                    });
                }
                components.push(GmmComponent { weight, mean, var });
            }
            states.push(GmmState { components });
            log_self.push(d.f64()?);
            log_fwd.push(d.f64()?);
        }
        models.push(PhoneHmm {
            states,
            log_self,
            log_fwd,
        });
    }
    GmmHmmSet::from_parts(inventory, spp, dim, models, var_floor)
}

pub fn encode_lm(lm: &BiphoneLm) -> Vec<u8> {
    let mut e = Enc::new();
    e.u32(lm.n_phones() as u32);
    e.mat(lm.log_prob_matrix());
    e.buf
}

pub fn decode_lm(bytes: &[u8]) -> Result<BiphoneLm> {
    let mut d = Dec::new(bytes);
    let n = d.u32()? as usize;
    let m = d.mat()?;
    BiphoneLm::from_matrix(n, m)
}

pub fn encode_lda(lda: &LdaTransform) -> Vec<u8> {
    let mut e = Enc::new();
    e.f64s(&lda.mean);
    e.mat(&lda.matrix);
    e.f64s(&lda.eigenvalues);
    e.buf
}

pub fn decode_lda(bytes: &[u8]) -> Result<LdaTransform> {
    let mut d = Dec::new(bytes);
    Ok(LdaTransform {
        mean: d.f64s()?,
        matrix: d.mat()?,
        eigenvalues: d.f64s()?,
    })
}

pub fn encode_norm(norm: &Normalizer) -> Vec<u8> {
    let mut e = Enc::new();
    e.f64s(&norm.mean);
    e.f64s(&norm.inv_std);
    e.buf
}

pub fn decode_norm(bytes: &[u8]) -> Result<Normalizer> {
    let mut d = Dec::new(bytes);
    Ok(Normalizer {
        mean: d.f64s()?,
        inv_std: d.f64s()?,
    })
}

pub fn encode_dnn(dnn: &DnnModel) -> Vec<u8> {
    let mut e = Enc::new();
    e.u32(dnn.layer_sizes.len() as u32);
    for &s in &dnn.layer_sizes {
        e.u32(s as u32);
    }
    for w in &dnn.weights {
        e.mat(w);
    }
    for b in &dnn.biases {
        e.f64s(b);
    }
    e.f64s(&dnn.epoch_losses);
    e.buf
}

pub fn encode_priors(priors: &[f64]) -> Vec<u8> {
    let mut e = Enc::new();
    e.f64s(priors);
    e.buf
}

pub fn decode_priors(bytes: &[u8]) -> Result<Vec<f64>> {
    Dec::new(bytes).f64s()
}

pub fn decode_dnn(bytes: &[u8], priors: Vec<f64>) -> Result<DnnModel> {
    let mut d = Dec::new(bytes);
    let n_layers = d.u32()? as usize;
    let layer_sizes: Vec<usize> = (0..n_layers)
        .map(|_| d.u32().map(|v| v as usize))
        .collect::<Result<_>>()?;
    let mut weights = Vec::with_capacity(n_layers.saturating_sub(1));
    for _ in 0..n_layers.saturating_sub(1) {
        weights.push(d.mat()?);
    }
    let mut biases = Vec::with_capacity(n_layers.saturating_sub(1));
    for _ in 0..n_layers.saturating_sub(1) {
        biases.push(d.f64s()?);
    }
    let epoch_losses = d.f64s()?;
    if priors.len() != *layer_sizes.last().unwrap_or(&0) {
        return Err(Error::ShapeMismatch {
            what: "dnn priors".into(),
            expected: format!("{} entries", layer_sizes.last().unwrap_or(&0)),
            actual: format!("{}", priors.len()),
        });
    }
    Ok(DnnModel {
        layer_sizes,
        weights,
        biases,
        priors,
        epoch_losses,
    })
}

pub fn encode_basis(b: &SpatialBasis) -> Vec<u8> {
    let mut e = Enc::new();
    e.f64s(&b.mean);
    e.mat(&b.projection);
    e.mat(&b.rotation);
    e.f64s(&b.eigenvalues);
    e.buf
}

pub fn decode_basis(bytes: &[u8]) -> Result<SpatialBasis> {
    let mut d = Dec::new(bytes);
    Ok(SpatialBasis {
        mean: d.f64s()?,
        projection: d.mat()?,
        rotation: d.mat()?,
        eigenvalues: d.f64s()?,
    })
}

pub fn encode_nmf(n: &NmfFactors) -> Vec<u8> {
    let mut e = Enc::new();
    e.mat(&n.w);
    e.mat(&n.g);
    e.f64s(&n.objective);
    e.buf
}

pub fn decode_nmf(bytes: &[u8]) -> Result<NmfFactors> {
    let mut d = Dec::new(bytes);
    Ok(NmfFactors {
        w: d.mat()?,
        g: d.mat()?,
        objective: d.f64s()?,
    })
}

/// META section: sorted "key=value" lines.
pub fn encode_meta(entries: &BTreeMap<String, String>) -> Vec<u8> {
    let mut text = String::new();
    for (k, v) in entries {
        text.push_str(&format!("{k}={v}\n"));
    }
    text.into_bytes()
}

pub fn decode_meta(bytes: &[u8]) -> Result<BTreeMap<String, String>> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::MalformedHeader {
        what: "meta section",
        detail: "non-utf8".into(),
    })?;
    let mut out = BTreeMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            out.insert(k.to_string(), v.to_string());
        }
    }
    Ok(out)
}
