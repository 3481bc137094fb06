//! Training lattices: linear phone chains, optional-silence insertion with
//! a parametric skip probability, path enumeration and text serialization.

mod decode;
mod lm;

pub use decode::{compile_decode_graph, viterbi_decode, DecodeGraph, DecodeResult};
pub use lm::{train_biphone_lm, BiphoneLm, Smoothing};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{PhoneId, PhoneInventory, PhoneSequence};
use crate::error::{Error, Result};

/// A lattice arc; `label == None` is an epsilon (no phone consumed).
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeArc {
    pub from: usize,
    pub to: usize,
    pub label: Option<PhoneId>,
    pub log_prob: f64,
    pub id: usize,
}

/// Acyclic weighted label graph with unique start and end nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    n_nodes: usize,
    arcs: Vec<LatticeArc>,
    start: usize,
    end: usize,
}

impl Lattice {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn arcs(&self) -> &[LatticeArc] {
        &self.arcs
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn arcs_from(&self, node: usize) -> impl Iterator<Item = &LatticeArc> {
        self.arcs.iter().filter(move |a| a.from == node)
    }

    /// Every node reachable from start and co-reachable from end, and the
    /// arc graph acyclic.
    pub fn is_well_formed(&self) -> bool {
        let mut fwd = vec![false; self.n_nodes];
        let mut stack = vec![self.start];
        while let Some(n) = stack.pop() {
            if fwd[n] {
                continue;
            }
            fwd[n] = true;
            for a in self.arcs_from(n) {
                stack.push(a.to);
            }
        }
        let mut bwd = vec![false; self.n_nodes];
        stack.push(self.end);
        while let Some(n) = stack.pop() {
            if bwd[n] {
                continue;
            }
            bwd[n] = true;
            for a in self.arcs.iter().filter(|a| a.to == n) {
                stack.push(a.from);
            }
        }
        if !(0..self.n_nodes).all(|n| fwd[n] && bwd[n]) {
            return false;
        }
        // Topological check via Kahn's algorithm.
        let mut indeg = vec![0usize; self.n_nodes];
        for a in &self.arcs {
            indeg[a.to] += 1;
        }
        let mut queue: Vec<usize> = (0..self.n_nodes).filter(|&n| indeg[n] == 0).collect();
        let mut seen = 0;
        while let Some(n) = queue.pop() {
            seen += 1;
            for a in self.arcs_from(n) {
                indeg[a.to] -= 1;
                if indeg[a.to] == 0 {
                    queue.push(a.to);
                }
            }
        }
        seen == self.n_nodes
    }

    /// All start→end paths as (labels, total log-probability, arc ids).
    /// Intended for small lattices (tests and invariants).
    pub fn enumerate_paths(&self) -> Vec<(Vec<PhoneId>, f64, Vec<usize>)> {
        let mut out = Vec::new();
        let mut labels = Vec::new();
        let mut arc_ids = Vec::new();
        self.dfs(self.start, 0.0, &mut labels, &mut arc_ids, &mut out);
        out
    }

    fn dfs(
        &self,
        node: usize,
        logp: f64,
        labels: &mut Vec<PhoneId>,
        arc_ids: &mut Vec<usize>,
        out: &mut Vec<(Vec<PhoneId>, f64, Vec<usize>)>,
    ) {
        if node == self.end {
            out.push((labels.clone(), logp, arc_ids.clone()));
            return;
        }
        for a in self.arcs_from(node) {
            if let Some(l) = a.label {
                labels.push(l);
            }
            arc_ids.push(a.id);
            self.dfs(a.to, logp + a.log_prob, labels, arc_ids, out);
            arc_ids.pop();
            if a.label.is_some() {
                labels.pop();
            }
        }
    }

    /// Text serialization: "LAT1 n_nodes n_arcs start end" then one line
    /// per arc "src dst label logp id" with `<eps>` for epsilon.
    pub fn write_text(&self, inv: &PhoneInventory, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        writeln!(
            w,
            "LAT1 {} {} {} {}",
            self.n_nodes,
            self.arcs.len(),
            self.start,
            self.end
        )
        .map_err(|e| Error::io(path, e))?;
        for a in &self.arcs {
            let label = a.label.map(|p| inv.label(p)).unwrap_or("<eps>");
            writeln!(w, "{} {} {} {:.17e} {}", a.from, a.to, label, a.log_prob, a.id)
                .map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_text(inv: &PhoneInventory, path: impl AsRef<Path>) -> Result<Lattice> {
        let path = path.as_ref();
        let r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::EmptyPayload { what: "lattice" })?;
        let header = header.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "LAT1" {
            return Err(Error::MalformedHeader {
                what: "lattice",
                detail: header.clone(),
            });
        }
        let parse = |s: &str, line: usize| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                detail: format!("bad integer '{s}'"),
            })
        };
        let n_nodes = parse(fields[1], 1)?;
        let n_arcs = parse(fields[2], 1)?;
        let start = parse(fields[3], 1)?;
        let end = parse(fields[4], 1)?;
        let mut arcs = Vec::with_capacity(n_arcs);
        for (lineno, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    detail: "expected 'src dst label logp id'".into(),
                });
            }
            let label = if f[2] == "<eps>" {
                None
            } else {
                Some(inv.id(f[2])?)
            };
            arcs.push(LatticeArc {
                from: parse(f[0], lineno + 1)?,
                to: parse(f[1], lineno + 1)?,
                label,
                log_prob: f[3].parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    detail: format!("bad log-probability '{}'", f[3]),
                })?,
                id: parse(f[4], lineno + 1)?,
            });
        }
        if arcs.len() != n_arcs {
            return Err(Error::ShapeMismatch {
                what: "lattice arcs".into(),
                expected: format!("{n_arcs}"),
                actual: format!("{}", arcs.len()),
            });
        }
        Ok(Lattice {
            n_nodes,
            arcs,
            start,
            end,
        })
    }
}

/// A single chain of phone arcs, each with log-probability 0.
pub fn linear_lattice(seq: &PhoneSequence) -> Result<Lattice> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let arcs: Vec<LatticeArc> = seq
        .phones()
        .iter()
        .enumerate()
        .map(|(i, &p)| LatticeArc {
            from: i,
            to: i + 1,
            label: Some(p),
            log_prob: 0.0,
            id: i,
        })
        .collect();
    Ok(Lattice {
        n_nodes: seq.len() + 1,
        arcs,
        start: 0,
        end: seq.len(),
    })
}

/// Insert an optional silence before the first phone and after every
/// phone: each slot branches into an epsilon skip arc with probability
/// `skip_prob` and a silence arc with probability 1 − skip_prob.
/// Slots adjacent to an explicit silence phone are suppressed, so the
/// augmented lattice never accepts two silences in a row. `leading`
/// disables the slot ahead of the first phone when false.
pub fn insert_optional_silences(
    lat: &Lattice,
    skip_prob: f64,
    sil: PhoneId,
    leading: bool,
) -> Result<Lattice> {
    if !(skip_prob > 0.0 && skip_prob < 1.0) {
        return Err(Error::InvalidParam(format!(
            "skip probability {skip_prob} outside (0, 1)"
        )));
    }
    // Require a linear chain: exactly one labeled arc out of every
    // non-final node.
    let mut phones = Vec::new();
    let mut node = lat.start;
    while node != lat.end {
        let outgoing: Vec<&LatticeArc> = lat.arcs_from(node).collect();
        if outgoing.len() != 1 || outgoing[0].label.is_none() {
            return Err(Error::InvalidParam(
                "optional silences require a linear phone lattice".into(),
            ));
        }
        phones.push(outgoing[0].label.unwrap());
        node = outgoing[0].to;
    }

    let log_skip = skip_prob.ln();
    let log_sil = (1.0 - skip_prob).ln();
    let mut arcs = Vec::new();
    let mut next_node = 1usize;
    let mut next_id = 0usize;
    let mut cur = 0usize;

    let slot = |arcs: &mut Vec<LatticeArc>, cur: &mut usize, next_node: &mut usize, next_id: &mut usize| {
        let v = *next_node;
        *next_node += 1;
        arcs.push(LatticeArc {
            from: *cur,
            to: v,
            label: None,
            log_prob: log_skip,
            id: *next_id,
        });
        *next_id += 1;
        arcs.push(LatticeArc {
            from: *cur,
            to: v,
            label: Some(sil),
            log_prob: log_sil,
            id: *next_id,
        });
        *next_id += 1;
        *cur = v;
    };

    if leading && phones[0] != sil {
        slot(&mut arcs, &mut cur, &mut next_node, &mut next_id);
    }
    for (i, &p) in phones.iter().enumerate() {
        let v = next_node;
        next_node += 1;
        arcs.push(LatticeArc {
            from: cur,
            to: v,
            label: Some(p),
            log_prob: 0.0,
            id: next_id,
        });
        next_id += 1;
        cur = v;
        let next_is_sil = phones.get(i + 1).map(|&q| q == sil).unwrap_or(false);
        if p != sil && !next_is_sil {
            slot(&mut arcs, &mut cur, &mut next_node, &mut next_id);
        }
    }

    Ok(Lattice {
        n_nodes: next_node,
        arcs,
        start: 0,
        end: cur,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PhoneInventory;

    fn inv() -> PhoneInventory {
        PhoneInventory::from_labels(&["a", "b", "c", "sil"]).unwrap()
    }

    fn seq(inv: &PhoneInventory, labels: &[&str]) -> PhoneSequence {
        PhoneSequence::from_labels(inv, labels).unwrap()
    }

    #[test]
    fn linear_single_phone() {
        let inv = inv();
        let lat = linear_lattice(&seq(&inv, &["a"])).unwrap();
        assert_eq!(lat.n_nodes(), 2);
        assert_eq!(lat.arcs().len(), 1);
        assert!(lat.is_well_formed());
    }

    #[test]
    fn linear_has_single_path_in_order() {
        let inv = inv();
        let lat = linear_lattice(&seq(&inv, &["a", "b", "c"])).unwrap();
        let paths = lat.enumerate_paths();
        assert_eq!(paths.len(), 1);
        let labels: Vec<&str> = paths[0].0.iter().map(|&p| inv.label(p)).collect();
        assert_eq!(labels, vec!["a", "b", "c"]);
        assert_eq!(paths[0].1, 0.0);
    }

    #[test]
    fn empty_sequence_rejected() {
        let inv = inv();
        assert!(linear_lattice(&PhoneSequence::from_labels(&inv, &[] as &[&str]).unwrap()).is_err());
    }

    #[test]
    fn optional_silence_language_single_phone() {
        let inv = inv();
        let sil = inv.silence();
        let lat = linear_lattice(&seq(&inv, &["a"])).unwrap();
        let aug = insert_optional_silences(&lat, 0.9, sil, true).unwrap();
        assert!(aug.is_well_formed());
        let paths = aug.enumerate_paths();
        assert_eq!(paths.len(), 4);
        let mut strings: Vec<(String, f64)> = paths
            .iter()
            .map(|(labels, logp, _)| {
                let s: Vec<&str> = labels.iter().map(|&p| inv.label(p)).collect();
                (s.join(" "), logp.exp())
            })
            .collect();
        strings.sort_by(|x, y| x.0.cmp(&y.0));
        let find = |s: &str| strings.iter().find(|(k, _)| k == s).map(|(_, p)| *p);
        assert!((find("a").unwrap() - 0.81).abs() < 1e-12);
        assert!((find("sil a").unwrap() - 0.09).abs() < 1e-12);
        assert!((find("a sil").unwrap() - 0.09).abs() < 1e-12);
        assert!((find("sil a sil").unwrap() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn optional_silence_probabilities_sum_to_one() {
        let inv = inv();
        let sil = inv.silence();
        for n in 1..=6 {
            let labels: Vec<&str> = (0..n).map(|i| ["a", "b", "c"][i % 3]).collect();
            let lat = linear_lattice(&seq(&inv, &labels)).unwrap();
            let aug = insert_optional_silences(&lat, 0.9, sil, true).unwrap();
            let paths = aug.enumerate_paths();
            assert_eq!(paths.len(), 1 << (n + 1));
            let total: f64 = paths.iter().map(|(_, logp, _)| logp.exp()).sum();
            assert!((total - 1.0).abs() < 1e-12, "n={n} total={total}");
        }
    }

    #[test]
    fn stripping_silence_recovers_original() {
        let inv = inv();
        let sil = inv.silence();
        let original = seq(&inv, &["a", "b"]);
        let lat = linear_lattice(&original).unwrap();
        let aug = insert_optional_silences(&lat, 0.7, sil, true).unwrap();
        for (labels, _, _) in aug.enumerate_paths() {
            let stripped: Vec<PhoneId> = labels.into_iter().filter(|&p| p != sil).collect();
            assert_eq!(stripped, original.phones());
        }
    }

    #[test]
    fn skip_probability_validated() {
        let inv = inv();
        let lat = linear_lattice(&seq(&inv, &["a"])).unwrap();
        assert!(insert_optional_silences(&lat, 0.0, inv.silence(), true).is_err());
        assert!(insert_optional_silences(&lat, 1.0, inv.silence(), true).is_err());
    }

    #[test]
    fn no_leading_silence_flag() {
        let inv = inv();
        let lat = linear_lattice(&seq(&inv, &["a"])).unwrap();
        let aug = insert_optional_silences(&lat, 0.9, inv.silence(), false).unwrap();
        // Only the trailing slot: {a, a sil}.
        assert_eq!(aug.enumerate_paths().len(), 2);
    }

    #[test]
    fn no_adjacent_double_silences() {
        // Transcript already carrying boundary silences: slots only
        // appear between non-silence phones.
        let inv = inv();
        let sil = inv.silence();
        let lat = linear_lattice(&seq(&inv, &["sil", "a", "b", "sil"])).unwrap();
        let aug = insert_optional_silences(&lat, 0.9, sil, true).unwrap();
        for (labels, _, _) in aug.enumerate_paths() {
            for w in labels.windows(2) {
                assert!(!(w[0] == sil && w[1] == sil), "double silence accepted");
            }
        }
        // Exactly one eligible slot (between a and b) → 2 strings.
        assert_eq!(aug.enumerate_paths().len(), 2);
    }

    #[test]
    fn text_roundtrip() {
        let inv = inv();
        let lat = linear_lattice(&seq(&inv, &["a", "b"])).unwrap();
        let aug = insert_optional_silences(&lat, 0.9, inv.silence(), true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.lat");
        aug.write_text(&inv, &path).unwrap();
        let back = Lattice::read_text(&inv, &path).unwrap();
        assert_eq!(back, aug);
    }
}
