//! Biphone language model with Witten-Bell smoothing.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{PhoneId, PhoneInventory, PhoneSequence};
use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    /// Raw maximum-likelihood counts; unseen bigrams get -inf.
    None,
    /// Witten-Bell interpolation with an add-one unigram backoff.
    #[default]
    WittenBell,
}

/// P(phone | previous phone) in the log domain, with sentence-begin and
/// sentence-end contexts. Histories: every phone plus begin; events: every
/// phone plus end.
#[derive(Debug, Clone)]
pub struct BiphoneLm {
    n_phones: usize,
    /// (n_phones + 1) histories × (n_phones + 1) events.
    log_prob: Mat,
}

pub const BEGIN_SYMBOL: &str = "<s>";
pub const END_SYMBOL: &str = "</s>";

impl BiphoneLm {
    pub fn n_phones(&self) -> usize {
        self.n_phones
    }

    /// The raw (n_phones + 1)² log-probability table.
    pub fn log_prob_matrix(&self) -> &Mat {
        &self.log_prob
    }

    pub fn from_matrix(n_phones: usize, log_prob: Mat) -> Result<BiphoneLm> {
        if log_prob.rows() != n_phones + 1 || log_prob.cols() != n_phones + 1 {
            return Err(Error::ShapeMismatch {
                what: "biphone lm".into(),
                expected: format!("{0}×{0}", n_phones + 1),
                actual: format!("{}×{}", log_prob.rows(), log_prob.cols()),
            });
        }
        Ok(BiphoneLm { n_phones, log_prob })
    }

    fn hist_index(&self, hist: Option<PhoneId>) -> usize {
        hist.map(|p| p.0).unwrap_or(self.n_phones)
    }

    fn event_index(&self, event: Option<PhoneId>) -> usize {
        event.map(|p| p.0).unwrap_or(self.n_phones)
    }

    /// log P(event | hist); `None` means sentence begin (as history) or
    /// sentence end (as event).
    pub fn log_prob(&self, hist: Option<PhoneId>, event: Option<PhoneId>) -> f64 {
        self.log_prob[(self.hist_index(hist), self.event_index(event))]
    }

    /// Each history's distribution over phones plus the end symbol must
    /// sum to one.
    pub fn check_normalization(&self, tol: f64) -> Result<()> {
        for h in 0..=self.n_phones {
            let total: f64 = (0..=self.n_phones)
                .map(|e| self.log_prob[(h, e)].exp())
                .sum();
            if (total - 1.0).abs() > tol {
                return Err(Error::Numeric {
                    what: "biphone lm",
                    detail: format!("history {h} sums to {total}"),
                });
            }
        }
        Ok(())
    }

    pub fn write_text(&self, inv: &PhoneInventory, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        for h in 0..=self.n_phones {
            let hist = if h == self.n_phones {
                BEGIN_SYMBOL
            } else {
                inv.label(PhoneId(h))
            };
            for e in 0..=self.n_phones {
                let event = if e == self.n_phones {
                    END_SYMBOL
                } else {
                    inv.label(PhoneId(e))
                };
                writeln!(w, "{hist} {event} {:.17e}", self.log_prob[(h, e)])
                    .map_err(|e| Error::io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_text(inv: &PhoneInventory, path: impl AsRef<Path>) -> Result<BiphoneLm> {
        let path = path.as_ref();
        let r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let n = inv.len();
        let mut log_prob = Mat::zeros(n + 1, n + 1);
        for v in log_prob.data_mut() {
            *v = f64::NEG_INFINITY;
        }
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
                    detail: "expected 'hist phone logp'".into(),
                });
            }
            let h = if f[0] == BEGIN_SYMBOL {
                n
            } else {
                inv.id(f[0])?.0
            };
            let e = if f[1] == END_SYMBOL { n } else { inv.id(f[1])?.0 };
            log_prob[(h, e)] = f[2].parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                detail: format!("bad log-probability '{}'", f[2]),
            })?;
        }
        Ok(BiphoneLm {
            n_phones: n,
            log_prob,
        })
    }
}

/// Estimate bigram phone probabilities, padding every transcript with
/// begin/end context.
pub fn train_biphone_lm(
    transcripts: &[PhoneSequence],
    inv: &PhoneInventory,
    smoothing: Smoothing,
) -> Result<BiphoneLm> {
    if transcripts.is_empty() || transcripts.iter().all(|t| t.is_empty()) {
        return Err(Error::InvalidParam("empty LM training corpus".into()));
    }
    let n = inv.len();
    let mut counts = Mat::zeros(n + 1, n + 1);
    let mut event_counts = vec![0.0f64; n + 1];
    for t in transcripts {
        if t.is_empty() {
            continue;
        }
        let mut hist = n; // begin
        for &p in t.phones() {
            counts[(hist, p.0)] += 1.0;
            event_counts[p.0] += 1.0;
            hist = p.0;
        }
        counts[(hist, n)] += 1.0;
        event_counts[n] += 1.0;
    }

    let total_events: f64 = event_counts.iter().sum();
    // Add-one unigram over phones plus end.
    let unigram: Vec<f64> = event_counts
        .iter()
        .map(|c| (c + 1.0) / (total_events + (n + 1) as f64))
        .collect();

    let mut log_prob = Mat::zeros(n + 1, n + 1);
    for h in 0..=n {
        let hist_total: f64 = (0..=n).map(|e| counts[(h, e)]).sum();
        let distinct = (0..=n).filter(|&e| counts[(h, e)] > 0.0).count() as f64;
        for e in 0..=n {
            let p = match smoothing {
                Smoothing::None => {
                    if hist_total > 0.0 {
                        counts[(h, e)] / hist_total
                    } else {
                        // Unseen history: fall back to the uniform
                        // distribution so rows stay normalized.
                        1.0 / (n + 1) as f64
                    }
                }
                Smoothing::WittenBell => {
                    if hist_total > 0.0 {
                        (counts[(h, e)] + distinct * unigram[e]) / (hist_total + distinct)
                    } else {
                        unigram[e]
                    }
                }
            };
            log_prob[(h, e)] = p.ln();
        }
    }
    Ok(BiphoneLm {
        n_phones: n,
        log_prob,
    })
}
