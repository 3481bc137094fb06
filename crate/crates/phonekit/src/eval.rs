//! Phone error rate scoring, the relative-degradation metrics, and the
//! cross-validation report shape with its text writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::corpus::{PhoneId, PhoneSequence};
use crate::error::{Error, Result};

/// Edit-distance breakdown of one hypothesis against one reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerResult {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_length: usize,
}

impl PerResult {
    /// 100 · (S + D + I) / reference length.
    pub fn per(&self) -> f64 {
        100.0 * (self.substitutions + self.deletions + self.insertions) as f64
            / self.ref_length as f64
    }

    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Minimum-edit-distance alignment with unit costs, silence stripped from
/// both sides first. Ties between operations resolve substitution, then
/// deletion, then insertion.
pub fn phone_error_rate(
    reference: &PhoneSequence,
    hypothesis: &PhoneSequence,
    sil: PhoneId,
) -> Result<PerResult> {
    let r = reference.strip_silence(sil);
    let h = hypothesis.strip_silence(sil);
    if r.is_empty() {
        return Err(Error::InvalidParam(
            "reference is empty after silence stripping".into(),
        ));
    }
    let rp = r.phones();
    let hp = h.phones();
    let n = rp.len();
    let m = hp.len();

    // dist[i][j]: cost of aligning first i reference and j hypothesis.
    let mut dist = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in dist.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        dist[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = dist[i - 1][j - 1] + usize::from(rp[i - 1] != hp[j - 1]);
            let del = dist[i - 1][j] + 1;
            let ins = dist[i][j - 1] + 1;
            dist[i][j] = sub.min(del).min(ins);
        }
    }

    // Backtrace with the fixed preference order.
    let mut i = n;
    let mut j = m;
    let mut subs = 0;
    let mut dels = 0;
    let mut inss = 0;
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let cost = usize::from(rp[i - 1] != hp[j - 1]);
            if dist[i][j] == dist[i - 1][j - 1] + cost {
                subs += cost;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dist[i][j] == dist[i - 1][j] + 1 {
            dels += 1;
            i -= 1;
            continue;
        }
        inss += 1;
        j -= 1;
    }
    Ok(PerResult {
        substitutions: subs,
        deletions: dels,
        insertions: inss,
        ref_length: n,
    })
}

/// 100 · (mixed − single) / mixed: the relative-increase convention the
/// reference results follow.
pub fn relative_degradation(per_single: f64, per_mixed: f64) -> Result<f64> {
    if per_mixed <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "relative degradation needs per_mixed > 0, got {per_mixed}"
        )));
    }
    Ok(100.0 * (per_mixed - per_single) / per_mixed)
}

/// The complementary convention: 100 · (mixed − single) / single.
pub fn relative_increase_over_single(per_single: f64, per_mixed: f64) -> Result<f64> {
    if per_single <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "relative increase needs per_single > 0, got {per_single}"
        )));
    }
    Ok(100.0 * (per_mixed - per_single) / per_single)
}

/// 100 · (baseline − new) / baseline.
pub fn relative_reduction(per_baseline: f64, per_new: f64) -> Result<f64> {
    if per_baseline <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "relative reduction needs per_baseline > 0, got {per_baseline}"
        )));
    }
    Ok(100.0 * (per_baseline - per_new) / per_baseline)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); `None` for fewer than
/// two values.
pub fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum System {
    Asr,
    Nsr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    Single,
    Mixed,
}

/// Per-cut PER table for {ASR, NSR} × {single, mixed} with aggregate
/// mean and sample SD per row, mirroring the cross-validation layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub n_cuts: usize,
    /// Row-major: [asr_single, asr_mixed, nsr_single, nsr_mixed], each a
    /// per-cut list; a missing cell is NaN and marked in the text output.
    pub rows: [Vec<f64>; 4],
    pub seed: u64,
}

fn row_index(system: System, condition: Condition) -> usize {
    match (system, condition) {
        (System::Asr, Condition::Single) => 0,
        (System::Asr, Condition::Mixed) => 1,
        (System::Nsr, Condition::Single) => 2,
        (System::Nsr, Condition::Mixed) => 3,
    }
}

pub const ROW_NAMES: [&str; 4] = [
    "ASR single",
    "ASR mixed",
    "NSR single",
    "NSR mixed",
];

impl CvReport {
    pub fn new(n_cuts: usize, seed: u64) -> CvReport {
        CvReport {
            n_cuts,
            rows: std::array::from_fn(|_| vec![f64::NAN; n_cuts]),
            seed,
        }
    }

    pub fn set(&mut self, system: System, condition: Condition, cut: usize, per: f64) {
        self.rows[row_index(system, condition)][cut] = per;
    }

    pub fn row(&self, system: System, condition: Condition) -> &[f64] {
        &self.rows[row_index(system, condition)]
    }

    fn complete_cells(row: &[f64]) -> Vec<f64> {
        row.iter().cloned().filter(|v| v.is_finite()).collect()
    }

    pub fn average(&self, system: System, condition: Condition) -> Option<f64> {
        let cells = Self::complete_cells(self.row(system, condition));
        if cells.is_empty() {
            None
        } else {
            Some(mean(&cells))
        }
    }

    pub fn sd(&self, system: System, condition: Condition) -> Option<f64> {
        sample_sd(&Self::complete_cells(self.row(system, condition)))
    }

    pub fn any_missing(&self) -> bool {
        self.rows.iter().any(|r| r.iter().any(|v| !v.is_finite()))
    }

    /// Single→mixed degradation of a system's average PER under both
    /// conventions: (relative to mixed, relative to single). Entries are
    /// `None` when the needed average is missing or zero.
    pub fn degradation(&self, system: System) -> (Option<f64>, Option<f64>) {
        let single = self.average(system, Condition::Single);
        let mixed = self.average(system, Condition::Mixed);
        match (single, mixed) {
            (Some(s), Some(m)) => (
                relative_degradation(s, m).ok(),
                relative_increase_over_single(s, m).ok(),
            ),
            _ => (None, None),
        }
    }

    /// Aligned table mirroring the cross-validation layout: one row per
    /// system/condition, one column per cut, then average and SD, plus
    /// the single→mixed degradation summary under both conventions.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<12}", "Cut"));
        for c in 1..=self.n_cuts {
            out.push_str(&format!("{c:>8}"));
        }
        out.push_str(&format!("{:>9}{:>7}\n", "Average", "SD"));
        for (i, name) in ROW_NAMES.iter().enumerate() {
            out.push_str(&format!("{name:<12}"));
            for v in &self.rows[i] {
                if v.is_finite() {
                    out.push_str(&format!("{v:>8.2}"));
                } else {
                    out.push_str(&format!("{:>8}", "-"));
                }
            }
            let cells = Self::complete_cells(&self.rows[i]);
            if cells.is_empty() {
                out.push_str(&format!("{:>9}", "-"));
            } else {
                out.push_str(&format!("{:>9.2}", mean(&cells)));
            }
            match sample_sd(&cells) {
                Some(sd) => out.push_str(&format!("{sd:>7.2}\n")),
                None => out.push_str(&format!("{:>7}\n", "-")),
            }
        }
        for (system, label) in [(System::Asr, "ASR"), (System::Nsr, "NSR")] {
            let (of_mixed, of_single) = self.degradation(system);
            if let Some(d) = of_mixed {
                let alt = of_single
                    .map(|v| format!(" ({v:.1}% of single)"))
                    .unwrap_or_default();
                out.push_str(&format!(
                    "{label} single→mixed degradation: {d:.1}% of mixed{alt}\n"
                ));
            }
        }
        out
    }

    /// Machine-readable lines: "system condition cut per" plus aggregate
    /// lines, deterministic ordering.
    pub fn render_machine(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("n_cuts {}\n", self.n_cuts));
        let keys = [
            ("asr", "single"),
            ("asr", "mixed"),
            ("nsr", "single"),
            ("nsr", "mixed"),
        ];
        for (i, (sys, cond)) in keys.iter().enumerate() {
            for (cut, v) in self.rows[i].iter().enumerate() {
                if v.is_finite() {
                    out.push_str(&format!("per {sys} {cond} {} {v:.6}\n", cut + 1));
                } else {
                    out.push_str(&format!("per {sys} {cond} {} missing\n", cut + 1));
                }
            }
            let cells = Self::complete_cells(&self.rows[i]);
            if !cells.is_empty() {
                out.push_str(&format!("avg {sys} {cond} {:.6}\n", mean(&cells)));
            }
            if let Some(sd) = sample_sd(&cells) {
                out.push_str(&format!("sd {sys} {cond} {sd:.6}\n"));
            }
        }
        for (system, name) in [(System::Asr, "asr"), (System::Nsr, "nsr")] {
            let (of_mixed, of_single) = self.degradation(system);
            if let Some(d) = of_mixed {
                out.push_str(&format!("degradation {name} of_mixed {d:.6}\n"));
            }
            if let Some(d) = of_single {
                out.push_str(&format!("degradation {name} of_single {d:.6}\n"));
            }
        }
        out
    }

    pub fn write_files(&self, table_path: impl AsRef<Path>, machine_path: impl AsRef<Path>) -> Result<()> {
        let tp = table_path.as_ref();
        let mut w = BufWriter::new(File::create(tp).map_err(|e| Error::io(tp, e))?);
        w.write_all(self.render_table().as_bytes())
            .map_err(|e| Error::io(tp, e))?;
        w.flush().map_err(|e| Error::io(tp, e))?;
        let mp = machine_path.as_ref();
        let mut w = BufWriter::new(File::create(mp).map_err(|e| Error::io(mp, e))?);
        w.write_all(self.render_machine().as_bytes())
            .map_err(|e| Error::io(mp, e))?;
        w.flush().map_err(|e| Error::io(mp, e))
    }
}
