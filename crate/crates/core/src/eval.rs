//! Macro-averaged precision, recall and F1 with confusion matrices.
//!
//! Undefined ratios (0/0) count as 0, and every class of the label set
//! enters the macro mean whether or not it occurs.

use std::fmt::Write as _;
use std::path::Path;

use crate::nn::io::{fmt_real, parse_real};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub class_names: Vec<String>,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    /// Rows are gold classes, columns predictions.
    pub confusion: Vec<Vec<u64>>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics over `num_classes` classes. Class names default to indices.
pub fn macro_prf(gold: &[usize], pred: &[usize], num_classes: usize) -> Result<MetricsReport> {
    if gold.len() != pred.len() {
        return Err(Error::Eval(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Eval("no labels to evaluate".into()));
    }
    if let Some(bad) = gold.iter().chain(pred).find(|&&l| l >= num_classes) {
        return Err(Error::Eval(format!("label {bad} outside {num_classes} classes")));
    }
    let mut confusion = vec![vec![0u64; num_classes]; num_classes];
    for (&g, &p) in gold.iter().zip(pred) {
        confusion[g][p] += 1;
    }
    let mut per_class = Vec::with_capacity(num_classes);
    for c in 0..num_classes {
        let tp = confusion[c][c];
        let support: u64 = confusion[c].iter().sum();
        let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            support,
        });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / num_classes as f64;
    let trace: u64 = (0..num_classes).map(|c| confusion[c][c]).sum();
    Ok(MetricsReport {
        class_names: (0..num_classes).map(|c| c.to_string()).collect(),
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        accuracy: trace as f64 / gold.len() as f64,
        per_class,
        confusion,
    })
}

impl MetricsReport {
    pub fn with_class_names(mut self, names: &[String]) -> Self {
        if names.len() == self.per_class.len() {
            self.class_names = names.to_vec();
        }
        self
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("class\tprecision\trecall\tf1\tsupport\n");
        for (name, m) in self.class_names.iter().zip(&self.per_class) {
            let _ = writeln!(
                out,
                "{name}\t{}\t{}\t{}\t{}",
                fmt_real(m.precision),
                fmt_real(m.recall),
                fmt_real(m.f1),
                m.support
            );
        }
        let total: u64 = self.per_class.iter().map(|m| m.support).sum();
        let _ = writeln!(
            out,
            "macro\t{}\t{}\t{}\t{total}",
            fmt_real(self.macro_precision),
            fmt_real(self.macro_recall),
            fmt_real(self.macro_f1)
        );
        let _ = writeln!(out, "accuracy\t{}", fmt_real(self.accuracy));
        for (name, row) in self.class_names.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "confusion\t{name}\t{}", cells.join("\t"));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let bad = |n: usize, msg: &str| Error::Eval(format!("report line {n}: {msg}"));
        let num = |n: usize, s: &str| parse_real(s).map_err(|e| bad(n, &e));
        let int = |n: usize, s: &str| s.parse::<u64>().map_err(|_| bad(n, "bad count"));
        let mut report = MetricsReport {
            class_names: Vec::new(),
            per_class: Vec::new(),
            macro_precision: 0.0,
            macro_recall: 0.0,
            macro_f1: 0.0,
            accuracy: 0.0,
            confusion: Vec::new(),
        };
        let mut state = 0; // 0 classes, 1 after macro
        for (i, line) in text.lines().enumerate().skip(1) {
            let n = i + 1;
            let f: Vec<&str> = line.split('\t').collect();
            match (f[0], state) {
                ("macro", 0) if f.len() == 5 => {
                    report.macro_precision = num(n, f[1])?;
                    report.macro_recall = num(n, f[2])?;
                    report.macro_f1 = num(n, f[3])?;
                    state = 1;
                }
                ("accuracy", 1) if f.len() == 2 => report.accuracy = num(n, f[1])?,
                ("confusion", 1) if f.len() >= 2 => {
                    report.confusion.push(f[2..].iter().map(|s| int(n, s)).collect::<Result<_>>()?);
                }
                (name, 0) if f.len() == 5 => {
                    report.class_names.push(name.to_string());
                    report.per_class.push(ClassMetrics {
                        precision: num(n, f[1])?,
                        recall: num(n, f[2])?,
                        f1: num(n, f[3])?,
                        support: int(n, f[4])?,
                    });
                }
                _ => return Err(bad(n, "unexpected row")),
            }
        }
        Ok(report)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| class | precision | recall | f1 | support |\n|---|---|---|---|---|\n");
        for (name, m) in self.class_names.iter().zip(&self.per_class) {
            let _ = writeln!(
                out,
                "| {name} | {:.4} | {:.4} | {:.4} | {} |",
                m.precision, m.recall, m.f1, m.support
            );
        }
        let total: u64 = self.per_class.iter().map(|m| m.support).sum();
        let _ = writeln!(
            out,
            "| macro | {:.4} | {:.4} | {:.4} | {total} |",
            self.macro_precision, self.macro_recall, self.macro_f1
        );
        let _ = writeln!(out, "\naccuracy: {:.4}\n", self.accuracy);
        let _ = writeln!(out, "| gold \\ pred | {} |", self.class_names.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(self.class_names.len()));
        for (name, row) in self.class_names.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "| {name} | {} |", cells.join(" | "));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Markdown,
}

pub fn write_report(report: &MetricsReport, path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Tsv => report.to_tsv(),
        ReportFormat::Markdown => report.to_markdown(),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions() {
        let r = macro_prf(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!((r.macro_precision, r.macro_recall, r.macro_f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn absent_class_counts_as_zero() {
        let r = macro_prf(&[0, 1], &[0, 1], 3).unwrap();
        assert_eq!(r.per_class[2].f1, 0.0);
        assert!((r.macro_f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch() {
        assert!(macro_prf(&[0, 1], &[0], 2).is_err());
        assert!(macro_prf(&[0, 3], &[0, 1], 2).is_err());
    }

    #[test]
    fn reports_are_deterministic_and_parse_back() {
        let r = macro_prf(&[0, 0, 1, 1, 2], &[0, 1, 1, 1, 0], 3)
            .unwrap()
            .with_class_names(&["A".into(), "B".into(), "C".into()]);
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.md"), dir.path().join("b.md"));
        write_report(&r, &a, ReportFormat::Markdown).unwrap();
        write_report(&r, &b, ReportFormat::Markdown).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let md = std::fs::read_to_string(&a).unwrap();
        assert!(md.contains("| macro |"));
        assert_eq!(MetricsReport::from_tsv(&r.to_tsv()).unwrap(), r);
    }

    proptest! {
        #[test]
        fn permutation_invariant(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..60), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let (g, p): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
            let base = macro_prf(&g, &p, 4).unwrap();
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (g2, p2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
            let other = macro_prf(&g2, &p2, 4).unwrap();
            prop_assert_eq!(base.clone(), other);
            let trace: u64 = (0..4).map(|c| base.confusion[c][c]).sum();
            prop_assert_eq!(base.accuracy, trace as f64 / g.len() as f64);
            for (c, row) in base.confusion.iter().enumerate() {
                prop_assert_eq!(row.iter().sum::<u64>(), base.per_class[c].support);
            }
            for m in &base.per_class {
                prop_assert!((0.0..=1.0).contains(&m.f1));
            }
        }
    }
}
