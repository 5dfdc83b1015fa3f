//! Window co-occurrence counts, PPMI weights and cosine similarity.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Co-occurrence window over a key sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// Every run of `n` consecutive keys; shorter sequences form one window.
    Sliding(usize),
    /// One window per sequence.
    Whole,
}

/// Set-based window membership counts over integer keys.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CooccurrenceCounts {
    /// Windows containing key `i`.
    pub unit_count: BTreeMap<usize, u64>,
    /// Windows containing both `i` and `j`, keyed with `i < j`.
    pub pair_count: BTreeMap<(usize, usize), u64>,
    /// Total number of windows.
    pub window_total: u64,
}

impl CooccurrenceCounts {
    /// Merge `other` into `self`. Associative and commutative.
    pub fn merge(&mut self, other: CooccurrenceCounts) {
        for (k, v) in other.unit_count {
            *self.unit_count.entry(k).or_default() += v;
        }
        for (k, v) in other.pair_count {
            *self.pair_count.entry(k).or_default() += v;
        }
        self.window_total += other.window_total;
    }

    pub fn unit(&self, i: usize) -> u64 {
        self.unit_count.get(&i).copied().unwrap_or(0)
    }

    pub fn pair(&self, i: usize, j: usize) -> u64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.pair_count.get(&key).copied().unwrap_or(0)
    }

    /// Debug dump: `unit<TAB>i<TAB>n` and `pair<TAB>i<TAB>j<TAB>n` rows then `windows<TAB>W`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.unit_count {
            let _ = writeln!(out, "unit\t{k}\t{v}");
        }
        for ((i, j), v) in &self.pair_count {
            let _ = writeln!(out, "pair\t{i}\t{j}\t{v}");
        }
        let _ = writeln!(out, "windows\t{}", self.window_total);
        out
    }

    fn add_window(&mut self, keys: &mut Vec<usize>) {
        keys.sort_unstable();
        keys.dedup();
        self.window_total += 1;
        for (a, &i) in keys.iter().enumerate() {
            *self.unit_count.entry(i).or_default() += 1;
            for &j in &keys[a + 1..] {
                *self.pair_count.entry((i, j)).or_default() += 1;
            }
        }
    }
}

fn count_shard(sequences: &[Vec<usize>], window: Window) -> CooccurrenceCounts {
    let mut counts = CooccurrenceCounts::default();
    let mut buf = Vec::new();
    for seq in sequences {
        if seq.is_empty() {
            continue;
        }
        let width = match window {
            Window::Whole => seq.len(),
            Window::Sliding(n) => n.min(seq.len()),
        };
        for start in 0..=seq.len() - width {
            buf.clear();
            buf.extend_from_slice(&seq[start..start + width]);
            counts.add_window(&mut buf);
        }
    }
    counts
}

const SHARD: usize = 512;

/// Count windows over `sequences`. Empty sequences contribute no window.
pub fn count_cooccurrence(sequences: &[Vec<usize>], window: Window) -> Result<CooccurrenceCounts> {
    if window == Window::Sliding(0) {
        return Err(Error::Stats("window width must be positive".into()));
    }
    let shards: Vec<&[Vec<usize>]> = sequences.chunks(SHARD).collect();
    let partial = crate::par::map_slice(&shards, |s| count_shard(s, window));
    let mut total = CooccurrenceCounts::default();
    for p in partial {
        total.merge(p);
    }
    Ok(total)
}

/// `max(0, ln(N(i,j) W / (N(i) N(j))))` for each co-occurring pair, sorted
/// by `(i, j)` with `i < j`; non-positive weights are dropped.
pub fn ppmi(counts: &CooccurrenceCounts) -> Result<Vec<(usize, usize, f64)>> {
    if counts.window_total == 0 {
        return Err(Error::Stats("PPMI needs at least one window".into()));
    }
    let w = counts.window_total as f64;
    let mut out = Vec::new();
    for (&(i, j), &nij) in &counts.pair_count {
        if nij == 0 {
            continue;
        }
        let pmi = ((nij as f64 * w) / (counts.unit(i) as f64 * counts.unit(j) as f64)).ln();
        if pmi > 0.0 {
            out.push((i, j, pmi));
        }
    }
    Ok(out)
}

/// Cosine similarity; zero when either norm is below 1e-12.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Stats(format!(
            "cosine of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    let (nu, nv) = (nu.sqrt(), nv.sqrt());
    if nu < 1e-12 || nv < 1e-12 {
        return Ok(0.0);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(seqs: &[&[&str]]) -> Vec<Vec<usize>> {
        let mut vocab: Vec<String> = Vec::new();
        seqs.iter()
            .map(|s| {
                s.iter()
                    .map(|w| match vocab.iter().position(|v| v == w) {
                        Some(i) => i,
                        None => {
                            vocab.push(w.to_string());
                            vocab.len() - 1
                        }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn whole_window_counts() {
        // a=0 b=1 c=2
        let c = count_cooccurrence(&ids(&[&["a", "b"], &["a", "c"]]), Window::Whole).unwrap();
        assert_eq!(c.window_total, 2);
        assert_eq!((c.unit(0), c.unit(1), c.pair(0, 1)), (2, 1, 1));
        assert!(ppmi(&c).unwrap().is_empty());
    }

    #[test]
    fn ppmi_hand_value() {
        let c = count_cooccurrence(&ids(&[&["a", "b"], &["a", "b"], &["c", "d"]]), Window::Whole).unwrap();
        let w = ppmi(&c).unwrap();
        assert_eq!(w[0].0, 0);
        assert_eq!(w[0].1, 1);
        assert!((w[0].2 - 1.5f64.ln()).abs() < 1e-15);
        assert!((w[0].2 - 0.4055).abs() < 1e-4);
        // c,d: ln(1*3/(1*1)) = ln 3
        assert!((w[1].2 - 3f64.ln()).abs() < 1e-15);
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn degenerate_inputs() {
        let c = count_cooccurrence(&[], Window::Whole).unwrap();
        assert_eq!(c, CooccurrenceCounts::default());
        assert!(ppmi(&c).is_err());
        assert!(count_cooccurrence(&[vec![0]], Window::Sliding(0)).is_err());
        let short = count_cooccurrence(&[vec![0, 1, 2]], Window::Sliding(5)).unwrap();
        assert_eq!(short.window_total, 1);
        assert_eq!(short.pair(0, 2), 1);
    }

    #[test]
    fn sliding_windows_are_set_based() {
        // windows [0,1,0], [1,0,2]
        let c = count_cooccurrence(&[vec![0, 1, 0, 2]], Window::Sliding(3)).unwrap();
        assert_eq!(c.window_total, 2);
        assert_eq!(c.unit(0), 2);
        assert_eq!(c.pair(0, 1), 2);
        assert_eq!(c.pair(0, 2), 1);
        assert_eq!(c.pair(1, 2), 1);
        assert!(c.to_tsv().ends_with("windows\t2\n"));
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn ppmi_positive_and_ordered(
            seqs in proptest::collection::vec(proptest::collection::vec(0usize..8, 0..7), 1..20),
            width in 1usize..6,
        ) {
            let c = count_cooccurrence(&seqs, Window::Sliding(width)).unwrap();
            for (&(i, j), &n) in &c.pair_count {
                prop_assert!(i < j);
                prop_assert!(n <= c.unit(i).min(c.unit(j)));
            }
            if c.window_total > 0 {
                for (i, j, w) in ppmi(&c).unwrap() {
                    prop_assert!(i < j && w > 0.0 && w.is_finite());
                }
            }
        }

        #[test]
        fn sharded_merge_matches_single_pass(
            seqs in proptest::collection::vec(proptest::collection::vec(0usize..6, 0..6), 0..30),
            cut in 0usize..30,
        ) {
            let cut = cut.min(seqs.len());
            let mut merged = count_shard(&seqs[..cut], Window::Whole);
            merged.merge(count_shard(&seqs[cut..], Window::Whole));
            prop_assert_eq!(merged, count_shard(&seqs, Window::Whole));
        }

        #[test]
        fn cosine_scale_invariant(
            u in proptest::collection::vec(-5.0f64..5.0, 4),
            v in proptest::collection::vec(-5.0f64..5.0, 4),
            alpha in 0.01f64..100.0,
        ) {
            let scaled: Vec<f64> = u.iter().map(|x| x * alpha).collect();
            let a = cosine(&scaled, &v).unwrap();
            let b = cosine(&u, &v).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((b - cosine(&v, &u).unwrap()).abs() < 1e-15);
        }
    }
}
