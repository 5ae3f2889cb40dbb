//! Pairwise term distance matrices: co-occurrence based, and linear blends.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::{escape, unescape, Corpus, Token};
use crate::error::{Error, Result};

/// Default forward window for co-occurrence counting.
pub const DEFAULT_COOC_WINDOW: usize = 1;

/// Dense symmetric distance matrix over an ordered vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    vocab: Vec<Token>,
    index: HashMap<Token, usize>,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Checks symmetry, the zero diagonal and bounds.
    pub fn from_dense(vocab: Vec<Token>, entries: Vec<f64>) -> Result<DistanceMatrix> {
        let n = vocab.len();
        if entries.len() != n * n {
            return Err(Error::Format(format!(
                "{} entries for a vocabulary of {n}",
                entries.len()
            )));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::Format(format!("non-zero diagonal at {i}")));
            }
            for j in 0..i {
                let d = entries[i * n + j];
                if !(0.0..=1.0).contains(&d) || d != entries[j * n + i] {
                    return Err(Error::Format(format!("bad entry at ({i}, {j}): {d}")));
                }
            }
        }
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if vocab.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Format("duplicate vocabulary entry".into()));
        }
        Ok(DistanceMatrix {
            vocab,
            index,
            entries,
        })
    }

    pub fn vocab(&self) -> &[Token] {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn index_of(&self, t: &Token) -> Option<usize> {
        self.index.get(t).copied()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.vocab.len() + j]
    }

    pub fn distance(&self, a: &Token, b: &Token) -> Option<f64> {
        Some(self.get(self.index_of(a)?, self.index_of(b)?))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.vocab.len();
        &self.entries[i * n..(i + 1) * n]
    }

    /// Text dump: vocabulary size, one escaped token per line, then the lower
    /// triangle (diagonal included) row by row.
    pub fn to_text(&self) -> String {
        let n = self.vocab.len();
        let mut out = format!("{n}\n");
        for t in &self.vocab {
            out.push_str(&escape(t));
            out.push('\n');
        }
        for i in 0..n {
            for j in 0..=i {
                if j > 0 {
                    out.push(' ');
                }
                write!(out, "{:?}", self.get(i, j)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<DistanceMatrix> {
        let mut lines = text.lines().enumerate();
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header".into()))?;
        let n: usize = header
            .trim()
            .parse()
            .map_err(|e| parse_err(1, format!("vocabulary size: {e}")))?;
        let mut vocab = Vec::with_capacity(n);
        for _ in 0..n {
            let (i, line) = lines
                .next()
                .ok_or_else(|| parse_err(0, "truncated vocabulary".into()))?;
            vocab.push(unescape(line.trim()).map_err(|e| parse_err(i + 1, e.to_string()))?);
        }
        let mut entries = vec![0.0; n * n];
        for r in 0..n {
            let (i, line) = lines
                .next()
                .ok_or_else(|| parse_err(0, "truncated matrix".into()))?;
            let row = line
                .split_whitespace()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| parse_err(i + 1, e.to_string()))?;
            if row.len() != r + 1 {
                return Err(parse_err(i + 1, format!("expected {} values", r + 1)));
            }
            for (c, d) in row.into_iter().enumerate() {
                entries[r * n + c] = d;
                entries[c * n + r] = d;
            }
        }
        DistanceMatrix::from_dense(vocab, entries)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<DistanceMatrix> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DistanceMatrix::from_text(&text)
    }
}

/// Co-occurrence distances over `vocab`.
///
/// `follow(A, B)` is the fraction of occurrences of `A` that have `B` within
/// the next `window` positions of the same trace. The entry for `(A, B)` is
/// the mean of `1 - follow(A, B)` and `1 - follow(B, A)`.
pub fn cooccurrence_distance_matrix(
    corpus: &Corpus,
    vocab: &[Token],
    window: usize,
) -> Result<DistanceMatrix> {
    if window == 0 {
        return Err(Error::Config(
            "co-occurrence window must be positive".into(),
        ));
    }
    let n = vocab.len();
    let index: HashMap<&Token, usize> = vocab.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let mut occurrences = vec![0u64; n];
    let mut follows = vec![0u64; n * n];
    let mut seen: Vec<usize> = Vec::new();
    for trace in corpus.traces() {
        let ids: Vec<Option<usize>> = trace
            .tokens()
            .iter()
            .map(|t| index.get(t).copied())
            .collect();
        for (p, a) in ids.iter().enumerate() {
            let Some(a) = *a else { continue };
            occurrences[a] += 1;
            seen.clear();
            for b in ids.iter().skip(p + 1).take(window).flatten() {
                if !seen.contains(b) {
                    seen.push(*b);
                    follows[a * n + b] += 1;
                }
            }
        }
    }
    if let Some(i) = occurrences.iter().position(|&c| c == 0) {
        return Err(Error::ZeroOccurrences(vocab[i].to_string()));
    }
    let mut entries = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..a {
            let ab = follows[a * n + b] as f64 / occurrences[a] as f64;
            let ba = follows[b * n + a] as f64 / occurrences[b] as f64;
            let d = ((1.0 - ab) + (1.0 - ba)) / 2.0;
            entries[a * n + b] = d;
            entries[b * n + a] = d;
        }
    }
    DistanceMatrix::from_dense(vocab.to_vec(), entries)
}

/// Entrywise `alpha * a + (1 - alpha) * b`.
pub fn blend(a: &DistanceMatrix, b: &DistanceMatrix, alpha: f64) -> Result<DistanceMatrix> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
    }
    if a.vocab != b.vocab {
        return Err(Error::VocabMismatch);
    }
    let entries = a
        .entries
        .iter()
        .zip(&b.entries)
        .map(|(x, y)| {
            if alpha == 1.0 {
                *x
            } else if alpha == 0.0 {
                *y
            } else {
                (alpha * x + (1.0 - alpha) * y).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(DistanceMatrix {
        vocab: a.vocab.clone(),
        index: a.index.clone(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Trace;
    use proptest::prelude::*;

    fn tok(s: &str) -> Token {
        Token::parse(s).unwrap()
    }

    fn corpus(traces: &[&[&str]]) -> Corpus {
        Corpus::from_traces(traces.iter().map(|t| Trace::parse("p", t).unwrap()))
    }

    #[test]
    fn adjacent_pair() {
        let c = corpus(&[&["a", "b"][..]; 10]);
        let m = cooccurrence_distance_matrix(&c, &[tok("a"), tok("b")], 1).unwrap();
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 0), 0.5);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn distant_pair_is_one() {
        let c = corpus(&[&["a", "x", "x", "b"]]);
        let m = cooccurrence_distance_matrix(&c, &[tok("a"), tok("b"), tok("x")], 1).unwrap();
        assert_eq!(m.distance(&tok("a"), &tok("b")), Some(1.0));
        let m = cooccurrence_distance_matrix(&c, &[tok("a"), tok("b"), tok("x")], 3).unwrap();
        assert_eq!(m.distance(&tok("a"), &tok("b")), Some(0.5));
    }

    #[test]
    fn repeated_follower_counts_once_per_occurrence() {
        let c = corpus(&[&["a", "b", "b"]]);
        let m = cooccurrence_distance_matrix(&c, &[tok("a"), tok("b")], 2).unwrap();
        assert_eq!(m.get(0, 1), 0.5);
    }

    #[test]
    fn missing_token_is_an_error() {
        let c = corpus(&[&["a", "b"]]);
        assert!(matches!(
            cooccurrence_distance_matrix(&c, &[tok("a"), tok("z")], 1),
            Err(Error::ZeroOccurrences(t)) if t == "z"
        ));
    }

    #[test]
    fn reversal_changes_entries_when_counts_differ() {
        // Normalizing by the source token's count makes the entry depend on
        // direction when the two tokens occur a different number of times.
        let fwd = corpus(&[&["a", "b", "b"]]);
        let rev = corpus(&[&["b", "b", "a"]]);
        let v = [tok("a"), tok("b")];
        let f = cooccurrence_distance_matrix(&fwd, &v, 1).unwrap();
        let r = cooccurrence_distance_matrix(&rev, &v, 1).unwrap();
        assert_eq!(f.get(0, 1), 0.5);
        assert_eq!(r.get(0, 1), 0.75);
    }

    #[test]
    fn blend_examples() {
        let v = vec![tok("a"), tok("b")];
        let a = DistanceMatrix::from_dense(v.clone(), vec![0.0, 0.4, 0.4, 0.0]).unwrap();
        let b = DistanceMatrix::from_dense(v.clone(), vec![0.0, 0.8, 0.8, 0.0]).unwrap();
        assert_eq!(blend(&a, &b, 1.0).unwrap(), a);
        assert_eq!(blend(&a, &b, 0.0).unwrap(), b);
        assert!((blend(&a, &b, 0.75).unwrap().get(0, 1) - 0.5).abs() < 1e-15);
        let other = DistanceMatrix::from_dense(vec![tok("a"), tok("c")], vec![0.0; 4]).unwrap();
        assert!(matches!(blend(&a, &other, 0.5), Err(Error::VocabMismatch)));
        assert!(blend(&a, &b, 1.5).is_err());
    }

    #[test]
    fn dump_format() {
        let v = vec![tok("a"), tok("b -> c")];
        let m = DistanceMatrix::from_dense(v, vec![0.0, 0.25, 0.25, 0.0]).unwrap();
        assert_eq!(m.to_text(), "2\na\nb#->#c\n0.0\n0.25 0.0\n");
        assert!(DistanceMatrix::from_text("2\na\nb\n0.0\n0.5\n").is_err());
    }

    fn arb_corpus() -> impl Strategy<Value = Corpus> {
        let tok = prop::sample::select(vec!["a", "b", "c", "d", "e"]);
        prop::collection::vec(prop::collection::vec(tok, 1..10), 1..8).prop_map(|traces| {
            Corpus::from_traces(traces.into_iter().map(|t| Trace::parse("p", &t).unwrap()))
        })
    }

    fn reversed(c: &Corpus) -> Corpus {
        Corpus::from_traces(c.traces().map(|t| {
            let mut toks = t.tokens().to_vec();
            toks.reverse();
            Trace::new(t.procedure(), toks).unwrap()
        }))
    }

    proptest! {
        #[test]
        fn matrix_is_well_formed(c in arb_corpus(), window in 1usize..4, alpha in 0.0f64..=1.0) {
            let vocab: Vec<Token> = c.vocabulary().into_iter().collect();
            let m = cooccurrence_distance_matrix(&c, &vocab, window).unwrap();
            let back = DistanceMatrix::from_text(&m.to_text()).unwrap();
            prop_assert_eq!(&back, &m);
            let flipped: Vec<f64> = m.entries.iter().map(|x| 1.0 - x).collect();
            let mut flipped = flipped;
            for i in 0..vocab.len() { flipped[i * vocab.len() + i] = 0.0; }
            let other = DistanceMatrix::from_dense(vocab.clone(), flipped).unwrap();
            let b = blend(&m, &other, alpha).unwrap();
            for i in 0..b.len() {
                prop_assert_eq!(b.get(i, i), 0.0);
                for j in 0..b.len() {
                    prop_assert_eq!(b.get(i, j), b.get(j, i));
                    prop_assert!((0.0..=1.0).contains(&b.get(i, j)));
                }
            }
        }

        // Direction-symmetric for adjacent pairs whenever both tokens occur
        // equally often.
        #[test]
        fn reversal_invariance_for_balanced_pairs(c in arb_corpus()) {
            let window = 1;
            let vocab: Vec<Token> = c.vocabulary().into_iter().collect();
            let fwd = cooccurrence_distance_matrix(&c, &vocab, window).unwrap();
            let rev = cooccurrence_distance_matrix(&reversed(&c), &vocab, window).unwrap();
            let mut counts: HashMap<&Token, usize> = HashMap::new();
            for t in c.traces().flat_map(|t| t.tokens()) { *counts.entry(t).or_default() += 1; }
            for i in 0..vocab.len() {
                for j in 0..vocab.len() {
                    if counts[&vocab[i]] == counts[&vocab[j]] {
                        prop_assert!((fwd.get(i, j) - rev.get(i, j)).abs() < 1e-12);
                    }
                }
            }
        }

        // Inserting `b` right after an `a`, in a corpus where `b` never
        // precedes `a`, can only bring the pair closer.
        #[test]
        fn more_follows_never_increase_distance(
            traces in prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["a", "c", "d"]), 1..8), 1..6),
            pick in any::<prop::sample::Index>(),
        ) {
            let base = Corpus::from_traces(traces.iter().map(|t| {
                let mut t = t.clone();
                t.push("b");
                Trace::parse("p", &t).unwrap()
            }));
            let a_positions: Vec<(usize, usize)> = base.traces().enumerate()
                .flat_map(|(ti, t)| t.tokens().iter().enumerate().filter(|(_, x)| x.as_str() == "a").map(move |(p, _)| (ti, p)))
                .collect();
            prop_assume!(!a_positions.is_empty());
            let (ti, p) = a_positions[pick.index(a_positions.len())];
            let grown = Corpus::from_traces(base.traces().enumerate().map(|(i, t)| {
                let mut toks = t.tokens().to_vec();
                if i == ti { toks.insert(p + 1, tok("b")); }
                Trace::new(t.procedure(), toks).unwrap()
            }));
            let vocab: Vec<Token> = ["a", "b", "c", "d"].iter().map(|s| tok(s)).filter(|t| base.vocabulary().contains(t)).collect();
            let before = cooccurrence_distance_matrix(&base, &vocab, 1).unwrap();
            let after = cooccurrence_distance_matrix(&grown, &vocab, 1).unwrap();
            let (a, b) = (tok("a"), tok("b"));
            prop_assert!(after.distance(&a, &b).unwrap() <= before.distance(&a, &b).unwrap() + 1e-12);
        }
    }
}
