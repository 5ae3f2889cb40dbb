use std::collections::BTreeMap;

use crate::corpus::Token;

/// First-order Markov model with token-labelled states and maximum-likelihood
/// transition probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqModel {
    counts: BTreeMap<Token, BTreeMap<Token, u64>>,
    trans: BTreeMap<Token, BTreeMap<Token, f64>>,
}

impl SeqModel {
    /// Outgoing rows; `$END` never has one.
    pub fn transitions(&self) -> &BTreeMap<Token, BTreeMap<Token, f64>> {
        &self.trans
    }

    pub fn counts(&self) -> &BTreeMap<Token, BTreeMap<Token, u64>> {
        &self.counts
    }

    pub fn probability(&self, from: &str, to: &str) -> f64 {
        self.trans
            .iter()
            .find(|(k, _)| k.as_str() == from)
            .and_then(|(_, row)| row.iter().find(|(k, _)| k.as_str() == to))
            .map_or(0.0, |(_, p)| *p)
    }

    /// Every state that appears as a source or target.
    pub fn states(&self) -> Vec<&Token> {
        let mut s: Vec<&Token> = self
            .trans
            .iter()
            .flat_map(|(from, row)| std::iter::once(from).chain(row.keys()))
            .collect();
        s.sort();
        s.dedup();
        s
    }

    /// Sum of log transition probabilities over `traces`.
    pub fn log_likelihood(&self, traces: &[Vec<Token>]) -> f64 {
        log_likelihood_with(&self.trans, traces)
    }
}

/// Log-likelihood of `traces` under an arbitrary transition table.
pub fn log_likelihood_with(
    trans: &BTreeMap<Token, BTreeMap<Token, f64>>,
    traces: &[Vec<Token>],
) -> f64 {
    traces
        .iter()
        .flat_map(|t| t.windows(2))
        .map(|w| {
            trans
                .get(&w[0])
                .and_then(|row| row.get(&w[1]))
                .map_or(f64::NEG_INFINITY, |p| p.ln())
        })
        .sum()
}

/// `P(u -> v) = count(u v) / count(u followed by anything)` over consecutive
/// token pairs.
pub fn fit_seq_model(traces: &[Vec<Token>]) -> SeqModel {
    let mut counts: BTreeMap<Token, BTreeMap<Token, u64>> = BTreeMap::new();
    for t in traces {
        for w in t.windows(2) {
            *counts
                .entry(w[0].clone())
                .or_default()
                .entry(w[1].clone())
                .or_default() += 1;
        }
    }
    let trans = counts
        .iter()
        .map(|(from, row)| {
            let total: u64 = row.values().sum();
            let probs = row
                .iter()
                .map(|(to, c)| (to.clone(), *c as f64 / total as f64))
                .collect();
            (from.clone(), probs)
        })
        .collect();
    SeqModel { counts, trans }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(items: &[&str]) -> Vec<Token> {
        items.iter().map(|s| Token::parse(s).unwrap()).collect()
    }

    #[test]
    fn single_trace() {
        let m = fit_seq_model(&[seq(&["$START", "a", "$END"])]);
        assert_eq!(m.probability("$START", "a"), 1.0);
        assert_eq!(m.probability("a", "$END"), 1.0);
        assert!(!m.transitions().contains_key(&Token::end()));
        assert_eq!(m.states().len(), 3);
    }

    #[test]
    fn branch_frequencies() {
        let ne = seq(&["$START", "dictNext", "dictNext != 0", "$END"]);
        let eq = seq(&["$START", "dictNext", "dictNext == 0", "$END"]);
        let traces = vec![ne.clone(), eq.clone(), ne, eq.clone(), eq];
        let m = fit_seq_model(&traces);
        assert_eq!(m.probability("dictNext", "dictNext != 0"), 0.4);
        assert_eq!(m.probability("dictNext", "dictNext == 0"), 0.6);
    }

    fn arb_traces() -> impl Strategy<Value = Vec<Vec<Token>>> {
        prop::collection::vec(
            prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 0..6),
            1..6,
        )
        .prop_map(|ts| {
            ts.into_iter()
                .map(|inner| {
                    let mut t = vec!["$START"];
                    t.extend(inner);
                    t.push("$END");
                    seq(&t)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn rows_are_distributions(traces in arb_traces()) {
            let m = fit_seq_model(&traces);
            for (from, row) in m.transitions() {
                prop_assert!(!from.is_end());
                let s: f64 = row.values().sum();
                prop_assert!((s - 1.0).abs() <= 1e-9);
            }
        }

        // Moving any probability mass within a row lowers the likelihood.
        #[test]
        fn mle_beats_perturbations(traces in arb_traces(), eps in 1e-3f64..0.05, pick in any::<prop::sample::Index>()) {
            let m = fit_seq_model(&traces);
            let base = m.log_likelihood(&traces);
            let rows: Vec<_> = m.transitions().iter().filter(|(_, r)| r.len() >= 2).collect();
            prop_assume!(!rows.is_empty());
            let (from, row) = rows[pick.index(rows.len())];
            let keys: Vec<&Token> = row.keys().collect();
            for (i, j) in [(0, 1), (1, 0)] {
                let mut t = m.transitions().clone();
                let r = t.get_mut(from).unwrap();
                let take = eps.min(r[keys[j]] / 2.0);
                *r.get_mut(keys[i]).unwrap() += take;
                *r.get_mut(keys[j]).unwrap() -= take;
                prop_assert!(log_likelihood_with(&t, &traces) < base);
            }
        }
    }
}
