use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::corpus::Token;

pub const DEFAULT_K: usize = 2;

/// A nondeterministic finite-state automaton over tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fsa {
    num_states: usize,
    initial: usize,
    accepting: BTreeSet<usize>,
    transitions: BTreeSet<(usize, Token, usize)>,
}

impl Fsa {
    /// One initial, non-accepting state and no transitions.
    pub fn empty() -> Fsa {
        Fsa {
            num_states: 1,
            initial: 0,
            accepting: BTreeSet::new(),
            transitions: BTreeSet::new(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn accepting(&self) -> &BTreeSet<usize> {
        &self.accepting
    }

    pub fn transitions(&self) -> &BTreeSet<(usize, Token, usize)> {
        &self.transitions
    }

    pub fn accepts<T: AsRef<str>>(&self, word: &[T]) -> bool {
        let mut current = BTreeSet::from([self.initial]);
        for sym in word {
            let sym = sym.as_ref();
            current = self
                .transitions
                .iter()
                .filter(|(from, label, _)| current.contains(from) && label.as_str() == sym)
                .map(|(_, _, to)| *to)
                .collect();
            if current.is_empty() {
                return false;
            }
        }
        current.iter().any(|s| self.accepting.contains(s))
    }
}

/// Prefix tree acceptor: children per state and final-state flags.
struct Pta {
    children: Vec<BTreeMap<Token, usize>>,
    accepting: Vec<bool>,
}

impl Pta {
    fn build(traces: &[Vec<Token>]) -> Pta {
        let mut pta = Pta {
            children: vec![BTreeMap::new()],
            accepting: vec![false],
        };
        for trace in traces {
            let mut s = 0;
            for t in trace {
                s = match pta.children[s].get(t) {
                    Some(&c) => c,
                    None => {
                        pta.children.push(BTreeMap::new());
                        pta.accepting.push(false);
                        let c = pta.children.len() - 1;
                        pta.children[s].insert(t.clone(), c);
                        c
                    }
                };
            }
            pta.accepting[s] = true;
        }
        pta
    }
}

type Tail = (Vec<Token>, bool);

/// Quotient automaton over state classes.
struct Quotient {
    out: Vec<BTreeSet<(Token, usize)>>,
    accepting: Vec<bool>,
}

fn quotient(pta: &Pta, class: &[usize], num_classes: usize) -> Quotient {
    let mut q = Quotient {
        out: vec![BTreeSet::new(); num_classes],
        accepting: vec![false; num_classes],
    };
    for (s, kids) in pta.children.iter().enumerate() {
        for (t, &c) in kids {
            q.out[class[s]].insert((t.clone(), class[c]));
        }
        if pta.accepting[s] {
            q.accepting[class[s]] = true;
        }
    }
    q
}

/// Every label sequence of length at most `k` readable from `state`, each
/// paired with whether it stops in an accepting state.
fn tails(q: &Quotient, state: usize, k: usize) -> BTreeSet<Tail> {
    let mut out = BTreeSet::new();
    let mut frontier: Vec<(usize, Vec<Token>)> = vec![(state, Vec::new())];
    for depth in 0..=k {
        let mut next = Vec::new();
        for (s, path) in frontier {
            out.insert((path.clone(), q.accepting[s]));
            if depth < k {
                for (t, to) in &q.out[s] {
                    let mut p = path.clone();
                    p.push(t.clone());
                    next.push((*to, p));
                }
            }
        }
        next.sort();
        next.dedup();
        frontier = next;
    }
    out
}

/// k-Tails: builds the prefix tree acceptor of `traces` and repeatedly merges
/// states whose length-`k` tails in the current automaton coincide, until no
/// two states share their tails.
pub fn ktails(traces: &[Vec<Token>], k: usize) -> Fsa {
    if traces.is_empty() {
        return Fsa::empty();
    }
    let pta = Pta::build(traces);
    let n = pta.children.len();
    let mut class: Vec<usize> = (0..n).collect();
    let mut num_classes = n;
    loop {
        let q = quotient(&pta, &class, num_classes);
        let mut by_tail: BTreeMap<BTreeSet<Tail>, usize> = BTreeMap::new();
        let mut remap = vec![0; num_classes];
        // Classes are numbered by first PTA state, so the root keeps class 0.
        for (c, slot) in remap.iter_mut().enumerate() {
            let next = by_tail.len();
            *slot = *by_tail.entry(tails(&q, c, k)).or_insert(next);
        }
        if by_tail.len() == num_classes {
            return canonical(&q, class[0]);
        }
        num_classes = by_tail.len();
        // Renumber in order of first appearance to keep class[0] == 0.
        let mut order: BTreeMap<usize, usize> = BTreeMap::new();
        for s in 0..n {
            let c = remap[class[s]];
            let next = order.len();
            order.entry(c).or_insert(next);
        }
        for c in class.iter_mut() {
            *c = order[&remap[*c]];
        }
    }
}

/// Renumbers states in breadth-first order from the initial state, following
/// transitions in label order; unreachable states are dropped.
fn canonical(q: &Quotient, initial: usize) -> Fsa {
    let mut id: BTreeMap<usize, usize> = BTreeMap::new();
    let mut queue = VecDeque::from([initial]);
    id.insert(initial, 0);
    while let Some(s) = queue.pop_front() {
        for (_, to) in &q.out[s] {
            if !id.contains_key(to) {
                let next = id.len();
                id.insert(*to, next);
                queue.push_back(*to);
            }
        }
    }
    let transitions = id
        .keys()
        .flat_map(|&s| q.out[s].iter().map(move |(t, to)| (s, t, to)))
        .map(|(s, t, to)| (id[&s], t.clone(), id[to]))
        .collect();
    let accepting = id
        .iter()
        .filter(|(s, _)| q.accepting[**s])
        .map(|(_, i)| *i)
        .collect();
    Fsa {
        num_states: id.len(),
        initial: 0,
        accepting,
        transitions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(s: &str) -> Vec<Token> {
        s.chars()
            .map(|c| Token::parse(&c.to_string()).unwrap())
            .collect()
    }

    fn word(s: &str) -> Vec<String> {
        s.chars().map(|c| c.to_string()).collect()
    }

    #[test]
    fn single_trace_is_a_chain() {
        let fsa = ktails(&[seq("ab")], 2);
        assert_eq!(fsa.num_states(), 3);
        assert_eq!(fsa.transitions().len(), 2);
        assert!(fsa.accepts(&word("ab")));
        assert!(!fsa.accepts(&word("a")));
        assert!(!fsa.accepts(&word("abb")));
    }

    #[test]
    fn one_tails_generalize_to_a_loop() {
        let fsa = ktails(&[seq("ab"), seq("aab"), seq("aaab")], 1);
        let label = |s: &str| Token::parse(s).unwrap();
        assert!(fsa
            .transitions()
            .iter()
            .any(|(f, t, to)| f == to && *t == label("a")));
        for w in ["ab", "aab", "aaab", "aaaaaaab"] {
            assert!(fsa.accepts(&word(w)), "{w}");
        }
        for w in ["b", "a", "aba", "abb", ""] {
            assert!(!fsa.accepts(&word(w)), "{w}");
        }
    }

    #[test]
    fn empty_input_gives_empty_language() {
        let fsa = ktails(&[], 2);
        assert_eq!(fsa, Fsa::empty());
        assert!(!fsa.accepts::<&str>(&[]));
    }

    fn arb_traces() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec("[abc]{1,5}", 1..6)
    }

    proptest! {
        #[test]
        fn accepts_all_training_traces(traces in arb_traces(), k in 1usize..4) {
            let seqs: Vec<Vec<Token>> = traces.iter().map(|s| seq(s)).collect();
            let fsa = ktails(&seqs, k);
            for t in &traces {
                prop_assert!(fsa.accepts(&word(t)));
            }
        }

        #[test]
        fn large_k_keeps_the_exact_language(traces in arb_traces(), probe in "[abc]{0,6}") {
            let seqs: Vec<Vec<Token>> = traces.iter().map(|s| seq(s)).collect();
            let k = traces.iter().map(String::len).max().unwrap();
            let fsa = ktails(&seqs, k);
            prop_assert_eq!(fsa.accepts(&word(&probe)), traces.contains(&probe));
        }
    }
}
