use std::fmt::Write as _;

use super::{Fsa, SeqModel};
use crate::corpus::json_string;

fn state_name(s: usize, width: usize) -> String {
    format!("q{s:0width$}")
}

/// DOT digraph for an automaton. State names are zero-padded so that their
/// lexicographic and numeric orders agree.
pub fn fsa_to_dot(fsa: &Fsa) -> String {
    let width = (fsa.num_states().max(1) - 1).to_string().len();
    let mut out = String::from("digraph fsa {\n  rankdir=LR;\n");
    for s in 0..fsa.num_states() {
        let shape = if fsa.accepting().contains(&s) {
            "doublecircle"
        } else {
            "circle"
        };
        let style = if s == fsa.initial() {
            ", style=bold"
        } else {
            ""
        };
        writeln!(out, "  {} [shape={shape}{style}];", state_name(s, width)).unwrap();
    }
    for (from, label, to) in fsa.transitions() {
        writeln!(
            out,
            "  {} -> {} [label={}];",
            state_name(*from, width),
            state_name(*to, width),
            json_string(label.as_str())
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

/// DOT digraph for a sequence model, probabilities to three decimals.
pub fn seq_model_to_dot(model: &SeqModel) -> String {
    let mut out = String::from("digraph markov {\n");
    for s in model.states() {
        writeln!(out, "  {};", json_string(s.as_str())).unwrap();
    }
    for (from, row) in model.transitions() {
        for (to, p) in row {
            writeln!(
                out,
                "  {} -> {} [label=\"{p:.3}\"];",
                json_string(from.as_str()),
                json_string(to.as_str())
            )
            .unwrap();
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;
    use crate::mining::{fit_seq_model, ktails};

    fn count(dot: &str) -> (usize, usize) {
        let body: Vec<&str> = dot
            .lines()
            .filter(|l| l.starts_with("  ") && !l.contains("rankdir"))
            .collect();
        let edges = body
            .iter()
            .filter(|l| l.contains("->") && l.contains("[label="))
            .count();
        (body.len() - edges, edges)
    }

    #[test]
    fn empty_language() {
        let dot = fsa_to_dot(&Fsa::empty());
        assert_eq!(count(&dot), (1, 0));
        assert!(dot.starts_with("digraph fsa {"));
    }

    #[test]
    fn chain() {
        let t: Vec<Token> = ["a", "b"]
            .iter()
            .map(|s| Token::parse(s).unwrap())
            .collect();
        let dot = fsa_to_dot(&ktails(&[t], 2));
        assert_eq!(count(&dot), (3, 2));
        let edges: Vec<&str> = dot.lines().filter(|l| l.contains(" -> ")).collect();
        assert_eq!(
            edges,
            ["  q0 -> q1 [label=\"a\"];", "  q1 -> q2 [label=\"b\"];"]
        );
        assert!(dot.contains("q2 [shape=doublecircle]"));
    }

    #[test]
    fn zero_padding_keeps_order() {
        let t: Vec<Token> = (0..11)
            .map(|i| Token::parse(&format!("t{i}")).unwrap())
            .collect();
        let dot = fsa_to_dot(&ktails(&[t], 1));
        let nodes: Vec<&str> = dot.lines().filter(|l| l.contains("shape=")).collect();
        let mut sorted = nodes.clone();
        sorted.sort();
        assert_eq!(nodes, sorted);
        assert!(dot.contains("  q00 -> q01"));
    }

    #[test]
    fn probabilities_are_rounded() {
        let ne: Vec<Token> = ["$START", "n", "n != 0", "$END"]
            .iter()
            .map(|s| Token::parse(s).unwrap())
            .collect();
        let eq: Vec<Token> = ["$START", "n", "n == 0", "$END"]
            .iter()
            .map(|s| Token::parse(s).unwrap())
            .collect();
        let m = fit_seq_model(&[ne.clone(), ne, eq.clone(), eq.clone(), eq]);
        let dot = seq_model_to_dot(&m);
        assert!(dot.contains("\"n\" -> \"n != 0\" [label=\"0.400\"];"));
        assert!(dot.contains("\"n\" -> \"n == 0\" [label=\"0.600\"];"));
        assert_eq!(count(&dot).0, 5);
    }
}
