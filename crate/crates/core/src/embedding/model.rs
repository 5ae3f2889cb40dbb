use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Embedding, EmbeddingConfig};
use crate::corpus::{Corpus, Token};
use crate::error::{Error, Result};

/// Character n-grams of a token's word form: spaces become `#` and the form is
/// wrapped in `<` and `>`.
pub fn char_ngrams(token: &Token, min_n: usize, max_n: usize) -> Vec<String> {
    let form: Vec<char> = format!("<{}>", token.as_str().replace(' ', "#"))
        .chars()
        .collect();
    let mut out = Vec::new();
    for n in min_n..=max_n {
        if n > form.len() {
            break;
        }
        for w in form.windows(n) {
            out.push(w.iter().collect());
        }
    }
    out
}

/// Sparse gradient of the per-position skip-gram loss.
#[derive(Clone, Debug, Default)]
pub struct Gradient {
    /// `(input row, d loss / d row)`
    pub input: Vec<(usize, Vec<f64>)>,
    /// `(output row, d loss / d row)`
    pub output: Vec<(usize, Vec<f64>)>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Skip-gram with negative sampling.
///
/// Input rows hold one vector per word followed, for subword models, by one
/// vector per distinct character n-gram. A word's hidden vector is the mean of
/// its input rows. Output rows hold one context vector per word.
pub struct SkipGram {
    dim: usize,
    words: Vec<Token>,
    index: HashMap<Token, usize>,
    ngram_index: BTreeMap<String, usize>,
    components: Vec<Vec<usize>>,
    input: Vec<f64>,
    output: Vec<f64>,
    /// Cumulative unigram^0.75 distribution for negative draws.
    noise_cdf: Vec<f64>,
    rng: ChaCha8Rng,
}

impl SkipGram {
    pub fn new(corpus: &Corpus, cfg: &EmbeddingConfig) -> Result<SkipGram> {
        let mut counts: BTreeMap<Token, u64> = BTreeMap::new();
        for t in corpus.traces().flat_map(|t| t.tokens()) {
            *counts.entry(t.clone()).or_default() += 1;
        }
        if counts.len() < 2 {
            return Err(Error::VocabularyTooSmall(counts.len()));
        }
        let words: Vec<Token> = counts.keys().cloned().collect();
        let index: HashMap<Token, usize> = words
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();

        let mut ngram_index = BTreeMap::new();
        let mut components: Vec<Vec<usize>> = (0..words.len()).map(|i| vec![i]).collect();
        if cfg.subword {
            let grams: Vec<Vec<String>> = words
                .iter()
                .map(|w| char_ngrams(w, cfg.ngram_min, cfg.ngram_max))
                .collect();
            for g in grams.iter().flatten() {
                let next = ngram_index.len();
                ngram_index.entry(g.clone()).or_insert(next);
            }
            for (row, gs) in components.iter_mut().zip(&grams) {
                row.extend(gs.iter().map(|g| words.len() + ngram_index[g]));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let rows = words.len() + ngram_index.len();
        let scale = 0.5 / cfg.dim as f64;
        let input = (0..rows * cfg.dim)
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        let output = vec![0.0; words.len() * cfg.dim];

        let mut noise_cdf = Vec::with_capacity(words.len());
        let mut acc = 0.0;
        for w in &words {
            acc += (counts[w] as f64).powf(0.75);
            noise_cdf.push(acc);
        }
        noise_cdf.iter_mut().for_each(|x| *x /= acc);

        Ok(SkipGram {
            dim: cfg.dim,
            words,
            index,
            ngram_index,
            components,
            input,
            output,
            noise_cdf,
            rng,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[Token] {
        &self.words
    }

    pub fn word_id(&self, token: &Token) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Input rows composing word `w`.
    pub fn components(&self, w: usize) -> &[usize] {
        &self.components[w]
    }

    pub fn input_params(&mut self) -> &mut [f64] {
        &mut self.input
    }

    pub fn output_params(&mut self) -> &mut [f64] {
        &mut self.output
    }

    /// Replaces every parameter with a uniform draw from `[-scale, scale)`.
    pub fn randomize(&mut self, scale: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in self.input.iter_mut().chain(self.output.iter_mut()) {
            *x = rng.random_range(-scale..scale);
        }
    }

    fn in_row(&self, r: usize) -> &[f64] {
        &self.input[r * self.dim..(r + 1) * self.dim]
    }

    fn out_row(&self, w: usize) -> &[f64] {
        &self.output[w * self.dim..(w + 1) * self.dim]
    }

    pub fn hidden(&self, w: usize) -> Vec<f64> {
        let rows = &self.components[w];
        let mut h = vec![0.0; self.dim];
        for &r in rows {
            h.iter_mut().zip(self.in_row(r)).for_each(|(a, x)| *a += x);
        }
        let n = rows.len() as f64;
        h.iter_mut().for_each(|a| *a /= n);
        h
    }

    /// Loss of one centre position: for each `(context, negatives)` pair,
    /// `-ln σ(h·o_c) - Σ ln σ(-h·o_n)` with `h` the centre's hidden vector.
    pub fn position_loss(&self, center: usize, targets: &[(usize, Vec<usize>)]) -> f64 {
        let h = self.hidden(center);
        let mut loss = 0.0;
        for (ctx, negs) in targets {
            loss -= sigmoid(dot(&h, self.out_row(*ctx))).ln();
            for &n in negs {
                loss -= sigmoid(-dot(&h, self.out_row(n))).ln();
            }
        }
        loss
    }

    /// Analytic gradient of [`SkipGram::position_loss`].
    pub fn position_gradient(&self, center: usize, targets: &[(usize, Vec<usize>)]) -> Gradient {
        let h = self.hidden(center);
        let mut grad_h = vec![0.0; self.dim];
        let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut push = |w: usize, g: f64, grad_h: &mut Vec<f64>| {
            let o = self.out_row(w);
            grad_h.iter_mut().zip(o).for_each(|(a, x)| *a += g * x);
            let row = out.entry(w).or_insert_with(|| vec![0.0; self.dim]);
            row.iter_mut().zip(&h).for_each(|(a, x)| *a += g * x);
        };
        for (ctx, negs) in targets {
            let g = sigmoid(dot(&h, self.out_row(*ctx))) - 1.0;
            push(*ctx, g, &mut grad_h);
            for &n in negs {
                let g = sigmoid(dot(&h, self.out_row(n)));
                push(n, g, &mut grad_h);
            }
        }
        let rows = &self.components[center];
        let inv = 1.0 / rows.len() as f64;
        let mut input: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for &r in rows {
            let row = input.entry(r).or_insert_with(|| vec![0.0; self.dim]);
            row.iter_mut().zip(&grad_h).for_each(|(a, x)| *a += inv * x);
        }
        Gradient {
            input: input.into_iter().collect(),
            output: out.into_iter().collect(),
        }
    }

    fn apply(&mut self, grad: &Gradient, lr: f64) {
        let dim = self.dim;
        for (r, g) in &grad.output {
            let row = &mut self.output[r * dim..(r + 1) * dim];
            row.iter_mut().zip(g).for_each(|(p, x)| *p -= lr * x);
        }
        for (r, g) in &grad.input {
            let row = &mut self.input[r * dim..(r + 1) * dim];
            row.iter_mut().zip(g).for_each(|(p, x)| *p -= lr * x);
        }
    }

    fn draw_negative(&mut self, avoid: usize) -> Option<usize> {
        for _ in 0..8 {
            let u: f64 = self.rng.random();
            let w = self
                .noise_cdf
                .partition_point(|&c| c <= u)
                .min(self.words.len() - 1);
            if w != avoid {
                return Some(w);
            }
        }
        None
    }

    /// Plain SGD over the corpus, one update per centre position, learning
    /// rate decayed linearly over all epochs.
    pub fn train(&mut self, corpus: &Corpus, cfg: &EmbeddingConfig) {
        let sentences: Vec<Vec<usize>> = corpus
            .traces()
            .map(|t| t.tokens().iter().map(|x| self.index[x]).collect())
            .collect();
        let per_epoch: usize = sentences.iter().map(Vec::len).sum();
        let total = (per_epoch * cfg.epochs).max(1) as f64;
        let mut step = 0usize;
        let mut targets: Vec<(usize, Vec<usize>)> = Vec::new();
        for _ in 0..cfg.epochs {
            for s in &sentences {
                for (i, &center) in s.iter().enumerate() {
                    let lr = cfg.learning_rate * (1.0 - step as f64 / total).max(1e-4);
                    step += 1;
                    targets.clear();
                    let lo = i.saturating_sub(cfg.window);
                    let hi = (i + cfg.window).min(s.len() - 1);
                    for (j, &ctx) in s.iter().enumerate().take(hi + 1).skip(lo) {
                        if j == i {
                            continue;
                        }
                        let negs: Vec<usize> = (0..cfg.negatives)
                            .filter_map(|_| self.draw_negative(ctx))
                            .collect();
                        targets.push((ctx, negs));
                    }
                    if targets.is_empty() {
                        continue;
                    }
                    let grad = self.position_gradient(center, &targets);
                    self.apply(&grad, lr);
                }
            }
        }
    }

    pub fn into_embedding(self, config: EmbeddingConfig) -> Embedding {
        let vectors = (0..self.words.len())
            .map(|w| (self.words[w].clone(), self.hidden(w)))
            .collect();
        let ngrams = self
            .ngram_index
            .iter()
            .map(|(g, &i)| (g.clone(), self.in_row(self.words.len() + i).to_vec()))
            .collect();
        Embedding {
            vectors,
            ngrams,
            config,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ngrams_of_a_dataflow_token() {
        let t = Token::parse("a -> b").unwrap();
        let grams = char_ngrams(&t, 3, 3);
        assert_eq!(grams.first().unwrap(), "<a#");
        assert_eq!(grams.last().unwrap(), "#b>");
        assert_eq!(grams.len(), "<a#->#b>".len() - 2);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
    }
}
