//! Beam search over any next-token scorer.
//!
//! Hypotheses end at the end token or at `max_len` tokens. Ranking uses the
//! length-normalised log-probability (sum divided by token count, end token
//! included); ties go to the lexicographically smaller token sequence.

use std::cmp::Ordering;

use crate::error::Result;

pub trait StepScorer {
    /// Log-probabilities of every next token after `prefix`.
    fn log_probs(&self, prefix: &[usize]) -> Result<Vec<f64>>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub finished: bool,
}

impl Hypothesis {
    pub fn score(&self) -> f64 {
        if self.tokens.is_empty() {
            0.0
        } else {
            self.log_prob / self.tokens.len() as f64
        }
    }
}

fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score()
        .partial_cmp(&a.score())
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

fn extend(h: &Hypothesis, tok: usize, lp: f64, eos: usize, max_len: usize) -> Hypothesis {
    let mut tokens = h.tokens.clone();
    tokens.push(tok);
    Hypothesis {
        finished: tok == eos || tokens.len() >= max_len,
        tokens,
        log_prob: h.log_prob + lp,
    }
}

/// Up to `k` best hypotheses found with beam width `beam`.
pub fn beam_search<S: StepScorer>(scorer: &S, eos: usize, beam: usize, max_len: usize, k: usize) -> Result<Vec<Hypothesis>> {
    let beam = beam.max(1);
    let mut pool = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        finished: false,
    }];
    for _ in 0..max_len {
        if pool.iter().all(|h| h.finished) {
            break;
        }
        let mut next = Vec::new();
        for h in pool {
            if h.finished {
                next.push(h);
                continue;
            }
            for (tok, lp) in scorer.log_probs(&h.tokens)?.into_iter().enumerate() {
                next.push(extend(&h, tok, lp, eos, max_len));
            }
        }
        next.sort_by(rank);
        next.truncate(beam);
        pool = next;
    }
    pool.sort_by(rank);
    pool.truncate(k);
    Ok(pool)
}

/// Repeatedly take the most likely next token (lowest id on ties).
pub fn greedy<S: StepScorer>(scorer: &S, eos: usize, max_len: usize) -> Result<Hypothesis> {
    let mut h = Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        finished: max_len == 0,
    };
    while !h.finished {
        let lps = scorer.log_probs(&h.tokens)?;
        let (tok, lp) = lps
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, x)| if x > best.1 { (i, x) } else { best });
        h = extend(&h, tok, lp, eos, max_len);
    }
    Ok(h)
}

/// Every complete sequence, ranked. Exponential; for small vocabularies.
pub fn exhaustive<S: StepScorer>(scorer: &S, eos: usize, max_len: usize) -> Result<Vec<Hypothesis>> {
    let mut done = Vec::new();
    let mut open = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        finished: max_len == 0,
    }];
    while let Some(h) = open.pop() {
        if h.finished {
            done.push(h);
            continue;
        }
        for (tok, lp) in scorer.log_probs(&h.tokens)?.into_iter().enumerate() {
            open.push(extend(&h, tok, lp, eos, max_len));
        }
    }
    done.sort_by(rank);
    Ok(done)
}

/// Log-softmax of a logits row.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    logits.iter().map(|x| x - lse).collect()
}
