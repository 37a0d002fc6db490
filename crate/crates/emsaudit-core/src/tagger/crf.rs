//! Linear-chain CRF: path scoring, log-partition, Viterbi, and gradients.
//!
//! Transition scores live in a (K+2) x (K+2) matrix with two virtual
//! states appended after the K real tags: start at index K, stop at K+1.
//! Entries into start and out of stop are -inf and are never read by the
//! recursions below; scores stay finite as long as emissions and the real
//! transitions are finite.

use alloc::vec::Vec;

/// Per-token per-tag scores for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Emissions {
    len: usize,
    num_tags: usize,
    scores: Vec<f64>,
}

impl Emissions {
    pub fn new(len: usize, num_tags: usize, scores: Vec<f64>) -> Self {
        assert_eq!(scores.len(), len * num_tags);
        Emissions {
            len,
            num_tags,
            scores,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_tags(&self) -> usize {
        self.num_tags
    }

    #[inline]
    pub fn score(&self, t: usize, tag: usize) -> f64 {
        self.scores[t * self.num_tags + tag]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.scores[t * self.num_tags..(t + 1) * self.num_tags]
    }

    pub fn raw(&self) -> &[f64] {
        &self.scores
    }
}

/// Borrowed view of the transition matrix.
#[derive(Debug, Clone, Copy)]
pub struct CrfParams<'a> {
    num_tags: usize,
    scores: &'a [f64],
}

impl<'a> CrfParams<'a> {
    pub fn new(num_tags: usize, scores: &'a [f64]) -> Self {
        assert_eq!(scores.len(), (num_tags + 2) * (num_tags + 2));
        CrfParams { num_tags, scores }
    }

    pub fn num_tags(&self) -> usize {
        self.num_tags
    }

    pub fn start_state(&self) -> usize {
        self.num_tags
    }

    pub fn stop_state(&self) -> usize {
        self.num_tags + 1
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.scores[from * (self.num_tags + 2) + to]
    }
}

/// Log-sum-exp over a slice, stable under large magnitudes and -inf.
fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| libm::exp(x - max)).sum();
    max + libm::log(sum)
}

/// Score of one tag path: start transition, per-token emissions, pairwise
/// transitions, stop transition.
pub fn path_score(em: &Emissions, trans: &CrfParams<'_>, tags: &[usize]) -> f64 {
    assert_eq!(tags.len(), em.len());
    assert!(!tags.is_empty());
    let mut score = trans.get(trans.start_state(), tags[0]) + em.score(0, tags[0]);
    for t in 1..tags.len() {
        score = score + trans.get(tags[t - 1], tags[t]) + em.score(t, tags[t]);
    }
    score + trans.get(tags[tags.len() - 1], trans.stop_state())
}

fn forward_alphas(em: &Emissions, trans: &CrfParams<'_>) -> Vec<f64> {
    let (t_len, k) = (em.len(), em.num_tags());
    let mut alpha = alloc::vec![0.0; t_len * k];
    for (j, a) in alpha[..k].iter_mut().enumerate() {
        *a = trans.get(trans.start_state(), j) + em.score(0, j);
    }
    let mut terms = alloc::vec![0.0; k];
    for t in 1..t_len {
        for j in 0..k {
            for (i, term) in terms.iter_mut().enumerate() {
                *term = alpha[(t - 1) * k + i] + trans.get(i, j);
            }
            alpha[t * k + j] = log_sum_exp(&terms) + em.score(t, j);
        }
    }
    alpha
}

/// Log of the sum over all tag paths of `exp(path_score)`.
pub fn log_partition(em: &Emissions, trans: &CrfParams<'_>) -> f64 {
    assert!(!em.is_empty());
    let k = em.num_tags();
    let alpha = forward_alphas(em, trans);
    let last = &alpha[(em.len() - 1) * k..];
    let terms: Vec<f64> = (0..k)
        .map(|j| last[j] + trans.get(j, trans.stop_state()))
        .collect();
    log_sum_exp(&terms)
}

/// Max-score tag path and its score.
///
/// The recursion accumulates sums in the same order as [`path_score`], so
/// the returned score is bit-identical to scoring the returned path.
pub fn viterbi(em: &Emissions, trans: &CrfParams<'_>) -> (Vec<usize>, f64) {
    assert!(!em.is_empty());
    let (t_len, k) = (em.len(), em.num_tags());
    let mut delta = alloc::vec![0.0; t_len * k];
    let mut back = alloc::vec![0usize; t_len * k];
    for (j, d) in delta[..k].iter_mut().enumerate() {
        *d = trans.get(trans.start_state(), j) + em.score(0, j);
    }
    for t in 1..t_len {
        for j in 0..k {
            let mut best = f64::NEG_INFINITY;
            let mut best_i = 0;
            for i in 0..k {
                let cand = delta[(t - 1) * k + i] + trans.get(i, j);
                if cand > best {
                    best = cand;
                    best_i = i;
                }
            }
            delta[t * k + j] = best + em.score(t, j);
            back[t * k + j] = best_i;
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut best_j = 0;
    for j in 0..k {
        let cand = delta[(t_len - 1) * k + j] + trans.get(j, trans.stop_state());
        if cand > best {
            best = cand;
            best_j = j;
        }
    }
    let mut path = alloc::vec![0usize; t_len];
    path[t_len - 1] = best_j;
    for t in (1..t_len).rev() {
        path[t - 1] = back[t * k + path[t]];
    }
    (path, best)
}

/// Gradients of the negative log-likelihood with respect to emissions and
/// transitions, via forward-backward marginals.
pub(crate) struct CrfGradients {
    pub loss: f64,
    /// T x K, aligned with the emission matrix.
    pub d_emissions: Vec<f64>,
    /// (K+2) x (K+2), aligned with the transition matrix; entries for the
    /// never-taken transitions stay zero.
    pub d_transitions: Vec<f64>,
}

pub(crate) fn nll_gradients(em: &Emissions, trans: &CrfParams<'_>, gold: &[usize]) -> CrfGradients {
    let (t_len, k) = (em.len(), em.num_tags());
    assert_eq!(gold.len(), t_len);
    let (start, stop) = (trans.start_state(), trans.stop_state());
    let dim = k + 2;

    let alpha = forward_alphas(em, trans);

    // Backward pass: beta[t][i] = log sum over suffixes starting after t.
    let mut beta = alloc::vec![0.0; t_len * k];
    for i in 0..k {
        beta[(t_len - 1) * k + i] = trans.get(i, stop);
    }
    let mut terms = alloc::vec![0.0; k];
    for t in (0..t_len - 1).rev() {
        for i in 0..k {
            for (j, term) in terms.iter_mut().enumerate() {
                *term = trans.get(i, j) + em.score(t + 1, j) + beta[(t + 1) * k + j];
            }
            beta[t * k + i] = log_sum_exp(&terms);
        }
    }

    let log_z = {
        let last = &alpha[(t_len - 1) * k..];
        let terms: Vec<f64> = (0..k).map(|j| last[j] + trans.get(j, stop)).collect();
        log_sum_exp(&terms)
    };

    let mut d_emissions = alloc::vec![0.0; t_len * k];
    let mut d_transitions = alloc::vec![0.0; dim * dim];

    // Unary marginals: expected counts minus gold counts.
    for t in 0..t_len {
        for j in 0..k {
            let p = libm::exp(alpha[t * k + j] + beta[t * k + j] - log_z);
            d_emissions[t * k + j] = p - f64::from(u8::from(gold[t] == j));
        }
    }
    // Start, pairwise, and stop transition marginals.
    for j in 0..k {
        let p = libm::exp(alpha[j] + beta[j] - log_z);
        d_transitions[start * dim + j] = p - f64::from(u8::from(gold[0] == j));
    }
    for t in 1..t_len {
        for i in 0..k {
            let a = alpha[(t - 1) * k + i];
            if a == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..k {
                let tr = trans.get(i, j);
                if tr == f64::NEG_INFINITY {
                    continue;
                }
                let p = libm::exp(a + tr + em.score(t, j) + beta[t * k + j] - log_z);
                d_transitions[i * dim + j] +=
                    p - f64::from(u8::from(gold[t - 1] == i && gold[t] == j));
            }
        }
    }
    for i in 0..k {
        let p = libm::exp(alpha[(t_len - 1) * k + i] + trans.get(i, stop) - log_z);
        d_transitions[i * dim + stop] = p - f64::from(u8::from(gold[t_len - 1] == i));
    }

    let loss = log_z - path_score(em, trans, gold);
    CrfGradients {
        loss,
        d_emissions,
        d_transitions,
    }
}
