//! From-scratch BiLSTM-CRF sequence tagger.
//!
//! All parameters live in one flat `f64` vector with a fixed layout:
//! embeddings, forward LSTM (input weights, recurrent weights, bias),
//! backward LSTM, emission projection (weights, bias), and CRF transitions
//! over the tag set plus virtual start/stop states. The flat layout is what
//! makes Adam, finite-difference gradient checking, and the checkpoint
//! format straightforward.
//!
//! Everything is 64-bit and deterministic for a fixed seed.

mod crf;
mod lstm;
mod train;

pub use crf::{log_partition, path_score, viterbi, CrfParams, Emissions};
pub use train::{
    train, train_with_eval, EpochStats, TaggedSentence, TrainError, TrainedTagger, TrainingLog,
};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::entities::Tag;

/// Reserved vocabulary ids.
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token-to-id table built from the training split only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: BTreeMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Build from training sentences. Tokens seen fewer than `min_count`
    /// times are left out and will map to UNK, which also gives the UNK
    /// embedding training signal.
    pub fn build<'a, I>(sentences: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut first_seen: Vec<&str> = Vec::new();
        for sentence in sentences {
            for token in sentence {
                let c = counts.entry(token.as_str()).or_insert(0);
                if *c == 0 {
                    first_seen.push(token.as_str());
                }
                *c += 1;
            }
        }
        let mut vocab = Self::reserved();
        for token in first_seen {
            if counts[token] >= min_count.max(1) {
                vocab.push(token);
            }
        }
        vocab
    }

    fn reserved() -> Self {
        let mut vocab = Vocabulary {
            token_to_id: BTreeMap::new(),
            id_to_token: Vec::new(),
        };
        vocab.push(PAD_TOKEN);
        vocab.push(UNK_TOKEN);
        vocab
    }

    fn push(&mut self, token: &str) {
        let id = self.id_to_token.len();
        self.token_to_id.insert(String::from(token), id);
        self.id_to_token.push(String::from(token));
    }

    /// Rebuild from an ordered token table (checkpoint load). The first two
    /// entries must be the reserved PAD and UNK tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Option<Self> {
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN {
            return None;
        }
        let mut token_to_id = BTreeMap::new();
        for (id, token) in tokens.iter().enumerate() {
            if token_to_id.insert(token.clone(), id).is_some() {
                return None;
            }
        }
        Some(Vocabulary {
            token_to_id,
            id_to_token: tokens,
        })
    }

    pub fn id_of(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub min_token_count: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            embed_dim: 100,
            hidden_dim: 64,
            batch_size: 512,
            learning_rate: 0.001,
            patience: 5,
            max_epochs: 300,
            min_token_count: 1,
            seed: 42,
        }
    }
}

/// Tensor dimensions of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_tags: usize,
}

/// Named regions of the flat parameter vector, in checkpoint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRegion {
    Embeddings,
    FwdInputWeights,
    FwdRecurrentWeights,
    FwdBias,
    BwdInputWeights,
    BwdRecurrentWeights,
    BwdBias,
    ProjWeights,
    ProjBias,
    Transitions,
}

impl ParamRegion {
    pub const ALL: [ParamRegion; 10] = [
        ParamRegion::Embeddings,
        ParamRegion::FwdInputWeights,
        ParamRegion::FwdRecurrentWeights,
        ParamRegion::FwdBias,
        ParamRegion::BwdInputWeights,
        ParamRegion::BwdRecurrentWeights,
        ParamRegion::BwdBias,
        ParamRegion::ProjWeights,
        ParamRegion::ProjBias,
        ParamRegion::Transitions,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    dims: ModelDims,
}

impl Layout {
    fn new(dims: ModelDims) -> Self {
        Layout { dims }
    }

    fn sizes(&self) -> [usize; 10] {
        let d = self.dims;
        let gates = 4 * d.hidden_dim;
        [
            d.vocab_size * d.embed_dim,
            gates * d.embed_dim,
            gates * d.hidden_dim,
            gates,
            gates * d.embed_dim,
            gates * d.hidden_dim,
            gates,
            d.num_tags * 2 * d.hidden_dim,
            d.num_tags,
            (d.num_tags + 2) * (d.num_tags + 2),
        ]
    }

    fn range(&self, region: ParamRegion) -> Range<usize> {
        let sizes = self.sizes();
        let idx = ParamRegion::ALL.iter().position(|r| *r == region).unwrap();
        let start: usize = sizes[..idx].iter().sum();
        start..start + sizes[idx]
    }

    fn total(&self) -> usize {
        self.sizes().iter().sum()
    }
}

/// Errors from encoding or prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaggerError {
    EmptySentence,
    TokenIdOutOfRange { id: usize, vocab: usize },
}

impl fmt::Display for TaggerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaggerError::EmptySentence => f.write_str("cannot encode an empty sentence"),
            TaggerError::TokenIdOutOfRange { id, vocab } => {
                write!(f, "token id {id} out of range for vocabulary of {vocab}")
            }
        }
    }
}

/// The BiLSTM-CRF model: vocabulary plus the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    vocab: Vocabulary,
    layout: Layout,
    params: Vec<f64>,
    seed: u64,
}

impl TaggerModel {
    /// Initialize parameters: embeddings all zero, LSTM and projection
    /// weights uniform in [-0.1, 0.1], forget-gate bias 1.0, transitions
    /// zero with the never-taken entries (into start, out of stop) pinned
    /// to -inf.
    pub fn new(vocab: Vocabulary, embed_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let dims = ModelDims {
            vocab_size: vocab.len(),
            embed_dim,
            hidden_dim,
            num_tags: Tag::COUNT,
        };
        let layout = Layout::new(dims);
        let mut params = alloc::vec![0.0; layout.total()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for region in [
            ParamRegion::FwdInputWeights,
            ParamRegion::FwdRecurrentWeights,
            ParamRegion::BwdInputWeights,
            ParamRegion::BwdRecurrentWeights,
            ParamRegion::ProjWeights,
        ] {
            for v in &mut params[layout.range(region)] {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
        // Forget gate bias starts at 1.0 so early memory is retained.
        for region in [ParamRegion::FwdBias, ParamRegion::BwdBias] {
            let range = layout.range(region);
            for v in &mut params[range.start + hidden_dim..range.start + 2 * hidden_dim] {
                *v = 1.0;
            }
        }
        let trans_range = layout.range(ParamRegion::Transitions);
        {
            let k = dims.num_tags;
            let trans = &mut params[trans_range];
            for from in 0..k + 2 {
                for to in 0..k + 2 {
                    if to == k || from == k + 1 {
                        trans[from * (k + 2) + to] = f64::NEG_INFINITY;
                    }
                }
            }
        }
        TaggerModel {
            vocab,
            layout,
            params,
            seed,
        }
    }

    /// Rebuild a model from checkpoint pieces.
    pub fn from_parts(
        vocab: Vocabulary,
        embed_dim: usize,
        hidden_dim: usize,
        seed: u64,
        params: Vec<f64>,
    ) -> Option<Self> {
        let dims = ModelDims {
            vocab_size: vocab.len(),
            embed_dim,
            hidden_dim,
            num_tags: Tag::COUNT,
        };
        let layout = Layout::new(dims);
        if params.len() != layout.total() {
            return None;
        }
        Some(TaggerModel {
            vocab,
            layout,
            params,
            seed,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dims(&self) -> ModelDims {
        self.layout.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn region_range(&self, region: ParamRegion) -> Range<usize> {
        self.layout.range(region)
    }

    /// False for parameters that must never move: the PAD embedding row and
    /// the -inf transition entries.
    pub fn is_trainable(&self, idx: usize) -> bool {
        let d = self.layout.dims;
        let emb = self.layout.range(ParamRegion::Embeddings);
        if emb.contains(&idx) {
            let row = (idx - emb.start) / d.embed_dim;
            return row != PAD_ID;
        }
        let trans = self.layout.range(ParamRegion::Transitions);
        if trans.contains(&idx) {
            let k = d.num_tags;
            let offset = idx - trans.start;
            let (from, to) = (offset / (k + 2), offset % (k + 2));
            return to != k && from != k + 1;
        }
        true
    }

    fn region(&self, region: ParamRegion) -> &[f64] {
        &self.params[self.layout.range(region)]
    }

    /// CRF transition view over the flat vector.
    pub fn transitions(&self) -> CrfParams<'_> {
        CrfParams::new(self.layout.dims.num_tags, self.region(ParamRegion::Transitions))
    }

    /// Map tokens to vocabulary ids, with UNK for out-of-vocabulary tokens.
    pub fn token_ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.vocab.id_of(t)).collect()
    }

    /// Per-token tag scores: embeddings through both LSTM directions and the
    /// emission projection.
    pub fn encode(&self, token_ids: &[usize]) -> Result<Emissions, TaggerError> {
        Ok(self.forward(token_ids)?.emissions)
    }

    pub(crate) fn forward(&self, token_ids: &[usize]) -> Result<ForwardPass, TaggerError> {
        if token_ids.is_empty() {
            return Err(TaggerError::EmptySentence);
        }
        let d = self.layout.dims;
        for &id in token_ids {
            if id >= d.vocab_size {
                return Err(TaggerError::TokenIdOutOfRange {
                    id,
                    vocab: d.vocab_size,
                });
            }
        }
        let t_len = token_ids.len();
        let emb = self.region(ParamRegion::Embeddings);
        let mut xs = alloc::vec![0.0; t_len * d.embed_dim];
        for (t, &id) in token_ids.iter().enumerate() {
            xs[t * d.embed_dim..(t + 1) * d.embed_dim]
                .copy_from_slice(&emb[id * d.embed_dim..(id + 1) * d.embed_dim]);
        }

        let fwd = lstm::LstmWeights {
            input: self.region(ParamRegion::FwdInputWeights),
            recurrent: self.region(ParamRegion::FwdRecurrentWeights),
            bias: self.region(ParamRegion::FwdBias),
            input_dim: d.embed_dim,
            hidden_dim: d.hidden_dim,
        };
        let bwd = lstm::LstmWeights {
            input: self.region(ParamRegion::BwdInputWeights),
            recurrent: self.region(ParamRegion::BwdRecurrentWeights),
            bias: self.region(ParamRegion::BwdBias),
            input_dim: d.embed_dim,
            hidden_dim: d.hidden_dim,
        };

        let fwd_pass = lstm::run(&fwd, &xs, t_len, false);
        let bwd_pass = lstm::run(&bwd, &xs, t_len, true);

        // Concatenate per-token hidden states and project to tag scores.
        let h2 = 2 * d.hidden_dim;
        let mut hcat = alloc::vec![0.0; t_len * h2];
        for t in 0..t_len {
            hcat[t * h2..t * h2 + d.hidden_dim]
                .copy_from_slice(&fwd_pass.hidden[t * d.hidden_dim..(t + 1) * d.hidden_dim]);
            hcat[t * h2 + d.hidden_dim..(t + 1) * h2]
                .copy_from_slice(&bwd_pass.hidden[t * d.hidden_dim..(t + 1) * d.hidden_dim]);
        }
        let w = self.region(ParamRegion::ProjWeights);
        let b = self.region(ParamRegion::ProjBias);
        let mut scores = alloc::vec![0.0; t_len * d.num_tags];
        for t in 0..t_len {
            let h = &hcat[t * h2..(t + 1) * h2];
            for k in 0..d.num_tags {
                let row = &w[k * h2..(k + 1) * h2];
                let mut acc = b[k];
                for j in 0..h2 {
                    acc += row[j] * h[j];
                }
                scores[t * d.num_tags + k] = acc;
            }
        }

        Ok(ForwardPass {
            emissions: Emissions::new(t_len, d.num_tags, scores),
            token_ids: token_ids.to_vec(),
            xs,
            hcat,
            fwd: fwd_pass,
            bwd: bwd_pass,
        })
    }

    /// Negative log-likelihood of the gold tag sequence.
    pub fn nll_loss(&self, token_ids: &[usize], gold: &[usize]) -> Result<f64, TaggerError> {
        let em = self.encode(token_ids)?;
        let trans = self.transitions();
        Ok(log_partition(&em, &trans) - path_score(&em, &trans, gold))
    }

    /// Loss plus the full analytic gradient, aligned with [`Self::params`].
    pub fn loss_and_grad(
        &self,
        token_ids: &[usize],
        gold: &[usize],
    ) -> Result<(f64, Vec<f64>), TaggerError> {
        let mut grad = alloc::vec![0.0; self.params.len()];
        let loss = self.accumulate_loss_and_grad(token_ids, gold, &mut grad)?;
        Ok((loss, grad))
    }

    /// As [`Self::loss_and_grad`] but adds into an existing gradient buffer,
    /// which is how batches accumulate.
    pub fn accumulate_loss_and_grad(
        &self,
        token_ids: &[usize],
        gold: &[usize],
        grad: &mut [f64],
    ) -> Result<f64, TaggerError> {
        debug_assert_eq!(grad.len(), self.params.len());
        let pass = self.forward(token_ids)?;
        let d = self.layout.dims;
        let t_len = pass.token_ids.len();
        let h2 = 2 * d.hidden_dim;

        // CRF layer: loss, d(loss)/d(emissions), d(loss)/d(transitions).
        let trans = self.transitions();
        let crf_grads = crf::nll_gradients(&pass.emissions, &trans, gold);
        {
            let range = self.layout.range(ParamRegion::Transitions);
            for (g, dt) in grad[range].iter_mut().zip(crf_grads.d_transitions.iter()) {
                *g += dt;
            }
        }

        // Emission projection.
        let w = self.region(ParamRegion::ProjWeights);
        let mut d_hcat = alloc::vec![0.0; t_len * h2];
        {
            let w_range = self.layout.range(ParamRegion::ProjWeights);
            let b_range = self.layout.range(ParamRegion::ProjBias);
            for t in 0..t_len {
                let h = &pass.hcat[t * h2..(t + 1) * h2];
                let dh = &mut d_hcat[t * h2..(t + 1) * h2];
                for k in 0..d.num_tags {
                    let de = crf_grads.d_emissions[t * d.num_tags + k];
                    if de == 0.0 {
                        continue;
                    }
                    let row = &w[k * h2..(k + 1) * h2];
                    let g_row = &mut grad[w_range.start + k * h2..w_range.start + (k + 1) * h2];
                    for j in 0..h2 {
                        g_row[j] += de * h[j];
                        dh[j] += de * row[j];
                    }
                    grad[b_range.start + k] += de;
                }
            }
        }

        // Split the concatenated hidden gradient back per direction.
        let mut d_h_fwd = alloc::vec![0.0; t_len * d.hidden_dim];
        let mut d_h_bwd = alloc::vec![0.0; t_len * d.hidden_dim];
        for t in 0..t_len {
            d_h_fwd[t * d.hidden_dim..(t + 1) * d.hidden_dim]
                .copy_from_slice(&d_hcat[t * h2..t * h2 + d.hidden_dim]);
            d_h_bwd[t * d.hidden_dim..(t + 1) * d.hidden_dim]
                .copy_from_slice(&d_hcat[t * h2 + d.hidden_dim..(t + 1) * h2]);
        }

        let mut d_xs = alloc::vec![0.0; t_len * d.embed_dim];
        for (reversed, trace, d_h, regions) in [
            (
                false,
                &pass.fwd,
                &d_h_fwd,
                [
                    ParamRegion::FwdInputWeights,
                    ParamRegion::FwdRecurrentWeights,
                    ParamRegion::FwdBias,
                ],
            ),
            (
                true,
                &pass.bwd,
                &d_h_bwd,
                [
                    ParamRegion::BwdInputWeights,
                    ParamRegion::BwdRecurrentWeights,
                    ParamRegion::BwdBias,
                ],
            ),
        ] {
            let weights = lstm::LstmWeights {
                input: self.region(regions[0]),
                recurrent: self.region(regions[1]),
                bias: self.region(regions[2]),
                input_dim: d.embed_dim,
                hidden_dim: d.hidden_dim,
            };
            let (g_wx, g_wh, g_b) = disjoint3(
                grad,
                self.layout.range(regions[0]),
                self.layout.range(regions[1]),
                self.layout.range(regions[2]),
            );
            lstm::backward(
                &weights, &pass.xs, trace, d_h, t_len, reversed, g_wx, g_wh, g_b, &mut d_xs,
            );
        }

        // Embedding rows.
        {
            let emb_range = self.layout.range(ParamRegion::Embeddings);
            for (t, &id) in pass.token_ids.iter().enumerate() {
                let g_row =
                    &mut grad[emb_range.start + id * d.embed_dim..emb_range.start + (id + 1) * d.embed_dim];
                let dx = &d_xs[t * d.embed_dim..(t + 1) * d.embed_dim];
                for j in 0..d.embed_dim {
                    g_row[j] += dx[j];
                }
            }
        }

        Ok(crf_grads.loss)
    }

    /// Decode IOB2 tags for a tokenized sentence; empty in, empty out.
    pub fn predict(&self, tokens: &[String]) -> Vec<Tag> {
        if tokens.is_empty() {
            return Vec::new();
        }
        let ids = self.token_ids(tokens);
        let em = self.encode(&ids).expect("non-empty, ids in range");
        let (tag_ids, _) = viterbi(&em, &self.transitions());
        tag_ids
            .into_iter()
            .map(|id| Tag::from_id(id).expect("viterbi ids are in the tag set"))
            .collect()
    }
}

/// Three disjoint, ascending subslices of one buffer.
fn disjoint3(
    buf: &mut [f64],
    a: Range<usize>,
    b: Range<usize>,
    c: Range<usize>,
) -> (&mut [f64], &mut [f64], &mut [f64]) {
    debug_assert!(a.end <= b.start && b.end <= c.start);
    let (head, tail) = buf.split_at_mut(c.start);
    let c_slice = &mut tail[..c.len()];
    let (head, mid) = head.split_at_mut(b.start);
    let b_slice = &mut mid[..b.len()];
    let a_slice = &mut head[a];
    (a_slice, b_slice, c_slice)
}

/// Cached activations from one forward pass, consumed by backprop.
pub(crate) struct ForwardPass {
    pub emissions: Emissions,
    pub token_ids: Vec<usize>,
    pub xs: Vec<f64>,
    pub hcat: Vec<f64>,
    pub fwd: lstm::LstmTrace,
    pub bwd: lstm::LstmTrace,
}
