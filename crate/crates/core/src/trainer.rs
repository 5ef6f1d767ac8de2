//! Joint skip-gram training of words, terms and entities.
//!
//! Words are updated at every position of the sliding window. Whenever one
//! or more terms end at the current position, each term is updated against
//! the words around its span, and every entity the term can denote is
//! updated with the same contexts and negatives, weighted by 1/|E_t|.
//!
//! Only words have context (output) vectors.

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, EncodedDocument, StreamDocument, Vocabulary};
use crate::error::{Error, Result};
use crate::matcher::MatchAutomaton;
use crate::terminology::Terminology;

/// Floor of the linear learning-rate decay, relative to the initial rate.
pub const MIN_LR_FRACTION: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub window: usize,
    pub negatives: usize,
    pub lr0: f64,
    pub epochs: usize,
    pub min_count: u64,
    pub subsample_coeff: f64,
    pub dim: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            window: 2,
            negatives: 5,
            lr0: 0.05,
            epochs: 10,
            min_count: 10,
            subsample_coeff: 1e-5,
            dim: 100,
            seed: 1,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_owned()));
        if self.window < 1 {
            return fail("window must be at least 1");
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return fail("initial learning rate must be positive");
        }
        if self.epochs < 1 {
            return fail("epochs must be at least 1");
        }
        if self.dim < 1 {
            return fail("dim must be at least 1");
        }
        if self.min_count < 1 {
            return fail("min_count must be at least 1");
        }
        if self.subsample_coeff.is_nan() || self.subsample_coeff <= 0.0 {
            return fail("subsampling coefficient must be positive");
        }
        if self.workers < 1 {
            return fail("workers must be at least 1");
        }
        Ok(())
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Matrix {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    fn uniform<R: Rng>(rows: usize, dim: usize, rng: &mut R) -> Self {
        let bound = 0.5 / dim as f64;
        let data = (0..rows * dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Matrix { rows, dim, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn row_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub dim: usize,
    pub word_in: Matrix,
    pub term_in: Matrix,
    pub entity_in: Matrix,
    pub word_ctx: Matrix,
}

impl ModelParams {
    /// Input rows uniform in ±0.5/dim, context rows zero.
    pub fn new<R: Rng>(n_words: usize, n_terms: usize, n_entities: usize, dim: usize, rng: &mut R) -> Self {
        ModelParams {
            dim,
            word_in: Matrix::uniform(n_words, dim, rng),
            term_in: Matrix::uniform(n_terms, dim, rng),
            entity_in: Matrix::uniform(n_entities, dim, rng),
            word_ctx: Matrix::zeros(n_words, dim),
        }
    }

    pub fn input(&self, kind: TargetKind) -> &Matrix {
        match kind {
            TargetKind::Word => &self.word_in,
            TargetKind::Term => &self.term_in,
            TargetKind::Entity => &self.entity_in,
        }
    }

    pub fn input_mut(&mut self, kind: TargetKind) -> &mut Matrix {
        match kind {
            TargetKind::Word => &mut self.word_in,
            TargetKind::Term => &mut self.term_in,
            TargetKind::Entity => &mut self.entity_in,
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.word_in, &self.term_in, &self.entity_in, &self.word_ctx]
            .iter()
            .all(|m| m.data.iter().all(|x| x.is_finite()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TargetKind {
    Word,
    Term,
    Entity,
}

/// One application of the context objective to a single target row.
///
/// Entity events triggered by a term borrow the term's context and
/// negative slices.
#[derive(Clone, Copy, Debug)]
pub struct UpdateEvent<'a> {
    pub kind: TargetKind,
    pub target: u32,
    /// Effective window size b in [1, k].
    pub window: u32,
    pub contexts: &'a [u32],
    /// `negatives.len() == d * contexts.len()`; the negatives for context
    /// `j` are `negatives[j*d..(j+1)*d]`.
    pub negatives: &'a [u32],
    pub weight: f64,
}

/// Owned copy of an [`UpdateEvent`], for recording.
#[derive(Clone, Debug, PartialEq)]
pub struct EventRecord {
    pub kind: TargetKind,
    pub target: u32,
    pub window: u32,
    pub contexts: Vec<u32>,
    pub negatives: Vec<u32>,
    pub weight: f64,
}

impl UpdateEvent<'_> {
    pub fn record(&self) -> EventRecord {
        EventRecord {
            kind: self.kind,
            target: self.target,
            window: self.window,
            contexts: self.contexts.to_vec(),
            negatives: self.negatives.to_vec(),
            weight: self.weight,
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// ln σ(x), stable for large |x|.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Σ_c ln σ(c·v) + Σ_n ln σ(−n·v).
pub fn objective(v: &[f64], contexts: &[&[f64]], negatives: &[&[f64]]) -> Result<f64> {
    let dim = v.len();
    for x in contexts.iter().chain(negatives) {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: x.len(),
            });
        }
    }
    let pos: f64 = contexts.iter().map(|c| log_sigmoid(dot(c, v))).sum();
    let neg: f64 = negatives.iter().map(|n| log_sigmoid(-dot(n, v))).sum();
    Ok(pos + neg)
}

/// Analytic gradient of [`objective`] with respect to v, each context
/// vector and each negative vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveGradient {
    pub v: Vec<f64>,
    pub contexts: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn objective_gradient(v: &[f64], contexts: &[&[f64]], negatives: &[&[f64]]) -> Result<ObjectiveGradient> {
    // dimension check
    objective(v, contexts, negatives)?;
    let mut grad_v = vec![0.0; v.len()];
    let mut grad_c = Vec::with_capacity(contexts.len());
    for c in contexts {
        let g = 1.0 - sigmoid(dot(c, v));
        axpy(g, c, &mut grad_v);
        grad_c.push(v.iter().map(|x| g * x).collect());
    }
    let mut grad_n = Vec::with_capacity(negatives.len());
    for n in negatives {
        let g = -sigmoid(dot(n, v));
        axpy(g, n, &mut grad_v);
        grad_n.push(v.iter().map(|x| g * x).collect());
    }
    Ok(ObjectiveGradient {
        v: grad_v,
        contexts: grad_c,
        negatives: grad_n,
    })
}

/// Scratch space for one worker.
struct Workspace {
    grad: Vec<f64>,
    /// One pending context-row delta per context/negative slot.
    ctx_delta: Vec<f64>,
    contexts: Vec<u32>,
    negatives: Vec<u32>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Workspace {
            grad: vec![0.0; dim],
            ctx_delta: Vec::new(),
            contexts: Vec::new(),
            negatives: Vec::new(),
        }
    }
}

/// Row access to parameters shared between training threads.
///
/// Rows are read and written without synchronization (hogwild). Updates
/// are sparse, so concurrent writes to the same row are rare, and a lost
/// update only costs a little progress.
struct SharedParams {
    dim: usize,
    params: UnsafeCell<ModelParams>,
}

unsafe impl Sync for SharedParams {}

impl SharedParams {
    fn new(params: ModelParams) -> Self {
        SharedParams {
            dim: params.dim,
            params: UnsafeCell::new(params),
        }
    }

    #[inline]
    #[allow(clippy::mut_from_ref)]
    unsafe fn input_row(&self, kind: TargetKind, idx: usize) -> &mut [f64] {
        let m = (*self.params.get()).input_mut(kind);
        let ptr = m.data.as_mut_ptr().add(idx * self.dim);
        std::slice::from_raw_parts_mut(ptr, self.dim)
    }

    #[inline]
    #[allow(clippy::mut_from_ref)]
    unsafe fn ctx_row(&self, idx: usize) -> &mut [f64] {
        let m = &mut (*self.params.get()).word_ctx;
        let ptr = m.data.as_mut_ptr().add(idx * self.dim);
        std::slice::from_raw_parts_mut(ptr, self.dim)
    }

    fn into_inner(self) -> ModelParams {
        self.params.into_inner()
    }
}

/// Apply the objective's ascent step to a group of targets sharing the
/// same contexts and negatives.
///
/// All gradients are evaluated at the current parameter values; context
/// rows are updated only after every target in the group has been
/// processed. Returns the objective of the first target before the update.
///
/// # Safety
///
/// Rows may be aliased by other threads (hogwild); the caller must make
/// sure no other reference to these rows lives within this thread.
unsafe fn apply_group(
    params: &SharedParams,
    targets: &[(TargetKind, u32, f64)],
    contexts: &[u32],
    negatives: &[u32],
    lr: f64,
    ws: &mut Workspace,
) -> f64 {
    let dim = params.dim;
    let slots = contexts.len() + negatives.len();
    ws.ctx_delta.clear();
    ws.ctx_delta.resize(slots * dim, 0.0);
    let mut first_objective = 0.0;

    for (i, &(kind, target, weight)) in targets.iter().enumerate() {
        let scale = lr * weight;
        let v = params.input_row(kind, target as usize);
        ws.grad.iter_mut().for_each(|g| *g = 0.0);
        let mut obj = 0.0;
        let all = contexts.iter().map(|&c| (c, true)).chain(negatives.iter().map(|&n| (n, false)));
        for (slot, (row, positive)) in all.enumerate() {
            let c = params.ctx_row(row as usize);
            let score = dot(c, v);
            let g = if positive {
                obj += log_sigmoid(score);
                1.0 - sigmoid(score)
            } else {
                obj += log_sigmoid(-score);
                -sigmoid(score)
            };
            axpy(g, c, &mut ws.grad);
            axpy(scale * g, v, &mut ws.ctx_delta[slot * dim..(slot + 1) * dim]);
        }
        if i == 0 {
            first_objective = obj;
        }
        axpy(scale, &ws.grad, v);
    }

    let rows = contexts.iter().chain(negatives);
    for (slot, &row) in rows.enumerate() {
        let c = params.ctx_row(row as usize);
        for (ci, di) in c.iter_mut().zip(&ws.ctx_delta[slot * dim..(slot + 1) * dim]) {
            *ci += *di;
        }
    }
    first_objective
}

/// Apply one update event to `params`.
pub fn gradient_step(params: &mut ModelParams, event: &UpdateEvent<'_>, lr: f64) {
    gradient_step_group(params, &[*event], lr);
}

/// Apply events that share the same contexts and negatives (a term and its
/// entities) as one joint step.
pub fn gradient_step_group(params: &mut ModelParams, events: &[UpdateEvent<'_>], lr: f64) {
    let Some(first) = events.first() else { return };
    let targets: Vec<_> = events.iter().map(|e| (e.kind, e.target, e.weight)).collect();
    let mut ws = Workspace::new(params.dim);
    let taken = std::mem::replace(params, empty_params(params.dim));
    let shared = SharedParams::new(taken);
    // SAFETY: single thread, no outstanding row borrows.
    unsafe {
        apply_group(&shared, &targets, first.contexts, first.negatives, lr, &mut ws);
    }
    *params = shared.into_inner();
}

/// Per-epoch training statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-word-update objective (before each update).
    pub mean_objective: f64,
    pub word_updates: u64,
    pub term_updates: u64,
    pub entity_updates: u64,
    /// Learning rate at the end of the epoch.
    pub lr: f64,
    pub tokens_per_sec: f64,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    objective: f64,
    word_updates: u64,
    term_updates: u64,
    entity_updates: u64,
}

impl Tally {
    fn add(&mut self, other: Tally) {
        self.objective += other.objective;
        self.word_updates += other.word_updates;
        self.term_updates += other.term_updates;
        self.entity_updates += other.entity_updates;
    }
}

const STREAM_SUBSAMPLE: u64 = 0;
const STREAM_TRAIN: u64 = 1;

/// Deterministic generator for one (epoch, shard, purpose).
pub fn derived_rng(seed: u64, epoch: usize, shard: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | ((shard as u64) << 1) | purpose);
    rng
}

/// Generator for the subsampling decisions of (epoch, shard).
pub fn subsample_rng(seed: u64, epoch: usize, shard: usize) -> ChaCha8Rng {
    derived_rng(seed, epoch, shard, STREAM_SUBSAMPLE)
}

/// Generator for window sizes and negatives of (epoch, shard).
pub fn train_rng(seed: u64, epoch: usize, shard: usize) -> ChaCha8Rng {
    derived_rng(seed, epoch, shard, STREAM_TRAIN)
}

/// Skip-gram trainer over an encoded corpus.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    vocab: &'a Vocabulary,
    docs: &'a [EncodedDocument],
    params: ModelParams,
    /// Tokens processed over all epochs so far.
    processed: u64,
    planned: u64,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: TrainConfig, vocab: &'a Vocabulary, docs: &'a [EncodedDocument]) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX);
        let params = ModelParams::new(vocab.n_words(), vocab.n_terms(), vocab.n_entities(), cfg.dim, &mut rng);
        Self::with_params(cfg, vocab, docs, params)
    }

    pub fn with_params(
        cfg: TrainConfig,
        vocab: &'a Vocabulary,
        docs: &'a [EncodedDocument],
        params: ModelParams,
    ) -> Result<Self> {
        cfg.validate()?;
        if params.dim != cfg.dim
            || params.word_in.rows() != vocab.n_words()
            || params.term_in.rows() != vocab.n_terms()
            || params.entity_in.rows() != vocab.n_entities()
        {
            return Err(Error::InvalidConfig(
                "parameter shapes do not match the vocabulary".into(),
            ));
        }
        let per_epoch: u64 = docs.iter().map(|d| d.n_known() as u64).sum();
        Ok(Trainer {
            planned: (cfg.epochs as u64 * per_epoch).max(1),
            cfg,
            vocab,
            docs,
            params,
            processed: 0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// Current learning rate given the processed-token count.
    pub fn learning_rate(&self, processed: u64) -> f64 {
        lr_at(self.cfg.lr0, processed, self.planned)
    }

    /// Run one epoch, sharding documents across `cfg.workers` threads.
    pub fn train_epoch(&mut self, epoch: usize) -> EpochStats {
        if self.cfg.workers == 1 {
            return self.train_epoch_observed(epoch, |_| {});
        }
        let start = Instant::now();
        let workers = self.cfg.workers;
        let shared = SharedParams::new(std::mem::replace(&mut self.params, empty_params(self.cfg.dim)));
        let processed = AtomicU64::new(self.processed);
        let tallies: Vec<Tally> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|shard| {
                    let shared = &shared;
                    let processed = &processed;
                    let this = &*self;
                    scope.spawn(move || {
                        let docs = this.docs.iter().skip(shard).step_by(workers);
                        this.run_shard(shared, docs, epoch, shard, processed, &mut |_| {})
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("training worker panicked")).collect()
        });
        self.params = shared.into_inner();
        let before = self.processed;
        self.processed = processed.into_inner();
        let mut total = Tally::default();
        tallies.into_iter().for_each(|t| total.add(t));
        self.stats(epoch, total, self.processed - before, start)
    }

    /// Single-threaded epoch reporting every update event to `observer`.
    pub fn train_epoch_observed<F>(&mut self, epoch: usize, mut observer: F) -> EpochStats
    where
        F: FnMut(&UpdateEvent<'_>),
    {
        let start = Instant::now();
        let shared = SharedParams::new(std::mem::replace(&mut self.params, empty_params(self.cfg.dim)));
        let processed = AtomicU64::new(self.processed);
        let tally = self.run_shard(&shared, self.docs.iter(), epoch, 0, &processed, &mut observer);
        self.params = shared.into_inner();
        let before = self.processed;
        self.processed = processed.into_inner();
        self.stats(epoch, tally, self.processed - before, start)
    }

    fn stats(&self, epoch: usize, tally: Tally, tokens: u64, start: Instant) -> EpochStats {
        let secs = start.elapsed().as_secs_f64().max(1e-9);
        EpochStats {
            epoch,
            mean_objective: if tally.word_updates > 0 {
                tally.objective / tally.word_updates as f64
            } else {
                0.0
            },
            word_updates: tally.word_updates,
            term_updates: tally.term_updates,
            entity_updates: tally.entity_updates,
            lr: self.learning_rate(self.processed),
            tokens_per_sec: tokens as f64 / secs,
        }
    }

    fn run_shard<'d, I, F>(
        &self,
        params: &SharedParams,
        docs: I,
        epoch: usize,
        shard: usize,
        processed: &AtomicU64,
        observer: &mut F,
    ) -> Tally
    where
        I: Iterator<Item = &'d EncodedDocument>,
        F: FnMut(&UpdateEvent<'_>),
    {
        let mut sub_rng = subsample_rng(self.cfg.seed, epoch, shard);
        let mut rng = train_rng(self.cfg.seed, epoch, shard);
        let mut ws = Workspace::new(self.cfg.dim);
        let mut tally = Tally::default();
        for doc in docs {
            let stream_doc = StreamDocument::prepare(doc, self.vocab, &mut sub_rng);
            let base = processed.load(Ordering::Relaxed);
            self.train_document(params, &stream_doc, base, &mut rng, &mut ws, &mut tally, observer);
            processed.fetch_add(doc.n_known() as u64, Ordering::Relaxed);
        }
        tally
    }

    #[allow(clippy::too_many_arguments)]
    fn train_document<R: Rng, F: FnMut(&UpdateEvent<'_>)>(
        &self,
        params: &SharedParams,
        doc: &StreamDocument,
        processed_base: u64,
        rng: &mut R,
        ws: &mut Workspace,
        tally: &mut Tally,
        observer: &mut F,
    ) {
        let k = self.cfg.window;
        let d = self.cfg.negatives;
        let mut surv = 0usize;
        let mut occ = 0usize;
        let mut targets: Vec<(TargetKind, u32, f64)> = Vec::new();

        for p in 0..doc.len {
            let is_word = surv < doc.positions.len() && doc.positions[surv] == p;
            let has_terms = occ < doc.occurrences.len() && doc.occurrences[occ].end == p + 1;
            if !is_word && !has_terms {
                continue;
            }
            let lr = lr_at(self.cfg.lr0, processed_base + surv as u64, self.planned);
            let b = rng.random_range(1..=k);

            if is_word {
                let lo = surv.saturating_sub(b);
                let hi = (surv + b + 1).min(doc.words.len());
                ws.contexts.clear();
                ws.contexts.extend(doc.words[lo..surv].iter().chain(&doc.words[surv + 1..hi]));
                if !ws.contexts.is_empty() {
                    self.draw_negatives(ws, d, rng);
                    let event = UpdateEvent {
                        kind: TargetKind::Word,
                        target: doc.words[surv],
                        window: b as u32,
                        contexts: &ws.contexts,
                        negatives: &ws.negatives,
                        weight: 1.0,
                    };
                    observer(&event);
                    targets.clear();
                    targets.push((TargetKind::Word, doc.words[surv], 1.0));
                    let (contexts, negatives) = (std::mem::take(&mut ws.contexts), std::mem::take(&mut ws.negatives));
                    // SAFETY: no row borrows outlive apply_group.
                    tally.objective += unsafe { apply_group(params, &targets, &contexts, &negatives, lr, ws) };
                    tally.word_updates += 1;
                    ws.contexts = contexts;
                    ws.negatives = negatives;
                }
                surv += 1;
            }

            while occ < doc.occurrences.len() && doc.occurrences[occ].end == p + 1 {
                let o = doc.occurrences[occ];
                occ += 1;
                let left_end = doc.positions.partition_point(|&q| q < o.start);
                let right_start = doc.positions.partition_point(|&q| q < o.end);
                let left_start = left_end.saturating_sub(b);
                let right_end = (right_start + b).min(doc.words.len());
                ws.contexts.clear();
                ws.contexts.extend(
                    doc.words[left_start..left_end]
                        .iter()
                        .chain(&doc.words[right_start..right_end]),
                );
                if ws.contexts.is_empty() {
                    continue;
                }
                self.draw_negatives(ws, d, rng);

                let entities = self.vocab.term_entities(o.term as usize);
                let weight = 1.0 / entities.len() as f64;
                targets.clear();
                targets.push((TargetKind::Term, o.term, 1.0));
                targets.extend(entities.iter().map(|&e| (TargetKind::Entity, e, weight)));
                for &(kind, target, weight) in &targets {
                    observer(&UpdateEvent {
                        kind,
                        target,
                        window: b as u32,
                        contexts: &ws.contexts,
                        negatives: &ws.negatives,
                        weight,
                    });
                }
                let (contexts, negatives) = (std::mem::take(&mut ws.contexts), std::mem::take(&mut ws.negatives));
                // SAFETY: as above.
                unsafe { apply_group(params, &targets, &contexts, &negatives, lr, ws) };
                ws.contexts = contexts;
                ws.negatives = negatives;
                tally.term_updates += 1;
                tally.entity_updates += entities.len() as u64;
            }
        }
    }

    fn draw_negatives<R: Rng>(&self, ws: &mut Workspace, d: usize, rng: &mut R) {
        ws.negatives.clear();
        for _ in 0..ws.contexts.len() * d {
            ws.negatives.push(self.vocab.negative_sample(rng) as u32);
        }
    }
}

fn lr_at(lr0: f64, processed: u64, planned: u64) -> f64 {
    lr0 * (1.0 - processed as f64 / planned as f64).max(MIN_LR_FRACTION)
}

fn empty_params(dim: usize) -> ModelParams {
    ModelParams {
        dim,
        word_in: Matrix::zeros(0, dim),
        term_in: Matrix::zeros(0, dim),
        entity_in: Matrix::zeros(0, dim),
        word_ctx: Matrix::zeros(0, dim),
    }
}

/// Output of [`train`].
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub vocab: Vocabulary,
    pub params: ModelParams,
    pub epochs: Vec<EpochStats>,
}

/// Build the vocabulary and automaton, then run every epoch.
pub fn train(corpus: &Corpus, terminology: &Terminology, cfg: &TrainConfig) -> Result<TrainedModel> {
    train_with(corpus, terminology, cfg, |_, _, _| Ok(()))
}

/// Like [`train`], calling `on_epoch` after each epoch (for logging or
/// checkpoints).
pub fn train_with<F>(corpus: &Corpus, terminology: &Terminology, cfg: &TrainConfig, mut on_epoch: F) -> Result<TrainedModel>
where
    F: FnMut(&EpochStats, &Vocabulary, &ModelParams) -> Result<()>,
{
    cfg.validate()?;
    let automaton = MatchAutomaton::build(terminology)?;
    let annotations = corpus.annotate(&automaton);
    let vocab = Vocabulary::build(corpus, &annotations, terminology, cfg.min_count, cfg.subsample_coeff)?;
    let docs = vocab.encode(corpus, &annotations);
    log::info!(
        "vocabulary: {} words, {} terms, {} entities ({} tokens)",
        vocab.n_words(),
        vocab.n_terms(),
        vocab.n_entities(),
        vocab.total_word_tokens()
    );

    let mut trainer = Trainer::new(cfg.clone(), &vocab, &docs)?;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let stats = trainer.train_epoch(epoch);
        log::info!(
            "epoch {}: {:.0} tokens/sec, lr {:.6}, mean objective {:.4}",
            epoch + 1,
            stats.tokens_per_sec,
            stats.lr,
            stats.mean_objective
        );
        on_epoch(&stats, &vocab, trainer.params())?;
        epochs.push(stats);
    }
    let params = trainer.into_params();
    Ok(TrainedModel { vocab, params, epochs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terminology::EntityId;

    fn vecs(rows: &[Vec<f64>]) -> Vec<&[f64]> {
        rows.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn objective_examples() {
        let z = vec![0.0, 0.0];
        let ctx = vec![z.clone(); 2];
        let neg = vec![z.clone(); 10];
        let o = objective(&[1.0, 0.0], &vecs(&ctx), &vecs(&neg)).unwrap();
        assert!((o - 12.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!((o + 8.3178).abs() < 1e-4);

        let o = objective(&[1.0, 0.0], &vecs(&[vec![1.0, 0.0]]), &vecs(&[vec![1.0, 0.0]])).unwrap();
        assert!((o + 1.6265).abs() < 1e-4);

        let o = objective(&[1.0], &vecs(&[vec![800.0]]), &[]).unwrap();
        assert!(o <= 0.0 && o > -1e-300);
    }

    #[test]
    fn objective_rejects_mismatched_dims() {
        let err = objective(&[1.0, 0.0], &vecs(&[vec![1.0]]), &[]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, actual: 1 }));
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!(log_sigmoid(-800.0).is_finite());
        assert_eq!(log_sigmoid(800.0), 0.0);
        assert!((log_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-15);
    }

    fn small_params() -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = ModelParams::new(5, 2, 3, 4, &mut rng);
        for i in 0..p.word_ctx.data.len() {
            p.word_ctx.data[i] = rng.random_range(-0.5..0.5);
        }
        p
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut p = small_params();
        let before = p.clone();
        let event = UpdateEvent {
            kind: TargetKind::Word,
            target: 1,
            window: 2,
            contexts: &[0, 2],
            negatives: &[3, 4],
            weight: 1.0,
        };
        gradient_step(&mut p, &event, 0.0);
        assert_eq!(p, before);
    }

    #[test]
    fn step_touches_only_participating_rows() {
        let mut p = small_params();
        let before = p.clone();
        let event = UpdateEvent {
            kind: TargetKind::Term,
            target: 1,
            window: 1,
            contexts: &[0],
            negatives: &[3],
            weight: 1.0,
        };
        gradient_step(&mut p, &event, 0.1);
        assert_eq!(p.word_in, before.word_in);
        assert_eq!(p.entity_in, before.entity_in);
        assert_eq!(p.term_in.row(0), before.term_in.row(0));
        assert_ne!(p.term_in.row(1), before.term_in.row(1));
        for r in [1, 2, 4] {
            assert_eq!(p.word_ctx.row(r), before.word_ctx.row(r));
        }
        assert_ne!(p.word_ctx.row(0), before.word_ctx.row(0));
        assert_ne!(p.word_ctx.row(3), before.word_ctx.row(3));
    }

    #[test]
    fn step_increases_objective() {
        let mut p = small_params();
        let ctx = [0u32, 2];
        let neg = [3u32, 4];
        let eval = |p: &ModelParams| {
            let c: Vec<&[f64]> = ctx.iter().map(|&i| p.word_ctx.row(i as usize)).collect();
            let n: Vec<&[f64]> = neg.iter().map(|&i| p.word_ctx.row(i as usize)).collect();
            objective(p.word_in.row(1), &c, &n).unwrap()
        };
        let before = eval(&p);
        let event = UpdateEvent {
            kind: TargetKind::Word,
            target: 1,
            window: 2,
            contexts: &ctx,
            negatives: &neg,
            weight: 1.0,
        };
        gradient_step(&mut p, &event, 0.01);
        assert!(eval(&p) > before);
    }

    #[test]
    fn entity_deltas_are_weighted() {
        let mut p = small_params();
        for r in 0..2 {
            p.term_in.row_mut(r).fill(0.0);
        }
        for r in 0..3 {
            p.entity_in.row_mut(r).fill(0.0);
        }
        let ctx = [0u32, 2];
        let neg = [3u32, 4, 1, 1];
        let mk = |kind, target, weight| UpdateEvent {
            kind,
            target,
            window: 1,
            contexts: &ctx,
            negatives: &neg,
            weight,
        };
        let events = [
            mk(TargetKind::Term, 0, 1.0),
            mk(TargetKind::Entity, 0, 0.5),
            mk(TargetKind::Entity, 2, 0.5),
        ];
        gradient_step_group(&mut p, &events, 0.05);
        let t = p.term_in.row(0);
        assert!(t.iter().any(|&x| x != 0.0));
        for e in [0, 2] {
            let row = p.entity_in.row(e);
            for (a, b) in row.iter().zip(t) {
                assert_eq!(*a, 0.5 * b);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { window: 0, ..Default::default() },
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { dim: 0, ..Default::default() },
            TrainConfig { lr0: 0.0, ..Default::default() },
            TrainConfig { workers: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn learning_rate_decays_linearly_with_floor() {
        assert_eq!(lr_at(0.05, 0, 100), 0.05);
        assert!((lr_at(0.05, 50, 100) - 0.025).abs() < 1e-15);
        assert_eq!(lr_at(0.05, 100, 100), 0.05 * MIN_LR_FRACTION);
        assert_eq!(lr_at(0.05, 1000, 100), 0.05 * MIN_LR_FRACTION);
    }

    fn tiny_setup(docs: &[&str], pairs: &[(&str, &str)]) -> (Vocabulary, Vec<EncodedDocument>) {
        let corpus = Corpus::from_documents(docs);
        let t = Terminology::from_pairs("t", pairs.iter().map(|&(s, e)| (s, EntityId::new(e).unwrap()))).unwrap();
        let a = MatchAutomaton::build(&t).unwrap();
        let ann = corpus.annotate(&a);
        let v = Vocabulary::build(&corpus, &ann, &t, 1, 1.0).unwrap();
        let docs = v.encode(&corpus, &ann);
        (v, docs)
    }

    fn record_epoch(vocab: &Vocabulary, docs: &[EncodedDocument], window: usize) -> Vec<EventRecord> {
        let cfg = TrainConfig { window, dim: 4, min_count: 1, subsample_coeff: 1.0, epochs: 1, ..Default::default() };
        let mut trainer = Trainer::new(cfg, vocab, docs).unwrap();
        let mut events = Vec::new();
        trainer.train_epoch_observed(0, |e| events.push(e.record()));
        events
    }

    #[test]
    fn single_token_term_context() {
        let (v, docs) = tiny_setup(&["a flu b"], &[("flu", "E1"), ("flu", "E2")]);
        let events = record_epoch(&v, &docs, 1);
        let term: Vec<_> = events.iter().filter(|e| e.kind == TargetKind::Term).collect();
        assert_eq!(term.len(), 1);
        let mut ctx: Vec<&str> = term[0].contexts.iter().map(|&w| v.word(w as usize)).collect();
        ctx.sort();
        assert_eq!(ctx, ["a", "b"]);
        assert_eq!(term[0].negatives.len(), 2 * 5);
        let ents: Vec<_> = events.iter().filter(|e| e.kind == TargetKind::Entity).collect();
        assert_eq!(ents.len(), 2);
        assert!(ents.iter().all(|e| e.weight == 0.5 && e.contexts == term[0].contexts));
    }

    #[test]
    fn isolated_term_is_skipped() {
        let (v, docs) = tiny_setup(&["flu"], &[("flu", "E1")]);
        let events = record_epoch(&v, &docs, 2);
        assert!(events.iter().all(|e| e.kind == TargetKind::Word));
    }

    #[test]
    fn window_bounds_contexts() {
        let (v, docs) = tiny_setup(&["a b c d e f g h i j k l"], &[("zz", "E")]);
        let events = record_epoch(&v, &docs, 2);
        assert_eq!(events.len(), 12);
        for e in &events {
            assert!((1..=2).contains(&e.window));
            assert!(e.contexts.len() <= 2 * e.window as usize);
            assert_eq!(e.negatives.len(), 5 * e.contexts.len());
        }
    }

    #[test]
    fn epochs_are_deterministic() {
        let (v, docs) = tiny_setup(&["a flu b c flu d", "c d a b flu"], &[("flu", "E1"), ("flu", "E2")]);
        let cfg = TrainConfig { dim: 8, min_count: 1, subsample_coeff: 1.0, epochs: 3, ..Default::default() };
        let run = || {
            let mut t = Trainer::new(cfg.clone(), &v, &docs).unwrap();
            for e in 0..3 {
                t.train_epoch(e);
            }
            t.into_params()
        };
        let (p1, p2) = (run(), run());
        assert_eq!(p1, p2);
        assert!(p1.is_finite());
    }

    #[test]
    fn hogwild_workers_keep_params_finite() {
        let docs_text: Vec<String> = (0..200).map(|i| format!("a b flu c d {} e", i % 7)).collect();
        let refs: Vec<&str> = docs_text.iter().map(String::as_str).collect();
        let (v, docs) = tiny_setup(&refs, &[("flu", "E1"), ("flu", "E2")]);
        let cfg = TrainConfig { dim: 16, min_count: 1, subsample_coeff: 1.0, epochs: 2, workers: 3, ..Default::default() };
        let mut t = Trainer::new(cfg, &v, &docs).unwrap();
        let s0 = t.train_epoch(0);
        let s1 = t.train_epoch(1);
        assert_eq!(s0.term_updates, 200);
        assert_eq!(s1.entity_updates, 400);
        assert!(t.params().is_finite());
    }
}
