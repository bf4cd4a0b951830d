use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::config::{DevMetric, TrainConfig};
use super::log::{LogWriter, TrainLogRecord};
use super::optim::{adam_step, global_norm, lr_schedule, AdamState};
use crate::autodiff::Tensor;
use crate::curriculum::{SentenceSchedule, WeightVector};
use crate::data::{batch_indices, ParallelCorpus, SamplePair};
use crate::decode::{bleu, perplexity, sentence_schedule, token_accuracy, DiversityCounter, Side};
use crate::error::{Error, Result};
use crate::model::{greedy_decode_batch, loss_and_gradients, weighted_teacher_forcing_loss, Checkpoint, ModelParams};
use crate::rng::{keyed, mix64};

/// Consecutive non-finite updates tolerated before training aborts.
pub const DIVERGENCE_PATIENCE: usize = 3;

const SC_STREAM: u64 = 0x5C5C;
const DROPOUT_STREAM: u64 = 0xD0;
const ABLATION_STREAM: u64 = 0xAB1A;

/// What one call to [`Trainer::step`] did.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    /// Updates completed after this call.
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub grad_norm: f64,
    /// Corpus indices of the batch.
    pub batch: Vec<usize>,
    /// False when the update was skipped because of a non-finite value.
    pub applied: bool,
}

/// Final parameters plus every log record.
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub log: Vec<TrainLogRecord>,
}

/// The optimization loop. Batches come from a token-budgeted epoch stream
/// keyed by `(seed, epoch)`; one stream batch is consumed per update even
/// while a sentence-level schedule substitutes its own batch, so every
/// variant sees the same stream once its schedules saturate.
pub struct Trainer<'a> {
    config: TrainConfig,
    corpus: &'a ParallelCorpus,
    dev: Option<&'a [SamplePair]>,
    params: ModelParams,
    adam: AdamState,
    step: usize,
    epoch: u64,
    cursor: usize,
    epoch_batches: Vec<Vec<usize>>,
    schedule: Option<SentenceSchedule>,
    diversity: DiversityCounter,
    seen_source: Vec<bool>,
    bad_streak: usize,
    interval_loss: (f64, usize),
    last_grad_norm: f64,
    started: Instant,
}

impl<'a> Trainer<'a> {
    pub fn new(params: ModelParams, corpus: &'a ParallelCorpus, dev: Option<&'a [SamplePair]>, config: TrainConfig) -> Result<Self> {
        let adam = AdamState::new(&params, config.adam());
        Self::build(params, adam, corpus, dev, config, 0, 0, 0)
    }

    /// Continue from a checkpoint written by [`Trainer::checkpoint`]. The
    /// resumed run takes bit-identical updates to an uninterrupted one; the
    /// diversity counter starts empty.
    pub fn resume(checkpoint: &Checkpoint, corpus: &'a ParallelCorpus, dev: Option<&'a [SamplePair]>, config: TrainConfig) -> Result<Self> {
        if checkpoint.header.source_vocab != corpus.source_vocab || checkpoint.header.target_vocab != corpus.target_vocab {
            return Err(Error::VocabMismatch("checkpoint vocabularies differ from the corpus".into()));
        }
        let extra = &checkpoint.header.extra;
        let field = |k: &str| {
            extra
                .get(k)
                .and_then(|v| v.as_u64())
                .ok_or_else(|| Error::Checkpoint(format!("missing trainer field `{k}`")))
        };
        let mut adam = AdamState::new(&checkpoint.params, config.adam());
        adam.step = field("adam_step")?;
        for name in checkpoint.params.tensors().keys() {
            for (prefix, slot) in [("adam.m/", &mut adam.m), ("adam.v/", &mut adam.v)] {
                let t = checkpoint
                    .aux
                    .get(&format!("{prefix}{name}"))
                    .ok_or_else(|| Error::Checkpoint(format!("missing optimizer moment {prefix}{name}")))?;
                slot.insert(name.clone(), t.clone());
            }
        }
        let (epoch, cursor) = (field("epoch")?, field("cursor")? as usize);
        let mut t = Self::build(checkpoint.params.clone(), adam, corpus, dev, config, checkpoint.header.step, epoch, cursor)?;
        t.bad_streak = field("bad_streak")? as usize;
        Ok(t)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        params: ModelParams,
        adam: AdamState,
        corpus: &'a ParallelCorpus,
        dev: Option<&'a [SamplePair]>,
        config: TrainConfig,
        step: usize,
        epoch: u64,
        cursor: usize,
    ) -> Result<Self> {
        config.validate()?;
        corpus.validate()?;
        if corpus.is_empty() {
            return Err(Error::Empty("training corpus".into()));
        }
        let mc = params.config();
        if mc.source_vocab != corpus.source_vocab.len() || mc.target_vocab != corpus.target_vocab.len() {
            return Err(Error::VocabMismatch(format!(
                "model expects vocabularies {}/{}, corpus has {}/{}",
                mc.source_vocab,
                mc.target_vocab,
                corpus.source_vocab.len(),
                corpus.target_vocab.len()
            )));
        }
        if config.eval_interval > 0 && dev.is_none_or(|d| d.is_empty()) {
            return Err(Error::config("eval_interval", "evaluation needs a nonempty dev set"));
        }
        let schedule = sentence_schedule(&config.curriculum, &corpus.pairs)?;
        let epoch_batches = batch_indices(&corpus.pairs, &(0..corpus.len()).collect::<Vec<_>>(), config.batch_tokens, config.seed, epoch)?;
        Ok(Self {
            seen_source: vec![false; corpus.len()],
            config,
            corpus,
            dev,
            params,
            adam,
            step,
            epoch,
            cursor,
            epoch_batches,
            schedule,
            diversity: DiversityCounter::new(),
            bad_streak: 0,
            interval_loss: (0.0, 0),
            last_grad_norm: 0.0,
            started: Instant::now(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn optimizer(&self) -> &AdamState {
        &self.adam
    }

    /// Updates taken so far; the curriculum index of the next update.
    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn unique_trigrams(&self) -> usize {
        self.diversity.count()
    }

    fn next_stream_batch(&mut self) -> Result<Vec<usize>> {
        if self.cursor >= self.epoch_batches.len() {
            self.epoch += 1;
            self.cursor = 0;
            let all: Vec<usize> = (0..self.corpus.len()).collect();
            self.epoch_batches = batch_indices(&self.corpus.pairs, &all, self.config.batch_tokens, self.config.seed, self.epoch)?;
        }
        self.cursor += 1;
        Ok(self.epoch_batches[self.cursor - 1].clone())
    }

    /// Batch for update `i`: the stream batch, or while a sentence-level
    /// schedule is still growing, a batch drawn from its current pool.
    fn batch_for(&mut self, i: usize) -> Result<Vec<usize>> {
        let stream = self.next_stream_batch()?;
        match &self.schedule {
            Some(s) if !s.is_saturated(i) => {
                let pool = s.selected(i);
                let batches = batch_indices(&self.corpus.pairs, pool, self.config.batch_tokens, mix64(self.config.seed ^ SC_STREAM), i as u64)?;
                Ok(batches.into_iter().next().expect("nonempty pool"))
            }
            _ => Ok(stream),
        }
    }

    fn weights_for(&self, i: usize, indices: &[usize], pairs: &[SamplePair]) -> Result<Vec<WeightVector>> {
        let cur = &self.config.curriculum;
        let losses = if cur.needs_token_losses() {
            let ones: Vec<WeightVector> = pairs.iter().map(|p| WeightVector::ones(p.target.len())).collect();
            Some(weighted_teacher_forcing_loss(&self.params, pairs, &ones)?.token_losses)
        } else {
            None
        };
        indices
            .iter()
            .zip(pairs)
            .enumerate()
            .map(|(b, (&idx, p))| {
                let mut rng: ChaCha8Rng = keyed(self.config.seed, &[ABLATION_STREAM, i as u64, idx as u64]);
                cur.token_weights(p.target.len(), i, Some(&mut rng), losses.as_ref().map(|l| l[b].as_slice()))
            })
            .collect()
    }

    fn record_consumed(&mut self, indices: &[usize], pairs: &[SamplePair], weights: &[WeightVector]) {
        for ((&idx, p), w) in indices.iter().zip(pairs).zip(weights) {
            if !self.seen_source[idx] {
                self.seen_source[idx] = true;
                self.diversity.insert(Side::Source, &p.source);
            }
            let words = p.target_words();
            let mask: Vec<bool> = w.weights()[..words.len()].iter().map(|&v| v > 0.0).collect();
            self.diversity.insert_masked(Side::Target, words, &mask);
        }
    }

    /// One optimizer update at curriculum index [`Self::step_count`].
    ///
    /// A non-finite loss or gradient skips the update; after
    /// [`DIVERGENCE_PATIENCE`] such updates in a row this returns
    /// [`Error::Diverged`], with the last good state still in place (and
    /// saved as `last_good.ckpt` when a checkpoint directory is set).
    pub fn step(&mut self) -> Result<StepReport> {
        let i = self.step;
        let indices = self.batch_for(i)?;
        let pairs: Vec<SamplePair> = indices.iter().map(|&k| self.corpus.pairs[k].clone()).collect();
        let weights = self.weights_for(i, &indices, &pairs)?;
        let mut dropout: Option<ChaCha8Rng> = (self.params.config().dropout > 0.0).then(|| keyed(self.config.seed, &[DROPOUT_STREAM, i as u64]));
        let (report, mut grads) = loss_and_gradients(&self.params, &pairs, &weights, dropout.as_mut())?;
        let lr = lr_schedule(i + 1, self.config.warmup, self.config.peak_lr);
        let grad_norm = global_norm(&grads);
        self.step += 1;

        let finite = report.loss.is_finite() && grad_norm.is_finite();
        let applied = finite && {
            if let Some(c) = self.config.clip_norm {
                if grad_norm > c {
                    scale(&mut grads, c / grad_norm);
                }
            }
            match adam_step(&mut self.params, &grads, &mut self.adam, lr, self.config.weight_decay) {
                Ok(()) => true,
                Err(Error::NonFinite(_)) => false,
                Err(e) => return Err(e),
            }
        };
        if applied {
            self.bad_streak = 0;
            self.interval_loss.0 += report.loss;
            self.interval_loss.1 += 1;
            self.last_grad_norm = grad_norm;
            self.record_consumed(&indices, &pairs, &weights);
        } else {
            self.bad_streak += 1;
            if self.bad_streak >= DIVERGENCE_PATIENCE {
                if let Some(dir) = self.config.checkpoint_dir.clone() {
                    self.save_checkpoint(&dir.join("last_good.ckpt"))?;
                }
                return Err(Error::Diverged { step: self.step });
            }
        }
        Ok(StepReport {
            step: self.step,
            lr,
            loss: report.loss,
            grad_norm,
            batch: indices,
            applied,
        })
    }

    /// Dev metric of the current parameters.
    pub fn evaluate(&self) -> Result<Option<f64>> {
        match self.dev {
            Some(dev) if !dev.is_empty() => evaluate_dev(&self.params, dev, self.config.dev_metric).map(Some),
            _ => Ok(None),
        }
    }

    /// Log record for the updates since the previous one.
    pub fn make_record(&mut self, evaluate: bool) -> Result<TrainLogRecord> {
        let (sum, n) = std::mem::take(&mut self.interval_loss);
        Ok(TrainLogRecord {
            step: self.step,
            lr: lr_schedule(self.step.max(1), self.config.warmup, self.config.peak_lr),
            loss: if n == 0 { f64::NAN } else { sum / n as f64 },
            dev_metric: if evaluate { self.evaluate()? } else { None },
            unique_trigrams: self.diversity.count(),
            grad_norm: self.last_grad_norm,
            wall_time: self.started.elapsed().as_secs_f64(),
        })
    }

    /// Parameters, optimizer moments and stream position.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(
            self.params.clone(),
            self.corpus.source_vocab.clone(),
            self.corpus.target_vocab.clone(),
            self.step,
        );
        ck.header.extra = json!({
            "adam_step": self.adam.step,
            "epoch": self.epoch,
            "cursor": self.cursor,
            "bad_streak": self.bad_streak,
            "train_seed": self.config.seed,
        });
        for (name, t) in &self.adam.m {
            ck.aux.insert(format!("adam.m/{name}"), t.clone());
        }
        for (name, t) in &self.adam.v {
            ck.aux.insert(format!("adam.v/{name}"), t.clone());
        }
        ck
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        self.checkpoint().save(path)
    }

    /// Train until `max_steps`, logging every `eval_interval` updates and at
    /// the end. With a checkpoint directory, writes `train_log.csv`,
    /// periodic `step_<n>.ckpt` files and `final.ckpt`.
    pub fn run(mut self) -> Result<TrainOutput> {
        let dir = self.config.checkpoint_dir.clone();
        let mut sink = match &dir {
            Some(d) => {
                fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
                let path = d.join("train_log.csv");
                let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
                Some(LogWriter::new(BufWriter::new(f))?)
            }
            None => None,
        };
        let mut log = Vec::new();
        while self.step < self.config.max_steps {
            self.step()?;
            let s = self.step;
            let at_eval = self.config.eval_interval > 0 && s % self.config.eval_interval == 0;
            if at_eval || s == self.config.max_steps {
                let rec = self.make_record(self.dev.is_some_and(|d| !d.is_empty()))?;
                if let Some(w) = sink.as_mut() {
                    w.write(&rec)?;
                }
                log.push(rec);
            }
            if let Some(d) = &dir {
                if self.config.checkpoint_interval > 0 && s % self.config.checkpoint_interval == 0 {
                    self.save_checkpoint(&step_path(d, s))?;
                }
            }
        }
        if let Some(d) = &dir {
            self.save_checkpoint(&d.join("final.ckpt"))?;
        }
        Ok(TrainOutput { params: self.params, log })
    }
}

fn step_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("step_{step}.ckpt"))
}

fn scale(grads: &mut BTreeMap<String, Tensor>, factor: f64) {
    for t in grads.values_mut() {
        let data: Vec<f64> = t.data().iter().map(|v| v * factor).collect();
        *t = Tensor::from_parts(t.shape().to_vec(), data);
    }
}

/// Unweighted dev metric: greedy decoding for accuracy and BLEU, teacher
/// forcing for perplexity.
pub fn evaluate_dev(params: &ModelParams, dev: &[SamplePair], metric: DevMetric) -> Result<f64> {
    if dev.is_empty() {
        return Err(Error::Empty("dev set".into()));
    }
    let max_len = params.config().max_len;
    match metric {
        DevMetric::Perplexity => perplexity(params, dev),
        DevMetric::Accuracy | DevMetric::Bleu => {
            let mut hyps = Vec::with_capacity(dev.len());
            for chunk in dev.chunks(256) {
                let longest = chunk.iter().map(|p| p.target.len()).max().unwrap_or(1);
                // one past the longest reference, so a forced end marker never
                // lands on a scored position
                let limit = match metric {
                    DevMetric::Accuracy => (longest + 1).min(max_len),
                    _ => (2 * longest + 10).min(max_len),
                };
                let sources: Vec<&[usize]> = chunk.iter().map(|p| p.source.as_slice()).collect();
                hyps.extend(greedy_decode_batch(params, &sources, limit)?);
            }
            if metric == DevMetric::Accuracy {
                let refs: Vec<&[usize]> = dev.iter().map(|p| p.target.as_slice()).collect();
                token_accuracy(&hyps, &refs)
            } else {
                let words: Vec<&[usize]> = hyps.iter().map(|h| strip_eos(h)).collect();
                let refs: Vec<&[usize]> = dev.iter().map(|p| p.target_words()).collect();
                bleu(&words, &refs, 4, false)
            }
        }
    }
}

fn strip_eos(h: &[usize]) -> &[usize] {
    match h.last() {
        Some(&crate::data::EOS) => &h[..h.len() - 1],
        _ => h,
    }
}

/// Runs a fresh [`Trainer`] to completion.
pub fn train(params: ModelParams, corpus: &ParallelCorpus, dev: Option<&[SamplePair]>, config: &TrainConfig) -> Result<TrainOutput> {
    Trainer::new(params, corpus, dev, config.clone())?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::{CurriculumConfig, Variant};
    use crate::data::{synth_task, SynthKind};
    use crate::model::{init_params, ModelConfig};

    fn setup(n: usize) -> (ParallelCorpus, ModelParams) {
        let corpus = synth_task(SynthKind::Copy, n, 6, 5, 3).unwrap();
        let params = init_params(&ModelConfig {
            source_vocab: corpus.source_vocab.len(),
            target_vocab: corpus.target_vocab.len(),
            embed: 8,
            hidden: 8,
            layers: 1,
            seed: 2,
            ..ModelConfig::default()
        })
        .unwrap();
        (corpus, params)
    }

    fn cfg(variant: Variant) -> TrainConfig {
        TrainConfig {
            peak_lr: 1e-2,
            warmup: 5,
            max_steps: 12,
            batch_tokens: 30,
            seed: 9,
            curriculum: CurriculumConfig::new(variant).with_steps(8),
            ..TrainConfig::default()
        }
    }

    fn losses(mut t: Trainer, n: usize) -> Vec<f64> {
        (0..n).map(|_| t.step().unwrap().loss).collect()
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let (corpus, params) = setup(40);
        let a = train(params.clone(), &corpus, None, &cfg(Variant::TcHard)).unwrap();
        let b = train(params, &corpus, None, &cfg(Variant::TcHard)).unwrap();
        assert!(a.params.bit_eq(&b.params));
        assert_eq!(a.log.len(), 1);
        assert_eq!(a.log[0].loss.to_bits(), b.log[0].loss.to_bits());
    }

    #[test]
    fn soft_with_unit_gamma_matches_plain_training() {
        let (corpus, params) = setup(40);
        let mut soft = cfg(Variant::TcSoft);
        soft.curriculum.gamma0 = 1.0;
        let a = train(params.clone(), &corpus, None, &cfg(Variant::None)).unwrap();
        let b = train(params, &corpus, None, &soft).unwrap();
        assert!(a.params.bit_eq(&b.params));
    }

    #[test]
    fn curriculum_changes_early_updates() {
        let (corpus, params) = setup(40);
        let a = losses(Trainer::new(params.clone(), &corpus, None, cfg(Variant::None)).unwrap(), 2);
        let b = losses(Trainer::new(params, &corpus, None, cfg(Variant::TcHard)).unwrap(), 2);
        assert_ne!(a[0], b[0]);
    }

    #[test]
    fn resume_continues_bit_identically() {
        let (corpus, params) = setup(40);
        for variant in [Variant::None, Variant::AblationRandom, Variant::ScRsqrt] {
            let mut t = Trainer::new(params.clone(), &corpus, None, cfg(variant)).unwrap();
            for _ in 0..6 {
                t.step().unwrap();
            }
            let bytes = t.checkpoint().to_bytes().unwrap();
            let direct = losses(t, 10);
            let ck = Checkpoint::from_bytes(&bytes).unwrap();
            let resumed = losses(Trainer::resume(&ck, &corpus, None, cfg(variant)).unwrap(), 10);
            assert_eq!(
                direct.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                resumed.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                "{variant}"
            );
        }
    }

    #[test]
    fn memorizes_one_pair() {
        let (corpus, params) = setup(1);
        let mut config = cfg(Variant::None);
        config.warmup = 10;
        config.peak_lr = 2e-2;
        config.max_steps = 300;
        let mut params = params;
        let mut mc = params.config().clone();
        mc.label_smoothing = 0.0;
        params = ModelParams::from_tensors(mc, params.tensors().clone()).unwrap();
        let mut t = Trainer::new(params, &corpus, None, config).unwrap();
        let l: Vec<f64> = (0..300).map(|_| t.step().unwrap().loss).collect();
        assert!(l[299] < 1e-2, "final loss {}", l[299]);
        assert!(l[10..].windows(2).all(|w| w[1] <= w[0]), "not monotone after warmup");
        let acc = evaluate_dev(t.params(), &corpus.pairs, DevMetric::Accuracy).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn sentence_schedule_restricts_early_batches() {
        let (corpus, params) = setup(60);
        let mut config = cfg(Variant::ScRsqrt);
        config.curriculum.sc_c0 = 0.1;
        config.curriculum.steps = 1000;
        let mut t = Trainer::new(params, &corpus, None, config.clone()).unwrap();
        let sched = sentence_schedule(&config.curriculum, &corpus.pairs).unwrap().unwrap();
        let pool = sched.selected(0).to_vec();
        let r = t.step().unwrap();
        assert!(r.batch.iter().all(|i| pool.contains(i)));
    }

    #[test]
    fn divergence_aborts_and_keeps_last_good_state() {
        let (corpus, params) = setup(20);
        let dir = tempfile::tempdir().unwrap();
        let mut config = cfg(Variant::None);
        config.checkpoint_dir = Some(dir.path().to_path_buf());
        let mut bad = params.clone();
        let w = bad.get("out.b").unwrap();
        bad.set("out.b", Tensor::full(w.shape(), f64::NAN)).unwrap();
        let mut t = Trainer::new(bad, &corpus, None, config).unwrap();
        assert!(!t.step().unwrap().applied);
        assert!(!t.step().unwrap().applied);
        assert!(matches!(t.step(), Err(Error::Diverged { step: 3 })));
        let ck = Checkpoint::load(&dir.path().join("last_good.ckpt")).unwrap();
        assert!(ck.params.bit_eq(t.params()));
    }

    #[test]
    fn run_writes_log_and_checkpoints() {
        let (corpus, params) = setup(30);
        let dev = corpus.pairs[..5].to_vec();
        let dir = tempfile::tempdir().unwrap();
        let mut config = cfg(Variant::TcSoft);
        config.eval_interval = 4;
        config.checkpoint_interval = 6;
        config.checkpoint_dir = Some(dir.path().to_path_buf());
        let out = train(params, &corpus, Some(&dev), &config).unwrap();
        assert_eq!(out.log.iter().map(|r| r.step).collect::<Vec<_>>(), vec![4, 8, 12]);
        assert!(out.log.iter().all(|r| r.dev_metric.is_some()));
        assert!(out.log.windows(2).all(|w| w[0].unique_trigrams <= w[1].unique_trigrams));
        let csv = fs::read_to_string(dir.path().join("train_log.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        for f in ["step_6.ckpt", "step_12.ckpt", "final.ckpt"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(Checkpoint::load(&dir.path().join("final.ckpt")).unwrap().params.bit_eq(&out.params));
    }

    #[test]
    fn eval_interval_needs_dev() {
        let (corpus, params) = setup(10);
        let mut config = cfg(Variant::None);
        config.eval_interval = 2;
        assert!(matches!(
            Trainer::new(params, &corpus, None, config),
            Err(Error::Config { field, .. }) if field == "eval_interval"
        ));
    }
}
