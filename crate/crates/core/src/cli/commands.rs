use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::config::{RunConfig, TaskKind};
use super::run_dir::{create_run_dir, RunManifest};
use crate::curriculum::{estimate_curriculum_length, schedule_grid, write_schedule_csv, MetricDirection, Variant};
use crate::data::{load_monolingual_text, load_parallel_text, synth_task, ParallelCorpus, SamplePair, SynthKind, Vocab, EOS};
use crate::decode::{bleu, decode_corpus, diversity_curve, positional_error_rate, tail_error_rate, target_log_probs, token_accuracy, LengthFilter};
use crate::error::{Error, Result};
use crate::model::{file_hash, init_params, Checkpoint, ModelConfig, ModelMode, ModelParams};
use crate::train::{train, DevMetric};

/// Training pairs plus the dev split.
#[derive(Clone, Debug)]
pub struct TaskData {
    pub train: ParallelCorpus,
    pub dev: Vec<SamplePair>,
}

impl TaskData {
    pub fn dev_corpus(&self) -> ParallelCorpus {
        self.train.with_pairs(self.dev.clone())
    }
}

/// Builds the corpus a run configuration describes. With `vocabs` the text
/// is encoded with those vocabularies (synthetic tasks must match them).
pub fn build_data(cfg: &RunConfig, vocabs: Option<(&Vocab, &Vocab)>) -> Result<TaskData> {
    let t = &cfg.task;
    let mut data = if t.kind.is_synthetic() {
        let kind = match t.kind {
            TaskKind::SynthCopy => SynthKind::Copy,
            TaskKind::SynthReverse => SynthKind::Reverse,
            TaskKind::SynthDigits => SynthKind::DigitsToWords,
            _ => SynthKind::Progression,
        };
        let all = synth_task(kind, t.size + t.dev_size, t.vocab, t.max_len, cfg.data_seed())?;
        if let Some((sv, tv)) = vocabs {
            if *sv != all.source_vocab || *tv != all.target_vocab {
                return Err(Error::VocabMismatch("checkpoint vocabularies differ from the task's".into()));
            }
        }
        TaskData {
            train: all.with_pairs(all.pairs[..t.size].to_vec()),
            dev: all.pairs[t.size..].to_vec(),
        }
    } else {
        let load = |src: Option<&PathBuf>, tgt: &Path| match src {
            Some(s) => load_parallel_text(s, tgt, t.max_len, t.tokenization),
            None => load_monolingual_text(tgt, t.max_len, t.tokenization),
        };
        let target = t.train_target.as_ref().expect("validated");
        let raw = load(t.train_source.as_ref(), target)?.corpus;
        let train = match vocabs {
            Some((sv, tv)) => raw.encode_with(sv, tv),
            None => raw.into_corpus(t.min_freq),
        };
        let dev = match &t.dev_target {
            Some(d) => load(t.dev_source.as_ref(), d)?
                .corpus
                .encode_with(&train.source_vocab, &train.target_vocab)
                .pairs,
            None => Vec::new(),
        };
        TaskData { train, dev }
    };
    if let Some(f) = t.subsample {
        data.train = data.train.subsample(f, cfg.seed)?;
    }
    Ok(data)
}

/// Model configuration for a corpus: decoder-only when it has no sources.
pub fn model_config(cfg: &RunConfig, corpus: &ParallelCorpus) -> ModelConfig {
    let m = &cfg.model;
    ModelConfig {
        source_vocab: corpus.source_vocab.len(),
        target_vocab: corpus.target_vocab.len(),
        embed: m.embed,
        hidden: m.hidden,
        layers: m.layers,
        mode: if corpus.is_monolingual() { ModelMode::DecoderOnly } else { ModelMode::EncoderDecoder },
        label_smoothing: m.label_smoothing,
        dropout: m.dropout,
        seed: cfg.seed,
        max_len: m.max_len,
    }
}

fn corpus_hashes(manifest: &mut RunManifest, data: &TaskData) {
    manifest.corpus_hashes.insert("train".into(), data.train.content_hash());
    if !data.dev.is_empty() {
        manifest.corpus_hashes.insert("dev".into(), data.dev_corpus().content_hash());
    }
}

/// Writes the manifest, runs `body`, then rewrites the manifest with the
/// outcome and the produced files.
fn with_run_dir<T>(
    command: &str,
    cfg: &RunConfig,
    out_dir: &Path,
    data: Option<&TaskData>,
    body: impl FnOnce(&Path, &mut Vec<String>) -> Result<T>,
) -> Result<(PathBuf, T)> {
    let dir = create_run_dir(out_dir, cfg)?;
    let mut manifest = RunManifest::new(command, cfg)?;
    if let Some(d) = data {
        corpus_hashes(&mut manifest, d);
    }
    manifest.write(&dir)?;
    let mut outputs = Vec::new();
    let result = body(&dir, &mut outputs);
    outputs.sort();
    manifest.outputs = outputs;
    match &result {
        Ok(_) => manifest.finish("ok"),
        Err(e) => manifest.finish(&format!("failed: {e}")),
    }
    manifest.write(&dir)?;
    result.map(|v| (dir, v))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn cmd_train(cfg: &RunConfig, out_dir: &Path) -> Result<String> {
    let data = build_data(cfg, None)?;
    let params = init_params(&model_config(cfg, &data.train))?;
    let (dir, out) = with_run_dir("train", cfg, out_dir, Some(&data), |dir, outputs| {
        let mut tc = cfg.train_config();
        tc.checkpoint_dir = Some(dir.to_path_buf());
        let dev = (!data.dev.is_empty()).then_some(data.dev.as_slice());
        let result = train(params, &data.train, dev, &tc);
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if name != "manifest.json" {
                outputs.push(name);
            }
        }
        result
    })?;
    let last = out.log.last();
    let mut msg = format!("run directory: {}\n", dir.display());
    if let Some(r) = last {
        msg += &format!("step {} loss {:.6}", r.step, r.loss);
        if let Some(m) = r.dev_metric {
            msg += &format!(" dev {m:.6}");
        }
        msg += "\n";
    }
    Ok(msg)
}

/// Which pairs an evaluation runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    Train,
    Dev,
}

fn split_pairs(data: &TaskData, split: Split) -> Result<&[SamplePair]> {
    let pairs = match split {
        Split::Train => &data.train.pairs[..],
        Split::Dev => &data.dev[..],
    };
    if pairs.is_empty() {
        return Err(Error::Empty(format!("{split:?} split")));
    }
    Ok(pairs)
}

fn decode_limit(params: &ModelParams, pairs: &[SamplePair]) -> usize {
    let cfg = params.config();
    if !cfg.has_encoder() {
        return cfg.max_len;
    }
    let longest = pairs.iter().map(|p| p.source.len()).max().unwrap_or(0);
    (2 * longest + 10).min(cfg.max_len)
}

fn strip(h: &[usize]) -> &[usize] {
    match h.last() {
        Some(&EOS) => &h[..h.len() - 1],
        _ => h,
    }
}

fn load_checkpoint(path: &Path) -> Result<(Checkpoint, String)> {
    Ok((Checkpoint::load(path)?, file_hash(path)?))
}

pub fn cmd_evaluate(cfg: &RunConfig, out_dir: &Path, checkpoint: &Path, metric: DevMetric, split: Split) -> Result<String> {
    let (ck, ck_hash) = load_checkpoint(checkpoint)?;
    let data = build_data(cfg, Some((&ck.header.source_vocab, &ck.header.target_vocab)))?;
    let pairs = split_pairs(&data, split)?;
    let params = &ck.params;
    let corpus = &data.train;
    let text = |v: &Vocab, ids: &[usize]| corpus.tokenization.detokenize(&v.decode(ids));
    let (value, sentences) = match metric {
        DevMetric::Perplexity => {
            let lp = target_log_probs(params, pairs)?;
            let flat: Vec<f64> = lp.iter().flatten().copied().collect();
            let ppl = crate::decode::perplexity_from_log_probs(&flat)?;
            let rows: Vec<_> = pairs
                .iter()
                .zip(&lp)
                .enumerate()
                .map(|(i, (p, l))| {
                    json!({
                        "index": i,
                        "reference": text(&corpus.target_vocab, p.target_words()),
                        "log_prob": l.iter().sum::<f64>(),
                        "tokens": l.len(),
                    })
                })
                .collect();
            (ppl, rows)
        }
        DevMetric::Bleu | DevMetric::Accuracy => {
            let sources: Vec<&[usize]> = pairs.iter().map(|p| p.source.as_slice()).collect();
            let hyps = decode_corpus(params, &sources, cfg.decode.beam, cfg.decode.length_penalty, decode_limit(params, pairs))?;
            let value = if metric == DevMetric::Bleu {
                let words: Vec<&[usize]> = hyps.iter().map(|h| strip(h)).collect();
                let refs: Vec<&[usize]> = pairs.iter().map(|p| p.target_words()).collect();
                bleu(&words, &refs, 4, false)?
            } else {
                let refs: Vec<&[usize]> = pairs.iter().map(|p| p.target.as_slice()).collect();
                token_accuracy(&hyps, &refs)?
            };
            let rows: Vec<_> = pairs
                .iter()
                .zip(&hyps)
                .enumerate()
                .map(|(i, (p, h))| {
                    json!({
                        "index": i,
                        "source": text(&corpus.source_vocab, &p.source),
                        "reference": text(&corpus.target_vocab, p.target_words()),
                        "hypothesis": text(&corpus.target_vocab, strip(h)),
                    })
                })
                .collect();
            (value, rows)
        }
    };
    let name = match metric {
        DevMetric::Accuracy => "accuracy",
        DevMetric::Bleu => "bleu",
        DevMetric::Perplexity => "perplexity",
    };
    let report = json!({
        "metric": name,
        "value": value,
        "split": format!("{split:?}").to_lowercase(),
        "beam": cfg.decode.beam,
        "length_penalty": cfg.decode.length_penalty,
        "checkpoint_hash": ck_hash,
        "sentences": sentences,
    });
    let (dir, ()) = with_run_dir("evaluate", cfg, out_dir, Some(&data), |dir, outputs| {
        let path = dir.join("evaluate.json");
        fs::write(&path, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(&path, e))?;
        outputs.push("evaluate.json".into());
        Ok(())
    })?;
    Ok(format!("{name} {value:.6}\nrun directory: {}\n", dir.display()))
}

/// Steps `0, I/(n-1), ..., I` (integer division), deduplicated.
pub fn evenly_spaced_steps(total: usize, points: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = if points <= 1 {
        vec![0]
    } else {
        (0..points).map(|k| k * total / (points - 1)).collect()
    };
    steps.dedup();
    steps
}

pub fn cmd_schedule_dump(cfg: &RunConfig, out_dir: &Path, lens: &[usize], steps: &[usize]) -> Result<String> {
    let mut rows = Vec::new();
    for &len in lens {
        rows.extend(schedule_grid(&cfg.curriculum, len, steps, cfg.seed)?);
    }
    let (dir, ()) = with_run_dir("schedule-dump", cfg, out_dir, None, |dir, outputs| {
        write_schedule_csv(&rows, create(&dir.join("schedule.csv"))?)?;
        outputs.push("schedule.csv".into());
        Ok(())
    })?;
    Ok(format!("{} rows\nrun directory: {}\n", rows.len(), dir.display()))
}

/// Cumulative unique-trigram counts after `0..=horizon` updates for each
/// method, as `(method, step, count)` rows.
pub fn diversity_rows(cfg: &RunConfig, pairs: &[SamplePair], methods: &[Variant], horizon: usize) -> Result<Vec<(Variant, usize, usize)>> {
    let mut rows = Vec::new();
    for &m in methods {
        let mut c = cfg.curriculum.clone();
        c.variant = m;
        let curve = diversity_curve(&c, pairs, horizon, cfg.seed)?;
        rows.push((m, 0, 0));
        rows.extend(curve.iter().enumerate().map(|(s, &n)| (m, s + 1, n)));
    }
    Ok(rows)
}

pub fn cmd_analyze_diversity(cfg: &RunConfig, out_dir: &Path, methods: &[Variant], horizon_fraction: f64) -> Result<String> {
    if methods.len() < 2 {
        return Err(Error::config("methods", "need at least two curricula to compare"));
    }
    if !(horizon_fraction >= 0.0 && horizon_fraction.is_finite()) {
        return Err(Error::config("horizon_fraction", "must be a non-negative number"));
    }
    let data = build_data(cfg, None)?;
    let horizon = (horizon_fraction * cfg.curriculum.steps as f64).round() as usize;
    let rows = diversity_rows(cfg, &data.train.pairs, methods, horizon)?;
    let (dir, ()) = with_run_dir("analyze-diversity", cfg, out_dir, Some(&data), |dir, outputs| {
        let mut w = csv::Writer::from_writer(create(&dir.join("diversity.csv"))?);
        w.write_record(["method", "step", "unique_trigrams"])?;
        for (m, s, n) in &rows {
            w.write_record([m.as_str().to_string(), s.to_string(), n.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        outputs.push("diversity.csv".into());
        Ok(())
    })?;
    let mut msg = format!("horizon {horizon}\n");
    for &m in methods {
        let last = rows.iter().rev().find(|r| r.0 == m).map_or(0, |r| r.2);
        msg += &format!("{m} {last}\n");
    }
    msg += &format!("run directory: {}\n", dir.display());
    Ok(msg)
}

/// One row of the positional error table.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ErrorRow {
    pub filter: String,
    pub partition: usize,
    pub error_rate: f64,
    pub sentences: usize,
    pub tokens: usize,
}

/// Positional rows for every filter (`partitions` rows each) and the tail
/// error rate per filter. Hypotheses and references exclude end markers.
pub fn error_tables<H: AsRef<[usize]>, R: AsRef<[usize]>>(
    hyps: &[H],
    refs: &[R],
    partitions: usize,
    filters: &[LengthFilter],
    tail_fraction: f64,
) -> Result<(Vec<ErrorRow>, Vec<(String, Option<f64>)>)> {
    let mut rows = Vec::new();
    let mut tails = Vec::new();
    for f in filters {
        let keep: Vec<usize> = (0..refs.len()).filter(|&i| f.accepts(refs[i].as_ref().len())).collect();
        let h: Vec<&[usize]> = keep.iter().map(|&i| hyps[i].as_ref()).collect();
        let r: Vec<&[usize]> = keep.iter().map(|&i| refs[i].as_ref()).collect();
        let pe = positional_error_rate(&h, &r, partitions)?;
        for k in 0..partitions {
            rows.push(ErrorRow {
                filter: f.label(),
                partition: k,
                error_rate: pe.rates[k],
                sentences: pe.sentences[k],
                tokens: pe.tokens[k],
            });
        }
        let tail = match tail_error_rate(hyps, refs, tail_fraction, *f) {
            Ok(v) => Some(v),
            Err(Error::Empty(_)) => None,
            Err(e) => return Err(e),
        };
        tails.push((f.label(), tail));
    }
    Ok((rows, tails))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_analyze_errors(
    cfg: &RunConfig,
    out_dir: &Path,
    checkpoint: &Path,
    split: Split,
    partitions: usize,
    filters: &[String],
    tail_fraction: f64,
) -> Result<String> {
    if partitions == 0 {
        return Err(Error::config("partitions", "must be at least 1"));
    }
    let filters = filters
        .iter()
        .map(|s| LengthFilter::parse(s).map_err(|e| Error::config("filters", e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let (ck, _) = load_checkpoint(checkpoint)?;
    let data = build_data(cfg, Some((&ck.header.source_vocab, &ck.header.target_vocab)))?;
    let pairs = split_pairs(&data, split)?;
    let sources: Vec<&[usize]> = pairs.iter().map(|p| p.source.as_slice()).collect();
    let hyps = decode_corpus(&ck.params, &sources, cfg.decode.beam, cfg.decode.length_penalty, decode_limit(&ck.params, pairs))?;
    let words: Vec<&[usize]> = hyps.iter().map(|h| strip(h)).collect();
    let refs: Vec<&[usize]> = pairs.iter().map(|p| p.target_words()).collect();
    let (rows, tails) = error_tables(&words, &refs, partitions, &filters, tail_fraction)?;
    let (dir, ()) = with_run_dir("analyze-errors", cfg, out_dir, Some(&data), |dir, outputs| {
        let mut w = csv::Writer::from_writer(create(&dir.join("errors.csv"))?);
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush().map_err(csv::Error::from)?;
        let mut t = csv::Writer::from_writer(create(&dir.join("errors_tail.csv"))?);
        t.write_record(["filter", "tail_fraction", "error_rate"])?;
        for (label, v) in &tails {
            t.write_record([label.clone(), tail_fraction.to_string(), v.map(|x| x.to_string()).unwrap_or_default()])?;
        }
        t.flush().map_err(csv::Error::from)?;
        outputs.extend(["errors.csv".to_string(), "errors_tail.csv".to_string()]);
        Ok(())
    })?;
    let mut msg = String::new();
    for r in &rows {
        msg += &format!("{} {} {:.4}\n", r.filter, r.partition, r.error_rate);
    }
    msg += &format!("run directory: {}\n", dir.display());
    Ok(msg)
}

/// `(step, value)` pairs of one column of a training-log CSV; empty cells
/// are skipped.
pub fn read_metric_history(path: &Path, column: &str) -> Result<Vec<(usize, f64)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r.headers()?.clone();
    let step_col = headers.iter().position(|h| h == "step").ok_or_else(|| Error::MissingColumn("step".into()))?;
    let col = headers.iter().position(|h| h == column).ok_or_else(|| Error::MissingColumn(column.into()))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let cell = rec.get(col).unwrap_or("").trim();
        if cell.is_empty() {
            continue;
        }
        let step = rec
            .get(step_col)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::invalid(format!("bad step value in {}", path.display())))?;
        let value = cell
            .parse()
            .map_err(|_| Error::invalid(format!("bad {column} value `{cell}` in {}", path.display())))?;
        out.push((step, value));
    }
    Ok(out)
}

pub fn cmd_tune_length(log: &Path, column: &str, fraction: f64, direction: MetricDirection) -> Result<String> {
    let history = read_metric_history(log, column)?;
    let steps = estimate_curriculum_length(&history, fraction, direction, None)?;
    Ok(format!("{steps}\n"))
}
