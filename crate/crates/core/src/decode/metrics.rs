use crate::curriculum::WeightVector;
use crate::data::SamplePair;
use crate::error::{Error, Result};
use crate::model::{weighted_loss_graph, ModelParams};

/// `exp(-mean log p)` over a flat list of token log-probabilities.
pub fn perplexity_from_log_probs(log_probs: &[f64]) -> Result<f64> {
    if log_probs.is_empty() {
        return Err(Error::Empty("no tokens to score".into()));
    }
    Ok((-log_probs.iter().sum::<f64>() / log_probs.len() as f64).exp())
}

/// Per-token `log p(y_t | y_<t, x)` of every target (end marker included),
/// without label smoothing.
pub fn target_log_probs(params: &ModelParams, pairs: &[SamplePair]) -> Result<Vec<Vec<f64>>> {
    let mut cfg = params.config().clone();
    cfg.label_smoothing = 0.0;
    let mut out = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(64) {
        let mut g = crate::autodiff::Graph::new();
        let nodes = params
            .tensors()
            .iter()
            .map(|(n, t)| (n.clone(), g.constant(t.clone())))
            .collect();
        let w: Vec<WeightVector> = chunk.iter().map(|p| WeightVector::ones(p.target.len())).collect();
        let ln = weighted_loss_graph(&mut g, &nodes, &cfg, chunk, &w, None)?;
        let nll = g.value(ln.token_nll).data();
        for (b, p) in chunk.iter().enumerate() {
            let row = &nll[b * ln.max_target_len..b * ln.max_target_len + p.target.len()];
            out.push(row.iter().map(|v| -v).collect());
        }
    }
    Ok(out)
}

/// Unweighted corpus perplexity over target tokens.
pub fn perplexity(params: &ModelParams, pairs: &[SamplePair]) -> Result<f64> {
    let lp: Vec<f64> = target_log_probs(params, pairs)?.into_iter().flatten().collect();
    perplexity_from_log_probs(&lp)
}

/// Fraction of reference tokens reproduced at the same position.
pub fn token_accuracy<H: AsRef<[usize]>, R: AsRef<[usize]>>(hypotheses: &[H], references: &[R]) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::invalid("hypothesis and reference counts differ"));
    }
    let (mut hit, mut total) = (0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        let (h, r) = (h.as_ref(), r.as_ref());
        total += r.len();
        hit += r.iter().enumerate().filter(|&(t, y)| h.get(t) == Some(y)).count();
    }
    if total == 0 {
        return Err(Error::Empty("no reference tokens".into()));
    }
    Ok(hit as f64 / total as f64)
}

/// Per-partition error rates averaged over sentences.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionalErrors {
    /// Mean error rate per relative partition; 0 where no sentence has tokens.
    pub rates: Vec<f64>,
    /// Sentences contributing to each partition.
    pub sentences: Vec<usize>,
    /// Total reference tokens falling in each partition.
    pub tokens: Vec<usize>,
    /// Empty references that were skipped.
    pub skipped: usize,
}

/// Partition of reference position `t` (0-based) in a sentence of length `len`.
pub fn partition_of(t: usize, len: usize, partitions: usize) -> usize {
    t * partitions / len
}

/// Token at reference position `t` is an error unless the hypothesis holds
/// the same token at position `t`; positions past the hypothesis end are
/// errors. Each reference is cut into `partitions` relative segments and
/// per-segment rates are averaged over sentences.
pub fn positional_error_rate<H: AsRef<[usize]>, R: AsRef<[usize]>>(
    hypotheses: &[H],
    references: &[R],
    partitions: usize,
) -> Result<PositionalErrors> {
    if partitions == 0 {
        return Err(Error::invalid("partitions must be positive"));
    }
    if hypotheses.len() != references.len() {
        return Err(Error::invalid("hypothesis and reference counts differ"));
    }
    let mut sums = vec![0.0; partitions];
    let mut out = PositionalErrors {
        rates: vec![0.0; partitions],
        sentences: vec![0; partitions],
        tokens: vec![0; partitions],
        skipped: 0,
    };
    for (h, r) in hypotheses.iter().zip(references) {
        let (h, r) = (h.as_ref(), r.as_ref());
        if r.is_empty() {
            out.skipped += 1;
            continue;
        }
        let mut errors = vec![0usize; partitions];
        let mut counts = vec![0usize; partitions];
        for (t, y) in r.iter().enumerate() {
            let k = partition_of(t, r.len(), partitions);
            counts[k] += 1;
            if h.get(t) != Some(y) {
                errors[k] += 1;
            }
        }
        for k in 0..partitions {
            if counts[k] > 0 {
                sums[k] += errors[k] as f64 / counts[k] as f64;
                out.sentences[k] += 1;
                out.tokens[k] += counts[k];
            }
        }
    }
    for k in 0..partitions {
        if out.sentences[k] > 0 {
            out.rates[k] = sums[k] / out.sentences[k] as f64;
        }
    }
    Ok(out)
}

/// Inclusive range of reference lengths; `max = None` is unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LengthFilter {
    pub min: usize,
    pub max: Option<usize>,
}

impl LengthFilter {
    pub const ALL: LengthFilter = LengthFilter { min: 0, max: None };

    pub fn accepts(&self, len: usize) -> bool {
        len >= self.min && self.max.is_none_or(|m| len <= m)
    }

    /// Parses `a-b`, `a-` or `all`.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(Self::ALL);
        }
        let bad = || Error::invalid(format!("length filter `{s}` is not of the form a-b, a- or all"));
        let (lo, hi) = s.split_once('-').ok_or_else(bad)?;
        let min = lo.trim().parse().map_err(|_| bad())?;
        let max = match hi.trim() {
            "" => None,
            v => Some(v.parse().map_err(|_| bad())?),
        };
        if max.is_some_and(|m| m < min) {
            return Err(bad());
        }
        Ok(Self { min, max })
    }

    pub fn label(&self) -> String {
        match self.max {
            _ if *self == Self::ALL => "all".into(),
            Some(m) => format!("{}-{m}", self.min),
            None => format!("{}-", self.min),
        }
    }
}

/// Error rate over the last `ceil(fraction * len)` reference positions,
/// averaged over sentences whose reference length passes `filter`.
pub fn tail_error_rate<H: AsRef<[usize]>, R: AsRef<[usize]>>(
    hypotheses: &[H],
    references: &[R],
    fraction: f64,
    filter: LengthFilter,
) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("tail fraction must lie in (0, 1], got {fraction}")));
    }
    if hypotheses.len() != references.len() {
        return Err(Error::invalid("hypothesis and reference counts differ"));
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        let (h, r) = (h.as_ref(), r.as_ref());
        if r.is_empty() || !filter.accepts(r.len()) {
            continue;
        }
        let k = ((fraction * r.len() as f64) - 1e-9).ceil().max(1.0) as usize;
        let start = r.len() - k.min(r.len());
        let errors = (start..r.len()).filter(|&t| h.get(t) != Some(&r[t])).count();
        sum += errors as f64 / (r.len() - start) as f64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty(format!("no sentence passes length filter {}", filter.label())));
    }
    Ok(sum / n as f64)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; 0 when either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("spearman needs two equal-length series of at least 2 points"));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}
