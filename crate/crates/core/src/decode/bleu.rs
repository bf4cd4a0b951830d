use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

/// Corpus-level n-gram statistics behind a BLEU score.
#[derive(Clone, Debug, PartialEq)]
pub struct BleuStats {
    /// Clipped matches per order `1..=max_n`.
    pub matches: Vec<usize>,
    /// Hypothesis n-gram counts per order.
    pub totals: Vec<usize>,
    pub hyp_len: usize,
    pub ref_len: usize,
}

fn ngrams<T: Hash + Eq>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Accumulates clipped n-gram matches over all pairs.
pub fn bleu_stats<T: Hash + Eq, H: AsRef<[T]>, R: AsRef<[T]>>(hypotheses: &[H], references: &[R], max_n: usize) -> Result<BleuStats> {
    if hypotheses.is_empty() {
        return Err(Error::Empty("no hypotheses to score".into()));
    }
    if hypotheses.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} hypotheses for {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if max_n == 0 {
        return Err(Error::invalid("max_n must be positive"));
    }
    let mut s = BleuStats {
        matches: vec![0; max_n],
        totals: vec![0; max_n],
        hyp_len: 0,
        ref_len: 0,
    };
    for (h, r) in hypotheses.iter().zip(references) {
        let (h, r) = (h.as_ref(), r.as_ref());
        s.hyp_len += h.len();
        s.ref_len += r.len();
        for n in 1..=max_n {
            let rc = ngrams(r, n);
            for (gram, c) in ngrams(h, n) {
                s.matches[n - 1] += c.min(rc.get(gram).copied().unwrap_or(0));
                s.totals[n - 1] += c;
            }
        }
    }
    Ok(s)
}

impl BleuStats {
    /// Clipped precision of order `n` (1-based).
    pub fn precision(&self, n: usize) -> f64 {
        if self.totals[n - 1] == 0 {
            return 0.0;
        }
        self.matches[n - 1] as f64 / self.totals[n - 1] as f64
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        }
    }

    /// BLEU in `[0, 100]`. With `smooth`, orders above 1 use
    /// `(matches + 1) / (total + 1)`.
    pub fn score(&self, smooth: bool) -> f64 {
        let max_n = self.matches.len();
        let mut log_sum = 0.0;
        for n in 1..=max_n {
            let p = if smooth && n > 1 {
                (self.matches[n - 1] + 1) as f64 / (self.totals[n - 1] + 1) as f64
            } else {
                self.precision(n)
            };
            if p == 0.0 {
                return 0.0;
            }
            log_sum += p.ln();
        }
        let bp = self.brevity_penalty();
        if self.matches == self.totals && bp == 1.0 {
            // exact match: avoid exp(ln(1)) rounding
            return 100.0;
        }
        100.0 * bp * (log_sum / max_n as f64).exp()
    }
}

/// Corpus BLEU with uniform weights over orders `1..=max_n`.
pub fn bleu<T: Hash + Eq, H: AsRef<[T]>, R: AsRef<[T]>>(hypotheses: &[H], references: &[R], max_n: usize, smooth: bool) -> Result<f64> {
    Ok(bleu_stats(hypotheses, references, max_n)?.score(smooth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identity_is_100() {
        let h = [words("a b c d e"), words("x y z w")];
        assert_eq!(bleu(&h, &h, 4, false).unwrap(), 100.0);
    }

    #[test]
    fn clipping() {
        let s = bleu_stats(&[words("the the the")], &[words("the cat")], 4).unwrap();
        assert_eq!(s.precision(1), 1.0 / 3.0);
        assert_eq!(bleu(&[words("the the the")], &[words("the cat")], 4, false).unwrap(), 0.0);
    }

    #[test]
    fn no_four_gram_overlap() {
        let h = [words("a b c d e")];
        let r = [words("a b c x e")];
        assert_eq!(bleu(&h, &r, 4, false).unwrap(), 0.0);
        assert!(bleu(&h, &r, 4, true).unwrap() > 0.0);
    }

    #[test]
    fn brevity() {
        let s = bleu_stats(&[words("a b")], &[words("a b c d")], 2).unwrap();
        assert!((s.brevity_penalty() - (-1f64).exp()).abs() < 1e-15);
        assert!(bleu_stats::<&str, Vec<&str>, Vec<&str>>(&[], &[], 4).is_err());
    }
}
