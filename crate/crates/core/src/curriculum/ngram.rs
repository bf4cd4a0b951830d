use std::collections::HashMap;

/// Interpolated n-gram language model over token ids.
///
/// Each order `k = 1..=n` uses an add-`delta` estimate
/// `(c(h, w) + delta) / (c(h) + delta * V)` and the orders are averaged
/// with equal weight. Sentences are padded with `n - 1` start symbols and
/// scored including an end symbol.
#[derive(Clone, Debug)]
pub struct NGramLm {
    order: usize,
    delta: f64,
    vocab: usize,
    /// Counts of n-grams of every length `1..=order`, keyed by the token run.
    grams: HashMap<Vec<u32>, u32>,
    /// `c(h)` for every context `h` of length `0..order`.
    contexts: HashMap<Vec<u32>, u32>,
}

const START: u32 = u32::MAX - 1;
const END: u32 = u32::MAX;

impl NGramLm {
    pub fn train<'a, I>(sentences: I, order: usize, delta: f64) -> Self
    where
        I: IntoIterator<Item = &'a [usize]>,
    {
        assert!(order >= 1 && delta > 0.0);
        let mut lm = NGramLm {
            order,
            delta,
            vocab: 0,
            grams: HashMap::new(),
            contexts: HashMap::new(),
        };
        let mut types = std::collections::HashSet::new();
        for sentence in sentences {
            let seq = lm.padded(sentence);
            for &t in &seq[order - 1..] {
                types.insert(t);
            }
            for pos in order - 1..seq.len() {
                for k in 1..=order {
                    let gram = &seq[pos + 1 - k..=pos];
                    *lm.grams.entry(gram.to_vec()).or_default() += 1;
                    *lm.contexts.entry(gram[..k - 1].to_vec()).or_default() += 1;
                }
            }
        }
        // +1 leaves mass for tokens never seen in training
        lm.vocab = types.len() + 1;
        lm
    }

    fn padded(&self, sentence: &[usize]) -> Vec<u32> {
        let mut seq = vec![START; self.order - 1];
        seq.extend(sentence.iter().map(|&t| t as u32));
        seq.push(END);
        seq
    }

    /// Natural-log probability of the sentence (including its end symbol)
    /// and the number of predicted tokens.
    pub fn log_prob(&self, sentence: &[usize]) -> (f64, usize) {
        let seq = self.padded(sentence);
        let mut total = 0.0;
        for pos in self.order - 1..seq.len() {
            let mut p = 0.0;
            for k in 1..=self.order {
                let gram = &seq[pos + 1 - k..=pos];
                let c_hw = self.grams.get(gram).copied().unwrap_or(0) as f64;
                let c_h = self.contexts.get(&gram[..k - 1]).copied().unwrap_or(0) as f64;
                p += (c_hw + self.delta) / (c_h + self.delta * self.vocab as f64);
            }
            total += (p / self.order as f64).ln();
        }
        (total, seq.len() + 1 - self.order)
    }

    /// Per-token perplexity of one sentence.
    pub fn perplexity(&self, sentence: &[usize]) -> f64 {
        let (lp, n) = self.log_prob(sentence);
        (-lp / n as f64).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_normalizes_over_observed_types() {
        let data: Vec<Vec<usize>> = vec![vec![1, 2, 3], vec![1, 2, 2], vec![3, 1]];
        let lm = NGramLm::train(data.iter().map(Vec::as_slice), 3, 0.1);
        // p(w | START 1) summed over every observed type, one unseen id and END
        let mut total = 0.0;
        for w in [1usize, 2, 3, 99] {
            let seq = [START, START, 1u32, w as u32];
            let mut p = 0.0;
            for k in 1..=3 {
                let gram = &seq[4 - k..];
                let c_hw = lm.grams.get(gram).copied().unwrap_or(0) as f64;
                let c_h = lm.contexts.get(&gram[..k - 1]).copied().unwrap_or(0) as f64;
                p += (c_hw + 0.1) / (c_h + 0.1 * lm.vocab as f64);
            }
            total += p / 3.0;
        }
        // plus END as a successor
        let seq = [START, START, 1u32, END];
        let mut p = 0.0;
        for k in 1..=3 {
            let gram = &seq[4 - k..];
            let c_hw = lm.grams.get(gram).copied().unwrap_or(0) as f64;
            let c_h = lm.contexts.get(&gram[..k - 1]).copied().unwrap_or(0) as f64;
            p += (c_hw + 0.1) / (c_h + 0.1 * lm.vocab as f64);
        }
        total += p / 3.0;
        assert!((total - 1.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn repeated_sentence_is_easy() {
        let mut data: Vec<Vec<usize>> = (0..30).map(|i| vec![10 + i % 7, 20 + i % 5, 30 + i % 3]).collect();
        for _ in 0..20 {
            data.push(vec![5, 6, 7, 8]);
        }
        let lm = NGramLm::train(data.iter().map(Vec::as_slice), 4, 0.1);
        let easy = lm.perplexity(&[5, 6, 7, 8]);
        for s in &data[..30] {
            assert!(easy < lm.perplexity(s));
        }
    }
}
