use std::collections::HashSet;

use rand_chacha::ChaCha8Rng;

use crate::curriculum::{CurriculumConfig, SentenceSchedule, Variant};
use crate::data::SamplePair;
use crate::error::{Error, Result};
use crate::rng::keyed;

/// Which side of a pair a token run comes from; trigrams from different
/// sides are never merged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Source,
    Target,
}

/// Set of unique trigrams seen in training-consumed text.
#[derive(Clone, Debug, Default)]
pub struct DiversityCounter {
    seen: HashSet<(Side, [usize; 3])>,
}

impl DiversityCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts every length-3 window of `tokens`; returns the new total.
    pub fn insert(&mut self, side: Side, tokens: &[usize]) -> usize {
        for w in tokens.windows(3) {
            self.seen.insert((side, [w[0], w[1], w[2]]));
        }
        self.seen.len()
    }

    /// Inserts the windows whose three positions are all selected by `mask`.
    pub fn insert_masked(&mut self, side: Side, tokens: &[usize], mask: &[bool]) -> usize {
        for t in 0..tokens.len().saturating_sub(2) {
            if mask[t] && mask[t + 1] && mask[t + 2] {
                self.seen.insert((side, [tokens[t], tokens[t + 1], tokens[t + 2]]));
            }
        }
        self.seen.len()
    }

    pub fn count(&self) -> usize {
        self.seen.len()
    }
}

/// Adds the target side of each sequence and returns the cumulative count.
pub fn unique_trigram_count<'a>(counter: &mut DiversityCounter, sequences: impl IntoIterator<Item = &'a [usize]>) -> usize {
    for s in sequences {
        counter.insert(Side::Target, s);
    }
    counter.count()
}

/// Sentence-level schedule implied by `config`, if it has one.
pub fn sentence_schedule(config: &CurriculumConfig, pairs: &[SamplePair]) -> Result<Option<SentenceSchedule>> {
    use crate::curriculum::{rarity_difficulty, sc_uncertainty_baby_steps, ScMethod};
    Ok(match config.sentence_method() {
        None => None,
        Some(ScMethod::Rsqrt) => Some(SentenceSchedule::rsqrt(
            &rarity_difficulty(pairs),
            config.sentence_steps(),
            config.sc_c0,
        )?),
        Some(ScMethod::Unc) => Some(sc_uncertainty_baby_steps(pairs, config.sc_baby_steps, config.sentence_steps())?),
    })
}

/// Target positions (end marker excluded) that carry nonzero loss weight
/// for sentence `index` at `step`.
pub fn consumed_target_mask(config: &CurriculumConfig, pair: &SamplePair, index: usize, step: usize, seed: u64) -> Result<Vec<bool>> {
    let mut rng: ChaCha8Rng = keyed(seed, &[0xAB1A, step as u64, index as u64]);
    let w = config.token_weights(pair.target.len(), step, Some(&mut rng), None)?;
    Ok(w.weights()[..pair.target_words().len()].iter().map(|&v| v > 0.0).collect())
}

/// Cumulative unique-trigram count after each of the steps `0..horizon`.
///
/// At step `i` training can see every sentence the sentence-level schedule
/// has released (all sentences for token-wise variants): its full source
/// and the target positions with nonzero weight.
pub fn diversity_curve(config: &CurriculumConfig, pairs: &[SamplePair], horizon: usize, seed: u64) -> Result<Vec<usize>> {
    if config.variant == Variant::AblationLowLoss {
        return Err(Error::invalid("ablation-lowloss selections depend on model losses"));
    }
    let schedule = sentence_schedule(config, pairs)?;
    let mut counter = DiversityCounter::new();
    let mut masks: Vec<Option<Vec<bool>>> = vec![None; pairs.len()];
    let mut curve = Vec::with_capacity(horizon);
    let all: Vec<usize> = (0..pairs.len()).collect();
    for step in 0..horizon {
        let active = match &schedule {
            Some(s) => s.selected(step),
            None => &all[..],
        };
        for &i in active {
            let mask = consumed_target_mask(config, &pairs[i], i, step, seed)?;
            if masks[i].is_none() {
                counter.insert(Side::Source, &pairs[i].source);
            }
            if masks[i].as_ref() != Some(&mask) {
                counter.insert_masked(Side::Target, pairs[i].target_words(), &mask);
                masks[i] = Some(mask);
            }
        }
        curve.push(counter.count());
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_counts() {
        let mut c = DiversityCounter::new();
        assert_eq!(c.insert(Side::Target, &[1, 2, 3, 4]), 2);
        assert_eq!(c.insert(Side::Target, &[1, 2, 3, 4]), 2);
        assert_eq!(c.insert(Side::Source, &[1, 2, 3]), 3);
        let mut p = DiversityCounter::new();
        assert_eq!(p.insert_masked(Side::Target, &[1, 2, 3, 4], &[true, true, true, false]), 1);
    }

    #[test]
    fn zero_horizon() {
        let pairs = vec![SamplePair::new(vec![4, 5, 6], vec![4, 5, 6])];
        let cfg = CurriculumConfig::new(Variant::TcHard).with_steps(10);
        assert!(diversity_curve(&cfg, &pairs, 0, 0).unwrap().is_empty());
    }

    #[test]
    fn full_sentences_dominate_prefixes() {
        let pairs: Vec<SamplePair> = (0..20)
            .map(|i| SamplePair::new(vec![4 + i % 7, 5 + i % 3, 6 + i % 5, 7], (0..8).map(|t| 4 + (i * 3 + t) % 11).collect()))
            .collect();
        let hard = CurriculumConfig::new(Variant::TcHard).with_steps(100);
        let base = CurriculumConfig::new(Variant::None);
        let h = diversity_curve(&hard, &pairs, 50, 0).unwrap();
        let b = diversity_curve(&base, &pairs, 50, 0).unwrap();
        assert!(h.iter().zip(&b).all(|(x, y)| x <= y));
        assert!(h.windows(2).all(|w| w[0] <= w[1]));
    }
}
