use rand::seq::SliceRandom;

use super::corpus::SamplePair;
use super::vocab::PAD;
use crate::curriculum::WeightVector;
use crate::error::{Error, Result};
use crate::rng::keyed;

/// Sentences sorted by length inside windows of this many shuffled entries.
const BUCKET_WINDOW: usize = 1024;

/// A group of training pairs whose total target length fits the token budget.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// Corpus indices of the member pairs.
    pub indices: Vec<usize>,
    pub pairs: Vec<SamplePair>,
    /// Per-sentence curriculum weights; empty until the trainer assigns them.
    pub weights: Vec<WeightVector>,
}

impl Batch {
    pub fn from_indices(pairs: &[SamplePair], indices: Vec<usize>) -> Self {
        let members = indices.iter().map(|&i| pairs[i].clone()).collect();
        Self {
            indices,
            pairs: members,
            weights: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn source_lens(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.source.len()).collect()
    }

    pub fn target_lens(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.target.len()).collect()
    }

    /// Non-pad target tokens.
    pub fn target_tokens(&self) -> usize {
        self.pairs.iter().map(|p| p.target.len()).sum()
    }

    /// Sources right-padded with [`PAD`].
    pub fn source_matrix(&self) -> Vec<Vec<usize>> {
        pad_rows(self.pairs.iter().map(|p| p.source.as_slice()))
    }

    /// Targets right-padded with [`PAD`].
    pub fn target_matrix(&self) -> Vec<Vec<usize>> {
        pad_rows(self.pairs.iter().map(|p| p.target.as_slice()))
    }
}

fn pad_rows<'a>(rows: impl Iterator<Item = &'a [usize]> + Clone) -> Vec<Vec<usize>> {
    let width = rows.clone().map(<[usize]>::len).max().unwrap_or(0);
    rows.map(|r| {
        let mut row = r.to_vec();
        row.resize(width, PAD);
        row
    })
    .collect()
}

/// Groups `indices` into batches of at most `budget` target tokens: shuffle,
/// sort by length inside fixed windows, fill greedily, then shuffle the
/// batch order. Deterministic for a given `(seed, epoch)`.
pub fn batch_indices(pairs: &[SamplePair], indices: &[usize], budget: usize, seed: u64, epoch: u64) -> Result<Vec<Vec<usize>>> {
    for &i in indices {
        let len = pairs[i].target.len();
        if len > budget {
            return Err(Error::OverBudget {
                index: i,
                tokens: len,
                budget,
            });
        }
    }
    let mut order = indices.to_vec();
    order.shuffle(&mut keyed(seed, &[epoch, 0]));
    for window in order.chunks_mut(BUCKET_WINDOW) {
        window.sort_by_key(|&i| (pairs[i].target.len(), pairs[i].source.len()));
    }

    let mut batches = Vec::new();
    let mut current = Vec::new();
    let mut tokens = 0;
    for i in order {
        let len = pairs[i].target.len();
        if tokens + len > budget && !current.is_empty() {
            batches.push(std::mem::take(&mut current));
            tokens = 0;
        }
        current.push(i);
        tokens += len;
    }
    if !current.is_empty() {
        batches.push(current);
    }
    batches.shuffle(&mut keyed(seed, &[epoch, 1]));
    Ok(batches)
}

/// One epoch of token-budgeted batches over the whole corpus.
pub fn batch_by_tokens(pairs: &[SamplePair], budget: usize, seed: u64, epoch: u64) -> Result<Vec<Batch>> {
    if pairs.is_empty() {
        return Err(Error::Empty("cannot batch an empty corpus".into()));
    }
    let all: Vec<usize> = (0..pairs.len()).collect();
    Ok(batch_indices(pairs, &all, budget, seed, epoch)?
        .into_iter()
        .map(|idx| Batch::from_indices(pairs, idx))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(lens: &[usize]) -> Vec<SamplePair> {
        lens.iter()
            .enumerate()
            .map(|(i, &l)| SamplePair::new(vec![4 + i % 5; l], vec![5; l]))
            .collect()
    }

    #[test]
    fn whole_budget_gives_one_batch() {
        let p = pairs(&[3, 5, 2, 7]);
        let total: usize = p.iter().map(|x| x.target.len()).sum();
        let batches = batch_by_tokens(&p, total, 1, 0).unwrap();
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].target_tokens(), total);
    }

    #[test]
    fn longest_sentence_budget() {
        let p = pairs(&[3, 5, 2, 7]);
        let budget = 8; // longest target incl. EOS
        let batches = batch_by_tokens(&p, budget, 1, 0).unwrap();
        assert!(batches.iter().all(|b| !b.is_empty() && b.target_tokens() <= budget));
        assert!(matches!(batch_by_tokens(&p, 7, 1, 0), Err(Error::OverBudget { tokens: 8, .. })));
    }

    #[test]
    fn deterministic_per_seed_and_epoch() {
        let p = pairs(&[3, 5, 2, 7, 1, 1, 4, 9, 2, 3]);
        assert_eq!(batch_by_tokens(&p, 12, 4, 2).unwrap(), batch_by_tokens(&p, 12, 4, 2).unwrap());
        assert_ne!(
            batch_by_tokens(&p, 12, 4, 2).unwrap().iter().map(|b| b.indices.clone()).collect::<Vec<_>>(),
            batch_by_tokens(&p, 12, 4, 3).unwrap().iter().map(|b| b.indices.clone()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn padding() {
        let p = pairs(&[1, 3]);
        let b = Batch::from_indices(&p, vec![0, 1]);
        let t = b.target_matrix();
        assert_eq!(t[0].len(), 4);
        assert_eq!(t[0][2..], [PAD, PAD]);
        assert_eq!(b.target_lens(), vec![2, 4]);
    }

    proptest! {
        #[test]
        fn epoch_partitions_corpus(lens in prop::collection::vec(1usize..15, 1..60), seed in 0u64..50, extra in 0usize..40) {
            let p = pairs(&lens);
            let budget = lens.iter().max().unwrap() + 1 + extra;
            let batches = batch_by_tokens(&p, budget, seed, 0).unwrap();
            let mut seen: Vec<usize> = batches.iter().flat_map(|b| b.indices.clone()).collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..p.len()).collect::<Vec<_>>());
            for b in &batches {
                prop_assert!(b.target_tokens() <= budget);
            }
        }
    }
}
