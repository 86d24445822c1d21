//! Per-epoch batch plans: padded varying-length batches or length-aligned
//! batches, plus materialization of index sets into padded blocks.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::rng::Rng;
use crate::sequence_data::ClientDataset;
use crate::Result;

/// Batch construction strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Uniform shuffle, batches may mix sequence lengths.
    Varying,
    /// Exact-length buckets; every batch holds a single length.
    Aligned,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Varying => "vl",
            Strategy::Aligned => "aligned",
        }
    }

    pub fn parse(s: &str) -> Option<Strategy> {
        match s {
            "vl" | "varying" => Some(Strategy::Varying),
            "aligned" | "fl" => Some(Strategy::Aligned),
            _ => None,
        }
    }
}

/// One local epoch's batches as index sets into the client dataset.
/// The index sets partition the dataset: each example appears exactly once.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchPlan {
    pub batches: Vec<Vec<usize>>,
    pub strategy: Strategy,
}

/// Padded feature block for one batch.
///
/// `features` is time-major `t_max x size x dim`; column `j` of `mask` has
/// exactly `lengths[j]` leading ones and padded cells of `features` are 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub features: Vec<f64>,
    pub lengths: Vec<usize>,
    pub mask: Vec<bool>,
    pub labels: Vec<usize>,
    pub dim: usize,
    pub t_max: usize,
}

impl Batch {
    pub fn size(&self) -> usize {
        self.labels.len()
    }
}

/// Shuffle all examples and chunk into consecutive groups of `batch_size`;
/// the final chunk may be smaller. Batches may mix lengths.
pub fn plan_varying(dataset: &ClientDataset, batch_size: usize, seed: u64) -> Result<BatchPlan> {
    assert!(batch_size >= 1, "batch_size must be >= 1");
    if dataset.examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = Rng::new(seed);
    let mut idx: Vec<usize> = (0..dataset.examples.len()).collect();
    rng.shuffle(&mut idx);
    let batches = idx.chunks(batch_size).map(|c| c.to_vec()).collect();
    Ok(BatchPlan { batches, strategy: Strategy::Varying })
}

/// Group examples into exact-length buckets, shuffle and chunk each bucket
/// independently, then visit buckets in a shuffled order. Every batch is
/// length-pure. With a single bucket this degenerates to [`plan_varying`]
/// exactly (same seed stream, so the same plan).
pub fn plan_aligned(dataset: &ClientDataset, batch_size: usize, seed: u64) -> Result<BatchPlan> {
    assert!(batch_size >= 1, "batch_size must be >= 1");
    if dataset.examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = Rng::new(seed);
    // buckets keyed by length, ascending, so the stream consumption order
    // is a pure function of the data
    let mut lengths: Vec<usize> = dataset.examples.iter().map(|e| e.length).collect();
    let mut menu: Vec<usize> = lengths.clone();
    menu.sort_unstable();
    menu.dedup();
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); menu.len()];
    for (i, len) in lengths.drain(..).enumerate() {
        let b = menu.binary_search(&len).unwrap();
        buckets[b].push(i);
    }
    let mut chunked: Vec<Vec<Vec<usize>>> = Vec::with_capacity(buckets.len());
    for bucket in buckets.iter_mut() {
        rng.shuffle(bucket);
        chunked.push(bucket.chunks(batch_size).map(|c| c.to_vec()).collect());
    }
    let mut visit: Vec<usize> = (0..chunked.len()).collect();
    rng.shuffle(&mut visit);
    let mut batches = Vec::new();
    for b in visit {
        batches.append(&mut chunked[b]);
    }
    Ok(BatchPlan { batches, strategy: Strategy::Aligned })
}

/// Build the padded block for one plan entry. Pads to the batch-local
/// maximum length with zeros and an explicit validity mask; for aligned
/// plans the mask is all ones.
pub fn materialize(dataset: &ClientDataset, indices: &[usize]) -> Batch {
    assert!(!indices.is_empty(), "cannot materialize an empty batch");
    for &i in indices {
        assert!(
            i < dataset.examples.len(),
            "batch index {} out of range for {} examples",
            i,
            dataset.examples.len()
        );
    }
    let b = indices.len();
    let dim = dataset.examples[indices[0]].dim;
    let lengths: Vec<usize> = indices.iter().map(|&i| dataset.examples[i].length).collect();
    let labels: Vec<usize> = indices.iter().map(|&i| dataset.examples[i].label).collect();
    let t_max = *lengths.iter().max().unwrap();
    let mut features = vec![0.0; t_max * b * dim];
    let mut mask = vec![false; t_max * b];
    for (j, &i) in indices.iter().enumerate() {
        let ex = &dataset.examples[i];
        assert_eq!(ex.dim, dim, "mixed feature widths in one batch");
        for t in 0..ex.length {
            mask[t * b + j] = true;
            let src = &ex.features[t * dim..(t + 1) * dim];
            features[(t * b + j) * dim..(t * b + j + 1) * dim].copy_from_slice(src);
        }
    }
    Batch { features, lengths, mask, labels, dim, t_max }
}
