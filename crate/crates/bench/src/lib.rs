//! Deterministic fixtures shared by the benchmarks.

use dualctx::{DualMemory, LabeledExample, MemoryConfig, Query, ShortSize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` examples with `d` uniform features and labels cycling over
/// `n_classes`, with a fixed seed.
pub fn examples(n: usize, d: usize, n_classes: usize) -> Vec<LabeledExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..n)
        .map(|t| LabeledExample {
            features: (0..d).map(|_| rng.random::<f64>()).collect::<Vec<_>>().into(),
            label: t % n_classes,
            arrival_index: t as u64,
        })
        .collect()
}

/// A memory of capacity `total` (75% short-term) that has already observed
/// `4 * total` examples, so both buffers are full.
pub fn full_memory(total: usize, d: usize, n_classes: usize) -> DualMemory {
    let config = MemoryConfig::new(total, ShortSize::Ratio(0.75), 0).expect("valid capacity");
    let mut memory = DualMemory::new(config, n_classes);
    for ex in examples(4 * total, d, n_classes) {
        memory.observe(ex).expect("label in range");
    }
    memory
}

pub fn queries(n: usize, d: usize) -> Vec<Query> {
    examples(n, d, 1)
        .into_iter()
        .map(|e| Query { features: e.features, arrival_index: u64::MAX - e.arrival_index })
        .collect()
}
