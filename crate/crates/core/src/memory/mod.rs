//! Dual-memory FIFO context.
//!
//! A short-term FIFO `S` keeps the most recent `M_short` examples. Whatever
//! falls out of `S` enters a long-term store `L` of capacity `M_long`, kept as
//! one FIFO per class together with a per-class count ledger `C`. When `L`
//! overflows, the oldest member of the most populous class is dropped, which
//! keeps the long-term store balanced across classes while the short-term
//! store follows the stream.
//!
//! The context handed to a predictor is `L` (in arrival order) followed by
//! `S` (in arrival order).

mod snapshot;

use std::collections::VecDeque;

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Context, LabeledExample};

pub use snapshot::{read_snapshot, write_snapshot, SnapshotError, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MemoryError {
    #[error("total capacity must be at least 2, got {0}")]
    CapacityTooSmall(usize),
    #[error("short-term ratio must lie in (0, 1), got {0}")]
    RatioOutOfRange(f64),
    #[error("short-term size {short} leaves no room in a memory of {total}")]
    ShortSizeOutOfRange { short: usize, total: usize },
    #[error("arrival index {got} is not after the last stored index {last}")]
    NonMonotonicArrival { got: u64, last: u64 },
    #[error("label {label} is outside the {n_classes} known classes")]
    UnknownLabel { label: usize, n_classes: usize },
    #[error("long-term memory is empty")]
    EmptyLongMemory,
}

/// How the short-term share of the capacity is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShortSize {
    /// Fraction of the total capacity, rounded half-up.
    Ratio(f64),
    /// Absolute number of instances.
    Absolute(usize),
}

/// Which buffers are active. `LongOnly` and `ShortOnly` are the ablation
/// variants; they run the same update with one buffer of size zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryVariant {
    Dual,
    LongOnly,
    ShortOnly,
}

impl MemoryVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            MemoryVariant::Dual => "dual",
            MemoryVariant::LongOnly => "long_only",
            MemoryVariant::ShortOnly => "short_only",
        }
    }
}

impl std::str::FromStr for MemoryVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dual" => Ok(MemoryVariant::Dual),
            "long_only" => Ok(MemoryVariant::LongOnly),
            "short_only" => Ok(MemoryVariant::ShortOnly),
            other => Err(format!("unknown memory variant {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryConfig {
    total: usize,
    short_capacity: usize,
    long_capacity: usize,
    t_warm: u64,
    variant: MemoryVariant,
}

impl MemoryConfig {
    /// Dual memory of total capacity `total` split by `short`.
    pub fn new(total: usize, short: ShortSize, t_warm: u64) -> Result<Self, MemoryError> {
        if total < 2 {
            return Err(MemoryError::CapacityTooSmall(total));
        }
        let short_capacity = match short {
            ShortSize::Ratio(r) => {
                if !(r > 0.0 && r < 1.0) {
                    return Err(MemoryError::RatioOutOfRange(r));
                }
                round_half_up(r * total as f64)
            }
            ShortSize::Absolute(n) => n,
        };
        if short_capacity < 1 || short_capacity > total - 1 {
            return Err(MemoryError::ShortSizeOutOfRange { short: short_capacity, total });
        }
        Ok(Self { total, short_capacity, long_capacity: total - short_capacity, t_warm, variant: MemoryVariant::Dual })
    }

    /// Ablation variant with the same total capacity. The ratio is only
    /// validated for [`MemoryVariant::Dual`].
    pub fn with_variant(
        total: usize,
        short: ShortSize,
        t_warm: u64,
        variant: MemoryVariant,
    ) -> Result<Self, MemoryError> {
        match variant {
            MemoryVariant::Dual => Self::new(total, short, t_warm),
            MemoryVariant::LongOnly | MemoryVariant::ShortOnly => {
                if total < 2 {
                    return Err(MemoryError::CapacityTooSmall(total));
                }
                let (short_capacity, long_capacity) =
                    if variant == MemoryVariant::LongOnly { (0, total) } else { (total, 0) };
                Ok(Self { total, short_capacity, long_capacity, t_warm, variant })
            }
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn short_capacity(&self) -> usize {
        self.short_capacity
    }

    pub fn long_capacity(&self) -> usize {
        self.long_capacity
    }

    pub fn t_warm(&self) -> u64 {
        self.t_warm
    }

    pub fn variant(&self) -> MemoryVariant {
        self.variant
    }
}

fn round_half_up(x: f64) -> usize {
    // Guard against products like 0.65 * 1000 = 650.0000000000001.
    let nudged = (x * 1e9).round() / 1e9;
    (nudged + 0.5).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvictionKind {
    ShortToLong,
    LongDrop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvictionEvent {
    pub kind: EvictionKind,
    pub arrival_index: u64,
    pub class: usize,
}

/// At most one promotion and one drop happen per observation.
pub type Evictions = ArrayVec<EvictionEvent, 2>;

#[derive(Debug, Clone, PartialEq)]
pub struct DualMemory {
    config: MemoryConfig,
    short: VecDeque<LabeledExample>,
    long: Vec<VecDeque<LabeledExample>>,
    counts: Vec<usize>,
    long_len: usize,
    t_warm: u64,
    last_arrival: Option<u64>,
    ops: u64,
}

impl DualMemory {
    pub fn new(config: MemoryConfig, n_classes: usize) -> Self {
        Self {
            config,
            short: VecDeque::with_capacity(config.short_capacity + 1),
            long: (0..n_classes).map(|_| VecDeque::new()).collect(),
            counts: vec![0; n_classes],
            long_len: 0,
            t_warm: 0,
            last_arrival: None,
            ops: 0,
        }
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.config
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    /// Counts an arriving instance toward the warm-up and reports whether it
    /// is past the warm-up, i.e. whether it should be predicted.
    pub fn admit(&mut self) -> bool {
        self.t_warm += 1;
        self.is_warm()
    }

    /// True once more than `T_warm` instances have been admitted.
    pub fn is_warm(&self) -> bool {
        self.t_warm > self.config.t_warm
    }

    pub fn instances_seen(&self) -> u64 {
        self.t_warm
    }

    /// Inserts `ex` and performs any promotion and balance eviction.
    pub fn observe(&mut self, ex: LabeledExample) -> Result<Evictions, MemoryError> {
        if let Some(last) = self.last_arrival {
            if ex.arrival_index <= last {
                return Err(MemoryError::NonMonotonicArrival { got: ex.arrival_index, last });
            }
        }
        if ex.label >= self.counts.len() {
            return Err(MemoryError::UnknownLabel { label: ex.label, n_classes: self.counts.len() });
        }
        self.last_arrival = Some(ex.arrival_index);

        let mut events = Evictions::new();
        self.short.push_back(ex);
        self.ops += 1;

        if self.short.len() > self.config.short_capacity {
            let old = self.short.pop_front().expect("short memory is non-empty");
            events.push(EvictionEvent {
                kind: EvictionKind::ShortToLong,
                arrival_index: old.arrival_index,
                class: old.label,
            });
            self.counts[old.label] += 1;
            self.long_len += 1;
            self.long[old.label].push_back(old);
            self.ops += 2;
        }

        if self.long_len > self.config.long_capacity {
            let victim_class = self.most_overrepresented()?;
            let old = self.long[victim_class].pop_front().expect("argmax class has members");
            self.counts[victim_class] -= 1;
            self.long_len -= 1;
            self.ops += 2;
            events.push(EvictionEvent {
                kind: EvictionKind::LongDrop,
                arrival_index: old.arrival_index,
                class: victim_class,
            });
        }
        Ok(events)
    }

    /// The class with the largest long-term count. Ties go to the class whose
    /// oldest long-term member arrived first.
    pub fn most_overrepresented(&mut self) -> Result<usize, MemoryError> {
        let mut best: Option<(usize, usize, u64)> = None;
        for (class, &count) in self.counts.iter().enumerate() {
            self.ops += 1;
            if count == 0 {
                continue;
            }
            let oldest = self.long[class].front().map(|e| e.arrival_index).expect("non-zero count implies a member");
            let better = match best {
                None => true,
                Some((_, best_count, best_oldest)) => {
                    count > best_count || (count == best_count && oldest < best_oldest)
                }
            };
            if better {
                best = Some((class, count, oldest));
            }
        }
        best.map(|(class, _, _)| class).ok_or(MemoryError::EmptyLongMemory)
    }

    /// Long-term memory (arrival order) followed by short-term memory.
    pub fn context(&self) -> Context {
        Context::from_ordered_parts(self.long_chronological(), self.short.iter().cloned())
    }

    /// Long-term members merged across classes into arrival order.
    pub fn long_chronological(&self) -> Vec<LabeledExample> {
        let mut out: Vec<LabeledExample> = Vec::with_capacity(self.long_len);
        if self.long.len() > 16 {
            for queue in &self.long {
                out.extend(queue.iter().cloned());
            }
            out.sort_unstable_by_key(|e| e.arrival_index);
            return out;
        }
        // Each class queue is already in arrival order: merge them.
        let mut cursor = vec![0usize; self.long.len()];
        while out.len() < self.long_len {
            let mut pick: Option<(usize, u64)> = None;
            for (class, queue) in self.long.iter().enumerate() {
                if let Some(e) = queue.get(cursor[class]) {
                    if pick.is_none_or(|(_, t)| e.arrival_index < t) {
                        pick = Some((class, e.arrival_index));
                    }
                }
            }
            let (class, _) = pick.expect("ledger counts every member");
            out.push(self.long[class][cursor[class]].clone());
            cursor[class] += 1;
        }
        out
    }

    pub fn short_term(&self) -> impl ExactSizeIterator<Item = &LabeledExample> + '_ {
        self.short.iter()
    }

    pub fn long_term_class(&self, class: usize) -> impl ExactSizeIterator<Item = &LabeledExample> + '_ {
        self.long[class].iter()
    }

    /// The class-count ledger over the long-term memory.
    pub fn class_counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn short_len(&self) -> usize {
        self.short.len()
    }

    pub fn long_len(&self) -> usize {
        self.long_len
    }

    pub fn len(&self) -> usize {
        self.short.len() + self.long_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elementary operations performed so far (queue pushes/pops and ledger
    /// scans). Used to check the per-step cost bound.
    pub fn op_count(&self) -> u64 {
        self.ops
    }

    pub(crate) fn from_parts(
        config: MemoryConfig,
        n_classes: usize,
        short: Vec<LabeledExample>,
        long: Vec<LabeledExample>,
        t_warm: u64,
    ) -> Result<Self, MemoryError> {
        let mut mem = Self::new(config, n_classes);
        for ex in long {
            if ex.label >= n_classes {
                return Err(MemoryError::UnknownLabel { label: ex.label, n_classes });
            }
            mem.counts[ex.label] += 1;
            mem.long_len += 1;
            mem.long[ex.label].push_back(ex);
        }
        mem.short = short.into();
        mem.t_warm = t_warm;
        mem.last_arrival = mem
            .short
            .back()
            .map(|e| e.arrival_index)
            .or_else(|| mem.long.iter().filter_map(|q| q.back()).map(|e| e.arrival_index).max());
        Ok(mem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: usize = 0;
    const B: usize = 1;

    fn ex(t: u64, label: usize) -> LabeledExample {
        LabeledExample { features: vec![t as f64].into(), label, arrival_index: t }
    }

    fn indices<'a>(it: impl Iterator<Item = &'a LabeledExample>) -> Vec<u64> {
        it.map(|e| e.arrival_index).collect()
    }

    fn memory(short: usize, long: usize, n_classes: usize) -> DualMemory {
        let config = MemoryConfig::new(short + long, ShortSize::Absolute(short), 0).unwrap();
        DualMemory::new(config, n_classes)
    }

    #[test]
    fn hand_simulated_trace() {
        let mut mem = memory(2, 2, 2);
        let labels = [A, A, B, A, B];
        let mut last_events = Evictions::new();
        for (i, &label) in labels.iter().enumerate() {
            last_events = mem.observe(ex(i as u64 + 1, label)).unwrap();
        }
        assert_eq!(indices(mem.short_term()), vec![4, 5]);
        assert_eq!(indices(mem.long_chronological().iter()), vec![2, 3]);
        assert_eq!(mem.class_counts(), &[1, 1]);
        assert_eq!(
            last_events.as_slice(),
            &[
                EvictionEvent { kind: EvictionKind::ShortToLong, arrival_index: 3, class: B },
                EvictionEvent { kind: EvictionKind::LongDrop, arrival_index: 1, class: A },
            ]
        );
        let ctx = mem.context();
        assert_eq!(indices(ctx.examples().iter()), vec![2, 3, 4, 5]);
        assert_eq!(ctx.long_term().len(), 2);
    }

    #[test]
    fn first_insert_has_no_events() {
        let mut mem = memory(2, 2, 2);
        let events = mem.observe(ex(1, A)).unwrap();
        assert!(events.is_empty());
        assert_eq!(indices(mem.short_term()), vec![1]);
        assert_eq!(mem.long_len(), 0);
    }

    #[test]
    fn single_class_unit_buffers() {
        let mut mem = memory(1, 1, 1);
        mem.observe(ex(1, A)).unwrap();
        mem.observe(ex(2, A)).unwrap();
        let events = mem.observe(ex(3, A)).unwrap();
        assert_eq!(indices(mem.short_term()), vec![3]);
        assert_eq!(indices(mem.long_chronological().iter()), vec![2]);
        assert!(events.iter().any(|e| e.kind == EvictionKind::LongDrop && e.arrival_index == 1));
    }

    #[test]
    fn argmax_prefers_larger_count() {
        let mut mem = memory(1, 10, 2);
        for (t, label) in [(1, A), (2, A), (3, B), (4, A), (5, A)] {
            mem.observe(ex(t, label)).unwrap();
        }
        assert_eq!(mem.class_counts(), &[3, 1]);
        assert_eq!(mem.most_overrepresented().unwrap(), A);
    }

    #[test]
    fn argmax_tie_goes_to_globally_oldest_member() {
        let mut mem = memory(1, 10, 2);
        // B arrives first (t=1), then A at t=4.
        for (t, label) in [(1, B), (4, A), (5, A), (6, B), (7, A)] {
            mem.observe(ex(t, label)).unwrap();
        }
        assert_eq!(mem.class_counts(), &[2, 2]);
        assert_eq!(mem.long_term_class(A).next().unwrap().arrival_index, 4);
        assert_eq!(mem.long_term_class(B).next().unwrap().arrival_index, 1);
        assert_eq!(mem.most_overrepresented().unwrap(), B);
    }

    #[test]
    fn argmax_skips_empty_classes() {
        let mut mem = memory(1, 10, 2);
        mem.observe(ex(1, B)).unwrap();
        mem.observe(ex(2, B)).unwrap();
        assert_eq!(mem.class_counts(), &[0, 1]);
        assert_eq!(mem.most_overrepresented().unwrap(), B);
    }

    #[test]
    fn argmax_on_empty_long_memory_errors() {
        let mut mem = memory(2, 2, 2);
        assert_eq!(mem.most_overrepresented(), Err(MemoryError::EmptyLongMemory));
    }

    #[test]
    fn empty_and_full_contexts() {
        let mut mem = memory(3, 2, 2);
        assert!(mem.context().is_empty());
        for t in 1..=20 {
            mem.observe(ex(t, (t % 2) as usize)).unwrap();
        }
        assert_eq!(mem.context().len(), 5);
    }

    #[test]
    fn warm_up_uses_strict_inequality() {
        let config = MemoryConfig::new(10, ShortSize::Ratio(0.5), 100).unwrap();
        let mut mem = DualMemory::new(config, 2);
        for _ in 0..100 {
            mem.admit();
        }
        assert!(!mem.is_warm());
        assert!(mem.admit());

        let config = MemoryConfig::new(10, ShortSize::Ratio(0.5), 0).unwrap();
        let mut mem = DualMemory::new(config, 2);
        assert!(mem.admit());
    }

    #[test]
    fn rejects_non_monotonic_arrivals() {
        let mut mem = memory(2, 2, 2);
        mem.observe(ex(5, A)).unwrap();
        assert_eq!(mem.observe(ex(5, A)), Err(MemoryError::NonMonotonicArrival { got: 5, last: 5 }));
        assert!(matches!(mem.observe(ex(6, 7)), Err(MemoryError::UnknownLabel { .. })));
    }

    #[test]
    fn config_rounding_and_bounds() {
        let c = MemoryConfig::new(1000, ShortSize::Ratio(0.65), 100).unwrap();
        assert_eq!((c.short_capacity(), c.long_capacity()), (650, 350));
        let c = MemoryConfig::new(600, ShortSize::Ratio(0.85), 100).unwrap();
        assert_eq!((c.short_capacity(), c.long_capacity()), (510, 90));
        // 0.25 * 10 = 2.5 rounds half-up to 3.
        let c = MemoryConfig::new(10, ShortSize::Ratio(0.25), 0).unwrap();
        assert_eq!(c.short_capacity(), 3);
        assert_eq!(MemoryConfig::new(1, ShortSize::Ratio(0.5), 0), Err(MemoryError::CapacityTooSmall(1)));
        assert!(matches!(MemoryConfig::new(10, ShortSize::Ratio(1.0), 0), Err(MemoryError::RatioOutOfRange(_))));
        assert!(matches!(
            MemoryConfig::new(2, ShortSize::Ratio(0.75), 0),
            Err(MemoryError::ShortSizeOutOfRange { short: 2, total: 2 })
        ));
        assert!(MemoryConfig::new(10, ShortSize::Absolute(0), 0).is_err());
    }

    #[test]
    fn ablation_variants_route_through_one_buffer() {
        let cfg = MemoryConfig::with_variant(4, ShortSize::Ratio(0.5), 0, MemoryVariant::LongOnly).unwrap();
        let mut mem = DualMemory::new(cfg, 2);
        for t in 1..=6 {
            mem.observe(ex(t, A)).unwrap();
        }
        assert_eq!(mem.short_len(), 0);
        assert_eq!(indices(mem.long_chronological().iter()), vec![3, 4, 5, 6]);

        let cfg = MemoryConfig::with_variant(4, ShortSize::Ratio(0.5), 0, MemoryVariant::ShortOnly).unwrap();
        let mut mem = DualMemory::new(cfg, 2);
        for t in 1..=6 {
            mem.observe(ex(t, A)).unwrap();
        }
        assert_eq!(mem.long_len(), 0);
        assert_eq!(indices(mem.short_term()), vec![3, 4, 5, 6]);
    }
}
