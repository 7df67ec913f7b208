//! Straight-line re-statement of the memory update, kept deliberately naive:
//! one flat vector per buffer, linear scans, no per-class queues.

/// `(arrival_index, label)`
pub type Item = (u64, usize);

#[derive(Debug, Clone)]
pub struct ReferenceMemory {
    pub short_capacity: usize,
    pub long_capacity: usize,
    pub short: Vec<Item>,
    /// Arrival order.
    pub long: Vec<Item>,
    pub counts: Vec<usize>,
}

/// What one step did: the promoted item and the dropped item, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub promoted: Option<Item>,
    pub dropped: Option<Item>,
}

impl ReferenceMemory {
    pub fn new(short_capacity: usize, long_capacity: usize, n_classes: usize) -> Self {
        Self { short_capacity, long_capacity, short: Vec::new(), long: Vec::new(), counts: vec![0; n_classes] }
    }

    pub fn step(&mut self, item: Item) -> Step {
        let mut step = Step { promoted: None, dropped: None };
        self.short.push(item);
        if self.short.len() > self.short_capacity {
            let oldest = self.short.remove(0);
            self.long.push(oldest);
            self.counts[oldest.1] += 1;
            step.promoted = Some(oldest);
        }
        if self.long.len() > self.long_capacity {
            let max = *self.counts.iter().max().unwrap();
            // Scanning in arrival order, the first member of any maximal
            // class is the oldest member of the tie winner.
            let pos = self.long.iter().position(|&(_, y)| self.counts[y] == max).unwrap();
            let victim = self.long.remove(pos);
            self.counts[victim.1] -= 1;
            step.dropped = Some(victim);
        }
        step
    }

    /// Long-term memory in arrival order, then short-term memory.
    pub fn context(&self) -> Vec<Item> {
        self.long.iter().chain(&self.short).copied().collect()
    }

    /// The class with the most long-term members; ties go to the class whose
    /// oldest member arrived first.
    pub fn argmax_class(&self) -> Option<usize> {
        let max = *self.counts.iter().max()?;
        if max == 0 {
            return None;
        }
        self.long.iter().find(|&&(_, y)| self.counts[y] == max).map(|&(_, y)| y)
    }
}
