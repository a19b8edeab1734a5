use std::collections::HashMap;

use super::BranchPredictor;

/// Per-pc 2-bit saturating counter; predicts taken in the upper half.
#[derive(Debug, Clone)]
pub struct Bimodal {
    init: u8,
    counters: HashMap<usize, u8>,
}

impl Bimodal {
    pub const WEAKLY_TAKEN: u8 = 2;

    pub fn new() -> Self {
        Self::with_initial(Self::WEAKLY_TAKEN)
    }

    pub fn with_initial(init: u8) -> Self {
        assert!(init <= 3, "2-bit counter");
        Self { init, counters: HashMap::new() }
    }

    pub fn counter(&self, pc: usize) -> u8 {
        self.counters.get(&pc).copied().unwrap_or(self.init)
    }
}

impl Default for Bimodal {
    fn default() -> Self {
        Self::new()
    }
}

impl BranchPredictor for Bimodal {
    fn predict(&self, pc: usize) -> bool {
        self.counter(pc) >= 2
    }

    fn update(&mut self, pc: usize, taken: bool) {
        let c = self.counters.entry(pc).or_insert(self.init);
        *c = if taken { (*c + 1).min(3) } else { c.saturating_sub(1) };
    }
}
