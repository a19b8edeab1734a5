use std::collections::HashMap;

use super::{argmax_recent, AddressPredictor};

#[derive(Debug, Clone, Default)]
struct Entry {
    last: u64,
    /// stride -> (count, last time seen)
    strides: HashMap<i64, (u64, u64)>,
}

/// Predicts last address plus the most frequent stride seen at this pc.
#[derive(Debug, Clone, Default)]
pub struct Stride {
    clock: u64,
    table: HashMap<usize, Entry>,
}

impl Stride {
    pub fn new() -> Self {
        Self::default()
    }
}

impl AddressPredictor for Stride {
    fn predict(&self, pc: usize) -> Option<u64> {
        let e = self.table.get(&pc)?;
        let s = argmax_recent(e.strides.iter().map(|(&s, &c)| (s, c)))?;
        Some(e.last.wrapping_add(s as u64))
    }

    fn update(&mut self, pc: usize, addr: u64) {
        self.clock += 1;
        match self.table.get_mut(&pc) {
            Some(e) => {
                let s = addr.wrapping_sub(e.last) as i64;
                let c = e.strides.entry(s).or_default();
                *c = (c.0 + 1, self.clock);
                e.last = addr;
            }
            None => {
                self.table.insert(pc, Entry { last: addr, strides: HashMap::new() });
            }
        }
    }
}
