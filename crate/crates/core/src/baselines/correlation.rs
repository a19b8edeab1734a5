use std::collections::HashMap;

use super::{argmax_recent, AddressPredictor};

#[derive(Debug, Clone, Default)]
struct Entry {
    last: u64,
    /// (previous address, successor) -> (count, last time seen)
    pairs: HashMap<u64, HashMap<u64, (u64, u64)>>,
}

/// Predicts the most frequent successor of this pc's current address.
#[derive(Debug, Clone, Default)]
pub struct Correlation {
    clock: u64,
    table: HashMap<usize, Entry>,
}

impl Correlation {
    pub fn new() -> Self {
        Self::default()
    }
}

impl AddressPredictor for Correlation {
    fn predict(&self, pc: usize) -> Option<u64> {
        let e = self.table.get(&pc)?;
        let succ = e.pairs.get(&e.last)?;
        argmax_recent(succ.iter().map(|(&a, &c)| (a, c)))
    }

    fn update(&mut self, pc: usize, addr: u64) {
        self.clock += 1;
        match self.table.get_mut(&pc) {
            Some(e) => {
                let c = e.pairs.entry(e.last).or_default().entry(addr).or_default();
                *c = (c.0 + 1, self.clock);
                e.last = addr;
            }
            None => {
                self.table.insert(pc, Entry { last: addr, pairs: HashMap::new() });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn most_frequent_successor() {
        let mut c = Correlation::new();
        for a in [0xA, 0xB, 0xA, 0xC, 0xA, 0xB, 0xA] {
            c.step(1, a);
        }
        assert_eq!(c.predict(1), Some(0xB));
    }

    #[test]
    fn unseen_address_is_a_miss() {
        let mut c = Correlation::new();
        c.step(1, 0x10);
        c.step(1, 0x20);
        assert_eq!(c.predict(1), None);
        assert_eq!(c.predict(2), None);
    }

    #[test]
    fn chain_is_learned_in_one_pass() {
        let chain = [0x40u64, 0x10, 0x30, 0x20];
        let mut c = Correlation::new();
        for &a in &chain {
            c.step(0, a);
        }
        let hits = chain.iter().cycle().skip(0).take(12).filter(|&&a| c.step(0, a) == Some(a)).count();
        assert_eq!(hits, 11);
    }
}
