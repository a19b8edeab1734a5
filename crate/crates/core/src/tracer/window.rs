use std::collections::VecDeque;

/// Recently loaded addresses, most recent first, deduplicated with
/// promotion on re-access.
#[derive(Debug, Clone, Default)]
pub struct LoadHistory {
    order: VecDeque<u64>,
    capacity: usize,
}

impl LoadHistory {
    /// Retains at most `capacity` distinct addresses. Snapshots may ask for
    /// any window `W <= capacity`.
    pub fn new(capacity: usize) -> Self {
        Self { order: VecDeque::with_capacity(capacity + 1), capacity }
    }

    pub fn touch(&mut self, addr: u64) {
        if let Some(pos) = self.order.iter().position(|&a| a == addr) {
            self.order.remove(pos);
        }
        self.order.push_front(addr);
        self.order.truncate(self.capacity);
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.order.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Up to `window` most recently loaded `(address, value)` pairs, values read
/// from memory at call time.
pub fn snapshot_window(mem: impl Fn(u64) -> Option<u64>, history: &LoadHistory, window: usize) -> Vec<(u64, u64)> {
    history
        .iter()
        .take(window)
        .filter_map(|a| mem(a).map(|v| (a, v)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mem(a: u64) -> Option<u64> {
        Some(a * 16)
    }

    #[test]
    fn most_recent_first() {
        let mut h = LoadHistory::new(8);
        h.touch(0x10);
        h.touch(0x20);
        assert_eq!(snapshot_window(mem, &h, 2), vec![(0x20, 0x200), (0x10, 0x100)]);
    }

    #[test]
    fn zero_window_is_empty() {
        let mut h = LoadHistory::new(8);
        h.touch(0x10);
        assert!(snapshot_window(mem, &h, 0).is_empty());
    }

    #[test]
    fn reaccess_promotes_without_duplicating() {
        let mut h = LoadHistory::new(8);
        h.touch(0x10);
        h.touch(0x20);
        h.touch(0x10);
        assert_eq!(snapshot_window(mem, &h, 2), vec![(0x10, 0x100), (0x20, 0x200)]);
        assert_eq!(h.len(), 2);
    }

    /// Reference: replay the full access log and keep first occurrences
    /// scanning backwards.
    fn reference(log: &[u64], w: usize) -> Vec<u64> {
        let mut out: Vec<u64> = Vec::new();
        for &a in log.iter().rev() {
            if out.len() == w {
                break;
            }
            if !out.contains(&a) {
                out.push(a);
            }
        }
        out
    }

    #[test]
    fn matches_reference_lru() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut h = LoadHistory::new(5);
        let mut log = Vec::new();
        for _ in 0..2000 {
            let a = rng.gen_range(0..12u64);
            h.touch(a);
            log.push(a);
            let got: Vec<u64> = h.iter().collect();
            assert_eq!(got, reference(&log, 5));
        }
    }
}
