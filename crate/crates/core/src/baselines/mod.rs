//! Classical predictors: bimodal, perceptron and MLP for branches; stride
//! and address correlation for next load address.
//!
//! Every predictor has unlimited resources: state is keyed by exact pc, so
//! no two static instructions alias.

mod bimodal;
mod correlation;
pub mod mlp;
mod perceptron;
mod stride;

pub use bimodal::Bimodal;
pub use correlation::Correlation;
pub use mlp::{Mlp, MlpConfig, MlpError};
pub use perceptron::Perceptron;
pub use stride::Stride;

/// Online branch predictor. `step` predicts and then learns the outcome.
pub trait BranchPredictor {
    fn predict(&self, pc: usize) -> bool;
    fn update(&mut self, pc: usize, taken: bool);

    fn step(&mut self, pc: usize, taken: bool) -> bool {
        let p = self.predict(pc);
        self.update(pc, taken);
        p
    }
}

/// Online next-address predictor. `None` means no prediction (a miss).
pub trait AddressPredictor {
    fn predict(&self, pc: usize) -> Option<u64>;
    fn update(&mut self, pc: usize, addr: u64);

    fn step(&mut self, pc: usize, addr: u64) -> Option<u64> {
        let p = self.predict(pc);
        self.update(pc, addr);
        p
    }
}

/// Key with the highest count; ties go to the most recently seen key.
/// `counts` maps key to (count, last time seen).
fn argmax_recent<K: Copy>(counts: impl Iterator<Item = (K, (u64, u64))>) -> Option<K> {
    counts.max_by_key(|&(_, (n, seen))| (n, seen)).map(|(k, _)| k)
}
