use crate::error::{Error, Result};

/// Largest position change a single step can make.
pub const MAX_STEP: f64 = 0.1;

/// One-dimensional target-seeking environment.
///
/// The position is kept as an unevaluated sum `hi + lo` (Knuth's two-sum)
/// so that a run of steps lands exactly where the exact sum of the applied
/// actions rounds to: ten steps of `0.1` reach `1.0`, not
/// `0.9999999999999999`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    hi: f64,
    lo: f64,
    target: f64,
    steps: u64,
}

impl Default for SimState {
    fn default() -> Self {
        Self { hi: 0.0, lo: 0.0, target: 1.0, steps: 0 }
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

impl SimState {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// Moves by `action` clamped to `[-MAX_STEP, MAX_STEP]`.
    pub fn step(&mut self, action: f64) -> Result<()> {
        if !action.is_finite() {
            return Err(Error::InvalidAction(format!("action {action} is not finite")));
        }
        let a = action.clamp(-MAX_STEP, MAX_STEP);
        let (s, e) = two_sum(self.hi, a);
        let (hi, lo) = two_sum(s, e + self.lo);
        self.hi = hi;
        self.lo = lo;
        self.steps += 1;
        Ok(())
    }

    pub fn x(&self) -> f64 {
        self.hi
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Negative distance to the target; 0 is optimal.
    pub fn score(&self) -> f64 {
        -(self.hi - self.target).abs()
    }

    /// `[x, target, step_count]`.
    pub fn state_vector(&self) -> [f64; 3] {
        [self.x(), self.target, self.steps as f64]
    }
}
