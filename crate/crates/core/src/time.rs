/// Simulated time in microseconds.
pub type Micros = u64;

/// Monotonic simulated clock. The only time source in a world.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SimClock {
    now: Micros,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> Micros {
        self.now
    }

    pub fn advance(&mut self, by: Micros) {
        self.now += by;
    }

    /// Moves forward to `t`; never moves backwards.
    pub fn advance_to(&mut self, t: Micros) {
        self.now = self.now.max(t);
    }
}
