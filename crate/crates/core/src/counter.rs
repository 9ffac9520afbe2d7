//! Exact accounting of black-box function queries.

use std::collections::BTreeMap;

/// Labels for the accounting phases used by the solvers.
pub mod phase {
    pub const INIT: &str = "init";
    pub const SNAPSHOT: &str = "snapshot";
    pub const INNER: &str = "inner";
    pub const GRAD_X: &str = "grad-x";
    pub const GRAD_Y: &str = "grad-y";
}

/// Counts evaluations of the component function, broken down by phase.
///
/// The total is always the sum of the breakdown and never decreases.
#[derive(Debug, Clone, Default)]
pub struct QueryCounter {
    total: u64,
    breakdown: BTreeMap<&'static str, u64>,
}

impl QueryCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, phase: &'static str, queries: u64) {
        self.total += queries;
        *self.breakdown.entry(phase).or_insert(0) += queries;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn phase(&self, phase: &str) -> u64 {
        self.breakdown.get(phase).copied().unwrap_or(0)
    }

    pub fn breakdown(&self) -> &BTreeMap<&'static str, u64> {
        &self.breakdown
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_is_sum_of_breakdown() {
        let mut c = QueryCounter::new();
        c.add(phase::SNAPSHOT, 40);
        c.add(phase::INNER, 16);
        c.add(phase::SNAPSHOT, 2);
        assert_eq!(c.total(), 58);
        assert_eq!(c.phase(phase::SNAPSHOT), 42);
        assert_eq!(c.breakdown().values().sum::<u64>(), c.total());
    }
}
