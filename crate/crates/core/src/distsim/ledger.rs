use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// worker → master
    Up,
    /// master → workers (one broadcast)
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub round: usize,
    pub direction: Direction,
    /// sender for up-link entries
    pub worker: Option<usize>,
    pub bits: u64,
}

/// Per-message record of communicated bits.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BitLedger {
    entries: Vec<LedgerEntry>,
    up: u64,
    down: u64,
}

impl BitLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, round: usize, direction: Direction, worker: Option<usize>, bits: u64) {
        match direction {
            Direction::Up => self.up += bits,
            Direction::Down => self.down += bits,
        }
        self.entries.push(LedgerEntry { round, direction, worker, bits });
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn cum_up(&self) -> u64 {
        self.up
    }

    pub fn cum_down(&self) -> u64 {
        self.down
    }

    pub fn total(&self) -> u64 {
        self.up + self.down
    }

    /// Recomputes the totals from the entries.
    pub fn is_consistent(&self) -> bool {
        let sum = |dir| self.entries.iter().filter(|e| e.direction == dir).map(|e| e.bits).sum::<u64>();
        sum(Direction::Up) == self.up && sum(Direction::Down) == self.down
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_follow_entries() {
        let mut l = BitLedger::new();
        l.record(1, Direction::Up, Some(0), 44);
        l.record(1, Direction::Up, Some(1), 44);
        l.record(1, Direction::Down, None, 50);
        assert_eq!(l.cum_up(), 88);
        assert_eq!(l.cum_down(), 50);
        assert_eq!(l.total(), 138);
        assert!(l.is_consistent());
        assert_eq!(l.entries().len(), 3);
    }
}
