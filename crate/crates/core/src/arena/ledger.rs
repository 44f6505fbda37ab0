//! Per-round loss records and their running totals.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub query: Vec<f64>,
    pub guess: usize,
    pub truth: usize,
    pub loss: f64,
    pub loss_bound: f64,
    pub mistake: bool,
    /// Mistake on a query whose margin is at least the reporting margin.
    pub robust_mistake: bool,
    pub scale_index: Option<i32>,
    pub cum_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossLedger {
    pub records: Vec<RoundRecord>,
    pub total_loss: f64,
    pub mistakes: usize,
    pub robust_mistakes: usize,
}

impl LossLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a round, filling in `cum_loss` and the totals.
    pub fn push(&mut self, mut record: RoundRecord) -> Result<()> {
        if !(record.loss >= 0.0 && record.loss.is_finite()) {
            return Err(Error::InvariantViolation(format!(
                "round {}: realized loss {} is not a nonnegative number",
                record.round, record.loss
            )));
        }
        if !record.mistake && record.loss != 0.0 {
            return Err(Error::InvariantViolation(format!(
                "round {}: correct guess with loss {}",
                record.round, record.loss
            )));
        }
        self.total_loss += record.loss;
        record.cum_loss = self.total_loss;
        self.mistakes += record.mistake as usize;
        self.robust_mistakes += record.robust_mistake as usize;
        self.records.push(record);
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.records.len()
    }

    /// Mistake rounds whose loss exceeds the recorded bound by more than `tol`.
    pub fn bound_violations(&self, tol: f64) -> Vec<&RoundRecord> {
        self.records
            .iter()
            .filter(|r| r.mistake && r.loss > r.loss_bound + tol)
            .collect()
    }

    /// Loss accrued in rounds `from..to` (0-based, half open).
    pub fn loss_between(&self, from: usize, to: usize) -> f64 {
        self.records[from.min(self.records.len())..to.min(self.records.len())]
            .iter()
            .map(|r| r.loss)
            .sum()
    }

    pub fn mistakes_between(&self, from: usize, to: usize) -> usize {
        self.records[from.min(self.records.len())..to.min(self.records.len())]
            .iter()
            .filter(|r| r.mistake)
            .count()
    }
}
