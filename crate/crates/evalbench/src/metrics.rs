use std::collections::BTreeMap;

use midsmith_core::ModalityScenario;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::{EvalError, TurnLog};

/// A (round, scenario) cell. Ordering is by round, then scenario in
/// `T->T`, `T->I`, `IT->T`, `IT->I` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub round: u32,
    pub scenario: ModalityScenario,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellStats {
    pub n: u64,
    pub correct: u64,
    /// `correct / n`.
    pub acc: BigRational,
}

/// Modality-switching accuracy. All averages are exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsReport {
    pub cells: BTreeMap<CellKey, CellStats>,
    /// Unweighted mean of the round's populated cells.
    pub round_avgs: BTreeMap<u32, BigRational>,
    /// Unweighted mean over all populated cells.
    pub overall_unweighted: BigRational,
    /// Total correct over total turns.
    pub overall_weighted: BigRational,
    /// Conversations excluded because inference failed.
    pub failed_conversations: usize,
}

impl MsReport {
    pub fn with_failed_conversations(mut self, n: usize) -> Self {
        self.failed_conversations = n;
        self
    }

    pub fn total_turns(&self) -> u64 {
        self.cells.values().map(|c| c.n).sum()
    }
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn mean<'a>(values: impl Iterator<Item = &'a BigRational>) -> BigRational {
    let (sum, count) = values.fold((BigRational::zero(), 0u64), |(s, c), v| (s + v, c + 1));
    sum / BigRational::from_integer(BigInt::from(count))
}

/// Per-cell accuracy and its averages over `logs`.
pub fn ms_accuracy(logs: &[TurnLog]) -> Result<MsReport, EvalError> {
    if logs.is_empty() {
        return Err(EvalError::EmptyLogs);
    }
    let mut tally: BTreeMap<CellKey, (u64, u64)> = BTreeMap::new();
    for l in logs {
        let e = tally.entry(CellKey { round: l.round, scenario: l.scenario }).or_default();
        e.0 += 1;
        e.1 += u64::from(l.correct);
    }
    let cells: BTreeMap<CellKey, CellStats> =
        tally.into_iter().map(|(k, (n, correct))| (k, CellStats { n, correct, acc: ratio(correct, n) })).collect();

    let mut by_round: BTreeMap<u32, Vec<&BigRational>> = BTreeMap::new();
    for (k, c) in &cells {
        by_round.entry(k.round).or_default().push(&c.acc);
    }
    let round_avgs = by_round.into_iter().map(|(r, accs)| (r, mean(accs.into_iter()))).collect();
    let overall_unweighted = mean(cells.values().map(|c| &c.acc));
    let (n, correct) = cells.values().fold((0, 0), |(n, k), c| (n + c.n, k + c.correct));
    Ok(MsReport {
        cells,
        round_avgs,
        overall_unweighted,
        overall_weighted: ratio(correct, n),
        failed_conversations: 0,
    })
}
