//! Instruction samples and the pseudo multi-turn mixer.

use std::fmt;

use midsmith_core::protocol::parse_output;
use midsmith_core::{ConversationRecord, UserTurnInput};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ForgeError;

/// Where a training sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    /// Open uni-modal instruction data.
    DO,
    /// Prompt-generation data.
    DP,
    /// Pseudo multi-turn mixes of the two above.
    DPm,
    /// Training split of the benchmark.
    DialogbenTrain,
}

impl SampleSource {
    pub const ALL: [SampleSource; 4] = [SampleSource::DO, SampleSource::DP, SampleSource::DPm, SampleSource::DialogbenTrain];

    pub fn as_str(self) -> &'static str {
        match self {
            SampleSource::DO => "d_o",
            SampleSource::DP => "d_p",
            SampleSource::DPm => "d_pm",
            SampleSource::DialogbenTrain => "dialogben_train",
        }
    }
}

impl fmt::Display for SampleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstructionTurn {
    pub user: UserTurnInput,
    /// Assistant reply in wire form, `<draw>` prefix included.
    pub assistant_raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionSample {
    pub turns: Vec<InstructionTurn>,
    pub source: SampleSource,
}

impl InstructionSample {
    pub fn single(user: UserTurnInput, assistant_raw: impl Into<String>, source: SampleSource) -> Self {
        InstructionSample { turns: vec![InstructionTurn { user, assistant_raw: assistant_raw.into() }], source }
    }

    pub fn validate(&self) -> Result<(), ForgeError> {
        if self.turns.is_empty() {
            return Err(ForgeError::InvalidSample("no turns".into()));
        }
        for (i, t) in self.turns.iter().enumerate() {
            if t.user.text.trim().is_empty() {
                return Err(ForgeError::InvalidSample(format!("turns[{i}].user.text is empty")));
            }
            parse_output(&t.assistant_raw)
                .map_err(|e| ForgeError::InvalidSample(format!("turns[{i}].assistant_raw: {e}")))?;
        }
        Ok(())
    }

    /// Benchmark record as a training sample. Every turn needs a reference
    /// response.
    pub fn from_record(record: &ConversationRecord) -> Result<Self, ForgeError> {
        let turns = record
            .turns
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let raw = t.reference_response.clone().ok_or_else(|| {
                    ForgeError::InvalidSample(format!("{}: turns[{i}] has no reference_response", record.id))
                })?;
                Ok(InstructionTurn { user: t.user.clone(), assistant_raw: raw })
            })
            .collect::<Result<Vec<_>, ForgeError>>()?;
        let sample = InstructionSample { turns, source: SampleSource::DialogbenTrain };
        sample.validate()?;
        Ok(sample)
    }
}

#[derive(Deserialize)]
struct SeedFile {
    samples: Vec<InstructionSample>,
}

/// Ten hand-written single-turn prompt-generation examples shipped with the
/// crate. They are original to this repository.
pub fn dp_seed_examples() -> Vec<InstructionSample> {
    let file: SeedFile = serde_json::from_str(include_str!("../data/dp_seed.json")).expect("bundled seed file parses");
    file.samples
}

/// Shuffle `d_o ∪ d_p` with `seed` and concatenate consecutive groups of
/// `turns_per_conv` samples into `conversations` multi-turn samples. No input
/// is used twice; leftovers are dropped. Topics are not matched, so the
/// resulting conversations need not be coherent.
pub fn mix_pseudo_multiturn(
    d_o: &[InstructionSample],
    d_p: &[InstructionSample],
    conversations: usize,
    turns_per_conv: usize,
    seed: u64,
) -> Result<Vec<InstructionSample>, ForgeError> {
    if conversations == 0 || turns_per_conv == 0 {
        return Err(ForgeError::InvalidArgument("conversations and turns_per_conv must be positive".into()));
    }
    let mut pool: Vec<&InstructionTurn> = Vec::with_capacity(d_o.len() + d_p.len());
    for (i, s) in d_o.iter().chain(d_p).enumerate() {
        if s.turns.len() != 1 {
            return Err(ForgeError::InvalidSample(format!("pool item {i} has {} turns, expected 1", s.turns.len())));
        }
        pool.push(&s.turns[0]);
    }
    let needed = conversations
        .checked_mul(turns_per_conv)
        .ok_or_else(|| ForgeError::InvalidArgument("conversations × turns_per_conv overflows".into()))?;
    if needed > pool.len() {
        return Err(ForgeError::PoolTooSmall { needed, available: pool.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    Ok(pool[..needed]
        .chunks(turns_per_conv)
        .map(|group| InstructionSample { turns: group.iter().map(|t| (*t).clone()).collect(), source: SampleSource::DPm })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_examples_are_valid_single_turn_dp() {
        let seeds = dp_seed_examples();
        assert_eq!(seeds.len(), 10);
        for s in &seeds {
            s.validate().unwrap();
            assert_eq!(s.turns.len(), 1);
            assert_eq!(s.source, SampleSource::DP);
        }
    }

    #[test]
    fn source_tags() {
        let tags: Vec<String> =
            SampleSource::ALL.iter().map(|s| serde_json::to_value(s).unwrap().as_str().unwrap().to_owned()).collect();
        assert_eq!(tags, ["d_o", "d_p", "d_pm", "dialogben_train"]);
        assert!(SampleSource::ALL.iter().zip(&tags).all(|(s, t)| s.as_str() == t));
    }
}
