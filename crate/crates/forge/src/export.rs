//! Training-mix export.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::mix::{InstructionSample, SampleSource};
use crate::ForgeError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingParts {
    pub d_o: Vec<InstructionSample>,
    pub d_p: Vec<InstructionSample>,
    pub d_pm: Vec<InstructionSample>,
    pub dialogben_train: Vec<InstructionSample>,
}

impl TrainingParts {
    fn named(&self) -> [(SampleSource, &[InstructionSample]); 4] {
        [
            (SampleSource::DO, &self.d_o),
            (SampleSource::DP, &self.d_p),
            (SampleSource::DPm, &self.d_pm),
            (SampleSource::DialogbenTrain, &self.dialogben_train),
        ]
    }
}

/// Sidecar written next to the export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixManifest {
    /// `"D_A"` without the benchmark training split, `"D_B"` with it.
    pub mix: String,
    pub counts: BTreeMap<SampleSource, usize>,
    pub total: usize,
}

/// Path of the manifest for an export at `path`.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

/// Write every sample of the selected parts as JSONL, tagged with its
/// source, and a per-source count manifest beside it. Each part must only
/// hold samples of its own source.
pub fn export_training_mix(
    parts: &TrainingParts,
    include_dialogben: bool,
    path: impl AsRef<Path>,
) -> Result<MixManifest, ForgeError> {
    let path = path.as_ref();
    let selected: Vec<_> = parts
        .named()
        .into_iter()
        .filter(|(src, _)| include_dialogben || *src != SampleSource::DialogbenTrain)
        .collect();
    for (src, samples) in &selected {
        for (i, s) in samples.iter().enumerate() {
            if s.source != *src {
                return Err(ForgeError::InvalidSample(format!("{src}[{i}] is tagged {}", s.source)));
            }
            s.validate().map_err(|e| ForgeError::InvalidSample(format!("{src}[{i}]: {e}")))?;
        }
    }

    let mut out = BufWriter::new(fs::File::create(path)?);
    let mut counts = BTreeMap::new();
    for (src, samples) in &selected {
        for s in *samples {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        counts.insert(*src, samples.len());
    }
    out.flush()?;

    let manifest = MixManifest {
        mix: if include_dialogben { "D_B" } else { "D_A" }.to_owned(),
        total: counts.values().sum(),
        counts,
    };
    fs::write(manifest_path(path), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// Write `items` as JSON lines, e.g. a quarantine list.
pub fn write_jsonl<T: Serialize>(items: &[T], path: impl AsRef<Path>) -> Result<(), ForgeError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Read JSON lines, skipping blank ones.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>, ForgeError> {
    let text = fs::read_to_string(path)?;
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
}
