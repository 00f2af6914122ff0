use std::collections::BTreeMap;

use crate::TurnLog;

/// Levenshtein distance over characters divided by the longer length.
/// Two empty strings are at distance 0.
pub fn normalized_edit_distance(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    strsim::levenshtein(a, b) as f64 / longest as f64
}

/// For each image turn that follows an earlier image turn of the same
/// conversation, the normalized edit distance between the two drawing
/// prompts. Keyed by (conversation id, round of the later turn).
pub fn prompt_drift(logs: &[TurnLog]) -> BTreeMap<(String, u32), f64> {
    let mut last: BTreeMap<&str, &str> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for log in logs {
        let Some(prompt) = log.drawing_prompt.as_deref() else { continue };
        if let Some(prev) = last.insert(&log.conversation_id, prompt) {
            out.insert((log.conversation_id.clone(), log.round), normalized_edit_distance(prev, prompt));
        }
    }
    out
}
