//! Deterministic report rendering.
//!
//! JSON objects have sorted keys and every fractional value is written with
//! exactly four decimals. Exact accuracies are also given as reduced
//! fraction strings (`"27/36"` is written `"3/4"`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use midsmith_core::ModalityScenario;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::Signed;

use crate::{CellKey, CoherenceReport, EvalError, MsReport};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
const SCHEMA_VERSION: u64 = 1;

/// `x` rounded half away from zero to four decimals.
pub fn fixed4(x: &BigRational) -> String {
    let scaled = x.abs() * BigRational::from_integer(BigInt::from(10_000));
    let two = BigInt::from(2);
    // floor(scaled + 1/2)
    let k = (scaled.numer() * &two + scaled.denom()).div_floor(&(scaled.denom() * &two));
    let (int, frac) = k.div_rem(&BigInt::from(10_000));
    let sign = if x.is_negative() && k > BigInt::from(0) { "-" } else { "" };
    format!("{sign}{int}.{frac:0>4}")
}

fn float4(x: f64) -> String {
    format!("{x:.4}")
}

enum Node {
    Obj(BTreeMap<&'static str, Node>),
    Map(BTreeMap<String, Node>),
    Arr(Vec<Node>),
    /// Pre-rendered number.
    Num(String),
    Str(String),
    Bool(bool),
    Null,
}

impl Node {
    fn obj<const N: usize>(fields: [(&'static str, Node); N]) -> Node {
        Node::Obj(fields.into_iter().collect())
    }

    fn int(n: impl Into<u64>) -> Node {
        Node::Num(n.into().to_string())
    }

    fn write(&self, out: &mut String, indent: usize) {
        let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
        match self {
            Node::Obj(m) => write_object(out, m.iter().map(|(k, v)| (*k, v)), m.len(), indent),
            Node::Map(m) => write_object(out, m.iter().map(|(k, v)| (k.as_str(), v)), m.len(), indent),
            Node::Arr(items) if items.is_empty() => out.push_str("[]"),
            Node::Arr(items) => {
                out.push_str("[\n");
                for (i, v) in items.iter().enumerate() {
                    pad(out, indent + 2);
                    v.write(out, indent + 2);
                    out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
                }
                pad(out, indent);
                out.push(']');
            }
            Node::Num(s) => out.push_str(s),
            Node::Str(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
            Node::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Node::Null => out.push_str("null"),
        }
    }
}

fn write_object<'a>(out: &mut String, fields: impl Iterator<Item = (&'a str, &'a Node)>, len: usize, indent: usize) {
    if len == 0 {
        out.push_str("{}");
        return;
    }
    out.push_str("{\n");
    for (i, (k, v)) in fields.enumerate() {
        out.extend(std::iter::repeat_n(' ', indent + 2));
        out.push_str(&serde_json::to_string(k).expect("strings serialize"));
        out.push_str(": ");
        v.write(out, indent + 2);
        out.push_str(if i + 1 < len { ",\n" } else { "\n" });
    }
    out.extend(std::iter::repeat_n(' ', indent));
    out.push('}');
}

fn exact(x: &BigRational) -> Node {
    Node::obj([("value", Node::Num(fixed4(x))), ("exact", Node::Str(x.to_string()))])
}

fn ms_node(ms: &MsReport) -> Node {
    let cells = ms
        .cells
        .iter()
        .map(|(k, c)| {
            Node::obj([
                ("round", Node::int(k.round)),
                ("scenario", Node::Str(k.scenario.code().into())),
                ("n", Node::int(c.n)),
                ("correct", Node::int(c.correct)),
                ("acc", Node::Num(fixed4(&c.acc))),
                ("acc_exact", Node::Str(c.acc.to_string())),
            ])
        })
        .collect();
    let rounds = ms.round_avgs.iter().map(|(r, a)| (r.to_string(), exact(a))).collect();
    Node::obj([
        ("cells", Node::Arr(cells)),
        ("round_avgs", Node::Map(rounds)),
        ("overall_unweighted", exact(&ms.overall_unweighted)),
        ("overall_weighted", exact(&ms.overall_weighted)),
        ("turns", Node::int(ms.total_turns())),
        ("failed_conversations", Node::int(ms.failed_conversations as u64)),
    ])
}

fn coherence_node(c: &CoherenceReport) -> Node {
    let breakdown = |m: &BTreeMap<String, crate::Breakdown>| {
        Node::Map(
            m.iter()
                .map(|(k, b)| (k.clone(), Node::obj([("n", Node::int(b.n as u64)), ("mean", Node::Num(float4(b.mean)))])))
                .collect(),
        )
    };
    let per_image = c
        .per_image
        .iter()
        .map(|s| {
            let mut m = BTreeMap::from([
                ("conversation_id", Node::Str(s.conversation_id.clone())),
                ("round", Node::int(s.round)),
                ("scenario", Node::Str(s.scenario.code().into())),
                ("topic", Node::Str(s.topic.clone())),
                ("score", Node::Num(float4(s.score))),
                (
                    "probabilities",
                    Node::Arr(s.probabilities.iter().map(|p| p.map_or(Node::Null, |p| Node::Num(float4(p)))).collect()),
                ),
                ("wrong_modality", Node::Bool(s.wrong_modality)),
            ]);
            if let Some(e) = &s.edit_type {
                m.insert("edit_type", Node::Str(e.clone()));
            }
            Node::Obj(m)
        })
        .collect();
    let flags = c
        .flags
        .iter()
        .map(|f| {
            let mut m = BTreeMap::from([
                ("conversation_id", Node::Str(f.conversation_id.clone())),
                ("round", Node::int(f.round)),
                ("reason", Node::Str(f.reason.clone())),
            ]);
            if let Some(i) = f.item {
                m.insert("item", Node::int(i as u64));
            }
            Node::Obj(m)
        })
        .collect();
    Node::obj([
        ("overall", Node::Num(float4(c.overall))),
        ("images", Node::int(c.per_image.len() as u64)),
        ("by_topic", breakdown(&c.by_topic)),
        ("by_edit_type", breakdown(&c.by_edit_type)),
        ("by_scenario", breakdown(&c.by_scenario)),
        ("per_image", Node::Arr(per_image)),
        ("flags", Node::Arr(flags)),
    ])
}

/// The JSON report. The coherence section is omitted when `coh` is `None`.
pub fn render_report_json(ms: &MsReport, coh: Option<&CoherenceReport>) -> String {
    let mut root = BTreeMap::from([
        ("schema_version", Node::int(SCHEMA_VERSION)),
        ("modality_switching", ms_node(ms)),
    ]);
    if let Some(c) = coh {
        root.insert("coherence", coherence_node(c));
    }
    let mut out = String::new();
    Node::Obj(root).write(&mut out, 0);
    out.push('\n');
    out
}

/// Plain-text rendering: one row per round, one column per scenario.
pub fn render_report_table(ms: &MsReport, coh: Option<&CoherenceReport>) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "Modality switching accuracy");
    let _ = write!(t, "{:<7}", "round");
    for s in ModalityScenario::ALL {
        let _ = write!(t, "{:>8}", s.code());
    }
    let _ = writeln!(t, "{:>8}", "avg");
    for (round, avg) in &ms.round_avgs {
        let _ = write!(t, "{round:<7}");
        for scenario in ModalityScenario::ALL {
            let cell = ms.cells.get(&CellKey { round: *round, scenario }).map_or("-".to_owned(), |c| fixed4(&c.acc));
            let _ = write!(t, "{cell:>8}");
        }
        let _ = writeln!(t, "{:>8}", fixed4(avg));
    }
    let _ = writeln!(t, "overall, mean of cells:   {}", fixed4(&ms.overall_unweighted));
    let _ = writeln!(t, "overall, weighted by turn: {} ({} turns)", fixed4(&ms.overall_weighted), ms.total_turns());
    let _ = writeln!(t, "failed conversations:     {}", ms.failed_conversations);
    if let Some(c) = coh {
        let _ = writeln!(t, "\nGeneration coherence");
        let _ = writeln!(t, "overall: {} over {} images", float4(c.overall), c.per_image.len());
        for (title, m) in [("scenario", &c.by_scenario), ("topic", &c.by_topic), ("edit type", &c.by_edit_type)] {
            let _ = writeln!(t, "by {title}:");
            for (k, b) in m {
                let _ = writeln!(t, "  {k:<20}{:>8} (n={})", float4(b.mean), b.n);
            }
        }
        if !c.flags.is_empty() {
            let _ = writeln!(t, "flags: {}", c.flags.len());
        }
    }
    t
}

/// Write `report.json` and `report.txt` into `dir`, creating it if needed.
pub fn write_report(ms: &MsReport, coh: Option<&CoherenceReport>, dir: impl AsRef<Path>) -> Result<(), EvalError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join(REPORT_JSON), render_report_json(ms, coh))?;
    fs::write(dir.join(REPORT_TXT), render_report_table(ms, coh))?;
    Ok(())
}
