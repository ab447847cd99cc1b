//! Dataset and model-behavior statistics: tool-call totals, per-tool
//! breakdowns, unique-call counts, failure rates and domain distributions,
//! plus an import adapter for externally formatted trajectory files.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{normalize_name, ToolCall, ToolName, Transcript, Turn};

/// Per-trajectory tool usage averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolStats {
    /// Mean tool calls per trajectory (including failed calls).
    pub avg_total: f64,
    pub per_tool: BTreeMap<ToolName, f64>,
    /// Mean distinct (tool, normalized args) per trajectory.
    pub avg_unique: f64,
    /// Fraction of calls flagged as errors.
    pub error_rate: f64,
}

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("no trajectories to analyze")]
    EmptyInput,
    #[error("import: {0}")]
    Import(String),
}

/// Mean tool-call statistics over a set of trajectories. Uniqueness
/// normalizes arguments (case-fold, whitespace-collapse) before dedup.
pub fn tool_call_stats(trajectories: &[Transcript]) -> Result<ToolStats, AnalyticsError> {
    if trajectories.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let n = trajectories.len() as f64;
    let mut per_tool_totals: BTreeMap<ToolName, u64> =
        ToolName::ALL.iter().map(|t| (*t, 0u64)).collect();
    let mut unique_total = 0u64;
    let mut calls_total = 0u64;
    let mut errors_total = 0u64;
    for t in trajectories {
        let mut distinct: BTreeSet<(ToolName, String)> = BTreeSet::new();
        for call in t.tool_calls() {
            *per_tool_totals.entry(call.tool).or_default() += 1;
            calls_total += 1;
            if call.is_error {
                errors_total += 1;
            }
            distinct.insert((call.tool, normalize_name(&call.args)));
        }
        unique_total += distinct.len() as u64;
    }
    let per_tool: BTreeMap<ToolName, f64> = per_tool_totals
        .iter()
        .map(|(tool, total)| (*tool, *total as f64 / n))
        .collect();
    Ok(ToolStats {
        avg_total: per_tool.values().sum(),
        per_tool,
        avg_unique: unique_total as f64 / n,
        error_rate: if calls_total == 0 {
            0.0
        } else {
            errors_total as f64 / calls_total as f64
        },
    })
}

/// Count of records per domain label.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DomainHistogram {
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

impl DomainHistogram {
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut h = DomainHistogram::default();
        for label in labels {
            *h.counts.entry(label.as_ref().to_string()).or_default() += 1;
            h.total += 1;
        }
        h
    }

    pub fn share(&self, label: &str) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        *self.counts.get(label).unwrap_or(&0) as f64 / self.total as f64
    }

    pub fn max_share(&self) -> f64 {
        self.counts
            .values()
            .map(|&c| c as f64 / self.total.max(1) as f64)
            .fold(0.0, f64::max)
    }
}

/// Histogram over labeled records.
pub fn domain_distribution<I, S>(labels: I) -> DomainHistogram
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    DomainHistogram::from_labels(labels)
}

/// Aligned comparison table with a fixed, deterministic column order.
pub fn compare_reports(stats: &[(String, ToolStats)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "dataset", "total", "search", "browse", "python", "unique", "error%"
    ));
    for (name, s) in stats {
        out.push_str(&format!(
            "{:<16} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2}\n",
            name,
            s.avg_total,
            s.per_tool.get(&ToolName::Search).copied().unwrap_or(0.0),
            s.per_tool.get(&ToolName::Browse).copied().unwrap_or(0.0),
            s.per_tool.get(&ToolName::Python).copied().unwrap_or(0.0),
            s.avg_unique,
            s.error_rate * 100.0,
        ));
    }
    out
}

/// Field mapping for externally formatted trajectory files: one JSON object
/// per line, each holding an array of tool invocations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalMapping {
    /// Field holding the array of calls.
    pub calls_field: String,
    /// Field inside each call holding the tool name.
    pub tool_field: String,
    /// Field inside each call holding the arguments (string or object).
    pub args_field: String,
    /// Optional boolean field marking failed calls.
    pub error_field: Option<String>,
    /// Tool-name aliases mapped onto search/browse/python.
    pub aliases: BTreeMap<String, String>,
}

impl Default for ExternalMapping {
    fn default() -> Self {
        let mut aliases = BTreeMap::new();
        for (from, to) in [
            ("web_search", "search"),
            ("google_search", "search"),
            ("visit", "browse"),
            ("open_url", "browse"),
            ("fetch", "browse"),
            ("code", "python"),
            ("code_interpreter", "python"),
        ] {
            aliases.insert(from.to_string(), to.to_string());
        }
        ExternalMapping {
            calls_field: "tool_calls".into(),
            tool_field: "tool".into(),
            args_field: "args".into(),
            error_field: Some("error".into()),
            aliases,
        }
    }
}

/// Convert externally formatted trajectory lines into minimal transcripts
/// for statistics.
pub fn import_trajectories(
    lines: impl IntoIterator<Item = String>,
    mapping: &ExternalMapping,
) -> Result<Vec<Transcript>, AnalyticsError> {
    let mut out = Vec::new();
    for (no, line) in lines.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| AnalyticsError::Import(format!("line {}: {e}", no + 1)))?;
        let calls = value
            .get(&mapping.calls_field)
            .and_then(|v| v.as_array())
            .ok_or_else(|| {
                AnalyticsError::Import(format!(
                    "line {}: missing array field `{}`",
                    no + 1,
                    mapping.calls_field
                ))
            })?;
        let mut turns = Vec::new();
        for call in calls {
            let raw_tool = call
                .get(&mapping.tool_field)
                .and_then(|v| v.as_str())
                .ok_or_else(|| {
                    AnalyticsError::Import(format!(
                        "line {}: call missing `{}`",
                        no + 1,
                        mapping.tool_field
                    ))
                })?;
            let mapped = mapping
                .aliases
                .get(raw_tool)
                .map(String::as_str)
                .unwrap_or(raw_tool);
            let tool: ToolName = mapped.parse().map_err(|e: String| {
                AnalyticsError::Import(format!("line {}: {e}", no + 1))
            })?;
            let args = match call.get(&mapping.args_field) {
                Some(serde_json::Value::String(s)) => s.clone(),
                Some(other) => other.to_string(),
                None => String::new(),
            };
            let is_error = mapping
                .error_field
                .as_ref()
                .and_then(|f| call.get(f))
                .and_then(|v| v.as_bool())
                .unwrap_or(false);
            turns.push(Turn::ToolCall {
                call: ToolCall {
                    tool,
                    args,
                    result: String::new(),
                    is_error,
                },
            });
            turns.push(Turn::ToolResult {
                text: String::new(),
            });
        }
        out.push(
            Transcript::from_turns(turns)
                .map_err(|e| AnalyticsError::Import(format!("line {}: {e}", no + 1)))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transcript(calls: &[(ToolName, &str, bool)]) -> Transcript {
        let mut turns = Vec::new();
        for (tool, args, is_error) in calls {
            turns.push(Turn::ToolCall {
                call: ToolCall {
                    tool: *tool,
                    args: args.to_string(),
                    result: String::new(),
                    is_error: *is_error,
                },
            });
            turns.push(Turn::ToolResult {
                text: String::new(),
            });
        }
        Transcript::from_turns(turns).unwrap()
    }

    #[test]
    fn hand_counted_fixture() {
        use ToolName::*;
        let ts = vec![
            transcript(&[(Search, "a", false), (Search, "b", false), (Browse, "u", false)]),
            transcript(&[(Search, "a", false), (Python, "1+1", false)]),
        ];
        let stats = tool_call_stats(&ts).unwrap();
        assert_eq!(stats.avg_total, 2.5);
        assert_eq!(stats.per_tool[&Search], 1.5);
        assert_eq!(stats.per_tool[&Browse], 0.5);
        assert_eq!(stats.per_tool[&Python], 0.5);
        assert_eq!(stats.avg_unique, 2.5);
        assert_eq!(stats.error_rate, 0.0);
    }

    #[test]
    fn empty_trajectory_is_all_zeros_and_empty_set_errors() {
        let stats = tool_call_stats(&[transcript(&[])]).unwrap();
        assert_eq!(stats.avg_total, 0.0);
        assert_eq!(stats.avg_unique, 0.0);
        assert_eq!(stats.error_rate, 0.0);
        assert!(matches!(
            tool_call_stats(&[]),
            Err(AnalyticsError::EmptyInput)
        ));
    }

    #[test]
    fn uniqueness_normalizes_args() {
        use ToolName::*;
        let ts = vec![transcript(&[
            (Search, "Foam  Makers", false),
            (Search, "foam makers", false),
        ])];
        let stats = tool_call_stats(&ts).unwrap();
        assert_eq!(stats.avg_total, 2.0);
        assert_eq!(stats.avg_unique, 1.0);
    }

    #[test]
    fn error_rate_counts_flagged_calls() {
        use ToolName::*;
        let ts = vec![transcript(&[(Search, "a", true), (Search, "b", false)])];
        let stats = tool_call_stats(&ts).unwrap();
        assert_eq!(stats.error_rate, 0.5);
    }

    #[test]
    fn additivity_within_tolerance() {
        use ToolName::*;
        let ts: Vec<Transcript> = (0..7)
            .map(|i| {
                transcript(&[
                    (Search, &format!("q{i}"), false),
                    (Browse, &format!("u{i}"), false),
                ])
            })
            .collect();
        let stats = tool_call_stats(&ts).unwrap();
        let sum: f64 = stats.per_tool.values().sum();
        assert!((stats.avg_total - sum).abs() < 1e-9);
    }

    #[test]
    fn histogram_counts() {
        let h = domain_distribution(["history", "history", "history", "science"]);
        assert_eq!(h.counts["history"], 3);
        assert_eq!(h.counts["science"], 1);
        assert_eq!(h.total, 4);
        let empty = domain_distribution(Vec::<String>::new());
        assert_eq!(empty.total, 0);
        assert!(empty.counts.is_empty());
    }

    #[test]
    fn report_is_deterministic_and_ordered_by_input() {
        use ToolName::*;
        let a = tool_call_stats(&[transcript(&[(Search, "x", false)])]).unwrap();
        let b = tool_call_stats(&[transcript(&[(Browse, "y", false)])]).unwrap();
        let report1 = compare_reports(&[("one".into(), a.clone()), ("two".into(), b.clone())]);
        let report2 = compare_reports(&[("one".into(), a), ("two".into(), b)]);
        assert_eq!(report1, report2);
        let one_at = report1.find("one").unwrap();
        let two_at = report1.find("two").unwrap();
        assert!(one_at < two_at);
    }

#[test]
    fn histogram_panels_render_side_by_side() {
        let ours = domain_distribution(["history", "history", "science", "art"]);
        let a = domain_distribution(["science", "science", "art"]);
        let b = domain_distribution(["politics", "politics", "politics", "art"]);
        let report = compare_histograms(&[
            ("ours".into(), ours),
            ("set_a".into(), a),
            ("set_b".into(), b),
        ]);
        assert!(report.lines().next().unwrap().contains("ours"));
        assert!(report.contains("history"));
        assert!(report.contains("politics"));
        // history: 2/4 of ours, absent elsewhere.
        let history_line = report.lines().find(|l| l.starts_with("history")).unwrap();
        assert!(history_line.contains("50.0%"));
        assert!(history_line.contains("0.0%"));
    }

    #[test]
    fn import_with_aliases() {
        let mapping = ExternalMapping::default();
        let lines = vec![
            r#"{"tool_calls":[{"tool":"web_search","args":"q"},{"tool":"visit","args":"u","error":true}]}"#
                .to_string(),
        ];
        let ts = import_trajectories(lines, &mapping).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].counts.search, 1);
        assert_eq!(ts[0].counts.browse, 1);
        let stats = tool_call_stats(&ts).unwrap();
        assert_eq!(stats.error_rate, 0.5);
    }
}

/// Side-by-side domain distribution panels for several datasets: one column
/// per dataset, shares in percent, labels unioned and sorted.
pub fn compare_histograms(panels: &[(String, DomainHistogram)]) -> String {
    let mut labels: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();
    for (_, h) in panels {
        labels.extend(h.counts.keys().map(String::as_str));
    }
    let mut out = String::new();
    out.push_str(&format!("{:<14}", "domain"));
    for (name, _) in panels {
        out.push_str(&format!(" {name:>14}"));
    }
    out.push('\n');
    for label in labels {
        out.push_str(&format!("{label:<14}"));
        for (_, h) in panels {
            out.push_str(&format!(" {:>13.1}%", h.share(label) * 100.0));
        }
        out.push('\n');
    }
    out
}
