//! Line-delimited record schema.
//!
//! Every inter-stage file is a stream of records, one JSON object per line,
//! self-described by a `type` discriminator field. Streaming keeps every
//! stage a resumable filter. Stable field names:
//!
//! | `type`            | payload                                            |
//! |-------------------|----------------------------------------------------|
//! | `seed`            | `id, text, domain, source`                         |
//! | `entity`          | `id, name, domain_tags`                            |
//! | `fact`            | `id, statement, subject_entities, novel_entity, citations` |
//! | `qa_pair`         | `id, seed_id, question, answer, supporting_fact_ids, citations, method, iterations, solver_attempts, explanation` |
//! | `transcript`      | `turns, counts`                                    |
//! | `verdict`         | `accepted, votes_for, votes_total, rationale`      |
//! | `tree_node`       | `seed_id, node_id, parent, depth, fact`            |
//! | `session_log`     | top-down session audit record                      |
//! | `hardening_log`   | bottom-up hardening audit record                   |
//! | `filter_outcome`  | `qa_id, accepted, stage, verdicts`                 |
//! | `rollout`         | `qa_id, rollout_index, retained, transcript`       |
//! | `sft_record`      | `qa_id, messages, tools_schema, answer`            |
//! | `distill_manifest`| `attempted, rollouts, retained, exported, retention_rate` |
//! | `world_entity`    | mock-world entity with popularity score            |
//! | `world_fact`      | mock-world fact with page url                      |
//! | `checkpoint`      | `stage, id` processed-record marker                |

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::DomainHistogram;
use crate::bottomup::HardeningLog;
use crate::distill::{DistillManifest, RolloutRecord, SftRecord};
use crate::filter::FilterOutcome;
use crate::model::{Entity, Fact, InvariantError, QaPair, Seed, Transcript, Verdict};
use crate::pipeline::CheckpointMark;
use crate::tools::mock::{WorldEntity, WorldFact};
use crate::topdown::SessionLog;
use crate::tree::TreeNodeRecord;

/// Any record that may appear in an inter-stage file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Seed(Seed),
    Entity(Entity),
    Fact(Fact),
    QaPair(QaPair),
    Transcript(Transcript),
    Verdict(Verdict),
    TreeNode(TreeNodeRecord),
    SessionLog(SessionLog),
    HardeningLog(HardeningLog),
    FilterOutcome(FilterOutcome),
    Rollout(RolloutRecord),
    SftRecord(SftRecord),
    DistillManifest(DistillManifest),
    DomainHistogram(DomainHistogram),
    WorldEntity(WorldEntity),
    WorldFact(WorldFact),
    Checkpoint(CheckpointMark),
}

/// Failure to parse or validate a record line.
#[derive(Debug, Error)]
pub enum RecordError {
    /// The line is not a record of the documented schema; the message names
    /// the offending field or token.
    #[error("schema violation: {0}")]
    Schema(String),
    /// The record parsed but violates a type invariant.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

impl From<InvariantError> for RecordError {
    fn from(e: InvariantError) -> Self {
        RecordError::Invariant(e.to_string())
    }
}

/// Serialize a record to one line of self-describing JSON.
///
/// Serialization of a valid record cannot fail; the caller is expected to
/// have constructed the record through its validating constructors.
pub fn serialize_record(record: &Record) -> String {
    serde_json::to_string(record).expect("record serialization is infallible")
}

/// Parse one line back into a typed, invariant-checked record.
pub fn parse_record(line: &str) -> Result<Record, RecordError> {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return Err(RecordError::Schema("empty line".into()));
    }
    let record: Record = serde_json::from_str(trimmed).map_err(classify)?;
    validate_record(&record)?;
    Ok(record)
}

/// Run the parsed record's own invariant checks.
pub fn validate_record(record: &Record) -> Result<(), RecordError> {
    match record {
        Record::Seed(x) => x.validate()?,
        Record::Entity(x) => x.validate()?,
        Record::Fact(x) => x.validate()?,
        Record::QaPair(x) => x.validate()?,
        Record::Transcript(x) => x.validate()?,
        Record::Verdict(x) => x.validate()?,
        Record::TreeNode(x) => x.validate()?,
        Record::FilterOutcome(x) => x.validate()?,
        Record::SftRecord(x) => x.validate()?,
        // Audit and plumbing records carry no cross-field invariants.
        Record::SessionLog(_)
        | Record::HardeningLog(_)
        | Record::Rollout(_)
        | Record::DistillManifest(_)
        | Record::DomainHistogram(_)
        | Record::WorldEntity(_)
        | Record::WorldFact(_)
        | Record::Checkpoint(_) => {}
    }
    Ok(())
}

/// An unknown enum variant (e.g. an unknown tool name) violates a domain
/// invariant; everything else the deserializer rejects is a schema problem.
fn classify(e: serde_json::Error) -> RecordError {
    let msg = e.to_string();
    if msg.contains("unknown variant") || msg.contains("unknown tool") {
        RecordError::Invariant(msg)
    } else {
        RecordError::Schema(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SeedId, SynthMethod, ToolCall, ToolCounts, ToolName, Turn};

    #[test]
    fn seed_round_trip_identity() {
        let seed = Record::Seed(Seed::new("Who founded X?", "fixture"));
        let line = serialize_record(&seed);
        assert!(!line.contains('\n'));
        assert_eq!(parse_record(&line).unwrap(), seed);
    }

    #[test]
    fn transcript_line_recount_matches() {
        let call = |q: &str| ToolCall {
            tool: ToolName::Search,
            args: q.into(),
            result: "ok".into(),
            is_error: false,
        };
        let t = Transcript::from_turns(vec![
            Turn::ToolCall { call: call("a") },
            Turn::ToolResult { text: "ok".into() },
            Turn::ToolCall { call: call("b") },
            Turn::ToolResult { text: "ok".into() },
        ])
        .unwrap();
        let line = serialize_record(&Record::Transcript(t));
        let parsed = parse_record(&line).unwrap();
        match parsed {
            Record::Transcript(t) => {
                assert_eq!(
                    t.counts,
                    ToolCounts {
                        search: 2,
                        browse: 0,
                        python: 0
                    }
                );
            }
            other => panic!("wrong record type: {other:?}"),
        }
    }

    #[test]
    fn qa_answer_survives_verbatim() {
        let qa = QaPair {
            id: "qa-td-s1".into(),
            seed_id: SeedId("s1".into()),
            question: "Which company manufactures the foam?".into(),
            answer: "Zotefoams".into(),
            supporting_fact_ids: vec![],
            citations: vec![],
            method: SynthMethod::Topdown,
            iterations: 2,
            solver_attempts: vec![],
            explanation: String::new(),
        };
        let line = serialize_record(&Record::QaPair(qa));
        assert!(line.contains("Zotefoams"));
        parse_record(&line).unwrap();
    }

    #[test]
    fn empty_line_is_schema_violation() {
        assert!(matches!(parse_record(""), Err(RecordError::Schema(_))));
        assert!(matches!(parse_record("   "), Err(RecordError::Schema(_))));
    }

    #[test]
    fn unknown_tool_is_invariant_violation() {
        let line = r#"{"type":"transcript","turns":[{"turn":"tool_call","call":{"tool":"grep","args":"x","result":"y"}},{"turn":"tool_result","text":"y"}],"counts":{"search":0,"browse":0,"python":0}}"#;
        match parse_record(line) {
            Err(RecordError::Invariant(msg)) => assert!(msg.contains("grep"), "{msg}"),
            other => panic!("expected invariant error, got {other:?}"),
        }
    }

    #[test]
    fn doctored_counts_rejected_on_parse() {
        let line = r#"{"type":"transcript","turns":[],"counts":{"search":3,"browse":0,"python":0}}"#;
        assert!(matches!(parse_record(line), Err(RecordError::Invariant(_))));
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use crate::model::{Seed, SolverAttempt, SynthMethod, ToolCall, ToolName, Transcript, Turn};
    use proptest::prelude::*;

    fn arb_tool() -> impl Strategy<Value = ToolName> {
        prop_oneof![
            Just(ToolName::Search),
            Just(ToolName::Browse),
            Just(ToolName::Python)
        ]
    }

    fn arb_turn_block() -> impl Strategy<Value = Vec<Turn>> {
        (arb_tool(), "[a-z0-9 ]{0,24}", "[a-z0-9 ]{0,24}", any::<bool>()).prop_map(
            |(tool, args, result, is_error)| {
                vec![
                    Turn::ToolCall {
                        call: ToolCall {
                            tool,
                            args,
                            result: result.clone(),
                            is_error,
                        },
                    },
                    Turn::ToolResult { text: result },
                ]
            },
        )
    }

    fn arb_transcript() -> impl Strategy<Value = Transcript> {
        (
            "[a-z ]{1,32}",
            proptest::collection::vec(arb_turn_block(), 0..5),
            proptest::option::of("[a-z ]{1,24}"),
        )
            .prop_map(|(system, blocks, final_answer)| {
                let mut turns = vec![Turn::System { text: system }];
                for block in blocks {
                    turns.extend(block);
                }
                if let Some(answer) = final_answer {
                    turns.push(Turn::FinalAnswer { text: answer });
                }
                Transcript::from_turns(turns).expect("constructed well-formed")
            })
    }

    fn arb_record() -> impl Strategy<Value = Record> {
        prop_oneof![
            "[a-zA-Z0-9 ,]{1,48}\\?".prop_map(|text| Record::Seed(Seed::new(&text, "prop"))),
            arb_transcript().prop_map(Record::Transcript),
            (0u32..6, 0u32..6).prop_map(|(yes, extra)| {
                Record::Verdict(crate::model::Verdict::from_votes(
                    yes,
                    yes + extra,
                    "prop".into(),
                ))
            }),
            ("[a-zA-Z ]{1,24}\\?", "[a-zA-Z]{1,12}", 1u32..9, any::<bool>()).prop_map(
                |(q, a, iterations, method)| {
                    Record::QaPair(crate::model::QaPair {
                        id: "qa-prop".into(),
                        seed_id: crate::model::SeedId("s-prop".into()),
                        question: q,
                        answer: a,
                        supporting_fact_ids: vec![],
                        citations: vec![],
                        method: if method {
                            SynthMethod::Topdown
                        } else {
                            SynthMethod::Bottomup
                        },
                        iterations,
                        solver_attempts: vec![SolverAttempt {
                            answer: "x".into(),
                            equivalent: false,
                        }],
                        explanation: String::new(),
                    })
                }
            ),
        ]
    }

    proptest! {
        // Round-trip identity over the generated fixture corpus, both ways:
        // parse(serialize(x)) == x and serialize(parse(L)) == L.
        #[test]
        fn record_round_trip(record in arb_record()) {
            let line = serialize_record(&record);
            let parsed = parse_record(&line).expect("serialized records parse");
            prop_assert_eq!(&parsed, &record);
            prop_assert_eq!(serialize_record(&parsed), line);
        }
    }
}
