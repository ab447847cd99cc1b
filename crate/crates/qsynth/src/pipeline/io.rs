//! Checkpointed record IO.
//!
//! A stage appends records to its output files and then marks the source
//! record processed in the stage checkpoint. On resume, output lines whose
//! source was never checkpointed are dropped before work continues, so a
//! kill between the two appends cannot duplicate or lose bytes: resumed
//! runs produce exactly the bytes an uninterrupted run would have.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::records::{parse_record, serialize_record, Record};

/// Read every record of a line-delimited file.
pub fn read_records(path: &Path) -> std::io::Result<Vec<Record>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(&line) {
            Ok(r) => out.push(r),
            Err(e) => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), no + 1),
                ))
            }
        }
    }
    Ok(out)
}

/// Write records atomically (temp file + rename).
pub fn write_records_atomic(path: &Path, records: &[Record]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        for r in records {
            writeln!(out, "{}", serialize_record(r))?;
        }
        out.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Write arbitrary text atomically.
pub fn write_text_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// One output file of a checkpointed stage.
struct StageFile {
    handle: BufWriter<File>,
}

/// Append-only stage writer with checkpoint-consistent resume.
pub struct CheckpointedStage {
    checkpoint_path: PathBuf,
    checkpoint: BufWriter<File>,
    processed: BTreeSet<String>,
    files: Vec<StageFile>,
}

impl CheckpointedStage {
    /// Open a stage: load its checkpoint, prune un-checkpointed output
    /// lines (using `source_id` to attribute each record), and position
    /// every file for appending.
    pub fn open(
        checkpoint_dir: &Path,
        stage_name: &str,
        output_paths: &[&Path],
        source_id: impl Fn(&Record) -> Option<String>,
    ) -> std::io::Result<Self> {
        std::fs::create_dir_all(checkpoint_dir)?;
        let checkpoint_path = checkpoint_dir.join(format!("{stage_name}.jsonl"));
        let mut processed = BTreeSet::new();
        if checkpoint_path.exists() {
            let reader = BufReader::new(File::open(&checkpoint_path)?);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                // A torn trailing checkpoint line means the matching output
                // lines will be replayed; parse failures are skipped.
                if let Ok(Record::Checkpoint(mark)) = parse_record(&line) {
                    if mark.stage == stage_name {
                        processed.insert(mark.id);
                    }
                }
            }
        }

        let mut files = Vec::new();
        for path in output_paths {
            if path.exists() {
                prune_file(path, &processed, &source_id)?;
            }
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            let handle = BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?);
            files.push(StageFile { handle });
        }
        let checkpoint = BufWriter::new(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(&checkpoint_path)?,
        );
        Ok(CheckpointedStage {
            checkpoint_path,
            checkpoint,
            processed,
            files,
        })
    }

    pub fn is_processed(&self, id: &str) -> bool {
        self.processed.contains(id)
    }

    pub fn processed_count(&self) -> usize {
        self.processed.len()
    }

    /// Append this source's output records (file index, record), then mark
    /// the source processed. Flush order guarantees outputs land before the
    /// checkpoint line.
    pub fn commit(&mut self, id: &str, writes: &[(usize, Record)]) -> std::io::Result<()> {
        for (file_idx, record) in writes {
            let file = &mut self.files[*file_idx];
            writeln!(file.handle, "{}", serialize_record(record))?;
        }
        for f in &mut self.files {
            f.handle.flush()?;
        }
        writeln!(
            self.checkpoint,
            "{}",
            serialize_record(&Record::Checkpoint(super::CheckpointMark {
                stage: stage_of(&self.checkpoint_path),
                id: id.to_string(),
            }))
        )?;
        self.checkpoint.flush()?;
        self.processed.insert(id.to_string());
        Ok(())
    }
}

fn stage_of(checkpoint_path: &Path) -> String {
    checkpoint_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("stage")
        .to_string()
}

/// Drop output lines whose source never reached the checkpoint. A torn
/// final line (killed mid-write) is dropped; corruption elsewhere is an
/// error.
fn prune_file(
    path: &Path,
    processed: &BTreeSet<String>,
    source_id: &impl Fn(&Record) -> Option<String>,
) -> std::io::Result<()> {
    let text = std::fs::read_to_string(path)?;
    let lines: Vec<&str> = text.lines().collect();
    let mut kept: Vec<String> = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(line) {
            Ok(record) => {
                let keep = match source_id(&record) {
                    Some(id) => processed.contains(&id),
                    None => true,
                };
                if keep {
                    kept.push((*line).to_string());
                }
            }
            Err(e) => {
                if i + 1 == lines.len() {
                    // torn trailing line from a kill
                    continue;
                }
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), i + 1),
                ));
            }
        }
    }
    let mut body = kept.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    write_text_atomic(path, &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Seed;

    fn seed_record(text: &str) -> Record {
        Record::Seed(Seed::new(text, "fixture"))
    }

    fn source_of(r: &Record) -> Option<String> {
        match r {
            Record::Seed(s) => Some(s.id.0.clone()),
            _ => None,
        }
    }

    #[test]
    fn commit_then_resume_replays_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out.jsonl");
        let ckpt = dir.path().join("ckpt");
        let record = seed_record("alpha?");
        let id = match &record {
            Record::Seed(s) => s.id.0.clone(),
            _ => unreachable!(),
        };
        {
            let mut stage =
                CheckpointedStage::open(&ckpt, "test", &[out.as_path()], source_of).unwrap();
            assert!(!stage.is_processed(&id));
            stage.commit(&id, &[(0, record.clone())]).unwrap();
        }
        let bytes_after_first = std::fs::read(&out).unwrap();
        {
            let stage =
                CheckpointedStage::open(&ckpt, "test", &[out.as_path()], source_of).unwrap();
            assert!(stage.is_processed(&id));
        }
        assert_eq!(std::fs::read(&out).unwrap(), bytes_after_first);
    }

    #[test]
    fn uncheckpointed_output_is_pruned_on_resume() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out.jsonl");
        let ckpt = dir.path().join("ckpt");
        let committed = seed_record("alpha?");
        let committed_id = match &committed {
            Record::Seed(s) => s.id.0.clone(),
            _ => unreachable!(),
        };
        {
            let mut stage =
                CheckpointedStage::open(&ckpt, "test", &[out.as_path()], source_of).unwrap();
            stage.commit(&committed_id, &[(0, committed.clone())]).unwrap();
        }
        // Simulate a kill: output written, checkpoint line missing.
        {
            let mut f = OpenOptions::new().append(true).open(&out).unwrap();
            writeln!(f, "{}", serialize_record(&seed_record("orphan?"))).unwrap();
        }
        let stage = CheckpointedStage::open(&ckpt, "test", &[out.as_path()], source_of).unwrap();
        drop(stage);
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.contains("alpha?"));
        assert!(!text.contains("orphan?"));
    }

    #[test]
    fn torn_trailing_line_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out.jsonl");
        let ckpt = dir.path().join("ckpt");
        std::fs::write(&out, "{\"type\":\"seed\",\"id\":\"s1\",\"te").unwrap();
        let stage = CheckpointedStage::open(&ckpt, "test", &[out.as_path()], source_of).unwrap();
        drop(stage);
        assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
    }
}
