//! Normalized JSONL instance format: one object per line with fields
//! `id`, `lemma`, `tokens`, `target`, and optional `sense`.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WsdError};

use super::Instance;

#[derive(Debug, Serialize, Deserialize)]
struct JsonlRecord {
    id: String,
    lemma: String,
    tokens: Vec<String>,
    target: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    sense: Option<String>,
}

pub fn parse_jsonl(path: &Path) -> Result<Vec<Instance>> {
    let file = std::fs::File::open(path)?;
    let mut instances = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| WsdError::ParseLine {
            path: path.display().to_string(),
            line: lineno + 1,
            msg,
        };
        let rec: JsonlRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if rec.target >= rec.tokens.len() {
            return Err(err(format!(
                "target index {} out of range for {} tokens",
                rec.target,
                rec.tokens.len()
            )));
        }
        instances.push(Instance {
            id: rec.id,
            lemma: rec.lemma,
            tokens: rec.tokens,
            target_position: rec.target,
            gold: rec.sense.into_iter().collect(),
        });
    }
    Ok(instances)
}

pub fn write_jsonl(path: &Path, instances: &[Instance]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for inst in instances {
        let rec = JsonlRecord {
            id: inst.id.clone(),
            lemma: inst.lemma.clone(),
            tokens: inst.tokens.clone(),
            target: inst.target_position,
            sense: inst.gold.first().cloned(),
        };
        serde_json::to_writer(&mut file, &rec)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}
