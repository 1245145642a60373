//! SensEval lexical-sample XML parser and the answer-key format.
//!
//! The corpus layout is `corpus > lexelt > instance > context`, with the
//! target token wrapped in a `<head>` element and gold labels either inline
//! (`<answer senseid=...>`) or in a separate key file with lines
//! `lexelt instance-id sense-id...`.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use quick_xml::events::Event;
use quick_xml::Reader;

use crate::error::{Result, WsdError};

use super::Instance;

/// Parse result plus the number of instances skipped for lacking a head mark.
#[derive(Debug)]
pub struct ParsedCorpus {
    pub instances: Vec<Instance>,
    pub skipped_headless: usize,
}

pub fn parse_senseval_xml(path: &Path) -> Result<ParsedCorpus> {
    let mut reader = Reader::from_file(path).map_err(|e| WsdError::Xml {
        path: path.display().to_string(),
        offset: 0,
        msg: e.to_string(),
    })?;
    reader.config_mut().trim_text(false);

    let xml_err = |reader: &Reader<_>, msg: String| WsdError::Xml {
        path: path.display().to_string(),
        offset: reader.buffer_position(),
        msg,
    };

    let mut instances = Vec::new();
    let mut skipped_headless = 0usize;

    let mut lexelt = String::new();
    let mut instance_id = String::new();
    let mut answers: Vec<String> = Vec::new();
    let mut in_context = false;
    let mut in_head = false;
    let mut tokens: Vec<String> = Vec::new();
    let mut target: Option<usize> = None;

    let mut buf = Vec::new();
    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| xml_err(&reader, e.to_string()))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let empty = matches!(event, Event::Empty(_));
                let name = e.name();
                let attr = |key: &str| -> Option<String> {
                    e.attributes().flatten().find_map(|a| {
                        if a.key.as_ref() == key.as_bytes() {
                            Some(String::from_utf8_lossy(&a.value).into_owned())
                        } else {
                            None
                        }
                    })
                };
                match name.as_ref() {
                    b"lexelt" => {
                        lexelt = attr("item").unwrap_or_default();
                    }
                    b"instance" => {
                        instance_id = attr("id").unwrap_or_default();
                        answers.clear();
                        tokens.clear();
                        target = None;
                    }
                    b"answer" => {
                        if let Some(s) = attr("senseid") {
                            answers.push(s);
                        }
                    }
                    b"context" => {
                        in_context = true;
                        tokens.clear();
                        target = None;
                    }
                    b"head" if in_context && !empty => {
                        in_head = true;
                    }
                    _ => {}
                }
            }
            Event::End(ref e) => match e.name().as_ref() {
                b"head" => in_head = false,
                b"context" => in_context = false,
                b"instance" => {
                    match target {
                        Some(pos) => instances.push(Instance {
                            id: instance_id.clone(),
                            lemma: lexelt.clone(),
                            tokens: std::mem::take(&mut tokens),
                            target_position: pos,
                            gold: std::mem::take(&mut answers),
                        }),
                        None => skipped_headless += 1,
                    }
                    in_context = false;
                    in_head = false;
                }
                _ => {}
            },
            Event::Text(ref t) => {
                if in_context {
                    let text = t
                        .unescape()
                        .map_err(|e| xml_err(&reader, e.to_string()))?;
                    for word in text.split_whitespace() {
                        if in_head && target.is_none() {
                            target = Some(tokens.len());
                        }
                        tokens.push(word.to_string());
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }

    Ok(ParsedCorpus { instances, skipped_headless })
}

/// Reads an answer key: `lexelt instance-id sense-id [sense-id ...]`.
/// Returns instance-id → (lexelt, gold senses).
pub fn read_answer_key(path: &Path) -> Result<BTreeMap<String, (String, Vec<String>)>> {
    let file = std::fs::File::open(path)?;
    let mut gold = BTreeMap::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let (lexelt, id) = match (parts.next(), parts.next()) {
            (Some(l), Some(i)) => (l.to_string(), i.to_string()),
            _ => {
                return Err(WsdError::ParseLine {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: "answer key line needs at least `lexelt instance-id sense-id`".into(),
                })
            }
        };
        // trailing comment markers like "!!" are ignored
        let senses: Vec<String> = parts
            .take_while(|s| !s.starts_with('!'))
            .map(|s| s.to_string())
            .collect();
        if senses.is_empty() {
            return Err(WsdError::ParseLine {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: format!("no sense id for instance `{id}`"),
            });
        }
        gold.insert(id, (lexelt, senses));
    }
    Ok(gold)
}

/// Writes predictions in answer-key format, sorted by instance id.
pub fn write_answer_key(
    path: &Path,
    predictions: &BTreeMap<String, (String, String)>, // id -> (lexelt, sense)
) -> Result<()> {
    let mut out = String::new();
    for (id, (lexelt, sense)) in predictions {
        out.push_str(&format!("{lexelt} {id} {sense}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn minimal_instance() {
        let f = write_tmp(
            r#"<corpus lang="english">
<lexelt item="art.n">
<instance id="art.40001">
<answer instance="art.40001" senseid="art%1:06:00::"/>
<context>
 the fine <head>art</head> of testing
</context>
</instance>
</lexelt>
</corpus>"#,
        );
        let parsed = parse_senseval_xml(f.path()).unwrap();
        assert_eq!(parsed.instances.len(), 1);
        let inst = &parsed.instances[0];
        assert_eq!(inst.id, "art.40001");
        assert_eq!(inst.lemma, "art.n");
        assert_eq!(inst.tokens, vec!["the", "fine", "art", "of", "testing"]);
        assert_eq!(inst.target_position, 2);
        assert_eq!(inst.gold, vec!["art%1:06:00::"]);
    }

    #[test]
    fn two_lexelts_two_instances_each() {
        let f = write_tmp(
            r#"<corpus>
<lexelt item="bar.n">
<instance id="bar.1"><answer instance="bar.1" senseid="s1"/><context>a <head>bar</head> b</context></instance>
<instance id="bar.2"><answer instance="bar.2" senseid="s2"/><context>c <head>bar</head> d</context></instance>
</lexelt>
<lexelt item="art.n">
<instance id="art.1"><answer instance="art.1" senseid="s1"/><context>e <head>art</head></context></instance>
<instance id="art.2"><answer instance="art.2" senseid="s1"/><answer instance="art.2" senseid="s2"/><context><head>art</head> f</context></instance>
</lexelt>
</corpus>"#,
        );
        let parsed = parse_senseval_xml(f.path()).unwrap();
        assert_eq!(parsed.instances.len(), 4);
        assert_eq!(parsed.instances[0].lemma, "bar.n");
        assert_eq!(parsed.instances[2].lemma, "art.n");
        // multi-gold retained
        assert_eq!(parsed.instances[3].gold, vec!["s1", "s2"]);
        // target at document edge
        assert_eq!(parsed.instances[3].target_position, 0);
    }

    #[test]
    fn empty_lexelt_ok() {
        let f = write_tmp(r#"<corpus><lexelt item="x.n"></lexelt></corpus>"#);
        let parsed = parse_senseval_xml(f.path()).unwrap();
        assert!(parsed.instances.is_empty());
    }

    #[test]
    fn headless_instance_skipped() {
        let f = write_tmp(
            r#"<corpus><lexelt item="x.n">
<instance id="x.1"><answer instance="x.1" senseid="s1"/><context>no head here</context></instance>
</lexelt></corpus>"#,
        );
        let parsed = parse_senseval_xml(f.path()).unwrap();
        assert!(parsed.instances.is_empty());
        assert_eq!(parsed.skipped_headless, 1);
    }

    #[test]
    fn malformed_xml_reports_offset() {
        let f = write_tmp("<corpus><lexelt item='x'><instance></corpus>");
        let err = parse_senseval_xml(f.path()).unwrap_err();
        match err {
            WsdError::Xml { offset, .. } => assert!(offset > 0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn answer_key_roundtrip() {
        let mut preds = BTreeMap::new();
        preds.insert("art.1".to_string(), ("art.n".to_string(), "s1".to_string()));
        preds.insert("bar.2".to_string(), ("bar.n".to_string(), "s2".to_string()));
        let f = tempfile::NamedTempFile::new().unwrap();
        write_answer_key(f.path(), &preds).unwrap();
        let gold = read_answer_key(f.path()).unwrap();
        assert_eq!(gold.len(), 2);
        assert_eq!(gold["art.1"], ("art.n".to_string(), vec!["s1".to_string()]));
    }

    #[test]
    fn answer_key_multi_gold_and_comment_markers() {
        let f = write_tmp("art.n art.1 s1 s2 !! trailing\n\n# comment\nbar.n bar.1 s3\n");
        let gold = read_answer_key(f.path()).unwrap();
        assert_eq!(gold["art.1"].1, vec!["s1", "s2"]);
        assert_eq!(gold["bar.1"].1, vec!["s3"]);
    }
}
