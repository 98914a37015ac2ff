//! JSONL reading and writing for corpora and audit files.
//!
//! Corpus files hold one JSON object per line. An optional first record
//! `{"_alphabet": [...]}` fixes the label alphabet and its order; without it
//! the alphabet is every label seen, in order of first appearance. Unknown
//! keys are rejected everywhere.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::{
    AuditRecord, Corpus, Item, Label, LabelAlphabet, RatingRecord, ValidResponseSet,
};
use crate::error::{Error, Result};

const ALPHABET_KEY: &str = "_alphabet";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderRecord {
    #[serde(rename = "_alphabet")]
    alphabet: Vec<Label>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RatingLine {
    rater_id: String,
    response: Label,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ItemLine {
    item_id: String,
    #[serde(default)]
    instruction: Option<String>,
    ratings: Vec<RatingLine>,
    llm_response: Label,
    #[serde(default)]
    llm_samples: Option<Vec<Label>>,
    #[serde(default)]
    vrs: Option<ValidResponseSet>,
    #[serde(default)]
    indeterminate: Option<bool>,
}

#[derive(Serialize)]
struct ItemOut<'a> {
    item_id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    instruction: Option<&'a str>,
    ratings: &'a [RatingRecord],
    llm_response: &'a Label,
    #[serde(skip_serializing_if = "Option::is_none")]
    llm_samples: Option<&'a [Label]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vrs: Option<&'a ValidResponseSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    indeterminate: Option<bool>,
}

impl From<ItemLine> for Item {
    fn from(line: ItemLine) -> Self {
        Item {
            item_id: line.item_id,
            instruction: line.instruction,
            ratings: line
                .ratings
                .into_iter()
                .map(|r| RatingRecord::new(r.rater_id, r.response))
                .collect(),
            llm_response: line.llm_response,
            llm_samples: line.llm_samples,
            vrs: line.vrs,
            indeterminate_flag: line.indeterminate,
        }
    }
}

fn malformed(line: usize, err: impl std::fmt::Display) -> Error {
    Error::Malformed {
        line,
        message: err.to_string(),
    }
}

/// Iterates over non-blank lines as `(line_number, text)`, 1-based.
fn records<R: BufRead>(source: R) -> impl Iterator<Item = Result<(usize, String)>> {
    source
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Ok(text) if text.trim().is_empty() => None,
            Ok(text) => Some(Ok((i + 1, text))),
            Err(e) => Some(Err(Error::Io(e))),
        })
}

pub fn parse_corpus<R: BufRead>(source: R) -> Result<Corpus> {
    let mut declared: Option<LabelAlphabet> = None;
    let mut items: Vec<(usize, Item)> = Vec::new();

    for (n, record) in records(source).enumerate() {
        let (line, text) = record?;
        let value: Value = serde_json::from_str(&text).map_err(|e| malformed(line, e))?;
        if !value.is_object() {
            return Err(malformed(line, "record must be a JSON object"));
        }
        if n == 0 && value.get(ALPHABET_KEY).is_some() {
            let header: HeaderRecord =
                serde_json::from_value(value).map_err(|e| malformed(line, e))?;
            declared = Some(LabelAlphabet::new(header.alphabet).map_err(|e| e.at_line(line))?);
            continue;
        }
        let parsed: ItemLine = serde_json::from_value(value).map_err(|e| malformed(line, e))?;
        items.push((line, parsed.into()));
    }

    if items.is_empty() {
        return Err(Error::EmptyInput);
    }

    let mut ids = HashSet::with_capacity(items.len());
    for (line, item) in &items {
        if !ids.insert(item.item_id.as_str()) {
            return Err(Error::DuplicateItemId(item.item_id.clone()).at_line(*line));
        }
    }

    let alphabet = match declared {
        Some(alphabet) => {
            for (line, item) in &items {
                crate::corpus::check_item_labels(&alphabet, item).map_err(|e| e.at_line(*line))?;
            }
            alphabet
        }
        None => infer_alphabet(items.iter().map(|(_, item)| item))?,
    };

    Corpus::new(alphabet, items.into_iter().map(|(_, item)| item).collect())
}

fn infer_alphabet<'a>(items: impl Iterator<Item = &'a Item>) -> Result<LabelAlphabet> {
    let mut seen = HashSet::new();
    let mut labels = Vec::new();
    for item in items {
        for label in item.labels() {
            if seen.insert(label) {
                labels.push(label.clone());
            }
        }
    }
    LabelAlphabet::new(labels)
}

/// Writes the alphabet header followed by one line per item. Absent optional
/// fields are omitted rather than written as `null`.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    let header = HeaderRecord {
        alphabet: corpus.alphabet().labels().to_vec(),
    };
    serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    for item in corpus.items() {
        let line = ItemOut {
            item_id: &item.item_id,
            instruction: item.instruction.as_deref(),
            ratings: &item.ratings,
            llm_response: &item.llm_response,
            llm_samples: item.llm_samples.as_deref(),
            vrs: item.vrs.as_ref(),
            indeterminate: item.indeterminate_flag,
        };
        serde_json::to_writer(&mut out, &line).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn corpus_to_string(corpus: &Corpus) -> String {
    let mut buf = Vec::new();
    write_corpus(corpus, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AuditLine {
    item_id: String,
    indeterminate: Option<bool>,
}

/// Reads an audit file. Worksheet rows whose `indeterminate` is still `null`
/// are rejected.
pub fn parse_audits<R: BufRead>(source: R) -> Result<Vec<AuditRecord>> {
    let mut audits = Vec::new();
    for record in records(source) {
        let (line, text) = record?;
        let parsed: AuditLine = serde_json::from_str(&text).map_err(|e| malformed(line, e))?;
        let indeterminate = parsed
            .indeterminate
            .ok_or_else(|| Error::UnfilledAudit(parsed.item_id.clone()).at_line(line))?;
        audits.push(AuditRecord {
            item_id: parsed.item_id,
            indeterminate,
        });
    }
    Ok(audits)
}

#[derive(Serialize)]
struct WorksheetLine<'a> {
    item_id: &'a str,
    indeterminate: Option<bool>,
}

/// Writes an audit worksheet: one row per sampled item, verdict left `null`.
pub fn write_audit_worksheet<W: Write, S: AsRef<str>>(ids: &[S], mut out: W) -> Result<()> {
    for id in ids {
        let line = WorksheetLine {
            item_id: id.as_ref(),
            indeterminate: None,
        };
        serde_json::to_writer(&mut out, &line).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_audits<W: Write>(audits: &[AuditRecord], mut out: W) -> Result<()> {
    for audit in audits {
        serde_json::to_writer(&mut out, audit).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
