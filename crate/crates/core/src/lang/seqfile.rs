//! Plain-text sequences file.
//!
//! ```text
//! #vocab <n>
//! <id>\t<token>            (n lines, ids 0..n-1 in order)
//! <label>\t<ip_low>\t<ip_high>\t<window_start>\t<id id id ...>
//! ```

use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::session::Sequence;
use super::vocab::Vocabulary;
use crate::flow::Label;

#[derive(Debug, Error)]
pub enum SeqFileError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("sequence {index} uses token id {id} missing from the vocabulary")]
    UnknownId { index: usize, id: u32 },
    #[error("token {0:?} cannot be stored (contains tab or newline)")]
    BadToken(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn clean_field(s: &str) -> bool {
    !s.is_empty() && !s.contains(['\t', '\n', '\r'])
}

pub fn write_sequences<W: Write>(
    sequences: &[Sequence],
    vocab: &Vocabulary,
    mut sink: W,
) -> Result<(), SeqFileError> {
    for (index, seq) in sequences.iter().enumerate() {
        if let Some(&id) = seq.token_ids.iter().find(|&&id| id as usize >= vocab.len()) {
            return Err(SeqFileError::UnknownId { index, id });
        }
        for f in [&seq.ip_low, &seq.ip_high] {
            if !clean_field(f) {
                return Err(SeqFileError::BadToken(f.clone()));
            }
        }
    }
    writeln!(sink, "#vocab {}", vocab.len())?;
    for (id, tok) in vocab.iter() {
        if !clean_field(tok) {
            return Err(SeqFileError::BadToken(tok.to_string()));
        }
        writeln!(sink, "{id}\t{tok}")?;
    }
    for seq in sequences {
        let ids: Vec<String> = seq.token_ids.iter().map(u32::to_string).collect();
        writeln!(
            sink,
            "{}\t{}\t{}\t{}\t{}",
            seq.label,
            seq.ip_low,
            seq.ip_high,
            seq.window_start,
            ids.join(" ")
        )?;
    }
    sink.flush()?;
    Ok(())
}

fn parse_label(s: &str) -> Option<Label> {
    match s {
        "normal" => Some(Label::Normal),
        "attack" => Some(Label::Attack),
        "unlabeled" => Some(Label::Unlabeled),
        _ => None,
    }
}

pub fn read_sequences<R: BufRead>(source: R) -> Result<(Vec<Sequence>, Vocabulary), SeqFileError> {
    let mut lines = source.lines().enumerate().map(|(i, l)| (i + 1, l));
    let err = |line: usize, msg: String| SeqFileError::Format { line, msg };

    let Some((line, header)) = lines.next() else {
        return Ok((Vec::new(), Vocabulary::new()));
    };
    let header = header?;
    let n: usize = header
        .strip_prefix("#vocab ")
        .and_then(|n| n.trim().parse().ok())
        .ok_or_else(|| err(line, format!("expected `#vocab <n>`, found {header:?}")))?;

    let mut vocab = Vocabulary::new();
    for expect in 0..n {
        let (line, text) = lines
            .next()
            .ok_or_else(|| err(line + expect, "vocabulary truncated".into()))?;
        let text = text?;
        let (id, tok) = text
            .split_once('\t')
            .ok_or_else(|| err(line, "expected `<id>\\t<token>`".into()))?;
        if id.parse::<usize>().ok() != Some(expect) {
            return Err(err(line, format!("expected id {expect}, found {id:?}")));
        }
        if tok.is_empty() || vocab.id(tok).is_some() {
            return Err(err(line, format!("empty or duplicate token {tok:?}")));
        }
        vocab.intern(tok);
    }

    let mut sequences = Vec::new();
    for (line, text) in lines {
        let text = text?;
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split('\t').collect();
        let [label, ip_low, ip_high, start, ids] = fields[..] else {
            return Err(err(line, format!("expected 5 tab-separated fields, found {}", fields.len())));
        };
        let label = parse_label(label).ok_or_else(|| err(line, format!("bad label {label:?}")))?;
        let window_start: f64 = start
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| err(line, format!("bad window start {start:?}")))?;
        let token_ids = ids
            .split(' ')
            .map(|t| match t.parse::<u32>() {
                Ok(id) if (id as usize) < n => Ok(id),
                Ok(id) => Err(err(line, format!("unknown token id {id}"))),
                Err(_) => Err(err(line, format!("bad token id {t:?}"))),
            })
            .collect::<Result<Vec<u32>, _>>()?;
        if ip_low.is_empty() || ip_high.is_empty() {
            return Err(err(line, "empty host field".into()));
        }
        sequences.push(Sequence {
            ip_low: ip_low.to_string(),
            ip_high: ip_high.to_string(),
            window_start,
            n_flows: token_ids.len(),
            token_ids,
            label,
        });
    }
    Ok((sequences, vocab))
}
