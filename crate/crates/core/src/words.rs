//! Spelling-likelihood demo: the same tree trained on English words, one
//! character per token. Words that follow common spelling patterns score a
//! low per-symbol log loss; odd spellings score high.

use thiserror::Error;

use crate::lang::Vocabulary;
use crate::pst::{build_tree, count_contexts, score_sequence, Pst, PstError, PstParams, Score};

/// A few thousand common English words, one per line.
pub const BUNDLED_WORDS: &str = include_str!("../data/english_words.txt");

#[derive(Debug, Error, PartialEq)]
pub enum WordsError {
    #[error("word list is empty")]
    Empty,
    #[error("line {line}: {word:?} is not a lowercase a-z word")]
    BadWord { line: usize, word: String },
    #[error(transparent)]
    Pst(#[from] PstError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordScore {
    pub word: String,
    pub score: Score<f64>,
}

/// Reads one word per line; blank lines are skipped.
pub fn parse_wordlist(text: &str) -> Result<Vec<String>, WordsError> {
    let mut words = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let w = line.trim();
        if w.is_empty() {
            continue;
        }
        if !w.bytes().all(|b| b.is_ascii_lowercase()) {
            return Err(WordsError::BadWord {
                line: i + 1,
                word: w.to_string(),
            });
        }
        words.push(w.to_string());
    }
    if words.is_empty() {
        return Err(WordsError::Empty);
    }
    Ok(words)
}

/// Trains on `words` and returns the tree with the character vocabulary.
pub fn train_words(words: &[String], params: PstParams) -> Result<(Pst<f64>, Vocabulary), WordsError> {
    if words.is_empty() {
        return Err(WordsError::Empty);
    }
    let mut vocab = Vocabulary::new();
    let encoded: Vec<Vec<u32>> = words
        .iter()
        .map(|w| w.chars().map(|c| vocab.intern(c.encode_utf8(&mut [0; 4]))).collect())
        .collect();
    let counts = count_contexts(&encoded, params.depth);
    let pst = build_tree(&counts, params, vocab.len())?.with_vocab(vocab.tokens().to_vec())?;
    Ok((pst, vocab))
}

/// Trains on the list and scores every word, most typical spelling first
/// (ascending per-symbol log loss, ties by word).
pub fn score_words(words: &[String], params: PstParams) -> Result<Vec<WordScore>, WordsError> {
    let (pst, vocab) = train_words(words, params)?;
    let mut out: Vec<WordScore> = words
        .iter()
        .map(|w| {
            let ids: Vec<u32> = w
                .chars()
                .map(|c| vocab.id(c.encode_utf8(&mut [0; 4])).expect("trained on this word"))
                .collect();
            WordScore {
                word: w.clone(),
                score: score_sequence(&pst, &ids),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.score
            .per_symbol_log_loss
            .total_cmp(&b.score.per_symbol_log_loss)
            .then_with(|| a.word.cmp(&b.word))
    });
    Ok(out)
}
