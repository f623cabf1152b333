//! The flow language: tokens, vocabulary and host-pair sessions.

mod seqfile;
mod session;
mod token;
mod vocab;

pub use seqfile::{read_sequences, write_sequences, SeqFileError};
pub use session::{aggregate_label, sessionize, Sequence, SessionPolicy};
pub use token::{density_bucket, log2_bin, tokenize, Bin, Token, TokenScheme};
pub use vocab::Vocabulary;
