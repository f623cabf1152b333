//! Flow records in, anomaly rankings out.
//!
//! The pipeline has four stages, each usable on its own:
//!
//! 1. [`flow`] parses Zeek conn logs or a labeled CSV into [`flow::FlowRecord`]s.
//! 2. [`lang`] maps each flow to a token (protocol + binned volume) and groups
//!    the tokens of a host pair into time-windowed [`lang::Sequence`]s.
//! 3. [`pst`] counts contexts, builds a probabilistic suffix tree and scores
//!    sequences by likelihood.
//! 4. [`eval`] turns labeled scores into ROC/AUC, precision-at-n and histograms.
//!
//! [`synth`] generates corpora from known Markov sources so the whole chain can
//! be checked against exact likelihoods, and [`words`] runs the same model on
//! plain English words.
//!
//! The numeric core is generic over [`Real`]; `f64` aliases are exported at the
//! crate root for everyday use.

pub mod eval;
pub mod flow;
pub mod lang;
pub mod pst;
pub mod synth;
pub mod words;

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar used for probabilities, scores and curve coordinates.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossless-enough conversion from a count or literal.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub use eval::{EvalReport, ZeroPolicy};
pub use flow::{FlowRecord, IngestStats, Label, Protocol};
pub use lang::{Sequence, SessionPolicy, TokenScheme, Vocabulary};
pub use pst::{ContextCounts, PstParams};

pub type Pst = pst::Pst<f64>;
pub type Pst32 = pst::Pst<f32>;
pub type Score = pst::Score<f64>;
pub type Score32 = pst::Score<f32>;
pub type ScoredExample = eval::ScoredExample<f64>;
pub type RocPoint = eval::RocPoint<f64>;
pub type Histogram = eval::Histogram<f64>;
