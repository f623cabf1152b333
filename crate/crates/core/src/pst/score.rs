use super::tree::{lookup_context, Pst};
use super::PstError;
use crate::Real;

/// Likelihood of one sequence under a tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score<F> {
    pub likelihood: F,
    /// −∞ when any step had probability 0.
    pub log2_likelihood: F,
    /// `-log2_likelihood / length`; +∞ for zero likelihood, 0 for empty input.
    pub per_symbol_log_loss: F,
    pub zero_likelihood: bool,
    pub length: usize,
}

/// Chain-rule likelihood, each symbol conditioned on the longest stored
/// suffix of what precedes it. Accumulated in log2 space.
pub fn score_sequence<F: Real>(pst: &Pst<F>, tokens: &[u32]) -> Score<F> {
    let mut log2_sum = F::zero();
    for (i, &tok) in tokens.iter().enumerate() {
        let node = lookup_context(pst, &tokens[..i]);
        let p = pst.prob(node, tok);
        if p <= F::zero() {
            return Score {
                likelihood: F::zero(),
                log2_likelihood: F::neg_infinity(),
                per_symbol_log_loss: F::infinity(),
                zero_likelihood: true,
                length: tokens.len(),
            };
        }
        log2_sum = log2_sum + p.log2();
    }
    let per_symbol_log_loss = if tokens.is_empty() {
        F::zero()
    } else {
        -log2_sum / F::of(tokens.len() as f64)
    };
    Score {
        likelihood: log2_sum.exp2(),
        log2_likelihood: log2_sum,
        per_symbol_log_loss,
        zero_likelihood: false,
        length: tokens.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flagged<Id> {
    /// `0 < likelihood < limit`, least likely first.
    pub flagged: Vec<Id>,
    /// Zero-likelihood sequences, in input order.
    pub zero: Vec<Id>,
}

/// Flags sequences whose likelihood is non-zero but below `limit`.
///
/// Comparisons use `log2_likelihood`, so long sequences whose likelihood
/// underflows the float type are still ordered correctly.
pub fn flag_anomalies<Id: Clone, F: Real>(
    scores: &[(Id, Score<F>)],
    limit: F,
) -> Result<Flagged<Id>, PstError> {
    if !(limit > F::zero() && limit <= F::one()) {
        return Err(PstError::InvalidLimit(limit.to_f64().unwrap_or(f64::NAN)));
    }
    let cut = limit.log2();
    let mut flagged: Vec<&(Id, Score<F>)> = scores
        .iter()
        .filter(|(_, s)| !s.zero_likelihood && s.log2_likelihood < cut)
        .collect();
    flagged.sort_by(|a, b| a.1.log2_likelihood.partial_cmp(&b.1.log2_likelihood).expect("finite"));
    Ok(Flagged {
        flagged: flagged.into_iter().map(|(id, _)| id.clone()).collect(),
        zero: scores
            .iter()
            .filter(|(_, s)| s.zero_likelihood)
            .map(|(id, _)| id.clone())
            .collect(),
    })
}
