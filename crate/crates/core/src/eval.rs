//! Detection quality from labeled scores: ROC, AUC, precision-at-n and
//! score histograms.
//!
//! Everything here ranks by an *anomaly score*, higher meaning more
//! anomalous. By default that is the per-symbol log loss of a sequence.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::flow::Label;
use crate::pst::Score;
use crate::Real;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("evaluation needs both attack and normal examples ({n_attack} attack, {n_normal} normal)")]
    SingleClass { n_attack: usize, n_normal: usize },
    #[error("malformed ROC curve: {0}")]
    MalformedCurve(String),
    #[error("n = {n} outside 1..={len}")]
    OutOfRange { n: usize, len: usize },
    #[error("histogram needs at least one bin")]
    NoBins,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    Normal,
    Attack,
}

impl BinaryLabel {
    pub fn from_label(label: Label) -> Option<Self> {
        match label {
            Label::Normal => Some(BinaryLabel::Normal),
            Label::Attack => Some(BinaryLabel::Attack),
            Label::Unlabeled => None,
        }
    }

    pub fn swapped(self) -> Self {
        match self {
            BinaryLabel::Normal => BinaryLabel::Attack,
            BinaryLabel::Attack => BinaryLabel::Normal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredExample<F> {
    pub id: String,
    pub anomaly_score: F,
    pub label: BinaryLabel,
    pub zero_likelihood: bool,
}

/// What to do with zero-likelihood sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroPolicy {
    /// Leave them out of the ranking (they are reported separately).
    #[default]
    ExcludeZero,
    /// Rank them above every finite score.
    ZeroMostAnomalous,
}

/// Statistic turned into the anomaly score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankBy {
    /// Per-symbol log loss (length normalised).
    #[default]
    LogLoss,
    /// Raw likelihood, ranked through `-log2 likelihood` so that values
    /// below the float range still order correctly.
    Likelihood,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet<F> {
    pub examples: Vec<ScoredExample<F>>,
    /// Labeled zero-likelihood sequences, whether kept or excluded.
    pub n_zero_likelihood: usize,
}

/// Converts raw scores to ranked examples. Unlabeled inputs are always dropped.
pub fn make_scored<F: Real>(
    scores: &[(String, Score<F>, Label)],
    policy: ZeroPolicy,
    rank: RankBy,
) -> ScoredSet<F> {
    let mut examples = Vec::with_capacity(scores.len());
    let mut n_zero = 0;
    for (id, score, label) in scores {
        let Some(label) = BinaryLabel::from_label(*label) else {
            continue;
        };
        if score.zero_likelihood {
            n_zero += 1;
            if policy == ZeroPolicy::ExcludeZero {
                continue;
            }
        }
        let anomaly_score = if score.zero_likelihood {
            F::infinity()
        } else {
            match rank {
                RankBy::LogLoss => score.per_symbol_log_loss,
                RankBy::Likelihood => -score.log2_likelihood,
            }
        };
        examples.push(ScoredExample {
            id: id.clone(),
            anomaly_score,
            label,
            zero_likelihood: score.zero_likelihood,
        });
    }
    ScoredSet {
        examples,
        n_zero_likelihood: n_zero,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint<F> {
    pub fpr: F,
    pub tpr: F,
    /// Examples scoring at or above this are called anomalous; +∞ at the origin.
    pub threshold: F,
}

fn class_counts<F>(examples: &[ScoredExample<F>]) -> (usize, usize) {
    let n_attack = examples
        .iter()
        .filter(|e| e.label == BinaryLabel::Attack)
        .count();
    (n_attack, examples.len() - n_attack)
}

fn desc<F: Real>(a: F, b: F) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// ROC points from a threshold sweep over distinct scores, highest first.
/// Examples sharing a score enter together as one step.
pub fn roc_curve<F: Real>(examples: &[ScoredExample<F>]) -> Result<Vec<RocPoint<F>>, EvalError> {
    let (n_attack, n_normal) = class_counts(examples);
    if n_attack == 0 || n_normal == 0 {
        return Err(EvalError::SingleClass { n_attack, n_normal });
    }
    let mut sorted: Vec<(F, BinaryLabel)> =
        examples.iter().map(|e| (e.anomaly_score, e.label)).collect();
    sorted.sort_by(|a, b| desc(a.0, b.0));

    let (pos, neg) = (F::of(n_attack as f64), F::of(n_normal as f64));
    let mut points = vec![RocPoint {
        fpr: F::zero(),
        tpr: F::zero(),
        threshold: F::infinity(),
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            match sorted[i].1 {
                BinaryLabel::Attack => tp += 1,
                BinaryLabel::Normal => fp += 1,
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: F::of(fp as f64) / neg,
            tpr: F::of(tp as f64) / pos,
            threshold: score,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC curve.
pub fn auc<F: Real>(roc: &[RocPoint<F>]) -> Result<F, EvalError> {
    let bad = |m: &str| Err(EvalError::MalformedCurve(m.to_string()));
    let (Some(first), Some(last)) = (roc.first(), roc.last()) else {
        return bad("empty curve");
    };
    if !(first.fpr.is_zero() && first.tpr.is_zero()) {
        return bad("curve must start at (0, 0)");
    }
    if last.fpr != F::one() || last.tpr != F::one() {
        return bad("curve must end at (1, 1)");
    }
    let half = F::of(0.5);
    let mut area = F::zero();
    for w in roc.windows(2) {
        if w[1].fpr < w[0].fpr || w[1].tpr < w[0].tpr {
            return bad("coordinates must be non-decreasing");
        }
        area = area + (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) * half;
    }
    Ok(area)
}

/// Sorted most anomalous first; equal scores by id ascending.
fn ranked<F: Real>(examples: &[ScoredExample<F>]) -> Vec<&ScoredExample<F>> {
    let mut v: Vec<&ScoredExample<F>> = examples.iter().collect();
    v.sort_by(|a, b| desc(a.anomaly_score, b.anomaly_score).then_with(|| a.id.cmp(&b.id)));
    v
}

/// Fraction of attacks among the `n` most anomalous examples.
pub fn precision_at_n<F: Real>(examples: &[ScoredExample<F>], n: usize) -> Result<F, EvalError> {
    if n == 0 || n > examples.len() {
        return Err(EvalError::OutOfRange {
            n,
            len: examples.len(),
        });
    }
    let hits = ranked(examples)
        .into_iter()
        .take(n)
        .filter(|e| e.label == BinaryLabel::Attack)
        .count();
    Ok(F::of(hits as f64) / F::of(n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram<F> {
    /// `n_bins + 1` strictly increasing edges over the finite scores.
    pub edges: Vec<F>,
    pub normal: Vec<usize>,
    pub attack: Vec<usize>,
    /// Infinite scores (zero likelihood).
    pub overflow_normal: usize,
    pub overflow_attack: usize,
}

/// Equal-width histogram of anomaly scores, split by label.
pub fn histogram<F: Real>(examples: &[ScoredExample<F>], n_bins: usize) -> Result<Histogram<F>, EvalError> {
    if n_bins == 0 {
        return Err(EvalError::NoBins);
    }
    let finite = examples.iter().map(|e| e.anomaly_score).filter(|s| s.is_finite());
    let (lo, hi) = finite.fold(None, |acc: Option<(F, F)>, s| match acc {
        None => Some((s, s)),
        Some((lo, hi)) => Some((lo.min(s), hi.max(s))),
    })
    .unwrap_or((F::zero(), F::one()));
    let hi = if hi > lo { hi } else { lo + F::one() };
    let width = (hi - lo) / F::of(n_bins as f64);
    let edges: Vec<F> = (0..=n_bins)
        .map(|i| if i == n_bins { hi } else { lo + width * F::of(i as f64) })
        .collect();

    let mut h = Histogram {
        edges,
        normal: vec![0; n_bins],
        attack: vec![0; n_bins],
        overflow_normal: 0,
        overflow_attack: 0,
    };
    for e in examples {
        let s = e.anomaly_score;
        if !s.is_finite() {
            match e.label {
                BinaryLabel::Normal => h.overflow_normal += 1,
                BinaryLabel::Attack => h.overflow_attack += 1,
            }
            continue;
        }
        let bin = ((s - lo) / width)
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(n_bins - 1);
        match e.label {
            BinaryLabel::Normal => h.normal[bin] += 1,
            BinaryLabel::Attack => h.attack[bin] += 1,
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport<F> {
    pub auc: F,
    pub roc: Vec<RocPoint<F>>,
    pub precision_at: BTreeMap<usize, F>,
    pub histogram: Histogram<F>,
    pub n_attack: usize,
    pub n_normal: usize,
    pub n_zero_likelihood: usize,
}

/// Full report. Precision is computed for each `n` in `precision_ns` that
/// does not exceed the number of examples.
pub fn evaluate<F: Real>(
    set: &ScoredSet<F>,
    precision_ns: &[usize],
    n_bins: usize,
) -> Result<EvalReport<F>, EvalError> {
    let roc = roc_curve(&set.examples)?;
    let auc = auc(&roc)?;
    let (n_attack, n_normal) = class_counts(&set.examples);
    let mut precision_at = BTreeMap::new();
    for &n in precision_ns {
        if n >= 1 && n <= set.examples.len() {
            precision_at.insert(n, precision_at_n(&set.examples, n)?);
        }
    }
    Ok(EvalReport {
        auc,
        roc,
        precision_at,
        histogram: histogram(&set.examples, n_bins)?,
        n_attack,
        n_normal,
        n_zero_likelihood: set.n_zero_likelihood,
    })
}

/// `fpr,tpr,threshold`, one row per ROC point.
pub fn write_roc_csv<F: Real, W: Write>(roc: &[RocPoint<F>], mut w: W) -> io::Result<()> {
    writeln!(w, "fpr,tpr,threshold")?;
    for p in roc {
        writeln!(w, "{},{},{}", p.fpr, p.tpr, p.threshold)?;
    }
    w.flush()
}

/// `bin_lo,bin_hi,normal_count,attack_count`; infinite scores go to a final
/// `inf,inf` row.
pub fn write_hist_csv<F: Real, W: Write>(h: &Histogram<F>, mut w: W) -> io::Result<()> {
    writeln!(w, "bin_lo,bin_hi,normal_count,attack_count")?;
    for (i, (n, a)) in h.normal.iter().zip(&h.attack).enumerate() {
        writeln!(w, "{},{},{},{}", h.edges[i], h.edges[i + 1], n, a)?;
    }
    writeln!(w, "inf,inf,{},{}", h.overflow_normal, h.overflow_attack)?;
    w.flush()
}
