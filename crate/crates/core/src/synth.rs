//! Synthetic corpora from known Markov sources, with exact likelihoods.
//!
//! # Random stream
//!
//! All randomness comes from xoshiro256** seeded through SplitMix64 (the
//! reference seeding for xoshiro generators). Draws are consumed in a fixed
//! order and converted without platform-dependent code:
//!
//! * `unit()` = `(next_u64 >> 11) * 2^-53`, uniform on `[0, 1)`;
//! * `below(n)` = `floor(unit() * n)`;
//! * categorical sampling walks the distribution in symbol order and returns
//!   the first index whose running sum exceeds `unit()` (the last non-zero
//!   entry absorbs rounding).
//!
//! For each sequence [`generate_corpus`] draws, in order: one `unit()` for the
//! label, one `below` for the length, one categorical draw for the initial
//! prefix, then one per remaining symbol.

use std::collections::BTreeMap;

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use thiserror::Error;

use crate::flow::Label;
use crate::lang::{Sequence, Vocabulary};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid Markov spec: {0}")]
    InvalidSpec(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("symbol {symbol} outside alphabet of {alphabet}")]
    SymbolOutOfRange { symbol: u32, alphabet: usize },
    #[error("sequence of length {len} is shorter than the source order {order}")]
    TooShort { len: usize, order: usize },
}

/// Seeded xoshiro256** stream with fixed conversions.
#[derive(Debug, Clone)]
pub struct SynthRng(Xoshiro256StarStar);

impl SynthRng {
    pub fn new(seed: u64) -> Self {
        SynthRng(Xoshiro256StarStar::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        ((self.unit() * n as f64) as u64).min(n.saturating_sub(1))
    }

    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.unit();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }
}

/// Order-k Markov source over symbols `0..alphabet`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSpec {
    pub order: usize,
    pub alphabet: usize,
    /// Next-symbol distribution (length `alphabet`) per length-k context.
    pub transitions: BTreeMap<Vec<u32>, Vec<f64>>,
    /// Probability of each length-k starting prefix.
    pub initial: BTreeMap<Vec<u32>, f64>,
}

const SUM_TOL: f64 = 1e-12;

fn all_strings(alphabet: usize, len: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..alphabet as u32).map(move |c| {
                    let mut t = s.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
    }
    out
}

impl MarkovSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.alphabet == 0 {
            return bad("empty alphabet".into());
        }
        let key_ok = |k: &[u32]| k.len() == self.order && k.iter().all(|&s| (s as usize) < self.alphabet);
        for (ctx, row) in &self.transitions {
            if !key_ok(ctx) {
                return bad(format!("bad transition context {ctx:?}"));
            }
            if row.len() != self.alphabet || row.iter().any(|&p| p.is_nan() || p < 0.0) {
                return bad(format!("bad transition row for {ctx:?}"));
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > SUM_TOL {
                return bad(format!("row for {ctx:?} does not sum to 1"));
            }
        }
        if self.initial.keys().any(|k| !key_ok(k)) || self.initial.values().any(|&p| p.is_nan() || p < 0.0) {
            return bad("bad initial distribution entry".into());
        }
        if (self.initial.values().sum::<f64>() - 1.0).abs() > SUM_TOL {
            return bad("initial distribution does not sum to 1".into());
        }
        Ok(())
    }

    /// Every context draws each symbol with probability `1/alphabet`;
    /// prefixes are uniform.
    pub fn uniform(order: usize, alphabet: usize) -> Self {
        let contexts = all_strings(alphabet, order);
        let p0 = 1.0 / contexts.len() as f64;
        MarkovSpec {
            order,
            alphabet,
            transitions: contexts
                .iter()
                .map(|c| (c.clone(), vec![1.0 / alphabet as f64; alphabet]))
                .collect(),
            initial: contexts.into_iter().map(|c| (c, p0)).collect(),
        }
    }

    /// Order-1 cycle `0 → 1 → … → alphabet-1 → 0`, starting anywhere.
    pub fn cycle(alphabet: usize) -> Self {
        let mut spec = MarkovSpec::uniform(1, alphabet);
        for (ctx, row) in spec.transitions.iter_mut() {
            row.iter_mut().for_each(|p| *p = 0.0);
            row[(ctx[0] as usize + 1) % alphabet] = 1.0;
        }
        spec
    }

    /// Random rows with weights `u^sharpness` (u uniform), normalised.
    /// Larger `sharpness` concentrates each row on fewer symbols. Prefixes are
    /// uniform. Rows are drawn in lexicographic context order.
    pub fn random(order: usize, alphabet: usize, sharpness: f64, rng: &mut SynthRng) -> Self {
        let mut spec = MarkovSpec::uniform(order, alphabet);
        for row in spec.transitions.values_mut() {
            let weights: Vec<f64> = (0..alphabet)
                .map(|_| (1.0 - rng.unit()).powf(sharpness))
                .collect();
            let total: f64 = weights.iter().sum();
            *row = weights.iter().map(|w| w / total).collect();
            // renormalise so the row sums to 1 within SUM_TOL
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= s);
        }
        spec
    }

    /// Draws a sequence of exactly `len` symbols (`len >= order`).
    pub fn sample(&self, len: usize, rng: &mut SynthRng) -> Result<Vec<u32>, SynthError> {
        if len < self.order {
            return Err(SynthError::TooShort { len, order: self.order });
        }
        let prefixes: Vec<(&Vec<u32>, f64)> = self.initial.iter().map(|(k, &p)| (k, p)).collect();
        let probs: Vec<f64> = prefixes.iter().map(|&(_, p)| p).collect();
        let mut seq = prefixes[rng.categorical(&probs)].0.clone();
        while seq.len() < len {
            let ctx = &seq[seq.len() - self.order..];
            let row = self
                .transitions
                .get(ctx)
                .ok_or_else(|| SynthError::InvalidSpec(format!("no transition row for {ctx:?}")))?;
            seq.push(rng.categorical(row) as u32);
        }
        Ok(seq)
    }
}

/// Chain-rule probability: initial prefix times every transition. Contexts
/// absent from the table contribute probability 0.
pub fn exact_likelihood(spec: &MarkovSpec, sequence: &[u32]) -> Result<f64, SynthError> {
    if sequence.len() < spec.order {
        return Err(SynthError::TooShort {
            len: sequence.len(),
            order: spec.order,
        });
    }
    if let Some(&symbol) = sequence.iter().find(|&&s| s as usize >= spec.alphabet) {
        return Err(SynthError::SymbolOutOfRange {
            symbol,
            alphabet: spec.alphabet,
        });
    }
    let k = spec.order;
    let mut p = spec.initial.get(&sequence[..k]).copied().unwrap_or(0.0);
    for i in k..sequence.len() {
        p *= spec
            .transitions
            .get(&sequence[i - k..i])
            .map_or(0.0, |row| row[sequence[i] as usize]);
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    pub n_sequences: usize,
    pub length_min: usize,
    pub length_max: usize,
    pub anomaly_fraction: f64,
    pub seed: u64,
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.into()));
        if self.length_min < 1 {
            return bad("length_min must be at least 1");
        }
        if self.length_min > self.length_max {
            return bad("length_min exceeds length_max");
        }
        if !(0.0..=1.0).contains(&self.anomaly_fraction) {
            return bad("anomaly_fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub tokens: Vec<u32>,
    pub label: Label,
}

/// Draws `n_sequences` sequences: each comes from `anomaly` (label attack)
/// with probability `anomaly_fraction`, else from `background` (normal).
pub fn generate_corpus(
    background: &MarkovSpec,
    anomaly: &MarkovSpec,
    cfg: &GenConfig,
) -> Result<Vec<LabeledSequence>, SynthError> {
    background.validate()?;
    anomaly.validate()?;
    cfg.validate()?;
    if background.alphabet != anomaly.alphabet {
        return Err(SynthError::InvalidSpec("sources use different alphabets".into()));
    }
    let longest_order = background.order.max(anomaly.order);
    if cfg.length_min < longest_order {
        return Err(SynthError::InvalidConfig(format!(
            "length_min {} below source order {longest_order}",
            cfg.length_min
        )));
    }
    let mut rng = SynthRng::new(cfg.seed);
    let span = (cfg.length_max - cfg.length_min + 1) as u64;
    (0..cfg.n_sequences)
        .map(|_| {
            let attack = rng.unit() < cfg.anomaly_fraction;
            let len = cfg.length_min + rng.below(span) as usize;
            let source = if attack { anomaly } else { background };
            Ok(LabeledSequence {
                tokens: source.sample(len, &mut rng)?,
                label: if attack { Label::Attack } else { Label::Normal },
            })
        })
        .collect()
}

/// Offset separating the source-construction stream from the corpus stream.
const SOURCE_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// Background and anomaly sources used by the `synth` command: two
/// independent [`MarkovSpec::random`] draws with sharpness 3, background
/// first, from the stream seeded with `seed ^ 0x9E3779B97F4A7C15`.
pub fn standard_sources(order: usize, alphabet: usize, seed: u64) -> (MarkovSpec, MarkovSpec) {
    let mut rng = SynthRng::new(seed ^ SOURCE_STREAM);
    let background = MarkovSpec::random(order, alphabet, 3.0, &mut rng);
    let anomaly = MarkovSpec::random(order, alphabet, 3.0, &mut rng);
    (background, anomaly)
}

/// Token names `sym_b0 … sym_b{alphabet-1}`.
pub fn synth_vocabulary(alphabet: usize) -> Vocabulary {
    (0..alphabet).map(|i| format!("sym_b{i}")).collect()
}

/// Wraps generated sequences as sessions (`synth` / `<index>` host pair,
/// window 0) so they can be written as a sequences file.
pub fn to_sessions(corpus: &[LabeledSequence]) -> Vec<Sequence> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, s)| Sequence {
            ip_low: "synth".into(),
            ip_high: i.to_string(),
            window_start: 0.0,
            n_flows: s.tokens.len(),
            token_ids: s.tokens.clone(),
            label: s.label,
        })
        .collect()
}
