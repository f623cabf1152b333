use std::collections::{BTreeMap, HashMap};

use super::counts::{ContextCounts, ContextStats};
use super::{PstError, PstParams};
use crate::Real;

/// One context of the tree with its next-symbol distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PstNode<F> {
    /// Context symbols, oldest first. Empty at the root.
    pub(crate) context: Vec<u32>,
    /// Raw empirical distribution, sorted by symbol, zero entries omitted.
    pub(crate) dist: Vec<(u32, F)>,
    /// Children keyed by the symbol prepended to this context.
    pub(crate) children: BTreeMap<u32, usize>,
}

impl<F: Real> PstNode<F> {
    pub fn context(&self) -> &[u32] {
        &self.context
    }

    pub fn depth(&self) -> usize {
        self.context.len()
    }

    /// Raw P̂(σ | context) over the observed support.
    pub fn raw_distribution(&self) -> &[(u32, F)] {
        &self.dist
    }

    pub fn raw_prob(&self, symbol: u32) -> F {
        self.dist
            .binary_search_by_key(&symbol, |&(s, _)| s)
            .map_or(F::zero(), |i| self.dist[i].1)
    }

    pub fn children(&self) -> impl Iterator<Item = (u32, usize)> + '_ {
        self.children.iter().map(|(&s, &i)| (s, i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct TrainingMeta {
    pub sequences: u64,
    pub tokens: u64,
}

/// A built suffix tree. Immutable; safe to share across scoring threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Pst<F> {
    pub(crate) params: PstParams,
    pub(crate) vocab_size: usize,
    pub(crate) vocab: Option<Vec<String>>,
    pub(crate) nodes: Vec<PstNode<F>>,
    pub(crate) meta: TrainingMeta,
    /// 1 - |Σ|·ε
    pub(crate) scale: F,
    pub(crate) epsilon: F,
}

impl<F: Real> Pst<F> {
    pub fn params(&self) -> &PstParams {
        &self.params
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Token texts by id, when the tree was trained from a named vocabulary.
    pub fn vocab(&self) -> Option<&[String]> {
        self.vocab.as_deref()
    }

    /// Attaches token texts; `tokens.len()` must equal the vocabulary size.
    pub fn with_vocab(mut self, tokens: Vec<String>) -> Result<Self, PstError> {
        if tokens.len() != self.vocab_size {
            return Err(PstError::InvalidParams(format!(
                "vocabulary has {} tokens, tree expects {}",
                tokens.len(),
                self.vocab_size
            )));
        }
        self.vocab = Some(tokens);
        Ok(self)
    }

    pub fn meta(&self) -> TrainingMeta {
        self.meta
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(PstNode::depth).max().unwrap_or(0)
    }

    pub fn root(&self) -> &PstNode<F> {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[PstNode<F>] {
        &self.nodes
    }

    pub fn node(&self, context: &[u32]) -> Option<&PstNode<F>> {
        let mut idx = 0;
        for sym in context.iter().rev() {
            idx = *self.nodes[idx].children.get(sym)?;
        }
        Some(&self.nodes[idx])
    }

    /// Smoothed P(σ | node); ids at or beyond the vocabulary size get 0.
    pub fn prob(&self, node: &PstNode<F>, symbol: u32) -> F {
        if symbol as usize >= self.vocab_size {
            return F::zero();
        }
        self.scale * node.raw_prob(symbol) + self.epsilon
    }

    /// Smoothed distribution of `node` over the whole vocabulary.
    pub fn distribution(&self, node: &PstNode<F>) -> Vec<F> {
        (0..self.vocab_size as u32).map(|s| self.prob(node, s)).collect()
    }

    pub(crate) fn assemble(
        params: PstParams,
        vocab_size: usize,
        meta: TrainingMeta,
        mut entries: Vec<NodeEntry<F>>,
    ) -> Result<Self, String> {
        entries.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        if entries.first().map(|e| e.0.is_empty()) != Some(true) {
            return Err("missing root node".into());
        }
        let mut index: HashMap<Vec<u32>, usize> = HashMap::with_capacity(entries.len());
        let mut nodes: Vec<PstNode<F>> = Vec::with_capacity(entries.len());
        for (i, (context, dist)) in entries.into_iter().enumerate() {
            if index.contains_key(&context) {
                return Err(format!("duplicate context {context:?}"));
            }
            if let Some((&head, suffix)) = context.split_first() {
                let parent = *index
                    .get(suffix)
                    .ok_or_else(|| format!("context {context:?} lacks its suffix node"))?;
                nodes[parent].children.insert(head, i);
            }
            index.insert(context.clone(), i);
            nodes.push(PstNode {
                context,
                dist,
                children: BTreeMap::new(),
            });
        }
        let eps = F::of(params.epsilon);
        Ok(Pst {
            params,
            vocab_size,
            vocab: None,
            nodes,
            meta,
            scale: F::one() - F::of(vocab_size as f64) * eps,
            epsilon: eps,
        })
    }
}

/// Context with its raw distribution, before linking.
pub(crate) type NodeEntry<F> = (Vec<u32>, Vec<(u32, F)>);

fn ratio<F: Real>(n: u64, d: u64) -> F {
    F::of(n as f64) / F::of(d as f64)
}

fn conditional<F: Real>(stats: &ContextStats) -> Vec<(u32, F)> {
    let total = stats.follow_total();
    stats
        .follow
        .iter()
        .filter(|(_, &n)| n > 0)
        .map(|(&s, &n)| (s, ratio(n, total)))
        .collect()
}

/// Order-0 distribution N(σ) / total_positions.
fn root_distribution<F: Real>(counts: &ContextCounts) -> Vec<(u32, F)> {
    let total = counts.total_positions();
    let mut dist: Vec<(u32, F)> = counts
        .iter()
        .filter(|(ctx, _)| ctx.len() == 1)
        .map(|(ctx, st)| (ctx[0], ratio(st.occurrences, total)))
        .collect();
    dist.sort_by_key(|&(s, _)| s);
    dist
}

fn lookup_prob<F: Real>(dist: &[(u32, F)], symbol: u32) -> F {
    dist.binary_search_by_key(&symbol, |&(s, _)| s)
        .map_or(F::zero(), |i| dist[i].1)
}

/// Builds the tree from context counts.
///
/// A context `s` (1 ≤ |s| ≤ depth) is kept when
/// * `N(s) / total_positions >= p_min`, and
/// * some σ observed after `s` has `P̂(σ|s) >= threshold` and
///   `P̂(σ|s) / P̂(σ|suffix(s))` is `>= tau` or `<= 1/tau`
///   (a zero denominator counts as an infinite ratio).
///
/// Contexts never followed by a symbol carry no distribution and are skipped.
/// All proper suffixes of kept contexts are then added, so longest-suffix
/// lookup is always well defined.
pub fn build_tree<F: Real>(
    counts: &ContextCounts,
    params: PstParams,
    vocab_size: usize,
) -> Result<Pst<F>, PstError> {
    params.validate_for(vocab_size)?;
    if params.depth > counts.max_len() {
        return Err(PstError::DepthExceedsCounts {
            depth: params.depth,
            max_len: counts.max_len(),
        });
    }
    for (ctx, stats) in counts.iter() {
        let worst = ctx.iter().chain(stats.follow.keys()).copied().max();
        if let Some(symbol) = worst.filter(|&s| s as usize >= vocab_size) {
            return Err(PstError::SymbolOutOfRange { symbol, vocab_size });
        }
    }

    let total = counts.total_positions();
    let root = root_distribution::<F>(counts);
    let p_min = F::of(params.p_min);
    let threshold = F::of(params.threshold);
    let tau = F::of(params.tau);
    let inv_tau = F::one() / tau;

    let parent_prob = |suffix: &[u32], symbol: u32| -> F {
        if suffix.is_empty() {
            lookup_prob(&root, symbol)
        } else {
            counts.get(suffix).map_or(F::zero(), |st| {
                ratio(st.follow.get(&symbol).copied().unwrap_or(0), st.follow_total())
            })
        }
    };

    let mut kept: HashMap<Vec<u32>, Vec<(u32, F)>> = HashMap::new();
    for (ctx, stats) in counts.iter() {
        if ctx.is_empty() || ctx.len() > params.depth || kept.contains_key(ctx) {
            continue;
        }
        let follow_total = stats.follow_total();
        if follow_total == 0 || ratio::<F>(stats.occurrences, total) < p_min {
            continue;
        }
        let informative = stats.follow.iter().any(|(&sym, &n)| {
            let p: F = ratio(n, follow_total);
            if n == 0 || p < threshold {
                return false;
            }
            let q = parent_prob(&ctx[1..], sym);
            if q.is_zero() {
                return true;
            }
            let r = p / q;
            r >= tau || r <= inv_tau
        });
        if !informative {
            continue;
        }
        for start in 0..ctx.len() {
            let suffix = &ctx[start..];
            if kept.contains_key(suffix) {
                break;
            }
            let st = counts.get(suffix).expect("suffix of a counted context is counted");
            kept.insert(suffix.to_vec(), conditional(st));
        }
    }

    let mut entries: Vec<NodeEntry<F>> = kept.into_iter().collect();
    entries.push((Vec::new(), root));
    let meta = TrainingMeta {
        sequences: counts.sequences(),
        tokens: total,
    };
    Ok(Pst::assemble(params, vocab_size, meta, entries).expect("kept set is suffix-closed"))
}

/// Node of the longest suffix of `history` present in the tree.
pub fn lookup_context<'a, F: Real>(pst: &'a Pst<F>, history: &[u32]) -> &'a PstNode<F> {
    let mut idx = 0;
    for sym in history.iter().rev().take(pst.params.depth) {
        match pst.nodes[idx].children.get(sym) {
            Some(&child) => idx = child,
            None => break,
        }
    }
    &pst.nodes[idx]
}
