use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::PstError;

/// Counts for one context string.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextStats {
    /// N(s): occurrences of the context as a contiguous substring.
    pub occurrences: u64,
    /// N(s, σ): occurrences immediately followed by σ, keyed by σ.
    pub follow: BTreeMap<u32, u64>,
}

impl ContextStats {
    pub fn follow_total(&self) -> u64 {
        self.follow.values().sum()
    }
}

/// Substring and successor counts for every context of length `1..=max_len`.
///
/// Contexts never span two sequences. The empty context is implicit: its
/// occurrence count is [`total_positions`](Self::total_positions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextCounts {
    max_len: usize,
    total_positions: u64,
    sequences: u64,
    entries: HashMap<Vec<u32>, ContextStats>,
}

impl ContextCounts {
    pub fn empty(max_len: usize) -> Self {
        ContextCounts {
            max_len,
            total_positions: 0,
            sequences: 0,
            entries: HashMap::new(),
        }
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn total_positions(&self) -> u64 {
        self.total_positions
    }

    pub fn sequences(&self) -> u64 {
        self.sequences
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, context: &[u32]) -> Option<&ContextStats> {
        self.entries.get(context)
    }

    /// N(s); the empty context yields the total position count.
    pub fn occurrences(&self, context: &[u32]) -> u64 {
        if context.is_empty() {
            return self.total_positions;
        }
        self.entries.get(context).map_or(0, |e| e.occurrences)
    }

    /// N(s, σ) for a non-empty context.
    pub fn follow(&self, context: &[u32], symbol: u32) -> u64 {
        self.entries
            .get(context)
            .and_then(|e| e.follow.get(&symbol).copied())
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u32], &ContextStats)> {
        self.entries.iter().map(|(k, v)| (k.as_slice(), v))
    }

    fn add_sequence(&mut self, seq: &[u32]) {
        self.sequences += 1;
        self.total_positions += seq.len() as u64;
        for start in 0..seq.len() {
            let longest = self.max_len.min(seq.len() - start);
            for len in 1..=longest {
                let ctx = &seq[start..start + len];
                let next = seq.get(start + len).copied();
                let stats = match self.entries.get_mut(ctx) {
                    Some(s) => s,
                    None => self.entries.entry(ctx.to_vec()).or_default(),
                };
                stats.occurrences += 1;
                if let Some(sym) = next {
                    *stats.follow.entry(sym).or_insert(0) += 1;
                }
            }
        }
    }

    fn absorb(&mut self, other: ContextCounts) {
        self.total_positions += other.total_positions;
        self.sequences += other.sequences;
        for (ctx, stats) in other.entries {
            let mine = self.entries.entry(ctx).or_default();
            mine.occurrences += stats.occurrences;
            for (sym, n) in stats.follow {
                *mine.follow.entry(sym).or_insert(0) += n;
            }
        }
    }
}

pub fn count_contexts<I, S>(sequences: I, max_len: usize) -> ContextCounts
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u32]>,
{
    let mut counts = ContextCounts::empty(max_len);
    for seq in sequences {
        counts.add_sequence(seq.as_ref());
    }
    counts
}

/// Entrywise sum of two count tables built with the same `max_len`.
pub fn merge_counts(a: ContextCounts, b: ContextCounts) -> Result<ContextCounts, PstError> {
    if a.max_len != b.max_len {
        return Err(PstError::MaxLenMismatch(a.max_len, b.max_len));
    }
    let (mut big, small) = if a.entries.len() >= b.entries.len() {
        (a, b)
    } else {
        (b, a)
    };
    big.absorb(small);
    Ok(big)
}

/// Counts `shards` contiguous partitions in parallel and merges them.
///
/// The result equals [`count_contexts`] over the whole slice for any shard count.
pub fn count_contexts_sharded<S>(sequences: &[S], max_len: usize, shards: usize) -> ContextCounts
where
    S: AsRef<[u32]> + Sync,
{
    let shards = shards.max(1);
    let chunk = sequences.len().div_ceil(shards).max(1);
    sequences
        .par_chunks(chunk)
        .map(|part| count_contexts(part.iter().map(AsRef::as_ref), max_len))
        .reduce(
            || ContextCounts::empty(max_len),
            |a, b| merge_counts(a, b).expect("shards share max_len"),
        )
}
