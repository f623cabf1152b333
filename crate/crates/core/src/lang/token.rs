use std::fmt;
use std::num::NonZeroU64;
use std::str::FromStr;

use crate::flow::FlowRecord;

/// A binned feature value. `Zero` is the sentinel for "nothing to bin"
/// (no bytes for log2, no packets for density) and renders as `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bin {
    Value(u64),
    Zero,
}

impl fmt::Display for Bin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bin::Value(v) => write!(f, "{v}"),
            Bin::Zero => f.write_str("z"),
        }
    }
}

/// Floor of log2 via bit length; 0 maps to the sentinel.
pub fn log2_bin(v: u64) -> Bin {
    if v == 0 {
        Bin::Zero
    } else {
        Bin::Value(u64::from(63 - v.leading_zeros()))
    }
}

/// `floor((bytes / pkts) / width)`; no packets maps to the sentinel.
///
/// Evaluated as the single integer quotient `bytes / (pkts * width)`, which
/// equals the nested real-valued floor for all non-negative inputs.
pub fn density_bucket(bytes: u64, pkts: u64, width: NonZeroU64) -> Bin {
    if pkts == 0 {
        return Bin::Zero;
    }
    let denom = u128::from(pkts) * u128::from(width.get());
    // quotient <= bytes, so it fits back into u64
    Bin::Value((u128::from(bytes) / denom) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TokenScheme {
    /// `<proto>_b<floor log2 of total bytes>`
    #[default]
    ProtoBytesLog2,
    /// `<proto>_d<bytes-per-packet bucket>`
    ProtoDensityBucket { width: NonZeroU64 },
}

impl TokenScheme {
    pub const DEFAULT_BUCKET_WIDTH: u64 = 10;

    pub fn density(width: u64) -> Option<Self> {
        NonZeroU64::new(width).map(|width| TokenScheme::ProtoDensityBucket { width })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// True when `text` matches `^[a-z0-9]+_(b|d)([0-9]+|z)$`.
    pub fn is_well_formed(text: &str) -> bool {
        let Some((proto, rest)) = text.rsplit_once('_') else {
            return false;
        };
        let proto_ok = !proto.is_empty()
            && proto
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit());
        let mut chars = rest.chars();
        let kind_ok = matches!(chars.next(), Some('b' | 'd'));
        let bin = chars.as_str();
        let bin_ok = bin == "z" || (!bin.is_empty() && bin.bytes().all(|b| b.is_ascii_digit()));
        proto_ok && kind_ok && bin_ok
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Token {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if Token::is_well_formed(s) {
            Ok(Token(s.to_string()))
        } else {
            Err(format!("malformed token {s:?}"))
        }
    }
}

pub fn tokenize(flow: &FlowRecord, scheme: TokenScheme) -> Token {
    let proto = flow.protocol.token_name();
    let text = match scheme {
        TokenScheme::ProtoBytesLog2 => format!("{proto}_b{}", log2_bin(flow.total_bytes())),
        TokenScheme::ProtoDensityBucket { width } => format!(
            "{proto}_d{}",
            density_bucket(flow.total_bytes(), flow.total_pkts(), width)
        ),
    };
    Token(text)
}
