use std::cmp::Ordering;
use std::str::FromStr;

use super::token::{tokenize, TokenScheme};
use super::vocab::Vocabulary;
use crate::flow::{FlowRecord, Label};

const HOUR: f64 = 3600.0;
const DAY: f64 = 86_400.0;
const WEEK: f64 = 604_800.0;

/// How the flows of one host pair are cut into sequences.
///
/// Fixed windows are aligned to multiples of their length since the Unix
/// epoch (UTC), so week windows start on Thursdays.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SessionPolicy {
    #[default]
    HourWindow,
    DayWindow,
    WeekWindow,
    /// New sequence whenever consecutive flows are more than `gap` seconds apart.
    InactivityGap { gap: f64 },
}

impl SessionPolicy {
    pub const DEFAULT_GAP: f64 = 1800.0;

    fn window_len(self) -> Option<f64> {
        match self {
            SessionPolicy::HourWindow => Some(HOUR),
            SessionPolicy::DayWindow => Some(DAY),
            SessionPolicy::WeekWindow => Some(WEEK),
            SessionPolicy::InactivityGap { .. } => None,
        }
    }
}

impl FromStr for SessionPolicy {
    type Err = String;

    /// Accepts `hour`, `day`, `week`, `gap` or `gap:SECONDS`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hour" => Ok(SessionPolicy::HourWindow),
            "day" => Ok(SessionPolicy::DayWindow),
            "week" => Ok(SessionPolicy::WeekWindow),
            "gap" => Ok(SessionPolicy::InactivityGap {
                gap: Self::DEFAULT_GAP,
            }),
            _ => {
                let secs = s
                    .strip_prefix("gap:")
                    .ok_or_else(|| format!("unknown session policy {s:?}"))?;
                match secs.parse::<f64>() {
                    Ok(gap) if gap.is_finite() && gap > 0.0 => {
                        Ok(SessionPolicy::InactivityGap { gap })
                    }
                    _ => Err(format!("gap must be a positive number of seconds, got {secs:?}")),
                }
            }
        }
    }
}

/// Tokens of one host pair within one session window.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub ip_low: String,
    pub ip_high: String,
    pub window_start: f64,
    pub token_ids: Vec<u32>,
    pub label: Label,
    pub n_flows: usize,
}

/// Any attack makes the sequence an attack; otherwise any normal makes it
/// normal; otherwise unlabeled.
pub fn aggregate_label<I: IntoIterator<Item = Label>>(labels: I) -> Label {
    let mut out = Label::Unlabeled;
    for l in labels {
        match l {
            Label::Attack => return Label::Attack,
            Label::Normal => out = Label::Normal,
            Label::Unlabeled => {}
        }
    }
    out
}

fn pair(flow: &FlowRecord) -> (&str, &str) {
    if flow.src_ip <= flow.dst_ip {
        (&flow.src_ip, &flow.dst_ip)
    } else {
        (&flow.dst_ip, &flow.src_ip)
    }
}

/// Total order used to lay flows out: host pair, then time, then ports, then
/// every remaining field so that equal keys imply identical records.
fn flow_order(a: &FlowRecord, b: &FlowRecord) -> Ordering {
    pair(a)
        .cmp(&pair(b))
        .then(a.ts.total_cmp(&b.ts))
        .then(a.src_port.cmp(&b.src_port))
        .then(a.dst_port.cmp(&b.dst_port))
        .then_with(|| a.src_ip.cmp(&b.src_ip))
        .then_with(|| a.protocol.cmp(&b.protocol))
        .then(a.orig_bytes.cmp(&b.orig_bytes))
        .then(a.resp_bytes.cmp(&b.resp_bytes))
        .then(a.orig_pkts.cmp(&b.orig_pkts))
        .then(a.resp_pkts.cmp(&b.resp_pkts))
        .then(a.duration.total_cmp(&b.duration))
        .then(a.label.cmp(&b.label))
}

/// Groups flows by unordered IP pair and cuts each group into sequences.
///
/// Output is ordered by `(ip_low, ip_high)` then window time; new tokens are
/// registered in `vocab` in that same order.
pub fn sessionize(
    flows: &[FlowRecord],
    scheme: TokenScheme,
    policy: SessionPolicy,
    vocab: &mut Vocabulary,
) -> Vec<Sequence> {
    let mut order: Vec<&FlowRecord> = flows.iter().collect();
    order.sort_by(|a, b| flow_order(a, b));

    let mut out: Vec<Sequence> = Vec::new();
    let mut labels: Vec<Label> = Vec::new();
    let mut last_ts = f64::NEG_INFINITY;

    for flow in order {
        let (lo, hi) = pair(flow);
        let start = match policy.window_len() {
            Some(len) => (flow.ts / len).floor() * len,
            None => flow.ts,
        };
        let continues = out.last().is_some_and(|cur| {
            cur.ip_low == lo
                && cur.ip_high == hi
                && match policy {
                    SessionPolicy::InactivityGap { gap } => flow.ts - last_ts <= gap,
                    _ => cur.window_start == start,
                }
        });
        if !continues {
            if let Some(cur) = out.last_mut() {
                cur.label = aggregate_label(labels.drain(..));
            }
            out.push(Sequence {
                ip_low: lo.to_string(),
                ip_high: hi.to_string(),
                window_start: start,
                token_ids: Vec::new(),
                label: Label::Unlabeled,
                n_flows: 0,
            });
        }
        let cur = out.last_mut().expect("a sequence was just opened");
        cur.token_ids.push(vocab.intern(tokenize(flow, scheme).as_str()));
        cur.n_flows += 1;
        labels.push(flow.label);
        last_ts = flow.ts;
    }
    if let Some(cur) = out.last_mut() {
        cur.label = aggregate_label(labels.drain(..));
    }
    out
}
