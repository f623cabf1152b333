use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cyberlang::eval::RankBy;
use cyberlang::{PstParams, SessionPolicy, TokenScheme, ZeroPolicy};

#[derive(Parser, Debug)]
#[command(name = "cyberlang", version, about = "Flow language modelling and anomaly scoring")]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Turn a Zeek conn log or labeled CSV into a sequences file.
    Prepare {
        /// Flow input; format is detected from the first line.
        input: PathBuf,
        /// Sequences file to write.
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        lang: LangArgs,
    },
    /// Build a suffix tree model from a sequences file.
    Train {
        sequences: PathBuf,
        /// Model file to write.
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Score every sequence against a model.
    Score {
        model: PathBuf,
        sequences: PathBuf,
        /// Scores CSV to write (default: stdout).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Flag sequences with likelihood below this limit.
        #[arg(long, requires = "flagged")]
        limit: Option<f64>,
        /// Where to write flagged ids, least likely first.
        #[arg(long)]
        flagged: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ZeroArg::Exclude)]
        zero_policy: ZeroArg,
    },
    /// ROC/AUC report for a scores file against the labels of a sequences file.
    Eval {
        scores: PathBuf,
        sequences: PathBuf,
        /// Directory for report.json, roc.csv and hist.csv.
        #[arg(short, long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = RankArg::Logloss)]
        rank: RankArg,
        #[arg(long, value_enum, default_value_t = ZeroArg::Exclude)]
        zero_policy: ZeroArg,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
        bins: u32,
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Generate a labeled corpus from two random Markov sources.
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=1000))]
        alphabet: u32,
        #[arg(long, default_value_t = 2000)]
        sequences: usize,
        #[arg(long, default_value_t = 30)]
        min_len: usize,
        #[arg(long, default_value_t = 70)]
        max_len: usize,
        #[arg(long, default_value_t = 0.05)]
        anomaly_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train on a word list (one token per character) and rank every word.
    Words {
        /// Lowercase words, one per line (default: the bundled list).
        wordlist: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
    },
}

#[derive(Args, Debug)]
pub struct LangArgs {
    #[arg(long, value_enum, default_value_t = SchemeArg::ProtoBytes)]
    pub scheme: SchemeArg,
    /// Bytes-per-packet bucket width for proto-density.
    #[arg(long, default_value_t = TokenScheme::DEFAULT_BUCKET_WIDTH,
          value_parser = clap::value_parser!(u64).range(1..))]
    pub bucket_width: u64,
    /// hour, day, week or gap:SECONDS
    #[arg(long, default_value = "hour", value_parser = parse_session)]
    pub session: SessionPolicy,
}

impl LangArgs {
    pub fn scheme(&self) -> TokenScheme {
        match self.scheme {
            SchemeArg::ProtoBytes => TokenScheme::ProtoBytesLog2,
            SchemeArg::ProtoDensity => TokenScheme::density(self.bucket_width).expect("width >= 1"),
        }
    }
}

fn parse_session(s: &str) -> Result<SessionPolicy, String> {
    s.parse()
}

#[derive(Args, Debug)]
pub struct ParamArgs {
    #[arg(long, default_value_t = PstParams::default().depth)]
    pub depth: usize,
    #[arg(long, default_value_t = PstParams::default().p_min)]
    pub p_min: f64,
    #[arg(long, default_value_t = PstParams::default().threshold)]
    pub threshold: f64,
    #[arg(long, default_value_t = PstParams::default().tau)]
    pub tau: f64,
    #[arg(long, default_value_t = PstParams::default().epsilon)]
    pub epsilon: f64,
}

impl ParamArgs {
    pub fn params(&self) -> PstParams {
        PstParams {
            depth: self.depth,
            p_min: self.p_min,
            threshold: self.threshold,
            tau: self.tau,
            epsilon: self.epsilon,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum SchemeArg {
    ProtoBytes,
    ProtoDensity,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum RankArg {
    Logloss,
    Likelihood,
}

impl From<RankArg> for RankBy {
    fn from(r: RankArg) -> Self {
        match r {
            RankArg::Logloss => RankBy::LogLoss,
            RankArg::Likelihood => RankBy::Likelihood,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ZeroArg {
    Exclude,
    MostAnomalous,
}

impl From<ZeroArg> for ZeroPolicy {
    fn from(z: ZeroArg) -> Self {
        match z {
            ZeroArg::Exclude => ZeroPolicy::ExcludeZero,
            ZeroArg::MostAnomalous => ZeroPolicy::ZeroMostAnomalous,
        }
    }
}
