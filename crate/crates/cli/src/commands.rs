use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use cyberlang::eval::{evaluate, make_scored, write_hist_csv, write_roc_csv, EvalError, RankBy};
use cyberlang::flow::{parse_labeled_csv, parse_zeek_conn, sniff_format, FlowFormat, IngestError};
use cyberlang::lang::{read_sequences, sessionize, write_sequences, SeqFileError};
use cyberlang::pst::{
    build_tree, count_contexts_sharded, flag_anomalies, load_model, save_model_at, score_sequence,
    ModelError, PstError,
};
use cyberlang::synth::{generate_corpus, standard_sources, synth_vocabulary, to_sessions, GenConfig};
use cyberlang::words::{parse_wordlist, score_words, WordsError, BUNDLED_WORDS};
use cyberlang::{EvalReport, Label, Pst, PstParams, Score, Sequence, Vocabulary, ZeroPolicy};

use crate::args::{LangArgs, ParamArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Format(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> Result<File> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("{}: no such file", path.display())));
    }
    File::open(path).map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

/// A reader that stopped early (`| head`) is not an error.
fn closed_pipe(e: io::Error) -> Result<()> {
    if e.kind() == io::ErrorKind::BrokenPipe {
        Ok(())
    } else {
        Err(CliError::Data(e.to_string()))
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn checked_params(params: PstParams) -> Result<PstParams> {
    params
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(params)
}

fn seq_error(path: &Path, e: SeqFileError) -> CliError {
    match e {
        SeqFileError::Io(e) => io_err(path, e),
        other => CliError::Format(format!("{}: {other}", path.display())),
    }
}

fn load_sequences(path: &Path) -> Result<(Vec<Sequence>, Vocabulary)> {
    read_sequences(BufReader::new(open(path)?)).map_err(|e| seq_error(path, e))
}

fn label_counts(seqs: &[Sequence]) -> (usize, usize, usize) {
    let count = |l| seqs.iter().filter(|s| s.label == l).count();
    (count(Label::Normal), count(Label::Attack), count(Label::Unlabeled))
}

pub fn prepare(input: &Path, out: &Path, lang: &LangArgs) -> Result<()> {
    let mut head = Vec::new();
    open(input)?
        .take(4096)
        .read_to_end(&mut head)
        .map_err(|e| io_err(input, e))?;
    let format = sniff_format(&head).ok_or_else(|| {
        CliError::Format(format!(
            "{}: unknown format (expected a Zeek conn log or labeled CSV header)",
            input.display()
        ))
    })?;
    let file = open(input)?;
    let parsed = match format {
        FlowFormat::ZeekConn => parse_zeek_conn(BufReader::new(file)),
        FlowFormat::LabeledCsv => parse_labeled_csv(file),
    };
    let (flows, stats) = parsed.map_err(|e| match e {
        IngestError::Io(e) => io_err(input, e),
        other => CliError::Format(format!("{}: {other}", input.display())),
    })?;
    log::info!("{:?} input, {} rows", format, stats.rows_read);

    let mut vocab = Vocabulary::new();
    let seqs = sessionize(&flows, lang.scheme(), lang.session, &mut vocab);
    let mut w = create(out)?;
    write_sequences(&seqs, &vocab, &mut w).map_err(|e| seq_error(out, e))?;
    w.flush().map_err(|e| io_err(out, e))?;

    let (normal, attack, unlabeled) = label_counts(&seqs);
    println!("flows: {} parsed, {} rejected", stats.rows_parsed, stats.rows_rejected);
    println!("sequences: {}", seqs.len());
    println!("vocabulary: {}", vocab.len());
    println!("labels: normal {normal}, attack {attack}, unlabeled {unlabeled}");
    Ok(())
}

pub fn train(sequences: &Path, out: &Path, params: &ParamArgs, no_timestamp: bool) -> Result<()> {
    let params = checked_params(params.params())?;
    let (seqs, vocab) = load_sequences(sequences)?;
    params
        .validate_for(vocab.len())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let tokens: Vec<&[u32]> = seqs.iter().map(|s| &s.token_ids[..]).collect();
    let counts = count_contexts_sharded(&tokens, params.depth, rayon::current_num_threads());
    let pst: Pst = build_tree(&counts, params, vocab.len())
        .and_then(|t| t.with_vocab(vocab.tokens().to_vec()))
        .map_err(|e: PstError| CliError::Data(e.to_string()))?;

    let mut w = create(out)?;
    let stamp = (!no_timestamp).then(now);
    save_model_at(&pst, &mut w, stamp).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;

    println!("nodes: {}", pst.node_count());
    println!("max depth: {}", pst.max_depth());
    println!("trained on: {} sequences, {} tokens", pst.meta().sequences, pst.meta().tokens);
    Ok(())
}

fn load(path: &Path) -> Result<Pst> {
    load_model(BufReader::new(open(path)?)).map_err(|e| match e {
        ModelError::Io(e) => io_err(path, e),
        other => CliError::Format(format!("{}: {other}", path.display())),
    })
}

pub struct ScoreOpts<'a> {
    pub out: Option<&'a Path>,
    pub limit: Option<f64>,
    pub flagged: Option<&'a Path>,
    pub zero_policy: ZeroPolicy,
}

pub fn score(model: &Path, sequences: &Path, opts: ScoreOpts) -> Result<()> {
    if let Some(limit) = opts.limit {
        if !(limit > 0.0 && limit <= 1.0) {
            return Err(CliError::Usage(format!("--limit must lie in (0, 1], got {limit}")));
        }
    }
    let pst = load(model)?;
    let model_vocab = pst
        .vocab()
        .ok_or_else(|| CliError::Format(format!("{}: model carries no vocabulary", model.display())))?;
    let ids: HashMap<&str, u32> = model_vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i as u32))
        .collect();
    let (seqs, vocab) = load_sequences(sequences)?;
    // tokens unknown to the model get an id past its vocabulary (probability 0)
    let oov = pst.vocab_size() as u32;
    let remap: Vec<u32> = vocab
        .tokens()
        .iter()
        .map(|t| ids.get(t.as_str()).copied().unwrap_or(oov))
        .collect();
    let n_oov = remap.iter().filter(|&&id| id == oov).count();
    if n_oov > 0 {
        log::warn!("{n_oov} token types are not in the model vocabulary");
    }

    let scores: Vec<(usize, Score)> = seqs
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mapped: Vec<u32> = s.token_ids.iter().map(|&t| remap[t as usize]).collect();
            (i, score_sequence(&pst, &mapped))
        })
        .collect();

    let write_csv = |w: &mut dyn Write| -> io::Result<()> {
        writeln!(w, "id,likelihood,per_symbol_log_loss,zero_likelihood")?;
        for (id, s) in &scores {
            writeln!(w, "{id},{:e},{},{}", s.likelihood, s.per_symbol_log_loss, s.zero_likelihood)?;
        }
        w.flush()
    };
    match opts.out {
        Some(path) => write_csv(&mut create(path)?).map_err(|e| io_err(path, e))?,
        None => write_csv(&mut io::stdout().lock()).or_else(closed_pipe)?,
    }

    if let (Some(limit), Some(path)) = (opts.limit, opts.flagged) {
        let flags = flag_anomalies(&scores, limit).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut w = create(path)?;
        let zero_first = match opts.zero_policy {
            ZeroPolicy::ZeroMostAnomalous => &flags.zero[..],
            ZeroPolicy::ExcludeZero => &[],
        };
        let listed = zero_first.len() + flags.flagged.len();
        (|| -> io::Result<()> {
            for id in zero_first.iter().chain(&flags.flagged) {
                writeln!(w, "{id}")?;
            }
            w.flush()
        })()
        .map_err(|e| io_err(path, e))?;
        if opts.out.is_some() {
            println!("sequences: {}", scores.len());
            println!("flagged: {listed}");
            println!("zero likelihood: {}", flags.zero.len());
        }
    }
    Ok(())
}

#[derive(Debug, serde::Deserialize)]
struct ScoreRow {
    id: usize,
    likelihood: f64,
    per_symbol_log_loss: f64,
    zero_likelihood: bool,
}

fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let header = rdr
        .headers()
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["id", "likelihood", "per_symbol_log_loss", "zero_likelihood"] {
        return Err(CliError::Format(format!("{}: not a scores file", path.display())));
    }
    rdr.deserialize()
        .map(|row| row.map_err(|e| CliError::Format(format!("{}: {e}", path.display()))))
        .collect()
}

#[derive(Serialize)]
struct ReportFile<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    created_at: Option<u64>,
    rank: &'static str,
    zero_policy: &'static str,
    #[serde(flatten)]
    report: &'a EvalReport<f64>,
}

pub struct EvalOpts {
    pub rank: RankBy,
    pub zero_policy: ZeroPolicy,
    pub bins: usize,
    pub no_timestamp: bool,
}

pub fn eval(scores: &Path, sequences: &Path, out_dir: &Path, opts: EvalOpts) -> Result<()> {
    let rows = read_scores(scores)?;
    let (seqs, _) = load_sequences(sequences)?;
    let mut joined = Vec::with_capacity(rows.len());
    for r in &rows {
        let seq = seqs.get(r.id).ok_or_else(|| {
            CliError::Data(format!("score id {} has no sequence in {}", r.id, sequences.display()))
        })?;
        let length = seq.token_ids.len();
        let log2_likelihood = if r.zero_likelihood {
            f64::NEG_INFINITY
        } else {
            -r.per_symbol_log_loss * length as f64
        };
        let s = Score {
            likelihood: r.likelihood,
            log2_likelihood,
            per_symbol_log_loss: r.per_symbol_log_loss,
            zero_likelihood: r.zero_likelihood,
            length,
        };
        joined.push((r.id.to_string(), s, seq.label));
    }
    let set = make_scored(&joined, opts.zero_policy, opts.rank);
    let report = evaluate(&set, &[10, 50, 100, 500, 1000], opts.bins)
        .map_err(|e: EvalError| CliError::Data(e.to_string()))?;

    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let file = ReportFile {
        created_at: (!opts.no_timestamp).then(now),
        rank: match opts.rank {
            RankBy::LogLoss => "logloss",
            RankBy::Likelihood => "likelihood",
        },
        zero_policy: match opts.zero_policy {
            ZeroPolicy::ExcludeZero => "exclude",
            ZeroPolicy::ZeroMostAnomalous => "most-anomalous",
        },
        report: &report,
    };
    let path = out_dir.join("report.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &file).map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| io_err(&path, e))?;
    let path = out_dir.join("roc.csv");
    write_roc_csv(&report.roc, create(&path)?).map_err(|e| io_err(&path, e))?;
    let path = out_dir.join("hist.csv");
    write_hist_csv(&report.histogram, create(&path)?).map_err(|e| io_err(&path, e))?;

    println!("auc: {}", report.auc);
    println!("attack: {}, normal: {}", report.n_attack, report.n_normal);
    println!("zero likelihood: {}", report.n_zero_likelihood);
    Ok(())
}

pub struct SynthOpts {
    pub order: usize,
    pub alphabet: usize,
    pub config: GenConfig,
}

pub fn synth(out: &Path, opts: SynthOpts) -> Result<()> {
    let (background, anomaly) = standard_sources(opts.order, opts.alphabet, opts.config.seed);
    let corpus = generate_corpus(&background, &anomaly, &opts.config)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let seqs = to_sessions(&corpus);
    let mut w = create(out)?;
    write_sequences(&seqs, &synth_vocabulary(opts.alphabet), &mut w).map_err(|e| seq_error(out, e))?;
    w.flush().map_err(|e| io_err(out, e))?;
    let (normal, attack, _) = label_counts(&seqs);
    println!("sequences: {}", seqs.len());
    println!("vocabulary: {}", opts.alphabet);
    println!("labels: normal {normal}, attack {attack}");
    Ok(())
}

pub fn words(wordlist: Option<&Path>, params: &ParamArgs) -> Result<()> {
    let params = checked_params(params.params())?;
    let text = match wordlist {
        Some(path) => {
            let mut s = String::new();
            BufReader::new(open(path)?)
                .read_to_string(&mut s)
                .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
            s
        }
        None => BUNDLED_WORDS.to_string(),
    };
    let words = parse_wordlist(&text).map_err(|e| match e {
        WordsError::Empty => CliError::Data(e.to_string()),
        other => CliError::Format(other.to_string()),
    })?;
    let scored = score_words(&words, params).map_err(|e| match e {
        WordsError::Pst(e) => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    })?;
    let mut out = io::stdout().lock();
    (|| -> io::Result<()> {
        writeln!(out, "word\tper_symbol_log_loss\tlikelihood")?;
        for w in &scored {
            writeln!(out, "{}\t{}\t{:e}", w.word, w.score.per_symbol_log_loss, w.score.likelihood)?;
        }
        out.flush()
    })()
    .or_else(closed_pipe)
}
