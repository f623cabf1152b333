mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use cyberlang::synth::GenConfig;

use args::{Cli, Command};
use commands::{CliError, EvalOpts, ScoreOpts, SynthOpts};

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Prepare { input, out, lang } => commands::prepare(&input, &out, &lang),
        Command::Train { sequences, out, params, no_timestamp } => {
            commands::train(&sequences, &out, &params, no_timestamp)
        }
        Command::Score { model, sequences, out, limit, flagged, zero_policy } => commands::score(
            &model,
            &sequences,
            ScoreOpts {
                out: out.as_deref(),
                limit,
                flagged: flagged.as_deref(),
                zero_policy: zero_policy.into(),
            },
        ),
        Command::Eval { scores, sequences, out_dir, rank, zero_policy, bins, no_timestamp } => {
            commands::eval(
                &scores,
                &sequences,
                &out_dir,
                EvalOpts {
                    rank: rank.into(),
                    zero_policy: zero_policy.into(),
                    bins: bins as usize,
                    no_timestamp,
                },
            )
        }
        Command::Synth { out, order, alphabet, sequences, min_len, max_len, anomaly_fraction, seed } => {
            commands::synth(
                &out,
                SynthOpts {
                    order,
                    alphabet: alphabet as usize,
                    config: GenConfig {
                        n_sequences: sequences,
                        length_min: min_len,
                        length_max: max_len,
                        anomaly_fraction,
                        seed,
                    },
                },
            )
        }
        Command::Words { wordlist, params } => commands::words(wordlist.as_deref(), &params),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
