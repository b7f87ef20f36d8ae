//! `batchfact` command-line front end. Every workflow prints one JSON
//! object per line; the `runtime` object holds everything that may differ
//! between otherwise identical runs (thread count, wall times).

mod args;
mod commands;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

use args::{Bench, Cli, Command};
use commands::Outcome;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;

fn dispatch(cli: &Cli) -> batchfact::Result<Outcome> {
    match &cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Bench(Bench::Qr(a)) => commands::bench_qr(a),
        Command::Bench(Bench::Svd(a)) => commands::bench_svd(a),
        Command::Bench(Bench::BlockSvd(a)) => commands::bench_block_svd(a),
        Command::Bench(Bench::Rsvd(a)) => commands::bench_rsvd(a),
        Command::Compress(a) => commands::compress_cmd(a),
    }
}

fn emit(cli: &Cli, outcome: &Outcome, out: &mut dyn Write) -> io::Result<()> {
    match &cli.report {
        Some(path) => {
            let mut file = BufWriter::new(File::create(path)?);
            for r in &outcome.records {
                writeln!(file, "{r}")?;
            }
            file.flush()
        }
        None => {
            for r in &outcome.records {
                writeln!(out, "{r}")?;
            }
            out.flush()
        }
    }
}

/// Parses `args` (program name first), runs the workflow and returns the
/// process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                kind => {
                    let _ = write!(err, "{}", e.render());
                    if kind != ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        let _ = write!(err, "\n{}", Cli::command().render_help());
                    }
                    EXIT_INVALID
                }
            };
        }
    };

    let threads = match cli.threads {
        Some(0) => {
            let _ = writeln!(err, "error: --threads must be at least 1");
            return EXIT_INVALID;
        }
        Some(t) => t,
        None => rayon::current_num_threads(),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };

    let outcome = match pool.install(|| dispatch(&cli)) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    if let Err(e) = emit(&cli, &outcome, out) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_INVALID;
    }
    if cli.strict && !outcome.converged {
        let _ = writeln!(err, "error: factorization did not converge");
        return EXIT_NOT_CONVERGED;
    }
    EXIT_OK
}
