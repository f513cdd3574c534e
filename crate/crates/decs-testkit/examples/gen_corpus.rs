//! Writes a runnable sample corpus for the `decs` CLI into a directory:
//! a feed capture plus the pool, price, registry, wallet, and chain files
//! it references.
//!
//! Usage: cargo run -p decs-testkit --example gen_corpus -- OUT_DIR [classic|intent] [COUNT]

use std::env;
use std::path::PathBuf;
use std::process::ExitCode;

use decs_testkit::fixtures;

fn main() -> ExitCode {
    let mut args = env::args().skip(1);
    let Some(dir) = args.next() else {
        eprintln!("usage: gen_corpus OUT_DIR [classic|intent] [COUNT]");
        return ExitCode::FAILURE;
    };
    let flavor = args.next().unwrap_or_else(|| "classic".into());
    let count: usize = match args.next() {
        Some(raw) => match raw.parse() {
            Ok(n) => n,
            Err(_) => {
                eprintln!("COUNT must be an integer, got {raw:?}");
                return ExitCode::FAILURE;
            }
        },
        None => 200,
    };
    let dir = PathBuf::from(dir);
    let written = match flavor.as_str() {
        "classic" => fixtures::write_classic_corpus(&dir, 1, count),
        "intent" => fixtures::write_intent_corpus(&dir, 1, count),
        other => {
            eprintln!("flavor must be classic or intent, got {other:?}");
            return ExitCode::FAILURE;
        }
    };
    match written {
        Ok(corpus) => {
            println!("wrote {count} {flavor} lines to {}", corpus.feed.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cannot write corpus: {e}");
            ExitCode::FAILURE
        }
    }
}
