use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use erkang_eval::{aggregate, evaluate, load_suite, Dimension, HttpJudge, HttpRunner, Scorer};

#[derive(Parser)]
#[command(
    name = "erkang-eval",
    version,
    about = "Replay a consultation suite against a running service and score it"
)]
struct Args {
    /// JSONL suite file.
    #[arg(long)]
    suite: PathBuf,
    /// Service root URL, e.g. http://127.0.0.1:8080
    #[arg(long)]
    endpoint: String,
    /// Chat-completion URL of a judge model for the subjective dimensions.
    #[arg(long)]
    judge_backend: Option<String>,
    /// Write the per-case report as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cases run concurrently.
    #[arg(long, default_value_t = 4)]
    parallel: usize,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let cases = match load_suite(&args.suite) {
        Ok(c) if c.is_empty() => {
            eprintln!("suite {} has no cases", args.suite.display());
            return ExitCode::from(2);
        }
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let timeout = Duration::from_secs(args.timeout_secs);
    let runner = HttpRunner::new(&args.endpoint, timeout);
    let mut scorer = Scorer::default();
    if let Some(url) = &args.judge_backend {
        scorer = scorer.with_judge(Box::new(HttpJudge::new(url, timeout)));
    }
    let reports = match evaluate(&cases, &runner, &scorer, args.parallel) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("thread pool: {e}");
            return ExitCode::FAILURE;
        }
    };
    let report = aggregate(reports).expect("suite is non-empty");
    print!("{}", report.to_table());
    if let Some(path) = &args.out {
        let written = report.to_csv().map_err(|e| e.to_string()).and_then(|csv| {
            std::fs::write(path, csv).map_err(|e| format!("{}: {e}", path.display()))
        });
        if let Err(e) = written {
            eprintln!("writing report: {e}");
            return ExitCode::FAILURE;
        }
    }
    if report.errored == 0 && report.mean(Dimension::Safety) == 1.0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
