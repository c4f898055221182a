use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use erkang_server::ServiceConfig;

#[derive(Parser)]
#[command(
    name = "erkang-server",
    version,
    about = "Medical consultation service over HTTP"
)]
struct Args {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the bind address from the config file.
    #[arg(long)]
    bind: Option<std::net::SocketAddr>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let mut config = match ServiceConfig::load(args.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Some(bind) = args.bind {
        config.bind = bind;
    }
    let engine = match config.build_engine() {
        Ok(e) => Arc::new(e),
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(2);
        }
    };
    log::info!(
        "{} sessions recovered, {} knowledge chunks, backend {}",
        engine.session_ids().len(),
        engine.kb_chunks(),
        engine.backend().profile().as_str()
    );

    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            log::error!("starting runtime: {e}");
            return ExitCode::FAILURE;
        }
    };
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(config.bind).await?;
        log::info!("listening on {}", listener.local_addr()?);
        erkang_server::serve(listener, engine, async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        })
        .await
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}
