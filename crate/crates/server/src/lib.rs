//! HTTP front end for the consultation engine.

mod api;
pub mod config;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

pub use api::{router, ApiError};
pub use config::{BackendSettings, ConfigError, ServiceConfig};
use erkang_core::engine::Engine;

/// Serves `engine` on an already bound listener until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    engine: Arc<Engine>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds `addr` and serves in a background task, returning the bound address.
/// Used by tests and the evaluation harness.
pub async fn spawn(engine: Arc<Engine>, addr: SocketAddr) -> std::io::Result<SocketAddr> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tokio::spawn(async move {
        if let Err(e) = serve(listener, engine, std::future::pending()).await {
            log::error!("server stopped: {e}");
        }
    });
    Ok(local)
}
