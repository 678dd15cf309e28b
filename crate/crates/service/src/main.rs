use std::sync::Arc;

use tracing_subscriber::EnvFilter;
use xcal_service::{router, Store};

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .init();

    let data_dir = std::env::var("XC_DATA_DIR").unwrap_or_else(|_| "./data".to_string());
    let bind = std::env::var("XC_BIND_ADDR").unwrap_or_else(|_| "127.0.0.1:8080".to_string());

    let store = match Store::open(&data_dir) {
        Ok(store) => Arc::new(store),
        Err(e) => {
            tracing::error!(error = %e, data_dir, "cannot open data directory");
            std::process::exit(2);
        }
    };
    let listener = match tokio::net::TcpListener::bind(&bind).await {
        Ok(l) => l,
        Err(e) => {
            tracing::error!(error = %e, bind, "cannot bind");
            std::process::exit(2);
        }
    };
    tracing::info!(bind, data_dir, "listening");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
    };
    if let Err(e) = axum::serve(listener, router(store))
        .with_graceful_shutdown(shutdown)
        .await
    {
        tracing::error!(error = %e, "server error");
        std::process::exit(1);
    }
}
