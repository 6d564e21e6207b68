use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use tac_service::{serve, Store};

use crate::{environment, CliError};

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Session logs are kept here, one JSONL file per session.
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
}

pub fn run(args: ServeArgs) -> Result<(), CliError> {
    let store = Store::open(&args.data_dir).map_err(|e| environment(args.data_dir.display(), e))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| environment("runtime", e))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(args.bind)
            .await
            .map_err(|e| environment(args.bind, e))?;
        let addr = listener.local_addr().map_err(|e| environment(args.bind, e))?;
        eprintln!("listening on http://{addr} ({} sessions loaded)", store.len());
        serve(listener, Arc::new(store), shutdown_signal())
            .await
            .map_err(|e| environment("server", e))
    })
}
