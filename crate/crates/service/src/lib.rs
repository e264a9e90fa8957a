//! Conductor service: runs adaptive GLR trials stage by stage over HTTP.
//!
//! Each trial is a session document holding the design, the thresholds,
//! the current state and an append-only audit log of every submitted stage
//! and its decision. Documents are written atomically, and [`replay`]
//! re-derives every recorded decision from the log.
//!
//! Routes:
//!
//! | method | path | |
//! |---|---|---|
//! | GET  | `/healthz` | liveness |
//! | POST | `/trials` | `{spec, thresholds?}`; calibrates when thresholds are omitted |
//! | GET  | `/trials?offset&limit` | paginated summaries |
//! | GET  | `/trials/{id}` | session, status, pending stage and design preview |
//! | POST | `/trials/{id}/stages` | `{increment}` or `{cumulative}`; returns the decision |

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub mod api;
pub mod session;
pub mod store;

pub use api::router;
pub use session::{replay, ReplayError, TrialSession};
pub use store::Store;

/// Environment variable naming the session directory.
pub const DATA_DIR_ENV: &str = "GLR_ADAPT_DATA_DIR";

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, data_dir: PathBuf) -> std::io::Result<()> {
    let store = Arc::new(Store::open(data_dir)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
