//! Serve the session API without persistence on an ephemeral port until
//! Ctrl-C.

use abcd_service::{serve, AppState};

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    println!("listening on http://{}/v1/healthz", listener.local_addr()?);
    serve(listener, AppState::ephemeral(), async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
