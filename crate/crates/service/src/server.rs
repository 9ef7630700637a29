use std::net::SocketAddr;

use axum::body::Bytes;
use axum::extract::DefaultBodyLimit;
use axum::http::{header, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::api::{handle, ApiError, ApiFailure, Limits, Reply, Route};

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
/// Report requests carry whole simulation traces.
const BODY_LIMIT: usize = 64 << 20;

impl IntoResponse for Reply {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, [(header::CONTENT_TYPE, self.content_type)], self.body).into_response()
    }
}

/// Computations run on the blocking pool so they never stall the executor
/// threads serving cheap requests such as health checks.
async fn run(route: Route, body: Bytes, limits: Limits) -> Reply {
    tokio::task::spawn_blocking(move || handle(route, &body, &limits))
        .await
        .unwrap_or_else(|e| {
            Reply::failure(ApiFailure {
                status: 500,
                error: ApiError { code: "internal".into(), message: format!("handler failed: {e}"), detail: None },
            })
        })
}

fn cors() -> CorsLayer {
    let origin = match std::env::var("DELAYLAB_CORS_ORIGIN") {
        Ok(o) if !o.is_empty() && o != "*" => match o.parse() {
            Ok(v) => AllowOrigin::exact(v),
            Err(_) => AllowOrigin::any(),
        },
        _ => AllowOrigin::any(),
    };
    CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE])
}

pub fn router(limits: Limits) -> Router {
    let mut app = Router::new();
    for route in Route::ALL {
        app = if route.is_get() {
            app.route(route.path(), get(move || async move { handle(route, &[], &limits) }))
        } else {
            app.route(route.path(), post(move |body: Bytes| run(route, body, limits)))
        };
    }
    app.fallback(|uri: Uri| async move { Reply::not_found(uri.path()) })
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .layer(cors())
}

/// Explicit address, else `DELAYLAB_ADDR`, else [`DEFAULT_ADDR`].
pub fn resolve_addr(explicit: Option<&str>) -> Result<SocketAddr, String> {
    let text = match explicit {
        Some(a) => a.to_string(),
        None => std::env::var("DELAYLAB_ADDR").unwrap_or_else(|_| DEFAULT_ADDR.into()),
    };
    text.parse().map_err(|e| format!("invalid bind address {text:?}: {e}"))
}

pub async fn serve(addr: SocketAddr, limits: Limits) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(listener, limits).await
}

/// Serves on an already bound listener until Ctrl-C.
pub async fn serve_on(listener: tokio::net::TcpListener, limits: Limits) -> std::io::Result<()> {
    eprintln!(
        "delaylab service listening on http://{} (limits {})",
        listener.local_addr()?,
        if limits.enabled { "on" } else { "off" }
    );
    axum::serve(listener, router(limits))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
