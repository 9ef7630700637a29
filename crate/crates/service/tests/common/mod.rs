#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::OnceLock;

use delaylab_service::Limits;
use serde_json::Value;

/// Starts a server on an ephemeral port in a background runtime.
pub fn spawn_server(limits: Limits) -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, delaylab_service::router(limits)).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

/// One shared server with limits on.
pub fn server() -> SocketAddr {
    static ADDR: OnceLock<SocketAddr> = OnceLock::new();
    *ADDR.get_or_init(|| spawn_server(Limits::default()))
}

pub fn schema() -> &'static Value {
    static SCHEMA: OnceLock<Value> = OnceLock::new();
    SCHEMA.get_or_init(|| {
        let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/schemas/api.schema.json")).unwrap();
        serde_json::from_str(&text).unwrap()
    })
}

/// Validator for one named definition of the published schema.
pub fn validator(def: &str) -> jsonschema::Validator {
    let mut root = schema().clone();
    root["$ref"] = Value::String(format!("#/$defs/{def}"));
    jsonschema::validator_for(&root).unwrap()
}

pub fn assert_valid(def: &str, instance: &Value) {
    let v = validator(def);
    let errors: Vec<String> = v.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{def}: {errors:#?}");
}
