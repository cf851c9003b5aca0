//! Session host for the three-tank diagnosis engine: a deterministic
//! per-session tick loop, an async host running many of them, and the
//! HTTP/WebSocket front end.

pub mod engine;
pub mod host;
pub mod http;

pub use engine::{replay, Ack, LoggedCommand, SessionCommand, SessionEngine, TelemetryFrame};
pub use host::{HostConfig, HostError, SessionHost, SessionRecord};
pub use http::{router, serve, DEFAULT_PORT};
