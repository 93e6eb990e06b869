//! Session service for the HTN tutor: event-sourced tutoring sessions,
//! durable student models, and the HTTP API.

pub mod config;
pub mod events;
pub mod http;
pub mod session;
pub mod store;
pub mod tutor;

pub use config::ServiceConfig;
pub use store::{EventStore, FileStore, MemoryStore};
pub use tutor::{CreateRequest, Tutor, TutorError};
