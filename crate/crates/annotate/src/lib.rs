//! Two-round expert annotation service.
//!
//! Every session is an append-only JSON-lines journal; the in-memory state
//! is rebuilt by replaying it, so a restart (or a crash mid-write) loses at
//! most the torn final line.

pub mod api;
pub mod error;
pub mod journal;
pub mod session;
pub mod store;

pub use api::{router, serve, CreateRequest, LabelRequest, ResolutionRequest};
pub use error::{ApiError, ErrorBody};
pub use session::{Event, Next, Resolution, Round, SessionPair, SessionState, Verdict, WarmupItem};
pub use store::Store;
