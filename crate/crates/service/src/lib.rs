//! Campaign service: durable judgment log, blinded task distribution and
//! report retrieval over HTTP.

pub mod api;
pub mod error;
pub mod store;

pub use api::router;
pub use error::ServiceError;
pub use store::{CampaignDefinition, Status, Store, SubmitOutcome};
