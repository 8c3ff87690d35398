//! Command line and wire-protocol surface for voicegov communities.

pub mod community;
pub mod error;
pub mod gateway;
pub mod grammar;
pub mod simulate;

pub use community::{Community, CommunitySetup};
pub use error::CliError;
