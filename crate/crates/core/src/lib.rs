pub mod error;
pub mod prompts;
pub mod providers;
pub mod text;

pub use error::{Error, Result};
pub mod canonicalize;
pub mod corpus;
pub mod align;
pub mod compare;
pub mod verify;
pub mod qa;
pub mod fixtures;
pub mod workspace;
