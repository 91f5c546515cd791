//! Balanced pairs of group maps, their truncations, almost projections built
//! from them, and the K-theory data those projections carry.

pub mod cover;
pub mod error;
pub mod example;
pub mod group;
pub mod kclass;
pub mod linalg;
pub mod maps;
pub mod projections;
pub mod sparse;
pub mod truncation;
pub mod verify;

pub use error::{Error, Result};
