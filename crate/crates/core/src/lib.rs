//! Manual-guided auxiliary rewards for sparse-reward arcade games.
//!
//! A game manual is read with extractive question answering, a Yes/No
//! reasoning step turns each object's context into a signed reward, and an
//! interaction detector pays that reward whenever the agent touches the
//! object during training.

pub mod agents;
pub mod env;
pub mod harness;
pub mod interact;
pub mod manual;
pub mod provider;
pub mod reason;
pub mod text;
pub mod trace;
