//! Abductive extraction of temporal relations from tokenized Dutch
//! sentence descriptions.

pub mod completion;
pub mod formula;
pub mod kb;
pub mod parse;
pub mod render;
pub mod solver;
pub mod store;
pub mod temporal;
pub mod term;
pub mod verify;
