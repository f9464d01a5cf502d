//! Curriculum abductive learning: Horn-clause knowledge bases split into a
//! curriculum of nested sub-bases, and a training loop that revises a
//! perception model's concept predictions by abduction against them.

pub mod abduction;
pub mod abspace;
pub mod config;
pub mod entail;
pub mod logic;
pub mod partition;
pub mod perception;
pub mod report;
pub mod tasks;
pub mod trainer;
