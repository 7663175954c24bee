//! Seeded agent-based simulation of a polymorphic, file-embedding ransomware
//! spreading through hosts and cloud shares, together with the recovery
//! strategies available to its victims, an evolutionary game over those
//! strategies and a trait/lifecycle comparison against a lytic phage.

pub mod codec;
pub mod config;
pub mod defense;
pub mod evaluation;
pub mod game;
pub mod lifecycle;
pub mod mc;
pub mod rng;
pub mod scenario;
pub mod topology;
pub mod variant;
pub mod world;
