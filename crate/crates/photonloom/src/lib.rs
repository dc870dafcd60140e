//! photonloom simulates heralded preparation of GHZ and W states of three
//! distant three-level atoms through linear-optical interference of their
//! emitted photons and post-selected detector clicks.
//!
//! The engine keeps hybrid atom–photon states as sparse superpositions over
//! a truncated Fock basis; subnormalized branches carry post-selection
//! probabilities as their squared norms. A dense brute-force oracle,
//! written against independent combinatorics, cross-checks every protocol.

pub mod config;
pub mod detection;
pub mod elements;
pub mod emission;
pub mod fock;
pub mod noise;
pub mod oracle;
pub mod protocols;
