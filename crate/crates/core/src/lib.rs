//! Capacity engineering for the mobile telephone model: schedule synthesis and
//! certification, a round-based protocol simulator, and random geometric networks.

pub mod capacity;
pub mod dot;
pub mod flow;
pub mod geometric;
pub mod graphs;
pub mod mtmsim;
pub mod protocols;
pub mod seed;
