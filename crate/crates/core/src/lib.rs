//! Pricing games between a monopoly ISP, content providers, and
//! price-sensitive internauts under regulated side payments.
//!
//! The library computes the pure-strategy Nash equilibria of the market
//! under two regulation timings (side payment fixed before or after the
//! price competition), handles one or many content providers with
//! positively correlated linear demand, solves the exclusive-contract
//! (collusion) variant with its externality metrics, and analyzes the
//! discrete best-response dynamics and a projected pseudo-gradient flow.
//! A brute-force oracle module verifies every solver against the raw
//! definition of equilibrium on price grids.
//!
//! All money and demand quantities are double-precision reals; closed
//! forms are exact at desk scale. Every type is an immutable value and
//! every operation a pure function, safe for unrestricted concurrent use.

pub mod collusion;
pub mod demand;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod oracle;
pub mod regulator;

pub use error::{Error, Result};
pub use model::{GameParameters, PriceProfile};
