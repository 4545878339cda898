//! Liquidity-provider wealth in geometric mean market makers under
//! arbitrage.
//!
//! The crate covers exact pool mechanics with proportional fees
//! ([`amm`]), the arbitrage-driven mispricing and its regulators
//! ([`arbitrage`]), reference-market path generation ([`market`]), the
//! Sturm–Liouville machinery of the reflected mispricing diffusion
//! ([`spectral`]), closed-form and quadrature long-run growth rates
//! ([`growth`]) and the Monte Carlo validation harness ([`validation`]).

pub mod amm;
pub mod arbitrage;
pub mod error;
pub mod growth;
pub mod market;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod validation;

pub use amm::{Asset, Leg, PoolState, TradeResult, WealthDecomposition};
pub use arbitrage::{ArbPath, ArrivalSpec, MispricingBand};
pub use error::{Error, Result};
pub use market::{MarketModel, PathBundle, StochasticSpec, Variant, VolTable};
