//! Repeated, distributed multi-channel spectrum auctions in a two-tier HetNet.
//!
//! Each base station clears its own multi-unit VCG auction every round. User
//! equipments carry a finite budget and pick a base station plus a per-channel
//! bid using one of several strategies (myopic truthful, greedy Bayesian, an
//! LLM-driven agent, or the deterministic foresight stand-in for the latter).
//!
//! Module map:
//! - [`netmodel`]: topology, SINR, Shannon rate, sub-channel demand.
//! - [`valuation`]: urgency-scaled valuation that rises with consecutive losses.
//! - [`auction`]: per-BS multi-unit VCG with reservation prices.
//! - [`strategy`]: empirical clearing-price model, win probability, bidding policies.
//! - [`llm_agent`]: prompt rendering, reply parsing, chat-completion transport, foresight policy.
//! - [`engine`]: round orchestration, settlement, metrics.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auction;
pub mod engine;
pub mod llm_agent;
pub mod money;
pub mod netmodel;
pub mod strategy;
pub mod valuation;

pub use auction::{run_vcg, AuctionError, AuctionOutcome, AuctionRequest, Award};
pub use engine::{
    run_simulation, MetricsReport, RoundLog, SimulationConfig, SimulationError, SimulationOutput,
    StrategyKind,
};
pub use money::Money;
pub use netmodel::{BaseStation, ChannelModel, InterferenceMode, Position, Tier, UserEquipment};
pub use strategy::{BidDecision, EmpiricalPriceModel, MarketObservation};
pub use valuation::{UrgencyParams, UrgencyState};
