//! Per-BS multi-unit VCG auction over identical sub-channels.
//!
//! Each request is a flat per-unit bid for up to `quantity` channels. Requests
//! below the reservation price are dropped; the rest are expanded into unit
//! claims and the top `capacity` claims win (ties go to the lower bidder id).
//! Partial fills are allowed. A winner pays the externality it imposes on the
//! others, spread evenly over its channels and floored at the reservation price.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::BaseStation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuctionRequest {
    pub bidder: usize,
    pub quantity: u32,
    pub unit_bid: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Award {
    pub bidder: usize,
    pub channels: u32,
    /// Per-channel payment, never below the reservation price.
    pub unit_payment: f64,
    pub total_payment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub reserve: f64,
    /// Winners in ascending bidder order.
    pub awards: Vec<Award>,
    /// Highest rejected reserve-meeting unit claim, or the reserve when supply was slack.
    pub clearing_price: f64,
}

impl AuctionOutcome {
    pub fn award(&self, bidder: usize) -> Option<&Award> {
        self.awards.iter().find(|a| a.bidder == bidder)
    }

    pub fn channels_won(&self, bidder: usize) -> u32 {
        self.award(bidder).map_or(0, |a| a.channels)
    }

    pub fn channels_allocated(&self) -> u32 {
        self.awards.iter().map(|a| a.channels).sum()
    }

    pub fn revenue(&self) -> f64 {
        self.awards.iter().map(|a| a.total_payment).sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuctionError {
    #[error("bidder {0} submitted more than one request")]
    DuplicateBidder(usize),
    #[error("bidder {0} requested zero channels")]
    ZeroQuantity(usize),
    #[error("bidder {bidder} submitted invalid bid {bid}")]
    InvalidBid { bidder: usize, bid: f64 },
}

/// Per-channel operating cost of a BS, used as its reservation price.
pub fn reservation_price(bs: &BaseStation) -> f64 {
    bs.power_unit_price * bs.tx_power
}

fn validate(requests: &[AuctionRequest]) -> Result<(), AuctionError> {
    let mut seen = HashSet::with_capacity(requests.len());
    for r in requests {
        if !seen.insert(r.bidder) {
            return Err(AuctionError::DuplicateBidder(r.bidder));
        }
        if r.quantity == 0 {
            return Err(AuctionError::ZeroQuantity(r.bidder));
        }
        if !(r.unit_bid >= 0.0) || !r.unit_bid.is_finite() {
            return Err(AuctionError::InvalidBid {
                bidder: r.bidder,
                bid: r.unit_bid,
            });
        }
    }
    Ok(())
}

pub fn run_vcg(
    requests: &[AuctionRequest],
    capacity: u32,
    reserve: f64,
) -> Result<AuctionOutcome, AuctionError> {
    validate(requests)?;

    let mut eligible: Vec<&AuctionRequest> =
        requests.iter().filter(|r| r.unit_bid >= reserve).collect();
    eligible.sort_by(|a, b| {
        b.unit_bid
            .total_cmp(&a.unit_bid)
            .then(a.bidder.cmp(&b.bidder))
    });

    // Greedy fill in rank order is value-optimal for identical units.
    let mut remaining = capacity;
    let mut filled: Vec<(&AuctionRequest, u32)> = Vec::with_capacity(eligible.len());
    let mut clearing_price: Option<f64> = None;
    for req in &eligible {
        let take = req.quantity.min(remaining);
        remaining -= take;
        if take < req.quantity && clearing_price.is_none() {
            // Sorted descending, so the first unfilled claim is the highest rejected one.
            clearing_price = Some(req.unit_bid);
        }
        filled.push((req, take));
    }

    let mut awards = Vec::new();
    for (idx, &(req, won)) in filled.iter().enumerate() {
        if won == 0 {
            continue;
        }
        // Others' unit claims in rank order. With i present they hold the first
        // `capacity - won` of them; with i absent the next `won` claims also fill.
        let displaced = displaced_value(&filled, idx, capacity - won, won);
        let unit_payment = (displaced / won as f64).max(reserve);
        awards.push(Award {
            bidder: req.bidder,
            channels: won,
            unit_payment,
            total_payment: unit_payment * won as f64,
        });
    }
    awards.sort_by_key(|a| a.bidder);

    Ok(AuctionOutcome {
        reserve,
        awards,
        clearing_price: clearing_price.unwrap_or(reserve),
    })
}

/// Sum of the others' unit claims ranked `(skip, skip + take]` after excluding `exclude`.
fn displaced_value(ranked: &[(&AuctionRequest, u32)], exclude: usize, skip: u32, take: u32) -> f64 {
    let mut skip = skip;
    let mut take = take;
    let mut value = 0.0;
    for (idx, (req, _)) in ranked.iter().enumerate() {
        if idx == exclude {
            continue;
        }
        let mut units = req.quantity;
        let skipped = units.min(skip);
        skip -= skipped;
        units -= skipped;
        let counted = units.min(take);
        take -= counted;
        value += counted as f64 * req.unit_bid;
        if take == 0 {
            break;
        }
    }
    value
}

/// Per-winner BS utility `channels * (unit_payment - reserve)`.
pub fn bs_utility(outcome: &AuctionOutcome, reserve: f64) -> BTreeMap<usize, f64> {
    outcome
        .awards
        .iter()
        .map(|a| (a.bidder, a.channels as f64 * (a.unit_payment - reserve)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{Position, Tier};

    fn req(bidder: usize, quantity: u32, unit_bid: f64) -> AuctionRequest {
        AuctionRequest {
            bidder,
            quantity,
            unit_bid,
        }
    }

    fn bs(power: f64, price: f64) -> BaseStation {
        BaseStation {
            id: 0,
            tier: Tier::Sbs,
            position: Position::default(),
            tx_power: power,
            num_channels: 4,
            power_unit_price: price,
        }
    }

    #[test]
    fn reservation_examples() {
        assert!((reservation_price(&bs(4.0, 0.1)) - 0.4).abs() < 1e-15);
        assert!((reservation_price(&bs(40.0, 0.1)) - 4.0).abs() < 1e-15);
        assert_eq!(reservation_price(&bs(4.0, 0.0)), 0.0);
    }

    #[test]
    fn contested_three_bidders() {
        let out = run_vcg(&[req(0, 2, 5.0), req(1, 2, 4.0), req(2, 1, 3.0)], 3, 1.0).unwrap();
        assert_eq!(out.channels_won(0), 2);
        assert_eq!(out.channels_won(1), 1);
        assert_eq!(out.channels_won(2), 0);
        let a = out.award(0).unwrap();
        assert!((a.total_payment - 7.0).abs() < 1e-12);
        assert!((a.unit_payment - 3.5).abs() < 1e-12);
        assert!((out.award(1).unwrap().total_payment - 3.0).abs() < 1e-12);
        assert_eq!(out.clearing_price, 4.0);
    }

    #[test]
    fn single_bidder_below_reserve() {
        let out = run_vcg(&[req(0, 1, 0.5)], 4, 1.0).unwrap();
        assert!(out.awards.is_empty());
        assert_eq!(out.clearing_price, 1.0);
    }

    #[test]
    fn slack_supply_pays_reserve() {
        let out = run_vcg(&[req(0, 2, 3.0), req(1, 2, 2.0)], 4, 1.0).unwrap();
        for b in [0, 1] {
            let a = out.award(b).unwrap();
            assert_eq!(a.channels, 2);
            assert_eq!(a.unit_payment, 1.0);
        }
        assert_eq!(out.clearing_price, 1.0);
    }

    #[test]
    fn empty_requests() {
        let out = run_vcg(&[], 4, 0.4).unwrap();
        assert!(out.awards.is_empty());
        assert_eq!(out.clearing_price, 0.4);
    }

    #[test]
    fn ties_go_to_lower_id() {
        let out = run_vcg(&[req(3, 1, 2.0), req(1, 1, 2.0)], 1, 0.5).unwrap();
        assert_eq!(out.channels_won(1), 1);
        assert_eq!(out.channels_won(3), 0);
        assert_eq!(out.award(1).unwrap().unit_payment, 2.0);
        assert_eq!(out.clearing_price, 2.0);
    }

    #[test]
    fn rejects_malformed_requests() {
        assert_eq!(
            run_vcg(&[req(0, 1, 1.0), req(0, 2, 2.0)], 4, 0.0).unwrap_err(),
            AuctionError::DuplicateBidder(0)
        );
        assert_eq!(
            run_vcg(&[req(0, 0, 1.0)], 4, 0.0).unwrap_err(),
            AuctionError::ZeroQuantity(0)
        );
        assert!(run_vcg(&[req(0, 1, -1.0)], 4, 0.0).is_err());
        assert!(run_vcg(&[req(0, 1, f64::NAN)], 4, 0.0).is_err());
    }

    #[test]
    fn bs_utility_examples() {
        let out = AuctionOutcome {
            reserve: 1.0,
            awards: vec![
                Award {
                    bidder: 0,
                    channels: 2,
                    unit_payment: 3.5,
                    total_payment: 7.0,
                },
                Award {
                    bidder: 1,
                    channels: 1,
                    unit_payment: 1.0,
                    total_payment: 1.0,
                },
            ],
            clearing_price: 4.0,
        };
        let u = bs_utility(&out, 1.0);
        assert_eq!(u[&0], 5.0);
        assert_eq!(u[&1], 0.0);
        assert!(bs_utility(&run_vcg(&[], 4, 1.0).unwrap(), 1.0).is_empty());
    }

    #[test]
    fn partial_fill_counts_as_rejected_claim() {
        let out = run_vcg(&[req(0, 3, 5.0), req(1, 2, 2.0)], 4, 1.0).unwrap();
        assert_eq!(out.channels_won(0), 3);
        assert_eq!(out.channels_won(1), 1);
        assert_eq!(out.clearing_price, 2.0);
        // 0 displaces one of bidder 1's units (2.0 < 3 * reserve); bidder 1 displaces nothing.
        assert_eq!(out.award(0).unwrap().unit_payment, 1.0);
        assert_eq!(out.award(0).unwrap().total_payment, 3.0);
        assert_eq!(out.award(1).unwrap().unit_payment, 1.0);
    }
}
