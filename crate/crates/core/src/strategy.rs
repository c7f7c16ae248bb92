//! UE-side BS selection and bidding.
//!
//! The greedy policy estimates, per BS, the distribution of broadcast clearing
//! prices, turns it into a binomial win probability and maximises the
//! single-round expected utility over a small bid grid. The myopic policy
//! bids its valuation at the highest-rate BS it can afford.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::Tier;
use crate::valuation::UrgencyState;

/// Number of points in the candidate bid grid, anchors included.
pub const GRID_POINTS: usize = 11;
const GRID_SPREAD: f64 = 0.2;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("no clearing prices observed")]
pub struct NoData;

/// Observed clearing prices at one BS.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPriceModel {
    history: Vec<f64>,
    sorted: Vec<f64>,
    sum: f64,
}

impl EmpiricalPriceModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_history<I: IntoIterator<Item = f64>>(prices: I) -> Self {
        let mut model = Self::new();
        for p in prices {
            model.push(p);
        }
        model
    }

    /// Single observation at `price`; the cold-start prior.
    pub fn point_mass(price: f64) -> Self {
        Self::from_history([price])
    }

    pub fn push(&mut self, price: f64) {
        let at = self.sorted.partition_point(|&p| p <= price);
        self.sorted.insert(at, price);
        self.history.push(price);
        self.sum += price;
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Observations in arrival order.
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn last(&self) -> Option<f64> {
        self.history.last().copied()
    }

    pub fn min(&self) -> Option<f64> {
        self.sorted.first().copied()
    }

    pub fn max(&self) -> Option<f64> {
        self.sorted.last().copied()
    }

    /// Fraction of observations `<= x`.
    pub fn cdf(&self, x: f64) -> Result<f64, NoData> {
        if self.is_empty() {
            return Err(NoData);
        }
        let count = self.sorted.partition_point(|&p| p <= x);
        Ok(count as f64 / self.sorted.len() as f64)
    }

    /// Arithmetic mean of the observations.
    pub fn mean(&self) -> Result<f64, NoData> {
        if self.is_empty() {
            return Err(NoData);
        }
        Ok(self.sum / self.history.len() as f64)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Probability that fewer than `capacity` of `competitors` i.i.d. rivals bid
/// strictly above us, given `cdf_at_bid = F(b)`.
pub fn win_probability(cdf_at_bid: f64, competitors: u32, capacity: u32) -> f64 {
    let f = cdf_at_bid.clamp(0.0, 1.0);
    let lose = 1.0 - f;
    let upper = capacity.saturating_sub(1).min(competitors);
    let p: f64 = (0..=upper)
        .map(|j| binomial(competitors, j) * lose.powi(j as i32) * f.powi((competitors - j) as i32))
        .sum();
    p.min(1.0)
}

/// Single-round expected utility per channel of bidding `bid`.
pub fn expected_utility(
    bid: f64,
    valuation: f64,
    prices: &EmpiricalPriceModel,
    competitors: u32,
    capacity: u32,
) -> Result<f64, NoData> {
    let win = win_probability(prices.cdf(bid)?, competitors, capacity);
    Ok(win * (valuation - prices.mean()?))
}

/// Bid grid around the valuation and the last clearing price, clipped to `[reserve, budget_cap]`.
pub fn candidate_bids(valuation: f64, last_price: f64, reserve: f64, budget_cap: f64) -> Vec<f64> {
    if !(budget_cap >= reserve) {
        return Vec::new();
    }
    let lo_anchor = valuation.min(last_price);
    let hi_anchor = valuation.max(last_price);
    let lo = reserve.max((1.0 - GRID_SPREAD) * lo_anchor);
    let hi = budget_cap.min((1.0 + GRID_SPREAD) * hi_anchor);
    let steps = GRID_POINTS - 2;
    let mut grid: Vec<f64> = (0..steps)
        .map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64)
        .chain([valuation, last_price])
        .map(|b| b.clamp(reserve, budget_cap))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// One BS as seen by a UE at decision time.
#[derive(Debug, Clone)]
pub struct StationView<'a> {
    pub bs_id: usize,
    pub tier: Tier,
    pub reserve: f64,
    pub capacity: u32,
    /// Per-channel achievable rate, Mbps.
    pub rate_mbps: f64,
    /// Channels needed to meet QoS; `None` if this BS cannot serve the UE.
    pub demand: Option<u32>,
    /// Per-channel valuation this round.
    pub valuation: f64,
    /// Estimated number of rivals at this BS.
    pub competitors: u32,
    pub prices: &'a EmpiricalPriceModel,
}

impl StationView<'_> {
    /// Broadcast history, or a point mass at the reserve before any broadcast.
    pub fn effective_prices(&self) -> Cow<'_, EmpiricalPriceModel> {
        if self.prices.is_empty() {
            Cow::Owned(EmpiricalPriceModel::point_mass(self.reserve))
        } else {
            Cow::Borrowed(self.prices)
        }
    }

    pub fn last_price(&self) -> f64 {
        self.prices.last().unwrap_or(self.reserve)
    }
}

#[derive(Debug, Clone)]
pub struct MarketObservation<'a> {
    pub ue_id: usize,
    /// 1-based index of the round being decided.
    pub round: u32,
    pub total_rounds: u32,
    pub budget: f64,
    pub entrance_fee: f64,
    pub urgency: UrgencyState,
    pub stations: Vec<StationView<'a>>,
}

impl MarketObservation<'_> {
    /// Rounds left including the current one.
    pub fn rounds_remaining(&self) -> u32 {
        self.total_rounds.saturating_sub(self.round) + 1
    }

    pub fn station(&self, bs_id: usize) -> Option<&StationView<'_>> {
        self.stations.iter().find(|s| s.bs_id == bs_id)
    }

    /// Largest per-channel bid at `station` such that `quantity * bid + fee <= budget`.
    pub fn unit_budget_cap(&self, quantity: u32) -> f64 {
        affordable_unit_bid(self.budget, self.entrance_fee, quantity)
    }

    /// Demand and per-channel budget cap at a station that can serve the UE
    /// and where at least the reserve is affordable.
    pub fn feasible(&self, station: &StationView<'_>) -> Option<(u32, f64)> {
        let quantity = station.demand?;
        let cap = self.unit_budget_cap(quantity);
        (cap >= station.reserve).then_some((quantity, cap))
    }
}

/// Largest `b` with `quantity * b + fee <= budget` in floating point; negative if the fee alone is unaffordable.
pub fn affordable_unit_bid(budget: f64, fee: f64, quantity: u32) -> f64 {
    let q = quantity.max(1) as f64;
    let mut b = (budget - fee) / q;
    while b > 0.0 && q * b + fee > budget {
        b = b.next_down();
    }
    b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub bs: usize,
    pub unit_bid: f64,
    pub quantity: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BidDecision {
    /// `None` means abstain.
    pub bid: Option<Bid>,
    /// Free-text reasoning; empty for scripted strategies.
    pub rationale: String,
}

impl BidDecision {
    pub fn abstain() -> Self {
        BidDecision::default()
    }

    pub fn bid(bs: usize, unit_bid: f64, quantity: u32) -> Self {
        BidDecision {
            bid: Some(Bid {
                bs,
                unit_bid,
                quantity,
            }),
            rationale: String::new(),
        }
    }

    pub fn is_abstain(&self) -> bool {
        self.bid.is_none()
    }
}

/// Best (BS, bid) pair under the expected-utility criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyChoice {
    pub bs: usize,
    pub unit_bid: f64,
    pub quantity: u32,
    pub expected_utility: f64,
    pub win_probability: f64,
}

/// Grid argmax over every feasible BS; ties go to the lower bid, then the lower BS id.
pub fn greedy_argmax(obs: &MarketObservation<'_>) -> Option<GreedyChoice> {
    greedy_argmax_capped(obs, None)
}

/// How [`greedy_argmax_by`] resolves equal expected utilities at one BS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BidTieBreak {
    /// Keep the lowest tied bid.
    Lowest,
    /// Keep the highest tied bid that does not exceed the valuation. Under VCG
    /// the payment does not depend on one's own bid, so this only adds win
    /// chances the price model cannot see (e.g. rivals tied at the same price).
    HighestWithinValue,
}

/// [`greedy_argmax`] with the grid additionally clipped to `bid_cap`.
pub fn greedy_argmax_capped(
    obs: &MarketObservation<'_>,
    bid_cap: Option<f64>,
) -> Option<GreedyChoice> {
    greedy_argmax_by(obs, bid_cap, BidTieBreak::Lowest)
}

/// Grid argmax with an optional bid cap and a choice of tie-break between bids
/// at the same BS. Ties across BSs always go to the lower BS id.
pub fn greedy_argmax_by(
    obs: &MarketObservation<'_>,
    bid_cap: Option<f64>,
    tie: BidTieBreak,
) -> Option<GreedyChoice> {
    let mut best: Option<GreedyChoice> = None;
    let mut stations: Vec<&StationView<'_>> = obs.stations.iter().collect();
    stations.sort_by_key(|s| s.bs_id);
    for station in stations {
        let Some((quantity, budget_cap)) = obs.feasible(station) else {
            continue;
        };
        let cap = bid_cap.map_or(budget_cap, |c| c.min(budget_cap));
        let prices = station.effective_prices();
        let mean = prices.mean().expect("effective prices are never empty");
        for bid in candidate_bids(
            station.valuation,
            station.last_price(),
            station.reserve,
            cap,
        ) {
            let cdf = prices.cdf(bid).expect("effective prices are never empty");
            let win = win_probability(cdf, station.competitors, station.capacity);
            let utility = win * (station.valuation - mean);
            let better = match best {
                None => true,
                Some(b) if utility > b.expected_utility => true,
                // Grid is ascending, so replacing on equality keeps the highest tied bid.
                Some(b) => {
                    tie == BidTieBreak::HighestWithinValue
                        && utility == b.expected_utility
                        && b.bs == station.bs_id
                        && bid <= station.valuation
                }
            };
            if better {
                best = Some(GreedyChoice {
                    bs: station.bs_id,
                    unit_bid: bid,
                    quantity,
                    expected_utility: utility,
                    win_probability: win,
                });
            }
        }
    }
    best
}

pub fn greedy_decide(obs: &MarketObservation<'_>) -> BidDecision {
    match greedy_argmax(obs) {
        Some(c) if c.expected_utility > 0.0 => BidDecision::bid(c.bs, c.unit_bid, c.quantity),
        _ => BidDecision::abstain(),
    }
}

/// Truthful bid at the highest-rate BS that is affordable, falling back down the rate order.
pub fn myopic_decide(obs: &MarketObservation<'_>) -> BidDecision {
    let mut stations: Vec<&StationView<'_>> = obs.stations.iter().collect();
    stations.sort_by(|a, b| {
        b.rate_mbps
            .total_cmp(&a.rate_mbps)
            .then(a.bs_id.cmp(&b.bs_id))
    });
    for station in stations {
        if let Some((quantity, cap)) = obs.feasible(station) {
            return BidDecision::bid(station.bs_id, station.valuation.min(cap), quantity);
        }
    }
    BidDecision::abstain()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::valuation::UrgencyParams;

    pub fn view(
        bs_id: usize,
        reserve: f64,
        rate: f64,
        valuation: f64,
        competitors: u32,
        prices: &EmpiricalPriceModel,
    ) -> StationView<'_> {
        StationView {
            bs_id,
            tier: if bs_id == 0 { Tier::Mbs } else { Tier::Sbs },
            reserve,
            capacity: 4,
            rate_mbps: rate,
            demand: Some(1),
            valuation,
            competitors,
            prices,
        }
    }

    pub fn observation(budget: f64, stations: Vec<StationView<'_>>) -> MarketObservation<'_> {
        MarketObservation {
            ue_id: 0,
            round: 1,
            total_rounds: 50,
            budget,
            entrance_fee: 0.1,
            urgency: UrgencyState::new(UrgencyParams::default()),
            stations,
        }
    }
}
