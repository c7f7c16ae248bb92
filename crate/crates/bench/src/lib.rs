//! Fixtures shared by the criterion benchmarks in `benches/`.

use hetbid::auction::AuctionRequest;
use hetbid::strategy::{EmpiricalPriceModel, MarketObservation, StationView};
use hetbid::{Tier, UrgencyParams, UrgencyState};

/// `n` requests with scattered bids and quantities 1..=3, deterministic.
pub fn requests(n: usize) -> Vec<AuctionRequest> {
    (0..n)
        .map(|i| AuctionRequest {
            bidder: i,
            quantity: (i % 3) as u32 + 1,
            unit_bid: 0.5 + ((i * 37) % 101) as f64 / 25.0,
        })
        .collect()
}

/// Clearing-price history of length `len` hovering around `level`.
pub fn price_history(len: usize, level: f64) -> EmpiricalPriceModel {
    EmpiricalPriceModel::from_history(
        (0..len).map(|i| level * (0.8 + ((i * 13) % 17) as f64 / 40.0)),
    )
}

/// Mid-horizon observation over one MBS and two SBSs.
pub fn observation(prices: &[EmpiricalPriceModel; 3]) -> MarketObservation<'_> {
    let station = |id: usize, reserve: f64, rate: f64, demand: u32| StationView {
        bs_id: id,
        tier: if id == 0 { Tier::Mbs } else { Tier::Sbs },
        reserve,
        capacity: 4,
        rate_mbps: rate,
        demand: Some(demand),
        valuation: 0.75 * rate,
        competitors: 12,
        prices: &prices[id],
    };
    MarketObservation {
        ue_id: 0,
        round: 20,
        total_rounds: 50,
        budget: 11.0,
        entrance_fee: 0.1,
        urgency: UrgencyState {
            params: UrgencyParams::default(),
            failures: 2,
        },
        stations: vec![
            station(0, 1.0, 2.6, 2),
            station(1, 0.1, 3.9, 1),
            station(2, 0.1, 1.4, 3),
        ],
    }
}
