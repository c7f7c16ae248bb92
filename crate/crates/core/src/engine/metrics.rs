use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::auction::AuctionOutcome;
use crate::money::Money;
use crate::strategy::Bid;

use super::StrategyKind;

/// One UE's view of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeRoundEntry {
    pub ue_id: usize,
    pub strategy: StrategyKind,
    /// Urgency multiplier the decision was made with.
    pub alpha: f64,
    /// `None` when the UE sat out (by choice or because it could not pay the fee).
    pub bid: Option<Bid>,
    /// Per-channel valuation at the chosen BS.
    pub valuation: Option<f64>,
    pub fallback: bool,
    /// Endpoint calls made to reach this decision.
    pub llm_attempts: u32,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub rationale: String,
    pub channels_won: u32,
    pub fee: Money,
    pub payment: Money,
    /// `k * v - payment`; zero for non-winners.
    pub gross_utility: f64,
    pub net_utility: f64,
    pub budget_before: Money,
    pub budget_after: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsRoundEntry {
    pub bs_id: usize,
    pub requests: u32,
    pub outcome: AuctionOutcome,
    pub fee_revenue: Money,
    pub payment_revenue: Money,
    /// Sum over winners of `k * (payment - reserve)`.
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub run: u32,
    pub seed: u64,
    /// 1-based.
    pub round: u32,
    pub ues: Vec<UeRoundEntry>,
    pub stations: Vec<BsRoundEntry>,
}

impl RoundLog {
    pub fn ue_spend(&self) -> Money {
        self.ues.iter().map(|u| u.fee + u.payment).sum()
    }

    pub fn bs_revenue(&self) -> Money {
        self.stations
            .iter()
            .map(|s| s.fee_revenue + s.payment_revenue)
            .sum()
    }
}

/// Totals for one UE over one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeMetrics {
    pub run: u32,
    pub seed: u64,
    pub ue_id: usize,
    pub strategy: StrategyKind,
    /// Configured horizon `T`.
    pub episodes: u32,
    pub gross_utility: f64,
    pub net_utility: f64,
    pub channels_won: u32,
    pub bids_placed: u32,
    pub bids_won: u32,
    /// `None` when the UE never bid.
    pub bid_precision: Option<f64>,
    pub fees_paid: Money,
    pub payments_paid: Money,
    pub fallbacks: u32,
    pub llm_decisions: u32,
}

impl UeMetrics {
    pub fn budget_spent(&self) -> Money {
        self.fees_paid + self.payments_paid
    }
}

/// Per-UE averages over every UE of one strategy across all runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub strategy: StrategyKind,
    /// UE-run rows aggregated.
    pub samples: usize,
    pub mean_gross_utility: f64,
    pub mean_net_utility: f64,
    pub mean_channels_won: f64,
    pub mean_bids_placed: f64,
    /// Mean over rows that placed at least one bid.
    pub mean_bid_precision: Option<f64>,
    pub mean_budget_spent: f64,
    /// Fallbacks per endpoint-backed decision.
    pub fallback_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub episodes: u32,
    pub runs: u32,
    pub ues: Vec<UeMetrics>,
    pub classes: Vec<ClassSummary>,
}

impl MetricsReport {
    pub fn class(&self, strategy: StrategyKind) -> Option<&ClassSummary> {
        self.classes.iter().find(|c| c.strategy == strategy)
    }
}

pub fn bid_precision(bids: u32, wins: u32) -> Option<f64> {
    (bids > 0).then(|| wins as f64 / bids as f64)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Folds round logs into per-UE rows (ordered by run, then UE id) and per-strategy summaries.
pub fn compute_metrics(logs: &[RoundLog], episodes: u32) -> MetricsReport {
    let mut rows: BTreeMap<(u32, usize), UeMetrics> = BTreeMap::new();
    let mut runs = std::collections::BTreeSet::new();
    for log in logs {
        runs.insert(log.run);
        for e in &log.ues {
            let row = rows.entry((log.run, e.ue_id)).or_insert_with(|| UeMetrics {
                run: log.run,
                seed: log.seed,
                ue_id: e.ue_id,
                strategy: e.strategy,
                episodes,
                gross_utility: 0.0,
                net_utility: 0.0,
                channels_won: 0,
                bids_placed: 0,
                bids_won: 0,
                bid_precision: None,
                fees_paid: Money::ZERO,
                payments_paid: Money::ZERO,
                fallbacks: 0,
                llm_decisions: 0,
            });
            row.gross_utility += e.gross_utility;
            row.net_utility += e.net_utility;
            row.channels_won += e.channels_won;
            if e.bid.is_some() {
                row.bids_placed += 1;
                if e.channels_won > 0 {
                    row.bids_won += 1;
                }
            }
            row.fees_paid += e.fee;
            row.payments_paid += e.payment;
            row.fallbacks += u32::from(e.fallback);
            row.llm_decisions += u32::from(e.llm_attempts > 0);
        }
    }
    let ues: Vec<UeMetrics> = rows
        .into_values()
        .map(|mut r| {
            r.bid_precision = bid_precision(r.bids_placed, r.bids_won);
            r
        })
        .collect();

    let classes = StrategyKind::ALL
        .iter()
        .filter_map(|&kind| {
            let members: Vec<&UeMetrics> = ues.iter().filter(|u| u.strategy == kind).collect();
            if members.is_empty() {
                return None;
            }
            let llm_decisions: u32 = members.iter().map(|u| u.llm_decisions).sum();
            let fallbacks: u32 = members.iter().map(|u| u.fallbacks).sum();
            Some(ClassSummary {
                strategy: kind,
                samples: members.len(),
                mean_gross_utility: mean(members.iter().map(|u| u.gross_utility)).unwrap_or(0.0),
                mean_net_utility: mean(members.iter().map(|u| u.net_utility)).unwrap_or(0.0),
                mean_channels_won: mean(members.iter().map(|u| u.channels_won as f64))
                    .unwrap_or(0.0),
                mean_bids_placed: mean(members.iter().map(|u| u.bids_placed as f64)).unwrap_or(0.0),
                mean_bid_precision: mean(members.iter().filter_map(|u| u.bid_precision)),
                mean_budget_spent: mean(members.iter().map(|u| u.budget_spent().as_units()))
                    .unwrap_or(0.0),
                fallback_rate: (llm_decisions > 0).then(|| fallbacks as f64 / llm_decisions as f64),
            })
        })
        .collect();

    MetricsReport {
        episodes,
        runs: runs.len() as u32,
        ues,
        classes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(ue_id: usize, bid: bool, won: u32) -> UeRoundEntry {
        UeRoundEntry {
            ue_id,
            strategy: StrategyKind::Myopic,
            alpha: 0.5,
            bid: bid.then_some(Bid {
                bs: 0,
                unit_bid: 1.0,
                quantity: 2,
            }),
            valuation: bid.then_some(1.0),
            fallback: false,
            llm_attempts: 0,
            rationale: String::new(),
            channels_won: won,
            fee: if bid {
                Money::from_units(0.1)
            } else {
                Money::ZERO
            },
            payment: Money::ZERO,
            gross_utility: 0.0,
            net_utility: 0.0,
            budget_before: Money::ZERO,
            budget_after: Money::ZERO,
        }
    }

    fn log(round: u32, ues: Vec<UeRoundEntry>) -> RoundLog {
        RoundLog {
            run: 0,
            seed: 7,
            round,
            ues,
            stations: vec![],
        }
    }

    #[test]
    fn precision_ten_bids_four_wins() {
        let logs: Vec<RoundLog> = (0..10)
            .map(|t| log(t + 1, vec![entry(0, true, u32::from(t < 4))]))
            .collect();
        let report = compute_metrics(&logs, 10);
        assert_eq!(report.ues[0].bid_precision, Some(0.4));
        assert_eq!(report.ues[0].fees_paid, Money::from_units(1.0));
    }

    #[test]
    fn precision_null_without_bids() {
        let report = compute_metrics(&[log(1, vec![entry(0, false, 0)])], 1);
        assert_eq!(report.ues[0].bid_precision, None);
        assert_eq!(report.classes[0].mean_bid_precision, None);
        let json = serde_json::to_value(&report.ues[0]).unwrap();
        assert!(json["bid_precision"].is_null());
    }

    #[test]
    fn access_count_sums_channels() {
        let logs: Vec<RoundLog> = [2, 0, 1]
            .iter()
            .enumerate()
            .map(|(t, &k)| log(t as u32 + 1, vec![entry(0, true, k)]))
            .collect();
        let report = compute_metrics(&logs, 3);
        assert_eq!(report.ues[0].channels_won, 3);
        assert_eq!(report.ues[0].bids_won, 2);
    }

    #[test]
    fn class_means_span_runs() {
        let mut a = log(1, vec![entry(0, true, 2)]);
        let mut b = log(1, vec![entry(0, true, 0)]);
        a.run = 0;
        b.run = 1;
        let report = compute_metrics(&[a, b], 1);
        assert_eq!(report.runs, 2);
        let class = report.class(StrategyKind::Myopic).unwrap();
        assert_eq!(class.samples, 2);
        assert_eq!(class.mean_channels_won, 1.0);
        assert_eq!(class.mean_bid_precision, Some(0.5));
        assert_eq!(class.fallback_rate, None);
    }
}
