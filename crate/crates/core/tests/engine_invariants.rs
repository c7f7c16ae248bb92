use hetbid::engine::{run_simulation, CompetitorEstimate, SimulationConfig, StrategyMix};
use hetbid::{InterferenceMode, Money};
use proptest::prelude::*;

fn arb_config() -> impl Strategy<Value = SimulationConfig> {
    (
        (0usize..3, 0usize..4, 0usize..12, 0usize..16),
        prop_oneof![
            Just(InterferenceMode::FullCochannel),
            Just(InterferenceMode::CoTier),
            Just(InterferenceMode::None)
        ],
        prop_oneof![
            Just(CompetitorEstimate::Uniform),
            Just(CompetitorEstimate::Oracle)
        ],
        1u32..30,
        (1.0f64..20.0, 0.0f64..0.5, 0.0f64..1.0, 1u32..6),
        any::<u64>(),
    )
        .prop_filter("non-empty population", |((l, f, g, m), ..)| {
            l + f + g + m > 0
        })
        .prop_map(
            |((llm, foresight, greedy, myopic), interference, estimate, episodes, econ, seed)| {
                let (budget, fee, hotspot, channels) = econ;
                let mut cfg = SimulationConfig::default();
                cfg.population.mix = StrategyMix {
                    llm,
                    foresight,
                    greedy,
                    myopic,
                };
                cfg.population.budget = budget;
                cfg.population.hotspot_fraction = hotspot;
                cfg.channel.interference = interference;
                cfg.competitor_estimate = estimate;
                cfg.entrance_fee = fee;
                cfg.episodes = episodes;
                cfg.seed = seed;
                for bs in &mut cfg.stations {
                    bs.num_channels = channels;
                }
                cfg
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn settlement_invariants(cfg in arb_config()) {
        let out = run_simulation(&cfg).unwrap();
        let info = &out.runs[0];
        let budget = Money::from_units(cfg.population.budget);
        let fee = Money::from_units(cfg.entrance_fee);
        let mut prev_round = 0;
        for log in &out.rounds {
            prop_assert!(log.round > prev_round && log.round <= cfg.episodes);
            prev_round = log.round;
            prop_assert_eq!(log.ue_spend(), log.bs_revenue());
            for bs in &log.stations {
                let cap = cfg.stations[bs.bs_id].num_channels;
                prop_assert!(bs.outcome.channels_allocated() <= cap);
                let fees: Money = log.ues.iter()
                    .filter(|u| u.bid.is_some_and(|b| b.bs == bs.bs_id))
                    .map(|u| u.fee)
                    .sum();
                prop_assert_eq!(fees, bs.fee_revenue);
            }
            for e in &log.ues {
                prop_assert!(!e.budget_after.is_negative());
                prop_assert_eq!(e.budget_before - e.fee - e.payment, e.budget_after);
                match e.bid {
                    None => {
                        prop_assert_eq!(e.fee, Money::ZERO);
                        prop_assert_eq!(e.channels_won, 0);
                    }
                    Some(bid) => {
                        prop_assert_eq!(e.fee, fee);
                        let profile = &info.ues[e.ue_id];
                        prop_assert_eq!(profile.demand[bid.bs], Some(bid.quantity));
                        if e.channels_won > 0 {
                            prop_assert!(e.channels_won <= bid.quantity);
                            let rate = profile.rates_mbps[bid.bs] * 1e6;
                            prop_assert!(bid.quantity as f64 * rate >= profile.ue.qos_rate);
                        } else {
                            prop_assert_eq!(e.gross_utility, 0.0);
                            prop_assert_eq!(e.payment, Money::ZERO);
                        }
                    }
                }
            }
        }
        let max_access = cfg.episodes * cfg.stations.iter().map(|b| b.num_channels).max().unwrap()
            * cfg.stations.len() as u32;
        for row in &out.report.ues {
            prop_assert!(row.budget_spent() <= budget);
            prop_assert!(row.channels_won <= max_access);
            if let Some(p) = row.bid_precision {
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
