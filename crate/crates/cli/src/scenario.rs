//! Scenario files.
//!
//! A scenario is a TOML document with optional sections `[topology]`,
//! `[population]`, `[auction]`, `[valuation]`, `[llm]`, `[foresight]` and
//! `[simulation]`. Unknown keys are rejected. Anything left out takes the
//! library default and is reported with an info-level log line.

use hetbid::engine::{CompetitorEstimate, SimulationConfig, StrategyMix};
use hetbid::llm_agent::{ForesightParams, LlmEndpointConfig};
use hetbid::netmodel::InterferenceMode;
use hetbid::{BaseStation, Position, Tier, UrgencyParams};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub topology: Option<TopologySection>,
    pub population: Option<PopulationSection>,
    pub auction: Option<AuctionSection>,
    pub valuation: Option<ValuationSection>,
    pub llm: Option<LlmSection>,
    pub foresight: Option<ForesightSection>,
    pub simulation: Option<SimulationSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub stations: Option<Vec<StationEntry>>,
    pub bandwidth_hz: Option<f64>,
    pub noise_power_density: Option<f64>,
    pub pathloss_exponent_mbs: Option<f64>,
    pub pathloss_exponent_sbs: Option<f64>,
    pub reference_distance: Option<f64>,
    pub interference: Option<InterferenceMode>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationEntry {
    pub tier: Tier,
    pub x: f64,
    pub y: f64,
    pub tx_power: f64,
    pub num_channels: u32,
    pub power_unit_price: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSection {
    pub mix: Option<MixSection>,
    pub budget: Option<f64>,
    pub qos_classes_mbps: Option<Vec<f64>>,
    pub hotspot_fraction: Option<f64>,
    pub hotspot_radius: Option<f64>,
    pub area_radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixSection {
    #[serde(default)]
    pub llm: usize,
    #[serde(default)]
    pub foresight: usize,
    #[serde(default)]
    pub greedy: usize,
    #[serde(default)]
    pub myopic: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuctionSection {
    pub entrance_fee: Option<f64>,
    pub competitor_estimate: Option<CompetitorEstimate>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuationSection {
    pub alpha0: Option<f64>,
    pub alpha_bar: Option<f64>,
    pub saturation: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_ms: Option<u64>,
    pub max_retries: Option<u32>,
    pub temperature: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForesightSection {
    pub theta: Option<f64>,
    pub participation_divisor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub episodes: Option<u32>,
    pub seed: Option<u64>,
    pub runs: Option<u32>,
}

/// Takes `value` if present, otherwise logs that `key` falls back to `default`.
fn pick<T: std::fmt::Debug>(value: Option<T>, key: &str, default: T) -> T {
    value.unwrap_or_else(|| {
        log::info!("{key} not set, using default {default:?}");
        default
    })
}

fn section<T: Default>(value: Option<T>, name: &str) -> T {
    value.unwrap_or_else(|| {
        log::info!("[{name}] section missing, using defaults");
        T::default()
    })
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Merges the file over the library defaults. Does not validate.
    pub fn resolve(self) -> SimulationConfig {
        let d = SimulationConfig::default();

        let topo = section(self.topology, "topology");
        let stations = match topo.stations {
            Some(list) => list
                .into_iter()
                .enumerate()
                .map(|(id, s)| BaseStation {
                    id,
                    tier: s.tier,
                    position: Position::new(s.x, s.y),
                    tx_power: s.tx_power,
                    num_channels: s.num_channels,
                    power_unit_price: s.power_unit_price,
                })
                .collect(),
            None => {
                log::info!("topology.stations not set, using the default 1 MBS + 2 SBS layout");
                d.stations.clone()
            }
        };
        let dc = &d.channel;
        let mut channel = dc.clone();
        channel.bandwidth = pick(topo.bandwidth_hz, "topology.bandwidth_hz", dc.bandwidth);
        channel.noise_power_density = pick(
            topo.noise_power_density,
            "topology.noise_power_density",
            dc.noise_power_density,
        );
        channel.pathloss_exponent_mbs = pick(
            topo.pathloss_exponent_mbs,
            "topology.pathloss_exponent_mbs",
            dc.pathloss_exponent_mbs,
        );
        channel.pathloss_exponent_sbs = pick(
            topo.pathloss_exponent_sbs,
            "topology.pathloss_exponent_sbs",
            dc.pathloss_exponent_sbs,
        );
        channel.reference_distance = pick(
            topo.reference_distance,
            "topology.reference_distance",
            dc.reference_distance,
        );
        channel.interference = pick(topo.interference, "topology.interference", dc.interference);

        let pop = section(self.population, "population");
        let dp = &d.population;
        let mix = match pop.mix {
            Some(m) => StrategyMix {
                llm: m.llm,
                foresight: m.foresight,
                greedy: m.greedy,
                myopic: m.myopic,
            },
            None => pick(None, "population.mix", dp.mix),
        };
        let val = section(self.valuation, "valuation");
        let du = dp.urgency;
        let urgency = UrgencyParams {
            alpha0: pick(val.alpha0, "valuation.alpha0", du.alpha0),
            alpha_bar: pick(val.alpha_bar, "valuation.alpha_bar", du.alpha_bar),
            saturation: pick(val.saturation, "valuation.saturation", du.saturation),
        };
        let population = hetbid::engine::PopulationSpec {
            mix,
            budget: pick(pop.budget, "population.budget", dp.budget),
            qos_classes_mbps: pick(
                pop.qos_classes_mbps,
                "population.qos_classes_mbps",
                dp.qos_classes_mbps.clone(),
            ),
            hotspot_fraction: pick(
                pop.hotspot_fraction,
                "population.hotspot_fraction",
                dp.hotspot_fraction,
            ),
            hotspot_radius: pick(
                pop.hotspot_radius,
                "population.hotspot_radius",
                dp.hotspot_radius,
            ),
            area_radius: pick(pop.area_radius, "population.area_radius", dp.area_radius),
            urgency,
        };

        let auction = section(self.auction, "auction");
        let llm = section(self.llm, "llm");
        let dl = &d.llm;
        let llm = LlmEndpointConfig {
            base_url: pick(llm.base_url, "llm.base_url", dl.base_url.clone()),
            model: pick(llm.model, "llm.model", dl.model.clone()),
            api_key_env: pick(llm.api_key_env, "llm.api_key_env", dl.api_key_env.clone()),
            timeout_ms: pick(llm.timeout_ms, "llm.timeout_ms", dl.timeout_ms),
            max_retries: pick(llm.max_retries, "llm.max_retries", dl.max_retries),
            temperature: pick(llm.temperature, "llm.temperature", dl.temperature),
        };
        let fs = section(self.foresight, "foresight");
        let foresight = ForesightParams {
            theta: pick(fs.theta, "foresight.theta", d.foresight.theta),
            participation_divisor: pick(
                fs.participation_divisor,
                "foresight.participation_divisor",
                d.foresight.participation_divisor,
            ),
        };
        let sim = section(self.simulation, "simulation");

        SimulationConfig {
            stations,
            channel,
            population,
            entrance_fee: pick(auction.entrance_fee, "auction.entrance_fee", d.entrance_fee),
            competitor_estimate: pick(
                auction.competitor_estimate,
                "auction.competitor_estimate",
                d.competitor_estimate,
            ),
            episodes: pick(sim.episodes, "simulation.episodes", d.episodes),
            seed: pick(sim.seed, "simulation.seed", d.seed),
            runs: pick(sim.runs, "simulation.runs", d.runs),
            foresight,
            llm,
        }
    }
}

/// Parses and resolves a scenario, without validation.
pub fn load_scenario(text: &str) -> Result<SimulationConfig, CliError> {
    Ok(ScenarioFile::parse(text)?.resolve())
}

pub const SCENARIO1: &str = include_str!("../presets/scenario1.toml");
pub const SCENARIO2: &str = include_str!("../presets/scenario2.toml");

/// Source text of a built-in preset.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "scenario1" => Some(SCENARIO1),
        "scenario2" => Some(SCENARIO2),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_library_default() {
        assert_eq!(load_scenario("").unwrap(), SimulationConfig::default());
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let err = load_scenario("[simulation]\nepisodes = 10\nepisodez = 3\n").unwrap_err();
        let CliError::Config(msg) = err else {
            panic!("expected config error")
        };
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("episodez"), "{msg}");
    }

    #[test]
    fn type_error_reports_line() {
        let CliError::Config(msg) =
            load_scenario("\n[auction]\nentrance_fee = \"cheap\"\n").unwrap_err()
        else {
            panic!("expected config error")
        };
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn overrides_apply() {
        let cfg = load_scenario(
            r#"
            [topology]
            interference = "co_tier"
            [[topology.stations]]
            tier = "mbs"
            x = 0.0
            y = 0.0
            tx_power = 20.0
            num_channels = 2
            power_unit_price = 0.1
            [population]
            budget = 9.5
            [population.mix]
            greedy = 3
            [auction]
            competitor_estimate = "oracle"
            [valuation]
            saturation = 3
            [simulation]
            episodes = 7
            "#,
        )
        .unwrap();
        assert_eq!(cfg.stations.len(), 1);
        assert_eq!(cfg.stations[0].num_channels, 2);
        assert_eq!(cfg.channel.interference, InterferenceMode::CoTier);
        assert_eq!(cfg.population.budget, 9.5);
        assert_eq!(
            cfg.population.mix,
            StrategyMix {
                greedy: 3,
                ..StrategyMix::default()
            }
        );
        assert_eq!(cfg.competitor_estimate, CompetitorEstimate::Oracle);
        assert_eq!(cfg.population.urgency.saturation, 3);
        assert_eq!(cfg.episodes, 7);
        cfg.validate().unwrap();
    }

    #[test]
    fn presets_match_experiment_setup() {
        let s1 = load_scenario(SCENARIO1).unwrap();
        s1.validate().unwrap();
        assert_eq!(s1.stations.len(), 3);
        assert_eq!(
            s1.stations.iter().filter(|b| b.tier == Tier::Mbs).count(),
            1
        );
        assert!(s1.stations.iter().all(|b| b.num_channels == 4));
        assert_eq!(s1.population.count(), 40);
        assert_eq!(s1.population.budget, 15.0);
        assert_eq!(
            s1.population.mix,
            StrategyMix {
                llm: 1,
                foresight: 0,
                greedy: 1,
                myopic: 38
            }
        );

        let s2 = load_scenario(SCENARIO2).unwrap();
        s2.validate().unwrap();
        assert_eq!(
            s2.population.mix,
            StrategyMix {
                llm: 1,
                foresight: 0,
                greedy: 39,
                myopic: 0
            }
        );
        assert_eq!(s2.stations, s1.stations);
    }
}
