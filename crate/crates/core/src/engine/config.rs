use serde::{Deserialize, Serialize};

use crate::llm_agent::{ForesightParams, LlmEndpointConfig};
use crate::netmodel::{validate_topology, BaseStation, ChannelModel, Position, Tier};
use crate::valuation::UrgencyParams;

use super::SimulationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Llm,
    Foresight,
    Greedy,
    Myopic,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Llm,
        StrategyKind::Foresight,
        StrategyKind::Greedy,
        StrategyKind::Myopic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Llm => "llm",
            StrategyKind::Foresight => "foresight",
            StrategyKind::Greedy => "greedy",
            StrategyKind::Myopic => "myopic",
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Number of UEs bound to each strategy. The engine shuffles the assignment
/// per run, so a UE's id says nothing about its strategy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyMix {
    pub llm: usize,
    pub foresight: usize,
    pub greedy: usize,
    pub myopic: usize,
}

impl StrategyMix {
    pub fn total(&self) -> usize {
        self.llm + self.foresight + self.greedy + self.myopic
    }

    pub fn count(&self, kind: StrategyKind) -> usize {
        match kind {
            StrategyKind::Llm => self.llm,
            StrategyKind::Foresight => self.foresight,
            StrategyKind::Greedy => self.greedy,
            StrategyKind::Myopic => self.myopic,
        }
    }

    /// One entry per UE, grouped in the order llm, foresight, greedy, myopic.
    pub fn assignments(&self) -> Vec<StrategyKind> {
        StrategyKind::ALL
            .iter()
            .flat_map(|&k| std::iter::repeat_n(k, self.count(k)))
            .collect()
    }
}

/// How a UE estimates the number of rivals at a BS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompetitorEstimate {
    /// `round(N / |S|) - 1` from the public UE and BS counts.
    #[default]
    Uniform,
    /// Other UEs that bid at the BS in the previous round.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub mix: StrategyMix,
    pub budget: f64,
    /// Service classes, Mbps.
    pub qos_classes_mbps: Vec<f64>,
    /// Fraction of UEs dropped around a small cell rather than uniformly.
    pub hotspot_fraction: f64,
    pub hotspot_radius: f64,
    /// Radius of the macro-cell area, centred on the MBS.
    pub area_radius: f64,
    pub urgency: UrgencyParams,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            mix: StrategyMix {
                llm: 1,
                foresight: 0,
                greedy: 1,
                myopic: 38,
            },
            budget: 15.0,
            qos_classes_mbps: vec![2.0, 4.0, 8.0],
            hotspot_fraction: 2.0 / 3.0,
            hotspot_radius: 100.0,
            area_radius: 500.0,
            urgency: UrgencyParams::default(),
        }
    }
}

impl PopulationSpec {
    pub fn count(&self) -> usize {
        self.mix.total()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub stations: Vec<BaseStation>,
    pub channel: ChannelModel,
    pub population: PopulationSpec,
    pub entrance_fee: f64,
    pub competitor_estimate: CompetitorEstimate,
    /// Maximum number of rounds `T`.
    pub episodes: u32,
    pub seed: u64,
    pub runs: u32,
    pub foresight: ForesightParams,
    pub llm: LlmEndpointConfig,
}

/// One MBS at the origin and two SBSs 400 m either side near the macro-cell edge, four channels each.
pub fn default_stations() -> Vec<BaseStation> {
    let bs = |id, tier, x, power| BaseStation {
        id,
        tier,
        position: Position::new(x, 0.0),
        tx_power: power,
        num_channels: 4,
        power_unit_price: 0.025,
    };
    vec![
        bs(0, Tier::Mbs, 0.0, 40.0),
        bs(1, Tier::Sbs, -400.0, 4.0),
        bs(2, Tier::Sbs, 400.0, 4.0),
    ]
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            stations: default_stations(),
            channel: ChannelModel::default(),
            population: PopulationSpec::default(),
            entrance_fee: 0.1,
            competitor_estimate: CompetitorEstimate::Uniform,
            episodes: 50,
            seed: 1,
            runs: 1,
            foresight: ForesightParams::default(),
            llm: LlmEndpointConfig::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |msg: String| Err(SimulationError::Config(msg));
        validate_topology(&self.stations)?;
        self.channel.validate()?;
        if self.episodes < 1 {
            return bad("episodes must be at least 1".into());
        }
        if self.runs < 1 {
            return bad("runs must be at least 1".into());
        }
        let pop = &self.population;
        if pop.count() == 0 {
            return bad("population is empty".into());
        }
        if !(pop.budget > 0.0) {
            return bad(format!("budget must be positive, got {}", pop.budget));
        }
        if pop.qos_classes_mbps.is_empty() || pop.qos_classes_mbps.iter().any(|&r| !(r > 0.0)) {
            return bad("qos classes must be a non-empty list of positive rates".into());
        }
        if !(0.0..=1.0).contains(&pop.hotspot_fraction) {
            return bad(format!(
                "hotspot fraction {} is outside [0, 1]",
                pop.hotspot_fraction
            ));
        }
        if !(pop.hotspot_radius > 0.0 && pop.area_radius > 0.0) {
            return bad("placement radii must be positive".into());
        }
        pop.urgency
            .validate()
            .map_err(|e| SimulationError::Config(e.to_string()))?;
        if !(self.entrance_fee >= 0.0) {
            return bad(format!(
                "entrance fee must be non-negative, got {}",
                self.entrance_fee
            ));
        }
        self.foresight.validate().map_err(SimulationError::Config)?;
        self.llm.validate().map_err(SimulationError::Config)?;
        Ok(())
    }

    pub fn uses_llm(&self) -> bool {
        self.population.mix.llm > 0
    }
}
