//! HetNet topology and downlink physical-layer model.
//!
//! Everything here is a pure function over immutable inputs. Rates are carried
//! in bits/s; [`rate_mbps`] converts for valuation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Mbs,
    Sbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: usize,
    pub tier: Tier,
    pub position: Position,
    /// Transmit power per sub-channel, watts.
    pub tx_power: f64,
    pub num_channels: u32,
    /// Energy price per watt; the reservation price is `power_unit_price * tx_power`.
    pub power_unit_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEquipment {
    pub id: usize,
    pub position: Position,
    /// Requested downlink rate, bits/s.
    pub qos_rate: f64,
    pub initial_budget: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceMode {
    /// Every other BS transmits on the same sub-channel.
    FullCochannel,
    /// Only BSs of the same tier interfere (macro and small cells on separate carriers).
    CoTier,
    /// Noise-limited; SINR reduces to SNR.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    /// Bandwidth of a single sub-channel, Hz.
    pub bandwidth: f64,
    /// W/Hz.
    pub noise_power_density: f64,
    pub pathloss_exponent_mbs: f64,
    pub pathloss_exponent_sbs: f64,
    /// Meters. Distances below this are clamped to it.
    pub reference_distance: f64,
    pub interference: InterferenceMode,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            bandwidth: 1.0e6,
            noise_power_density: 4.0e-21,
            pathloss_exponent_mbs: 3.0,
            pathloss_exponent_sbs: 3.5,
            reference_distance: 1.0,
            interference: InterferenceMode::FullCochannel,
        }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.bandwidth > 0.0) {
            return Err(NetError::InvalidChannel("bandwidth must be positive"));
        }
        if !(self.noise_power_density >= 0.0) {
            return Err(NetError::InvalidChannel(
                "noise power density must be non-negative",
            ));
        }
        if !(self.pathloss_exponent_mbs >= 2.0 && self.pathloss_exponent_sbs >= 2.0) {
            return Err(NetError::InvalidChannel(
                "path-loss exponent must be at least 2",
            ));
        }
        if !(self.reference_distance > 0.0) {
            return Err(NetError::InvalidChannel(
                "reference distance must be positive",
            ));
        }
        Ok(())
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power_density * self.bandwidth
    }

    fn exponent(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Mbs => self.pathloss_exponent_mbs,
            Tier::Sbs => self.pathloss_exponent_sbs,
        }
    }

    /// Log-distance channel gain `(max(d, d0) / d0)^-eta`.
    pub fn gain(&self, tier: Tier, distance: f64) -> f64 {
        let d = distance.max(self.reference_distance) / self.reference_distance;
        d.powf(-self.exponent(tier))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("UE {ue} is co-located with BS {bs}")]
    CoincidentPositions { bs: usize, ue: usize },
    #[error("invalid channel model: {0}")]
    InvalidChannel(&'static str),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
}

/// Checks the per-station and tier invariants of a set of base stations.
pub fn validate_topology(stations: &[BaseStation]) -> Result<(), NetError> {
    if stations.is_empty() {
        return Err(NetError::InvalidTopology("no base stations".into()));
    }
    for (idx, bs) in stations.iter().enumerate() {
        if bs.id != idx {
            return Err(NetError::InvalidTopology(format!(
                "base station ids must be 0..{}, found {} at index {idx}",
                stations.len(),
                bs.id
            )));
        }
        if bs.num_channels < 1 {
            return Err(NetError::InvalidTopology(format!(
                "BS {} has no sub-channels",
                bs.id
            )));
        }
        if !(bs.tx_power > 0.0) {
            return Err(NetError::InvalidTopology(format!(
                "BS {} tx power must be positive",
                bs.id
            )));
        }
        if !(bs.power_unit_price > 0.0) {
            return Err(NetError::InvalidTopology(format!(
                "BS {} power unit price must be positive",
                bs.id
            )));
        }
    }
    let macros: Vec<&BaseStation> = stations.iter().filter(|b| b.tier == Tier::Mbs).collect();
    if macros.len() != 1 {
        return Err(NetError::InvalidTopology(format!(
            "expected exactly one MBS, found {}",
            macros.len()
        )));
    }
    let mbs_power = macros[0].tx_power;
    if let Some(sbs) = stations
        .iter()
        .find(|b| b.tier == Tier::Sbs && b.tx_power >= mbs_power)
    {
        return Err(NetError::InvalidTopology(format!(
            "SBS {} tx power {} W is not below the MBS power {} W",
            sbs.id, sbs.tx_power, mbs_power
        )));
    }
    Ok(())
}

fn interferes(mode: InterferenceMode, serving: &BaseStation, other: &BaseStation) -> bool {
    if other.id == serving.id {
        return false;
    }
    match mode {
        InterferenceMode::FullCochannel => true,
        InterferenceMode::CoTier => other.tier == serving.tier,
        InterferenceMode::None => false,
    }
}

/// Downlink SINR at `ue` when served by `bs`.
pub fn sinr(
    bs: &BaseStation,
    ue: &UserEquipment,
    topology: &[BaseStation],
    model: &ChannelModel,
) -> Result<f64, NetError> {
    let d = bs.position.distance(&ue.position);
    if d <= 0.0 {
        return Err(NetError::CoincidentPositions {
            bs: bs.id,
            ue: ue.id,
        });
    }
    let signal = bs.tx_power * model.gain(bs.tier, d);
    let interference: f64 = topology
        .iter()
        .filter(|other| interferes(model.interference, bs, other))
        .map(|other| other.tx_power * model.gain(other.tier, other.position.distance(&ue.position)))
        .sum();
    Ok(signal / (interference + model.noise_power()))
}

/// Shannon capacity `W * log2(1 + sinr)` in bits/s.
pub fn shannon_rate(bandwidth: f64, sinr: f64) -> f64 {
    bandwidth * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Per-sub-channel achievable rate of `ue` at `bs`, bits/s.
pub fn achievable_rate(
    bs: &BaseStation,
    ue: &UserEquipment,
    topology: &[BaseStation],
    model: &ChannelModel,
) -> Result<f64, NetError> {
    Ok(shannon_rate(
        model.bandwidth,
        sinr(bs, ue, topology, model)?,
    ))
}

pub fn rate_mbps(bits_per_second: f64) -> f64 {
    bits_per_second / 1.0e6
}

/// Smallest sub-channel count whose aggregate rate meets `qos_rate`.
///
/// Returns `None` when the per-channel rate is zero, i.e. the BS cannot serve
/// this UE at all.
pub fn channel_demand(qos_rate: f64, rate_per_channel: f64) -> Option<u32> {
    if !(rate_per_channel > 0.0) || !rate_per_channel.is_finite() {
        return None;
    }
    let n = (qos_rate / rate_per_channel).ceil();
    if !n.is_finite() || n > u32::MAX as f64 {
        return None;
    }
    // Guard against ceil() landing one short because of rounding in the division.
    let mut n = (n as u32).max(1);
    while (n as f64) * rate_per_channel < qos_rate {
        n += 1;
    }
    Some(n)
}
