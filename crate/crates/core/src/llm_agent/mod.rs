//! LLM-driven bidding and its offline stand-in.
//!
//! [`LlmAgent::decide`] renders the market context into a prompt, queries a
//! chat-completion endpoint, parses the reply and clamps the bid to what the
//! budget allows. Transport failures and unusable replies are retried up to
//! `max_retries` times; after that the greedy policy decides and the decision
//! is flagged as a fallback.
//!
//! [`foresight_decide`] is a deterministic policy with budget pacing and
//! selective participation, used whenever no live endpoint is available.

mod prompt;
mod transport;

pub use prompt::{
    parse_reply, render_prompt, ParseError, ParsedLlmReply, PriceDigest, PromptContext,
    StationDigest, FORMAT_REMINDER, SYSTEM_PROMPT,
};
pub use transport::{
    check_reachable, ChatChoice, ChatMessage, ChatRequest, ChatResponse, ChatTransport,
    HttpTransport, LlmEndpointConfig, TransportError,
};

use serde::{Deserialize, Serialize};

use crate::strategy::{
    greedy_argmax_by, greedy_decide, Bid, BidDecision, BidTieBreak, MarketObservation,
};

#[derive(Debug, Clone, PartialEq)]
pub struct LlmDecision {
    pub decision: BidDecision,
    pub fallback: bool,
    /// Endpoint calls made for this decision.
    pub attempts: u32,
}

pub struct LlmAgent {
    config: LlmEndpointConfig,
    transport: Box<dyn ChatTransport>,
}

impl std::fmt::Debug for LlmAgent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmAgent")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl LlmAgent {
    pub fn new(config: LlmEndpointConfig, transport: Box<dyn ChatTransport>) -> Self {
        LlmAgent { config, transport }
    }

    pub fn http(config: LlmEndpointConfig) -> Self {
        let transport = Box::new(HttpTransport::new(&config));
        LlmAgent::new(config, transport)
    }

    pub fn config(&self) -> &LlmEndpointConfig {
        &self.config
    }

    pub fn decide(&self, obs: &MarketObservation<'_>) -> LlmDecision {
        llm_decide(obs, &self.config, self.transport.as_ref())
    }
}

/// Turns a parsed reply into a budget-feasible bid, or `None` if the chosen
/// BS cannot serve the UE at any affordable price.
pub fn apply_reply(obs: &MarketObservation<'_>, reply: &ParsedLlmReply) -> Option<BidDecision> {
    let station = obs.station(reply.selected_bs)?;
    let (quantity, cap) = obs.feasible(station)?;
    let unit_bid = reply.bid_value.clamp(station.reserve, cap);
    Some(BidDecision {
        bid: Some(Bid {
            bs: station.bs_id,
            unit_bid,
            quantity,
        }),
        rationale: reply.explanation.clone(),
    })
}

pub fn llm_decide(
    obs: &MarketObservation<'_>,
    config: &LlmEndpointConfig,
    transport: &dyn ChatTransport,
) -> LlmDecision {
    let ctx = PromptContext::from_observation(obs);
    let candidates: Vec<usize> = ctx
        .stations
        .iter()
        .map(|s| s.bs_id)
        .filter(|&id| obs.station(id).is_some_and(|s| obs.feasible(s).is_some()))
        .collect();
    if candidates.is_empty() {
        return LlmDecision {
            decision: BidDecision::abstain(),
            fallback: false,
            attempts: 0,
        };
    }

    let mut request = ChatRequest {
        model: config.model.clone(),
        messages: vec![
            ChatMessage::system(SYSTEM_PROMPT),
            ChatMessage::user(render_prompt(&ctx)),
        ],
        temperature: config.temperature,
    };
    let mut attempts = 0;
    for _ in 0..=config.max_retries {
        attempts += 1;
        match transport.complete(&request) {
            Ok(text) => {
                let parsed = parse_reply(&text, &candidates);
                if let Some(decision) = parsed.as_ref().ok().and_then(|r| apply_reply(obs, r)) {
                    return LlmDecision {
                        decision,
                        fallback: false,
                        attempts,
                    };
                }
                log::debug!("UE {}: unusable LLM reply ({parsed:?})", obs.ue_id);
                request.messages.push(ChatMessage::assistant(text));
                request.messages.push(ChatMessage::user(FORMAT_REMINDER));
            }
            Err(err) => log::debug!("UE {}: LLM endpoint error: {err}", obs.ue_id),
        }
    }
    LlmDecision {
        decision: greedy_decide(obs),
        fallback: true,
        attempts,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForesightParams {
    /// Participation threshold as a fraction of the per-round budget share.
    pub theta: f64,
    /// Expected participations = rounds remaining / this divisor.
    pub participation_divisor: f64,
}

impl Default for ForesightParams {
    fn default() -> Self {
        ForesightParams {
            theta: 0.5,
            participation_divisor: 2.0,
        }
    }
}

impl ForesightParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.theta >= 0.0) {
            return Err("foresight theta must be non-negative".into());
        }
        if !(self.participation_divisor > 0.0) {
            return Err("foresight participation divisor must be positive".into());
        }
        Ok(())
    }
}

/// Budget-pacing, selectively participating policy.
///
/// Among bids of equal expected utility it takes the highest one within its
/// valuation. Once urgency saturates it bids the unpaced argmax. Otherwise it
/// restricts bids to `budget / max(1, rounds_remaining / divisor)` and sits
/// out unless the request's expected utility (demand times the per-channel
/// value) reaches `theta * budget / rounds_remaining`.
pub fn foresight_decide(obs: &MarketObservation<'_>, params: &ForesightParams) -> BidDecision {
    if obs.urgency.is_saturated() {
        return match greedy_argmax_by(obs, None, BidTieBreak::HighestWithinValue) {
            Some(c) => BidDecision::bid(c.bs, c.unit_bid, c.quantity),
            None => BidDecision::abstain(),
        };
    }
    let remaining = obs.rounds_remaining().max(1) as f64;
    let participations = (remaining / params.participation_divisor).max(1.0);
    let pace_cap = obs.budget / participations;
    let threshold = params.theta * obs.budget / remaining;
    match greedy_argmax_by(obs, Some(pace_cap), BidTieBreak::HighestWithinValue) {
        Some(c)
            if c.expected_utility > 0.0 && c.quantity as f64 * c.expected_utility >= threshold =>
        {
            BidDecision::bid(c.bs, c.unit_bid, c.quantity)
        }
        _ => BidDecision::abstain(),
    }
}
