//! Prompt rendering and reply parsing for the LLM bidder.

use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::Tier;
use crate::strategy::MarketObservation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceDigest {
    pub count: usize,
    pub last: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationDigest {
    pub bs_id: usize,
    pub tier: Tier,
    pub valuation: f64,
    pub demand: u32,
    pub reserve: f64,
    /// `None` before the first broadcast.
    pub prices: Option<PriceDigest>,
}

/// Everything the prompt shows, already reduced to the candidate BS set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptContext {
    pub budget: f64,
    pub entrance_fee: f64,
    pub rounds_elapsed: u32,
    pub rounds_remaining: u32,
    /// Candidate BSs in ascending id order.
    pub stations: Vec<StationDigest>,
}

impl PromptContext {
    /// Candidate set is every BS that can meet the UE's QoS.
    pub fn from_observation(obs: &MarketObservation<'_>) -> Self {
        let mut stations: Vec<StationDigest> = obs
            .stations
            .iter()
            .filter_map(|s| {
                let demand = s.demand?;
                let prices = match (
                    s.prices.last(),
                    s.prices.mean(),
                    s.prices.min(),
                    s.prices.max(),
                ) {
                    (Some(last), Ok(mean), Some(min), Some(max)) => Some(PriceDigest {
                        count: s.prices.len(),
                        last,
                        mean,
                        min,
                        max,
                    }),
                    _ => None,
                };
                Some(StationDigest {
                    bs_id: s.bs_id,
                    tier: s.tier,
                    valuation: s.valuation,
                    demand,
                    reserve: s.reserve,
                    prices,
                })
            })
            .collect();
        stations.sort_by_key(|s| s.bs_id);
        PromptContext {
            budget: obs.budget,
            entrance_fee: obs.entrance_fee,
            rounds_elapsed: obs.round.saturating_sub(1),
            rounds_remaining: obs.rounds_remaining(),
            stations,
        }
    }
}

pub const SYSTEM_PROMPT: &str =
    "You are the bidding agent of a mobile user in a repeated multi-channel \
spectrum auction. Each base station runs its own VCG auction every round and broadcasts only its \
clearing price. Your budget is never refilled. Answer in the requested format.";

pub const FORMAT_REMINDER: &str =
    "Your previous answer could not be used. Reply with exactly two lines:\n\
Selected BS and bid value: BS <id>, <bid>\n\
Explanation: \"<short reasoning>\"";

fn tier_label(tier: Tier) -> &'static str {
    match tier {
        Tier::Mbs => "MBS",
        Tier::Sbs => "SBS",
    }
}

/// Deterministic prompt text; identical contexts yield identical bytes.
pub fn render_prompt(ctx: &PromptContext) -> String {
    let mut out = String::new();
    let ids: Vec<String> = ctx.stations.iter().map(|s| s.bs_id.to_string()).collect();
    // Writing into a String cannot fail.
    let _ = writeln!(out, "Market state for this round:");
    let _ = writeln!(
        out,
        "- Candidate base stations {{{}}}, value of one sub-channel to you:",
        ids.join(", ")
    );
    for s in &ctx.stations {
        let _ = writeln!(
            out,
            "  - BS {} ({}): {:.2}",
            s.bs_id,
            tier_label(s.tier),
            s.valuation
        );
    }
    let _ = writeln!(out, "- Remaining budget: {:.2}", ctx.budget);
    let _ = writeln!(out, "- Sub-channels you need at each BS:");
    for s in &ctx.stations {
        let _ = writeln!(out, "  - BS {}: {}", s.bs_id, s.demand);
    }
    let _ = writeln!(out, "- Reserve price per sub-channel:");
    for s in &ctx.stations {
        let _ = writeln!(out, "  - BS {}: {:.2}", s.bs_id, s.reserve);
    }
    let _ = writeln!(
        out,
        "- Participation fee per request: {:.2}",
        ctx.entrance_fee
    );
    let _ = writeln!(
        out,
        "- Rounds elapsed: {}, rounds remaining (including this one): {}",
        ctx.rounds_elapsed, ctx.rounds_remaining
    );
    let _ = writeln!(out, "- Broadcast clearing prices so far:");
    for s in &ctx.stations {
        match &s.prices {
            None => {
                let _ = writeln!(out, "  - BS {}: no observations yet", s.bs_id);
            }
            Some(p) => {
                let _ = writeln!(
                    out,
                    "  - BS {}: {} observations, last {:.2}, mean {:.2}, min {:.2}, max {:.2}",
                    s.bs_id, p.count, p.last, p.mean, p.min, p.max
                );
            }
        }
    }
    let _ = writeln!(out, "Decide:");
    let _ = writeln!(
        out,
        "1. Which BS to request, choosing the one with the best expected payoff."
    );
    let _ = writeln!(out, "2. Your per-sub-channel bid at that BS.");
    let _ = writeln!(out, "3. One sentence justifying the choice.");
    let _ = writeln!(out);
    let _ = writeln!(out, "Reply format:");
    let _ = writeln!(out, "Selected BS and bid value: BS [id], [value]");
    let _ = write!(out, "Explanation: \"[one sentence]\"");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedLlmReply {
    pub selected_bs: usize,
    pub bid_value: f64,
    pub explanation: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("reply has no \"Selected BS and bid value\" line")]
    MissingSelection,
    #[error("could not read a BS id and bid from {0:?}")]
    Malformed(String),
    #[error("bid {0} is negative or not finite")]
    InvalidBid(f64),
    #[error("BS {0} is not a candidate")]
    UnknownStation(usize),
}

static SELECTION_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)selected\s+bs\s+and\s+bid\s+value\s*[:=]\s*(.*)").expect("static regex")
});

static SELECTION_BODY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?ix)^[\s\[\(\*]*
          (?:bs|base\s*station)?\s*[\#\-_]?\s*(\d+)      # station id
          [\s\]\)]*(?:[,;:/|]|-\s)?\s*
          (?:bid(?:\s*value)?\s*[:=]?\s*)?
          [\[\(]?\s*[$]?\s*
          (-?\d+(?:\.\d*)?|-?\.\d+)                      # bid
        ",
    )
    .expect("static regex")
});

static EXPLANATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)explanation\s*:\s*(.*)").expect("static regex"));

/// Extracts the selection and explanation from a free-form reply.
pub fn parse_reply(text: &str, candidates: &[usize]) -> Result<ParsedLlmReply, ParseError> {
    let caps = SELECTION_LINE
        .captures(text)
        .ok_or(ParseError::MissingSelection)?;
    let body = caps.get(1).map_or("", |m| m.as_str()).trim();
    let fields = SELECTION_BODY
        .captures(body)
        .ok_or_else(|| ParseError::Malformed(body.to_string()))?;
    let selected_bs: usize = fields[1]
        .parse()
        .map_err(|_| ParseError::Malformed(body.to_string()))?;
    let bid_value: f64 = fields[2]
        .parse()
        .map_err(|_| ParseError::Malformed(body.to_string()))?;
    if !bid_value.is_finite() || bid_value < 0.0 {
        return Err(ParseError::InvalidBid(bid_value));
    }
    if !candidates.contains(&selected_bs) {
        return Err(ParseError::UnknownStation(selected_bs));
    }
    let explanation = EXPLANATION
        .captures(text)
        .and_then(|c| c.get(1))
        .map(|m| {
            m.as_str()
                .trim()
                .trim_matches(|c| c == '"' || c == '\u{201c}' || c == '\u{201d}')
                .trim()
                .to_string()
        })
        .unwrap_or_default();
    Ok(ParsedLlmReply {
        selected_bs,
        bid_value,
        explanation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fixture() -> PromptContext {
        PromptContext {
            budget: 12.345,
            entrance_fee: 0.1,
            rounds_elapsed: 3,
            rounds_remaining: 47,
            stations: vec![
                StationDigest {
                    bs_id: 0,
                    tier: Tier::Mbs,
                    valuation: 2.5,
                    demand: 2,
                    reserve: 1.0,
                    prices: Some(PriceDigest {
                        count: 3,
                        last: 1.25,
                        mean: 1.5,
                        min: 1.0,
                        max: 2.25,
                    }),
                },
                StationDigest {
                    bs_id: 1,
                    tier: Tier::Sbs,
                    valuation: 3.456,
                    demand: 1,
                    reserve: 0.1,
                    prices: None,
                },
            ],
        }
    }

    #[test]
    fn prompt_matches_golden() {
        let golden = include_str!("../../tests/golden/prompt_basic.txt");
        assert_eq!(render_prompt(&fixture()), golden);
    }

    #[test]
    fn prompt_is_deterministic() {
        assert_eq!(render_prompt(&fixture()), render_prompt(&fixture()));
    }

    #[test]
    fn equal_valuations_listed_in_id_order() {
        let mut ctx = fixture();
        ctx.stations[0].valuation = 3.0;
        ctx.stations[1].valuation = 3.0;
        let text = render_prompt(&ctx);
        let a = text.find("BS 0 (MBS): 3.00").unwrap();
        let b = text.find("BS 1 (SBS): 3.00").unwrap();
        assert!(a < b);
    }

    #[test]
    fn cold_start_history() {
        let text = render_prompt(&fixture());
        assert!(text.contains("BS 1: no observations yet"));
    }

    #[test]
    fn parses_reference_reply() {
        let r = parse_reply(
            "Selected BS and bid value: BS 2, 3.40\nExplanation: \"lower competition\"",
            &[0, 1, 2],
        )
        .unwrap();
        assert_eq!(
            r,
            ParsedLlmReply {
                selected_bs: 2,
                bid_value: 3.40,
                explanation: "lower competition".into()
            }
        );
    }

    #[test]
    fn tolerant_formats() {
        let ids = [0, 1, 2];
        for (text, bs, bid) in [
            ("selected bs and bid value:   bs2 ,  1.5", 2, 1.5),
            ("**Selected BS and bid value:** [BS 1], [0.75]", 1, 0.75),
            ("Selected BS and bid value: BS #0; bid 4", 0, 4.0),
            (
                "Some preamble.\nSelected BS and bid value: 1, $2.10\nExplanation: cheap",
                1,
                2.1,
            ),
            ("Selected BS and bid value: BS 1 - 2.5", 1, 2.5),
            ("Selected BS and bid value = BS 2, .5", 2, 0.5),
        ] {
            let r = parse_reply(text, &ids).unwrap_or_else(|e| panic!("{text}: {e}"));
            assert_eq!((r.selected_bs, r.bid_value), (bs, bid), "{text}");
        }
    }

    #[test]
    fn rejects_bad_replies() {
        let ids = [0, 1, 2];
        assert_eq!(
            parse_reply("I would pick the MBS.", &ids),
            Err(ParseError::MissingSelection)
        );
        assert_eq!(
            parse_reply("Selected BS and bid value: BS 1, -1", &ids),
            Err(ParseError::InvalidBid(-1.0))
        );
        assert!(matches!(
            parse_reply("Selected BS and bid value: BS one, lots", &ids),
            Err(ParseError::Malformed(_))
        ));
        assert_eq!(
            parse_reply("Selected BS and bid value: BS 7, 1.0", &ids),
            Err(ParseError::UnknownStation(7))
        );
    }

    #[test]
    fn first_selection_line_wins() {
        let r = parse_reply(
            "Selected BS and bid value: BS 0, 1.0\nSelected BS and bid value: BS 1, 2.0",
            &[0, 1],
        )
        .unwrap();
        assert_eq!(r.selected_bs, 0);
        assert_eq!(r.explanation, "");
    }
}
