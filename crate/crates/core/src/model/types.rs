use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Bid => "bid",
            Side::Ask => "ask",
        })
    }
}

/// Best-limit sizes and mid price offset in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BookState {
    pub q1: u32,
    pub q2: u32,
    pub p: i32,
}

impl BookState {
    pub fn new(q1: u32, q2: u32, p: i32) -> Self {
        BookState { q1, q2, p }
    }

    /// The book seen from the other side: queues swapped, price negated.
    pub fn mirrored(self) -> Self {
        BookState { q1: self.q2, q2: self.q1, p: -self.p }
    }

    pub fn imbalance(self) -> f64 {
        imbalance(self.q1, self.q2)
    }
}

pub fn imbalance(q1: u32, q2: u32) -> f64 {
    let (a, b) = (q1 as f64, q2 as f64);
    if a + b == 0.0 {
        0.0
    } else {
        (a - b) / (a + b)
    }
}

/// Book plus the agent's buy order, split into the volume queued ahead
/// (`q_bef`), the agent's resting volume (`q_a`) and the volume behind it
/// (`q_aft`). `p_exec` is accumulated spending in half-ticks.
///
/// When the agent is not posted the whole bid is kept in `q_bef` and
/// `q_aft` is zero, so every book configuration has one representative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentState {
    pub q_bef: u32,
    pub q_a: u32,
    pub q_aft: u32,
    pub q2: u32,
    pub inv: u32,
    pub p: i32,
    pub p_exec: i64,
}

impl AgentState {
    pub fn unposted(q1: u32, q2: u32, inv: u32, p: i32, p_exec: i64) -> Self {
        AgentState { q_bef: q1, q_a: 0, q_aft: 0, q2, inv, p, p_exec }
    }

    /// Agent resting its whole remaining inventory at the bid.
    pub fn posted(q_bef: u32, inv: u32, q_aft: u32, q2: u32, p: i32, p_exec: i64) -> Self {
        AgentState { q_bef, q_a: inv, q_aft, q2, inv, p, p_exec }
    }

    pub fn q1(&self) -> u32 {
        self.q_bef + self.q_a + self.q_aft
    }

    pub fn others_at_bid(&self) -> u32 {
        self.q_bef + self.q_aft
    }

    pub fn is_posted(&self) -> bool {
        self.q_a > 0
    }

    pub fn is_executed(&self) -> bool {
        self.inv == 0
    }

    pub fn book(&self) -> BookState {
        BookState { q1: self.q1(), q2: self.q2, p: self.p }
    }

    pub fn canonical(mut self) -> Self {
        if self.q_a == 0 {
            self.q_bef += self.q_aft;
            self.q_aft = 0;
        }
        self
    }

    pub fn check(&self, qmax: u32) -> Result<(), String> {
        let q1 = self.q1();
        if q1 == 0 || q1 > qmax || self.q2 == 0 || self.q2 > qmax {
            return Err(format!("queue sizes out of [1, {qmax}] in {self}"));
        }
        if self.q_a > self.inv {
            return Err(format!("posted volume exceeds inventory in {self}"));
        }
        if self.q_a > 0 && self.q_a != self.inv {
            return Err(format!("partially posted inventory in {self}"));
        }
        if self.q_a == 0 && self.q_aft != 0 {
            return Err(format!("non-canonical unposted state {self}"));
        }
        Ok(())
    }
}

impl fmt::Display for AgentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(q_bef={}, q_a={}, q_aft={}, q2={}, inv={}, p={}, p_exec={})",
            self.q_bef, self.q_a, self.q_aft, self.q2, self.inv, self.p, self.p_exec
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Limit,
    Cancel,
    Market,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Limit => "limit",
            EventKind::Cancel => "cancel",
            EventKind::Market => "market",
        })
    }
}

/// An elementary market event available from a book state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketEvent {
    pub side: Side,
    pub kind: EventKind,
    pub size: u32,
    pub rate: f64,
}

/// Terminal utility applied to the liquidation cash value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Payoff {
    #[default]
    Identity,
    Clipped { lower: f64, upper: f64 },
}

impl Payoff {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Payoff::Identity => x,
            Payoff::Clipped { lower, upper } => x.clamp(lower, upper),
        }
    }
}

/// Where the agent's order lands in a regenerated bid queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Back of the new queue after a price move, original priority kept
    /// otherwise.
    #[default]
    Natural,
    /// Front of the new queue after a price move.
    Front,
    /// Uniform over all positions in the new queue.
    Uniform,
}

/// Scalar parameters of an execution problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub tick: f64,
    pub spread: f64,
    pub impact_alpha: f64,
    pub wait_cost: f64,
    pub order_size: u32,
    pub horizon: f64,
    pub decision_dt: f64,
    pub payoff: Payoff,
    pub price_window: Option<u32>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            tick: 0.01,
            spread: 0.01,
            impact_alpha: 0.0,
            wait_cost: 0.0,
            order_size: 1,
            horizon: 10.0,
            decision_dt: 1.0,
            payoff: Payoff::Identity,
            price_window: None,
        }
    }
}

impl ModelConfig {
    /// Spread in ticks; also the half-spread in half-ticks.
    pub fn spread_ticks(&self) -> i64 {
        (self.spread / self.tick).round() as i64
    }

    /// Market-order impact per unit of excess size, in half-ticks.
    pub fn alpha_halfticks(&self) -> i64 {
        (2.0 * self.impact_alpha / self.tick).round() as i64
    }

    pub fn validate(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut bad = |k: &str, m: String| out.push((k.to_string(), m));
        if !(self.tick > 0.0 && self.tick.is_finite()) {
            bad("tick", "must be positive".into());
        } else {
            if !(self.spread > 0.0) || !is_multiple(self.spread, self.tick) {
                bad("spread", format!("must be a positive multiple of the tick {}", self.tick));
            }
            if self.impact_alpha < 0.0 || !is_multiple(2.0 * self.impact_alpha, self.tick) {
                bad("impact_alpha", "must be a non-negative multiple of half a tick".into());
            }
        }
        if !(self.wait_cost >= 0.0 && self.wait_cost.is_finite()) {
            bad("wait_cost", "must be non-negative".into());
        }
        if self.order_size == 0 {
            bad("order_size", "must be at least 1".into());
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            bad("horizon", "must be non-negative".into());
        }
        if !(self.decision_dt > 0.0 && self.decision_dt.is_finite()) {
            bad("decision_dt", "must be positive".into());
        }
        if let Payoff::Clipped { lower, upper } = self.payoff {
            if !(lower < upper) {
                bad("payoff", "clipped payoff needs lower < upper".into());
            }
        }
        out
    }
}

fn is_multiple(x: f64, unit: f64) -> bool {
    let r = x / unit;
    (r - r.round()).abs() < 1e-9 * r.abs().max(1.0)
}
