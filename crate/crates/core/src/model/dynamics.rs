use super::intensity::IntensityModel;
use super::regen::RegenerationLaw;
use super::types::{AgentState, BookState, EventKind, MarketEvent, ModelConfig, Placement, Side};
use crate::error::{Error, Result};
use std::fmt;

/// Symmetric band of mid-price offsets `[-half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriceWindow {
    pub half_width: i32,
}

impl PriceWindow {
    pub fn new(half_width: u32) -> Self {
        PriceWindow { half_width: half_width as i32 }
    }

    /// Clamps to the window and reports whether clamping happened.
    pub fn clamp(&self, p: i64) -> (i32, bool) {
        let k = self.half_width as i64;
        let c = p.clamp(-k, k);
        (c as i32, c != p)
    }

    pub fn layers(&self) -> impl Iterator<Item = i32> {
        -self.half_width..=self.half_width
    }

    pub fn len(&self) -> usize {
        (2 * self.half_width + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Window wide enough for the price moves plausible over `horizon`:
/// largest jump times the expected number of queue events, at most 40.
pub fn default_price_window(model: &IntensityModel, regen: &RegenerationLaw, horizon: f64) -> PriceWindow {
    let jumps = (horizon * model.outflow_bound()).ceil().max(0.0);
    let k = (regen.max_price_move() as f64 * jumps).min(40.0);
    PriceWindow::new(k as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Control {
    Limit,
    Cancel,
    Market,
}

impl fmt::Display for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Control::Limit => "l",
            Control::Cancel => "c",
            Control::Market => "m",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<S> {
    pub state: S,
    pub prob: f64,
    pub clamped: bool,
}

/// State transition rules of the book with and without the agent.
#[derive(Debug, Clone)]
pub struct Dynamics<'a> {
    pub model: &'a IntensityModel,
    pub regen: &'a RegenerationLaw,
    pub window: PriceWindow,
    spread_ht: i64,
    alpha_ht: i64,
    qmax: u32,
}

impl<'a> Dynamics<'a> {
    pub fn new(
        model: &'a IntensityModel,
        regen: &'a RegenerationLaw,
        cfg: &ModelConfig,
        window: PriceWindow,
    ) -> Result<Self> {
        if model.qmax() != regen.qmax() {
            return Err(Error::Model(format!(
                "intensity qmax {} differs from regeneration qmax {}",
                model.qmax(),
                regen.qmax()
            )));
        }
        Ok(Dynamics {
            model,
            regen,
            window,
            spread_ht: cfg.spread_ticks(),
            alpha_ht: cfg.alpha_halfticks(),
            qmax: model.qmax(),
        })
    }

    /// Market-only dynamics; spread and impact are irrelevant there.
    pub fn market_only(model: &'a IntensityModel, regen: &'a RegenerationLaw, window: PriceWindow) -> Result<Self> {
        let cfg = ModelConfig {
            tick: 1.0,
            spread: 1.0,
            impact_alpha: 0.0,
            wait_cost: 0.0,
            order_size: 1,
            horizon: 0.0,
            decision_dt: 1.0,
            payoff: Default::default(),
            price_window: None,
        };
        Self::new(model, regen, &cfg, window)
    }

    pub fn qmax(&self) -> u32 {
        self.qmax
    }

    pub fn spread_halfticks(&self) -> i64 {
        self.spread_ht
    }

    pub fn events(&self, q1: u32, q2: u32, out: &mut Vec<MarketEvent>) {
        self.model.events(q1, q2, out)
    }

    fn shifted(&self, p: i32, dp: i32) -> (i32, bool) {
        self.window.clamp(p as i64 + dp as i64)
    }

    /// Outcomes of `ev` on the plain book.
    pub fn book_outcomes(&self, b: BookState, ev: &MarketEvent, out: &mut Vec<Transition<BookState>>) {
        out.clear();
        let n = ev.size;
        let own = if ev.side == Side::Bid { b.q1 } else { b.q2 };
        match ev.kind {
            EventKind::Limit => {
                if own + n <= self.qmax {
                    let s = match ev.side {
                        Side::Bid => BookState { q1: b.q1 + n, ..b },
                        Side::Ask => BookState { q2: b.q2 + n, ..b },
                    };
                    out.push(Transition { state: s, prob: 1.0, clamped: false });
                }
            }
            EventKind::Cancel | EventKind::Market => {
                if n >= own {
                    for o in self.regen.outcomes(ev.side, b.q1, b.q2) {
                        let (p, clamped) = self.shifted(b.p, o.dp);
                        out.push(Transition { state: BookState::new(o.q1, o.q2, p), prob: o.prob, clamped });
                    }
                } else {
                    let s = match ev.side {
                        Side::Bid => BookState { q1: b.q1 - n, ..b },
                        Side::Ask => BookState { q2: b.q2 - n, ..b },
                    };
                    out.push(Transition { state: s, prob: 1.0, clamped: false });
                }
            }
        }
    }

    /// Outcomes of `ev` for an active agent. Events that leave the state
    /// unchanged produce no outcome.
    pub fn agent_outcomes(&self, u: &AgentState, ev: &MarketEvent, out: &mut Vec<Transition<AgentState>>) {
        out.clear();
        let n = ev.size;
        let q1 = u.q1();
        let one = |s: AgentState| Transition { state: s.canonical(), prob: 1.0, clamped: false };
        match (ev.side, ev.kind) {
            (Side::Bid, EventKind::Limit) => {
                if q1 + n <= self.qmax {
                    let mut s = *u;
                    if s.is_posted() {
                        s.q_aft += n;
                    } else {
                        s.q_bef += n;
                    }
                    out.push(one(s));
                }
            }
            (Side::Ask, EventKind::Limit) => {
                if u.q2 + n <= self.qmax {
                    out.push(one(AgentState { q2: u.q2 + n, ..*u }));
                }
            }
            (Side::Bid, EventKind::Cancel) => {
                if !u.is_posted() {
                    if n >= q1 {
                        self.bid_regeneration(u, 0, out);
                    } else {
                        out.push(one(AgentState { q_bef: u.q_bef - n, ..*u }));
                    }
                } else {
                    // other participants cancel from the back of the queue first
                    let take = n.min(u.others_at_bid());
                    if take > 0 {
                        let from_aft = take.min(u.q_aft);
                        let s = AgentState { q_aft: u.q_aft - from_aft, q_bef: u.q_bef - (take - from_aft), ..*u };
                        out.push(one(s));
                    }
                }
            }
            (Side::Bid, EventKind::Market) => {
                if n >= q1 {
                    self.bid_regeneration(u, u.q_a, out);
                } else if !u.is_posted() {
                    out.push(one(AgentState { q_bef: u.q_bef - n, ..*u }));
                } else if n <= u.q_bef {
                    out.push(one(AgentState { q_bef: u.q_bef - n, ..*u }));
                } else {
                    let fill = (n - u.q_bef).min(u.q_a);
                    let rest = n - u.q_bef - fill;
                    let s = AgentState {
                        q_bef: 0,
                        q_a: u.q_a - fill,
                        q_aft: u.q_aft - rest,
                        inv: u.inv - fill,
                        p_exec: u.p_exec + fill as i64 * (2 * u.p as i64 - self.spread_ht),
                        ..*u
                    };
                    out.push(one(s));
                }
            }
            (Side::Ask, EventKind::Cancel | EventKind::Market) => {
                if n >= u.q2 {
                    self.ask_regeneration(u, out);
                } else {
                    out.push(one(AgentState { q2: u.q2 - n, ..*u }));
                }
            }
        }
    }

    /// The bid empties; `filled` units of the agent's resting order trade
    /// at the bid on the way.
    fn bid_regeneration(&self, u: &AgentState, filled: u32, out: &mut Vec<Transition<AgentState>>) {
        let q1 = u.q1();
        let inv = u.inv - filled;
        let p_exec = u.p_exec + filled as i64 * (2 * u.p as i64 - self.spread_ht);
        for o in self.regen.outcomes(Side::Bid, q1, u.q2) {
            let (p, clamped) = self.shifted(u.p, o.dp);
            out.push(Transition { state: AgentState::unposted(o.q1, o.q2, inv, p, p_exec), prob: o.prob, clamped });
        }
    }

    fn ask_regeneration(&self, u: &AgentState, out: &mut Vec<Transition<AgentState>>) {
        let q1 = u.q1();
        for o in self.regen.outcomes(Side::Ask, q1, u.q2) {
            let (p, clamped) = self.shifted(u.p, o.dp);
            if !u.is_posted() {
                out.push(Transition {
                    state: AgentState::unposted(o.q1, o.q2, u.inv, p, u.p_exec),
                    prob: o.prob,
                    clamped,
                });
                continue;
            }
            let others = o.q1.min(self.qmax - u.q_a);
            let clamped = clamped || others < o.q1;
            let posted = |bef: u32| AgentState::posted(bef, u.q_a, others - bef, o.q2, p, u.p_exec);
            match self.regen.placement() {
                Placement::Natural | Placement::Front => {
                    let bef = if o.dp == 0 {
                        u.q_bef.min(others)
                    } else if self.regen.placement() == Placement::Front {
                        0
                    } else {
                        others
                    };
                    out.push(Transition { state: posted(bef), prob: o.prob, clamped });
                }
                Placement::Uniform => {
                    let w = o.prob / (others + 1) as f64;
                    for bef in 0..=others {
                        out.push(Transition { state: posted(bef), prob: w, clamped });
                    }
                }
            }
        }
    }

    pub fn limit_admissible(&self, u: &AgentState) -> bool {
        !u.is_posted() && u.inv > 0 && u.q1() + u.inv <= self.qmax
    }

    pub fn control_admissible(&self, u: &AgentState, c: Control) -> bool {
        match c {
            Control::Limit => self.limit_admissible(u),
            Control::Cancel => u.is_posted(),
            Control::Market => u.inv > 0,
        }
    }

    /// Distribution of the state right after applying control `c`.
    pub fn control_outcomes(&self, u: &AgentState, c: Control, out: &mut Vec<Transition<AgentState>>) -> Result<()> {
        out.clear();
        if !self.control_admissible(u, c) {
            return Err(Error::IllegalControl { control: c.to_string(), state: u.to_string() });
        }
        match c {
            Control::Limit => {
                out.push(Transition {
                    state: AgentState::posted(u.q_bef, u.inv, 0, u.q2, u.p, u.p_exec),
                    prob: 1.0,
                    clamped: false,
                });
            }
            Control::Cancel => self.withdraw(u, out),
            Control::Market => {
                let mut withdrawn = Vec::new();
                if u.is_posted() {
                    self.withdraw(u, &mut withdrawn);
                } else {
                    withdrawn.push(Transition { state: *u, prob: 1.0, clamped: false });
                }
                for w in withdrawn {
                    let mut buf = Vec::new();
                    self.market_buy(&w.state, &mut buf);
                    for t in buf {
                        out.push(Transition { state: t.state, prob: w.prob * t.prob, clamped: w.clamped || t.clamped });
                    }
                }
            }
        }
        Ok(())
    }

    fn withdraw(&self, u: &AgentState, out: &mut Vec<Transition<AgentState>>) {
        let others = u.others_at_bid();
        if others > 0 {
            out.push(Transition {
                state: AgentState::unposted(others, u.q2, u.inv, u.p, u.p_exec),
                prob: 1.0,
                clamped: false,
            });
        } else {
            // the agent was alone at the bid, so pulling the order empties it
            for o in self.regen.outcomes(Side::Bid, u.q_a, u.q2) {
                let (p, clamped) = self.shifted(u.p, o.dp);
                out.push(Transition {
                    state: AgentState::unposted(o.q1, o.q2, u.inv, p, u.p_exec),
                    prob: o.prob,
                    clamped,
                });
            }
        }
    }

    /// Buys the whole inventory at the ask of an unposted state.
    fn market_buy(&self, u: &AgentState, out: &mut Vec<Transition<AgentState>>) {
        let i = u.inv as i64;
        let excess = (u.inv as i64 - u.q2 as i64).max(0);
        let cost = i * (2 * u.p as i64 + self.spread_ht) + i * excess * self.alpha_ht;
        let p_exec = u.p_exec + cost;
        if u.inv >= u.q2 {
            for o in self.regen.outcomes(Side::Ask, u.q_bef, u.q2) {
                let (p, clamped) = self.shifted(u.p, o.dp);
                out.push(Transition { state: AgentState::unposted(o.q1, o.q2, 0, p, p_exec), prob: o.prob, clamped });
            }
        } else {
            out.push(Transition {
                state: AgentState::unposted(u.q_bef, u.q2 - u.inv, 0, u.p, p_exec),
                prob: 1.0,
                clamped: false,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig {
            tick: 0.01,
            spread: 0.01,
            impact_alpha: 0.0,
            wait_cost: 0.0,
            order_size: 1,
            horizon: 10.0,
            decision_dt: 1.0,
            payoff: Default::default(),
            price_window: None,
        }
    }

    fn setup() -> (IntensityModel, RegenerationLaw) {
        (
            IntensityModel::constant(11, 0.06, 0.12, 0.5).unwrap(),
            RegenerationLaw::point(11, 5, 3, -1).unwrap(),
        )
    }

    fn ev(side: Side, kind: EventKind, size: u32) -> MarketEvent {
        MarketEvent { side, kind, size, rate: 1.0 }
    }

    #[test]
    fn market_order_fills_agent_after_queue_ahead() {
        let (m, r) = setup();
        let d = Dynamics::new(&m, &r, &cfg(), PriceWindow::new(2)).unwrap();
        let mut out = Vec::new();
        let u = AgentState::posted(0, 1, 2, 4, 0, 0);
        d.agent_outcomes(&u, &ev(Side::Bid, EventKind::Market, 1), &mut out);
        assert_eq!(out.len(), 1);
        let s = out[0].state;
        assert!(s.is_executed());
        assert_eq!((s.q_bef, s.q_aft, s.p_exec), (2, 0, -1));
        let u = AgentState::posted(1, 1, 2, 4, 0, 0);
        d.agent_outcomes(&u, &ev(Side::Bid, EventKind::Market, 1), &mut out);
        assert_eq!(out[0].state, AgentState::posted(0, 1, 2, 4, 0, 0));
    }

    #[test]
    fn cancellations_hit_the_back_of_the_queue() {
        let (m, r) = setup();
        let d = Dynamics::new(&m, &r, &cfg(), PriceWindow::new(2)).unwrap();
        let mut out = Vec::new();
        let u = AgentState::posted(2, 1, 1, 4, 0, 0);
        d.agent_outcomes(&u, &ev(Side::Bid, EventKind::Cancel, 1), &mut out);
        assert_eq!(out[0].state, AgentState::posted(2, 1, 0, 4, 0, 0));
        let u = AgentState::posted(0, 1, 0, 4, 0, 0);
        d.agent_outcomes(&u, &ev(Side::Bid, EventKind::Cancel, 1), &mut out);
        assert!(out.is_empty());
    }

    #[test]
    fn bid_depletion_fills_and_moves_price_down() {
        let (m, r) = setup();
        let d = Dynamics::new(&m, &r, &cfg(), PriceWindow::new(2)).unwrap();
        let mut out = Vec::new();
        let u = AgentState::posted(0, 1, 0, 4, 0, 0);
        d.agent_outcomes(&u, &ev(Side::Bid, EventKind::Market, 1), &mut out);
        assert_eq!(out[0].state, AgentState::unposted(5, 3, 0, -1, -1));
    }

    #[test]
    fn ask_depletion_puts_agent_at_front_of_new_bid() {
        let (m, r) = setup();
        let d = Dynamics::new(&m, &r, &cfg(), PriceWindow::new(2)).unwrap();
        let mut out = Vec::new();
        let u = AgentState::posted(2, 1, 1, 1, 0, 0);
        d.agent_outcomes(&u, &ev(Side::Ask, EventKind::Cancel, 1), &mut out);
        assert_eq!(out[0].state, AgentState::posted(3, 1, 0, 5, 1, 0));
    }

    #[test]
    fn controls_follow_admissibility() {
        let (m, r) = setup();
        let d = Dynamics::new(&m, &r, &cfg(), PriceWindow::new(2)).unwrap();
        let mut out = Vec::new();
        let full = AgentState::unposted(11, 3, 1, 0, 0);
        assert!(d.control_outcomes(&full, Control::Limit, &mut out).is_err());
        assert!(d.control_outcomes(&full, Control::Cancel, &mut out).is_err());
        let u = AgentState::unposted(4, 3, 1, 0, 0);
        d.control_outcomes(&u, Control::Limit, &mut out).unwrap();
        assert_eq!(out[0].state, AgentState::posted(4, 1, 0, 3, 0, 0));
        // pulling a lone order empties the bid first, so the buy happens a tick lower
        let u = AgentState::posted(0, 1, 0, 1, 0, 0);
        d.control_outcomes(&u, Control::Market, &mut out).unwrap();
        let total: f64 = out.iter().map(|t| t.prob).sum();
        assert!((total - 1.0).abs() < 1e-15);
        for t in &out {
            assert!(t.state.is_executed());
            // bought at -1 + spread/2, in half-ticks, out of the regenerated ask of 3
            assert_eq!(t.state.p_exec, -1);
            assert_eq!(t.state.book(), BookState::new(5, 2, -1));
        }
    }

    #[test]
    fn clamping_is_reported() {
        let (m, r) = setup();
        let d = Dynamics::new(&m, &r, &cfg(), PriceWindow::new(1)).unwrap();
        let mut out = Vec::new();
        let b = BookState::new(1, 4, -1);
        d.book_outcomes(b, &ev(Side::Bid, EventKind::Cancel, 1), &mut out);
        assert_eq!(out[0].state, BookState::new(5, 3, -1));
        assert!(out[0].clamped);
    }
}
