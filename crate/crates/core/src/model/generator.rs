use super::dynamics::{Control, Dynamics, PriceWindow, Transition};
use super::intensity::IntensityModel;
use super::regen::RegenerationLaw;
use super::types::{AgentState, BookState, ModelConfig};
use crate::error::{Error, Result};
use crate::linalg::GeneratorMatrix;
use std::collections::HashMap;

const LARGE_STATE_SPACE: usize = 1_000_000;
pub const DEFAULT_STATE_LIMIT: usize = 5_000_000;

/// Generator of the book without the agent over `[1, qmax]^2` times the
/// price window.
#[derive(Debug, Clone)]
pub struct MarketGenerator {
    pub states: Vec<BookState>,
    pub matrix: GeneratorMatrix,
    pub window: PriceWindow,
    pub clamped_transitions: usize,
    index: HashMap<BookState, usize>,
}

impl MarketGenerator {
    pub fn index_of(&self, b: &BookState) -> Option<usize> {
        self.index.get(b).copied()
    }
}

pub fn build_market_generator(
    model: &IntensityModel,
    regen: &RegenerationLaw,
    window: PriceWindow,
) -> Result<MarketGenerator> {
    let dyns = Dynamics::market_only(model, regen, window)?;
    let qmax = model.qmax();
    let mut states = Vec::new();
    for p in window.layers() {
        for q1 in 1..=qmax {
            for q2 in 1..=qmax {
                states.push(BookState::new(q1, q2, p));
            }
        }
    }
    if states.len() > LARGE_STATE_SPACE {
        log::warn!("market generator has {} states", states.len());
    }
    let index: HashMap<BookState, usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut clamped = 0;
    let mut events = Vec::new();
    let mut outs = Vec::new();
    let mut rows = Vec::with_capacity(states.len());
    for s in &states {
        let mut row = Vec::new();
        dyns.events(s.q1, s.q2, &mut events);
        for ev in &events {
            dyns.book_outcomes(*s, ev, &mut outs);
            for t in &outs {
                clamped += t.clamped as usize;
                row.push((index[&t.state], ev.rate * t.prob));
            }
        }
        rows.push(row);
    }
    Ok(MarketGenerator { matrix: GeneratorMatrix::from_rows(rows), states, window, clamped_transitions: clamped, index })
}

/// Reachable agent states, the controlled generator among them, and the
/// post-control distributions of every active state.
#[derive(Debug, Clone)]
pub struct ControlledGenerator {
    pub states: Vec<AgentState>,
    pub matrix: GeneratorMatrix,
    pub window: PriceWindow,
    pub clamped_transitions: usize,
    /// Destination of `l`, if admissible.
    pub limit: Vec<Option<usize>>,
    /// Distribution after `c`; empty if not admissible.
    pub cancel: Vec<Vec<(usize, f64)>>,
    /// Distribution after `m` over executed states; empty for executed.
    pub market: Vec<Vec<(usize, f64)>>,
    index: HashMap<AgentState, usize>,
}

impl ControlledGenerator {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, u: &AgentState) -> Option<usize> {
        self.index.get(&u.canonical()).copied()
    }

    pub fn is_active(&self, i: usize) -> bool {
        !self.states[i].is_executed()
    }

    pub fn active_count(&self) -> usize {
        self.states.iter().filter(|s| !s.is_executed()).count()
    }
}

/// Every active state with full inventory and no spending: each book
/// state and price, unposted or posted at any queue position.
pub fn initial_states(qmax: u32, inv: u32, window: PriceWindow) -> Vec<AgentState> {
    let mut out = Vec::new();
    for p in window.layers() {
        for q2 in 1..=qmax {
            for q1 in 1..=qmax {
                out.push(AgentState::unposted(q1, q2, inv, p, 0));
                if q1 >= inv {
                    for bef in 0..=(q1 - inv) {
                        out.push(AgentState::posted(bef, inv, q1 - inv - bef, q2, p, 0));
                    }
                }
            }
        }
    }
    out
}

pub fn build_controlled_generator(
    model: &IntensityModel,
    regen: &RegenerationLaw,
    cfg: &ModelConfig,
    window: PriceWindow,
) -> Result<ControlledGenerator> {
    build_controlled_generator_with_limit(model, regen, cfg, window, DEFAULT_STATE_LIMIT)
}

pub fn build_controlled_generator_with_limit(
    model: &IntensityModel,
    regen: &RegenerationLaw,
    cfg: &ModelConfig,
    window: PriceWindow,
    limit: usize,
) -> Result<ControlledGenerator> {
    let issues = cfg.validate();
    if let Some((k, m)) = issues.first() {
        return Err(Error::Model(format!("{k}: {m}")));
    }
    if cfg.order_size > model.qmax() {
        return Err(Error::Model(format!("order size {} exceeds qmax {}", cfg.order_size, model.qmax())));
    }
    let dyns = Dynamics::new(model, regen, cfg, window)?;
    let mut states: Vec<AgentState> = Vec::new();
    let mut index: HashMap<AgentState, usize> = HashMap::new();
    let intern = |s: AgentState, states: &mut Vec<AgentState>, index: &mut HashMap<AgentState, usize>| -> Result<usize> {
        if let Some(&i) = index.get(&s) {
            return Ok(i);
        }
        if states.len() >= limit {
            return Err(Error::StateSpaceOverflow { limit });
        }
        states.push(s);
        index.insert(s, states.len() - 1);
        Ok(states.len() - 1)
    };
    for s in initial_states(model.qmax(), cfg.order_size, window) {
        intern(s, &mut states, &mut index)?;
    }

    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut limit_dest = Vec::new();
    let mut cancel = Vec::new();
    let mut market = Vec::new();
    let mut clamped = 0usize;
    let mut events = Vec::new();
    let mut outs: Vec<Transition<AgentState>> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let u = states[i];
        let mut row = Vec::new();
        let (mut l, mut c, mut m) = (None, Vec::new(), Vec::new());
        if !u.is_executed() {
            dyns.events(u.q1(), u.q2, &mut events);
            for ev in &events {
                dyns.agent_outcomes(&u, ev, &mut outs);
                for t in &outs {
                    clamped += t.clamped as usize;
                    row.push((intern(t.state, &mut states, &mut index)?, ev.rate * t.prob));
                }
            }
            if dyns.control_admissible(&u, Control::Limit) {
                dyns.control_outcomes(&u, Control::Limit, &mut outs)?;
                l = Some(intern(outs[0].state, &mut states, &mut index)?);
            }
            if dyns.control_admissible(&u, Control::Cancel) {
                dyns.control_outcomes(&u, Control::Cancel, &mut outs)?;
                for t in &outs {
                    c.push((intern(t.state, &mut states, &mut index)?, t.prob));
                }
            }
            dyns.control_outcomes(&u, Control::Market, &mut outs)?;
            for t in &outs {
                m.push((intern(t.state, &mut states, &mut index)?, t.prob));
            }
        }
        rows.push(row);
        limit_dest.push(l);
        cancel.push(c);
        market.push(m);
        i += 1;
    }
    if states.len() > LARGE_STATE_SPACE {
        log::warn!("controlled generator has {} states", states.len());
    }
    if clamped > 0 {
        log::info!("{clamped} transitions clamped to the price window +/-{}", window.half_width);
    }
    Ok(ControlledGenerator {
        matrix: GeneratorMatrix::from_rows(rows),
        states,
        window,
        clamped_transitions: clamped,
        limit: limit_dest,
        cancel,
        market,
        index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Side;

    #[test]
    fn two_by_two_market_generator_by_hand() {
        let model = IntensityModel::constant(2, 1.0, 2.0, 0.5).unwrap();
        let regen = RegenerationLaw::point(2, 2, 1, 0).unwrap();
        let g = build_market_generator(&model, &regen, PriceWindow::new(0)).unwrap();
        let at = |a: (u32, u32), b: (u32, u32)| {
            g.matrix.get(
                g.index_of(&BookState::new(a.0, a.1, 0)).unwrap(),
                g.index_of(&BookState::new(b.0, b.1, 0)).unwrap(),
            )
        };
        // (1,1): bid +1, ask +1, bid depletion -> (2,1), ask depletion -> (1,2)
        assert_eq!(at((1, 1), (2, 1)), 1.0 + 2.0);
        assert_eq!(at((1, 1), (1, 2)), 1.0 + 2.0);
        assert_eq!(at((1, 1), (1, 1)), -6.0);
        // (2,2): no insertions, each side shrinks at 2
        assert_eq!(at((2, 2), (1, 2)), 2.0);
        assert_eq!(at((2, 2), (2, 1)), 2.0);
        assert_eq!(at((2, 2), (2, 2)), -4.0);
        // (2,1): bid -1 to (1,1), ask +1 to (2,2), ask depletes back to (1,2)
        assert_eq!(at((2, 1), (1, 1)), 2.0);
        assert_eq!(at((2, 1), (2, 2)), 1.0);
        assert_eq!(at((2, 1), (1, 2)), 2.0);
        assert_eq!(g.matrix.max_row_sum_defect(), 0.0);
    }

    #[test]
    fn zero_intensity_gives_zero_generator() {
        let model = IntensityModel::constant(3, 0.0, 0.0, 0.5).unwrap();
        let regen = RegenerationLaw::point(3, 1, 1, 1).unwrap();
        let g = build_market_generator(&model, &regen, PriceWindow::new(1)).unwrap();
        assert_eq!(g.matrix.nnz(), 0);
        assert!((0..g.matrix.dim()).all(|i| g.matrix.diag(i) == 0.0));
    }

    #[test]
    fn price_moves_follow_regeneration() {
        let model = IntensityModel::constant(3, 0.5, 0.5, 0.5).unwrap();
        let regen = RegenerationLaw::point(3, 2, 1, -1).unwrap();
        let g = build_market_generator(&model, &regen, PriceWindow::new(1)).unwrap();
        let from = g.index_of(&BookState::new(1, 3, 0)).unwrap();
        let to = g.index_of(&BookState::new(2, 1, -1)).unwrap();
        assert_eq!(g.matrix.get(from, to), model.depletion_rate(Side::Bid, 1, 3));
        assert!(g.clamped_transitions > 0);
    }
}
