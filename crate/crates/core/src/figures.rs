//! Reproduction recipes for the two execution experiments: value and
//! initial decision along a sweep of imbalances, and the gain of the
//! optimal tactic over joining the bid across initial books.

use crate::config::Setup;
use crate::dp::{Decision, ExecutionProblem, PayoffModel, PolicyRule, Regime, ValueSurface};
use crate::error::{Error, Result};
use crate::impact::{solve_impact, ImpactSolution};
use crate::model::{
    build_controlled_generator, default_price_window, imbalance, AgentState, ControlledGenerator, Dynamics,
    PriceWindow,
};
use serde::Serialize;
use std::io::Write;

/// Generator, impact and payoff for one setup.
pub struct Pipeline {
    pub setup: Setup,
    pub window: PriceWindow,
    pub gen: ControlledGenerator,
    pub impact: ImpactSolution,
    pub payoff: Vec<f64>,
}

impl Pipeline {
    pub fn new(setup: Setup) -> Result<Pipeline> {
        let window = match setup.cfg.price_window {
            Some(k) => PriceWindow::new(k),
            None => default_price_window(&setup.model, &setup.regen, setup.cfg.horizon),
        };
        let gen = build_controlled_generator(&setup.model, &setup.regen, &setup.cfg, window)?;
        let impact = solve_impact(&setup.model, &setup.regen)?;
        let payoff = PayoffModel::new(&impact, &setup.cfg).over(&gen);
        Ok(Pipeline { setup, window, gen, impact, payoff })
    }

    pub fn problem(&self) -> Result<ExecutionProblem<'_>> {
        ExecutionProblem::new(&self.gen, &self.payoff, &self.setup.cfg)
    }

    pub fn dynamics(&self) -> Result<Dynamics<'_>> {
        Dynamics::new(&self.setup.model, &self.setup.regen, &self.setup.cfg, self.window)
    }

    pub fn index(&self, u: &AgentState) -> Result<usize> {
        self.gen.index_of(u).ok_or_else(|| Error::Model(format!("state {u} is not in the generator")))
    }

    pub fn initial_state(&self, q1: u32, q2: u32) -> Option<AgentState> {
        let s = &self.setup;
        s.scenario.initial_state(q1, q2, s.cfg.order_size, s.model.qmax())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub q1: u32,
    pub q2: u32,
    pub imbalance: f64,
    pub q_bef: u32,
    pub optimal: f64,
    pub join_bid: f64,
    pub decision: Decision,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeCheck {
    pub cancel_at_negative: bool,
    pub market_in_middle: bool,
    pub passive_at_positive: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub regime: Regime,
    pub states: usize,
    pub clamped_transitions: usize,
    pub rows: Vec<SweepRow>,
    /// Smallest `optimal - join_bid` over the rows.
    pub min_gap: f64,
    pub regimes: RegimeCheck,
    /// Decision letters ordered by imbalance.
    pub decision_map: String,
}

/// Books `(Q1, Q2)` with `Q1 = qmax` and every `Q2`, plus `Q2 = qmax` and
/// `Q1 < qmax`, sorted by increasing imbalance.
pub fn imbalance_sweep(qmax: u32) -> Vec<(u32, u32)> {
    let mut v: Vec<(u32, u32)> = (1..qmax).map(|q1| (q1, qmax)).chain((1..=qmax).rev().map(|q2| (qmax, q2))).collect();
    v.sort_by(|a, b| imbalance(a.0, a.1).total_cmp(&imbalance(b.0, b.1)));
    v
}

pub fn decision_letter(d: Decision) -> char {
    match d {
        Decision::Stay => 's',
        Decision::Limit => 'l',
        Decision::Cancel => 'c',
        Decision::Market => 'm',
    }
}

/// Imbalance thirds: cancel somewhere below -1/3, market somewhere in
/// `[-1/3, 1/3]`, a resting decision somewhere above 1/3.
pub fn regime_check(rows: &[SweepRow]) -> RegimeCheck {
    let third = 1.0 / 3.0;
    let any = |lo: f64, hi: f64, f: &dyn Fn(Decision) -> bool| {
        rows.iter().any(|r| r.imbalance >= lo && r.imbalance <= hi && f(r.decision))
    };
    let cancel_at_negative = any(-1.0, -third - 1e-12, &|d| d == Decision::Cancel);
    let market_in_middle = any(-third, third, &|d| d == Decision::Market);
    let passive_at_positive = any(third + 1e-12, 1.0, &|d| matches!(d, Decision::Stay | Decision::Limit));
    RegimeCheck {
        cancel_at_negative,
        market_in_middle,
        passive_at_positive,
        pass: cancel_at_negative && market_in_middle && passive_at_positive,
    }
}

fn values(p: &Pipeline, regime: Regime, explicit_stay: bool) -> Result<(ValueSurface, ValueSurface, crate::dp::Policy)> {
    let prob = p.problem()?;
    let (opt, policy) = prob.solve(regime, explicit_stay)?;
    let join = prob.evaluate(regime, PolicyRule::JoinBid)?;
    Ok((opt, join, policy))
}

/// Optimal and join-the-bid values with the initial decision along the
/// imbalance sweep.
pub fn run_sweep(p: &Pipeline, regime: Regime, explicit_stay: bool) -> Result<SweepReport> {
    let (opt, join, policy) = values(p, regime, explicit_stay)?;
    let mut rows = Vec::new();
    for (q1, q2) in imbalance_sweep(p.setup.model.qmax()) {
        let Some(u) = p.initial_state(q1, q2) else { continue };
        let i = p.index(&u)?;
        rows.push(SweepRow {
            q1,
            q2,
            imbalance: imbalance(q1, q2),
            q_bef: u.q_bef,
            optimal: opt.initial()[i],
            join_bid: join.initial()[i],
            decision: policy.decisions[0][i].expect("initial states are active"),
        });
    }
    let min_gap = rows.iter().map(|r| r.optimal - r.join_bid).fold(f64::INFINITY, f64::min);
    Ok(SweepReport {
        regime,
        states: p.gen.len(),
        clamped_transitions: p.gen.clamped_transitions,
        regimes: regime_check(&rows),
        decision_map: rows.iter().map(|r| decision_letter(r.decision)).collect(),
        rows,
        min_gap,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceRow {
    pub q1: u32,
    pub q2: u32,
    pub optimal: f64,
    pub join_bid: f64,
    /// `optimal - join_bid` in ticks.
    pub gain_ticks: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceReport {
    pub rows: Vec<SurfaceRow>,
    pub min_gain_ticks: f64,
    pub max_gain_ticks: f64,
    pub argmax: (u32, u32),
    pub nonnegative: bool,
}

/// Gain of the optimal tactic over joining the bid for every initial book.
pub fn run_surface(p: &Pipeline, regime: Regime) -> Result<SurfaceReport> {
    let (opt, join, _) = values(p, regime, true)?;
    let q = p.setup.model.qmax();
    let tick = p.setup.cfg.tick;
    let mut rows = Vec::new();
    for q1 in 1..=q {
        for q2 in 1..=q {
            let Some(u) = p.initial_state(q1, q2) else { continue };
            let i = p.index(&u)?;
            let (a, b) = (opt.initial()[i], join.initial()[i]);
            rows.push(SurfaceRow { q1, q2, optimal: a, join_bid: b, gain_ticks: (a - b) / tick });
        }
    }
    let min = rows.iter().map(|r| r.gain_ticks).fold(f64::INFINITY, f64::min);
    let best = rows.iter().max_by(|a, b| a.gain_ticks.total_cmp(&b.gain_ticks)).expect("non-empty surface");
    Ok(SurfaceReport {
        min_gain_ticks: min,
        max_gain_ticks: best.gain_ticks,
        argmax: (best.q1, best.q2),
        nonnegative: min * tick >= -1e-10,
        rows,
    })
}

pub fn write_sweep_csv<W: Write>(w: W, r: &SweepReport, tick: f64) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["q1", "q2", "imbalance", "q_bef", "optimal", "join_bid", "optimal_ticks", "join_bid_ticks", "decision"])?;
    for row in &r.rows {
        wtr.write_record([
            row.q1.to_string(),
            row.q2.to_string(),
            format!("{:.6}", row.imbalance),
            row.q_bef.to_string(),
            format!("{:.12e}", row.optimal),
            format!("{:.12e}", row.join_bid),
            format!("{:.9}", row.optimal / tick),
            format!("{:.9}", row.join_bid / tick),
            row.decision.label().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_surface_csv<W: Write>(w: W, r: &SurfaceReport) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["q1", "q2", "optimal", "join_bid", "gain_ticks"])?;
    for row in &r.rows {
        wtr.write_record([
            row.q1.to_string(),
            row.q2.to_string(),
            format!("{:.12e}", row.optimal),
            format!("{:.12e}", row.join_bid),
            format!("{:.9}", row.gain_ticks),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_has_21_books_for_qmax_11() {
        let s = imbalance_sweep(11);
        assert_eq!(s.len(), 21);
        assert_eq!(s[0], (1, 11));
        assert_eq!(s[10], (11, 11));
        assert_eq!(s[20], (11, 1));
    }

    #[test]
    fn regime_predicate() {
        let row = |q1, q2, d| SweepRow {
            q1,
            q2,
            imbalance: imbalance(q1, q2),
            q_bef: 0,
            optimal: 0.0,
            join_bid: 0.0,
            decision: d,
        };
        let rows = vec![row(1, 11, Decision::Cancel), row(11, 11, Decision::Market), row(11, 1, Decision::Stay)];
        assert!(regime_check(&rows).pass);
        let rows = vec![row(1, 11, Decision::Cancel), row(11, 11, Decision::Stay), row(11, 1, Decision::Market)];
        let r = regime_check(&rows);
        assert!(!r.pass && r.cancel_at_negative && !r.market_in_middle && !r.passive_at_positive);
    }
}
