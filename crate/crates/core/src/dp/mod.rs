//! Backward induction for the limit / cancel / market choice.
//!
//! Two regimes are supported: decisions on a fixed grid with the book
//! evolving in continuous time in between, and the discrete approximation
//! of a control that may act at any time, with a one-step kernel either
//! exact (`e^{dt Q}`) or first order (`I + dt Q`).

mod payoff;
mod policy_io;

pub use payoff::PayoffModel;
pub use policy_io::{read_policy_csv, write_policy_csv, write_value_csv, PolicyRow};

use crate::error::{Error, Result};
use crate::linalg::Uniformizer;
use crate::model::{AgentState, ControlledGenerator, ModelConfig};
use serde::{Deserialize, Serialize};
use std::fmt;

const UNIFORMIZATION_TOL: f64 = 1e-13;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKernel {
    Exponential,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Decisions every `dt`, waiting cost accrued in continuous time.
    FixedFrequency,
    /// Discretized any-time control, cost charged per step.
    AnyTime(StepKernel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Decision {
    Stay,
    Limit,
    Cancel,
    Market,
}

impl Decision {
    pub fn label(self) -> &'static str {
        match self {
            Decision::Stay => "stay",
            Decision::Limit => "l",
            Decision::Cancel => "c",
            Decision::Market => "m",
        }
    }

    pub fn parse(s: &str) -> Option<Decision> {
        match s {
            "stay" | "s" => Some(Decision::Stay),
            "l" => Some(Decision::Limit),
            "c" => Some(Decision::Cancel),
            "m" => Some(Decision::Market),
            _ => None,
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Decision times `0, dt, 2 dt, ...` strictly before the horizon; the
/// last interval is cut short when `dt` does not divide the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0) || !(horizon >= 0.0) {
            return Err(Error::Model(format!("bad time grid dt={dt}, horizon={horizon}")));
        }
        let steps = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
        Ok(TimeGrid { dt, horizon, times: (0..steps).map(|k| k as f64 * dt).collect() })
    }

    pub fn steps(&self) -> usize {
        self.times.len()
    }

    /// Length of the interval starting at decision `k`.
    pub fn step_len(&self, k: usize) -> f64 {
        let end = self.times.get(k + 1).copied().unwrap_or(self.horizon);
        end - self.times[k]
    }
}

/// Values at every decision time plus the terminal layer.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    pub regime: Regime,
    pub grid: TimeGrid,
    /// `values[k][state]` for `k <= steps`; the last layer is `g`.
    pub values: Vec<Vec<f64>>,
}

impl ValueSurface {
    pub fn initial(&self) -> &[f64] {
        &self.values[0]
    }
}

#[derive(Debug, Clone)]
pub struct Policy {
    pub grid: TimeGrid,
    /// `None` for executed states.
    pub decisions: Vec<Vec<Option<Decision>>>,
    pub explicit_stay: bool,
}

/// Generator, terminal utility and cost parameters of one problem.
#[derive(Debug, Clone, Copy)]
pub struct ExecutionProblem<'a> {
    pub gen: &'a ControlledGenerator,
    pub payoff: &'a [f64],
    pub cfg: &'a ModelConfig,
}

/// A stationary rule or a solved table.
#[derive(Debug, Clone, Copy)]
pub enum PolicyRule<'a> {
    Table(&'a Policy),
    /// Post at the bid whenever possible and never cancel.
    JoinBid,
    AlwaysMarket,
}

impl<'a> ExecutionProblem<'a> {
    pub fn new(gen: &'a ControlledGenerator, payoff: &'a [f64], cfg: &'a ModelConfig) -> Result<Self> {
        if payoff.len() != gen.len() {
            return Err(Error::Model("payoff length does not match the state space".into()));
        }
        Ok(ExecutionProblem { gen, payoff, cfg })
    }

    fn running_cost(&self) -> f64 {
        self.cfg.wait_cost * self.cfg.order_size as f64
    }

    /// Expected value at the start of an interval of length `dt`, given
    /// `next` at its end and no intervention inside it.
    pub fn continuation(&self, regime: Regime, next: &[f64], dt: f64) -> Result<Vec<f64>> {
        let gen = self.gen;
        let cost = self.running_cost();
        let mut w = match regime {
            Regime::FixedFrequency => {
                let active: Vec<f64> = (0..gen.len()).map(|i| gen.is_active(i) as u8 as f64).collect();
                let mut u = Uniformizer::new(&gen.matrix, UNIFORMIZATION_TOL);
                let (mut w, waited) = u.propagate(dt, next, (cost > 0.0).then_some(&active[..]))?;
                if let Some(waited) = waited {
                    w.iter_mut().zip(&waited).for_each(|(v, t)| *v -= cost * t);
                }
                w
            }
            Regime::AnyTime(StepKernel::Exponential) => {
                let mut u = Uniformizer::new(&gen.matrix, UNIFORMIZATION_TOL);
                let (w, _) = u.propagate(dt, next, None)?;
                w
            }
            Regime::AnyTime(StepKernel::FiniteDifference) => {
                if let Some(i) = (0..gen.len()).find(|&i| 1.0 + dt * gen.matrix.diag(i) < 0.0) {
                    return Err(Error::Numeric(format!(
                        "finite-difference step {dt} too large: 1 + dt*Q_ii < 0 at {}",
                        gen.states[i]
                    )));
                }
                let mut qx = vec![0.0; next.len()];
                gen.matrix.apply(next, &mut qx);
                next.iter().zip(&qx).map(|(x, q)| x + dt * q).collect()
            }
        };
        if let Regime::AnyTime(_) = regime {
            for (i, v) in w.iter_mut().enumerate() {
                if gen.is_active(i) {
                    *v -= cost * dt;
                }
            }
        }
        for (i, v) in w.iter_mut().enumerate() {
            if !gen.is_active(i) {
                *v = self.payoff[i];
            }
        }
        Ok(w)
    }

    /// Value of each admissible decision at active state `i`.
    pub fn candidates(&self, i: usize, w: &[f64]) -> Vec<(Decision, f64)> {
        let gen = self.gen;
        let mut out = vec![(Decision::Stay, w[i])];
        if gen.states[i].is_posted() {
            out.push((Decision::Cancel, gen.cancel[i].iter().map(|&(j, p)| p * w[j]).sum()));
        } else if let Some(j) = gen.limit[i] {
            out.push((Decision::Limit, w[j]));
        }
        out.push((Decision::Market, self.payoff[i]));
        out
    }

    fn label(&self, i: usize, d: Decision, explicit_stay: bool) -> Decision {
        if d != Decision::Stay || explicit_stay {
            return d;
        }
        if self.gen.states[i].is_posted() {
            Decision::Limit
        } else {
            Decision::Cancel
        }
    }

    /// Best decision at `i`; near-ties go to the least risky action,
    /// market before resting, resting before cancelling.
    pub fn decide(&self, i: usize, w: &[f64], explicit_stay: bool) -> (Decision, f64) {
        let posted = self.gen.states[i].is_posted();
        let rank = |d: Decision| match d {
            Decision::Market => 3,
            Decision::Limit => 2,
            Decision::Stay if posted => 2,
            _ => 1,
        };
        let cands = self.candidates(i, w);
        let best = cands.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let tol = TIE_TOL * best.abs().max(1.0);
        let (d, v) = cands
            .into_iter()
            .filter(|c| best - c.1 <= tol)
            .max_by_key(|c| rank(c.0))
            .expect("at least one candidate");
        (self.label(i, d, explicit_stay), v)
    }

    pub fn solve(&self, regime: Regime, explicit_stay: bool) -> Result<(ValueSurface, Policy)> {
        let grid = TimeGrid::new(self.cfg.decision_dt, self.cfg.horizon)?;
        let steps = grid.steps();
        let mut values = vec![Vec::new(); steps + 1];
        let mut decisions = vec![Vec::new(); steps];
        values[steps] = self.payoff.to_vec();
        for k in (0..steps).rev() {
            let w = self.continuation(regime, &values[k + 1], grid.step_len(k))?;
            let mut v = w.clone();
            let mut dk = vec![None; self.gen.len()];
            for i in 0..self.gen.len() {
                if self.gen.is_active(i) {
                    let (d, val) = self.decide(i, &w, explicit_stay);
                    v[i] = val;
                    dk[i] = Some(d);
                }
            }
            values[k] = v;
            decisions[k] = dk;
        }
        Ok((ValueSurface { regime, grid: grid.clone(), values }, Policy { grid, decisions, explicit_stay }))
    }

    /// Value of following `rule` instead of the optimal decisions.
    pub fn evaluate(&self, regime: Regime, rule: PolicyRule) -> Result<ValueSurface> {
        let grid = TimeGrid::new(self.cfg.decision_dt, self.cfg.horizon)?;
        let steps = grid.steps();
        if let PolicyRule::Table(p) = rule {
            if p.decisions.len() != steps || p.decisions.iter().any(|d| d.len() != self.gen.len()) {
                return Err(Error::Model("policy table does not match the problem's grid or states".into()));
            }
        }
        let mut values = vec![Vec::new(); steps + 1];
        values[steps] = self.payoff.to_vec();
        for k in (0..steps).rev() {
            let w = self.continuation(regime, &values[k + 1], grid.step_len(k))?;
            let mut v = w.clone();
            for i in 0..self.gen.len() {
                if !self.gen.is_active(i) {
                    continue;
                }
                let u = &self.gen.states[i];
                let d = match rule {
                    PolicyRule::AlwaysMarket => Decision::Market,
                    PolicyRule::JoinBid => {
                        if self.gen.limit[i].is_some() {
                            Decision::Limit
                        } else {
                            Decision::Stay
                        }
                    }
                    PolicyRule::Table(p) => p.decisions[k][i].ok_or_else(|| {
                        Error::Model(format!("policy has no decision at step {k} for {u}"))
                    })?,
                };
                let d = normalize(u, d);
                v[i] = self
                    .candidates(i, &w)
                    .into_iter()
                    .find(|c| c.0 == d)
                    .map(|c| c.1)
                    .ok_or_else(|| Error::IllegalControl { control: d.to_string(), state: u.to_string() })?;
            }
            values[k] = v;
        }
        Ok(ValueSurface { regime, grid, values })
    }

    /// Recomputes the optimal decisions implied by a value surface.
    pub fn extract_policy(&self, surface: &ValueSurface, explicit_stay: bool) -> Result<Policy> {
        let steps = surface.grid.steps();
        let mut decisions = Vec::with_capacity(steps);
        for k in 0..steps {
            let w = self.continuation(surface.regime, &surface.values[k + 1], surface.grid.step_len(k))?;
            decisions.push(
                (0..self.gen.len())
                    .map(|i| self.gen.is_active(i).then(|| self.decide(i, &w, explicit_stay).0))
                    .collect(),
            );
        }
        Ok(Policy { grid: surface.grid.clone(), decisions, explicit_stay })
    }
}

/// Maps relabelled decisions back to the underlying action: resting is
/// recorded as `l` when posted, doing nothing as `c` when not posted.
pub fn normalize(u: &AgentState, d: Decision) -> Decision {
    match (u.is_posted(), d) {
        (true, Decision::Limit) | (false, Decision::Cancel) => Decision::Stay,
        _ => d,
    }
}

pub fn solve_fixed_frequency(p: &ExecutionProblem, explicit_stay: bool) -> Result<(ValueSurface, Policy)> {
    p.solve(Regime::FixedFrequency, explicit_stay)
}

pub fn solve_any_time_discrete(
    p: &ExecutionProblem,
    kernel: StepKernel,
    explicit_stay: bool,
) -> Result<(ValueSurface, Policy)> {
    p.solve(Regime::AnyTime(kernel), explicit_stay)
}

pub fn value_of_fixed_policy(p: &ExecutionProblem, regime: Regime, rule: PolicyRule) -> Result<ValueSurface> {
    p.evaluate(regime, rule)
}

pub fn extract_policy(p: &ExecutionProblem, surface: &ValueSurface, explicit_stay: bool) -> Result<Policy> {
    p.extract_policy(surface, explicit_stay)
}
