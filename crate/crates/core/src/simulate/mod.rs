//! Event-by-event Monte Carlo of the book with and without the agent.
//!
//! Paths are sampled directly from competing exponential clocks, not
//! from the generator matrix, so they give an independent check of the
//! backward recursion.

use crate::dp::{normalize, Decision, PayoffModel, PolicyRule, Regime, TimeGrid};
use crate::error::{Error, Result};
use crate::model::{
    AgentState, BookState, Control, ControlledGenerator, Dynamics, EventKind, MarketEvent, ModelConfig, Side, Transition,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.5758293035489004;

pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

fn exp_sample(rng: &mut impl Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

fn pick<T>(rng: &mut impl Rng, items: &[T], weight: impl Fn(&T) -> f64, total: f64) -> usize {
    let mut x = rng.gen::<f64>() * total;
    for (i, it) in items.iter().enumerate() {
        x -= weight(it);
        if x < 0.0 {
            return i;
        }
    }
    items.len() - 1
}

/// When the agent may act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionTiming {
    /// At the decision grid times only.
    Grid,
    /// Also right after every market event, using the policy of the
    /// current grid interval.
    EventEpochs,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Per-path event budget; paths hitting it are liquidated early.
    pub max_events: usize,
    pub timing: DecisionTiming,
    pub record_events: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { n_paths: 10_000, seed: 0, max_events: 1_000_000, timing: DecisionTiming::Grid, record_events: false }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LoggedEvent {
    pub t: f64,
    pub side: Side,
    pub kind: EventKind,
    pub size: u32,
    pub after: AgentState,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathResult {
    pub path: u64,
    pub payoff: f64,
    pub cost: f64,
    pub gain: f64,
    pub exec_time: f64,
    pub events: usize,
    pub first_decision: Option<Decision>,
    pub budget_exceeded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log: Option<Vec<LoggedEvent>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainStats {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_err: f64,
    pub ci99: (f64, f64),
    pub mean_exec_time: f64,
    pub budget_exceeded: usize,
}

impl GainStats {
    pub fn from_samples(xs: &[f64]) -> (f64, f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        (mean, var, (var / n).sqrt())
    }

    pub fn from_paths(paths: &[PathResult]) -> GainStats {
        let gains: Vec<f64> = paths.iter().map(|p| p.gain).collect();
        let (mean, variance, std_err) = Self::from_samples(&gains);
        GainStats {
            n: paths.len(),
            mean,
            variance,
            std_err,
            ci99: (mean - Z99 * std_err, mean + Z99 * std_err),
            mean_exec_time: paths.iter().map(|p| p.exec_time).sum::<f64>() / paths.len() as f64,
            budget_exceeded: paths.iter().filter(|p| p.budget_exceeded).count(),
        }
    }
}

/// Looks up a decision for an arbitrary state.
#[derive(Debug, Clone, Copy)]
pub struct PolicyLookup<'a> {
    pub rule: PolicyRule<'a>,
    pub gen: Option<&'a ControlledGenerator>,
}

impl<'a> PolicyLookup<'a> {
    pub fn decide(&self, k: usize, u: &AgentState, dyns: &Dynamics) -> Result<Decision> {
        match self.rule {
            PolicyRule::AlwaysMarket => Ok(Decision::Market),
            PolicyRule::JoinBid => Ok(if dyns.limit_admissible(u) { Decision::Limit } else { Decision::Stay }),
            PolicyRule::Table(p) => {
                let gen = self.gen.ok_or_else(|| Error::Model("policy table lookup needs its generator".into()))?;
                let (p_clamped, _) = gen.window.clamp(u.p as i64);
                let key = AgentState { p: p_clamped, ..*u };
                let i = gen
                    .index_of(&key)
                    .ok_or_else(|| Error::Model(format!("policy has no entry for state {u}")))?;
                let k = k.min(p.decisions.len().saturating_sub(1));
                p.decisions[k][i].ok_or_else(|| Error::Model(format!("no decision for executed state {u}")))
            }
        }
    }
}

/// Monte Carlo of the controlled problem from one initial state.
pub struct Simulator<'a> {
    pub dyns: &'a Dynamics<'a>,
    pub payoff: PayoffModel<'a>,
    pub cfg: &'a ModelConfig,
    pub regime: Regime,
}

impl<'a> Simulator<'a> {
    pub fn run(&self, policy: PolicyLookup, init: AgentState, sim: &SimConfig) -> Result<(GainStats, Vec<PathResult>)> {
        if init.is_executed() {
            return Err(Error::Model("initial state is already executed".into()));
        }
        init.check(self.dyns.qmax()).map_err(Error::Model)?;
        let paths: Vec<Result<PathResult>> =
            (0..sim.n_paths as u64).into_par_iter().map(|k| self.path(policy, init, sim, k)).collect();
        let paths: Vec<PathResult> = paths.into_iter().collect::<Result<_>>()?;
        Ok((GainStats::from_paths(&paths), paths))
    }

    fn path(&self, policy: PolicyLookup, init: AgentState, sim: &SimConfig, path: u64) -> Result<PathResult> {
        let mut rng = path_rng(sim.seed, path);
        let grid = TimeGrid::new(self.cfg.decision_dt, self.cfg.horizon)?;
        let unit_cost = self.cfg.wait_cost * self.cfg.order_size as f64;
        let mut u = init;
        let mut t = 0.0;
        let mut step_cost = 0.0;
        let mut n_events = 0usize;
        let mut log = sim.record_events.then(Vec::new);
        let mut first_decision = None;
        let mut events: Vec<MarketEvent> = Vec::new();
        let mut outs: Vec<Transition<AgentState>> = Vec::new();
        let continuous = self.regime == Regime::FixedFrequency;

        let finish = |payoff: f64, exec_time: f64, step_cost: f64, n_events, log, first_decision, over| {
            let cost = if continuous { unit_cost * exec_time } else { step_cost };
            PathResult {
                path,
                payoff,
                cost,
                gain: payoff - cost,
                exec_time,
                events: n_events,
                first_decision,
                budget_exceeded: over,
                log,
            }
        };

        for k in 0..grid.steps() {
            let end = grid.times[k] + grid.step_len(k);
            let mut decide_now = true;
            loop {
                if decide_now {
                    let d = normalize(&u, policy.decide(k, &u, self.dyns)?);
                    first_decision.get_or_insert(d);
                    let control = match d {
                        Decision::Stay => None,
                        Decision::Limit => Some(Control::Limit),
                        Decision::Cancel => Some(Control::Cancel),
                        Decision::Market => {
                            let g = self.payoff.liquidate(&u, self.dyns)?;
                            return Ok(finish(g, t, step_cost, n_events, log, first_decision, false));
                        }
                    };
                    if let Some(c) = control {
                        self.dyns.control_outcomes(&u, c, &mut outs)?;
                        let i = pick(&mut rng, &outs, |o| o.prob, 1.0);
                        u = outs[i].state;
                    }
                    if t == grid.times[k] {
                        step_cost += unit_cost * grid.step_len(k);
                    }
                }
                self.dyns.events(u.q1(), u.q2, &mut events);
                let rate: f64 = events.iter().map(|e| e.rate).sum();
                let dt = if rate > 0.0 { exp_sample(&mut rng, rate) } else { f64::INFINITY };
                if t + dt >= end {
                    t = end;
                    break;
                }
                t += dt;
                let ev = events[pick(&mut rng, &events, |e| e.rate, rate)];
                self.dyns.agent_outcomes(&u, &ev, &mut outs);
                if !outs.is_empty() {
                    let total: f64 = outs.iter().map(|o| o.prob).sum();
                    u = outs[pick(&mut rng, &outs, |o| o.prob, total)].state;
                }
                n_events += 1;
                if let Some(l) = log.as_mut() {
                    l.push(LoggedEvent { t, side: ev.side, kind: ev.kind, size: ev.size, after: u });
                }
                if u.is_executed() {
                    let g = self.payoff.executed(&u);
                    return Ok(finish(g, t, step_cost, n_events, log, first_decision, false));
                }
                if n_events >= sim.max_events {
                    let g = self.payoff.liquidate(&u, self.dyns)?;
                    return Ok(finish(g, t, step_cost, n_events, log, first_decision, true));
                }
                decide_now = sim.timing == DecisionTiming::EventEpochs;
            }
        }
        let g = self.payoff.liquidate(&u, self.dyns)?;
        Ok(finish(g, grid.horizon, step_cost, n_events, log, first_decision, false))
    }
}

/// Sampler of the book without the agent.
pub struct MarketSampler<'a> {
    dyns: &'a Dynamics<'a>,
    events: Vec<MarketEvent>,
    outs: Vec<Transition<BookState>>,
}

impl<'a> MarketSampler<'a> {
    pub fn new(dyns: &'a Dynamics<'a>) -> Self {
        MarketSampler { dyns, events: Vec::new(), outs: Vec::new() }
    }

    /// Waiting time, event and next state; `None` if the book is frozen.
    pub fn step(&mut self, b: BookState, rng: &mut impl Rng) -> Option<(f64, MarketEvent, BookState)> {
        self.dyns.events(b.q1, b.q2, &mut self.events);
        let rate: f64 = self.events.iter().map(|e| e.rate).sum();
        if rate <= 0.0 {
            return None;
        }
        let dt = exp_sample(rng, rate);
        let ev = self.events[pick(rng, &self.events, |e| e.rate, rate)];
        self.dyns.book_outcomes(b, &ev, &mut self.outs);
        let next = if self.outs.is_empty() {
            b
        } else {
            self.outs[pick(rng, &self.outs, |o| o.prob, 1.0)].state
        };
        Some((dt, ev, next))
    }

    /// Jump-chain step: next event and state without the waiting time.
    pub fn jump(&mut self, b: BookState, rng: &mut impl Rng) -> BookState {
        self.step(b, rng).map_or(b, |s| s.2)
    }
}

/// Empirical law of `(q1, q2)` after each number of events in
/// `checkpoints`, row-major over `[1, qmax]^2`.
pub fn simulate_market_only(
    dyns: &Dynamics,
    init: BookState,
    checkpoints: &[usize],
    n_paths: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let q = dyns.qmax() as usize;
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    let counts: Vec<Vec<Vec<u32>>> = (0..n_paths as u64)
        .into_par_iter()
        .fold(
            || vec![vec![0u32; q * q]; checkpoints.len()],
            |mut acc, path| {
                let mut rng = path_rng(seed, path);
                let mut s = MarketSampler::new(dyns);
                let mut b = init;
                for n in 0..=last {
                    for (c, &cp) in checkpoints.iter().enumerate() {
                        if cp == n {
                            acc[c][((b.q1 - 1) as usize) * q + (b.q2 - 1) as usize] += 1;
                        }
                    }
                    if n < last {
                        b = s.jump(b, &mut rng);
                    }
                }
                acc
            },
        )
        .collect();
    let mut total = vec![vec![0u64; q * q]; checkpoints.len()];
    for part in counts {
        for (c, v) in part.into_iter().enumerate() {
            for (i, x) in v.into_iter().enumerate() {
                total[c][i] += x as u64;
            }
        }
    }
    total.into_iter().map(|v| v.into_iter().map(|x| x as f64 / n_paths as f64).collect()).collect()
}

/// Mean and standard error of the price change over `n_events` events.
pub fn simulate_price_drift(dyns: &Dynamics, init: BookState, n_events: usize, n_paths: usize, seed: u64) -> (f64, f64) {
    let moves: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(seed, path);
            let mut s = MarketSampler::new(dyns);
            let mut b = init;
            for _ in 0..n_events {
                b = s.jump(b, &mut rng);
            }
            (b.p - init.p) as f64
        })
        .collect();
    let (mean, _, se) = GainStats::from_samples(&moves);
    (mean, se)
}
