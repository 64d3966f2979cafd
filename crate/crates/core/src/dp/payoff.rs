use crate::error::Result;
use crate::impact::ImpactSolution;
use crate::model::{AgentState, Control, ControlledGenerator, Dynamics, ModelConfig, Transition};

/// Marks an executed position at the long-run expected price.
#[derive(Debug, Clone, Copy)]
pub struct PayoffModel<'a> {
    pub impact: &'a ImpactSolution,
    pub cfg: &'a ModelConfig,
}

impl<'a> PayoffModel<'a> {
    pub fn new(impact: &'a ImpactSolution, cfg: &'a ModelConfig) -> Self {
        PayoffModel { impact, cfg }
    }

    /// Position value minus spending, in price units, before the utility.
    pub fn cash(&self, u: &AgentState) -> f64 {
        let book = u.book();
        let fair = (book.p as f64 + self.impact.get(book.q1, book.q2)) * self.cfg.tick;
        self.cfg.order_size as f64 * fair - u.p_exec as f64 * self.cfg.tick / 2.0
    }

    /// Utility of an executed state.
    pub fn executed(&self, u: &AgentState) -> f64 {
        self.cfg.payoff.apply(self.cash(u))
    }

    /// Utility of finishing with a market order from an active state.
    pub fn liquidate(&self, u: &AgentState, dyns: &Dynamics) -> Result<f64> {
        if u.is_executed() {
            return Ok(self.executed(u));
        }
        let mut out: Vec<Transition<AgentState>> = Vec::new();
        dyns.control_outcomes(u, Control::Market, &mut out)?;
        let cash: f64 = out.iter().map(|t| t.prob * self.cash(&t.state)).sum();
        Ok(self.cfg.payoff.apply(cash))
    }

    /// `g` over every state of a controlled generator.
    pub fn over(&self, gen: &ControlledGenerator) -> Vec<f64> {
        (0..gen.len())
            .map(|i| {
                let u = &gen.states[i];
                if u.is_executed() {
                    self.executed(u)
                } else {
                    let cash: f64 = gen.market[i].iter().map(|&(j, p)| p * self.cash(&gen.states[j])).sum();
                    self.cfg.payoff.apply(cash)
                }
            })
            .collect()
    }
}
