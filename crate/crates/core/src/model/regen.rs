use super::types::{Placement, Side};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Post-depletion book `(q1, q2)` and price move `dp` in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegenOutcome {
    pub q1: u32,
    pub q2: u32,
    pub dp: i32,
    pub prob: f64,
}

impl RegenOutcome {
    pub fn mirrored(self) -> Self {
        RegenOutcome { q1: self.q2, q2: self.q1, dp: -self.dp, prob: self.prob }
    }
}

/// Law of the book right after one of the best queues empties, conditioned
/// on the pre-depletion sizes `(q1, q2)` (queue that emptied included).
#[derive(Debug, Clone, PartialEq)]
pub struct RegenerationLaw {
    qmax: u32,
    bid: Vec<Vec<RegenOutcome>>,
    ask: Vec<Vec<RegenOutcome>>,
    symmetric: bool,
    placement: Placement,
}

impl RegenerationLaw {
    /// Every bid depletion leads to `(q1, q2)` with price move `dp`; ask
    /// depletions follow by symmetry.
    pub fn point(qmax: u32, q1: u32, q2: u32, dp: i32) -> Result<Self> {
        Self::symmetric_from_fn(qmax, |_, _| vec![RegenOutcome { q1, q2, dp, prob: 1.0 }])
    }

    /// Builds a symmetric law from the bid-depletion outcomes.
    pub fn symmetric_from_fn(qmax: u32, f: impl Fn(u32, u32) -> Vec<RegenOutcome>) -> Result<Self> {
        let mut bid = Vec::with_capacity((qmax * qmax) as usize);
        for q1 in 1..=qmax {
            for q2 in 1..=qmax {
                bid.push(f(q1, q2));
            }
        }
        let mut ask = vec![Vec::new(); bid.len()];
        for q1 in 1..=qmax {
            for q2 in 1..=qmax {
                ask[cell(qmax, q1, q2)] = bid[cell(qmax, q2, q1)].iter().map(|o| o.mirrored()).collect();
            }
        }
        let law = RegenerationLaw { qmax, bid, ask, symmetric: true, placement: Placement::Natural };
        law.validate()?;
        Ok(law)
    }

    /// Tables indexed by pre-depletion `(q1, q2)` in row-major order.
    pub fn from_tables(qmax: u32, bid: Vec<Vec<RegenOutcome>>, ask: Vec<Vec<RegenOutcome>>) -> Result<Self> {
        let n = (qmax * qmax) as usize;
        if bid.len() != n || ask.len() != n {
            return Err(Error::Model(format!("regeneration tables need {n} cells per side")));
        }
        let mut law = RegenerationLaw { qmax, bid, ask, symmetric: false, placement: Placement::Natural };
        law.symmetric = law.symmetry_defect() == 0.0;
        law.validate()?;
        Ok(law)
    }

    pub fn with_placement(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }

    fn validate(&self) -> Result<()> {
        for (side, table) in [(Side::Bid, &self.bid), (Side::Ask, &self.ask)] {
            for (i, outs) in table.iter().enumerate() {
                let (q1, q2) = (i as u32 / self.qmax + 1, i as u32 % self.qmax + 1);
                if outs.is_empty() {
                    return Err(Error::Model(format!("no {side} regeneration outcome for ({q1}, {q2})")));
                }
                let mut total = 0.0;
                for o in outs {
                    if !(1..=self.qmax).contains(&o.q1) || !(1..=self.qmax).contains(&o.q2) {
                        return Err(Error::Model(format!(
                            "{side} regeneration from ({q1}, {q2}) leads outside [1, {}]^2",
                            self.qmax
                        )));
                    }
                    if !(o.prob >= 0.0) {
                        return Err(Error::Model("regeneration probabilities must be non-negative".into()));
                    }
                    total += o.prob;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Model(format!(
                        "{side} regeneration from ({q1}, {q2}) has total mass {total}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn qmax(&self) -> u32 {
        self.qmax
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn outcomes(&self, side: Side, q1: u32, q2: u32) -> &[RegenOutcome] {
        let i = cell(self.qmax, q1, q2);
        match side {
            Side::Bid => &self.bid[i],
            Side::Ask => &self.ask[i],
        }
    }

    /// Expected price move when `side` empties at `(q1, q2)`.
    pub fn expected_move(&self, side: Side, q1: u32, q2: u32) -> f64 {
        self.outcomes(side, q1, q2).iter().map(|o| o.prob * o.dp as f64).sum()
    }

    /// Largest regenerated queue size.
    pub fn max_regenerated_queue(&self) -> u32 {
        self.all().map(|o| o.q1.max(o.q2)).max().unwrap_or(0)
    }

    /// Largest absolute price move.
    pub fn max_price_move(&self) -> u32 {
        self.all().map(|o| o.dp.unsigned_abs()).max().unwrap_or(0)
    }

    fn all(&self) -> impl Iterator<Item = &RegenOutcome> {
        self.bid.iter().chain(&self.ask).flatten()
    }

    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for q1 in 1..=self.qmax {
            for q2 in 1..=self.qmax {
                let b = self.outcomes(Side::Bid, q2, q1);
                let a = self.outcomes(Side::Ask, q1, q2);
                let mut mirrored: Vec<RegenOutcome> = b.iter().map(|o| o.mirrored()).collect();
                let mut a = a.to_vec();
                let key = |o: &RegenOutcome| (o.q1, o.q2, o.dp);
                mirrored.sort_by_key(key);
                a.sort_by_key(key);
                if mirrored.len() != a.len() || mirrored.iter().zip(&a).any(|(x, y)| key(x) != key(y)) {
                    return f64::INFINITY;
                }
                for (x, y) in mirrored.iter().zip(&a) {
                    worst = worst.max((x.prob - y.prob).abs());
                }
            }
        }
        worst
    }
}

fn cell(qmax: u32, q1: u32, q2: u32) -> usize {
    debug_assert!((1..=qmax).contains(&q1) && (1..=qmax).contains(&q2));
    ((q1 - 1) * qmax + (q2 - 1)) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_law_mirrors_to_the_ask() {
        let law = RegenerationLaw::point(11, 5, 3, -1).unwrap();
        let b = law.outcomes(Side::Bid, 1, 7)[0];
        assert_eq!((b.q1, b.q2, b.dp), (5, 3, -1));
        let a = law.outcomes(Side::Ask, 7, 1)[0];
        assert_eq!((a.q1, a.q2, a.dp), (3, 5, 1));
        assert_eq!(law.expected_move(Side::Ask, 4, 1), 1.0);
        assert!(law.is_symmetric());
        assert_eq!(law.symmetry_defect(), 0.0);
        assert_eq!(law.max_regenerated_queue(), 5);
    }

    #[test]
    fn mass_must_sum_to_one() {
        let err = RegenerationLaw::symmetric_from_fn(2, |_, _| {
            vec![RegenOutcome { q1: 1, q2: 1, dp: 0, prob: 0.5 }]
        })
        .unwrap_err();
        assert!(err.to_string().contains("total mass"));
    }
}
