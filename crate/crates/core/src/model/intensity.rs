use super::types::{EventKind, MarketEvent, Side};
use crate::error::{Error, Result};

/// Rates of one side's own events, in that side's frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SideRates {
    pub limit: f64,
    pub cancel: f64,
    pub market: f64,
}

impl SideRates {
    pub fn consumption(&self) -> f64 {
        self.cancel + self.market
    }
}

/// Rates of one side over `(own queue, opposite queue, size)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    qmax: u32,
    n_max: u32,
    rates: Vec<SideRates>,
}

impl RateTable {
    pub fn zeros(qmax: u32, n_max: u32) -> Self {
        let len = (qmax * qmax * n_max) as usize;
        RateTable { qmax, n_max, rates: vec![SideRates::default(); len] }
    }

    fn idx(&self, own: u32, opp: u32, n: u32) -> usize {
        debug_assert!((1..=self.qmax).contains(&own) && (1..=self.qmax).contains(&opp));
        debug_assert!((1..=self.n_max).contains(&n));
        (((own - 1) * self.qmax + (opp - 1)) * self.n_max + (n - 1)) as usize
    }

    pub fn get(&self, own: u32, opp: u32, n: u32) -> SideRates {
        self.rates[self.idx(own, opp, n)]
    }

    pub fn set(&mut self, own: u32, opp: u32, n: u32, r: SideRates) {
        let i = self.idx(own, opp, n);
        self.rates[i] = r;
    }

    pub fn qmax(&self) -> u32 {
        self.qmax
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }
}

/// Queue-reactive intensities of the best-limits book.
///
/// The bid table is indexed by `(q1, q2, n)` and the ask table by
/// `(q2, q1, n)`, so a symmetric model has identical tables.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityModel {
    qmax: u32,
    n_max: u32,
    bid: RateTable,
    ask: RateTable,
    symmetric: bool,
}

/// Splits a total consumption rate into cancel and market parts.
pub fn split_consumption(total: f64, market_fraction: f64) -> (f64, f64) {
    (total * (1.0 - market_fraction), total * market_fraction)
}

impl IntensityModel {
    /// Unit-size events with constant rates; insertions that would take a
    /// queue past `qmax` are switched off.
    pub fn constant(qmax: u32, lam_plus: f64, lam_minus: f64, market_fraction: f64) -> Result<Self> {
        let (cancel, market) = split_consumption(lam_minus, market_fraction);
        Self::symmetric_from_fn(qmax, 1, |_, _, _| SideRates { limit: lam_plus, cancel, market })
    }

    /// Builds a symmetric model from bid-frame rates. Insertions beyond the
    /// cap are dropped.
    pub fn symmetric_from_fn(
        qmax: u32,
        n_max: u32,
        f: impl Fn(u32, u32, u32) -> SideRates,
    ) -> Result<Self> {
        if qmax == 0 || n_max == 0 {
            return Err(Error::Model("qmax and n_max must be at least 1".into()));
        }
        let mut bid = RateTable::zeros(qmax, n_max);
        for own in 1..=qmax {
            for opp in 1..=qmax {
                for n in 1..=n_max {
                    let mut r = f(own, opp, n);
                    if own + n > qmax {
                        r.limit = 0.0;
                    }
                    bid.set(own, opp, n, r);
                }
            }
        }
        let m = IntensityModel { qmax, n_max, ask: bid.clone(), bid, symmetric: true };
        m.validate()?;
        Ok(m)
    }

    /// Raw per-side tables; rejects tables that violate the queue cap.
    pub fn from_tables(bid: RateTable, ask: RateTable) -> Result<Self> {
        if bid.qmax != ask.qmax || bid.n_max != ask.n_max {
            return Err(Error::Model("bid and ask tables have different shapes".into()));
        }
        let symmetric = bid == ask;
        let m = IntensityModel { qmax: bid.qmax, n_max: bid.n_max, bid, ask, symmetric };
        m.validate()?;
        m.check_caps()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        for t in [&self.bid, &self.ask] {
            for r in &t.rates {
                for x in [r.limit, r.cancel, r.market] {
                    if !(x >= 0.0 && x.is_finite()) {
                        return Err(Error::Model(format!("rates must be finite and non-negative, got {x}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Every queue can only grow up to `qmax`.
    pub fn check_caps(&self) -> Result<()> {
        for (side, t) in [(Side::Bid, &self.bid), (Side::Ask, &self.ask)] {
            for own in 1..=self.qmax {
                for opp in 1..=self.qmax {
                    for n in 1..=self.n_max {
                        if own + n > self.qmax && t.get(own, opp, n).limit > 0.0 {
                            return Err(Error::Model(format!(
                                "{side} insertion of size {n} at queue {own} exceeds qmax {}",
                                self.qmax
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn qmax(&self) -> u32 {
        self.qmax
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn table(&self, side: Side) -> &RateTable {
        match side {
            Side::Bid => &self.bid,
            Side::Ask => &self.ask,
        }
    }

    /// Rates of `side`'s own events of size `n` at book `(q1, q2)`.
    pub fn rates(&self, side: Side, q1: u32, q2: u32, n: u32) -> SideRates {
        match side {
            Side::Bid => self.bid.get(q1, q2, n),
            Side::Ask => self.ask.get(q2, q1, n),
        }
    }

    /// Rate at which a single consumption event empties `side`'s queue.
    pub fn depletion_rate(&self, side: Side, q1: u32, q2: u32) -> f64 {
        let own = if side == Side::Bid { q1 } else { q2 };
        (own.max(1)..=self.n_max).map(|n| self.rates(side, q1, q2, n).consumption()).sum()
    }

    /// Sum of `side`'s own event rates at `(q1, q2)`.
    pub fn side_rate(&self, side: Side, q1: u32, q2: u32) -> f64 {
        (1..=self.n_max)
            .map(|n| {
                let r = self.rates(side, q1, q2, n);
                r.limit + r.consumption()
            })
            .sum()
    }

    pub fn total_rate(&self, q1: u32, q2: u32) -> f64 {
        self.side_rate(Side::Bid, q1, q2) + self.side_rate(Side::Ask, q1, q2)
    }

    /// Smallest `H` with every per-side total rate at most `H`.
    pub fn outflow_bound(&self) -> f64 {
        let mut h: f64 = 0.0;
        for q1 in 1..=self.qmax {
            for q2 in 1..=self.qmax {
                h = h.max(self.side_rate(Side::Bid, q1, q2)).max(self.side_rate(Side::Ask, q1, q2));
            }
        }
        h
    }

    pub fn max_total_rate(&self) -> f64 {
        let mut h: f64 = 0.0;
        for q1 in 1..=self.qmax {
            for q2 in 1..=self.qmax {
                h = h.max(self.total_rate(q1, q2));
            }
        }
        h
    }

    /// All events with positive rate at `(q1, q2)`, in a fixed order.
    pub fn events(&self, q1: u32, q2: u32, out: &mut Vec<MarketEvent>) {
        out.clear();
        for side in [Side::Bid, Side::Ask] {
            for n in 1..=self.n_max {
                let r = self.rates(side, q1, q2, n);
                for (kind, rate) in
                    [(EventKind::Limit, r.limit), (EventKind::Cancel, r.cancel), (EventKind::Market, r.market)]
                {
                    if rate > 0.0 {
                        out.push(MarketEvent { side, kind, size: n, rate });
                    }
                }
            }
        }
    }

    /// Largest absolute gap between the bid table and the mirrored ask.
    pub fn symmetry_defect(&self) -> f64 {
        self.bid
            .rates
            .iter()
            .zip(&self.ask.rates)
            .map(|(a, b)| {
                (a.limit - b.limit).abs().max((a.cancel - b.cancel).abs()).max((a.market - b.market).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Unit-size rates that do not depend on the state away from the cap.
    pub fn constant_rates(&self) -> Option<ConstantRates> {
        if self.n_max != 1 {
            return None;
        }
        let b = self.bid.get(1, 1, 1);
        let a = self.ask.get(1, 1, 1);
        for own in 1..=self.qmax {
            for opp in 1..=self.qmax {
                for (t, r0) in [(&self.bid, b), (&self.ask, a)] {
                    let r = t.get(own, opp, 1);
                    let limit = if own < self.qmax { r0.limit } else { 0.0 };
                    if r.limit != limit || r.consumption() != r0.consumption() {
                        return None;
                    }
                }
            }
        }
        Some(ConstantRates {
            bid_plus: b.limit,
            bid_minus: b.consumption(),
            ask_plus: a.limit,
            ask_minus: a.consumption(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantRates {
    pub bid_plus: f64,
    pub bid_minus: f64,
    pub ask_plus: f64,
    pub ask_minus: f64,
}

/// Queue-reactive rates driven by the imbalance: the ratio of insertion to
/// consumption falls exponentially as the own queue grows relative to the
/// opposite one, at a fixed total activity per side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImbalanceRatioRates {
    pub total_rate: f64,
    pub ratio_at_balance: f64,
    pub imbalance_slope: f64,
    pub market_fraction: f64,
}

impl ImbalanceRatioRates {
    pub fn rates(&self, own: u32, opp: u32) -> SideRates {
        let ratio = self.ratio_at_balance * (-self.imbalance_slope * super::types::imbalance(own, opp)).exp();
        let limit = self.total_rate * ratio / (1.0 + ratio);
        let (cancel, market) = split_consumption(self.total_rate / (1.0 + ratio), self.market_fraction);
        SideRates { limit, cancel, market }
    }

    pub fn build(&self, qmax: u32) -> Result<IntensityModel> {
        IntensityModel::symmetric_from_fn(qmax, 1, |own, opp, _| self.rates(own, opp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_model_caps_insertions() {
        let m = IntensityModel::constant(3, 0.06, 0.12, 0.5).unwrap();
        assert_eq!(m.rates(Side::Bid, 3, 1, 1).limit, 0.0);
        assert_eq!(m.rates(Side::Bid, 2, 3, 1).limit, 0.06);
        assert_eq!(m.rates(Side::Ask, 2, 3, 1).limit, 0.0);
        assert!((m.rates(Side::Ask, 2, 3, 1).consumption() - 0.12).abs() < 1e-15);
        assert!((m.outflow_bound() - 0.18).abs() < 1e-15);
        assert!(m.is_symmetric());
        assert!(m.constant_rates().is_some());
        m.check_caps().unwrap();
    }

    #[test]
    fn raw_tables_beyond_cap_are_rejected() {
        let mut t = RateTable::zeros(2, 1);
        t.set(2, 1, 1, SideRates { limit: 1.0, cancel: 0.0, market: 0.0 });
        let err = IntensityModel::from_tables(t.clone(), RateTable::zeros(2, 1)).unwrap_err();
        assert!(err.to_string().contains("exceeds qmax"));
    }

    #[test]
    fn depletion_rate_counts_sizes_at_least_queue() {
        let m = IntensityModel::symmetric_from_fn(4, 3, |_, _, n| SideRates {
            limit: 0.0,
            cancel: n as f64,
            market: 0.0,
        })
        .unwrap();
        assert_eq!(m.depletion_rate(Side::Bid, 2, 4), 2.0 + 3.0);
        assert_eq!(m.depletion_rate(Side::Ask, 2, 4), 0.0);
        assert_eq!(m.depletion_rate(Side::Bid, 1, 4), 6.0);
    }

    #[test]
    fn imbalance_ratio_rates_react_to_imbalance() {
        let r = ImbalanceRatioRates { total_rate: 1.0, ratio_at_balance: 0.8, imbalance_slope: 1.5, market_fraction: 0.3 };
        let lo = r.rates(1, 5);
        let hi = r.rates(5, 1);
        assert!(hi.cancel > lo.cancel);
        assert!(hi.limit < lo.limit);
        assert!((hi.limit + hi.consumption() - 1.0).abs() < 1e-12);
    }
}
