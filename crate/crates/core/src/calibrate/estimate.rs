use super::events::EventRecord;
use crate::error::{Error, Result};
use crate::model::{EventKind, IntensityModel, RateTable, RegenOutcome, RegenerationLaw, Side, SideRates};
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct CalibrationOptions {
    pub qmax: u32,
    /// Session start; the first record's occupation runs from here.
    pub start_time: f64,
    /// Cells with fewer depletions fall back to the pooled law.
    pub min_count: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { qmax: 11, start_time: 0.0, min_count: 30 }
    }
}

fn kind_index(k: EventKind) -> usize {
    match k {
        EventKind::Limit => 0,
        EventKind::Cancel => 1,
        EventKind::Market => 2,
    }
}

fn side_index(s: Side) -> usize {
    match s {
        Side::Bid => 0,
        Side::Ask => 1,
    }
}

/// Event counts and occupation times per side, both in the side's own
/// frame `(own queue, opposite queue)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntensityEstimate {
    pub qmax: u32,
    pub counts: [Vec<[u64; 3]>; 2],
    pub occupation: [Vec<f64>; 2],
    /// Pooled size histogram (size, count).
    pub sizes: BTreeMap<u32, u64>,
    /// Records whose pre-event book lies outside `[1, qmax]^2`.
    pub out_of_range: u64,
    /// Insertions observed where the cap forbids them; dropped.
    pub cap_violations: u64,
    pub symmetrized: bool,
}

impl IntensityEstimate {
    fn cell(&self, own: u32, opp: u32) -> usize {
        ((own - 1) * self.qmax + (opp - 1)) as usize
    }

    pub fn count(&self, side: Side, own: u32, opp: u32, kind: EventKind) -> u64 {
        self.counts[side_index(side)][self.cell(own, opp)][kind_index(kind)]
    }

    pub fn occupation(&self, side: Side, own: u32, opp: u32) -> f64 {
        self.occupation[side_index(side)][self.cell(own, opp)]
    }

    /// Count over occupation time; `None` for a bucket never visited.
    pub fn rates(&self, side: Side, own: u32, opp: u32) -> Option<SideRates> {
        let t = self.occupation(side, own, opp);
        if t <= 0.0 {
            return None;
        }
        let c = self.counts[side_index(side)][self.cell(own, opp)];
        Some(SideRates { limit: c[0] as f64 / t, cancel: c[1] as f64 / t, market: c[2] as f64 / t })
    }

    pub fn total_events(&self) -> u64 {
        self.counts.iter().flatten().flatten().sum()
    }

    /// Pools each bid cell with the mirrored ask cell.
    pub fn symmetrize(&self) -> IntensityEstimate {
        let n = self.counts[0].len();
        let mut counts = vec![[0u64; 3]; n];
        let mut occ = vec![0.0; n];
        for i in 0..n {
            for k in 0..3 {
                counts[i][k] = self.counts[0][i][k] + self.counts[1][i][k];
            }
            occ[i] = self.occupation[0][i] + self.occupation[1][i];
        }
        IntensityEstimate {
            counts: [counts.clone(), counts],
            occupation: [occ.clone(), occ],
            symmetrized: true,
            ..self.clone()
        }
    }

    /// Buckets never visited, as `(side, own, opp)`.
    pub fn empty_buckets(&self) -> Vec<(Side, u32, u32)> {
        let mut out = Vec::new();
        for side in [Side::Bid, Side::Ask] {
            for own in 1..=self.qmax {
                for opp in 1..=self.qmax {
                    if self.occupation(side, own, opp) <= 0.0 {
                        out.push((side, own, opp));
                    }
                }
            }
        }
        out
    }

    /// Unit-size intensity model. A bucket with fewer than `min_events`
    /// events (at least one) borrows the rates of the nearest bucket of the
    /// same side that has enough (L1 distance, first in row-major order on
    /// ties), so a briefly visited corner does not become absorbing.
    pub fn to_model(&self, min_events: u64) -> Result<IntensityModel> {
        let min_events = min_events.max(1);
        let mut tables = [RateTable::zeros(self.qmax, 1), RateTable::zeros(self.qmax, 1)];
        for (s, side) in [Side::Bid, Side::Ask].into_iter().enumerate() {
            let visited: Vec<(u32, u32, SideRates)> = (1..=self.qmax)
                .flat_map(|own| (1..=self.qmax).map(move |opp| (own, opp)))
                .filter(|&(own, opp)| self.counts[s][self.cell(own, opp)].iter().sum::<u64>() >= min_events)
                .filter_map(|(own, opp)| self.rates(side, own, opp).map(|r| (own, opp, r)))
                .collect();
            if visited.is_empty() {
                continue;
            }
            for own in 1..=self.qmax {
                for opp in 1..=self.qmax {
                    let d = |&(o, p, _): &(u32, u32, SideRates)| o.abs_diff(own) + p.abs_diff(opp);
                    let mut r = visited.iter().min_by_key(|v| d(v)).expect("non-empty").2;
                    if own >= self.qmax {
                        r.limit = 0.0;
                    }
                    tables[s].set(own, opp, 1, r);
                }
            }
        }
        let [bid, ask] = tables;
        IntensityModel::from_tables(bid, ask)
    }
}

/// Occupation-time estimator of the queue-reactive intensities.
pub fn estimate_intensities(events: &[EventRecord], opts: &CalibrationOptions) -> Result<IntensityEstimate> {
    if events.is_empty() {
        return Err(Error::Data("no events to calibrate from".into()));
    }
    let q = opts.qmax;
    if q == 0 {
        return Err(Error::Data("qmax must be at least 1".into()));
    }
    let n = (q * q) as usize;
    let mut est = IntensityEstimate {
        qmax: q,
        counts: [vec![[0; 3]; n], vec![[0; 3]; n]],
        occupation: [vec![0.0; n], vec![0.0; n]],
        sizes: BTreeMap::new(),
        out_of_range: 0,
        cap_violations: 0,
        symmetrized: false,
    };
    let mut prev = opts.start_time;
    for e in events {
        let dt = (e.timestamp - prev).max(0.0);
        prev = e.timestamp;
        let (q1, q2) = (e.q1_before, e.q2_before);
        if !(1..=q).contains(&q1) || !(1..=q).contains(&q2) {
            est.out_of_range += 1;
            continue;
        }
        *est.sizes.entry(e.size).or_default() += 1;
        let bid_cell = est.cell(q1, q2);
        let ask_cell = est.cell(q2, q1);
        est.occupation[0][bid_cell] += dt;
        est.occupation[1][ask_cell] += dt;
        let (s, cell) = match e.side {
            Side::Bid => (0, bid_cell),
            Side::Ask => (1, ask_cell),
        };
        if e.kind == EventKind::Limit && e.own_queue() >= q {
            est.cap_violations += 1;
            continue;
        }
        est.counts[s][cell][kind_index(e.kind)] += 1;
    }
    Ok(est)
}

/// Observed post-depletion books keyed by the pre-depletion book.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegenerationEstimate {
    pub qmax: u32,
    /// Per side, per pre-depletion cell `(q1, q2)` row-major: counts of
    /// `(q1', q2', dp)`.
    pub cells: [Vec<BTreeMap<(u32, u32, i32), u64>>; 2],
    /// Depletions whose outcome could not be used.
    pub skipped: u64,
}

impl RegenerationEstimate {
    pub fn depletions(&self, side: Side) -> u64 {
        self.cells[side_index(side)].iter().flat_map(|c| c.values()).sum()
    }

    fn cell(&self, q1: u32, q2: u32) -> usize {
        ((q1 - 1) * self.qmax + (q2 - 1)) as usize
    }

    pub fn cell_counts(&self, side: Side, q1: u32, q2: u32) -> &BTreeMap<(u32, u32, i32), u64> {
        &self.cells[side_index(side)][self.cell(q1, q2)]
    }

    fn pooled(&self, side: Side) -> BTreeMap<(u32, u32, i32), u64> {
        let mut out = BTreeMap::new();
        for c in &self.cells[side_index(side)] {
            for (k, v) in c {
                *out.entry(*k).or_default() += v;
            }
        }
        out
    }

    /// Adds each ask depletion to the bid side mirrored, and back.
    pub fn symmetrize(&self) -> RegenerationEstimate {
        let n = self.cells[0].len();
        let mut bid = self.cells[0].clone();
        for q1 in 1..=self.qmax {
            for q2 in 1..=self.qmax {
                for (&(a, b, dp), &v) in &self.cells[1][self.cell(q2, q1)] {
                    *bid[self.cell(q1, q2)].entry((b, a, -dp)).or_default() += v;
                }
            }
        }
        let mut ask = vec![BTreeMap::new(); n];
        for q1 in 1..=self.qmax {
            for q2 in 1..=self.qmax {
                for (&(a, b, dp), &v) in &bid[self.cell(q2, q1)] {
                    ask[self.cell(q1, q2)].insert((b, a, -dp), v);
                }
            }
        }
        RegenerationEstimate { cells: [bid, ask], ..self.clone() }
    }

    /// Empirical law. Cells with fewer than `min_count` depletions use the
    /// side's pooled law; a side without any depletion borrows the mirror
    /// of the other side.
    pub fn to_law(&self, min_count: u64) -> Result<RegenerationLaw> {
        let mut pooled = [self.pooled(Side::Bid), self.pooled(Side::Ask)];
        let mirror = |m: &BTreeMap<(u32, u32, i32), u64>| -> BTreeMap<(u32, u32, i32), u64> {
            m.iter().map(|(&(a, b, dp), &v)| ((b, a, -dp), v)).collect()
        };
        match (pooled[0].is_empty(), pooled[1].is_empty()) {
            (true, true) => return Err(Error::Data("no depletions observed".into())),
            (true, false) => pooled[0] = mirror(&pooled[1]),
            (false, true) => pooled[1] = mirror(&pooled[0]),
            _ => {}
        }
        let to_outcomes = |m: &BTreeMap<(u32, u32, i32), u64>| -> Vec<RegenOutcome> {
            let total: u64 = m.values().sum();
            m.iter()
                .map(|(&(q1, q2, dp), &v)| RegenOutcome { q1, q2, dp, prob: v as f64 / total as f64 })
                .collect()
        };
        let mut tables: [Vec<Vec<RegenOutcome>>; 2] = [Vec::new(), Vec::new()];
        for s in 0..2 {
            let fallback = to_outcomes(&pooled[s]);
            tables[s] = self.cells[s]
                .iter()
                .map(|c| {
                    if c.values().sum::<u64>() >= min_count.max(1) {
                        to_outcomes(c)
                    } else {
                        fallback.clone()
                    }
                })
                .collect();
        }
        let [bid, ask] = tables;
        RegenerationLaw::from_tables(self.qmax, bid, ask)
    }

    /// Mean of `q1' / q2'` after bid depletions, per pre-depletion cell.
    pub fn ratio_surface(&self) -> Vec<(u32, u32, Option<f64>)> {
        let mut out = Vec::new();
        for q1 in 1..=self.qmax {
            for q2 in 1..=self.qmax {
                let c = self.cell_counts(Side::Bid, q1, q2);
                let n: u64 = c.values().sum();
                let r = (n > 0).then(|| {
                    c.iter().map(|(&(a, b, _), &v)| v as f64 * a as f64 / b as f64).sum::<f64>() / n as f64
                });
                out.push((q1, q2, r));
            }
        }
        out
    }
}

/// Reads each depletion's outcome off the next record's pre-event book.
pub fn estimate_regeneration(events: &[EventRecord], opts: &CalibrationOptions) -> Result<RegenerationEstimate> {
    let q = opts.qmax;
    let n = (q * q) as usize;
    let mut est = RegenerationEstimate { qmax: q, cells: [vec![BTreeMap::new(); n], vec![BTreeMap::new(); n]], skipped: 0 };
    for w in events.windows(2) {
        let (e, next) = (&w[0], &w[1]);
        if !e.is_depletion() {
            continue;
        }
        let in_range = |a: u32, b: u32| (1..=q).contains(&a) && (1..=q).contains(&b);
        let dp = next.mid_before - e.mid_before;
        if !in_range(e.q1_before, e.q2_before) || !in_range(next.q1_before, next.q2_before) || dp.fract() != 0.0 {
            est.skipped += 1;
            continue;
        }
        let cell = est.cell(e.q1_before, e.q2_before);
        *est.cells[side_index(e.side)][cell].entry((next.q1_before, next.q2_before, dp as i32)).or_default() += 1;
    }
    if est.depletions(Side::Bid) + est.depletions(Side::Ask) == 0 {
        return Err(Error::Data("no depletions observed".into()));
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64, kind: EventKind, side: Side, q1: u32, q2: u32, mid: f64) -> EventRecord {
        EventRecord { timestamp: t, kind, side, size: 1, q1_before: q1, q2_before: q2, mid_before: mid, spread_before: 1 }
    }

    #[test]
    fn single_event_over_ten_seconds() {
        let ev = [rec(10.0, EventKind::Limit, Side::Bid, 2, 3, 0.0)];
        let est = estimate_intensities(&ev, &CalibrationOptions { qmax: 4, ..Default::default() }).unwrap();
        let r = est.rates(Side::Bid, 2, 3).unwrap();
        assert!((r.limit - 0.1).abs() < 1e-15);
        assert_eq!(r.cancel, 0.0);
        assert_eq!(est.rates(Side::Ask, 3, 2).unwrap().limit, 0.0);
        assert!(est.rates(Side::Bid, 1, 1).is_none());
    }

    #[test]
    fn symmetrization_keeps_event_count() {
        let ev = [
            rec(1.0, EventKind::Limit, Side::Bid, 2, 3, 0.0),
            rec(2.0, EventKind::Cancel, Side::Ask, 3, 3, 0.0),
            rec(4.0, EventKind::Market, Side::Ask, 3, 2, 0.0),
        ];
        let est = estimate_intensities(&ev, &CalibrationOptions { qmax: 4, ..Default::default() }).unwrap();
        assert_eq!(est.total_events(), 3);
        let sym = est.symmetrize();
        assert_eq!(sym.counts[0].iter().flatten().sum::<u64>(), 3);
        // the ask market at (3, 2) is the mirror of a bid market at (2, 3)
        assert_eq!(sym.count(Side::Bid, 2, 3, EventKind::Market), 1);
        assert_eq!(sym.occupation(Side::Bid, 2, 3), 1.0 + 2.0);
    }

    #[test]
    fn point_regeneration_recovered() {
        let ev = [
            rec(1.0, EventKind::Market, Side::Bid, 1, 4, 0.0),
            rec(2.0, EventKind::Cancel, Side::Bid, 5, 3, -1.0),
            rec(3.0, EventKind::Cancel, Side::Ask, 5, 1, -1.0),
            rec(4.0, EventKind::Limit, Side::Bid, 3, 5, 0.0),
        ];
        let est = estimate_regeneration(&ev, &CalibrationOptions { qmax: 6, ..Default::default() }).unwrap();
        let law = est.to_law(1).unwrap();
        let o = law.outcomes(Side::Bid, 1, 4);
        assert_eq!(o, &[RegenOutcome { q1: 5, q2: 3, dp: -1, prob: 1.0 }]);
        let o = law.outcomes(Side::Ask, 5, 1);
        assert_eq!(o, &[RegenOutcome { q1: 3, q2: 5, dp: 1, prob: 1.0 }]);
        assert!(estimate_regeneration(&ev[1..2], &CalibrationOptions::default()).is_err());
    }
}
