use super::events::EventRecord;
use crate::model::{imbalance, EventKind};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct MeanByType {
    pub kind: EventKind,
    pub count: u64,
    pub mean_imbalance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub provision: f64,
    pub consumption: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PriceMoveRow {
    pub horizon: f64,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
    pub mean_move: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImbalanceStats {
    pub by_type: Vec<MeanByType>,
    pub density: Vec<DensityRow>,
    pub price_moves: Vec<PriceMoveRow>,
}

/// Signed imbalance seen by the event.
pub fn signed_imbalance(e: &EventRecord) -> f64 {
    e.sign() * imbalance(e.q1_before, e.q2_before)
}

fn bin_of(x: f64, bins: usize) -> usize {
    (((x + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1)
}

/// Imbalance statistics over `bins` equal bins of `[-1, 1]`.
///
/// The mid at `t + delta` is the pre-event mid of the first later record
/// strictly after that time; events whose horizon overruns the data are
/// skipped.
pub fn imbalance_stats(events: &[EventRecord], horizons: &[f64], bins: usize) -> ImbalanceStats {
    let bins = bins.max(1);
    let kinds = [EventKind::Limit, EventKind::Cancel, EventKind::Market];
    let by_type = kinds
        .iter()
        .map(|&k| {
            let xs: Vec<f64> = events.iter().filter(|e| e.kind == k).map(signed_imbalance).collect();
            let mean = if xs.is_empty() { f64::NAN } else { xs.iter().sum::<f64>() / xs.len() as f64 };
            MeanByType { kind: k, count: xs.len() as u64, mean_imbalance: mean }
        })
        .collect();

    let mut prov = vec![0u64; bins];
    let mut cons = vec![0u64; bins];
    for e in events {
        let b = bin_of(signed_imbalance(e), bins);
        if e.kind == EventKind::Limit {
            prov[b] += 1;
        } else {
            cons[b] += 1;
        }
    }
    let width = 2.0 / bins as f64;
    let (np, nc) = (prov.iter().sum::<u64>().max(1) as f64, cons.iter().sum::<u64>().max(1) as f64);
    let density = (0..bins)
        .map(|b| DensityRow {
            bin_lo: -1.0 + b as f64 * width,
            bin_hi: -1.0 + (b + 1) as f64 * width,
            provision: prov[b] as f64 / np / width,
            consumption: cons[b] as f64 / nc / width,
        })
        .collect();

    let mut price_moves = Vec::new();
    let last = events.last().map_or(f64::NEG_INFINITY, |e| e.timestamp);
    for &h in horizons {
        let mut sum = vec![0.0; bins];
        let mut cnt = vec![0u64; bins];
        let mut j = 0;
        for (i, e) in events.iter().enumerate() {
            let target = e.timestamp + h;
            if target >= last {
                break;
            }
            j = j.max(i + 1);
            while events[j].timestamp <= target {
                j += 1;
            }
            let spread = e.spread_before.max(1) as f64;
            let mv = e.sign() * (events[j].mid_before - e.mid_before) / spread;
            let b = bin_of(signed_imbalance(e), bins);
            sum[b] += mv;
            cnt[b] += 1;
        }
        for b in 0..bins {
            price_moves.push(PriceMoveRow {
                horizon: h,
                bin_lo: -1.0 + b as f64 * width,
                bin_hi: -1.0 + (b + 1) as f64 * width,
                count: cnt[b],
                mean_move: if cnt[b] > 0 { sum[b] / cnt[b] as f64 } else { f64::NAN },
            });
        }
    }
    ImbalanceStats { by_type, density, price_moves }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Side;

    #[test]
    fn single_buy_market_order() {
        // q1 = 9, q2 = 1 gives imbalance 0.8
        let e = EventRecord {
            timestamp: 1.0,
            kind: EventKind::Market,
            side: Side::Ask,
            size: 1,
            q1_before: 9,
            q2_before: 1,
            mid_before: 0.0,
            spread_before: 1,
        };
        let s = imbalance_stats(&[e], &[], 10);
        let m = s.by_type.iter().find(|r| r.kind == EventKind::Market).unwrap();
        assert_eq!(m.count, 1);
        assert!((m.mean_imbalance - 0.8).abs() < 1e-15);
    }
}
