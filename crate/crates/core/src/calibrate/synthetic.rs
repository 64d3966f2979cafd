use super::events::EventRecord;
use crate::error::Result;
use crate::model::{BookState, Dynamics, IntensityModel, PriceWindow, RegenerationLaw, Side};
use crate::simulate::{path_rng, MarketSampler};
use serde::Serialize;

/// Generator settings and ground truth stored next to a synthetic stream.
#[derive(Debug, Clone, Serialize)]
pub struct SyntheticManifest {
    pub n_events: usize,
    pub seed: u64,
    pub initial: BookState,
    pub spread_ticks: u32,
    pub duration: f64,
    pub qmax: u32,
    pub truth: Vec<TruthRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruthRow {
    pub side: Side,
    pub own: u32,
    pub opp: u32,
    pub limit: f64,
    pub cancel: f64,
    pub market: f64,
}

fn round_us(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

/// Samples the book without an agent and records every event with the
/// book it found. Timestamps are rounded to microseconds.
pub fn generate_synthetic_events(
    model: &IntensityModel,
    regen: &RegenerationLaw,
    initial: BookState,
    spread_ticks: u32,
    n_events: usize,
    seed: u64,
) -> Result<(Vec<EventRecord>, SyntheticManifest)> {
    let window = PriceWindow::new(i32::MAX as u32 / 2);
    let dyns = Dynamics::market_only(model, regen, window)?;
    let mut sampler = MarketSampler::new(&dyns);
    let mut rng = path_rng(seed, 0);
    let mut b = initial;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(n_events);
    while out.len() < n_events {
        let Some((dt, ev, next)) = sampler.step(b, &mut rng) else { break };
        t += dt;
        out.push(EventRecord {
            timestamp: round_us(t),
            kind: ev.kind,
            side: ev.side,
            size: ev.size,
            q1_before: b.q1,
            q2_before: b.q2,
            mid_before: b.p as f64,
            spread_before: spread_ticks,
        });
        b = next;
    }
    let mut truth = Vec::new();
    for side in [Side::Bid, Side::Ask] {
        for own in 1..=model.qmax() {
            for opp in 1..=model.qmax() {
                let r = model.table(side).get(own, opp, 1);
                truth.push(TruthRow { side, own, opp, limit: r.limit, cancel: r.cancel, market: r.market });
            }
        }
    }
    let manifest = SyntheticManifest {
        n_events: out.len(),
        seed,
        initial,
        spread_ticks,
        duration: out.last().map_or(0.0, |e| e.timestamp),
        qmax: model.qmax(),
        truth,
    };
    Ok((out, manifest))
}

/// Unit-exponential residuals of a stream: each waiting time times the
/// total event rate of the book it was spent in.
pub fn rescaled_waiting_times(events: &[EventRecord], model: &IntensityModel, start: f64) -> Vec<f64> {
    let mut prev = start;
    events
        .iter()
        .map(|e| {
            let x = (e.timestamp - prev) * model.total_rate(e.q1_before, e.q2_before);
            prev = e.timestamp;
            x
        })
        .collect()
}

/// One-sample Kolmogorov-Smirnov test against the unit exponential.
/// Returns the statistic and its asymptotic p-value.
pub fn ks_exponential(samples: &[f64]) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = 1.0 - (-x).exp();
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    (d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d))
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_stream_still_has_manifest() {
        let m = IntensityModel::constant(5, 0.06, 0.12, 0.5).unwrap();
        let r = RegenerationLaw::point(5, 3, 2, -1).unwrap();
        let (ev, man) = generate_synthetic_events(&m, &r, BookState::new(2, 2, 0), 1, 0, 1).unwrap();
        assert!(ev.is_empty());
        assert_eq!(man.n_events, 0);
        assert_eq!(man.truth.len(), 50);
    }

    #[test]
    fn kolmogorov_tail_known_values() {
        // standard table: P(K > 1.36) ~ 0.049, P(K > 1.63) ~ 0.0098
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 5e-4);
    }
}
