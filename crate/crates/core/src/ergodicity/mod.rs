//! Numeric checks of the drift assumptions behind ergodicity of the
//! queue process, a Foster-Lyapunov certificate and convergence curves.

use crate::error::{Error, Result};
use crate::model::{BookState, Dynamics, IntensityModel, PriceWindow, RegenerationLaw, Side, Transition};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Grid of `n` log-spaced points in `(1, hi]`.
pub fn log_grid(n: usize, hi: f64) -> Vec<f64> {
    (1..=n).map(|k| hi.powf(k as f64 / n as f64)).collect()
}

/// The queue process `(q1, q2)` with price dropped, as sparse jump rates
/// that keep self-loops (a regeneration may land where it started).
#[derive(Debug, Clone)]
pub struct QueueChain {
    pub qmax: u32,
    pub jumps: Vec<Vec<(usize, f64)>>,
    pub total: Vec<f64>,
}

impl QueueChain {
    pub fn build(model: &IntensityModel, regen: &RegenerationLaw) -> Result<QueueChain> {
        let qmax = model.qmax();
        if regen.qmax() != qmax {
            return Err(Error::Model("intensity and regeneration caps differ".into()));
        }
        let dyns = Dynamics::market_only(model, regen, PriceWindow::new(regen.max_price_move().max(1)))?;
        let n = (qmax * qmax) as usize;
        let mut jumps = vec![Vec::new(); n];
        let mut total = vec![0.0; n];
        let mut events = Vec::new();
        let mut outs: Vec<Transition<BookState>> = Vec::new();
        for q1 in 1..=qmax {
            for q2 in 1..=qmax {
                let i = Self::index_in(qmax, q1, q2);
                dyns.events(q1, q2, &mut events);
                for ev in &events {
                    dyns.book_outcomes(BookState::new(q1, q2, 0), ev, &mut outs);
                    for o in &outs {
                        jumps[i].push((Self::index_in(qmax, o.state.q1, o.state.q2), ev.rate * o.prob));
                    }
                    total[i] += ev.rate;
                }
            }
        }
        Ok(QueueChain { qmax, jumps, total })
    }

    fn index_in(qmax: u32, q1: u32, q2: u32) -> usize {
        ((q1 - 1) * qmax + (q2 - 1)) as usize
    }

    pub fn index(&self, q1: u32, q2: u32) -> usize {
        Self::index_in(self.qmax, q1, q2)
    }

    pub fn state(&self, i: usize) -> (u32, u32) {
        (i as u32 / self.qmax + 1, i as u32 % self.qmax + 1)
    }

    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    /// `(QV)(q)` for a function on the grid.
    pub fn apply_generator(&self, v: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| self.jumps[i].iter().map(|&(j, r)| r * (v[j] - v[i])).sum()).collect()
    }

    /// One step of the embedded jump chain applied to a distribution.
    pub fn jump_step(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            if self.total[i] == 0.0 {
                out[i] += pi;
                continue;
            }
            for &(j, r) in &self.jumps[i] {
                out[j] += pi * r / self.total[i];
            }
        }
        out
    }

    pub fn point_mass(&self, q1: u32, q2: u32) -> Vec<f64> {
        let mut p = vec![0.0; self.len()];
        p[self.index(q1, q2)] = 1.0;
        p
    }

    /// Law after `n` events.
    pub fn after_events(&self, p0: &[f64], n: usize) -> Vec<f64> {
        (0..n).fold(p0.to_vec(), |p, _| self.jump_step(&p))
    }

    /// Law at time `t` by forward uniformization.
    pub fn at_time(&self, p0: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
        let lam = self.total.iter().cloned().fold(0.0, f64::max);
        if lam == 0.0 || t == 0.0 {
            return Ok(p0.to_vec());
        }
        // Poisson weights stay representable when each chunk has mean <= 40
        let chunks = (lam * t / 40.0).ceil().max(1.0) as usize;
        let mean = lam * t / chunks as f64;
        let mut p = p0.to_vec();
        for _ in 0..chunks {
            let mut term = p.clone();
            let mut w = (-mean).exp();
            let mut acc: Vec<f64> = term.iter().map(|x| x * w).collect();
            let mut mass = w;
            let mut k = 0usize;
            while 1.0 - mass > tol {
                k += 1;
                if k > 10_000 {
                    return Err(Error::Numeric("uniformization did not converge".into()));
                }
                term = self.uniformized_step(&term, lam);
                w *= mean / k as f64;
                mass += w;
                for (a, x) in acc.iter_mut().zip(&term) {
                    *a += w * x;
                }
            }
            p = acc.into_iter().map(|x| x / mass).collect();
        }
        Ok(p)
    }

    fn uniformized_step(&self, p: &[f64], lam: f64) -> Vec<f64> {
        let mut out: Vec<f64> = p.iter().enumerate().map(|(i, x)| x * (1.0 - self.total[i] / lam)).collect();
        for (i, &pi) in p.iter().enumerate() {
            for &(j, r) in &self.jumps[i] {
                out[j] += pi * r / lam;
            }
        }
        out
    }

    /// Solves `pi Q = 0`, `sum pi = 1` densely.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let n = self.len();
        if n > 4096 {
            return Err(Error::Numeric(format!("stationary solve limited to 4096 states, got {n}")));
        }
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for &(j, r) in &self.jumps[i] {
                a[(j, i)] += r;
                a[(i, i)] -= r;
            }
        }
        for i in 0..n {
            a[(n - 1, i)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(n);
        b[n - 1] = 1.0;
        let pi = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Numeric("queue chain has no unique stationary law".into()))?;
        Ok(pi.iter().map(|x| x.max(0.0)).collect())
    }
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `sum_n (z^n - 1)(lambda+(n) - lambda-(n) / z^n)` for one side at one book.
pub fn individual_drift(model: &IntensityModel, side: Side, q1: u32, q2: u32, z: f64) -> f64 {
    (1..=model.n_max())
        .map(|n| {
            let r = model.rates(side, q1, q2, n);
            let zn = z.powi(n as i32);
            (zn - 1.0) * (r.limit - r.consumption() / zn)
        })
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftWitness {
    pub z0: f64,
    pub delta: f64,
    pub c_bound: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub q1: u32,
    pub q2: u32,
    pub side: Side,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// Negative drift of large queues.
    pub drift: std::result::Result<DriftWitness, Violation>,
    /// Bound on the total flow per side.
    pub flow_bound: f64,
    pub regen_z1: f64,
    pub regen_c_disc: u32,
    pub regen_l: f64,
    pub jump_z2: f64,
    pub jump_l: f64,
    /// Rates vanish beyond the largest modelled size, so truncating the
    /// series there leaves no tail.
    pub series_tail: f64,
    pub pass: bool,
}

/// Searches witnesses on a log grid of `grid` points in `(1, z_hi]`.
///
/// The drift condition is only checked where the cap does not already
/// switch insertions off, so it is not satisfied by truncation alone.
pub fn check_assumptions(model: &IntensityModel, regen: &RegenerationLaw, grid: usize, z_hi: f64) -> AssumptionReport {
    let q = model.qmax();
    let zs = log_grid(grid.max(1), z_hi);
    let untruncated = |own: u32| own + model.n_max() <= q;

    let mut best: Option<DriftWitness> = None;
    let mut worst_at_top: Option<Violation> = None;
    'bounds: for c_bound in 1..=q {
        for &z0 in &zs {
            let mut max_drift = f64::NEG_INFINITY;
            let mut arg = None;
            for q1 in 1..=q {
                for q2 in 1..=q {
                    for side in [Side::Bid, Side::Ask] {
                        let own = if side == Side::Bid { q1 } else { q2 };
                        if own < c_bound || !untruncated(own) {
                            continue;
                        }
                        let d = individual_drift(model, side, q1, q2, z0);
                        if d > max_drift {
                            max_drift = d;
                            arg = Some((q1, q2, side));
                        }
                    }
                }
            }
            let Some((q1, q2, side)) = arg else { continue };
            if max_drift < 0.0 {
                let w = DriftWitness { z0, delta: -max_drift, c_bound };
                if best.as_ref().is_none_or(|b| w.delta > b.delta) {
                    best = Some(w);
                }
            } else if c_bound == 1 && worst_at_top.as_ref().is_none_or(|v| max_drift < v.margin) {
                worst_at_top = Some(Violation { q1, q2, side, margin: max_drift });
            }
        }
        if best.is_some() {
            break 'bounds;
        }
    }
    let drift = match best {
        Some(w) => Ok(w),
        None => Err(worst_at_top.unwrap_or(Violation { q1: 0, q2: 0, side: Side::Bid, margin: f64::NAN })),
    };

    let flow_bound = model.outflow_bound();
    let z1 = z_hi;
    let mut regen_l: f64 = 0.0;
    for q1 in 1..=q {
        for q2 in 1..=q {
            for side in [Side::Bid, Side::Ask] {
                let e: f64 = regen
                    .outcomes(side, q1, q2)
                    .iter()
                    .map(|o| o.prob * (z1.powi(o.q1 as i32) + z1.powi(o.q2 as i32)))
                    .sum();
                regen_l = regen_l.max(e);
            }
        }
    }
    let z2 = z_hi;
    let mut jump_l: f64 = 0.0;
    for q1 in 1..=q {
        for q2 in 1..=q {
            for side in [Side::Bid, Side::Ask] {
                let s: f64 = (1..=model.n_max()).map(|n| z2.powi(n as i32) * model.rates(side, q1, q2, n).limit).sum();
                jump_l = jump_l.max(s);
            }
        }
    }
    let pass = drift.is_ok() && flow_bound.is_finite() && regen_l.is_finite() && jump_l.is_finite();
    AssumptionReport {
        drift,
        flow_bound,
        regen_z1: z1,
        regen_c_disc: 0,
        regen_l,
        jump_z2: z2,
        jump_l,
        series_tail: 0.0,
        pass,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginRow {
    pub q1: u32,
    pub q2: u32,
    pub v: f64,
    pub qv: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovReport {
    pub z: f64,
    pub c_prime: u32,
    /// Level `v` of the core set `{V <= v}` outside which `QV <= -cV`.
    pub core_level: Option<f64>,
    pub c: f64,
    pub d: f64,
    pub margins: Vec<MarginRow>,
    pub holds: bool,
    pub degenerate: bool,
    /// Largest-`V` state below the cap layer with non-negative drift; it
    /// blocks every admissible core.
    pub first_violation: Option<(u32, u32)>,
}

pub fn lyapunov_function(q1: u32, q2: u32, z: f64, c_prime: u32) -> f64 {
    z.powi(q1.saturating_sub(c_prime) as i32) + z.powi(q2.saturating_sub(c_prime) as i32)
}

/// Foster-Lyapunov certificate `QV <= -cV + d` for
/// `V(q) = sum_i z^{(q_i - C')_+}`, with the smallest sublevel core.
///
/// Cores reaching the top queue layer are not admissible, since the cap
/// alone makes drift negative there.
pub fn lyapunov_drift(chain: &QueueChain, z: f64, c_prime: u32) -> LyapunovReport {
    let q = chain.qmax;
    let v: Vec<f64> = (0..chain.len())
        .map(|i| {
            let (a, b) = chain.state(i);
            lyapunov_function(a, b, z, c_prime)
        })
        .collect();
    let qv = chain.apply_generator(&v);
    let degenerate = chain.total.iter().all(|&t| t == 0.0);
    let top = |i: usize| {
        let (a, b) = chain.state(i);
        a.max(b) == q
    };
    let top_min = (0..chain.len()).filter(|&i| top(i)).map(|i| v[i]).fold(f64::INFINITY, f64::min);
    let mut levels: Vec<f64> = v.iter().copied().filter(|&x| x < top_min).collect();
    levels.sort_by(|a, b| a.total_cmp(b));
    levels.dedup();
    let mut found = None;
    if !degenerate {
        for &lv in &levels {
            let c = (0..chain.len()).filter(|&i| v[i] > lv).map(|i| -qv[i] / v[i]).fold(f64::INFINITY, f64::min);
            if c > 0.0 && c.is_finite() {
                found = Some((lv, c));
                break;
            }
        }
    }
    let (core_level, c) = match found {
        Some((lv, c)) => (Some(lv), c),
        None => (None, 0.0),
    };
    let d = (0..chain.len()).map(|i| qv[i] + c * v[i]).fold(0.0, f64::max);
    let margins: Vec<MarginRow> = (0..chain.len())
        .map(|i| {
            let (a, b) = chain.state(i);
            MarginRow { q1: a, q2: b, v: v[i], qv: qv[i], margin: qv[i] + c * v[i] - d }
        })
        .collect();
    let first_violation = if found.is_none() && !degenerate {
        (0..chain.len())
            .filter(|&i| !top(i) && qv[i] >= 0.0)
            .max_by(|&i, &j| v[i].total_cmp(&v[j]).then(j.cmp(&i)))
            .map(|i| chain.state(i))
    } else {
        None
    };
    LyapunovReport { z, c_prime, core_level, c, d, margins, holds: found.is_some(), degenerate, first_violation }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceCurve {
    pub initial: (u32, u32),
    pub times: Vec<f64>,
    pub tv: Vec<f64>,
    /// Least-squares slope of `ln TV` against time over positive points.
    pub log_slope: f64,
}

/// Total variation to the stationary law along `times`.
pub fn convergence_diagnostics(chain: &QueueChain, initials: &[(u32, u32)], times: &[f64]) -> Result<Vec<ConvergenceCurve>> {
    let pi = chain.stationary()?;
    initials
        .iter()
        .map(|&(a, b)| {
            let p0 = chain.point_mass(a, b);
            let mut tv = Vec::with_capacity(times.len());
            for &t in times {
                tv.push(total_variation(&chain.at_time(&p0, t, 1e-13)?, &pi));
            }
            let pts: Vec<(f64, f64)> =
                times.iter().zip(&tv).filter(|(_, &x)| x > 1e-12).map(|(&t, &x)| (t, x.ln())).collect();
            Ok(ConvergenceCurve { initial: (a, b), times: times.to_vec(), tv, log_slope: slope(&pts) })
        })
        .collect()
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
