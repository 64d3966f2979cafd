use crate::error::{Error, Result};
use crate::model::{IntensityModel, Side};
use nalgebra::DMatrix;

/// A first depletion of `side` out of the book `(q1, q2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Exit {
    pub side: Side,
    pub q1: u32,
    pub q2: u32,
}

/// Queue dynamics up to the first time either best queue empties. Exits
/// are kept apart by the state they leave from, because the regeneration
/// law depends on it.
#[derive(Debug, Clone)]
pub struct DepletionRace {
    pub qmax: u32,
    /// Transient-to-transient rates per state.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Minus the total outflow, exits included.
    pub diag: Vec<f64>,
    pub exits: Vec<Exit>,
    /// `(exit index, rate)` available from each state.
    pub exit_rates: Vec<Vec<(usize, f64)>>,
}

impl DepletionRace {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn index(&self, q1: u32, q2: u32) -> usize {
        state_index(self.qmax, q1, q2)
    }

    pub fn state(&self, i: usize) -> (u32, u32) {
        (i as u32 / self.qmax + 1, i as u32 % self.qmax + 1)
    }

    /// The transient block as a dense matrix.
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            for &(j, r) in &self.rows[i] {
                m[(i, j)] += r;
            }
        }
        m
    }

    /// Exit rates as a dense `states x exits` matrix.
    pub fn exit_matrix(&self) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.dim(), self.exits.len());
        for (i, row) in self.exit_rates.iter().enumerate() {
            for &(e, r) in row {
                z[(i, e)] += r;
            }
        }
        z
    }
}

pub(crate) fn state_index(qmax: u32, q1: u32, q2: u32) -> usize {
    ((q1 - 1) * qmax + (q2 - 1)) as usize
}

pub fn build_depletion_race(model: &IntensityModel) -> Result<DepletionRace> {
    let qmax = model.qmax();
    let n = (qmax * qmax) as usize;
    let mut rows = vec![Vec::new(); n];
    let mut diag = vec![0.0; n];
    let mut exits = Vec::new();
    let mut exit_rates = vec![Vec::new(); n];
    for q1 in 1..=qmax {
        for q2 in 1..=qmax {
            let i = state_index(qmax, q1, q2);
            let mut out = 0.0;
            for k in 1..=model.n_max() {
                let b = model.rates(Side::Bid, q1, q2, k);
                let a = model.rates(Side::Ask, q1, q2, k);
                if q1 + k <= qmax && b.limit > 0.0 {
                    rows[i].push((state_index(qmax, q1 + k, q2), b.limit));
                    out += b.limit;
                }
                if q2 + k <= qmax && a.limit > 0.0 {
                    rows[i].push((state_index(qmax, q1, q2 + k), a.limit));
                    out += a.limit;
                }
                if k < q1 && b.consumption() > 0.0 {
                    rows[i].push((state_index(qmax, q1 - k, q2), b.consumption()));
                    out += b.consumption();
                }
                if k < q2 && a.consumption() > 0.0 {
                    rows[i].push((state_index(qmax, q1, q2 - k), a.consumption()));
                    out += a.consumption();
                }
            }
            for side in [Side::Bid, Side::Ask] {
                let r = model.depletion_rate(side, q1, q2);
                if r > 0.0 {
                    exit_rates[i].push((exits.len(), r));
                    exits.push(Exit { side, q1, q2 });
                    out += r;
                }
            }
            diag[i] = -out;
        }
    }
    let race = DepletionRace { qmax, rows, diag, exits, exit_rates };
    check_depletion_reachable(&race)?;
    Ok(race)
}

/// Every transient state must be able to reach a depletion.
fn check_depletion_reachable(race: &DepletionRace) -> Result<()> {
    let n = race.dim();
    let mut incoming = vec![Vec::new(); n];
    for (i, row) in race.rows.iter().enumerate() {
        for &(j, _) in row {
            incoming[j].push(i);
        }
    }
    let mut ok = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&i| !race.exit_rates[i].is_empty()).collect();
    for &i in &stack {
        ok[i] = true;
    }
    while let Some(j) = stack.pop() {
        for &i in &incoming[j] {
            if !ok[i] {
                ok[i] = true;
                stack.push(i);
            }
        }
    }
    let stuck: Vec<(u32, u32)> = (0..n).filter(|&i| !ok[i]).map(|i| race.state(i)).collect();
    if !stuck.is_empty() {
        return Err(Error::Numeric(format!(
            "no depletion is reachable from {} book states, e.g. {:?}",
            stuck.len(),
            &stuck[..stuck.len().min(5)]
        )));
    }
    Ok(())
}

/// Distribution of the first depletion from each transient state.
#[derive(Debug, Clone)]
pub struct HittingProbabilities {
    /// `states x exits`; each row sums to one.
    pub matrix: DMatrix<f64>,
    pub exits: Vec<Exit>,
}

impl HittingProbabilities {
    /// Probability that the bid empties first, starting from `i`.
    pub fn bid_first(&self, i: usize) -> f64 {
        self.exits.iter().enumerate().filter(|(_, e)| e.side == Side::Bid).map(|(k, _)| self.matrix[(i, k)]).sum()
    }

    /// Starting on an exit means having already hit it.
    pub fn from_exit(&self, e: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.exits.len()];
        v[e] = 1.0;
        v
    }

    pub fn max_row_sum_defect(&self) -> f64 {
        self.matrix.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Largest race handled by dense LU; bigger ones go through Gauss-Seidel.
pub const DENSE_LIMIT: usize = 4096;

pub fn hitting_probabilities(race: &DepletionRace) -> Result<HittingProbabilities> {
    let z = race.exit_matrix();
    let matrix = solve_against(race, &z)?;
    Ok(HittingProbabilities { matrix, exits: race.exits.clone() })
}

/// Solves `-Q* X = B` for a block of right-hand sides.
pub(crate) fn solve_against(race: &DepletionRace, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if race.dim() <= DENSE_LIMIT {
        let a = -race.dense();
        let lu = a.lu();
        lu.solve(b).ok_or_else(|| Error::Numeric("depletion race generator is singular".into()))
    } else {
        gauss_seidel(race, b, 1e-12, 100_000)
    }
}

fn gauss_seidel(race: &DepletionRace, b: &DMatrix<f64>, tol: f64, max_sweeps: usize) -> Result<DMatrix<f64>> {
    let n = race.dim();
    let mut x = DMatrix::<f64>::zeros(n, b.ncols());
    for sweep in 0..max_sweeps {
        let mut change: f64 = 0.0;
        for i in 0..n {
            let d = -race.diag[i];
            for c in 0..b.ncols() {
                let mut s = b[(i, c)];
                for &(j, r) in &race.rows[i] {
                    s += r * x[(j, c)];
                }
                let v: f64 = s / d;
                change = change.max((v - x[(i, c)]).abs());
                x[(i, c)] = v;
            }
        }
        if change < tol {
            log::debug!("Gauss-Seidel converged after {} sweeps", sweep + 1);
            return Ok(x);
        }
    }
    Err(Error::Numeric(format!("Gauss-Seidel did not reach {tol} in {max_sweeps} sweeps")))
}
