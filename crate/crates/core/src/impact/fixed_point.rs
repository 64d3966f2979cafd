use super::race::{hitting_probabilities, state_index, DepletionRace, HittingProbabilities};
use crate::error::{Error, Result};
use crate::model::{IntensityModel, RegenerationLaw};
use nalgebra::{DMatrix, DVector};

const SYMMETRY_TOL: f64 = 1e-12;

/// Long-run expected mid-price move `D(q1, q2)` in ticks.
#[derive(Debug, Clone)]
pub struct ImpactSolution {
    pub qmax: u32,
    /// Row-major over `(q1, q2)`.
    pub values: Vec<f64>,
    /// Expected price move at the first depletion.
    pub first_move: Vec<f64>,
    /// Law of the book right after the first depletion, `states x states`.
    pub next_book: DMatrix<f64>,
    /// Sup-norm residual of `D = first_move + next_book * D`.
    pub residual: f64,
    /// 1-norm condition number of the folded system.
    pub condition: f64,
}

impl ImpactSolution {
    pub fn get(&self, q1: u32, q2: u32) -> f64 {
        self.values[state_index(self.qmax, q1, q2)]
    }

    /// Zero impact everywhere, for problems that ignore it.
    pub fn zero(qmax: u32) -> Self {
        let n = (qmax * qmax) as usize;
        ImpactSolution {
            qmax,
            values: vec![0.0; n],
            first_move: vec![0.0; n],
            next_book: DMatrix::zeros(n, n),
            residual: 0.0,
            condition: 1.0,
        }
    }
}

/// Expected first price move and post-depletion book law from each state.
pub fn first_depletion_moves(
    race: &DepletionRace,
    hits: &HittingProbabilities,
    regen: &RegenerationLaw,
) -> (Vec<f64>, DMatrix<f64>) {
    let n = race.dim();
    let mut first = vec![0.0; n];
    let mut next = DMatrix::zeros(n, n);
    for (e, exit) in hits.exits.iter().enumerate() {
        let outs = regen.outcomes(exit.side, exit.q1, exit.q2);
        let alpha = regen.expected_move(exit.side, exit.q1, exit.q2);
        for i in 0..n {
            let h = hits.matrix[(i, e)];
            if h == 0.0 {
                continue;
            }
            first[i] += h * alpha;
            for o in outs {
                next[(i, state_index(race.qmax, o.q1, o.q2))] += h * o.prob;
            }
        }
    }
    (first, next)
}

/// Solves for `D` on the half-domain `q1 > q2`, using `D(q2, q1) =
/// -D(q1, q2)` for the rest and `D = 0` on the diagonal.
pub fn impact_fixed_point(model: &IntensityModel, regen: &RegenerationLaw, race: &DepletionRace) -> Result<ImpactSolution> {
    if model.symmetry_defect() > SYMMETRY_TOL || regen.symmetry_defect() > SYMMETRY_TOL {
        return Err(Error::Model(
            "impact folding needs bid/ask symmetric intensities and regeneration".into(),
        ));
    }
    let hits = hitting_probabilities(race)?;
    let (first, next) = first_depletion_moves(race, &hits, regen);
    let qmax = race.qmax;
    let sym = |i: usize| {
        let (q1, q2) = race.state(i);
        state_index(qmax, q2, q1)
    };
    let domain: Vec<usize> = (0..race.dim()).filter(|&i| {
        let (q1, q2) = race.state(i);
        q1 > q2
    }).collect();
    let m = domain.len();
    let mut values = vec![0.0; race.dim()];
    let mut condition = 1.0;
    if m > 0 {
        let mut system = DMatrix::<f64>::identity(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for (a, &i) in domain.iter().enumerate() {
            let stay = next[(i, i)] - next[(i, sym(i))];
            let denom = 1.0 - stay;
            if !(denom > 0.0) {
                return Err(Error::Numeric(format!("book {:?} returns to itself surely", race.state(i))));
            }
            rhs[a] = first[i] / denom;
            for (b, &k) in domain.iter().enumerate() {
                if b != a {
                    system[(a, b)] -= (next[(i, k)] - next[(i, sym(k))]) / denom;
                }
            }
        }
        let inverse = system
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("folded impact system is singular".into()))?;
        let norm1 = |a: &DMatrix<f64>| a.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
        condition = norm1(&system) * norm1(&inverse);
        let d = system
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numeric("folded impact system is singular".into()))?;
        for (a, &i) in domain.iter().enumerate() {
            values[i] = d[a];
            values[sym(i)] = -d[a];
        }
    }
    let dv = DVector::from_column_slice(&values);
    let implied = &next * &dv;
    let residual = (0..race.dim()).map(|i| (values[i] - first[i] - implied[i]).abs()).fold(0.0, f64::max);
    Ok(ImpactSolution { qmax, values, first_move: first, next_book: next, residual, condition })
}
