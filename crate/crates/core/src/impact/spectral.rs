//! Closed-form solution of the depletion race for constant unit-size rates.
//!
//! Away from the queue cap the race generator is a Kronecker sum of two
//! tridiagonal Toeplitz blocks. A diagonal similarity makes it symmetric,
//! sine vectors diagonalize it, and the cap rows are a low-rank diagonal
//! correction handled with the Woodbury identity.

use super::race::{DepletionRace, HittingProbabilities};
use crate::error::{Error, Result};
use crate::model::{ConstantRates, IntensityModel};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Eigenpairs of the `n x n` tridiagonal Toeplitz matrix with diagonal `a`
/// and off-diagonals `b`. Eigenvectors are unit-norm.
pub fn tridiagonal_eigenpairs(n: usize, a: f64, b: f64) -> Vec<(f64, Vec<f64>)> {
    let s = sine_basis(n);
    (1..=n)
        .map(|k| (a + 2.0 * b * (k as f64 * PI / (n as f64 + 1.0)).cos(), s.column(k - 1).iter().copied().collect()))
        .collect()
}

pub fn tridiagonal_toeplitz(n: usize, a: f64, b: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { a } else if i.abs_diff(j) == 1 { b } else { 0.0 })
}

/// `I (x) A(a, b) + B(beta) (x) I`; block index first, as in the race.
pub fn kronecker_sum(n: usize, a: f64, b: f64, beta: f64) -> DMatrix<f64> {
    let inner = tridiagonal_toeplitz(n, a, b);
    let outer = tridiagonal_toeplitz(n, 0.0, beta);
    DMatrix::<f64>::identity(n, n).kronecker(&inner) + outer.kronecker(&DMatrix::<f64>::identity(n, n))
}

/// Eigenvalues of [`kronecker_sum`], indexed `j * n + k` with `j` the
/// block mode and `k` the inner mode (both zero-based).
pub fn kronecker_sum_eigenvalues(n: usize, a: f64, b: f64, beta: f64) -> Vec<f64> {
    let c = |m: usize| (m as f64 * PI / (n as f64 + 1.0)).cos();
    let mut out = Vec::with_capacity(n * n);
    for j in 1..=n {
        for k in 1..=n {
            out.push(a + 2.0 * b * c(k) + 2.0 * beta * c(j));
        }
    }
    out
}

/// Orthonormal, symmetric sine matrix `sqrt(2/(n+1)) sin(l k pi/(n+1))`.
fn sine_basis(n: usize) -> DMatrix<f64> {
    let h = n as f64 + 1.0;
    let scale = (2.0 / h).sqrt();
    DMatrix::from_fn(n, n, |l, k| scale * (((l + 1) * (k + 1)) as f64 * PI / h).sin())
}

#[derive(Debug, Clone)]
pub struct SpectralRace {
    pub n: usize,
    pub rates: ConstantRates,
    /// Diagonal of the uncapped core.
    pub a: f64,
    /// Symmetrized coupling along the ask queue.
    pub b: f64,
    /// Symmetrized coupling along the bid queue.
    pub beta: f64,
    scale: Vec<f64>,
    sine: DMatrix<f64>,
    eig: Vec<f64>,
    /// Cap corrections `(state, value)` added to the core diagonal.
    boundary: Vec<(usize, f64)>,
    woodbury: DMatrix<f64>,
    core_boundary_cols: DMatrix<f64>,
}

pub fn spectral_fast_path(model: &IntensityModel) -> Result<SpectralRace> {
    let rates = model
        .constant_rates()
        .ok_or_else(|| Error::Model("spectral path needs constant unit-size intensities".into()))?;
    let ConstantRates { bid_plus, bid_minus, ask_plus, ask_minus } = rates;
    if [bid_plus, bid_minus, ask_plus, ask_minus].iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Model("spectral path needs positive insertion and consumption rates".into()));
    }
    let n = model.qmax() as usize;
    let r1 = (bid_minus / bid_plus).sqrt();
    let r2 = (ask_minus / ask_plus).sqrt();
    let mut scale = vec![0.0; n * n];
    let mut boundary = Vec::new();
    for l in 0..n {
        for r in 0..n {
            scale[l * n + r] = r1.powi(l as i32) * r2.powi(r as i32);
            let c = if l + 1 == n { bid_plus } else { 0.0 } + if r + 1 == n { ask_plus } else { 0.0 };
            if c != 0.0 {
                boundary.push((l * n + r, c));
            }
        }
    }
    let a = -(bid_plus + bid_minus + ask_plus + ask_minus);
    let b = (ask_plus * ask_minus).sqrt();
    let beta = (bid_plus * bid_minus).sqrt();
    let eig = kronecker_sum_eigenvalues(n, a, b, beta);
    if eig.iter().any(|&e| e >= 0.0) {
        return Err(Error::Numeric("uncapped race core is not negative definite".into()));
    }
    let mut s = SpectralRace {
        n,
        rates,
        a,
        b,
        beta,
        scale,
        sine: sine_basis(n),
        eig,
        boundary,
        woodbury: DMatrix::zeros(0, 0),
        core_boundary_cols: DMatrix::zeros(0, 0),
    };
    let m = s.boundary.len();
    let mut cols = DMatrix::zeros(n * n, m);
    for (c, &(idx, _)) in s.boundary.iter().enumerate() {
        let mut e = vec![0.0; n * n];
        e[idx] = 1.0;
        cols.set_column(c, &DVector::from_vec(s.core_solve(&e)));
    }
    let mut w = DMatrix::zeros(m, m);
    for (r, &(ri, cv)) in s.boundary.iter().enumerate() {
        for c in 0..m {
            w[(r, c)] = cols[(ri, c)];
        }
        w[(r, r)] += 1.0 / cv;
    }
    s.woodbury = w.try_inverse().ok_or_else(|| Error::Numeric("capped race correction is singular".into()))?;
    s.core_boundary_cols = cols;
    Ok(s)
}

impl SpectralRace {
    /// Eigenvalues of the symmetrized uncapped core.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig
    }

    /// Sine coefficients `S^T W S`, with `W` laid out by `(q1, q2)`.
    fn transform(&self, w: &[f64]) -> DMatrix<f64> {
        let wm = DMatrix::from_row_slice(self.n, self.n, w);
        self.sine.transpose() * wm * &self.sine
    }

    /// Solves `T x = y` for the uncapped core `T`.
    fn core_solve(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let w: Vec<f64> = y.iter().zip(&self.scale).map(|(v, s)| v / s).collect();
        let mut c = self.transform(&w);
        for j in 0..n {
            for k in 0..n {
                c[(j, k)] /= self.eig[j * n + k];
            }
        }
        let back = &self.sine * c * self.sine.transpose();
        let mut x = vec![0.0; n * n];
        for l in 0..n {
            for r in 0..n {
                x[l * n + r] = back[(l, r)] * self.scale[l * n + r];
            }
        }
        x
    }

    /// Solves `Q* x = y` for the capped race generator.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let base = self.core_solve(y);
        let ub: DVector<f64> = DVector::from_iterator(self.boundary.len(), self.boundary.iter().map(|&(i, _)| base[i]));
        let corr = &self.core_boundary_cols * (&self.woodbury * ub);
        base.iter().zip(corr.iter()).map(|(b, c)| b - c).collect()
    }

    /// The race generator rebuilt from the eigen-decomposition and the cap
    /// correction.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.n;
        let x = self.sine.kronecker(&self.sine);
        let lam = DMatrix::from_diagonal(&DVector::from_fn(n * n, |i, _| {
            // row-major Kronecker index (l, r) pairs block mode l with inner mode r
            let (j, k) = (i / n, i % n);
            self.eig[j * n + k]
        }));
        let sym = &x * lam * x.transpose();
        let mut t = DMatrix::from_fn(n * n, n * n, |i, j| sym[(i, j)] * self.scale[i] / self.scale[j]);
        for &(i, c) in &self.boundary {
            t[(i, i)] += c;
        }
        t
    }

    pub fn hitting_probabilities(&self, race: &DepletionRace) -> Result<HittingProbabilities> {
        if race.qmax as usize != self.n {
            return Err(Error::Model("race and spectral model sizes differ".into()));
        }
        let z = race.exit_matrix();
        let mut m = DMatrix::zeros(race.dim(), z.ncols());
        for c in 0..z.ncols() {
            let rhs: Vec<f64> = z.column(c).iter().map(|v| -v).collect();
            m.set_column(c, &DVector::from_vec(self.solve(&rhs)));
        }
        Ok(HittingProbabilities { matrix: m, exits: race.exits.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impact::{build_depletion_race, hitting_probabilities};

    #[test]
    fn kronecker_eigenvalues_match_generic_solver() {
        let (n, a, b, beta) = (3, -0.36, 0.06, 0.06);
        let mut closed = kronecker_sum_eigenvalues(n, a, b, beta);
        let mut generic: Vec<f64> = kronecker_sum(n, a, b, beta).symmetric_eigen().eigenvalues.iter().copied().collect();
        closed.sort_by(f64::total_cmp);
        generic.sort_by(f64::total_cmp);
        for (c, g) in closed.iter().zip(&generic) {
            assert!((c - g).abs() < 1e-12, "{c} vs {g}");
        }
    }

    #[test]
    fn tridiagonal_eigenvectors_have_small_residual() {
        let m = tridiagonal_toeplitz(4, -0.36, 0.06);
        for (lam, v) in tridiagonal_eigenpairs(4, -0.36, 0.06) {
            let v = DVector::from_vec(v);
            assert!((&m * &v - lam * &v).amax() < 1e-14);
            assert!((v.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn reconstruction_and_solve_match_the_assembled_race() {
        for (lp, lm) in [(0.06, 0.12), (0.3, 0.2)] {
            let model = IntensityModel::constant(6, lp, lm, 0.5).unwrap();
            let race = build_depletion_race(&model).unwrap();
            let s = spectral_fast_path(&model).unwrap();
            let dense = race.dense();
            assert!((s.reconstruct() - &dense).amax() < 1e-9);
            let direct = hitting_probabilities(&race).unwrap();
            let fast = s.hitting_probabilities(&race).unwrap();
            assert!((direct.matrix - fast.matrix).amax() < 1e-10);
        }
    }

    #[test]
    fn refuses_state_dependent_rates() {
        let model = crate::model::ImbalanceRatioRates {
            total_rate: 1.0,
            ratio_at_balance: 1.0,
            imbalance_slope: 1.0,
            market_fraction: 0.5,
        }
        .build(4)
        .unwrap();
        assert!(spectral_fast_path(&model).is_err());
    }
}
