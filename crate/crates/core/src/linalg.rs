//! Sparse generators and uniformization.

use crate::error::{Error, Result};

/// Continuous-time generator in compressed-row form. Off-diagonal entries
/// are stored per row; the diagonal makes every row sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl GeneratorMatrix {
    /// Builds from per-row `(column, rate)` lists. Duplicate destinations
    /// are summed and self-loops dropped.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = vec![0.0; n];
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.retain(|&(j, r)| j != i && r != 0.0);
            row.sort_by_key(|&(j, _)| j);
            let mut out = 0.0;
            let mut last: Option<usize> = None;
            for (j, r) in row {
                assert!(j < n, "column {j} out of range");
                out += r;
                if last == Some(j) {
                    *vals.last_mut().unwrap() += r;
                } else {
                    cols.push(j);
                    vals.push(r);
                    last = Some(j);
                }
            }
            diag[i] = -out;
            row_ptr.push(cols.len());
        }
        GeneratorMatrix { row_ptr, cols, vals, diag }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// Largest `|sum of row|`; zero up to rounding for a valid generator.
    pub fn max_row_sum_defect(&self) -> f64 {
        (0..self.dim()).map(|i| (self.row(i).map(|(_, v)| v).sum::<f64>() + self.diag[i]).abs()).fold(0.0, f64::max)
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().map(|d| -d).fold(0.0, f64::max)
    }

    /// `y = Q x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.dim() {
            let mut s = self.diag[i] * x[i];
            for (j, v) in self.row(i) {
                s += v * x[j];
            }
            y[i] = s;
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }
}

/// Largest uniformized Poisson mean handled in one sub-step.
const MAX_STEP_MASS: f64 = 40.0;
/// Hard cap on Poisson terms, a guard against pathological inputs.
const MAX_TERMS: usize = 10_000;

/// Uniformization of `e^{tQ}` applied to vectors.
#[derive(Debug, Clone)]
pub struct Uniformizer<'a> {
    q: &'a GeneratorMatrix,
    rate: f64,
    tol: f64,
    pub terms_used: usize,
}

impl<'a> Uniformizer<'a> {
    pub fn new(q: &'a GeneratorMatrix, tol: f64) -> Self {
        Uniformizer { q, rate: q.max_exit_rate(), tol, terms_used: 0 }
    }

    fn weights(&self, mass: f64) -> Result<Vec<f64>> {
        let mut w = Vec::new();
        let mut term = (-mass).exp();
        let mut cum = 0.0;
        let mut k = 0usize;
        loop {
            w.push(term);
            cum += term;
            if 1.0 - cum <= self.tol || (k as f64 > mass && term < self.tol * 1e-3) {
                break;
            }
            k += 1;
            if k > MAX_TERMS {
                return Err(Error::Numeric(format!(
                    "uniformization did not converge: Poisson mass {mass}, tail {} after {MAX_TERMS} terms",
                    1.0 - cum
                )));
            }
            term *= mass / k as f64;
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        Ok(w)
    }

    /// `x + Q x / rate`, the uniformized jump kernel.
    fn jump(&self, x: &[f64], y: &mut [f64]) {
        self.q.apply(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi + *yi / self.rate;
        }
    }

    fn step(&mut self, dt: f64, x: &[f64], integrand: Option<&[f64]>) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let n = x.len();
        let mass = self.rate * dt;
        let w = self.weights(mass)?;
        self.terms_used += w.len();
        let mut out = vec![0.0; n];
        let mut cur = x.to_vec();
        let mut next = vec![0.0; n];
        for (k, wk) in w.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(&cur) {
                *o += wk * c;
            }
            if k + 1 < w.len() {
                self.jump(&cur, &mut next);
                std::mem::swap(&mut cur, &mut next);
            }
        }
        let integral = match integrand {
            None => None,
            Some(y) => {
                // int_0^dt e^{sQ} y ds = sum_k P(N > k) / rate * J^k y
                let mut acc = vec![0.0; n];
                let mut cur = y.to_vec();
                let mut cum = 0.0;
                let mut k = 0;
                loop {
                    cum += w.get(k).copied().unwrap_or(0.0);
                    let tail = (1.0 - cum).max(0.0);
                    if tail <= self.tol * 1e-3 || k >= MAX_TERMS {
                        break;
                    }
                    let c = tail / self.rate;
                    for (a, v) in acc.iter_mut().zip(&cur) {
                        *a += c * v;
                    }
                    self.jump(&cur, &mut next);
                    std::mem::swap(&mut cur, &mut next);
                    k += 1;
                }
                Some(acc)
            }
        };
        Ok((out, integral))
    }

    /// `e^{tQ} x` and, when requested, `int_0^t e^{sQ} y ds`.
    pub fn propagate(&mut self, t: f64, x: &[f64], y: Option<&[f64]>) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        if t < 0.0 {
            return Err(Error::Numeric(format!("negative propagation time {t}")));
        }
        if self.rate == 0.0 || t == 0.0 {
            return Ok((x.to_vec(), y.map(|y| y.iter().map(|v| v * t).collect())));
        }
        let m = (self.rate * t / MAX_STEP_MASS).ceil().max(1.0) as usize;
        let dt = t / m as f64;
        let mut x = x.to_vec();
        let mut acc: Option<Vec<f64>> = None;
        let mut seg: Option<Vec<f64>> = None;
        for j in 0..m {
            let (nx, ni) = self.step(dt, &x, if j == 0 { y } else { None })?;
            x = nx;
            if j == 0 {
                seg = ni;
                acc = seg.clone();
            } else if let Some(s) = seg.take() {
                // shift the first segment's integral forward by j sub-steps
                let (ns, _) = self.step(dt, &s, None)?;
                if let Some(a) = acc.as_mut() {
                    a.iter_mut().zip(&ns).for_each(|(a, v)| *a += v);
                }
                seg = Some(ns);
            }
        }
        Ok((x, acc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(a: f64, b: f64) -> GeneratorMatrix {
        GeneratorMatrix::from_rows(vec![vec![(1, a)], vec![(0, b)]])
    }

    #[test]
    fn duplicates_merge_and_self_loops_drop() {
        let q = GeneratorMatrix::from_rows(vec![vec![(1, 1.0), (1, 2.0), (0, 5.0)], vec![]]);
        assert_eq!(q.get(0, 1), 3.0);
        assert_eq!(q.get(0, 0), -3.0);
        assert_eq!(q.nnz(), 1);
        assert_eq!(q.max_row_sum_defect(), 0.0);
    }

    #[test]
    fn two_state_exponential_matches_closed_form() {
        let (a, b) = (0.7, 0.3);
        let q = two_state(a, b);
        let mut u = Uniformizer::new(&q, 1e-14);
        for &t in &[0.1, 1.0, 5.0, 200.0] {
            let (x, integral) = u.propagate(t, &[1.0, 0.0], Some(&[1.0, 0.0])).unwrap();
            let s = a + b;
            let e = (-s * t).exp();
            // P_00(t) = b/s + a/s e^{-st}; P_10(t) = b/s - b/s e^{-st}
            assert!((x[0] - (b / s + a / s * e)).abs() < 1e-12, "t={t}");
            assert!((x[1] - (b / s - b / s * e)).abs() < 1e-12, "t={t}");
            let i = integral.unwrap();
            let i0 = b / s * t + a / (s * s) * (1.0 - e);
            let i1 = b / s * t - b / (s * s) * (1.0 - e);
            assert!((i[0] - i0).abs() < 1e-9 * t.max(1.0), "t={t}: {} vs {i0}", i[0]);
            assert!((i[1] - i1).abs() < 1e-9 * t.max(1.0), "t={t}: {} vs {i1}", i[1]);
        }
    }
}
