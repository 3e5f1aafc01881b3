//! Couplings and Wasserstein distances.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus};
use crate::measures::{quantile_cells, DiscreteMeasure1D, DiscreteMeasureND, NormSpec};

/// Entries above `-CLAMP_TOL` but below zero are rounded up to zero.
const CLAMP_TOL: f64 = 1e-14;

/// Joint weights on `row_support x col_support`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling {
    row_support: Vec<Vec<f64>>,
    col_support: Vec<Vec<f64>>,
    matrix: Vec<f64>,
    row_weights: Vec<f64>,
    col_weights: Vec<f64>,
}

impl Coupling {
    /// Builds a coupling between the two measures from a row-major weight matrix.
    pub fn new(mu: &DiscreteMeasureND, nu: &DiscreteMeasureND, mut matrix: Vec<f64>) -> Result<Self> {
        if mu.dim() != nu.dim() {
            return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
        }
        if matrix.len() != mu.len() * nu.len() {
            return Err(Error::InvalidMeasure(format!(
                "coupling matrix has {} entries, expected {}",
                matrix.len(),
                mu.len() * nu.len()
            )));
        }
        for v in &mut matrix {
            if !v.is_finite() || *v < -CLAMP_TOL {
                return Err(Error::InvalidMeasure(format!("coupling entry {v} is negative")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self {
            row_support: mu.points().to_vec(),
            col_support: nu.points().to_vec(),
            matrix,
            row_weights: mu.weights().to_vec(),
            col_weights: nu.weights().to_vec(),
        })
    }

    pub fn from_1d(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D, matrix: Vec<f64>) -> Result<Self> {
        Self::new(&mu.to_nd(), &nu.to_nd(), matrix)
    }

    /// The coupling `(id, id)_# m`.
    pub fn identity(m: &DiscreteMeasureND) -> Self {
        let n = m.len();
        let mut matrix = vec![0.0; n * n];
        for (i, w) in m.weights().iter().enumerate() {
            matrix[i * n + i] = *w;
        }
        Self {
            row_support: m.points().to_vec(),
            col_support: m.points().to_vec(),
            matrix,
            row_weights: m.weights().to_vec(),
            col_weights: m.weights().to_vec(),
        }
    }

    /// The product coupling `mu (x) nu`.
    pub fn independent(mu: &DiscreteMeasureND, nu: &DiscreteMeasureND) -> Result<Self> {
        let matrix = mu
            .weights()
            .iter()
            .flat_map(|a| nu.weights().iter().map(move |b| a * b))
            .collect();
        Self::new(mu, nu, matrix)
    }

    pub fn n_rows(&self) -> usize {
        self.row_support.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_support.len()
    }

    pub fn dim(&self) -> usize {
        self.row_support.first().map_or(0, |p| p.len())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n_cols() + j]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn row_support(&self) -> &[Vec<f64>] {
        &self.row_support
    }

    pub fn col_support(&self) -> &[Vec<f64>] {
        &self.col_support
    }

    /// Target row marginal weights.
    pub fn row_weights(&self) -> &[f64] {
        &self.row_weights
    }

    /// Target column marginal weights.
    pub fn col_weights(&self) -> &[f64] {
        &self.col_weights
    }

    pub fn row_measure(&self) -> DiscreteMeasureND {
        DiscreteMeasureND::new(self.dim(), self.row_support.clone(), self.row_weights.clone())
            .expect("row marginal of a valid coupling")
    }

    pub fn col_measure(&self) -> DiscreteMeasureND {
        DiscreteMeasureND::new(self.dim(), self.col_support.clone(), self.col_weights.clone())
            .expect("column marginal of a valid coupling")
    }

    /// Nonzero entries as `(i, j, weight)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let m = self.n_cols();
        self.matrix
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(move |(k, w)| (k / m, k % m, *w))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.chunks(self.n_cols().max(1)).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let m = self.n_cols();
        let mut s = vec![0.0; m];
        for (k, w) in self.matrix.iter().enumerate() {
            s[k % m] += w;
        }
        s
    }

    /// `max_i |sum_j m_ij - mu_i|`.
    pub fn row_residual(&self) -> f64 {
        self.row_sums()
            .iter()
            .zip(&self.row_weights)
            .fold(0.0, |a, (s, w)| a.max((s - w).abs()))
    }

    /// `max_j |sum_i m_ij - nu_j|`.
    pub fn col_residual(&self) -> f64 {
        self.col_sums()
            .iter()
            .zip(&self.col_weights)
            .fold(0.0, |a, (s, w)| a.max((s - w).abs()))
    }

    pub fn marginal_residual(&self) -> f64 {
        self.row_residual().max(self.col_residual())
    }

    /// `max_{i,k} |sum_j m_ij (y_j - x_i)_k|`.
    pub fn martingale_residual(&self) -> f64 {
        let m = self.n_cols();
        let d = self.dim();
        let mut worst = 0.0_f64;
        for (i, x) in self.row_support.iter().enumerate() {
            for k in 0..d {
                let s: f64 = (0..m)
                    .map(|j| self.matrix[i * m + j] * (self.col_support[j][k] - x[k]))
                    .sum();
                worst = worst.max(s.abs());
            }
        }
        worst
    }

    /// `sum m_ij |x_i - y_j|^rho`.
    pub fn cost(&self, rho: f64, norm: &NormSpec) -> f64 {
        self.entries()
            .map(|(i, j, w)| w * norm.dist(&self.row_support[i], &self.col_support[j]).powf(rho))
            .sum()
    }

    /// `sum m_ij c(x_i, y_j)` for an arbitrary cost.
    pub fn cost_with<F: Fn(&[f64], &[f64]) -> f64>(&self, c: F) -> f64 {
        self.entries()
            .map(|(i, j, w)| w * c(&self.row_support[i], &self.col_support[j]))
            .sum()
    }

    /// The coupling with rows and columns exchanged.
    pub fn transpose(&self) -> Self {
        let (n, m) = (self.n_rows(), self.n_cols());
        let mut matrix = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                matrix[j * n + i] = self.matrix[i * m + j];
            }
        }
        Self {
            row_support: self.col_support.clone(),
            col_support: self.row_support.clone(),
            matrix,
            row_weights: self.col_weights.clone(),
            col_weights: self.row_weights.clone(),
        }
    }

    /// Largest entrywise difference after matching supports point by point.
    ///
    /// Returns `None` when the supports differ.
    pub fn max_entry_diff(&self, other: &Self, tol: f64) -> Option<f64> {
        let find = |pts: &[Vec<f64>], p: &[f64]| {
            pts.iter()
                .position(|q| q.iter().zip(p).all(|(a, b)| (a - b).abs() <= tol))
        };
        if self.n_rows() != other.n_rows() || self.n_cols() != other.n_cols() {
            return None;
        }
        let rows: Option<Vec<usize>> = self.row_support.iter().map(|p| find(&other.row_support, p)).collect();
        let cols: Option<Vec<usize>> = self.col_support.iter().map(|p| find(&other.col_support, p)).collect();
        let (rows, cols) = (rows?, cols?);
        let mut worst = 0.0_f64;
        for (i, oi) in rows.iter().enumerate() {
            for (j, oj) in cols.iter().enumerate() {
                worst = worst.max((self.get(i, j) - other.get(*oi, *oj)).abs());
            }
        }
        Some(worst)
    }

    /// Triplet CSV `i,j,weight` of the nonzero entries.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("i,j,weight\n");
        for (i, j, w) in self.entries() {
            s.push_str(&format!("{i},{j},{w:.16e}\n"));
        }
        s
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_nan() || rho < 1.0 || rho.is_infinite() {
        return Err(Error::Domain(format!("rho must be a finite real >= 1, got {rho}")));
    }
    Ok(())
}

/// `W_rho` on the line from the quantile functions, summed exactly over the
/// merged partition.
pub fn w_rho_1d(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let (x, y) = (mu.atoms(), nu.atoms());
    let s: f64 = quantile_cells(mu, nu)
        .iter()
        .map(|c| c.len() * (x[c.i] - y[c.j]).abs().powf(rho))
        .sum();
    Ok(s.powf(1.0 / rho))
}

/// The comonotone (quantile) coupling of two measures on the line; it is
/// optimal for every convex cost of `x - y`.
pub fn comonotone_coupling(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D) -> Coupling {
    let m = nu.len();
    let mut matrix = vec![0.0; mu.len() * m];
    for c in quantile_cells(mu, nu) {
        matrix[c.i * m + c.j] += c.len();
    }
    Coupling::from_1d(mu, nu, matrix).expect("comonotone coupling is nonnegative")
}

/// Builds the transportation LP: variable `(i, j)` at index `i * m + j`,
/// rows for the `n` row sums and the first `m - 1` column sums.
pub(crate) fn transport_lp(mu: &DiscreteMeasureND, nu: &DiscreteMeasureND, cost: &[f64]) -> LinearProgram {
    let (n, m) = (mu.len(), nu.len());
    let mut rhs = mu.weights().to_vec();
    rhs.extend_from_slice(&nu.weights()[..m - 1]);
    let mut lp = LinearProgram::new(rhs);
    for i in 0..n {
        for j in 0..m {
            let mut col = vec![(i, 1.0)];
            if j + 1 < m {
                col.push((n + j, 1.0));
            }
            lp.add_column(cost[i * m + j], col);
        }
    }
    lp
}

/// `|x_i - y_j|^rho` for every pair, row-major.
pub fn cost_matrix(mu: &DiscreteMeasureND, nu: &DiscreteMeasureND, rho: f64, norm: &NormSpec) -> Vec<f64> {
    mu.points()
        .iter()
        .flat_map(|x| nu.points().iter().map(move |y| norm.dist(x, y).powf(rho)))
        .collect()
}

/// Optimal transport between `mu` and `nu` for an arbitrary cost matrix.
/// Returns the optimal value and coupling.
pub fn transport_with_cost(mu: &DiscreteMeasureND, nu: &DiscreteMeasureND, cost: &[f64]) -> Result<(f64, Coupling)> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let sol = transport_lp(mu, nu, cost).solve();
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Lp("reported an infeasible transportation problem")),
        LpStatus::Unbounded => return Err(Error::Lp("is unbounded")),
        LpStatus::IterationLimit => return Err(Error::Lp("hit the iteration limit")),
    }
    let coupling = Coupling::new(mu, nu, sol.primal)?;
    Ok((coupling.cost_with_matrix(cost), coupling))
}

impl Coupling {
    fn cost_with_matrix(&self, cost: &[f64]) -> f64 {
        self.matrix.iter().zip(cost).map(|(w, c)| w * c).sum()
    }
}

/// `W_rho` by linear programming over the transportation polytope, with an
/// optimal coupling.
pub fn w_rho_nd(
    mu: &DiscreteMeasureND,
    nu: &DiscreteMeasureND,
    rho: f64,
    norm: &NormSpec,
) -> Result<(f64, Coupling)> {
    check_rho(rho)?;
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let cost = cost_matrix(mu, nu, rho, norm);
    let (v, coupling) = transport_with_cost(mu, nu, &cost)?;
    Ok((v.max(0.0).powf(1.0 / rho), coupling))
}

/// `W_rho`, using the quantile formula when both measures live on the line.
pub fn wasserstein(mu: &DiscreteMeasureND, nu: &DiscreteMeasureND, rho: f64, norm: &NormSpec) -> Result<f64> {
    if mu.dim() == 1 && nu.dim() == 1 {
        return w_rho_1d(&mu.to_1d()?, &nu.to_1d()?, rho);
    }
    Ok(w_rho_nd(mu, nu, rho, norm)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(a: f64) -> DiscreteMeasure1D {
        DiscreteMeasure1D::new(vec![-a, a], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn two_atom_distance_is_b_minus_a() {
        for rho in [1.0, 1.5, 2.0, 3.0] {
            let w = w_rho_1d(&sym(1.0), &sym(3.0), rho).unwrap();
            assert!((w - 2.0).abs() < 1e-14);
        }
        let m = DiscreteMeasure1D::new(vec![0.0, 1.0, 4.0], vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(w_rho_1d(&m, &m, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn dirac_to_dirac() {
        let x = DiscreteMeasureND::dirac(vec![0.0, 0.0]);
        let y = DiscreteMeasureND::dirac(vec![3.0, 4.0]);
        let (w, c) = w_rho_nd(&x, &y, 1.0, &NormSpec::euclidean()).unwrap();
        assert!((w - 5.0).abs() < 1e-12);
        assert_eq!(c.matrix(), &[1.0]);
    }

    #[test]
    fn lp_agrees_with_quantile_formula() {
        let mu = DiscreteMeasure1D::new(vec![-1.0, 0.2, 0.7, 2.0, 3.5], vec![0.1, 0.2, 0.3, 0.15, 0.25]).unwrap();
        let nu = DiscreteMeasure1D::new(vec![-2.0, 0.0, 1.0, 1.5, 4.0], vec![0.3, 0.1, 0.2, 0.2, 0.2]).unwrap();
        for rho in [1.0, 1.7, 2.0, 3.0] {
            let exact = w_rho_1d(&mu, &nu, rho).unwrap();
            let (lp, c) = w_rho_nd(&mu.to_nd(), &nu.to_nd(), rho, &NormSpec::euclidean()).unwrap();
            assert!((exact - lp).abs() <= 1e-9 * exact, "rho {rho}: {exact} vs {lp}");
            assert!(c.marginal_residual() < 1e-12);
        }
    }

    #[test]
    fn coupling_bookkeeping() {
        let mu = sym(1.0).to_nd();
        let id = Coupling::identity(&mu);
        assert_eq!(id.cost(2.0, &NormSpec::euclidean()), 0.0);
        assert_eq!(id.martingale_residual(), 0.0);
        assert_eq!(id.marginal_residual(), 0.0);
        let t = Coupling::independent(&mu, &sym(2.0).to_nd()).unwrap().transpose();
        assert_eq!(t.n_rows(), 2);
        assert!(t.marginal_residual() < 1e-15);
        assert!(Coupling::new(&mu, &mu, vec![0.5, -0.1, 0.0, 0.5]).is_err());
    }
}
