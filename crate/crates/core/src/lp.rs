//! Dense two-phase revised simplex for `min c.x  s.t.  A x = b, x >= 0`.
//!
//! Columns are stored sparsely; the basis inverse is kept as a dense matrix,
//! updated by elementary row operations and rebuilt by Gauss-Jordan elimination
//! every [`REFACTOR_EVERY`] pivots. Pricing is Dantzig's rule; after a run of
//! degenerate pivots the solver switches to Bland's rule until the objective
//! moves again, which rules out cycling.

use serde::Serialize;

const REFACTOR_EVERY: usize = 64;
const DEGENERATE_RUN: usize = 50;
const PIVOT_TOL: f64 = 1e-9;
const PHASE_ONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// Dual values, one per constraint row (in the caller's row orientation).
    pub certificate: Vec<f64>,
    pub iterations: usize,
    /// `max |A x - b|` at the returned point.
    pub primal_residual: f64,
    /// `|c.x - b.y|`.
    pub duality_gap: f64,
    /// Sum of the artificial variables at the end of phase one.
    pub infeasibility: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Equality-form linear program with nonnegative variables.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    n_rows: usize,
    costs: Vec<f64>,
    columns: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(rhs: Vec<f64>) -> Self {
        Self {
            n_rows: rhs.len(),
            costs: Vec::new(),
            columns: Vec::new(),
            rhs,
        }
    }

    /// Appends a variable with the given cost and sparse column `(row, coef)`.
    pub fn add_column(&mut self, cost: f64, entries: Vec<(usize, f64)>) -> usize {
        debug_assert!(entries.iter().all(|(r, _)| *r < self.n_rows));
        self.costs.push(cost);
        self.columns.push(entries.into_iter().filter(|(_, v)| *v != 0.0).collect());
        self.columns.len() - 1
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn set_cost(&mut self, j: usize, cost: f64) {
        self.costs[j] = cost;
    }

    /// Multiplies row `r` (coefficients and right-hand side) by `s`.
    pub fn scale_row(&mut self, r: usize, s: f64) {
        for col in &mut self.columns {
            for (row, v) in col.iter_mut() {
                if *row == r {
                    *v *= s;
                }
            }
        }
        self.rhs[r] *= s;
    }

    /// `max_r |(A x - b)_r|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n_rows];
        for (col, xj) in self.columns.iter().zip(x) {
            for &(r, v) in col {
                ax[r] += v * xj;
            }
        }
        ax.iter().zip(&self.rhs).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn solve(&self) -> LpSolution {
        Simplex::new(self).run()
    }
}

/// Solves `min c.x` subject to `A x = b`, `x >= 0` for a dense row-major `A`.
///
/// Infeasibility and unboundedness are reported through [`LpSolution::status`].
pub fn lp_solve(costs: &[f64], constraint_matrix: &[Vec<f64>], rhs: &[f64]) -> LpSolution {
    let mut lp = LinearProgram::new(rhs.to_vec());
    for (j, c) in costs.iter().enumerate() {
        let col = constraint_matrix
            .iter()
            .enumerate()
            .filter_map(|(r, row)| (row[j] != 0.0).then_some((r, row[j])))
            .collect();
        lp.add_column(*c, col);
    }
    lp.solve()
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    m: usize,
    n: usize,
    // rows flipped so that b >= 0
    sign: Vec<f64>,
    b: Vec<f64>,
    // basis[r] = variable index; indices >= n are artificials (n + row)
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    max_iterations: usize,
    infeasibility: f64,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram) -> Self {
        let m = lp.n_rows;
        let n = lp.columns.len();
        let sign: Vec<f64> = lp.rhs.iter().map(|b| if *b < 0.0 { -1.0 } else { 1.0 }).collect();
        let b: Vec<f64> = lp.rhs.iter().zip(&sign).map(|(b, s)| b * s).collect();
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = 1.0;
        }
        let mut in_basis = vec![false; n + m];
        for r in 0..m {
            in_basis[n + r] = true;
        }
        Self {
            lp,
            m,
            n,
            xb: b.clone(),
            sign,
            b,
            basis: (n..n + m).collect(),
            in_basis,
            binv,
            since_refactor: 0,
            iterations: 0,
            max_iterations: 50_000 + 50 * (n + m),
            infeasibility: f64::NAN,
        }
    }

    /// Entry `(row, value)` list of column `j`, with rows flipped.
    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j >= self.n {
            vec![(j - self.n, 1.0)]
        } else {
            self.lp.columns[j].iter().map(|&(r, v)| (r, v * self.sign[r])).collect()
        }
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for (r, v) in self.column(j) {
            for (i, wi) in w.iter_mut().enumerate() {
                *wi += self.binv[i * m + r] * v;
            }
        }
        w
    }

    fn duals(&self, cost: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &bv) in self.basis.iter().enumerate() {
            let c = cost(bv);
            if c == 0.0 {
                continue;
            }
            let row = &self.binv[i * m..(i + 1) * m];
            for (yk, bk) in y.iter_mut().zip(row) {
                *yk += c * bk;
            }
        }
        y
    }

    /// `c_j - y.A_j`, where `ys` holds the duals already multiplied by the row signs.
    fn reduced_cost(&self, j: usize, cj: f64, ys: &[f64]) -> f64 {
        if j >= self.n {
            let r = j - self.n;
            return cj - ys[r] * self.sign[r];
        }
        cj - self.lp.columns[j].iter().map(|&(r, v)| ys[r] * v).sum::<f64>()
    }

    /// Rebuilds the basis inverse from scratch and recomputes `x_B`.
    fn refactor(&mut self) {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &bv) in self.basis.iter().enumerate() {
            for (r, v) in self.column(bv) {
                a[r * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for r in 0..m {
            inv[r * m + r] = 1.0;
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&p, &q| a[p * m + col].abs().total_cmp(&a[q * m + col].abs()))
                .unwrap();
            if a[piv * m + col].abs() < 1e-13 {
                // Numerically singular basis; keep the product-form inverse.
                self.since_refactor = 0;
                return;
            }
            if piv != col {
                for k in 0..m {
                    a.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let d = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[r * m + k] -= f * a[col * m + k];
                    inv[r * m + k] -= f * inv[col * m + k];
                }
            }
        }
        self.binv = inv;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&self.b).map(|(a, b)| a * b).sum();
            self.xb[i] = if v.abs() < 1e-13 { 0.0 } else { v };
        }
        self.since_refactor = 0;
    }

    fn pivot(&mut self, r: usize, entering: usize, w: &[f64]) {
        let m = self.m;
        let theta = self.xb[r] / w[r];
        for i in 0..m {
            if i != r {
                self.xb[i] -= theta * w[i];
                if self.xb[i] < 0.0 && self.xb[i] > -1e-12 {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[r] = theta;
        let pr = w[r];
        for k in 0..m {
            self.binv[r * m + k] /= pr;
        }
        let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for i in 0..m {
            if i == r || w[i] == 0.0 {
                continue;
            }
            let f = w[i];
            for (k, pk) in pivot_row.iter().enumerate() {
                self.binv[i * m + k] -= f * pk;
            }
        }
        let leaving = self.basis[r];
        self.in_basis[leaving] = false;
        self.in_basis[entering] = true;
        self.basis[r] = entering;
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    fn optimise(&mut self, cost: &dyn Fn(usize) -> f64, allow_artificial: bool) -> PhaseEnd {
        let cmax = (0..self.n).fold(0.0_f64, |a, j| a.max(cost(j).abs()));
        let tol = 1e-11 * (1.0 + cmax);
        let mut degenerate_run = 0usize;
        let mut rechecked = false;
        loop {
            if self.iterations >= self.max_iterations {
                return PhaseEnd::IterationLimit;
            }
            let y = self.duals(cost);
            let ys: Vec<f64> = y.iter().zip(&self.sign).map(|(a, b)| a * b).collect();
            let bland = degenerate_run > DEGENERATE_RUN;
            let mut entering: Option<(usize, f64)> = None;
            let limit = if allow_artificial { self.n + self.m } else { self.n };
            for j in 0..limit {
                if self.in_basis[j] {
                    continue;
                }
                let d = self.reduced_cost(j, cost(j), &ys);
                if d < -tol {
                    if bland {
                        entering = Some((j, d));
                        break;
                    }
                    if entering.is_none_or(|(_, best)| d < best) {
                        entering = Some((j, d));
                    }
                }
            }
            let Some((q, _)) = entering else {
                if !rechecked && self.since_refactor > 0 {
                    self.refactor();
                    rechecked = true;
                    continue;
                }
                return PhaseEnd::Optimal;
            };
            rechecked = false;
            let w = self.ftran(q);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if w[i] <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.xb[i].max(0.0) / w[i];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                        let better = if tie {
                            if bland {
                                self.basis[i] < self.basis[k]
                            } else {
                                w[i] > w[k]
                            }
                        } else {
                            ratio < best
                        };
                        if better {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
            let Some((r, theta)) = leave else {
                return PhaseEnd::Unbounded;
            };
            if theta <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, q, &w);
        }
    }

    /// After phase one, pivots basic artificials out wherever a structural
    /// column can replace them. Rows where none can are linearly redundant.
    fn drive_out_artificials(&mut self) {
        let m = self.m;
        for r in 0..m {
            if self.basis[r] < self.n {
                continue;
            }
            let row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.in_basis[j] {
                    continue;
                }
                let v: f64 = self.column(j).iter().map(|&(k, a)| row[k] * a).sum();
                if v.abs() > PIVOT_TOL && best.is_none_or(|(_, b)| v.abs() > b.abs()) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                let w = self.ftran(j);
                self.pivot(r, j, &w);
            }
        }
    }

    fn run(mut self) -> LpSolution {
        let n = self.n;
        let phase_one_cost = |j: usize| if j >= n { 1.0 } else { 0.0 };
        match self.optimise(&phase_one_cost, false) {
            PhaseEnd::Optimal => {}
            PhaseEnd::IterationLimit => return self.finish(LpStatus::IterationLimit),
            // phase one is bounded below by zero
            PhaseEnd::Unbounded => return self.finish(LpStatus::Infeasible),
        }
        let infeasibility: f64 = self
            .basis
            .iter()
            .zip(&self.xb)
            .filter(|(bv, _)| **bv >= n)
            .map(|(_, x)| x.max(0.0))
            .sum();
        self.infeasibility = infeasibility;
        if infeasibility > PHASE_ONE_TOL {
            return self.finish(LpStatus::Infeasible);
        }
        self.drive_out_artificials();
        let costs = &self.lp.costs;
        let phase_two_cost = |j: usize| if j >= n { 0.0 } else { costs[j] };
        let status = match self.optimise(&phase_two_cost, false) {
            PhaseEnd::Optimal => LpStatus::Optimal,
            PhaseEnd::Unbounded => LpStatus::Unbounded,
            PhaseEnd::IterationLimit => LpStatus::IterationLimit,
        };
        self.finish(status)
    }

    fn finish(self, status: LpStatus) -> LpSolution {
        let n = self.n;
        let mut x = vec![0.0; n];
        for (bv, v) in self.basis.iter().zip(&self.xb) {
            if *bv < n {
                x[*bv] = v.max(0.0);
            }
        }
        let costs = &self.lp.costs;
        let y = self.duals(&|j: usize| if j >= n { 0.0 } else { costs[j] });
        let certificate: Vec<f64> = y.iter().zip(&self.sign).map(|(y, s)| y * s).collect();
        let objective: f64 = x.iter().zip(costs).map(|(a, b)| a * b).sum();
        let dual_objective: f64 = certificate.iter().zip(&self.lp.rhs).map(|(a, b)| a * b).sum();
        LpSolution {
            status,
            objective,
            primal_residual: self.lp.residual(&x),
            duality_gap: (objective - dual_objective).abs(),
            primal: x,
            certificate,
            infeasibility: self.infeasibility,
            iterations: self.iterations,
        }
    }
}
