//! Martingale optimal transport: `M_rho` by linear programming, the closed
//! form of `M_2`, and composition of couplings.

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus};
use crate::measures::{DiscreteMeasureND, NormSpec};
use crate::transport::{cost_matrix, Coupling};

/// Martingale transport LP for a row-major cost matrix.
///
/// Variable `(i, j)` sits at index `i * m + j`. Rows: the `n` row sums, the
/// first `m - 1` column sums (the last one is implied), then
/// `sum_j m_ij (y_j - x_i)_k = 0` for every atom `x_i` and coordinate `k`.
/// Each martingale row is divided by its largest coefficient; rows that are
/// identically zero are left out.
pub fn martingale_lp(mu: &DiscreteMeasureND, nu: &DiscreteMeasureND, cost: &[f64]) -> LinearProgram {
    let (n, m, d) = (mu.len(), nu.len(), mu.dim());
    let (xs, ys) = (mu.points(), nu.points());
    let mut rhs = mu.weights().to_vec();
    rhs.extend_from_slice(&nu.weights()[..m - 1]);
    // (row index, scale) for each (i, k), or None when the row is empty
    let mut mart_rows = vec![None; n * d];
    for i in 0..n {
        for k in 0..d {
            let scale = ys.iter().fold(0.0_f64, |s, y| s.max((y[k] - xs[i][k]).abs()));
            if scale > 0.0 {
                mart_rows[i * d + k] = Some((rhs.len(), 1.0 / scale));
                rhs.push(0.0);
            }
        }
    }
    let mut lp = LinearProgram::new(rhs);
    for i in 0..n {
        for j in 0..m {
            let mut col = Vec::with_capacity(2 + d);
            col.push((i, 1.0));
            if j + 1 < m {
                col.push((n + j, 1.0));
            }
            for k in 0..d {
                if let Some((row, s)) = mart_rows[i * d + k] {
                    col.push((row, (ys[j][k] - xs[i][k]) * s));
                }
            }
            lp.add_column(cost[i * m + j], col);
        }
    }
    lp
}

/// Minimises `sum m_ij c_ij` over martingale couplings of `(mu, nu)`.
/// Returns the optimal value and coupling.
pub fn martingale_transport_with_cost(
    mu: &DiscreteMeasureND,
    nu: &DiscreteMeasureND,
    cost: &[f64],
) -> Result<(f64, Coupling)> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    if cost.len() != mu.len() * nu.len() {
        return Err(Error::Config(format!(
            "cost matrix has {} entries, expected {}",
            cost.len(),
            mu.len() * nu.len()
        )));
    }
    let sol = martingale_lp(mu, nu, cost).solve();
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(Error::NotInConvexOrder(format!(
                "no martingale coupling (phase-one infeasibility {:e})",
                sol.infeasibility
            )))
        }
        LpStatus::Unbounded => return Err(Error::Lp("is unbounded")),
        LpStatus::IterationLimit => return Err(Error::Lp("hit the iteration limit")),
    }
    let coupling = Coupling::new(mu, nu, sol.primal)?;
    let value = coupling.matrix().iter().zip(cost).map(|(w, c)| w * c).sum();
    Ok((value, coupling))
}

/// `M_rho(mu, nu)` and an optimal martingale coupling.
pub fn m_rho_lp(mu: &DiscreteMeasureND, nu: &DiscreteMeasureND, rho: f64, norm: &NormSpec) -> Result<(f64, Coupling)> {
    if rho.is_nan() || rho < 1.0 || rho.is_infinite() {
        return Err(Error::Domain(format!("rho must be a finite real >= 1, got {rho}")));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let cost = cost_matrix(mu, nu, rho, norm);
    let (v, coupling) = martingale_transport_with_cost(mu, nu, &cost)?;
    Ok((v.max(0.0).powf(1.0 / rho), coupling))
}

/// `int |y - c|^2 nu(dy) - int |x - c|^2 mu(dx)` (Euclidean) with `c` the mean of `nu`.
///
/// For ordered pairs this is `M_2^2`, since every martingale coupling has the
/// same quadratic cost. The value is returned as is, negative or not.
pub fn m2_closed_form(mu: &DiscreteMeasureND, nu: &DiscreteMeasureND) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let c = nu.mean();
    let e = NormSpec::euclidean();
    Ok(nu.moment_about(&c, 2.0, &e) - mu.moment_about(&c, 2.0, &e))
}

/// Composes `pi` (between `mu` and `nu`) with `m` (between `nu` and `nu'`)
/// through the kernel of `m`: `pi_n(dx, dz) = int m(y, dz) pi(dx, dy)`.
pub fn compose_coupling(pi: &Coupling, m: &Coupling) -> Result<Coupling> {
    const TOL: f64 = 1e-10;
    if pi.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: pi.dim(), found: m.dim() });
    }
    // position in m's rows of every column of pi
    let mut slot = Vec::with_capacity(pi.n_cols());
    let mut mismatch = 0.0_f64;
    for (y, w) in pi.col_support().iter().zip(pi.col_weights()) {
        match m
            .row_support()
            .iter()
            .position(|p| p.iter().zip(y).all(|(a, b)| (a - b).abs() <= 1e-12))
        {
            Some(k) => {
                mismatch = mismatch.max((m.row_weights()[k] - w).abs());
                slot.push(k);
            }
            None => {
                mismatch = mismatch.max(*w);
                slot.push(usize::MAX);
            }
        }
    }
    if m.n_rows() != pi.n_cols() {
        mismatch = mismatch.max(TOL * 10.0);
    }
    if mismatch > TOL {
        return Err(Error::MarginalMismatch(mismatch));
    }
    let (n, q) = (pi.n_rows(), m.n_cols());
    let mut out = vec![0.0; n * q];
    for (j, &k) in slot.iter().enumerate() {
        let wk = m.row_weights()[k];
        if wk <= 0.0 {
            continue;
        }
        for i in 0..n {
            let pij = pi.get(i, j);
            if pij == 0.0 {
                continue;
            }
            for l in 0..q {
                out[i * q + l] += pij * m.get(k, l) / wk;
            }
        }
    }
    let rows = pi.row_measure();
    let cols = m.col_measure();
    Coupling::new(&rows, &cols, out)
}
