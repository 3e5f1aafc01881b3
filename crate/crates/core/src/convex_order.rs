//! Convex order tests.
//!
//! On the line, `mu <=_cx nu` iff the means agree and
//! `int_0^u F_mu^{-1} >= int_0^u F_nu^{-1}` for every `u`. Both quantile
//! functions are constant on the cells of the merged partition, so the
//! integrated difference is piecewise affine and checking cell boundaries is
//! exact. In higher dimension the test is feasibility of the martingale
//! transport problem.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{quantile_cells, DiscreteMeasure1D, DiscreteMeasureND};
use crate::mot::martingale_lp;

/// Relative tolerance for the integrated-quantile deficit and the mean gap.
pub const CX_TOL_1D: f64 = 1e-12;
/// Phase-one infeasibility above which the martingale problem is declared infeasible.
pub const CX_TOL_LP: f64 = 1e-9;
const ABS_CAP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CxReport {
    pub ordered: bool,
    /// Norm of the difference of the means.
    pub mean_gap: f64,
    /// Largest violation of the order-defining inequalities (zero when none).
    pub worst_violation: f64,
}

/// Tolerance for a 1D pair: `CX_TOL_1D` relative to the atom scale, capped.
fn tol_1d(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D) -> f64 {
    let scale = 1.0
        + [mu.min_atom(), mu.max_atom(), nu.min_atom(), nu.max_atom()]
            .iter()
            .fold(0.0_f64, |m, a| m.max(a.abs()));
    (CX_TOL_1D * scale).min(ABS_CAP)
}

/// `u -> int_0^u (F_mu^{-1} - F_nu^{-1})` at every cell boundary, starting at `u = 0`.
pub fn integrated_quantile_gap(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D) -> Vec<(f64, f64)> {
    let (x, y) = (mu.atoms(), nu.atoms());
    let mut out = vec![(0.0, 0.0)];
    let mut acc = 0.0;
    for c in quantile_cells(mu, nu) {
        acc += c.len() * (x[c.i] - y[c.j]);
        out.push((c.u_hi, acc));
    }
    out
}

pub fn check_cx_1d(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D) -> CxReport {
    let tol = tol_1d(mu, nu);
    let mean_gap = (mu.mean() - nu.mean()).abs();
    let worst_violation = integrated_quantile_gap(mu, nu)
        .iter()
        .fold(0.0_f64, |m, (_, d)| m.max(-d));
    CxReport {
        ordered: mean_gap <= tol && worst_violation <= tol,
        mean_gap,
        worst_violation,
    }
}

/// Strassen test: the pair is ordered iff a martingale coupling exists.
pub fn check_cx_nd(mu: &DiscreteMeasureND, nu: &DiscreteMeasureND) -> Result<CxReport> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let (ma, mb) = (mu.mean(), nu.mean());
    let mean_gap = ma.iter().zip(&mb).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let zero = vec![0.0; mu.len() * nu.len()];
    let sol = martingale_lp(mu, nu, &zero).solve();
    let worst_violation = if sol.infeasibility.is_nan() { f64::INFINITY } else { sol.infeasibility };
    Ok(CxReport {
        ordered: worst_violation <= CX_TOL_LP,
        mean_gap,
        worst_violation,
    })
}

/// Dispatches to the exact 1D test when both measures live on the line.
pub fn check_cx(mu: &DiscreteMeasureND, nu: &DiscreteMeasureND) -> Result<CxReport> {
    if mu.dim() == 1 && nu.dim() == 1 {
        return Ok(check_cx_1d(&mu.to_1d()?, &nu.to_1d()?));
    }
    check_cx_nd(mu, nu)
}
