//! The constant `K_rho` of the one-dimensional martingale Wasserstein
//! inequality and the bounds that sandwich it.
//!
//! `K_rho = inf { 2^(rho-1) g1 + 2 (2^(rho-2) v 1) g2 }` over pairs `(g1, g2)`
//! of nonnegative reals with `(x + x^rho) / (1 + x) <= g1 + g2 (1 + x)^(rho-1)`
//! for all `x >= 0`. For `rho >= 2` the pair `(0, 1)` is optimal and
//! `K_rho = 2^(rho-1)`; for `rho = 1` the pair `(2, 0)` gives `K_1 = 2`. In
//! between, for fixed `g1` the smallest admissible `g2` is
//! `sup_x (x^rho + (1 - g1) x - g1) / (1 + x)^rho`, and `g1` is scanned on a grid.
//!
//! Maximisers are located through the stationarity condition written in
//! `t = ln x`, where it becomes a strictly decreasing function of `t`; this
//! keeps the search finite even when the maximiser is astronomically large
//! (as `rho -> 2`).

use serde::Serialize;

use crate::error::{Error, Result};

/// Distance to 1 or 2 under which the analytic branches are used.
pub const BRANCH_TOL: f64 = 1e-9;
pub const DEFAULT_GAMMA_STEP: f64 = 1e-4;
const FIXED_POINT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantsResult {
    pub rho: f64,
    /// `sup_{x > 1} (x + x^rho) / (1 + x)^rho`.
    pub f_sup: f64,
    /// Its maximiser (infinite when the supremum is a limit).
    pub x_star: f64,
    pub k_est: f64,
    pub k_lower: f64,
    pub k_upper: f64,
    pub gamma1_star: f64,
    pub gamma2_star: f64,
}

/// `f_rho(x) = (x + x^rho) / (1 + x)^rho`, evaluated without overflow.
pub fn f_rho(rho: f64, x: f64) -> f64 {
    shifted_ratio(rho, 0.0, x.ln())
}

/// `(x^rho + (1 - g) x - g) / (1 + x)^rho` at `x = e^t`.
fn shifted_ratio(rho: f64, g: f64, t: f64) -> f64 {
    // ln(1 + e^t), stable on both sides
    let l1p = if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
    let a = (rho * (t - l1p)).exp();
    let b = (t - rho * l1p).exp();
    let c = (-rho * l1p).exp();
    a + (1.0 - g) * b - g * c
}

/// Stationarity function of `shifted_ratio` in `t = ln x`, divided by `x`;
/// strictly decreasing in `t` for `rho < 2`.
fn stationarity(rho: f64, g: f64, t: f64) -> f64 {
    rho * ((rho - 2.0) * t).exp() + (1.0 + (rho - 1.0) * g) * (-t).exp() - (rho - 1.0) * (1.0 - g)
}

/// Root in `t` of [`stationarity`] by bisection; `g < 1` and `1 < rho < 2`.
fn stationary_log_point(rho: f64, g: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while stationarity(rho, g, hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return hi;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if stationarity(rho, g, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `g2(g1) = sup_{x >= 0} (x^rho + (1 - g1) x - g1) / (1 + x)^rho` for `1 < rho < 2`.
pub fn inner_sup(rho: f64, g1: f64) -> f64 {
    if g1 >= 1.0 {
        // increasing in x towards its limit 1
        return 1.0;
    }
    let t = stationary_log_point(rho, g1);
    shifted_ratio(rho, g1, t).max(1.0)
}

fn check_open_unit(rho: f64) -> Result<()> {
    if !(rho > 1.0 && rho < 2.0) {
        return Err(Error::Domain(format!("rho must lie in (1, 2), got {rho}")));
    }
    Ok(())
}

/// `sup_{x > 1} f_rho(x)` and its maximiser, for `1 < rho < 2`.
///
/// Iterates `x -> (rho x^(rho-1) + 1) / (rho - 1)` from `2 / (rho - 1)`; if that
/// fails to settle within the iteration cap (it slows down as `rho -> 2`), the
/// root is found by bisection in `ln x`.
pub fn sup_f_rho(rho: f64) -> Result<(f64, f64)> {
    check_open_unit(rho)?;
    let mut x = 2.0 / (rho - 1.0);
    let mut converged = false;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next = (rho * x.powf(rho - 1.0) + 1.0) / (rho - 1.0);
        if !next.is_finite() {
            break;
        }
        let done = (next - x).abs() <= 1e-12 * x.max(1.0);
        x = next;
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        x = stationary_log_point(rho, 0.0).exp();
    }
    Ok((f_rho(rho, x), x))
}

/// Largest violation of the admissibility constraint by `(g1, g2)`, each
/// difference divided by `max(1, (1 + x)^(rho - 1))`, over a logarithmic grid of
/// `x` in `[1e-6, 1e12]`, `x = 0` and the stationary point of the shifted ratio.
/// Nonpositive values mean the pair is admissible on those points.
pub fn admissibility_gap(rho: f64, g1: f64, g2: f64) -> f64 {
    let lhs = |x: f64| (x + x.powf(rho)) / (1.0 + x);
    let rhs = |x: f64| g1 + g2 * (1.0 + x).powf(rho - 1.0);
    let mut worst = f64::NEG_INFINITY;
    let mut probe = |x: f64| {
        if x.is_finite() {
            // compare after dividing by (1 + x)^(rho - 1) to keep the scale bounded
            let s = (1.0 + x).powf(rho - 1.0);
            worst = worst.max((lhs(x) - rhs(x)) / s.max(1.0));
        }
    };
    probe(0.0);
    for k in 0..=4000 {
        probe(10f64.powf(-6.0 + 18.0 * k as f64 / 4000.0));
    }
    if rho > 1.0 && rho < 2.0 && g1 < 1.0 {
        probe(stationary_log_point(rho, g1).exp());
    }
    worst
}

/// `K_rho` with its bounds. `gamma_step` is the spacing of the `g1` grid on
/// `[0, 1]` used for `1 < rho < 2`.
pub fn k_rho(rho: f64, gamma_step: f64) -> Result<ConstantsResult> {
    if rho.is_nan() || rho < 1.0 || rho.is_infinite() {
        return Err(Error::Domain(format!("rho must be a finite real >= 1, got {rho}")));
    }
    if !(gamma_step > 0.0 && gamma_step <= 1.0) {
        return Err(Error::Domain(format!("gamma step must lie in (0, 1], got {gamma_step}")));
    }
    if rho >= 2.0 - BRANCH_TOL {
        let k = 2f64.powf(rho - 1.0);
        return Ok(ConstantsResult {
            rho,
            f_sup: 1.0,
            x_star: f64::INFINITY,
            k_est: k,
            k_lower: k,
            k_upper: k,
            gamma1_star: 0.0,
            gamma2_star: 1.0,
        });
    }
    if rho <= 1.0 + BRANCH_TOL {
        return Ok(ConstantsResult {
            rho,
            f_sup: 2.0,
            x_star: f64::INFINITY,
            k_est: 2.0,
            k_lower: 2.0,
            k_upper: 2.0,
            gamma1_star: 2.0,
            gamma2_star: 0.0,
        });
    }
    let (f_sup, x_star) = sup_f_rho(rho)?;
    let scale = 2f64.powf(rho - 1.0);
    let steps = (1.0 / gamma_step).round() as usize;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for k in 0..=steps {
        let g1 = (k as f64 * gamma_step).min(1.0);
        let g2 = inner_sup(rho, g1);
        let value = scale * g1 + 2.0 * g2;
        if value < best.0 {
            best = (value, g1, g2);
        }
    }
    Ok(ConstantsResult {
        rho,
        f_sup,
        x_star,
        k_est: best.0,
        k_lower: scale * f_sup,
        k_upper: (scale + 2.0).min(2.0 * f_sup),
        gamma1_star: best.1,
        gamma2_star: best.2,
    })
}

/// One [`ConstantsResult`] per grid point.
pub fn figure1_table(rho_grid: &[f64], gamma_step: f64) -> Result<Vec<ConstantsResult>> {
    use rayon::prelude::*;
    rho_grid.par_iter().map(|&rho| k_rho(rho, gamma_step)).collect()
}

/// CSV with header `rho,k_lower,k_est,k_upper`, 17 significant digits.
pub fn figure1_csv(rows: &[ConstantsResult]) -> String {
    let mut s = String::from("rho,k_lower,k_est,k_upper\n");
    for r in rows {
        s.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.rho, r.k_lower, r.k_est, r.k_upper
        ));
    }
    s
}
