//! Generators for worked examples and special multidimensional cases, with
//! their closed forms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convex_order::check_cx_1d;
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure1D, DiscreteMeasureND, NormSpec};
use crate::mot::m_rho_lp;
use crate::transport::Coupling;

/// Tolerance used to locate generated points among the atoms of a measure.
const FIND_TOL: f64 = 1e-12;
/// Fibres whose conditional mean misses the global mean by more than this are rejected.
pub const FIBRE_MEAN_TOL: f64 = 1e-10;

fn locate(m: &DiscreteMeasureND, x: &[f64]) -> Result<usize> {
    m.find(x, FIND_TOL)
        .ok_or_else(|| Error::DegenerateSupport(format!("point {x:?} is not an atom")))
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_nan() || rho < 1.0 || rho.is_infinite() {
        return Err(Error::Domain(format!("rho must be a finite real >= 1, got {rho}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// two-atom pairs

/// `mu = (d_{-a} + d_a) / 2`, `nu = (d_{-b} + d_b) / 2` and their only
/// martingale coupling.
pub fn two_atom_pair(a: f64, b: f64) -> Result<(DiscreteMeasure1D, DiscreteMeasure1D, Coupling)> {
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Err(Error::Domain(format!("need 0 < a < b, got a = {a}, b = {b}")));
    }
    let mu = DiscreteMeasure1D::new(vec![-a, a], vec![0.5, 0.5])?;
    let nu = DiscreteMeasure1D::new(vec![-b, b], vec![0.5, 0.5])?;
    let (hi, lo) = ((b + a) / (4.0 * b), (b - a) / (4.0 * b));
    let h = Coupling::from_1d(&mu, &nu, vec![hi, lo, lo, hi])?;
    Ok((mu, nu, h))
}

/// `M_rho^rho` of the two-atom pair.
pub fn two_atom_m_rho_pow(a: f64, b: f64, rho: f64) -> f64 {
    ((a + b) * (b - a).powf(rho) + (b - a) * (a + b).powf(rho)) / (2.0 * b)
}

/// `M_rho^rho / (W_rho^s sigma_rho^(rho - s))` of the two-atom pair, where
/// `W_rho = b - a` and `sigma_rho = b`.
pub fn two_atom_s_ratio(a: f64, b: f64, rho: f64, s: f64) -> f64 {
    ((a + b) * (b - a).powf(rho - s) + (a + b).powf(rho) * (b - a).powf(1.0 - s)) / (2.0 * b.powf(rho + 1.0 - s))
}

/// Value of the two-atom ratio (`s = 1`, `a = 1`) after the change of
/// variables `b = (x + 1) / (x - 1)`: `2^(rho-1) (x + x^rho) / (1 + x)^rho`.
pub fn two_atom_lower_ratio(x: f64, rho: f64) -> f64 {
    2f64.powf(rho - 1.0) * (x + x.powf(rho)) / (1.0 + x).powf(rho)
}

// ---------------------------------------------------------------------------
// the rotating-kernel example

/// `mu_n = (1/n) sum_{i=1..n} d_(i,0)` and its image by the kernel
/// `x -> (d_{x - e} + d_{x + e}) / 2`, `e = (cos theta, sin theta)`, with the
/// coupling the kernel induces.
pub fn bj_example(n: usize, theta: f64) -> Result<(DiscreteMeasureND, DiscreteMeasureND, Coupling)> {
    if n < 2 {
        return Err(Error::Domain(format!("n must be at least 2, got {n}")));
    }
    if !(0.0..std::f64::consts::PI).contains(&theta) {
        return Err(Error::Domain(format!("theta must lie in [0, pi), got {theta}")));
    }
    let (c, s) = if theta == 0.0 { (1.0, 0.0) } else { (theta.cos(), theta.sin()) };
    let xs: Vec<Vec<f64>> = (1..=n).map(|i| vec![i as f64, 0.0]).collect();
    let mu = DiscreteMeasureND::new(2, xs.clone(), vec![1.0 / n as f64; n])?;
    let mut ys = Vec::with_capacity(2 * n);
    for x in &xs {
        ys.push(vec![x[0] - c, -s]);
        ys.push(vec![x[0] + c, s]);
    }
    let nu = DiscreteMeasureND::new(2, ys.clone(), vec![0.5 / n as f64; 2 * n])?;
    let m = nu.len();
    let mut matrix = vec![0.0; n * m];
    for (k, y) in ys.iter().enumerate() {
        let i = mu.find(&xs[k / 2], 0.0).expect("row atom");
        matrix[i * m + locate(&nu, y)?] += 0.5 / n as f64;
    }
    let kernel = Coupling::new(&mu, &nu, matrix)?;
    Ok((mu, nu, kernel))
}

/// A martingale coupling between `mu_n` and its image at `theta = 0` that
/// keeps the interior atoms in place, of cost `(n^rho + n) / (n^2 + n)`.
pub fn bj_flat_coupling(n: usize) -> Result<Coupling> {
    let (mu, nu, _) = bj_example(n, 0.0)?;
    let nf = n as f64;
    let m = nu.len();
    let mut matrix = vec![0.0; n * m];
    let mut put = |x: f64, y: f64, w: f64| -> Result<()> {
        let i = locate(&mu, &[x, 0.0])?;
        let j = locate(&nu, &[y, 0.0])?;
        matrix[i * m + j] += w;
        Ok(())
    };
    for i in 2..n {
        put(i as f64, i as f64, 1.0 / nf)?;
    }
    let h = 0.5 / nf;
    put(1.0, 0.0, h * nf / (nf + 1.0))?;
    put(1.0, 1.0, h)?;
    put(1.0, nf + 1.0, h / (nf + 1.0))?;
    put(nf, 0.0, h / (nf + 1.0))?;
    put(nf, nf, h)?;
    put(nf, nf + 1.0, h * nf / (nf + 1.0))?;
    Coupling::new(&mu, &nu, matrix)
}

/// `W_rho(mu_n, mu_n P_0) = n^(-1/rho) |e_1|`.
pub fn bj_w_rho(n: usize, rho: f64, norm: &NormSpec) -> f64 {
    (n as f64).powf(-1.0 / rho) * norm.norm(&[1.0, 0.0])
}

/// `sigma_rho^rho(mu_n P_0)`, attained at `((n + 1) / 2, 0)`.
pub fn bj_sigma_pow(n: usize, rho: f64, norm: &NormSpec) -> f64 {
    let nf = n as f64;
    let mut s = (nf + 1.0).powf(rho) + (nf - 1.0).powf(rho);
    for i in 2..=n.div_ceil(2) {
        s += 2.0 * (nf + 1.0 - 2.0 * i as f64).powf(rho);
    }
    s * norm.norm(&[1.0, 0.0]).powf(rho) / (2f64.powf(rho) * nf)
}

/// Limit as `theta -> 0+` of `M_rho^rho / (W_rho sigma_rho^(rho-1))` for the
/// rotating-kernel pair.
pub fn bj_ratio(n: usize, rho: f64, norm: &NormSpec) -> f64 {
    let e = norm.norm(&[1.0, 0.0]);
    let sigma = bj_sigma_pow(n, rho, norm).powf(1.0 / rho);
    e.powf(rho) / (bj_w_rho(n, rho, norm) * sigma.powf(rho - 1.0))
}

/// `2^(rho-1) (rho+1)^((rho-1)/rho)`, the limit of `bj_ratio * n^(rho-1-1/rho)`.
pub fn bj_scaled_limit(rho: f64) -> f64 {
    2f64.powf(rho - 1.0) * (rho + 1.0).powf((rho - 1.0) / rho)
}

/// A finite sweep towards a limit, with a Richardson estimate from its last two points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitSweep {
    /// `(h, value)`, where the limit is taken as `h -> 0`.
    pub points: Vec<(f64, f64)>,
    pub extrapolated: f64,
}

/// Richardson extrapolation assuming an error of order `h^p`.
pub fn richardson(points: &[(f64, f64)], p: f64) -> f64 {
    match points {
        [] => f64::NAN,
        [only] => only.1,
        [.., (h1, v1), (h2, v2)] => {
            let (a, b) = (h1.powf(p), h2.powf(p));
            if a == b {
                *v2
            } else {
                v2 + (v2 - v1) * b / (a - b)
            }
        }
    }
}

/// `bj_ratio(n) * n^(rho-1-1/rho)` over `ns`, with `h = 1/n`.
pub fn bj_scaled_sweep(ns: &[usize], rho: f64, norm: &NormSpec) -> LimitSweep {
    let points: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| {
            let nf = n as f64;
            (1.0 / nf, bj_ratio(n, rho, norm) * nf.powf(rho - 1.0 - 1.0 / rho))
        })
        .collect();
    let extrapolated = richardson(&points, 1.0);
    LimitSweep { points, extrapolated }
}

// ---------------------------------------------------------------------------
// scaling and the triangle

/// `nu` = image of `mu` under `x -> x + lambda (x - alpha)` and the kernel
/// coupling `m(x, .) = d_{x + lambda (x - alpha)} / (1 + lambda) + lambda nu / (1 + lambda)`,
/// `alpha` being the mean of `mu`.
pub fn scaling_pair(mu: &DiscreteMeasureND, lambda: f64) -> Result<(DiscreteMeasureND, Coupling)> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be a nonnegative real, got {lambda}")));
    }
    let nu = scaled_about(mu, lambda, &mu.mean())?;
    if nu.len() != mu.len() {
        return Err(Error::DegenerateSupport("scaled atoms merged".into()));
    }
    let n = mu.len();
    let mut matrix = vec![0.0; n * n];
    for (i, wi) in mu.weights().iter().enumerate() {
        for (j, wj) in nu.weights().iter().enumerate() {
            let stay = if i == j { 1.0 } else { 0.0 };
            matrix[i * n + j] = wi * (stay + lambda * wj) / (1.0 + lambda);
        }
    }
    let m = Coupling::new(mu, &nu, matrix)?;
    Ok((nu, m))
}

/// Image of `mu` under `x -> x + lambda (x - alpha)` for an arbitrary centre.
pub fn scaled_about(mu: &DiscreteMeasureND, lambda: f64, alpha: &[f64]) -> Result<DiscreteMeasureND> {
    if alpha.len() != mu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: alpha.len() });
    }
    mu.map(|x| x.iter().zip(alpha).map(|(xi, a)| xi + lambda * (xi - a)).collect())
}

/// `W_rho` between `mu` and its scaling: `lambda (int |x - alpha|^rho mu(dx))^(1/rho)`.
pub fn scaling_w_rho(mu: &DiscreteMeasureND, lambda: f64, rho: f64, norm: &NormSpec) -> f64 {
    lambda * mu.moment_about(&mu.mean(), rho, norm).powf(1.0 / rho)
}

/// Constant of the scaling case, `2^(rho-1) (3 + lambda) / (1 + lambda)`.
pub fn scaling_bound(rho: f64, lambda: f64) -> f64 {
    2f64.powf(rho - 1.0) * (3.0 + lambda) / (1.0 + lambda)
}

/// Three-point measure `p d_(0,0) + q d_(1,0) + r d_(1/2,1/n)`, `p = q = 1/(2n)`,
/// `r = 1 - 1/n`, and its scaling by `lambda` with the kernel coupling.
pub fn triangle_example(n: usize, lambda: f64) -> Result<(DiscreteMeasureND, DiscreteMeasureND, Coupling)> {
    if n < 2 {
        return Err(Error::Domain(format!("n must be at least 2, got {n}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let nf = n as f64;
    let p = 0.5 / nf;
    let mu = DiscreteMeasureND::new(
        2,
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 1.0 / nf]],
        vec![p, p, 1.0 - 1.0 / nf],
    )?;
    let (nu, m) = scaling_pair(&mu, lambda)?;
    Ok((mu, nu, m))
}

// ---------------------------------------------------------------------------
// products

#[derive(Debug, Clone)]
pub struct TensorPair {
    pub mu: DiscreteMeasureND,
    pub nu: DiscreteMeasureND,
    /// Product of optimal martingale couplings of the factors.
    pub coupling: Coupling,
    /// `M_rho^rho` of each factor.
    pub factor_costs: Vec<f64>,
}

fn product(factors: &[&DiscreteMeasure1D]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut points = vec![Vec::new()];
    let mut weights = vec![1.0];
    for f in factors {
        let mut np = Vec::with_capacity(points.len() * f.len());
        let mut nw = Vec::with_capacity(points.len() * f.len());
        for (p, w) in points.iter().zip(&weights) {
            for (a, v) in f.atoms().iter().zip(f.weights()) {
                let mut q = p.clone();
                q.push(*a);
                np.push(q);
                nw.push(w * v);
            }
        }
        points = np;
        weights = nw;
    }
    (points, weights)
}

/// Product measures of ordered 1D pairs and the product of per-factor optimal
/// martingale couplings for the cost `|x - y|^rho`. Under the `L^rho` norm the
/// cost of the product coupling is the sum of the factor costs.
pub fn tensor_pair(pairs: &[(DiscreteMeasure1D, DiscreteMeasure1D)], rho: f64) -> Result<TensorPair> {
    check_rho(rho)?;
    if pairs.is_empty() {
        return Err(Error::Domain("need at least one factor".into()));
    }
    let mut factors = Vec::with_capacity(pairs.len());
    let mut factor_costs = Vec::with_capacity(pairs.len());
    for (k, (a, b)) in pairs.iter().enumerate() {
        if !check_cx_1d(a, b).ordered {
            return Err(Error::NotInConvexOrder(format!("factor {k}")));
        }
        let (v, c) = m_rho_lp(&a.to_nd(), &b.to_nd(), rho, &NormSpec::euclidean())?;
        factor_costs.push(v.powf(rho));
        factors.push(c);
    }
    let (xp, xw) = product(&pairs.iter().map(|p| &p.0).collect::<Vec<_>>());
    let (yp, yw) = product(&pairs.iter().map(|p| &p.1).collect::<Vec<_>>());
    let d = pairs.len();
    let mu = DiscreteMeasureND::new(d, xp.clone(), xw)?;
    let nu = DiscreteMeasureND::new(d, yp.clone(), yw)?;
    let m = nu.len();
    let mut matrix = vec![0.0; mu.len() * m];
    for x in &xp {
        let i = locate(&mu, x)?;
        for y in &yp {
            let mut w = 1.0;
            for (k, c) in factors.iter().enumerate() {
                let r = c.row_support().iter().position(|p| p[0] == x[k]).expect("factor atom");
                let s = c.col_support().iter().position(|p| p[0] == y[k]).expect("factor atom");
                w *= c.get(r, s);
                if w == 0.0 {
                    break;
                }
            }
            if w > 0.0 {
                matrix[i * m + locate(&nu, y)?] += w;
            }
        }
    }
    let coupling = Coupling::new(&mu, &nu, matrix)?;
    Ok(TensorPair { mu, nu, coupling, factor_costs })
}

// ---------------------------------------------------------------------------
// radially symmetric pairs

#[derive(Debug, Clone)]
pub struct RadialPair {
    pub mu: DiscreteMeasureND,
    pub nu: DiscreteMeasureND,
    /// Law of `r s` with `r ~ bar_mu` and `s` a fair sign.
    pub mu_signed: DiscreteMeasure1D,
    pub nu_signed: DiscreteMeasure1D,
    /// Lift of an optimal martingale coupling of the signed radii.
    pub coupling: Coupling,
    /// `M_rho^rho` of the signed radii.
    pub signed_cost: f64,
}

/// Images of `bar_mu (dr) eta (dtheta)` and `bar_nu (dr) eta (dtheta)` under
/// `(r, theta) -> alpha + r theta`, with `eta` replaced by its symmetrisation.
/// The coupling is the image of `M (dt, du) eta (dtheta)` under
/// `(t, u, theta) -> (alpha + t theta, alpha + u theta)`, where `M` is optimal
/// for `M_rho` between the signed radii.
pub fn radial_pair(
    bar_mu: &DiscreteMeasure1D,
    bar_nu: &DiscreteMeasure1D,
    eta: &DiscreteMeasureND,
    alpha: &[f64],
    rho: f64,
    norm: &NormSpec,
) -> Result<RadialPair> {
    check_rho(rho)?;
    let d = eta.dim();
    if alpha.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: alpha.len() });
    }
    if bar_mu.min_atom() < 0.0 || bar_nu.min_atom() < 0.0 {
        return Err(Error::Domain("radial measures must live on [0, inf)".into()));
    }
    for p in eta.points() {
        if (norm.norm(p) - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("direction {p:?} is not a unit vector")));
        }
    }
    // symmetrise eta
    let mut dirs: Vec<Vec<f64>> = eta.points().to_vec();
    dirs.extend(eta.points().iter().map(|p| p.iter().map(|x| -x).collect::<Vec<f64>>()));
    let mut dw: Vec<f64> = eta.weights().iter().map(|w| 0.5 * w).collect();
    dw.extend_from_slice(&dw.clone());
    let eta = DiscreteMeasureND::new(d, dirs, dw)?;

    let signed = |m: &DiscreteMeasure1D| {
        let mut a: Vec<f64> = m.atoms().iter().map(|r| -r).collect();
        a.extend_from_slice(m.atoms());
        let mut w: Vec<f64> = m.weights().iter().map(|w| 0.5 * w).collect();
        w.extend_from_slice(&w.clone());
        DiscreteMeasure1D::new(a, w)
    };
    let mu_signed = signed(bar_mu)?;
    let nu_signed = signed(bar_nu)?;
    if !check_cx_1d(&mu_signed, &nu_signed).ordered {
        return Err(Error::NotInConvexOrder("signed radial laws".into()));
    }
    let (v, m1) = m_rho_lp(&mu_signed.to_nd(), &nu_signed.to_nd(), rho, &NormSpec::euclidean())?;

    let image = |m: &DiscreteMeasure1D| {
        let mut pts = Vec::new();
        let mut ws = Vec::new();
        for (r, w) in m.atoms().iter().zip(m.weights()) {
            for (th, e) in eta.points().iter().zip(eta.weights()) {
                pts.push(alpha.iter().zip(th).map(|(a, t)| a + r * t).collect::<Vec<f64>>());
                ws.push(w * e);
            }
        }
        DiscreteMeasureND::from_unnormalized(d, pts, ws)
    };
    let mu = image(bar_mu)?;
    let nu = image(bar_nu)?;
    let cols = nu.len();
    let mut matrix = vec![0.0; mu.len() * cols];
    for (i, j, w) in m1.entries() {
        let (t, u) = (m1.row_support()[i][0], m1.col_support()[j][0]);
        for (th, e) in eta.points().iter().zip(eta.weights()) {
            let x: Vec<f64> = alpha.iter().zip(th).map(|(a, c)| a + t * c).collect();
            let y: Vec<f64> = alpha.iter().zip(th).map(|(a, c)| a + u * c).collect();
            matrix[locate(&mu, &x)? * cols + locate(&nu, &y)?] += w * e;
        }
    }
    let coupling = Coupling::new(&mu, &nu, matrix)?;
    Ok(RadialPair {
        mu,
        nu,
        mu_signed,
        nu_signed,
        coupling,
        signed_cost: v.powf(rho),
    })
}

// ---------------------------------------------------------------------------
// direction-dependent scaling

/// `x / |x|` or `-x / |x|`, whichever has its first nonzero coordinate
/// positive; `e_1` at the origin.
pub fn direction_map(x: &[f64], norm: &NormSpec) -> Vec<f64> {
    let n = norm.norm(x);
    let mut e = vec![0.0; x.len()];
    if n == 0.0 {
        e[0] = 1.0;
        return e;
    }
    let sign = match x.iter().find(|v| **v != 0.0) {
        Some(v) if *v > 0.0 => 1.0,
        _ => -1.0,
    };
    x.iter().map(|v| sign * v / n).collect()
}

fn sgn(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Point `c_a` of `Span(a)` that is at least as close as `c` to every point
/// of `Span(a)` for the `L^r` norm.
pub fn direction_projection(a: &[f64], c: &[f64], norm: &NormSpec) -> Result<Vec<f64>> {
    if a.len() != c.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: c.len() });
    }
    if (norm.norm(a) - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(format!("|a| = {} is not 1", norm.norm(a))));
    }
    let coef = if norm.is_sup() {
        let i = a
            .iter()
            .position(|x| (x.abs() - 1.0).abs() <= 1e-10)
            .expect("a sup-norm unit vector has a coordinate of modulus one");
        c[i] * sgn(a[i])
    } else {
        let r = norm.r();
        c.iter().zip(a).map(|(ci, ai)| ci * sgn(*ai) * ai.abs().powf(r - 1.0)).sum()
    };
    Ok(a.iter().map(|x| coef * x).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct Fibre {
    /// Value of the direction map on the fibre.
    pub direction: Vec<f64>,
    /// Indices of the atoms of `mu` in the fibre, sorted by `t`.
    pub atoms: Vec<usize>,
    pub mass: f64,
    /// `t` with `x - alpha = t * direction`, and the conditional weights.
    pub t: Vec<f64>,
    pub weights: Vec<f64>,
    /// `M_rho^rho` between the conditional law of `t` and its scaling, in the ambient norm.
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct DirectionPair {
    pub nu: DiscreteMeasureND,
    pub fibres: Vec<Fibre>,
    /// Assembled martingale coupling between `mu` and `nu`.
    pub coupling: Coupling,
}

fn direction_key(x: &[f64]) -> Vec<i64> {
    // Euclidean direction rounded to 1e-12
    let e = direction_map(x, &NormSpec::euclidean());
    e.iter().map(|v| (v * 1e12).round() as i64).collect()
}

/// Scales `mu` by `1 + lambda` about its mean and couples it with the image
/// along each fibre of the direction map, each fibre carrying an optimal 1D
/// martingale coupling of the projected laws.
pub fn direction_dependent_pair(mu: &DiscreteMeasureND, lambda: f64, rho: f64, norm: &NormSpec) -> Result<DirectionPair> {
    check_rho(rho)?;
    let alpha = mu.mean();
    let (nu, _) = scaling_pair(mu, lambda)?;
    let mut groups: Vec<(Vec<i64>, Vec<usize>)> = Vec::new();
    let centred: Vec<Vec<f64>> = mu
        .points()
        .iter()
        .map(|x| x.iter().zip(&alpha).map(|(a, b)| a - b).collect())
        .collect();
    for (k, z) in centred.iter().enumerate() {
        let key = direction_key(z);
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(k),
            None => groups.push((key, vec![k])),
        }
    }
    let mut fibres = Vec::with_capacity(groups.len());
    let mut violations = Vec::new();
    for (_, ks) in &groups {
        let a = direction_map(&centred[ks[0]], norm);
        let aa: f64 = a.iter().map(|v| v * v).sum();
        let mass: f64 = ks.iter().map(|&k| mu.weights()[k]).sum();
        let mut tw: Vec<(f64, f64, usize)> = ks
            .iter()
            .map(|&k| {
                let t = centred[k].iter().zip(&a).map(|(x, y)| x * y).sum::<f64>() / aa;
                (t, mu.weights()[k] / mass, k)
            })
            .collect();
        tw.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mean: Vec<f64> = (0..mu.dim())
            .map(|c| ks.iter().map(|&k| mu.weights()[k] * centred[k][c]).sum::<f64>() / mass)
            .collect();
        if mean.iter().any(|m| m.abs() > FIBRE_MEAN_TOL) {
            violations.push(a);
            continue;
        }
        fibres.push(Fibre {
            direction: a,
            atoms: tw.iter().map(|x| x.2).collect(),
            mass,
            t: tw.iter().map(|x| x.0).collect(),
            weights: tw.iter().map(|x| x.1).collect(),
            cost: 0.0,
        });
    }
    if !violations.is_empty() {
        return Err(Error::ConditionalMeanViolation(violations));
    }
    let n = mu.len();
    let mut matrix = vec![0.0; n * n];
    for f in &mut fibres {
        let q = DiscreteMeasure1D::new(f.t.clone(), f.weights.clone())?;
        if q.len() != f.atoms.len() {
            return Err(Error::DegenerateSupport("distinct atoms share a coordinate along their fibre".into()));
        }
        let qt = q.affine(1.0 + lambda, 0.0)?;
        let (v, c) = m_rho_lp(&q.to_nd(), &qt.to_nd(), rho, &NormSpec::euclidean())?;
        f.cost = v.powf(rho) * norm.norm(&f.direction).powf(rho);
        // atoms of q and of its scaling are in the order of f.atoms
        for (r, s, w) in c.entries() {
            matrix[f.atoms[r] * n + f.atoms[s]] += f.mass * w;
        }
    }
    let coupling = Coupling::new(mu, &nu, matrix)?;
    Ok(DirectionPair { nu, fibres, coupling })
}

// ---------------------------------------------------------------------------
// random ordered pairs

/// `n` points uniform in `[-1, 1]^d` with weights uniform in `[0.1, 1]`, normalised.
pub fn random_measure<R: Rng>(rng: &mut R, n: usize, d: usize) -> Result<DiscreteMeasureND> {
    let points = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let weights = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    DiscreteMeasureND::from_unnormalized(d, points, weights)
}

/// Random `mu` with `n_atoms` atoms in `[-1, 1]^d`, and `nu` obtained from it
/// by `n_dilations` random two-point mean-preserving spreads; `mu <=_cx nu`
/// by construction. Deterministic in `seed`.
pub fn random_cx_pair(seed: u64, n_atoms: usize, n_dilations: usize, d: usize) -> Result<(DiscreteMeasureND, DiscreteMeasureND)> {
    if n_atoms == 0 || d == 0 {
        return Err(Error::Domain("need at least one atom and one dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = random_measure(&mut rng, n_atoms, d)?;
    let mut points = mu.points().to_vec();
    let mut weights = mu.weights().to_vec();
    for _ in 0..n_dilations {
        let k = rng.random_range(0..points.len());
        let frac = rng.random_range(0.2..=1.0);
        let dir: Vec<f64> = if d == 1 {
            vec![1.0]
        } else {
            (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let (s, t) = (rng.random_range(0.05..1.0), rng.random_range(0.05..1.0));
        let moved = frac * weights[k];
        weights[k] -= moved;
        let x = points[k].clone();
        points.push(x.iter().zip(&dir).map(|(a, v)| a + s * v).collect());
        weights.push(moved * t / (s + t));
        points.push(x.iter().zip(&dir).map(|(a, v)| a - t * v).collect());
        weights.push(moved * s / (s + t));
    }
    let nu = DiscreteMeasureND::from_unnormalized(d, points, weights)?;
    Ok((mu, nu))
}

/// [`random_cx_pair`] on the line.
pub fn random_cx_pair_1d(seed: u64, n_atoms: usize, n_dilations: usize) -> Result<(DiscreteMeasure1D, DiscreteMeasure1D)> {
    let (mu, nu) = random_cx_pair(seed, n_atoms, n_dilations, 1)?;
    Ok((mu.to_1d()?, nu.to_1d()?))
}
