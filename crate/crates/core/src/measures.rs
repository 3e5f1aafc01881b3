//! Finitely supported probability measures on the line and in `R^d`.
//!
//! Both measure types are immutable once built. Construction merges atoms that
//! are closer than [`MERGE_TOL`] and checks that the weights are positive and sum
//! to one within [`MASS_TOL`]; use the `from_unnormalized` constructors when the
//! weights come from an arbitrary positive vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atoms closer than this (absolute, per coordinate) are merged at construction.
pub const MERGE_TOL: f64 = 1e-14;
/// Allowed deviation of the total mass from one.
pub const MASS_TOL: f64 = 1e-12;

const ELLIPSOID_MAX_ITER: usize = 10_000;
const MOMENT_REL_TOL: f64 = 1e-13;

/// Selects the `L^r` norm on `R^d`, `r` in `[1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    r: f64,
}

impl NormSpec {
    pub fn new(r: f64) -> Result<Self> {
        if r.is_nan() || r < 1.0 {
            return Err(Error::Domain(format!("norm exponent must be >= 1, got {r}")));
        }
        Ok(Self { r })
    }

    pub const fn euclidean() -> Self {
        Self { r: 2.0 }
    }

    pub const fn manhattan() -> Self {
        Self { r: 1.0 }
    }

    pub const fn sup() -> Self {
        Self { r: f64::INFINITY }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn is_euclidean(&self) -> bool {
        self.r == 2.0
    }

    pub fn is_sup(&self) -> bool {
        self.r.is_infinite()
    }

    /// `|v|_r`. Finite `r` other than 1 and 2 factors out the largest coordinate
    /// so the power sum cannot overflow.
    pub fn norm(&self, v: &[f64]) -> f64 {
        if v.len() == 1 {
            return v[0].abs();
        }
        let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if self.r.is_infinite() || max == 0.0 {
            return max;
        }
        if self.r == 1.0 {
            return v.iter().map(|x| x.abs()).sum();
        }
        let r = self.r;
        let s: f64 = if r == 2.0 {
            v.iter().map(|x| (x / max) * (x / max)).sum()
        } else {
            v.iter().map(|x| (x.abs() / max).powf(r)).sum()
        };
        max * s.powf(1.0 / r)
    }

    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        if a.len() == 1 {
            return (a[0] - b[0]).abs();
        }
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.norm(&diff)
    }

    /// A subgradient of `z -> |z|` (the zero vector at the origin).
    pub fn subgradient(&self, z: &[f64]) -> Vec<f64> {
        let n = self.norm(z);
        let mut g = vec![0.0; z.len()];
        if n == 0.0 {
            return g;
        }
        if self.r.is_infinite() {
            let (k, _) = z
                .iter()
                .enumerate()
                .fold((0, -1.0), |(bk, bv), (k, x)| if x.abs() > bv { (k, x.abs()) } else { (bk, bv) });
            g[k] = z[k].signum();
        } else if self.r == 1.0 {
            for (gk, zk) in g.iter_mut().zip(z) {
                *gk = if *zk > 0.0 {
                    1.0
                } else if *zk < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            }
        } else {
            let r = self.r;
            for (gk, zk) in g.iter_mut().zip(z) {
                *gk = zk.signum() * (zk.abs() / n).powf(r - 1.0);
            }
        }
        g
    }
}

impl Default for NormSpec {
    fn default() -> Self {
        Self::euclidean()
    }
}

impl std::fmt::Display for NormSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.r.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.r)
        }
    }
}

impl std::str::FromStr for NormSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Inf" | "max" => Ok(Self::sup()),
            t => {
                let r: f64 = t.parse().map_err(|_| Error::Parse(format!("bad norm exponent {t:?}")))?;
                Self::new(r)
            }
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_nan() || rho < 1.0 || rho.is_infinite() {
        return Err(Error::Domain(format!("rho must be a finite real >= 1, got {rho}")));
    }
    Ok(())
}

fn check_weights(weights: &[f64], normalize: bool) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::InvalidMeasure("no atoms".into()));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidMeasure(format!("weight {w} is not a nonnegative real")));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidMeasure("total mass is zero".into()));
    }
    if normalize {
        Ok(weights.iter().map(|w| w / total).collect())
    } else if (total - 1.0).abs() > MASS_TOL {
        Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")))
    } else {
        Ok(weights.to_vec())
    }
}

/// Probability measure on `R` with finitely many atoms, stored sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure1D {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    // cum[i] = F(atoms[i]); the last entry is pinned to 1.
    cum: Vec<f64>,
}

impl DiscreteMeasure1D {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::build(atoms, weights, false)
    }

    pub fn from_unnormalized(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::build(atoms, weights, true)
    }

    pub fn dirac(x: f64) -> Self {
        Self::new(vec![x], vec![1.0]).expect("finite Dirac")
    }

    /// Uniform weights on the given atoms.
    pub fn uniform(atoms: Vec<f64>) -> Result<Self> {
        let n = atoms.len();
        Self::from_unnormalized(atoms, vec![1.0; n])
    }

    /// Exact-rational construction: atoms `num_i / den` with integer weights
    /// `k_i / sum(k)`. Used by test oracles that need rational inputs.
    pub fn from_rationals(numerators: &[i64], den: i64, counts: &[u64]) -> Result<Self> {
        if den <= 0 {
            return Err(Error::Domain("denominator must be positive".into()));
        }
        let atoms = numerators.iter().map(|&p| p as f64 / den as f64).collect();
        let weights = counts.iter().map(|&k| k as f64).collect();
        Self::from_unnormalized(atoms, weights)
    }

    fn build(atoms: Vec<f64>, weights: Vec<f64>, normalize: bool) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(a) = atoms.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidMeasure(format!("atom {a} is not finite")));
        }
        let weights = check_weights(&weights, normalize)?;
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).filter(|(_, w)| *w > 0.0).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match merged.last_mut() {
                Some(last) if (a - last.0).abs() <= MERGE_TOL => last.1 += w,
                _ => merged.push((a, w)),
            }
        }
        let (atoms, weights): (Vec<f64>, Vec<f64>) = merged.into_iter().unzip();
        let mut cum = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cum.push(acc);
        }
        *cum.last_mut().unwrap() = 1.0;
        Ok(Self { atoms, weights, cum })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cumulative weights `F(a_i)`; the last one is exactly 1.
    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max_atom(&self) -> f64 {
        *self.atoms.last().unwrap()
    }

    /// `F(x) = m((-inf, x])`, right-continuous.
    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.atoms.partition_point(|a| *a <= x);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    /// Index of the atom `F^{-1}(u)` for `u` in `(0, 1]`.
    pub fn quantile_index(&self, u: f64) -> usize {
        self.cum.partition_point(|c| *c < u).min(self.atoms.len() - 1)
    }

    /// Left-continuous generalised inverse `inf { x : F(x) >= u }`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0,1), got {u}")));
        }
        Ok(self.atoms[self.quantile_index(u)])
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// `sum_i w_i |a_i - c|^rho`.
    pub fn moment_about(&self, c: f64, rho: f64) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * (a - c).abs().powf(rho))
            .sum()
    }

    /// Centred moment `sigma_rho = min_c (sum w |a - c|^rho)^(1/rho)` and a minimiser.
    ///
    /// For `rho = 1` the minimisers form the median interval; its left end
    /// `F^{-1}(1/2)` is returned. For `rho = 2` the minimiser is the mean.
    /// Otherwise a ternary search runs on `[min atom, max atom]`.
    pub fn centred_moment(&self, rho: f64) -> Result<(f64, f64)> {
        check_rho(rho)?;
        if self.len() == 1 {
            return Ok((0.0, self.atoms[0]));
        }
        let c = if rho == 1.0 {
            self.atoms[self.quantile_index(0.5)]
        } else if rho == 2.0 {
            self.mean()
        } else {
            let (mut lo, mut hi) = (self.min_atom(), self.max_atom());
            let stop = 1e-12 * (hi - lo + 1.0);
            while hi - lo > stop {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if self.moment_about(m1, rho) < self.moment_about(m2, rho) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let mut best = (0.5 * (lo + hi), self.moment_about(0.5 * (lo + hi), rho));
            for cand in std::iter::once(self.mean()).chain(self.atoms.iter().copied()) {
                let v = self.moment_about(cand, rho);
                if v < best.1 {
                    best = (cand, v);
                }
            }
            best.0
        };
        Ok((self.moment_about(c, rho).powf(1.0 / rho), c))
    }

    /// Image under `x -> a x + b`.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|x| scale * x + shift).collect(), self.weights.clone())
    }

    pub fn to_nd(&self) -> DiscreteMeasureND {
        self.embed(1)
    }

    /// Embedding into `R^d` along the first axis.
    pub fn embed(&self, dim: usize) -> DiscreteMeasureND {
        let points = self
            .atoms
            .iter()
            .map(|a| {
                let mut p = vec![0.0; dim.max(1)];
                p[0] = *a;
                p
            })
            .collect();
        DiscreteMeasureND {
            dim: dim.max(1),
            points,
            weights: self.weights.clone(),
        }
    }

    /// Whether both measures have the same atoms and weights within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.len() == other.len()
            && self.atoms.iter().zip(&other.atoms).all(|(a, b)| (a - b).abs() <= tol)
            && self.weights.iter().zip(&other.weights).all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// A cell `(u_lo, u_hi]` of the merged quantile partition of two measures on
/// which `F_mu^{-1} = x_i` and `F_nu^{-1} = y_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantileCell {
    pub u_lo: f64,
    pub u_hi: f64,
    pub i: usize,
    pub j: usize,
}

impl QuantileCell {
    pub fn len(&self) -> f64 {
        self.u_hi - self.u_lo
    }
}

/// Cells of the common refinement of the quantile step functions of `mu` and `nu`.
///
/// The cell boundaries are the union of both sets of cumulative levels, so both
/// quantile functions are constant on every cell.
pub fn quantile_cells(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D) -> Vec<QuantileCell> {
    let (cm, cn) = (mu.cumulative(), nu.cumulative());
    let mut cells = Vec::with_capacity(cm.len() + cn.len());
    let (mut i, mut j, mut u) = (0, 0, 0.0);
    while i < cm.len() && j < cn.len() {
        let next = cm[i].min(cn[j]);
        if next > u {
            cells.push(QuantileCell { u_lo: u, u_hi: next, i, j });
            u = next;
        }
        if cm[i] <= next {
            i += 1;
        }
        if cn[j] <= next {
            j += 1;
        }
    }
    cells
}

/// Weighted point cloud in `R^d`. Points keep their first-occurrence order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasureND {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasureND {
    pub fn new(dim: usize, points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        Self::build(dim, points, weights, false)
    }

    pub fn from_unnormalized(dim: usize, points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        Self::build(dim, points, weights, true)
    }

    pub fn dirac(point: Vec<f64>) -> Self {
        let dim = point.len();
        Self::new(dim, vec![point], vec![1.0]).expect("finite Dirac")
    }

    fn build(dim: usize, points: Vec<Vec<f64>>, weights: Vec<f64>, normalize: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMeasure("point coordinates must be finite".into()));
            }
        }
        let weights = check_weights(&weights, normalize)?;
        let mut order: Vec<usize> = (0..points.len()).filter(|&i| weights[i] > 0.0).collect();
        order.sort_by(|&i, &j| {
            points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(&j))
        });
        // representative[i] = index of the first-occurring point i was merged into
        let mut representative = vec![usize::MAX; points.len()];
        let mut group_start = 0;
        for k in 0..order.len() {
            let i = order[k];
            let close = k > 0 && {
                let prev = order[k - 1];
                points[i].iter().zip(&points[prev]).all(|(a, b)| (a - b).abs() <= MERGE_TOL)
            };
            if !close {
                group_start = k;
            }
            let head = order[group_start..=k].iter().copied().min().unwrap();
            for &g in &order[group_start..=k] {
                representative[g] = head;
            }
        }
        let mut kept: Vec<usize> = Vec::new();
        let mut slot = vec![usize::MAX; points.len()];
        let mut out_w: Vec<f64> = Vec::new();
        for i in 0..points.len() {
            let rep = representative[i];
            if rep == usize::MAX {
                continue;
            }
            if slot[rep] == usize::MAX {
                slot[rep] = kept.len();
                kept.push(rep);
                out_w.push(0.0);
            }
            out_w[slot[rep]] += weights[i];
        }
        let out_p = kept.iter().map(|&i| points[i].clone()).collect();
        Ok(Self {
            dim,
            points: out_p,
            weights: out_w,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (mk, pk) in m.iter_mut().zip(p) {
                *mk += w * pk;
            }
        }
        m
    }

    /// `sum_i w_i |x_i - c|^rho`.
    pub fn moment_about(&self, c: &[f64], rho: f64, norm: &NormSpec) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * norm.dist(p, c).powf(rho))
            .sum()
    }

    /// Image measure under `f`.
    pub fn map<F: Fn(&[f64]) -> Vec<f64>>(&self, f: F) -> Result<Self> {
        let points: Vec<Vec<f64>> = self.points.iter().map(|p| f(p)).collect();
        let dim = points[0].len();
        Self::new(dim, points, self.weights.clone())
    }

    /// The measure as a one-dimensional one; fails unless `dim == 1`.
    pub fn to_1d(&self) -> Result<DiscreteMeasure1D> {
        if self.dim != 1 {
            return Err(Error::DimensionMismatch { expected: 1, found: self.dim });
        }
        DiscreteMeasure1D::new(self.points.iter().map(|p| p[0]).collect(), self.weights.clone())
    }

    /// Index of the point equal to `x` within `tol` in every coordinate.
    pub fn find(&self, x: &[f64], tol: f64) -> Option<usize> {
        self.points
            .iter()
            .position(|p| p.iter().zip(x).all(|(a, b)| (a - b).abs() <= tol))
    }

    /// Same atoms (in any order) and weights within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim == other.dim
            && self.len() == other.len()
            && self.points.iter().zip(&self.weights).all(|(p, w)| {
                other
                    .find(p, tol)
                    .is_some_and(|j| (other.weights[j] - w).abs() <= tol)
            })
    }

    /// Centred moment `sigma_rho = min_c (sum w |x - c|^rho)^(1/rho)` and a minimiser.
    ///
    /// In dimension one this defers to [`DiscreteMeasure1D::centred_moment`]. In
    /// higher dimension the objective is convex and, for `L^r` norms, has a
    /// minimiser in the bounding box of the support; a central-cut ellipsoid
    /// method started on the box's circumscribed ball stops once its certified
    /// optimality gap drops below a relative `1e-13`. The mean, the
    /// coordinate-wise median and every atom are evaluated as well, and the best
    /// point is returned.
    pub fn centred_moment(&self, rho: f64, norm: &NormSpec) -> Result<(f64, Vec<f64>)> {
        check_rho(rho)?;
        if self.dim == 1 {
            let (s, c) = self.to_1d()?.centred_moment(rho)?;
            return Ok((s, vec![c]));
        }
        if self.len() == 1 {
            return Ok((0.0, self.points[0].clone()));
        }
        let mean = self.mean();
        if rho == 2.0 && norm.is_euclidean() {
            return Ok((self.moment_about(&mean, rho, norm).sqrt(), mean));
        }
        let objective = |c: &[f64]| self.moment_about(c, rho, norm);
        let mut best_c = mean.clone();
        let mut best_f = objective(&mean);
        let consider = |c: Vec<f64>, best_c: &mut Vec<f64>, best_f: &mut f64| {
            let f = objective(&c);
            if f < *best_f {
                *best_f = f;
                *best_c = c;
            }
        };
        consider(self.coordinate_median(), &mut best_c, &mut best_f);
        for p in &self.points {
            consider(p.clone(), &mut best_c, &mut best_f);
        }
        let (c, f) = self.ellipsoid_minimise(rho, norm);
        if f < best_f {
            best_c = c;
            best_f = f;
        }
        Ok((best_f.max(0.0).powf(1.0 / rho), best_c))
    }

    fn coordinate_median(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|k| {
                let m = DiscreteMeasure1D::new(self.points.iter().map(|p| p[k]).collect(), self.weights.clone())
                    .expect("coordinate marginal of a valid measure");
                m.atoms()[m.quantile_index(0.5)]
            })
            .collect()
    }

    fn objective_subgradient(&self, c: &[f64], rho: f64, norm: &NormSpec) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (p, w) in self.points.iter().zip(&self.weights) {
            let z: Vec<f64> = p.iter().zip(c).map(|(a, b)| a - b).collect();
            let n = norm.norm(&z);
            if n == 0.0 {
                continue;
            }
            let scale = w * rho * n.powf(rho - 1.0);
            for (gk, sk) in g.iter_mut().zip(norm.subgradient(&z)) {
                *gk -= scale * sk;
            }
        }
        g
    }

    fn ellipsoid_minimise(&self, rho: f64, norm: &NormSpec) -> (Vec<f64>, f64) {
        let d = self.dim;
        let df = d as f64;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in &self.points {
            for k in 0..d {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let mut c: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let radius2: f64 = lo.iter().zip(&hi).map(|(a, b)| 0.25 * (b - a) * (b - a)).sum::<f64>() * 1.0001 + 1e-300;
        // P is the shape matrix of the ellipsoid {x : (x-c)^T P^{-1} (x-c) <= 1}.
        let mut p = vec![0.0; d * d];
        for k in 0..d {
            p[k * d + k] = radius2;
        }
        let mut best_c = c.clone();
        let mut best_f = self.moment_about(&c, rho, norm);
        let mut lower = f64::NEG_INFINITY;
        for _ in 0..ELLIPSOID_MAX_ITER {
            let f = self.moment_about(&c, rho, norm);
            if f < best_f {
                best_f = f;
                best_c = c.clone();
            }
            let g = self.objective_subgradient(&c, rho, norm);
            let pg: Vec<f64> = (0..d).map(|i| (0..d).map(|j| p[i * d + j] * g[j]).sum()).collect();
            let gpg: f64 = g.iter().zip(&pg).map(|(a, b)| a * b).sum();
            if !(gpg > 0.0) {
                break;
            }
            let width = gpg.sqrt();
            lower = lower.max(f - width);
            if best_f - lower <= MOMENT_REL_TOL * best_f.max(f64::MIN_POSITIVE) {
                break;
            }
            let gt: Vec<f64> = pg.iter().map(|v| v / width).collect();
            for k in 0..d {
                c[k] -= gt[k] / (df + 1.0);
            }
            let a = df * df / (df * df - 1.0);
            let b = 2.0 / (df + 1.0);
            for i in 0..d {
                for j in 0..d {
                    p[i * d + j] = a * (p[i * d + j] - b * gt[i] * gt[j]);
                }
            }
            for i in 0..d {
                for j in 0..i {
                    let s = 0.5 * (p[i * d + j] + p[j * d + i]);
                    p[i * d + j] = s;
                    p[j * d + i] = s;
                }
            }
        }
        (best_c, best_f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(a: f64) -> DiscreteMeasure1D {
        DiscreteMeasure1D::new(vec![-a, a], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(DiscreteMeasure1D::dirac(0.0).cdf(-1.0), 0.0);
        assert_eq!(sym(1.0).cdf(-1.0), 0.5);
        assert_eq!(sym(1.0).cdf(0.0), 0.5);
        assert_eq!(sym(1.0).cdf(1.0), 1.0);
    }

    #[test]
    fn quantile_examples() {
        let m = sym(1.0);
        assert_eq!(m.quantile(0.5).unwrap(), -1.0);
        for eps in [1e-12, 0.1, 0.25, 0.4999] {
            assert_eq!(m.quantile(0.5 + eps).unwrap(), 1.0);
        }
        let d = DiscreteMeasure1D::dirac(3.0);
        for u in [1e-9, 0.3, 0.999999] {
            assert_eq!(d.quantile(u).unwrap(), 3.0);
        }
    }

    #[test]
    fn quantile_rejects_levels_outside_unit_interval() {
        let m = sym(1.0);
        for u in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(m.quantile(u), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn construction_merges_and_validates() {
        let m = DiscreteMeasure1D::new(vec![1.0, 0.0, 1.0 + 1e-15], vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(m.atoms(), &[0.0, 1.0]);
        assert_eq!(m.weights(), &[0.5, 0.5]);
        assert!(DiscreteMeasure1D::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure1D::new(vec![0.0, 1.0], vec![-0.5, 1.5]).is_err());
        assert!(DiscreteMeasure1D::new(vec![0.0], vec![1.0, 0.0]).is_err());
        assert!(DiscreteMeasure1D::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn means() {
        assert_eq!(sym(3.5).mean(), 0.0);
        assert_eq!(DiscreteMeasure1D::dirac(2.5).mean(), 2.5);
        let n = 7.0;
        let m = DiscreteMeasureND::new(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 1.0 / n]],
            vec![0.25, 0.25, 0.5],
        )
        .unwrap();
        let mean = m.mean();
        assert!((mean[0] - 0.5).abs() < 1e-15);
        assert!((mean[1] - 1.0 / (2.0 * n)).abs() < 1e-15);
    }

    #[test]
    fn centred_moment_two_atom_and_dirac() {
        for rho in [1.0, 1.3, 2.0, 3.0, 4.5] {
            let (s, c) = sym(2.0).centred_moment(rho).unwrap();
            assert!((s - 2.0).abs() < 1e-10, "rho {rho}: {s}");
            if rho > 1.0 {
                assert!(c.abs() < 1e-6);
            }
            let (s, c) = DiscreteMeasure1D::dirac(4.0).centred_moment(rho).unwrap();
            assert_eq!((s, c), (0.0, 4.0));
        }
    }

    #[test]
    fn centred_moment_rho_two_is_standard_deviation() {
        let m = DiscreteMeasure1D::new(vec![-1.0, 0.5, 3.0], vec![0.2, 0.5, 0.3]).unwrap();
        let mean = m.mean();
        let var = m.moment_about(mean, 2.0);
        let (s, c) = m.centred_moment(2.0).unwrap();
        assert_eq!(c, mean);
        assert!((s - var.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rho_one_returns_left_median() {
        let m = DiscreteMeasure1D::new(vec![0.0, 1.0, 5.0, 6.0], vec![0.25; 4]).unwrap();
        let (s, c) = m.centred_moment(1.0).unwrap();
        assert_eq!(c, 1.0);
        assert!((s - 2.5).abs() < 1e-15);
        // any point of the median interval gives the same value
        assert!((m.moment_about(3.0, 1.0) - s).abs() < 1e-15);
    }

    #[test]
    fn nd_centred_moment_matches_separable_oracle() {
        // Under the L^rho norm the objective separates across coordinates.
        let rho = 1.7;
        let norm = NormSpec::new(rho).unwrap();
        let xs = DiscreteMeasure1D::new(vec![-1.0, 0.3, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
        let ys = DiscreteMeasure1D::new(vec![0.0, 4.0], vec![0.7, 0.3]).unwrap();
        let mut pts = Vec::new();
        let mut ws = Vec::new();
        for (a, wa) in xs.atoms().iter().zip(xs.weights()) {
            for (b, wb) in ys.atoms().iter().zip(ys.weights()) {
                pts.push(vec![*a, *b]);
                ws.push(wa * wb);
            }
        }
        let prod = DiscreteMeasureND::new(2, pts, ws).unwrap();
        let (sx, _) = xs.centred_moment(rho).unwrap();
        let (sy, _) = ys.centred_moment(rho).unwrap();
        let expected = (sx.powf(rho) + sy.powf(rho)).powf(1.0 / rho);
        let (s, _) = prod.centred_moment(rho, &norm).unwrap();
        assert!((s - expected).abs() <= 1e-10 * expected, "{s} vs {expected}");
    }

    #[test]
    fn nd_merges_duplicates_keeping_first_order() {
        let m = DiscreteMeasureND::new(
            2,
            vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]],
            vec![0.25, 0.5, 0.25],
        )
        .unwrap();
        assert_eq!(m.points(), &[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(m.weights(), &[0.5, 0.5]);
        assert!(matches!(
            DiscreteMeasureND::new(2, vec![vec![1.0]], vec![1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn quantile_cells_cover_unit_interval() {
        let mu = DiscreteMeasure1D::new(vec![0.0, 1.0], vec![0.3, 0.7]).unwrap();
        let nu = DiscreteMeasure1D::new(vec![-1.0, 0.5, 2.0], vec![0.5, 0.25, 0.25]).unwrap();
        let cells = quantile_cells(&mu, &nu);
        let ij: Vec<(usize, usize)> = cells.iter().map(|c| (c.i, c.j)).collect();
        assert_eq!(ij, vec![(0, 0), (1, 0), (1, 1), (1, 2)]);
        assert_eq!(cells[0].u_lo, 0.0);
        assert_eq!(cells.last().unwrap().u_hi, 1.0);
        let total: f64 = cells.iter().map(|c| c.len()).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn norms() {
        let v = [3.0, -4.0];
        assert_eq!(NormSpec::euclidean().norm(&v), 5.0);
        assert_eq!(NormSpec::manhattan().norm(&v), 7.0);
        assert_eq!(NormSpec::sup().norm(&v), 4.0);
        let n3 = NormSpec::new(3.0).unwrap().norm(&v);
        assert!((n3 - (27.0f64 + 64.0).cbrt()).abs() < 1e-14);
        assert!(NormSpec::new(0.5).is_err());
        assert_eq!("inf".parse::<NormSpec>().unwrap(), NormSpec::sup());
        // no overflow for huge coordinates
        assert!(NormSpec::new(3.0).unwrap().norm(&[1e200, 1e200]).is_finite());
    }
}
