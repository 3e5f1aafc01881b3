//! Inverse-transform martingale couplings on the line.
//!
//! For `mu <=_cx nu`, `mu != nu`, let `Psi_+` and `Psi_-` be the integrals of the
//! positive and negative parts of `F_mu^{-1} - F_nu^{-1}`. A coupling `Q` of
//! `dPsi_+` and `dPsi_-` (normalised) with `u < v` almost surely pairs each
//! level `u` where the quantile of `mu` sits above that of `nu` with levels `v`
//! where it sits below. The kernel sends `x = F_mu^{-1}(u)` to the two points
//! `F_nu^{-1}(u)` and `F_nu^{-1}(v)` with the weights that keep the mean at `x`.
//!
//! Every quantity here is piecewise constant or piecewise linear on the merged
//! quantile partition, so the construction is an exact finite sum over
//! "pieces": sub-cells of the partition paired by `Q`.

use serde::Serialize;

use crate::convex_order::check_cx_1d;
use crate::error::{Error, Result};
use crate::measures::{quantile_cells, DiscreteMeasure1D, NormSpec, QuantileCell};
use crate::transport::Coupling;

/// Nondecreasing continuous piecewise-linear function on `[0, 1]` with `f(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinearFn {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinearFn {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() || breakpoints.len() < 2 {
            return Err(Error::Domain("need matching breakpoints and values (at least two)".into()));
        }
        if breakpoints[0] != 0.0 || values[0] != 0.0 {
            return Err(Error::Domain("function must start at (0, 0)".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("breakpoints must be increasing".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("values must be nondecreasing".into()));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at the right end of the domain.
    pub fn total(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn eval(&self, u: f64) -> f64 {
        let b = &self.breakpoints;
        if u <= b[0] {
            return self.values[0];
        }
        if u >= *b.last().unwrap() {
            return self.total();
        }
        let k = b.partition_point(|x| *x < u);
        let (u0, u1) = (b[k - 1], b[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (u - u0) / (u1 - u0)
    }

    /// Left-continuous generalised inverse `inf { u : f(u) >= s }`.
    pub fn inverse(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let k = self.values.partition_point(|v| *v < s);
        if k >= self.values.len() {
            return *self.breakpoints.last().unwrap();
        }
        let (u0, u1) = (self.breakpoints[k - 1], self.breakpoints[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        u0 + (s - v0) / (v1 - v0) * (u1 - u0)
    }
}

/// `(Psi_+, Psi_-)` on the merged quantile partition.
///
/// Fails with [`Error::NotInConvexOrder`] for unordered pairs and with
/// [`Error::EqualMeasures`] when both functions vanish.
pub fn psi_pair(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D) -> Result<(PiecewiseLinearFn, PiecewiseLinearFn)> {
    require_ordered(mu, nu)?;
    let cells = quantile_cells(mu, nu);
    let (plus, minus) = psi_from_cells(mu, nu, &cells);
    if plus.total() == 0.0 && minus.total() == 0.0 {
        return Err(Error::EqualMeasures);
    }
    Ok((plus, minus))
}

fn require_ordered(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D) -> Result<()> {
    let r = check_cx_1d(mu, nu);
    if !r.ordered {
        return Err(Error::NotInConvexOrder(format!(
            "mean gap {:e}, integrated quantile deficit {:e}",
            r.mean_gap, r.worst_violation
        )));
    }
    Ok(())
}

fn psi_from_cells(
    mu: &DiscreteMeasure1D,
    nu: &DiscreteMeasure1D,
    cells: &[QuantileCell],
) -> (PiecewiseLinearFn, PiecewiseLinearFn) {
    let (x, y) = (mu.atoms(), nu.atoms());
    let mut bp = vec![0.0];
    let (mut vp, mut vm) = (vec![0.0], vec![0.0]);
    let (mut ap, mut am) = (0.0, 0.0);
    for c in cells {
        let d = x[c.i] - y[c.j];
        if d > 0.0 {
            ap += c.len() * d;
        } else {
            am -= c.len() * d;
        }
        bp.push(c.u_hi);
        vp.push(ap);
        vm.push(am);
    }
    (
        PiecewiseLinearFn { breakpoints: bp.clone(), values: vp },
        PiecewiseLinearFn { breakpoints: bp, values: vm },
    )
}

/// Which element of the family of level couplings to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QChoice {
    /// Pairs equal levels of `Psi_+` and `Psi_-` (quantile coupling of the two
    /// normalised measures).
    #[default]
    Comonotone,
    /// Sweeps the `Psi_-` cells from left to right and draws each one's mass from
    /// all not-yet-used `Psi_+` mass to its left, in proportion to what remains.
    /// Within each pair of cells the coupling is a product measure.
    ConditionedProduct,
}

impl std::str::FromStr for QChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "comonotone" => Ok(Self::Comonotone),
            "conditioned-product" | "product" => Ok(Self::ConditionedProduct),
            other => Err(Error::Parse(format!("unknown Q choice {other:?}"))),
        }
    }
}

/// Mass `mass` (in units of `Psi`) carried from the `Psi_+` cell `plus_cell`
/// to the `Psi_-` cell `minus_cell`; `u` and `v` ranges record where it sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QPiece {
    pub plus_cell: usize,
    pub minus_cell: usize,
    pub u_lo: f64,
    pub u_hi: f64,
    pub v_lo: f64,
    pub v_hi: f64,
    pub mass: f64,
}

/// A coupling of `dPsi_+ / T` and `dPsi_- / T`, `T = Psi_+(1)`, stored as
/// unnormalised pieces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QMeasure {
    cells: Vec<QuantileCell>,
    pieces: Vec<QPiece>,
    total: f64,
}

impl QMeasure {
    pub fn pieces(&self) -> &[QPiece] {
        &self.pieces
    }

    pub fn cells(&self) -> &[QuantileCell] {
        &self.cells
    }

    /// `T = Psi_+(1)`.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Normalised mass of the pieces with `u >= v` somewhere on them.
    pub fn mass_on_wrong_side(&self) -> f64 {
        self.pieces.iter().filter(|p| p.u_hi > p.v_lo).map(|p| p.mass).sum::<f64>() / self.total
    }

    /// Largest gap between the projections and `dPsi_± / T`, cell by cell.
    pub fn marginal_residual(&self, mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D) -> f64 {
        let (x, y) = (mu.atoms(), nu.atoms());
        let mut plus = vec![0.0; self.cells.len()];
        let mut minus = vec![0.0; self.cells.len()];
        for p in &self.pieces {
            plus[p.plus_cell] += p.mass;
            minus[p.minus_cell] += p.mass;
        }
        self.cells
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let d = (x[c.i] - y[c.j]) * c.len();
                (plus[k] - d.max(0.0)).abs().max((minus[k] - (-d).max(0.0)).abs()) / self.total
            })
            .fold(0.0, f64::max)
    }
}

struct SignedCell {
    index: usize,
    mass: f64,
}

fn signed_cells(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D, cells: &[QuantileCell]) -> (Vec<SignedCell>, Vec<SignedCell>) {
    let (x, y) = (mu.atoms(), nu.atoms());
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (index, c) in cells.iter().enumerate() {
        let d = x[c.i] - y[c.j];
        if d > 0.0 {
            plus.push(SignedCell { index, mass: d * c.len() });
        } else if d < 0.0 {
            minus.push(SignedCell { index, mass: -d * c.len() });
        }
    }
    (plus, minus)
}

/// The comonotone element: level `s` of `Psi_+` is paired with level `s` of `Psi_-`.
pub fn q_comonotone(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D) -> Result<QMeasure> {
    require_ordered(mu, nu)?;
    let cells = quantile_cells(mu, nu);
    let (plus, minus) = signed_cells(mu, nu, &cells);
    let total: f64 = plus.iter().map(|c| c.mass).sum();
    if total <= 0.0 {
        return Err(Error::DegenerateSupport("Psi_+(1) = 0".into()));
    }
    let mut pieces = Vec::with_capacity(plus.len() + minus.len());
    let (mut a, mut b) = (0, 0);
    // mass already consumed in the current plus / minus cell
    let (mut used_a, mut used_b) = (0.0, 0.0);
    while a < plus.len() && b < minus.len() {
        let (pa, pb) = (&plus[a], &minus[b]);
        let q = (pa.mass - used_a).min(pb.mass - used_b);
        if q > 0.0 {
            let (ca, cb) = (&cells[pa.index], &cells[pb.index]);
            pieces.push(QPiece {
                plus_cell: pa.index,
                minus_cell: pb.index,
                u_lo: ca.u_lo + ca.len() * used_a / pa.mass,
                u_hi: ca.u_lo + ca.len() * ((used_a + q) / pa.mass).min(1.0),
                v_lo: cb.u_lo + cb.len() * used_b / pb.mass,
                v_hi: cb.u_lo + cb.len() * ((used_b + q) / pb.mass).min(1.0),
                mass: q,
            });
        }
        used_a += q;
        used_b += q;
        // snap levels that agree up to rounding
        let snap = 1e-15 * total;
        if pa.mass - used_a <= snap {
            a += 1;
            used_a = 0.0;
        }
        if pb.mass - used_b <= snap {
            b += 1;
            used_b = 0.0;
        }
    }
    finish_q(cells, pieces, total)
}

/// Sequential proportional allocation; see [`QChoice::ConditionedProduct`].
pub fn q_conditioned_product(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D) -> Result<QMeasure> {
    require_ordered(mu, nu)?;
    let cells = quantile_cells(mu, nu);
    let (plus, minus) = signed_cells(mu, nu, &cells);
    let total: f64 = plus.iter().map(|c| c.mass).sum();
    if total <= 0.0 {
        return Err(Error::DegenerateSupport("Psi_+(1) = 0".into()));
    }
    let mut remaining: Vec<f64> = plus.iter().map(|c| c.mass).collect();
    let mut pieces = Vec::new();
    for mc in &minus {
        let left = plus.partition_point(|p| p.index < mc.index);
        let available: f64 = remaining[..left].iter().sum();
        if available <= 0.0 {
            if mc.mass > 1e-12 * total {
                return Err(Error::NotInConvexOrder("no Psi_+ mass to the left of a Psi_- cell".into()));
            }
            continue;
        }
        let take = mc.mass.min(available) / available;
        let cb = &cells[mc.index];
        for (k, rem) in remaining[..left].iter_mut().enumerate() {
            let q = *rem * take;
            if q <= 0.0 {
                continue;
            }
            *rem -= q;
            let ca = &cells[plus[k].index];
            pieces.push(QPiece {
                plus_cell: plus[k].index,
                minus_cell: mc.index,
                u_lo: ca.u_lo,
                u_hi: ca.u_hi,
                v_lo: cb.u_lo,
                v_hi: cb.u_hi,
                mass: q,
            });
        }
    }
    finish_q(cells, pieces, total)
}

fn finish_q(cells: Vec<QuantileCell>, mut pieces: Vec<QPiece>, total: f64) -> Result<QMeasure> {
    // Pieces pairing a minus cell with a later plus cell can only come from
    // rounding; anything heavier is a bug upstream.
    let wrong: f64 = pieces.iter().filter(|p| p.plus_cell > p.minus_cell).map(|p| p.mass).sum();
    if wrong > 1e-14 * total {
        return Err(Error::NotInConvexOrder(format!("level coupling puts mass {wrong:e} on u > v")));
    }
    pieces.retain(|p| p.plus_cell < p.minus_cell);
    Ok(QMeasure { cells, pieces, total })
}

pub fn build_q(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D, choice: QChoice) -> Result<QMeasure> {
    match choice {
        QChoice::Comonotone => q_comonotone(mu, nu),
        QChoice::ConditionedProduct => q_conditioned_product(mu, nu),
    }
}

/// One piece of the kernel `u -> m~(u, dy)`: on Lebesgue mass `lebesgue` of
/// levels `u` with `F_mu^{-1}(u) = x` and `F_nu^{-1}(u) = y_self`, the kernel
/// puts `w_partner` on `y_partner` and `w_self` on `y_self`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelPiece {
    pub cell: usize,
    pub lebesgue: f64,
    pub x: f64,
    pub y_self: f64,
    pub y_partner: f64,
    pub w_self: f64,
    pub w_partner: f64,
    /// Column indices in `nu` of `y_self` and `y_partner`.
    pub j_self: usize,
    pub j_partner: usize,
    pub i: usize,
}

impl KernelPiece {
    /// `int |y - F_nu^{-1}(u)| m~(u, dy)`, to be compared with `|x - y_self|`.
    pub fn spread(&self) -> f64 {
        self.w_partner * (self.y_partner - self.y_self).abs()
    }
}

/// The kernel pieces of `M^Q`. Cells where the quantiles coincide get a
/// single piece with `w_self = 1`.
pub fn kernel_pieces(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D, q: &QMeasure) -> Result<Vec<KernelPiece>> {
    let (x, y) = (mu.atoms(), nu.atoms());
    let cells = q.cells();
    // Q-mass attached to each cell, to split the cell's Lebesgue length exactly
    let mut attached = vec![0.0; cells.len()];
    for p in q.pieces() {
        attached[p.plus_cell] += p.mass;
        attached[p.minus_cell] += p.mass;
    }
    let mut out = Vec::with_capacity(2 * q.pieces().len() + cells.len());
    for (k, c) in cells.iter().enumerate() {
        if x[c.i] == y[c.j] {
            out.push(KernelPiece {
                cell: k,
                lebesgue: c.len(),
                x: x[c.i],
                y_self: y[c.j],
                y_partner: y[c.j],
                w_self: 1.0,
                w_partner: 0.0,
                j_self: c.j,
                j_partner: c.j,
                i: c.i,
            });
        }
    }
    for p in q.pieces() {
        for (own, other) in [(p.plus_cell, p.minus_cell), (p.minus_cell, p.plus_cell)] {
            let (co, cp) = (&cells[own], &cells[other]);
            let (xo, yo, yp) = (x[co.i], y[co.j], y[cp.j]);
            let delta = yp - yo;
            if delta == 0.0 {
                return Err(Error::DegenerateSupport("paired cells share the same quantile of nu".into()));
            }
            let w_partner = ((xo - yo) / delta).clamp(0.0, 1.0);
            out.push(KernelPiece {
                cell: own,
                lebesgue: co.len() * p.mass / attached[own],
                x: xo,
                y_self: yo,
                y_partner: yp,
                w_self: 1.0 - w_partner,
                w_partner,
                j_self: co.j,
                j_partner: cp.j,
                i: co.i,
            });
        }
    }
    Ok(out)
}

/// The coupling `M^Q`, aggregated onto the atoms of `mu` and `nu`.
pub fn build_itm(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D, q: &QMeasure) -> Result<Coupling> {
    let m = nu.len();
    let mut matrix = vec![0.0; mu.len() * m];
    for k in kernel_pieces(mu, nu, q)? {
        matrix[k.i * m + k.j_self] += k.lebesgue * k.w_self;
        matrix[k.i * m + k.j_partner] += k.lebesgue * k.w_partner;
    }
    Coupling::from_1d(mu, nu, matrix)
}

/// `M^Q` for the chosen `Q`; the identity coupling when `mu = nu`.
pub fn itm_coupling(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D, choice: QChoice) -> Result<Coupling> {
    require_ordered(mu, nu)?;
    if mu.len() == nu.len() && mu.approx_eq(nu, 1e-14) {
        let n = nu.len();
        let mut matrix = vec![0.0; n * n];
        for (i, w) in nu.weights().iter().enumerate() {
            matrix[i * n + i] = *w;
        }
        return Coupling::from_1d(mu, nu, matrix);
    }
    let q = build_q(mu, nu, choice)?;
    build_itm(mu, nu, &q)
}

/// `sum m_ij |x_i - y_j|^rho`.
pub fn coupling_cost(m: &Coupling, rho: f64, norm: &NormSpec) -> f64 {
    m.cost(rho, norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::w_rho_1d;

    fn sym(a: f64) -> DiscreteMeasure1D {
        DiscreteMeasure1D::new(vec![-a, a], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn psi_for_two_atom_pair() {
        let (p, m) = psi_pair(&sym(1.0), &sym(2.0)).unwrap();
        assert_eq!(p.total(), 0.5);
        assert_eq!(m.total(), 0.5);
        assert_eq!(p.eval(0.25), 0.25);
        assert_eq!(m.eval(0.25), 0.0);
        assert_eq!(m.eval(0.75), 0.25);
        assert!(matches!(psi_pair(&sym(1.0), &sym(1.0)), Err(Error::EqualMeasures)));
        assert!(matches!(psi_pair(&sym(2.0), &sym(1.0)), Err(Error::NotInConvexOrder(_))));
    }

    #[test]
    fn inverse_is_left_continuous() {
        let f = PiecewiseLinearFn::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(f.inverse(0.0), 0.0);
        assert_eq!(f.inverse(0.5), 0.75);
        assert_eq!(f.inverse(1.0), 1.0);
        assert!(PiecewiseLinearFn::new(vec![0.0, 1.0], vec![0.0, -1.0]).is_err());
    }

    #[test]
    fn comonotone_q_for_two_atom_pair() {
        let q = q_comonotone(&sym(1.0), &sym(2.0)).unwrap();
        assert_eq!(q.pieces().len(), 1);
        let p = q.pieces()[0];
        assert_eq!((p.u_lo, p.u_hi, p.v_lo, p.v_hi), (0.0, 0.5, 0.5, 1.0));
        assert_eq!(q.mass_on_wrong_side(), 0.0);
        assert!(q.marginal_residual(&sym(1.0), &sym(2.0)) < 1e-15);
    }

    #[test]
    fn two_atom_coupling_is_h() {
        let (a, b) = (1.0, 2.0);
        for choice in [QChoice::Comonotone, QChoice::ConditionedProduct] {
            let m = itm_coupling(&sym(a), &sym(b), choice).unwrap();
            let hi = (b + a) / (4.0 * b);
            let lo = (b - a) / (4.0 * b);
            let expected = [hi, lo, lo, hi];
            for (got, want) in m.matrix().iter().zip(expected) {
                assert!((got - want).abs() < 1e-15);
            }
            let e = NormSpec::euclidean();
            assert!((coupling_cost(&m, 1.0, &e) - 1.5).abs() < 1e-14);
            assert!((coupling_cost(&m, 2.0, &e) - 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn equal_measures_give_identity() {
        let m = itm_coupling(&sym(1.0), &sym(1.0), QChoice::Comonotone).unwrap();
        assert_eq!(m.matrix(), &[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(coupling_cost(&m, 1.0, &NormSpec::euclidean()), 0.0);
    }

    #[test]
    fn six_atom_pair() {
        let mu = DiscreteMeasure1D::new(vec![-1.0, 0.0, 0.5, 1.0, 2.0, 3.0], vec![0.1, 0.2, 0.2, 0.2, 0.2, 0.1]).unwrap();
        // two mean-preserving spreads of mu
        let nu = DiscreteMeasure1D::new(
            vec![-1.0, -0.5, 0.5, 1.0, 1.5, 2.5, 3.0],
            vec![0.1, 0.1, 0.3, 0.2, 0.1, 0.1, 0.1],
        )
        .unwrap();
        assert!((mu.mean() - nu.mean()).abs() < 1e-12);
        for choice in [QChoice::Comonotone, QChoice::ConditionedProduct] {
            let m = itm_coupling(&mu, &nu, choice).unwrap();
            assert!(m.marginal_residual() < 1e-12);
            assert!(m.martingale_residual() < 1e-12);
            let w1 = w_rho_1d(&mu, &nu, 1.0).unwrap();
            assert!(coupling_cost(&m, 1.0, &NormSpec::euclidean()) <= 2.0 * w1 + 1e-12);
        }
    }
}
