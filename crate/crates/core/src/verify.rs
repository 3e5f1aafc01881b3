//! Evaluation of the martingale Wasserstein inequality
//! `M_rho^rho(mu, nu) <= C W_rho(mu, nu) sigma_rho^(rho-1)(nu)` on given pairs
//! and on seeded random families.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{k_rho, DEFAULT_GAMMA_STEP};
use crate::convex_order::check_cx;
use crate::error::{Error, Result};
use crate::examples::{
    direction_dependent_pair, radial_pair, random_cx_pair_1d, random_measure, scaling_bound, scaling_pair, tensor_pair,
};
use crate::itm::{itm_coupling, QChoice};
use crate::measures::{DiscreteMeasure1D, DiscreteMeasureND, NormSpec};
use crate::mot::m_rho_lp;
use crate::transport::wasserstein;

/// Reports whose slack is below this count as violations.
pub const SLACK_TOL: f64 = 1e-7;
/// `W_rho` below this is treated as zero.
const ZERO_W: f64 = 1e-14;

/// Which family a pair belongs to; selects the constant the ratio is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CaseTag {
    OneD,
    /// Scaling about the mean by `1 + lambda`.
    Scaling(f64),
    Tensor,
    Radial,
    Direction,
    /// No structure known; only the `rho = 2` Euclidean bound applies.
    Generic,
}

impl CaseTag {
    pub fn name(&self) -> &'static str {
        match self {
            CaseTag::OneD => "1d",
            CaseTag::Scaling(_) => "scaling",
            CaseTag::Tensor => "tensor",
            CaseTag::Radial => "radial",
            CaseTag::Direction => "direction",
            CaseTag::Generic => "generic",
        }
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Case families a sweep can draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CaseKind {
    OneD,
    Scaling,
    Tensor,
    Radial,
    Direction,
}

impl CaseKind {
    pub fn name(&self) -> &'static str {
        match self {
            CaseKind::OneD => "1d",
            CaseKind::Scaling => "scaling",
            CaseKind::Tensor => "tensor",
            CaseKind::Radial => "radial",
            CaseKind::Direction => "direction",
        }
    }
}

impl FromStr for CaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1d" => Ok(CaseKind::OneD),
            "scaling" => Ok(CaseKind::Scaling),
            "tensor" => Ok(CaseKind::Tensor),
            "radial" => Ok(CaseKind::Radial),
            "direction" => Ok(CaseKind::Direction),
            other => Err(Error::Parse(format!(
                "unknown case {other:?}, expected 1d, scaling, tensor, radial or direction"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub rho: f64,
    pub case: String,
    pub w_rho: f64,
    pub sigma_rho: f64,
    /// `M_rho` from the linear program.
    pub m_rho: f64,
    /// Cost `int |x - y|^rho` of the inverse-transform coupling (1D only).
    pub itm_cost: Option<f64>,
    /// `M_rho^rho / (W_rho sigma_rho^(rho-1))`, zero when `mu = nu`.
    pub ratio: f64,
    pub bound: Option<f64>,
    /// Whether `bound` stands in for an optimal constant that is not computable.
    pub surrogate: bool,
    pub slack: Option<f64>,
}

impl InequalityReport {
    pub fn violated(&self) -> bool {
        self.slack.is_some_and(|s| s < -SLACK_TOL)
    }
}

/// Constant compared with the ratio, and whether it is a surrogate.
/// `k` is `K_rho` when already known.
fn bound_for(case: CaseTag, rho: f64, norm: &NormSpec, k: Option<f64>) -> Result<(Option<f64>, bool)> {
    let k_value = || -> Result<f64> {
        match k {
            Some(v) => Ok(v),
            None => Ok(k_rho(rho, DEFAULT_GAMMA_STEP)?.k_est),
        }
    };
    if rho == 2.0 && norm.is_euclidean() {
        return Ok((Some(2.0), false));
    }
    Ok(match case {
        CaseTag::OneD => (Some(k_value()?), false),
        CaseTag::Scaling(lambda) => (Some(scaling_bound(rho, lambda)), false),
        CaseTag::Tensor | CaseTag::Radial | CaseTag::Direction => (Some(k_value()?), true),
        CaseTag::Generic => (None, false),
    })
}

/// Ratio and bound for an ordered pair.
pub fn verify_pair(
    mu: &DiscreteMeasureND,
    nu: &DiscreteMeasureND,
    rho: f64,
    norm: &NormSpec,
    case: CaseTag,
) -> Result<InequalityReport> {
    verify_pair_with_k(mu, nu, rho, norm, case, None)
}

fn verify_pair_with_k(
    mu: &DiscreteMeasureND,
    nu: &DiscreteMeasureND,
    rho: f64,
    norm: &NormSpec,
    case: CaseTag,
    k: Option<f64>,
) -> Result<InequalityReport> {
    if rho.is_nan() || rho < 1.0 || rho.is_infinite() {
        return Err(Error::Domain(format!("rho must be a finite real >= 1, got {rho}")));
    }
    let cx = check_cx(mu, nu)?;
    if !cx.ordered {
        return Err(Error::NotInConvexOrder(format!(
            "mean gap {:e}, worst violation {:e}",
            cx.mean_gap, cx.worst_violation
        )));
    }
    let w_rho = wasserstein(mu, nu, rho, norm)?;
    let (sigma_rho, _) = nu.centred_moment(rho, norm)?;
    let (m_rho, _) = m_rho_lp(mu, nu, rho, norm)?;
    let itm_cost = if mu.dim() == 1 {
        let c = itm_coupling(&mu.to_1d()?, &nu.to_1d()?, QChoice::Comonotone)?;
        Some(c.cost(rho, norm))
    } else {
        None
    };
    let m_pow = m_rho.powf(rho);
    let ratio = if w_rho <= ZERO_W {
        if m_pow > 1e-12 {
            return Err(Error::DegenerateSupport(format!(
                "W_rho vanishes but M_rho^rho = {m_pow:e}"
            )));
        }
        0.0
    } else {
        m_pow / (w_rho * sigma_rho.powf(rho - 1.0))
    };
    let (bound, surrogate) = bound_for(case, rho, norm, k)?;
    Ok(InequalityReport {
        rho,
        case: case.name().to_string(),
        w_rho,
        sigma_rho,
        m_rho,
        itm_cost,
        ratio,
        bound,
        surrogate,
        slack: bound.map(|b| b - ratio),
    })
}

/// `M_rho^rho / (W_rho^s sigma_rho^(rho - s))`.
pub fn exponent_ratio(mu: &DiscreteMeasureND, nu: &DiscreteMeasureND, rho: f64, s: f64, norm: &NormSpec) -> Result<f64> {
    if !(s >= 1.0 && s <= rho) {
        return Err(Error::Domain(format!("s must lie in [1, rho], got {s}")));
    }
    let w = wasserstein(mu, nu, rho, norm)?;
    let (sigma, _) = nu.centred_moment(rho, norm)?;
    let (m, _) = m_rho_lp(mu, nu, rho, norm)?;
    Ok(m.powf(rho) / (w.powf(s) * sigma.powf(rho - s)))
}

// ---------------------------------------------------------------------------
// sweeps

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub cases: Vec<CaseKind>,
    pub rho_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Atoms of `mu` for the 1D, scaling and direction cases.
    pub n_atoms: usize,
    /// Mean-preserving spreads applied in the 1D case.
    pub n_dilations: usize,
    /// Ambient dimension of the scaling, radial and direction cases.
    pub dim: usize,
    pub lambda: f64,
    /// Norm of the scaling, radial and direction cases; the tensor case uses `L^rho`.
    pub norm: NormSpec,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            cases: Vec::new(),
            rho_grid: Vec::new(),
            seeds: Vec::new(),
            n_atoms: 5,
            n_dilations: 4,
            dim: 2,
            lambda: 1.0,
            norm: NormSpec::euclidean(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.rho_grid.iter().find(|r| r.is_nan() || **r < 1.0 || r.is_infinite()) {
            return Err(Error::Config(format!("rho must be a finite real >= 1, got {r}")));
        }
        if self.n_atoms == 0 {
            return Err(Error::Config("n_atoms must be positive".into()));
        }
        if self.dim < 2 {
            return Err(Error::Config("dim must be at least 2".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be a nonnegative real, got {}", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub seed: u64,
    pub report: InequalityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseSummary {
    pub case: String,
    pub max_ratio: f64,
    pub min_slack: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<CaseSummary>,
}

impl SweepReport {
    pub fn any_violation(&self) -> bool {
        self.rows.iter().any(|r| r.report.violated())
    }

    /// One line per instance, then one `max` line per case.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("case,seed,rho,w_rho,sigma_rho,m_rho,itm_cost,ratio,bound,surrogate,slack\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        for row in &self.rows {
            let r = &row.report;
            s.push_str(&format!(
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{},{},{}\n",
                r.case,
                row.seed,
                r.rho,
                r.w_rho,
                r.sigma_rho,
                r.m_rho,
                opt(r.itm_cost),
                r.ratio,
                opt(r.bound),
                r.surrogate,
                opt(r.slack)
            ));
        }
        for c in &self.summary {
            s.push_str(&format!(
                "{},max,,,,,,{:.16e},,,{}\n",
                c.case,
                c.max_ratio,
                opt(c.min_slack)
            ));
        }
        s
    }
}

/// Random symmetric dilation of a law on `[0, inf)` read as a symmetric law on `R`:
/// `r -> r + b` with probability `a / (a + b)`, `|r - a|` otherwise.
fn radial_dilation<R: Rng>(rng: &mut R, bar: &DiscreteMeasure1D, steps: usize) -> Result<DiscreteMeasure1D> {
    let mut atoms = bar.atoms().to_vec();
    let mut weights = bar.weights().to_vec();
    for _ in 0..steps {
        let k = rng.random_range(0..atoms.len());
        let (a, b) = (rng.random_range(0.05..1.0), rng.random_range(0.05..1.0));
        let (r, w) = (atoms[k], weights[k]);
        atoms[k] = r + b;
        weights[k] = w * a / (a + b);
        atoms.push((r - a).abs());
        weights.push(w * b / (a + b));
    }
    DiscreteMeasure1D::from_unnormalized(atoms, weights)
}

fn unit_vector<R: Rng>(rng: &mut R, d: usize, norm: &NormSpec) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = norm.norm(&v);
        if n > 1e-3 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Builds the pair of one sweep instance. Every family is seeded from `seed`
/// alone, so instances do not depend on `rho`, except the tensor factors'
/// couplings.
pub fn sweep_instance(
    cfg: &SweepConfig,
    case: CaseKind,
    seed: u64,
    rho: f64,
) -> Result<(DiscreteMeasureND, DiscreteMeasureND, NormSpec, CaseTag)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = cfg.dim;
    match case {
        CaseKind::OneD => {
            let (mu, nu) = random_cx_pair_1d(seed, cfg.n_atoms, cfg.n_dilations)?;
            Ok((mu.to_nd(), nu.to_nd(), cfg.norm, CaseTag::OneD))
        }
        CaseKind::Scaling => {
            let mu = random_measure(&mut rng, cfg.n_atoms, d)?;
            let (nu, _) = scaling_pair(&mu, cfg.lambda)?;
            Ok((mu, nu, cfg.norm, CaseTag::Scaling(cfg.lambda)))
        }
        CaseKind::Tensor => {
            let factors = rng.random_range(2..=3);
            let pairs = (0..factors)
                .map(|k| random_cx_pair_1d(seed.wrapping_mul(31).wrapping_add(k), 2, 1))
                .collect::<Result<Vec<_>>>()?;
            let t = tensor_pair(&pairs, rho)?;
            Ok((t.mu, t.nu, NormSpec::new(rho)?, CaseTag::Tensor))
        }
        CaseKind::Radial => {
            let radii: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..1.0)).collect();
            let bar_mu = DiscreteMeasure1D::uniform(radii)?;
            let bar_nu = radial_dilation(&mut rng, &bar_mu, 2)?;
            let dirs: Vec<Vec<f64>> = (0..2).map(|_| unit_vector(&mut rng, d, &cfg.norm)).collect();
            let eta = DiscreteMeasureND::from_unnormalized(d, dirs, vec![1.0; 2])?;
            let alpha: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = radial_pair(&bar_mu, &bar_nu, &eta, &alpha, rho, &cfg.norm)?;
            Ok((r.mu, r.nu, cfg.norm, CaseTag::Radial))
        }
        CaseKind::Direction => {
            // symmetric about a random centre, hence conditionally centred on every fibre
            let alpha: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let half = random_measure(&mut rng, cfg.n_atoms.div_ceil(2), d)?;
            let mut points = half.points().to_vec();
            points.extend(
                half.points()
                    .iter()
                    .map(|p| p.iter().zip(&alpha).map(|(x, a)| 2.0 * a - x).collect::<Vec<f64>>()),
            );
            let mut weights = half.weights().to_vec();
            weights.extend_from_slice(half.weights());
            let mu = DiscreteMeasureND::from_unnormalized(d, points, weights)?;
            let p = direction_dependent_pair(&mu, cfg.lambda, rho, &cfg.norm)?;
            Ok((mu, p.nu, cfg.norm, CaseTag::Direction))
        }
    }
}

/// Runs every `(case, seed, rho)` instance in parallel and sorts the rows by
/// case, seed and `rho`.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let mut k_cache: HashMap<u64, f64> = HashMap::new();
    for &rho in &cfg.rho_grid {
        if let std::collections::hash_map::Entry::Vacant(e) = k_cache.entry(rho.to_bits()) {
            e.insert(k_rho(rho, DEFAULT_GAMMA_STEP)?.k_est);
        }
    }
    let mut jobs = Vec::new();
    for &case in &cfg.cases {
        for &seed in &cfg.seeds {
            for &rho in &cfg.rho_grid {
                jobs.push((case, seed, rho));
            }
        }
    }
    let mut rows = jobs
        .par_iter()
        .map(|&(case, seed, rho)| {
            let (mu, nu, norm, tag) = sweep_instance(cfg, case, seed, rho)?;
            let report = verify_pair_with_k(&mu, &nu, rho, &norm, tag, k_cache.get(&rho.to_bits()).copied())?;
            Ok((case, SweepRow { seed, report }))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.seed.cmp(&b.1.seed))
            .then(a.1.report.rho.total_cmp(&b.1.report.rho))
    });
    let mut summary: Vec<CaseSummary> = Vec::new();
    for (case, row) in &rows {
        let r = &row.report;
        match summary.last_mut() {
            Some(s) if s.case == case.name() => {
                s.max_ratio = s.max_ratio.max(r.ratio);
                s.min_slack = match (s.min_slack, r.slack) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
                s.count += 1;
            }
            _ => summary.push(CaseSummary {
                case: case.name().to_string(),
                max_ratio: r.ratio,
                min_slack: r.slack,
                count: 1,
            }),
        }
    }
    Ok(SweepReport {
        rows: rows.into_iter().map(|(_, r)| r).collect(),
        summary,
    })
}
