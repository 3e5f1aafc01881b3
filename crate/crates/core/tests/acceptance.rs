//! Acceptance checks. Run with `cargo test --test acceptance`; prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::time::{Duration, Instant};

use mwi_core::constants::{k_rho, DEFAULT_GAMMA_STEP};
use mwi_core::convex_order::{check_cx, check_cx_1d};
use mwi_core::examples::{
    bj_example, bj_ratio, bj_scaled_limit, random_cx_pair, random_cx_pair_1d, random_measure, scaling_bound,
    scaling_pair, scaling_w_rho, tensor_pair, triangle_example, two_atom_m_rho_pow, two_atom_pair, two_atom_s_ratio,
};
use mwi_core::itm::{itm_coupling, QChoice};
use mwi_core::measures::{DiscreteMeasure1D, NormSpec};
use mwi_core::mot::{compose_coupling, m2_closed_form, m_rho_lp};
use mwi_core::transport::{w_rho_1d, w_rho_nd};
use mwi_core::verify::{exponent_ratio, verify_pair, CaseTag, SLACK_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, t: Duration) -> Result<(), String> {
    ensure(t <= limit, || format!("took {t:?}, limit {limit:?}"))
}

fn c1_two_atom() -> Check {
    let start = Instant::now();
    let e = NormSpec::euclidean();
    let mut worst = 0.0_f64;
    for (a, b) in [(1.0, 2.0), (1.0, 3.0), (0.5, 4.0)] {
        let (mu, nu, _) = two_atom_pair(a, b).unwrap();
        for rho in [1.0, 1.5, 2.0, 3.0] {
            let (m, _) = m_rho_lp(&mu.to_nd(), &nu.to_nd(), rho, &e).map_err(|x| x.to_string())?;
            let expected = two_atom_m_rho_pow(a, b, rho);
            let w = w_rho_1d(&mu, &nu, rho).unwrap();
            let (sigma, _) = nu.centred_moment(rho).unwrap();
            for (got, want, what) in [(m.powf(rho), expected, "M^rho"), (w, b - a, "W"), (sigma, b, "sigma")] {
                let r = (got - want).abs() / want;
                worst = worst.max(r);
                ensure(r <= 1e-9, || format!("{what} at a={a}, b={b}, rho={rho}: {got} vs {want}"))?;
            }
        }
    }
    within(Duration::from_secs(1), start.elapsed())?;
    Ok(format!("worst relative error {worst:.2e}"))
}

fn c2_m2_identity() -> Check {
    let e = NormSpec::euclidean();
    let mut worst = 0.0_f64;
    let mut record = |got: f64, want: f64, what: &str| -> Result<(), String> {
        let r = (got - want).abs() / want.abs().max(1e-300);
        worst = worst.max(r);
        ensure(r <= 1e-7, || format!("{what}: {got} vs {want}"))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..200u64 {
        let (mu, nu) = random_cx_pair_1d(seed, rng.random_range(2..=6), rng.random_range(1..=5)).unwrap();
        let closed = m2_closed_form(&mu.to_nd(), &nu.to_nd()).unwrap();
        let (m, _) = m_rho_lp(&mu.to_nd(), &nu.to_nd(), 2.0, &e).map_err(|x| x.to_string())?;
        record(m * m, closed, &format!("LP, 1D seed {seed}"))?;
        for q in [QChoice::Comonotone, QChoice::ConditionedProduct] {
            let c = itm_coupling(&mu, &nu, q).map_err(|x| x.to_string())?;
            record(c.cost(2.0, &e), closed, &format!("ITM {q:?}, 1D seed {seed}"))?;
        }
    }
    for seed in 0..50u64 {
        let (mu, nu) = random_cx_pair(1000 + seed, rng.random_range(2..=4), rng.random_range(1..=4), 2).unwrap();
        let closed = m2_closed_form(&mu, &nu).unwrap();
        let (m, _) = m_rho_lp(&mu, &nu, 2.0, &e).map_err(|x| x.to_string())?;
        record(m * m, closed, &format!("LP, 2D seed {seed}"))?;
        let base = random_measure(&mut rng, 4, 2).unwrap();
        let (scaled, kernel) = scaling_pair(&base, rng.random_range(0.1..3.0)).unwrap();
        let closed = m2_closed_form(&base, &scaled).unwrap();
        let (m, _) = m_rho_lp(&base, &scaled, 2.0, &e).map_err(|x| x.to_string())?;
        record(m * m, closed, &format!("LP on scaling pair {seed}"))?;
        record(kernel.cost(2.0, &e), closed, &format!("scaling kernel {seed}"))?;
    }
    Ok(format!("250 pairs, worst relative gap {worst:.2e}"))
}

fn c3_constants() -> Check {
    let start = Instant::now();
    for (rho, want) in [(1.0, 2.0), (2.0, 2.0), (2.5, 2f64.powf(1.5)), (3.0, 4.0), (4.0, 8.0)] {
        let k = k_rho(rho, DEFAULT_GAMMA_STEP).unwrap().k_est;
        ensure(k == want, || format!("K_{rho} = {k}, expected {want}"))?;
    }
    for k in 1..=20 {
        let rho = 1.0 + k as f64 / 21.0;
        let r = k_rho(rho, DEFAULT_GAMMA_STEP).unwrap();
        ensure(r.k_lower <= r.k_est && r.k_est <= r.k_upper + 1e-6, || format!("sandwich fails: {r:?}"))?;
    }
    let k101 = k_rho(1.01, DEFAULT_GAMMA_STEP).unwrap().k_est;
    ensure((2.9..=3.05).contains(&k101), || format!("K_1.01 = {k101}"))?;
    within(Duration::from_secs(30), start.elapsed())?;
    Ok(format!("K_1.01 = {k101:.6}, {:?}", start.elapsed()))
}

fn c4_itm() -> Check {
    let start = Instant::now();
    let e = NormSpec::euclidean();
    let rhos = [1.0, 1.3, 1.7, 2.0, 3.0];
    let ks: Vec<f64> = rhos.iter().map(|&r| k_rho(r, DEFAULT_GAMMA_STEP).unwrap().k_est).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut max_atoms = 0;
    for seed in 0..500u64 {
        let (mu, nu) = random_cx_pair_1d(10_000 + seed, rng.random_range(1..=6), rng.random_range(1..=6)).unwrap();
        max_atoms = max_atoms.max(nu.len()).max(mu.len());
        ensure(nu.len() <= 20, || format!("seed {seed}: {} atoms", nu.len()))?;
        for q in [QChoice::Comonotone, QChoice::ConditionedProduct] {
            let c = itm_coupling(&mu, &nu, q).map_err(|x| x.to_string())?;
            ensure(c.marginal_residual() <= 1e-10, || format!("seed {seed} {q:?}: marginals {:e}", c.marginal_residual()))?;
            ensure(c.martingale_residual() <= 1e-9, || {
                format!("seed {seed} {q:?}: martingale {:e}", c.martingale_residual())
            })?;
            let w1 = w_rho_1d(&mu, &nu, 1.0).unwrap();
            ensure(c.cost(1.0, &e) <= 2.0 * w1 + 1e-9, || format!("seed {seed} {q:?}: rho=1 cost above 2 W_1"))?;
            for (&rho, &k) in rhos.iter().zip(&ks) {
                let cost = c.cost(rho, &e);
                let w = w_rho_1d(&mu, &nu, rho).unwrap();
                let (sigma, _) = nu.centred_moment(rho).unwrap();
                let bound = k * w * sigma.powf(rho - 1.0);
                ensure(cost <= bound + 1e-7, || format!("seed {seed} {q:?} rho={rho}: {cost} > {bound}"))?;
                let (m, _) = m_rho_lp(&mu.to_nd(), &nu.to_nd(), rho, &e).map_err(|x| x.to_string())?;
                ensure(m.powf(rho) <= cost * (1.0 + 1e-9) + 1e-12, || {
                    format!("seed {seed} {q:?} rho={rho}: LP {} above ITM {cost}", m.powf(rho))
                })?;
            }
        }
    }
    within(Duration::from_secs(60), start.elapsed())?;
    Ok(format!("500 pairs (up to {max_atoms} atoms), both Q, {:?}", start.elapsed()))
}

fn c5_bj() -> Check {
    let e = NormSpec::euclidean();
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let mut parts = Vec::new();
    for rho in [1.0, golden, 2.0] {
        let n = 1000usize;
        let scaled = bj_ratio(n, rho, &e) * (n as f64).powf(rho - 1.0 - 1.0 / rho);
        let limit = bj_scaled_limit(rho);
        ensure(rel_close(scaled, limit, 0.05), || format!("rho={rho}: {scaled} vs {limit}"))?;
        parts.push(format!("rho={rho:.3}: {scaled:.4}/{limit:.4}"));
    }
    let g = bj_scaled_limit(golden);
    ensure(rel_close(g, 2.217, 0.05), || format!("golden-ratio limit {g}"))?;
    let r: Vec<f64> = [10, 100, 1000].iter().map(|&n| bj_ratio(n, 1.0, &e)).collect();
    ensure(r[0] < r[1] && r[1] < r[2] && r[2] >= 900.0, || format!("rho=1 ratios {r:?} do not blow up"))?;
    // for theta > 0 the kernel is the only martingale coupling
    for (n, theta, rho) in [(4, 0.3, 1.5), (6, 1.0, 1.0)] {
        let (mu, nu, _) = bj_example(n, theta).unwrap();
        let (m, _) = m_rho_lp(&mu, &nu, rho, &e).map_err(|x| x.to_string())?;
        ensure((m.powf(rho) - 1.0).abs() <= 1e-8, || format!("n={n}, theta={theta}: M^rho = {}", m.powf(rho)))?;
    }
    Ok(parts.join(", "))
}

fn c6_triangle() -> Check {
    let e = NormSpec::euclidean();
    let (mu, nu, kernel) = triangle_example(1000, 1e-3).unwrap();
    let mut parts = Vec::new();
    for (rho, floor) in [(1.0, 2.8), (1.8, 1.9)] {
        let r = verify_pair(&mu, &nu, rho, &e, CaseTag::Scaling(1e-3)).map_err(|x| x.to_string())?;
        ensure(r.ratio >= floor, || format!("rho={rho}: ratio {}", r.ratio))?;
        ensure(!r.violated(), || format!("rho={rho}: slack {:?}", r.slack))?;
        let (_, lp) = m_rho_lp(&mu, &nu, rho, &e).map_err(|x| x.to_string())?;
        let diff = lp.max_entry_diff(&kernel, 1e-12).ok_or("supports differ")?;
        ensure(diff <= 1e-8, || format!("rho={rho}: LP coupling differs from kernel by {diff:e}"))?;
        parts.push(format!("rho={rho}: ratio {:.4}", r.ratio));
    }
    Ok(parts.join(", "))
}

fn c7_scaling() -> Check {
    let e = NormSpec::euclidean();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_slack = f64::INFINITY;
    let mut worst_w = 0.0_f64;
    for k in 0..200 {
        let n = rng.random_range(2..=5);
        let mu = random_measure(&mut rng, n, 2).unwrap();
        for lambda in [0.1, 1.0, 10.0] {
            let (nu, kernel) = scaling_pair(&mu, lambda).unwrap();
            for rho in [1.0, 1.5, 2.0] {
                let (w, _) = w_rho_nd(&mu, &nu, rho, &e).map_err(|x| x.to_string())?;
                let formula = scaling_w_rho(&mu, lambda, rho, &e);
                worst_w = worst_w.max((w - formula).abs() / formula);
                ensure(rel_close(w, formula, 1e-10), || format!("#{k} lambda={lambda} rho={rho}: W {w} vs {formula}"))?;
                let (sigma, _) = nu.centred_moment(rho, &e).unwrap();
                let slack = scaling_bound(rho, lambda) * w * sigma.powf(rho - 1.0) - kernel.cost(rho, &e);
                worst_slack = worst_slack.min(slack);
                ensure(slack >= -1e-8, || format!("#{k} lambda={lambda} rho={rho}: slack {slack}"))?;
            }
        }
    }
    Ok(format!("min slack {worst_slack:.3e}, worst W error {worst_w:.2e}"))
}

fn c8_tensor() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0_f64;
    for k in 0..50u64 {
        let factors = rng.random_range(2..=3);
        let pairs: Vec<(DiscreteMeasure1D, DiscreteMeasure1D)> =
            (0..factors).map(|j| random_cx_pair_1d(100 * k + j, 2, 1).unwrap()).collect();
        let rho = [1.0, 1.5, 2.0][k as usize % 3];
        let norm = NormSpec::new(rho).unwrap();
        let t = tensor_pair(&pairs, rho).map_err(|x| x.to_string())?;
        let sum: f64 = t.factor_costs.iter().sum();
        let cost = t.coupling.cost(rho, &norm);
        worst = worst.max((cost - sum).abs());
        ensure((cost - sum).abs() <= 1e-8, || format!("#{k}: product cost {cost} vs {sum}"))?;
        ensure(t.coupling.martingale_residual() <= 1e-9, || format!("#{k}: not a martingale coupling"))?;
        let r = verify_pair(&t.mu, &t.nu, rho, &norm, CaseTag::Tensor).map_err(|x| x.to_string())?;
        ensure(r.slack.is_some_and(|s| s >= -SLACK_TOL), || format!("#{k}: {r:?}"))?;
        ensure(r.m_rho.powf(rho) <= cost + 1e-9, || format!("#{k}: LP above product coupling"))?;
    }
    Ok(format!("50 products, worst cost gap {worst:.2e}"))
}

fn c9_exponent() -> Check {
    let e = NormSpec::euclidean();
    let (rho, s) = (1.5, 1.25);
    let mut values = Vec::new();
    for gap in [1e-1, 1e-2, 1e-3] {
        let (mu, nu, _) = two_atom_pair(1.0, 1.0 + gap).unwrap();
        let v = exponent_ratio(&mu.to_nd(), &nu.to_nd(), rho, s, &e).map_err(|x| x.to_string())?;
        let closed = two_atom_s_ratio(1.0, 1.0 + gap, rho, s);
        ensure(rel_close(v, closed, 1e-6), || format!("gap {gap}: LP {v} vs closed form {closed}"))?;
        values.push(v);
    }
    for w in values.windows(2) {
        ensure(w[1] >= 1.5 * w[0], || format!("growth {:.3} per decade", w[1] / w[0]))?;
    }
    Ok(format!("ratios {:.4}, {:.4}, {:.4}", values[0], values[1], values[2]))
}

fn c10_properties() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut cases = 0usize;
    // quantile / distribution function Galois connection
    for _ in 0..5000 {
        let n = rng.random_range(1..=8);
        let atoms: Vec<f64> = (0..n).map(|_| (rng.random_range(-20..=20) as f64) / 4.0).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let m = DiscreteMeasure1D::from_unnormalized(atoms, weights).unwrap();
        let u = if rng.random_bool(0.3) {
            m.cumulative()[rng.random_range(0..m.len())].min(1.0 - 1e-16)
        } else {
            rng.random_range(1e-9..1.0)
        };
        let x = if rng.random_bool(0.5) {
            m.atoms()[rng.random_range(0..m.len())]
        } else {
            rng.random_range(-6.0..6.0)
        };
        let q = m.quantile(u).unwrap();
        ensure((q <= x) == (u <= m.cdf(x)), || format!("Galois connection fails at u={u}, x={x} for {m:?}"))?;
        cases += 1;
    }
    // mean-preserving spreads stay above in the convex order
    for seed in 0..4000u64 {
        if seed % 8 == 0 {
            let (mu, nu) = random_cx_pair(seed, 3, 2, 2).unwrap();
            ensure(check_cx(&mu, &nu).unwrap().ordered, || format!("2D seed {seed} not ordered"))?;
        } else {
            let (mu, nu) = random_cx_pair_1d(seed, 1 + (seed % 5) as usize, 1 + (seed % 4) as usize).unwrap();
            ensure(check_cx_1d(&mu, &nu).ordered, || format!("1D seed {seed} not ordered"))?;
        }
        cases += 1;
    }
    // composing a martingale coupling with a martingale coupling
    let e = NormSpec::euclidean();
    for seed in 0..1000u64 {
        let (mu, nu) = random_cx_pair_1d(50_000 + seed, 3, 2).unwrap();
        let (_, nu2) = {
            let (base, spread) = random_cx_pair_1d(60_000 + seed, 1, 2).unwrap();
            // spread nu further by adding a centred copy of `spread - base`
            let shift = base.atoms()[0];
            let mut atoms = Vec::new();
            let mut weights = Vec::new();
            for (y, w) in nu.atoms().iter().zip(nu.weights()) {
                for (z, v) in spread.atoms().iter().zip(spread.weights()) {
                    atoms.push(y + 0.5 * (z - shift));
                    weights.push(w * v);
                }
            }
            (base, DiscreteMeasure1D::from_unnormalized(atoms, weights).unwrap())
        };
        let (_, pi) = m_rho_lp(&mu.to_nd(), &nu.to_nd(), 1.0, &e).map_err(|x| x.to_string())?;
        let (_, m) = m_rho_lp(&nu.to_nd(), &nu2.to_nd(), 1.0, &e).map_err(|x| x.to_string())?;
        let c = compose_coupling(&pi, &m).map_err(|x| format!("seed {seed}: {x}"))?;
        ensure(c.marginal_residual() <= 1e-9, || format!("seed {seed}: marginals {:e}", c.marginal_residual()))?;
        ensure(c.martingale_residual() <= 1e-9, || format!("seed {seed}: martingale {:e}", c.martingale_residual()))?;
        ensure(c.row_measure().approx_eq(&mu.to_nd(), 1e-9), || format!("seed {seed}: first marginal moved"))?;
        cases += 1;
    }
    within(Duration::from_secs(120), start.elapsed())?;
    Ok(format!("{cases} cases, {:?}", start.elapsed()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("two-atom closed forms", c1_two_atom),
        ("M_2 marginal identity", c2_m2_identity),
        ("constants K_rho", c3_constants),
        ("inverse-transform coupling validity", c4_itm),
        ("rotating-kernel ratios", c5_bj),
        ("triangle example", c6_triangle),
        ("scaling bound", c7_scaling),
        ("tensorisation", c8_tensor),
        ("exponent sharpness", c9_exponent),
        ("property suites", c10_properties),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let t = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{t:.2?}]", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{t:.2?}]", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
