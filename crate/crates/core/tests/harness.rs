use mwi_core::constants::{k_rho, DEFAULT_GAMMA_STEP};
use mwi_core::examples::{random_cx_pair, two_atom_pair};
use mwi_core::measures::NormSpec;
use mwi_core::verify::{sweep, verify_pair, CaseKind, CaseTag, SweepConfig};

#[test]
fn ratio_is_invariant_under_translation_and_scaling() {
    let e = NormSpec::euclidean();
    for seed in 0..10u64 {
        let (mu, nu) = random_cx_pair(seed, 3, 2, 2).unwrap();
        for rho in [1.0, 1.5, 2.5] {
            let base = verify_pair(&mu, &nu, rho, &e, CaseTag::Generic).unwrap().ratio;
            let shift = [3.5, -1.25];
            let moved = |m: &mwi_core::measures::DiscreteMeasureND, s: f64| {
                m.map(|x| vec![s * x[0] + shift[0], s * x[1] + shift[1]]).unwrap()
            };
            for s in [0.5, 7.0] {
                let r = verify_pair(&moved(&mu, s), &moved(&nu, s), rho, &e, CaseTag::Generic).unwrap().ratio;
                assert!((r - base).abs() <= 1e-7 * (1.0 + base), "seed {seed} rho {rho} scale {s}: {r} vs {base}");
            }
        }
    }
}

#[test]
fn seeded_one_dimensional_sweeps_respect_the_constant() {
    let k15 = k_rho(1.5, DEFAULT_GAMMA_STEP).unwrap().k_est;
    let cfg = SweepConfig {
        cases: vec![CaseKind::OneD],
        rho_grid: vec![1.0, 1.5],
        seeds: (0..100).collect(),
        ..SweepConfig::default()
    };
    let report = sweep(&cfg).unwrap();
    assert!(!report.any_violation());
    let max_at = |rho: f64| {
        report.rows.iter().filter(|r| r.report.rho == rho).map(|r| r.report.ratio).fold(0.0, f64::max)
    };
    assert!(max_at(1.0) <= 2.0 + 1e-9, "{}", max_at(1.0));
    assert!(max_at(1.5) <= k15 + 1e-9, "{} > {k15}", max_at(1.5));
    assert_eq!(report.summary.len(), 1);
    assert_eq!(report.summary[0].count, 200);
}

#[test]
fn two_atom_pair_at_the_maximiser_is_nearly_sharp() {
    let e = NormSpec::euclidean();
    for rho in [1.3, 1.5, 1.7] {
        let c = k_rho(rho, DEFAULT_GAMMA_STEP).unwrap();
        assert!(c.x_star.is_finite() && c.x_star > 1.0);
        let b = (c.x_star + 1.0) / (c.x_star - 1.0);
        let (mu, nu, _) = two_atom_pair(1.0, b).unwrap();
        let r = verify_pair(&mu.to_nd(), &nu.to_nd(), rho, &e, CaseTag::OneD).unwrap();
        let target = 2f64.powf(rho - 1.0) * c.f_sup;
        assert!((r.ratio - target).abs() <= 0.01 * target, "rho {rho}: {} vs {target}", r.ratio);
        assert!(r.ratio <= c.k_est + 1e-9);
    }
}
