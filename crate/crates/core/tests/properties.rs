use std::collections::BTreeSet;

use bergman_core::oracle::{rho, KernelPoint, SeriesConfig};
use bergman_core::regimes::neck::neck_admissible;
use bergman_core::regimes::{gamma_b, rho_eval, rho_neck_bounds, rho_oracle, rho_outside};
use bergman_core::surface_bounds::{bound_a, bound_b, check_assumptions, dominance_check, SurfaceParams};
use bergman_core::verifier::{verify_all, GridSpec};
use bergman_core::Error;
use proptest::prelude::*;

fn cfg() -> SeriesConfig {
    SeriesConfig::default()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[test]
fn tighter_tolerance_stays_inside_first_enclosure() {
    let tight = cfg().with_rel_tol(cfg().rel_tol / 100.0);
    for k in [3u64, 10, 55, 100, 500] {
        for t in log_grid(1e-3, 2.0 * k as f64, 10) {
            let p = KernelPoint::new(k, t).unwrap();
            let first = rho(p, &cfg()).unwrap();
            let second = rho(p, &tight).unwrap();
            assert!(first.contains(second.value), "k={k} t={t}: {first:?} vs {second:?}");
        }
    }
}

#[test]
fn poisson_form_matches_oracle() {
    for k in [20u64, 50, 100] {
        for t in log_grid(0.01, k as f64 / 4.0, 25) {
            let truth = rho_oracle(k, t, &cfg()).unwrap().value;
            match rho_outside(k, t, &cfg()) {
                Ok(r) => {
                    let tol = r.value.rel_err + truth.rel_err + 1e-15;
                    assert!((r.value.ln() - truth.ln()).abs() <= tol, "k={k} t={t}");
                }
                Err(Error::CancellationLoss { .. }) => {}
                Err(e) => panic!("k={k} t={t}: {e}"),
            }
        }
    }
}

#[test]
fn verifier_failures_persist_under_tighter_tolerance() {
    let grid = GridSpec::new(vec![55, 100], 4, 3).unwrap();
    let key = |r: &bergman_core::verifier::VerifyReport| -> BTreeSet<String> {
        r.failures()
            .map(|c| format!("{} {} {:?} {:?} {}", c.theorem_id, c.point.k, c.point.a, c.point.b, c.detail))
            .collect()
    };
    let loose = verify_all(&grid, &cfg()).unwrap();
    let tight = verify_all(&grid, &cfg().with_rel_tol(cfg().rel_tol / 100.0)).unwrap();
    assert!(key(&loose).is_subset(&key(&tight)));
}

#[test]
fn amplitude_bound_below_half_energy_bound() {
    for (k, radius) in [(130_000u64, 0.25), (30_000, 0.5), (1_000_000, 0.5)] {
        let p = SurfaceParams::new(k, 1.0, 0.0, radius, 1.0).unwrap();
        let rep = check_assumptions(&p);
        assert!(rep.a2 && rep.a3, "k={k} R={radius}");
        let a_max = (k as f64 / (2.0 * std::f64::consts::E * p.big_l())).floor() as u64;
        let step = (a_max / 200).max(1) as usize;
        for a in (1..=a_max).step_by(step) {
            let lhs = bound_a(&p, a).unwrap().ln();
            let rhs = 0.5 * bound_b(&p, a).unwrap().ln();
            assert!(lhs <= rhs + 1e-9 * rhs.abs().max(1.0), "k={k} R={radius} a={a}: {lhs} > {rhs}");
        }
    }
}

#[test]
fn dominance_where_assumptions_hold() {
    for k in [30_000u64, 100_000, 1_000_000, 10_000_000] {
        for radius in [0.5, 0.25, 0.1] {
            for (eps, lambda) in [(1.0, 0.0), (0.5, -0.25), (2.0, 1.0)] {
                let p = SurfaceParams::new(k, eps, lambda, radius, 1.0).unwrap();
                let rep = check_assumptions(&p);
                if rep.first_three() && rep.a5 {
                    let d = dominance_check(&p);
                    assert!(d.i_gt_ii && d.ii_gt_iii, "k={k} R={radius} eps={eps}");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gamma_periodic_and_symmetric(k in 16u64..20_000, b in 4u64..64, u in -1.0f64..1.0) {
        let g = gamma_b(k, b, u, &cfg()).unwrap();
        let shifted = gamma_b(k, b, u + 1.0 / b as f64, &cfg()).unwrap();
        let mirrored = gamma_b(k, b, -u, &cfg()).unwrap();
        let tol = 10.0 * cfg().rel_tol + 1e-12;
        prop_assert!((g.ln() - shifted.ln()).abs() <= tol);
        prop_assert!((g.ln() - mirrored.ln()).abs() <= tol);
    }

    #[test]
    fn rho_positive(k in 3u64..2000, lt in -7.0f64..8.0) {
        let t = lt.exp();
        let r = rho(KernelPoint::new(k, t).unwrap(), &cfg()).unwrap();
        prop_assert!(!r.value.is_zero && r.ln().is_finite());
        prop_assert!(r.rel_err < 1.0);
    }

    #[test]
    fn dispatched_value_contains_oracle(k in 3u64..600, x in 0.0f64..1.0) {
        let t = (1e-3f64.ln() + x * ((3.0 * k as f64).ln() - 1e-3f64.ln())).exp();
        let approx = rho_eval(k, t, &cfg()).unwrap();
        let truth = rho_oracle(k, t, &cfg()).unwrap().value;
        prop_assert!(approx.containment_margin(&truth) >= 0.0, "k={} t={} regime={:?}", k, t, approx.regime);
    }

    #[test]
    fn neck_interior_contains_oracle(k in 2_000u64..20_000, frac in 0.02f64..0.98, db in 0i64..3) {
        let b = ((k as f64).sqrt() as i64 + db - 1) as u64;
        prop_assume!(neck_admissible(k, b));
        let (lo, hi) = (k as f64 / (b + 1) as f64, k as f64 / b as f64);
        let t = lo + frac * (hi - lo);
        let nb = rho_neck_bounds(k, t, b, &cfg()).unwrap();
        let truth = rho(KernelPoint::new(k + 1, t).unwrap(), &cfg()).unwrap();
        prop_assert!(truth.ln_lower() <= nb.upper.ln_upper());
        prop_assert!(nb.lower_vacuous || nb.lower.ln_lower() <= truth.ln_upper());
    }
}
