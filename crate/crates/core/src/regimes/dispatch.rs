//! Choosing a regime by comparing a-priori envelopes.

use crate::error::{Error, Result};
use crate::numerics::{log_add, LogValue};
use crate::oracle::{rho, KernelPoint, SeriesConfig};

use super::inside::{inside_admissible, log_e_a, log_two_term};
use super::neck::{neck_admissible, neck_approx};
use super::outside::{outside_envelope_log, rho_outside};
use super::{
    check_k, check_t, factorial_rel, lattice_s, rho_inside_two_term, rho_lattice, rho_lattice_b1,
    ApproxResult, Regime, LATTICE_TOL,
};

/// Above this envelope every formula is considered useless.
pub const ORACLE_THRESHOLD: f64 = 1e-2;

/// Every applicable regime at `(k, t)` with its envelope, in tie-break order.
pub fn candidate_envelopes(k: u64, t: f64, cfg: &SeriesConfig) -> Vec<(Regime, f64)> {
    let mut out = Vec::new();
    if check_k(k).is_err() || check_t(t).is_err() {
        return out;
    }
    let kf = k as f64;
    let ratio = kf / t;
    let b_near = ratio.round();
    let on_lattice = b_near >= 1.0 && (t * b_near / kf - 1.0).abs() <= LATTICE_TOL;

    if on_lattice {
        let b = b_near as u64;
        if b == 1 {
            if let Ok(r) = rho_lattice_b1(k, kf) {
                out.push((r.regime, r.envelope));
            }
        } else if kf / (b_near * (b_near + 1.0)) >= std::f64::consts::LN_2 {
            out.push((Regime::Lattice { b }, 2.0 * lattice_s(k, b).to_real() + factorial_rel(k)));
        }
    }
    if t > kf {
        out.push((
            Regime::LeadingTerm,
            ((kf + 1.0) * std::f64::consts::LN_2 - t).exp() + factorial_rel(k),
        ));
    }
    let a = ratio.floor() as u64;
    if !on_lattice && t < kf && inside_admissible(k, a) {
        let abs_env = log_add(
            LogValue::from_log(log_e_a(k, a)),
            LogValue::from_log(log_e_a(k, a + 1)),
        )
        .ln();
        let (two, _) = log_two_term(k, t, a);
        out.push((Regime::InsideTwoTerm { a }, (abs_env - two).exp() + factorial_rel(k)));
    }
    let b_neck = if on_lattice { b_near as u64 } else { a };
    if neck_admissible(k, b_neck) {
        if let Ok(r) = neck_approx(k, t, b_neck, cfg) {
            out.push((r.regime, r.envelope));
        }
    }
    if t <= kf {
        out.push((Regime::Outside, outside_envelope_log(k, t).exp()));
    }
    out
}

/// Regime with the smallest envelope, or `Oracle` when none is below
/// [`ORACLE_THRESHOLD`]. Ties go to the earlier candidate.
pub fn select_regime_with(k: u64, t: f64, cfg: &SeriesConfig) -> Regime {
    let mut best: Option<(Regime, f64)> = None;
    for (r, e) in candidate_envelopes(k, t, cfg) {
        if best.is_none_or(|(_, be)| e < be) {
            best = Some((r, e));
        }
    }
    match best {
        Some((r, e)) if e <= ORACLE_THRESHOLD => r,
        _ => Regime::Oracle,
    }
}

pub fn select_regime(k: u64, t: f64) -> Regime {
    select_regime_with(k, t, &SeriesConfig::default())
}

/// Oracle value of `rho_{k+1}(t)` with envelope equal to its own error.
pub fn rho_oracle(k: u64, t: f64, cfg: &SeriesConfig) -> Result<ApproxResult> {
    check_k(k)?;
    let value = rho(KernelPoint::new(k + 1, t)?, cfg)?;
    Ok(ApproxResult {
        value,
        envelope: value.rel_err,
        regime: Regime::Oracle,
        lower_envelope: None,
        absolute_envelope_log: None,
    })
}

/// Evaluates a specific regime at `(k, t)`.
pub fn evaluate_regime(k: u64, t: f64, regime: Regime, cfg: &SeriesConfig) -> Result<ApproxResult> {
    check_k(k)?;
    check_t(t)?;
    let kf = k as f64;
    match regime {
        Regime::Lattice { b } => {
            if b == 0 || (t * b as f64 / kf - 1.0).abs() > LATTICE_TOL {
                return Err(Error::RegimeOutOfRange(format!("t = {t} is not the lattice point k/{b}")));
            }
            rho_lattice(k, b)
        }
        Regime::LeadingTerm => rho_lattice_b1(k, t),
        Regime::InsideTwoTerm { a } => rho_inside_two_term(k, t, a),
        Regime::Neck { b, .. } => neck_approx(k, t, b, cfg),
        Regime::Outside => rho_outside(k, t, cfg),
        Regime::Oracle => rho_oracle(k, t, cfg),
    }
}

/// Dispatching evaluation of `rho_{k+1}(t)`. A selected formula that turns out
/// to be inapplicable or numerically unreliable falls back to the oracle.
pub fn rho_eval(k: u64, t: f64, cfg: &SeriesConfig) -> Result<ApproxResult> {
    check_k(k)?;
    check_t(t)?;
    let regime = select_regime_with(k, t, cfg);
    match evaluate_regime(k, t, regime, cfg) {
        Ok(r) => Ok(r),
        Err(Error::RegimeOutOfRange(_))
        | Err(Error::CancellationLoss { .. })
        | Err(Error::SlowConvergence { .. }) => rho_oracle(k, t, cfg),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_selects_outside() {
        assert_eq!(select_regime(100, 1e-3), Regime::Outside);
    }

    #[test]
    fn lattice_preferred_on_tie() {
        assert_eq!(select_regime(400, 400.0), Regime::Lattice { b: 1 });
        assert_eq!(select_regime(200, 100.0), Regime::Lattice { b: 2 });
    }

    #[test]
    fn neck_point_prefers_sharper_outside_envelope() {
        // At k = 10^4 the neck lower bounds are vacuous (half-gap 1) while the
        // boundary envelope is about 7e-9.
        let r = select_regime(10_000, 100.5);
        assert_eq!(r, Regime::Outside);
        let c = candidate_envelopes(10_000, 100.5, &SeriesConfig::default());
        assert!(c.iter().any(|(r, _)| matches!(r, Regime::Neck { b: 99, .. })));
    }

    #[test]
    fn deep_inside_uses_leading_term() {
        assert_eq!(select_regime(100, 500.0), Regime::LeadingTerm);
    }

    #[test]
    fn between_lattice_points_small_a() {
        assert_eq!(select_regime(400, 390.0), Regime::InsideTwoTerm { a: 1 });
    }

    #[test]
    fn eval_contains_oracle_on_grid() {
        let cfg = SeriesConfig::default();
        for k in [55u64, 100, 500] {
            for i in 0..40 {
                let t = 1e-3 * (2.0 * k as f64 / 1e-3).powf(i as f64 / 39.0);
                let r = rho_eval(k, t, &cfg).unwrap();
                let truth = rho_oracle(k, t, &cfg).unwrap().value;
                assert!(r.containment_margin(&truth) >= 0.0, "k={k} t={t} {:?}", r.regime);
            }
        }
    }
}
