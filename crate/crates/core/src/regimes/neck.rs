//! The neck `t ~ sqrt(k)`: theta-function sandwich bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ln_2pi, sum_log_concave, Enclosure, LogValue, EPS};
use crate::oracle::SeriesConfig;

use super::{check_k, check_t, ApproxResult, Regime, LATTICE_TOL};

/// `sum_c exp(-alpha (c - v)^2)` over all integers `c`.
pub fn theta_sum(alpha: f64, v: f64, cfg: &SeriesConfig) -> Result<Enclosure> {
    if !(alpha > 0.0 && alpha.is_finite() && v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "theta sum needs alpha > 0 and finite v (alpha = {alpha}, v = {v})"
        )));
    }
    let phi_rel = |i: i64, j: i64| {
        let (di, dj) = (i as f64 - v, j as f64 - v);
        let d = (i - j) as f64;
        let l = -alpha * d * (di + dj);
        (l, 4.0 * EPS * alpha * (di * di + dj * dj))
    };
    let hint = v.round() as i64;
    let sum = sum_log_concave(phi_rel, hint, None, None, &[], cfg.rel_tol, cfg.max_terms)?;
    let dp = sum.peak as f64 - v;
    let anchor = -alpha * dp * dp;
    Ok(sum.enclosure().scale_log(anchor, 4.0 * EPS * anchor.abs()))
}

/// `gamma_b(u) = sum_c exp(-(k/2)(c/b - u)^2)`.
pub fn gamma_b(k: u64, b: u64, u: f64, cfg: &SeriesConfig) -> Result<Enclosure> {
    if b == 0 {
        return Err(Error::InvalidArgument("b must be positive".into()));
    }
    let bf = b as f64;
    theta_sum(k as f64 / (2.0 * bf * bf), bf * u, cfg)
}

/// The reference profile `h(x) = sum_c exp(-(c - x)^2 / 2)`.
pub fn reference_profile(x: f64, cfg: &SeriesConfig) -> Result<Enclosure> {
    theta_sum(0.5, x, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeckBranch {
    Lattice,
    Interior,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeckBounds {
    pub lower: Enclosure,
    pub upper: Enclosure,
    pub branch: NeckBranch,
    pub u: f64,
    /// The lower bound's bracket was nonpositive and was clamped to zero.
    pub lower_vacuous: bool,
}

/// Whether `b` is in the neck range `3 < b <= sqrt(k) log k`.
pub fn neck_admissible(k: u64, b: u64) -> bool {
    let kf = k as f64;
    b > 3 && (b as f64) <= kf.sqrt() * kf.ln()
}

/// Sandwich bounds for `rho_{k+1}(t)` in the neck.
///
/// Lattice branch (`t = k/b`): `(1/b)(k/2pi)^{3/2}` times `gamma_b(0)` above
/// and times `e^{-1/(12k)}[(1 - 8 L^4/k) gamma_b(0) - (6 + 2e^{8L^3/(3 sqrt k)}) k^{-2L}]`
/// below, `L = log k`.
///
/// Interior branch (`k/(b+1) < t < k/b`, `u = 1 - t b / k`): prefactor
/// `t sqrt(k) / (2pi)^{3/2}`, which matches the lattice branch at `u = 0`,
/// with brackets `(1 + q) gamma_b(u)` above and
/// `e^{-1/(12k)}[(1 - q) gamma_b(u) - 12 e^{-(k/2)(L/sqrt k - u)^2}]` below,
/// `q = L^3 / (3 sqrt k)`.
///
/// A nonpositive lower bracket yields a zero lower bound flagged as vacuous.
pub fn rho_neck_bounds(k: u64, t: f64, b: u64, cfg: &SeriesConfig) -> Result<NeckBounds> {
    check_k(k)?;
    check_t(t)?;
    if !neck_admissible(k, b) {
        return Err(Error::RegimeOutOfRange(format!(
            "neck needs 3 < b <= sqrt(k) log k (k = {k}, b = {b})"
        )));
    }
    let kf = k as f64;
    let bf = b as f64;
    let l = kf.ln();
    let sk = kf.sqrt();
    let on_lattice = (t * bf / kf - 1.0).abs() <= LATTICE_TOL;
    if !on_lattice && !(t > kf / (bf + 1.0) && t < kf / bf) {
        return Err(Error::RegimeOutOfRange(format!(
            "t = {t} is neither k/b nor inside (k/(b+1), k/b) for k = {k}, b = {b}"
        )));
    }
    let (branch, u, log_pre, c_lo, c_hi, correction) = if on_lattice {
        let log_pre = -bf.ln() + 1.5 * (kf.ln() - ln_2pi());
        let c_lo = 1.0 - 8.0 * l.powi(4) / kf;
        let correction = (6.0 + 2.0 * (8.0 * l.powi(3) / (3.0 * sk)).exp()) * (-2.0 * l * l).exp();
        (NeckBranch::Lattice, 0.0, log_pre, c_lo, 1.0, correction)
    } else {
        let u = 1.0 - t * bf / kf;
        let log_pre = t.ln() + 0.5 * kf.ln() - 1.5 * ln_2pi();
        let q = l.powi(3) / (3.0 * sk);
        let s = l / sk - u;
        let correction = 12.0 * (-0.5 * kf * s * s).exp();
        (NeckBranch::Interior, u, log_pre, 1.0 - q, 1.0 + q, correction)
    };
    let pre_err = 8.0 * EPS * (log_pre.abs() + 2.0);
    let gamma = gamma_b(k, b, u, cfg)?;
    let gv = gamma.to_real();

    let upper = gamma.scale_log(log_pre + c_hi.ln(), pre_err + 4.0 * EPS);
    let bracket = c_lo * gv - correction;
    let bracket_err = c_lo.abs() * gv * gamma.rel_err + 4.0 * EPS * (c_lo.abs() * gv + correction);
    let (lower, lower_vacuous) = if bracket - bracket_err <= 0.0 {
        (Enclosure::exact(LogValue::ZERO), true)
    } else {
        let e = Enclosure::new(LogValue::from_real(bracket), bracket_err / bracket);
        (e.scale_log(log_pre - 1.0 / (12.0 * kf), pre_err), false)
    };
    Ok(NeckBounds {
        lower,
        upper,
        branch,
        u,
        lower_vacuous,
    })
}

/// Neck approximation as midpoint of the sandwich with envelope equal to the
/// relative half-gap.
pub fn neck_approx(k: u64, t: f64, b: u64, cfg: &SeriesConfig) -> Result<ApproxResult> {
    let nb = rho_neck_bounds(k, t, b, cfg)?;
    let r = if nb.lower.value.is_zero {
        0.0
    } else {
        (nb.lower.ln_lower() - nb.upper.ln_upper()).exp()
    };
    let log_upper = nb.upper.ln_upper();
    let mid = LogValue::from_log(log_upper + (0.5 * (1.0 + r)).ln());
    Ok(ApproxResult {
        value: Enclosure::new(mid, 4.0 * EPS),
        envelope: (1.0 - r) / (1.0 + r),
        regime: Regime::Neck { b, u: nb.u },
        lower_envelope: None,
        absolute_envelope_log: None,
    })
}
