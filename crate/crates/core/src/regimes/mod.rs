//! Regime-specific approximations of the kernel with their error envelopes.
//!
//! Every function in this module takes the series exponent `k` and
//! approximates the shifted kernel `rho_{k+1}`, i.e. `oracle::rho` evaluated
//! at `k + 1`. Factorization used throughout, with `d = b t / k`:
//!
//! `rho_{k+1}(t) = t k^k e^{-k} / (2 pi (k-1)!) * g(d)^k * f_b(t)`,
//! `g(d) = d e^{1-d}`, `f_b(t) = sum_{c >= 1-b} (1 + c/b)^k e^{-c t}`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ln_2pi, log_factorial, log_factorial_error, Enclosure, LogValue, EPS};
use crate::oracle::{power_series_anchored, SeriesConfig};

pub mod dispatch;
pub mod inside;
pub mod neck;
pub mod outside;

pub use dispatch::{candidate_envelopes, evaluate_regime, rho_eval, rho_oracle, select_regime, select_regime_with};
pub use inside::{
    inside_rest, lattice_excess, locate_interior_minimum, rho_inside_two_term, rho_lattice,
    rho_lattice_b1, LatticeExcess,
};
pub use neck::{gamma_b, neck_approx, rho_neck_bounds, theta_sum, NeckBounds, NeckBranch};
pub use outside::{outside_envelope_log, poisson_series, rho_outside, PoissonExponent};

/// Relative tolerance for treating `t` as the lattice point `k / b`.
pub const LATTICE_TOL: f64 = 1.0 / 1_099_511_627_776.0; // 2^-40

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    /// Two-term model between the lattice points `k/(a+1)` and `k/a`.
    InsideTwoTerm { a: u64 },
    /// Exact lattice point `t = k / b`.
    Lattice { b: u64 },
    /// Single leading term `a = 1`, valid for `t >= k`.
    LeadingTerm,
    /// Theta-function sandwich, `u = 1 - t b / k`.
    Neck { b: u64, u: f64 },
    /// Poisson-summed representation near the boundary.
    Outside,
    /// Direct summation.
    Oracle,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::InsideTwoTerm { a } => write!(f, "inside(a={a})"),
            Regime::Lattice { b } => write!(f, "lattice(b={b})"),
            Regime::LeadingTerm => write!(f, "leading"),
            Regime::Neck { b, u } => write!(f, "neck(b={b};u={u})"),
            Regime::Outside => write!(f, "outside"),
            Regime::Oracle => write!(f, "oracle"),
        }
    }
}

/// An approximate kernel value with the guaranteed relative envelope of the
/// theorem that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxResult {
    pub value: Enclosure,
    pub envelope: f64,
    pub regime: Regime,
    /// Guaranteed lower bound on the relative excess, where the theorem is two-sided.
    pub lower_envelope: Option<f64>,
    /// Log of the absolute envelope in units of `k^{k+1} e^{-k} / (2 pi (k-1)!)`.
    pub absolute_envelope_log: Option<f64>,
}

impl ApproxResult {
    fn plain(value: Enclosure, envelope: f64, regime: Regime) -> Self {
        ApproxResult {
            value,
            envelope,
            regime,
            lower_envelope: None,
            absolute_envelope_log: None,
        }
    }

    /// Log-domain slack of `truth` against `value * (1 +- envelope)`, with every
    /// evaluation error applied in favour of containment. Nonnegative means the
    /// enclosures are consistent.
    pub fn containment_margin(&self, truth: &Enclosure) -> f64 {
        let hi = self.value.ln_upper() + self.envelope.ln_1p();
        let lo = if self.envelope >= 1.0 {
            f64::NEG_INFINITY
        } else {
            self.value.ln_lower() + (-self.envelope).ln_1p()
        };
        (hi - truth.ln_lower()).min(truth.ln_upper() - lo)
    }
}

pub(crate) fn check_k(k: u64) -> Result<()> {
    if k < 3 {
        return Err(Error::InvalidArgument(format!("k must be at least 3, got {k}")));
    }
    Ok(())
}

pub(crate) fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be positive and finite, got {t}")));
    }
    Ok(())
}

/// `ln(1/(2 pi (k-1)!))` and its absolute error.
pub(crate) fn log_inv_norm(k: u64) -> (f64, f64) {
    let lf = log_factorial(k - 1);
    (-ln_2pi() - lf, log_factorial_error(k - 1) + 4.0 * EPS * (lf + 2.0))
}

/// Relative error contributed by the factorial in the normalization.
pub(crate) fn factorial_rel(k: u64) -> f64 {
    log_factorial_error(k - 1).exp_m1()
}

/// `ln U` with `U = k^{k+1} e^{-k} / (2 pi (k-1)!)`, the lattice peak scale,
/// and its absolute error.
pub fn log_peak_unit(k: u64) -> (f64, f64) {
    let kf = k as f64;
    let (n, n_err) = log_inv_norm(k);
    let main = (kf + 1.0) * kf.ln() - kf;
    (main + n, n_err + 4.0 * EPS * main.abs())
}

/// `g(d) = d e^{1-d}`.
pub fn g(d: f64) -> f64 {
    d * (1.0 - d).exp()
}

/// `f_b(t) = sum_{c >= 1-b} (1 + c/b)^k e^{-c t}` as a certified enclosure.
pub fn f_b(k: u64, t: f64, b: u64, cfg: &SeriesConfig) -> Result<Enclosure> {
    f_b_excluding(k, t, b, &[], cfg)
}

/// `f_b` with the terms `c` in `exclude_c` left out.
pub fn f_b_excluding(k: u64, t: f64, b: u64, exclude_c: &[i64], cfg: &SeriesConfig) -> Result<Enclosure> {
    if b == 0 {
        return Err(Error::InvalidArgument("b must be at least 1".into()));
    }
    check_t(t)?;
    let bi = b as i64;
    let exclude: Vec<i64> = exclude_c.iter().map(|c| c + bi).filter(|a| *a >= 1).collect();
    let kf = k as f64;
    let bf = b as f64;
    power_series_anchored(k, t, cfg, &exclude, |p| {
        let c = (p - bi) as f64;
        let pow = kf * (c / bf).ln_1p();
        let lin = c * t;
        (pow - lin, 4.0 * EPS * (pow.abs() + lin.abs()))
    })
}

/// `S_b = (1+1/b)^k e^{-k/b} + (1-1/b)^k e^{k/b}`, the `c = +-1` terms of
/// `f_b(k/b)`.
pub fn lattice_s(k: u64, b: u64) -> LogValue {
    let kf = k as f64;
    let bf = b as f64;
    let up = kf * (1.0 / bf).ln_1p() - kf / bf;
    let down = if b == 1 {
        LogValue::ZERO
    } else {
        LogValue::from_log(kf * (-1.0 / bf).ln_1p() + kf / bf)
    };
    crate::numerics::log_add(LogValue::from_log(up), down)
}
