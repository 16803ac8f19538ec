//! Near the boundary: the Poisson-summed representation
//! `rho_{k+1} = (k/2pi)(1 + sum_{xi>=1} 2 (1+y^2)^{-(k+1)/2} cos((k+1) theta))`,
//! `y = 2 pi xi / t`, `theta = atan(y)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{rotated_trig, Enclosure, LogValue, EPS};
use crate::oracle::{SeriesConfig, CANCELLATION_LIMIT};

use super::{check_k, check_t, ApproxResult, Regime};

/// Magnitude exponent used in the cosine series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoissonExponent {
    /// `-(k+1)/2`, from the Fourier transform of the summand.
    Derived,
    /// `-(k-1)/2`, kept for comparison.
    Printed,
}

/// `ln` of `(t^2/(pi^2 (k-1)) + 2(k+1)/(k-1)) (1 + (2pi/t)^2)^{-(k+1)/2}`.
pub fn outside_envelope_log(k: u64, t: f64) -> f64 {
    let kf = k as f64;
    let y = 2.0 * PI / t;
    (t * t / (PI * PI * (kf - 1.0)) + 2.0 * (kf + 1.0) / (kf - 1.0)).ln() - 0.5 * (kf + 1.0) * (y * y).ln_1p()
}

/// Certified value of `1 + sum_{xi>=1} 2 (1+y^2)^{-e/2} cos((k+1) theta)` with
/// `e` chosen by `exponent`. Returns `(value, abs_err, abs_sum)`.
pub fn poisson_series(k: u64, t: f64, exponent: PoissonExponent, cfg: &SeriesConfig) -> Result<(f64, f64, f64)> {
    check_k(k)?;
    check_t(t)?;
    let kf = k as f64;
    let e = match exponent {
        PoissonExponent::Derived => kf + 1.0,
        PoissonExponent::Printed => kf - 1.0,
    };
    let n = k + 1;
    let scale = t / (2.0 * PI);
    // sum_{xi > N} 2 (1+y^2)^{-e/2} <= 2 min(int_N^inf ..., (1/N) int_N^inf xi ...)
    let log_tail = |big_n: f64| {
        let a = std::f64::consts::LN_2 + e * (scale / big_n).ln() + big_n.ln() - (e - 1.0).ln();
        if e > 2.0 {
            let y = big_n / scale;
            let b = (2.0 * scale * scale / big_n).ln() - (e - 2.0).ln() - 0.5 * (e - 2.0) * (y * y).ln_1p();
            a.min(b)
        } else {
            a
        }
    };
    let mut signed = 0.0_f64;
    let mut abs_sum = 0.0_f64;
    let mut abs_err = 0.0_f64;
    let mut xi = 1u64;
    loop {
        let xf = xi as f64;
        let y = xf / scale;
        let phi = (scale / xf).atan();
        let l1p = (y * y).ln_1p();
        let w = 2.0 * (-0.5 * e * l1p).exp();
        let (c, _) = rotated_trig(n, phi);
        signed += w * c;
        abs_sum += w;
        abs_err += w * 4.0 * EPS * (2.0 + n as f64 * phi + 0.5 * e * l1p);
        let total = 1.0 + signed;
        let tail = log_tail(xf).exp();
        let rounding = EPS * xf * (1.0 + abs_sum);
        // Stop once the tail is negligible either relative to the total or
        // against the rounding floor; a nonpositive total is reported as is.
        if (total > 0.0 && tail <= 0.25 * cfg.rel_tol * total) || tail <= rounding {
            return Ok((total, abs_err + tail + rounding, abs_sum));
        }
        xi += 1;
        if xi as usize > cfg.max_terms {
            return Err(Error::TermBudgetExceeded { budget: cfg.max_terms });
        }
    }
}

/// Poisson-summed `rho_{k+1}(t)`; the envelope is the bound on the relative
/// deviation from the leading value `k / (2 pi)`.
pub fn rho_outside(k: u64, t: f64, cfg: &SeriesConfig) -> Result<ApproxResult> {
    check_k(k)?;
    check_t(t)?;
    let kf = k as f64;
    if t > kf {
        return Err(Error::SlowConvergence { k, t });
    }
    let (total, err, abs_sum) = poisson_series(k, t, PoissonExponent::Derived, cfg)?;
    let ratio = if total > 0.0 { (1.0 + abs_sum) / total } else { f64::INFINITY };
    if ratio > CANCELLATION_LIMIT || err >= total {
        return Err(Error::CancellationLoss {
            ratio,
            limit: CANCELLATION_LIMIT,
        });
    }
    let log_lead = kf.ln() - (2.0 * PI).ln();
    let value = Enclosure::new(LogValue::from_log(log_lead + total.ln()), err / total + 4.0 * EPS);
    Ok(ApproxResult::plain(
        value,
        outside_envelope_log(k, t).exp(),
        Regime::Outside,
    ))
}
