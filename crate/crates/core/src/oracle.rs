//! Ground-truth evaluation of the punctured-disk kernel by direct summation of
//! its defining series.
//!
//! The canonical object here is `rho_k(t) = t^k / (2 pi (k-2)!) * S(k-1, t)`
//! with `S(m, t) = sum_{a>=1} a^m e^{-a t}` and `t = -log|z|^2`. The regime
//! layer works with the shifted kernel `rho_{k+1}` and documents that shift.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    ln_2pi, log_factorial, log_factorial_error, rotated_trig, sum_log_concave, Enclosure,
    LogValue, EPS,
};

/// Above this exponent the Eulerian-polynomial route costs too much.
const EULERIAN_MAX_EXPONENT: u64 = 20_000;

/// Cancellation ratio beyond which a signed sum is not trusted.
pub const CANCELLATION_LIMIT: f64 = 1e8;

/// Tensor power `k` and radial coordinate `t = -log|z|^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    pub k: u64,
    pub t: f64,
}

impl KernelPoint {
    pub fn new(k: u64, t: f64) -> Result<Self> {
        if k < 3 {
            return Err(Error::InvalidArgument(format!("k must be at least 3, got {k}")));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("t must be positive and finite, got {t}")));
        }
        Ok(KernelPoint { k, t })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig {
            rel_tol: 1e-13,
            max_terms: 10_000_000,
        }
    }
}

impl SeriesConfig {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Error::InvalidArgument(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
        }
        if max_terms == 0 {
            return Err(Error::InvalidArgument("max_terms must be positive".into()));
        }
        Ok(SeriesConfig { rel_tol, max_terms })
    }

    pub fn with_rel_tol(self, rel_tol: f64) -> Self {
        SeriesConfig { rel_tol, ..self }
    }
}

/// Rough count of terms the peak-outward walk visits for `a^m e^{-a t}`.
fn estimated_terms(m: u64, t: f64, rel_tol: f64) -> f64 {
    let width = ((m + 1) as f64).sqrt() / t;
    let spread = (2.0 * (4.0 / rel_tol).ln()).sqrt() + 2.0;
    2.0 * width * spread + (4.0 / rel_tol).ln() / t
}

fn direct_is_feasible(m: u64, t: f64, cfg: &SeriesConfig) -> bool {
    estimated_terms(m, t, cfg.rel_tol) < 0.5 * cfg.max_terms as f64
}

/// `S(m, t) = sum_{a>=1} a^m e^{-a t}` as a certified enclosure.
pub fn power_series(m: u64, t: f64, cfg: &SeriesConfig) -> Result<Enclosure> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be positive and finite, got {t}")));
    }
    if !direct_is_feasible(m, t, cfg) && m <= EULERIAN_MAX_EXPONENT && (m as f64) * t <= 100.0 {
        return Ok(power_series_eulerian(m, t));
    }
    power_series_direct(m, t, cfg, &[])
}

/// Peak-outward summation, skipping the indices in `exclude`.
pub(crate) fn power_series_direct(
    m: u64,
    t: f64,
    cfg: &SeriesConfig,
    exclude: &[i64],
) -> Result<Enclosure> {
    let mf = m as f64;
    power_series_anchored(m, t, cfg, exclude, |p| {
        let p = p as f64;
        (mf * p.ln() - p * t, 4.0 * EPS * (mf * p.ln().abs() + p * t))
    })
}

/// Sum of `a^m e^{-a t}` over `a >= 1`, `a` not in `exclude`, expressed in
/// caller-chosen units: `anchor(p)` returns the log of term `p` in those units
/// together with an absolute error bound for that log.
pub fn power_series_anchored<A>(
    m: u64,
    t: f64,
    cfg: &SeriesConfig,
    exclude: &[i64],
    anchor: A,
) -> Result<Enclosure>
where
    A: Fn(i64) -> (f64, f64),
{
    let mf = m as f64;
    let phi_rel = |i: i64, j: i64| {
        let d = (i - j) as f64;
        let log_ratio = mf * (d / j as f64).ln_1p();
        let linear = d * t;
        (log_ratio - linear, 4.0 * EPS * (log_ratio.abs() + linear.abs()))
    };
    let hint = ((mf / t).round() as i64).max(1);
    let sum = sum_log_concave(phi_rel, hint, Some(1), None, exclude, cfg.rel_tol, cfg.max_terms)?;
    if sum.is_zero() {
        return Ok(Enclosure::exact(LogValue::ZERO));
    }
    let (log_anchor, anchor_err) = anchor(sum.peak);
    Ok(sum.enclosure().scale_log(log_anchor, anchor_err))
}

/// Closed form `S(m, t) = x A_m(x) / (1 - x)^{m+1}` with `x = e^{-t}` and
/// `A_m` the Eulerian polynomial. All coefficients are positive, so the
/// evaluation has no cancellation; cost is quadratic in `m`.
fn power_series_eulerian(m: u64, t: f64) -> Enclosure {
    let n = m as usize;
    // row[j] * exp(row_scale) = A(n, j)
    let mut row = vec![1.0_f64];
    let mut row_scale = 0.0_f64;
    for r in 2..=n {
        let mut next = vec![0.0_f64; r];
        for (j, slot) in next.iter_mut().enumerate() {
            let keep = if j < row.len() { (j + 1) as f64 * row[j] } else { 0.0 };
            let shift = if j >= 1 { (r - j) as f64 * row[j - 1] } else { 0.0 };
            *slot = keep + shift;
        }
        let max = next.iter().cloned().fold(0.0_f64, f64::max);
        for v in next.iter_mut() {
            *v /= max;
        }
        row_scale += max.ln();
        row = next;
    }
    // A_m(x) = sum_j row[j] x^j, evaluated with a running max in the log domain.
    let mut best = f64::NEG_INFINITY;
    let mut acc = 0.0_f64;
    for (j, &c) in row.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let l = c.ln() - j as f64 * t;
        if l > best {
            acc = acc * (best - l).exp() + 1.0;
            best = l;
        } else {
            acc += (l - best).exp();
        }
    }
    let log_poly = row_scale + best + acc.ln();
    let log_one_minus_x = (-(-t).exp_m1()).ln();
    let log_value = -t + log_poly - (m + 1) as f64 * log_one_minus_x;
    let mf = m as f64;
    let rel_err = (8.0 * mf + 16.0) * EPS
        + 4.0 * (mf + 1.0) * EPS * (log_one_minus_x.abs() + 2.0)
        + 4.0 * EPS * (log_poly.abs() + t);
    Enclosure::new(LogValue::from_log(log_value), rel_err)
}

/// The kernel `rho_k(t)`.
pub fn rho(p: KernelPoint, cfg: &SeriesConfig) -> Result<Enclosure> {
    let p = KernelPoint::new(p.k, p.t)?;
    let series = power_series(p.k - 1, p.t, cfg)?;
    let kf = p.k as f64;
    let log_prefactor = kf * p.t.ln() - ln_2pi() - log_factorial(p.k - 2);
    let prefactor_err =
        2.0 * log_factorial_error(p.k - 2) + 4.0 * EPS * (kf * p.t.ln().abs() + 2.0);
    Ok(series.scale_log(log_prefactor, prefactor_err))
}

/// Squared normalization `tau_a^2 = a^{k-1} / (2 pi (k-2)!)` of the monomial
/// `z^a` in the weighted space.
pub fn tau_sq(k: u64, a: u64) -> Result<LogValue> {
    if k < 3 || a < 1 {
        return Err(Error::InvalidArgument(format!("tau_sq needs k >= 3, a >= 1 (k={k}, a={a})")));
    }
    Ok(LogValue::from_log(
        (k - 1) as f64 * (a as f64).ln() - ln_2pi() - log_factorial(k - 2),
    ))
}

/// Metric norm of the radial gradient, `sqrt(2) t |d rho_k / dt|`.
///
/// The termwise derivative splits into a positive part (`a < k/t`) and a
/// negative part (`a > k/t`); each is a log-concave series and is summed with
/// its own certificate before the two are subtracted.
pub fn rho_gradient_norm(p: KernelPoint, cfg: &SeriesConfig) -> Result<Enclosure> {
    let p = KernelPoint::new(p.k, p.t)?;
    if !direct_is_feasible(p.k, p.t, cfg) {
        return gradient_norm_poisson(p, cfg);
    }
    let k = p.k as f64;
    let t = p.t;
    let c = k / t;
    let km1 = k - 1.0;
    let term_log = move |a: f64| (c - a).abs().ln() + km1 * a.ln() - a * t;
    let phi_rel = |i: i64, j: i64| {
        let (fi, fj) = (i as f64, j as f64);
        let d = fi - fj;
        let lin = (c - fi).abs().ln() - (c - fj).abs().ln();
        let pow = km1 * (d / fj).ln_1p();
        (
            lin + pow - d * t,
            4.0 * EPS * ((c - fi).abs().ln().abs() + (c - fj).abs().ln().abs() + pow.abs() + (d * t).abs() + c),
        )
    };
    let center = (km1 / t).round() as i64;

    let part = |lo: i64, hi: Option<i64>, hint: i64| -> Result<Enclosure> {
        if hi.is_some_and(|h| h < lo) {
            return Ok(Enclosure::exact(LogValue::ZERO));
        }
        let s = sum_log_concave(phi_rel, hint, Some(lo), hi, &[], cfg.rel_tol, cfg.max_terms)?;
        let pk = s.peak as f64;
        let anchor = term_log(pk);
        let anchor_err = 4.0 * EPS * (km1 * pk.ln().abs() + pk * t + (c - pk).abs().ln().abs() + 1.0);
        Ok(s.enclosure().scale_log(anchor, anchor_err))
    };
    let hi_pos = c.ceil() as i64 - 1;
    let lo_neg = c.floor() as i64 + 1;
    let positive = part(1, Some(hi_pos), center.clamp(1, hi_pos.max(1)))?;
    let negative = part(lo_neg.max(1), None, center.max(lo_neg))?;

    let (lp, ln_) = (positive.ln(), negative.ln());
    let (l_hi, l_lo) = if lp >= ln_ { (lp, ln_) } else { (ln_, lp) };
    let gap = l_lo - l_hi;
    if gap == 0.0 {
        return Err(Error::CancellationLoss {
            ratio: f64::INFINITY,
            limit: CANCELLATION_LIMIT,
        });
    }
    let log_diff = l_hi + (-gap.exp()).ln_1p();
    let log_total = l_hi + gap.exp().ln_1p();
    let ratio = (log_total - log_diff).exp();
    if ratio > CANCELLATION_LIMIT {
        return Err(Error::CancellationLoss {
            ratio,
            limit: CANCELLATION_LIMIT,
        });
    }
    let rel_err = positive.rel_err.max(negative.rel_err) * ratio + 4.0 * EPS * ratio;
    let log_prefactor =
        0.5 * 2f64.ln() + t.ln() + k * t.ln() - ln_2pi() - log_factorial(p.k - 2);
    let prefactor_err = 2.0 * log_factorial_error(p.k - 2) + 4.0 * EPS * (k * t.ln().abs() + 2.0);
    Ok(Enclosure::new(LogValue::from_log(log_diff), rel_err).scale_log(log_prefactor, prefactor_err))
}

/// Gradient near the boundary from the differentiated Poisson representation
/// `rho_k = (k-1)/(2 pi) sum_xi (1 + 2 pi i xi / t)^{-k}`.
fn gradient_norm_poisson(p: KernelPoint, cfg: &SeriesConfig) -> Result<Enclosure> {
    let k = p.k as f64;
    let t = p.t;
    let n = p.k + 1;
    let log_mag = |xi: f64| {
        let y = 2.0 * PI * xi / t;
        (2.0 * k / t).ln() + y.ln() - 0.5 * (k + 1.0) * (y * y).ln_1p()
    };
    let anchor = log_mag(1.0);
    // Tail of sum_{xi > N} |term| using (1+y^2)^{-(k+1)/2} <= y^{-(k+1)} and, for
    // even k+1, |sin((k+1) theta)| <= (k+1)/y.
    let (extra, factor) = if n.is_multiple_of(2) { (1.0, (k + 1.0).ln()) } else { (0.0, 0.0) };
    let power = k + extra;
    let log_tail = |big_n: f64| {
        (2.0 * k / t).ln() + factor - power * (2.0 * PI / t).ln() + (1.0 - power) * big_n.ln()
            - (power - 1.0).ln()
    };

    let mut signed = 0.0_f64;
    let mut abs_sum = 0.0_f64;
    let mut xi = 1u64;
    loop {
        let xf = xi as f64;
        let phi = (t / (2.0 * PI * xf)).atan();
        let (_, s) = rotated_trig(n, phi);
        let w = (log_mag(xf) - anchor).exp();
        signed += w * s;
        abs_sum += w;
        let tail = (log_tail(xf) - anchor).exp();
        if signed != 0.0 && tail <= 0.25 * cfg.rel_tol * signed.abs() {
            let ratio = abs_sum / signed.abs();
            if ratio > CANCELLATION_LIMIT {
                return Err(Error::CancellationLoss {
                    ratio,
                    limit: CANCELLATION_LIMIT,
                });
            }
            let rel_err = tail / signed.abs()
                + ratio * 16.0 * EPS * (k + 4.0 + anchor.abs() + xf.ln());
            let log_value = 0.5 * 2f64.ln() + t.ln() + (k - 1.0).ln() - ln_2pi() + anchor + signed.abs().ln();
            return Ok(Enclosure::new(LogValue::from_log(log_value), rel_err));
        }
        xi += 1;
        if xi as usize > cfg.max_terms {
            return Err(Error::TermBudgetExceeded {
                budget: cfg.max_terms,
            });
        }
    }
}
