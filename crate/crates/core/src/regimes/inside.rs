//! Near the puncture: the leading term, the lattice points `t = k/b` and the
//! two-term model between consecutive lattice points.

use crate::error::{Error, Result};
use crate::numerics::{golden_section_min, log_add, Enclosure, LogValue, EPS};
use crate::oracle::{power_series_anchored, SeriesConfig};

use super::{
    check_k, check_t, f_b_excluding, factorial_rel, lattice_s, log_inv_norm, log_peak_unit,
    ApproxResult, Regime,
};

/// Leading term `t^{k+1} e^{-t} / (2 pi (k-1)!)` with relative excess
/// `0 < eps_1 <= 2^{k+1} e^{-t}`.
///
/// The bound holds for `t >= k` (`|z| <= e^{-k/2}`); for `t` much below `k`
/// the excess grows without bound, so smaller `t` is rejected.
pub fn rho_lattice_b1(k: u64, t: f64) -> Result<ApproxResult> {
    check_k(k)?;
    check_t(t)?;
    let kf = k as f64;
    if t < kf {
        return Err(Error::RegimeOutOfRange(format!(
            "leading-term regime needs t >= k (t = {t}, k = {k})"
        )));
    }
    let (n, n_err) = log_inv_norm(k);
    let main = (kf + 1.0) * t.ln() - t;
    let log_err = n_err + 4.0 * EPS * ((kf + 1.0) * t.ln().abs() + t);
    let value = Enclosure::exact(LogValue::from_log(main + n)).scale_log(0.0, log_err);
    let envelope = ((kf + 1.0) * 2f64.ln() - t).exp() + factorial_rel(k);
    let regime = if t == kf {
        Regime::Lattice { b: 1 }
    } else {
        Regime::LeadingTerm
    };
    Ok(ApproxResult::plain(value, envelope, regime))
}

/// Lattice value `k^{k+1} e^{-k} / (2 b pi (k-1)!)` with `S < eps_b < 2 S`.
///
/// Requires `b >= 2` and `k / (b (b+1)) >= log 2`; `b = 1` is the leading term
/// at `t = k`.
pub fn rho_lattice(k: u64, b: u64) -> Result<ApproxResult> {
    check_k(k)?;
    if b == 0 {
        return Err(Error::RegimeOutOfRange("lattice index b must be positive".into()));
    }
    if b == 1 {
        return rho_lattice_b1(k, k as f64);
    }
    let kf = k as f64;
    let bf = b as f64;
    if kf / (bf * (bf + 1.0)) < std::f64::consts::LN_2 {
        return Err(Error::RegimeOutOfRange(format!(
            "lattice b = {b} needs k/(b(b+1)) >= log 2 (k = {k})"
        )));
    }
    let (u, u_err) = log_peak_unit(k);
    let value = Enclosure::exact(LogValue::from_log(u - bf.ln())).scale_log(0.0, u_err + 4.0 * EPS * bf.ln());
    let s = lattice_s(k, b);
    let s_real = s.to_real();
    Ok(ApproxResult {
        value,
        envelope: 2.0 * s_real + factorial_rel(k),
        regime: Regime::Lattice { b },
        lower_envelope: Some(s_real),
        absolute_envelope_log: None,
    })
}

/// Pieces of the exact excess `f_b(k/b) - 1` at a lattice point.
#[derive(Clone, Copy, Debug)]
pub struct LatticeExcess {
    /// `f_b(k/b) - 1`.
    pub excess: Enclosure,
    /// The `c = +-1` contribution `S`.
    pub s: LogValue,
    /// Everything except `c in {-1, 0, 1}`.
    pub rest: Enclosure,
}

/// Since `rho_{k+1}(k/b) = lattice value * f_b(k/b)` exactly, the relative
/// excess of the oracle over the lattice value is `f_b(k/b) - 1`, summed here
/// without forming the difference.
pub fn lattice_excess(k: u64, b: u64, cfg: &SeriesConfig) -> Result<LatticeExcess> {
    check_k(k)?;
    if b == 0 {
        return Err(Error::InvalidArgument("b must be positive".into()));
    }
    let t = k as f64 / b as f64;
    let excess = f_b_excluding(k, t, b, &[0], cfg)?;
    let rest = f_b_excluding(k, t, b, &[-1, 0, 1], cfg)?;
    Ok(LatticeExcess {
        excess,
        s: lattice_s(k, b),
        rest,
    })
}

/// Whether `a` lies in the two-term range `1 <= a <= sqrt(k)/log k - 1` with
/// `k >= 55`.
pub fn inside_admissible(k: u64, a: u64) -> bool {
    let kf = k as f64;
    k >= 55 && a >= 1 && (a as f64) <= kf.sqrt() / kf.ln() - 1.0
}

/// `ln(h_a(t) / (k^{k+1} e^{-k}))` with `h_a(t) = t^{k+1} a^k e^{-a t}`, and its
/// absolute error.
pub(crate) fn log_h_rel(k: u64, t: f64, a: f64) -> (f64, f64) {
    let kf = k as f64;
    let p = (kf + 1.0) * (t / kf).ln();
    let q = kf * a.ln();
    let r = kf - a * t;
    (p + q + r, 4.0 * EPS * (p.abs() + q.abs() + kf + a * t))
}

/// Two-term model `h_a + h_{a+1}` in units of `k^{k+1} e^{-k}`.
pub(crate) fn log_two_term(k: u64, t: f64, a: u64) -> (f64, f64) {
    let (l0, e0) = log_h_rel(k, t, a as f64);
    let (l1, e1) = log_h_rel(k, t, (a + 1) as f64);
    (log_add(LogValue::from_log(l0), LogValue::from_log(l1)).ln(), e0.max(e1) + 2.0 * EPS)
}

/// `ln(E_a)` with `E_a = 2 (1 + 1/a)^k e^{-k/a}`.
pub fn log_e_a(k: u64, a: u64) -> f64 {
    let kf = k as f64;
    let af = a as f64;
    std::f64::consts::LN_2 + kf * (1.0 / af).ln_1p() - kf / af
}

fn check_inside(k: u64, t: f64, a: u64) -> Result<()> {
    check_k(k)?;
    check_t(t)?;
    if !inside_admissible(k, a) {
        return Err(Error::RegimeOutOfRange(format!(
            "two-term regime needs k >= 55 and 1 <= a <= sqrt(k)/log k - 1 (k = {k}, a = {a})"
        )));
    }
    let kf = k as f64;
    let af = a as f64;
    if !(t > kf / (af + 1.0) && t < kf / af) {
        return Err(Error::RegimeOutOfRange(format!(
            "t = {t} is outside (k/(a+1), k/a) for k = {k}, a = {a}"
        )));
    }
    Ok(())
}

/// Two-term value `(h_a(t) + h_{a+1}(t)) / (2 pi (k-1)!)`.
///
/// The theorem's error `E_a + E_{a+1}` is absolute in units of
/// `k^{k+1} e^{-k} / (2 pi (k-1)!)`; it is kept in `absolute_envelope_log`
/// and divided by the local value for the relative `envelope`.
pub fn rho_inside_two_term(k: u64, t: f64, a: u64) -> Result<ApproxResult> {
    check_inside(k, t, a)?;
    let (two, two_err) = log_two_term(k, t, a);
    let (u, u_err) = log_peak_unit(k);
    let value = Enclosure::exact(LogValue::from_log(u + two)).scale_log(0.0, u_err + two_err);
    let abs_env = log_add(
        LogValue::from_log(log_e_a(k, a)),
        LogValue::from_log(log_e_a(k, a + 1)),
    )
    .ln();
    Ok(ApproxResult {
        value,
        envelope: (abs_env - two).exp() + factorial_rel(k),
        regime: Regime::InsideTwoTerm { a },
        lower_envelope: None,
        absolute_envelope_log: Some(abs_env),
    })
}

/// Everything the two-term model leaves out, in units of
/// `k^{k+1} e^{-k} / (2 pi (k-1)!)`: `sum_{a' != a, a+1} (t/k)^{k+1} a'^k e^{k - a' t}`.
pub fn inside_rest(k: u64, t: f64, a: u64, cfg: &SeriesConfig) -> Result<Enclosure> {
    check_k(k)?;
    check_t(t)?;
    let ai = a as i64;
    power_series_anchored(k, t, cfg, &[ai, ai + 1], |p| log_h_rel(k, t, p as f64))
}

/// Minimizer of the two-term model on `(k/(a+1), k/a)` by golden section, with
/// the model value there (absolute, same units as the kernel).
pub fn locate_interior_minimum(k: u64, a: u64) -> Result<(f64, Enclosure)> {
    check_k(k)?;
    if !inside_admissible(k, a) {
        return Err(Error::RegimeOutOfRange(format!(
            "two-term regime needs k >= 55 and 1 <= a <= sqrt(k)/log k - 1 (k = {k}, a = {a})"
        )));
    }
    let kf = k as f64;
    let af = a as f64;
    let lo = kf / (af + 1.0);
    let hi = kf / af;

    let (core_lo, core_hi) = convex_core(k, a);
    if core_lo < core_hi {
        let second = min_scaled_second_difference(k, a, core_lo, core_hi, 100);
        if second < -1e-9 {
            return Err(Error::ConvexityViolation(second));
        }
    }

    let (t_min, log_min) = golden_section_min(|t| log_two_term(k, t, a).0, lo, hi, 1e-8 * hi);
    let lower_edge = (kf + 2.0) / (af + 1.0);
    if !(t_min > lower_edge && t_min < hi) {
        return Err(Error::InapplicableAssumptions(format!(
            "minimizer {t_min} not in ((k+2)/(a+1), k/a) = ({lower_edge}, {hi})"
        )));
    }
    let (u, u_err) = log_peak_unit(k);
    let err = log_two_term(k, t_min, a).1 + u_err;
    Ok((
        t_min,
        Enclosure::exact(LogValue::from_log(u + log_min)).scale_log(0.0, err),
    ))
}

/// Interval on which both `h_a` and `h_{a+1}` are convex. `h_a'' > 0` exactly
/// when `a t` lies outside `k + 1 -+ sqrt(k + 1)`, so near either end of
/// `(k/(a+1), k/a)` one of the two terms is concave.
pub fn convex_core(k: u64, a: u64) -> (f64, f64) {
    let kf = k as f64;
    let af = a as f64;
    let r = (kf + 1.0).sqrt();
    ((kf + 1.0 + r) / (af + 1.0), (kf + 1.0 - r) / af)
}

/// Smallest second difference of `h_a + h_{a+1}` over `n` interior samples of
/// `(lo, hi)`, each divided by the middle sample.
pub fn min_scaled_second_difference(k: u64, a: u64, lo: f64, hi: f64, n: usize) -> f64 {
    let step = (hi - lo) / (n + 1) as f64;
    let logs: Vec<f64> = (1..=n).map(|i| log_two_term(k, lo + step * i as f64, a).0).collect();
    logs.windows(3)
        .map(|w| (w[0] - w[1]).exp() - 2.0 + (w[2] - w[1]).exp())
        .fold(f64::INFINITY, f64::min)
}

/// `ln` of `e^{-k/(c a^2)} (1/a + 1/(a+1))` in units of
/// `k^{k+1} e^{-k} / (2 pi (k-1)!)`: the minimum bound with constant `c`.
pub fn log_minimum_bound(k: u64, a: u64, c: f64) -> f64 {
    let af = a as f64;
    -(k as f64) / (c * af * af) + (1.0 / af + 1.0 / (af + 1.0)).ln()
}

/// Probe point `s_a = k log((a+1)/a)`.
pub fn probe_point(k: u64, a: u64) -> f64 {
    k as f64 * (1.0 / a as f64).ln_1p()
}
