//! Log-domain arithmetic, certified summation of log-concave series and
//! factorial bounds.
//!
//! Magnitudes such as `k^(k+1) e^(-k)` at `k ~ 1e4` overflow an `f64`, so every
//! positive quantity is carried as its natural logarithm. Signed quantities are
//! never stored here.

use std::f64::consts::PI;
use std::ops::{Div, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EPS: f64 = f64::EPSILON;

/// `ln sqrt(2 pi)`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A nonnegative real stored as a zero flag plus the log of its magnitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    pub is_zero: bool,
    pub log_mag: f64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        is_zero: true,
        log_mag: f64::NEG_INFINITY,
    };
    pub const ONE: LogValue = LogValue {
        is_zero: false,
        log_mag: 0.0,
    };

    pub fn from_log(log_mag: f64) -> Self {
        if log_mag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogValue {
                is_zero: false,
                log_mag,
            }
        }
    }

    /// Panics on negative or NaN input.
    pub fn from_real(x: f64) -> Self {
        assert!(x >= 0.0, "LogValue holds nonnegative reals only, got {x}");
        if x == 0.0 {
            Self::ZERO
        } else {
            Self::from_log(x.ln())
        }
    }

    pub fn to_real(self) -> f64 {
        if self.is_zero {
            0.0
        } else {
            self.log_mag.exp()
        }
    }

    /// Natural log, `-inf` for zero.
    pub fn ln(self) -> f64 {
        if self.is_zero {
            f64::NEG_INFINITY
        } else {
            self.log_mag
        }
    }

    pub fn powf(self, p: f64) -> Self {
        if self.is_zero {
            if p > 0.0 {
                Self::ZERO
            } else {
                Self::ONE
            }
        } else {
            Self::from_log(self.log_mag * p)
        }
    }

    pub fn sqrt(self) -> Self {
        self.powf(0.5)
    }
}

impl Mul for LogValue {
    type Output = LogValue;
    fn mul(self, rhs: LogValue) -> LogValue {
        if self.is_zero || rhs.is_zero {
            LogValue::ZERO
        } else {
            LogValue::from_log(self.log_mag + rhs.log_mag)
        }
    }
}

impl Div for LogValue {
    type Output = LogValue;
    fn div(self, rhs: LogValue) -> LogValue {
        assert!(!rhs.is_zero, "division by a zero LogValue");
        if self.is_zero {
            LogValue::ZERO
        } else {
            LogValue::from_log(self.log_mag - rhs.log_mag)
        }
    }
}

/// Log-domain sum of two nonnegative values.
pub fn log_add(a: LogValue, b: LogValue) -> LogValue {
    match (a.is_zero, b.is_zero) {
        (true, _) => b,
        (_, true) => a,
        _ => {
            let (hi, lo) = if a.log_mag >= b.log_mag {
                (a.log_mag, b.log_mag)
            } else {
                (b.log_mag, a.log_mag)
            };
            LogValue::from_log(hi + (lo - hi).exp().ln_1p())
        }
    }
}

/// Log-domain sum of a finite stream with running-max renormalization.
pub fn log_sum<I: IntoIterator<Item = LogValue>>(terms: I) -> LogValue {
    let mut max = f64::NEG_INFINITY;
    let mut acc = 0.0_f64;
    for term in terms {
        if term.is_zero {
            continue;
        }
        if term.log_mag > max {
            acc = acc * (max - term.log_mag).exp() + 1.0;
            max = term.log_mag;
        } else {
            acc += (term.log_mag - max).exp();
        }
    }
    if acc == 0.0 {
        LogValue::ZERO
    } else {
        LogValue::from_log(max + acc.ln())
    }
}

/// A nonnegative quantity together with a guaranteed relative error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enclosure {
    pub value: LogValue,
    pub rel_err: f64,
}

impl Enclosure {
    pub fn new(value: LogValue, rel_err: f64) -> Self {
        debug_assert!(rel_err >= 0.0 || rel_err.is_nan());
        Enclosure { value, rel_err }
    }

    pub fn exact(value: LogValue) -> Self {
        Enclosure {
            value,
            rel_err: 0.0,
        }
    }

    pub fn ln(&self) -> f64 {
        self.value.ln()
    }

    pub fn to_real(&self) -> f64 {
        self.value.to_real()
    }

    /// Log of the lower end of the enclosure (`-inf` when it reaches zero).
    pub fn ln_lower(&self) -> f64 {
        if self.rel_err >= 1.0 {
            f64::NEG_INFINITY
        } else {
            self.value.ln() + (-self.rel_err).ln_1p()
        }
    }

    pub fn ln_upper(&self) -> f64 {
        self.value.ln() + self.rel_err.ln_1p()
    }

    pub fn mul(&self, other: &Enclosure) -> Enclosure {
        Enclosure::new(
            self.value * other.value,
            self.rel_err + other.rel_err + self.rel_err * other.rel_err,
        )
    }

    pub fn div(&self, other: &Enclosure) -> Enclosure {
        let rel = if other.rel_err >= 1.0 {
            f64::INFINITY
        } else {
            (self.rel_err + other.rel_err) / (1.0 - other.rel_err)
        };
        Enclosure::new(self.value / other.value, rel)
    }

    /// Multiplies by `exp(log_factor)` where the log factor carries an absolute
    /// error of at most `log_err`.
    pub fn scale_log(&self, log_factor: f64, log_err: f64) -> Enclosure {
        let value = if self.value.is_zero {
            LogValue::ZERO
        } else {
            LogValue::from_log(self.value.log_mag + log_factor)
        };
        let factor_rel = log_err.abs().exp_m1();
        Enclosure::new(
            value,
            self.rel_err + factor_rel + self.rel_err * factor_rel,
        )
    }

    pub fn inflate(&self, extra_rel: f64) -> Enclosure {
        Enclosure::new(self.value, self.rel_err + extra_rel)
    }

    /// Whether `x` lies in `value * [1 - rel_err, 1 + rel_err]`, compared in the
    /// log domain.
    pub fn contains(&self, x: LogValue) -> bool {
        if x.is_zero {
            return self.value.is_zero || self.rel_err >= 1.0;
        }
        x.log_mag >= self.ln_lower() && x.log_mag <= self.ln_upper()
    }
}

/// `ln(n!)`: exact accumulation for `n <= 20`; above that, Stirling's formula
/// with the remainder series of [`stirling_remainder`], which always lies
/// inside the Robbins window `(1/(12n+1), 1/(12n))`.
pub fn log_factorial(n: u64) -> f64 {
    if n <= 20 {
        (2..=n).map(|i| (i as f64).ln()).sum()
    } else {
        let x = n as f64;
        LN_SQRT_2PI + (x + 0.5) * x.ln() - x + stirling_remainder(n).0
    }
}

/// Absolute error bound for [`log_factorial`], including rounding. Never
/// larger than the Robbins width `1/(12n) - 1/(12n+1)` plus rounding.
pub fn log_factorial_error(n: u64) -> f64 {
    let x = n as f64;
    if n <= 20 {
        4.0 * (x + 1.0) * EPS * (1.0 + log_factorial(n))
    } else {
        stirling_remainder(n).1 + 8.0 * EPS * ((x + 0.5) * x.ln() + x + 1.0)
    }
}

/// Robbins window `(1/(12n+1), 1/(12n))` for the Stirling remainder.
pub fn robbins_window(n: u64) -> (f64, f64) {
    let x = n as f64;
    (1.0 / (12.0 * x + 1.0), 1.0 / (12.0 * x))
}

/// Stirling remainder `ln n! - ln sqrt(2 pi) - (n + 1/2) ln n + n` from its
/// asymptotic series, with an absolute error bound. The series alternates with
/// remainder below the first omitted term for every real `n > 0`.
pub fn stirling_remainder(n: u64) -> (f64, f64) {
    let x = n as f64;
    let x2 = x * x;
    let value = (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x;
    let truncation = 1.0 / (1188.0 * x2 * x2 * x2 * x2 * x);
    (value, truncation + 8.0 * EPS * value)
}

/// Upper bound `e^{f(x0)} / (-f'(x0))` for the tail integral of `e^f` beyond
/// `x0`, valid when `f` is concave.
pub fn concave_tail_bound(f_at_x0: f64, f_prime_at_x0: f64) -> Result<f64> {
    if !(f_prime_at_x0 < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "concave tail bound needs f'(x0) < 0, got {f_prime_at_x0}"
        )));
    }
    Ok(f_at_x0.exp() / -f_prime_at_x0)
}

/// Result of [`sum_log_concave`]. The sum equals `exp(log_value)` up to the
/// relative error `rel_err`, which already contains both tail certificates.
#[derive(Clone, Copy, Debug)]
pub struct CertifiedSum {
    pub log_value: f64,
    pub rel_err: f64,
    pub peak: i64,
    pub terms: usize,
}

impl CertifiedSum {
    pub fn is_zero(&self) -> bool {
        self.log_value == f64::NEG_INFINITY
    }

    pub fn enclosure(&self) -> Enclosure {
        Enclosure::new(LogValue::from_log(self.log_value), self.rel_err)
    }
}

struct Accumulator {
    max: f64,
    acc: f64,
    err: f64,
}

impl Accumulator {
    fn push(&mut self, l: f64, l_err: f64) {
        if l > self.max {
            let scale = (self.max - l).exp();
            self.acc *= scale;
            self.err *= scale;
            self.max = l;
        }
        let s = (l - self.max).exp();
        self.acc += s;
        self.err += s * l_err.exp_m1();
    }

    fn ln(&self) -> f64 {
        if self.acc == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.acc.ln()
        }
    }
}

/// Sums `exp(phi(i))` over integers `i` in `[lo, hi]` (either end may be open)
/// for a concave exponent `phi`, walking outward from the maximizer.
///
/// `phi_rel(i, j)` returns `phi(i) - phi(j)` together with a bound on its
/// absolute rounding error. The returned log value is relative to `phi(peak)`;
/// callers add the anchor themselves. Indices listed in `exclude` are walked
/// over but not added. Each side stops once the geometric tail certificate
/// `sigma * r / (1 - r)`, with `r` the current term ratio, falls below
/// `rel_tol / 4` of the running sum.
pub fn sum_log_concave<F>(
    phi_rel: F,
    hint: i64,
    lo: Option<i64>,
    hi: Option<i64>,
    exclude: &[i64],
    rel_tol: f64,
    max_terms: usize,
) -> Result<CertifiedSum>
where
    F: Fn(i64, i64) -> (f64, f64),
{
    let in_range = |i: i64| lo.is_none_or(|l| i >= l) && hi.is_none_or(|h| i <= h);
    let mut peak = hint;
    if let Some(l) = lo {
        peak = peak.max(l);
    }
    if let Some(h) = hi {
        peak = peak.min(h);
    }
    let mut steps = 0usize;
    let mut moved_up = false;
    while in_range(peak + 1) && phi_rel(peak + 1, peak).0 > 0.0 {
        peak += 1;
        moved_up = true;
        steps += 1;
        if steps > max_terms {
            return Err(Error::TermBudgetExceeded { budget: max_terms });
        }
    }
    if !moved_up {
        while in_range(peak - 1) && phi_rel(peak - 1, peak).0 > 0.0 {
            peak -= 1;
            steps += 1;
            if steps > max_terms {
                return Err(Error::TermBudgetExceeded { budget: max_terms });
            }
        }
    }

    let mut acc = Accumulator {
        max: f64::NEG_INFINITY,
        acc: 0.0,
        err: 0.0,
    };
    let mut terms = 0usize;
    let add = |acc: &mut Accumulator, i: i64| -> (f64, f64) {
        let (l, e) = phi_rel(i, peak);
        if !exclude.contains(&i) {
            acc.push(l, e);
        }
        (l, e)
    };
    let log_budget_ok = |acc: &Accumulator, log_tail: f64| -> bool {
        acc.acc > 0.0 && log_tail <= (rel_tol / 4.0).ln() + acc.ln()
    };

    add(&mut acc, peak);
    terms += 1;

    let mut log_tails = Vec::with_capacity(2);
    for dir in [1i64, -1] {
        let mut i = peak;
        let mut l_i = 0.0;
        loop {
            let next = i + dir;
            if !in_range(next) {
                break;
            }
            let (dl, _) = phi_rel(next, i);
            if dl < 0.0 {
                let log_tail = l_i + dl - (-dl.exp_m1()).ln();
                if log_budget_ok(&acc, log_tail) {
                    log_tails.push(log_tail);
                    break;
                }
            }
            let (l_next, _) = add(&mut acc, next);
            terms += 1;
            if terms > max_terms {
                return Err(Error::TermBudgetExceeded { budget: max_terms });
            }
            i = next;
            l_i = l_next;
        }
    }

    if acc.acc == 0.0 {
        // Only excluded indices carried mass and the tails are empty.
        let tails: f64 = log_tails.iter().map(|t| t.exp()).sum();
        if tails == 0.0 {
            return Ok(CertifiedSum {
                log_value: f64::NEG_INFINITY,
                rel_err: 0.0,
                peak,
                terms,
            });
        }
        return Err(Error::TermBudgetExceeded { budget: max_terms });
    }
    let log_sum = acc.ln();
    let tail_rel: f64 = log_tails.iter().map(|t| (t - log_sum).exp()).sum();
    let rounding = 2.0 * (terms as f64 + 2.0) * EPS;
    Ok(CertifiedSum {
        log_value: log_sum,
        rel_err: tail_rel + acc.err / acc.acc + rounding,
        peak,
        terms,
    })
}

/// Golden-section minimization of a unimodal function on `[a, b]` down to an
/// interval of width `tol`. Returns the final midpoint and its value.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// `(cos(n theta), sin(n theta))` for `theta = pi/2 - phi`, reduced by the
/// quadrant of `n pi / 2` so that small `phi` keeps full relative accuracy.
pub fn rotated_trig(n: u64, phi: f64) -> (f64, f64) {
    let x = n as f64 * phi;
    let (s, c) = x.sin_cos();
    match n % 4 {
        0 => (c, -s),
        1 => (s, c),
        2 => (-c, s),
        _ => (-s, -c),
    }
}

/// `ln(2 pi)`.
pub fn ln_2pi() -> f64 {
    (2.0 * PI).ln()
}
