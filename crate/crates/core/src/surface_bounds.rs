//! Effective constants for punctured Riemann surfaces: the five assumptions on
//! `k`, the section bounds `A_a`/`B_a`, the three-way dominance comparison and
//! the two error envelopes.
//!
//! Factors written with `-2 e log(R/2)` are evaluated through the positive
//! quantity `L = -log(R/2)`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{log_add, log_factorial, LogValue};

pub const ASSUMPTION3_MIN_K: u64 = 23190;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceParams {
    pub k: u64,
    pub epsilon: f64,
    pub lambda: f64,
    #[serde(rename = "r")]
    pub radius: f64,
    pub d: f64,
}

impl SurfaceParams {
    pub fn new(k: u64, epsilon: f64, lambda: f64, radius: f64, d: f64) -> Result<Self> {
        if k < 3 {
            return Err(Error::InvalidArgument(format!("k must be at least 3, got {k}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
        if !lambda.is_finite() || k as f64 * epsilon + lambda <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "k epsilon + lambda must be positive (k = {k}, epsilon = {epsilon}, lambda = {lambda})"
            )));
        }
        if !(radius > 0.0 && radius <= 0.5) {
            return Err(Error::InvalidArgument(format!("R must lie in (0, 1/2], got {radius}")));
        }
        if !(d >= 0.0 && d.is_finite()) {
            return Err(Error::InvalidArgument(format!("d must be nonnegative, got {d}")));
        }
        Ok(SurfaceParams {
            k,
            epsilon,
            lambda,
            radius,
            d,
        })
    }

    pub fn with_k(&self, k: u64) -> Result<Self> {
        SurfaceParams::new(k, self.epsilon, self.lambda, self.radius, self.d)
    }

    fn kf(&self) -> f64 {
        self.k as f64
    }

    /// `L = -log(R/2) > 0`.
    pub fn big_l(&self) -> f64 {
        -(self.radius / 2.0).ln()
    }

    /// `log(epsilon + lambda/k)`.
    fn log_curv(&self) -> f64 {
        (self.epsilon + self.lambda / self.kf()).ln()
    }

    /// `a_1 = (k-2)/(-2 log R)`.
    pub fn a1(&self) -> f64 {
        (self.kf() - 2.0) / (-2.0 * self.radius.ln())
    }

    /// `a_0 = (k-2)/(-2 log(R/2))`.
    pub fn a0(&self) -> f64 {
        (self.kf() - 2.0) / (2.0 * self.big_l())
    }

    /// `a_2 = k^{3/4}`.
    pub fn a2(&self) -> f64 {
        self.kf().powf(0.75)
    }

    /// `t_1 = -2 log R + 1/2`.
    pub fn t1(&self) -> f64 {
        -2.0 * self.radius.ln() + 0.5
    }
}

/// Smallest `t = -log|z|^2` in the region `|z| <= e^{-(k-2)^{3/8}}`.
pub fn wk_threshold(k: u64) -> f64 {
    2.0 * ((k as f64) - 2.0).powf(0.375)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub a1: bool,
    pub a2: bool,
    pub a3: bool,
    pub a4: bool,
    pub a5: bool,
    /// Log-domain slack of each assumption, in order; nonnegative iff it holds
    /// (strictly positive for the first).
    pub binding_margins: Vec<f64>,
}

impl AssumptionReport {
    pub fn first_three(&self) -> bool {
        self.a1 && self.a2 && self.a3
    }

    pub fn all(&self) -> bool {
        self.first_three() && self.a4 && self.a5
    }

    pub fn as_array(&self) -> [bool; 5] {
        [self.a1, self.a2, self.a3, self.a4, self.a5]
    }
}

pub fn check_assumptions(p: &SurfaceParams) -> AssumptionReport {
    let k = p.kf();
    let l = p.big_l();
    let m1 = k.ln() + (-p.radius.ln()).ln() - p.log_curv();
    let m2 = k.ln() - 4.0 * (9.0 * l).ln();
    let m3 = k.ln() - (ASSUMPTION3_MIN_K as f64).ln();
    // k^{1/4} sqrt(k eps + lambda) (R/2)^{k/(2 e L)} <= 1, and (R/2)^{k/(2eL)} = e^{-k/(2e)}.
    let m4 = k / (2.0 * E) - 0.25 * k.ln() - 0.5 * (k * p.epsilon + p.lambda).ln();
    let m5 = 0.25 * k.ln() - (2.0 * E * l).ln() + p.log_curv() / k;
    AssumptionReport {
        a1: m1 > 0.0,
        a2: m2 >= 0.0,
        a3: p.k >= ASSUMPTION3_MIN_K,
        a4: m4 >= 0.0,
        a5: m5 >= 0.0,
        binding_margins: vec![m1, m2, m3, m4, m5],
    }
}

/// Smallest `k` satisfying the second assumption, `ceil((9L)^4)`.
pub fn assumption2_min_k(radius: f64) -> u64 {
    let l = -(radius / 2.0).ln();
    (9.0 * l).powi(4).ceil() as u64
}

/// `log((k-1)/(5 sqrt k)) + (k-1) log(2 e a L / k) - 2 a L`.
fn log_bound_a(p: &SurfaceParams, a: f64) -> f64 {
    let k = p.kf();
    let l = p.big_l();
    ((k - 1.0) / 5.0).ln() - 0.5 * k.ln() + (k - 1.0) * (2.0 * E * a * l / k).ln() - 2.0 * a * l
}

/// `log(sqrt(k)(k-1)/(a(k eps + lambda))) + k log(2 e a L / k) - 2 a L`.
fn log_bound_b(p: &SurfaceParams, a: f64) -> f64 {
    let k = p.kf();
    let l = p.big_l();
    0.5 * k.ln() + (k - 1.0).ln() - a.ln() - (k * p.epsilon + p.lambda).ln() + k * (2.0 * E * a * l / k).ln()
        - 2.0 * a * l
}

fn check_a(a: u64) -> Result<f64> {
    if a == 0 {
        return Err(Error::InvalidArgument("a must be at least 1".into()));
    }
    Ok(a as f64)
}

/// Mass bound `A_a` of the model section outside radius `R/2`.
pub fn bound_a(p: &SurfaceParams, a: u64) -> Result<LogValue> {
    Ok(LogValue::from_log(log_bound_a(p, check_a(a)?)))
}

/// Correction-energy bound `B_a`.
pub fn bound_b(p: &SurfaceParams, a: u64) -> Result<LogValue> {
    Ok(LogValue::from_log(log_bound_b(p, check_a(a)?)))
}

/// `B_{a+1} / B_a = ((a+1)/a)^{k-1} (R/2)^2`.
pub fn bound_b_ratio(p: &SurfaceParams, a: u64) -> Result<LogValue> {
    let a = check_a(a)?;
    Ok(LogValue::from_log((p.kf() - 1.0) * (1.0 / a).ln_1p() - 2.0 * p.big_l()))
}

/// `E(a_0) = sum_{a <= a_0} B_a^{1/2}`.
pub fn sum_sqrt_b(p: &SurfaceParams, a0: u64) -> Result<LogValue> {
    let mut acc = LogValue::ZERO;
    for a in 1..=a0 {
        acc = log_add(acc, bound_b(p, a)?.sqrt());
    }
    Ok(acc)
}

/// `log` of the exact mass `2 pi tau_a^2 int_0^{2L} t^{k-2} e^{-a t} dt` with
/// `tau_a^2 = a^{k-1} / (2 pi (k-2)!)`, by composite Simpson quadrature.
pub fn log_mass_outside_quadrature(p: &SurfaceParams, a: u64, intervals: usize) -> Result<f64> {
    let a = check_a(a)?;
    let k = p.kf();
    let top = 2.0 * p.big_l();
    let f = |t: f64| (k - 2.0) * t.ln() - a * t;
    // The integrand peaks at (k-2)/a; integrate over the window carrying all
    // but e^{-60} of the mass.
    let peak = ((k - 2.0) / a).min(top);
    let slope = ((k - 2.0) / peak - a).abs();
    let width = 60.0 / slope.max(((k - 2.0) / (peak * peak)).sqrt());
    let lo = (peak - width).max(0.0);
    let hi = (peak + width).min(top);
    let n = intervals.max(2) & !1;
    let h = (hi - lo) / n as f64;
    let logs: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let t = lo + h * i as f64;
            (w, if t > 0.0 { f(t) } else { f64::NEG_INFINITY })
        })
        .collect();
    let m = logs.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = logs.iter().map(|(w, l)| w * (l - m).exp()).sum();
    let log_int = m + (s * h / 3.0).ln();
    Ok((k - 1.0) * a.ln() - log_factorial(p.k - 2) + log_int)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub log_i: f64,
    pub log_ii: f64,
    pub log_iii: f64,
    pub i_gt_ii: bool,
    pub ii_gt_iii: bool,
    /// Whether assumptions 1 to 3 hold; the comparison is only claimed then.
    pub assumptions_hold: bool,
}

/// `log(II) = k - k^{9/8} + ((k-1)/8) log k + log 6`.
pub fn log_term_ii(k: u64) -> f64 {
    let k = k as f64;
    6f64.ln() + k - k.powf(1.125) + (k - 1.0) / 8.0 * k.ln()
}

/// `log(III)` with `III = 2 u_1 u_2(a_1)^2`.
pub fn log_term_iii(p: &SurfaceParams) -> f64 {
    let k = p.kf();
    let l = p.big_l();
    let a1 = p.a1();
    let km2 = k - 2.0;
    let log_u1 = 1.5f64.ln() - (a1 - km2 / (2.0 * l)).ln()
        + km2 * (l / p.t1()).ln()
        + (k - 1.0) * (0.375 * km2.ln() - l.ln());
    let log_u2 = -a1 * (0.88 + km2.powf(0.375) / 4.0 - 2.0 * l);
    2f64.ln() + log_u1 + 2.0 * log_u2
}

pub fn dominance_check(p: &SurfaceParams) -> DominanceReport {
    let a2 = p.a2();
    let log_i = 2f64.ln() + a2.ln() + log_bound_b(p, a2);
    let log_ii = log_term_ii(p.k);
    let log_iii = log_term_iii(p);
    DominanceReport {
        log_i,
        log_ii,
        log_iii,
        i_gt_ii: log_i > log_ii,
        ii_gt_iii: log_ii > log_iii,
        assumptions_hold: check_assumptions(p).first_three(),
    }
}

/// The relative envelope of the kernel comparison theorem without the
/// assumption gate:
/// `50(1+d) k^{-(k-5)/8} (eps + lambda/k)^{-1/2} (2 e L)^{k/2} (R/2)^{k^{3/4}}`.
pub fn envelope_t15_formula(p: &SurfaceParams) -> LogValue {
    let k = p.kf();
    let l = p.big_l();
    LogValue::from_log(
        50f64.ln() + p.d.ln_1p() - (k - 5.0) / 8.0 * k.ln() - 0.5 * p.log_curv() + 0.5 * k * (2.0 * E * l).ln()
            - p.a2() * l,
    )
}

/// `50(1+d) a_2 B_{a_2}^{1/2}`, the form the envelope takes inside the proof.
pub fn envelope_t15_proof_form(p: &SurfaceParams) -> LogValue {
    let a2 = p.a2();
    LogValue::from_log(50f64.ln() + p.d.ln_1p() + a2.ln() + 0.5 * log_bound_b(p, a2))
}

/// Gated envelope; needs assumptions 1 to 3.
pub fn envelope_t15(p: &SurfaceParams) -> Result<LogValue> {
    let rep = check_assumptions(p);
    if !rep.first_three() {
        return Err(Error::InapplicableAssumptions(failed_list(&rep, 3)));
    }
    Ok(envelope_t15_formula(p))
}

fn failed_list(rep: &AssumptionReport, upto: usize) -> String {
    let failed: Vec<String> = rep
        .as_array()
        .iter()
        .take(upto)
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| (i + 1).to_string())
        .collect();
    format!("assumption(s) {} fail", failed.join(", "))
}

/// `2 k^{3/4} >= log(eps + lambda/k) / log(R/2)`.
pub fn gradient_condition(p: &SurfaceParams) -> bool {
    2.0 * p.a2() >= p.log_curv() / (-p.big_l())
}

/// The gradient envelope
/// `(1 + d/k^2) 25 sqrt 2 t k^{-(k-10)/8} (eps + lambda/k)^{-1/2} (2 e L)^{k/2} (R/2)^{k^{3/4}}`
/// without any gate.
pub fn envelope_t16_formula(p: &SurfaceParams, t: f64) -> LogValue {
    let k = p.kf();
    let l = p.big_l();
    LogValue::from_log(
        (p.d / (k * k)).ln_1p() + (25.0 * 2f64.sqrt()).ln() + t.ln() - (k - 10.0) / 8.0 * k.ln()
            - 0.5 * p.log_curv()
            + 0.5 * k * (2.0 * E * l).ln()
            - p.a2() * l,
    )
}

/// Gated gradient envelope; needs assumptions 1 to 3, the extra radius
/// condition, and `t >= wk_threshold(k)`.
pub fn envelope_t16(p: &SurfaceParams, t: f64) -> Result<LogValue> {
    let rep = check_assumptions(p);
    if !rep.first_three() {
        return Err(Error::InapplicableAssumptions(failed_list(&rep, 3)));
    }
    if !gradient_condition(p) {
        return Err(Error::InapplicableAssumptions(
            "2 k^{3/4} < log(eps + lambda/k) / log(R/2)".into(),
        ));
    }
    if !(t.is_finite() && t >= wk_threshold(p.k)) {
        return Err(Error::InapplicableAssumptions(format!(
            "t = {t} is below the region threshold {}",
            wk_threshold(p.k)
        )));
    }
    Ok(envelope_t16_formula(p, t))
}

/// Upper limits `(d/v, (2 - 2g - N)/v)` for `epsilon` and `lambda` on a
/// surface of volume `2 pi v`, genus `g` with `N` punctures. Advisory only.
pub fn geometric_limits(d: f64, v: f64, genus: u64, punctures: u64) -> (f64, f64) {
    (d / v, (2.0 - 2.0 * genus as f64 - punctures as f64) / v)
}

/// Envelope entry for reports: a log value, or the reason it is unavailable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeEntry {
    pub available: bool,
    pub log_value: Option<f64>,
    pub value: Option<f64>,
    pub reason: Option<String>,
}

impl EnvelopeEntry {
    fn from_result(r: Result<LogValue>, reason_tag: impl Fn(&Error) -> String) -> Self {
        match r {
            Ok(v) => EnvelopeEntry {
                available: true,
                log_value: Some(v.ln()),
                value: Some(v.to_real()),
                reason: None,
            },
            Err(e) => EnvelopeEntry {
                available: false,
                log_value: None,
                value: None,
                reason: Some(reason_tag(&e)),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceReport {
    pub params: SurfaceParams,
    pub assumptions: AssumptionReport,
    pub envelope_t15: EnvelopeEntry,
    pub envelope_t16: Option<EnvelopeEntry>,
    pub dominance_check: DominanceReport,
    pub wk_threshold: f64,
}

pub fn surface_report(p: &SurfaceParams, t: Option<f64>) -> SurfaceReport {
    let t15 = EnvelopeEntry::from_result(envelope_t15(p), |e| e.to_string());
    let t16 = t.map(|t| {
        let below = !(t >= wk_threshold(p.k));
        EnvelopeEntry::from_result(envelope_t16(p, t), |e| {
            if below && check_assumptions(p).first_three() && gradient_condition(p) {
                "out_of_region".to_string()
            } else {
                e.to_string()
            }
        })
    });
    SurfaceReport {
        params: *p,
        assumptions: check_assumptions(p),
        envelope_t15: t15,
        envelope_t16: t16,
        dominance_check: dominance_check(p),
        wk_threshold: wk_threshold(p.k),
    }
}
