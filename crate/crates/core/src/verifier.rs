//! Grid sweeps that check every inequality of the kernel theorems and their
//! supporting lemmas, with JSON and CSV reports.
//!
//! A check is `passed` when the inequality holds after every certified
//! evaluation error is applied in its favour (so a failure is a genuine
//! counterexample), and `certified` when it still holds with every error
//! applied against it. `margin` is the favourable log-domain slack.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ln_2pi, log_add, stirling_remainder, Enclosure, LogValue, EPS};
use crate::oracle::{rho, KernelPoint, SeriesConfig};
use crate::regimes::inside::{
    convex_core, inside_admissible, log_e_a, log_minimum_bound, log_two_term, min_scaled_second_difference,
    probe_point,
};
use crate::regimes::neck::{neck_admissible, reference_profile};
use crate::regimes::{
    f_b_excluding, inside_rest, lattice_excess, lattice_s, locate_interior_minimum, outside_envelope_log,
    rho_neck_bounds, rho_outside,
};

#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TheoremId {
    T1_1a,
    T1_1b,
    Cor_Stirling,
    T1_2,
    T1_3,
    Cor_Limit,
    T1_4_lattice,
    T1_4_interior,
    L_f1,
    L_fb,
    Poisson_identity,
}

impl TheoremId {
    pub const ALL: [TheoremId; 11] = [
        TheoremId::T1_1a,
        TheoremId::T1_1b,
        TheoremId::Cor_Stirling,
        TheoremId::T1_2,
        TheoremId::T1_3,
        TheoremId::Cor_Limit,
        TheoremId::T1_4_lattice,
        TheoremId::T1_4_interior,
        TheoremId::L_f1,
        TheoremId::L_fb,
        TheoremId::Poisson_identity,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremId::T1_1a => "T1_1a",
            TheoremId::T1_1b => "T1_1b",
            TheoremId::Cor_Stirling => "Cor_Stirling",
            TheoremId::T1_2 => "T1_2",
            TheoremId::T1_3 => "T1_3",
            TheoremId::Cor_Limit => "Cor_Limit",
            TheoremId::T1_4_lattice => "T1_4_lattice",
            TheoremId::T1_4_interior => "T1_4_interior",
            TheoremId::L_f1 => "L_f1",
            TheoremId::L_fb => "L_fb",
            TheoremId::Poisson_identity => "Poisson_identity",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown theorem id '{s}'")))
    }
}

/// Serializes non-finite floats as the strings `inf`, `-inf` and `nan` so that
/// reports round-trip through JSON.
mod float_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad float '{other}'"))),
            },
        }
    }
}

/// Where a check was evaluated: `k` (shifted convention), `t`, and whichever regime
/// parameters apply.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckPoint {
    pub k: u64,
    #[serde(with = "float_repr")]
    pub t: f64,
    pub a: Option<u64>,
    pub b: Option<u64>,
    pub u: Option<f64>,
}

impl CheckPoint {
    fn new(k: u64, t: f64) -> Self {
        CheckPoint {
            k,
            t,
            a: None,
            b: None,
            u: None,
        }
    }

    fn with_a(mut self, a: u64) -> Self {
        self.a = Some(a);
        self
    }

    fn with_b(mut self, b: u64) -> Self {
        self.b = Some(b);
        self
    }

    fn with_u(mut self, u: f64) -> Self {
        self.u = Some(u);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub theorem_id: TheoremId,
    pub point: CheckPoint,
    pub detail: String,
    #[serde(with = "float_repr")]
    pub lhs: f64,
    #[serde(with = "float_repr")]
    pub rhs: f64,
    pub passed: bool,
    pub certified: bool,
    #[serde(with = "float_repr")]
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub theorem_id: TheoremId,
    pub point: CheckPoint,
    pub reason: String,
}

/// Informational findings that do not affect pass/fail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub theorem_id: TheoremId,
    pub point: CheckPoint,
    pub name: String,
    #[serde(with = "float_repr")]
    pub value: f64,
    pub holds: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accounting {
    pub theorem_id: TheoremId,
    pub grid_points: usize,
    pub admissible: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub k_list: Vec<u64>,
    pub points_per_interval: usize,
    pub seed: u64,
}

impl GridSpec {
    pub fn new(k_list: Vec<u64>, points_per_interval: usize, seed: u64) -> Result<Self> {
        if k_list.is_empty() || points_per_interval == 0 {
            return Err(Error::InvalidArgument("grid needs at least one k and one point per interval".into()));
        }
        if let Some(k) = k_list.iter().find(|k| **k < 3) {
            return Err(Error::InvalidArgument(format!("k must be at least 3, got {k}")));
        }
        Ok(GridSpec {
            k_list,
            points_per_interval,
            seed,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<TheoremCheck>,
    pub skips: Vec<SkipRecord>,
    pub accounting: Vec<Accounting>,
    pub diagnostics: Vec<Diagnostic>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TheoremCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn merge(&mut self, other: VerifyReport) {
        self.checks.extend(other.checks);
        self.skips.extend(other.skips);
        self.accounting.extend(other.accounting);
        self.diagnostics.extend(other.diagnostics);
    }

    /// Sorts every list by theorem, `k`, `t`, then detail.
    pub fn normalize(&mut self) {
        fn key(id: TheoremId, p: &CheckPoint) -> (TheoremId, u64, u64, u64, u64) {
            (id, p.k, p.t.to_bits(), p.a.unwrap_or(0), p.b.unwrap_or(0))
        }
        let by_point = |a: (TheoremId, &CheckPoint), b: (TheoremId, &CheckPoint)| {
            let (ka, kb) = (key(a.0, a.1), key(b.0, b.1));
            ka.0.cmp(&kb.0)
                .then(ka.1.cmp(&kb.1))
                .then(a.1.t.total_cmp(&b.1.t))
                .then(ka.3.cmp(&kb.3))
                .then(ka.4.cmp(&kb.4))
        };
        self.checks
            .sort_by(|a, b| by_point((a.theorem_id, &a.point), (b.theorem_id, &b.point)).then(a.detail.cmp(&b.detail)));
        self.skips
            .sort_by(|a, b| by_point((a.theorem_id, &a.point), (b.theorem_id, &b.point)).then(a.reason.cmp(&b.reason)));
        self.diagnostics
            .sort_by(|a, b| by_point((a.theorem_id, &a.point), (b.theorem_id, &b.point)).then(a.name.cmp(&b.name)));
        self.accounting.sort_by_key(|a| a.theorem_id);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("bad report JSON: {e}")))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("theorem_id,k,t,a,b,u,detail,lhs,rhs,margin,passed,certified\n");
        let opt_u = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{:.16e},{},{},{},{},{:.16e},{:.16e},{:.16e},{},{}\n",
                c.theorem_id,
                c.point.k,
                c.point.t,
                opt_u(c.point.a),
                opt_u(c.point.b),
                c.point.u.map(|u| format!("{u:.16e}")).unwrap_or_default(),
                c.detail,
                c.lhs,
                c.rhs,
                c.margin,
                c.passed,
                c.certified
            ));
        }
        out
    }
}

/// Collects the outcome of one theorem sweep.
struct Sweep {
    id: TheoremId,
    report: VerifyReport,
    grid_points: usize,
    admissible: usize,
}

impl Sweep {
    fn new(id: TheoremId) -> Self {
        Sweep {
            id,
            report: VerifyReport::default(),
            grid_points: 0,
            admissible: 0,
        }
    }

    fn skip(&mut self, point: CheckPoint, reason: impl Into<String>) {
        self.grid_points += 1;
        self.report.skips.push(SkipRecord {
            theorem_id: self.id,
            point,
            reason: reason.into(),
        });
    }

    fn admit(&mut self) {
        self.grid_points += 1;
        self.admissible += 1;
    }

    /// Records `lhs <= rhs` where the two sides are known only up to the
    /// given log-domain half-widths.
    fn check_le(&mut self, point: CheckPoint, detail: &str, lhs: f64, lhs_err: f64, rhs: f64, rhs_err: f64) {
        let slack = rhs - lhs;
        let width = lhs_err + rhs_err;
        let margin = slack + width;
        self.report.checks.push(TheoremCheck {
            theorem_id: self.id,
            point,
            detail: detail.to_string(),
            lhs,
            rhs,
            passed: margin >= 0.0 || (lhs == f64::NEG_INFINITY),
            certified: slack - width >= 0.0 || (lhs == f64::NEG_INFINITY),
            margin,
        });
    }

    /// Records `x <= exp(rhs)` for a nonnegative `x` known to within `x_err`.
    fn check_abs_le(&mut self, point: CheckPoint, detail: &str, x: f64, x_err: f64, rhs: f64, bound_err: f64) {
        let lo = (x - x_err).max(0.0);
        let hi = x + x_err;
        self.report.checks.push(TheoremCheck {
            theorem_id: self.id,
            point,
            detail: detail.to_string(),
            lhs: x.ln(),
            rhs,
            passed: lo.ln() <= rhs + bound_err,
            certified: hi.ln() <= rhs - bound_err,
            margin: rhs + bound_err - lo.ln(),
        });
    }

    fn diag(&mut self, point: CheckPoint, name: &str, value: f64, holds: Option<bool>) {
        self.report.diagnostics.push(Diagnostic {
            theorem_id: self.id,
            point,
            name: name.to_string(),
            value,
            holds,
        });
    }

    fn finish(mut self) -> VerifyReport {
        self.report.accounting.push(Accounting {
            theorem_id: self.id,
            grid_points: self.grid_points,
            admissible: self.admissible,
            skipped: self.grid_points - self.admissible,
        });
        self.report
    }
}

/// Log-domain half-width of an enclosure.
fn log_width(e: &Enclosure) -> f64 {
    if e.rel_err >= 1.0 {
        f64::INFINITY
    } else {
        -(-e.rel_err).ln_1p()
    }
}

fn rng_for(seed: u64, id: TheoremId, k: u64, param: u64) -> ChaCha8Rng {
    let mix = seed
        ^ (id as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ k.wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ param.wrapping_mul(0x1656_67B1_9E37_79F9);
    ChaCha8Rng::seed_from_u64(mix)
}

/// Seeded uniform draws strictly inside `(lo, hi)`, sorted.
fn interior_points(rng: &mut ChaCha8Rng, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            let x: f64 = rng.gen_range(0.0..1.0);
            lo + (hi - lo) * (0.001 + 0.998 * x)
        })
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Seeded log-uniform draws in `[lo, hi]`, sorted.
fn log_points(rng: &mut ChaCha8Rng, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            let x: f64 = rng.gen_range(0.0..1.0);
            (lo.ln() + (hi.ln() - lo.ln()) * x).exp()
        })
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

fn lattice_b_grid(k: u64) -> u64 {
    ((k as f64 / LN_2).sqrt().ceil() as u64) + 1
}

fn neck_b_grid(k: u64) -> Vec<u64> {
    let kf = k as f64;
    let s = kf.sqrt();
    let top = (s * kf.ln()).floor() as u64;
    let mut v = vec![
        4,
        (s.floor() as u64).saturating_sub(1),
        s.floor() as u64,
        s.floor() as u64 + 1,
        (3.16 * s).floor() as u64,
        top,
        top + 1,
    ];
    v.sort_unstable();
    v.dedup();
    v.retain(|b| *b >= 1);
    v
}

/// Oracle value of the shifted kernel `rho_{k+1}(t)`.
fn shifted_oracle(k: u64, t: f64, cfg: &SeriesConfig) -> Result<Enclosure> {
    rho(KernelPoint::new(k + 1, t)?, cfg)
}

fn verify_t1_1a(grid: &GridSpec, cfg: &SeriesConfig) -> Result<VerifyReport> {
    let mut sw = Sweep::new(TheoremId::T1_1a);
    for &k in &grid.k_list {
        let kf = k as f64;
        let mut ts: Vec<f64> = [0.25, 0.5, 1.0, 1.5, 2.0].iter().map(|s| s * kf).collect();
        let mut rng = rng_for(grid.seed, sw.id, k, 0);
        ts.extend(interior_points(&mut rng, kf, 3.0 * kf, grid.points_per_interval));
        for t in ts {
            let p = CheckPoint::new(k, t).with_b(1);
            // eps_1 = sum_{a >= 2} a^k e^{-(a-1) t}
            let eps1 = crate::oracle::power_series_anchored(k, t, cfg, &[1], |q| {
                let q = q as f64;
                let l = kf * q.ln() - (q - 1.0) * t;
                (l, 4.0 * EPS * (kf * q.ln() + q * t))
            })?;
            let bound = (kf + 1.0) * LN_2 - t;
            if t < kf {
                sw.skip(p, "t < k: leading-term bound needs |z| <= e^{-k/2}");
                sw.diag(p, "printed_domain_bound", eps1.ln() - bound, Some(eps1.ln() <= bound));
                continue;
            }
            sw.admit();
            sw.check_le(p, "eps1_upper", eps1.ln(), log_width(&eps1), bound, 4.0 * EPS * (kf + t));
        }
    }
    Ok(sw.finish())
}

fn verify_t1_1b(grid: &GridSpec, cfg: &SeriesConfig) -> Result<VerifyReport> {
    let mut sw = Sweep::new(TheoremId::T1_1b);
    for &k in &grid.k_list {
        let kf = k as f64;
        for b in 1..=lattice_b_grid(k) {
            let bf = b as f64;
            let t = kf / bf;
            let p = CheckPoint::new(k, t).with_b(b);
            if b < 2 {
                sw.skip(p, "b < 2");
                continue;
            }
            if kf / (bf * (bf + 1.0)) < LN_2 {
                sw.skip(p, "k/(b(b+1)) < log 2");
                continue;
            }
            sw.admit();
            let ex = lattice_excess(k, b, cfg)?;
            let s = ex.s.ln();
            let s_err = 8.0 * EPS * (kf + 1.0);
            // excess = S (1 + rest/S); S < excess iff rest > 0.
            let rest_ratio = ex.rest.ln() - s;
            let rest_w = log_width(&ex.rest) + s_err;
            let lower_gap = if ex.rest.value.is_zero {
                0.0
            } else {
                rest_ratio.exp().ln_1p()
            };
            sw.report.checks.push(TheoremCheck {
                theorem_id: sw.id,
                point: p,
                detail: "lower".into(),
                lhs: s,
                rhs: s + lower_gap,
                passed: !ex.rest.value.is_zero,
                certified: !ex.rest.value.is_zero && rest_w.is_finite(),
                margin: lower_gap,
            });
            // excess < 2S iff log(1 + rest/S) < log 2.
            let gap = if ex.rest.value.is_zero { 0.0 } else { rest_ratio.exp().ln_1p() };
            let gap_hi = if ex.rest.value.is_zero { 0.0 } else { (rest_ratio + rest_w).exp().ln_1p() };
            let gap_lo = if ex.rest.value.is_zero { 0.0 } else { (rest_ratio - rest_w).exp().ln_1p() };
            sw.report.checks.push(TheoremCheck {
                theorem_id: sw.id,
                point: p,
                detail: "upper".into(),
                lhs: s + gap,
                rhs: s + LN_2,
                passed: gap_lo <= LN_2,
                certified: gap_hi <= LN_2,
                margin: LN_2 - gap_lo,
            });
            // Coarse cross-check of the exact factorization against the oracle.
            let lat = crate::regimes::rho_lattice(k, b)?;
            let truth = shifted_oracle(k, t, cfg)?;
            let predicted = lat.value.mul(&Enclosure::new(
                LogValue::from_log(ex.excess.ln().exp().ln_1p()),
                ex.excess.rel_err,
            ));
            let dev = (truth.ln() - predicted.ln()).abs();
            sw.diag(p, "oracle_factorization_log_deviation", dev, Some(dev <= truth.rel_err + predicted.rel_err + 1e-12));
        }
    }
    Ok(sw.finish())
}

fn verify_cor_stirling(grid: &GridSpec, cfg: &SeriesConfig) -> Result<VerifyReport> {
    let mut sw = Sweep::new(TheoremId::Cor_Stirling);
    for &k in &grid.k_list {
        let kf = k as f64;
        for b in 1..=lattice_b_grid(k) {
            let bf = b as f64;
            let t = kf / bf;
            let p = CheckPoint::new(k, t).with_b(b);
            if k < 79 {
                sw.skip(p, "k < 79");
                continue;
            }
            if kf / (2.0 * bf * bf) - kf / (3.0 * bf * bf * bf) < 3.0 * kf.ln() {
                sw.skip(p, "k/(2b^2) - k/(3b^3) < 3 log k");
                continue;
            }
            sw.admit();
            let ex = lattice_excess(k, b, cfg)?;
            let (d, d_err) = stirling_remainder(k);
            // rho / (k^{3/2} / (b (2pi)^{3/2})) = e^{-d(k)} (1 + excess)
            let excess = ex.excess.to_real();
            let lhs = -d + excess.ln_1p();
            let lhs_err = d_err + excess * ex.excess.rel_err + 4.0 * EPS;
            let bound = 9.0 / (kf * kf);
            let rhs = (1.0 / (12.0 * kf) + bound).ln_1p();
            sw.check_le(p, "eps_b_upper", lhs, lhs_err, rhs, 4.0 * EPS);
            let eps_b = (-d).exp_m1() + (-d).exp() * excess - 1.0 / (12.0 * kf);
            sw.diag(p, "eps_b", eps_b, None);
            sw.diag(p, "two_sided_as_printed", eps_b.abs() * kf * kf, Some(eps_b.abs() < bound));
            let corrected = (-d).exp_m1() + (-d).exp() * excess + 1.0 / (12.0 * kf);
            sw.diag(p, "two_sided_sign_corrected", corrected.abs() * kf * kf, Some(corrected.abs() < bound));
        }
    }
    Ok(sw.finish())
}

fn verify_t1_2(grid: &GridSpec, cfg: &SeriesConfig) -> Result<VerifyReport> {
    let mut sw = Sweep::new(TheoremId::T1_2);
    for &k in &grid.k_list {
        let kf = k as f64;
        for a in 1..=3u64 {
            let af = a as f64;
            let (lo, hi) = (kf / (af + 1.0), kf / af);
            let mut rng = rng_for(grid.seed, sw.id, k, a);
            let ts = interior_points(&mut rng, lo, hi, grid.points_per_interval);
            if !inside_admissible(k, a) {
                let reason = if k < 55 { "k < 55" } else { "a > sqrt(k)/log k - 1" };
                for t in ts {
                    sw.skip(CheckPoint::new(k, t).with_a(a), reason);
                }
                continue;
            }
            let abs_env = log_add(LogValue::from_log(log_e_a(k, a)), LogValue::from_log(log_e_a(k, a + 1))).ln();
            for t in ts {
                let p = CheckPoint::new(k, t).with_a(a);
                sw.admit();
                let rest = inside_rest(k, t, a, cfg)?;
                sw.check_le(p, "envelope", rest.ln(), log_width(&rest), abs_env, 8.0 * EPS * kf);
            }

            let (t_min, _) = match locate_interior_minimum(k, a) {
                Ok(v) => v,
                Err(e) => {
                    sw.grid_points += 1;
                    sw.report.checks.push(TheoremCheck {
                        theorem_id: sw.id,
                        point: CheckPoint::new(k, f64::NAN).with_a(a),
                        detail: format!("minimizer: {e}"),
                        lhs: f64::NAN,
                        rhs: f64::NAN,
                        passed: false,
                        certified: false,
                        margin: f64::NAN,
                    });
                    continue;
                }
            };
            let p = CheckPoint::new(k, t_min).with_a(a);
            sw.admit();
            let edge = (kf + 2.0) / (af + 1.0);
            let tol = 1e-8 * hi;
            sw.check_le(p, "minimizer_above_(k+2)/(a+1)", edge.ln(), 0.0, t_min.ln(), tol / t_min);
            sw.check_le(p, "minimizer_below_k/a", t_min.ln(), tol / t_min, hi.ln(), 0.0);
            let (at_min, e_min) = log_two_term(k, t_min, a);
            let bound = log_minimum_bound(k, a, 17.0);
            sw.check_le(p, "minimum_bound_17", at_min, e_min, bound, 4.0 * EPS * kf);

            let s_a = probe_point(k, a);
            let ps = CheckPoint::new(k, s_a).with_a(a);
            sw.admit();
            let (at_probe, e_probe) = log_two_term(k, s_a, a);
            sw.check_le(ps, "probe_bound_17", at_probe, e_probe, bound, 4.0 * EPS * kf);
            let base = (1.0 / af + 1.0 / (af + 1.0)).ln();
            let c_eff = kf / (af * af * (base - at_probe));
            sw.diag(ps, "effective_constant", c_eff, None);
            for c in [16.0, 17.0, 66.0] {
                sw.diag(ps, &format!("constant_{c}_holds"), c, Some(c >= c_eff));
            }
            let (clo, chi) = convex_core(k, a);
            let core = min_scaled_second_difference(k, a, clo, chi, 100);
            let full = min_scaled_second_difference(k, a, lo, hi, 100);
            sw.diag(p, "convex_on_core", core, Some(core > 0.0));
            sw.diag(p, "convex_on_full_interval", full, Some(full > 0.0));
        }
    }
    Ok(sw.finish())
}

fn verify_t1_3(grid: &GridSpec, cfg: &SeriesConfig) -> Result<VerifyReport> {
    let mut sw = Sweep::new(TheoremId::T1_3);
    for &k in &grid.k_list {
        let kf = k as f64;
        let mut ts = vec![0.01, 0.1, 1.0, 2.0 * PI / std::f64::consts::E];
        let mut rng = rng_for(grid.seed, sw.id, k, 0);
        ts.extend(log_points(&mut rng, 1e-3, kf, grid.points_per_interval));
        for t in ts {
            let p = CheckPoint::new(k, t);
            sw.admit();
            let truth = shifted_oracle(k, t, cfg)?;
            let scaled = truth.ln() + ln_2pi() - kf.ln();
            let dev = scaled.exp_m1().abs();
            let err = truth.rel_err * (1.0 + dev) + 4.0 * EPS * (1.0 + scaled.abs());
            let env = outside_envelope_log(k, t);
            let env_err = 8.0 * EPS * (kf * (2.0 * PI / t).powi(2).ln_1p() + 1.0);
            sw.check_abs_le(p, "deviation", dev, err, env, env_err);
            if 2.0 * PI / t >= std::f64::consts::E {
                sw.check_le(p, "envelope_below_exp_minus_k", env, env_err, -kf, 0.0);
            }
        }
    }
    Ok(sw.finish())
}

fn verify_cor_limit(grid: &GridSpec, cfg: &SeriesConfig) -> Result<VerifyReport> {
    let mut sw = Sweep::new(TheoremId::Cor_Limit);
    let t = 1e-6;
    for &k in &grid.k_list {
        let kf = k as f64;
        let p = CheckPoint::new(k, t);
        sw.admit();
        let truth = shifted_oracle(k, t, cfg)?;
        let x = truth.ln() + ln_2pi() - kf.ln();
        let dev = x.exp_m1().abs();
        let err = truth.rel_err + 4.0 * EPS;
        sw.check_abs_le(p, "limit_within_1e-3", dev, err * (1.0 + dev), 1e-3f64.ln(), 0.0);
        let literal = rho(KernelPoint::new(k, t)?, cfg)?;
        let ldev = (literal.ln() + ln_2pi() - kf.ln()).exp_m1().abs();
        sw.diag(p, "unshifted_kernel_deviation", ldev, Some(ldev <= 1e-3));
    }
    Ok(sw.finish())
}

fn verify_t1_4(grid: &GridSpec, cfg: &SeriesConfig, interior: bool) -> Result<VerifyReport> {
    let id = if interior {
        TheoremId::T1_4_interior
    } else {
        TheoremId::T1_4_lattice
    };
    let mut sw = Sweep::new(id);
    for &k in &grid.k_list {
        let kf = k as f64;
        for b in neck_b_grid(k) {
            let bf = b as f64;
            let ts = if interior {
                let mut rng = rng_for(grid.seed, id, k, b);
                interior_points(&mut rng, kf / (bf + 1.0), kf / bf, grid.points_per_interval)
            } else {
                vec![kf / bf]
            };
            for t in ts {
                let p = CheckPoint::new(k, t).with_b(b).with_u(1.0 - t * bf / kf);
                if !neck_admissible(k, b) {
                    sw.skip(p, "b outside (3, sqrt(k) log k]");
                    continue;
                }
                sw.admit();
                let nb = rho_neck_bounds(k, t, b, cfg)?;
                let truth = shifted_oracle(k, t, cfg)?;
                sw.check_le(p, "upper", truth.ln(), log_width(&truth), nb.upper.ln(), log_width(&nb.upper));
                if nb.lower_vacuous {
                    sw.diag(p, "lower_bound_vacuous", 0.0, Some(true));
                } else {
                    sw.check_le(p, "lower", nb.lower.ln(), log_width(&nb.lower), truth.ln(), log_width(&truth));
                }
                if interior {
                    let literal_upper = nb.upper.ln() + 0.5 * kf.ln();
                    sw.diag(p, "upper_slack_with_tk_prefactor", literal_upper - truth.ln(), Some(literal_upper >= truth.ln()));
                }
            }
        }
    }
    Ok(sw.finish())
}

fn verify_l_f1(grid: &GridSpec, cfg: &SeriesConfig) -> Result<VerifyReport> {
    let mut sw = Sweep::new(TheoremId::L_f1);
    for &k in &grid.k_list {
        let kf = k as f64;
        let p = CheckPoint::new(k, kf).with_b(1);
        sw.admit();
        // f_1(k) - 1 = 2^k e^{-k} + rest; bound = 2^k e^{-k} / (1 - e^{-k/2}).
        let rest = f_b_excluding(k, kf, 1, &[0, 1], cfg)?;
        let slack = kf * LN_2 - kf - kf / 2.0 - (-(-kf / 2.0).exp()).ln_1p();
        sw.check_le(p, "upper", rest.ln(), log_width(&rest), slack, 8.0 * EPS * kf);
        sw.check_le(p, "positive", f64::NEG_INFINITY, 0.0, kf * LN_2 - kf, 0.0);
    }
    Ok(sw.finish())
}

fn verify_l_fb(grid: &GridSpec, cfg: &SeriesConfig) -> Result<VerifyReport> {
    let mut sw = Sweep::new(TheoremId::L_fb);
    for &k in &grid.k_list {
        let kf = k as f64;
        for b in 1..=lattice_b_grid(k) {
            let bf = b as f64;
            let t = kf / bf;
            let p = CheckPoint::new(k, t).with_b(b);
            if b < 2 {
                sw.skip(p, "b < 2");
                continue;
            }
            sw.admit();
            // f_b(k/b) - 1 = S + rest; bound = S / (1 - e^{-q}) = S + S e^{-q}/(1 - e^{-q}).
            let rest = f_b_excluding(k, t, b, &[-1, 0, 1], cfg)?;
            let s = lattice_s(k, b).ln();
            let slack = |q: f64| s - q - (-(-q).exp()).ln_1p();
            let q = kf / (bf * (bf + 1.0));
            sw.check_le(p, "upper_b(b+1)", rest.ln(), log_width(&rest), slack(q), 8.0 * EPS * kf);
            let q_printed = kf / (bf * (bf - 1.0));
            let printed = slack(q_printed);
            sw.diag(p, "printed_denominator_b(b-1)", printed - rest.ln(), Some(rest.ln_lower() <= printed));
        }
    }
    Ok(sw.finish())
}

fn verify_poisson(grid: &GridSpec, cfg: &SeriesConfig) -> Result<VerifyReport> {
    let mut sw = Sweep::new(TheoremId::Poisson_identity);
    for &k in &grid.k_list {
        let kf = k as f64;
        let mut ts = vec![0.1, 1.0, 5.0];
        let mut rng = rng_for(grid.seed, sw.id, k, 0);
        ts.extend(log_points(&mut rng, 0.01, kf / 4.0, grid.points_per_interval));
        for t in ts {
            let p = CheckPoint::new(k, t);
            if t > kf {
                sw.skip(p, "t > k");
                continue;
            }
            let out = match rho_outside(k, t, cfg) {
                Ok(r) => r.value,
                Err(Error::CancellationLoss { ratio, .. }) => {
                    sw.skip(p, format!("Poisson cancellation ratio {ratio:.3e}"));
                    continue;
                }
                Err(e) => return Err(e),
            };
            sw.admit();
            let truth = shifted_oracle(k, t, cfg)?;
            let w = log_width(&out) + log_width(&truth);
            let diff = (out.ln() - truth.ln()).abs();
            sw.report.checks.push(TheoremCheck {
                theorem_id: sw.id,
                point: p,
                detail: "outside_vs_oracle".into(),
                lhs: out.ln(),
                rhs: truth.ln(),
                passed: diff <= w,
                certified: diff <= w,
                margin: w - diff,
            });
        }
    }
    Ok(sw.finish())
}

/// Runs one theorem over the grid.
pub fn verify_theorem(id: TheoremId, grid: &GridSpec, cfg: &SeriesConfig) -> Result<VerifyReport> {
    let mut r = match id {
        TheoremId::T1_1a => verify_t1_1a(grid, cfg),
        TheoremId::T1_1b => verify_t1_1b(grid, cfg),
        TheoremId::Cor_Stirling => verify_cor_stirling(grid, cfg),
        TheoremId::T1_2 => verify_t1_2(grid, cfg),
        TheoremId::T1_3 => verify_t1_3(grid, cfg),
        TheoremId::Cor_Limit => verify_cor_limit(grid, cfg),
        TheoremId::T1_4_lattice => verify_t1_4(grid, cfg, false),
        TheoremId::T1_4_interior => verify_t1_4(grid, cfg, true),
        TheoremId::L_f1 => verify_l_f1(grid, cfg),
        TheoremId::L_fb => verify_l_fb(grid, cfg),
        TheoremId::Poisson_identity => verify_poisson(grid, cfg),
    }?;
    r.normalize();
    Ok(r)
}

/// Runs every theorem over the grid.
pub fn verify_all(grid: &GridSpec, cfg: &SeriesConfig) -> Result<VerifyReport> {
    let mut total = VerifyReport::default();
    for id in TheoremId::ALL {
        total.merge(verify_theorem(id, grid, cfg)?);
    }
    total.normalize();
    Ok(total)
}

/// One row of the neck profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeckProfileRow {
    pub u: f64,
    pub t: f64,
    pub lower: f64,
    pub upper: f64,
    pub oracle: f64,
    pub lower_vacuous: bool,
}

/// Samples `u in [0, 1/b]` evenly with `t = k (1 - u) / b`. Points with
/// `t <= k/(b+1)` belong to the next lattice interval and use `b + 1`.
pub fn neck_profile(k: u64, b: u64, samples: usize, cfg: &SeriesConfig) -> Result<Vec<NeckProfileRow>> {
    if !neck_admissible(k, b) || !neck_admissible(k, b + 1) {
        return Err(Error::RegimeOutOfRange(format!(
            "neck profile needs 3 < b and b + 1 <= sqrt(k) log k (k = {k}, b = {b})"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let kf = k as f64;
    let bf = b as f64;
    let mut rows = Vec::with_capacity(samples);
    for i in 0..samples {
        let u = i as f64 / (samples - 1) as f64 / bf;
        let t = if i == 0 { kf / bf } else { kf * (1.0 - u) / bf };
        let bb = if t <= kf / (bf + 1.0) * (1.0 + crate::regimes::LATTICE_TOL) { b + 1 } else { b };
        let t = if bb == b + 1 && (t * (bf + 1.0) / kf - 1.0).abs() <= crate::regimes::LATTICE_TOL {
            kf / (bf + 1.0)
        } else {
            t
        };
        let nb = rho_neck_bounds(k, t, bb, cfg)?;
        let truth = shifted_oracle(k, t, cfg)?;
        rows.push(NeckProfileRow {
            u,
            t,
            lower: nb.lower.to_real(),
            upper: nb.upper.to_real(),
            oracle: truth.to_real(),
            lower_vacuous: nb.lower_vacuous,
        });
    }
    Ok(rows)
}

/// The profile `h(x) = sum_c exp(-(c - x)^2 / 2)` on `[0, 4]`.
pub fn reference_profile_table(samples: usize, cfg: &SeriesConfig) -> Result<Vec<(f64, f64)>> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    (0..samples)
        .map(|i| {
            let x = 4.0 * i as f64 / (samples - 1) as f64;
            Ok((x, reference_profile(x, cfg)?.to_real()))
        })
        .collect()
}

/// Per-theorem counts of passed and failed checks.
pub fn summarize(report: &VerifyReport) -> BTreeMap<TheoremId, (usize, usize)> {
    let mut m = BTreeMap::new();
    for c in &report.checks {
        let e = m.entry(c.theorem_id).or_insert((0, 0));
        if c.passed {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    m
}
