use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use bergman_core::oracle::SeriesConfig;
use bergman_core::regimes::{
    evaluate_regime, neck_approx, rho_eval, rho_inside_two_term, rho_lattice_b1, rho_oracle, rho_outside,
    ApproxResult, Regime, LATTICE_TOL,
};
use bergman_core::surface_bounds::{surface_report, SurfaceParams};
use bergman_core::verifier::{
    neck_profile, reference_profile_table, verify_all, verify_theorem, GridSpec, TheoremId,
};
use bergman_core::Error;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_OUT_OF_RANGE: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_USAGE: u8 = 64;
const REL_TOL_ENV: &str = "BERGMAN_REL_TOL";

#[derive(Parser, Debug)]
#[command(name = "bergman", version, about = "Certified Bergman kernel of the punctured Poincare disk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the kernel at one point.
    Eval(EvalArgs),
    /// Evaluate the kernel along a grid of t values.
    Sweep(SweepArgs),
    /// Check the theorem inequalities on a grid.
    Verify(VerifyArgs),
    /// Emit figure data as CSV.
    Figure(FigureArgs),
    /// Assumptions and envelopes for punctured Riemann surfaces.
    Surface(SurfaceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Auto,
    Oracle,
    Inside,
    Lattice,
    Neck,
    Outside,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    k: u64,
    #[arg(long)]
    t: f64,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    method: Method,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    k: u64,
    #[arg(long)]
    t_min: f64,
    #[arg(long)]
    t_max: f64,
    #[arg(long)]
    points: usize,
    #[arg(long)]
    log_spacing: bool,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    method: Method,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Theorem id, or `all`.
    #[arg(long)]
    theorem: String,
    #[arg(long, value_delimiter = ',', required = true)]
    k_list: Vec<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    points: usize,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Profile {
    NeckReference,
    Neck,
}

#[derive(Args, Debug)]
struct FigureArgs {
    #[arg(long, value_enum)]
    profile: Profile,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    b: Option<u64>,
    #[arg(long, default_value_t = 512)]
    samples: usize,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SurfaceArgs {
    #[arg(long)]
    k: u64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long = "R", visible_alias = "r")]
    radius: f64,
    #[arg(long)]
    d: f64,
    #[arg(long)]
    t: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(Error),
    Io(io::Error),
    VerifyFailed(usize),
    AssumptionsFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Io(_) => 1,
            Failure::VerifyFailed(_) | Failure::AssumptionsFailed => EXIT_VERIFY_FAILED,
            Failure::Core(e) => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::TermBudgetExceeded { .. } => EXIT_BUDGET,
        Error::RegimeOutOfRange(_)
        | Error::InapplicableAssumptions(_)
        | Error::SlowConvergence { .. }
        | Error::CancellationLoss { .. } => EXIT_OUT_OF_RANGE,
        Error::ConvexityViolation(_) => 1,
    }
}

/// Flag, then environment, then the built-in default.
fn series_config(flag: Option<f64>) -> Result<SeriesConfig, Failure> {
    let default = SeriesConfig::default();
    let tol = match flag {
        Some(x) => x,
        None => match std::env::var(REL_TOL_ENV) {
            Ok(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("{REL_TOL_ENV}='{s}' is not a number")))?,
            Err(_) => return Ok(default),
        },
    };
    SeriesConfig::new(tol, default.max_terms).map_err(|e| Failure::Usage(e.to_string()))
}

fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum ValueField {
    Number(f64),
    Marker(&'static str),
}

impl ValueField {
    fn from_log(value_log: f64, is_zero: bool) -> Self {
        if is_zero {
            return ValueField::Number(0.0);
        }
        let v = value_log.exp();
        if v.is_infinite() {
            ValueField::Marker("overflow")
        } else if v == 0.0 || v < f64::MIN_POSITIVE {
            ValueField::Marker("underflow")
        } else {
            ValueField::Number(v)
        }
    }

    fn csv(&self) -> String {
        match self {
            ValueField::Number(x) => fmt_real(*x),
            ValueField::Marker(m) => m.to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
struct OutputRecord {
    k: u64,
    t: f64,
    method: String,
    value_log: f64,
    value: ValueField,
    rel_err: f64,
    envelope: f64,
}

impl OutputRecord {
    fn new(k: u64, t: f64, r: &ApproxResult) -> Self {
        OutputRecord {
            k,
            t,
            method: r.regime.to_string(),
            value_log: r.value.ln(),
            value: ValueField::from_log(r.value.ln(), r.value.value.is_zero),
            rel_err: r.value.rel_err,
            envelope: r.envelope,
        }
    }

    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},",
            self.k,
            fmt_real(self.t),
            self.method,
            fmt_real(self.value_log),
            self.value.csv(),
            fmt_real(self.rel_err),
            fmt_real(self.envelope)
        )
    }
}

const RECORD_HEADER: &str = "k,t,method,value_log,value,rel_err,envelope,reason";

fn evaluate(k: u64, t: f64, method: Method, cfg: &SeriesConfig) -> Result<ApproxResult, Error> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be positive and finite, got {t}")));
    }
    let kf = k as f64;
    let ratio = kf / t;
    let on_lattice = ratio.round() >= 1.0 && (t * ratio.round() / kf - 1.0).abs() <= LATTICE_TOL;
    match method {
        Method::Auto => rho_eval(k, t, cfg),
        Method::Oracle => rho_oracle(k, t, cfg),
        Method::Lattice => evaluate_regime(k, t, Regime::Lattice { b: ratio.round().max(1.0) as u64 }, cfg),
        Method::Inside => {
            if t >= kf {
                rho_lattice_b1(k, t)
            } else {
                rho_inside_two_term(k, t, ratio.floor() as u64)
            }
        }
        Method::Neck => {
            let b = if on_lattice { ratio.round() } else { ratio.floor() };
            neck_approx(k, t, b as u64, cfg)
        }
        Method::Outside => rho_outside(k, t, cfg),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), Failure> {
    let cfg = series_config(a.rel_tol)?;
    let r = evaluate(a.k, a.t, a.method, &cfg)?;
    let rec = OutputRecord::new(a.k, a.t, &r);
    let text = if a.json {
        serde_json::to_string_pretty(&rec).expect("record serializes") + "\n"
    } else if a.csv {
        format!("{RECORD_HEADER}\n{}\n", rec.csv_row())
    } else {
        format!(
            "k={} t={} method={} value_log={} value={} rel_err={} envelope={}\n",
            rec.k,
            fmt_real(rec.t),
            rec.method,
            fmt_real(rec.value_log),
            rec.value.csv(),
            fmt_real(rec.rel_err),
            fmt_real(rec.envelope)
        )
    };
    emit(&None, &text)
}

fn sweep_grid(a: &SweepArgs) -> Result<Vec<f64>, Failure> {
    if !(a.t_min > 0.0 && a.t_max >= a.t_min && a.t_max.is_finite()) {
        return Err(Failure::Usage("need 0 < t-min <= t-max".into()));
    }
    if a.points == 0 {
        return Err(Failure::Usage("--points must be positive".into()));
    }
    if a.points == 1 {
        return Ok(vec![a.t_min]);
    }
    let n = (a.points - 1) as f64;
    let mut ts: Vec<f64> = (0..a.points)
        .map(|i| {
            let s = i as f64 / n;
            if a.log_spacing {
                (a.t_min.ln() + s * (a.t_max.ln() - a.t_min.ln())).exp()
            } else {
                a.t_min + s * (a.t_max - a.t_min)
            }
        })
        .collect();
    ts[0] = a.t_min;
    ts[a.points - 1] = a.t_max;
    ts.sort_by(f64::total_cmp);
    Ok(ts)
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let cfg = series_config(a.rel_tol)?;
    if a.k < 3 {
        return Err(Failure::Usage(format!("k must be at least 3, got {}", a.k)));
    }
    let ts = sweep_grid(&a)?;
    let mut text = String::from(RECORD_HEADER);
    text.push('\n');
    for t in ts {
        match evaluate(a.k, t, a.method, &cfg) {
            Ok(r) => text.push_str(&OutputRecord::new(a.k, t, &r).csv_row()),
            Err(e) => {
                let reason = e.to_string().replace([',', '\n'], ";");
                text.push_str(&format!("{},{},error,,,,,{}", a.k, fmt_real(t), reason));
            }
        }
        text.push('\n');
    }
    emit(&a.out, &text)
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Failure> {
    let cfg = series_config(a.rel_tol)?;
    let grid = GridSpec::new(a.k_list, a.points, a.seed).map_err(|e| Failure::Usage(e.to_string()))?;
    let report = if a.theorem.eq_ignore_ascii_case("all") {
        verify_all(&grid, &cfg)?
    } else {
        let id: TheoremId = a.theorem.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
        verify_theorem(id, &grid, &cfg)?
    };
    let text = if a.csv { report.to_csv() } else { report.to_json() + "\n" };
    emit(&a.out, &text)?;
    let failures: Vec<_> = report.failures().collect();
    if failures.is_empty() {
        return Ok(());
    }
    let mut err = io::stderr().lock();
    for c in &failures {
        writeln!(
            err,
            "FAIL {} k={} t={} a={:?} b={:?} {} margin={}",
            c.theorem_id,
            c.point.k,
            fmt_real(c.point.t),
            c.point.a,
            c.point.b,
            c.detail,
            fmt_real(c.margin)
        )?;
    }
    Err(Failure::VerifyFailed(failures.len()))
}

fn cmd_figure(a: FigureArgs) -> Result<(), Failure> {
    let cfg = series_config(a.rel_tol)?;
    let mut text = String::new();
    match a.profile {
        Profile::NeckReference => {
            text.push_str("x,h\n");
            for (x, h) in reference_profile_table(a.samples, &cfg)? {
                text.push_str(&format!("{},{}\n", fmt_real(x), fmt_real(h)));
            }
        }
        Profile::Neck => {
            let (k, b) = match (a.k, a.b) {
                (Some(k), Some(b)) => (k, b),
                _ => return Err(Failure::Usage("--profile neck needs --k and --b".into())),
            };
            text.push_str("u,t,lower,upper,oracle,lower_vacuous\n");
            for r in neck_profile(k, b, a.samples, &cfg)? {
                text.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    fmt_real(r.u),
                    fmt_real(r.t),
                    fmt_real(r.lower),
                    fmt_real(r.upper),
                    fmt_real(r.oracle),
                    r.lower_vacuous
                ));
            }
        }
    }
    emit(&a.out, &text)
}

fn cmd_surface(a: SurfaceArgs) -> Result<(), Failure> {
    let p = SurfaceParams::new(a.k, a.epsilon, a.lambda, a.radius, a.d).map_err(|e| Failure::Usage(e.to_string()))?;
    let report = surface_report(&p, a.t);
    emit(&None, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    if report.assumptions.first_three() {
        Ok(())
    } else {
        Err(Failure::AssumptionsFailed)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = match cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Figure(a) => cmd_figure(a),
        Command::Surface(a) => cmd_surface(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Core(e) => eprintln!("error: {e}"),
                Failure::Io(e) => eprintln!("error: {e}"),
                Failure::VerifyFailed(n) => eprintln!("{n} check(s) failed"),
                Failure::AssumptionsFailed => eprintln!("assumptions 1 to 3 do not all hold"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
