//! Batch front end: oracle spectra, crossing curves, canonical transforms,
//! invariant verification, and confluent hypergeometric evaluation, with
//! deterministic CSV or JSON output.
//!
//! Exit codes: 0 success, 1 invalid input or failed verification,
//! 2 numerical non-convergence.  `RABI_CANONICAL_LOG` ∈ {quiet, info,
//! debug} controls diagnostics on standard error.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rabi_canonical::juddian::{
    baseline_curve_n1, baseline_curve_n2, reconstruct_eigenfunction, solve_terminating,
    subspace_overlap, terminating_equations, validate_point, JuddianError, JuddianPoint,
    NewtonSeed,
};
use rabi_canonical::kummer::{
    bargmann_growth_check, canonical_solution_pair, kummer_1f1, sample_circle_magnitudes, Branch,
    GrowthCheckConfig,
};
use rabi_canonical::oracle::{converged_spectrum_with_cap, OracleError, TruncatedHamiltonian};
use rabi_canonical::rabi::{
    canonical_residual, canonical_system, decoupling_a12, initial_system, RabiParams,
};
use rabi_canonical::{
    recurrence_solve, sweep, verify_canonicalization, Complex64 as C64, TransformSeries,
};
use std::fs;
use std::path::PathBuf;

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Numerical(String),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "rabi-canonical",
    version,
    about = "Rabi spectra, crossing curves, and Birkhoff canonical transforms"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Converged low spectra with parity labels over a (λ, μ) grid
    Spectrum(SpectrumArgs),
    /// Validated terminating points of a crossing curve over a μ range
    Juddian(JuddianArgs),
    /// Canonical transform coefficients at one parameter point
    Canonicalize(CanonicalizeArgs),
    /// Invariant verification battery, whole-pipeline or per point
    Verify(VerifyArgs),
    /// Confluent hypergeometric function of the first kind
    Kummer(KummerArgs),
}

#[derive(Copy, Clone, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct OutputOpts {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write to a file instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads for grid points; 0 keeps the default pool
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct SpectrumArgs {
    /// λ value or start:stop:step range
    #[arg(long)]
    lambda: String,
    /// μ value or start:stop:step range
    #[arg(long)]
    mu: String,
    /// Number of low levels per grid point
    #[arg(long, default_value_t = 6)]
    levels: usize,
    /// Convergence tolerance on the target levels
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Truncation ceiling for the cutoff doubling
    #[arg(long, default_value_t = 4096)]
    cutoff_max: usize,
    #[command(flatten)]
    out: OutputOpts,
}

#[derive(Args)]
struct JuddianArgs {
    /// Termination order of the crossing curve
    #[arg(long)]
    n: usize,
    /// μ value or start:stop:step range
    #[arg(long)]
    mu: String,
    /// Largest oracle gap accepted as a crossing
    #[arg(long, default_value_t = 1e-6)]
    gap_tol: f64,
    #[command(flatten)]
    out: OutputOpts,
}

#[derive(Args)]
struct CanonicalizeArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    energy: f64,
    /// Free transform entry a₁₂⁽¹⁾; default decouples the canonical system
    #[arg(long)]
    a12: Option<f64>,
    /// Truncation order of the computed transform
    #[arg(long, default_value_t = 8)]
    depth: usize,
    #[command(flatten)]
    out: OutputOpts,
}

#[derive(Args)]
struct VerifyArgs {
    /// Check one crossing point given as λ,μ,n instead of the default suite
    #[arg(long)]
    point: Option<String>,
    /// Corrupt a transform coefficient first; the closure check must fail
    #[arg(long)]
    inject_perturbation: bool,
    /// Largest oracle gap accepted as a crossing
    #[arg(long, default_value_t = 1e-6)]
    gap_tol: f64,
    #[command(flatten)]
    out: OutputOpts,
}

#[derive(Args)]
struct KummerArgs {
    /// Numerator parameter (real)
    #[arg(long)]
    a: f64,
    /// Denominator parameter (real, not a non-positive integer)
    #[arg(long)]
    c: f64,
    /// Argument, "re" or "re,im"
    #[arg(long, allow_hyphen_values = true)]
    z: String,
    #[arg(long, default_value_t = 1e-14)]
    tol: f64,
    #[command(flatten)]
    out: OutputOpts,
}

/// One output value; knows its CSV text and JSON form.
enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_sig(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(x) => serde_json::json!(x),
            Cell::Int(i) => serde_json::json!(i),
            Cell::Text(s) => serde_json::json!(s),
            Cell::Bool(b) => serde_json::json!(b),
        }
    }
}

/// Formats with 12 significant digits and trailing zeros trimmed, the
/// printf `%.12g` convention; keeps golden files stable.
fn fmt_sig(x: f64) -> String {
    fn trim(mut s: String) -> String {
        if s.contains('.') {
            while s.ends_with('0') {
                s.pop();
            }
            if s.ends_with('.') {
                s.pop();
            }
        }
        s
    }
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..12).contains(&e) {
        let decimals = (11 - e).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, exp) = s.split_once('e').expect("exponential format");
        format!("{}e{}", trim(mantissa.to_string()), exp)
    }
}

/// Parses a single value or an inclusive `start:stop:step` grid.
fn parse_grid(s: &str, name: &str) -> Result<Vec<f64>, CliError> {
    let bad = |m: String| CliError::Invalid(format!("--{name}: {m}"));
    let num = |v: &str| -> Result<f64, CliError> {
        v.trim()
            .parse::<f64>()
            .map_err(|_| bad(format!("'{v}' is not a number")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [a, b, c] => {
            let (start, stop, step) = (num(a)?, num(b)?, num(c)?);
            if !(step > 0.0) {
                return Err(bad(format!("range step must be positive, got {step}")));
            }
            if stop < start {
                return Err(bad("range stop lies below start".into()));
            }
            let mut grid = Vec::new();
            for k in 0.. {
                let v = start + step * k as f64;
                if v > stop + 1e-9 * step {
                    break;
                }
                grid.push(v);
            }
            Ok(grid)
        }
        _ => Err(bad(format!("expected a value or start:stop:step, got '{s}'"))),
    }
}

fn parse_complex(s: &str, name: &str) -> Result<C64, CliError> {
    let bad = || CliError::Invalid(format!("--{name}: '{s}' is not a complex number"));
    match s.split_once(',') {
        None => Ok(C64::new(s.trim().parse().map_err(|_| bad())?, 0.0)),
        Some((re, im)) => Ok(C64::new(
            re.trim().parse().map_err(|_| bad())?,
            im.trim().parse().map_err(|_| bad())?,
        )),
    }
}

fn emit(
    header: &[&str],
    rows: &[Vec<Cell>],
    out: &OutputOpts,
    command: &str,
) -> Result<(), CliError> {
    let text = match out.format {
        Format::Csv => {
            let mut s = header.join(",");
            s.push('\n');
            for row in rows {
                debug_assert_eq!(row.len(), header.len());
                s.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let records: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    let mut m = serde_json::Map::new();
                    for (h, c) in header.iter().zip(row) {
                        m.insert((*h).to_string(), c.json());
                    }
                    serde_json::Value::Object(m)
                })
                .collect();
            let doc = serde_json::json!({
                "schema_version": 1,
                "command": command,
                "rows": records,
            });
            let mut s =
                serde_json::to_string_pretty(&doc).expect("JSON serialization cannot fail");
            s.push('\n');
            s
        }
    };
    match &out.output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn make_params(lambda: f64, mu: f64, energy: f64) -> Result<RabiParams, CliError> {
    RabiParams::new(lambda, mu, energy).map_err(|e| CliError::Invalid(e.to_string()))
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<i32, CliError> {
    if args.levels == 0 {
        return Err(CliError::Invalid("--levels must be at least 1".into()));
    }
    if !(args.tol > 0.0) {
        return Err(CliError::Invalid("--tol must be positive".into()));
    }
    if args.cutoff_max < 2 {
        return Err(CliError::Invalid("--cutoff-max must be at least 2".into()));
    }
    let lambdas = parse_grid(&args.lambda, "lambda")?;
    let mus = parse_grid(&args.mu, "mu")?;
    let mut grid = Vec::new();
    for &l in &lambdas {
        for &m in &mus {
            grid.push((l, m));
        }
    }
    for &(l, m) in &grid {
        make_params(l, m, 0.0)?;
    }

    let (levels, tol, cap) = (args.levels, args.tol, args.cutoff_max);
    let point = move |(l, m): (f64, f64)| -> Result<(Vec<Vec<Cell>>, bool), String> {
        let params = RabiParams::new(l, m, 0.0).expect("grid was validated");
        let row = |i: usize, e: f64, parity: String, cutoff: usize| {
            vec![
                Cell::Num(l),
                Cell::Num(m),
                Cell::Int(i as i64),
                Cell::Num(e),
                Cell::Text(parity),
                Cell::Int(cutoff as i64),
            ]
        };
        match converged_spectrum_with_cap(&params, levels, tol, cap) {
            Ok(spec) => Ok((
                spec.eigenvalues
                    .iter()
                    .zip(&spec.parities)
                    .enumerate()
                    .map(|(i, (e, p))| row(i, *e, p.to_string(), spec.cutoff_used))
                    .collect(),
                false,
            )),
            Err(OracleError::NoConvergence { .. }) => {
                // Flag the rows but still report the best available values.
                let h = TruncatedHamiltonian::build(&params, cap).map_err(|e| e.to_string())?;
                let (values, _) = h.eigen_sorted();
                log::info!("λ = {l}, μ = {m}: not converged at cutoff {cap}");
                Ok((
                    values
                        .iter()
                        .take(levels)
                        .enumerate()
                        .map(|(i, e)| row(i, *e, "unconverged".into(), cap))
                        .collect(),
                    true,
                ))
            }
            Err(e) => Err(e.to_string()),
        }
    };
    let results = sweep::run_with_jobs(args.out.jobs, || sweep::map_collect(grid, point));

    let mut rows = Vec::new();
    let mut flagged = false;
    for r in results {
        let (point_rows, f) = r.map_err(CliError::Numerical)?;
        rows.extend(point_rows);
        flagged |= f;
    }
    emit(
        &["lambda", "mu", "level_index", "energy", "parity", "cutoff_used"],
        &rows,
        &args.out,
        "spectrum",
    )?;
    Ok(if flagged { 2 } else { 0 })
}

/// Crossing points at one μ: both closed-form branches for n ≤ 2, the
/// first scan crossing for n ≥ 3.
fn curve_points(n: usize, mu: f64) -> Result<Vec<JuddianPoint>, JuddianError> {
    match n {
        1 => baseline_curve_n1(mu).map(|p| vec![p]),
        2 => baseline_curve_n2(mu),
        _ => solve_terminating(n, mu, None).map(|p| vec![p]),
    }
}

fn cmd_juddian(args: JuddianArgs) -> Result<i32, CliError> {
    if args.n == 0 {
        return Err(CliError::Invalid("--n must be at least 1".into()));
    }
    if !(args.gap_tol > 0.0) {
        return Err(CliError::Invalid("--gap-tol must be positive".into()));
    }
    let mus = parse_grid(&args.mu, "mu")?;
    if mus.is_empty() {
        return Err(CliError::Invalid("--mu: empty range".into()));
    }

    let (n, gap_tol) = (args.n, args.gap_tol);
    let point = move |mu: f64| -> Result<Vec<Vec<Cell>>, JuddianError> {
        let mut rows = Vec::new();
        for pt in curve_points(n, mu)? {
            let report = validate_point(&pt, gap_tol)?;
            rows.push(vec![
                Cell::Int(n as i64),
                Cell::Num(mu),
                Cell::Num(pt.lambda),
                Cell::Num(pt.energy),
                Cell::Num(report.oracle_gap),
                Cell::Bool(report.passed),
            ]);
        }
        Ok(rows)
    };
    let results = sweep::run_with_jobs(args.out.jobs, || sweep::map_collect(mus, point));

    let mut rows = Vec::new();
    let mut invalid = Vec::new();
    let mut numerical = Vec::new();
    for r in results {
        match r {
            Ok(point_rows) => rows.extend(point_rows),
            Err(e @ JuddianError::ConstraintRange { .. }) => invalid.push(e),
            Err(JuddianError::NoCrossing { n, mu }) => {
                log::info!("no level-{n} crossing at μ = {mu}");
            }
            Err(e) => numerical.push(e),
        }
    }
    if rows.is_empty() && !invalid.is_empty() && numerical.is_empty() {
        return Err(CliError::Invalid(invalid[0].to_string()));
    }
    for e in &invalid {
        log::warn!("skipped: {e}");
    }
    emit(
        &["n", "mu", "lambda", "E", "oracle_gap", "validated"],
        &rows,
        &args.out,
        "juddian",
    )?;
    if let Some(e) = numerical.first() {
        eprintln!("error: {e}");
        return Ok(2);
    }
    Ok(0)
}

fn cmd_canonicalize(args: CanonicalizeArgs) -> Result<i32, CliError> {
    if args.depth == 0 {
        return Err(CliError::Invalid("--depth must be at least 1".into()));
    }
    let params = make_params(args.lambda, args.mu, args.energy)?;
    let a12 = args
        .a12
        .or_else(|| decoupling_a12(&params))
        .unwrap_or(0.0);
    let canon = canonical_system(&params, a12);
    let desc = initial_system(&params, args.depth + 4);
    let t = recurrence_solve(&desc, &canon, args.depth)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let residual = verify_canonicalization(&desc, &t, &canon, args.depth.saturating_sub(1).max(1));
    log::info!("closure residual {residual:.3e}, terminated: {}", t.terminated());

    let rows: Vec<Vec<Cell>> = (0..=args.depth)
        .map(|k| {
            let c = t.coeff(k);
            vec![
                Cell::Int(k as i64),
                Cell::Num(c[(0, 0)].re),
                Cell::Num(c[(0, 1)].re),
                Cell::Num(c[(1, 0)].re),
                Cell::Num(c[(1, 1)].re),
            ]
        })
        .collect();
    emit(&["order", "a11", "a12", "a21", "a22"], &rows, &args.out, "canonicalize")?;
    Ok(0)
}

fn cmd_kummer(args: KummerArgs) -> Result<i32, CliError> {
    if !(args.tol > 0.0) {
        return Err(CliError::Invalid("--tol must be positive".into()));
    }
    let z = parse_complex(&args.z, "z")?;
    let eval = kummer_1f1(
        C64::new(args.a, 0.0),
        C64::new(args.c, 0.0),
        z,
        args.tol,
    )
    .map_err(|e| match e {
        rabi_canonical::kummer::KummerError::Undefined { .. } => CliError::Invalid(e.to_string()),
        rabi_canonical::kummer::KummerError::NoConvergence { .. } => {
            CliError::Numerical(e.to_string())
        }
    })?;
    let rows = vec![vec![
        Cell::Num(args.a),
        Cell::Num(args.c),
        Cell::Num(z.re),
        Cell::Num(z.im),
        Cell::Num(eval.value.re),
        Cell::Num(eval.value.im),
        Cell::Int(eval.terms as i64),
        Cell::Num(eval.achieved_tol),
    ]];
    emit(
        &["a", "c", "z_re", "z_im", "value_re", "value_im", "terms", "achieved_tol"],
        &rows,
        &args.out,
        "kummer",
    )?;
    Ok(0)
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn closure_check(inject: bool) -> Check {
    let params = RabiParams::new(0.7, 0.5, 0.3).unwrap();
    let canon = canonical_system(&params, -0.5 / (2.0 * 0.7));
    let desc = initial_system(&params, 34);
    match recurrence_solve(&desc, &canon, 30) {
        Ok(t) => {
            let t = if inject {
                let mut coeffs = t.coeffs().to_vec();
                coeffs[1][(0, 1)] += C64::new(0.1, 0.0);
                TransformSeries::from_coeffs(coeffs)
            } else {
                t
            };
            let residual = verify_canonicalization(&desc, &t, &canon, 29);
            Check {
                name: "canonicalization_closure",
                passed: residual < 1e-10,
                detail: format!("scaled residual {}", fmt_sig(residual)),
            }
        }
        Err(e) => Check {
            name: "canonicalization_closure",
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn kummer_ode_check() -> Check {
    let params = RabiParams::new(0.3, 0.4, 0.7).unwrap();
    let canon = canonical_system(&params, 0.0);
    let tol = 1e-14;
    let mut worst = 0.0f64;
    for branch in [Branch::Plus, Branch::Minus] {
        for k in 0..8 {
            let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.37) / 8.0;
            let z = C64::new(theta.cos(), theta.sin());
            let f = match canonical_solution_pair(&params, 0.4, branch, z, tol) {
                Ok(f) => f,
                Err(e) => {
                    return Check {
                        name: "kummer_ode_residual",
                        passed: false,
                        detail: e.to_string(),
                    }
                }
            };
            let diff = |h: f64| {
                let hh = C64::new(h, 0.0);
                let fp = canonical_solution_pair(&params, 0.4, branch, z + hh, tol).unwrap();
                let fm = canonical_solution_pair(&params, 0.4, branch, z - hh, tol).unwrap();
                ((fp.0 - fm.0) / (2.0 * hh), (fp.1 - fm.1) / (2.0 * hh))
            };
            let (d1, d2) = (diff(1e-4), diff(5e-5));
            let fp = (
                (C64::new(4.0, 0.0) * d2.0 - d1.0) / C64::new(3.0, 0.0),
                (C64::new(4.0, 0.0) * d2.1 - d1.1) / C64::new(3.0, 0.0),
            );
            worst = worst.max(canonical_residual(&canon, z, f, fp));
        }
    }
    Check {
        name: "kummer_ode_residual",
        passed: worst < 1e-9,
        detail: format!("max residual {}", fmt_sig(worst)),
    }
}

fn growth_check() -> Check {
    let fail = |detail: String| Check { name: "bargmann_growth", passed: false, detail };
    let pt = match baseline_curve_n1(0.6) {
        Ok(pt) => pt,
        Err(e) => return fail(e.to_string()),
    };
    let rec = match reconstruct_eigenfunction(&pt, 40) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    let config = GrowthCheckConfig::new(0.5, 1e6, vec![5.0, 10.0, 20.0]);
    let mut ok = true;
    for pair in &rec.solutions {
        for comp in pair {
            let mut samples = Vec::new();
            for &r in &config.sample_radii {
                samples.extend(sample_circle_magnitudes(|z| comp.eval(z), r, 32));
            }
            ok &= bargmann_growth_check(&samples, &config);
        }
    }
    Check {
        name: "bargmann_growth",
        passed: ok,
        detail: if ok {
            "all components inside the Gaussian envelope".into()
        } else {
            "a component escaped the Gaussian envelope".into()
        },
    }
}

fn oracle_crossing_check(gap_tol: f64) -> Check {
    let outcome = baseline_curve_n1(0.6).and_then(|pt| validate_point(&pt, gap_tol));
    match outcome {
        Ok(report) => Check {
            name: "oracle_crossing",
            passed: report.passed,
            detail: format!(
                "gap {} at E = {}",
                fmt_sig(report.oracle_gap),
                fmt_sig(report.pair_energy)
            ),
        },
        Err(e) => Check { name: "oracle_crossing", passed: false, detail: e.to_string() },
    }
}

fn regeneration_check() -> Check {
    let pt = baseline_curve_n1(0.6).expect("reference point is in range");
    let params = pt.params();
    let canon = canonical_system(&params, -0.6 / (2.0 * pt.lambda));
    let desc = initial_system(&params, 8);
    match recurrence_solve(&desc, &canon, 5) {
        Ok(t) => {
            let mut worst = 0.0f64;
            for (r, s) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let got = t.coeff(1)[(r, s)].re;
                let want = pt.transform.coeff(1)[(r, s)].re;
                worst = worst.max((got - want).abs());
            }
            Check {
                name: "closed_form_regeneration",
                passed: worst < 1e-10 && t.terminated(),
                detail: format!("max entry error {}", fmt_sig(worst)),
            }
        }
        Err(e) => Check {
            name: "closed_form_regeneration",
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// Point checks for `--point λ,μ,n`: equation residuals, oracle gap, and
/// eigenspace overlap.
fn point_checks(spec: &str, gap_tol: f64) -> Result<Vec<Check>, CliError> {
    let parts: Vec<&str> = spec.split(',').collect();
    let [l, m, n] = parts.as_slice() else {
        return Err(CliError::Invalid(format!("--point expects λ,μ,n, got '{spec}'")));
    };
    let bad = |v: &str| CliError::Invalid(format!("--point: '{v}' is not a number"));
    let lambda: f64 = l.trim().parse().map_err(|_| bad(l))?;
    let mu: f64 = m.trim().parse().map_err(|_| bad(m))?;
    let n: usize = n.trim().parse().map_err(|_| bad(n))?;
    if n == 0 {
        return Err(CliError::Invalid("--point: n must be at least 1".into()));
    }

    let seed = NewtonSeed { lambda, entries: None };
    let pt = match solve_terminating(n, mu, Some(seed)) {
        Ok(pt) => pt,
        Err(e @ JuddianError::ConstraintRange { .. }) => {
            return Err(CliError::Invalid(e.to_string()))
        }
        Err(e) => {
            let detail = e.to_string();
            return Ok(["terminating_equations", "oracle_gap", "eigenfunction_overlap"]
                .iter()
                .map(|name| Check { name, passed: false, detail: detail.clone() })
                .collect());
        }
    };

    let mut checks = Vec::new();
    let sys = terminating_equations(n);
    let mut u = vec![pt.lambda];
    for k in 1..=n {
        let c = pt.transform.coeff(k);
        u.push(c[(0, 0)].re);
        u.push(c[(0, 1)].re);
    }
    let residual = sys.stacked_residuals(mu, &u).amax();
    checks.push(Check {
        name: "terminating_equations",
        passed: residual < 1e-9,
        detail: format!("λ = {}, residual {}", fmt_sig(pt.lambda), fmt_sig(residual)),
    });

    match validate_point(&pt, gap_tol) {
        Ok(report) => checks.push(Check {
            name: "oracle_gap",
            passed: report.passed,
            detail: format!(
                "gap {} at E = {}",
                fmt_sig(report.oracle_gap),
                fmt_sig(report.pair_energy)
            ),
        }),
        Err(e) => {
            checks.push(Check { name: "oracle_gap", passed: false, detail: e.to_string() })
        }
    }

    let overlap_check = || -> Result<(bool, String), String> {
        let spec = converged_spectrum_with_cap(&pt.params(), 2 * n + 6, 1e-9, 4096)
            .map_err(|e| e.to_string())?;
        let vals = &spec.eigenvalues;
        let i = (0..vals.len() - 1)
            .min_by(|&a, &b| {
                let ea = (0.5 * (vals[a] + vals[a + 1]) - pt.energy).abs();
                let eb = (0.5 * (vals[b] + vals[b + 1]) - pt.energy).abs();
                ea.partial_cmp(&eb).unwrap()
            })
            .expect("at least two levels");
        let rec = reconstruct_eigenfunction(&pt, spec.cutoff_used + 1)
            .map_err(|e| e.to_string())?;
        let ours = rec.fock_vectors.to_vec();
        let reference: Vec<Vec<f64>> = [i, i + 1]
            .iter()
            .map(|&c| spec.eigenvectors.column(c).iter().copied().collect())
            .collect();
        let overlap = subspace_overlap(&ours, &reference);
        Ok((overlap > 1.0 - 1e-6, format!("subspace overlap {}", fmt_sig(overlap))))
    };
    match overlap_check() {
        Ok((passed, detail)) => {
            checks.push(Check { name: "eigenfunction_overlap", passed, detail })
        }
        Err(detail) => {
            checks.push(Check { name: "eigenfunction_overlap", passed: false, detail })
        }
    }
    Ok(checks)
}

fn cmd_verify(args: VerifyArgs) -> Result<i32, CliError> {
    if !(args.gap_tol > 0.0) {
        return Err(CliError::Invalid("--gap-tol must be positive".into()));
    }
    let checks = match &args.point {
        Some(spec) => point_checks(spec, args.gap_tol)?,
        None => vec![
            closure_check(args.inject_perturbation),
            kummer_ode_check(),
            growth_check(),
            oracle_crossing_check(args.gap_tol),
            regeneration_check(),
        ],
    };
    let rows: Vec<Vec<Cell>> = checks
        .iter()
        .map(|c| {
            vec![
                Cell::Text(c.name.to_string()),
                Cell::Bool(c.passed),
                Cell::Text(c.detail.clone()),
            ]
        })
        .collect();
    emit(&["check", "passed", "detail"], &rows, &args.out, "verify")?;
    Ok(if checks.iter().all(|c| c.passed) { 0 } else { 1 })
}

fn init_logging() {
    let level = match std::env::var("RABI_CANONICAL_LOG").as_deref() {
        Ok("debug") => log::LevelFilter::Debug,
        Ok("info") => log::LevelFilter::Info,
        _ => log::LevelFilter::Off,
    };
    env_logger::Builder::new().filter_level(level).init();
}

fn run() -> i32 {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            }
        }
    };
    let outcome = match cli.command {
        Cmd::Spectrum(args) => cmd_spectrum(args),
        Cmd::Juddian(args) => cmd_juddian(args),
        Cmd::Canonicalize(args) => cmd_canonicalize(args),
        Cmd::Verify(args) => cmd_verify(args),
        Cmd::Kummer(args) => cmd_kummer(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn main() {
    std::process::exit(run());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(0.84), "0.84");
        assert_eq!(fmt_sig(-0.25), "-0.25");
        assert_eq!(fmt_sig(1000.0), "1000");
        assert_eq!(fmt_sig(0.1 + 0.2), "0.3");
        assert_eq!(fmt_sig(1e-13), "1e-13");
        assert_eq!(fmt_sig(-2.5e14), "-2.5e14");
        assert_eq!(fmt_sig(22026.465794806718), "22026.4657948");
        assert_eq!(fmt_sig(0.332328146391), "0.332328146391");
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0.4", "x").unwrap(), vec![0.4]);
        let g = parse_grid("0.1:0.9:0.1", "x").unwrap();
        assert_eq!(g.len(), 9);
        assert!((g[8] - 0.9).abs() < 1e-12);
        assert!(parse_grid("0.5:0.1:0.1", "x").is_err());
        assert!(parse_grid("0.1:0.9:0", "x").is_err());
        assert!(parse_grid("1:2", "x").is_err());
        assert!(parse_grid("abc", "x").is_err());
    }

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("2", "z").unwrap(), C64::new(2.0, 0.0));
        assert_eq!(parse_complex("-1.5,0.5", "z").unwrap(), C64::new(-1.5, 0.5));
        assert!(parse_complex("1;2", "z").is_err());
    }
}
