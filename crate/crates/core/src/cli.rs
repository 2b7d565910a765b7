//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when synthesis or validation fails, 2 on
//! usage, I/O or parse errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;

use crate::cert::{self, Certificate};
use crate::driver::{
    prepare, run_formula, sample_soundness, sweep, Certified, FormulaOutcome, ModeChoice,
    RunConfig, SolverChoice, Timings,
};
use crate::par::Exec;
use crate::poly::{rational_to_f64, Var};
use crate::relax::{build, Mode};
use crate::round::cfe;
use crate::sas::{self, parse_problem, Problem, SasFormula};
use crate::sdp::sdpa::export_sdpa;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "polyinterp",
    version,
    about = "Polynomial interpolants for disjoint semialgebraic systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize an interpolant for a problem file.
    Interpolate(InterpolateArgs),
    /// Re-validate a certificate against its problem file.
    ValidateCert(ValidateArgs),
    /// Continued-fraction expansion of a nonnegative integer vector.
    Cfe(CfeArgs),
    /// Emit a grid of region memberships for a two-variable problem.
    PlotData(PlotArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Auto,
    StrictLeft,
    StrictRight,
    Dai,
}

impl From<ModeArg> for ModeChoice {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Auto => ModeChoice::Auto,
            ModeArg::StrictLeft => ModeChoice::Only(Mode::StrictLeft),
            ModeArg::StrictRight => ModeChoice::Only(Mode::StrictRight),
            ModeArg::Dai => ModeChoice::Only(Mode::Dai),
        }
    }
}

#[derive(Args, Debug)]
struct InterpolateArgs {
    /// Problem file with `T:` and `T':` sections.
    file: PathBuf,
    /// Maximum degree b of the certificate.
    #[arg(short = 'b', long, default_value_t = 2)]
    max_degree: u32,
    /// Precision c: decimal digits kept before rounding.
    #[arg(short = 'c', long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    precision: u32,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    mode: ModeArg,
    /// `internal`, or `file=PATH` to read a solution of the exported problem.
    #[arg(long, default_value = "internal", value_parser = parse_solver)]
    solver: SolverChoice,
    /// Write each relaxation in SDPA sparse format into this directory.
    #[arg(long, value_name = "DIR")]
    export_sdpa: Option<PathBuf>,
    /// Try a grid of parameters, `DEGREES:PRECISIONS`, e.g. `0,1,2:1,3,5`.
    #[arg(long, value_parser = parse_sweep)]
    sweep: Option<(Vec<u32>, Vec<u32>)>,
    /// Seed for the post-hoc sampling check.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Points sampled from each side after success; 0 disables the check.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Cap on the expansion depth.
    #[arg(long, default_value_t = 200)]
    max_depth: u32,
    /// Where to write the certificate; defaults to `<input stem>.cert`.
    #[arg(short = 'o', long = "cert", value_name = "PATH")]
    cert: Option<PathBuf>,
    #[arg(long, conflicts_with = "cert")]
    no_cert: bool,
    /// Run on the calling thread only.
    #[arg(long)]
    sequential: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    problem: PathBuf,
    certificate: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct CfeArgs {
    /// Expansion depth.
    #[arg(short = 'd', long, value_parser = clap::value_parser!(u32).range(1..))]
    depth: u32,
    /// Nonnegative integers, not all zero.
    #[arg(required = true, allow_negative_numbers = true)]
    values: Vec<BigInt>,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("s").required(true).args(["interpolant", "cert"]))]
struct PlotArgs {
    /// Problem file over exactly two variables.
    file: PathBuf,
    /// Interpolant formula, e.g. `2*y + x^2 > 0`.
    #[arg(long)]
    interpolant: Option<String>,
    /// Take the interpolant from a certificate instead.
    #[arg(long, value_name = "PATH")]
    cert: Option<PathBuf>,
    /// Range of the first variable, `LO:HI`.
    #[arg(long, default_value = "-2:2", value_parser = parse_range, allow_hyphen_values = true)]
    x_range: (BigRational, BigRational),
    /// Range of the second variable, `LO:HI`.
    #[arg(long, default_value = "-2:2", value_parser = parse_range, allow_hyphen_values = true)]
    y_range: (BigRational, BigRational),
    /// Grid points per axis.
    #[arg(long, default_value_t = 41)]
    steps: usize,
    /// Output file; standard output if omitted.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

fn parse_solver(s: &str) -> Result<SolverChoice, String> {
    match s {
        "internal" => Ok(SolverChoice::Internal),
        _ => match s.strip_prefix("file=") {
            Some(p) if !p.is_empty() => Ok(SolverChoice::File(PathBuf::from(p))),
            _ => Err("expected `internal` or `file=PATH`".into()),
        },
    }
}

fn parse_list(s: &str) -> Result<Vec<u32>, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| format!("bad number `{t}`"))
        })
        .collect()
}

fn parse_sweep(s: &str) -> Result<(Vec<u32>, Vec<u32>), String> {
    let (b, c) = s.split_once(':').ok_or("expected `DEGREES:PRECISIONS`")?;
    let (b, c) = (parse_list(b)?, parse_list(c)?);
    if c.contains(&0) {
        return Err("precision must be at least 1".into());
    }
    Ok((b, c))
}

/// Exact value of a decimal such as `-1.25`.
fn parse_decimal(t: &str) -> Option<BigRational> {
    let t = t.trim();
    let (neg, t) = match t.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let digits = format!("{int}{frac}");
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let num: BigInt = digits.parse().ok()?;
    let v = BigRational::new(num, BigInt::from(10u32).pow(frac.len() as u32));
    Some(if neg { -v } else { v })
}

fn parse_range(s: &str) -> Result<(BigRational, BigRational), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected `LO:HI`")?;
    match (parse_decimal(lo), parse_decimal(hi)) {
        (Some(a), Some(b)) if a <= b => Ok((a, b)),
        _ => Err("expected decimal `LO:HI` with LO <= HI".into()),
    }
}

/// Error that ends a subcommand with the given exit code.
struct Exit(i32, String);

fn usage(msg: impl Into<String>) -> Exit {
    Exit(EXIT_USAGE, msg.into())
}

fn read(path: &Path) -> Result<String, Exit> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_problem(path: &Path) -> Result<Problem, Exit> {
    parse_problem(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Exit> {
    std::fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let res = match cli.command {
        Command::Interpolate(a) => interpolate(&a, out),
        Command::ValidateCert(a) => validate_cert(&a, out),
        Command::Cfe(a) => cfe_cmd(&a, out),
        Command::PlotData(a) => plot_data(&a, out),
    };
    match res {
        Ok(code) => code,
        Err(Exit(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn secs(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64())
}

fn timings_text(t: &Timings) -> String {
    format!(
        "build {}s, solve {}s, round {}s, validate {}s, total {}s",
        secs(t.build),
        secs(t.solve),
        secs(t.round),
        secs(t.validate),
        secs(t.total())
    )
}

fn interpolate(a: &InterpolateArgs, out: &mut dyn Write) -> Result<i32, Exit> {
    let problem = read_problem(&a.file)?;
    let pairs = problem.t.disjuncts.len() * problem.t_prime.disjuncts.len();
    let mode = ModeChoice::from(a.mode);
    if matches!(a.solver, SolverChoice::File(_)) && (pairs != 1 || mode == ModeChoice::Auto) {
        return Err(usage(
            "--solver file=PATH needs a single pair of systems and an explicit --mode",
        ));
    }
    let cfg = RunConfig {
        max_degree: a.max_degree,
        precision: a.precision,
        mode,
        solver: a.solver.clone(),
        max_depth: a.max_depth,
        exec: if a.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        },
        ..RunConfig::default()
    };
    if let Some(dir) = &a.export_sdpa {
        export_all(&problem, &cfg, dir, out)?;
    }

    let (outcome, b, c) = match &a.sweep {
        None => (
            run_formula(&problem.t, &problem.t_prime, &cfg),
            a.max_degree,
            a.precision,
        ),
        Some((bs, cs)) => {
            let cells = sweep(&problem.t, &problem.t_prime, bs, cs, &cfg);
            for cell in &cells {
                let o = &cell.outcome;
                let what = match &o.interpolant {
                    Some(i) => format!("{i}"),
                    None => "FAIL".into(),
                };
                let line = match a.format {
                    Format::Text => format!("sweep b={} c={}: {what}", cell.degree, cell.precision),
                    Format::Structured => {
                        format!("sweep.{}.{}={what}", cell.degree, cell.precision)
                    }
                };
                writeln!(out, "{line}").map_err(io)?;
            }
            // The first success in grid order, else the last cell.
            let pick = cells
                .iter()
                .position(|c| c.outcome.success())
                .unwrap_or(cells.len().saturating_sub(1));
            match cells.into_iter().nth(pick) {
                Some(cell) => (cell.outcome, cell.degree, cell.precision),
                None => return Err(usage("empty sweep grid")),
            }
        }
    };

    let mut kv: Vec<(String, String)> = Vec::new();
    let modes: Vec<String> = outcome
        .pairs
        .iter()
        .flatten()
        .map(|p| match &p.result {
            Ok(c) => c.mode.to_string(),
            Err(_) => "none".into(),
        })
        .collect();
    let mut code = EXIT_OK;
    match &outcome.interpolant {
        Some(interp) => {
            kv.push(("status".into(), "interpolant".into()));
            kv.push(("interpolant".into(), interp.to_string()));
            kv.push(("depth".into(), outcome.depth().unwrap_or(0).to_string()));
        }
        None => {
            kv.push(("status".into(), "fail".into()));
            code = EXIT_FAIL;
        }
    }
    kv.push(("mode".into(), modes.join(",")));
    kv.push(("degree".into(), b.to_string()));
    kv.push(("precision".into(), c.to_string()));
    for (i, row) in outcome.pairs.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            let attempts: Vec<String> = p
                .attempts
                .iter()
                .map(|t| {
                    let sdp = t
                        .sdp_status
                        .map(|s| format!("sdp {s:?} in {} iterations", t.sdp_iterations))
                        .unwrap_or_else(|| "no sdp solution".into());
                    match &t.outcome {
                        Ok(d) => format!("{}: depth {d}, {sdp}", t.mode),
                        Err(r) => format!("{}: {r}, {sdp}", t.mode),
                    }
                })
                .collect();
            kv.push((format!("pair.{i}.{j}"), attempts.join("; ")));
        }
    }

    if let Some(interp) = &outcome.interpolant {
        if a.samples > 0 {
            let s = sample_soundness(
                &problem.t,
                &problem.t_prime,
                interp,
                a.samples,
                a.seed,
                cfg.exec,
            );
            let bad = s.left_violations.len() + s.right_violations.len();
            kv.push((
                "samples".into(),
                format!(
                    "{}+{} points, {bad} violations",
                    s.checked_left, s.checked_right
                ),
            ));
            if bad > 0 {
                kv[0].1 = "unsound".into();
                code = EXIT_FAIL;
            }
        }
        if !a.no_cert {
            let path = a.cert.clone().unwrap_or_else(|| default_cert_path(&a.file));
            write_file(&path, &certificate_text(&outcome))?;
            kv.push(("certificate".into(), path.display().to_string()));
        }
    }
    let t = &outcome.timings;
    kv.push(("time.build".into(), secs(t.build)));
    kv.push(("time.solve".into(), secs(t.solve)));
    kv.push(("time.round".into(), secs(t.round)));
    kv.push(("time.validate".into(), secs(t.validate)));
    kv.push(("time.total".into(), secs(t.total())));
    print_kv(out, a.format, &kv, &outcome)?;
    Ok(code)
}

fn io(e: std::io::Error) -> Exit {
    usage(format!("write failed: {e}"))
}

fn print_kv(
    out: &mut dyn Write,
    format: Format,
    kv: &[(String, String)],
    outcome: &FormulaOutcome,
) -> Result<(), Exit> {
    match format {
        Format::Structured => {
            for (k, v) in kv {
                writeln!(out, "{k}={v}").map_err(io)?;
            }
        }
        Format::Text => {
            for (k, v) in kv {
                if k.starts_with("time.") {
                    continue;
                }
                let k = k
                    .strip_prefix("pair.")
                    .map_or(k.clone(), |p| format!("pair ({})", p.replace('.', ", ")));
                writeln!(out, "{k}: {v}").map_err(io)?;
            }
            writeln!(out, "time: {}", timings_text(&outcome.timings)).map_err(io)?;
        }
    }
    Ok(())
}

fn default_cert_path(input: &Path) -> PathBuf {
    let stem = input.file_stem().map_or_else(
        || "interpolant".into(),
        |s| s.to_string_lossy().into_owned(),
    );
    PathBuf::from(format!("{stem}.cert"))
}

fn certificate_text(outcome: &FormulaOutcome) -> String {
    let certs: Vec<Vec<&Certified>> = outcome
        .pairs
        .iter()
        .map(|row| {
            row.iter()
                .map(|p| p.result.as_ref().expect("only called on success"))
                .collect()
        })
        .collect();
    Certificate::from_certified(&certs).to_text_annotated(&certs)
}

fn export_all(
    problem: &Problem,
    cfg: &RunConfig,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<(), Exit> {
    std::fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    for (i, t) in problem.t.disjuncts.iter().enumerate() {
        for (j, tp) in problem.t_prime.disjuncts.iter().enumerate() {
            for mode in cfg.mode.modes() {
                let Ok((p, _)) = build(&prepare(t, mode), &prepare(tp, mode), cfg.max_degree, mode)
                else {
                    continue;
                };
                let path = dir.join(format!("pair-{i}-{j}-{mode}.dat-s"));
                write_file(&path, &export_sdpa(&p))?;
                writeln!(out, "exported: {}", path.display()).map_err(io)?;
            }
        }
    }
    Ok(())
}

fn validate_cert(a: &ValidateArgs, out: &mut dyn Write) -> Result<i32, Exit> {
    let problem = read_problem(&a.problem)?;
    let text = read(&a.certificate)?;
    let c = cert::parse(&text).map_err(|e| usage(format!("{}: {e}", a.certificate.display())))?;
    let mut kv: Vec<(String, String)> = Vec::new();
    let code = match cert::audit(&c, &problem, Exec::default()) {
        Err(e) => {
            kv.push(("status".into(), "fail".into()));
            kv.push(("reason".into(), e.to_string()));
            EXIT_FAIL
        }
        Ok(audit) => {
            for (p, r) in c.pairs.iter().zip(&audit.reports) {
                let v = if r.verdict {
                    "pass".to_string()
                } else {
                    format!("fail ({})", r.failed_checks().join("; "))
                };
                kv.push((format!("pair.{}.{}", p.i, p.j), v));
            }
            match &audit.interpolant {
                Some(i) => {
                    kv.insert(0, ("status".into(), "pass".into()));
                    kv.insert(1, ("interpolant".into(), i.to_string()));
                    EXIT_OK
                }
                None => {
                    kv.insert(0, ("status".into(), "fail".into()));
                    EXIT_FAIL
                }
            }
        }
    };
    for (k, v) in &kv {
        match a.format {
            Format::Structured => writeln!(out, "{k}={v}"),
            Format::Text => writeln!(out, "{k}: {v}"),
        }
        .map_err(io)?;
    }
    Ok(code)
}

fn cfe_cmd(a: &CfeArgs, out: &mut dyn Write) -> Result<i32, Exit> {
    let r = cfe(&a.values, a.depth).map_err(|e| usage(e.to_string()))?;
    let parts: Vec<String> = r.iter().map(BigInt::to_string).collect();
    writeln!(out, "{}", parts.join(" ")).map_err(io)?;
    Ok(EXIT_OK)
}

fn plot_data(a: &PlotArgs, out: &mut dyn Write) -> Result<i32, Exit> {
    let problem = read_problem(&a.file)?;
    let (tv, tpv) = (problem.t.vars(), problem.t_prime.vars());
    let common: Vec<Var> = tv.intersection(&tpv).cloned().collect();
    if common.len() != 2 || tv.union(&tpv).count() != 2 {
        return Err(usage(format!(
            "plot data needs both systems over the same two variables; found {} common of {} total",
            common.len(),
            tv.union(&tpv).count()
        )));
    }
    let s: SasFormula = match (&a.interpolant, &a.cert) {
        (Some(text), _) => sas::parse(text).map_err(|e| usage(format!("interpolant: {e}")))?,
        (None, Some(path)) => {
            let c =
                cert::parse(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let audit = cert::audit(&c, &problem, Exec::default())
                .map_err(|e| Exit(EXIT_FAIL, e.to_string()))?;
            let interp = audit
                .interpolant
                .ok_or_else(|| Exit(EXIT_FAIL, "certificate does not validate".into()))?;
            sas::parse(&interp.to_string()).map_err(|e| usage(format!("interpolant: {e}")))?
        }
        (None, None) => unreachable!("clap requires one of them"),
    };
    if let Some(v) = s.vars().iter().find(|v| !common.contains(v)) {
        return Err(usage(format!(
            "interpolant uses variable `{v}` outside the problem"
        )));
    }

    let axis = |(lo, hi): &(BigRational, BigRational)| -> Vec<BigRational> {
        (0..a.steps)
            .map(|k| match a.steps {
                1 => lo.clone(),
                n => lo + (hi - lo) * BigRational::new(k.into(), (n - 1).into()),
            })
            .collect()
    };
    let (xs, ys) = (axis(&a.x_range), axis(&a.y_range));
    let mut text = format!("{},{},in_t,in_t_prime,in_s\n", common[0], common[1]);
    let flag = |f: &SasFormula, p: &BTreeMap<Var, BigRational>| -> Result<u8, Exit> {
        f.satisfies(p)
            .map(u8::from)
            .map_err(|e| usage(e.to_string()))
    };
    for x in &xs {
        for y in &ys {
            let p: BTreeMap<Var, BigRational> = [
                (common[0].clone(), x.clone()),
                (common[1].clone(), y.clone()),
            ]
            .into_iter()
            .collect();
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                rational_to_f64(x),
                rational_to_f64(y),
                flag(&problem.t, &p)?,
                flag(&problem.t_prime, &p)?,
                flag(&s, &p)?
            ));
        }
    }
    match &a.output {
        Some(path) => write_file(path, &text)?,
        None => out.write_all(text.as_bytes()).map_err(io)?,
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("polyinterp").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn flag_parsers() {
        assert_eq!(parse_solver("internal"), Ok(SolverChoice::Internal));
        assert_eq!(
            parse_solver("file=a.sol"),
            Ok(SolverChoice::File("a.sol".into()))
        );
        assert!(parse_solver("file=").is_err());
        assert_eq!(parse_sweep("0,1:3"), Ok((vec![0, 1], vec![3])));
        assert!(parse_sweep("0:0").is_err());
        assert_eq!(
            parse_range("-1.5:2"),
            Ok((crate::poly::rat(-3, 2), crate::poly::int(2)))
        );
        assert_eq!(parse_decimal(".25"), Some(crate::poly::rat(1, 4)));
        assert_eq!(parse_decimal("-0.9"), Some(crate::poly::rat(-9, 10)));
        assert!(parse_decimal("1e3").is_none());
        assert!(parse_decimal("-").is_none());
        assert!(parse_range("2:1").is_err());
    }

    #[test]
    fn cfe_subcommand() {
        let (code, out, _) = run_str(&["cfe", "-d", "1", "1", "2", "3"]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out.trim(), "1 2 3");
        assert_eq!(run_str(&["cfe", "-d", "2", "0", "0"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["cfe", "-d", "2", "-1", "3"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["cfe", "-d", "0", "1"]).0, EXIT_USAGE);
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_str(&[]).0, EXIT_USAGE);
        assert_eq!(run_str(&["bogus"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["--help"]).0, EXIT_OK);
        assert_eq!(
            run_str(&["interpolate", "/nonexistent/x.sas"]).0,
            EXIT_USAGE
        );
    }
}
