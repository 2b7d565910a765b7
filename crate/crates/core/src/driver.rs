//! The synthesis loop: relax, solve, round at increasing depth, validate.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::par::{self, Exec};
use crate::poly::Var;
use crate::relax::{assemble, build, ExactCandidate, Interpolant, Mode, RelaxError, SymbolTable};
use crate::round::{Prepared, RoundError};
use crate::sas::{draw_point, Sas, SasFormula, SasKind};
use crate::sdp::{sdpa, solve, SdpSolution, SdpStatus, SolveOptions};
use crate::validate::{check_strict_cone, validate, ValidateError, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeChoice {
    /// Strict-left first, then strict-right.
    Auto,
    Only(Mode),
}

impl ModeChoice {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeChoice::Auto => vec![Mode::StrictLeft, Mode::StrictRight],
            ModeChoice::Only(m) => vec![m],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverChoice {
    Internal,
    /// Read the solution of an exported problem from this file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub max_degree: u32,
    pub precision: u32,
    pub mode: ModeChoice,
    pub solver: SolverChoice,
    pub solve: SolveOptions,
    /// Safety cap on the expansion depth; stabilization normally ends the
    /// loop much earlier.
    pub max_depth: u32,
    pub exec: Exec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_degree: 2,
            precision: 3,
            mode: ModeChoice::Auto,
            solver: SolverChoice::Internal,
            solve: SolveOptions::default(),
            max_depth: 200,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FailReason {
    SdpInfeasible,
    SdpStalled,
    /// The expansion reproduced the pre-rounded vector without validating.
    StabilizedWithoutValidation {
        depth: u32,
    },
    /// Nothing survives fixing to the requested precision.
    DegenerateCandidate,
    DepthLimit {
        depth: u32,
    },
    Relax(RelaxError),
    Validate(ValidateError),
    Import(String),
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailReason::SdpInfeasible => f.write_str("sdp-infeasible"),
            FailReason::SdpStalled => f.write_str("sdp-stalled"),
            FailReason::StabilizedWithoutValidation { depth } => {
                write!(f, "stabilized-without-validation (depth {depth})")
            }
            FailReason::DegenerateCandidate => f.write_str("degenerate-candidate"),
            FailReason::DepthLimit { depth } => write!(f, "depth-limit ({depth})"),
            FailReason::Relax(e) => write!(f, "relaxation: {e}"),
            FailReason::Validate(e) => write!(f, "validation: {e}"),
            FailReason::Import(e) => write!(f, "solution import: {e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub build: Duration,
    pub solve: Duration,
    pub round: Duration,
    pub validate: Duration,
}

impl Timings {
    pub fn total(&self) -> Duration {
        self.build + self.solve + self.round + self.validate
    }

    fn add(&mut self, o: &Timings) {
        self.build += o.build;
        self.solve += o.solve;
        self.round += o.round;
        self.validate += o.validate;
    }
}

/// A validated certificate and what it certifies.
#[derive(Debug, Clone)]
pub struct Certified {
    pub interpolant: Interpolant,
    pub mode: Mode,
    pub degree: u32,
    pub precision: u32,
    pub depth: u32,
    pub candidate: ExactCandidate,
    pub table: SymbolTable,
    pub report: ValidationReport,
}

/// One mode tried on one pair.
#[derive(Debug, Clone)]
pub struct Attempt {
    pub mode: Mode,
    pub sdp_status: Option<SdpStatus>,
    pub sdp_iterations: usize,
    pub outcome: Result<u32, FailReason>,
}

#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub result: Result<Certified, Vec<(Mode, FailReason)>>,
    pub attempts: Vec<Attempt>,
    pub timings: Timings,
}

/// Brings a system into the kind a mode expects.
pub fn prepare(sys: &Sas, mode: Mode) -> Sas {
    match mode.required_kind() {
        SasKind::WithStrict => sys.diseq_to_strict(),
        SasKind::WithDiseq => sys.strict_to_diseq(),
    }
}

/// Integer vector to exact candidate.
pub fn exactify(values: &[BigInt], table: &SymbolTable) -> Result<ExactCandidate, RelaxError> {
    let v: Vec<BigRational> = values
        .iter()
        .map(|x| BigRational::from_integer(x.clone()))
        .collect();
    ExactCandidate::from_flat(table, &v)
}

fn obtain_solution(
    problem: &crate::relax::SdpProblem,
    cfg: &RunConfig,
) -> Result<SdpSolution, FailReason> {
    match &cfg.solver {
        SolverChoice::Internal => Ok(solve(problem, &cfg.solve)),
        SolverChoice::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| FailReason::Import(format!("{}: {e}", path.display())))?;
            sdpa::import_solution(problem, &text, &cfg.solve)
                .map_err(|e| FailReason::Import(e.to_string()))
        }
    }
}

fn run_mode(
    t: &Sas,
    tp: &Sas,
    mode: Mode,
    cfg: &RunConfig,
    timings: &mut Timings,
) -> (Attempt, Option<Certified>) {
    let mut attempt = Attempt {
        mode,
        sdp_status: None,
        sdp_iterations: 0,
        outcome: Err(FailReason::SdpStalled),
    };
    let clock = Instant::now();
    let built = build(&prepare(t, mode), &prepare(tp, mode), cfg.max_degree, mode);
    timings.build += clock.elapsed();
    let (problem, table) = match built {
        Ok(x) => x,
        Err(e) => {
            attempt.outcome = Err(FailReason::Relax(e));
            return (attempt, None);
        }
    };

    let clock = Instant::now();
    let sol = obtain_solution(&problem, cfg);
    timings.solve += clock.elapsed();
    let sol = match sol {
        Ok(s) => s,
        Err(e) => {
            attempt.outcome = Err(e);
            return (attempt, None);
        }
    };
    attempt.sdp_status = Some(sol.status);
    attempt.sdp_iterations = sol.iterations;
    match sol.status {
        SdpStatus::Infeasible => {
            attempt.outcome = Err(FailReason::SdpInfeasible);
            return (attempt, None);
        }
        SdpStatus::Stalled => {
            attempt.outcome = Err(FailReason::SdpStalled);
            return (attempt, None);
        }
        SdpStatus::Optimal | SdpStatus::NearFeasible => {}
    }

    let clock = Instant::now();
    let prepared = Prepared::new(&sol.flat(), cfg.precision);
    timings.round += clock.elapsed();
    let prepared = match prepared {
        Ok(p) => p,
        Err(RoundError::AllZero) => {
            attempt.outcome = Err(FailReason::DegenerateCandidate);
            return (attempt, None);
        }
        Err(_) => {
            attempt.outcome = Err(FailReason::SdpStalled);
            return (attempt, None);
        }
    };

    for depth in 1..=cfg.max_depth {
        let clock = Instant::now();
        let rounded = prepared
            .at_depth(depth)
            .expect("prepared vector is nonzero and nonnegative");
        let cand = exactify(&rounded.values, &table).expect("rounded vector matches the table");
        timings.round += clock.elapsed();

        let clock = Instant::now();
        let verdict = quick_validate(&cand, &table, cfg.exec);
        timings.validate += clock.elapsed();
        match verdict {
            Err(e) => {
                attempt.outcome = Err(FailReason::Validate(e));
                return (attempt, None);
            }
            Ok(Some(report)) => {
                let interpolant = assemble(&cand, &table).expect("shape checked").interpolant;
                attempt.outcome = Ok(depth);
                let cert = Certified {
                    interpolant,
                    mode,
                    degree: cfg.max_degree,
                    precision: cfg.precision,
                    depth,
                    candidate: cand,
                    table,
                    report,
                };
                return (attempt, Some(cert));
            }
            Ok(None) => {}
        }
        if rounded.stabilized {
            attempt.outcome = Err(FailReason::StabilizedWithoutValidation { depth });
            return (attempt, None);
        }
    }
    attempt.outcome = Err(FailReason::DepthLimit {
        depth: cfg.max_depth,
    });
    (attempt, None)
}

/// Runs the cheap checks first and the exact PSD test only when they pass.
/// `Ok(Some(report))` means the candidate is valid.
fn quick_validate(
    cand: &ExactCandidate,
    table: &SymbolTable,
    exec: Exec,
) -> Result<Option<ValidationReport>, ValidateError> {
    if !check_strict_cone(cand, table) {
        return Ok(None);
    }
    let a = assemble(cand, table)?;
    if !a.identity().is_zero() || !a.interpolant.vars().is_subset(&table.common_vars) {
        return Ok(None);
    }
    let psd = par::map(exec, &cand.blocks, crate::validate::is_psd_exact);
    for r in psd {
        if !r?.0 {
            return Ok(None);
        }
    }
    let report = validate(cand, table)?;
    Ok(report.verdict.then_some(report))
}

/// Synthesizes an interpolant for one pair of systems.
pub fn run_pair(t: &Sas, tp: &Sas, cfg: &RunConfig) -> PairOutcome {
    let mut timings = Timings::default();
    let mut attempts = Vec::new();
    let mut failures = Vec::new();
    for mode in cfg.mode.modes() {
        let (attempt, cert) = run_mode(t, tp, mode, cfg, &mut timings);
        if let Err(reason) = &attempt.outcome {
            failures.push((mode, reason.clone()));
        }
        attempts.push(attempt);
        if let Some(c) = cert {
            return PairOutcome {
                result: Ok(c),
                attempts,
                timings,
            };
        }
    }
    PairOutcome {
        result: Err(failures),
        attempts,
        timings,
    }
}

/// Disjunct indices `(i, j)` and the reason each mode failed.
pub type PairFailure = (usize, usize, Vec<(Mode, FailReason)>);

/// Result of synthesizing `⋁_i ⋀_j S_ij` for two formulas in DNF.
#[derive(Debug, Clone)]
pub struct FormulaOutcome {
    /// `pairs[i][j]` is the run for disjunct `i` of `T` against `j` of `T'`.
    pub pairs: Vec<Vec<PairOutcome>>,
    pub interpolant: Option<Interpolant>,
    pub timings: Timings,
}

impl FormulaOutcome {
    pub fn success(&self) -> bool {
        self.interpolant.is_some()
    }

    /// Largest depth needed by any pair.
    pub fn depth(&self) -> Option<u32> {
        self.pairs
            .iter()
            .flatten()
            .filter_map(|p| p.result.as_ref().ok().map(|c| c.depth))
            .max()
    }

    pub fn failures(&self) -> Vec<PairFailure> {
        let mut out = Vec::new();
        for (i, row) in self.pairs.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                if let Err(f) = &p.result {
                    out.push((i, j, f.clone()));
                }
            }
        }
        out
    }
}

pub fn run_formula(t: &SasFormula, tp: &SasFormula, cfg: &RunConfig) -> FormulaOutcome {
    let n = t.disjuncts.len();
    let m = tp.disjuncts.len();
    let flat = par::map_range(cfg.exec, n * m, |k| {
        run_pair(&t.disjuncts[k / m], &tp.disjuncts[k % m], cfg)
    });
    let mut pairs: Vec<Vec<PairOutcome>> = Vec::with_capacity(n);
    let mut it = flat.into_iter();
    for _ in 0..n {
        pairs.push(it.by_ref().take(m).collect());
    }
    let mut timings = Timings::default();
    for p in pairs.iter().flatten() {
        timings.add(&p.timings);
    }
    let all_ok = pairs.iter().flatten().all(|p| p.result.is_ok());
    let interpolant = all_ok.then(|| Interpolant {
        disjuncts: pairs
            .iter()
            .map(|row| {
                row.iter()
                    .flat_map(|p| {
                        p.result
                            .as_ref()
                            .expect("all succeeded")
                            .interpolant
                            .disjuncts[0]
                            .clone()
                    })
                    .collect()
            })
            .collect(),
    });
    FormulaOutcome {
        pairs,
        interpolant,
        timings,
    }
}

/// One cell of a parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub degree: u32,
    pub precision: u32,
    pub outcome: FormulaOutcome,
}

/// Runs every `(degree, precision)` combination.
pub fn sweep(
    t: &SasFormula,
    tp: &SasFormula,
    degrees: &[u32],
    precisions: &[u32],
    cfg: &RunConfig,
) -> Vec<SweepCell> {
    let grid: Vec<(u32, u32)> = degrees
        .iter()
        .flat_map(|&b| precisions.iter().map(move |&c| (b, c)))
        .collect();
    let inner = RunConfig {
        exec: Exec::Sequential,
        ..cfg.clone()
    };
    par::map(cfg.exec, &grid, |&(degree, precision)| {
        let c = RunConfig {
            max_degree: degree,
            precision,
            ..inner.clone()
        };
        SweepCell {
            degree,
            precision,
            outcome: run_formula(t, tp, &c),
        }
    })
}

/// Points where an interpolant disagrees with its specification.
#[derive(Debug, Clone, Default)]
pub struct SoundnessReport {
    pub checked_left: usize,
    pub checked_right: usize,
    /// Points of `T` where the interpolant is false.
    pub left_violations: Vec<BTreeMap<Var, BigRational>>,
    /// Points of `T'` where the interpolant is true.
    pub right_violations: Vec<BTreeMap<Var, BigRational>>,
}

impl SoundnessReport {
    pub fn sound(&self) -> bool {
        self.left_violations.is_empty() && self.right_violations.is_empty()
    }
}

/// Samples up to `n` points in each of `T` and `T'` (split across
/// disjuncts) and checks `T ⊆ I` and `I ∩ T' = ∅` on them exactly.
pub fn sample_soundness(
    t: &SasFormula,
    tp: &SasFormula,
    interp: &Interpolant,
    n: usize,
    seed: u64,
    exec: Exec,
) -> SoundnessReport {
    let extra: BTreeMap<Var, (f64, f64)> = interp
        .vars()
        .into_iter()
        .map(|v| (v, (-4.0, 4.0)))
        .collect();
    let collect = |f: &SasFormula, salt: u64| -> Vec<BTreeMap<Var, BigRational>> {
        let k = f.disjuncts.len().max(1);
        let mut pts = Vec::new();
        for (i, d) in f.disjuncts.iter().enumerate() {
            let share = n / k + usize::from(i < n % k);
            let mut got = d.sample_region(
                &extra,
                share,
                seed ^ salt ^ (i as u64).wrapping_mul(0x9e37_79b9),
            );
            // Missing interpolant variables get arbitrary values.
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt ^ 0x5eed ^ i as u64);
            for p in got.iter_mut() {
                let fill = draw_point(&mut rng, &extra, &Default::default());
                for (v, x) in fill {
                    p.entry(v).or_insert(x);
                }
            }
            pts.extend(got);
        }
        pts
    };
    let left = collect(t, 0x1);
    let right = collect(tp, 0x2);
    let holds = |p: &BTreeMap<Var, BigRational>| interp.holds_at(p).unwrap_or(false);
    let lv: Vec<bool> = par::map(exec, &left, |p| !holds(p));
    let rv: Vec<bool> = par::map(exec, &right, |p| holds(p));
    SoundnessReport {
        checked_left: left.len(),
        checked_right: right.len(),
        left_violations: left
            .iter()
            .zip(&lv)
            .filter(|(_, b)| **b)
            .map(|(p, _)| p.clone())
            .collect(),
        right_violations: right
            .iter()
            .zip(&rv)
            .filter(|(_, b)| **b)
            .map(|(p, _)| p.clone())
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sas::parse;

    fn sys(s: &str) -> Sas {
        parse(s).unwrap().disjuncts.remove(0)
    }

    fn cfg(b: u32, c: u32) -> RunConfig {
        RunConfig {
            max_degree: b,
            precision: c,
            ..Default::default()
        }
    }

    #[test]
    fn halfplanes() {
        let out = run_pair(&sys("y > x /\\ x > -y"), &sys("0 >= y"), &cfg(0, 5));
        let c = out.result.expect("validated");
        assert_eq!(c.mode, Mode::StrictLeft);
        let atom = c.interpolant.as_atom().unwrap();
        assert!(atom.strict);
        assert!(atom
            .poly
            .positive_multiple_of(&crate::poly::RatPoly::var(Var::new("y")))
            .is_some());
        assert!(c.report.verdict);
    }

    #[test]
    fn degenerate_and_failure_reasons() {
        // Overlapping systems: no certificate can exist.
        let out = run_pair(&sys("x > 0"), &sys("x > 1"), &cfg(0, 3));
        let fails = out.result.unwrap_err();
        assert_eq!(fails.len(), 2);
        assert!(fails
            .iter()
            .all(|(_, r)| matches!(r, FailReason::SdpInfeasible | FailReason::SdpStalled)));
    }

    #[test]
    fn formula_combines_pairs() {
        let t = parse("(x > 1) \\/ (x > 2)").unwrap();
        let tp = parse("x <= 0").unwrap();
        let out = run_formula(&t, &tp, &cfg(0, 3));
        let i = out.interpolant.expect("both pairs succeed");
        assert_eq!(i.disjuncts.len(), 2);
        let rep = sample_soundness(&t, &tp, &i, 200, 1, Exec::default());
        assert!(rep.sound());
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let t = parse("(y > x /\\ x > -y) \\/ (y > 1)").unwrap();
        let tp = parse("0 >= y").unwrap();
        let a = run_formula(
            &t,
            &tp,
            &RunConfig {
                exec: Exec::Parallel,
                ..cfg(0, 4)
            },
        );
        let b = run_formula(
            &t,
            &tp,
            &RunConfig {
                exec: Exec::Sequential,
                ..cfg(0, 4)
            },
        );
        assert_eq!(a.interpolant, b.interpolant);
    }
}
