//! End-to-end runs of the `polyinterp` binary and its exit-code contract.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polyinterp::driver::prepare;
use polyinterp::poly::RatPoly;
use polyinterp::relax::{build, Mode};
use polyinterp::sas::{parse, parse_problem};
use polyinterp::sdp::sdpa::write_solution;
use polyinterp::sdp::{solve, SolveOptions};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polyinterp"))
}

fn here(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn input(name: &str) -> PathBuf {
    here(&format!("inputs/{name}.sas"))
}

fn fixture(name: &str) -> PathBuf {
    here(&format!("fixtures/{name}.cert"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn structured(o: &Output) -> BTreeMap<String, String> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn poly(s: &str) -> RatPoly {
    parse(&format!("{s} >= 0")).unwrap().disjuncts[0].ge[0].clone()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn touching_sets_give_sharp_interpolant() {
    let dir = TempDir::new().unwrap();
    let cert = dir.path().join("row4.cert");
    let o = run(&[
        "interpolate",
        p(&input("row4")),
        "-b",
        "2",
        "-c",
        "1",
        "--format",
        "structured",
        "-o",
        p(&cert),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let kv = structured(&o);
    assert_eq!(kv["status"], "interpolant");
    assert_eq!(kv["mode"], "strict-left");
    let (lhs, op) = kv["interpolant"]
        .rsplit_once(' ')
        .unwrap()
        .0
        .rsplit_once(' ')
        .unwrap();
    assert_eq!(op, ">");
    assert!(poly(lhs).positive_multiple_of(&poly("2*y + x^2")).is_some());
    for key in [
        "depth",
        "degree",
        "precision",
        "time.build",
        "time.solve",
        "time.total",
    ] {
        assert!(kv.contains_key(key), "missing {key}");
    }
    // The written certificate audits in a fresh process.
    let v = run(&["validate-cert", p(&input("row4")), p(&cert)]);
    assert_eq!(code(&v), 0);
}

#[test]
fn infeasible_relaxation_exits_one() {
    // Nested discs: strict-left has no certificate at this degree.
    let o = run(&[
        "interpolate",
        p(&input("row6")),
        "-b",
        "2",
        "-c",
        "5",
        "--mode",
        "strict-left",
        "--no-cert",
        "--format",
        "structured",
    ]);
    assert_eq!(code(&o), 1);
    assert_eq!(structured(&o)["status"], "fail");
}

#[test]
fn usage_and_parse_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.sas");
    std::fs::write(&bad, "T: x >\nT': x < 0\n").unwrap();
    let missing = dir.path().join("missing.sas");
    let (row4, row8) = (input("row4"), input("row8"));
    let cases: Vec<Vec<&str>> = vec![
        vec![],
        vec!["frobnicate"],
        vec!["interpolate", p(&missing)],
        vec!["interpolate", p(&bad)],
        vec!["interpolate", p(&row4), "-c", "0"],
        vec!["interpolate", p(&row4), "--mode", "sideways"],
        vec!["interpolate", p(&row4), "--solver", "file=x.sol"],
        vec!["interpolate", p(&row4), "--sweep", "1,2"],
        vec!["validate-cert", p(&row4), p(&missing)],
        vec!["cfe", "-d", "3", "0", "0"],
        vec!["cfe", "-d", "3"],
        vec!["plot-data", p(&row4)],
        vec!["plot-data", p(&row8), "--interpolant", "x > 0"],
    ];
    for args in cases {
        let o = run(&args);
        assert_eq!(code(&o), 2, "args {args:?}");
        assert!(!o.stderr.is_empty(), "args {args:?}");
    }
}

#[test]
fn shipped_certificates_validate() {
    for name in [
        "row1",
        "row2",
        "row3",
        "row4",
        "row5",
        "row7",
        "row8",
        "row9",
        "cegar1",
        "cegar2a",
        "cegar2b",
        "parabolas",
    ] {
        let o = run(&[
            "validate-cert",
            p(&input(name)),
            p(&fixture(name)),
            "--format",
            "structured",
        ]);
        assert_eq!(
            code(&o),
            0,
            "{name}: {}",
            String::from_utf8_lossy(&o.stdout)
        );
        assert_eq!(structured(&o)["status"], "pass");
    }
}

#[test]
fn tampered_certificates_fail() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(fixture("row1")).unwrap();

    // Every strict-cone scalar zeroed.
    let zeroed: String = text
        .lines()
        .map(|l| match l.strip_prefix("scalars") {
            Some(rest) => {
                let n = rest.split_whitespace().count();
                format!("scalars{}\n", " 0".repeat(n))
            }
            None => format!("{l}\n"),
        })
        .collect();
    let path = dir.path().join("zeroed.cert");
    std::fs::write(&path, zeroed).unwrap();
    let o = run(&["validate-cert", p(&input("row1")), p(&path)]);
    assert_eq!(code(&o), 1);

    // A certificate for a different problem does not fit.
    let o = run(&["validate-cert", p(&input("row1")), p(&fixture("row4"))]);
    assert_eq!(code(&o), 1);
    let o = run(&["validate-cert", p(&input("row9")), p(&fixture("row1"))]);
    assert_eq!(code(&o), 1);

    // Not a certificate at all.
    let path = dir.path().join("junk.cert");
    std::fs::write(&path, "hello\n").unwrap();
    let o = run(&["validate-cert", p(&input("row1")), p(&path)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn cfe_subcommand_matches_reference_rows() {
    for (d, want) in [
        ("1", "15 1 6"),
        ("4", "204 13 84"),
        ("7", "174293 11125 71851"),
    ] {
        let o = run(&["cfe", "-d", d, "871465", "55625", "359255"]);
        assert_eq!(code(&o), 0);
        assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), want);
    }
}

#[test]
fn plot_data_grid() {
    let o = run(&[
        "plot-data",
        p(&input("row4")),
        "--interpolant",
        "2*y + x^2 > 0",
        "--steps",
        "5",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["x", "y", "in_t", "in_t_prime", "in_s"]);
    assert_eq!(rows.len(), 26);
    for r in &rows[1..] {
        let (t, tp, s) = (r[2] == "1", r[3] == "1", r[4] == "1");
        assert!(!t || s, "T point outside S: {r:?}");
        assert!(!(tp && s), "T' point inside S: {r:?}");
    }
    // Both regions show up on this grid.
    assert!(rows[1..].iter().any(|r| r[2] == "1"));
    assert!(rows[1..].iter().any(|r| r[3] == "1"));
    assert!(rows.contains(&vec!["0", "-1", "0", "1", "0"]));

    let o = run(&[
        "plot-data",
        p(&input("row4")),
        "--interpolant",
        "0 > 0",
        "--steps",
        "0",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        "x,y,in_t,in_t_prime,in_s\n"
    );

    let o = run(&[
        "plot-data",
        p(&input("row4")),
        "--interpolant",
        "0 > 0",
        "--x-range",
        "-1:1",
        "--y-range",
        "-1:1",
        "--steps",
        "7",
    ]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 50);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));

    // From a certificate, written to a file.
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("grid.csv");
    let o = run(&[
        "plot-data",
        p(&input("row4")),
        "--cert",
        p(&fixture("row4")),
        "--steps",
        "3",
        "-o",
        p(&out),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(out).unwrap().lines().count(), 10);
}

#[test]
fn external_solution_round_trip() {
    let dir = TempDir::new().unwrap();
    let export = dir.path().join("sdpa");
    let o = run(&[
        "interpolate",
        p(&input("row4")),
        "-b",
        "2",
        "-c",
        "1",
        "--mode",
        "strict-left",
        "--export-sdpa",
        p(&export),
        "--no-cert",
    ]);
    assert_eq!(code(&o), 0);
    let dat = export.join("pair-0-0-strict-left.dat-s");
    assert!(std::fs::read_to_string(&dat)
        .unwrap()
        .contains("polynomial interpolant"));

    // Stand in for an external solver: solve the same problem and write
    // its solution in the exchange format.
    let prob = parse_problem(&std::fs::read_to_string(input("row4")).unwrap()).unwrap();
    let m = Mode::StrictLeft;
    let (sdp, _) = build(
        &prepare(&prob.t.disjuncts[0], m),
        &prepare(&prob.t_prime.disjuncts[0], m),
        2,
        m,
    )
    .unwrap();
    let sol = solve(&sdp, &SolveOptions::default());
    let sol_path = dir.path().join("row4.sol");
    std::fs::write(&sol_path, write_solution(&sdp, &sol)).unwrap();

    let solver = format!("file={}", p(&sol_path));
    let o = run(&[
        "interpolate",
        p(&input("row4")),
        "-b",
        "2",
        "-c",
        "1",
        "--mode",
        "strict-left",
        "--solver",
        &solver,
        "--no-cert",
        "--format",
        "structured",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(structured(&o)["interpolant"], "x^2 + 2*y > 0");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let mut certs = Vec::new();
    for k in 0..2 {
        let path = dir.path().join(format!("run{k}.cert"));
        let o = run(&[
            "interpolate",
            p(&input("row9")),
            "-b",
            "2",
            "-c",
            "3",
            "-o",
            p(&path),
        ]);
        assert_eq!(code(&o), 0);
        certs.push(std::fs::read(path).unwrap());
    }
    assert_eq!(certs[0], certs[1]);
    assert_eq!(certs[0], std::fs::read(fixture("row9")).unwrap());
}

#[test]
fn sweep_reports_every_cell() {
    let o = run(&[
        "interpolate",
        p(&input("row1")),
        "--sweep",
        "0,1:3,5",
        "--no-cert",
        "--format",
        "structured",
    ]);
    assert_eq!(code(&o), 0);
    let kv = structured(&o);
    for cell in ["sweep.0.3", "sweep.0.5", "sweep.1.3", "sweep.1.5"] {
        assert!(kv.contains_key(cell), "missing {cell}");
    }
    assert_eq!(kv["degree"], "0");
    assert_eq!(kv["precision"], "3");
}

#[test]
fn sequential_flag_gives_same_answer() {
    let args = |seq: bool| {
        let mut a: Vec<String> = ["interpolate", p(&input("row9")), "--no-cert"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        a.extend(["--format".into(), "structured".into()]);
        if seq {
            a.push("--sequential".into());
        }
        a
    };
    let par = bin().args(args(false)).output().unwrap();
    let seq = bin().args(args(true)).output().unwrap();
    assert_eq!(
        structured(&par)["interpolant"],
        structured(&seq)["interpolant"]
    );
}
