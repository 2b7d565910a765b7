use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polyinterp::driver::{run_formula, sample_soundness, RunConfig};
use polyinterp::par::{self, Exec};
use polyinterp::relax::{Interpolant, SymMat};
use polyinterp::sas::{parse, parse_problem, Problem};
use polyinterp::validate::is_psd_exact;

const MODES: [(&str, Exec); 2] = [
    ("parallel", Exec::Parallel),
    ("sequential", Exec::Sequential),
];

fn problem(name: &str) -> Problem {
    let path = format!("{}/inputs/{name}.sas", env!("CARGO_MANIFEST_DIR"));
    parse_problem(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Gram matrices `AᵀA` of random integer matrices.
fn gram_batch(n: usize, dim: usize, seed: u64) -> Vec<SymMat<BigRational>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a: Vec<Vec<i64>> = (0..dim)
                .map(|_| (0..dim).map(|_| rng.random_range(-9..=9)).collect())
                .collect();
            let rows = (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|j| {
                            let s: i64 = (0..dim).map(|k| a[k][i] * a[k][j]).sum();
                            BigRational::from_integer(BigInt::from(s))
                        })
                        .collect()
                })
                .collect();
            SymMat::from_rows(rows)
        })
        .collect()
}

fn psd_checks(c: &mut Criterion) {
    let mats = gram_batch(64, 8, 7);
    let mut g = c.benchmark_group("exact_psd_64x8");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::map(exec, black_box(&mats), is_psd_exact))
        });
    }
    g.finish();
}

fn soundness_sampling(c: &mut Criterion) {
    let p = problem("row4");
    let f = parse("2*y + x^2 > 0").unwrap();
    let interp = Interpolant::atom(f.disjuncts[0].strict_or_diseq[0].clone(), true);
    let mut g = c.benchmark_group("soundness_2000");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sample_soundness(&p.t, &p.t_prime, black_box(&interp), 2000, 1, exec))
        });
    }
    g.finish();
}

fn disjunct_pairs(c: &mut Criterion) {
    let p = problem("row9");
    let mut g = c.benchmark_group("run_formula_2x2");
    g.sample_size(20);
    for (name, exec) in MODES {
        let cfg = RunConfig {
            max_degree: 2,
            precision: 3,
            exec,
            ..RunConfig::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_formula(&p.t, &p.t_prime, black_box(&cfg)))
        });
    }
    g.finish();
}

criterion_group!(benches, psd_checks, soundness_sampling, disjunct_pairs);
criterion_main!(benches);
