//! Acceptance criteria. Every test prints one `criterion N ... pass|FAIL`
//! line to stderr, outside the harness's output capture.

use std::io::Write;
use std::time::{Duration, Instant};

use trm_core::balance::balance_regulated;
use trm_core::irr::{certified_balance_vs_x, classical_irr, irr_of, nu_measure, DEFAULT_IMAX};
use trm_core::testkit::{self, gen, grid_root_oracle, PropertyReport};
use trm_core::{AccumulationFunction, PaymentStream, RegulatedStream, Segment, StepStream};

const SEED: u64 = 20_240_917;

const C1_ROOT_TOL: f64 = 1e-8;
const C1_TOL: f64 = 1e-6;
const C1_MAX_RUNTIME: Duration = Duration::from_secs(1);
const C2_ROOT_TOL: f64 = 1e-10;
const C2_TOL: f64 = 1e-6;
const C3_TOL: f64 = 1e-4;
const SUITE_TRIALS: usize = 1000;
const C4_MAX_RUNTIME: Duration = Duration::from_secs(10);
const C7_STEP_PROJECTS: usize = 100;
const C7_REGULATED_PROJECTS: usize = 20;
const C7_GRID: [f64; 7] = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0];
const C8_PROJECTS: usize = 50;
const C8_ROOT_TOL: f64 = 1e-10;
const C8_SCALES: [f64; 3] = [0.5, 3.0, 1000.0];
const C9_PROJECTS: usize = 100;
const C9_GRID_STEP: f64 = 1e-4;
const C9_X_MAX: f64 = 10.0;
const C9_ROOT_TOL: f64 = 1e-10;
const C9_TOL: f64 = 2e-4;
const C10_MESHES: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
const C10_ROOT_TOL: f64 = 1e-12;
const C10_FINAL_DIFF: f64 = 1e-3;

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "pass" } else { "FAIL" };
    let line = format!("criterion {n:>2} {name}: {verdict} ({detail})\n");
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {n} {name} failed: {detail}");
}

fn print_reports(reports: &[PropertyReport]) {
    let mut err = std::io::stderr().lock();
    for r in reports {
        writeln!(err, "  {r}").unwrap();
    }
}

fn rate(i: f64) -> AccumulationFunction {
    AccumulationFunction::constant_rate(i).unwrap()
}

fn step(pairs: &[(f64, f64)]) -> StepStream {
    StepStream::from_pairs(pairs).unwrap()
}

/// Random step projects with `ν < x_max`.
fn bounded_projects(n: usize, seed: u64, x_max: f64) -> Vec<(StepStream, AccumulationFunction)> {
    let mut rng = gen::rng(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let f = gen::step_project(&mut rng, 12);
        let d = gen::deposit(&mut rng);
        let nu = nu_measure(&PaymentStream::Step(f.clone()), &d, 1e-6).unwrap();
        if nu < x_max {
            out.push((f, d));
        }
    }
    out
}

#[test]
fn criterion_01_loan_irr() {
    let start = Instant::now();
    let loan = step(&[(0.0, -100.0), (2.0, 121.0)]);
    let r = irr_of(&PaymentStream::Step(loan.clone()), &rate(0.05), C1_ROOT_TOL).unwrap();
    let roots = classical_irr(&loan, C1_ROOT_TOL, DEFAULT_IMAX).unwrap();
    let elapsed = start.elapsed();
    let pass = (r.irr - 0.10).abs() <= C1_TOL
        && roots.len() == 1
        && (roots[0] - r.irr).abs() <= C1_TOL
        && elapsed < C1_MAX_RUNTIME;
    report(
        1,
        "loan_irr",
        pass,
        &format!(
            "irr={:.12} classical={roots:?} tol={C1_TOL:e} runtime={elapsed:?}",
            r.irr
        ),
    );
}

#[test]
fn criterion_02_multiple_roots() {
    let f = step(&[(0.0, -100.0), (1.0, 230.0), (2.0, -132.0)]);
    let roots = classical_irr(&f, C2_ROOT_TOL, DEFAULT_IMAX).unwrap();
    let p = PaymentStream::Step(f);
    let at10 = irr_of(&p, &rate(0.10), C2_ROOT_TOL).unwrap().irr;
    let at20 = irr_of(&p, &rate(0.20), C2_ROOT_TOL).unwrap().irr;
    let pass = roots.len() == 2
        && (roots[0] - 0.10).abs() <= C2_TOL
        && (roots[1] - 0.20).abs() <= C2_TOL
        && (at10 - 0.10).abs() <= C2_TOL
        && (at20 - 0.20).abs() <= C2_TOL;
    report(
        2,
        "multiple_roots",
        pass,
        &format!("classical={roots:?} deposit10={at10:.12} deposit20={at20:.12} tol={C2_TOL:e}"),
    );
}

#[test]
fn criterion_03_linear_integral() {
    let f = RegulatedStream::new(vec![Segment::new(0.0, 1.0, vec![0.0, 1.0])]).unwrap();
    let delta = 1.05f64.ln();
    let a = AccumulationFunction::constant_force(delta, -1.0, 2.0).unwrap();
    let cb = balance_regulated(&f, &a, &a, 1.0, C3_TOL).unwrap();
    let exact = 0.05 / delta;
    let pass = (cb.value - exact).abs() <= C3_TOL && cb.error_bound <= C3_TOL;
    report(
        3,
        "linear_integral",
        pass,
        &format!(
            "value={:.10} exact={exact:.10} error_bound={:e} tol={C3_TOL:e}",
            cb.value, cb.error_bound
        ),
    );
}

#[test]
fn criterion_04_axioms() {
    let start = Instant::now();
    let reports = testkit::axiom_reports(SUITE_TRIALS, SEED).unwrap();
    let elapsed = start.elapsed();
    print_reports(&reports);
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    report(
        4,
        "axioms",
        violations == 0 && elapsed < C4_MAX_RUNTIME,
        &format!("trials={SUITE_TRIALS} violations={violations} runtime={elapsed:?}"),
    );
}

#[test]
fn criterion_05_sandwich() {
    let reports = testkit::sandwich_reports(SUITE_TRIALS, SEED).unwrap();
    print_reports(&reports);
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    report(
        5,
        "sandwich",
        violations == 0,
        &format!("trials={SUITE_TRIALS} violations={violations}"),
    );
}

#[test]
fn criterion_06_sup_norm_bound() {
    let r = testkit::sup_norm_suite(SUITE_TRIALS, SEED).unwrap();
    print_reports(std::slice::from_ref(&r));
    report(
        6,
        "sup_norm_bound",
        r.passed(),
        &format!("trials={SUITE_TRIALS} violations={}", r.violations),
    );
}

#[test]
fn criterion_07_strict_decrease() {
    let mut rng = gen::rng(SEED);
    let mut failures = 0;
    let mut worst_step = f64::INFINITY;
    for _ in 0..C7_STEP_PROJECTS {
        let f = gen::step_project(&mut rng, 12);
        let d = gen::deposit(&mut rng);
        let end = f.minimal_support().unwrap().hi;
        let p = PaymentStream::Step(f);
        let values: Vec<f64> = C7_GRID
            .iter()
            .map(|&x| certified_balance_vs_x(&p, &d, end, x, 1.0).unwrap().value)
            .collect();
        for w in values.windows(2) {
            worst_step = worst_step.min(w[0] - w[1]);
            if w[1] >= w[0] {
                failures += 1;
            }
        }
    }

    // Regulated projects: the gap must exceed both certification errors.
    // Tolerances start coarse and are halved until the gap is certified.
    let mut worst_ratio = f64::INFINITY;
    let d = rate(0.05);
    for _ in 0..C7_REGULATED_PROJECTS {
        let f = gen::regulated_project(&mut rng);
        let end = f.minimal_support().unwrap().hi;
        let p = PaymentStream::Regulated(f.clone());
        for w in C7_GRID.windows(2) {
            let mut tol = 0.1 * f.sup_norm().max(1.0);
            let certified = loop {
                let lo = certified_balance_vs_x(&p, &d, end, w[0], tol).unwrap();
                let hi = certified_balance_vs_x(&p, &d, end, w[1], tol).unwrap();
                let margin = lo.value - hi.value;
                let err = lo.error_bound + hi.error_bound;
                if margin > err {
                    worst_ratio = worst_ratio.min(margin / err);
                    break true;
                }
                if tol < 1e-3 {
                    break false;
                }
                tol /= 2.0;
            };
            if !certified {
                failures += 1;
            }
        }
    }
    report(
        7,
        "strict_decrease",
        failures == 0,
        &format!(
            "step={C7_STEP_PROJECTS} regulated={C7_REGULATED_PROJECTS} failures={failures} \
             min_step_gap={worst_step:e} min_margin_over_error={worst_ratio:.3}"
        ),
    );
}

#[test]
fn criterion_08_scale_invariance() {
    let projects = bounded_projects(C8_PROJECTS, SEED, 100.0);
    let mut worst: f64 = 0.0;
    for (f, d) in &projects {
        let p = PaymentStream::Step(f.clone());
        let base = irr_of(&p, d, C8_ROOT_TOL).unwrap().irr;
        for lambda in C8_SCALES {
            let scaled = irr_of(&p.scaled(lambda), d, C8_ROOT_TOL).unwrap().irr;
            worst = worst.max((scaled - base).abs());
        }
    }
    report(
        8,
        "scale_invariance",
        worst <= 2.0 * C8_ROOT_TOL,
        &format!(
            "projects={C8_PROJECTS} max_diff={worst:e} bound={:e}",
            2.0 * C8_ROOT_TOL
        ),
    );
}

#[test]
fn criterion_09_oracle_equivalence() {
    let projects = bounded_projects(C9_PROJECTS, SEED + 9, C9_X_MAX - 0.5);
    let mut worst: f64 = 0.0;
    let mut oracle_errors = 0;
    for (f, d) in &projects {
        let p = PaymentStream::Step(f.clone());
        let nu = nu_measure(&p, d, C9_ROOT_TOL).unwrap();
        match grid_root_oracle(&p, d, C9_X_MAX, C9_GRID_STEP) {
            Ok(grid) => worst = worst.max((grid - nu).abs()),
            Err(_) => oracle_errors += 1,
        }
    }
    report(
        9,
        "oracle_equivalence",
        oracle_errors == 0 && worst <= C9_TOL,
        &format!(
            "projects={C9_PROJECTS} max_diff={worst:e} tol={C9_TOL:e} oracle_errors={oracle_errors}"
        ),
    );
}

#[test]
fn criterion_10_approximation_robustness() {
    // Outflow density 300 on [0, 0.5), inflow density 800 on [0.5, 1).
    let f = RegulatedStream::new(vec![
        Segment::new(0.0, 0.5, vec![0.0, -300.0]),
        Segment::new(0.5, 1.0, vec![-150.0, 800.0]),
    ])
    .unwrap();
    let d = rate(0.05);
    let irrs: Vec<f64> = C10_MESHES
        .iter()
        .map(|&eps| {
            let step = f.approximate(eps).unwrap();
            irr_of(&PaymentStream::Step(step), &d, C10_ROOT_TOL)
                .unwrap()
                .irr
        })
        .collect();
    let diffs: Vec<f64> = irrs.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let shrinking = diffs.windows(2).all(|w| w[1] < w[0]);
    let last = *diffs.last().unwrap();
    report(
        10,
        "approximation_robustness",
        shrinking && last < C10_FINAL_DIFF,
        &format!("irrs={irrs:?} diffs={diffs:?} final_bound={C10_FINAL_DIFF:e}"),
    );
}
