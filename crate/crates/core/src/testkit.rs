//! Independent oracles and seeded property drivers.
//!
//! The suites exercise the balance engine on random step streams and check
//! the axioms of balance functions, the sandwich inequalities bounding
//! two-rate balances by one-sided ones, and the sup-norm continuity bound.
//! Every suite is deterministic in `(trials, seed)`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::accumulation::AccumulationFunction;
use crate::balance::{
    balance_at, common_upper_bound, trm_trajectory_with, update_map, BalanceError,
};
use crate::irr::{balance_vs_x, IrrError};
use crate::streams::{PaymentStream, StepStream};

/// Relative slack applied to every inequality: `1e-9 · (1 + magnitude)`.
pub const INEQUALITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("terminal balance changes sign {0} times on the grid")]
    MultipleSignChanges(usize),
    #[error("terminal balance never becomes negative up to x = {0}")]
    NoNegativeValue(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Irr(#[from] IrrError),
}

/// Outcome of one property over many random trials.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Smallest observed `bound - value`; negative values beyond the slack
    /// are violations.
    pub worst_margin: f64,
    pub seed: u64,
}

impl PropertyReport {
    pub fn new(name: impl Into<String>, trials: usize, seed: u64) -> Self {
        PropertyReport {
            name: name.into(),
            trials,
            violations: 0,
            worst_margin: f64::INFINITY,
            seed,
        }
    }

    /// Records `lhs <= rhs` with slack `INEQUALITY_SLACK · (1 + magnitude)`.
    pub fn check_le(&mut self, lhs: f64, rhs: f64, magnitude: f64) {
        let margin = rhs - lhs;
        self.record(margin, INEQUALITY_SLACK * (1.0 + magnitude.abs()));
    }

    /// Records `|lhs - rhs| <= tol`.
    pub fn check_close(&mut self, lhs: f64, rhs: f64, tol: f64) {
        self.record(tol - (lhs - rhs).abs(), 0.0);
    }

    fn record(&mut self, margin: f64, slack: f64) {
        if margin.is_nan() || margin < -slack {
            self.violations += 1;
        }
        if margin.is_nan() {
            self.worst_margin = f64::NAN;
        } else if !self.worst_margin.is_nan() {
            self.worst_margin = self.worst_margin.min(margin);
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// Folds several reports into one under a new name.
    pub fn merge(name: &str, reports: &[PropertyReport]) -> PropertyReport {
        let mut out = PropertyReport::new(
            name,
            reports.iter().map(|r| r.trials).max().unwrap_or(0),
            reports.first().map_or(0, |r| r.seed),
        );
        for r in reports {
            out.violations += r.violations;
            out.worst_margin = out.worst_margin.min(r.worst_margin);
        }
        out
    }
}

impl fmt::Display for PropertyReport {
    /// `name,trials,violations,worst_margin,seed`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{:e},{}",
            self.name, self.trials, self.violations, self.worst_margin, self.seed
        )
    }
}

/// Random inputs for the suites and acceptance tests.
pub mod gen {
    use super::*;
    use crate::accumulation::DensitySegment;
    use crate::streams::{CashFlow, RegulatedStream, Segment};

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Up to `max_flows` flows, amounts in `[-1000, 1000]`, times in `[0, 10]`.
    pub fn step_stream(rng: &mut impl Rng, max_flows: usize) -> StepStream {
        let n = rng.gen_range(1..=max_flows);
        let flows: Vec<CashFlow> = (0..n)
            .map(|_| CashFlow::new(rng.gen_range(0.0..=10.0), rng.gen_range(-1000.0..=1000.0)))
            .collect();
        StepStream::from_cashflows(flows).expect("finite")
    }

    /// Step investment project: the earliest flow is an outflow of at least
    /// 10, the next flow comes at least half a year later, and the flows span
    /// at least one year.
    pub fn step_project(rng: &mut impl Rng, max_flows: usize) -> StepStream {
        loop {
            let f = step_stream(rng, max_flows.max(2));
            let flows = f.flows();
            if flows.len() < 2
                || flows[1].t - flows[0].t < 0.5
                || flows[flows.len() - 1].t - flows[0].t < 1.0
            {
                continue;
            }
            let mut flows = flows.to_vec();
            flows[0].amount = -flows[0].amount.abs().max(10.0);
            return StepStream::from_cashflows(flows).expect("finite");
        }
    }

    /// A stream sharing most of `f`'s times, with perturbed amounts and a
    /// few extra flows.
    pub fn perturbed(rng: &mut impl Rng, f: &StepStream) -> StepStream {
        let mut flows: Vec<CashFlow> = f
            .flows()
            .iter()
            .map(|c| {
                let scale = rng.gen_range(0.0..=50.0);
                CashFlow::new(c.t, c.amount + rng.gen_range(-scale..=scale))
            })
            .collect();
        for _ in 0..rng.gen_range(0..=3) {
            flows.push(CashFlow::new(
                rng.gen_range(0.0..=10.0),
                rng.gen_range(-100.0..=100.0),
            ));
        }
        StepStream::from_cashflows(flows).expect("finite")
    }

    fn density(rng: &mut impl Rng) -> AccumulationFunction {
        let n = rng.gen_range(1..=3);
        let mut cuts: Vec<f64> = (0..n + 1).map(|_| rng.gen_range(-1.0..=11.0)).collect();
        cuts.sort_by(f64::total_cmp);
        let segments = cuts
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                let c0 = rng.gen_range(-0.15..=0.2);
                let c1 = if rng.gen_bool(0.5) {
                    rng.gen_range(-0.05..=0.05)
                } else {
                    0.0
                };
                DensitySegment::new(w[0], w[1], vec![c0, c1])
            })
            .collect();
        AccumulationFunction::force(segments).expect("ordered segments")
    }

    /// Positive accumulation function of one of the closed-form kinds.
    pub fn positive_accumulation(rng: &mut impl Rng) -> AccumulationFunction {
        let simple = |rng: &mut dyn rand::RngCore| -> AccumulationFunction {
            match rng.gen_range(0..3) {
                0 => AccumulationFunction::constant_rate(rng.gen_range(-0.3..=0.4)).unwrap(),
                1 => AccumulationFunction::power(rng.gen_range(0.6..=1.4)).unwrap(),
                _ => density(&mut ChaCha8Rng::seed_from_u64(rng.gen())),
            }
        };
        if rng.gen_bool(0.2) {
            let a = simple(rng);
            let b = simple(rng);
            a.times(&b)
        } else {
            simple(rng)
        }
    }

    /// Any accumulation function, occasionally the zero function.
    pub fn accumulation(rng: &mut impl Rng) -> AccumulationFunction {
        match rng.gen_range(0..20) {
            0 => AccumulationFunction::zero(),
            1 => AccumulationFunction::constant_rate(-1.0).unwrap(),
            _ => positive_accumulation(rng),
        }
    }

    /// Deposit accumulation function for the rate-of-return suites.
    pub fn deposit(rng: &mut impl Rng) -> AccumulationFunction {
        if rng.gen_bool(0.7) {
            AccumulationFunction::constant_rate(rng.gen_range(0.0..=0.25)).unwrap()
        } else {
            positive_accumulation(rng)
        }
    }

    /// Regulated stream supported in `[0, 2]` with up to three polynomial
    /// segments of degree at most two.
    pub fn regulated_stream(rng: &mut impl Rng) -> RegulatedStream {
        let n = rng.gen_range(1..=3);
        let mut cuts: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.1..=1.9)).collect();
        cuts.push(0.0);
        cuts.push(2.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let segments = cuts
            .windows(2)
            .map(|w| {
                let deg = rng.gen_range(0..=2);
                let coeffs: Vec<f64> = (0..=deg).map(|_| rng.gen_range(-10.0..=10.0)).collect();
                Segment::new(w[0], w[1], coeffs)
            })
            .collect();
        RegulatedStream::new(segments).expect("contiguous")
    }

    /// Regulated investment project on `[0, horizon]`: an initial outflow
    /// (either a jump or a decreasing density), then mixed segments.
    pub fn regulated_project(rng: &mut impl Rng) -> RegulatedStream {
        let horizon = rng.gen_range(1.0..=4.0);
        let n = rng.gen_range(2..=4);
        let mut cuts: Vec<f64> = (0..n - 1)
            .map(|_| rng.gen_range(0.1..horizon - 0.1))
            .collect();
        cuts.push(0.0);
        cuts.push(horizon);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut segments = Vec::new();
        let mut level = 0.0;
        for (k, w) in cuts.windows(2).enumerate() {
            let len = w[1] - w[0];
            let coeffs = if k == 0 {
                let jump = if rng.gen_bool(0.5) {
                    -rng.gen_range(10.0..=100.0)
                } else {
                    0.0
                };
                vec![jump, -rng.gen_range(10.0..=100.0)]
            } else {
                let jump = rng.gen_range(-20.0..=40.0);
                let slope = rng.gen_range(-30.0..=120.0);
                let curve = rng.gen_range(-10.0..=10.0);
                vec![level + jump, slope, curve]
            };
            let seg = Segment::new(w[0], w[1], coeffs);
            level = seg.poly.eval(len);
            segments.push(seg);
        }
        RegulatedStream::new(segments).expect("contiguous")
    }
}

fn magnitude(f: &StepStream) -> f64 {
    f.flows().iter().map(|c| c.amount.abs()).sum()
}

fn union_times(streams: &[&StepStream]) -> Vec<f64> {
    let mut times: Vec<f64> = streams.iter().flat_map(|s| s.times()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

fn scale_of(f: &StepStream, a: &AccumulationFunction, b: &AccumulationFunction) -> f64 {
    let y = match f.minimal_support() {
        Some(s) => common_upper_bound(a, b).evaluate(s.lo, s.hi).unwrap_or(1.0),
        None => 1.0,
    };
    magnitude(f) * y.max(1.0)
}

/// Balance axioms on random step streams:
/// later flows do not affect earlier balances, a flow at `t` adds to the
/// balance at `t`, positive scaling, replacement by the update map, and
/// continuity under step approximation of regulated streams.
pub fn axiom_reports(trials: usize, seed: u64) -> Result<Vec<PropertyReport>, BalanceError> {
    let mut rng = gen::rng(seed);
    let mut later = PropertyReport::new("A1_later_flows", trials, seed);
    let mut final_flow = PropertyReport::new("A2_final_flow_linearity", trials, seed);
    let mut scale = PropertyReport::new("A3_scale", trials, seed);
    let mut replacement = PropertyReport::new("A4_replacement", trials, seed);
    let mut continuity = PropertyReport::new("A5_continuity", trials, seed);

    for _ in 0..trials {
        let f = gen::step_stream(&mut rng, 12);
        let a = gen::accumulation(&mut rng);
        let b = gen::accumulation(&mut rng);
        let tol = 1e-12 * scale_of(&f, &a, &b).max(1.0);

        // A1: a flow after r leaves the balance at r unchanged (exactly).
        let r = rng.gen_range(-1.0..=10.0);
        let u = rng.gen_range(r..=11.0);
        if u > r {
            let g = f.with_flow(u, rng.gen_range(-1000.0..=1000.0))?;
            later.check_close(balance_at(&g, &a, &b, r)?, balance_at(&f, &a, &b, r)?, 0.0);
        }

        // A2: B_t(f + λ c_t) = B_t(f) + λ, at an event time and a free time.
        let lambda = rng.gen_range(-1000.0..=1000.0);
        let times: Vec<f64> = f.times().collect();
        for t in [
            times[rng.gen_range(0..times.len())],
            rng.gen_range(-1.0..=11.0),
        ] {
            let g = f.with_flow(t, lambda)?;
            final_flow.check_close(
                balance_at(&g, &a, &b, t)?,
                balance_at(&f, &a, &b, t)? + lambda,
                tol + 1e-12 * lambda.abs(),
            );
        }

        // A3: B(λf) = λ B(f) for λ >= 0, and B(uf) = -u B(-f) for u <= 0.
        let lam = rng.gen_range(0.0..=5.0);
        let u_neg = -rng.gen_range(0.0..=5.0);
        let base = trm_trajectory_with(&f, &a, &b, &[])?;
        let scaled = trm_trajectory_with(&f.scaled(lam), &a, &b, &times)?;
        let neg = trm_trajectory_with(&f.scaled(u_neg), &a, &b, &times)?;
        let minus = trm_trajectory_with(&f.scaled(-1.0), &a, &b, &times)?;
        for (k, e) in base.events.iter().enumerate() {
            scale.check_close(
                scaled.events[k].balance,
                lam * e.balance,
                tol * lam.max(1.0),
            );
            scale.check_close(
                neg.events[k].balance,
                -u_neg * minus.events[k].balance,
                tol * u_neg.abs().max(1.0),
            );
        }
        // Single flows keep their sign.
        let s = times[0];
        let unit = StepStream::from_pairs(&[(s, 1.0)])?;
        let t_later = s + rng.gen_range(0.0..=3.0);
        scale.check_le(0.0, balance_at(&unit, &a, &b, t_later)?, 0.0);
        scale.check_le(balance_at(&unit.scaled(-1.0), &a, &b, t_later)?, 0.0, 0.0);

        // A4: the update map at s preserves every later balance.
        for (i, &s) in times.iter().enumerate() {
            let updated = update_map(&f, &a, &b, s)?;
            for &t in &times[i..] {
                let want = balance_at(&f, &a, &b, t)?;
                let got = balance_at(&updated, &a, &b, t)?;
                replacement.check_close(got, want, 1e-10 * scale_of(&f, &a, &b).max(1.0));
            }
        }

        // A5: balances of step approximants of a regulated stream converge
        // at the rate 2·y(t_0, t)·‖f_n - f_m‖.
        let g = gen::regulated_stream(&mut rng);
        if let Some(support) = g.minimal_support() {
            let t = rng.gen_range(support.lo..=support.hi + 1.0);
            let y = common_upper_bound(&a, &b).evaluate(support.lo, t)?;
            let (eps_coarse, eps_fine) = (0.5, 0.05);
            let coarse = balance_at(&g.approximate(eps_coarse)?, &a, &b, t)?;
            let fine = balance_at(&g.approximate(eps_fine)?, &a, &b, t)?;
            let bound = 2.0 * y * (eps_coarse + eps_fine);
            continuity.check_le((coarse - fine).abs(), bound, bound);

            let certified = crate::balance::balance_regulated(&g, &a, &b, t, 2.0 * y * 0.1)?;
            let bound = 2.0 * y * eps_coarse + certified.error_bound;
            continuity.check_le((certified.value - coarse).abs(), bound, bound);
        }
    }
    Ok(vec![later, final_flow, scale, replacement, continuity])
}

/// All five axioms folded into one report.
pub fn axiom_suite(trials: usize, seed: u64) -> Result<PropertyReport, BalanceError> {
    Ok(PropertyReport::merge(
        "axioms",
        &axiom_reports(trials, seed)?,
    ))
}

/// Comparison and sandwich inequalities:
///
/// * raising the deposit function raises balances, raising the investment
///   function lowers them;
/// * `B(f)(0, y) <= B(f)(a, b) <= B(f)(y, 0)` for a common upper bound `y`;
/// * `B(f - g)(0, y) <= B(f)(a, b) - B(g)(a, b) <= B(f - g)(y, 0)`.
pub fn sandwich_reports(trials: usize, seed: u64) -> Result<Vec<PropertyReport>, BalanceError> {
    let mut rng = gen::rng(seed);
    let mut comparison = PropertyReport::new("comparison", trials, seed);
    let mut sandwich = PropertyReport::new("sandwich", trials, seed);
    let mut difference = PropertyReport::new("difference_sandwich", trials, seed);
    let zero = AccumulationFunction::zero();

    for _ in 0..trials {
        let f = gen::step_stream(&mut rng, 12);
        let g = gen::perturbed(&mut rng, &f);
        let a = gen::accumulation(&mut rng);
        let b = gen::accumulation(&mut rng);
        let y = common_upper_bound(&a, &b);
        let (a_up, b_up) = (a.monotone_upper_bound(), b.monotone_upper_bound());
        let diff = f.combine(&g, 1.0, -1.0);
        let times = union_times(&[&f, &g]);

        let run = |s: &StepStream, dep: &AccumulationFunction, inv: &AccumulationFunction| {
            trm_trajectory_with(s, dep, inv, &times).map(|tr| tr.balances())
        };
        let f_ab = run(&f, &a, &b)?;
        let g_ab = run(&g, &a, &b)?;
        let f_cb = run(&f, &a_up, &b)?;
        let f_ad = run(&f, &a, &b_up)?;
        let f_0y = run(&f, &zero, &y)?;
        let f_y0 = run(&f, &y, &zero)?;
        let d_0y = run(&diff, &zero, &y)?;
        let d_y0 = run(&diff, &y, &zero)?;

        for j in 0..times.len() {
            let m = f_ab[j].abs() + f_cb[j].abs() + f_ad[j].abs();
            comparison.check_le(f_ab[j], f_cb[j], m);
            comparison.check_le(f_ad[j], f_ab[j], m);

            let m = f_0y[j].abs() + f_ab[j].abs() + f_y0[j].abs();
            sandwich.check_le(f_0y[j], f_ab[j], m);
            sandwich.check_le(f_ab[j], f_y0[j], m);

            let gap = f_ab[j] - g_ab[j];
            let m = d_0y[j].abs() + d_y0[j].abs() + f_ab[j].abs() + g_ab[j].abs();
            difference.check_le(d_0y[j], gap, m);
            difference.check_le(gap, d_y0[j], m);
        }
    }
    Ok(vec![comparison, sandwich, difference])
}

pub fn sandwich_suite(trials: usize, seed: u64) -> Result<PropertyReport, BalanceError> {
    Ok(PropertyReport::merge(
        "sandwich",
        &sandwich_reports(trials, seed)?,
    ))
}

/// `|B_j(f) - B_j(g)| <= 2 · y(t_0, t_j) · ‖f - g‖` on the common refinement.
pub fn sup_norm_suite(trials: usize, seed: u64) -> Result<PropertyReport, BalanceError> {
    let mut rng = gen::rng(seed);
    let mut report = PropertyReport::new("sup_norm_bound", trials, seed);
    for _ in 0..trials {
        let f = gen::step_stream(&mut rng, 12);
        let g = gen::perturbed(&mut rng, &f);
        let a = gen::accumulation(&mut rng);
        let b = gen::accumulation(&mut rng);
        check_sup_norm_bound(&mut report, &f, &g, &a, &b)?;
    }
    Ok(report)
}

/// Checks the continuity bound for one pair of step streams at every time
/// of their common refinement.
pub fn check_sup_norm_bound(
    report: &mut PropertyReport,
    f: &StepStream,
    g: &StepStream,
    a: &AccumulationFunction,
    b: &AccumulationFunction,
) -> Result<(), BalanceError> {
    let times = union_times(&[f, g]);
    let Some(&t0) = times.first() else {
        return Ok(());
    };
    let y = common_upper_bound(a, b);
    let norm = f.combine(g, 1.0, -1.0).sup_norm();
    let bf = trm_trajectory_with(f, a, b, &times)?.balances();
    let bg = trm_trajectory_with(g, a, b, &times)?.balances();
    for (j, &t) in times.iter().enumerate() {
        let bound = 2.0 * y.evaluate(t0, t)? * norm;
        report.check_le((bf[j] - bg[j]).abs(), bound, bf[j].abs() + bg[j].abs());
    }
    Ok(())
}

/// Brute-force `ν(f)`: scans `B^x_d(f)` on `{0, step, 2·step, …, x_max}` and
/// returns the midpoint of the single cell where it turns negative, or 0
/// when it is never positive.
pub fn grid_root_oracle(
    f: &PaymentStream,
    deposit: &AccumulationFunction,
    x_max: f64,
    step: f64,
) -> Result<f64, OracleError> {
    if !step.is_finite() || !x_max.is_finite() || step <= 0.0 || x_max <= 0.0 {
        return Err(OracleError::Precondition(
            "step and x_max must be positive".into(),
        ));
    }
    let support = f
        .minimal_support()
        .ok_or_else(|| OracleError::Precondition("zero stream".into()))?;
    let balance_tol = match f {
        PaymentStream::Step(_) => 0.0,
        PaymentStream::Regulated(r) => 1e-6 * r.sup_norm().max(1.0),
    };
    let n = (x_max / step).round() as usize;
    let values: Vec<f64> = (0..=n)
        .map(|k| balance_vs_x(f, deposit, support.hi, k as f64 * step, balance_tol))
        .collect::<Result<_, _>>()?;

    if values.iter().all(|&v| v <= 0.0) {
        return Ok(0.0);
    }
    let changes = values
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count();
    if changes > 1 {
        return Err(OracleError::MultipleSignChanges(changes));
    }
    match values.iter().position(|&v| v < 0.0) {
        Some(k) if k > 0 => Ok((k as f64 - 0.5) * step),
        Some(_) => Ok(0.0),
        None => Err(OracleError::NoNegativeValue(x_max)),
    }
}

/// Summation-by-parts bound: for non-increasing nonnegative `coeffs` and
/// inputs whose partial sums `S_m` are non-increasing and nonpositive,
/// checks `Σ coeffs_k · inputs_k <= coeffs_m · S_m <= 0` for every `m`.
pub fn abel_bound_oracle(coeffs: &[f64], inputs: &[f64]) -> Result<bool, OracleError> {
    if coeffs.len() != inputs.len() {
        return Err(OracleError::Precondition(
            "coefficient and input lengths differ".into(),
        ));
    }
    if coeffs.iter().any(|&c| c < 0.0) || coeffs.windows(2).any(|w| w[1] > w[0]) {
        return Err(OracleError::Precondition(
            "coefficients must be nonnegative and non-increasing".into(),
        ));
    }
    let partial: Vec<f64> = inputs
        .iter()
        .scan(0.0, |acc, &u| {
            *acc += u;
            Some(*acc)
        })
        .collect();
    if partial.iter().any(|&s| s > 0.0) || partial.windows(2).any(|w| w[1] > w[0]) {
        return Err(OracleError::Precondition(
            "partial sums must be nonpositive and non-increasing".into(),
        ));
    }
    let total: f64 = coeffs.iter().zip(inputs).map(|(a, u)| a * u).sum();
    let slack = INEQUALITY_SLACK
        * (1.0
            + coeffs
                .iter()
                .zip(inputs)
                .map(|(a, u)| (a * u).abs())
                .sum::<f64>());
    Ok(coeffs
        .iter()
        .zip(&partial)
        .all(|(a, s)| total <= a * s + slack && a * s <= 0.0))
}
