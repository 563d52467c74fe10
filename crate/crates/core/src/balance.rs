//! Two-rate balances.
//!
//! For a step stream with cash flows `C_j` at times `t_j` the balance obeys
//!
//! ```text
//! B_0     = C_0
//! B_{j+1} = a(t_j, t_{j+1}) · B_j + C_{j+1}   if B_j >= 0
//! B_{j+1} = b(t_j, t_{j+1}) · B_j + C_{j+1}   if B_j <  0
//! ```
//!
//! where `a` is the deposit and `b` the investment accumulation function.
//! Balances at other times are obtained by inserting a zero cash flow.
//! Regulated streams are handled through step approximations whose error
//! is bounded by `2 · y(t_0, t) · ‖f - f_n‖` with `y` a monotone increasing
//! common upper bound of `a` and `b`.

use std::fmt;

use thiserror::Error;

use crate::accumulation::{AccumulationError, AccumulationFunction};
use crate::streams::{CashFlow, RegulatedStream, StepStream, StreamError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BalanceError {
    #[error(transparent)]
    Accumulation(#[from] AccumulationError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("time {t} precedes the first cash flow at {first}")]
    BeforeSupport { t: f64, first: f64 },
    #[error("balance tolerance must be positive, got {0}")]
    NonPositiveTolerance(f64),
    #[error("upper bound of the accumulation functions is not finite on [{lo}, {t}]")]
    UnboundedUpperBound { lo: f64, t: f64 },
}

/// Which accumulation function carried the previous balance forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Deposit,
    Investment,
    /// The previous balance was exactly zero (or there was none), so both
    /// branches give the same result.
    Boundary,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Deposit => "deposit",
            Branch::Investment => "investment",
            Branch::Boundary => "boundary",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceEvent {
    pub t: f64,
    pub balance: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceTrajectory {
    pub events: Vec<BalanceEvent>,
    pub deposit: AccumulationFunction,
    pub investment: AccumulationFunction,
}

impl BalanceTrajectory {
    pub fn balances(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.balance).collect()
    }

    /// Balance recorded at event time `t`, if `t` is an event time.
    pub fn balance_at_event(&self, t: f64) -> Option<f64> {
        self.events.iter().find(|e| e.t == t).map(|e| e.balance)
    }

    pub fn final_balance(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.balance)
    }
}

/// A balance of a regulated stream together with its certified error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedBalance {
    pub value: f64,
    /// `2 · y(t_0, t) · mesh_eps`.
    pub error_bound: f64,
    /// Sup-norm distance between the stream and the approximant used.
    pub mesh_eps: f64,
}

/// Carries `balance` from `s` to `t` with the branch its sign selects.
#[inline]
fn carry(
    balance: f64,
    s: f64,
    t: f64,
    deposit: &AccumulationFunction,
    investment: &AccumulationFunction,
) -> Result<(f64, Branch), AccumulationError> {
    if balance > 0.0 {
        Ok((deposit.evaluate(s, t)? * balance, Branch::Deposit))
    } else if balance < 0.0 {
        Ok((investment.evaluate(s, t)? * balance, Branch::Investment))
    } else {
        Ok((0.0, Branch::Boundary))
    }
}

/// Runs the two-rate iteration over `(time, amount)` events in increasing
/// time order, handing every event to `sink`.
fn iterate<I, F>(
    events: I,
    deposit: &AccumulationFunction,
    investment: &AccumulationFunction,
    mut sink: F,
) -> Result<(), AccumulationError>
where
    I: IntoIterator<Item = CashFlow>,
    F: FnMut(BalanceEvent),
{
    let mut prev: Option<(f64, f64)> = None;
    for CashFlow { t, amount } in events {
        let (carried, branch) = match prev {
            None => (0.0, Branch::Boundary),
            Some((s, b)) => carry(b, s, t, deposit, investment)?,
        };
        let balance = carried + amount;
        sink(BalanceEvent { t, balance, branch });
        prev = Some((t, balance));
    }
    Ok(())
}

/// Balance trajectory at every cash-flow time of `f`.
pub fn trm_trajectory(
    f: &StepStream,
    deposit: &AccumulationFunction,
    investment: &AccumulationFunction,
) -> Result<BalanceTrajectory, BalanceError> {
    trm_trajectory_with(f, deposit, investment, &[])
}

/// Balance trajectory at every cash-flow time of `f` and at each of
/// `extra_times`, which enter as zero cash flows.
pub fn trm_trajectory_with(
    f: &StepStream,
    deposit: &AccumulationFunction,
    investment: &AccumulationFunction,
    extra_times: &[f64],
) -> Result<BalanceTrajectory, BalanceError> {
    let mut extra: Vec<f64> = extra_times.to_vec();
    extra.sort_by(f64::total_cmp);
    extra.dedup();

    let mut merged = Vec::with_capacity(f.len() + extra.len());
    let mut flows = f.flows().iter().peekable();
    let mut extra = extra.into_iter().peekable();
    loop {
        match (flows.peek(), extra.peek()) {
            (Some(c), Some(&t)) if t < c.t => {
                merged.push(CashFlow::new(t, 0.0));
                extra.next();
            }
            (Some(c), Some(&t)) => {
                if t == c.t {
                    extra.next();
                }
                merged.push(**c);
                flows.next();
            }
            (Some(c), None) => {
                merged.push(**c);
                flows.next();
            }
            (None, Some(&t)) => {
                merged.push(CashFlow::new(t, 0.0));
                extra.next();
            }
            (None, None) => break,
        }
    }

    let mut events = Vec::with_capacity(merged.len());
    iterate(merged, deposit, investment, |e| events.push(e))?;
    Ok(BalanceTrajectory {
        events,
        deposit: deposit.clone(),
        investment: investment.clone(),
    })
}

/// Balance at an arbitrary time `t`. Zero before the first cash flow.
pub fn balance_at(
    f: &StepStream,
    deposit: &AccumulationFunction,
    investment: &AccumulationFunction,
    t: f64,
) -> Result<f64, BalanceError> {
    let flows = f.flows();
    let upto = flows.partition_point(|c| c.t <= t);
    if upto == 0 {
        return Ok(0.0);
    }
    let mut last = 0.0;
    iterate(flows[..upto].iter().copied(), deposit, investment, |e| {
        last = e.balance
    })?;
    let last_t = flows[upto - 1].t;
    if last_t < t {
        last = carry(last, last_t, t, deposit, investment)?.0;
    }
    Ok(last)
}

/// Replaces the history of `f` up to `s` by a single cash flow equal to
/// the balance at `s`.
pub fn update_map(
    f: &StepStream,
    deposit: &AccumulationFunction,
    investment: &AccumulationFunction,
    s: f64,
) -> Result<StepStream, BalanceError> {
    let first = f.flows().first().map_or(f64::INFINITY, |c| c.t);
    if s < first {
        return Err(BalanceError::BeforeSupport { t: s, first });
    }
    let at_s = balance_at(f, deposit, investment, s)?;
    let later = f.flows().iter().filter(|c| c.t > s).copied();
    Ok(StepStream::from_cashflows(
        std::iter::once(CashFlow::new(s, at_s)).chain(later),
    )?)
}

/// Single-rate balance `Σ_{t_k <= t} C_k · a(t_k, t)`.
pub fn linear_balance(
    f: &StepStream,
    accumulation: &AccumulationFunction,
    t: f64,
) -> Result<f64, BalanceError> {
    f.flows()
        .iter()
        .take_while(|c| c.t <= t)
        .map(|c| Ok(c.amount * accumulation.evaluate(c.t, t)?))
        .sum()
}

/// `y(lo, t)` for the product of the monotone upper bounds of `a` and `b`.
pub fn common_upper_bound(
    deposit: &AccumulationFunction,
    investment: &AccumulationFunction,
) -> AccumulationFunction {
    deposit
        .monotone_upper_bound()
        .times(&investment.monotone_upper_bound())
}

/// Balance of a regulated stream at `t`, certified to within `tol`.
///
/// The stream is replaced by a step approximant at sup-norm distance
/// `mesh_eps = tol / (4 · y(t_0, t))`, so that the limit balance lies
/// within `2 · y(t_0, t) · mesh_eps = tol / 2` of the returned value.
pub fn balance_regulated(
    f: &RegulatedStream,
    deposit: &AccumulationFunction,
    investment: &AccumulationFunction,
    t: f64,
    tol: f64,
) -> Result<CertifiedBalance, BalanceError> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(BalanceError::NonPositiveTolerance(tol));
    }
    let Some(support) = f.minimal_support() else {
        return Ok(CertifiedBalance {
            value: 0.0,
            error_bound: 0.0,
            mesh_eps: 0.0,
        });
    };
    if t < support.lo {
        return Ok(CertifiedBalance {
            value: 0.0,
            error_bound: 0.0,
            mesh_eps: 0.0,
        });
    }
    let y = common_upper_bound(deposit, investment).evaluate(support.lo, t)?;
    if !y.is_finite() {
        return Err(BalanceError::UnboundedUpperBound { lo: support.lo, t });
    }
    let eps = tol / (2.0 * y);
    let mesh_eps = eps / 2.0;
    let approx = f.approximate(mesh_eps)?;
    Ok(CertifiedBalance {
        value: balance_at(&approx, deposit, investment, t)?,
        error_bound: 2.0 * y * mesh_eps,
        mesh_eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::Segment;
    use approx::assert_relative_eq;

    fn step(pairs: &[(f64, f64)]) -> StepStream {
        StepStream::from_pairs(pairs).unwrap()
    }

    fn power(x: f64) -> AccumulationFunction {
        AccumulationFunction::power(x).unwrap()
    }

    fn rate(i: f64) -> AccumulationFunction {
        AccumulationFunction::constant_rate(i).unwrap()
    }

    #[test]
    fn trajectory_with_branch_flips() {
        let f = step(&[(0.0, -100.0), (1.0, 150.0), (2.0, -40.0), (3.0, 10.0)]);
        let tr = trm_trajectory(&f, &power(1.0), &power(1.1)).unwrap();
        let b = tr.balances();
        let want = [-100.0, 40.0, 0.0, 10.0];
        for (got, want) in b.iter().zip(want) {
            assert!((got - want).abs() < 1e-12, "{b:?}");
        }
        let branches: Vec<Branch> = tr.events.iter().map(|e| e.branch).collect();
        assert_eq!(branches[0], Branch::Boundary);
        assert_eq!(branches[1], Branch::Investment);
        assert_eq!(branches[2], Branch::Deposit);
    }

    #[test]
    fn equal_rates_give_classical_future_value() {
        let f = step(&[(0.0, 100.0), (1.0, 100.0)]);
        let a = rate(0.10);
        let tr = trm_trajectory(&f, &a, &a).unwrap();
        assert_relative_eq!(tr.final_balance(), 210.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_stream_with_forced_zero_flow() {
        let tr =
            trm_trajectory_with(&StepStream::zero(), &power(1.1), &power(1.2), &[0.0]).unwrap();
        assert_eq!(tr.events.len(), 1);
        assert_eq!(tr.events[0].balance, 0.0);
        assert_eq!(tr.events[0].branch, Branch::Boundary);
        assert!(
            trm_trajectory(&StepStream::zero(), &power(1.1), &power(1.2))
                .unwrap()
                .events
                .is_empty()
        );
    }

    #[test]
    fn balance_between_events() {
        let a = rate(0.10);
        let f = step(&[(0.0, -100.0)]);
        let v = balance_at(&f, &a, &a, 0.5).unwrap();
        assert_relative_eq!(v, -100.0 * 1.1f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(v, -104.88088481701516, max_relative = 1e-12);

        let g = step(&[(0.0, -100.0), (1.0, 110.0)]);
        assert!(balance_at(&g, &a, &a, 1.0).unwrap().abs() < 1e-12);
        assert_eq!(balance_at(&g, &a, &a, -3.0).unwrap(), 0.0);
    }

    #[test]
    fn update_map_examples() {
        let a = rate(0.10);
        let f = step(&[(0.0, -100.0), (1.0, 60.0), (2.0, 60.0)]);
        let u = update_map(&f, &a, &a, 1.0).unwrap();
        assert_eq!(u.len(), 2);
        assert_relative_eq!(u.flows()[0].amount, -50.0, max_relative = 1e-12);
        assert_eq!(u.flows()[0].t, 1.0);
        assert_eq!(u.flows()[1], CashFlow::new(2.0, 60.0));

        let via_update = balance_at(&u, &a, &a, 2.0).unwrap();
        assert_relative_eq!(via_update, 5.0, max_relative = 1e-12);
        assert_relative_eq!(
            via_update,
            balance_at(&f, &a, &a, 2.0).unwrap(),
            max_relative = 1e-12
        );

        assert_eq!(update_map(&f, &a, &a, 0.0).unwrap(), f);
        assert!(matches!(
            update_map(&f, &a, &a, -1.0),
            Err(BalanceError::BeforeSupport { .. })
        ));
    }

    #[test]
    fn linear_balance_examples() {
        let a = rate(0.10);
        assert_relative_eq!(
            linear_balance(&step(&[(0.0, 100.0), (1.0, 100.0)]), &a, 1.0).unwrap(),
            210.0,
            max_relative = 1e-14
        );
        assert!(
            linear_balance(&step(&[(0.0, -100.0), (2.0, 121.0)]), &a, 2.0)
                .unwrap()
                .abs()
                < 1e-12
        );
        let g = AccumulationFunction::constant_force(0.07, 0.0, 5.0).unwrap();
        assert_relative_eq!(
            linear_balance(&step(&[(1.5, 1.0)]), &g, 4.0).unwrap(),
            g.evaluate(1.5, 4.0).unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn regulated_linear_case_matches_closed_form() {
        let r = 1.05f64.ln();
        let a = AccumulationFunction::constant_force(r, 0.0, 10.0).unwrap();
        let f = RegulatedStream::new(vec![Segment::new(0.0, 1.0, vec![0.0, 1.0])]).unwrap();
        let cb = balance_regulated(&f, &a, &a, 1.0, 1e-3).unwrap();
        let exact = 0.05 / r;
        assert!((cb.value - exact).abs() <= 1e-3, "{cb:?}");
        assert!(cb.error_bound <= 1e-3);
        let y = 1.05f64 * 1.05;
        assert_relative_eq!(cb.error_bound, 2.0 * y * cb.mesh_eps, max_relative = 1e-12);
    }

    #[test]
    fn regulated_step_encoding_is_exact() {
        let f = step(&[(0.0, -100.0), (1.0, 150.0), (2.0, -40.0), (3.0, 10.0)]);
        let r = RegulatedStream::from_step(&f);
        let (a, b) = (power(1.0), power(1.1));
        let cb = balance_regulated(&r, &a, &b, 2.5, 1e-6).unwrap();
        assert_eq!(cb.value, balance_at(&f, &a, &b, 2.5).unwrap());
        assert!(cb.error_bound <= 1e-6);
    }

    #[test]
    fn regulated_identity_accumulation() {
        let f = RegulatedStream::new(vec![Segment::new(0.0, 1.0, vec![0.0, -100.0])]).unwrap();
        let one = power(1.0);
        let cb = balance_regulated(&f, &one, &one, 1.0, 1e-3).unwrap();
        assert!((cb.value + 100.0).abs() <= 1e-3, "{cb:?}");
    }

    #[test]
    fn regulated_rejects_bad_tolerance() {
        let f = RegulatedStream::new(vec![Segment::new(0.0, 1.0, vec![1.0])]).unwrap();
        assert_eq!(
            balance_regulated(&f, &power(1.0), &power(1.0), 1.0, 0.0),
            Err(BalanceError::NonPositiveTolerance(0.0))
        );
    }
}
