//! Internal rate of return of investment projects.
//!
//! With a fixed positive deposit accumulation function `a` and investment
//! accumulation `x^(t-s)`, the terminal balance `B^x_d(f)` of an investment
//! project is continuous and strictly decreasing in `x >= 0` and tends to
//! `-∞`. The measure `ν(f)` of `{x >= 0 : B^x_d(f) >= 0}` is therefore either
//! 0 or the unique root, and the internal rate of return is `ν(f) - 1`.

use std::collections::HashMap;

use log::debug;
use thiserror::Error;

use crate::accumulation::{AccumulationError, AccumulationFunction};
use crate::balance::{balance_at, BalanceError, CertifiedBalance};
use crate::streams::{PaymentStream, RegulatedStream, StepStream, StreamError};

/// Largest investment factor tried while bracketing the root.
pub const MAX_BRACKET: f64 = 18_446_744_073_709_551_616.0; // 2^64

/// Default upper end of the rate grid scanned by [`classical_irr`].
pub const DEFAULT_IMAX: f64 = 10.0;

/// Number of grid points scanned by [`classical_irr`].
const CLASSICAL_GRID: usize = 20_000;

/// Smallest `1 + i` scanned by [`classical_irr`].
const CLASSICAL_MIN_FACTOR: f64 = 1e-6;

/// Default balance tolerance for regulated streams, relative to `sup |f|`.
pub const DEFAULT_RELATIVE_BALANCE_TOL: f64 = 1e-4;

/// Coarsening levels tried before the finest balance tolerance.
const CERTIFICATION_LEVELS: i32 = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IrrError {
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Accumulation(#[from] AccumulationError),
    #[error("investment factor must be nonnegative, got {0}")]
    NegativeFactor(f64),
    #[error("stream is not an investment project: the terminal balance need not decrease in x")]
    NotInvestmentProject,
    #[error("deposit accumulation function must be positive")]
    DepositNotPositive,
    #[error("root tolerance must be positive, got {0}")]
    NonPositiveRootTolerance(f64),
    #[error("balance tolerance must be positive, got {0}")]
    NonPositiveBalanceTolerance(f64),
    #[error("terminal balance stayed nonnegative up to x = 2^64")]
    BracketOverflow,
    #[error("cash flows never change sign, so the present value has no root")]
    NoSignChange,
    #[error("rate cap must exceed -1, got {0}")]
    InvalidRateCap(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrrResult {
    /// Accumulation factor `ν(f)`.
    pub nu: f64,
    /// `ν(f) - 1`.
    pub irr: f64,
    /// Final bisection bracket; `(0, 0)` when `ν = 0`.
    pub bracket: (f64, f64),
    /// `|B^ν_d(f)|`, reported as 0 when `ν = 0`.
    pub residual: f64,
    /// Certified balance error at `ν` for regulated streams, 0 for step streams.
    pub error_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrrOptions {
    pub root_tol: f64,
    /// Finest balance tolerance for regulated streams. `None` uses
    /// [`DEFAULT_RELATIVE_BALANCE_TOL`] times `max(1, sup |f|)`.
    pub balance_tol: Option<f64>,
}

impl IrrOptions {
    pub fn new(root_tol: f64) -> Self {
        IrrOptions {
            root_tol,
            balance_tol: None,
        }
    }

    pub fn with_balance_tol(mut self, tol: f64) -> Self {
        self.balance_tol = Some(tol);
        self
    }
}

fn investment_power(x: f64) -> Result<AccumulationFunction, IrrError> {
    if x.is_nan() || x < 0.0 {
        return Err(IrrError::NegativeFactor(x));
    }
    Ok(AccumulationFunction::power(x)?)
}

/// Certified `B^x_t(f)`: exact for step streams (zero error), within `tol`
/// for regulated streams.
pub fn certified_balance_vs_x(
    f: &PaymentStream,
    deposit: &AccumulationFunction,
    t: f64,
    x: f64,
    tol: f64,
) -> Result<CertifiedBalance, IrrError> {
    let investment = investment_power(x)?;
    match f {
        PaymentStream::Step(s) => Ok(CertifiedBalance {
            value: balance_at(s, deposit, &investment, t)?,
            error_bound: 0.0,
            mesh_eps: 0.0,
        }),
        PaymentStream::Regulated(r) => Ok(crate::balance::balance_regulated(
            r,
            deposit,
            &investment,
            t,
            tol,
        )?),
    }
}

/// `B^x_t(f)`, the balance with deposit `a` and investment `x^(t-s)`.
pub fn balance_vs_x(
    f: &PaymentStream,
    deposit: &AccumulationFunction,
    t: f64,
    x: f64,
    tol: f64,
) -> Result<f64, IrrError> {
    Ok(certified_balance_vs_x(f, deposit, t, x, tol)?.value)
}

/// Terminal balance as a function of `x`, with certification for
/// regulated streams.
enum TerminalBalance<'a> {
    Step {
        f: &'a StepStream,
        deposit: &'a AccumulationFunction,
        end: f64,
    },
    Regulated {
        f: &'a RegulatedStream,
        deposit: &'a AccumulationFunction,
        start: f64,
        end: f64,
        deposit_bound: f64,
        balance_tol: f64,
        /// Approximants keyed by `log2` of their mesh tolerance.
        cache: HashMap<i32, StepStream>,
    },
}

impl<'a> TerminalBalance<'a> {
    fn new(
        f: &'a PaymentStream,
        deposit: &'a AccumulationFunction,
        balance_tol: Option<f64>,
    ) -> Result<Self, IrrError> {
        let support = f.minimal_support().ok_or(StreamError::ZeroStream)?;
        match f {
            PaymentStream::Step(f) => Ok(TerminalBalance::Step {
                f,
                deposit,
                end: support.hi,
            }),
            PaymentStream::Regulated(f) => {
                let balance_tol =
                    balance_tol.unwrap_or(DEFAULT_RELATIVE_BALANCE_TOL * f.sup_norm().max(1.0));
                if !balance_tol.is_finite() || balance_tol <= 0.0 {
                    return Err(IrrError::NonPositiveBalanceTolerance(balance_tol));
                }
                let deposit_bound = deposit
                    .monotone_upper_bound()
                    .evaluate(support.lo, support.hi)?;
                if !deposit_bound.is_finite() {
                    return Err(BalanceError::UnboundedUpperBound {
                        lo: support.lo,
                        t: support.hi,
                    }
                    .into());
                }
                Ok(TerminalBalance::Regulated {
                    f,
                    deposit,
                    start: support.lo,
                    end: support.hi,
                    deposit_bound,
                    balance_tol,
                    cache: HashMap::new(),
                })
            }
        }
    }

    /// Returns `(B^x_d, error bound)`. For regulated streams the
    /// approximant is refined until the sign of the value is certified or
    /// the finest tolerance is reached.
    fn eval(&mut self, x: f64) -> Result<(f64, f64), IrrError> {
        let investment = investment_power(x)?;
        match self {
            TerminalBalance::Step { f, deposit, end } => {
                Ok((balance_at(f, deposit, &investment, *end)?, 0.0))
            }
            TerminalBalance::Regulated {
                f,
                deposit,
                start,
                end,
                deposit_bound,
                balance_tol,
                cache,
            } => {
                let y = *deposit_bound * x.max(1.0).powf(*end - *start);
                if !y.is_finite() {
                    return Err(BalanceError::UnboundedUpperBound {
                        lo: *start,
                        t: *end,
                    }
                    .into());
                }
                let mut level = CERTIFICATION_LEVELS;
                loop {
                    let target = *balance_tol * f64::powi(2.0, level);
                    let exponent = (target / (4.0 * y)).log2().floor() as i32;
                    let mesh = f64::powi(2.0, exponent);
                    let approx = match cache.get(&exponent) {
                        Some(a) => a,
                        None => {
                            let a = f.approximate(mesh)?;
                            cache.entry(exponent).or_insert(a)
                        }
                    };
                    let value = balance_at(approx, deposit, &investment, *end)?;
                    let err = 2.0 * y * mesh;
                    if value.abs() > err || level == 0 {
                        return Ok((value, err));
                    }
                    level -= 1;
                }
            }
        }
    }
}

/// `ν(f)` for an investment project.
pub fn nu_measure(
    f: &PaymentStream,
    deposit: &AccumulationFunction,
    root_tol: f64,
) -> Result<f64, IrrError> {
    Ok(irr_with(f, deposit, &IrrOptions::new(root_tol))?.nu)
}

/// Internal rate of return `ν(f) - 1` with default balance tolerance.
pub fn irr_of(
    f: &PaymentStream,
    deposit: &AccumulationFunction,
    root_tol: f64,
) -> Result<IrrResult, IrrError> {
    irr_with(f, deposit, &IrrOptions::new(root_tol))
}

/// Internal rate of return: bracket by doubling `x` from 1, then bisect
/// down to a bracket of width `root_tol`.
pub fn irr_with(
    f: &PaymentStream,
    deposit: &AccumulationFunction,
    opts: &IrrOptions,
) -> Result<IrrResult, IrrError> {
    let root_tol = opts.root_tol;
    if !root_tol.is_finite() || root_tol <= 0.0 {
        return Err(IrrError::NonPositiveRootTolerance(root_tol));
    }
    if !f.is_investment_project()? {
        return Err(IrrError::NotInvestmentProject);
    }
    if !deposit.is_positive() {
        return Err(IrrError::DepositNotPositive);
    }
    let mut terminal = TerminalBalance::new(f, deposit, opts.balance_tol)?;

    let (at_zero, err_zero) = terminal.eval(0.0)?;
    if at_zero <= 0.0 {
        return Ok(IrrResult {
            nu: 0.0,
            irr: -1.0,
            bracket: (0.0, 0.0),
            residual: 0.0,
            error_bound: err_zero,
        });
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    while terminal.eval(hi)?.0 >= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_BRACKET {
            return Err(IrrError::BracketOverflow);
        }
    }
    debug!("bracketed root in [{lo}, {hi}]");

    while hi - lo > root_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if terminal.eval(mid)?.0 >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    let (at_nu, err) = terminal.eval(nu)?;
    debug!("nu = {nu}, residual = {at_nu}, bracket = [{lo}, {hi}]");
    Ok(IrrResult {
        nu,
        irr: nu - 1.0,
        bracket: (lo, hi),
        residual: at_nu.abs(),
        error_bound: err,
    })
}

/// All roots of the classical present value `Σ C_k (1 + i)^(-t_k)` with
/// `i` in `(-1, i_max]`. Sign changes are located on a logarithmic grid
/// of `1 + i` and refined by bisection.
pub fn classical_irr(f: &StepStream, root_tol: f64, i_max: f64) -> Result<Vec<f64>, IrrError> {
    if !root_tol.is_finite() || root_tol <= 0.0 {
        return Err(IrrError::NonPositiveRootTolerance(root_tol));
    }
    if !i_max.is_finite() || i_max <= -1.0 {
        return Err(IrrError::InvalidRateCap(i_max));
    }
    let flows = f.flows();
    let has_in = flows.iter().any(|c| c.amount > 0.0);
    let has_out = flows.iter().any(|c| c.amount < 0.0);
    if !(has_in && has_out) {
        return Err(IrrError::NoSignChange);
    }
    let horizon = flows.last().map_or(0.0, |c| c.t);
    // Future value at the last flow has the sign of the present value.
    let fv = |u: f64| -> f64 { flows.iter().map(|c| c.amount * u.powf(horizon - c.t)).sum() };

    let lo = CLASSICAL_MIN_FACTOR.ln();
    let hi = (1.0 + i_max).ln();
    let mut roots: Vec<f64> = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..CLASSICAL_GRID {
        let u = (lo + (hi - lo) * k as f64 / (CLASSICAL_GRID - 1) as f64).exp();
        let v = fv(u);
        if v == 0.0 {
            roots.push(u);
            prev = None;
            continue;
        }
        if let Some((pu, pv)) = prev {
            if pv * v < 0.0 {
                roots.push(bisect_sign_change(&fv, pu, u, pv, root_tol));
            }
        }
        prev = Some((u, v));
    }
    Ok(roots.into_iter().map(|u| u - 1.0).collect())
}

fn bisect_sign_change(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, ga: f64, tol: f64) -> f64 {
    let sign_a = ga.signum();
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if gm.signum() == sign_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}
