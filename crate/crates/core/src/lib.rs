//! Two-rate balance functions and internal rates of return.
//!
//! Balances of a payment stream accumulate surpluses with a *deposit*
//! accumulation function and debts with an *investment* accumulation
//! function. For investment projects the terminal balance is a strictly
//! decreasing function of a constant investment factor `x`; its root `ν`
//! defines the internal rate of return `ν - 1`.

pub mod accumulation;
pub mod balance;
pub mod irr;
pub mod poly;
pub mod streams;
pub mod testkit;

pub use accumulation::{AccumulationError, AccumulationFunction, DensitySegment, MonotoneBound};
pub use balance::{BalanceError, BalanceEvent, BalanceTrajectory, Branch, CertifiedBalance};
pub use irr::{IrrError, IrrOptions, IrrResult};
pub use poly::Polynomial;
pub use streams::{
    CashFlow, PaymentStream, RegulatedStream, Segment, StepStream, StreamError, SupportInterval,
};
