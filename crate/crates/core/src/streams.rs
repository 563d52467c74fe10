//! Payment streams.
//!
//! A payment stream is a right-continuous function `f(t)` giving the total
//! cash flow on `(-∞, t]`. Two representations are supported:
//!
//! * [`StepStream`]: a finite sequence of cash flows, whose induced function
//!   is the step function `f(t) = Σ_{t_i <= t} C_i`.
//! * [`RegulatedStream`]: a piecewise polynomial with jumps. Jumps encode
//!   atomic cash flows and the slope is a flow density.
//!
//! Regulated streams are reduced to step streams by [`RegulatedStream::approximate`],
//! which certifies the sup-norm distance between the two.

use thiserror::Error;

use crate::poly::Polynomial;

/// Times closer than this are the same instant when merging cash flows.
pub const TIME_TOLERANCE: f64 = 1e-12;

/// Upper limit on the number of cells `approximate` will generate.
pub const MAX_PARTITION_CELLS: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamError {
    #[error("cash flow {index} has a non-finite time or amount")]
    NonFiniteFlow { index: usize },
    #[error("segment {index}: {reason}")]
    InvalidSegment { index: usize, reason: String },
    #[error("approximation tolerance must be positive, got {0}")]
    NonPositiveTolerance(f64),
    #[error("approximation needs more than {MAX_PARTITION_CELLS} cells; increase the tolerance")]
    PartitionTooFine,
    #[error("cannot combine a step stream with a regulated stream; approximate first")]
    MixedRepresentations,
    #[error("the zero stream has empty support")]
    ZeroStream,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CashFlow {
    pub t: f64,
    pub amount: f64,
}

impl CashFlow {
    pub fn new(t: f64, amount: f64) -> Self {
        CashFlow { t, amount }
    }
}

/// Closed interval `[lo, hi]` carrying the minimal support of a nonzero stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportInterval {
    pub lo: f64,
    pub hi: f64,
}

/// Finite cash-flow sequence with strictly increasing times and no zero amounts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepStream {
    flows: Vec<CashFlow>,
}

impl StepStream {
    /// Sorts the flows by time, merges flows at the same instant by summation
    /// and drops zero amounts. None of this changes the induced function.
    pub fn from_cashflows<I>(flows: I) -> Result<Self, StreamError>
    where
        I: IntoIterator<Item = CashFlow>,
    {
        let mut flows: Vec<CashFlow> = flows.into_iter().collect();
        if let Some(index) = flows
            .iter()
            .position(|f| !f.t.is_finite() || !f.amount.is_finite())
        {
            return Err(StreamError::NonFiniteFlow { index });
        }
        flows.sort_by(|x, y| x.t.total_cmp(&y.t));

        let mut merged: Vec<CashFlow> = Vec::with_capacity(flows.len());
        for flow in flows {
            match merged.last_mut() {
                Some(last) if flow.t - last.t <= TIME_TOLERANCE => last.amount += flow.amount,
                _ => merged.push(flow),
            }
        }
        merged.retain(|f| f.amount != 0.0);
        Ok(StepStream { flows: merged })
    }

    pub fn zero() -> Self {
        StepStream::default()
    }

    /// Builds from `(time, amount)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, StreamError> {
        Self::from_cashflows(pairs.iter().map(|&(t, amount)| CashFlow { t, amount }))
    }

    pub fn flows(&self) -> &[CashFlow] {
        &self.flows
    }

    pub fn is_zero(&self) -> bool {
        self.flows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.flows.iter().map(|f| f.t)
    }

    /// `f(t) = Σ_{t_i <= t} C_i`.
    pub fn value_at(&self, t: f64) -> f64 {
        self.flows
            .iter()
            .take_while(|f| f.t <= t)
            .map(|f| f.amount)
            .sum()
    }

    /// `max_p |C_0 + … + C_p|`, which is the uniform norm of the induced
    /// step function.
    pub fn sup_norm(&self) -> f64 {
        let mut running = 0.0;
        let mut best: f64 = 0.0;
        for f in &self.flows {
            running += f.amount;
            best = best.max(running.abs());
        }
        best
    }

    pub fn minimal_support(&self) -> Option<SupportInterval> {
        match (self.flows.first(), self.flows.last()) {
            (Some(first), Some(last)) => Some(SupportInterval {
                lo: first.t,
                hi: last.t,
            }),
            _ => None,
        }
    }

    pub fn scaled(&self, lambda: f64) -> StepStream {
        self.combine(&StepStream::zero(), lambda, 0.0)
    }

    /// `alpha · self + beta · other` on the common refinement of both
    /// partitions.
    pub fn combine(&self, other: &StepStream, alpha: f64, beta: f64) -> StepStream {
        let flows = self
            .flows
            .iter()
            .map(|f| CashFlow::new(f.t, alpha * f.amount))
            .chain(
                other
                    .flows
                    .iter()
                    .map(|f| CashFlow::new(f.t, beta * f.amount)),
            );
        StepStream::from_cashflows(flows).expect("finite inputs stay finite")
    }

    /// `f + amount · c_t`: adds one cash flow.
    pub fn with_flow(&self, t: f64, amount: f64) -> Result<StepStream, StreamError> {
        StepStream::from_cashflows(
            self.flows
                .iter()
                .copied()
                .chain(std::iter::once(CashFlow::new(t, amount))),
        )
    }

    /// A step stream is an investment project iff its first cash flow is an
    /// outflow.
    pub fn is_investment_project(&self) -> Result<bool, StreamError> {
        self.flows
            .first()
            .map(|f| f.amount < 0.0)
            .ok_or(StreamError::ZeroStream)
    }
}

/// A polynomial piece of a regulated stream defining `f` on `[from, to)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub from: f64,
    pub to: f64,
    pub poly: Polynomial,
}

impl Segment {
    pub fn new(from: f64, to: f64, poly: impl Into<Polynomial>) -> Self {
        Segment {
            from,
            to,
            poly: poly.into(),
        }
    }

    fn len(&self) -> f64 {
        self.to - self.from
    }

    fn left_limit(&self) -> f64 {
        self.poly.eval(self.len())
    }
}

/// Piecewise-polynomial payment stream with contiguous segments.
///
/// The stream is 0 before the first segment and constant, equal to the
/// left limit at the last `to`, afterwards.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegulatedStream {
    segments: Vec<Segment>,
}

impl RegulatedStream {
    pub fn new(segments: Vec<Segment>) -> Result<Self, StreamError> {
        for (index, seg) in segments.iter().enumerate() {
            let invalid = |reason: &str| StreamError::InvalidSegment {
                index,
                reason: reason.to_string(),
            };
            if !seg.from.is_finite() || !seg.to.is_finite() || !seg.poly.is_finite() {
                return Err(invalid("bounds and coefficients must be finite"));
            }
            if seg.from >= seg.to {
                return Err(invalid("`from` must be strictly before `to`"));
            }
            if index > 0 && (seg.from - segments[index - 1].to).abs() > TIME_TOLERANCE {
                return Err(invalid("segments must be contiguous and ordered"));
            }
        }
        Ok(RegulatedStream { segments })
    }

    /// Encodes a step stream exactly as piecewise constants. A unit-length
    /// tail segment carries the final value.
    pub fn from_step(step: &StepStream) -> RegulatedStream {
        let flows = step.flows();
        let mut segments = Vec::with_capacity(flows.len());
        let mut running = 0.0;
        for (i, f) in flows.iter().enumerate() {
            running += f.amount;
            let to = flows.get(i + 1).map_or(f.t + 1.0, |next| next.t);
            segments.push(Segment::new(f.t, to, vec![running]));
        }
        RegulatedStream { segments }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Constant value after the last segment.
    pub fn tail_value(&self) -> f64 {
        self.segments.last().map_or(0.0, Segment::left_limit)
    }

    /// Right-continuous evaluation.
    pub fn value_at(&self, t: f64) -> f64 {
        let Some(first) = self.segments.first() else {
            return 0.0;
        };
        if t < first.from {
            return 0.0;
        }
        // Index of the last segment whose start is <= t.
        let idx = self.segments.partition_point(|s| s.from <= t) - 1;
        let seg = &self.segments[idx];
        if t < seg.to {
            seg.poly.eval(t - seg.from)
        } else {
            self.tail_value()
        }
    }

    /// Segments that make up the minimal support: the first nonzero segment
    /// and, unless `f` is already constant from that segment's start, the
    /// last segment that differs from the final constant.
    fn support_range(&self) -> Option<(usize, Option<usize>)> {
        let first = self.segments.iter().position(|s| !s.poly.is_zero())?;
        let tail = self.tail_value();
        let last = (first..self.segments.len())
            .rev()
            .find(|&k| !is_constant_equal(&self.segments[k].poly, tail));
        Some((first, last))
    }

    /// Smallest `[a, b]` with `f = 0` before `a` and `f` constant from `b` on.
    pub fn minimal_support(&self) -> Option<SupportInterval> {
        let (first, last) = self.support_range()?;
        let lo = self.segments[first].from;
        let hi = last.map_or(lo, |k| self.segments[k].to);
        Some(SupportInterval { lo, hi })
    }

    pub fn is_zero(&self) -> bool {
        self.minimal_support().is_none()
    }

    /// Local polynomial of the stream on a cell starting at `t`, in `u = x - t`.
    fn local_poly(&self, t: f64) -> Polynomial {
        let Some(first) = self.segments.first() else {
            return Polynomial::zero();
        };
        if t < first.from {
            return Polynomial::zero();
        }
        let idx = self.segments.partition_point(|s| s.from <= t) - 1;
        let seg = &self.segments[idx];
        if t < seg.to {
            seg.poly.shifted(t - seg.from)
        } else {
            Polynomial::constant(self.tail_value())
        }
    }

    /// Pointwise `alpha · self + beta · other` on the union of both segment
    /// partitions.
    pub fn combine(&self, other: &RegulatedStream, alpha: f64, beta: f64) -> RegulatedStream {
        let mut knots: Vec<f64> = self
            .segments
            .iter()
            .chain(other.segments.iter())
            .flat_map(|s| [s.from, s.to])
            .collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|b, a| *b - *a <= TIME_TOLERANCE);

        let segments = knots
            .windows(2)
            .map(|w| {
                let poly =
                    self.local_poly(w[0])
                        .linear_combination(alpha, &other.local_poly(w[0]), beta);
                Segment::new(w[0], w[1], poly)
            })
            .collect();
        RegulatedStream { segments }
    }

    /// Partition points `t_0 < … < t_n` of the minimal support used by
    /// [`approximate`](Self::approximate). Every segment boundary is a
    /// partition point; each segment is refined uniformly so that
    /// `max|f'| · h <= eps`.
    pub fn partition(&self, eps: f64) -> Result<Vec<f64>, StreamError> {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(StreamError::NonPositiveTolerance(eps));
        }
        let Some((first, last)) = self.support_range() else {
            return Ok(Vec::new());
        };
        let Some(last) = last else {
            return Ok(vec![self.segments[first].from]);
        };
        let mut points = Vec::new();
        let mut cells = 0usize;
        for seg in &self.segments[first..=last] {
            let len = seg.len();
            let slope = seg.poly.derivative().max_abs_on(0.0, len);
            let n = ((slope * len / eps).ceil() as usize).max(1);
            cells = cells.saturating_add(n);
            if cells > MAX_PARTITION_CELLS || !(slope * len / eps).is_finite() {
                return Err(StreamError::PartitionTooFine);
            }
            points.extend((0..n).map(|j| seg.from + len * j as f64 / n as f64));
        }
        points.push(self.segments[last].to);
        Ok(points)
    }

    /// Step stream `f_n` with `f_n(t_i) = f(t_i)` at every partition point,
    /// constant on each cell, and `sup |f_n - f| <= eps`. Cash flows are the
    /// increments `f(t_i) - f(t_{i-1})`.
    pub fn approximate(&self, eps: f64) -> Result<StepStream, StreamError> {
        let points = self.partition(eps)?;
        let mut prev = 0.0;
        let flows = points.iter().map(|&t| {
            let v = self.value_at(t);
            let flow = CashFlow::new(t, v - prev);
            prev = v;
            flow
        });
        StepStream::from_cashflows(flows.collect::<Vec<_>>())
    }

    /// `f(a) < 0`, or `f(a) = 0` and `f` negative and non-increasing on
    /// `(a, a + δ]` for some `δ > 0`. The second case holds exactly when the
    /// lowest-order nonzero Taylor coefficient at `a` is negative.
    pub fn is_investment_project(&self) -> Result<bool, StreamError> {
        let (first, _) = self.support_range().ok_or(StreamError::ZeroStream)?;
        let poly = &self.segments[first].poly;
        let start = poly.constant_term();
        if start != 0.0 {
            return Ok(start < 0.0);
        }
        Ok(poly
            .coeffs()
            .iter()
            .skip(1)
            .find(|&&c| c != 0.0)
            .is_some_and(|&c| c < 0.0))
    }

    /// `sup_t |f(t)|`.
    pub fn sup_norm(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.poly.max_abs_on(0.0, s.len()))
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, lambda: f64) -> RegulatedStream {
        RegulatedStream {
            segments: self
                .segments
                .iter()
                .map(|s| Segment::new(s.from, s.to, s.poly.scaled(lambda)))
                .collect(),
        }
    }
}

fn is_constant_equal(p: &Polynomial, c: f64) -> bool {
    p.is_constant() && (p.constant_term() - c).abs() <= TIME_TOLERANCE * c.abs().max(1.0)
}

/// Either representation of a payment stream.
#[derive(Debug, Clone, PartialEq)]
pub enum PaymentStream {
    Step(StepStream),
    Regulated(RegulatedStream),
}

impl PaymentStream {
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            PaymentStream::Step(s) => s.value_at(t),
            PaymentStream::Regulated(r) => r.value_at(t),
        }
    }

    pub fn minimal_support(&self) -> Option<SupportInterval> {
        match self {
            PaymentStream::Step(s) => s.minimal_support(),
            PaymentStream::Regulated(r) => r.minimal_support(),
        }
    }

    pub fn is_investment_project(&self) -> Result<bool, StreamError> {
        match self {
            PaymentStream::Step(s) => s.is_investment_project(),
            PaymentStream::Regulated(r) => r.is_investment_project(),
        }
    }

    pub fn combine(
        &self,
        other: &PaymentStream,
        alpha: f64,
        beta: f64,
    ) -> Result<PaymentStream, StreamError> {
        match (self, other) {
            (PaymentStream::Step(f), PaymentStream::Step(g)) => {
                Ok(PaymentStream::Step(f.combine(g, alpha, beta)))
            }
            (PaymentStream::Regulated(f), PaymentStream::Regulated(g)) => {
                Ok(PaymentStream::Regulated(f.combine(g, alpha, beta)))
            }
            _ => Err(StreamError::MixedRepresentations),
        }
    }

    pub fn scaled(&self, lambda: f64) -> PaymentStream {
        match self {
            PaymentStream::Step(s) => PaymentStream::Step(s.scaled(lambda)),
            PaymentStream::Regulated(r) => PaymentStream::Regulated(r.scaled(lambda)),
        }
    }
}

impl From<StepStream> for PaymentStream {
    fn from(s: StepStream) -> Self {
        PaymentStream::Step(s)
    }
}

impl From<RegulatedStream> for PaymentStream {
    fn from(r: RegulatedStream) -> Self {
        PaymentStream::Regulated(r)
    }
}
