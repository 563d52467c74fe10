//! Accumulation functions `a(s, t)`: the factor by which one monetary unit
//! held at time `s` grows by time `t`.
//!
//! Four closed-form kinds are supported. Each satisfies `a(t, t) = 1` and
//! the multiplicative law `a(r, s) · a(s, t) = a(r, t)`. Positive kinds
//! also extend to `s > t` through `a(s, t) = 1 / a(t, s)`.

use thiserror::Error;

use crate::poly::Polynomial;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AccumulationError {
    #[error("rate must be at least -1, got {0}")]
    RateBelowMinusOne(f64),
    #[error("x must be nonnegative, got {0}")]
    NegativeFactor(f64),
    #[error("parameter must be finite")]
    NonFinite,
    #[error("density segment {index}: {reason}")]
    InvalidSegment { index: usize, reason: String },
    #[error("product of accumulation functions needs at least one factor")]
    EmptyProduct,
    #[error("cannot evaluate a({s}, {t}) backwards: the accumulation function is not positive")]
    NotInvertible { s: f64, t: f64 },
}

/// One piece of a piecewise-polynomial force of interest, active on
/// `[from, to)`. The polynomial is in the local variable `t - from`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySegment {
    pub from: f64,
    pub to: f64,
    pub delta: Polynomial,
}

impl DensitySegment {
    pub fn new(from: f64, to: f64, delta: impl Into<Polynomial>) -> Self {
        DensitySegment {
            from,
            to,
            delta: delta.into(),
        }
    }

    /// `∫ δ` over the overlap of `[lo, hi]` with this segment, `lo <= hi`.
    fn integral_over(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(self.from);
        let hi = hi.min(self.to);
        if lo >= hi {
            return 0.0;
        }
        self.delta.integral(lo - self.from, hi - self.from)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    /// `(1 + rate)^(t - s)`.
    ConstantRate { rate: f64 },
    /// `factor^(t - s)` with `0^0 = 1`.
    Power { factor: f64 },
    /// `exp(∫_s^t δ(u) du)` with δ zero outside the segments.
    Force { segments: Vec<DensitySegment> },
    /// Pointwise product of the factors.
    Product { factors: Vec<AccumulationFunction> },
}

/// An immutable, validated accumulation function.
#[derive(Debug, Clone, PartialEq)]
pub struct AccumulationFunction {
    kind: Kind,
}

/// Monotone bounds of an accumulation function: an increasing upper bound
/// and, when the function is positive, a decreasing positive lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneBound {
    pub upper: AccumulationFunction,
    pub lower: Option<AccumulationFunction>,
}

impl AccumulationFunction {
    pub fn constant_rate(rate: f64) -> Result<Self, AccumulationError> {
        if !rate.is_finite() {
            return Err(AccumulationError::NonFinite);
        }
        if rate < -1.0 {
            return Err(AccumulationError::RateBelowMinusOne(rate));
        }
        Ok(AccumulationFunction {
            kind: Kind::ConstantRate { rate },
        })
    }

    pub fn power(factor: f64) -> Result<Self, AccumulationError> {
        if !factor.is_finite() {
            return Err(AccumulationError::NonFinite);
        }
        if factor < 0.0 {
            return Err(AccumulationError::NegativeFactor(factor));
        }
        Ok(AccumulationFunction {
            kind: Kind::Power { factor },
        })
    }

    /// The identity accumulation function, `a ≡ 1`.
    pub fn identity() -> Self {
        AccumulationFunction {
            kind: Kind::Power { factor: 1.0 },
        }
    }

    /// The zero accumulation function: `0(t, t) = 1`, `0(s, t) = 0` for `s < t`.
    pub fn zero() -> Self {
        AccumulationFunction {
            kind: Kind::Power { factor: 0.0 },
        }
    }

    /// Force of interest given by a piecewise-polynomial density. Segments
    /// must be ordered and non-overlapping; gaps carry zero density.
    pub fn force(segments: Vec<DensitySegment>) -> Result<Self, AccumulationError> {
        for (index, seg) in segments.iter().enumerate() {
            let invalid = |reason: &str| AccumulationError::InvalidSegment {
                index,
                reason: reason.to_string(),
            };
            if !seg.from.is_finite() || !seg.to.is_finite() || !seg.delta.is_finite() {
                return Err(invalid("bounds and coefficients must be finite"));
            }
            if seg.from >= seg.to {
                return Err(invalid("`from` must be strictly before `to`"));
            }
            if index > 0 && seg.from < segments[index - 1].to {
                return Err(invalid("overlaps or precedes the previous segment"));
            }
        }
        Ok(AccumulationFunction {
            kind: Kind::Force { segments },
        })
    }

    /// Constant force of interest `delta` on `[from, to)`.
    pub fn constant_force(delta: f64, from: f64, to: f64) -> Result<Self, AccumulationError> {
        Self::force(vec![DensitySegment::new(from, to, vec![delta])])
    }

    pub fn product(factors: Vec<AccumulationFunction>) -> Result<Self, AccumulationError> {
        if factors.is_empty() {
            return Err(AccumulationError::EmptyProduct);
        }
        let mut flat = Vec::with_capacity(factors.len());
        for f in factors {
            match f.kind {
                Kind::Product { factors } => flat.extend(factors),
                _ => flat.push(f),
            }
        }
        if flat.len() == 1 {
            return Ok(flat.pop().unwrap());
        }
        Ok(AccumulationFunction {
            kind: Kind::Product { factors: flat },
        })
    }

    /// Pointwise product `self · other`.
    pub fn times(&self, other: &AccumulationFunction) -> AccumulationFunction {
        Self::product(vec![self.clone(), other.clone()]).expect("two factors")
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    /// True when `a(s, t) > 0` for every `s <= t`.
    pub fn is_positive(&self) -> bool {
        match &self.kind {
            Kind::ConstantRate { rate } => *rate > -1.0,
            Kind::Power { factor } => *factor > 0.0,
            Kind::Force { .. } => true,
            Kind::Product { factors } => factors.iter().all(|f| f.is_positive()),
        }
    }

    /// Evaluates `a(s, t)`. For `s > t` the function must be positive and
    /// the result is `1 / a(t, s)`.
    pub fn evaluate(&self, s: f64, t: f64) -> Result<f64, AccumulationError> {
        if s > t && !self.is_positive() {
            return Err(AccumulationError::NotInvertible { s, t });
        }
        Ok(self.eval_unchecked(s, t))
    }

    fn eval_unchecked(&self, s: f64, t: f64) -> f64 {
        if s == t {
            return 1.0;
        }
        match &self.kind {
            Kind::ConstantRate { rate } => (1.0 + rate).powf(t - s),
            Kind::Power { factor } => factor.powf(t - s),
            Kind::Force { segments } => force_exponent(segments, s, t).exp(),
            Kind::Product { factors } => factors.iter().map(|f| f.eval_unchecked(s, t)).product(),
        }
    }

    /// Monotone increasing upper bound `y` with `a <= y`.
    pub fn monotone_upper_bound(&self) -> AccumulationFunction {
        match &self.kind {
            Kind::ConstantRate { rate } => AccumulationFunction {
                kind: Kind::Power {
                    factor: (1.0 + rate).max(1.0),
                },
            },
            Kind::Power { factor } => AccumulationFunction {
                kind: Kind::Power {
                    factor: factor.max(1.0),
                },
            },
            Kind::Force { segments } => AccumulationFunction {
                kind: Kind::Force {
                    segments: signed_variation(segments, 1.0),
                },
            },
            Kind::Product { factors } => AccumulationFunction {
                kind: Kind::Product {
                    factors: factors.iter().map(|f| f.monotone_upper_bound()).collect(),
                },
            },
        }
    }

    /// Monotone decreasing positive lower bound `c` with `0 < c <= a`, when
    /// the function is positive.
    pub fn monotone_lower_bound(&self) -> Option<AccumulationFunction> {
        if !self.is_positive() {
            return None;
        }
        let kind = match &self.kind {
            Kind::ConstantRate { rate } => Kind::Power {
                factor: (1.0 + rate).min(1.0),
            },
            Kind::Power { factor } => Kind::Power {
                factor: factor.min(1.0),
            },
            Kind::Force { segments } => Kind::Force {
                segments: signed_variation(segments, -1.0),
            },
            Kind::Product { factors } => Kind::Product {
                factors: factors
                    .iter()
                    .map(|f| f.monotone_lower_bound())
                    .collect::<Option<Vec<_>>>()?,
            },
        };
        Some(AccumulationFunction { kind })
    }

    pub fn monotone_bounds(&self) -> MonotoneBound {
        MonotoneBound {
            upper: self.monotone_upper_bound(),
            lower: self.monotone_lower_bound(),
        }
    }
}

/// `∫_s^t δ` over all segments; negative when `s > t`.
fn force_exponent(segments: &[DensitySegment], s: f64, t: f64) -> f64 {
    if s > t {
        return -force_exponent(segments, t, s);
    }
    segments.iter().map(|seg| seg.integral_over(s, t)).sum()
}

/// Density `sign · |δ|`, splitting each segment where δ changes sign.
fn signed_variation(segments: &[DensitySegment], sign: f64) -> Vec<DensitySegment> {
    let mut out = Vec::new();
    for seg in segments {
        let len = seg.to - seg.from;
        let mut cuts = vec![0.0];
        cuts.extend(seg.delta.roots_in(0.0, len));
        cuts.push(len);
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                continue;
            }
            let piece = seg.delta.shifted(lo);
            let mid = piece.eval(0.5 * (hi - lo));
            let k = if mid < 0.0 { -sign } else { sign };
            // Avoid zero-length segments produced by rounding at the cut.
            let from = seg.from + lo;
            let to = if hi == len { seg.to } else { seg.from + hi };
            if to > from {
                out.push(DensitySegment::new(from, to, piece.scaled(k)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_rate_examples() {
        let a = AccumulationFunction::constant_rate(0.05).unwrap();
        assert_relative_eq!(a.evaluate(0.0, 2.0).unwrap(), 1.1025, max_relative = 1e-14);
        assert_relative_eq!(a.evaluate(0.0, 1.0).unwrap(), 1.05, max_relative = 1e-14);

        let b = AccumulationFunction::constant_rate(0.10).unwrap();
        assert_eq!(b.evaluate(3.0, 3.0).unwrap(), 1.0);
        assert_relative_eq!(
            b.evaluate(2.0, 0.0).unwrap(),
            1.0 / 1.21,
            max_relative = 1e-14
        );
    }

    #[test]
    fn constant_rate_rejects_below_minus_one() {
        assert_eq!(
            AccumulationFunction::constant_rate(-1.5),
            Err(AccumulationError::RateBelowMinusOne(-1.5))
        );
        let zero = AccumulationFunction::constant_rate(-1.0).unwrap();
        assert_eq!(zero.evaluate(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(zero.evaluate(1.0, 1.0).unwrap(), 1.0);
        assert!(zero.evaluate(1.0, 0.0).is_err());
    }

    #[test]
    fn power_examples() {
        let p = AccumulationFunction::power(1.1).unwrap();
        assert_relative_eq!(p.evaluate(0.0, 2.0).unwrap(), 1.21, max_relative = 1e-14);

        let z = AccumulationFunction::power(0.0).unwrap();
        assert_eq!(z.evaluate(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(z.evaluate(0.0, 1.0).unwrap(), 0.0);
        assert!(matches!(
            z.evaluate(1.0, 0.0),
            Err(AccumulationError::NotInvertible { .. })
        ));

        let one = AccumulationFunction::power(1.0).unwrap();
        assert_eq!(one.evaluate(0.0, 7.5).unwrap(), 1.0);

        let err = AccumulationFunction::power(-1.0).unwrap_err();
        assert!(err.to_string().contains("x must be nonnegative"));
    }

    #[test]
    fn force_examples() {
        let a = AccumulationFunction::constant_force(1.05f64.ln(), 0.0, 10.0).unwrap();
        assert_relative_eq!(a.evaluate(0.0, 1.0).unwrap(), 1.05, max_relative = 1e-14);
        assert_eq!(a.evaluate(4.2, 4.2).unwrap(), 1.0);

        let b = AccumulationFunction::force(vec![
            DensitySegment::new(0.0, 1.0, vec![0.1]),
            DensitySegment::new(1.0, 2.0, vec![0.2]),
        ])
        .unwrap();
        assert_relative_eq!(
            b.evaluate(0.0, 2.0).unwrap(),
            0.3f64.exp(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            b.evaluate(0.0, 2.0).unwrap(),
            1.3498588075760032,
            max_relative = 1e-12
        );
        // Outside the segments the density is zero.
        assert_eq!(b.evaluate(5.0, 9.0).unwrap(), 1.0);
    }

    #[test]
    fn force_rejects_bad_segments() {
        let overlapping = AccumulationFunction::force(vec![
            DensitySegment::new(0.0, 2.0, vec![0.1]),
            DensitySegment::new(1.0, 3.0, vec![0.1]),
        ]);
        assert!(matches!(
            overlapping,
            Err(AccumulationError::InvalidSegment { index: 1, .. })
        ));
        let reversed = AccumulationFunction::force(vec![DensitySegment::new(2.0, 1.0, vec![0.1])]);
        assert!(matches!(
            reversed,
            Err(AccumulationError::InvalidSegment { index: 0, .. })
        ));
    }

    #[test]
    fn product_examples() {
        let p = AccumulationFunction::power(1.1)
            .unwrap()
            .times(&AccumulationFunction::power(1.2).unwrap());
        assert_relative_eq!(p.evaluate(0.0, 1.0).unwrap(), 1.32, max_relative = 1e-14);
        assert_relative_eq!(p.evaluate(0.0, 2.0).unwrap(), 1.7424, max_relative = 1e-14);

        let a = AccumulationFunction::constant_rate(0.05).unwrap();
        let with_one = a.times(&AccumulationFunction::identity());
        for &(s, t) in &[(0.0, 1.0), (0.5, 3.25), (2.0, 2.0)] {
            assert_eq!(with_one.evaluate(s, t).unwrap(), a.evaluate(s, t).unwrap());
        }

        let absorbed = a.times(&AccumulationFunction::zero());
        assert_eq!(absorbed.evaluate(0.0, 1.0).unwrap(), 0.0);
        assert!(!absorbed.is_positive());
    }

    #[test]
    fn upper_bound_examples() {
        let a = AccumulationFunction::constant_rate(0.05).unwrap();
        let y = a.monotone_upper_bound();
        assert_eq!(y.kind(), &Kind::Power { factor: 1.05 });
        assert_relative_eq!(y.evaluate(0.0, 2.0).unwrap(), 1.1025, max_relative = 1e-14);

        let half = AccumulationFunction::power(0.5).unwrap();
        assert_eq!(
            half.monotone_upper_bound().kind(),
            &Kind::Power { factor: 1.0 }
        );

        let neg = AccumulationFunction::constant_force(-0.1, 0.0, 1.0).unwrap();
        let y = neg.monotone_upper_bound();
        assert_relative_eq!(
            y.evaluate(0.0, 1.0).unwrap(),
            0.1f64.exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn upper_bound_splits_density_at_sign_change() {
        // δ(t) = t - 1 on [0, 2): ∫|δ| = 1.
        let a = AccumulationFunction::force(vec![DensitySegment::new(0.0, 2.0, vec![-1.0, 1.0])])
            .unwrap();
        let y = a.monotone_upper_bound();
        assert_relative_eq!(
            y.evaluate(0.0, 2.0).unwrap(),
            1.0f64.exp(),
            max_relative = 1e-12
        );
        assert_relative_eq!(a.evaluate(0.0, 2.0).unwrap(), 1.0, max_relative = 1e-12);
        let c = a.monotone_lower_bound().unwrap();
        assert_relative_eq!(
            c.evaluate(0.0, 2.0).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn lower_bound_missing_for_zero_function() {
        assert!(AccumulationFunction::zero()
            .monotone_lower_bound()
            .is_none());
        let c = AccumulationFunction::constant_rate(0.2)
            .unwrap()
            .monotone_lower_bound()
            .unwrap();
        assert_eq!(c.kind(), &Kind::Power { factor: 1.0 });
    }
}
