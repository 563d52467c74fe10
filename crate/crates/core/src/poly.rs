//! Dense real polynomials with coefficients in ascending order.
//!
//! Every piecewise object in this crate (force-of-interest densities and
//! regulated payment streams) stores one of these per segment, expressed in
//! the local variable `u = t - from`.

use std::fmt;

/// Maximum bisection steps used when isolating a root.
const ROOT_ITERATIONS: usize = 200;

#[derive(Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending coefficients. Trailing zeros are
    /// trimmed so that `degree()` is meaningful.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the polynomial; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    /// Constant term, `p(0)`.
    pub fn constant_term(&self) -> f64 {
        self.coeffs.first().copied().unwrap_or(0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    /// Antiderivative with zero constant term.
    pub fn antiderivative(&self) -> Polynomial {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(0.0);
        out.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c / (k + 1) as f64),
        );
        Polynomial::new(out)
    }

    /// `∫_lo^hi p(u) du`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        let anti = self.antiderivative();
        anti.eval(hi) - anti.eval(lo)
    }

    /// Taylor shift: returns `q` with `q(u) = p(u + h)`.
    pub fn shifted(&self, h: f64) -> Polynomial {
        if h == 0.0 || self.is_constant() {
            return self.clone();
        }
        // Repeated synthetic division by (u + h).
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                c[j] += h * c[j + 1];
            }
        }
        Polynomial::new(c)
    }

    pub fn scaled(&self, k: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|&c| c * k).collect())
    }

    /// `alpha * self + beta * other`.
    pub fn linear_combination(&self, alpha: f64, other: &Polynomial, beta: f64) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeff = |p: &Polynomial, k: usize| p.coeffs.get(k).copied().unwrap_or(0.0);
        Polynomial::new(
            (0..n)
                .map(|k| alpha * coeff(self, k) + beta * coeff(other, k))
                .collect(),
        )
    }

    /// Points of the open interval `(lo, hi)` where the polynomial changes
    /// sign, in increasing order. Roots of even multiplicity (touching
    /// zeros) are reported only when they are also critical points that
    /// evaluate to exactly zero.
    pub fn roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        if lo.is_nan() || hi.is_nan() || lo >= hi || self.is_constant() {
            return Vec::new();
        }
        if self.degree() == 1 {
            let r = -self.coeffs[0] / self.coeffs[1];
            return if r > lo && r < hi {
                vec![r]
            } else {
                Vec::new()
            };
        }
        let mut knots = vec![lo];
        knots.extend(self.derivative().roots_in(lo, hi));
        knots.push(hi);

        let mut roots = Vec::new();
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb) = (self.eval(a), self.eval(b));
            if fa == 0.0 && a > lo {
                push_distinct(&mut roots, a);
            }
            if fa * fb < 0.0 {
                push_distinct(&mut roots, self.bisect(a, b, fa));
            }
        }
        roots
    }

    fn bisect(&self, mut a: f64, mut b: f64, fa: f64) -> f64 {
        let sign_a = fa.signum();
        for _ in 0..ROOT_ITERATIONS {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let fm = self.eval(mid);
            if fm == 0.0 {
                return mid;
            }
            if fm.signum() == sign_a {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// `max |p(u)|` over the closed interval `[lo, hi]`.
    pub fn max_abs_on(&self, lo: f64, hi: f64) -> f64 {
        let mut best = self.eval(lo).abs().max(self.eval(hi).abs());
        for c in self.derivative().roots_in(lo, hi) {
            best = best.max(self.eval(c).abs());
        }
        best
    }
}

fn push_distinct(roots: &mut Vec<f64>, r: f64) {
    if roots.last().is_none_or(|&last| r > last) {
        roots.push(r);
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial{:?}", self.coeffs)
    }
}

impl From<Vec<f64>> for Polynomial {
    fn from(coeffs: Vec<f64>) -> Self {
        Polynomial::new(coeffs)
    }
}
