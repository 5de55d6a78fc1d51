//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the geometry, flows and functionals are generic over: `f32` or `f64`.
///
/// Tolerances throughout the crate are expressed as `f64` literals and
/// converted with [`Scalar::lit`]; callers working in `f32` should expect
/// the machine-precision checks to be correspondingly looser.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Convert an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Convert a count or index.
    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative floor below which two values are considered equal up to rounding.
    #[inline]
    fn roundoff() -> Self {
        Self::epsilon() * Self::lit(64.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Max over a slice; `None` when empty.
pub fn max_of<S: Scalar>(xs: &[S]) -> Option<S> {
    xs.iter().copied().reduce(S::max)
}

/// Min over a slice; `None` when empty.
pub fn min_of<S: Scalar>(xs: &[S]) -> Option<S> {
    xs.iter().copied().reduce(S::min)
}

/// Trapezoid rule for samples `ys` on abscissae `xs`.
pub fn trapezoid<S: Scalar>(xs: &[S], ys: &[S]) -> S {
    debug_assert_eq!(xs.len(), ys.len());
    let half = S::lit(0.5);
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) * half)
        .sum()
}

/// Composite Simpson rule for `f` on `[a, b]` with `intervals` (rounded up to even).
pub fn simpson<S: Scalar>(a: S, b: S, intervals: usize, f: impl Fn(S) -> S) -> S {
    let n = intervals.max(2) + intervals % 2;
    let h = (b - a) / S::from_usize_lossy(n);
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { S::lit(4.0) } else { S::lit(2.0) };
        acc = acc + w * f(a + h * S::from_usize_lossy(i));
    }
    acc * h / S::lit(3.0)
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

/// Composite 5-point Gauss–Legendre rule for `f` on `[a, b]`.
pub fn gauss_legendre<S: Scalar>(a: S, b: S, intervals: usize, f: impl Fn(S) -> S) -> S {
    let n = intervals.max(1);
    let h = (b - a) / S::from_usize_lossy(n);
    let half = h * S::lit(0.5);
    let mut acc = S::zero();
    for i in 0..n {
        let mid = a + h * (S::from_usize_lossy(i) + S::lit(0.5));
        for (x, w) in GAUSS5 {
            acc = acc + S::lit(w) * f(mid + half * S::lit(x));
        }
    }
    acc * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_on_degree_nine() {
        let v = gauss_legendre(0.0, 1.0, 1, |x: f64| x.powi(9));
        assert!((v - 0.1).abs() < 1e-15);
        let e = gauss_legendre(0.0, 1.0, 16, |x: f64| (3.0 * x).exp());
        assert!((e - ((3.0f64).exp() - 1.0) / 3.0).abs() < 1e-13);
    }

    #[test]
    fn trapezoid_is_exact_on_linear() {
        let xs = [0.0, 0.25, 0.6, 1.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        assert!((trapezoid(&xs, &ys) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn simpson_integrates_cubic_exactly() {
        let v = simpson(0.0f64, 2.0, 4, |x| x * x * x);
        assert!((v - 4.0).abs() < 1e-13);
    }

    #[test]
    fn extrema_helpers() {
        assert_eq!(max_of(&[1.0f32, -2.0, 3.5]), Some(3.5));
        assert_eq!(min_of::<f64>(&[]), None);
    }
}
