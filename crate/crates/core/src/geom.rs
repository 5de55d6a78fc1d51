//! Concrete symplectic backends: Euclidean `R^2n`, the flat torus `T^2n` and
//! complex projective space `CP^n`.
//!
//! Coordinates are stored as interleaved real pairs. On the real backends a
//! point is `(x1, y1, x2, y2, ...)` and `ω = Σ dx_i ∧ dy_i`. On `CP^n` a point is
//! a unit representative `z ∈ C^{n+1}` stored as `(Re z0, Im z0, Re z1, ...)`;
//! tangent vectors are horizontal lifts (Hermitian-orthogonal to the base) and
//!
//! ```text
//! ω(u, v) = Im<u, v> / π,     g(u, v) = Re<u, v> / π,     <u, v> = Σ conj(u_j) v_j.
//! ```
//!
//! With the pairing written on interleaved coordinates, `Im<u, v>` is the same
//! expression as the canonical form on `R^2n`, so every backend shares
//! [`pairing`] and differs only by a constant scale.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One of the three shipped symplectic manifolds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum ManifoldKind {
    /// `R^2n` with `n` the half-dimension.
    Euclidean { n: usize },
    /// `R^2n / Z^2n`, period 1 in every coordinate.
    Torus { n: usize },
    /// `CP^n` with `n` the complex dimension.
    Projective { n: usize },
}

/// A point of a [`ManifoldKind`] (see module docs for the coordinate layout).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point<S> {
    pub coords: Vec<S>,
}

/// A tangent vector together with its base point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector<S> {
    pub base: Point<S>,
    pub components: Vec<S>,
}

impl<S: Scalar> Point<S> {
    pub fn from_complex(z: &[Complex<S>]) -> Self {
        Self {
            coords: z.iter().flat_map(|c| [c.re, c.im]).collect(),
        }
    }

    pub fn as_complex(&self) -> Vec<Complex<S>> {
        self.coords
            .chunks_exact(2)
            .map(|c| Complex::new(c[0], c[1]))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl<S: Scalar> TangentVector<S> {
    pub fn zero(base: Point<S>) -> Self {
        let d = base.dim();
        Self {
            base,
            components: vec![S::zero(); d],
        }
    }
}

/// `Σ (u_x v_y − u_y v_x)` over interleaved pairs; equals `Im<u, v>` for complex vectors.
#[inline]
pub fn pairing<S: Scalar>(u: &[S], v: &[S]) -> S {
    u.chunks_exact(2)
        .zip(v.chunks_exact(2))
        .map(|(a, b)| a[0] * b[1] - a[1] * b[0])
        .sum()
}

#[inline]
pub fn dot<S: Scalar>(u: &[S], v: &[S]) -> S {
    u.iter().zip(v).map(|(a, b)| *a * *b).sum()
}

#[inline]
pub fn norm<S: Scalar>(u: &[S]) -> S {
    dot(u, u).sqrt()
}

/// Hermitian product `<p, q> = Σ conj(p_j) q_j` on interleaved coordinates.
#[inline]
pub fn hermitian<S: Scalar>(p: &[S], q: &[S]) -> Complex<S> {
    let mut re = S::zero();
    let mut im = S::zero();
    for (a, b) in p.chunks_exact(2).zip(q.chunks_exact(2)) {
        re = re + a[0] * b[0] + a[1] * b[1];
        im = im + a[0] * b[1] - a[1] * b[0];
    }
    Complex::new(re, im)
}

/// Multiply an interleaved complex vector by `c`.
#[inline]
pub fn scale_complex<S: Scalar>(z: &[S], c: Complex<S>) -> Vec<S> {
    z.chunks_exact(2)
        .flat_map(|a| [c.re * a[0] - c.im * a[1], c.re * a[1] + c.im * a[0]])
        .collect()
}

/// Complex structure `J(x, y) = (−y, x)` on interleaved pairs.
#[inline]
pub fn complex_structure<S: Scalar>(v: &[S]) -> Vec<S> {
    v.chunks_exact(2).flat_map(|a| [-a[1], a[0]]).collect()
}

/// Reduce a torus coordinate into `[0, 1)`.
#[inline]
pub fn wrap_unit<S: Scalar>(x: S) -> S {
    let r = x - x.floor();
    if r >= S::one() {
        S::zero()
    } else {
        r
    }
}

/// Signed torus difference reduced into `[-1/2, 1/2]`.
#[inline]
pub fn wrap_delta<S: Scalar>(d: S) -> S {
    d - d.round()
}

/// Phase factor `e^{iθ}` maximizing `Re<reference, e^{iθ} z>`.
#[inline]
pub fn alignment_phase<S: Scalar>(reference: &[S], z: &[S]) -> Complex<S> {
    let h = hermitian(reference, z);
    let m = h.norm();
    if m > S::zero() {
        h.conj() / m
    } else {
        Complex::new(S::one(), S::zero())
    }
}

impl ManifoldKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Euclidean { .. } => "euclidean",
            Self::Torus { .. } => "torus",
            Self::Projective { .. } => "projective",
        }
    }

    /// Half of the real dimension of `M`.
    pub fn half_dim(&self) -> usize {
        match *self {
            Self::Euclidean { n } | Self::Torus { n } | Self::Projective { n } => n,
        }
    }

    /// Length of the stored coordinate vector.
    pub fn coord_len(&self) -> usize {
        match *self {
            Self::Euclidean { n } | Self::Torus { n } => 2 * n,
            Self::Projective { n } => 2 * (n + 1),
        }
    }

    pub fn is_projective(&self) -> bool {
        matches!(self, Self::Projective { .. })
    }

    /// Scale `c` such that `ω = c · pairing`: 1 on the real backends, `1/π` on `CP^n`.
    pub fn omega_scale<S: Scalar>(&self) -> S {
        match self {
            Self::Projective { .. } => S::FRAC_1_PI(),
            _ => S::one(),
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        let expected = self.coord_len();
        if len == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got: len })
        }
    }

    fn unit_tol<S: Scalar>() -> S {
        S::lit(1e-12).max(S::roundoff())
    }

    fn horizontal_tol<S: Scalar>() -> S {
        S::lit(1e-10).max(S::roundoff())
    }

    /// Validate coordinates into a point: tori are reduced mod 1, projective
    /// representatives must already be unit within `1e-12`.
    pub fn point<S: Scalar>(&self, coords: Vec<S>) -> Result<Point<S>> {
        self.check_len(coords.len())?;
        match self {
            Self::Euclidean { .. } => Ok(Point { coords }),
            Self::Torus { .. } => Ok(Point {
                coords: coords.into_iter().map(wrap_unit).collect(),
            }),
            Self::Projective { .. } => {
                let nrm = norm(&coords);
                if (nrm - S::one()).abs() > Self::unit_tol::<S>() {
                    return Err(Error::NotUnit { norm: nrm.as_f64() });
                }
                Ok(Point { coords })
            }
        }
    }

    /// Like [`ManifoldKind::point`] but rescales projective input to unit norm.
    pub fn normalized_point<S: Scalar>(&self, coords: Vec<S>) -> Result<Point<S>> {
        self.check_len(coords.len())?;
        Ok(Point {
            coords: self.normalize_coords(coords),
        })
    }

    pub(crate) fn normalize_coords<S: Scalar>(&self, mut coords: Vec<S>) -> Vec<S> {
        match self {
            Self::Euclidean { .. } => {}
            Self::Torus { .. } => coords.iter_mut().for_each(|x| *x = wrap_unit(*x)),
            Self::Projective { .. } => {
                let nrm = norm(&coords);
                if nrm > S::zero() {
                    coords.iter_mut().for_each(|x| *x = *x / nrm);
                }
            }
        }
        coords
    }

    /// Build a tangent vector at `p`, rejecting non-horizontal projective input.
    pub fn tangent<S: Scalar>(&self, p: &Point<S>, components: Vec<S>) -> Result<TangentVector<S>> {
        self.check_len(p.dim())?;
        self.check_len(components.len())?;
        self.check_horizontal(&p.coords, &components)?;
        Ok(TangentVector {
            base: p.clone(),
            components,
        })
    }

    fn check_horizontal<S: Scalar>(&self, p: &[S], u: &[S]) -> Result<()> {
        if self.is_projective() {
            let residual = hermitian(p, u).norm();
            if residual > Self::horizontal_tol::<S>() * S::one().max(norm(u)) {
                return Err(Error::NotHorizontal {
                    residual: residual.as_f64(),
                });
            }
        }
        Ok(())
    }

    fn check_pair<S: Scalar>(&self, p: &[S], u: &[S], v: &[S]) -> Result<()> {
        self.check_len(p.len())?;
        self.check_len(u.len())?;
        self.check_len(v.len())?;
        self.check_horizontal(p, u)?;
        self.check_horizontal(p, v)
    }

    /// Symplectic form at `p`.
    pub fn omega<S: Scalar>(&self, p: &Point<S>, u: &TangentVector<S>, v: &TangentVector<S>) -> Result<S> {
        self.omega_components(&p.coords, &u.components, &v.components)
    }

    /// [`ManifoldKind::omega`] on raw component slices.
    pub fn omega_components<S: Scalar>(&self, p: &[S], u: &[S], v: &[S]) -> Result<S> {
        self.check_pair(p, u, v)?;
        Ok(self.omega_unchecked(u, v))
    }

    #[inline]
    pub(crate) fn omega_unchecked<S: Scalar>(&self, u: &[S], v: &[S]) -> S {
        self.omega_scale::<S>() * pairing(u, v)
    }

    /// Riemannian metric compatible with `ω`.
    pub fn metric<S: Scalar>(&self, p: &Point<S>, u: &TangentVector<S>, v: &TangentVector<S>) -> Result<S> {
        self.metric_components(&p.coords, &u.components, &v.components)
    }

    pub fn metric_components<S: Scalar>(&self, p: &[S], u: &[S], v: &[S]) -> Result<S> {
        self.check_pair(p, u, v)?;
        Ok(self.omega_scale::<S>() * dot(u, v))
    }

    /// Geodesic-style distance; phase invariant on `CP^n`.
    pub fn distance<S: Scalar>(&self, p: &Point<S>, q: &Point<S>) -> Result<S> {
        self.check_len(p.dim())?;
        self.check_len(q.dim())?;
        Ok(self.distance_unchecked(&p.coords, &q.coords))
    }

    pub(crate) fn distance_unchecked<S: Scalar>(&self, p: &[S], q: &[S]) -> S {
        match self {
            Self::Euclidean { .. } => p
                .iter()
                .zip(q)
                .map(|(a, b)| (*a - *b) * (*a - *b))
                .sum::<S>()
                .sqrt(),
            Self::Torus { .. } => p
                .iter()
                .zip(q)
                .map(|(a, b)| {
                    let d = wrap_delta(*b - *a);
                    d * d
                })
                .sum::<S>()
                .sqrt(),
            Self::Projective { .. } => {
                // atan2 form: arccos loses half the digits near zero distance.
                let h = hermitian(p, q);
                let pp = dot(p, p);
                let c = h / pp;
                let perp: S = q
                    .chunks_exact(2)
                    .zip(p.chunks_exact(2))
                    .map(|(b, a)| {
                        let re = b[0] - (c.re * a[0] - c.im * a[1]);
                        let im = b[1] - (c.re * a[1] + c.im * a[0]);
                        re * re + im * im
                    })
                    .sum::<S>()
                    .sqrt();
                perp.atan2(h.norm() / pp.sqrt())
            }
        }
    }

    /// Difference vector from `from` to `to` expressed at `from`: plain
    /// difference, wrapped difference on the torus, and on `CP^n` the
    /// phase-aligned difference projected to the horizontal space at `from`.
    pub(crate) fn chord<S: Scalar>(&self, from: &[S], to: &[S]) -> Vec<S> {
        match self {
            Self::Euclidean { .. } => to.iter().zip(from).map(|(b, a)| *b - *a).collect(),
            Self::Torus { .. } => to
                .iter()
                .zip(from)
                .map(|(b, a)| wrap_delta(*b - *a))
                .collect(),
            Self::Projective { .. } => {
                let aligned = scale_complex(to, alignment_phase(from, to));
                let raw: Vec<S> = aligned.iter().zip(from).map(|(b, a)| *b - *a).collect();
                horizontal_part(from, &raw)
            }
        }
    }

    /// Horizontal projection `raw − <p, raw> p` (projective backend only).
    pub fn project_horizontal<S: Scalar>(&self, p: &Point<S>, raw: &[S]) -> Result<TangentVector<S>> {
        if !self.is_projective() {
            return Err(Error::UnsupportedBackend(self.name()));
        }
        self.check_len(p.dim())?;
        self.check_len(raw.len())?;
        Ok(TangentVector {
            base: p.clone(),
            components: horizontal_part(&p.coords, raw),
        })
    }

    /// Normal exponential map `p + v` (reduced mod 1 on the torus).
    pub fn exp_normal<S: Scalar>(&self, p: &Point<S>, v: &TangentVector<S>) -> Result<Point<S>> {
        if self.is_projective() {
            return Err(Error::UnsupportedBackend(self.name()));
        }
        self.check_len(p.dim())?;
        self.check_len(v.components.len())?;
        let coords = p.coords.iter().zip(&v.components).map(|(a, b)| *a + *b).collect();
        Ok(Point {
            coords: self.normalize_coords(coords),
        })
    }
}

/// `raw − <p, raw> p` for unit `p`.
pub(crate) fn horizontal_part<S: Scalar>(p: &[S], raw: &[S]) -> Vec<S> {
    let h = hermitian(p, raw);
    let along = scale_complex(p, h);
    raw.iter().zip(&along).map(|(r, a)| *r - *a).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const E1: ManifoldKind = ManifoldKind::Euclidean { n: 1 };
    const T1: ManifoldKind = ManifoldKind::Torus { n: 1 };
    const P1: ManifoldKind = ManifoldKind::Projective { n: 1 };

    fn pt(kind: ManifoldKind, c: &[f64]) -> Point<f64> {
        kind.point(c.to_vec()).unwrap()
    }

    fn tv(kind: ManifoldKind, p: &Point<f64>, c: &[f64]) -> TangentVector<f64> {
        kind.tangent(p, c.to_vec()).unwrap()
    }

    #[test]
    fn omega_canonical_pairing() {
        let p = pt(E1, &[0.0, 0.0]);
        let w = E1.omega(&p, &tv(E1, &p, &[1.0, 0.0]), &tv(E1, &p, &[0.0, 1.0])).unwrap();
        assert_eq!(w, 1.0);
        let u = tv(E1, &p, &[0.3, -2.0]);
        assert_eq!(E1.omega(&p, &u, &u).unwrap(), 0.0);
    }

    #[test]
    fn omega_projective_normalization() {
        // p = (1, 0), u = (0, 1), v = (0, i): Im<u,v> = 1
        let p = pt(P1, &[1.0, 0.0, 0.0, 0.0]);
        let u = tv(P1, &p, &[0.0, 0.0, 1.0, 0.0]);
        let v = tv(P1, &p, &[0.0, 0.0, 0.0, 1.0]);
        assert_abs_diff_eq!(P1.omega(&p, &u, &v).unwrap(), 1.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(P1.metric(&p, &u, &u).unwrap(), 1.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn metric_examples() {
        let p = pt(E1, &[0.0, 0.0]);
        let a = tv(E1, &p, &[1.0, 0.0]);
        let b = tv(E1, &p, &[0.0, 1.0]);
        assert_eq!(E1.metric(&p, &a, &a).unwrap(), 1.0);
        assert_eq!(E1.metric(&p, &a, &b).unwrap(), 0.0);
    }

    #[test]
    fn non_horizontal_rejected() {
        let p = pt(P1, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            P1.tangent(&p, vec![0.0, 1.0, 0.0, 0.0]),
            Err(Error::NotHorizontal { .. })
        ));
        assert!(matches!(
            P1.omega_components(&p.coords, &[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]),
            Err(Error::NotHorizontal { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let p = pt(E1, &[0.0, 0.0]);
        assert!(matches!(
            E1.omega_components(&p.coords, &[1.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(E1.point(vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn distances() {
        let p = pt(E1, &[0.3, -1.0]);
        assert_eq!(E1.distance(&p, &p).unwrap(), 0.0);
        let a = pt(T1, &[0.95, 0.0]);
        let b = pt(T1, &[0.05, 0.0]);
        assert_abs_diff_eq!(T1.distance(&a, &b).unwrap(), 0.1, epsilon = 1e-12);
        let e0 = pt(P1, &[1.0, 0.0, 0.0, 0.0]);
        let e1 = pt(P1, &[0.0, 0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(P1.distance(&e0, &e1).unwrap(), PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn projective_distance_resolves_tiny_angles() {
        let a = pt(P1, &[1.0, 0.0, 0.0, 0.0]);
        let th = 3e-10f64;
        let b = pt(P1, &[th.cos(), 0.0, 0.0, th.sin()]);
        assert_abs_diff_eq!(P1.distance(&a, &b).unwrap(), th, epsilon = 1e-20);
    }

    #[test]
    fn horizontal_projection_examples() {
        let p = pt(P1, &[1.0, 0.0, 0.0, 0.0]);
        // raw ⟂ p unchanged
        let t = P1.project_horizontal(&p, &[0.0, 0.0, 0.3, -0.2]).unwrap();
        assert_eq!(t.components, vec![0.0, 0.0, 0.3, -0.2]);
        // raw = p → 0
        let t = P1.project_horizontal(&p, &p.coords).unwrap();
        assert!(norm(&t.components) < 1e-16);
        // raw = (i, 1) → (0, 1)
        let t = P1.project_horizontal(&p, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(t.components, vec![0.0, 0.0, 1.0, 0.0]);
        assert!(E1.project_horizontal(&pt(E1, &[0.0, 0.0]), &[1.0, 0.0]).is_err());
    }

    #[test]
    fn exp_normal_examples() {
        let p = pt(E1, &[1.0, 0.0]);
        assert_eq!(E1.exp_normal(&p, &TangentVector::zero(p.clone())).unwrap(), p);
        let q = E1.exp_normal(&p, &tv(E1, &p, &[0.0, 0.2])).unwrap();
        assert_eq!(q.coords, vec![1.0, 0.2]);
        let p = pt(T1, &[0.9, 0.0]);
        let q = T1.exp_normal(&p, &tv(T1, &p, &[0.2, 0.0])).unwrap();
        assert_abs_diff_eq!(q.coords[0], 0.1, epsilon = 1e-12);
        let pp = pt(P1, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            P1.exp_normal(&pp, &TangentVector::zero(pp.clone())),
            Err(Error::UnsupportedBackend("projective"))
        ));
    }

    fn unit_complex(v: &[f64]) -> Vec<f64> {
        let n = norm(v);
        v.iter().map(|x| x / n).collect()
    }

    proptest! {
        #[test]
        fn omega_antisymmetric(u in prop::collection::vec(-3.0f64..3.0, 4),
                               v in prop::collection::vec(-3.0f64..3.0, 4)) {
            let k = ManifoldKind::Euclidean { n: 2 };
            let p = vec![0.0; 4];
            let a = k.omega_components(&p, &u, &v).unwrap();
            let b = k.omega_components(&p, &v, &u).unwrap();
            prop_assert!((a + b).abs() <= 1e-12);
        }

        #[test]
        fn omega_nondegenerate(u in prop::collection::vec(-1.0f64..1.0, 4)) {
            prop_assume!(norm(&u) > 1e-3);
            let k = ManifoldKind::Torus { n: 2 };
            let u: Vec<f64> = u.iter().map(|x| x / norm(&u)).collect();
            let p = vec![0.5; 4];
            let best = (0..4).map(|i| {
                let mut e = vec![0.0; 4];
                e[i] = 1.0;
                k.omega_components(&p, &u, &e).unwrap().abs()
            }).fold(0.0, f64::max);
            prop_assert!(best > 1e-8);
        }

        #[test]
        fn projective_phase_invariance(z in prop::collection::vec(-1.0f64..1.0, 6),
                                       w in prop::collection::vec(-1.0f64..1.0, 6),
                                       a in prop::collection::vec(-1.0f64..1.0, 6),
                                       b in prop::collection::vec(-1.0f64..1.0, 6),
                                       theta in 0.0f64..6.28) {
            prop_assume!(norm(&z) > 0.1 && norm(&w) > 0.1);
            let k = ManifoldKind::Projective { n: 2 };
            let z = unit_complex(&z);
            let w = unit_complex(&w);
            let ph = Complex::new(theta.cos(), theta.sin());
            let d0 = k.distance_unchecked(&z, &w);
            let d1 = k.distance_unchecked(&scale_complex(&z, ph), &w);
            prop_assert!((d0 - d1).abs() <= 1e-10);
            let u = horizontal_part(&z, &a);
            let v = horizontal_part(&z, &b);
            let w0 = k.omega_components(&z, &u, &v).unwrap();
            let zr = scale_complex(&z, ph);
            let w1 = k.omega_components(&zr, &scale_complex(&u, ph), &scale_complex(&v, ph)).unwrap();
            prop_assert!((w0 - w1).abs() <= 1e-10);
        }

        #[test]
        fn metric_positive_definite(z in prop::collection::vec(-1.0f64..1.0, 4),
                                    a in prop::collection::vec(-1.0f64..1.0, 4)) {
            prop_assume!(norm(&z) > 0.1);
            let z = unit_complex(&z);
            let u = horizontal_part(&z, &a);
            prop_assume!(norm(&u) > 1e-6);
            let g = P1.metric_components(&z, &u, &u).unwrap();
            prop_assert!(g > 0.0);
            let g = E1.metric_components(&[0.0, 0.0], &a[..2], &a[..2]).unwrap();
            prop_assert!(g >= 0.0);
        }
    }
}
