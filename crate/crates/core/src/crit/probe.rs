use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{HamiltonianSpec, ScalarField};
use crate::geom::ManifoldKind;
use crate::hofer::norm_of_rows;
use crate::lagr::{AssociatedFunction, PathLift};
use crate::scalar::{gauss_legendre, simpson, trapezoid, Scalar};

/// Pointwise time means must vanish to this accuracy.
pub const MEMBERSHIP_TOL: f64 = 1e-8;
const PROFILE_MEAN_TOL: f64 = 1e-10;
const SMOOTH_MEAN_INTERVALS: usize = 16;
const MEMBERSHIP_INTERVALS: usize = 512;

/// Time factor `c(t)` of a separable probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum TimeProfile {
    /// `tanh(κ(1/2 − t))`, a smoothed square wave.
    Square { kappa: f64 },
    Cos { k: u32 },
    Sin { k: u32 },
    /// `Σ_j cos[j] cos(2π(j+1)t) + sin[j] sin(2π(j+1)t)`.
    Fourier { cos: Vec<f64>, sin: Vec<f64> },
    Constant { value: f64 },
}

impl TimeProfile {
    pub fn eval<S: Scalar>(&self, t: S) -> S {
        let tau = S::TAU();
        match self {
            Self::Square { kappa } => (S::lit(*kappa) * (S::lit(0.5) - t)).tanh(),
            Self::Cos { k } => (tau * S::lit(*k as f64) * t).cos(),
            Self::Sin { k } => (tau * S::lit(*k as f64) * t).sin(),
            Self::Fourier { cos, sin } => {
                let mut acc = S::zero();
                for (j, (a, b)) in cos.iter().zip(sin).enumerate() {
                    let w = tau * S::from_usize_lossy(j + 1) * t;
                    acc = acc + S::lit(*a) * w.cos() + S::lit(*b) * w.sin();
                }
                acc
            }
            Self::Constant { value } => S::lit(*value),
        }
    }
}

/// `weight · (1 − (d/radius)²)³` inside the ball, 0 outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub weight: f64,
}

pub(crate) fn bump_shape<S: Scalar>(d: S, radius: S) -> S {
    if d >= radius {
        return S::zero();
    }
    let x = d / radius;
    let y = S::one() - x * x;
    y * y * y
}

/// How a probe was made; enough to rebuild it from the path alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ProbeDescriptor {
    Zero,
    /// `H − ∫H dt` for the path's own Hamiltonian.
    Canonical,
    /// `H̃ − ∫H̃ dt` for the tube extension `H̃` of the associated function,
    /// with breaks every `stride` time samples.
    CanonicalExtension { stride: usize },
    /// `B − ∫B dt` for bumps riding on the per-time argmax (weight `plus`)
    /// and argmin (weight `minus`) images.
    Tracking { radius: f64, plus: f64, minus: f64, stride: usize },
    Separable { profile: TimeProfile, bumps: Vec<Bump> },
    Custom { label: String },
}

/// A function `G(t, p)` with `∫₀¹ G(t, p) dt = 0` for every `p`.
#[derive(Clone)]
pub struct ProbeDirection<S> {
    id: String,
    descriptor: ProbeDescriptor,
    value: ScalarField<S>,
    breaks: Option<Arc<Vec<S>>>,
    certified: bool,
}

impl<S> fmt::Debug for ProbeDirection<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProbeDirection")
            .field("id", &self.id)
            .field("descriptor", &self.descriptor)
            .field("certified", &self.certified)
            .finish()
    }
}

impl<S: Scalar> ProbeDirection<S> {
    pub fn zero(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            descriptor: ProbeDescriptor::Zero,
            value: Arc::new(|_, _| S::zero()),
            breaks: None,
            certified: true,
        }
    }

    /// An arbitrary `G`; must pass [`certify`](Self::certify) before use.
    /// `breaks`, when given, declares `G` affine in `t` between them.
    pub fn custom(
        id: impl Into<String>,
        label: impl Into<String>,
        g: impl Fn(S, &[S]) -> S + Send + Sync + 'static,
        breaks: Option<Vec<S>>,
    ) -> Self {
        Self {
            id: id.into(),
            descriptor: ProbeDescriptor::Custom { label: label.into() },
            value: Arc::new(g),
            breaks: breaks.map(Arc::new),
            certified: false,
        }
    }

    pub(crate) fn from_parts(
        id: String,
        descriptor: ProbeDescriptor,
        value: ScalarField<S>,
        breaks: Option<Vec<S>>,
    ) -> Self {
        Self {
            id,
            descriptor,
            value,
            breaks: breaks.map(Arc::new),
            certified: true,
        }
    }

    /// Check the time mean at `points`; certified on success.
    pub fn certify(mut self, points: &[Vec<S>]) -> Result<Self> {
        let r = self.membership_residual(points);
        if r > S::lit(MEMBERSHIP_TOL) {
            return Err(Error::NonZeroMean { mean: r.as_f64() });
        }
        self.certified = true;
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn descriptor(&self) -> &ProbeDescriptor {
        &self.descriptor
    }

    pub fn is_certified(&self) -> bool {
        self.certified
    }

    #[inline]
    pub fn eval(&self, t: S, p: &[S]) -> S {
        (self.value)(t, p)
    }

    /// `∫₀¹ G(t, p) dt` by a rule independent of the one used to build `G`:
    /// Simpson on every break interval, or 512-interval Simpson on `[0, 1]`.
    pub fn time_mean(&self, p: &[S]) -> S {
        match &self.breaks {
            Some(b) => b.windows(2).map(|w| simpson(w[0], w[1], 2, |t| self.eval(t, p))).sum(),
            None => simpson(S::zero(), S::one(), MEMBERSHIP_INTERVALS, |t| self.eval(t, p)),
        }
    }

    pub fn membership_residual(&self, points: &[Vec<S>]) -> S {
        points
            .par_iter()
            .map(|p| self.time_mean(p).abs())
            .reduce(S::zero, S::max)
    }

    /// `G(t_i, ι_{t_i}(node))` for every time and node.
    pub fn sample(&self, lift: &PathLift<S>) -> Vec<Vec<S>> {
        lift.tgrid()
            .par_iter()
            .zip(lift.meshes())
            .map(|(&t, mesh)| mesh.images().iter().map(|p| self.eval(t, &p.coords)).collect())
            .collect()
    }
}

fn time_mean_of<S: Scalar>(h: &HamiltonianSpec<S>, p: &[S]) -> S {
    match h.time_breaks() {
        Some(b) => {
            let ys: Vec<S> = b.iter().map(|&t| h.eval(t, p)).collect();
            trapezoid(b, &ys)
        }
        None => gauss_legendre(S::zero(), S::one(), SMOOTH_MEAN_INTERVALS, |t| h.eval(t, p)),
    }
}

/// `G(t, y) = H(t, y) − ∫₀¹ H(τ, y) dτ`.
pub fn canonical_probe<S: Scalar>(h: &HamiltonianSpec<S>) -> ProbeDirection<S> {
    let inner = h.clone();
    let value: ScalarField<S> = Arc::new(move |t, p| inner.eval(t, p) - time_mean_of(&inner, p));
    ProbeDirection::from_parts(
        "canonical".into(),
        ProbeDescriptor::Canonical,
        value,
        h.time_breaks().map(<[S]>::to_vec),
    )
}

/// `G(t, p) = c(t) · Σ bumps(p)`, after checking `∫c = 0` to `1e-10`.
pub fn make_probe_separable<S: Scalar>(
    kind: ManifoldKind,
    id: impl Into<String>,
    profile: TimeProfile,
    bumps: Vec<Bump>,
) -> Result<ProbeDirection<S>> {
    let mean = simpson(0.0, 1.0, 1024, |t: f64| profile.eval(t));
    if mean.abs() > PROFILE_MEAN_TOL {
        return Err(Error::NonZeroMean { mean });
    }
    let centers: Vec<(Vec<S>, S, S)> = bumps
        .iter()
        .map(|b| {
            let c = kind.normalize_coords(b.center.iter().map(|x| S::lit(*x)).collect());
            (c, S::lit(b.radius), S::lit(b.weight))
        })
        .collect();
    let c = profile.clone();
    let value: ScalarField<S> = Arc::new(move |t, p| {
        let g: S = centers
            .iter()
            .map(|(q, r, w)| *w * bump_shape(kind.distance_unchecked(p, q), *r))
            .sum();
        if g == S::zero() {
            S::zero()
        } else {
            c.eval(t) * g
        }
    });
    Ok(ProbeDirection::from_parts(
        id.into(),
        ProbeDescriptor::Separable { profile, bumps },
        value,
        None,
    ))
}

/// Seeded separable probe: three-mode Fourier profile (zero mean, and zero
/// trapezoid sum on uniform grids) times one to three bumps centred at mesh
/// images. Weights scale with `amplitude`, radii with `length_scale`.
pub fn random_probe<S: Scalar>(
    lift: &PathLift<S>,
    amplitude: f64,
    length_scale: f64,
    seed: u64,
    index: u64,
) -> Result<ProbeDirection<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index));
    let profile = TimeProfile::Fourier {
        cos: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        sin: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let count = rng.gen_range(1..=3);
    let bumps = (0..count)
        .map(|_| {
            let ti = rng.gen_range(0..lift.time_len());
            let node = rng.gen_range(0..lift.node_len());
            Bump {
                center: lift.mesh(ti).image(node).coords.iter().map(|x| x.as_f64()).collect(),
                radius: length_scale * rng.gen_range(0.05..0.5),
                weight: amplitude * rng.gen_range(-1.0..1.0),
            }
        })
        .collect();
    make_probe_separable(lift.kind(), format!("random-{seed}-{index}"), profile, bumps)
}

#[derive(Clone, Debug)]
struct Row<S> {
    rest_max: S,
    rest_min: S,
    /// `(h, g)` at nodes where `g ≠ 0`.
    active: Vec<(S, S)>,
}

/// `u(s) = ∫ osc(h_t − s g_t) dt`, stored so that nodes where `g` vanishes
/// cost nothing per evaluation.
#[derive(Clone, Debug)]
pub struct LengthFunction<S> {
    tgrid: Vec<S>,
    rows: Vec<Row<S>>,
}

impl<S: Scalar> LengthFunction<S> {
    pub fn new(h: &AssociatedFunction<S>, g: &[Vec<S>], tgrid: &[S]) -> Result<Self> {
        if h.time_len() != tgrid.len() || g.len() != tgrid.len() {
            return Err(Error::DimensionMismatch {
                expected: tgrid.len(),
                got: h.time_len().min(g.len()),
            });
        }
        let rows = h
            .values
            .iter()
            .zip(g)
            .map(|(hr, gr)| {
                if hr.len() != gr.len() {
                    return Err(Error::DimensionMismatch {
                        expected: hr.len(),
                        got: gr.len(),
                    });
                }
                let mut row = Row {
                    rest_max: S::neg_infinity(),
                    rest_min: S::infinity(),
                    active: Vec::new(),
                };
                for (&hv, &gv) in hr.iter().zip(gr) {
                    if gv == S::zero() {
                        row.rest_max = row.rest_max.max(hv);
                        row.rest_min = row.rest_min.min(hv);
                    } else {
                        row.active.push((hv, gv));
                    }
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            tgrid: tgrid.to_vec(),
            rows,
        })
    }

    pub fn eval(&self, s: S) -> S {
        let osc: Vec<S> = self
            .rows
            .iter()
            .map(|r| {
                let (mut hi, mut lo) = (r.rest_max, r.rest_min);
                for &(h, g) in &r.active {
                    let v = h - s * g;
                    hi = hi.max(v);
                    lo = lo.min(v);
                }
                hi - lo
            })
            .collect();
        trapezoid(&self.tgrid, &osc)
    }

    /// Minimize over `[lo, hi]`: a uniform grid of `points` (which should
    /// contain 0), then golden-section search around the best grid point.
    /// `u` is convex, so the bracket holds the minimum.
    pub fn minimize(&self, lo: S, hi: S, points: usize) -> (S, S) {
        let n = points.max(3);
        let grid: Vec<S> = (0..n)
            .map(|i| lo + (hi - lo) * S::from_usize_lossy(i) / S::from_usize_lossy(n - 1))
            .collect();
        let vals: Vec<S> = grid.iter().map(|&s| self.eval(s)).collect();
        let mut k = 0;
        for i in 1..n {
            if vals[i] < vals[k] {
                k = i;
            }
        }
        let mut best = (grid[k], vals[k]);
        let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(n - 1)]);
        let ratio = S::lit(0.5 * (5f64.sqrt() - 1.0));
        let mut x1 = b - ratio * (b - a);
        let mut x2 = a + ratio * (b - a);
        let (mut f1, mut f2) = (self.eval(x1), self.eval(x2));
        for _ in 0..60 {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - ratio * (b - a);
                f1 = self.eval(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + ratio * (b - a);
                f2 = self.eval(x2);
            }
        }
        for (s, f) in [(x1, f1), (x2, f2)] {
            if f < best.1 {
                best = (s, f);
            }
        }
        best
    }
}

/// `u(s)` at each `s` of `sgrid` for a certified probe.
pub fn probe_length_function<S: Scalar>(
    h: &AssociatedFunction<S>,
    lift: &PathLift<S>,
    g: &ProbeDirection<S>,
    sgrid: &[S],
) -> Result<Vec<S>> {
    if !g.is_certified() {
        return Err(Error::InvalidConfig(format!("probe {} is not certified", g.id())));
    }
    let f = LengthFunction::new(h, &g.sample(lift), lift.tgrid())?;
    Ok(sgrid.iter().map(|&s| f.eval(s)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorantReport {
    /// `sup_s |l(s) − u(s)| / s²`.
    pub ratio: f64,
    /// `‖K ∘ ι‖`, which bounds the ratio.
    pub bound: f64,
    pub worst_s: f64,
}

/// Compare `l(s) = ‖h − (sG + s²K)∘ι‖` with its convex model `u(s) = ‖h − sG∘ι‖`.
pub fn convex_majorant_check<S: Scalar>(
    h: &AssociatedFunction<S>,
    lift: &PathLift<S>,
    g: &ProbeDirection<S>,
    k: &ProbeDirection<S>,
    sgrid: &[S],
) -> Result<MajorantReport> {
    if sgrid.iter().any(|s| *s == S::zero()) {
        return Err(Error::InvalidConfig("s grid must exclude 0".into()));
    }
    if !g.is_certified() || !k.is_certified() {
        return Err(Error::InvalidConfig("probes must be certified".into()));
    }
    let gs = g.sample(lift);
    let ks = k.sample(lift);
    let tgrid = lift.tgrid();
    let bound = norm_of_rows(&ks, tgrid);
    let combine = |s: S, s2: S| -> Vec<Vec<S>> {
        h.values
            .iter()
            .zip(gs.iter().zip(&ks))
            .map(|(hr, (gr, kr))| {
                hr.iter()
                    .zip(gr.iter().zip(kr))
                    .map(|(hv, (gv, kv))| *hv - s * *gv - s2 * *kv)
                    .collect()
            })
            .collect()
    };
    let mut ratio = S::zero();
    let mut worst = S::zero();
    for &s in sgrid {
        let l = norm_of_rows(&combine(s, s * s), tgrid);
        let u = norm_of_rows(&combine(s, S::zero()), tgrid);
        let r = (l - u).abs() / (s * s);
        if r > ratio {
            ratio = r;
            worst = s;
        }
    }
    Ok(MajorantReport {
        ratio: ratio.as_f64(),
        bound: bound.as_f64(),
        worst_s: worst.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate_path, FlowConfig};
    use crate::lagr::{associated_function_from_h, LagrangianMesh, ModelGrid};
    use approx::assert_abs_diff_eq;

    const E1: ManifoldKind = ManifoldKind::Euclidean { n: 1 };

    fn translated(m: usize) -> (PathLift<f64>, AssociatedFunction<f64>) {
        let h = HamiltonianSpec::new("x", |_, p: &[f64]| p[0]).with_gradient(|_, _| vec![1.0, 0.0]);
        let grid = Arc::new(ModelGrid::circle(m).unwrap());
        let mesh = LagrangianMesh::embed(E1, grid, |c| c.to_vec()).unwrap();
        let ts: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let lift = integrate_path(E1, &h, &mesh, &ts, &FlowConfig::default()).unwrap();
        let values = associated_function_from_h(&lift, &h);
        (lift, values)
    }

    fn random_points(n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        (0..n).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect()
    }

    #[test]
    fn separable_mean_checks() {
        let bump = vec![Bump {
            center: vec![1.0, 0.0],
            radius: 0.3,
            weight: 1.0,
        }];
        assert!(make_probe_separable::<f64>(E1, "c", TimeProfile::Cos { k: 1 }, bump.clone()).is_ok());
        assert!(make_probe_separable::<f64>(E1, "sq", TimeProfile::Square { kappa: 20.0 }, bump.clone()).is_ok());
        assert!(matches!(
            make_probe_separable::<f64>(E1, "one", TimeProfile::Constant { value: 1.0 }, bump),
            Err(Error::NonZeroMean { .. })
        ));
    }

    #[test]
    fn canonical_probe_examples() {
        let autonomous = HamiltonianSpec::new("f", |_, p: &[f64]| p[0] * p[1] + p[1].sin());
        let g = canonical_probe(&autonomous);
        for p in random_points(10) {
            assert_abs_diff_eq!(g.eval(0.3, &p), 0.0, epsilon = 1e-14);
        }
        let linear = HamiltonianSpec::new("t f", |t, p: &[f64]| t * p[0].cos());
        let g = canonical_probe(&linear);
        for p in random_points(10) {
            assert_abs_diff_eq!(g.eval(0.8, &p), 0.3 * p[0].cos(), epsilon = 1e-14);
        }
        let wild = HamiltonianSpec::new("wild", |t, p: &[f64]| (3.0 * t).exp() * p[0] + (t * p[1]).sin());
        assert!(canonical_probe(&wild).membership_residual(&random_points(10)) <= 1e-8);
    }

    #[test]
    fn custom_probe_certification() {
        let good = ProbeDirection::custom("g", "cos", |t: f64, p: &[f64]| (std::f64::consts::TAU * t).cos() * p[0], None);
        assert!(good.certify(&random_points(10)).is_ok());
        let bad = ProbeDirection::custom("b", "t", |t: f64, p: &[f64]| t * p[0] + 1.0, None);
        assert!(bad.certify(&random_points(10)).is_err());
    }

    #[test]
    fn zero_probe_keeps_length() {
        let (lift, h) = translated(128);
        let u = probe_length_function(&h, &lift, &ProbeDirection::zero("0"), &[-1.0, 0.0, 0.5]).unwrap();
        assert!(u.iter().all(|v| (*v - u[1]).abs() == 0.0));
        assert_abs_diff_eq!(u[1], 2.0, epsilon = 1e-3);
    }

    #[test]
    fn length_function_is_convex() {
        let (lift, h) = translated(128);
        for index in 0..5 {
            let g = random_probe(&lift, 2.0, 1.0, 3, index).unwrap();
            let sgrid: Vec<f64> = (0..41).map(|i| -1.0 + i as f64 / 20.0).collect();
            let u = probe_length_function(&h, &lift, &g, &sgrid).unwrap();
            for w in u.windows(3) {
                assert!(w[1] <= 0.5 * (w[0] + w[2]) + 1e-10);
            }
        }
    }

    #[test]
    fn minimizer_finds_interior_minimum() {
        let (lift, h) = translated(64);
        // g = h itself: u(s) = |1 − s| ‖h‖, minimized at s = 1
        let f = LengthFunction::new(&h, &h.values, lift.tgrid()).unwrap();
        let (s, u) = f.minimize(-1.0, 1.0, 41);
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u, 0.0, epsilon = 1e-12);
        let g: Vec<Vec<f64>> = h.values.iter().map(|r| r.iter().map(|v| 0.5 * v).collect()).collect();
        let f = LengthFunction::new(&h, &g, lift.tgrid()).unwrap();
        let (s, _) = f.minimize(-1.0, 1.0, 40);
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn majorant_examples() {
        let (lift, h) = translated(128);
        let sgrid: Vec<f64> = (1..=20).flat_map(|i| [i as f64 / 20.0, -(i as f64) / 20.0]).collect();
        let k = random_probe(&lift, 1.0, 1.0, 8, 0).unwrap();
        let g = random_probe(&lift, 1.0, 1.0, 8, 1).unwrap();
        let zero = ProbeDirection::zero("0");
        let r = convex_majorant_check(&h, &lift, &g, &zero, &sgrid).unwrap();
        assert_eq!(r.ratio, 0.0);
        let r = convex_majorant_check(&h, &lift, &g, &k, &sgrid).unwrap();
        assert!(r.ratio <= r.bound + 1e-9);
        assert!(convex_majorant_check(&h, &lift, &g, &k, &[0.0]).is_err());
    }
}
