//! Hamiltonian vector fields `ω(X_t, ·) = dH_t` and time-dependent integration of meshes.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{horizontal_part, ManifoldKind, Point, TangentVector};
use crate::lagr::{LagrangianMesh, PathLift, DEFAULT_TOL_LAG};
use crate::scalar::Scalar;

pub type ScalarField<S> = Arc<dyn Fn(S, &[S]) -> S + Send + Sync>;
pub type VectorField<S> = Arc<dyn Fn(S, &[S]) -> Vec<S> + Send + Sync>;

/// Where a Hamiltonian is supported.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "support", rename_all = "kebab-case")]
pub enum Support {
    Global,
    /// Supported in the ball of the given radius about the origin.
    Compact { radius: f64 },
}

/// A time-dependent function `H(t, p)` on a backend, with optional analytic
/// gradient (in stored coordinates) and optional exact flow `ψ_t`.
///
/// On `CP^n` the evaluator must be invariant under `z ↦ λz`; gradients are
/// those of that homogeneous extension at unit representatives.
#[derive(Clone)]
pub struct HamiltonianSpec<S> {
    label: String,
    value: ScalarField<S>,
    gradient: Option<VectorField<S>>,
    exact_flow: Option<VectorField<S>>,
    support: Support,
    time_breaks: Option<Arc<Vec<S>>>,
}

impl<S> fmt::Debug for HamiltonianSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSpec")
            .field("label", &self.label)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("exact_flow", &self.exact_flow.is_some())
            .field("support", &self.support)
            .finish()
    }
}

impl<S: Scalar> HamiltonianSpec<S> {
    pub fn new(label: impl Into<String>, value: impl Fn(S, &[S]) -> S + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            value: Arc::new(value),
            gradient: None,
            exact_flow: None,
            support: Support::Global,
            time_breaks: None,
        }
    }

    pub fn zero() -> Self {
        Self::new("zero", |_, _| S::zero()).with_gradient(|_, p| vec![S::zero(); p.len()])
    }

    pub fn with_gradient(mut self, g: impl Fn(S, &[S]) -> Vec<S> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_exact_flow(mut self, f: impl Fn(S, &[S]) -> Vec<S> + Send + Sync + 'static) -> Self {
        self.exact_flow = Some(Arc::new(f));
        self
    }

    pub fn with_support(mut self, support: Support) -> Self {
        self.support = support;
        self
    }

    /// Declare `H` affine in `t` between consecutive `breaks` (which must
    /// start at 0 and end at 1); time means are then exact by the trapezoid rule.
    pub fn with_time_breaks(mut self, breaks: Vec<S>) -> Self {
        self.time_breaks = Some(Arc::new(breaks));
        self
    }

    pub fn time_breaks(&self) -> Option<&[S]> {
        self.time_breaks.as_deref().map(Vec::as_slice)
    }

    /// Drop the analytic gradient so finite differences are used.
    pub fn without_gradient(mut self) -> Self {
        self.gradient = None;
        self
    }

    /// `H(t, p) + c(t)`: same flow, shifted associated function.
    pub fn with_time_shift(&self, c: impl Fn(S) -> S + Send + Sync + 'static) -> Self {
        let inner = self.value.clone();
        Self {
            label: format!("{} + c(t)", self.label),
            value: Arc::new(move |t, p| inner(t, p) + c(t)),
            ..self.clone()
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn has_exact_flow(&self) -> bool {
        self.exact_flow.is_some()
    }

    #[inline]
    pub fn eval(&self, t: S, p: &[S]) -> S {
        (self.value)(t, p)
    }

    pub fn evaluator(&self) -> ScalarField<S> {
        self.value.clone()
    }

    /// `ψ_t(p)` from the exact-flow oracle, when one is attached.
    pub fn exact(&self, t: S, p: &[S]) -> Option<Vec<S>> {
        self.exact_flow.as_ref().map(|f| f(t, p))
    }

    /// Gradient in stored coordinates: analytic if supplied, otherwise central
    /// differences with step `fd_step · max(1, |x_i|)`. Projective probes are
    /// renormalized before evaluation.
    pub fn gradient(&self, kind: ManifoldKind, t: S, p: &[S], fd_step: S) -> Result<Vec<S>> {
        if let Some(g) = &self.gradient {
            let out = g(t, p);
            if out.len() != p.len() {
                return Err(Error::Gradient(format!(
                    "analytic gradient has {} components, expected {}",
                    out.len(),
                    p.len()
                )));
            }
            return Ok(out);
        }
        let mut probe = p.to_vec();
        let mut out = Vec::with_capacity(p.len());
        for i in 0..p.len() {
            let h = fd_step * S::one().max(p[i].abs());
            probe[i] = p[i] + h;
            let up = self.eval_at(kind, t, &probe);
            probe[i] = p[i] - h;
            let down = self.eval_at(kind, t, &probe);
            probe[i] = p[i];
            let d = (up - down) / (h + h);
            if !d.is_finite() {
                return Err(Error::Gradient(format!("non-finite derivative along coordinate {i}")));
            }
            out.push(d);
        }
        Ok(out)
    }

    fn eval_at(&self, kind: ManifoldKind, t: S, raw: &[S]) -> S {
        if kind.is_projective() {
            let z = kind.normalize_coords(raw.to_vec());
            self.eval(t, &z)
        } else {
            self.eval(t, raw)
        }
    }

    /// Directional derivative `dH_t(v)` at `p` by central differences.
    pub fn directional_derivative(&self, kind: ManifoldKind, t: S, p: &[S], v: &[S], step: S) -> S {
        let plus: Vec<S> = p.iter().zip(v).map(|(a, b)| *a + step * *b).collect();
        let minus: Vec<S> = p.iter().zip(v).map(|(a, b)| *a - step * *b).collect();
        (self.eval_at(kind, t, &plus) - self.eval_at(kind, t, &minus)) / (step + step)
    }
}

/// Hamiltonian vector field: the unique `X` with `ω(X, ·) = dH_t` at `p`.
pub fn hamiltonian_vector_field<S: Scalar>(
    kind: ManifoldKind,
    h: &HamiltonianSpec<S>,
    t: S,
    p: &Point<S>,
    fd_step: S,
) -> Result<TangentVector<S>> {
    if p.dim() != kind.coord_len() {
        return Err(Error::DimensionMismatch {
            expected: kind.coord_len(),
            got: p.dim(),
        });
    }
    Ok(TangentVector {
        base: p.clone(),
        components: field_components(kind, h, t, &p.coords, fd_step)?,
    })
}

fn field_components<S: Scalar>(kind: ManifoldKind, h: &HamiltonianSpec<S>, t: S, p: &[S], fd_step: S) -> Result<Vec<S>> {
    let mut g = h.gradient(kind, t, p, fd_step)?;
    if kind.is_projective() {
        g = horizontal_part(p, &g);
    }
    // c·Σ(X_x v_y − X_y v_x) = Σ(g_x v_x + g_y v_y)  ⇒  X = (g_y, −g_x) / c
    let inv = S::one() / kind.omega_scale::<S>();
    Ok(g.chunks_exact(2).flat_map(|a| [inv * a[1], -inv * a[0]]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepper {
    Rk4,
    Midpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub stepper: Stepper,
    /// Steps per unit time.
    pub steps: usize,
    /// Relative finite-difference step for gradients.
    pub fd_step: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            stepper: Stepper::Rk4,
            steps: 200,
            fd_step: 1e-5,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 50 {
            return Err(Error::InvalidConfig(format!("steps = {} < 50", self.steps)));
        }
        if !(1e-7..=1e-3).contains(&self.fd_step) {
            return Err(Error::InvalidConfig(format!("fd_step = {} outside [1e-7, 1e-3]", self.fd_step)));
        }
        Ok(())
    }
}

/// Right-hand side on raw coordinates. On `CP^n` the field is extended
/// homogeneously of degree one off the unit sphere so intermediate stages
/// need no renormalization.
fn rhs<S: Scalar>(kind: ManifoldKind, h: &HamiltonianSpec<S>, t: S, w: &[S], fd_step: S) -> Result<Vec<S>> {
    if kind.is_projective() {
        let r = crate::geom::norm(w);
        let z: Vec<S> = w.iter().map(|x| *x / r).collect();
        let x = field_components(kind, h, t, &z, fd_step)?;
        Ok(x.into_iter().map(|c| c * r).collect())
    } else {
        field_components(kind, h, t, w, fd_step)
    }
}

fn axpy<S: Scalar>(x: &[S], a: S, v: &[S]) -> Vec<S> {
    x.iter().zip(v).map(|(p, q)| *p + a * *q).collect()
}

fn step<S: Scalar>(
    kind: ManifoldKind,
    h: &HamiltonianSpec<S>,
    cfg: &FlowConfig,
    t: S,
    dt: S,
    x: &[S],
) -> Result<Vec<S>> {
    let fd = S::lit(cfg.fd_step);
    let half = S::lit(0.5);
    let next = match cfg.stepper {
        Stepper::Midpoint => {
            let k1 = rhs(kind, h, t, x, fd)?;
            let k2 = rhs(kind, h, t + half * dt, &axpy(x, half * dt, &k1), fd)?;
            axpy(x, dt, &k2)
        }
        Stepper::Rk4 => {
            let k1 = rhs(kind, h, t, x, fd)?;
            let k2 = rhs(kind, h, t + half * dt, &axpy(x, half * dt, &k1), fd)?;
            let k3 = rhs(kind, h, t + half * dt, &axpy(x, half * dt, &k2), fd)?;
            let k4 = rhs(kind, h, t + dt, &axpy(x, dt, &k3), fd)?;
            let sixth = dt / S::lit(6.0);
            x.iter()
                .enumerate()
                .map(|(i, xi)| *xi + sixth * (k1[i] + S::lit(2.0) * (k2[i] + k3[i]) + k4[i]))
                .collect()
        }
    };
    Ok(kind.normalize_coords(next))
}

/// Flow every node of `initial` through the field of `h`, recording images on
/// `tgrid`. Each interval `[t_i, t_{i+1}]` gets `ceil(steps · Δt)` steps.
/// Meshes whose Lagrangian defect exceeds `2 · DEFAULT_TOL_LAG` are rejected.
pub fn integrate_path<S: Scalar>(
    kind: ManifoldKind,
    h: &HamiltonianSpec<S>,
    initial: &LagrangianMesh<S>,
    tgrid: &[S],
    cfg: &FlowConfig,
) -> Result<PathLift<S>> {
    cfg.validate()?;
    if initial.kind() != kind {
        return Err(Error::InvalidConfig("initial mesh lives on another backend".into()));
    }
    if tgrid.first() != Some(&S::zero()) {
        return Err(Error::InvalidConfig("time grid must start at 0".into()));
    }
    let substeps: Vec<usize> = tgrid
        .windows(2)
        .map(|w| {
            let n = ((w[1] - w[0]) * S::from_usize_lossy(cfg.steps) - S::lit(1e-9)).ceil();
            n.to_usize().unwrap_or(1).max(1)
        })
        .collect();
    let trajectories: Vec<Vec<Vec<S>>> = initial
        .images()
        .par_iter()
        .map(|p| {
            let mut x = p.coords.clone();
            let mut out = Vec::with_capacity(tgrid.len());
            out.push(x.clone());
            for (w, &n) in tgrid.windows(2).zip(&substeps) {
                let dt = (w[1] - w[0]) / S::from_usize_lossy(n);
                for k in 0..n {
                    x = step(kind, h, cfg, w[0] + dt * S::from_usize_lossy(k), dt, &x)?;
                }
                out.push(x.clone());
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let grid = initial.grid().clone();
    let tol = S::lit(2.0 * DEFAULT_TOL_LAG);
    let meshes = (0..tgrid.len())
        .map(|ti| {
            let images = trajectories.iter().map(|tr| Point { coords: tr[ti].clone() }).collect();
            let mesh = LagrangianMesh::from_parts(kind, grid.clone(), images)?;
            let defect = mesh.lagrangian_defect();
            if defect > tol {
                return Err(Error::StepRejected {
                    time: tgrid[ti].as_f64(),
                    defect: defect.as_f64(),
                    tol: tol.as_f64(),
                });
            }
            Ok(mesh)
        })
        .collect::<Result<Vec<_>>>()?;
    PathLift::new(tgrid.to_vec(), meshes)
}

/// Advance every node of `mesh` from `t0` to `t1` (`ceil(steps · |t1 − t0|)` steps).
pub fn advance_mesh<S: Scalar>(
    h: &HamiltonianSpec<S>,
    mesh: &LagrangianMesh<S>,
    t0: S,
    t1: S,
    cfg: &FlowConfig,
) -> Result<LagrangianMesh<S>> {
    cfg.validate()?;
    let kind = mesh.kind();
    let n = (((t1 - t0).abs() * S::from_usize_lossy(cfg.steps) - S::lit(1e-9)).ceil())
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let dt = (t1 - t0) / S::from_usize_lossy(n);
    let images = mesh
        .images()
        .par_iter()
        .map(|p| {
            let mut x = p.coords.clone();
            for k in 0..n {
                x = step(kind, h, cfg, t0 + dt * S::from_usize_lossy(k), dt, &x)?;
            }
            Ok(Point { coords: x })
        })
        .collect::<Result<Vec<_>>>()?;
    LagrangianMesh::from_parts(kind, mesh.grid().clone(), images)
}

/// `[z0 : e^{iπst} z1 : … : e^{iπst} zk : z_{k+1} : … : zn]` on `CP^n`.
pub fn exact_flow_projective_rotation<S: Scalar>(n: usize, k: usize, s: S, t: S, p: &Point<S>) -> Result<Point<S>> {
    let kind = ManifoldKind::Projective { n };
    if p.dim() != kind.coord_len() {
        return Err(Error::DimensionMismatch {
            expected: kind.coord_len(),
            got: p.dim(),
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("k = {k} outside 1..={n}")));
    }
    let phase = Complex::from_polar(S::one(), S::PI() * s * t);
    let mut z = p.as_complex();
    z.iter_mut().skip(1).take(k).for_each(|c| *c = *c * phase);
    Ok(Point::from_complex(&z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{dot, norm};
    use crate::lagr::ModelGrid;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const E1: ManifoldKind = ManifoldKind::Euclidean { n: 1 };

    fn x_field(kind: ManifoldKind, h: &HamiltonianSpec<f64>, p: &[f64]) -> Vec<f64> {
        hamiltonian_vector_field(kind, h, 0.3, &Point { coords: p.to_vec() }, 1e-5)
            .unwrap()
            .components
    }

    #[test]
    fn linear_and_rotation_fields() {
        let hy = HamiltonianSpec::new("y", |_, p: &[f64]| p[1]);
        let x = x_field(E1, &hy, &[0.4, -2.0]);
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-9);
        let osc = HamiltonianSpec::new("r2/2", |_, p: &[f64]| 0.5 * (p[0] * p[0] + p[1] * p[1]));
        let x = x_field(E1, &osc, &[0.4, -2.0]);
        assert_abs_diff_eq!(x[0], -2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(x[1], -0.4, epsilon = 1e-8);
    }

    fn projective_h(k: usize, s: f64) -> HamiltonianSpec<f64> {
        HamiltonianSpec::new("rotation", move |_, z: &[f64]| {
            let top: f64 = z[2..2 + 2 * k].iter().map(|x| x * x).sum();
            -s * top / (2.0 * dot(z, z))
        })
    }

    #[test]
    fn projective_field_generates_phase_rotation() {
        let kind = ManifoldKind::Projective { n: 2 };
        let h = projective_h(1, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let raw: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let z = kind.normalize_coords(raw);
            let x = x_field(kind, &h, &z);
            // generator of the rotation, horizontal part: iπs·P z projected
            let mut gen = vec![0.0; 6];
            gen[2] = -std::f64::consts::PI * 0.7 * z[3];
            gen[3] = std::f64::consts::PI * 0.7 * z[2];
            let expect = horizontal_part(&z, &gen);
            for (a, b) in x.iter().zip(&expect) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn field_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let kinds = [
            ManifoldKind::Euclidean { n: 2 },
            ManifoldKind::Torus { n: 2 },
            ManifoldKind::Projective { n: 2 },
        ];
        let hs: Vec<HamiltonianSpec<f64>> = vec![
            HamiltonianSpec::new("poly", |t, p: &[f64]| p[0] * p[1] + t * p[2].powi(3) - p[3].sin()),
            HamiltonianSpec::new("trig", |t, p: &[f64]| {
                let tau = std::f64::consts::TAU;
                (tau * p[0]).cos() * (tau * p[3]).sin() + t * (tau * p[1]).cos()
            }),
            HamiltonianSpec::new("quad", |t, z: &[f64]| {
                let r2 = dot(z, z);
                (z[0] * z[2] + z[1] * z[3] + (1.0 + t) * z[4] * z[4]) / r2
            }),
        ];
        for (kind, h) in kinds.iter().zip(&hs) {
            for _ in 0..20 {
                let t = rng.gen_range(0.0..1.0);
                let raw: Vec<f64> = (0..kind.coord_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let p = kind.normalize_coords(raw);
                let x = x_field(*kind, h, &p);
                let xt = hamiltonian_vector_field(*kind, h, t, &Point { coords: p.clone() }, 1e-5).unwrap();
                let _ = x;
                for _ in 0..kind.coord_len() {
                    let mut v: Vec<f64> = (0..kind.coord_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    if kind.is_projective() {
                        v = horizontal_part(&p, &v);
                    }
                    let lhs = kind.omega_components(&p, &xt.components, &v).unwrap();
                    let rhs = h.directional_derivative(*kind, t, &p, &v, 1e-6);
                    let tol = if kind.is_projective() { 1e-5 } else { 1e-6 };
                    assert!((lhs - rhs).abs() <= tol * rhs.abs().max(1.0), "{kind:?}: {lhs} vs {rhs}");
                }
            }
        }
    }

    fn unit_circle(m: usize) -> LagrangianMesh<f64> {
        let grid = Arc::new(ModelGrid::circle(m).unwrap());
        LagrangianMesh::embed(E1, grid, |c| c.to_vec()).unwrap()
    }

    fn tgrid(n: usize) -> Vec<f64> {
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    #[test]
    fn zero_hamiltonian_is_constant() {
        let mesh = unit_circle(64);
        let lift = integrate_path(E1, &HamiltonianSpec::zero(), &mesh, &tgrid(10), &FlowConfig::default()).unwrap();
        for m in lift.meshes() {
            assert_eq!(m.images(), mesh.images());
        }
    }

    #[test]
    fn linear_field_is_exact() {
        let h = HamiltonianSpec::new("x", |_, p: &[f64]| p[0]).with_gradient(|_, _| vec![1.0, 0.0]);
        let mesh = unit_circle(128);
        let lift = integrate_path(E1, &h, &mesh, &tgrid(200), &FlowConfig::default()).unwrap();
        for (ti, t) in lift.tgrid().iter().enumerate() {
            for i in 0..128 {
                let a = &mesh.image(i).coords;
                let b = &lift.mesh(ti).image(i).coords;
                assert_abs_diff_eq!(b[0], a[0], epsilon = 1e-14);
                assert_abs_diff_eq!(b[1], a[1] - t, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn energy_is_conserved() {
        let h = HamiltonianSpec::new("pendulum", |_, p: &[f64]| 0.5 * p[1] * p[1] - p[0].cos());
        let grid = Arc::new(ModelGrid::circle(64).unwrap());
        let mesh = LagrangianMesh::embed(E1, grid, |c| vec![0.5 * c[0], 0.5 * c[1]]).unwrap();
        let lift = integrate_path(E1, &h, &mesh, &tgrid(200), &FlowConfig::default()).unwrap();
        for i in 0..64 {
            let e0 = h.eval(0.0, &mesh.image(i).coords);
            let e1 = h.eval(1.0, &lift.mesh(200).image(i).coords);
            assert!((e0 - e1).abs() <= 1e-8, "drift {}", (e0 - e1).abs());
        }
    }

    #[test]
    fn midpoint_converges_more_slowly_than_rk4() {
        let h = HamiltonianSpec::new("r2/2", |_, p: &[f64]| 0.5 * dot(p, p));
        let mesh = unit_circle(64);
        let err = |stepper| {
            let cfg = FlowConfig { stepper, ..FlowConfig::default() };
            let lift = integrate_path(E1, &h, &mesh, &[0.0, 1.0], &cfg).unwrap();
            let p = &mesh.image(3).coords;
            let (c, s) = (1.0f64.cos(), 1.0f64.sin());
            let exact = [c * p[0] + s * p[1], -s * p[0] + c * p[1]];
            let q = &lift.mesh(1).image(3).coords;
            ((q[0] - exact[0]).powi(2) + (q[1] - exact[1]).powi(2)).sqrt()
        };
        let (e_mid, e_rk4) = (err(Stepper::Midpoint), err(Stepper::Rk4));
        assert!(e_rk4 < 1e-9 && e_mid < 1e-4 && e_rk4 < e_mid);
    }

    #[test]
    fn exact_rotation_examples() {
        let s2 = 1.0 / 2f64.sqrt();
        let p = Point { coords: vec![s2, 0.0, s2, 0.0] };
        assert_eq!(exact_flow_projective_rotation(1, 1, 1.0, 0.0, &p).unwrap(), p);
        let q = exact_flow_projective_rotation(1, 1, 1.0, 0.5, &p).unwrap();
        assert_abs_diff_eq!(q.coords[2], 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(q.coords[3], s2, epsilon = 1e-16);
        let r = exact_flow_projective_rotation(1, 1, 1.0, 1.0, &p).unwrap();
        assert_abs_diff_eq!(r.coords[2], -s2, epsilon = 1e-15);
        assert_abs_diff_eq!(norm(&r.coords), 1.0, epsilon = 1e-15);
        assert!(exact_flow_projective_rotation(1, 2, 1.0, 1.0, &p).is_err());
    }

    #[test]
    fn config_ranges() {
        assert!(FlowConfig { steps: 49, ..FlowConfig::default() }.validate().is_err());
        assert!(FlowConfig { fd_step: 1e-2, ..FlowConfig::default() }.validate().is_err());
        assert!(FlowConfig::default().validate().is_ok());
    }
}
