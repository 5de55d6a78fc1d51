//! Extrema-preserving extension of a function on a Lagrangian mesh to the
//! ambient space, through a tube of radius `ε` and a bump profile.
//!
//! For ambient `p` with nearest node `x` (within `ε`) and `v` the normal part
//! of `p − x`, the extension is `α(|v|²) · h̃(x) · (1 − |v|²)`. Since
//! `α ≤ 1` and `1 − |v|² < 1` off the mesh, a normalized `h̃` (positive max,
//! negative min) keeps its extrema exactly on the mesh.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rstar::primitives::GeomWithData;
use rstar::RTree;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::HamiltonianSpec;
use crate::geom::{dot, ManifoldKind};
use crate::lagr::{AssociatedFunction, LagrangianMesh, PathLift};
use crate::scalar::Scalar;

/// A slice shifted so that its max is positive and its min negative.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalized<S> {
    pub values: Vec<S>,
    pub shift: S,
    pub constant: bool,
}

/// Shift by `−(max + min)/2`; a constant slice becomes identically zero.
pub fn normalize_for_extension<S: Scalar>(slice: &[S]) -> Normalized<S> {
    let (lo, hi) = slice
        .iter()
        .fold((S::infinity(), S::neg_infinity()), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if slice.is_empty() || hi <= lo {
        let shift = if slice.is_empty() { S::zero() } else { -lo };
        return Normalized {
            values: vec![S::zero(); slice.len()],
            shift,
            constant: true,
        };
    }
    let shift = -(hi + lo) * S::lit(0.5);
    Normalized {
        values: slice.iter().map(|v| *v + shift).collect(),
        shift,
        constant: false,
    }
}

/// `α(τ)` of the squared normal norm `τ`: 1 for `τ ≤ ε²/2`, 0 for `τ ≥ ε²`,
/// a quintic smoothstep in between (C² joins).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub eps: f64,
}

impl BumpProfile {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidConfig(format!("tube radius {eps} outside (0, 1]")));
        }
        Ok(Self { eps })
    }

    pub fn plateau<S: Scalar>(&self) -> S {
        S::lit(0.5 * self.eps * self.eps)
    }

    pub fn support<S: Scalar>(&self) -> S {
        S::lit(self.eps * self.eps)
    }

    pub fn alpha<S: Scalar>(&self, tau: S) -> S {
        let (a, b) = (self.plateau::<S>(), self.support::<S>());
        if tau <= a {
            return S::one();
        }
        if tau >= b {
            return S::zero();
        }
        let x = (tau - a) / (b - a);
        let step = x * x * x * (S::lit(10.0) + x * (S::lit(-15.0) + S::lit(6.0) * x));
        S::one() - step
    }
}

const MAX_INDEX_DIM: usize = 4;

type Node<const D: usize> = GeomWithData<[f64; D], u32>;

/// Nearest-node search over node images. Torus queries near the unit-cell
/// boundary also try the shifted copies of the query point.
#[derive(Clone, Debug)]
enum NodeIndex {
    D2(RTree<Node<2>>),
    D4(RTree<Node<4>>),
}

fn to_array<S: Scalar, const D: usize>(p: &[S]) -> [f64; D] {
    std::array::from_fn(|i| p[i].as_f64())
}

impl NodeIndex {
    fn new<S: Scalar>(kind: ManifoldKind, points: &[&[S]]) -> Result<Self> {
        match kind.coord_len() {
            2 => Ok(Self::D2(RTree::bulk_load(
                points.iter().enumerate().map(|(i, p)| Node::new(to_array(p), i as u32)).collect(),
            ))),
            4 => Ok(Self::D4(RTree::bulk_load(
                points.iter().enumerate().map(|(i, p)| Node::new(to_array(p), i as u32)).collect(),
            ))),
            d if d > MAX_INDEX_DIM => Err(Error::UnsupportedBackend("tube index supports at most four real coordinates")),
            _ => Err(Error::UnsupportedBackend("tube index needs two or four real coordinates")),
        }
    }

    /// Nearest node to `q`; among equidistant nodes the smallest index.
    fn nearest_raw(&self, q: &[f64; MAX_INDEX_DIM]) -> Option<usize> {
        fn first<const D: usize>(t: &RTree<Node<D>>, q: &[f64; D]) -> Option<usize> {
            let mut it = t.nearest_neighbor_iter_with_distance_2(q);
            let (n, d0) = it.next()?;
            let mut best = n.data;
            for (n, d) in it {
                if d > d0 {
                    break;
                }
                best = best.min(n.data);
            }
            Some(best as usize)
        }
        match self {
            Self::D2(t) => first(t, &[q[0], q[1]]),
            Self::D4(t) => first(t, q),
        }
    }

    /// Nearest node by `dist` if it is closer than `limit`.
    fn nearest<S: Scalar>(&self, kind: ManifoldKind, p: &[S], limit: S, dist: impl Fn(usize) -> S) -> Option<(usize, S)> {
        let mut base = [0.0; MAX_INDEX_DIM];
        base.iter_mut().zip(p).for_each(|(b, x)| *b = x.as_f64());
        // per axis: shift applied when that axis' bit is set, or 0 for none
        let mut shifts = [0.0; MAX_INDEX_DIM];
        if matches!(kind, ManifoldKind::Torus { .. }) {
            let l = limit.as_f64();
            for (s, &x) in shifts.iter_mut().zip(&base).take(p.len()) {
                if x < l {
                    *s = 1.0;
                } else if x > 1.0 - l {
                    *s = -1.0;
                }
            }
        }
        let mut best: Option<(usize, S)> = None;
        for mask in 0..1usize << p.len() {
            let mut q = base;
            let mut used = true;
            for axis in 0..p.len() {
                if mask & (1 << axis) != 0 {
                    used &= shifts[axis] != 0.0;
                    q[axis] += shifts[axis];
                }
            }
            if !used {
                continue;
            }
            let Some(i) = self.nearest_raw(&q) else { continue };
            let d = dist(i);
            if best.map_or(true, |(j, e)| d < e || (d == e && i < j)) {
                best = Some((i, d));
            }
        }
        best.filter(|(_, d)| *d < limit)
    }
}

/// The extension of one normalized slice `h̃` from one mesh.
#[derive(Clone, Debug)]
pub struct AmbientExtension<S> {
    mesh: LagrangianMesh<S>,
    values: Vec<S>,
    bump: BumpProfile,
    index: NodeIndex,
    /// Orthonormal tangent basis per node.
    tangents: Vec<Vec<Vec<S>>>,
}

/// Build the extension of `h_tilde` off `mesh`. The tube radius must not
/// exceed the mesh separation, or the tube would overlap itself.
pub fn tubular_extension<S: Scalar>(mesh: &LagrangianMesh<S>, h_tilde: &[S], bump: BumpProfile) -> Result<AmbientExtension<S>> {
    let separation = mesh.mesh_separation()?;
    tubular_extension_with_separation(mesh, h_tilde, bump, separation)
}

/// As [`tubular_extension`] with a separation computed elsewhere.
pub fn tubular_extension_with_separation<S: Scalar>(
    mesh: &LagrangianMesh<S>,
    h_tilde: &[S],
    bump: BumpProfile,
    separation: S,
) -> Result<AmbientExtension<S>> {
    let kind = mesh.kind();
    if kind.is_projective() {
        return Err(Error::UnsupportedBackend("tube extension needs a flat backend"));
    }
    if h_tilde.len() != mesh.len() {
        return Err(Error::DimensionMismatch {
            expected: mesh.len(),
            got: h_tilde.len(),
        });
    }
    if S::lit(bump.eps) > separation {
        return Err(Error::SeparationExceeded {
            eps: bump.eps,
            separation: separation.as_f64(),
        });
    }
    let points: Vec<&[S]> = mesh.images().iter().map(|p| p.coords.as_slice()).collect();
    let index = NodeIndex::new(kind, &points)?;
    let tangents = (0..mesh.len())
        .map(|i| {
            let mut basis: Vec<Vec<S>> = Vec::new();
            for k in 0..mesh.grid().frames(i).len() {
                let mut e = mesh.frame_vector(i, k);
                for b in &basis {
                    let c = dot(&e, b);
                    e.iter_mut().zip(b).for_each(|(x, y)| *x = *x - c * *y);
                }
                let n = dot(&e, &e).sqrt();
                if n > S::zero() {
                    basis.push(e.into_iter().map(|x| x / n).collect());
                }
            }
            basis
        })
        .collect();
    Ok(AmbientExtension {
        mesh: mesh.clone(),
        values: h_tilde.to_vec(),
        bump,
        index,
        tangents,
    })
}

impl<S: Scalar> AmbientExtension<S> {
    pub fn bump(&self) -> BumpProfile {
        self.bump
    }

    pub fn mesh(&self) -> &LagrangianMesh<S> {
        &self.mesh
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    /// Nearest node strictly within `ε` (ties: lowest index).
    pub fn nearest_within(&self, p: &[S]) -> Option<(usize, S)> {
        let kind = self.mesh.kind();
        self.index
            .nearest(kind, p, S::lit(self.bump.eps), |i| kind.distance_unchecked(p, &self.mesh.image(i).coords))
    }

    pub fn eval(&self, p: &[S]) -> S {
        let Some((i, _)) = self.nearest_within(p) else {
            return S::zero();
        };
        let kind = self.mesh.kind();
        let mut v = kind.chord(&self.mesh.image(i).coords, p);
        for e in &self.tangents[i] {
            let c = dot(&v, e);
            v.iter_mut().zip(e).for_each(|(x, y)| *x = *x - c * *y);
        }
        let tau = dot(&v, &v);
        self.bump.alpha(tau) * self.values[i] * (S::one() - tau)
    }
}

/// Extensions of every slice of a path at a set of break times, affine in
/// `t` in between. The same `ε` serves every break.
#[derive(Clone, Debug)]
pub struct PathExtension<S> {
    breaks: Vec<S>,
    slices: Vec<AmbientExtension<S>>,
    shifts: Vec<S>,
    eps: f64,
}

impl<S: Scalar> PathExtension<S> {
    /// Use every `stride`-th time sample (and the last) as a break. `ε` is
    /// `0.9 ·` the least separation over the breaks, capped at `0.9`.
    pub fn new(lift: &PathLift<S>, h: &AssociatedFunction<S>, stride: usize) -> Result<Self> {
        let last = lift.time_len() - 1;
        let mut idx: Vec<usize> = (0..=last).step_by(stride.max(1)).collect();
        if *idx.last().unwrap() != last {
            idx.push(last);
        }
        let seps = idx
            .par_iter()
            .map(|&ti| lift.mesh(ti).mesh_separation())
            .collect::<Result<Vec<S>>>()?;
        let sep = seps.iter().copied().fold(S::infinity(), S::min);
        let eps = (0.9 * sep.as_f64()).min(0.9);
        let bump = BumpProfile::new(eps)?;
        let built = idx
            .par_iter()
            .zip(&seps)
            .map(|(&ti, &s)| {
                let n = normalize_for_extension(h.slice(ti));
                let ext = tubular_extension_with_separation(lift.mesh(ti), &n.values, bump, s)?;
                Ok((ext, n.shift))
            })
            .collect::<Result<Vec<_>>>()?;
        let (slices, shifts) = built.into_iter().unzip();
        Ok(Self {
            breaks: idx.iter().map(|&i| lift.tgrid()[i]).collect(),
            slices,
            shifts,
            eps,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn breaks(&self) -> &[S] {
        &self.breaks
    }

    pub fn slices(&self) -> &[AmbientExtension<S>] {
        &self.slices
    }

    /// Normalization shift applied at each break.
    pub fn shifts(&self) -> &[S] {
        &self.shifts
    }

    pub fn eval(&self, t: S, p: &[S]) -> S {
        let k = self.breaks.partition_point(|b| *b <= t);
        if k == 0 {
            return self.slices[0].eval(p);
        }
        if k >= self.breaks.len() {
            return self.slices[self.breaks.len() - 1].eval(p);
        }
        let (t0, t1) = (self.breaks[k - 1], self.breaks[k]);
        let w = (t - t0) / (t1 - t0);
        if w == S::zero() {
            return self.slices[k - 1].eval(p);
        }
        let a = self.slices[k - 1].eval(p);
        let b = self.slices[k].eval(p);
        a + w * (b - a)
    }

    pub fn into_hamiltonian(self) -> HamiltonianSpec<S> {
        let breaks = self.breaks.clone();
        let ext = Arc::new(self);
        HamiltonianSpec::new("tube extension", move |t, p| ext.eval(t, p)).with_time_breaks(breaks)
    }
}

/// `count` random points within `1.5 ε` of random nodes, plus every node.
pub fn sample_cloud<S: Scalar>(mesh: &LagrangianMesh<S>, eps: f64, count: usize, seed: u64) -> Vec<Vec<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = mesh.kind();
    let d = kind.coord_len();
    let mut out: Vec<Vec<S>> = mesh.images().iter().map(|p| p.coords.clone()).collect();
    for _ in 0..count {
        let base = &mesh.image(rng.gen_range(0..mesh.len())).coords;
        let mut dir: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        let r = 1.5 * eps * rng.gen::<f64>().powf(1.0 / d as f64);
        dir.iter_mut().for_each(|x| *x *= r / n);
        let p = base.iter().zip(&dir).map(|(b, x)| *b + S::lit(*x)).collect();
        out.push(kind.normalize_coords(p));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionCheck {
    /// `h̃` is constant, so the extension vanishes identically.
    pub degenerate: bool,
    pub mesh_max: f64,
    pub mesh_min: f64,
    pub cloud_max: f64,
    pub cloud_min: f64,
    /// `max |ext(ι(node)) − h̃(node)|`.
    pub restriction_error: f64,
    /// Points at distance `≥ ε` from every node where the extension is nonzero.
    pub support_violations: usize,
    /// Largest distance from a point of the ambient argmax (argmin) cluster
    /// to a mesh node realizing the max (min).
    pub argmax_spread: f64,
    pub argmin_spread: f64,
    /// How far below the max (above the min) every point farther than
    /// `tol_geo` from the extremal nodes stays.
    pub far_gap_max: f64,
    pub far_gap_min: f64,
    pub tol_geo: f64,
}

impl ExtensionCheck {
    pub fn passed(&self) -> bool {
        let exact = (self.cloud_max - self.mesh_max).abs() <= 1e-12 && (self.cloud_min - self.mesh_min).abs() <= 1e-12;
        self.restriction_error == 0.0
            && self.support_violations == 0
            && exact
            && (self.degenerate
                || (self.argmax_spread <= self.tol_geo
                    && self.argmin_spread <= self.tol_geo
                    && self.far_gap_max > 0.0
                    && self.far_gap_min > 0.0))
    }
}

/// Check over `cloud` that the extension's extrema sit on the mesh extrema.
pub fn extension_extrema_check<S: Scalar>(ext: &AmbientExtension<S>, cloud: &[Vec<S>], tol_geo: S) -> ExtensionCheck {
    let mesh = ext.mesh();
    let kind = mesh.kind();
    let h = ext.values();
    let (mesh_min, mesh_max) = h
        .iter()
        .fold((S::infinity(), S::neg_infinity()), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let restriction_error = mesh
        .images()
        .iter()
        .zip(h)
        .map(|(p, v)| (ext.eval(&p.coords) - *v).abs())
        .fold(S::zero(), S::max);
    let eps = S::lit(ext.bump().eps);
    let evaluated: Vec<(S, S)> = cloud
        .par_iter()
        .map(|p| (ext.eval(p), mesh.nearest_node(p).1))
        .collect();
    let support_violations = evaluated.iter().filter(|(v, d)| *d >= eps && *v != S::zero()).count();
    let (cloud_min, cloud_max) = evaluated
        .iter()
        .fold((S::infinity(), S::neg_infinity()), |(lo, hi), (v, _)| (lo.min(*v), hi.max(*v)));
    let band = S::roundoff() * S::one().max(mesh_max.abs()).max(mesh_min.abs());
    let side = |top: bool| -> (S, S) {
        let target = if top { mesh_max } else { mesh_min };
        let near = |v: S| (v - target).abs() <= band;
        let nodes: Vec<&[S]> = (0..mesh.len())
            .filter(|&i| near(h[i]))
            .map(|i| mesh.image(i).coords.as_slice())
            .collect();
        let dist = |p: &[S]| {
            nodes
                .iter()
                .map(|q| kind.distance_unchecked(p, q))
                .fold(S::infinity(), S::min)
        };
        let mut spread = S::zero();
        let mut gap = S::infinity();
        for (p, (v, _)) in cloud.iter().zip(&evaluated) {
            let d = dist(p);
            if near(*v) {
                spread = spread.max(d);
            }
            if d > tol_geo {
                let margin = if top { target - *v } else { *v - target };
                gap = gap.min(margin);
            }
        }
        (spread, gap)
    };
    let degenerate = mesh_max <= mesh_min;
    let ((argmax_spread, far_gap_max), (argmin_spread, far_gap_min)) = if degenerate {
        ((S::zero(), S::zero()), (S::zero(), S::zero()))
    } else {
        (side(true), side(false))
    };
    ExtensionCheck {
        degenerate,
        mesh_max: mesh_max.as_f64(),
        mesh_min: mesh_min.as_f64(),
        cloud_max: cloud_max.as_f64(),
        cloud_min: cloud_min.as_f64(),
        restriction_error: restriction_error.as_f64(),
        support_violations,
        argmax_spread: argmax_spread.as_f64(),
        argmin_spread: argmin_spread.as_f64(),
        far_gap_max: far_gap_max.as_f64(),
        far_gap_min: far_gap_min.as_f64(),
        tol_geo: tol_geo.as_f64(),
    }
}
