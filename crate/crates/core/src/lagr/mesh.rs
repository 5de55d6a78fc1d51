use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::ModelGrid;
use crate::error::{Error, Result};
use crate::geom::{norm, ManifoldKind, Point};
use crate::scalar::Scalar;

/// Default Lagrangian tolerance, relative to the product of frame norms.
pub const DEFAULT_TOL_LAG: f64 = 1e-4;

/// A sampled embedding `ι: L → M`.
#[derive(Clone, Debug)]
pub struct LagrangianMesh<S> {
    kind: ManifoldKind,
    grid: Arc<ModelGrid>,
    images: Vec<Point<S>>,
}

/// A time-indexed family of meshes sharing node labels: a lift `{ι_t}`.
#[derive(Clone, Debug)]
pub struct PathLift<S> {
    kind: ManifoldKind,
    grid: Arc<ModelGrid>,
    tgrid: Vec<S>,
    meshes: Vec<LagrangianMesh<S>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Raw,
    MeanZero,
}

/// Samples of an associated function `h(t_i, node)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssociatedFunction<S> {
    pub values: Vec<Vec<S>>,
    pub normalization: Normalization,
}

impl<S: Scalar> AssociatedFunction<S> {
    pub fn raw(values: Vec<Vec<S>>) -> Self {
        Self {
            values,
            normalization: Normalization::Raw,
        }
    }

    pub fn slice(&self, ti: usize) -> &[S] {
        &self.values[ti]
    }

    pub fn time_len(&self) -> usize {
        self.values.len()
    }

    /// Subtract the per-time node mean.
    pub fn mean_zero(&self) -> Self {
        let values = self
            .values
            .iter()
            .map(|row| {
                let mean = row.iter().copied().sum::<S>() / S::from_usize_lossy(row.len().max(1));
                row.iter().map(|v| *v - mean).collect()
            })
            .collect();
        Self {
            values,
            normalization: Normalization::MeanZero,
        }
    }
}

impl<S: Scalar> LagrangianMesh<S> {
    /// Validated construction: dimensions, Lagrangian condition at [`DEFAULT_TOL_LAG`]
    /// and embedding sanity (distinct images for non-adjacent nodes).
    pub fn new(kind: ManifoldKind, grid: Arc<ModelGrid>, images: Vec<Point<S>>) -> Result<Self> {
        let mesh = Self::from_parts(kind, grid, images)?;
        let tol = S::lit(DEFAULT_TOL_LAG);
        let defect = mesh.lagrangian_defect();
        if defect > tol {
            return Err(Error::DegenerateMesh(format!(
                "Lagrangian defect {defect} exceeds {tol}"
            )));
        }
        mesh.check_embedding()?;
        Ok(mesh)
    }

    /// Construction with dimension checks only; used for flow output, where
    /// the invariants are inherited from the initial mesh.
    pub fn from_parts(kind: ManifoldKind, grid: Arc<ModelGrid>, images: Vec<Point<S>>) -> Result<Self> {
        if images.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: images.len(),
            });
        }
        if let Some(bad) = images.iter().find(|p| p.dim() != kind.coord_len()) {
            return Err(Error::DimensionMismatch {
                expected: kind.coord_len(),
                got: bad.dim(),
            });
        }
        Ok(Self { kind, grid, images })
    }

    /// Embed a grid through a map of model coordinates.
    pub fn embed(
        kind: ManifoldKind,
        grid: Arc<ModelGrid>,
        map: impl Fn(&[f64]) -> Vec<S>,
    ) -> Result<Self> {
        let images = (0..grid.len())
            .map(|i| kind.point(map(grid.model_coords(i))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(kind, grid, images)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn grid(&self) -> &Arc<ModelGrid> {
        &self.grid
    }

    pub fn images(&self) -> &[Point<S>] {
        &self.images
    }

    pub fn image(&self, i: usize) -> &Point<S> {
        &self.images[i]
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Frame vector `(chord(x→fwd) − chord(x→bwd)) / 2` at node `i` for stencil `k`.
    pub fn frame_vector(&self, i: usize, k: usize) -> Vec<S> {
        let (f, b) = self.grid.frames(i)[k];
        let x = &self.images[i].coords;
        let cf = self.kind.chord(x, &self.images[f].coords);
        let cb = self.kind.chord(x, &self.images[b].coords);
        let half = S::lit(0.5);
        cf.iter().zip(&cb).map(|(a, c)| (*a - *c) * half).collect()
    }

    /// Ambient length of every grid edge (same order as `grid.edges()`).
    pub fn edge_lengths(&self) -> Vec<S> {
        self.grid
            .edges()
            .iter()
            .map(|&(a, b)| {
                self.kind
                    .distance_unchecked(&self.images[a].coords, &self.images[b].coords)
            })
            .collect()
    }

    /// Largest edge length.
    pub fn spacing(&self) -> S {
        self.edge_lengths().into_iter().fold(S::zero(), S::max)
    }

    /// `max |ω(e_k, e_l)| / (|e_k| |e_l|)` over nodes and frame pairs.
    pub fn lagrangian_defect(&self) -> S {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let frames: Vec<Vec<S>> = (0..self.grid.frames(i).len())
                    .map(|k| self.frame_vector(i, k))
                    .collect();
                let mut worst = S::zero();
                for a in 0..frames.len() {
                    for b in a + 1..frames.len() {
                        let scale = norm(&frames[a]) * norm(&frames[b]);
                        if scale > S::zero() {
                            let w = self.kind.omega_unchecked(&frames[a], &frames[b]).abs() / scale;
                            worst = worst.max(w);
                        }
                    }
                }
                worst
            })
            .reduce(S::zero, S::max)
    }

    fn check_embedding(&self) -> Result<()> {
        let n = self.len();
        let bad = (0..n).into_par_iter().find_first(|&a| {
            (a + 1..n).any(|b| {
                !self.grid.are_adjacent(a, b)
                    && self
                        .kind
                        .distance_unchecked(&self.images[a].coords, &self.images[b].coords)
                        <= S::zero()
            })
        });
        match bad {
            Some(a) => Err(Error::DegenerateMesh(format!(
                "node {a} coincides with a non-adjacent node"
            ))),
            None => Ok(()),
        }
    }

    /// Distance from `p` to the nearest node image, with that node (ties: lowest index).
    pub fn nearest_node(&self, p: &[S]) -> (usize, S) {
        let mut best = (0, S::infinity());
        for (i, img) in self.images.iter().enumerate() {
            let d = self.kind.distance_unchecked(p, &img.coords);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Tube-radius estimate: the smaller of the least discrete curvature radius
    /// and half the minimum distance between non-adjacent parts of the mesh.
    ///
    /// A pair of nodes is non-adjacent when their along-mesh distance exceeds
    /// `π/2` times their ambient distance (no circular arc does that) or they
    /// lie in different components. On the torus a node's own lattice
    /// translate at distance 1 also counts, capping the result at 1/2.
    pub fn mesh_separation(&self) -> Result<S> {
        let n = self.len();
        if n < 3 {
            return Err(Error::DegenerateMesh("fewer than three nodes".into()));
        }
        let lengths = self.edge_lengths();
        if lengths.iter().any(|l| *l <= S::zero()) {
            return Err(Error::DegenerateMesh("zero-length edge".into()));
        }
        let mut weighted: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
        for (&(a, b), &l) in self.grid.edges().iter().zip(&lengths) {
            weighted[a].push((b, l));
            weighted[b].push((a, l));
        }
        let curvature = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..self.grid.frames(i).len())
                    .map(|k| self.stencil_radius(i, k))
                    .fold(S::infinity(), S::min)
            })
            .reduce(S::infinity, S::min);
        let ratio = S::FRAC_PI_2();
        let bottleneck = (0..n)
            .into_par_iter()
            .map(|a| {
                let intrinsic = dijkstra(&weighted, a);
                let mut best = S::infinity();
                for b in 0..n {
                    if b == a {
                        continue;
                    }
                    let d = self
                        .kind
                        .distance_unchecked(&self.images[a].coords, &self.images[b].coords);
                    if intrinsic[b] > ratio * d {
                        best = best.min(d);
                    }
                }
                best
            })
            .reduce(S::infinity, S::min);
        if bottleneck <= S::zero() {
            return Err(Error::DegenerateMesh("mesh touches itself".into()));
        }
        let mut sep = curvature.min(bottleneck * S::lit(0.5));
        if matches!(self.kind, ManifoldKind::Torus { .. }) {
            sep = sep.min(S::lit(0.5));
        }
        if !sep.is_finite() {
            return Err(Error::DegenerateMesh("separation is unbounded".into()));
        }
        Ok(sep)
    }

    /// Distance from the circumcenter of stencil `(bwd, i, fwd)` to the chord midpoints.
    fn stencil_radius(&self, i: usize, k: usize) -> S {
        let (f, b) = self.grid.frames(i)[k];
        let x = &self.images[i].coords;
        let u = self.kind.chord(x, &self.images[f].coords);
        let v = self.kind.chord(x, &self.images[b].coords);
        // circumcenter c = α u + β v of triangle (0, u, v): c·u = |u|²/2, c·v = |v|²/2
        let uu = crate::geom::dot(&u, &u);
        let vv = crate::geom::dot(&v, &v);
        let uv = crate::geom::dot(&u, &v);
        let det = uu * vv - uv * uv;
        if det <= S::roundoff() * uu * vv {
            return S::infinity();
        }
        let half = S::lit(0.5);
        let alpha = half * vv * (uu - uv) / det;
        let beta = half * uu * (vv - uv) / det;
        let c: Vec<S> = u.iter().zip(&v).map(|(a, b)| alpha * *a + beta * *b).collect();
        let mid = |w: &[S]| -> S {
            c.iter()
                .zip(w)
                .map(|(ci, wi)| {
                    let d = *ci - *wi * half;
                    d * d
                })
                .sum::<S>()
                .sqrt()
        };
        mid(&u).min(mid(&v))
    }
}

#[derive(PartialEq)]
struct Entry<S>(S, usize);

impl<S: Scalar> Eq for Entry<S> {}

impl<S: Scalar> PartialOrd for Entry<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: Scalar> Ord for Entry<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .partial_cmp(&self.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.1.cmp(&self.1))
    }
}

fn dijkstra<S: Scalar>(adj: &[Vec<(usize, S)>], src: usize) -> Vec<S> {
    let mut dist = vec![S::infinity(); adj.len()];
    let mut heap = BinaryHeap::new();
    dist[src] = S::zero();
    heap.push(Entry(S::zero(), src));
    while let Some(Entry(d, a)) = heap.pop() {
        if d > dist[a] {
            continue;
        }
        for &(b, w) in &adj[a] {
            let nd = d + w;
            if nd < dist[b] {
                dist[b] = nd;
                heap.push(Entry(nd, b));
            }
        }
    }
    dist
}

impl<S: Scalar> PathLift<S> {
    pub fn new(tgrid: Vec<S>, meshes: Vec<LagrangianMesh<S>>) -> Result<Self> {
        let first = meshes.first().ok_or(Error::EmptyInput)?;
        if tgrid.len() != meshes.len() {
            return Err(Error::DimensionMismatch {
                expected: meshes.len(),
                got: tgrid.len(),
            });
        }
        if tgrid[0] != S::zero() || *tgrid.last().unwrap() != S::one() && tgrid.len() > 1 {
            return Err(Error::InvalidConfig("time grid must run from 0 to 1".into()));
        }
        if tgrid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("time grid must be strictly increasing".into()));
        }
        let kind = first.kind;
        let grid = first.grid.clone();
        if meshes
            .iter()
            .any(|m| m.kind != kind || !(Arc::ptr_eq(&m.grid, &grid) || *m.grid == *grid))
        {
            return Err(Error::InvalidConfig("meshes must share one grid and backend".into()));
        }
        Ok(Self {
            kind,
            grid,
            tgrid,
            meshes,
        })
    }

    /// Lift that stays at `mesh` for all times.
    pub fn constant(mesh: LagrangianMesh<S>, tgrid: Vec<S>) -> Result<Self> {
        let meshes = vec![mesh; tgrid.len()];
        Self::new(tgrid, meshes)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn grid(&self) -> &Arc<ModelGrid> {
        &self.grid
    }

    pub fn tgrid(&self) -> &[S] {
        &self.tgrid
    }

    pub fn meshes(&self) -> &[LagrangianMesh<S>] {
        &self.meshes
    }

    pub fn mesh(&self, ti: usize) -> &LagrangianMesh<S> {
        &self.meshes[ti]
    }

    pub fn time_len(&self) -> usize {
        self.tgrid.len()
    }

    pub fn node_len(&self) -> usize {
        self.grid.len()
    }

    /// Largest edge length over all times.
    pub fn max_spacing(&self) -> S {
        self.meshes
            .par_iter()
            .map(|m| m.spacing())
            .reduce(S::zero, S::max)
    }

    /// Largest time step.
    pub fn max_dt(&self) -> S {
        self.tgrid
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(S::zero(), S::max)
    }

    /// Same path, nodes re-indexed: storage index `k` holds node `perm[k]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let grid = Arc::new(self.grid.relabeled(perm)?);
        let meshes = self
            .meshes
            .iter()
            .map(|m| {
                LagrangianMesh::from_parts(
                    self.kind,
                    grid.clone(),
                    perm.iter().map(|&o| m.images[o].clone()).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.tgrid.clone(), meshes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagr::grid::ModelTag;

    fn circle_mesh(m: usize, r: f64, cx: f64, cy: f64) -> LagrangianMesh<f64> {
        let grid = Arc::new(ModelGrid::circle(m).unwrap());
        LagrangianMesh::embed(ManifoldKind::Euclidean { n: 1 }, grid, |c| {
            vec![cx + r * c[0], cy + r * c[1]]
        })
        .unwrap()
    }

    #[test]
    fn unit_circle_separation_near_reach() {
        let sep = circle_mesh(512, 1.0, 0.0, 0.0).mesh_separation().unwrap();
        assert!((0.5..=1.0).contains(&sep), "sep = {sep}");
        assert!(sep > 0.9999);
    }

    #[test]
    fn two_circles_separation_bounded_by_gap() {
        let grid = Arc::new(
            ModelGrid::disjoint_union(vec![
                ModelTag::Circle { m: 128, phase: 0.0 },
                ModelTag::Circle { m: 128, phase: 0.0 },
            ])
            .unwrap(),
        );
        let gap = 0.4;
        let images = (0..grid.len())
            .map(|i| {
                let c = grid.model_coords(i);
                let shift = if i < 128 { 0.0 } else { 2.0 + gap };
                Point { coords: vec![c[0] + shift, c[1]] }
            })
            .collect();
        let mesh = LagrangianMesh::new(ManifoldKind::Euclidean { n: 1 }, grid, images).unwrap();
        let sep = mesh.mesh_separation().unwrap();
        assert!(sep <= gap / 2.0 + 1e-12, "sep = {sep}");
        assert!(sep > 0.1);
    }

    #[test]
    fn collapsed_mesh_is_degenerate() {
        let grid = Arc::new(ModelGrid::circle(64).unwrap());
        let kind = ManifoldKind::Euclidean { n: 1 };
        assert!(matches!(
            LagrangianMesh::embed(kind, grid.clone(), |_| vec![0.0, 0.0]),
            Err(Error::DegenerateMesh(_))
        ));
        let collapsed =
            LagrangianMesh::from_parts(kind, grid, vec![kind.point(vec![0.0, 0.0]).unwrap(); 64]).unwrap();
        assert!(matches!(collapsed.mesh_separation(), Err(Error::DegenerateMesh(_))));
    }

    #[test]
    fn torus_line_separation_capped() {
        let grid = Arc::new(ModelGrid::circle(128).unwrap());
        let kind = ManifoldKind::Torus { n: 1 };
        let images = (0..128)
            .map(|i| kind.point(vec![i as f64 / 128.0, 0.0]).unwrap())
            .collect();
        let mesh = LagrangianMesh::new(kind, grid, images).unwrap();
        assert_eq!(mesh.mesh_separation().unwrap(), 0.5);
    }

    #[test]
    fn non_lagrangian_rejected() {
        // real points of CP^2 form a Lagrangian RP^2; twisting one coordinate by a
        // position-dependent phase does not
        let grid = Arc::new(ModelGrid::projective_plane(16, 64).unwrap());
        let kind = ManifoldKind::Projective { n: 2 };
        let ok = LagrangianMesh::embed(kind, grid.clone(), |c| {
            vec![c[0], 0.0, c[2], 0.0, c[1], 0.0]
        });
        assert!(ok.is_ok());
        let bad = LagrangianMesh::<f64>::embed(kind, grid, |c| {
            let ph = 3.0 * c[0];
            vec![c[0], 0.0, c[2], 0.0, c[1] * ph.cos(), c[1] * ph.sin()]
        });
        assert!(bad.is_err());
    }

    #[test]
    fn path_lift_time_grid_validation() {
        let m = circle_mesh(64, 1.0, 0.0, 0.0);
        assert!(PathLift::constant(m.clone(), vec![0.0, 0.5, 1.0]).is_ok());
        assert!(PathLift::constant(m.clone(), vec![0.0, 0.5, 0.9]).is_err());
        assert!(PathLift::constant(m.clone(), vec![0.0, 0.6, 0.5, 1.0]).is_err());
        assert!(PathLift::new(vec![], Vec::<LagrangianMesh<f64>>::new()).is_err());
    }
}
