//! Sampled model manifolds `L`: circles, `RP^1`, `S^2`, `RP^2` and disjoint unions.
//!
//! A grid is pure topology plus model coordinates; embeddings into a
//! symplectic manifold live in [`super::LagrangianMesh`].

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of samples along any full great circle of the model.
pub const MIN_SAMPLES_PER_CIRCLE: usize = 64;

/// Which model manifold is sampled, and how finely.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelTag {
    /// `S^1` with `m` nodes at angles `2π(i + phase)/m`.
    Circle { m: usize, phase: f64 },
    /// `RP^1` sampled as `S^1` representatives at angles `π(i + phase)/m`;
    /// node `m − 1` closes back onto node 0 through the antipodal identification.
    ProjectiveLine { m: usize, phase: f64 },
    /// `S^2` lat-long grid with both poles; `m_theta` rows from pole to pole.
    Sphere2 { m_theta: usize, m_phi: usize },
    /// `RP^2` as the closed upper hemisphere of `S^2` with the pole, `m_theta`
    /// rows down to the equator and half an equator row (`m_phi / 2` nodes).
    ProjectivePlane { m_theta: usize, m_phi: usize },
    /// Disjoint union, nodes concatenated in order.
    Union { parts: Vec<ModelTag> },
}

/// Topology and model coordinates of a sampled closed manifold.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrid {
    tag: ModelTag,
    /// Model node id held at each storage index.
    labels: Vec<usize>,
    /// Coordinates on `S^1 ⊂ R^2` or `S^2 ⊂ R^3` per storage index.
    coords: Vec<Vec<f64>>,
    edges: Vec<(usize, usize)>,
    /// Central-difference stencils `(forward, backward)` per node.
    frames: Vec<Vec<(usize, usize)>>,
    /// Generator cycles of `H_1(L; R)` as closed index sequences.
    loops: Vec<Vec<usize>>,
    adjacency: Vec<Vec<usize>>,
}

fn check_circle(samples: usize, what: &str) -> Result<()> {
    if samples < MIN_SAMPLES_PER_CIRCLE {
        return Err(Error::InvalidConfig(format!(
            "{what}: {samples} samples per circle, need at least {MIN_SAMPLES_PER_CIRCLE}"
        )));
    }
    Ok(())
}

struct Builder {
    coords: Vec<Vec<f64>>,
    edges: Vec<(usize, usize)>,
    frames: Vec<Vec<(usize, usize)>>,
    loops: Vec<Vec<usize>>,
}

impl Builder {
    fn new(count: usize) -> Self {
        Self {
            coords: vec![Vec::new(); count],
            edges: Vec::new(),
            frames: vec![Vec::new(); count],
            loops: Vec::new(),
        }
    }
}

fn build_cycle(m: usize, angle: impl Fn(usize) -> f64) -> Builder {
    let mut b = Builder::new(m);
    for i in 0..m {
        let th = angle(i);
        b.coords[i] = vec![th.cos(), th.sin()];
        b.edges.push((i, (i + 1) % m));
        b.frames[i].push(((i + 1) % m, (i + m - 1) % m));
    }
    b.loops.push((0..m).collect());
    b
}

fn sphere_coords(theta: f64, phi: f64) -> Vec<f64> {
    vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn build_sphere(m_theta: usize, m_phi: usize) -> Builder {
    let rows = m_theta - 1;
    let count = 2 + rows * m_phi;
    let south = count - 1;
    let ring = |r: usize, j: usize| 1 + (r - 1) * m_phi + (j % m_phi);
    let mut b = Builder::new(count);
    b.coords[0] = vec![0.0, 0.0, 1.0];
    b.coords[south] = vec![0.0, 0.0, -1.0];
    for r in 1..=rows {
        let th = PI * r as f64 / m_theta as f64;
        for j in 0..m_phi {
            let i = ring(r, j);
            b.coords[i] = sphere_coords(th, 2.0 * PI * j as f64 / m_phi as f64);
            b.edges.push((i, ring(r, j + 1)));
            let up = if r == 1 { 0 } else { ring(r - 1, j) };
            let down = if r == rows { south } else { ring(r + 1, j) };
            b.edges.push((i, down));
            b.frames[i].push((ring(r, j + 1), ring(r, j + m_phi - 1)));
            b.frames[i].push((down, up));
        }
    }
    for j in 0..m_phi {
        b.edges.push((0, ring(1, j)));
    }
    let q = m_phi / 4;
    b.frames[0] = vec![(ring(1, 0), ring(1, 2 * q)), (ring(1, q), ring(1, 3 * q))];
    b.frames[south] = vec![(ring(rows, 0), ring(rows, 2 * q)), (ring(rows, q), ring(rows, 3 * q))];
    b
}

fn build_projective_plane(m_theta: usize, m_phi: usize) -> Builder {
    let rows = m_theta - 1;
    let half = m_phi / 2;
    let count = 1 + rows * m_phi + half;
    let ring = |r: usize, j: usize| 1 + (r - 1) * m_phi + (j % m_phi);
    let eq = |j: usize| 1 + rows * m_phi + (j % half);
    let mut b = Builder::new(count);
    b.coords[0] = vec![0.0, 0.0, 1.0];
    for r in 1..=rows {
        let th = 0.5 * PI * r as f64 / m_theta as f64;
        for j in 0..m_phi {
            let i = ring(r, j);
            b.coords[i] = sphere_coords(th, 2.0 * PI * j as f64 / m_phi as f64);
            b.edges.push((i, ring(r, j + 1)));
            let up = if r == 1 { 0 } else { ring(r - 1, j) };
            // the last ring meets the equator at the node or at its antipode
            let down = if r == rows { eq(j) } else { ring(r + 1, j) };
            b.edges.push((i, down));
            b.frames[i].push((ring(r, j + 1), ring(r, j + m_phi - 1)));
            b.frames[i].push((down, up));
        }
    }
    for j in 0..half {
        let i = eq(j);
        b.coords[i] = sphere_coords(0.5 * PI, 2.0 * PI * j as f64 / m_phi as f64);
        b.edges.push((i, eq(j + 1)));
        b.frames[i].push((eq(j + 1), eq(j + half - 1)));
        b.frames[i].push((ring(rows, j + half), ring(rows, j)));
    }
    for j in 0..m_phi {
        b.edges.push((0, ring(1, j)));
    }
    let q = m_phi / 4;
    b.frames[0] = vec![(ring(1, 0), ring(1, 2 * q)), (ring(1, q), ring(1, 3 * q))];
    b
}

impl ModelGrid {
    pub fn circle(m: usize) -> Result<Self> {
        Self::from_tag(&ModelTag::Circle { m, phase: 0.0 })
    }

    pub fn projective_line(m: usize) -> Result<Self> {
        Self::from_tag(&ModelTag::ProjectiveLine { m, phase: 0.0 })
    }

    pub fn sphere2(m_theta: usize, m_phi: usize) -> Result<Self> {
        Self::from_tag(&ModelTag::Sphere2 { m_theta, m_phi })
    }

    pub fn projective_plane(m_theta: usize, m_phi: usize) -> Result<Self> {
        Self::from_tag(&ModelTag::ProjectivePlane { m_theta, m_phi })
    }

    pub fn disjoint_union(parts: Vec<ModelTag>) -> Result<Self> {
        Self::from_tag(&ModelTag::Union { parts })
    }

    pub fn from_tag(tag: &ModelTag) -> Result<Self> {
        let b = Self::build(tag)?;
        let n = b.coords.len();
        let mut grid = Self {
            tag: tag.clone(),
            labels: (0..n).collect(),
            coords: b.coords,
            edges: b.edges,
            frames: b.frames,
            loops: b.loops,
            adjacency: Vec::new(),
        };
        grid.rebuild_adjacency();
        Ok(grid)
    }

    fn build(tag: &ModelTag) -> Result<Builder> {
        Ok(match *tag {
            ModelTag::Circle { m, phase } => {
                check_circle(m, "circle")?;
                build_cycle(m, |i| 2.0 * PI * (i as f64 + phase) / m as f64)
            }
            ModelTag::ProjectiveLine { m, phase } => {
                check_circle(m, "projective line")?;
                build_cycle(m, |i| PI * (i as f64 + phase) / m as f64)
            }
            ModelTag::Sphere2 { m_theta, m_phi } => {
                check_circle(m_phi, "sphere azimuth")?;
                check_circle(2 * m_theta, "sphere meridian")?;
                if m_phi % 4 != 0 {
                    return Err(Error::InvalidConfig("m_phi must be a multiple of 4".into()));
                }
                build_sphere(m_theta, m_phi)
            }
            ModelTag::ProjectivePlane { m_theta, m_phi } => {
                check_circle(m_phi, "projective plane azimuth")?;
                check_circle(4 * m_theta, "projective plane meridian")?;
                if m_phi % 4 != 0 {
                    return Err(Error::InvalidConfig("m_phi must be a multiple of 4".into()));
                }
                build_projective_plane(m_theta, m_phi)
            }
            ModelTag::Union { ref parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidConfig("empty union".into()));
                }
                let mut out = Builder::new(0);
                for part in parts {
                    let b = Self::build(part)?;
                    let off = out.coords.len();
                    out.coords.extend(b.coords);
                    out.edges.extend(b.edges.iter().map(|&(a, c)| (a + off, c + off)));
                    out.frames.extend(
                        b.frames
                            .into_iter()
                            .map(|f| f.into_iter().map(|(a, c)| (a + off, c + off)).collect()),
                    );
                    out.loops
                        .extend(b.loops.into_iter().map(|l| l.into_iter().map(|i| i + off).collect()));
                }
                out
            }
        })
    }

    fn rebuild_adjacency(&mut self) {
        let mut adj = vec![Vec::new(); self.coords.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        self.adjacency = adj;
    }

    /// Re-index nodes: storage index `k` of the result holds node `perm[k]` of `self`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: perm.len(),
            });
        }
        let mut inv = vec![usize::MAX; n];
        for (k, &old) in perm.iter().enumerate() {
            if old >= n || inv[old] != usize::MAX {
                return Err(Error::InvalidConfig("relabeling is not a permutation".into()));
            }
            inv[old] = k;
        }
        let mut grid = Self {
            tag: self.tag.clone(),
            labels: perm.iter().map(|&o| self.labels[o]).collect(),
            coords: perm.iter().map(|&o| self.coords[o].clone()).collect(),
            edges: self.edges.iter().map(|&(a, b)| (inv[a], inv[b])).collect(),
            frames: perm
                .iter()
                .map(|&o| self.frames[o].iter().map(|&(f, b)| (inv[f], inv[b])).collect())
                .collect(),
            loops: self
                .loops
                .iter()
                .map(|l| l.iter().map(|&i| inv[i]).collect())
                .collect(),
            adjacency: Vec::new(),
        };
        grid.rebuild_adjacency();
        Ok(grid)
    }

    pub fn tag(&self) -> &ModelTag {
        &self.tag
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn model_coords(&self, i: usize) -> &[f64] {
        &self.coords[i]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn frames(&self, i: usize) -> &[(usize, usize)] {
        &self.frames[i]
    }

    pub fn loops(&self) -> &[Vec<usize>] {
        &self.loops
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        a == b || self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Breadth-first spanning tree from `root`: `(order, parent)` with `parent[root] = root`.
    pub(crate) fn bfs(&self, root: usize) -> (Vec<usize>, Vec<usize>) {
        let n = self.len();
        let mut parent = vec![usize::MAX; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::new();
        parent[root] = root;
        queue.push_back(root);
        while let Some(a) = queue.pop_front() {
            order.push(a);
            for &b in &self.adjacency[a] {
                if parent[b] == usize::MAX {
                    parent[b] = a;
                    queue.push_back(b);
                }
            }
        }
        (order, parent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_consistency(g: &ModelGrid) {
        for i in 0..g.len() {
            for &(f, b) in g.frames(i) {
                assert!(g.are_adjacent(i, f) || g.are_adjacent(i, b), "frame of {i} not local");
            }
            for &j in g.neighbors(i) {
                assert!(g.neighbors(j).contains(&i));
            }
        }
        for l in g.loops() {
            for w in l.windows(2) {
                assert!(g.are_adjacent(w[0], w[1]));
            }
            assert!(g.are_adjacent(*l.last().unwrap(), l[0]));
        }
        let (order, _) = g.bfs(0);
        assert_eq!(order.len(), g.len(), "grid is connected");
    }

    #[test]
    fn circle_topology() {
        let g = ModelGrid::circle(64).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.edges().len(), 64);
        assert_eq!(g.loops().len(), 1);
        check_consistency(&g);
    }

    #[test]
    fn too_coarse_rejected() {
        assert!(ModelGrid::circle(32).is_err());
        assert!(ModelGrid::projective_plane(8, 64).is_err());
        assert!(ModelGrid::projective_plane(16, 66).is_err());
    }

    #[test]
    fn sphere_topology() {
        let g = ModelGrid::sphere2(32, 64).unwrap();
        assert_eq!(g.len(), 2 + 31 * 64);
        assert!(g.loops().is_empty());
        check_consistency(&g);
        for i in 0..g.len() {
            let c = g.model_coords(i);
            assert!(((c[0] * c[0] + c[1] * c[1] + c[2] * c[2]) - 1.0).abs() < 1e-14);
            assert_eq!(g.frames(i).len(), 2);
        }
    }

    #[test]
    fn projective_plane_topology() {
        let g = ModelGrid::projective_plane(16, 64).unwrap();
        assert_eq!(g.len(), 1 + 15 * 64 + 32);
        assert!(g.loops().is_empty());
        check_consistency(&g);
        // equator nodes lie on z = 0 and no two are antipodal
        let eq: Vec<usize> = (g.len() - 32..g.len()).collect();
        for &a in &eq {
            assert!(g.model_coords(a)[2].abs() < 1e-15);
            for &b in &eq {
                if a != b {
                    let (p, q) = (g.model_coords(a), g.model_coords(b));
                    let dotp: f64 = p.iter().zip(q).map(|(x, y)| x * y).sum();
                    assert!(dotp.abs() < 1.0 - 1e-6);
                }
            }
        }
    }

    #[test]
    fn union_offsets() {
        let g = ModelGrid::disjoint_union(vec![
            ModelTag::Circle { m: 64, phase: 0.0 },
            ModelTag::Circle { m: 64, phase: 0.5 },
        ])
        .unwrap();
        assert_eq!(g.len(), 128);
        assert_eq!(g.loops().len(), 2);
        assert!(!g.are_adjacent(63, 64));
        assert_eq!(g.bfs(0).0.len(), 64);
    }

    #[test]
    fn relabel_rotation_keeps_topology() {
        let g = ModelGrid::circle(64).unwrap();
        let perm: Vec<usize> = (0..64).map(|k| (k + 5) % 64).collect();
        let r = g.relabeled(&perm).unwrap();
        assert_eq!(r.labels()[0], 5);
        assert_eq!(r.model_coords(0), g.model_coords(5));
        check_consistency(&r);
        assert!(g.relabeled(&[0; 64]).is_err());
    }
}
