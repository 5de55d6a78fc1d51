//! The velocity one-form `α_t = ω(dι_t/dt, dι_t ·)` of a lift, its periods,
//! and primitives recovered by line integration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mesh::{AssociatedFunction, PathLift};
use crate::error::{Error, Result};
use crate::geom::norm;
use crate::scalar::Scalar;

/// One-form values per node and frame stencil, with the frame-vector norms.
#[derive(Clone, Debug)]
pub struct OneFormSamples<S> {
    pub values: Vec<Vec<S>>,
    pub frame_norms: Vec<Vec<S>>,
}

/// Result of comparing `α_t` against `d(H_t ∘ ι_t)` on every edge and time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub deviation: f64,
    pub tolerance: f64,
    pub scale: f64,
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

/// `dι/dt` at every node of time sample `ti`: second-order differences of
/// chords to neighbouring times (three-point one-sided at the ends).
pub fn node_velocities<S: Scalar>(lift: &PathLift<S>, ti: usize) -> Result<Vec<Vec<S>>> {
    let nt = lift.time_len();
    if nt < 2 {
        return Err(Error::NoDerivative);
    }
    let t = lift.tgrid();
    let kind = lift.kind();
    // (time index, weight) pairs; the chord to ti itself is zero
    let weights: Vec<(usize, S)> = if nt == 2 {
        let dt = t[1] - t[0];
        let other = 1 - ti;
        let sign = if ti == 0 { S::one() } else { -S::one() };
        vec![(other, sign / dt)]
    } else if ti == 0 {
        let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
        vec![(1, (h1 + h2) / (h1 * h2)), (2, -h1 / (h2 * (h1 + h2)))]
    } else if ti == nt - 1 {
        let (h1, h2) = (t[ti] - t[ti - 1], t[ti - 1] - t[ti - 2]);
        vec![(ti - 1, -(h1 + h2) / (h1 * h2)), (ti - 2, h1 / (h2 * (h1 + h2)))]
    } else {
        let (h1, h2) = (t[ti] - t[ti - 1], t[ti + 1] - t[ti]);
        vec![(ti - 1, -h2 / (h1 * (h1 + h2))), (ti + 1, h1 / (h2 * (h1 + h2)))]
    };
    let here = lift.mesh(ti);
    Ok((0..lift.node_len())
        .into_par_iter()
        .map(|i| {
            let x = &here.image(i).coords;
            let mut v = vec![S::zero(); x.len()];
            for &(tj, w) in &weights {
                let c = kind.chord(x, &lift.mesh(tj).image(i).coords);
                v.iter_mut().zip(&c).for_each(|(a, b)| *a = *a + w * *b);
            }
            v
        })
        .collect())
}

/// `α_t(e)` for every node and frame vector `e` at time sample `ti`.
pub fn velocity_one_form<S: Scalar>(lift: &PathLift<S>, ti: usize) -> Result<OneFormSamples<S>> {
    let vel = node_velocities(lift, ti)?;
    let mesh = lift.mesh(ti);
    let kind = lift.kind();
    let (values, frame_norms) = (0..lift.node_len())
        .into_par_iter()
        .map(|i| {
            let k = mesh.grid().frames(i).len();
            (0..k)
                .map(|f| {
                    let e = mesh.frame_vector(i, f);
                    (kind.omega_unchecked(&vel[i], &e), norm(&e))
                })
                .unzip::<_, _, Vec<S>, Vec<S>>()
        })
        .unzip();
    Ok(OneFormSamples { values, frame_norms })
}

/// Trapezoid line integral of `α_t` along every grid edge `(a → b)`.
pub fn edge_integrals<S: Scalar>(lift: &PathLift<S>, ti: usize) -> Result<Vec<S>> {
    let vel = node_velocities(lift, ti)?;
    Ok(edge_integrals_with(lift, ti, &vel))
}

fn edge_integrals_with<S: Scalar>(lift: &PathLift<S>, ti: usize, vel: &[Vec<S>]) -> Vec<S> {
    let mesh = lift.mesh(ti);
    let kind = lift.kind();
    let half = S::lit(0.5);
    mesh.grid()
        .edges()
        .par_iter()
        .map(|&(a, b)| {
            let (pa, pb) = (&mesh.image(a).coords, &mesh.image(b).coords);
            let ca = kind.chord(pa, pb);
            let cb: Vec<S> = kind.chord(pb, pa).into_iter().map(|x| -x).collect();
            half * (kind.omega_unchecked(&vel[a], &ca) + kind.omega_unchecked(&vel[b], &cb))
        })
        .collect()
}

/// `max_e |∫_e α| / |e|`: a sup-norm proxy for `α_t`.
fn alpha_sup<S: Scalar>(integrals: &[S], lengths: &[S]) -> S {
    integrals
        .iter()
        .zip(lengths)
        .filter(|(_, l)| **l > S::zero())
        .map(|(i, l)| i.abs() / *l)
        .fold(S::zero(), S::max)
}

/// Default exactness tolerance `1e-2 · ‖α‖_∞ · (loop length)`.
pub fn default_period_tolerance<S: Scalar>(lift: &PathLift<S>, ti: usize, loop_nodes: &[usize]) -> Result<S> {
    let integrals = edge_integrals(lift, ti)?;
    let lengths = lift.mesh(ti).edge_lengths();
    Ok(S::lit(1e-2) * alpha_sup(&integrals, &lengths) * loop_length(lift, ti, loop_nodes))
}

fn loop_length<S: Scalar>(lift: &PathLift<S>, ti: usize, nodes: &[usize]) -> S {
    let mesh = lift.mesh(ti);
    let kind = lift.kind();
    (0..nodes.len())
        .map(|k| {
            let (a, b) = (nodes[k], nodes[(k + 1) % nodes.len()]);
            kind.distance_unchecked(&mesh.image(a).coords, &mesh.image(b).coords)
        })
        .sum()
}

/// Signed edge lookup: the index of edge `{a, b}` and whether it is stored as `(a, b)`.
fn edge_lookup(edges: &[(usize, usize)]) -> std::collections::HashMap<(usize, usize), (usize, bool)> {
    let mut map = std::collections::HashMap::with_capacity(2 * edges.len());
    for (k, &(a, b)) in edges.iter().enumerate() {
        map.insert((a, b), (k, true));
        map.entry((b, a)).or_insert((k, false));
    }
    map
}

/// Loop integrals of `α_t` over each `H_1` generator of the grid.
pub fn exactness_periods<S: Scalar>(lift: &PathLift<S>, ti: usize) -> Result<Vec<S>> {
    let loops = lift.grid().loops();
    if loops.is_empty() {
        return Ok(Vec::new());
    }
    let integrals = edge_integrals(lift, ti)?;
    let lookup = edge_lookup(lift.grid().edges());
    loops
        .iter()
        .map(|l| {
            (0..l.len())
                .map(|k| {
                    let (a, b) = (l[k], l[(k + 1) % l.len()]);
                    let (e, fwd) = *lookup
                        .get(&(a, b))
                        .ok_or_else(|| Error::DegenerateMesh(format!("loop step {a}->{b} is not an edge")))?;
                    Ok(if fwd { integrals[e] } else { -integrals[e] })
                })
                .sum::<Result<S>>()
        })
        .collect()
}

/// Primitive of `α_t` normalized to vanish at `base`, by integration along a
/// breadth-first spanning tree. Fails with [`Error::NotExact`] if a period or
/// a non-tree edge closes with more than the default tolerance.
pub fn recover_h_from_alpha<S: Scalar>(lift: &PathLift<S>, ti: usize, base: usize) -> Result<Vec<S>> {
    let integrals = edge_integrals(lift, ti)?;
    let mesh = lift.mesh(ti);
    let lengths = mesh.edge_lengths();
    let sup = alpha_sup(&integrals, &lengths);
    for (l, p) in lift.grid().loops().iter().zip(exactness_periods(lift, ti)?) {
        let tol = S::lit(1e-2) * sup * loop_length(lift, ti, l);
        if p.abs() > tol {
            return Err(Error::NotExact {
                max_period: p.abs().as_f64(),
                tol: tol.as_f64(),
            });
        }
    }
    let grid = lift.grid();
    let lookup = edge_lookup(grid.edges());
    let signed = |a: usize, b: usize| -> (S, S) {
        let (e, fwd) = lookup[&(a, b)];
        (if fwd { integrals[e] } else { -integrals[e] }, lengths[e])
    };
    let (order, parent) = grid.bfs(base);
    let mut h = vec![S::nan(); grid.len()];
    let mut depth = vec![S::zero(); grid.len()];
    h[base] = S::zero();
    for &b in order.iter().skip(1) {
        let a = parent[b];
        let (i, l) = signed(a, b);
        h[b] = h[a] + i;
        depth[b] = depth[a] + l;
    }
    if order.len() != grid.len() {
        return Err(Error::DegenerateMesh("grid is not connected".into()));
    }
    for &(a, b) in grid.edges() {
        if parent[a] == b || parent[b] == a {
            continue;
        }
        let (i, l) = signed(a, b);
        let mismatch = (h[b] - h[a] - i).abs();
        let tol = S::lit(1e-2) * sup * (depth[a] + depth[b] + l);
        if mismatch > tol {
            return Err(Error::NotExact {
                max_period: mismatch.as_f64(),
                tol: tol.as_f64(),
            });
        }
    }
    Ok(h)
}

/// Compare edge integrals of `α_t` with edge differences of `h` at every time:
/// the discrete form of `d/dt L_t = d(H_t|L_t)`. The tolerance is
/// `(max Δt + max spacing) · max |Δh|` plus a round-off floor.
pub fn check_consistency<S: Scalar>(lift: &PathLift<S>, h: &AssociatedFunction<S>) -> Result<ConsistencyReport> {
    if h.time_len() != lift.time_len() || h.values.iter().any(|r| r.len() != lift.node_len()) {
        return Err(Error::DimensionMismatch {
            expected: lift.time_len() * lift.node_len(),
            got: h.values.iter().map(Vec::len).sum(),
        });
    }
    let edges = lift.grid().edges();
    let mut deviation = S::zero();
    let mut scale = S::zero();
    let mut hmax = S::zero();
    for ti in 0..lift.time_len() {
        let integrals = edge_integrals(lift, ti)?;
        let row = h.slice(ti);
        for (&(a, b), &i) in edges.iter().zip(&integrals) {
            let dh = row[b] - row[a];
            deviation = deviation.max((i - dh).abs());
            scale = scale.max(dh.abs());
        }
        hmax = row.iter().fold(hmax, |m, v| m.max(v.abs()));
    }
    let tol = (lift.max_dt() + lift.max_spacing()) * scale + S::lit(1e-12) * (S::one() + hmax);
    Ok(ConsistencyReport {
        deviation: deviation.as_f64(),
        tolerance: tol.as_f64(),
        scale: scale.as_f64(),
    })
}
