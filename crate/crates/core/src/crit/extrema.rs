use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flow::HamiltonianSpec;
use crate::lagr::{AssociatedFunction, PathLift};
use crate::scalar::Scalar;

/// Nodes within `tol_val` of the max and of the min of a slice.
pub fn extrema_sets<S: Scalar>(slice: &[S], tol_val: S) -> (Vec<usize>, Vec<usize>) {
    let (lo, hi) = slice
        .iter()
        .fold((S::infinity(), S::neg_infinity()), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let max = (0..slice.len()).filter(|&i| slice[i] >= hi - tol_val).collect();
    let min = (0..slice.len()).filter(|&i| slice[i] <= lo + tol_val).collect();
    (max, min)
}

/// Per-time maxsets and minsets of an associated function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremaTrack {
    pub tol_val: f64,
    pub tol_geo: f64,
    pub max_values: Vec<f64>,
    pub min_values: Vec<f64>,
    pub maxsets: Vec<Vec<usize>>,
    pub minsets: Vec<Vec<usize>>,
}

impl ExtremaTrack {
    pub fn new<S: Scalar>(h: &AssociatedFunction<S>, tol_val: f64, tol_geo: f64) -> Self {
        let rows: Vec<_> = h
            .values
            .par_iter()
            .map(|row| {
                let (mx, mn) = extrema_sets(row, S::lit(tol_val));
                let hi = row.iter().copied().fold(S::neg_infinity(), S::max).as_f64();
                let lo = row.iter().copied().fold(S::infinity(), S::min).as_f64();
                (mx, mn, hi, lo)
            })
            .collect();
        let mut track = Self {
            tol_val,
            tol_geo,
            max_values: Vec::with_capacity(rows.len()),
            min_values: Vec::with_capacity(rows.len()),
            maxsets: Vec::with_capacity(rows.len()),
            minsets: Vec::with_capacity(rows.len()),
        };
        for (mx, mn, hi, lo) in rows {
            track.maxsets.push(mx);
            track.minsets.push(mn);
            track.max_values.push(hi);
            track.min_values.push(lo);
        }
        track
    }

    /// Ambient images of the maxset (`top`) or minset at time index `ti`.
    pub fn images<S: Scalar>(&self, lift: &PathLift<S>, ti: usize, top: bool) -> Vec<Vec<S>> {
        let set = if top { &self.maxsets[ti] } else { &self.minsets[ti] };
        set.iter().map(|&i| lift.mesh(ti).image(i).coords.clone()).collect()
    }
}

/// A point of `L_0` that stays on every `L_t` and extremal for every `H_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate<S> {
    pub node: usize,
    pub point: Vec<S>,
    /// `max_t` distance from the point to the nearest node of `L_t`.
    pub drift: S,
    /// `max_t` of `max h_t − H(t, p)` (for a max candidate; mirrored for min).
    pub value_gap: S,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Persistent<S> {
    pub plus: Vec<Candidate<S>>,
    pub minus: Vec<Candidate<S>>,
}

impl<S: Scalar> Persistent<S> {
    /// Best candidate on one side: smallest value gap, then smallest drift, then node.
    pub fn representative(&self, top: bool) -> Option<&Candidate<S>> {
        let list = if top { &self.plus } else { &self.minus };
        list.iter().min_by(|a, b| {
            a.value_gap
                .partial_cmp(&b.value_gap)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.drift.partial_cmp(&b.drift).unwrap_or(std::cmp::Ordering::Equal))
                .then(a.node.cmp(&b.node))
        })
    }

    pub fn both_sides(&self) -> bool {
        !self.plus.is_empty() && !self.minus.is_empty()
    }
}

/// Images of the `t = 0` extremal nodes that, at every time sample, lie
/// within `tol_geo` of `L_t` and keep `H(t, p)` within `tol_val` of the
/// extremum of `h_t`.
pub fn persistent_extrema<S: Scalar>(
    lift: &PathLift<S>,
    h_spec: &HamiltonianSpec<S>,
    h: &AssociatedFunction<S>,
    tol_val: S,
    tol_geo: S,
) -> Persistent<S> {
    let (max0, min0) = extrema_sets(h.slice(0), tol_val);
    let extremes: Vec<(S, S)> = h
        .values
        .iter()
        .map(|r| {
            r.iter()
                .fold((S::infinity(), S::neg_infinity()), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
        })
        .collect();
    let kind = lift.kind();
    let check = |node: usize, top: bool| -> Option<Candidate<S>> {
        let point = lift.mesh(0).image(node).coords.clone();
        let mut drift = S::zero();
        let mut value_gap = S::neg_infinity();
        for (ti, &t) in lift.tgrid().iter().enumerate() {
            let v = h_spec.eval(t, &point);
            let gap = if top { extremes[ti].1 - v } else { v - extremes[ti].0 };
            if gap > tol_val {
                return None;
            }
            value_gap = value_gap.max(gap);
            let mesh = lift.mesh(ti);
            // start from the node's own image, which usually is the nearest
            let mut d = kind.distance_unchecked(&point, &mesh.image(node).coords);
            if d > S::zero() {
                for img in mesh.images() {
                    d = d.min(kind.distance_unchecked(&point, &img.coords));
                }
            }
            if d > tol_geo {
                return None;
            }
            drift = drift.max(d);
        }
        Some(Candidate {
            node,
            point,
            drift,
            value_gap,
        })
    };
    let plus = max0.par_iter().filter_map(|&i| check(i, true)).collect();
    let minus = min0.par_iter().filter_map(|&i| check(i, false)).collect();
    Persistent { plus, minus }
}
