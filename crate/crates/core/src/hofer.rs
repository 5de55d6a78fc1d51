//! Oscillation, the norm `‖h‖ = ∫ osc(h_t) dt`, and Hofer lengths of paths.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::HamiltonianSpec;
use crate::lagr::{associated_function_from_h, check_consistency, AssociatedFunction, ConsistencyReport, PathLift};
use crate::scalar::{trapezoid, Scalar};

/// `max − min` of a slice.
pub fn oscillation<S: Scalar>(slice: &[S]) -> Result<S> {
    let (lo, hi) = bounds(slice).ok_or(Error::EmptyInput)?;
    Ok(hi - lo)
}

fn bounds<S: Scalar>(slice: &[S]) -> Option<(S, S)> {
    let first = *slice.first()?;
    Some(slice.iter().fold((first, first), |(lo, hi), v| (lo.min(*v), hi.max(*v))))
}

/// Trapezoid quadrature of the oscillation of `h` over `tgrid`.
pub fn hofer_norm<S: Scalar>(h: &AssociatedFunction<S>, tgrid: &[S]) -> Result<S> {
    if h.time_len() != tgrid.len() {
        return Err(Error::DimensionMismatch {
            expected: tgrid.len(),
            got: h.time_len(),
        });
    }
    let osc = h.values.iter().map(|r| oscillation(r)).collect::<Result<Vec<S>>>()?;
    Ok(trapezoid(tgrid, &osc))
}

/// Same as [`hofer_norm`] on raw rows; used in hot probe loops.
pub(crate) fn norm_of_rows<S: Scalar>(rows: &[Vec<S>], tgrid: &[S]) -> S {
    let osc: Vec<S> = rows
        .iter()
        .map(|r| bounds(r).map_or(S::zero(), |(lo, hi)| hi - lo))
        .collect();
    trapezoid(tgrid, &osc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthBreakdown {
    pub t: Vec<f64>,
    pub max: Vec<f64>,
    pub min: Vec<f64>,
    pub osc: Vec<f64>,
    pub total: f64,
    pub rule: String,
    /// Mesh-resolution bound on `total` from quadratic fits at the extremal nodes.
    pub error_bar: f64,
    pub consistency: Option<ConsistencyReport>,
}

impl LengthBreakdown {
    /// Breakdown of `‖h‖` on `lift` without any consistency check.
    pub fn from_function<S: Scalar>(lift: &PathLift<S>, h: &AssociatedFunction<S>) -> Result<Self> {
        let total = hofer_norm(h, lift.tgrid())?;
        let rows: Vec<(f64, f64, f64)> = (0..lift.time_len())
            .into_par_iter()
            .map(|ti| {
                let row = h.slice(ti);
                let (lo, hi) = bounds(row).expect("nonempty");
                let bar = peak_excess(lift, ti, row, true) + peak_excess(lift, ti, row, false);
                (lo.as_f64(), hi.as_f64(), bar.as_f64())
            })
            .collect();
        let t: Vec<f64> = lift.tgrid().iter().map(|x| x.as_f64()).collect();
        let bars: Vec<f64> = rows.iter().map(|r| r.2).collect();
        Ok(Self {
            error_bar: trapezoid(&t, &bars),
            max: rows.iter().map(|r| r.1).collect(),
            min: rows.iter().map(|r| r.0).collect(),
            osc: rows.iter().map(|r| r.1 - r.0).collect(),
            t,
            total: total.as_f64(),
            rule: "trapezoid".into(),
            consistency: None,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `t,max,min,osc` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,max,min,osc\n");
        for i in 0..self.t.len() {
            let _ = writeln!(out, "{:?},{:?},{:?},{:?}", self.t[i], self.max[i], self.min[i], self.osc[i]);
        }
        out
    }
}

/// How far a parabola through the extremal node and its stencil neighbours
/// overshoots the sampled extremum, summed over stencil directions.
fn peak_excess<S: Scalar>(lift: &PathLift<S>, ti: usize, row: &[S], top: bool) -> S {
    let pick = |a: S, b: S| if top { a > b } else { a < b };
    let mut i = 0;
    for (k, v) in row.iter().enumerate() {
        if pick(*v, row[i]) {
            i = k;
        }
    }
    let mesh = lift.mesh(ti);
    let kind = lift.kind();
    let sign = if top { S::one() } else { -S::one() };
    let y0 = sign * row[i];
    let x = &mesh.image(i).coords;
    let mut total = S::zero();
    for &(f, b) in lift.grid().frames(i) {
        let a = kind.distance_unchecked(x, &mesh.image(b).coords);
        let c = kind.distance_unchecked(x, &mesh.image(f).coords);
        if a <= S::zero() || c <= S::zero() {
            continue;
        }
        let (ym, yp) = (sign * row[b] - y0, sign * row[f] - y0);
        let c2 = (yp / c + ym / a) / (a + c);
        let c1 = yp / c - c2 * c;
        if c2 < S::zero() {
            let excess = -c1 * c1 / (S::lit(4.0) * c2);
            // a vertex outside the stencil means the fit says nothing here
            let vertex = -c1 / (S::lit(2.0) * c2);
            if vertex >= -a && vertex <= c {
                total = total + excess;
            }
        }
    }
    total
}

/// Hofer length of a path generated by `h`. Refuses when the lift fails the
/// consistency check against `h`, since the number would then not be the
/// length of this path.
pub fn hofer_length<S: Scalar>(lift: &PathLift<S>, h: &HamiltonianSpec<S>) -> Result<LengthBreakdown> {
    let values = associated_function_from_h(lift, h);
    let report = check_consistency(lift, &values)?;
    if !report.passed() {
        return Err(Error::Inconsistent {
            deviation: report.deviation,
            tol: report.tolerance,
        });
    }
    let mut out = LengthBreakdown::from_function(lift, &values)?;
    out.consistency = Some(report);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate_path, FlowConfig};
    use crate::geom::ManifoldKind;
    use crate::lagr::{LagrangianMesh, ModelGrid};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    const E1: ManifoldKind = ManifoldKind::Euclidean { n: 1 };

    fn tgrid(n: usize) -> Vec<f64> {
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    fn circle_lift(m: usize, h: &HamiltonianSpec<f64>) -> PathLift<f64> {
        let grid = Arc::new(ModelGrid::circle(m).unwrap());
        let mesh = LagrangianMesh::embed(E1, grid, |c| c.to_vec()).unwrap();
        integrate_path(E1, h, &mesh, &tgrid(200), &FlowConfig::default()).unwrap()
    }

    #[test]
    fn oscillation_examples() {
        assert_eq!(oscillation(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        assert!(oscillation::<f64>(&[]).is_err());
        let circle: Vec<f64> = (0..512).map(|i| (std::f64::consts::TAU * i as f64 / 512.0).cos()).collect();
        assert_abs_diff_eq!(oscillation(&circle).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn norm_examples() {
        let ts = tgrid(10);
        let zero = AssociatedFunction::raw(vec![vec![0.0; 5]; 11]);
        assert_eq!(hofer_norm(&zero, &ts).unwrap(), 0.0);
        let two = AssociatedFunction::raw(vec![vec![-1.0, 0.0, 1.0]; 11]);
        assert_abs_diff_eq!(hofer_norm(&two, &ts).unwrap(), 2.0, epsilon = 1e-15);
        assert!(hofer_norm(&two, &ts[..5]).is_err());
    }

    #[test]
    fn translated_circle_has_length_two() {
        let h = HamiltonianSpec::new("x", |_, p: &[f64]| p[0]);
        let lift = circle_lift(512, &h);
        let b = hofer_length(&lift, &h).unwrap();
        assert_abs_diff_eq!(b.total, 2.0, epsilon = 1e-3);
        assert!(b.osc.iter().all(|o| *o >= 0.0));
        assert!(b.error_bar < 1e-3 && b.error_bar >= 0.0);
        assert!(b.to_csv().lines().count() == 202);
    }

    #[test]
    fn zero_hamiltonian_has_zero_length() {
        let lift = circle_lift(64, &HamiltonianSpec::zero());
        assert_eq!(hofer_length(&lift, &HamiltonianSpec::zero()).unwrap().total, 0.0);
    }

    #[test]
    fn refuses_inconsistent_hamiltonian() {
        let h = HamiltonianSpec::new("x", |_, p: &[f64]| p[0]);
        let lift = circle_lift(256, &h);
        let wrong = HamiltonianSpec::new("y", |_, p: &[f64]| p[1]);
        assert!(matches!(hofer_length(&lift, &wrong), Err(Error::Inconsistent { .. })));
    }

    #[test]
    fn relabeling_keeps_length() {
        let h = HamiltonianSpec::new("x+y^2", |t, p: &[f64]| p[0] + t * p[1] * p[1]);
        let lift = circle_lift(128, &h);
        let perm: Vec<usize> = (0..128).map(|k| (k * 5 + 17) % 128).collect();
        let a = hofer_length(&lift, &h).unwrap().total;
        let b = hofer_length(&lift.relabeled(&perm).unwrap(), &h).unwrap().total;
        assert!((a - b).abs() <= 1e-12);
    }
}
