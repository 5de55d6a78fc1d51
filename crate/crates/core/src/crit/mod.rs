//! Criticality of exact paths: extrema tracking, persistent extremal points,
//! probe directions with zero time mean, the convex length model `u(s)`, and
//! the quasi-autonomy verdict.

mod extrema;
mod probe;
mod verdict;

pub use extrema::{extrema_sets, persistent_extrema, Candidate, ExtremaTrack, Persistent};
pub use probe::{
    MEMBERSHIP_TOL,
    canonical_probe, convex_majorant_check, make_probe_separable, probe_length_function, random_probe, Bump,
    LengthFunction, MajorantReport, ProbeDescriptor, ProbeDirection, TimeProfile,
};
pub use verdict::{
    build_library, descent_search, evaluate_probe, quasi_autonomy_verdict, rebuild_probe, CriticalityReport, DescentOutcome,
    ProbeContext, ProbeSummary, Verdict, VerdictOptions,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hofer::{hofer_norm, oscillation};
use crate::lagr::{AssociatedFunction, PathLift};
use crate::scalar::Scalar;

/// Thresholds tied to the scale of a path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `1e-3 ·` mean oscillation.
    pub tol_val: f64,
    /// `2 ·` max mesh spacing.
    pub tol_geo: f64,
    /// `1e-3 · ‖h‖`.
    pub tol_probe: f64,
    pub mean_oscillation: f64,
    pub norm: f64,
    /// Oscillations at or below this make the path non-regular.
    pub regularity: f64,
}

impl Tolerances {
    pub fn for_path<S: Scalar>(lift: &PathLift<S>, h: &AssociatedFunction<S>) -> Result<Self> {
        let norm = hofer_norm(h, lift.tgrid())?.as_f64();
        let hmax = h
            .values
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
        // the time interval has unit length, so the mean oscillation is the norm
        Ok(Self {
            tol_val: 1e-3 * norm,
            tol_geo: 2.0 * lift.max_spacing().as_f64(),
            tol_probe: 1e-3 * norm,
            mean_oscillation: norm,
            norm,
            regularity: 1e-9 * hmax.max(1.0),
        })
    }

    /// Smallest per-time oscillation of `h`.
    pub fn min_oscillation<S: Scalar>(h: &AssociatedFunction<S>) -> Result<f64> {
        h.values
            .iter()
            .map(|r| oscillation(r).map(|o| o.as_f64()))
            .try_fold(f64::INFINITY, |m, o| o.map(|o| m.min(o)))
    }
}
