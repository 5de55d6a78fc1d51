use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::extrema::{persistent_extrema, Candidate, ExtremaTrack};
use super::probe::{
    bump_shape, canonical_probe, make_probe_separable, Bump, LengthFunction, ProbeDescriptor, ProbeDirection,
    TimeProfile,
};
use super::Tolerances;
use crate::error::{Error, Result};
use crate::extend::PathExtension;
use crate::flow::{HamiltonianSpec, ScalarField};
use crate::lagr::{associated_function_from_h, check_consistency, AssociatedFunction, PathLift};
use crate::scalar::{trapezoid, Scalar};

/// Number of break intervals used by time-interpolated probes.
const TARGET_BREAKS: usize = 40;
const S_GRID_POINTS: usize = 41;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Critical,
    NonCritical,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub id: String,
    pub s_star: f64,
    /// `u(0) − u(s*)`.
    pub decrease: f64,
    pub descriptor: ProbeDescriptor,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub plus: Option<f64>,
    pub minus: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub verdict: Verdict,
    pub reason: String,
    pub p_plus: Option<Vec<f64>>,
    pub p_minus: Option<Vec<f64>>,
    pub drift: Drift,
    pub candidates_plus: Vec<Candidate<f64>>,
    pub candidates_minus: Vec<Candidate<f64>>,
    pub probes: Vec<ProbeSummary>,
    /// The probe with the largest decrease, when it exceeds `tol_probe`.
    pub certificate: Option<ProbeSummary>,
    pub tolerances: Tolerances,
    pub hofer_norm: f64,
    #[serde(skip)]
    pub track: Option<ExtremaTrack>,
    /// Distance from `p_±` to the nearest node of `L_t`, per time sample.
    #[serde(skip)]
    pub distances: Vec<(f64, f64)>,
    #[serde(skip)]
    pub times: Vec<f64>,
}

impl CriticalityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `t,max,min,maxset_size,minset_size,dist_plus,dist_minus`; distances are
    /// empty when the candidate is absent.
    pub fn extrema_csv(&self) -> String {
        let mut out = String::from("t,max,min,maxset_size,minset_size,dist_plus,dist_minus\n");
        let Some(track) = &self.track else { return out };
        for (i, t) in self.times.iter().enumerate() {
            let (dp, dm) = self.distances.get(i).copied().unwrap_or((f64::NAN, f64::NAN));
            let fmt = |d: f64| if d.is_nan() { String::new() } else { format!("{d:?}") };
            let _ = writeln!(
                out,
                "{:?},{:?},{:?},{},{},{},{}",
                t,
                track.max_values[i],
                track.min_values[i],
                track.maxsets[i].len(),
                track.minsets[i].len(),
                fmt(dp),
                fmt(dm)
            );
        }
        out
    }

    pub fn probes_csv(&self) -> String {
        let mut out = String::from("id,s_star,decrease\n");
        for p in &self.probes {
            let _ = writeln!(out, "{},{:?},{:?}", p.id, p.s_star, p.decrease);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictOptions {
    pub budget: usize,
}

impl Default for VerdictOptions {
    fn default() -> Self {
        Self { budget: 200 }
    }
}

/// Everything a probe descriptor may refer to.
#[derive(Clone, Copy)]
pub struct ProbeContext<'a, S> {
    pub lift: &'a PathLift<S>,
    pub hamiltonian: &'a HamiltonianSpec<S>,
    pub h: &'a AssociatedFunction<S>,
}

impl<'a, S: Scalar> ProbeContext<'a, S> {
    /// Break stride giving about `TARGET_BREAKS` intervals.
    pub fn stride(&self) -> usize {
        (self.lift.time_len() - 1).div_ceil(TARGET_BREAKS).max(1)
    }

    fn break_indices(&self, stride: usize) -> Vec<usize> {
        let last = self.lift.time_len() - 1;
        let mut idx: Vec<usize> = (0..=last).step_by(stride.max(1)).collect();
        if *idx.last().unwrap() != last {
            idx.push(last);
        }
        idx
    }

    fn extremal_node(&self, ti: usize, top: bool) -> usize {
        let row = self.h.slice(ti);
        let mut k = 0;
        for (i, v) in row.iter().enumerate() {
            if (top && *v > row[k]) || (!top && *v < row[k]) {
                k = i;
            }
        }
        k
    }

    fn extremal_image(&self, ti: usize, top: bool) -> Vec<S> {
        self.lift.mesh(ti).image(self.extremal_node(ti, top)).coords.clone()
    }

    /// Half the largest distance from the first node to the others at `t = 0`.
    fn length_scale(&self) -> f64 {
        let mesh = self.lift.mesh(0);
        let kind = mesh.kind();
        let first = &mesh.image(0).coords;
        let d = mesh
            .images()
            .iter()
            .map(|p| kind.distance_unchecked(first, &p.coords))
            .fold(S::zero(), S::max);
        0.5 * d.as_f64()
    }
}

/// Rebuild a probe from its descriptor.
pub fn rebuild_probe<S: Scalar>(ctx: &ProbeContext<'_, S>, id: &str, desc: &ProbeDescriptor) -> Result<ProbeDirection<S>> {
    let probe = match desc {
        ProbeDescriptor::Zero => ProbeDirection::zero(id),
        ProbeDescriptor::Canonical => canonical_probe(ctx.hamiltonian),
        ProbeDescriptor::CanonicalExtension { stride } => {
            let ext = PathExtension::new(ctx.lift, ctx.h, *stride)?.into_hamiltonian();
            let g = canonical_probe(&ext);
            let value: ScalarField<S> = Arc::new(move |t, p| g.eval(t, p));
            ProbeDirection::from_parts(id.into(), desc.clone(), value, Some(ext.time_breaks().unwrap().to_vec()))
        }
        ProbeDescriptor::Tracking {
            radius,
            plus,
            minus,
            stride,
        } => tracking_probe(ctx, id, *radius, *plus, *minus, *stride),
        ProbeDescriptor::Separable { profile, bumps } => {
            make_probe_separable(ctx.lift.kind(), id, profile.clone(), bumps.clone())?
        }
        ProbeDescriptor::Custom { .. } => {
            return Err(Error::InvalidConfig("custom probes cannot be rebuilt from a descriptor".into()))
        }
    };
    Ok(probe.with_id(id))
}

fn tracking_probe<S: Scalar>(
    ctx: &ProbeContext<'_, S>,
    id: &str,
    radius: f64,
    plus: f64,
    minus: f64,
    stride: usize,
) -> ProbeDirection<S> {
    let idx = ctx.break_indices(stride);
    let breaks: Vec<S> = idx.iter().map(|&i| ctx.lift.tgrid()[i]).collect();
    let plus_path: Vec<Vec<S>> = idx.iter().map(|&i| ctx.extremal_image(i, true)).collect();
    let minus_path: Vec<Vec<S>> = idx.iter().map(|&i| ctx.extremal_image(i, false)).collect();
    let kind = ctx.lift.kind();
    let (r, wp, wm) = (S::lit(radius), S::lit(plus), S::lit(minus));
    let at = move |j: usize, p: &[S]| -> S {
        let mut v = S::zero();
        if wp != S::zero() {
            v = v + wp * bump_shape(kind.distance_unchecked(p, &plus_path[j]), r);
        }
        if wm != S::zero() {
            v = v + wm * bump_shape(kind.distance_unchecked(p, &minus_path[j]), r);
        }
        v
    };
    let b = breaks.clone();
    let value: ScalarField<S> = Arc::new(move |t, p| {
        let samples: Vec<S> = (0..b.len()).map(|j| at(j, p)).collect();
        let mean = trapezoid(&b, &samples);
        let k = b.partition_point(|x| *x <= t).clamp(1, b.len() - 1);
        let w = ((t - b[k - 1]) / (b[k] - b[k - 1])).max(S::zero()).min(S::one());
        samples[k - 1] + w * (samples[k] - samples[k - 1]) - mean
    });
    ProbeDirection::from_parts(
        id.into(),
        ProbeDescriptor::Tracking {
            radius,
            plus,
            minus,
            stride,
        },
        value,
        Some(breaks),
    )
}

/// The ordered descent library, truncated to `budget`:
/// canonical probe, canonical probe of the tube extension (flat backends),
/// bumps riding the extremal trajectories (skipped when those are
/// stationary), then separable bumps at extremal images of `t ∈ {0, 1/8, …, 1}`.
pub fn build_library<S: Scalar>(ctx: &ProbeContext<'_, S>, tol: &Tolerances, budget: usize) -> Vec<(String, ProbeDescriptor)> {
    let mut lib: Vec<(String, ProbeDescriptor)> = vec![("canonical".into(), ProbeDescriptor::Canonical)];
    let stride = ctx.stride();
    let kind = ctx.lift.kind();
    if !kind.is_projective() {
        lib.push(("canonical-extension".into(), ProbeDescriptor::CanonicalExtension { stride }));
    }
    let scale = ctx.length_scale();
    let radii = [0.1 * scale, 0.25 * scale, 0.5 * scale];
    let w = tol.norm.max(tol.regularity);
    let tol_geo = S::lit(tol.tol_geo);
    let moves = |top: bool| {
        let start = ctx.extremal_image(0, top);
        ctx.break_indices(stride)
            .iter()
            .any(|&i| kind.distance_unchecked(&start, &ctx.extremal_image(i, top)) > tol_geo)
    };
    if moves(true) || moves(false) {
        for &r in &radii {
            for (tag, p, m) in [("both", w, -w), ("max", w, 0.0), ("min", 0.0, -w)] {
                lib.push((
                    format!("tracking-{tag}-r{r:.4}"),
                    ProbeDescriptor::Tracking {
                        radius: r,
                        plus: p,
                        minus: m,
                        stride,
                    },
                ));
            }
        }
    }
    let profiles = [
        TimeProfile::Square { kappa: 20.0 },
        TimeProfile::Cos { k: 1 },
        TimeProfile::Sin { k: 1 },
        TimeProfile::Cos { k: 2 },
        TimeProfile::Sin { k: 2 },
    ];
    let last = ctx.lift.time_len() - 1;
    let mut centers: Vec<(Vec<S>, Vec<S>)> = Vec::new();
    for j in 0..=8 {
        let ti = ((j as f64 / 8.0) * last as f64).round() as usize;
        let (cp, cm) = (ctx.extremal_image(ti, true), ctx.extremal_image(ti, false));
        let seen = centers.iter().any(|(p, m)| {
            kind.distance_unchecked(p, &cp) <= tol_geo && kind.distance_unchecked(m, &cm) <= tol_geo
        });
        if !seen {
            centers.push((cp, cm));
        }
    }
    let to_f64 = |v: &[S]| v.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
    for (sides, tag) in [((true, true), "both"), ((true, false), "max"), ((false, true), "min")] {
        for (ci, (cp, cm)) in centers.iter().enumerate() {
            for &r in &radii {
                for (pi, profile) in profiles.iter().enumerate() {
                    let mut bumps = Vec::new();
                    if sides.0 {
                        bumps.push(Bump {
                            center: to_f64(cp),
                            radius: r,
                            weight: w,
                        });
                    }
                    if sides.1 {
                        bumps.push(Bump {
                            center: to_f64(cm),
                            radius: r,
                            weight: -w,
                        });
                    }
                    lib.push((
                        format!("separable-{tag}-c{ci}-r{r:.4}-p{pi}"),
                        ProbeDescriptor::Separable {
                            profile: profile.clone(),
                            bumps,
                        },
                    ));
                }
            }
        }
    }
    lib.truncate(budget);
    lib
}

#[derive(Clone, Debug)]
pub struct DescentOutcome<S> {
    pub summaries: Vec<ProbeSummary>,
    /// Index of the largest decrease (first on ties).
    pub best: Option<usize>,
    pub best_probe: Option<ProbeDirection<S>>,
}

/// `u(0) − min_s u(s)` over `s ∈ [−1, 1]` for a certified probe.
pub fn evaluate_probe<S: Scalar>(ctx: &ProbeContext<'_, S>, probe: &ProbeDirection<S>) -> Result<ProbeSummary> {
    if !probe.is_certified() {
        return Err(Error::InvalidConfig(format!("probe {} is not certified", probe.id())));
    }
    let f = LengthFunction::new(ctx.h, &probe.sample(ctx.lift), ctx.lift.tgrid())?;
    let u0 = f.eval(S::zero());
    let (s, u) = f.minimize(-S::one(), S::one(), S_GRID_POINTS);
    Ok(ProbeSummary {
        id: probe.id().to_string(),
        s_star: s.as_f64(),
        decrease: (u0 - u).as_f64(),
        descriptor: probe.descriptor().clone(),
    })
}

/// Search the probe library for the largest decrease of `u`.
pub fn descent_search<S: Scalar>(ctx: &ProbeContext<'_, S>, tol: &Tolerances, budget: usize) -> Result<DescentOutcome<S>> {
    let lib = build_library(ctx, tol, budget);
    let summaries = lib
        .par_iter()
        .map(|(id, desc)| evaluate_probe(ctx, &rebuild_probe(ctx, id, desc)?))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<usize> = None;
    for (i, s) in summaries.iter().enumerate() {
        if best.map_or(true, |b| s.decrease > summaries[b].decrease) {
            best = Some(i);
        }
    }
    let best_probe = match best {
        Some(i) => Some(rebuild_probe(ctx, &lib[i].0, &lib[i].1)?),
        None => None,
    };
    Ok(DescentOutcome {
        summaries,
        best,
        best_probe,
    })
}

fn nearest_distances<S: Scalar>(lift: &PathLift<S>, p: &[S]) -> Vec<f64> {
    lift.meshes()
        .par_iter()
        .map(|m| m.nearest_node(p).1.as_f64())
        .collect()
}

fn to_f64_candidate<S: Scalar>(c: &Candidate<S>) -> Candidate<f64> {
    Candidate {
        node: c.node,
        point: c.point.iter().map(|x| x.as_f64()).collect(),
        drift: c.drift.as_f64(),
        value_gap: c.value_gap.as_f64(),
    }
}

/// Decide criticality: persistent extremal points on both sides and no
/// probe with `u(s) < u(0) − tol_probe` means critical; a missing side or a
/// descending probe means non-critical. Paths whose oscillation vanishes at
/// some time are reported as inconclusive.
pub fn quasi_autonomy_verdict<S: Scalar>(
    lift: &PathLift<S>,
    hamiltonian: &HamiltonianSpec<S>,
    opts: &VerdictOptions,
) -> Result<CriticalityReport> {
    let h = associated_function_from_h(lift, hamiltonian);
    let consistency = check_consistency(lift, &h)?;
    if !consistency.passed() {
        return Err(Error::Inconsistent {
            deviation: consistency.deviation,
            tol: consistency.tolerance,
        });
    }
    let tol = Tolerances::for_path(lift, &h)?;
    let times: Vec<f64> = lift.tgrid().iter().map(|t| t.as_f64()).collect();
    let track = ExtremaTrack::new(&h, tol.tol_val, tol.tol_geo);
    let mut report = CriticalityReport {
        verdict: Verdict::Inconclusive,
        reason: String::new(),
        p_plus: None,
        p_minus: None,
        drift: Drift::default(),
        candidates_plus: Vec::new(),
        candidates_minus: Vec::new(),
        probes: Vec::new(),
        certificate: None,
        tolerances: tol,
        hofer_norm: tol.norm,
        track: Some(track),
        distances: Vec::new(),
        times,
    };
    if Tolerances::min_oscillation(&h)? <= tol.regularity {
        report.reason = "non-regular: the oscillation of h_t vanishes at some time".into();
        return Ok(report);
    }
    let persistent = persistent_extrema(lift, hamiltonian, &h, S::lit(tol.tol_val), S::lit(tol.tol_geo));
    let rep_plus = persistent.representative(true).cloned();
    let rep_minus = persistent.representative(false).cloned();
    report.candidates_plus = persistent.plus.iter().map(to_f64_candidate).collect();
    report.candidates_minus = persistent.minus.iter().map(to_f64_candidate).collect();
    let dp = rep_plus.as_ref().map(|c| nearest_distances(lift, &c.point));
    let dm = rep_minus.as_ref().map(|c| nearest_distances(lift, &c.point));
    report.distances = (0..lift.time_len())
        .map(|i| {
            (
                dp.as_ref().map_or(f64::NAN, |d| d[i]),
                dm.as_ref().map_or(f64::NAN, |d| d[i]),
            )
        })
        .collect();
    report.p_plus = rep_plus.as_ref().map(|c| to_f64_candidate(c).point);
    report.p_minus = rep_minus.as_ref().map(|c| to_f64_candidate(c).point);
    report.drift = Drift {
        plus: rep_plus.as_ref().map(|c| c.drift.as_f64()),
        minus: rep_minus.as_ref().map(|c| c.drift.as_f64()),
    };

    let ctx = ProbeContext {
        lift,
        hamiltonian,
        h: &h,
    };
    let outcome = descent_search(&ctx, &tol, opts.budget)?;
    report.probes = outcome.summaries;
    let best = outcome.best.map(|i| report.probes[i].clone());
    let descends = best.as_ref().is_some_and(|b| b.decrease > tol.tol_probe);
    if descends {
        report.certificate = best.clone();
    }
    let mut reasons = Vec::new();
    if rep_plus.is_none() {
        reasons.push("no persistent maximum point".to_string());
    }
    if rep_minus.is_none() {
        reasons.push("no persistent minimum point".to_string());
    }
    if let Some(b) = best.as_ref().filter(|_| descends) {
        reasons.push(format!(
            "probe {} lowers the length by {:e} > tol_probe = {:e} at s = {}",
            b.id, b.decrease, tol.tol_probe, b.s_star
        ));
    }
    if reasons.is_empty() {
        report.verdict = Verdict::Critical;
        report.reason = format!(
            "persistent extremal points on both sides; no probe among {} lowers the length by more than tol_probe",
            report.probes.len()
        );
    } else {
        report.verdict = Verdict::NonCritical;
        report.reason = reasons.join("; ");
    }
    Ok(report)
}
