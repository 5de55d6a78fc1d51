use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::builders::{prepare, Prepared};
use super::ScenarioConfig;
use crate::crit::{
    evaluate_probe, quasi_autonomy_verdict, rebuild_probe, CriticalityReport, ProbeContext, Verdict, VerdictOptions,
};
use crate::error::{Error, Result};
use crate::flow::advance_mesh;
use crate::hofer::{hofer_length, LengthBreakdown};
use crate::lagr::associated_function_from_h;

const MEMBERSHIP_POINTS: usize = 10;

/// Distances between the computed path and closed-form expectations.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleDeltas {
    /// Largest distance between integrated and exact node positions.
    pub flow_max_distance: Option<f64>,
    /// Largest distance from a node of `L_1` to `L_0`.
    pub loop_closure: Option<f64>,
    /// Smallest distance from a node of `L_1` to `L_0`.
    pub endpoint_gap: Option<f64>,
    /// `|total − expected|`.
    pub length_error: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelfChecks {
    pub length_matches_norm: f64,
    pub certificate_replay: Option<f64>,
    pub certificate_membership: Option<f64>,
    /// Largest `max_L H − H(p_+)` and `H(p_−) − min_L H` at midpoint times.
    pub midpoint_soundness: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub config: ScenarioConfig,
    pub hamiltonian: String,
    pub length: LengthBreakdown,
    pub expected_length: Option<f64>,
    pub criticality: CriticalityReport,
    pub oracle: OracleDeltas,
    pub self_checks: SelfChecks,
    pub notes: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl ScenarioReport {
    pub fn verdict(&self) -> Verdict {
        self.criticality.verdict
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Build, measure and classify a scenario, then verify the report.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let start = Instant::now();
    let prepared = prepare(cfg)?;
    analyse(prepared, start)
}

fn analyse(p: Prepared, start: Instant) -> Result<ScenarioReport> {
    let Prepared {
        config,
        lift,
        hamiltonian,
        expected_length,
        mut oracle,
        notes,
    } = p;
    let length = hofer_length(&lift, &hamiltonian)?;
    let crit = quasi_autonomy_verdict(&lift, &hamiltonian, &VerdictOptions { budget: config.budget })?;
    oracle.length_error = expected_length.map(|e| (length.total - e).abs());

    let mut checks = SelfChecks {
        length_matches_norm: (length.total - crit.hofer_norm).abs(),
        ..SelfChecks::default()
    };
    if checks.length_matches_norm > 1e-12 * length.total.max(1.0) {
        return Err(Error::SelfCheck(format!(
            "length {} differs from the verdict's norm {}",
            length.total, crit.hofer_norm
        )));
    }

    let h = associated_function_from_h(&lift, &hamiltonian);
    let ctx = ProbeContext {
        lift: &lift,
        hamiltonian: &hamiltonian,
        h: &h,
    };
    if let Some(cert) = &crit.certificate {
        let probe = rebuild_probe(&ctx, &cert.id, &cert.descriptor)?;
        let replay = evaluate_probe(&ctx, &probe)?;
        let diff = (replay.decrease - cert.decrease).abs();
        checks.certificate_replay = Some(diff);
        if diff > 1e-9 {
            return Err(Error::SelfCheck(format!("certificate {} replays to a different decrease ({diff:e})", cert.id)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let kind = lift.kind();
        let points: Vec<Vec<f64>> = (0..MEMBERSHIP_POINTS)
            .map(|_| {
                let ti = rng.gen_range(0..lift.time_len());
                let ni = rng.gen_range(0..lift.node_len());
                let base = &lift.mesh(ti).image(ni).coords;
                let jitter: Vec<f64> = base.iter().map(|x| x + rng.gen_range(-0.05..0.05)).collect();
                kind.normalize_coords(jitter)
            })
            .collect();
        let residual = probe.membership_residual(&points);
        checks.certificate_membership = Some(residual);
        if residual > crate::crit::MEMBERSHIP_TOL {
            return Err(Error::SelfCheck(format!("certificate {} has time mean {residual:e}", cert.id)));
        }
    }

    if crit.verdict == Verdict::Critical {
        let worst = midpoint_soundness(&lift, &hamiltonian, &config, &crit)?;
        checks.midpoint_soundness = Some(worst);
        if worst > 2.0 * crit.tolerances.tol_val {
            return Err(Error::SelfCheck(format!(
                "extremal points lose extremality between samples ({worst:e})"
            )));
        }
    }

    Ok(ScenarioReport {
        scenario: config.scenario.clone(),
        hamiltonian: hamiltonian.label().to_string(),
        config,
        length,
        expected_length,
        criticality: crit,
        oracle,
        self_checks: checks,
        notes,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

fn midpoint_soundness(
    lift: &crate::lagr::PathLift<f64>,
    h: &crate::flow::HamiltonianSpec<f64>,
    cfg: &ScenarioConfig,
    crit: &CriticalityReport,
) -> Result<f64> {
    let (Some(pp), Some(pm)) = (&crit.p_plus, &crit.p_minus) else {
        return Ok(0.0);
    };
    let mut worst = 0.0f64;
    for i in 0..lift.time_len() - 1 {
        let (t0, t1) = (lift.tgrid()[i], lift.tgrid()[i + 1]);
        let tm = 0.5 * (t0 + t1);
        let mesh = advance_mesh(h, lift.mesh(i), t0, tm, &cfg.flow())?;
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for p in mesh.images() {
            let v = h.eval(tm, &p.coords);
            hi = hi.max(v);
            lo = lo.min(v);
        }
        worst = worst.max(hi - h.eval(tm, pp)).max(h.eval(tm, pm) - lo);
    }
    Ok(worst)
}

/// Write `report.json`, `length.csv`, `probes.csv` and `extrema.csv`.
pub fn write_outputs(report: &ScenarioReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report.to_json()?)?;
    std::fs::write(dir.join("length.csv"), report.length.to_csv())?;
    std::fs::write(dir.join("probes.csv"), report.criticality.probes_csv())?;
    std::fs::write(dir.join("extrema.csv"), report.criticality.extrema_csv())?;
    Ok(())
}
