use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use super::report::{run_scenario, OracleDeltas, ScenarioReport};
use super::ScenarioConfig;
use crate::error::Result;
use crate::flow::{exact_flow_projective_rotation, integrate_path, HamiltonianSpec, Support};
use crate::geom::{ManifoldKind, Point};
use crate::lagr::{LagrangianMesh, ModelGrid, ModelTag, PathLift};

/// A scenario's path and Hamiltonian before any analysis.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: ScenarioConfig,
    pub lift: PathLift<f64>,
    pub hamiltonian: HamiltonianSpec<f64>,
    pub expected_length: Option<f64>,
    pub oracle: OracleDeltas,
    pub notes: Vec<String>,
}

/// Build the path of `cfg.scenario`.
pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    match cfg.scenario.as_str() {
        "projective-rotation" => projective_rotation(&cfg),
        "torus-graph" => torus_graph(&cfg),
        "translated-circle" => translation(&cfg, 1.0, false),
        "disjoint-endpoints" => translation(&cfg, 2.0 + cfg.gap, false),
        "accelerated-translation" => translation(&cfg, 1.0, true),
        other => unreachable!("validated scenario id {other}"),
    }
}

pub fn scenario_projective_rotation(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    run_scenario(&ScenarioConfig {
        scenario: "projective-rotation".into(),
        ..cfg.clone()
    })
}

pub fn scenario_torus_graph(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    run_scenario(&ScenarioConfig {
        scenario: "torus-graph".into(),
        ..cfg.clone()
    })
}

pub fn scenario_translated_circle(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    run_scenario(&ScenarioConfig {
        scenario: "translated-circle".into(),
        ..cfg.clone()
    })
}

pub fn scenario_disjoint_endpoints(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    run_scenario(&ScenarioConfig {
        scenario: "disjoint-endpoints".into(),
        ..cfg.clone()
    })
}

pub fn scenario_accelerated_translation(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    run_scenario(&ScenarioConfig {
        scenario: "accelerated-translation".into(),
        ..cfg.clone()
    })
}

/// `H([z]) = −s Σ_{1≤j≤k} |z_j|² / (2|z|²)` with its gradient and exact flow.
pub fn projective_rotation_hamiltonian(n: usize, k: usize, s: f64) -> HamiltonianSpec<f64> {
    let top = move |z: &[f64]| z[2..2 + 2 * k].iter().map(|x| x * x).sum::<f64>();
    HamiltonianSpec::new(format!("projective rotation n={n} k={k} s={s}"), move |_, z: &[f64]| {
        -s * top(z) / (2.0 * z.iter().map(|x| x * x).sum::<f64>())
    })
    .with_gradient(move |_, z: &[f64]| {
        let r2: f64 = z.iter().map(|x| x * x).sum();
        let a = top(z);
        z.iter()
            .enumerate()
            .map(|(i, x)| {
                let pz = if (2..2 + 2 * k).contains(&i) { *x } else { 0.0 };
                -s * (pz - a * x / r2) / r2
            })
            .collect()
    })
    .with_exact_flow(move |t, z: &[f64]| {
        let p = Point { coords: z.to_vec() };
        exact_flow_projective_rotation(n, k, s, t, &p).map_or_else(|_| z.to_vec(), |q| q.coords)
    })
}

fn projective_rotation(cfg: &ScenarioConfig) -> Result<Prepared> {
    let (n, k, s) = (cfg.n, cfg.k, cfg.s);
    let kind = ManifoldKind::Projective { n };
    let mesh = cfg.mesh.unwrap_or(512);
    let mut notes = vec![
        "maxset of H over CP^n is CP^(n-k) and minset CP^(k-1); restricted to L_t = RP^n these become RP^(n-k) and RP^(k-1), which the verdict tests".into(),
        "the additive constant of H is dropped; shifts by c(t) change no verdict".into(),
    ];
    let (tag, embed): (ModelTag, fn(&[f64]) -> Vec<f64>) = if n == 1 {
        (ModelTag::ProjectiveLine { m: mesh, phase: cfg.phase }, |c| vec![c[0], 0.0, c[1], 0.0])
    } else {
        if cfg.phase != 0.0 {
            notes.push("phase offsets apply to circle grids only; RP^2 grid unchanged".into());
        }
        (
            ModelTag::ProjectivePlane {
                m_theta: mesh / 4,
                m_phi: mesh,
            },
            // pole → [0:1:0], equator → {z1 = 0}
            |c| vec![c[0], 0.0, c[2], 0.0, c[1], 0.0],
        )
    };
    let grid = Arc::new(ModelGrid::from_tag(&tag)?);
    let l0 = LagrangianMesh::embed(kind, grid, embed)?;
    let h = projective_rotation_hamiltonian(n, k, s);
    let lift = integrate_path(kind, &h, &l0, &cfg.tgrid(), &cfg.flow())?;
    let mut flow_err = 0.0f64;
    for (t, m) in lift.tgrid().iter().zip(lift.meshes()) {
        for (p, q) in l0.images().iter().zip(m.images()) {
            let exact = exact_flow_projective_rotation(n, k, s, *t, p)?;
            flow_err = flow_err.max(kind.distance(&exact, q)?);
        }
    }
    let mut oracle = OracleDeltas {
        flow_max_distance: Some(flow_err),
        ..OracleDeltas::default()
    };
    if s == 1.0 {
        let last = lift.mesh(lift.time_len() - 1);
        let closure = last
            .images()
            .iter()
            .map(|p| l0.nearest_node(&p.coords).1)
            .fold(0.0, f64::max);
        oracle.loop_closure = Some(closure);
        notes.push("s = 1: L_1 = L_0, the path is a loop".into());
    }
    Ok(Prepared {
        config: cfg.clone(),
        lift,
        hamiltonian: h,
        expected_length: Some(s / 2.0),
        oracle,
        notes,
    })
}

fn torus_graph(cfg: &ScenarioConfig) -> Result<Prepared> {
    let a = cfg.amplitude;
    let kind = ManifoldKind::Torus { n: 1 };
    let grid = Arc::new(ModelGrid::from_tag(&ModelTag::Circle {
        m: cfg.mesh.unwrap_or(512),
        phase: cfg.phase,
    })?);
    let l0 = LagrangianMesh::embed(kind, grid, |c| vec![c[1].atan2(c[0]) / TAU, 0.0])?;
    let h = HamiltonianSpec::new(format!("a cos(2 pi x)/(2 pi), a={a}"), move |_, p: &[f64]| {
        a * (TAU * p[0]).cos() / TAU
    })
    .with_gradient(move |_, p: &[f64]| vec![-a * (TAU * p[0]).sin(), 0.0])
    .with_exact_flow(move |t, p: &[f64]| vec![p[0], (p[1] + t * a * (TAU * p[0]).sin()).rem_euclid(1.0)]);
    let lift = integrate_path(kind, &h, &l0, &cfg.tgrid(), &cfg.flow())?;
    let oracle = OracleDeltas {
        flow_max_distance: Some(exact_flow_delta(&lift, &l0, &h)?),
        ..OracleDeltas::default()
    };
    Ok(Prepared {
        config: cfg.clone(),
        lift,
        hamiltonian: h,
        expected_length: Some(a / PI),
        oracle,
        notes: vec![
            "L_t is the graph of t a sin(2 pi x); the critical points x = 0 (max of f) and x = 1/2 (min) are fixed by the flow".into(),
        ],
    })
}

/// Smooth cutoff: 1 for `r ≤ inner`, 0 for `r ≥ outer`, quintic in between.
pub fn window(r: f64, inner: f64, outer: f64) -> (f64, f64) {
    if r <= inner {
        return (1.0, 0.0);
    }
    if r >= outer {
        return (0.0, 0.0);
    }
    let w = outer - inner;
    let x = (r - inner) / w;
    let step = x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
    let dstep = 30.0 * x * x * (1.0 - x) * (1.0 - x) / w;
    (1.0 - step, -dstep)
}

/// Unit circle under `H = D x` (or `e^t x` when `accelerated`), cut off far
/// from the swept region so `H` has compact support.
fn translation(cfg: &ScenarioConfig, distance: f64, accelerated: bool) -> Result<Prepared> {
    let kind = ManifoldKind::Euclidean { n: 1 };
    let grid = Arc::new(ModelGrid::from_tag(&ModelTag::Circle {
        m: cfg.mesh.unwrap_or(512),
        phase: cfg.phase,
    })?);
    let l0 = LagrangianMesh::embed(kind, grid, |c| c.to_vec())?;
    let inner = 2.0 * distance + 8.0;
    let outer = inner + 2.0;
    let speed = move |t: f64| if accelerated { t.exp() } else { distance };
    let label = if accelerated {
        "e^t x (windowed)".to_string()
    } else {
        format!("{distance} x (windowed)")
    };
    let h = HamiltonianSpec::new(label, move |t, p: &[f64]| {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        speed(t) * p[0] * window(r, inner, outer).0
    })
    .with_gradient(move |t, p: &[f64]| {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let (w, dw) = window(r, inner, outer);
        let c = speed(t);
        if dw == 0.0 {
            return vec![c * w, 0.0];
        }
        vec![c * (w + p[0] * dw * p[0] / r), c * p[0] * dw * p[1] / r]
    })
    .with_exact_flow(move |t, p: &[f64]| {
        let shift = if accelerated { t.exp() - 1.0 } else { distance * t };
        vec![p[0], p[1] - shift]
    })
    .with_support(Support::Compact { radius: outer });
    let lift = integrate_path(kind, &h, &l0, &cfg.tgrid(), &cfg.flow())?;
    let mut oracle = OracleDeltas {
        flow_max_distance: Some(exact_flow_delta(&lift, &l0, &h)?),
        ..OracleDeltas::default()
    };
    let mut notes = Vec::new();
    let expected = if accelerated { 2.0 * (1f64.exp() - 1.0) } else { 2.0 * distance };
    if distance > 2.0 {
        let last = lift.mesh(lift.time_len() - 1);
        let gap = last
            .images()
            .iter()
            .map(|p| l0.nearest_node(&p.coords).1)
            .fold(f64::INFINITY, f64::min);
        oracle.endpoint_gap = Some(gap);
        notes.push(
            "L_0 and L_1 are disjoint. A critical path needs p_+ in every L_t, so in L_0 and L_1 at once; hence no exact path between them is critical".into(),
        );
    }
    Ok(Prepared {
        config: cfg.clone(),
        lift,
        hamiltonian: h,
        expected_length: Some(expected),
        oracle,
        notes,
    })
}

fn exact_flow_delta(lift: &PathLift<f64>, l0: &LagrangianMesh<f64>, h: &HamiltonianSpec<f64>) -> Result<f64> {
    let kind = lift.kind();
    let mut worst = 0.0f64;
    for (t, m) in lift.tgrid().iter().zip(lift.meshes()) {
        for (p, q) in l0.images().iter().zip(m.images()) {
            if let Some(e) = h.exact(*t, &p.coords) {
                worst = worst.max(kind.distance(&kind.point(e)?, q)?);
            }
        }
    }
    Ok(worst)
}
