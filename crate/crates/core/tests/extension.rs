use hoferlab::crit::Tolerances;
use hoferlab::extend::{
    extension_extrema_check, normalize_for_extension, sample_cloud, tubular_extension, BumpProfile, PathExtension,
};
use hoferlab::hofer::hofer_norm;
use hoferlab::lagr::{associated_function_from_h, AssociatedFunction, PathLift};
use hoferlab::scenarios::{prepare, ScenarioConfig};

fn light(id: &str) -> ScenarioConfig {
    ScenarioConfig {
        mesh: Some(128),
        tsamples: 101,
        ..ScenarioConfig::new(id)
    }
}

#[test]
fn ambient_extrema_equal_restricted_extrema_along_paths() {
    for id in ["translated-circle", "torus-graph", "accelerated-translation"] {
        let p = prepare(&light(id)).unwrap();
        let h = associated_function_from_h(&p.lift, &p.hamiltonian);
        let ext = PathExtension::new(&p.lift, &h, 10).unwrap();
        let idx: Vec<usize> = (0..p.lift.time_len()).step_by(10).collect();
        assert_eq!(ext.breaks().len(), idx.len());
        let sub = PathLift::new(
            idx.iter().map(|&i| p.lift.tgrid()[i]).collect(),
            idx.iter().map(|&i| p.lift.mesh(i).clone()).collect(),
        )
        .unwrap();
        let normalized =
            AssociatedFunction::raw(idx.iter().map(|&i| normalize_for_extension(h.slice(i)).values).collect());
        let from_ext = associated_function_from_h(&sub, &ext.into_hamiltonian());
        let a = hofer_norm(&normalized, sub.tgrid()).unwrap();
        let b = hofer_norm(&from_ext, sub.tgrid()).unwrap();
        assert!((a - b).abs() <= 1e-12, "{id}: {a} vs {b}");
        let c = hofer_norm(&h, p.lift.tgrid()).unwrap();
        assert!((a - c).abs() <= 1e-2 * c, "{id}: normalization keeps oscillation");
    }
}

#[test]
fn extrema_survive_on_clouds() {
    let p = prepare(&light("torus-graph")).unwrap();
    let h = associated_function_from_h(&p.lift, &p.hamiltonian);
    let tol = Tolerances::for_path(&p.lift, &h).unwrap();
    for ti in [0, 60] {
        let mesh = p.lift.mesh(ti);
        let eps = 0.9 * mesh.mesh_separation().unwrap();
        let n = normalize_for_extension(h.slice(ti));
        let ext = tubular_extension(mesh, &n.values, BumpProfile::new(eps).unwrap()).unwrap();
        let cloud = sample_cloud(mesh, eps, 20_000, 1);
        let chk = extension_extrema_check(&ext, &cloud, tol.tol_geo);
        assert!(chk.passed(), "{chk:?}");
        for (i, v) in n.values.iter().enumerate() {
            assert_eq!(ext.eval(&mesh.image(i).coords), *v);
        }
    }
}
