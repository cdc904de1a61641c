use std::path::Path;
use std::process::{Command, Output};

fn declat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_declat")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn audit_passes_on_shipped_mesh_file() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("cube.mesh");
    let gen = declat(&["genmesh", "--kind", "kuhn-cube", "--out", mesh.to_str().unwrap()]);
    assert!(gen.status.success());
    let out = declat(&["audit", "--mesh", mesh.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("overall: PASS"));
}

#[test]
fn corrupted_mesh_fails_with_named_check() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("bad.mesh");
    std::fs::write(&mesh, "declat-mesh 1\nvertices 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\ntets 1\n0 1 2 7\n").unwrap();
    let out = declat(&["audit", "--mesh", mesh.to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["pass"], false);
    assert_eq!(v["failed_checks"][0], "mesh_load");
}

#[test]
fn injected_faults_fail_their_section() {
    for (fault, section) in [
        ("sign-flip", "first_kind"),
        ("non-transpose", "second_kind"),
        ("asymmetric-hodge", "hodge"),
        ("indefinite-hodge", "hodge"),
    ] {
        let out = declat(&["audit", "--mesh", "box:2", "--json", "--inject", fault]);
        assert_eq!(out.status.code(), Some(1), "{fault}");
        let v = json(&out);
        let failed: Vec<&str> = v["sections"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|s| s["pass"] == false)
            .map(|s| s["name"].as_str().unwrap())
            .collect();
        assert_eq!(failed, vec![section], "{fault}");
    }
}

#[test]
fn audit_output_is_byte_identical_across_runs() {
    let a = declat(&["audit", "--mesh", "annulus:8:1:1", "--json"]);
    let b = declat(&["audit", "--mesh", "annulus:8:1:1", "--json"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn dof_on_single_tet_is_zero() {
    let out = declat(&["dof", "--mesh", "single-tet"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["report"]["theta_e"], 0);
    assert_eq!(v["report"]["theta_b"], 0);
    assert_eq!(v["schema"], "declat.dof/1");
}

#[test]
fn dof_annulus_with_eigen_cross_check() {
    let out = declat(&["dof", "--mesh", "annulus:8:1:1", "--eigen"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let v = json(&out);
    assert_eq!(v["report"]["harmonic_dimension"], 1);
    assert_eq!(v["report"]["eigen"]["holds"], true);
}

#[test]
fn zero_run_gives_all_zero_trace() {
    let out = declat(&["simulate", "--mesh", "kuhn-cube", "--steps", "20", "--init", "zero", "--no-pec"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("# time in s"));
    for line in text.lines().skip(2) {
        let fields: Vec<f64> = line.split(',').skip(2).map(|x| x.parse().unwrap()).collect();
        assert!(fields.iter().all(|&x| x == 0.0), "{line}");
    }
}

#[test]
fn source_free_run_stays_bounded() {
    let out = declat(&["simulate", "--mesh", "box:3", "--steps", "300"]);
    assert!(out.status.success());
    let h: Vec<f64> = stdout(&out).lines().skip(2).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    let (lo, hi) = h.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    assert!((hi - lo) <= 1e-10 * hi);
}

#[test]
fn oversized_step_is_refused_without_force() {
    let refused = declat(&["simulate", "--mesh", "kuhn-cube", "--steps", "5", "--dt", "10"]);
    assert_eq!(refused.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("--force"));
    let forced = declat(&["simulate", "--mesh", "kuhn-cube", "--steps", "5", "--dt", "10", "--force"]);
    assert!(forced.status.success() || forced.status.code() == Some(2));
}

#[test]
fn spai_run_reports_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("summary.json");
    let out = declat(&[
        "simulate", "--mesh", "box:3", "--steps", "50", "--hodge-inverse", "spai:3", "--summary",
        summary.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    let cmp = &v["comparison_with_exact"];
    assert!(cmp["residual"].as_f64().unwrap() > 0.0);
    assert_eq!(cmp["within_envelope"], true);
}

#[test]
fn pml_sweep_table_is_monotone_in_strength() {
    let out = declat(&["pml", "--sweep"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().nth(1).unwrap() == "omega,omega_max_profile,thickness,reflection_mag");
    let r: Vec<f64> = text.lines().skip(2).take(6).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
}

#[test]
fn pic_conservation_meets_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let out = declat(&["pic", "--paths", "10000", "--seed", "7", "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["max_relative_residual"].as_f64().unwrap() <= 1e-12);
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(csv.lines().nth(1), Some("step,x,y,z,vx,vy,vz"));
    let again = declat(&["pic", "--paths", "10000", "--seed", "7"]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn assemble_writes_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let out = declat(&["assemble", "--mesh", "kuhn-cube", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    for f in ["incidence_c0.coo", "incidence_c1.coo", "incidence_c2.coo", "hodge_eps.coo", "hodge_mu_inv.coo", "assemble.json"] {
        assert!(Path::new(&dir.path().join(f)).is_file(), "{f}");
    }
}

#[test]
fn eigen_reports_zero_mode_count() {
    let out = declat(&["eigen", "--mesh", "box:3", "--count", "3"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["report"]["zero_count"], v["interior_nodes"]);
}

#[test]
fn unknown_mesh_is_an_error() {
    let out = declat(&["dof", "--mesh", "no-such-mesh"]);
    assert_eq!(out.status.code(), Some(2));
}
