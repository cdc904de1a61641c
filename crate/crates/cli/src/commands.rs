use std::fs;
use std::io::BufWriter;

use anyhow::{bail, Context, Result};
use declat::audit::{faults, run_audit, AuditBundle};
use declat::dof::{dof_audit, hodge_correspondence};
use declat::hodge::{assemble_hodge, HodgeKind};
use declat::maxwell::{
    build_operators, compare_inverse_modes, deterministic_vector, eigenmodes, relative_drift_slope, simulate as run_leapfrog,
    stable_timestep, trace_csv, DiscreteCodifferential, FieldState, InverseMode,
};
use declat::mesh::{classify_boundary, incidence, write_mesh};
use declat::pic::{conservation_study, trace_csv as particle_csv, trace_particle, Particle};
use declat::pml::{reflection_sweep, sweep_csv, SweepRow, Waveguide};
use declat::whitney::{de_rham, AnalyticForm};
use declat::Error;
use nalgebra::Vector3;
use serde_json::json;

use crate::input::{builtin, emit, materials, resolve_mesh};
use crate::{AssembleArgs, AuditArgs, DofArgs, EigenArgs, GenmeshArgs, PicArgs, PmlArgs, SimulateArgs};

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

pub fn audit(args: AuditArgs) -> Result<bool> {
    let loaded = resolve_mesh(&args.mesh.mesh).and_then(|c| {
        let m = materials(&args.mesh, &c)?;
        Ok(AuditBundle::build(c, &m)?)
    });
    let mut bundle = match loaded {
        Ok(b) => b,
        Err(err) => {
            // an unreadable or invalid mesh is itself a failed check
            let report = json!({
                "schema": "declat.audit/1",
                "pass": false,
                "failed_checks": ["mesh_load"],
                "error": format!("{err:#}"),
            });
            let text = if args.json { pretty(&report) } else { format!("[mesh_load] FAIL\n  {err:#}\n\noverall: FAIL\n") };
            emit(args.out.as_deref(), &text)?;
            return Ok(false);
        }
    };
    if let Some(kind) = &args.inject {
        if !inject(&mut bundle, kind)? {
            bail!("could not inject fault '{kind}' into this mesh");
        }
    }
    let report = run_audit(&bundle)?;
    let text = if args.json {
        let mut s = report.to_json();
        s.push('\n');
        s
    } else {
        report.to_text()
    };
    emit(args.out.as_deref(), &text)?;
    Ok(report.pass)
}

fn inject(bundle: &mut AuditBundle, kind: &str) -> Result<bool> {
    let cls = bundle.classification.clone();
    let interior_pair = || {
        cls.interior(2).into_iter().find_map(|f| {
            bundle.primal[1]
                .row(f)
                .iter()
                .find(|&&(e, _)| !cls.is_boundary(1, e))
                .map(|&(e, _)| (f, e))
        })
    };
    Ok(match kind {
        "sign-flip" => {
            let (r, c) = bundle.primal[0].row(0).first().map(|&(c, _)| (0, c)).context("mesh has no edges")?;
            faults::flip_incidence_sign(bundle, 0, r, c)
        }
        "non-transpose" => {
            let (f, e) = interior_pair().context("non-transpose fault needs an interior edge")?;
            faults::break_dual_transpose(bundle, 1, e, f)
        }
        "asymmetric-hodge" => {
            let j = bundle.h_eps.row(0).find(|&(c, _)| c != 0).map(|(c, _)| c).context("Hodge row 0 has no off-diagonal")?;
            let scale = bundle.h_eps.get(0, 0).abs() * 1e-6;
            faults::make_hodge_asymmetric(bundle, 0, j, scale)
        }
        "indefinite-hodge" => faults::make_hodge_indefinite(bundle, 0),
        other => bail!("unknown fault '{other}' (sign-flip, non-transpose, asymmetric-hodge, indefinite-hodge)"),
    })
}

pub fn assemble(args: AssembleArgs) -> Result<bool> {
    let complex = resolve_mesh(&args.mesh.mesh)?;
    let mats = materials(&args.mesh, &complex)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let write = |name: &str, m: &declat::sparse::CsrMatrix<f64>| -> Result<()> {
        let path = args.out.join(name);
        let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        m.write_coo(BufWriter::new(file))?;
        Ok(())
    };
    for p in 0..3 {
        write(&format!("incidence_c{p}.coo"), &incidence(&complex, p).to_csr())?;
    }
    let mut summary = Vec::new();
    for (kind, file) in [(HodgeKind::Epsilon, "hodge_eps.coo"), (HodgeKind::MuInv, "hodge_mu_inv.coo")] {
        let h = assemble_hodge(&complex, &mats, kind)?;
        write(file, &h.matrix)?;
        summary.push(json!({
            "kind": kind.name(),
            "file": file,
            "nnz": h.matrix.nnz(),
            "symmetry_deviation": h.matrix.symmetry_deviation(),
        }));
    }
    let report = json!({
        "schema": "declat.assemble/1",
        "units": {"hodge_eps": "eps_r * m", "hodge_mu_inv": "1 / (mu_r * m)", "incidence": "dimensionless"},
        "counts": complex.counts(),
        "hodge": summary,
    });
    fs::write(args.out.join("assemble.json"), pretty(&report))?;
    Ok(true)
}

pub fn simulate(args: SimulateArgs) -> Result<bool> {
    let complex = resolve_mesh(&args.mesh.mesh)?;
    let mats = materials(&args.mesh, &complex)?;
    let cls = if args.no_pec { None } else { Some(classify_boundary(&complex)?) };
    let ops = build_operators(&complex, &mats, cls.as_ref())?;
    let mode: InverseMode = args.hodge_inverse.parse()?;
    let codiff = DiscreteCodifferential::new(&ops, mode)?;
    let bound = stable_timestep(&ops, &codiff)?;
    let dt = args.dt.unwrap_or(args.cfl * bound.dt_max);
    if !(dt > 0.0 && dt.is_finite()) {
        bail!("time step must be positive and finite, got {dt}");
    }
    if dt > bound.dt_max && !args.force {
        return Err(Error::UnstableTimestep { dt, bound: bound.dt_max }).context("pass --force to run anyway");
    }
    let e0 = match args.init.as_str() {
        "zero" => vec![0.0; ops.n_edges()],
        "random" => deterministic_vector(ops.n_edges(), args.seed),
        other => bail!("unknown initial condition '{other}' (zero or random)"),
    };
    let start = FieldState::initial(&ops, e0, vec![0.0; ops.n_faces()], dt)?;
    let run = run_leapfrog(&ops, &codiff, start.clone(), args.steps, None)?;
    emit(args.out.as_deref(), &trace_csv(&run.trace))?;

    if let Some(path) = &args.summary {
        let comparison = match mode {
            InverseMode::Exact => None,
            InverseMode::Spai { .. } => {
                let exact = DiscreteCodifferential::new(&ops, InverseMode::Exact)?;
                Some(compare_inverse_modes(&ops, &exact, &codiff, &start, args.steps)?)
            }
        };
        let max_div_b = run.trace.iter().map(|r| r.div_b_residual).fold(0.0, f64::max);
        let summary = json!({
            "schema": "declat.simulate/1",
            "units": {"dt": "s", "energy": "J"},
            "steps": args.steps,
            "dt": dt,
            "stability_bound": bound.dt_max,
            "hodge_inverse": args.hodge_inverse,
            "spai_residual": codiff.spai_residual,
            "relative_drift_slope": relative_drift_slope(&run.trace),
            "max_div_b_residual": max_div_b,
            "comparison_with_exact": comparison,
        });
        emit(Some(path), &pretty(&summary))?;
    }
    Ok(true)
}

pub fn eigen(args: EigenArgs) -> Result<bool> {
    let complex = resolve_mesh(&args.mesh.mesh)?;
    let mats = materials(&args.mesh, &complex)?;
    let cls = classify_boundary(&complex)?;
    let ops = build_operators(&complex, &mats, Some(&cls))?;
    let report = eigenmodes(&ops, args.count, args.shift)?;
    let out = json!({
        "schema": "declat.eigen/1",
        "units": {"eigenvalues": "k^2 in 1/m^2"},
        "interior_nodes": cls.interior_count(0),
        "interior_edges": cls.interior_count(1),
        "report": report,
    });
    emit(args.out.as_deref(), &pretty(&out))?;
    Ok(true)
}

pub fn dof(args: DofArgs) -> Result<bool> {
    let complex = resolve_mesh(&args.mesh)?;
    let cls = classify_boundary(&complex)?;
    let eigen = if args.eigen {
        let ops = build_operators(&complex, &declat::hodge::MaterialMap::vacuum(&complex), Some(&cls))?;
        Some(eigenmodes(&ops, 1, None)?)
    } else {
        None
    };
    let report = dof_audit(&complex, &cls, eigen.as_ref())?;
    let table = hodge_correspondence(&complex)?;
    let pass = report.pass && table.balanced;
    let out = json!({
        "schema": "declat.dof/1",
        "units": "counts",
        "report": report,
        "correspondence": table,
        "pass": pass,
    });
    emit(args.out.as_deref(), &pretty(&out))?;
    Ok(pass)
}

/// Profiles for `pml --sweep`: strength at unit thickness, then thickness
/// at fixed strength.
pub const SWEEP_STRENGTHS: [f64; 8] = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
pub const SWEEP_THICKNESSES: [f64; 4] = [0.25, 0.5, 1.0, 1.5];

pub fn pml(args: PmlArgs) -> Result<bool> {
    let guide = Waveguide { h: args.h, ..Waveguide::default() };
    let profiles: Vec<(f64, f64)> = if args.sweep {
        SWEEP_STRENGTHS
            .iter()
            .map(|&w| (w, 1.0))
            .chain(SWEEP_THICKNESSES.iter().map(|&l| (4.0, l)))
            .collect()
    } else {
        vec![(args.omega_max, args.thickness)]
    };
    let rows: Vec<SweepRow> = reflection_sweep(&guide, args.omega, &profiles)?;
    emit(args.out.as_deref(), &sweep_csv(&rows))?;
    Ok(true)
}

pub fn pic(args: PicArgs) -> Result<bool> {
    let complex = resolve_mesh(&args.mesh)?;
    let c0 = incidence(&complex, 0);
    let report = conservation_study(&complex, &c0, args.paths, args.seed, args.charge, args.tau)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    emit(args.out.as_deref(), &text)?;
    if let Some(path) = &args.trace {
        let e = de_rham(&AnalyticForm::one_form(|_| Vector3::new(0.0, 0.0, 0.1)), &complex, 1)?.values;
        let b = de_rham(&AnalyticForm::two_form(|_| Vector3::new(0.0, 0.0, 5.0)), &complex, 2)?.values;
        let (lo, hi) = complex.bounds();
        let center = (lo + hi) * 0.5;
        let p = Particle::new(args.charge, 1.0, center, Vector3::new(0.05, 0.0, 0.0))?;
        let rows = trace_particle(&complex, &e, &b, p, 0.01, args.trace_steps)?;
        emit(Some(path), &particle_csv(&rows))?;
    }
    Ok(report.pass)
}

pub fn genmesh(args: GenmeshArgs) -> Result<bool> {
    let complex = builtin(&args.kind)?.with_context(|| format!("unknown built-in mesh '{}'", args.kind))?;
    emit(Some(&args.out), &write_mesh(&complex))?;
    Ok(true)
}
