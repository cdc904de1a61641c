//! Acceptance harness: one line per criterion, PASS or FAIL, with the
//! measured quantities. Failures are reported rather than hidden; set
//! `DECLAT_ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit status.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use declat::audit::{faults, run_audit, AuditBundle};
use declat::dof::dof_audit;
use declat::hodge::{assemble_hodge, check_spd, dual_pairing_check, spai_inverse, HodgeKind, MaterialMap, SparsityPattern};
use declat::maxwell::{
    build_operators, compare_inverse_modes, deterministic_vector, eigenmodes, relative_drift_slope, simulate,
    stable_timestep, DiscreteCodifferential, FieldState, InverseMode,
};
use declat::mesh::topology::incidence_rank;
use declat::mesh::{barycentric_dual, betti_numbers, classify_boundary, euler_audit, generate, incidences, SimplicialComplex};
use declat::pic::{conservation_study, verify_conservation};
use declat::pml::{
    assemble_stretched, harmonic_solve, harmonic_solve_real, reflection_sweep, HarmonicOperators, StretchProfile, Waveguide,
};
use declat::whitney::{barycentric, de_rham, interpolate, verify_coboundary, verify_partition_duality, AnalyticForm};
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

type Verdict = Result<(bool, String), String>;

fn shipped_meshes() -> Vec<(String, SimplicialComplex)> {
    let mut v = vec![
        ("single-tet".to_string(), generate::single_tet()),
        ("kuhn-cube".to_string(), generate::kuhn_cube()),
    ];
    for n in 1..=6 {
        v.push((format!("box:{n}"), generate::box_mesh(n)));
    }
    v.push(("annulus:8:2:2".to_string(), generate::annulus(8, 2, 2)));
    v
}

fn fmt_e(x: f64) -> String {
    format!("{x:.3e}")
}

// 1. exact combinatorics -------------------------------------------------

fn exact_combinatorics() -> Verdict {
    let mut ok = true;
    let mut slowest = Duration::ZERO;
    let mut notes = Vec::new();
    for (name, c) in shipped_meshes() {
        let t0 = Instant::now();
        let inc = incidences(&c);
        let d10 = inc[0].nilpotency_defect(&inc[1]).0;
        let d21 = inc[1].nilpotency_defect(&inc[2]).0;
        let cls = classify_boundary(&c).map_err(|e| e.to_string())?;
        let chi = betti_numbers(&c).map_err(|e| e.to_string())?.euler_characteristic();
        let euler = euler_audit(&c, &cls, Some(chi));
        let elapsed = t0.elapsed();
        slowest = slowest.max(elapsed);
        let good = d10 == 0 && d21 == 0 && euler.all_hold && elapsed < Duration::from_secs(1);
        if !good {
            notes.push(format!("{name}: C1C0 {d10}, C2C1 {d21}, euler {}", euler.all_hold));
        }
        ok &= good;
    }
    Ok((ok, format!("{} meshes, slowest {:.3} s {}", shipped_meshes().len(), slowest.as_secs_f64(), notes.join("; "))))
}

// 2. Whitney structure ---------------------------------------------------

fn whitney_structure() -> Verdict {
    let meshes = [generate::single_tet(), generate::kuhn_cube(), generate::box_mesh(5)];
    let (mut pairing, mut cobound, mut constant) = (0.0f64, 0.0f64, 0.0f64);
    for c in &meshes {
        let inc = incidences(c);
        for p in 0..3 {
            pairing = pairing.max(verify_partition_duality(c, p));
            cobound = cobound.max(verify_coboundary(c, &inc[p], p + 1));
        }
        let v = Vector3::new(0.7, -1.3, 0.4);
        let one = de_rham(&AnalyticForm::one_form(|_| v), c, 1).map_err(|e| e.to_string())?;
        let two = de_rham(&AnalyticForm::two_form(|_| v), c, 2).map_err(|e| e.to_string())?;
        let (lo, hi) = c.bounds();
        for k in 0..50 {
            let r = deterministic_vector(3, k);
            let x = lo + (hi - lo).component_mul(&Vector3::new(r[0].abs(), r[1].abs(), r[2].abs())) * 0.999;
            let Ok(at) = barycentric(c, &x) else { continue };
            for cochain in [&one, &two] {
                constant = constant.max((interpolate(c, cochain, &at).vector() - v).norm());
            }
        }
    }
    let ok = pairing <= 1e-12 && cobound <= 1e-12 && constant <= 1e-12;
    Ok((ok, format!("pairing {}, coboundary {}, constant reproduction {} (box:5 has 750 tets)", fmt_e(pairing), fmt_e(cobound), fmt_e(constant))))
}

// 3. Hodge matrices ------------------------------------------------------

/// 5-point Gauss–Legendre on [0, 1].
fn gauss5() -> [(f64, f64); 5] {
    let n = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
    let w = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];
    std::array::from_fn(|i| (0.5 * (n[i] + 1.0), 0.5 * w[i]))
}

/// `∫ f` over the unit right tet by a collapsed (Duffy) tensor Gauss rule,
/// exact for polynomials of degree ≤ 7.
fn duffy_integral(f: impl Fn(Vector3<f64>) -> f64) -> f64 {
    let g = gauss5();
    let mut sum = 0.0;
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            for &(w, ww) in &g {
                let x = Vector3::new(u, v * (1.0 - u), w * (1.0 - u) * (1.0 - v));
                sum += wu * wv * ww * (1.0 - u).powi(2) * (1.0 - v) * f(x);
            }
        }
    }
    sum
}

fn hodge_matrices() -> Verdict {
    let mut worst_sym = 0.0f64;
    let mut worst_rel_eig = f64::INFINITY;
    for (_, c) in shipped_meshes() {
        let m = MaterialMap::vacuum(&c);
        for kind in [HodgeKind::Epsilon, HodgeKind::MuInv] {
            let h = assemble_hodge(&c, &m, kind).map_err(|e| e.to_string())?.matrix;
            let r = check_spd(&h).map_err(|e| e.to_string())?;
            worst_sym = worst_sym.max(r.symmetry_deviation);
            worst_rel_eig = worst_rel_eig.min(r.min_eigenvalue / h.frobenius_norm());
        }
    }
    // independent oracle on the unit right tet with an anisotropic material
    let c = generate::single_tet();
    let eps = Matrix3::new(2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.2);
    let mu = Matrix3::new(1.4, -0.1, 0.0, -0.1, 1.1, 0.2, 0.0, 0.2, 0.9);
    let mats = MaterialMap::from_tensors(vec![eps], vec![mu]).map_err(|e| e.to_string())?;
    let lam = |x: Vector3<f64>| [1.0 - x.x - x.y - x.z, x.x, x.y, x.z];
    let grad = [Vector3::new(-1.0, -1.0, -1.0), Vector3::x(), Vector3::y(), Vector3::z()];
    let w1 = |e: [usize; 2], x: Vector3<f64>| {
        let l = lam(x);
        grad[e[1]] * l[e[0]] - grad[e[0]] * l[e[1]]
    };
    let w2 = |f: [usize; 3], x: Vector3<f64>| {
        let l = lam(x);
        let [a, b, cc] = f;
        (grad[b].cross(&grad[cc]) * l[a] + grad[cc].cross(&grad[a]) * l[b] + grad[a].cross(&grad[b]) * l[cc]) * 2.0
    };
    let mu_inv = mu.try_inverse().ok_or("mu not invertible")?;
    let h1 = assemble_hodge(&c, &mats, HodgeKind::Epsilon).map_err(|e| e.to_string())?.matrix;
    let h2 = assemble_hodge(&c, &mats, HodgeKind::MuInv).map_err(|e| e.to_string())?.matrix;
    let mut oracle_dev = 0.0f64;
    for (i, &ei) in c.edges().iter().enumerate() {
        for (j, &ej) in c.edges().iter().enumerate() {
            let exact = duffy_integral(|x| w1(ei, x).dot(&(eps * w1(ej, x))));
            oracle_dev = oracle_dev.max((h1.get(i, j) - exact).abs());
        }
    }
    for (i, &fi) in c.faces().iter().enumerate() {
        for (j, &fj) in c.faces().iter().enumerate() {
            let exact = duffy_integral(|x| w2(fi, x).dot(&(mu_inv * w2(fj, x))));
            oracle_dev = oracle_dev.max((h2.get(i, j) - exact).abs());
        }
    }
    let ok = worst_sym <= 1e-13 && worst_rel_eig > 0.0 && oracle_dev <= 1e-10;
    Ok((ok, format!("symmetry {}, min eig / norm {}, oracle deviation {}", fmt_e(worst_sym), fmt_e(worst_rel_eig), fmt_e(oracle_dev))))
}

// 4. barycentric dual pairing -------------------------------------------

fn dual_pairing() -> Verdict {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, c) in [("single-tet", generate::single_tet()), ("kuhn-cube", generate::kuhn_cube())] {
        let d = barycentric_dual(&c);
        for p in 0..2 {
            let dev = dual_pairing_check(&c, &d, p);
            parts.push(format!("{name} p={p} {}", fmt_e(dev)));
            worst = worst.max(dev);
        }
    }
    Ok((worst <= 1e-10, format!("max |pairing - delta| {} ({})", fmt_e(worst), parts.join(", "))))
}

// 5. SPAI ----------------------------------------------------------------

fn spai() -> Verdict {
    let c = generate::box_mesh(4);
    let cls = classify_boundary(&c).map_err(|e| e.to_string())?;
    let ops = build_operators(&c, &MaterialMap::vacuum(&c), Some(&cls)).map_err(|e| e.to_string())?;
    let residuals: Vec<f64> = (0..=3)
        .map(|k| spai_inverse(&ops.eps, &SparsityPattern::from_matrix(&ops.eps, k), 0.0).map(|r| r.residual))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let decreasing = residuals.windows(2).all(|w| w[1] < w[0]);
    let exact = DiscreteCodifferential::new(&ops, InverseMode::Exact).map_err(|e| e.to_string())?;
    let approx = DiscreteCodifferential::new(&ops, InverseMode::Spai { level: 3, drop_tol: 0.0 }).map_err(|e| e.to_string())?;
    let dt = 0.9 * stable_timestep(&ops, &exact).map_err(|e| e.to_string())?.dt_max;
    let start = FieldState::initial(&ops, deterministic_vector(ops.n_edges(), 5), vec![0.0; ops.n_faces()], dt).map_err(|e| e.to_string())?;
    let cmp = compare_inverse_modes(&ops, &exact, &approx, &start, 500).map_err(|e| e.to_string())?;
    let rs: Vec<String> = residuals.iter().map(|r| fmt_e(*r)).collect();
    Ok((
        decreasing && cmp.within_envelope,
        format!(
            "residuals k=0..3 [{}], A/B divergence {} vs envelope {} over {} steps",
            rs.join(", "),
            fmt_e(cmp.max_divergence),
            fmt_e(cmp.envelope),
            cmp.steps
        ),
    ))
}

// 6. symplectic energy behavior ------------------------------------------

fn energy() -> Verdict {
    let t0 = Instant::now();
    let c = generate::kuhn_cube();
    let ops = build_operators(&c, &MaterialMap::vacuum(&c), None).map_err(|e| e.to_string())?;
    let codiff = DiscreteCodifferential::new(&ops, InverseMode::Exact).map_err(|e| e.to_string())?;
    let dt = 0.9 * stable_timestep(&ops, &codiff).map_err(|e| e.to_string())?.dt_max;
    let e0 = deterministic_vector(ops.n_edges(), 11);
    let b0 = ops.c1.mul_vec(&deterministic_vector(ops.n_edges(), 12));
    let start = FieldState::initial(&ops, e0, b0, dt).map_err(|e| e.to_string())?;
    let run = simulate(&ops, &codiff, start, 10_000, None).map_err(|e| e.to_string())?;
    let slope = relative_drift_slope(&run.trace).abs();
    let div = run.trace.iter().map(|r| r.div_b_residual).fold(0.0, f64::max);
    let elapsed = t0.elapsed().as_secs_f64();
    Ok((
        slope <= 1e-10 && div <= 1e-12 && elapsed < 30.0,
        format!("drift slope {}/step, C2 B change {}, {:.2} s", fmt_e(slope), fmt_e(div), elapsed),
    ))
}

// 7. cavity physics ------------------------------------------------------

fn cavity() -> Verdict {
    let t0 = Instant::now();
    let c = generate::box_mesh(15);
    let cls = classify_boundary(&c).map_err(|e| e.to_string())?;
    let ops = build_operators(&c, &MaterialMap::vacuum(&c), Some(&cls)).map_err(|e| e.to_string())?;
    let report = eigenmodes(&ops, 3, None).map_err(|e| e.to_string())?;
    let dof = dof_audit(&c, &cls, Some(&report)).map_err(|e| e.to_string())?;
    let target = 2.0 * std::f64::consts::PI.powi(2);
    let lowest = report.eigenvalues.first().copied().ok_or("no eigenvalues")?;
    let rel = (lowest - target).abs() / target;
    let nv_h = cls.interior_count(0);
    let elapsed = t0.elapsed().as_secs_f64();
    Ok((
        rel <= 0.05 && report.zero_count == nv_h && report.nonzero_count as i64 == dof.theta_e && elapsed < 300.0,
        format!(
            "{} tets, k^2 = {:.4} vs 2 pi^2 = {target:.4} (rel {}), zero modes {} (N_V^h {nv_h}), nonzero {} (theta_e {}), {:.1} s",
            c.count(3),
            lowest,
            fmt_e(rel),
            report.zero_count,
            report.nonzero_count,
            dof.theta_e,
            elapsed
        ),
    ))
}

// 8. charge conservation -------------------------------------------------

fn charge_conservation() -> Verdict {
    let t0 = Instant::now();
    let c = generate::box_mesh(4);
    let c0 = incidences(&c)[0].clone();
    let (q, tau) = (1.6e-19, 1e-9);
    let report = conservation_study(&c, &c0, 10_000, 2024, q, tau).map_err(|e| e.to_string())?;
    // a static particle deposits nothing
    let x = Vector3::new(0.31, 0.42, 0.57);
    let still = verify_conservation(&c, &c0, &x, &x, q, tau).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed().as_secs_f64();
    Ok((
        report.pass && still == 0.0 && elapsed < 10.0,
        format!(
            "{} paths ({} crossing, up to {} segments), max residual / |qdot| {}, {:.2} s",
            report.paths,
            report.crossing_paths,
            report.max_segments,
            fmt_e(report.max_relative_residual),
            elapsed
        ),
    ))
}

// 9. PML -----------------------------------------------------------------

/// Continuum reflection of a graded stretched slab backed by a perfect
/// conductor, by a 1D transfer matrix on `(u, u'/s)` through thin layers.
fn transfer_matrix_reflection(k: f64, omega: f64, omega_max: f64, thickness: f64, order: i32) -> f64 {
    let layers = 4000;
    let d = thickness / layers as f64;
    let (mut u, mut v) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    for j in (0..layers).rev() {
        let depth = (j as f64 + 0.5) / layers as f64;
        let s = Complex64::new(1.0, omega_max * depth.powi(order) / omega);
        let phi = s * k * d;
        // backward propagation through one layer
        let (cos, sin) = (phi.cos(), phi.sin());
        let (nu, nv) = (u * cos - v * sin / k, u * k * sin + v * cos);
        u = nu;
        v = nv;
    }
    // u = A + B, v = ik (A − B) at the slab front
    let i = Complex64::new(0.0, 1.0);
    let a = (u + v / (i * k)) * 0.5;
    let b = (u - v / (i * k)) * 0.5;
    (b / a).norm()
}

fn pml() -> Verdict {
    let guide = Waveguide::default();
    let omega = 2.0 * std::f64::consts::PI;
    let strengths = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let thicknesses = [0.25, 0.5, 1.0, 1.5];
    let by_strength = reflection_sweep(&guide, omega, &strengths.map(|w| (w, 1.0))).map_err(|e| e.to_string())?;
    let by_thickness = reflection_sweep(&guide, omega, &thicknesses.map(|l| (4.0, l))).map_err(|e| e.to_string())?;
    let floor = by_strength.iter().chain(&by_thickness).map(|r| r.reflection_mag).fold(f64::INFINITY, f64::min);
    let mut ok = true;
    let mut worst_ratio = 1.0f64;
    let mut oracle_vs_closed = 0.0f64;
    for rows in [&by_strength, &by_thickness] {
        let mut prev = f64::INFINITY;
        for r in rows.iter() {
            let oracle = transfer_matrix_reflection(omega, omega, r.omega_max_profile, r.thickness, 2);
            oracle_vs_closed = oracle_vs_closed.max((oracle / r.analytic - 1.0).abs());
            if oracle >= 10.0 * floor {
                let ratio = r.reflection_mag / oracle;
                worst_ratio = worst_ratio.max(ratio.max(1.0 / ratio));
                ok &= ratio <= 2.0 && ratio >= 0.5 && r.reflection_mag < prev;
                prev = r.reflection_mag;
            }
        }
    }
    // trivial profile against the real-arithmetic operators
    let c = guide.mesh(1.0);
    let m = MaterialMap::vacuum(&c);
    let hodge = assemble_stretched(&c, &m, &StretchProfile::trivial(), omega).map_err(|e| e.to_string())?;
    let real_eps = assemble_hodge(&c, &m, HodgeKind::Epsilon).map_err(|e| e.to_string())?.matrix;
    let real_mu = assemble_hodge(&c, &m, HodgeKind::MuInv).map_err(|e| e.to_string())?.matrix;
    let bitwise = hodge.eps == real_eps.to_complex() && hodge.mu_inv == real_mu.to_complex();
    let cls = guide.classification(&c);
    let ops = HarmonicOperators::new(&c, &cls, &hodge);
    let real_ops = declat::maxwell::build_operators(&c, &m, Some(&cls)).map_err(|e| e.to_string())?;
    let j = real_ops.restrict_edges(&guide.source(&c));
    let jc: Vec<Complex64> = j.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let complex_sol = harmonic_solve(&ops, omega, &jc).map_err(|e| e.to_string())?;
    let real_sol = harmonic_solve_real(&real_ops, omega, &j).map_err(|e| e.to_string())?;
    let scale = real_sol.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let sol_dev = complex_sol.e.iter().zip(&real_sol).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
    ok &= bitwise && sol_dev <= 1e-12;
    Ok((
        ok,
        format!(
            "floor {}, worst measured/oracle factor {:.3} above 10x floor, transfer matrix vs exp(-2 int Omega/c) {}, trivial profile bitwise {bitwise}, solution deviation {}",
            fmt_e(floor),
            worst_ratio,
            fmt_e(oracle_vs_closed),
            fmt_e(sol_dev)
        ),
    ))
}

// 10. DOF identities -----------------------------------------------------

fn dof_identities() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, c) in shipped_meshes() {
        let cls = classify_boundary(&c).map_err(|e| e.to_string())?;
        let r = dof_audit(&c, &cls, None).map_err(|e| e.to_string())?;
        let contractible = !name.starts_with("annulus");
        ok &= r.theta_e == r.theta_b && (!contractible || r.harmonic_dimension == 0);
        if !contractible {
            ok &= r.betti.b1 == 1;
            notes.push(format!("{name}: b1 {}, theta_e {} = theta_b {}", r.betti.b1, r.theta_e, r.theta_b));
        }
    }
    let annulus = generate::annulus(8, 1, 1);
    let inc = incidences(&annulus);
    let r0 = incidence_rank(&inc[0]).map_err(|e| e.to_string())?;
    let r1 = incidence_rank(&inc[1]).map_err(|e| e.to_string())?;
    let b1 = annulus.count(1) - r0 - r1;
    ok &= b1 == 1;
    notes.push(format!("annulus:8:1:1 b1 by exact rank {b1}"));
    Ok((ok, notes.join("; ")))
}

// 11. audit suite ----------------------------------------------------------

fn audit_suite() -> Verdict {
    let mut ok = true;
    for (name, c) in shipped_meshes() {
        let b = AuditBundle::vacuum(c).map_err(|e| e.to_string())?;
        let r = run_audit(&b).map_err(|e| e.to_string())?;
        if !r.pass {
            return Ok((false, format!("clean mesh {name} fails {:?}", r.failed_sections())));
        }
    }
    let mut detected = Vec::new();
    for c in [generate::kuhn_cube(), generate::box_mesh(3)] {
        let base = AuditBundle::vacuum(c).map_err(|e| e.to_string())?;
        let cls = &base.classification;
        let (f, e) = cls
            .interior(2)
            .into_iter()
            .find_map(|f| base.primal[1].row(f).iter().find(|&&(e, _)| !cls.is_boundary(1, e)).map(|&(e, _)| (f, e)))
            .ok_or("no interior face with an interior edge")?;
        let j = base.h_eps.row(1).find(|&(col, _)| col != 1).ok_or("no off-diagonal")?.0;
        let cases: [(&str, &str, Box<dyn Fn(&mut AuditBundle) -> bool>); 4] = [
            ("sign-flip", "first_kind", Box::new(move |b| faults::flip_incidence_sign(b, 1, f, e))),
            ("non-transpose", "second_kind", Box::new(move |b| faults::break_dual_transpose(b, 1, e, f))),
            ("asymmetric", "hodge", Box::new(move |b| faults::make_hodge_asymmetric(b, 1, j, 1e-9))),
            ("indefinite", "hodge", Box::new(|b| faults::make_hodge_indefinite(b, 2))),
        ];
        for (fault, section, inject) in cases {
            let mut b = base.clone();
            if !inject(&mut b) {
                return Err(format!("could not inject {fault}"));
            }
            let failed = run_audit(&b).map_err(|e| e.to_string())?.failed_sections();
            ok &= failed == vec![section];
            detected.push(format!("{fault}->{}", failed.join("+")));
        }
    }
    Ok((ok, format!("clean meshes pass; faults {}", detected.join(", "))))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("exact combinatorics", exact_combinatorics),
        ("Whitney structure", whitney_structure),
        ("Hodge matrices", hodge_matrices),
        ("barycentric dual pairing", dual_pairing),
        ("SPAI residual and A/B envelope", spai),
        ("symplectic energy behavior", energy),
        ("cavity physics", cavity),
        ("charge conservation", charge_conservation),
        ("PML reflection", pml),
        ("DOF identities", dof_identities),
        ("audit suite", audit_suite),
    ];
    let mut failures = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let (pass, detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        println!(
            "criterion {:>2} {} {:<32} [{:.2} s] {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            title,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 && std::env::var("DECLAT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
