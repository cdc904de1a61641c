//! Charge-conserving coupling between point particles and lattice cochains.
//!
//! Charge scatters to nodes with the barycentric weights `q λ_i(x)`. A
//! straight move from `x_s` to `x_f` over an interval `τ` scatters the edge
//! current `q̇ ∫_ℓ w_ab`, with `q̇ = q/τ`. Inside one tet the integrand is
//! affine along the segment, so the integral is exactly
//! `λ̄_a Δ_b − λ̄_b Δ_a` with `λ̄` the midpoint coordinates and `Δ = λ^f − λ^s`.
//! Summing over the edges at a node gives `(C⁰ᵀ J)_i = q̇ Δ_i`, which is the
//! discrete continuity equation. Paths that cross tets are split at the
//! faces, and the coordinates of the shared vertices are carried over
//! unchanged so the identity composes without roundoff drift.

use std::fmt::Write as _;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::complex::{SimplicialComplex, LOCAL_EDGES};
use crate::mesh::incidence::IncidenceMatrix;
use crate::whitney::{barycentric, barycentric_from, interpolate_values, BarycentricPoint};

/// A (macro-)particle. Scaling `charge` and `mass` together keeps the
/// trajectory and scales the deposited sources.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    /// Coulombs.
    pub charge: f64,
    /// Kilograms.
    pub mass: f64,
    /// Meters.
    pub position: Vector3<f64>,
    /// Meters per second.
    pub velocity: Vector3<f64>,
}

impl Particle {
    pub fn new(charge: f64, mass: f64, position: Vector3<f64>, velocity: Vector3<f64>) -> Result<Self> {
        let p = Self {
            charge,
            mass,
            position,
            velocity,
        };
        let finite = charge.is_finite() && mass.is_finite() && position.iter().chain(velocity.iter()).all(|v| v.is_finite());
        if !finite || mass <= 0.0 {
            return Err(Error::Invalid(format!("particle state must be finite with positive mass: {p:?}")));
        }
        Ok(p)
    }
}

/// Node weights `q λ_i(x)` of a point charge, as a full 0-cochain.
pub fn scatter_charge(complex: &SimplicialComplex, position: &Vector3<f64>, q: f64) -> Result<Vec<f64>> {
    let at = barycentric(complex, position)?;
    let mut nodes = vec![0.0; complex.count(0)];
    for (k, &v) in complex.tets()[at.tet].iter().enumerate() {
        nodes[v] = q * at.lambda[k];
    }
    Ok(nodes)
}

/// Sources deposited by one straight move.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatterResult {
    /// Rate of change of the node charges, `q̇ (λ^f − λ^s)` per node.
    pub node_rate: Vec<f64>,
    /// Edge currents (amperes), a primal 1-cochain.
    pub current: Vec<f64>,
    pub tau: f64,
    /// Within-tet pieces the path was split into.
    pub segments: usize,
    /// Point where the path left the mesh; deposition stops there.
    pub exit: Option<Vector3<f64>>,
}

/// Splits the segment `x_start → x_end` at tet faces and deposits the edge
/// currents. Also returns the matching node rates so that conservation can
/// be checked without relocating the endpoints.
pub fn scatter_current(
    complex: &SimplicialComplex,
    x_start: &Vector3<f64>,
    x_end: &Vector3<f64>,
    q: f64,
    tau: f64,
) -> Result<ScatterResult> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Invalid(format!("scatter interval must be positive, got {tau}")));
    }
    let qdot = q / tau;
    let mut node_rate = vec![0.0; complex.count(0)];
    let mut current = vec![0.0; complex.count(1)];
    let start = barycentric(complex, x_start)?;
    let (mut tet, mut lam) = (start.tet, start.lambda);
    let mut segments = 0;
    let mut exit = None;
    let max_segments = 8 * complex.count(3) + 16;
    loop {
        if segments > max_segments {
            return Err(Error::NoConvergence {
                what: "path splitting",
                iterations: segments,
            });
        }
        let target = complex.barycentric_in(tet, x_end);
        let delta: [f64; 4] = std::array::from_fn(|k| target[k] - lam[k]);
        // first face whose coordinate reaches zero along the path
        let mut hit: Option<(usize, f64)> = None;
        for k in 0..4 {
            if delta[k] < 0.0 && target[k] < 0.0 {
                let s = (-lam[k] / delta[k]).clamp(0.0, 1.0);
                if hit.map_or(true, |(_, best)| s < best) {
                    hit = Some((k, s));
                }
            }
        }
        let (end, crossing) = match hit {
            None => (target, None),
            Some((k, s)) => {
                let mut end: [f64; 4] = std::array::from_fn(|j| lam[j] + s * delta[j]);
                end[k] = 0.0;
                (end, Some(k))
            }
        };
        deposit(complex, tet, &lam, &end, qdot, &mut node_rate, &mut current);
        segments += 1;
        let Some(k) = crossing else { break };
        match complex.neighbor(tet, k) {
            Some(next) => {
                let mut carried = [0.0; 4];
                for (j, &v) in complex.tets()[tet].iter().enumerate() {
                    if let Some(slot) = complex.local_vertex(next, v) {
                        carried[slot] = end[j];
                    }
                }
                tet = next;
                lam = carried;
            }
            None => {
                exit = Some(complex.point_in(tet, &end));
                break;
            }
        }
    }
    Ok(ScatterResult {
        node_rate,
        current,
        tau,
        segments,
        exit,
    })
}

fn deposit(
    complex: &SimplicialComplex,
    tet: usize,
    from: &[f64; 4],
    to: &[f64; 4],
    qdot: f64,
    node_rate: &mut [f64],
    current: &mut [f64],
) {
    let verts = complex.tets()[tet];
    let delta: [f64; 4] = std::array::from_fn(|k| to[k] - from[k]);
    let mid: [f64; 4] = std::array::from_fn(|k| 0.5 * (to[k] + from[k]));
    for (k, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
        let e = complex.tet_edges(tet)[k];
        current[e] += qdot * (mid[a] * delta[b] - mid[b] * delta[a]);
    }
    for k in 0..4 {
        node_rate[verts[k]] += qdot * delta[k];
    }
}

/// Largest node mismatch `|q̇ Δλ_i − (C⁰ᵀ J)_i|` of a scatter.
pub fn conservation_residual(c0: &IncidenceMatrix, scatter: &ScatterResult) -> f64 {
    let mut div = vec![0.0; scatter.node_rate.len()];
    for (e, row) in c0.rows().iter().enumerate() {
        for &(v, s) in row {
            div[v] += f64::from(s) * scatter.current[e];
        }
    }
    div.iter()
        .zip(&scatter.node_rate)
        .map(|(d, r)| (d - r).abs())
        .fold(0.0, f64::max)
}

/// Scatters one move and returns the maximum node residual, using node
/// charges recomputed independently from the endpoint positions.
pub fn verify_conservation(
    complex: &SimplicialComplex,
    c0: &IncidenceMatrix,
    x_start: &Vector3<f64>,
    x_end: &Vector3<f64>,
    q: f64,
    tau: f64,
) -> Result<f64> {
    let mut scatter = scatter_current(complex, x_start, x_end, q, tau)?;
    let stop = scatter.exit.unwrap_or(*x_end);
    let before = scatter_charge(complex, x_start, q)?;
    let after = scatter_charge(complex, &stop, q)?;
    scatter.node_rate = after.iter().zip(&before).map(|(a, b)| (a - b) / tau).collect();
    Ok(conservation_residual(c0, &scatter))
}

/// Whitney interpolation of full E (1-cochain) and B (2-cochain) arrays at
/// the particle.
pub fn gather(
    complex: &SimplicialComplex,
    e: &[f64],
    b: &[f64],
    position: &Vector3<f64>,
    seed: Option<usize>,
) -> Result<(Vector3<f64>, Vector3<f64>, BarycentricPoint)> {
    if e.len() != complex.count(1) || b.len() != complex.count(2) {
        return Err(Error::Dimension(format!(
            "gather needs {} edge and {} face values, got {} and {}",
            complex.count(1),
            complex.count(2),
            e.len(),
            b.len()
        )));
    }
    let at = barycentric_from(complex, position, seed)?;
    let ev = interpolate_values(complex, 1, e, &at).vector();
    let bv = interpolate_values(complex, 2, b, &at).vector();
    Ok((ev, bv, at))
}

/// Boris push: half electric kick, magnetic rotation, half electric kick,
/// then drift.
pub fn push(particle: &Particle, e: &Vector3<f64>, b: &Vector3<f64>, dt: f64) -> Particle {
    let k = particle.charge / particle.mass * dt * 0.5;
    let v_minus = particle.velocity + e * k;
    let t = b * k;
    let s = t * (2.0 / (1.0 + t.norm_squared()));
    let v_prime = v_minus + v_minus.cross(&t);
    let v_plus = v_minus + v_prime.cross(&s);
    let velocity = v_plus + e * k;
    Particle {
        velocity,
        position: particle.position + velocity * dt,
        ..*particle
    }
}

/// Row of a particle trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub step: usize,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

/// Pushes a particle through static lattice fields, stopping early if it
/// leaves the mesh.
pub fn trace_particle(
    complex: &SimplicialComplex,
    e: &[f64],
    b: &[f64],
    particle: Particle,
    dt: f64,
    steps: usize,
) -> Result<Vec<TracePoint>> {
    let point = |step, p: &Particle| TracePoint {
        step,
        position: p.position.into(),
        velocity: p.velocity.into(),
    };
    let mut p = particle;
    let mut out = vec![point(0, &p)];
    let mut seed = None;
    for step in 1..=steps {
        let (ev, bv, at) = match gather(complex, e, b, &p.position, seed) {
            Ok(g) => g,
            Err(Error::OutsideMesh(_)) => break,
            Err(err) => return Err(err),
        };
        seed = Some(at.tet);
        p = push(&p, &ev, &bv, dt);
        out.push(point(step, &p));
    }
    Ok(out)
}

pub const TRACE_HEADER: &str = "step,x,y,z,vx,vy,vz";

pub fn trace_csv(rows: &[TracePoint]) -> String {
    let mut s = String::from("# positions in m, velocities in m/s\n");
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for r in rows {
        let [x, y, z] = r.position;
        let [vx, vy, vz] = r.velocity;
        let _ = writeln!(s, "{},{x:.12e},{y:.12e},{z:.12e},{vx:.12e},{vy:.12e},{vz:.12e}", r.step);
    }
    s
}

/// Uniform random point in tet `t` (Dirichlet(1,1,1,1) coordinates).
fn random_in_tet(complex: &SimplicialComplex, t: usize, rng: &mut impl Rng) -> Vector3<f64> {
    let w: [f64; 4] = std::array::from_fn(|_| -(1.0 - rng.random::<f64>()).ln());
    let s: f64 = w.iter().sum();
    complex.point_in(t, &w.map(|x| x / s))
}

/// Random test moves: half stay inside one tet, half join random points in
/// two random tets (and usually cross many faces).
pub fn sample_paths(complex: &SimplicialComplex, count: usize, seed: u64) -> Vec<(Vector3<f64>, Vector3<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = complex.count(3);
    (0..count)
        .map(|i| {
            let t = rng.random_range(0..n);
            let a = random_in_tet(complex, t, &mut rng);
            let u = if i % 2 == 0 { t } else { rng.random_range(0..n) };
            (a, random_in_tet(complex, u, &mut rng))
        })
        .collect()
}

/// Conservation statistics over a batch of moves.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConservationReport {
    pub schema: &'static str,
    pub paths: usize,
    pub seed: u64,
    pub charge: f64,
    pub tau: f64,
    /// `q/τ` in amperes.
    pub qdot: f64,
    pub crossing_paths: usize,
    pub exited_paths: usize,
    pub max_segments: usize,
    /// Coulombs per second.
    pub max_residual: f64,
    /// `max_residual / |q̇|`.
    pub max_relative_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn conservation_study(
    complex: &SimplicialComplex,
    c0: &IncidenceMatrix,
    count: usize,
    seed: u64,
    q: f64,
    tau: f64,
) -> Result<ConservationReport> {
    let qdot = (q / tau).abs();
    let (mut crossing, mut exited, mut max_segments, mut worst) = (0, 0, 0, 0.0f64);
    for (a, b) in sample_paths(complex, count, seed) {
        let scatter = scatter_current(complex, &a, &b, q, tau)?;
        crossing += usize::from(scatter.segments > 1);
        exited += usize::from(scatter.exit.is_some());
        max_segments = max_segments.max(scatter.segments);
        worst = worst.max(verify_conservation(complex, c0, &a, &b, q, tau)?);
    }
    let relative = if qdot > 0.0 { worst / qdot } else { 0.0 };
    Ok(ConservationReport {
        schema: "declat.pic.conservation/1",
        paths: count,
        seed,
        charge: q,
        tau,
        qdot,
        crossing_paths: crossing,
        exited_paths: exited,
        max_segments,
        max_residual: worst,
        max_relative_residual: relative,
        tolerance: 1e-12,
        pass: relative <= 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate;
    use crate::mesh::incidence::incidence;
    use crate::whitney::{de_rham, AnalyticForm};

    #[test]
    fn charge_weights() {
        let c = generate::single_tet();
        let w = scatter_charge(&c, &c.barycenter(3, 0), 2.0).unwrap();
        assert!(w.iter().all(|x| (x - 0.5).abs() < 1e-15));
        let w = scatter_charge(&c, &c.vertex(2), 2.0).unwrap();
        assert_eq!(w[2], 2.0);
        assert!(scatter_charge(&c, &Vector3::new(5.0, 0.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn single_tet_identity_and_orientation() {
        let c = generate::single_tet();
        let c0 = incidence(&c, 0);
        let (a, b) = (Vector3::new(0.1, 0.2, 0.3), Vector3::new(0.4, 0.1, 0.05));
        let fwd = scatter_current(&c, &a, &b, 1.5, 0.5).unwrap();
        let back = scatter_current(&c, &b, &a, 1.5, 0.5).unwrap();
        assert!(fwd.current.iter().zip(&back.current).all(|(x, y)| *x == -*y));
        assert!(conservation_residual(&c0, &fwd) <= 1e-15);
        assert!(verify_conservation(&c, &c0, &a, &b, 1.5, 0.5).unwrap() <= 1e-14);
        let still = scatter_current(&c, &a, &a, 1.0, 1.0).unwrap();
        assert!(still.current.iter().chain(&still.node_rate).all(|&x| x == 0.0));
        assert!(scatter_current(&c, &a, &b, 1.0, 0.0).is_err());
    }

    #[test]
    fn crossing_path_splits_and_conserves() {
        let c = generate::box_mesh(3);
        let c0 = incidence(&c, 0);
        let (a, b) = (Vector3::new(0.05, 0.1, 0.07), Vector3::new(0.93, 0.88, 0.9));
        let s = scatter_current(&c, &a, &b, 1.0, 1.0).unwrap();
        assert!(s.segments > 3 && s.exit.is_none());
        assert!(verify_conservation(&c, &c0, &a, &b, 1.0, 1.0).unwrap() <= 1e-13);
    }

    #[test]
    fn subdivided_path_composes() {
        let c = generate::box_mesh(3);
        let (a, b) = (Vector3::new(0.05, 0.1, 0.07), Vector3::new(0.93, 0.88, 0.9));
        let m = a + (b - a) * 0.37;
        let whole = scatter_current(&c, &a, &b, 1.0, 1.0).unwrap();
        let p1 = scatter_current(&c, &a, &m, 1.0, 1.0).unwrap();
        let p2 = scatter_current(&c, &m, &b, 1.0, 1.0).unwrap();
        let scale = whole.current.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for e in 0..whole.current.len() {
            assert!((whole.current[e] - p1.current[e] - p2.current[e]).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn exiting_path_is_flagged() {
        let c = generate::box_mesh(2);
        let c0 = incidence(&c, 0);
        let (a, b) = (Vector3::new(0.5, 0.5, 0.5), Vector3::new(1.5, 0.5, 0.5));
        let s = scatter_current(&c, &a, &b, 1.0, 1.0).unwrap();
        let exit = s.exit.unwrap();
        assert!((exit - Vector3::new(1.0, 0.5, 0.5)).norm() < 1e-12);
        assert!(verify_conservation(&c, &c0, &a, &b, 1.0, 1.0).unwrap() <= 1e-13);
    }

    #[test]
    fn random_batch_conserves() {
        let c = generate::box_mesh(3);
        let r = conservation_study(&c, &incidence(&c, 0), 400, 7, 1.0, 1e-3).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.crossing_paths > 100);
    }

    #[test]
    fn gather_reproduces_constant_fields() {
        let c = generate::kuhn_cube();
        let e0 = Vector3::new(1.0, -2.0, 0.5);
        let b0 = Vector3::new(0.3, 0.0, -1.0);
        let e = de_rham(&AnalyticForm::one_form(|_| e0), &c, 1).unwrap().values;
        let b = de_rham(&AnalyticForm::two_form(|_| b0), &c, 2).unwrap().values;
        let (ev, bv, _) = gather(&c, &e, &b, &Vector3::new(0.3, 0.6, 0.2), None).unwrap();
        assert!((ev - e0).norm() < 1e-12 && (bv - b0).norm() < 1e-12);
        let zeros = (vec![0.0; c.count(1)], vec![0.0; c.count(2)]);
        let (ev, bv, _) = gather(&c, &zeros.0, &zeros.1, &Vector3::new(0.3, 0.6, 0.2), None).unwrap();
        assert_eq!((ev.norm(), bv.norm()), (0.0, 0.0));
    }

    #[test]
    fn boris_push_cases() {
        let p = Particle::new(1.0, 2.0, Vector3::zeros(), Vector3::new(1.0, 0.5, 0.0)).unwrap();
        let drift = push(&p, &Vector3::zeros(), &Vector3::zeros(), 0.1);
        assert_eq!(drift.velocity, p.velocity);
        assert!((drift.position - Vector3::new(0.1, 0.05, 0.0)).norm() < 1e-16);

        let b = Vector3::new(0.0, 0.0, 3.0);
        let mut q = p;
        for _ in 0..10_000 {
            q = push(&q, &Vector3::zeros(), &b, 0.01);
        }
        assert!((q.velocity.norm() - p.velocity.norm()).abs() <= 1e-12 * p.velocity.norm());

        let e = Vector3::new(0.0, 4.0, 0.0);
        let mut r = Particle { velocity: Vector3::zeros(), ..p };
        for _ in 0..10 {
            r = push(&r, &e, &Vector3::zeros(), 0.5);
        }
        assert!((r.velocity - e * (0.5 * 0.5 * 10.0)).norm() < 1e-13);
        assert!(Particle::new(1.0, 0.0, Vector3::zeros(), Vector3::zeros()).is_err());
    }
}
