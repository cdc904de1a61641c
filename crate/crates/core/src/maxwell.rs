//! Semi-discrete Maxwell equations on the primal lattice with leapfrog time
//! stepping, PEC reduction, stability bounds and cavity eigenmodes.
//!
//! `E` lives on free primal edges and `B` on free primal faces. Faraday's law
//! is the integer incidence `C¹`; Ampère's law goes through the codifferential
//! `Υ = [⋆_ε]⁻¹ C¹ᵀ [⋆_{μ⁻¹}]`.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hodge::{assemble_hodge, spai_inverse, HodgeKind, MaterialMap, SparsityPattern};
use crate::mesh::boundary::BoundaryClassification;
use crate::mesh::complex::SimplicialComplex;
use crate::mesh::incidence::{incidence, IncidenceMatrix};
use crate::mesh::topology::incidence_rank;
use crate::sparse::{dot, CholeskySolver, CsrMatrix};

/// PEC-reduced operators. Index lists map reduced positions back to global
/// simplex indices.
#[derive(Clone, Debug)]
pub struct MaxwellOperators {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
    pub faces: Vec<usize>,
    /// Reduced integer incidences `C⁰` (edges × nodes), `C¹` (faces × edges)
    /// and `C²` (tets × faces).
    pub incidence: [IncidenceMatrix; 3],
    pub c0: CsrMatrix<f64>,
    pub c1: CsrMatrix<f64>,
    pub c2: CsrMatrix<f64>,
    pub eps: CsrMatrix<f64>,
    pub mu_inv: CsrMatrix<f64>,
}

impl MaxwellOperators {
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    /// Curl-curl stiffness `C¹ᵀ [⋆_{μ⁻¹}] C¹`.
    pub fn stiffness(&self) -> CsrMatrix<f64> {
        self.c1.transpose().matmul(&self.mu_inv.matmul(&self.c1))
    }

    /// Scatters a reduced edge vector into a full-length one (zeros on PEC).
    pub fn expand_edges(&self, e: &[f64], total: usize) -> Vec<f64> {
        let mut out = vec![0.0; total];
        self.edges.iter().zip(e).for_each(|(&g, &v)| out[g] = v);
        out
    }

    pub fn restrict_edges(&self, full: &[f64]) -> Vec<f64> {
        self.edges.iter().map(|&g| full[g]).collect()
    }

    pub fn restrict_faces(&self, full: &[f64]) -> Vec<f64> {
        self.faces.iter().map(|&g| full[g]).collect()
    }
}

/// Removes boundary (fixed) edges and faces from `C¹`, `C²` and the Hodge
/// matrices; nodes likewise from `C⁰`.
pub fn apply_pec(
    complex: &SimplicialComplex,
    classification: &BoundaryClassification,
    eps: &CsrMatrix<f64>,
    mu_inv: &CsrMatrix<f64>,
) -> MaxwellOperators {
    let nodes = classification.interior(0);
    let edges = classification.interior(1);
    let faces = classification.interior(2);
    let tets: Vec<usize> = (0..complex.count(3)).collect();
    let inc = [
        incidence(complex, 0).restrict(&edges, &nodes),
        incidence(complex, 1).restrict(&faces, &edges),
        incidence(complex, 2).restrict(&tets, &faces),
    ];
    MaxwellOperators {
        c0: inc[0].to_csr(),
        c1: inc[1].to_csr(),
        c2: inc[2].to_csr(),
        eps: eps.submatrix(&edges, &edges),
        mu_inv: mu_inv.submatrix(&faces, &faces),
        incidence: inc,
        nodes,
        edges,
        faces,
    }
}

/// Assembles the Hodge stars and reduces them; `classification = None` keeps
/// every simplex free (natural boundary everywhere).
pub fn build_operators(
    complex: &SimplicialComplex,
    materials: &MaterialMap,
    classification: Option<&BoundaryClassification>,
) -> Result<MaxwellOperators> {
    let eps = assemble_hodge(complex, materials, HodgeKind::Epsilon)?.matrix;
    let mu_inv = assemble_hodge(complex, materials, HodgeKind::MuInv)?.matrix;
    let free = crate::mesh::boundary::from_boundary_faces(complex, vec![false; complex.count(2)]);
    Ok(apply_pec(complex, classification.unwrap_or(&free), &eps, &mu_inv))
}

/// How `[⋆_ε]⁻¹` is applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InverseMode {
    Exact,
    Spai { level: usize, drop_tol: f64 },
}

impl FromStr for InverseMode {
    type Err = Error;

    /// `exact`, `spai:<level>` or `spai:<level>:<drop_tol>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("hodge inverse '{s}' (expected exact or spai:<k>[:<drop>])"));
        if s == "exact" {
            return Ok(InverseMode::Exact);
        }
        let rest = s.strip_prefix("spai:").ok_or_else(bad)?;
        let mut parts = rest.split(':');
        let level = parts.next().and_then(|k| k.parse().ok()).ok_or_else(bad)?;
        let drop_tol = match parts.next() {
            Some(d) => d.parse().map_err(|_| bad())?,
            None => 0.0,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(InverseMode::Spai { level, drop_tol })
    }
}

enum HodgeInverse {
    Exact(CholeskySolver),
    Spai(CsrMatrix<f64>),
    Empty,
}

/// `Υ = [⋆_ε]⁻¹ C¹ᵀ [⋆_{μ⁻¹}]` with a choice of inverse.
pub struct DiscreteCodifferential {
    inverse: HodgeInverse,
    c1t: CsrMatrix<f64>,
    mu_inv: CsrMatrix<f64>,
    /// `‖I − M[⋆_ε]‖_F` for SPAI, zero for the exact inverse.
    pub spai_residual: f64,
}

impl DiscreteCodifferential {
    pub fn new(ops: &MaxwellOperators, mode: InverseMode) -> Result<Self> {
        let (inverse, spai_residual) = if ops.n_edges() == 0 {
            (HodgeInverse::Empty, 0.0)
        } else {
            match mode {
                InverseMode::Exact => (HodgeInverse::Exact(CholeskySolver::new(&ops.eps)?), 0.0),
                InverseMode::Spai { level, drop_tol } => {
                    let pattern = SparsityPattern::from_matrix(&ops.eps, level);
                    let r = spai_inverse(&ops.eps, &pattern, drop_tol)?;
                    (HodgeInverse::Spai(r.inverse), r.residual)
                }
            }
        };
        Ok(Self {
            inverse,
            c1t: ops.c1.transpose(),
            mu_inv: ops.mu_inv.clone(),
            spai_residual,
        })
    }

    /// Applies the (approximate) inverse electric Hodge star.
    pub fn inverse_hodge(&self, x: &[f64]) -> Vec<f64> {
        match &self.inverse {
            HodgeInverse::Exact(s) => s.solve(x),
            HodgeInverse::Spai(m) => m.mul_vec(x),
            HodgeInverse::Empty => Vec::new(),
        }
    }

    /// `Υ B`.
    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        self.inverse_hodge(&self.c1t.mul_vec(&self.mu_inv.mul_vec(b)))
    }
}

/// `−∂_t B = C¹ E`; returns `C¹ E`.
pub fn faraday_step(ops: &MaxwellOperators, e: &[f64]) -> Vec<f64> {
    ops.c1.mul_vec(e)
}

/// `∂_t E = Υ B − [⋆_ε]⁻¹ J`, computed as `[⋆_ε]⁻¹ (C¹ᵀ[⋆_{μ⁻¹}]B − J)`.
pub fn ampere_step(codiff: &DiscreteCodifferential, b: &[f64], j: Option<&[f64]>) -> Vec<f64> {
    let mut rhs = codiff.c1t.mul_vec(&codiff.mu_inv.mul_vec(b));
    if let Some(j) = j {
        rhs.iter_mut().zip(j).for_each(|(r, s)| *r -= s);
    }
    codiff.inverse_hodge(&rhs)
}

/// `E` at integer step `n`, `B` at `n − 1/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub e: Vec<f64>,
    pub b: Vec<f64>,
    pub step: usize,
    pub dt: f64,
}

impl FieldState {
    pub fn zeros(ops: &MaxwellOperators, dt: f64) -> Self {
        Self {
            e: vec![0.0; ops.n_edges()],
            b: vec![0.0; ops.n_faces()],
            step: 0,
            dt,
        }
    }

    /// Starts from `E(0)`, `B(0)` with `B^{-1/2} = B(0) + (Δt/2) C¹ E(0)`.
    pub fn initial(ops: &MaxwellOperators, e0: Vec<f64>, b0: Vec<f64>, dt: f64) -> Result<Self> {
        if e0.len() != ops.n_edges() || b0.len() != ops.n_faces() {
            return Err(Error::Dimension(format!(
                "initial state has {} edges / {} faces, operators have {} / {}",
                e0.len(),
                b0.len(),
                ops.n_edges(),
                ops.n_faces()
            )));
        }
        let curl = faraday_step(ops, &e0);
        let b = b0.iter().zip(&curl).map(|(b, c)| b + 0.5 * dt * c).collect();
        Ok(Self { e: e0, b, step: 0, dt })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Energy {
    pub electric: f64,
    pub magnetic: f64,
    pub total: f64,
}

/// `Eᵀ[⋆_ε]E + Bᵀ[⋆_{μ⁻¹}]B` for fields given at the same instant.
pub fn quadratic_energy(ops: &MaxwellOperators, e: &[f64], b: &[f64]) -> Energy {
    let electric = dot(e, &ops.eps.mul_vec(e));
    let magnetic = dot(b, &ops.mu_inv.mul_vec(b));
    Energy {
        electric,
        magnetic,
        total: electric + magnetic,
    }
}

/// `Σ E_i D_i + Σ H_i B_i` with `D = [⋆_ε]E` and `H = [⋆_{μ⁻¹}]B`.
pub fn constitutive_energy(ops: &MaxwellOperators, e: &[f64], b: &[f64]) -> f64 {
    let d = ops.eps.mul_vec(e);
    let h = ops.mu_inv.mul_vec(b);
    e.iter().zip(&d).map(|(x, y)| x * y).sum::<f64>() + h.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// Leapfrog Hamiltonian at step `n`: `E^nᵀ[⋆_ε]E^n + B^{n−1/2}ᵀ[⋆_{μ⁻¹}]B^{n+1/2}`.
///
/// With the magnetic term taken as the product of the two neighbouring half
/// steps this quantity is conserved exactly by the source-free scheme; it
/// differs from the instantaneous quadratic form by `O(Δt²)`.
pub fn hamiltonian(ops: &MaxwellOperators, e: &[f64], b_prev: &[f64], b_next: &[f64]) -> Energy {
    let electric = dot(e, &ops.eps.mul_vec(e));
    let magnetic = dot(b_prev, &ops.mu_inv.mul_vec(b_next));
    Energy {
        electric,
        magnetic,
        total: electric + magnetic,
    }
}

/// One leapfrog step. Returns the advanced state and the Hamiltonian at the
/// starting step `n`.
pub fn leapfrog_step(
    ops: &MaxwellOperators,
    codiff: &DiscreteCodifferential,
    state: &FieldState,
    j: Option<&[f64]>,
) -> Result<(FieldState, Energy)> {
    let dt = state.dt;
    let curl = faraday_step(ops, &state.e);
    let b_next: Vec<f64> = state.b.iter().zip(&curl).map(|(b, c)| b - dt * c).collect();
    let energy = hamiltonian(ops, &state.e, &state.b, &b_next);
    let de = ampere_step(codiff, &b_next, j);
    let e_next: Vec<f64> = state.e.iter().zip(&de).map(|(e, d)| e + dt * d).collect();
    if !e_next.iter().chain(&b_next).all(|v| v.is_finite()) {
        return Err(Error::Diverged {
            step: state.step + 1,
            reason: "non-finite field value".into(),
        });
    }
    Ok((
        FieldState {
            e: e_next,
            b: b_next,
            step: state.step + 1,
            dt,
        },
        energy,
    ))
}

/// One row of the energy trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub time: f64,
    pub h_total: f64,
    pub h_electric: f64,
    pub h_magnetic: f64,
    /// `max |C²B^{n+1/2} − C²B^{-1/2}|`.
    pub div_b_residual: f64,
}

pub const TRACE_HEADER: &str = "step,time,H_total,H_electric,H_magnetic,div_B_residual";

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("# time in s, energies in J, div_B_residual in Wb\n");
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.step, r.time, r.h_total, r.h_electric, r.h_magnetic, r.div_b_residual
        );
    }
    s
}

/// Energy growth factor above which a run counts as diverged.
pub const DIVERGENCE_FACTOR: f64 = 1e8;

/// Time-dependent current: `source(t)` returns `J` on the free edges at the
/// half step `t = (n + 1/2) Δt`.
pub type Source<'a> = &'a dyn Fn(f64) -> Vec<f64>;

#[derive(Clone, Debug)]
pub struct Run {
    pub state: FieldState,
    pub trace: Vec<TraceRow>,
}

/// Runs `steps` leapfrog steps from `state`, tracing energy and divergence.
/// Aborts with `Error::Diverged` once the Hamiltonian magnitude exceeds
/// `DIVERGENCE_FACTOR` times its largest value over the first step (or any
/// value turns non-finite).
pub fn simulate(
    ops: &MaxwellOperators,
    codiff: &DiscreteCodifferential,
    mut state: FieldState,
    steps: usize,
    source: Option<Source>,
) -> Result<Run> {
    let div0 = ops.c2.mul_vec(&state.b);
    let mut trace = Vec::with_capacity(steps);
    let mut reference = f64::MIN_POSITIVE;
    for n in 0..steps {
        let j = source.map(|f| f((state.step as f64 + 0.5) * state.dt));
        let (next, energy) = leapfrog_step(ops, codiff, &state, j.as_deref())?;
        let div = ops.c2.mul_vec(&next.b);
        let div_b_residual = div.iter().zip(&div0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if n == 0 || source.is_some() {
            reference = reference.max(energy.total.abs());
        }
        if !energy.total.is_finite() || energy.total.abs() > DIVERGENCE_FACTOR * reference {
            return Err(Error::Diverged {
                step: state.step,
                reason: format!("energy {:e} exceeds {DIVERGENCE_FACTOR:e} x initial {reference:e}", energy.total),
            });
        }
        trace.push(TraceRow {
            step: state.step,
            time: state.time(),
            h_total: energy.total,
            h_electric: energy.electric,
            h_magnetic: energy.magnetic,
            div_b_residual,
        });
        state = next;
    }
    Ok(Run { state, trace })
}

/// Relative linear-drift slope of a trace: least-squares slope of `H(n)`
/// divided by the mean of `H`.
pub fn relative_drift_slope(trace: &[TraceRow]) -> f64 {
    let n = trace.len() as f64;
    if trace.len() < 2 {
        return 0.0;
    }
    let mean_x = trace.iter().map(|r| r.step as f64).sum::<f64>() / n;
    let mean_y = trace.iter().map(|r| r.h_total).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for r in trace {
        let dx = r.step as f64 - mean_x;
        sxy += dx * (r.h_total - mean_y);
        sxx += dx * dx;
    }
    (sxy / sxx) / mean_y
}

/// Largest eigenvalue of `[⋆_ε]⁻¹ K` (with the codifferential's inverse) by
/// power iteration, and the leapfrog bound `2/√λ_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityBound {
    pub lambda_max: f64,
    pub dt_max: f64,
    pub iterations: usize,
}

pub fn stable_timestep(ops: &MaxwellOperators, codiff: &DiscreteCodifferential) -> Result<StabilityBound> {
    let n = ops.n_edges();
    if n == 0 || ops.n_faces() == 0 {
        return Ok(StabilityBound {
            lambda_max: 0.0,
            dt_max: f64::INFINITY,
            iterations: 0,
        });
    }
    // start inside the range of C¹ᵀ so the null space is never amplified
    let seed: Vec<f64> = (0..ops.n_faces()).map(|i| 1.0 + ((i * 37) % 11) as f64 / 11.0).collect();
    let mut x = ops.c1.tr_mul_vec(&seed);
    let mut lambda = 0.0;
    let cap = 100_000;
    for it in 1..=cap {
        // y = Υ C¹ x, Rayleigh quotient xᵀKx / xᵀ M x
        let cx = ops.c1.mul_vec(&x);
        let kx = ops.c1.tr_mul_vec(&ops.mu_inv.mul_vec(&cx));
        let mx = ops.eps.mul_vec(&x);
        let xmx = dot(&x, &mx);
        if xmx == 0.0 {
            return Ok(StabilityBound {
                lambda_max: 0.0,
                dt_max: f64::INFINITY,
                iterations: it,
            });
        }
        let next_lambda = dot(&x, &kx) / xmx;
        let y = codiff.inverse_hodge(&kx);
        let norm = dot(&y, &ops.eps.mul_vec(&y)).sqrt();
        x = y.iter().map(|v| v / norm).collect();
        if it > 3 && (next_lambda - lambda).abs() <= 1e-13 * next_lambda {
            return Ok(StabilityBound {
                lambda_max: next_lambda,
                dt_max: 2.0 / next_lambda.sqrt(),
                iterations: it,
            });
        }
        lambda = next_lambda;
    }
    Err(Error::NoConvergence {
        what: "power iteration for the stability bound",
        iterations: cap,
    })
}

/// Trajectory comparison between two inverse modes from the same start.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InverseComparison {
    pub steps: usize,
    pub dt: f64,
    /// `‖I − M[⋆_ε]‖_F` of the approximate inverse.
    pub residual: f64,
    /// `n Δt √λ_max`, the phase advanced by the fastest mode.
    pub horizon: f64,
    /// Largest `‖E_a − E_b‖₂ / max_n ‖E_b‖₂` over the run.
    pub max_divergence: f64,
    /// `residual × horizon`.
    pub envelope: f64,
    pub within_envelope: bool,
}

/// Steps `reference` and `candidate` side by side for `steps` steps and
/// measures how far the electric fields drift apart.
pub fn compare_inverse_modes(
    ops: &MaxwellOperators,
    reference: &DiscreteCodifferential,
    candidate: &DiscreteCodifferential,
    start: &FieldState,
    steps: usize,
) -> Result<InverseComparison> {
    let bound = stable_timestep(ops, reference)?;
    let (mut a, mut b) = (start.clone(), start.clone());
    let (mut worst_diff, mut scale) = (0.0f64, dot(&start.e, &start.e).sqrt());
    for _ in 0..steps {
        a = leapfrog_step(ops, reference, &a, None)?.0;
        b = leapfrog_step(ops, candidate, &b, None)?.0;
        scale = scale.max(dot(&a.e, &a.e).sqrt());
        let diff = a.e.iter().zip(&b.e).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        worst_diff = worst_diff.max(diff);
    }
    let max_divergence = if scale > 0.0 { worst_diff / scale } else { 0.0 };
    let horizon = steps as f64 * start.dt * bound.lambda_max.sqrt();
    let residual = candidate.spai_residual;
    let envelope = residual * horizon;
    Ok(InverseComparison {
        steps,
        dt: start.dt,
        residual,
        horizon,
        max_divergence,
        envelope,
        within_envelope: max_divergence <= envelope,
    })
}

/// Result of the cavity eigenproblem `K e = k² [⋆_ε] e` on PEC-reduced
/// operators.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenReport {
    /// Dimension of the null space of the reduced curl (exact integer rank).
    pub zero_count: usize,
    /// Number of nonzero eigenvalues, `N_E^h − zero_count`.
    pub nonzero_count: usize,
    /// Smallest nonzero `k²` values in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Largest relative residual `‖K x − θ M x‖ / ‖K x‖` among them.
    pub max_residual: f64,
    pub iterations: usize,
    pub shift: f64,
}

/// Smallest `count` nonzero eigenvalues of the curl-curl pencil.
///
/// Shift-invert subspace iteration with `(K + σ[⋆_ε])⁻¹[⋆_ε]`; gradients of
/// free nodal functions are projected out after every sweep so the static
/// null space (eigenvalue `−σ` after shifting) never enters the block.
/// `shift = None` uses `σ = 10⁻³ tr K / tr M`.
pub fn eigenmodes(ops: &MaxwellOperators, count: usize, shift: Option<f64>) -> Result<EigenReport> {
    let n = ops.n_edges();
    let rank = incidence_rank(&ops.incidence[1])?;
    let zero_count = n - rank;
    let wanted = count.min(rank);
    let k = ops.stiffness();
    let trace_ratio = k.diagonal().iter().sum::<f64>() / ops.eps.diagonal().iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let sigma = shift.unwrap_or(1e-3 * trace_ratio);
    if wanted == 0 {
        return Ok(EigenReport {
            zero_count,
            nonzero_count: rank,
            eigenvalues: Vec::new(),
            max_residual: 0.0,
            iterations: 0,
            shift: sigma,
        });
    }
    let m = &ops.eps;
    let shifted = CholeskySolver::new(&k.add(m, sigma))?;

    // gradient projector x ← x − G (GᵀMG)⁻¹ GᵀM x
    let g = &ops.c0;
    let gmg = g.transpose().matmul(&m.matmul(g));
    let gmg_solver = if g.ncols() > 0 { Some(CholeskySolver::new(&gmg)?) } else { None };
    let project = |x: &mut Vec<f64>| {
        if let Some(s) = &gmg_solver {
            let coeff = s.solve(&g.tr_mul_vec(&m.mul_vec(x)));
            let grad = g.mul_vec(&coeff);
            x.iter_mut().zip(&grad).for_each(|(a, b)| *a -= b);
        }
    };

    let b = (wanted + 4).min(rank);
    let mut block: Vec<Vec<f64>> = (0..b)
        .map(|j| {
            let mut v: Vec<f64> = (0..n)
                .map(|i| (((i + 1) * (j + 3) * 2_654_435_761usize) % 1_000_003) as f64 / 1_000_003.0 - 0.5)
                .collect();
            project(&mut v);
            v
        })
        .collect();

    let cap = 1000;
    let mut previous: Option<Vec<f64>> = None;
    for it in 1..=cap {
        for v in block.iter_mut() {
            let mut y = shifted.solve(&m.mul_vec(v));
            project(&mut y);
            *v = y;
        }
        // Rayleigh–Ritz on the block
        let kv: Vec<Vec<f64>> = block.iter().map(|v| k.mul_vec(v)).collect();
        let mv: Vec<Vec<f64>> = block.iter().map(|v| m.mul_vec(v)).collect();
        let kr = DMatrix::from_fn(b, b, |i, j| dot(&block[i], &kv[j]));
        let mr = DMatrix::from_fn(b, b, |i, j| dot(&block[i], &mv[j]));
        let kr = (&kr + kr.transpose()) * 0.5;
        let mr = (&mr + mr.transpose()) * 0.5;
        let l = mr
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Solve("subspace block lost rank".into()))?
            .l();
        let linv = l.clone().try_inverse().ok_or_else(|| Error::Solve("subspace block lost rank".into()))?;
        let reduced = &linv * &kr * linv.transpose();
        let eig = (0.5 * (&reduced + reduced.transpose())).symmetric_eigen();
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let coeffs = linv.transpose() * &eig.eigenvectors;
        let mut new_block = Vec::with_capacity(b);
        let mut thetas = Vec::with_capacity(b);
        let mut max_residual: f64 = 0.0;
        for (rank_pos, &c) in order.iter().enumerate() {
            let col = coeffs.column(c);
            let mut x = vec![0.0; n];
            let (mut kx, mut mx) = (vec![0.0; n], vec![0.0; n]);
            for (i, &w) in col.iter().enumerate() {
                for r in 0..n {
                    x[r] += w * block[i][r];
                    kx[r] += w * kv[i][r];
                    mx[r] += w * mv[i][r];
                }
            }
            let theta = eig.eigenvalues[c];
            if rank_pos < wanted {
                let res: f64 = kx.iter().zip(&mx).map(|(a, b)| (a - theta * b).powi(2)).sum::<f64>().sqrt();
                let scale = kx.iter().map(|a| a * a).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                max_residual = max_residual.max(res / scale);
            }
            thetas.push(theta);
            new_block.push(x);
        }
        block = new_block;
        let current: Vec<f64> = thetas[..wanted].to_vec();
        let settled = previous
            .as_ref()
            .is_some_and(|p| p.iter().zip(&current).all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs()));
        if max_residual <= 1e-8 || (settled && max_residual <= 1e-6) {
            return Ok(EigenReport {
                zero_count,
                nonzero_count: rank,
                eigenvalues: current,
                max_residual,
                iterations: it,
                shift: sigma,
            });
        }
        previous = Some(current);
    }
    Err(Error::NoConvergence {
        what: "shift-invert subspace iteration",
        iterations: cap,
    })
}

/// Dense generalized eigenvalues of `(K, M)` for small problems (test oracle
/// and diagnostics).
pub fn dense_generalized_eigenvalues(k: &CsrMatrix<f64>, m: &CsrMatrix<f64>) -> Result<Vec<f64>> {
    let l = m
        .to_dense()
        .cholesky()
        .ok_or_else(|| Error::Solve("mass matrix is not SPD".into()))?
        .l();
    let linv = l.try_inverse().ok_or_else(|| Error::Solve("singular factor".into()))?;
    let a = &linv * k.to_dense() * linv.transpose();
    let mut ev: Vec<f64> = (0.5 * (&a + a.transpose())).symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Random-looking but deterministic vector in `[-1, 1]`.
pub fn deterministic_vector(len: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
    (0..len)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{classify_boundary, generate};
    use crate::whitney::{de_rham, AnalyticForm};
    use nalgebra::Vector3;

    fn vacuum_ops(c: &SimplicialComplex, pec: bool) -> MaxwellOperators {
        let cls = classify_boundary(c).unwrap();
        build_operators(c, &MaterialMap::vacuum(c), pec.then_some(&cls)).unwrap()
    }

    #[test]
    fn faraday_of_constant_field_vanishes() {
        let c = generate::single_tet();
        let ops = vacuum_ops(&c, false);
        let e = de_rham(&AnalyticForm::one_form(|_| Vector3::new(0.3, -1.2, 2.0)), &c, 1).unwrap();
        faraday_step(&ops, &e.values).iter().for_each(|v| assert!(v.abs() < 1e-14));
        assert!(faraday_step(&ops, &vec![0.0; 6]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn faraday_matches_triangle_boundary_sums() {
        let c = generate::box_mesh(2);
        let ops = vacuum_ops(&c, false);
        let e = deterministic_vector(c.count(1), 3);
        let out = faraday_step(&ops, &e);
        for (f, &[a, b, cc]) in c.faces().iter().enumerate() {
            let val = |u: usize, v: usize| e[c.find_simplex(&[u, v]).unwrap()];
            let expected = val(b, cc) - val(a, cc) + val(a, b);
            assert!((out[f] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn faraday_is_metric_free() {
        let c = generate::box_mesh(2);
        let moved: Vec<_> = c.vertices().iter().map(|v| v + Vector3::new(0.1 * v.y * v.y, 0.05 * v.z, 0.0)).collect();
        let c2 = c.with_vertices(moved).unwrap();
        let e = deterministic_vector(c.count(1), 9);
        assert_eq!(faraday_step(&vacuum_ops(&c, false), &e), faraday_step(&vacuum_ops(&c2, false), &e));
    }

    #[test]
    fn pec_reduction_counts() {
        let t = generate::single_tet();
        assert_eq!(vacuum_ops(&t, true).n_edges(), 0);
        let k = generate::kuhn_cube();
        let cls = classify_boundary(&k).unwrap();
        let ops = vacuum_ops(&k, true);
        assert_eq!(ops.n_edges(), k.count(1) - cls.boundary_count(1));
        assert_eq!(ops.incidence[0].nilpotency_defect(&ops.incidence[1]).0, 0);
        assert_eq!(ops.incidence[1].nilpotency_defect(&ops.incidence[2]).0, 0);
    }

    #[test]
    fn zero_state_stays_zero() {
        let c = generate::box_mesh(2);
        let ops = vacuum_ops(&c, true);
        let cd = DiscreteCodifferential::new(&ops, InverseMode::Exact).unwrap();
        let run = simulate(&ops, &cd, FieldState::zeros(&ops, 0.01), 50, None).unwrap();
        assert!(run.state.e.iter().chain(&run.state.b).all(|&v| v == 0.0));
        assert!(run.trace.iter().all(|r| r.h_total == 0.0));
        assert!(ampere_step(&cd, &vec![0.0; ops.n_faces()], None).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hamiltonian_is_conserved_exactly() {
        let c = generate::box_mesh(2);
        let ops = vacuum_ops(&c, true);
        let cd = DiscreteCodifferential::new(&ops, InverseMode::Exact).unwrap();
        let bound = stable_timestep(&ops, &cd).unwrap();
        let e0 = deterministic_vector(ops.n_edges(), 1);
        let b0 = ops.c1.mul_vec(&deterministic_vector(ops.n_edges(), 2));
        let st = FieldState::initial(&ops, e0, b0, 0.9 * bound.dt_max).unwrap();
        let run = simulate(&ops, &cd, st, 500, None).unwrap();
        let h0 = run.trace[0].h_total;
        for r in &run.trace {
            assert!((r.h_total - h0).abs() < 1e-11 * h0);
            assert!(r.div_b_residual < 1e-12);
        }
    }

    #[test]
    fn energy_identities() {
        let c = generate::kuhn_cube();
        let ops = vacuum_ops(&c, false);
        let e = deterministic_vector(ops.n_edges(), 4);
        let b = deterministic_vector(ops.n_faces(), 5);
        let q = quadratic_energy(&ops, &e, &b);
        assert_eq!(q.total, constitutive_energy(&ops, &e, &b));
        let e2: Vec<f64> = e.iter().map(|x| 2.0 * x).collect();
        assert_eq!(quadratic_energy(&ops, &e2, &b).electric, 4.0 * q.electric);
        assert_eq!(quadratic_energy(&ops, &vec![0.0; e.len()], &vec![0.0; b.len()]).total, 0.0);
    }

    #[test]
    fn stability_bound_matches_dense_oracle() {
        let c = generate::single_tet();
        let ops = vacuum_ops(&c, false);
        let cd = DiscreteCodifferential::new(&ops, InverseMode::Exact).unwrap();
        let bound = stable_timestep(&ops, &cd).unwrap();
        let dense = dense_generalized_eigenvalues(&ops.stiffness(), &ops.eps).unwrap();
        let lmax = *dense.last().unwrap();
        assert!((bound.lambda_max - lmax).abs() <= 1e-6 * lmax);
    }

    #[test]
    fn stability_bound_scales_with_wave_speed() {
        let c = generate::kuhn_cube();
        let bound = |eps: f64, mu: f64| {
            let ops = build_operators(&c, &MaterialMap::uniform(6, eps, mu).unwrap(), None).unwrap();
            let cd = DiscreteCodifferential::new(&ops, InverseMode::Exact).unwrap();
            stable_timestep(&ops, &cd).unwrap().dt_max
        };
        let base = bound(1.0, 1.0);
        assert!((bound(4.0, 1.0) / base - 2.0).abs() < 1e-6);
        assert!((bound(4.0, 4.0) / base - 4.0).abs() < 1e-6);
    }

    #[test]
    fn refinement_lowers_bound() {
        let b: Vec<f64> = (1..=3)
            .map(|n| {
                let ops = vacuum_ops(&generate::box_mesh(n), false);
                let cd = DiscreteCodifferential::new(&ops, InverseMode::Exact).unwrap();
                stable_timestep(&ops, &cd).unwrap().dt_max
            })
            .collect();
        assert!(b[0] > b[1] && b[1] > b[2]);
    }

    #[test]
    fn too_large_step_diverges() {
        let c = generate::kuhn_cube();
        let ops = vacuum_ops(&c, false);
        let cd = DiscreteCodifferential::new(&ops, InverseMode::Exact).unwrap();
        let bound = stable_timestep(&ops, &cd).unwrap();
        let st = FieldState::initial(
            &ops,
            deterministic_vector(ops.n_edges(), 7),
            vec![0.0; ops.n_faces()],
            1.1 * bound.dt_max,
        )
        .unwrap();
        match simulate(&ops, &cd, st, 200, None) {
            Err(Error::Diverged { step, .. }) => assert!(step < 200),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn eigenmodes_match_dense_solver_on_small_box() {
        let c = generate::box_mesh(3);
        let ops = vacuum_ops(&c, true);
        let rep = eigenmodes(&ops, 4, None).unwrap();
        let dense = dense_generalized_eigenvalues(&ops.stiffness(), &ops.eps).unwrap();
        let scale = dense.last().unwrap();
        let zeros = dense.iter().filter(|&&v| v.abs() < 1e-9 * scale).count();
        assert_eq!(rep.zero_count, zeros);
        assert_eq!(rep.zero_count, ops.nodes.len());
        for (a, b) in rep.eigenvalues.iter().zip(&dense[zeros..]) {
            assert!((a - b).abs() < 1e-7 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn inverse_mode_parsing() {
        assert_eq!("exact".parse::<InverseMode>().unwrap(), InverseMode::Exact);
        assert_eq!(
            "spai:3".parse::<InverseMode>().unwrap(),
            InverseMode::Spai { level: 3, drop_tol: 0.0 }
        );
        assert!("spai".parse::<InverseMode>().is_err());
        assert!("lu".parse::<InverseMode>().is_err());
    }
}
