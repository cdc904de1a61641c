//! Frequency-domain perfectly matched layers by complex coordinate
//! stretching, realized as complex material tensors in the Hodge stars.
//!
//! With stretch factors `s = (s_x, s_y, s_z)` and `S = diag(s)`, the
//! stretched tensors are `ε̃ = det(S) S⁻¹ ε S⁻¹` and likewise for `μ`; for
//! scalar materials this is `ε Λ` with `Λ = diag(s_y s_z/s_x, …)`. The
//! incidence matrices are untouched. Time dependence is `e^{−iωt}`.

use std::fmt::Write as _;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hodge::{assemble_weighted, load_vector, HodgeKind, MaterialMap};
use crate::maxwell::MaxwellOperators;
use crate::mesh::boundary::{from_boundary_faces, BoundaryClassification};
use crate::mesh::complex::SimplicialComplex;
use crate::mesh::generate;
use crate::mesh::incidence::incidence;
use crate::sparse::{CsrMatrix, LuSolver};

/// One absorbing slab along an axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Slab {
    /// Coordinate where the layer starts.
    pub start: f64,
    pub thickness: f64,
    /// `+1` if the layer extends toward increasing coordinate, `-1` otherwise.
    pub direction: f64,
    /// Peak loss `Ω` (1/s) at the far side of the layer.
    pub omega_max: f64,
    /// Peak real stretch `a ≥ 1`.
    pub a_max: f64,
    /// Grading exponent `m` of `(depth/thickness)^m`.
    pub order: i32,
}

impl Slab {
    pub fn new(start: f64, thickness: f64, direction: f64, omega_max: f64) -> Self {
        Self {
            start,
            thickness,
            direction,
            omega_max,
            a_max: 1.0,
            order: 2,
        }
    }

    /// Normalized depth into the slab in `[0, 1]`, zero outside.
    fn depth(&self, coord: f64) -> f64 {
        let d = (coord - self.start) * self.direction;
        if d <= 0.0 || self.thickness <= 0.0 {
            0.0
        } else {
            (d / self.thickness).min(1.0)
        }
    }

    /// `(depth/thickness)^m` inside the slab, zero outside (also for `m = 0`).
    fn grading(&self, coord: f64) -> f64 {
        match self.depth(coord) {
            0.0 => 0.0,
            d => d.powi(self.order),
        }
    }

    pub fn a(&self, coord: f64) -> f64 {
        1.0 + (self.a_max - 1.0) * self.grading(coord)
    }

    pub fn omega(&self, coord: f64) -> f64 {
        self.omega_max * self.grading(coord)
    }

    /// `∫ Ω dζ` across the slab.
    pub fn integrated_loss(&self) -> f64 {
        self.omega_max * self.thickness / (self.order as f64 + 1.0)
    }
}

/// Slabs per axis (x, y, z).
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StretchProfile {
    pub axes: [Vec<Slab>; 3],
}

impl StretchProfile {
    pub fn trivial() -> Self {
        Self::default()
    }

    pub fn with_slab(mut self, axis: usize, slab: Slab) -> Self {
        self.axes[axis].push(slab);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for slab in self.axes.iter().flatten() {
            if slab.a_max < 1.0 || slab.omega_max < 0.0 || slab.thickness < 0.0 || slab.order < 0 {
                return Err(Error::Invalid(format!(
                    "stretch profile needs a >= 1, Omega >= 0, thickness >= 0 and m >= 0, got {slab:?}"
                )));
            }
        }
        Ok(())
    }

    /// `s_ζ = a_ζ + iΩ_ζ/ω` per axis at `x`. Overlapping slabs on one axis
    /// add their excess stretch.
    pub fn stretch(&self, x: &Vector3<f64>, omega: f64) -> [Complex64; 3] {
        std::array::from_fn(|axis| {
            let (mut a, mut loss) = (1.0, 0.0);
            for slab in &self.axes[axis] {
                a += slab.a(x[axis]) - 1.0;
                loss += slab.omega(x[axis]);
            }
            Complex64::new(a, loss / omega)
        })
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if omega == 0.0 || !omega.is_finite() {
        return Err(Error::Invalid(format!("angular frequency must be finite and nonzero, got {omega}")));
    }
    Ok(())
}

/// Diagonal of `Λ = diag(s_y s_z/s_x, s_x s_z/s_y, s_x s_y/s_z)` at `point`.
pub fn stretch_tensor(point: &Vector3<f64>, omega: f64, profile: &StretchProfile) -> Result<[Complex64; 3]> {
    check_omega(omega)?;
    let s = profile.stretch(point, omega);
    let det = s[0] * s[1] * s[2];
    Ok(std::array::from_fn(|a| det / (s[a] * s[a])))
}

/// `det(S) S⁻¹ W S⁻¹` (forward) or `S W S / det(S)` (inverse tensors).
fn stretched_weight(w: &[[f64; 3]; 3], s: &[Complex64; 3], inverse: bool) -> [[Complex64; 3]; 3] {
    let det = s[0] * s[1] * s[2];
    std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            let factor = if inverse { s[a] * s[b] / det } else { det / (s[a] * s[b]) };
            Complex64::new(w[a][b], 0.0) * factor
        })
    })
}

/// Complex-symmetric stretched Hodge matrices on the full complex.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexHodge {
    pub eps: CsrMatrix<Complex64>,
    pub mu_inv: CsrMatrix<Complex64>,
}

pub fn assemble_stretched(
    complex: &SimplicialComplex,
    materials: &MaterialMap,
    profile: &StretchProfile,
    omega: f64,
) -> Result<ComplexHodge> {
    check_omega(omega)?;
    profile.validate()?;
    if materials.len() != complex.count(3) {
        return Err(Error::Dimension(format!(
            "material map has {} tets, mesh has {}",
            materials.len(),
            complex.count(3)
        )));
    }
    let rows = |m: nalgebra::Matrix3<f64>| -> [[f64; 3]; 3] { std::array::from_fn(|a| std::array::from_fn(|b| m[(a, b)])) };
    let eps_w: Vec<_> = (0..complex.count(3)).map(|t| rows(*materials.eps(t))).collect();
    let mu_inv_w: Vec<_> = (0..complex.count(3))
        .map(|t| rows(materials.mu(t).try_inverse().expect("SPD tensor is invertible")))
        .collect();
    let eps = assemble_weighted(complex, HodgeKind::Epsilon.degree(), |t, x| {
        stretched_weight(&eps_w[t], &profile.stretch(x, omega), false)
    });
    let mu_inv = assemble_weighted(complex, HodgeKind::MuInv.degree(), |t, x| {
        stretched_weight(&mu_inv_w[t], &profile.stretch(x, omega), true)
    });
    Ok(ComplexHodge { eps, mu_inv })
}

/// PEC-reduced complex operators for the time-harmonic problem.
#[derive(Clone, Debug)]
pub struct HarmonicOperators {
    pub edges: Vec<usize>,
    pub faces: Vec<usize>,
    pub c1: CsrMatrix<f64>,
    pub eps: CsrMatrix<Complex64>,
    pub mu_inv: CsrMatrix<Complex64>,
}

impl HarmonicOperators {
    pub fn new(complex: &SimplicialComplex, classification: &BoundaryClassification, hodge: &ComplexHodge) -> Self {
        let edges = classification.interior(1);
        let faces = classification.interior(2);
        Self {
            c1: incidence(complex, 1).restrict(&faces, &edges).to_csr(),
            eps: hodge.eps.submatrix(&edges, &edges),
            mu_inv: hodge.mu_inv.submatrix(&faces, &faces),
            edges,
            faces,
        }
    }

    /// `C¹ᵀ[⋆̃_{μ⁻¹}]C¹ − ω²[⋆̃_ε]`.
    pub fn system(&self, omega: f64) -> CsrMatrix<Complex64> {
        let c1 = self.c1.to_complex();
        c1.transpose()
            .matmul(&self.mu_inv.matmul(&c1))
            .add(&self.eps, Complex64::new(-omega * omega, 0.0))
    }
}

#[derive(Clone, Debug)]
pub struct HarmonicSolution {
    pub e: Vec<Complex64>,
    /// `‖A E − b‖ / ‖b‖`.
    pub residual: f64,
}

/// Solves `(C¹ᵀ[⋆̃_{μ⁻¹}]C¹ − ω²[⋆̃_ε]) E = iω J` by sparse complex LU.
pub fn harmonic_solve(ops: &HarmonicOperators, omega: f64, j: &[Complex64]) -> Result<HarmonicSolution> {
    check_omega(omega)?;
    if j.len() != ops.edges.len() {
        return Err(Error::Dimension(format!("source has {} entries, system has {}", j.len(), ops.edges.len())));
    }
    let a = ops.system(omega);
    let b: Vec<Complex64> = j.iter().map(|v| Complex64::new(0.0, omega) * v).collect();
    let bnorm = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok(HarmonicSolution {
            e: vec![Complex64::new(0.0, 0.0); j.len()],
            residual: 0.0,
        });
    }
    let e = LuSolver::new(&a)?.solve(&b);
    if !e.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::Solve("singular harmonic system (resonance?)".into()));
    }
    let ae = a.mul_vec(&e);
    let residual = ae.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt() / bnorm;
    Ok(HarmonicSolution { e, residual })
}

/// Lossless real-arithmetic counterpart: solves `(K − ω²M) x = ω J` and
/// returns `E = i x`.
pub fn harmonic_solve_real(ops: &MaxwellOperators, omega: f64, j: &[f64]) -> Result<Vec<Complex64>> {
    check_omega(omega)?;
    let a = ops.stiffness().add(&ops.eps, -omega * omega);
    let b: Vec<f64> = j.iter().map(|v| omega * v).collect();
    let x = LuSolver::new(&a)?.solve(&b);
    Ok(x.into_iter().map(|v| Complex64::new(0.0, v)).collect())
}

/// Parallel-plate waveguide along x used for reflection measurements.
///
/// PEC plates at `z = 0` and `z = height` and PEC caps at both ends; the
/// side walls `y = 0, width` keep the natural (magnetic-wall) condition so a
/// TEM wave `E = E_z(x) ẑ` propagates with speed `1/√(εμ)`. A uniform
/// current sheet one cell thick at `source_x` drives the guide, and the PML
/// occupies `[pml_start, pml_start + thickness]` in front of the far cap.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Waveguide {
    /// Cell size along every axis.
    pub h: f64,
    pub cross_cells: [usize; 2],
    pub source_x: f64,
    /// Observation window `[x0, x1]` for the standing-wave fit.
    pub window: [f64; 2],
    pub pml_start: f64,
}

impl Default for Waveguide {
    fn default() -> Self {
        Self {
            h: 0.05,
            cross_cells: [2, 2],
            source_x: 0.2,
            window: [0.6, 2.0],
            pml_start: 2.5,
        }
    }
}

/// Reflection measurement at one profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub omega: f64,
    pub omega_max_profile: f64,
    pub thickness: f64,
    pub reflection_mag: f64,
    /// Continuum value `exp(−2 ∫Ω/c dζ)`.
    pub analytic: f64,
    pub solve_residual: f64,
}

impl Waveguide {
    fn cells_along(&self, length: f64) -> usize {
        (length / self.h).round() as usize
    }

    pub fn mesh(&self, thickness: f64) -> SimplicialComplex {
        let nx = self.cells_along(self.pml_start + thickness).max(1);
        let [ny, nz] = self.cross_cells;
        generate::box_grid(
            [nx, ny, nz],
            Vector3::zeros(),
            Vector3::new(nx as f64 * self.h, ny as f64 * self.h, nz as f64 * self.h),
        )
    }

    /// PEC faces: the two plates and both end caps.
    pub fn classification(&self, complex: &SimplicialComplex) -> BoundaryClassification {
        let (lo, hi) = complex.bounds();
        let tol = 1e-9 * self.h;
        let on = |v: f64, w: f64| (v - w).abs() < tol;
        let faces = (0..complex.count(2))
            .map(|f| {
                if complex.face_tets(f).len() != 1 {
                    return false;
                }
                let vs = complex.faces()[f].map(|v| complex.vertex(v));
                let all = |axis: usize, w: f64| vs.iter().all(|p| on(p[axis], w));
                all(2, lo.z) || all(2, hi.z) || all(0, lo.x) || all(0, hi.x)
            })
            .collect();
        from_boundary_faces(complex, faces)
    }

    pub fn profile(&self, thickness: f64, omega_max: f64) -> StretchProfile {
        StretchProfile::trivial().with_slab(0, Slab::new(self.pml_start, thickness, 1.0, omega_max))
    }

    /// Current sheet `J = ẑ` in the cell layer `[source_x, source_x + h]`.
    pub fn source(&self, complex: &SimplicialComplex) -> Vec<f64> {
        let (x0, x1) = (self.source_x, self.source_x + self.h);
        load_vector(complex, 1, |x| {
            if x.x > x0 && x.x < x1 {
                Vector3::new(0.0, 0.0, 1.0)
            } else {
                Vector3::zeros()
            }
        })
    }

    /// Cross-section sums of the z-edge values at each grid station in the
    /// observation window, ordered by x.
    pub fn samples(&self, complex: &SimplicialComplex, e_full: &[Complex64]) -> Vec<Complex64> {
        let first = (self.window[0] / self.h).round() as usize;
        let last = (self.window[1] / self.h).round() as usize;
        let mut sums = vec![Complex64::new(0.0, 0.0); last + 1 - first];
        for (e, &[a, b]) in complex.edges().iter().enumerate() {
            let (pa, pb) = (complex.vertex(a), complex.vertex(b));
            if (pa.x - pb.x).abs() > 1e-9 * self.h || (pa.y - pb.y).abs() > 1e-9 * self.h {
                continue;
            }
            let i = (pa.x / self.h).round() as usize;
            if (first..=last).contains(&i) {
                sums[i - first] += e_full[e] * (pb.z - pa.z).signum();
            }
        }
        sums
    }

    /// Solves the driven problem and returns the measured `|R|`.
    pub fn measure(&self, materials_eps: f64, materials_mu: f64, omega: f64, thickness: f64, omega_max: f64) -> Result<SweepRow> {
        let complex = self.mesh(thickness);
        let materials = MaterialMap::uniform(complex.count(3), materials_eps, materials_mu)?;
        let profile = self.profile(thickness, omega_max);
        let hodge = assemble_stretched(&complex, &materials, &profile, omega)?;
        let cls = self.classification(&complex);
        let ops = HarmonicOperators::new(&complex, &cls, &hodge);
        let j_full = self.source(&complex);
        let j: Vec<Complex64> = ops.edges.iter().map(|&e| Complex64::new(j_full[e], 0.0)).collect();
        let sol = harmonic_solve(&ops, omega, &j)?;
        let mut e_full = vec![Complex64::new(0.0, 0.0); complex.count(1)];
        ops.edges.iter().zip(&sol.e).for_each(|(&g, &v)| e_full[g] = v);
        let fit = fit_standing_wave(&self.samples(&complex, &e_full))?;
        let c = 1.0 / (materials_eps * materials_mu).sqrt();
        let slab = profile.axes[0][0];
        Ok(SweepRow {
            omega,
            omega_max_profile: omega_max,
            thickness,
            reflection_mag: fit.reflection,
            analytic: (-2.0 * slab.integrated_loss() / c).exp(),
            solve_residual: sol.residual,
        })
    }
}

/// Two-exponential fit `u_n = A z^n + B z^{−n}` of uniformly spaced samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StandingWave {
    /// Forward propagation factor per sample (`Im z > 0` for `e^{ikx}`).
    pub z: Complex64,
    pub forward: Complex64,
    pub backward: Complex64,
    /// `|B| / |A|`.
    pub reflection: f64,
}

/// Prony-type fit using `u_{n+1} + u_{n−1} = (z + 1/z) u_n`, then linear
/// least squares for the amplitudes.
pub fn fit_standing_wave(u: &[Complex64]) -> Result<StandingWave> {
    if u.len() < 4 {
        return Err(Error::Invalid("standing-wave fit needs at least 4 samples".into()));
    }
    let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
    for n in 1..u.len() - 1 {
        num += u[n].conj() * (u[n + 1] + u[n - 1]);
        den += u[n].norm_sqr();
    }
    if den == 0.0 {
        return Err(Error::Invalid("standing-wave fit on an all-zero field".into()));
    }
    let c = num / den;
    let disc = (c * c - 4.0).sqrt();
    let mut z = (c + disc) / 2.0;
    if z.im < 0.0 {
        z = 1.0 / z;
    }
    // normal equations for [A, B] with basis z^n, z^{-n}
    let basis: Vec<(Complex64, Complex64)> = (0..u.len()).map(|n| (z.powi(n as i32), z.powi(-(n as i32)))).collect();
    let (mut g11, mut g12, mut g22) = (0.0, Complex64::new(0.0, 0.0), 0.0);
    let (mut r1, mut r2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    for ((p, q), v) in basis.iter().zip(u) {
        g11 += p.norm_sqr();
        g22 += q.norm_sqr();
        g12 += p.conj() * q;
        r1 += p.conj() * v;
        r2 += q.conj() * v;
    }
    let det = g11 * g22 - g12.norm_sqr();
    let forward = (r1 * g22 - g12 * r2) / det;
    let backward = (r2 * g11 - g12.conj() * r1) / det;
    Ok(StandingWave {
        z,
        forward,
        backward,
        reflection: backward.norm() / forward.norm(),
    })
}

/// Measures `|R|` for every `(Ω_max, thickness)` pair.
pub fn reflection_sweep(guide: &Waveguide, omega: f64, profiles: &[(f64, f64)]) -> Result<Vec<SweepRow>> {
    profiles
        .iter()
        .map(|&(omega_max, thickness)| guide.measure(1.0, 1.0, omega, thickness, omega_max))
        .collect()
}

pub const SWEEP_HEADER: &str = "omega,omega_max_profile,thickness,reflection_mag";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("# omega and omega_max_profile in rad/s, thickness in m, reflection_mag dimensionless\n");
    s.push_str(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{:.6e},{:.6e},{:.6e},{:.6e}", r.omega, r.omega_max_profile, r.thickness, r.reflection_mag);
    }
    s
}
