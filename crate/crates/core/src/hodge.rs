//! Galerkin Hodge-star matrices from Whitney forms, their sparse approximate
//! inverses, SPD diagnostics and the barycentric dual pairing check.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::complex::SimplicialComplex;
use crate::mesh::dual::DualComplex;
use crate::quadrature;
use crate::sparse::{CholeskySolver, CsrMatrix, Scalar};
use crate::whitney::{local_count, local_whitney, Proxy};

/// Per-tet permittivity and permeability tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialMap {
    eps: Vec<Matrix3<f64>>,
    mu: Vec<Matrix3<f64>>,
}

fn check_spd_tensor(m: &Matrix3<f64>, tet: usize) -> Result<()> {
    let scale = m.amax();
    let sym = (m - m.transpose()).amax();
    if !m.iter().all(|x| x.is_finite()) || sym > 1e-14 * scale || m.cholesky().is_none() {
        return Err(Error::NotSpd { tet });
    }
    Ok(())
}

impl MaterialMap {
    pub fn uniform(ntets: usize, eps: f64, mu: f64) -> Result<Self> {
        Self::from_tensors(
            vec![Matrix3::identity() * eps; ntets],
            vec![Matrix3::identity() * mu; ntets],
        )
    }

    pub fn vacuum(complex: &SimplicialComplex) -> Self {
        Self::uniform(complex.count(3), 1.0, 1.0).expect("unit material is SPD")
    }

    pub fn from_tensors(eps: Vec<Matrix3<f64>>, mu: Vec<Matrix3<f64>>) -> Result<Self> {
        if eps.len() != mu.len() {
            return Err(Error::Dimension(format!(
                "{} permittivity tensors but {} permeability tensors",
                eps.len(),
                mu.len()
            )));
        }
        for (t, (e, m)) in eps.iter().zip(&mu).enumerate() {
            check_spd_tensor(e, t)?;
            check_spd_tensor(m, t)?;
        }
        Ok(Self { eps, mu })
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    pub fn eps(&self, t: usize) -> &Matrix3<f64> {
        &self.eps[t]
    }

    pub fn mu(&self, t: usize) -> &Matrix3<f64> {
        &self.mu[t]
    }

    /// Multiplies both tensors of every tet by the given factors.
    pub fn scaled(&self, eps_factor: f64, mu_factor: f64) -> Result<Self> {
        Self::from_tensors(
            self.eps.iter().map(|e| e * eps_factor).collect(),
            self.mu.iter().map(|m| m * mu_factor).collect(),
        )
    }

    fn check(&self, complex: &SimplicialComplex) -> Result<()> {
        if self.len() != complex.count(3) {
            return Err(Error::Dimension(format!(
                "material map has {} tets, mesh has {}",
                self.len(),
                complex.count(3)
            )));
        }
        Ok(())
    }
}

/// Which constitutive star a matrix realizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HodgeKind {
    /// `[⋆_ε]` on primal 1-cochains.
    Epsilon,
    /// `[⋆_{μ⁻¹}]` on primal 2-cochains.
    MuInv,
    /// `[⋆_{ε⁻¹}]` on primal 2-cochains (Galerkin dual).
    EpsInv,
    /// `[⋆_μ]` on primal 1-cochains (Galerkin dual).
    Mu,
}

impl HodgeKind {
    pub fn degree(self) -> usize {
        match self {
            HodgeKind::Epsilon | HodgeKind::Mu => 1,
            HodgeKind::MuInv | HodgeKind::EpsInv => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HodgeKind::Epsilon => "eps",
            HodgeKind::MuInv => "mu_inv",
            HodgeKind::EpsInv => "eps_inv",
            HodgeKind::Mu => "mu",
        }
    }

    fn weight(self, materials: &MaterialMap, t: usize) -> Matrix3<f64> {
        let inv = |m: &Matrix3<f64>| m.try_inverse().expect("SPD tensor is invertible");
        match self {
            HodgeKind::Epsilon => materials.eps[t],
            HodgeKind::Mu => materials.mu[t],
            HodgeKind::MuInv => inv(&materials.mu[t]),
            HodgeKind::EpsInv => inv(&materials.eps[t]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HodgeMatrix {
    pub kind: HodgeKind,
    pub matrix: CsrMatrix<f64>,
}

/// Weighted Whitney mass matrix on `p`-cochains (`p` = 1 or 2).
///
/// `weight(t, x)` returns the 3×3 tensor at point `x` of tet `t`. Entries are
/// `Σ_T Σ_q w_q |T| φ_i(x_q)ᵀ W(x_q) φ_j(x_q)` over the degree-2 tet rule,
/// exact whenever `W` is constant per tet. Element visits and the local loop
/// order are fixed so real and complex weights produce entries computed by
/// the same sequence of operations.
pub fn assemble_weighted<T: Scalar>(
    complex: &SimplicialComplex,
    p: usize,
    weight: impl Fn(usize, &Vector3<f64>) -> [[T; 3]; 3],
) -> CsrMatrix<T> {
    assert!(p == 1 || p == 2, "Hodge assembly is defined on 1- and 2-cochains");
    let n = local_count(p);
    let mut triplets = Vec::with_capacity(complex.count(3) * n * n);
    let mut local = vec![T::zero(); n * n];
    for t in 0..complex.count(3) {
        local.iter_mut().for_each(|v| *v = T::zero());
        let vol = complex.volume(t);
        for (lam, w) in quadrature::TET.iter() {
            let x = complex.point_in(t, lam);
            let wt = weight(t, &x);
            let phi: Vec<Vector3<f64>> = (0..n).map(|k| local_whitney(complex, t, p, k, lam).vector()).collect();
            let scale = T::from_real(w * vol);
            for j in 0..n {
                let wphi: [T; 3] = std::array::from_fn(|a| {
                    wt[a][0] * T::from_real(phi[j][0])
                        + wt[a][1] * T::from_real(phi[j][1])
                        + wt[a][2] * T::from_real(phi[j][2])
                });
                for i in 0..n {
                    let inner = T::from_real(phi[i][0]) * wphi[0]
                        + T::from_real(phi[i][1]) * wphi[1]
                        + T::from_real(phi[i][2]) * wphi[2];
                    local[i * n + j] += scale * inner;
                }
            }
        }
        for i in 0..n {
            let gi = complex.global_index(t, p, i);
            for j in 0..n {
                triplets.push((gi, complex.global_index(t, p, j), local[i * n + j]));
            }
        }
    }
    let m = complex.count(p);
    CsrMatrix::from_triplets(m, m, triplets)
}

fn tensor_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|a| std::array::from_fn(|b| m[(a, b)]))
}

/// Assembles `[⋆_ε]` (1-cochains) or `[⋆_{μ⁻¹}]` (2-cochains), or the Galerkin
/// dual pair when asked for `EpsInv` / `Mu`.
pub fn assemble_hodge(complex: &SimplicialComplex, materials: &MaterialMap, kind: HodgeKind) -> Result<HodgeMatrix> {
    materials.check(complex)?;
    let weights: Vec<[[f64; 3]; 3]> = (0..complex.count(3))
        .map(|t| tensor_rows(&kind.weight(materials, t)))
        .collect();
    let matrix = assemble_weighted::<f64>(complex, kind.degree(), |t, _| weights[t]);
    Ok(HodgeMatrix { kind, matrix })
}

/// Galerkin-dual stars `([⋆_{ε⁻¹}], [⋆_μ])`.
pub fn assemble_galerkin_dual(complex: &SimplicialComplex, materials: &MaterialMap) -> Result<(HodgeMatrix, HodgeMatrix)> {
    Ok((
        assemble_hodge(complex, materials, HodgeKind::EpsInv)?,
        assemble_hodge(complex, materials, HodgeKind::Mu)?,
    ))
}

/// Galerkin load `∫ φ_i · f dV` of a vector field against the Whitney
/// `p`-forms (`p` = 1 or 2), degree-2 quadrature per tet. A volume current
/// density gives the dual-face current cochain indexed by primal edges.
pub fn load_vector(complex: &SimplicialComplex, p: usize, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> Vec<f64> {
    assert!(p == 1 || p == 2, "load vectors are defined for 1- and 2-forms");
    let mut out = vec![0.0; complex.count(p)];
    for t in 0..complex.count(3) {
        let vol = complex.volume(t);
        for (lam, w) in quadrature::TET.iter() {
            let val = f(&complex.point_in(t, lam));
            if val == Vector3::zeros() {
                continue;
            }
            for k in 0..local_count(p) {
                out[complex.global_index(t, p, k)] += w * vol * local_whitney(complex, t, p, k, lam).vector().dot(&val);
            }
        }
    }
    out
}

/// Admitted positions of a sparse approximate inverse, stored per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsityPattern {
    pub level: usize,
    rows: Vec<Vec<usize>>,
}

impl SparsityPattern {
    /// Pattern of `A^{k+1}` together with the diagonal: level 0 is the
    /// pattern of `A` itself and each level adds one ring of neighbors.
    pub fn from_matrix<T: Scalar>(a: &CsrMatrix<T>, level: usize) -> Self {
        let n = a.nrows();
        let base: Vec<Vec<usize>> = (0..n)
            .map(|r| {
                let mut cols: Vec<usize> = a.row(r).map(|(c, _)| c).collect();
                if !cols.contains(&r) {
                    cols.push(r);
                }
                cols.sort_unstable();
                cols
            })
            .collect();
        let mut rows = base.clone();
        let mut mark = vec![usize::MAX; n];
        for _ in 0..level {
            rows = rows
                .iter()
                .enumerate()
                .map(|(r, cols)| {
                    let mut out = Vec::new();
                    for &c in cols {
                        for &d in &base[c] {
                            if mark[d] != r {
                                mark[d] = r;
                                out.push(d);
                            }
                        }
                    }
                    out.sort_unstable();
                    out
                })
                .collect();
            mark.iter_mut().for_each(|m| *m = usize::MAX);
        }
        Self { level, rows }
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.rows[r]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.rows[r].binary_search(&c).is_ok()
    }
}

#[derive(Clone, Debug)]
pub struct SpaiResult {
    pub inverse: CsrMatrix<f64>,
    /// `‖I − M H‖_F` of the returned (possibly pruned) approximation.
    pub residual: f64,
}

/// Frobenius-norm sparse approximate inverse of a symmetric `H`.
///
/// For each `j` the vector `m_j` supported on `pattern.row(j)` minimizes
/// `‖H m_j − e_j‖₂`; it becomes row `j` of `M`, so the columns of `(M H)ᵀ`
/// are fitted independently. The restricted least-squares problem is solved
/// through its normal equations `(H²)_{JJ} m = H_{jJ}`. Entries below
/// `drop_tol` times the row maximum are pruned afterwards.
pub fn spai_inverse(h: &CsrMatrix<f64>, pattern: &SparsityPattern, drop_tol: f64) -> Result<SpaiResult> {
    let n = h.nrows();
    if h.ncols() != n || pattern.rows.len() != n {
        return Err(Error::Dimension("SPAI needs a square matrix and a matching pattern".into()));
    }
    let h2 = h.matmul(h);
    let mut triplets = Vec::with_capacity(pattern.nnz());
    let mut residual_sq = 0.0;
    for j in 0..n {
        let cols = pattern.row(j);
        let k = cols.len();
        let mut gram = DMatrix::<f64>::zeros(k, k);
        for (a, &ca) in cols.iter().enumerate() {
            let mut b = 0;
            for (c, v) in h2.row(ca) {
                while b < k && cols[b] < c {
                    b += 1;
                }
                if b < k && cols[b] == c {
                    gram[(a, b)] = v;
                }
            }
        }
        let rhs = DVector::from_iterator(k, cols.iter().map(|&c| h.get(j, c)));
        let chol = gram.cholesky().ok_or(Error::SingularSpaiBlock { column: j })?;
        let m = chol.solve(&rhs);
        let max = m.amax();
        let kept: Vec<(usize, f64)> = cols
            .iter()
            .zip(m.iter())
            .filter(|(_, v)| v.abs() >= drop_tol * max)
            .map(|(&c, &v)| (c, v))
            .collect();
        // r = H m_j − e_j, assembled from the columns of H
        let mut r = std::collections::BTreeMap::<usize, f64>::new();
        for &(c, v) in &kept {
            for (row, hv) in h.row(c) {
                *r.entry(row).or_insert(0.0) += hv * v;
            }
        }
        *r.entry(j).or_insert(0.0) -= 1.0;
        residual_sq += r.values().map(|v| v * v).sum::<f64>();
        triplets.extend(kept.into_iter().map(|(c, v)| (j, c, v)));
    }
    Ok(SpaiResult {
        inverse: CsrMatrix::from_triplets(n, n, triplets),
        residual: residual_sq.sqrt(),
    })
}

/// Exact `‖I − M H‖_F`, independent of how `M` was built.
pub fn inverse_residual(m: &CsrMatrix<f64>, h: &CsrMatrix<f64>) -> f64 {
    m.matmul(h).add(&CsrMatrix::identity(h.nrows()), -1.0).frobenius_norm()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpdReport {
    /// `‖H − Hᵀ‖_F / ‖H‖_F`.
    pub symmetry_deviation: f64,
    /// Smallest eigenvalue of the symmetric part.
    pub min_eigenvalue: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SpdReport {
    pub fn symmetric(&self, tol: f64) -> bool {
        self.symmetry_deviation <= tol
    }
}

/// Symmetry deviation and the smallest eigenvalue of `(H + Hᵀ)/2`.
///
/// The eigenvalue comes from block inverse iteration on `S − σI` with `σ`
/// below the Gershgorin bound, so the shifted matrix is SPD and the iteration
/// converges to the bottom of the spectrum; a Rayleigh–Ritz step on the block
/// gives the estimate after every sweep.
pub fn check_spd(h: &CsrMatrix<f64>) -> Result<SpdReport> {
    let n = h.nrows();
    let symmetry_deviation = h.symmetry_deviation();
    if n == 0 {
        return Ok(SpdReport {
            symmetry_deviation,
            min_eigenvalue: f64::INFINITY,
            iterations: 0,
            converged: true,
        });
    }
    let s = h.add(&h.transpose(), 1.0).scale(0.5);
    let norm = s.frobenius_norm();
    let gersh = (0..n)
        .map(|r| {
            let (mut d, mut off) = (0.0, 0.0);
            for (c, v) in s.row(r) {
                if c == r {
                    d = v;
                } else {
                    off += v.abs();
                }
            }
            d - off
        })
        .fold(f64::INFINITY, f64::min);
    let sigma = gersh - 1e-3 * norm.max(f64::MIN_POSITIVE);
    let shifted = s.add(&CsrMatrix::identity(n), -sigma);
    let solver = CholeskySolver::new(&shifted)?;

    let b = n.min(8);
    // deterministic, well-mixed start block
    let mut block = DMatrix::<f64>::from_fn(n, b, |i, j| {
        let x = ((i * 7919 + j * 104_729 + 1) % 1_000_003) as f64 / 1_000_003.0;
        x - 0.5 + if i % b == j { 1.0 } else { 0.0 }
    });
    let mut theta = f64::NAN;
    let max_iter = 2000;
    for it in 1..=max_iter {
        let q = block.clone().qr().q();
        let mut next = DMatrix::<f64>::zeros(n, b);
        for j in 0..b {
            let col: Vec<f64> = q.column(j).iter().copied().collect();
            next.set_column(j, &DVector::from_vec(solver.solve(&col)));
        }
        let q = next.qr().q();
        let mut sq = DMatrix::<f64>::zeros(n, b);
        for j in 0..b {
            let col: Vec<f64> = q.column(j).iter().copied().collect();
            sq.set_column(j, &DVector::from_vec(s.mul_vec(&col)));
        }
        let ritz = (q.transpose() * &sq).symmetric_eigen();
        let k = ritz.eigenvalues.imin();
        let new_theta = ritz.eigenvalues[k];
        let x = &q * ritz.eigenvectors.column(k);
        let resid = (&sq * ritz.eigenvectors.column(k) - &x * new_theta).norm();
        block = &q * &ritz.eigenvectors;
        theta = new_theta;
        if resid <= 1e-10 * norm {
            return Ok(SpdReport {
                symmetry_deviation,
                min_eigenvalue: theta,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(SpdReport {
        symmetry_deviation,
        min_eigenvalue: theta,
        iterations: max_iter,
        converged: false,
    })
}

/// Integral of the metric Hodge dual of the local Whitney `p`-form `k` of
/// tet `t` over one barycentric-subdivision piece (already signed).
fn piece_integral(complex: &SimplicialComplex, t: usize, p: usize, k: usize, pts: &[Vector3<f64>], sign: f64) -> f64 {
    let eval = |x: &Vector3<f64>| -> Proxy {
        let lam = complex.barycentric_in(t, x);
        local_whitney(complex, t, p, k, &lam)
    };
    match p {
        // ⋆ of a 0-form is a 3-form with the same density; dual 3-cells
        // carry the ambient orientation, so the piece sign does not enter
        0 => {
            let vol = nalgebra::Matrix3::from_columns(&[pts[1] - pts[0], pts[2] - pts[0], pts[3] - pts[0]])
                .determinant()
                .abs()
                / 6.0;
            quadrature::TET
                .iter()
                .map(|(l, w)| {
                    let x = pts[0] * l[0] + pts[1] * l[1] + pts[2] * l[2] + pts[3] * l[3];
                    w * vol * eval(&x).scalar()
                })
                .sum::<f64>()
        }
        // ⋆ of a 1-form is the 2-form with the same vector proxy
        1 => {
            let area = (pts[1] - pts[0]).cross(&(pts[2] - pts[0])) * 0.5;
            quadrature::TRIANGLE
                .iter()
                .map(|(l, w)| {
                    let x = pts[0] * l[0] + pts[1] * l[1] + pts[2] * l[2];
                    w * eval(&x).vector().dot(&area)
                })
                .sum::<f64>()
                * sign
        }
        2 => {
            let tangent = pts[1] - pts[0];
            quadrature::EDGE
                .iter()
                .map(|(l, w)| {
                    let x = pts[0] * l[0] + pts[1] * l[1];
                    w * eval(&x).vector().dot(&tangent)
                })
                .sum::<f64>()
                * sign
        }
        3 => eval(&pts[0]).scalar() * sign,
        _ => panic!("form degree {p} out of range"),
    }
}

/// Pairing matrix `⟨σ̃_i, ⋆ω^p_j⟩` between dual `(3-p)`-cells and Whitney
/// `p`-forms, unit material. Row `i` is the dual cell of primal simplex `i`.
pub fn dual_pairing_matrix(complex: &SimplicialComplex, dual: &DualComplex, p: usize) -> CsrMatrix<f64> {
    let mut triplets = Vec::new();
    for i in 0..complex.count(p) {
        for piece in dual.pieces(p, i) {
            let t = *piece.flag.last().expect("flag ends at a tet");
            let pts = dual.piece_points(p, piece);
            for k in 0..local_count(p) {
                let j = complex.global_index(t, p, k);
                triplets.push((i, j, piece_integral(complex, t, p, k, &pts, piece.sign as f64)));
            }
        }
    }
    let n = complex.count(p);
    CsrMatrix::from_triplets(n, n, triplets)
}

/// Max over all pairs of `|⟨σ̃_i, ⋆ω^p_j⟩ − δ_ij|`. Pairs not sharing a tet
/// pair to exactly zero and are covered by the diagonal check.
pub fn dual_pairing_check(complex: &SimplicialComplex, dual: &DualComplex, p: usize) -> f64 {
    let m = dual_pairing_matrix(complex, dual, p);
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        let mut diag_seen = false;
        for (j, v) in m.row(i) {
            let delta = if i == j {
                diag_seen = true;
                1.0
            } else {
                0.0
            };
            worst = worst.max((v - delta).abs());
        }
        if !diag_seen {
            worst = worst.max(1.0);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{barycentric_dual, generate};

    fn vacuum(c: &SimplicialComplex) -> MaterialMap {
        MaterialMap::vacuum(c)
    }

    #[test]
    fn regular_tet_diagonals_are_equal() {
        let c = generate::regular_tet();
        for kind in [HodgeKind::Epsilon, HodgeKind::MuInv] {
            let h = assemble_hodge(&c, &vacuum(&c), kind).unwrap().matrix;
            let d = h.diagonal();
            d.iter().for_each(|x| assert!((x - d[0]).abs() < 1e-14 * d[0]));
        }
    }

    #[test]
    fn linear_in_material() {
        let c = generate::box_mesh(2);
        let m = vacuum(&c);
        let h1 = assemble_hodge(&c, &m, HodgeKind::Epsilon).unwrap().matrix;
        let h2 = assemble_hodge(&c, &m.scaled(2.0, 1.0).unwrap(), HodgeKind::Epsilon).unwrap().matrix;
        assert_eq!(h1.scale(2.0), h2);
    }

    #[test]
    fn galerkin_dual_on_vacuum() {
        let c = generate::single_tet();
        let m = vacuum(&c);
        let (eps_inv, mu) = assemble_galerkin_dual(&c, &m).unwrap();
        assert_eq!(eps_inv.matrix, assemble_hodge(&c, &m, HodgeKind::MuInv).unwrap().matrix);
        assert_eq!(mu.matrix, assemble_hodge(&c, &m, HodgeKind::Epsilon).unwrap().matrix);
        let mu3 = assemble_hodge(&c, &m.scaled(1.0, 3.0).unwrap(), HodgeKind::Mu).unwrap().matrix;
        for ((_, _, a), (_, _, b)) in mu3.iter().zip(mu.matrix.scale(3.0).iter()) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * 3.0);
        }
    }

    #[test]
    fn rejects_indefinite_material() {
        let mut bad = Matrix3::identity();
        bad[(2, 2)] = -1.0;
        let err = MaterialMap::from_tensors(vec![Matrix3::identity(), bad], vec![Matrix3::identity(); 2]);
        assert!(matches!(err, Err(Error::NotSpd { tet: 1 })));
    }

    #[test]
    fn ultra_local_sparsity() {
        let c = generate::box_mesh(2);
        let h = assemble_hodge(&c, &vacuum(&c), HodgeKind::Epsilon).unwrap().matrix;
        for (i, j, _) in h.iter() {
            assert!(c.edge_tets(i).iter().any(|t| c.edge_tets(j).contains(t)));
        }
    }

    #[test]
    fn load_of_constant_field_is_mass_times_interpolant() {
        // f constant ⇒ f = Σ_j R(f)_j ω_j exactly, so ∫ ω_i·f = (M R(f))_i
        let c = generate::box_mesh(2);
        let u = Vector3::new(0.4, -1.0, 0.7);
        let load = load_vector(&c, 1, |_| u);
        let dofs = crate::whitney::de_rham(&crate::whitney::AnalyticForm::one_form(|_| u), &c, 1).unwrap();
        let m = assemble_hodge(&c, &vacuum(&c), HodgeKind::Epsilon).unwrap().matrix;
        for (a, b) in load.iter().zip(m.mul_vec(&dofs.values)) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn spai_of_identity_and_diagonal() {
        let id = CsrMatrix::<f64>::identity(5);
        let r = spai_inverse(&id, &SparsityPattern::from_matrix(&id, 2), 0.0).unwrap();
        assert_eq!(r.inverse, id);
        assert_eq!(r.residual, 0.0);
        let d = CsrMatrix::from_diagonal(&[2.0, 4.0, 0.5]);
        let r = spai_inverse(&d, &SparsityPattern::from_matrix(&d, 0), 0.0).unwrap();
        assert_eq!(r.inverse.diagonal(), vec![0.5, 0.25, 2.0]);
        assert!(r.residual < 1e-15);
    }

    #[test]
    fn spai_residual_matches_direct_computation() {
        let c = generate::box_mesh(2);
        let h = assemble_hodge(&c, &vacuum(&c), HodgeKind::Epsilon).unwrap().matrix;
        let r = spai_inverse(&h, &SparsityPattern::from_matrix(&h, 1), 0.0).unwrap();
        assert!((r.residual - inverse_residual(&r.inverse, &h)).abs() < 1e-12 * r.residual);
    }

    #[test]
    fn patterns_are_nested() {
        let c = generate::box_mesh(2);
        let h = assemble_hodge(&c, &vacuum(&c), HodgeKind::Epsilon).unwrap().matrix;
        let levels: Vec<_> = (0..3).map(|k| SparsityPattern::from_matrix(&h, k)).collect();
        for w in levels.windows(2) {
            for r in 0..h.nrows() {
                assert!(w[0].row(r).iter().all(|&c| w[1].contains(r, c)));
            }
        }
    }

    #[test]
    fn spd_check_matches_dense_eigensolver() {
        let c = generate::box_mesh(2);
        let h = assemble_hodge(&c, &vacuum(&c), HodgeKind::MuInv).unwrap().matrix;
        let rep = check_spd(&h).unwrap();
        let dense = h.to_dense().symmetric_eigen().eigenvalues.min();
        assert!(rep.converged);
        assert!((rep.min_eigenvalue - dense).abs() < 1e-9 * dense);
        assert!(rep.symmetry_deviation <= 1e-13);
    }

    #[test]
    fn spd_check_flags_faults() {
        let c = generate::kuhn_cube();
        let h = assemble_hodge(&c, &vacuum(&c), HodgeKind::Epsilon).unwrap().matrix;
        let mut asym = h.clone();
        let off = asym.row(0).map(|(c, _)| c).find(|&c| c != 0).unwrap();
        *asym.entry_mut(0, off).unwrap() += 0.1;
        assert!(check_spd(&asym).unwrap().symmetry_deviation > 1e-3);
        let mut neg = h.clone();
        let d = neg.get(3, 3);
        *neg.entry_mut(3, 3).unwrap() = -d;
        assert!(check_spd(&neg).unwrap().min_eigenvalue < 0.0);
    }

    #[test]
    fn dual_pairing_of_constants_matches_dual_volumes() {
        // Σ_j ⟨σ̃_i, ⋆λ_j⟩ = |σ̃_i| since the λ_j sum to one
        let c = generate::kuhn_cube();
        let d = barycentric_dual(&c);
        let m = dual_pairing_matrix(&c, &d, 0);
        for i in 0..c.count(0) {
            let s: f64 = m.row(i).map(|(_, v)| v).sum();
            assert!((s - d.dual_volume(i)).abs() < 1e-14, "{s} {}", d.dual_volume(i));
        }
    }
}
