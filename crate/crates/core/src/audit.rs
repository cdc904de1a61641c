//! Structural audit of a mesh and its operators, in three sections:
//! first-kind (primal exactness and cohomology), second-kind (primal/dual
//! transpose reciprocity) and Hodge (symmetry, definiteness, cell shape).
//!
//! Every check records its measured value and threshold, and the verdict is a
//! pure function of the two. Reports are deterministic.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::Result;
use crate::hodge::{assemble_hodge, check_spd, HodgeKind, MaterialMap};
use crate::mesh::boundary::{classify_boundary, BoundaryClassification};
use crate::mesh::complex::{SimplicialComplex, LOCAL_EDGES};
use crate::mesh::dual::{barycentric_dual, transpose_sign};
use crate::mesh::incidence::{incidences, IncidenceMatrix};
use crate::mesh::topology::betti_from_incidence;
use crate::sparse::CsrMatrix;

pub const SYMMETRY_TOL: f64 = 1e-13;
/// Required margin of the smallest eigenvalue, relative to `‖H‖_F`.
pub const SPD_MARGIN: f64 = 1e-12;
/// Smallest dihedral angle (degrees) below which a cell is reported.
pub const SLIVER_ANGLE_DEG: f64 = 10.0;
/// `λ_min / max diag` below which a Hodge matrix counts as near-indefinite.
pub const NEAR_INDEFINITE_RATIO: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Equal,
    AtMost,
    Above,
}

impl Comparison {
    fn symbol(self) -> &'static str {
        match self {
            Comparison::Equal => "==",
            Comparison::AtMost => "<=",
            Comparison::Above => ">",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, comparison: Comparison, threshold: f64) -> Self {
        let pass = match comparison {
            Comparison::Equal => measured == threshold,
            Comparison::AtMost => measured <= threshold,
            Comparison::Above => measured > threshold,
        };
        Self {
            name: name.into(),
            measured,
            threshold,
            comparison,
            pass,
            detail: None,
        }
    }

    fn with_detail(mut self, detail: Option<String>) -> Self {
        self.detail = detail;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Section {
    pub name: &'static str,
    pub checks: Vec<Check>,
    /// Observations that do not fail the section.
    pub warnings: Vec<String>,
    pub pass: bool,
}

impl Section {
    fn new(name: &'static str, checks: Vec<Check>, warnings: Vec<String>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self {
            name,
            checks,
            warnings,
            pass,
        }
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

/// Mesh plus the operators under audit. Fault injection edits the operator
/// fields and leaves the mesh alone.
#[derive(Clone, Debug)]
pub struct AuditBundle {
    pub complex: SimplicialComplex,
    pub classification: BoundaryClassification,
    pub primal: [IncidenceMatrix; 3],
    /// Dual incidences `C̃^q`, rows indexed by primal `(2−q)`-simplices and
    /// columns by primal `(3−q)`-simplices.
    pub dual: [IncidenceMatrix; 3],
    pub h_eps: CsrMatrix<f64>,
    pub h_mu_inv: CsrMatrix<f64>,
}

impl AuditBundle {
    pub fn build(complex: SimplicialComplex, materials: &MaterialMap) -> Result<Self> {
        let classification = classify_boundary(&complex)?;
        let primal = incidences(&complex);
        let d = barycentric_dual(&complex);
        let dual = [0, 1, 2].map(|q| d.incidence(q).clone());
        let h_eps = assemble_hodge(&complex, materials, HodgeKind::Epsilon)?.matrix;
        let h_mu_inv = assemble_hodge(&complex, materials, HodgeKind::MuInv)?.matrix;
        Ok(Self {
            complex,
            classification,
            primal,
            dual,
            h_eps,
            h_mu_inv,
        })
    }

    pub fn vacuum(complex: SimplicialComplex) -> Result<Self> {
        let materials = MaterialMap::vacuum(&complex);
        Self::build(complex, &materials)
    }
}

/// Exactness `C^{p+1}C^p = 0` and cohomology capture: `b0` must equal the
/// number of connected components, `b3 = 0` for a mesh with boundary, and
/// `2χ` must match the boundary surface characteristic counted directly.
pub fn audit_first_kind(bundle: &AuditBundle) -> Result<Section> {
    let c = &bundle.primal;
    let mut checks = Vec::new();
    for p in 0..2 {
        let (defect, at) = c[p].nilpotency_defect(&c[p + 1]);
        let detail = at.map(|(r, col)| format!("C{}C{} entry ({r}, {col}) = {defect}", p + 1, p));
        checks.push(Check::new(format!("nilpotency_C{}C{}", p + 1, p), defect as f64, Comparison::Equal, 0.0).with_detail(detail));
    }
    let betti = betti_from_incidence(bundle.complex.counts(), c)?;
    let components = bundle.complex.components();
    checks.push(
        Check::new("b0_matches_components", (betti.b0 as f64 - components as f64).abs(), Comparison::Equal, 0.0)
            .with_detail(Some(format!("b0 = {}, components = {components}", betti.b0))),
    );
    checks.push(Check::new("b3_zero", betti.b3 as f64, Comparison::Equal, 0.0));
    let cls = &bundle.classification;
    let surface = cls.boundary_count(0) as i64 - cls.boundary_count(1) as i64 + cls.boundary_count(2) as i64;
    let chi = betti.euler_characteristic();
    checks.push(
        Check::new("boundary_euler_matches_cohomology", (2 * chi - surface).abs() as f64, Comparison::Equal, 0.0)
            .with_detail(Some(format!(
                "betti = ({}, {}, {}, {}), chi = {chi}, boundary chi = {surface}",
                betti.b0, betti.b1, betti.b2, betti.b3
            ))),
    );
    Ok(Section::new("first_kind", checks, Vec::new()))
}

/// Transpose reciprocity `C̃^q = s_q (C^{2−q})ᵀ`. The verdict uses rows of
/// interior elements; boundary-row mismatches are counted and reported.
pub fn audit_second_kind(bundle: &AuditBundle) -> Section {
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    for q in 0..3 {
        let primal = &bundle.primal[2 - q];
        let expected = primal.transpose_rows();
        let dual = &bundle.dual[q];
        let sign = transpose_sign(q);
        // dual rows are indexed by primal (2−q)-simplices
        let row_dim = 2 - q;
        let (mut interior_bad, mut boundary_bad, mut boundary_rows) = (0usize, 0usize, 0usize);
        let mut first = None;
        for r in 0..dual.nrows().max(expected.len()) {
            let want: Vec<(usize, i8)> = expected.get(r).map_or(Vec::new(), |row| row.iter().map(|&(c, v)| (c, v * sign)).collect());
            let got = if r < dual.nrows() { dual.row(r).to_vec() } else { Vec::new() };
            let on_boundary = bundle.classification.is_boundary(row_dim, r);
            boundary_rows += usize::from(on_boundary);
            if want != got {
                if on_boundary {
                    boundary_bad += 1;
                } else {
                    interior_bad += 1;
                    first.get_or_insert(r);
                }
            }
        }
        let shape_ok = dual.nrows() == primal.ncols() && dual.ncols() == primal.nrows();
        checks.push(Check::new(format!("dual_C{q}_shape"), f64::from(u8::from(!shape_ok)), Comparison::Equal, 0.0));
        checks.push(
            Check::new(format!("dual_C{q}_interior_reciprocity"), interior_bad as f64, Comparison::Equal, 0.0)
                .with_detail(first.map(|r| format!("first mismatching row {r}"))),
        );
        warnings.push(format!(
            "dual_C{q}: {boundary_rows} boundary rows excluded from the verdict, {boundary_bad} of them differ"
        ));
    }
    Section::new("second_kind", checks, warnings)
}

/// Dihedral angle extremes (degrees) of tet `t`.
pub fn dihedral_extremes(complex: &SimplicialComplex, t: usize) -> (f64, f64) {
    let g = complex.grad_lambda(t);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &[a, b] in &LOCAL_EDGES {
        // faces at edge (a, b) are opposite the other two vertices
        let [c, d]: [usize; 2] = {
            let mut o = (0..4).filter(|&k| k != a && k != b);
            [o.next().unwrap(), o.next().unwrap()]
        };
        let cos = -(g[c].dot(&g[d])) / (g[c].norm() * g[d].norm());
        let angle = cos.clamp(-1.0, 1.0).acos().to_degrees();
        lo = lo.min(angle);
        hi = hi.max(angle);
    }
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellShape {
    pub tet: usize,
    pub min_dihedral_deg: f64,
    pub max_dihedral_deg: f64,
}

/// Symmetry and definiteness of both Hodge matrices plus cell-shape metrics.
/// Slivers are listed when either matrix is near-indefinite.
pub fn audit_hodge(bundle: &AuditBundle) -> Result<(Section, Vec<CellShape>)> {
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    let mut near_indefinite = false;
    for (label, h) in [("eps", &bundle.h_eps), ("mu_inv", &bundle.h_mu_inv)] {
        let spd = check_spd(h)?;
        let norm = h.frobenius_norm();
        checks.push(Check::new(format!("{label}_symmetry"), spd.symmetry_deviation, Comparison::AtMost, SYMMETRY_TOL));
        let margin = SPD_MARGIN * norm;
        checks.push(
            Check::new(format!("{label}_min_eigenvalue"), spd.min_eigenvalue, Comparison::Above, margin)
                .with_detail(Some(format!("{} iterations, converged {}", spd.iterations, spd.converged))),
        );
        let max_diag = h.diagonal().iter().fold(0.0f64, |m, &d| m.max(d.abs()));
        let ratio = if max_diag > 0.0 { spd.min_eigenvalue / max_diag } else { 0.0 };
        if ratio < NEAR_INDEFINITE_RATIO {
            near_indefinite = true;
            warnings.push(format!("{label}: min eigenvalue / max diagonal = {ratio:.3e} (below {NEAR_INDEFINITE_RATIO:.0e})"));
        }
    }
    let mut shapes: Vec<CellShape> = (0..bundle.complex.count(3))
        .map(|t| {
            let (lo, hi) = dihedral_extremes(&bundle.complex, t);
            CellShape {
                tet: t,
                min_dihedral_deg: lo,
                max_dihedral_deg: hi,
            }
        })
        .collect();
    shapes.sort_by(|a, b| a.min_dihedral_deg.total_cmp(&b.min_dihedral_deg).then(a.tet.cmp(&b.tet)));
    let slivers: Vec<CellShape> = shapes.iter().filter(|s| s.min_dihedral_deg < SLIVER_ANGLE_DEG).cloned().collect();
    if let (Some(worst), Some(widest)) = (shapes.first(), shapes.iter().max_by(|a, b| a.max_dihedral_deg.total_cmp(&b.max_dihedral_deg))) {
        warnings.push(format!(
            "dihedral range {:.3} to {:.3} deg (tets {} and {}), {} cells below {SLIVER_ANGLE_DEG} deg",
            worst.min_dihedral_deg,
            widest.max_dihedral_deg,
            worst.tet,
            widest.tet,
            slivers.len()
        ));
    }
    let offending = if near_indefinite { slivers } else { Vec::new() };
    if !offending.is_empty() {
        let list: Vec<String> = offending.iter().take(10).map(|s| s.tet.to_string()).collect();
        warnings.push(format!("near-indefinite Hodge matrix; sliver cells: {}", list.join(", ")));
    }
    Ok((Section::new("hodge", checks, warnings), offending))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub schema: &'static str,
    pub counts: [usize; 4],
    pub sections: Vec<Section>,
    /// Cells reported as the likely cause of a near-indefinite Hodge matrix.
    pub offending_cells: Vec<CellShape>,
    pub pass: bool,
}

pub fn run_audit(bundle: &AuditBundle) -> Result<AuditReport> {
    let first = audit_first_kind(bundle)?;
    let second = audit_second_kind(bundle);
    let (hodge, offending_cells) = audit_hodge(bundle)?;
    let sections = vec![first, second, hodge];
    let pass = sections.iter().all(|s| s.pass);
    Ok(AuditReport {
        schema: "declat.audit/1",
        counts: bundle.complex.counts(),
        sections,
        offending_cells,
        pass,
    })
}

impl AuditReport {
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn failed_sections(&self) -> Vec<&'static str> {
        self.sections.iter().filter(|s| !s.pass).map(|s| s.name).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audit report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let [v, e, f, t] = self.counts;
        let _ = writeln!(s, "mesh: {v} vertices, {e} edges, {f} faces, {t} tets");
        for sec in &self.sections {
            let _ = writeln!(s, "\n[{}] {}", sec.name, if sec.pass { "PASS" } else { "FAIL" });
            for c in &sec.checks {
                let _ = write!(
                    s,
                    "  {:<4} {:<36} measured {:.6e} {} {:.6e}",
                    if c.pass { "ok" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.comparison.symbol(),
                    c.threshold
                );
                if let Some(d) = &c.detail {
                    let _ = write!(s, "  ({d})");
                }
                s.push('\n');
            }
            for w in &sec.warnings {
                let _ = writeln!(s, "  note {w}");
            }
        }
        let _ = writeln!(s, "\noverall: {}", if self.pass { "PASS" } else { "FAIL" });
        s
    }
}

/// Fault injection for testing the audit itself.
pub mod faults {
    use super::AuditBundle;

    /// Flips the sign of primal entry `(row, col)` of `C^p` and mirrors it in
    /// the dual, so the operators stay transposes of each other but the
    /// primal sequence is no longer exact. Returns false if the entry is zero.
    pub fn flip_incidence_sign(bundle: &mut AuditBundle, p: usize, row: usize, col: usize) -> bool {
        let v = bundle.primal[p].get(row, col);
        if v == 0 {
            return false;
        }
        bundle.primal[p].set(row, col, -v);
        let q = 2 - p;
        let d = bundle.dual[q].get(col, row);
        bundle.dual[q].set(col, row, -d);
        true
    }

    /// Flips one dual entry `(row, col)` of `C̃^q` only.
    pub fn break_dual_transpose(bundle: &mut AuditBundle, q: usize, row: usize, col: usize) -> bool {
        let v = bundle.dual[q].get(row, col);
        if v == 0 {
            return false;
        }
        bundle.dual[q].set(row, col, -v);
        true
    }

    /// Adds `delta` to the ε-Hodge entry `(i, j)` without touching `(j, i)`.
    pub fn make_hodge_asymmetric(bundle: &mut AuditBundle, i: usize, j: usize, delta: f64) -> bool {
        match bundle.h_eps.entry_mut(i, j) {
            Some(v) if i != j => {
                *v += delta;
                true
            }
            _ => false,
        }
    }

    /// Negates diagonal entry `i` of the ε-Hodge matrix, which keeps it
    /// symmetric but makes `e_iᵀ H e_i < 0`.
    pub fn make_hodge_indefinite(bundle: &mut AuditBundle, i: usize) -> bool {
        match bundle.h_eps.entry_mut(i, i) {
            Some(v) => {
                *v = -*v;
                true
            }
            None => false,
        }
    }
}
