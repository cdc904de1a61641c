//! Dynamic degree-of-freedom counts and the Euler/Hodge correspondence.
//!
//! With `h` marking interior (free) elements, the raw counts are
//! `Θ^d(E) = N_E^h − N_V^h` and `Θ^d(B) = N_F^h − (N_P − 1)`. They agree on
//! ball-like meshes. On a mesh with Betti numbers `b1, b2` and its whole
//! boundary fixed, the relative Euler identity gives
//! `N_E^h − N_V^h − b2 = N_F^h − (N_P − 1) − b1`, so subtracting the
//! harmonic dimensions restores the equality. Both forms are reported.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::maxwell::EigenReport;
use crate::mesh::boundary::BoundaryClassification;
use crate::mesh::complex::SimplicialComplex;
use crate::mesh::dual::barycentric_dual;
use crate::mesh::incidence::incidence;
use crate::mesh::topology::{betti_numbers, incidence_rank, Betti, IdentityCheck};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub nodes: usize,
    pub edges: usize,
    pub faces: usize,
    pub cells: usize,
}

impl Counts {
    fn from_array(c: [usize; 4]) -> Self {
        Self {
            nodes: c[0],
            edges: c[1],
            faces: c[2],
            cells: c[3],
        }
    }
}

/// Eigenmode cross-check: zero modes are gradients of interior nodal
/// functions plus `b2` harmonic fields.
#[derive(Clone, Debug, Serialize)]
pub struct EigenCrossCheck {
    pub zero_modes: usize,
    pub nonzero_modes: usize,
    pub expected_zero: usize,
    pub expected_nonzero: usize,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DofReport {
    pub schema: &'static str,
    pub counts: Counts,
    pub boundary: Counts,
    pub interior: Counts,
    pub betti: Betti,
    /// Dimension of the harmonic 1-fields (`g = b1`).
    pub harmonic_dimension: usize,
    /// `N_E^h − N_V^h − b2`.
    pub theta_e: i64,
    /// `N_F^h − (N_P − 1) − b1`.
    pub theta_b: i64,
    pub theta_e_raw: i64,
    pub theta_b_raw: i64,
    /// `N_E − N_V` with boundary elements included.
    pub theta_e_all_elements: i64,
    /// Whether the interior-count and all-element forms differ.
    pub boundary_terms_differ: bool,
    /// Exact rank of the boundary-reduced curl incidence.
    pub curl_rank: usize,
    /// `Θ^d(D)`, counted on dual 2-cells minus dual 3-cells of free elements.
    pub theta_d: i64,
    /// `Θ^d(H)`, counted on dual 1-cells minus dual 0-cells of free elements.
    pub theta_h: i64,
    pub identities: Vec<IdentityCheck>,
    pub eigen: Option<EigenCrossCheck>,
    pub pass: bool,
}

/// Counts and identity checks for a connected mesh. `classification` should
/// mark the whole boundary; the harmonic correction assumes it does.
pub fn dof_audit(
    complex: &SimplicialComplex,
    classification: &BoundaryClassification,
    eigen: Option<&EigenReport>,
) -> Result<DofReport> {
    let components = complex.components();
    if components != 1 {
        return Err(Error::Disconnected { components });
    }
    let n = complex.counts();
    let nb: [usize; 4] = std::array::from_fn(|p| if p < 3 { classification.boundary_count(p) } else { 0 });
    let nh: [usize; 4] = std::array::from_fn(|p| n[p] - nb[p]);
    let betti = betti_numbers(complex)?;
    let i = |x: usize| x as i64;

    let theta_e_raw = i(nh[1]) - i(nh[0]);
    let theta_b_raw = i(nh[2]) - (i(n[3]) - 1);
    let theta_e = theta_e_raw - i(betti.b2);
    let theta_b = theta_b_raw - i(betti.b1);
    let theta_e_all_elements = i(n[1]) - i(n[0]);

    let (edges, faces) = (classification.interior(1), classification.interior(2));
    let curl_rank = incidence_rank(&incidence(complex, 1).restrict(&faces, &edges))?;

    // dual q-cells pair with primal (3−q)-simplices; count those of free elements
    let dual = barycentric_dual(complex);
    let dual_cells = |primal_dim: usize| -> usize {
        let q = 3 - primal_dim;
        let m = dual.incidence(q.min(2));
        let total = if q <= 2 { m.ncols() } else { m.nrows() };
        if primal_dim == 3 {
            total
        } else {
            total - nb[primal_dim]
        }
    };
    let theta_d = i(dual_cells(1)) - i(dual_cells(0));
    let theta_h = i(dual_cells(2)) - (i(dual_cells(3)) - 1);

    let mut identities = vec![
        IdentityCheck::new("theta_e_equals_theta_b", theta_e, theta_b),
        IdentityCheck::new("curl_rank_equals_theta_e", i(curl_rank), theta_e),
        IdentityCheck::new("theta_d_equals_theta_e", theta_d, theta_e_raw),
        IdentityCheck::new("theta_h_equals_theta_b", theta_h, theta_b_raw),
    ];
    let eigen = eigen.map(|r| {
        let expected_zero = nh[0] + betti.b2;
        let check = EigenCrossCheck {
            zero_modes: r.zero_count,
            nonzero_modes: r.nonzero_count,
            expected_zero,
            expected_nonzero: theta_e.max(0) as usize,
            holds: r.zero_count == expected_zero && i(r.nonzero_count) == theta_e,
        };
        identities.push(IdentityCheck::new("eigen_nonzero_equals_theta_e", i(r.nonzero_count), theta_e));
        check
    });
    let pass = identities.iter().all(|c| c.holds);
    Ok(DofReport {
        schema: "declat.dof/1",
        counts: Counts::from_array(n),
        boundary: Counts::from_array(nb),
        interior: Counts::from_array(nh),
        betti,
        harmonic_dimension: betti.b1,
        theta_e,
        theta_b,
        theta_e_raw,
        theta_b_raw,
        theta_e_all_elements,
        boundary_terms_differ: theta_e_all_elements != theta_e_raw,
        curl_rank,
        theta_d,
        theta_h,
        identities,
        eigen,
        pass,
    })
}

/// One line of the Euler ↔ Hodge table for the edge space.
#[derive(Clone, Debug, Serialize)]
pub struct CorrespondenceRow {
    pub euler_term: &'static str,
    pub hodge_term: &'static str,
    /// Value from the element counts and Betti numbers.
    pub from_counts: i64,
    /// Value from exact incidence ranks.
    pub from_ranks: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Correspondence {
    pub schema: &'static str,
    pub rows: Vec<CorrespondenceRow>,
    pub edges: usize,
    /// `g = b1`.
    pub genus: usize,
    pub balanced: bool,
}

/// Splits the edge count into exact, co-exact and harmonic parts,
/// `N_E = (N_V − b0) + (N_F − N_P + b3 − b2) + g`, and checks each part
/// against exact ranks.
pub fn hodge_correspondence(complex: &SimplicialComplex) -> Result<Correspondence> {
    let n = complex.counts().map(|c| c as i64);
    let b = betti_numbers(complex)?;
    let c = [0, 1].map(|p| incidence(complex, p));
    let r0 = incidence_rank(&c[0])? as i64;
    let r1 = incidence_rank(&c[1])? as i64;
    let rows = vec![
        CorrespondenceRow {
            euler_term: "nodes",
            hodge_term: "exact 1-forms d(phi)",
            from_counts: n[0] - b.b0 as i64,
            from_ranks: r0,
        },
        CorrespondenceRow {
            euler_term: "faces and cells",
            hodge_term: "co-exact 1-forms delta(A)",
            from_counts: n[2] - n[3] + b.b3 as i64 - b.b2 as i64,
            from_ranks: r1,
        },
        CorrespondenceRow {
            euler_term: "holes",
            hodge_term: "harmonic 1-forms chi",
            from_counts: b.b1 as i64,
            from_ranks: n[1] - r0 - r1,
        },
    ];
    let total: i64 = rows.iter().map(|r| r.from_counts).sum();
    let balanced = total == n[1] && rows.iter().all(|r| r.from_counts == r.from_ranks);
    Ok(Correspondence {
        schema: "declat.hodge_correspondence/1",
        rows,
        edges: complex.count(1),
        genus: b.b1,
        balanced,
    })
}

impl Correspondence {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<16} {:<26} {:>8} {:>8}", "euler term", "hodge term", "counts", "ranks");
        for r in &self.rows {
            let _ = writeln!(s, "{:<16} {:<26} {:>8} {:>8}", r.euler_term, r.hodge_term, r.from_counts, r.from_ranks);
        }
        let _ = writeln!(s, "edges {} = sum, genus {}, balanced {}", self.edges, self.genus, self.balanced);
        s
    }
}
