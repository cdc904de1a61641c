//! Exact homological invariants: ranks of incidence matrices, Betti numbers
//! and the Euler identities for the primal lattice and its boundary.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::boundary::BoundaryClassification;
use crate::mesh::complex::SimplicialComplex;
use crate::mesh::incidence::{incidence, IncidenceMatrix};

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `alpha * x - beta * y` over sparse rows sorted by column, dropping zeros.
fn combine(alpha: i64, x: &[(usize, i64)], beta: i64, y: &[(usize, i64)]) -> Result<Vec<(usize, i64)>> {
    let mut out = Vec::with_capacity(x.len() + y.len());
    let (mut i, mut j) = (0, 0);
    let mul = |a: i64, b: i64| a.checked_mul(b).ok_or(Error::Overflow);
    while i < x.len() || j < y.len() {
        let (c, v) = match (x.get(i), y.get(j)) {
            (Some(&(cx, vx)), Some(&(cy, _))) if cx < cy => {
                i += 1;
                (cx, mul(alpha, vx)?)
            }
            (Some(&(cx, _)), Some(&(cy, vy))) if cy < cx => {
                j += 1;
                (cy, -mul(beta, vy)?)
            }
            (Some(&(cx, vx)), Some(&(_, vy))) => {
                i += 1;
                j += 1;
                (cx, mul(alpha, vx)?.checked_sub(mul(beta, vy)?).ok_or(Error::Overflow)?)
            }
            (Some(&(cx, vx)), None) => {
                i += 1;
                (cx, mul(alpha, vx)?)
            }
            (None, Some(&(cy, vy))) => {
                j += 1;
                (cy, -mul(beta, vy)?)
            }
            (None, None) => unreachable!(),
        };
        if v != 0 {
            out.push((c, v));
        }
    }
    let g = out.iter().fold(0, |g, &(_, v)| gcd(g, v));
    if g > 1 {
        out.iter_mut().for_each(|(_, v)| *v /= g);
    }
    Ok(out)
}

/// Exact rank of a sparse integer matrix by fraction-free row reduction.
///
/// Rows are reduced against previously accepted pivot rows keyed by their
/// leading column; every intermediate row is divided by the gcd of its
/// entries. Arithmetic is checked and overflow is reported rather than
/// silently wrapped.
pub fn integer_rank(rows: &[Vec<(usize, i64)>]) -> Result<usize> {
    let mut pivots: std::collections::HashMap<usize, Vec<(usize, i64)>> = Default::default();
    for row in rows {
        let mut r: Vec<(usize, i64)> = row.iter().copied().filter(|&(_, v)| v != 0).collect();
        r.sort_unstable_by_key(|&(c, _)| c);
        while let Some(&(lead, v)) = r.first() {
            match pivots.get(&lead) {
                Some(p) => {
                    let pv = p[0].1;
                    let g = gcd(pv, v);
                    r = combine(pv / g, &r, v / g, p)?;
                }
                None => {
                    pivots.insert(lead, r);
                    break;
                }
            }
        }
    }
    Ok(pivots.len())
}

pub fn incidence_rank(c: &IncidenceMatrix) -> Result<usize> {
    let rows: Vec<Vec<(usize, i64)>> = c
        .rows()
        .iter()
        .map(|r| r.iter().map(|&(col, v)| (col, v as i64)).collect())
        .collect();
    integer_rank(&rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Betti {
    pub b0: usize,
    pub b1: usize,
    pub b2: usize,
    pub b3: usize,
}

impl Betti {
    pub fn euler_characteristic(&self) -> i64 {
        self.b0 as i64 - self.b1 as i64 + self.b2 as i64 - self.b3 as i64
    }

    pub fn triple(&self) -> (usize, usize, usize) {
        (self.b0, self.b1, self.b2)
    }
}

/// Betti numbers from exact ranks of the supplied incidence matrices:
/// `b_p = N_p - rank ∂_p - rank ∂_{p+1}` with `∂_0 = 0`.
pub fn betti_from_incidence(counts: [usize; 4], c: &[IncidenceMatrix; 3]) -> Result<Betti> {
    let r = [incidence_rank(&c[0])?, incidence_rank(&c[1])?, incidence_rank(&c[2])?];
    let b = |p: usize| -> usize {
        let below = if p == 0 { 0 } else { r[p - 1] };
        let above = if p == 3 { 0 } else { r[p] };
        counts[p].saturating_sub(below + above)
    };
    Ok(Betti {
        b0: b(0),
        b1: b(1),
        b2: b(2),
        b3: b(3),
    })
}

pub fn betti_numbers(complex: &SimplicialComplex) -> Result<Betti> {
    let c = [0, 1, 2].map(|p| incidence(complex, p));
    betti_from_incidence(complex.counts(), &c)
}

/// One side-by-side identity check.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub lhs: i64,
    pub rhs: i64,
    pub holds: bool,
}

impl IdentityCheck {
    pub fn new(name: &'static str, lhs: i64, rhs: i64) -> Self {
        Self {
            name,
            lhs,
            rhs,
            holds: lhs == rhs,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EulerReport {
    /// Euler characteristic of the lattice used in the identities; 1 for
    /// ball-like meshes.
    pub chi: i64,
    /// `N_V − N_E = χ − N_F + N_P`.
    pub volume: IdentityCheck,
    /// `N_V^b − N_E^b = 2χ − N_F^b` on the closed boundary surface.
    pub boundary: IdentityCheck,
    /// `(N_E − N_E^b) − (N_V − N_V^b) = (N_F − N_F^b) − (N_P − χ)`.
    pub combined: IdentityCheck,
    pub all_hold: bool,
}

/// Checks the three Euler identities with exact integers. `chi` is the Euler
/// characteristic of the lattice (`None` uses the ball value 1); for a
/// 3-manifold with boundary the boundary surface has characteristic `2χ`.
pub fn euler_audit(
    complex: &SimplicialComplex,
    classification: &BoundaryClassification,
    chi: Option<i64>,
) -> EulerReport {
    let chi = chi.unwrap_or(1);
    let n = complex.counts().map(|c| c as i64);
    let nb = [0, 1, 2].map(|p| classification.boundary_count(p) as i64);
    let volume = IdentityCheck::new("volume", n[0] - n[1], chi - n[2] + n[3]);
    let boundary = IdentityCheck::new("boundary", nb[0] - nb[1], 2 * chi - nb[2]);
    let combined = IdentityCheck::new(
        "combined",
        (n[1] - nb[1]) - (n[0] - nb[0]),
        (n[2] - nb[2]) - (n[3] - chi),
    );
    let all_hold = volume.holds && boundary.holds && combined.holds;
    EulerReport {
        chi,
        volume,
        boundary,
        combined,
        all_hold,
    }
}
