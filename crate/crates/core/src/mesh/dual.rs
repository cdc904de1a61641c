//! Barycentric dual lattice.
//!
//! The dual `(3-p)`-cell of a primal `p`-simplex `σ` is the union of the
//! barycentric-subdivision simplices `[b(σ), b(σ_{p+1}), …, b(T)]` over all
//! flags `σ ⊂ σ_{p+1} ⊂ … ⊂ T`. Each such piece carries a sign so that the
//! cell is oriented consistently with the primal simplex: primal tangent
//! frame followed by dual frame is positively oriented in R³.

use nalgebra::{Matrix3, Vector3};

use crate::mesh::complex::{SimplicialComplex, LOCAL_EDGES, LOCAL_FACES};
use crate::mesh::incidence::IncidenceMatrix;

/// One barycentric-subdivision simplex belonging to a dual cell.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPiece {
    /// Simplex indices of the flag, from dimension `p` up to the tet.
    pub flag: Vec<usize>,
    /// `+1` if the flag order matches the dual cell orientation.
    pub sign: i8,
}

#[derive(Clone, Debug)]
pub struct DualComplex {
    barycenters: [Vec<Vector3<f64>>; 4],
    pieces: [Vec<Vec<DualPiece>>; 4],
    /// `incidence[q]`: dual `q`-cells → dual `(q+1)`-cells, i.e. rows are
    /// primal `(2-q)`-simplices and columns primal `(3-q)`-simplices.
    incidence: [IncidenceMatrix; 3],
}

impl DualComplex {
    /// Barycenters of all primal simplices of dimension `p`.
    pub fn barycenters(&self, p: usize) -> &[Vector3<f64>] {
        &self.barycenters[p]
    }

    /// Pieces of the dual cell of primal simplex `i` of dimension `p`.
    pub fn pieces(&self, p: usize, i: usize) -> &[DualPiece] {
        &self.pieces[p][i]
    }

    /// Corner points of a piece of a dual cell of a primal `p`-simplex.
    pub fn piece_points(&self, p: usize, piece: &DualPiece) -> Vec<Vector3<f64>> {
        piece
            .flag
            .iter()
            .enumerate()
            .map(|(k, &idx)| self.barycenters[p + k][idx])
            .collect()
    }

    /// Dual incidence `C̃^q` computed from the oriented dual cells.
    pub fn incidence(&self, q: usize) -> &IncidenceMatrix {
        &self.incidence[q]
    }

    pub fn incidence_mut(&mut self, q: usize) -> &mut IncidenceMatrix {
        &mut self.incidence[q]
    }

    /// Volume of the dual 3-cell of vertex `v`.
    pub fn dual_volume(&self, v: usize) -> f64 {
        self.pieces[0][v]
            .iter()
            .map(|piece| {
                let x = self.piece_points(0, piece);
                Matrix3::from_columns(&[x[1] - x[0], x[2] - x[0], x[3] - x[0]])
                    .determinant()
                    .abs()
                    / 6.0
            })
            .sum()
    }

    /// Vector area of the dual face of edge `e` (oriented along the edge).
    pub fn dual_area_vector(&self, e: usize) -> Vector3<f64> {
        self.pieces[1][e]
            .iter()
            .map(|piece| {
                let x = self.piece_points(1, piece);
                (x[1] - x[0]).cross(&(x[2] - x[0])) * (0.5 * piece.sign as f64)
            })
            .sum()
    }
}

/// Sign `s_q` with `C̃^q = s_q (C^{2-q})ᵀ` under the geometric orientation
/// used here: `-1` for `q = 0, 2` and `+1` for `q = 1`.
pub fn transpose_sign(q: usize) -> i8 {
    if q == 1 {
        1
    } else {
        -1
    }
}

fn sign_of(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else {
        -1
    }
}

/// Builds the barycentric dual of `complex`.
pub fn barycentric_dual(complex: &SimplicialComplex) -> DualComplex {
    let barycenters = [0, 1, 2, 3].map(|p| {
        (0..complex.count(p))
            .map(|i| complex.barycenter(p, i))
            .collect::<Vec<_>>()
    });
    let mut pieces: [Vec<Vec<DualPiece>>; 4] =
        [0, 1, 2, 3].map(|p| vec![Vec::new(); complex.count(p)]);

    for t in 0..complex.count(3) {
        let tet = complex.tets()[t];
        let xt = barycenters[3][t];
        pieces[3][t].push(DualPiece {
            flag: vec![t],
            sign: 1,
        });
        for (kf, lf) in LOCAL_FACES.iter().enumerate() {
            let f = complex.tet_faces(t)[kf];
            let fv = complex.faces()[f];
            let xf = barycenters[2][f];
            let n = (complex.vertex(fv[1]) - complex.vertex(fv[0]))
                .cross(&(complex.vertex(fv[2]) - complex.vertex(fv[0])));
            pieces[2][f].push(DualPiece {
                flag: vec![f, t],
                sign: sign_of(n.dot(&(xt - xf))),
            });
            for (ke, le) in LOCAL_EDGES.iter().enumerate() {
                if !le.iter().all(|v| lf.contains(v)) {
                    continue;
                }
                let e = complex.tet_edges(t)[ke];
                let [a, b] = complex.edges()[e];
                let xe = barycenters[1][e];
                let tangent = complex.vertex(b) - complex.vertex(a);
                let normal = (xf - xe).cross(&(xt - xe));
                pieces[1][e].push(DualPiece {
                    flag: vec![e, f, t],
                    sign: sign_of(normal.dot(&tangent)),
                });
                for &lv in le {
                    let v = tet[lv];
                    let xv = barycenters[0][v];
                    let det = Matrix3::from_columns(&[xe - xv, xf - xv, xt - xv]).determinant();
                    pieces[0][v].push(DualPiece {
                        flag: vec![v, e, f, t],
                        sign: sign_of(det),
                    });
                }
            }
        }
    }

    let incidence = [0, 1, 2].map(|q| dual_incidence(complex, &pieces, q));
    DualComplex {
        barycenters,
        pieces,
        incidence,
    }
}

/// Boundary relation between dual cells read off the subdivision pieces: the
/// facet of piece `[b_σ, b_τ, …]` opposite `b_σ` is a piece of dual(τ) and
/// enters `∂ dual(σ)` with sign `sign(σ-piece) · sign(τ-piece)`.
fn dual_incidence(
    complex: &SimplicialComplex,
    pieces: &[Vec<Vec<DualPiece>>; 4],
    q: usize,
) -> IncidenceMatrix {
    let p = 2 - q;
    let rows = (0..complex.count(p))
        .map(|s| {
            let mut row: Vec<(usize, i8)> = Vec::new();
            for piece in &pieces[p][s] {
                let tail = &piece.flag[1..];
                let tau = tail[0];
                let other = pieces[p + 1][tau]
                    .iter()
                    .find(|o| o.flag == tail)
                    .expect("facet piece belongs to the coface dual cell");
                let v = piece.sign * other.sign;
                match row.iter().find(|(c, _)| *c == tau) {
                    Some(&(_, existing)) => debug_assert_eq!(existing, v, "inconsistent dual orientation"),
                    None => row.push((tau, v)),
                }
            }
            row
        })
        .collect();
    IncidenceMatrix::from_rows(q, complex.count(p + 1), rows)
}
