use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::complex::SimplicialComplex;

/// Partition of the simplices of each dimension into boundary (fixed) and
/// interior (free) sets.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryClassification {
    /// `is_boundary[p][i]` for `p = 0..=3`; tets are never boundary.
    is_boundary: [Vec<bool>; 4],
}

impl BoundaryClassification {
    pub fn is_boundary(&self, p: usize, i: usize) -> bool {
        self.is_boundary[p][i]
    }

    pub fn flags(&self, p: usize) -> &[bool] {
        &self.is_boundary[p]
    }

    pub fn boundary_count(&self, p: usize) -> usize {
        self.is_boundary[p].iter().filter(|&&b| b).count()
    }

    pub fn interior_count(&self, p: usize) -> usize {
        self.is_boundary[p].len() - self.boundary_count(p)
    }

    pub fn interior(&self, p: usize) -> Vec<usize> {
        (0..self.is_boundary[p].len())
            .filter(|&i| !self.is_boundary[p][i])
            .collect()
    }

    pub fn boundary(&self, p: usize) -> Vec<usize> {
        (0..self.is_boundary[p].len())
            .filter(|&i| self.is_boundary[p][i])
            .collect()
    }
}

/// Boundary faces are faces with exactly one incident tet; boundary edges and
/// vertices are those lying in a boundary face.
pub fn classify_boundary(complex: &SimplicialComplex) -> Result<BoundaryClassification> {
    let mut faces = vec![false; complex.count(2)];
    for (f, flag) in faces.iter_mut().enumerate() {
        match complex.face_tets(f).len() {
            1 => *flag = true,
            2 => {}
            n => {
                return Err(Error::NonManifold {
                    face: f,
                    vertices: complex.faces()[f],
                    cofaces: n,
                })
            }
        }
    }
    Ok(from_boundary_faces(complex, faces))
}

/// Classification induced by an arbitrary set of "fixed" faces. Used for
/// partial PEC walls where the remaining boundary keeps its natural condition.
pub fn from_boundary_faces(complex: &SimplicialComplex, faces: Vec<bool>) -> BoundaryClassification {
    let mut edges = vec![false; complex.count(1)];
    let mut verts = vec![false; complex.count(0)];
    for (f, _) in faces.iter().enumerate().filter(|(_, &b)| b) {
        complex.face_edges(f).iter().for_each(|&e| edges[e] = true);
        complex.faces()[f].iter().for_each(|&v| verts[v] = true);
    }
    BoundaryClassification {
        is_boundary: [verts, edges, faces, vec![false; complex.count(3)]],
    }
}
