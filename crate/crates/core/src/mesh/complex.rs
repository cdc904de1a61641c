use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Local edges of a tet in terms of its (sorted) local vertex slots.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local faces of a tet; face `k` is the one opposite local vertex `k`.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

/// Oriented simplicial complex of a tetrahedral mesh.
///
/// Edges and faces are stored with strictly increasing vertex indices; that
/// ordering *is* their orientation. Tets are stored sorted as well, together
/// with the sign that turns the sorted order into a positively oriented
/// (positive volume) one.
#[derive(Clone, Debug)]
pub struct SimplicialComplex {
    vertices: Vec<Vector3<f64>>,
    edges: Vec<[usize; 2]>,
    faces: Vec<[usize; 3]>,
    tets: Vec<[usize; 4]>,
    tet_sign: Vec<i8>,
    tet_edges: Vec<[usize; 6]>,
    tet_faces: Vec<[usize; 4]>,
    face_edges: Vec<[usize; 3]>,
    face_tets: Vec<Vec<usize>>,
    edge_tets: Vec<Vec<usize>>,
    vertex_tets: Vec<Vec<usize>>,
    volumes: Vec<f64>,
    grads: Vec<[Vector3<f64>; 4]>,
    edge_matrix_inv: Vec<Matrix3<f64>>,
}

fn sorted<const N: usize>(mut a: [usize; N]) -> [usize; N] {
    a.sort_unstable();
    a
}

fn index_of<T: Ord>(list: &[T], key: &T) -> usize {
    list.binary_search(key).expect("simplex present in skeleton")
}

impl SimplicialComplex {
    /// Builds the complex from vertex coordinates and tet connectivity.
    ///
    /// Duplicate tets (same vertex set) are merged; tet orientation is
    /// normalized so that every tet has positive volume.
    pub fn new(vertices: Vec<Vector3<f64>>, tets: Vec<[usize; 4]>) -> Result<Self> {
        if tets.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFiniteVertex(i));
            }
        }
        let nv = vertices.len();
        for (t, tet) in tets.iter().enumerate() {
            for &v in tet {
                if v >= nv {
                    return Err(Error::DanglingVertex {
                        tet: t,
                        vertex: v,
                        count: nv,
                    });
                }
            }
        }

        let mut sorted_tets: Vec<[usize; 4]> = tets.iter().map(|&t| sorted(t)).collect();
        sorted_tets.sort_unstable();
        sorted_tets.dedup();

        let mut used = vec![false; nv];
        for tet in &sorted_tets {
            if tet.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::DegenerateTet {
                    tet: tets.iter().position(|t| sorted(*t) == *tet).unwrap_or(0),
                    volume: 0.0,
                });
            }
            tet.iter().for_each(|&v| used[v] = true);
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::UnreferencedVertex(v));
        }

        let mut tet_sign = Vec::with_capacity(sorted_tets.len());
        let mut volumes = Vec::with_capacity(sorted_tets.len());
        let mut grads = Vec::with_capacity(sorted_tets.len());
        let mut edge_matrix_inv = Vec::with_capacity(sorted_tets.len());
        for (t, tet) in sorted_tets.iter().enumerate() {
            let x0 = vertices[tet[0]];
            let d = Matrix3::from_columns(&[
                vertices[tet[1]] - x0,
                vertices[tet[2]] - x0,
                vertices[tet[3]] - x0,
            ]);
            let det = d.determinant();
            let scale = (0..4)
                .flat_map(|a| ((a + 1)..4).map(move |b| (a, b)))
                .map(|(a, b)| (vertices[tet[a]] - vertices[tet[b]]).norm())
                .fold(0.0f64, f64::max);
            if det.abs() <= 1e-12 * scale.powi(3) {
                return Err(Error::DegenerateTet {
                    tet: t,
                    volume: det / 6.0,
                });
            }
            let inv = d.try_inverse().ok_or(Error::DegenerateTet {
                tet: t,
                volume: det / 6.0,
            })?;
            let g1 = inv.row(0).transpose();
            let g2 = inv.row(1).transpose();
            let g3 = inv.row(2).transpose();
            grads.push([-(g1 + g2 + g3), g1, g2, g3]);
            edge_matrix_inv.push(inv);
            tet_sign.push(if det > 0.0 { 1 } else { -1 });
            volumes.push(det.abs() / 6.0);
        }

        let mut edges: Vec<[usize; 2]> = sorted_tets
            .iter()
            .flat_map(|t| LOCAL_EDGES.iter().map(move |&[a, b]| [t[a], t[b]]))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let mut faces: Vec<[usize; 3]> = sorted_tets
            .iter()
            .flat_map(|t| LOCAL_FACES.iter().map(move |&[a, b, c]| [t[a], t[b], t[c]]))
            .collect();
        faces.sort_unstable();
        faces.dedup();

        let tet_edges: Vec<[usize; 6]> = sorted_tets
            .iter()
            .map(|t| LOCAL_EDGES.map(|[a, b]| index_of(&edges, &[t[a], t[b]])))
            .collect();
        let tet_faces: Vec<[usize; 4]> = sorted_tets
            .iter()
            .map(|t| LOCAL_FACES.map(|[a, b, c]| index_of(&faces, &[t[a], t[b], t[c]])))
            .collect();
        let face_edges: Vec<[usize; 3]> = faces
            .iter()
            .map(|&[a, b, c]| {
                [
                    index_of(&edges, &[b, c]),
                    index_of(&edges, &[a, c]),
                    index_of(&edges, &[a, b]),
                ]
            })
            .collect();

        let mut face_tets = vec![Vec::new(); faces.len()];
        let mut edge_tets = vec![Vec::new(); edges.len()];
        let mut vertex_tets = vec![Vec::new(); nv];
        for (t, tet) in sorted_tets.iter().enumerate() {
            tet_faces[t].iter().for_each(|&f| face_tets[f].push(t));
            tet_edges[t].iter().for_each(|&e| edge_tets[e].push(t));
            tet.iter().for_each(|&v| vertex_tets[v].push(t));
        }

        Ok(Self {
            vertices,
            edges,
            faces,
            tets: sorted_tets,
            tet_sign,
            tet_edges,
            tet_faces,
            face_edges,
            face_tets,
            edge_tets,
            vertex_tets,
            volumes,
            grads,
            edge_matrix_inv,
        })
    }

    /// Same connectivity, new coordinates. Fails if any tet degenerates.
    pub fn with_vertices(&self, vertices: Vec<Vector3<f64>>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Dimension("vertex count changed".into()));
        }
        Self::new(vertices, self.tets.clone())
    }

    /// Number of simplices of dimension `p` (`N_V, N_E, N_F, N_P`).
    pub fn count(&self, p: usize) -> usize {
        match p {
            0 => self.vertices.len(),
            1 => self.edges.len(),
            2 => self.faces.len(),
            3 => self.tets.len(),
            _ => 0,
        }
    }

    pub fn counts(&self) -> [usize; 4] {
        [0, 1, 2, 3].map(|p| self.count(p))
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Vector3<f64> {
        self.vertices[v]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    /// `+1` if the sorted vertex order of tet `t` is positively oriented.
    pub fn tet_sign(&self, t: usize) -> i8 {
        self.tet_sign[t]
    }

    pub fn tet_edges(&self, t: usize) -> &[usize; 6] {
        &self.tet_edges[t]
    }

    pub fn tet_faces(&self, t: usize) -> &[usize; 4] {
        &self.tet_faces[t]
    }

    /// Edges of face `[a,b,c]` in boundary order `[b,c], [a,c], [a,b]`.
    pub fn face_edges(&self, f: usize) -> &[usize; 3] {
        &self.face_edges[f]
    }

    pub fn face_tets(&self, f: usize) -> &[usize] {
        &self.face_tets[f]
    }

    pub fn edge_tets(&self, e: usize) -> &[usize] {
        &self.edge_tets[e]
    }

    pub fn vertex_tets(&self, v: usize) -> &[usize] {
        &self.vertex_tets[v]
    }

    pub fn volume(&self, t: usize) -> f64 {
        self.volumes[t]
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Gradients of the four barycentric coordinates of tet `t`, in sorted
    /// local vertex order.
    pub fn grad_lambda(&self, t: usize) -> &[Vector3<f64>; 4] {
        &self.grads[t]
    }

    /// Index of simplex with the given vertex set within dimension `p`.
    pub fn find_simplex(&self, vertices: &[usize]) -> Option<usize> {
        let mut v = vertices.to_vec();
        v.sort_unstable();
        match v.len() {
            1 => (v[0] < self.vertices.len()).then_some(v[0]),
            2 => self.edges.binary_search(&[v[0], v[1]]).ok(),
            3 => self.faces.binary_search(&[v[0], v[1], v[2]]).ok(),
            4 => self.tets.binary_search(&[v[0], v[1], v[2], v[3]]).ok(),
            _ => None,
        }
    }

    /// Vertex list of simplex `i` of dimension `p`.
    pub fn simplex(&self, p: usize, i: usize) -> Vec<usize> {
        match p {
            0 => vec![i],
            1 => self.edges[i].to_vec(),
            2 => self.faces[i].to_vec(),
            3 => self.tets[i].to_vec(),
            _ => panic!("simplex dimension {p} out of range"),
        }
    }

    pub fn barycenter(&self, p: usize, i: usize) -> Vector3<f64> {
        let s = self.simplex(p, i);
        s.iter().map(|&v| self.vertices[v]).sum::<Vector3<f64>>() / s.len() as f64
    }

    /// Tets containing simplex `i` of dimension `p`.
    pub fn cofaces_tets(&self, p: usize, i: usize) -> Vec<usize> {
        match p {
            0 => self.vertex_tets[i].clone(),
            1 => self.edge_tets[i].clone(),
            2 => self.face_tets[i].clone(),
            3 => vec![i],
            _ => Vec::new(),
        }
    }

    /// Local slot (0..4) of global vertex `v` within tet `t`.
    pub fn local_vertex(&self, t: usize, v: usize) -> Option<usize> {
        self.tets[t].iter().position(|&w| w == v)
    }

    /// Local index of simplex `i` (dimension `p`) within tet `t`: a vertex
    /// slot, a `LOCAL_EDGES` index or a `LOCAL_FACES` index.
    pub fn local_index(&self, t: usize, p: usize, i: usize) -> Option<usize> {
        match p {
            0 => self.local_vertex(t, i),
            1 => self.tet_edges[t].iter().position(|&e| e == i),
            2 => self.tet_faces[t].iter().position(|&f| f == i),
            3 => (t == i).then_some(0),
            _ => None,
        }
    }

    /// Global index of the local simplex `k` of dimension `p` in tet `t`.
    pub fn global_index(&self, t: usize, p: usize, k: usize) -> usize {
        match p {
            0 => self.tets[t][k],
            1 => self.tet_edges[t][k],
            2 => self.tet_faces[t][k],
            3 => t,
            _ => panic!("simplex dimension {p} out of range"),
        }
    }

    /// Tet sharing local face `k` with tet `t`, if any.
    pub fn neighbor(&self, t: usize, k: usize) -> Option<usize> {
        self.face_tets[self.tet_faces[t][k]]
            .iter()
            .copied()
            .find(|&o| o != t)
    }

    /// Barycentric coordinates of `x` with respect to tet `t` (may be
    /// negative when `x` lies outside).
    pub fn barycentric_in(&self, t: usize, x: &Vector3<f64>) -> [f64; 4] {
        let local = self.edge_matrix_inv[t] * (x - self.vertices[self.tets[t][0]]);
        [1.0 - local.sum(), local[0], local[1], local[2]]
    }

    /// Point from barycentric coordinates in tet `t`.
    pub fn point_in(&self, t: usize, lambda: &[f64; 4]) -> Vector3<f64> {
        self.tets[t]
            .iter()
            .zip(lambda)
            .map(|(&v, &l)| self.vertices[v] * l)
            .sum()
    }

    /// Finds a tet containing `x` within `tol` (in barycentric units),
    /// walking from `seed` and falling back to an exhaustive scan.
    pub fn locate(&self, x: &Vector3<f64>, seed: Option<usize>, tol: f64) -> Option<(usize, [f64; 4])> {
        let mut t = seed.unwrap_or(0).min(self.tets.len() - 1);
        for _ in 0..self.tets.len().min(4096) {
            let lam = self.barycentric_in(t, x);
            let (kmin, lmin) = lam
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (k, l)| if l < acc.1 { (k, l) } else { acc });
            if lmin >= -tol {
                return Some((t, lam));
            }
            match self.neighbor(t, kmin) {
                Some(n) => t = n,
                None => break,
            }
        }
        let mut best: Option<(usize, [f64; 4], f64)> = None;
        for t in 0..self.tets.len() {
            let lam = self.barycentric_in(t, x);
            let lmin = lam.iter().copied().fold(f64::INFINITY, f64::min);
            if best.as_ref().map_or(true, |b| lmin > b.2) {
                best = Some((t, lam, lmin));
            }
        }
        best.filter(|b| b.2 >= -tol).map(|b| (b.0, b.1))
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Number of connected components of the tet adjacency graph (through
    /// shared vertices).
    pub fn components(&self) -> usize {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &[a, b] in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        (0..n).filter(|&v| find(&mut parent, v) == v).count()
    }
}
