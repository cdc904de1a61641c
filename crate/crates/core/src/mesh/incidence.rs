use crate::mesh::complex::SimplicialComplex;
use crate::sparse::CsrMatrix;

/// Integer incidence matrix `C^p`: rows are `(p+1)`-simplices, columns are
/// `p`-simplices, entries in `{-1, 0, +1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceMatrix {
    degree: usize,
    ncols: usize,
    rows: Vec<Vec<(usize, i8)>>,
}

impl IncidenceMatrix {
    pub fn from_rows(degree: usize, ncols: usize, mut rows: Vec<Vec<(usize, i8)>>) -> Self {
        for row in &mut rows {
            row.sort_unstable_by_key(|&(c, _)| c);
        }
        Self { degree, ncols, rows }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, r: usize) -> &[(usize, i8)] {
        &self.rows[r]
    }

    pub fn rows(&self) -> &[Vec<(usize, i8)>] {
        &self.rows
    }

    pub fn get(&self, r: usize, c: usize) -> i8 {
        self.rows[r]
            .iter()
            .find(|&&(col, _)| col == c)
            .map_or(0, |&(_, v)| v)
    }

    /// Overwrites one entry (used for fault injection in audits).
    pub fn set(&mut self, r: usize, c: usize, value: i8) {
        let row = &mut self.rows[r];
        match row.iter().position(|&(col, _)| col == c) {
            Some(k) if value == 0 => {
                row.remove(k);
            }
            Some(k) => row[k].1 = value,
            None if value != 0 => {
                row.push((c, value));
                row.sort_unstable_by_key(|&(c, _)| c);
            }
            None => {}
        }
    }

    pub fn transpose_rows(&self) -> Vec<Vec<(usize, i8)>> {
        let mut out = vec![Vec::new(); self.ncols];
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out[c].push((r, v));
            }
        }
        out
    }

    /// Exact integer product `next · self`, returned as sparse rows.
    pub fn compose(&self, next: &IncidenceMatrix) -> Vec<Vec<(usize, i64)>> {
        assert_eq!(next.ncols, self.nrows(), "incompatible incidence degrees");
        next.rows
            .iter()
            .map(|row| {
                let mut acc: Vec<(usize, i64)> = Vec::new();
                for &(k, a) in row {
                    for &(c, b) in &self.rows[k] {
                        acc.push((c, a as i64 * b as i64));
                    }
                }
                acc.sort_unstable_by_key(|&(c, _)| c);
                let mut merged: Vec<(usize, i64)> = Vec::new();
                for (c, v) in acc {
                    match merged.last_mut() {
                        Some(last) if last.0 == c => last.1 += v,
                        _ => merged.push((c, v)),
                    }
                }
                merged.retain(|&(_, v)| v != 0);
                merged
            })
            .collect()
    }

    /// Largest `|(next · self)_ij|` together with its location, if nonzero.
    pub fn nilpotency_defect(&self, next: &IncidenceMatrix) -> (i64, Option<(usize, usize)>) {
        let mut worst = (0i64, None);
        for (r, row) in self.compose(next).iter().enumerate() {
            for &(c, v) in row {
                if v.abs() > worst.0 {
                    worst = (v.abs(), Some((r, c)));
                }
            }
        }
        worst
    }

    pub fn to_csr(&self) -> CsrMatrix<f64> {
        let trip = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v as f64)))
            .collect();
        CsrMatrix::from_triplets(self.nrows(), self.ncols, trip)
    }

    /// Restriction to the listed rows and columns.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> IncidenceMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let new_rows = rows
            .iter()
            .map(|&r| {
                self.rows[r]
                    .iter()
                    .filter(|&&(c, _)| col_map[c] != usize::MAX)
                    .map(|&(c, v)| (col_map[c], v))
                    .collect()
            })
            .collect();
        IncidenceMatrix::from_rows(self.degree, cols.len(), new_rows)
    }
}

/// Incidence matrix `C^p` of the complex, `p ∈ {0, 1, 2}`.
///
/// Signs follow the alternating-sum rule on sorted vertex lists; tet rows
/// carry the tet's orientation sign so that every tet is positively oriented.
pub fn incidence(complex: &SimplicialComplex, p: usize) -> IncidenceMatrix {
    match p {
        0 => {
            let rows = complex
                .edges()
                .iter()
                .map(|&[a, b]| vec![(a, -1), (b, 1)])
                .collect();
            IncidenceMatrix::from_rows(0, complex.count(0), rows)
        }
        1 => {
            let rows = (0..complex.count(2))
                .map(|f| {
                    let [bc, ac, ab] = *complex.face_edges(f);
                    vec![(bc, 1), (ac, -1), (ab, 1)]
                })
                .collect();
            IncidenceMatrix::from_rows(1, complex.count(1), rows)
        }
        2 => {
            let rows = (0..complex.count(3))
                .map(|t| {
                    let s = complex.tet_sign(t);
                    complex
                        .tet_faces(t)
                        .iter()
                        .enumerate()
                        .map(|(k, &f)| (f, if k % 2 == 0 { s } else { -s }))
                        .collect()
                })
                .collect();
            IncidenceMatrix::from_rows(2, complex.count(2), rows)
        }
        _ => panic!("incidence degree must be 0, 1 or 2"),
    }
}

/// All three incidence matrices `[C^0, C^1, C^2]`.
pub fn incidences(complex: &SimplicialComplex) -> [IncidenceMatrix; 3] {
    [0, 1, 2].map(|p| incidence(complex, p))
}
