//! Deterministic test geometries.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::mesh::complex::SimplicialComplex;

const AXIS_PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Unit right tet: origin plus the three unit axis points.
pub fn single_tet() -> SimplicialComplex {
    SimplicialComplex::new(
        vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
        ],
        vec![[0, 1, 2, 3]],
    )
    .expect("valid tet")
}

/// Regular tet with unit edge length.
pub fn regular_tet() -> SimplicialComplex {
    let h = 3f64.sqrt() / 2.0;
    let z = (2.0f64 / 3.0).sqrt();
    SimplicialComplex::new(
        vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.5, h, 0.0),
            Vector3::new(0.5, h / 3.0, z),
        ],
        vec![[0, 1, 2, 3]],
    )
    .expect("valid tet")
}

/// Two tets glued along the face `(0, 1, 2)`.
pub fn two_tets() -> SimplicialComplex {
    SimplicialComplex::new(
        vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(0.3, 0.3, -1.0),
        ],
        vec![[0, 1, 2, 3], [0, 1, 2, 4]],
    )
    .expect("valid tets")
}

/// Unit cube split into the six Kuhn tets along the main diagonal.
pub fn kuhn_cube() -> SimplicialComplex {
    box_mesh(1)
}

/// Unit cube `[0,1]^3` divided into `n^3` Kuhn-subdivided cells.
pub fn box_mesh(n: usize) -> SimplicialComplex {
    box_grid([n, n, n], Vector3::zeros(), Vector3::repeat(1.0))
}

/// Axis-aligned box from `origin` to `origin + lengths` with `cells` cubes
/// per axis, each split into six Kuhn tets sharing the cell diagonal.
pub fn box_grid(cells: [usize; 3], origin: Vector3<f64>, lengths: Vector3<f64>) -> SimplicialComplex {
    let [nx, ny, nz] = cells;
    assert!(nx > 0 && ny > 0 && nz > 0, "box needs at least one cell per axis");
    let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(
                    origin
                        + Vector3::new(
                            lengths.x * i as f64 / nx as f64,
                            lengths.y * j as f64 / ny as f64,
                            lengths.z * k as f64 / nz as f64,
                        ),
                );
            }
        }
    }
    let mut tets = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for perm in AXIS_PERMUTATIONS {
                    let mut p = [i, j, k];
                    let mut tet = [id(p[0], p[1], p[2]); 4];
                    for (s, &axis) in perm.iter().enumerate() {
                        p[axis] += 1;
                        tet[s + 1] = id(p[0], p[1], p[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    SimplicialComplex::new(vertices, tets).expect("box mesh is valid")
}

/// Solid torus: a ring of `sectors` hexahedral blocks (radial × angular ×
/// vertical), each Kuhn-split into tets. Has Betti numbers `(1, 1, 0)`.
pub fn annulus(sectors: usize, radial: usize, layers: usize) -> SimplicialComplex {
    assert!(sectors >= 3 && radial >= 1 && layers >= 1);
    let (r_in, r_out, height) = (1.0, 2.0, 1.0);
    let id = |s: usize, r: usize, z: usize| ((s % sectors) * (radial + 1) + r) * (layers + 1) + z;
    let mut vertices = Vec::with_capacity(sectors * (radial + 1) * (layers + 1));
    for s in 0..sectors {
        let theta = 2.0 * PI * s as f64 / sectors as f64;
        for r in 0..=radial {
            let rad = r_in + (r_out - r_in) * r as f64 / radial as f64;
            for z in 0..=layers {
                vertices.push(Vector3::new(
                    rad * theta.cos(),
                    rad * theta.sin(),
                    height * z as f64 / layers as f64,
                ));
            }
        }
    }
    let mut tets = Vec::new();
    for s in 0..sectors {
        for r in 0..radial {
            for z in 0..layers {
                for perm in AXIS_PERMUTATIONS {
                    let mut p = [s, r, z];
                    let mut tet = [id(p[0], p[1], p[2]); 4];
                    for (k, &axis) in perm.iter().enumerate() {
                        p[axis] += 1;
                        tet[k + 1] = id(p[0], p[1], p[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    SimplicialComplex::new(vertices, tets).expect("annulus mesh is valid")
}

/// `n^3` box whose central tets are squashed into slivers: every vertex on the
/// plane `z = 1/2` is pushed up to `z = 1/2 + (1/2 - thickness)` toward the
/// top layer, so the upper layer of cells nearly collapses.
pub fn sliver_box(n: usize, thickness: f64) -> SimplicialComplex {
    assert!(n >= 2 && n % 2 == 0, "sliver box needs an even cell count");
    let base = box_mesh(n);
    let h = 1.0 / n as f64;
    let mid = 0.5;
    let verts = base
        .vertices()
        .iter()
        .map(|v| {
            if (v.z - mid).abs() < 1e-12 {
                Vector3::new(v.x, v.y, mid + h - thickness)
            } else {
                *v
            }
        })
        .collect();
    base.with_vertices(verts).expect("sliver box stays valid")
}
