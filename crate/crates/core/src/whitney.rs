//! Lowest-order Whitney forms, the de Rham map and Whitney interpolation.
//!
//! Vector proxies are used throughout: a 1-form is represented by the vector
//! field whose line integrals it gives, a 2-form by the vector field whose
//! fluxes it gives, and 0-/3-forms by scalar densities.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::complex::{SimplicialComplex, LOCAL_EDGES, LOCAL_FACES};
use crate::mesh::incidence::IncidenceMatrix;
use crate::quadrature;

/// Location of a point inside a tet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarycentricPoint {
    pub tet: usize,
    pub lambda: [f64; 4],
}

/// Proxy value of a differential form at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Proxy {
    Scalar(f64),
    Vector(Vector3<f64>),
}

impl Proxy {
    pub fn zero(p: usize) -> Self {
        if p == 1 || p == 2 {
            Proxy::Vector(Vector3::zeros())
        } else {
            Proxy::Scalar(0.0)
        }
    }

    pub fn scalar(&self) -> f64 {
        match self {
            Proxy::Scalar(s) => *s,
            Proxy::Vector(_) => panic!("expected a scalar proxy"),
        }
    }

    pub fn vector(&self) -> Vector3<f64> {
        match self {
            Proxy::Vector(v) => *v,
            Proxy::Scalar(_) => panic!("expected a vector proxy"),
        }
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        match self {
            Proxy::Scalar(s) => s.abs(),
            Proxy::Vector(v) => v.amax(),
        }
    }

    fn axpy(&mut self, a: f64, other: &Proxy) {
        match (self, other) {
            (Proxy::Scalar(s), Proxy::Scalar(o)) => *s += a * o,
            (Proxy::Vector(v), Proxy::Vector(o)) => *v += a * o,
            _ => panic!("proxy kinds differ"),
        }
    }
}

/// Which lattice a cochain lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lattice {
    Primal,
    Dual,
}

/// Real coefficients indexed by the `p`-simplices of a lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cochain {
    pub degree: usize,
    pub lattice: Lattice,
    pub values: Vec<f64>,
}

impl Cochain {
    pub fn primal(degree: usize, values: Vec<f64>) -> Self {
        Self {
            degree,
            lattice: Lattice::Primal,
            values,
        }
    }

    pub fn zeros(complex: &SimplicialComplex, degree: usize) -> Self {
        Self::primal(degree, vec![0.0; complex.count(degree)])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Checks the length against the lattice of `complex` (dual `q`-cells
    /// correspond to primal `(3-q)`-simplices).
    pub fn check(&self, complex: &SimplicialComplex) -> Result<()> {
        let expected = match self.lattice {
            Lattice::Primal => complex.count(self.degree),
            Lattice::Dual => complex.count(3 - self.degree.min(3)),
        };
        if self.values.len() != expected || self.degree > 3 {
            return Err(Error::Dimension(format!(
                "{:?} {}-cochain has {} values, lattice has {expected} cells",
                self.lattice,
                self.degree,
                self.values.len()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cochain serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Smooth differential form given by its proxy field.
pub struct AnalyticForm<'a> {
    degree: usize,
    eval: Box<dyn Fn(&Vector3<f64>) -> Proxy + 'a>,
}

impl<'a> AnalyticForm<'a> {
    pub fn zero_form(f: impl Fn(&Vector3<f64>) -> f64 + 'a) -> Self {
        Self {
            degree: 0,
            eval: Box::new(move |x| Proxy::Scalar(f(x))),
        }
    }

    pub fn one_form(f: impl Fn(&Vector3<f64>) -> Vector3<f64> + 'a) -> Self {
        Self {
            degree: 1,
            eval: Box::new(move |x| Proxy::Vector(f(x))),
        }
    }

    pub fn two_form(f: impl Fn(&Vector3<f64>) -> Vector3<f64> + 'a) -> Self {
        Self {
            degree: 2,
            eval: Box::new(move |x| Proxy::Vector(f(x))),
        }
    }

    pub fn three_form(f: impl Fn(&Vector3<f64>) -> f64 + 'a) -> Self {
        Self {
            degree: 3,
            eval: Box::new(move |x| Proxy::Scalar(f(x))),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn eval(&self, x: &Vector3<f64>) -> Proxy {
        (self.eval)(x)
    }
}

/// Locates `point` and returns its barycentric coordinates, with tiny
/// negative values (within `1e-10`) clamped and renormalized.
pub fn barycentric(complex: &SimplicialComplex, point: &Vector3<f64>) -> Result<BarycentricPoint> {
    barycentric_from(complex, point, None)
}

pub fn barycentric_from(
    complex: &SimplicialComplex,
    point: &Vector3<f64>,
    seed: Option<usize>,
) -> Result<BarycentricPoint> {
    let (tet, mut lambda) = complex
        .locate(point, seed, 1e-10)
        .ok_or(Error::OutsideMesh([point.x, point.y, point.z]))?;
    if lambda.iter().any(|&l| l < 0.0) {
        lambda.iter_mut().for_each(|l| *l = l.max(0.0));
        let s: f64 = lambda.iter().sum();
        lambda.iter_mut().for_each(|l| *l /= s);
    }
    Ok(BarycentricPoint { tet, lambda })
}

/// Whitney 1-form of local edge `k` inside a tet.
pub fn local_w1(lambda: &[f64; 4], grads: &[Vector3<f64>; 4], k: usize) -> Vector3<f64> {
    let [a, b] = LOCAL_EDGES[k];
    grads[b] * lambda[a] - grads[a] * lambda[b]
}

/// Whitney 2-form of local face `k` inside a tet.
pub fn local_w2(lambda: &[f64; 4], grads: &[Vector3<f64>; 4], k: usize) -> Vector3<f64> {
    let [a, b, c] = LOCAL_FACES[k];
    (grads[b].cross(&grads[c]) * lambda[a]
        + grads[c].cross(&grads[a]) * lambda[b]
        + grads[a].cross(&grads[b]) * lambda[c])
        * 2.0
}

/// Local Whitney `p`-form `k` of tet `t` at barycentric coordinates `lambda`.
pub fn local_whitney(complex: &SimplicialComplex, t: usize, p: usize, k: usize, lambda: &[f64; 4]) -> Proxy {
    let g = complex.grad_lambda(t);
    match p {
        0 => Proxy::Scalar(lambda[k]),
        1 => Proxy::Vector(local_w1(lambda, g, k)),
        2 => Proxy::Vector(local_w2(lambda, g, k)),
        3 => Proxy::Scalar(1.0 / complex.volume(t)),
        _ => panic!("form degree {p} out of range"),
    }
}

/// Number of local `p`-simplices of a tet.
pub fn local_count(p: usize) -> usize {
    [4, 6, 4, 1][p]
}

/// Whitney `p`-form of simplex `element` evaluated at `at`; zero when the
/// simplex is not a face of the containing tet.
pub fn whitney_eval(complex: &SimplicialComplex, p: usize, element: usize, at: &BarycentricPoint) -> Proxy {
    match complex.local_index(at.tet, p, element) {
        Some(k) => local_whitney(complex, at.tet, p, k, &at.lambda),
        None => Proxy::zero(p),
    }
}

/// Whitney interpolation of a primal cochain at a point.
pub fn interpolate(complex: &SimplicialComplex, cochain: &Cochain, at: &BarycentricPoint) -> Proxy {
    let p = cochain.degree;
    let mut acc = Proxy::zero(p);
    for k in 0..local_count(p) {
        let coeff = cochain.values[complex.global_index(at.tet, p, k)];
        acc.axpy(coeff, &local_whitney(complex, at.tet, p, k, &at.lambda));
    }
    acc
}

/// Interpolation of a slice of coefficients, for callers holding raw arrays.
pub fn interpolate_values(complex: &SimplicialComplex, p: usize, values: &[f64], at: &BarycentricPoint) -> Proxy {
    let mut acc = Proxy::zero(p);
    for k in 0..local_count(p) {
        acc.axpy(
            values[complex.global_index(at.tet, p, k)],
            &local_whitney(complex, at.tet, p, k, &at.lambda),
        );
    }
    acc
}

/// Integral of `form` over simplex `i` of dimension `p` (degree-2 rules).
pub fn integrate_on_simplex(complex: &SimplicialComplex, form: &AnalyticForm, p: usize, i: usize) -> f64 {
    let s = complex.simplex(p, i);
    let x: Vec<Vector3<f64>> = s.iter().map(|&v| complex.vertex(v)).collect();
    match p {
        0 => form.eval(&x[0]).scalar(),
        1 => {
            let t = x[1] - x[0];
            quadrature::EDGE
                .iter()
                .map(|(l, w)| w * form.eval(&(x[0] * l[0] + x[1] * l[1])).vector().dot(&t))
                .sum()
        }
        2 => {
            let area = (x[1] - x[0]).cross(&(x[2] - x[0])) * 0.5;
            quadrature::TRIANGLE
                .iter()
                .map(|(l, w)| {
                    w * form
                        .eval(&(x[0] * l[0] + x[1] * l[1] + x[2] * l[2]))
                        .vector()
                        .dot(&area)
                })
                .sum()
        }
        3 => {
            let vol = complex.volume(i);
            quadrature::TET
                .iter()
                .map(|(l, w)| w * vol * form.eval(&complex.point_in(i, l)).scalar())
                .sum()
        }
        _ => panic!("form degree {p} out of range"),
    }
}

/// De Rham map: integrate `form` over every primal `p`-simplex.
pub fn de_rham(form: &AnalyticForm, complex: &SimplicialComplex, p: usize) -> Result<Cochain> {
    if form.degree() != p {
        return Err(Error::Dimension(format!(
            "form of degree {} cannot be integrated on {p}-simplices",
            form.degree()
        )));
    }
    let values = (0..complex.count(p))
        .map(|i| integrate_on_simplex(complex, form, p, i))
        .collect();
    Ok(Cochain::primal(p, values))
}

/// Integral of the local Whitney form `j` (dimension `p`) of tet `t` over the
/// local `p`-simplex `i` of the same tet.
fn local_pairing(complex: &SimplicialComplex, t: usize, p: usize, i: usize, j: usize) -> f64 {
    let unit = |slot: usize| {
        let mut l = [0.0; 4];
        l[slot] = 1.0;
        l
    };
    let tet = complex.tets()[t];
    let grads = complex.grad_lambda(t);
    match p {
        0 => unit(i)[j],
        1 => {
            let [a, b] = LOCAL_EDGES[i];
            let tangent = complex.vertex(tet[b]) - complex.vertex(tet[a]);
            quadrature::EDGE
                .iter()
                .map(|(l, w)| {
                    let mut lam = [0.0; 4];
                    lam[a] = l[0];
                    lam[b] = l[1];
                    w * local_w1(&lam, grads, j).dot(&tangent)
                })
                .sum()
        }
        2 => {
            let [a, b, c] = LOCAL_FACES[i];
            let x = [a, b, c].map(|s| complex.vertex(tet[s]));
            let area = (x[1] - x[0]).cross(&(x[2] - x[0])) * 0.5;
            quadrature::TRIANGLE
                .iter()
                .map(|(l, w)| {
                    let mut lam = [0.0; 4];
                    lam[a] = l[0];
                    lam[b] = l[1];
                    lam[c] = l[2];
                    w * local_w2(&lam, grads, j).dot(&area)
                })
                .sum()
        }
        3 => 1.0,
        _ => panic!("form degree {p} out of range"),
    }
}

/// Max over all pairs of `|∫_{σ_i} ω_j − δ_ij|`.
///
/// Pairs whose simplices share no tet vanish identically by compact support;
/// every other pair is integrated inside each tet that contains both, so the
/// scan is complete.
pub fn verify_partition_duality(complex: &SimplicialComplex, p: usize) -> f64 {
    let n = local_count(p);
    let mut worst = 0.0f64;
    for t in 0..complex.count(3) {
        for i in 0..n {
            for j in 0..n {
                let delta = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((local_pairing(complex, t, p, i, j) - delta).abs());
            }
        }
    }
    worst
}

/// Exterior derivative of the local Whitney `(p-1)`-form `k` (constant in
/// the tet for lowest order).
pub fn local_d_whitney(complex: &SimplicialComplex, t: usize, p: usize, k: usize) -> Proxy {
    let g = complex.grad_lambda(t);
    match p {
        1 => Proxy::Vector(g[k]),
        2 => {
            let [a, b] = LOCAL_EDGES[k];
            Proxy::Vector(g[a].cross(&g[b]) * 2.0)
        }
        3 => {
            let [a, b, c] = LOCAL_FACES[k];
            Proxy::Scalar(6.0 * g[a].dot(&g[b].cross(&g[c])))
        }
        _ => panic!("coboundary degree {p} out of range"),
    }
}

/// Compares `d ω^{p-1}_i` with `Σ_j C^{p-1}_{ji} ω^p_j` at the degree-2
/// quadrature points and barycenter of every tet; returns the largest
/// pointwise deviation.
pub fn verify_coboundary(complex: &SimplicialComplex, incidence: &IncidenceMatrix, p: usize) -> f64 {
    assert!((1..=3).contains(&p), "coboundary check needs p in 1..=3");
    assert_eq!(incidence.degree(), p - 1);
    let mut points: Vec<[f64; 4]> = quadrature::TET.iter().map(|(l, _)| *l).collect();
    points.push([0.25; 4]);
    let mut worst = 0.0f64;
    for t in 0..complex.count(3) {
        for k in 0..local_count(p - 1) {
            let i = complex.global_index(t, p - 1, k);
            let exact = local_d_whitney(complex, t, p, k);
            for lam in &points {
                let mut expansion = Proxy::zero(p);
                for m in 0..local_count(p) {
                    let j = complex.global_index(t, p, m);
                    let c = incidence.get(j, i);
                    if c != 0 {
                        expansion.axpy(c as f64, &local_whitney(complex, t, p, m, lam));
                    }
                }
                let dev = match (exact, expansion) {
                    (Proxy::Scalar(a), Proxy::Scalar(b)) => (a - b).abs(),
                    (Proxy::Vector(a), Proxy::Vector(b)) => (a - b).amax(),
                    _ => unreachable!(),
                };
                worst = worst.max(dev);
            }
        }
    }
    worst
}
