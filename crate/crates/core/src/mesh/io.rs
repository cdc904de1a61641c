//! Text mesh format.
//!
//! ```text
//! declat-mesh 1
//! vertices 4
//! 0 0 0
//! 1 0 0
//! 0 1 0
//! 0 0 1
//! tets 1
//! 0 1 2 3
//! ```
//!
//! Anything after `#` on a line is ignored; blank lines are skipped.

use std::fmt::Write as _;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::mesh::complex::SimplicialComplex;

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses mesh text and builds the complex.
pub fn load_mesh(source: &str) -> Result<SimplicialComplex> {
    let (vertices, tets) = parse_mesh(source)?;
    SimplicialComplex::new(vertices, tets)
}

/// Parses mesh text into raw coordinates and connectivity without building
/// the skeleton.
pub fn parse_mesh(source: &str) -> Result<(Vec<Vector3<f64>>, Vec<[usize; 4]>)> {
    let mut lines = source
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, header) = lines.next().ok_or_else(|| err(0, "empty mesh file"))?;
    if header.split_whitespace().collect::<Vec<_>>() != ["declat-mesh", "1"] {
        return Err(err(ln, "expected header `declat-mesh 1`"));
    }

    let nv = section_count(&mut lines, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = lines.next().ok_or_else(|| err(0, "unexpected end of vertex list"))?;
        let c: Vec<f64> = parse_fields(ln, line)?;
        if c.len() != 3 {
            return Err(err(ln, "expected three coordinates"));
        }
        vertices.push(Vector3::new(c[0], c[1], c[2]));
    }

    let nt = section_count(&mut lines, "tets")?;
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, line) = lines.next().ok_or_else(|| err(0, "unexpected end of tet list"))?;
        let idx: Vec<usize> = parse_fields(ln, line)?;
        if idx.len() != 4 {
            return Err(err(ln, "expected four vertex indices"));
        }
        tets.push([idx[0], idx[1], idx[2], idx[3]]);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "trailing content after tet list"));
    }
    Ok((vertices, tets))
}

fn section_count<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    name: &str,
) -> Result<usize> {
    let (ln, line) = lines
        .next()
        .ok_or_else(|| err(0, format!("missing `{name}` section")))?;
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != 2 || f[0] != name {
        return Err(err(ln, format!("expected `{name} <count>`")));
    }
    f[1].parse::<usize>()
        .map_err(|e| err(ln, format!("bad {name} count: {e}")))
}

fn parse_fields<T: std::str::FromStr>(ln: usize, line: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    line.split_whitespace()
        .map(|s| s.parse::<T>().map_err(|e| err(ln, format!("bad field `{s}`: {e}"))))
        .collect()
}

/// Serializes the complex (sorted tets, positive orientation restored).
pub fn write_mesh(complex: &SimplicialComplex) -> String {
    let mut out = String::from("declat-mesh 1\n");
    let _ = writeln!(out, "vertices {}", complex.count(0));
    for v in complex.vertices() {
        let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
    }
    let _ = writeln!(out, "tets {}", complex.count(3));
    for (t, &[a, b, c, d]) in complex.tets().iter().enumerate() {
        if complex.tet_sign(t) > 0 {
            let _ = writeln!(out, "{a} {b} {c} {d}");
        } else {
            let _ = writeln!(out, "{b} {a} {c} {d}");
        }
    }
    out
}
