use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use declat::hodge::MaterialMap;
use declat::mesh::{generate, load_mesh, SimplicialComplex};

use crate::MeshArgs;

fn parse_parts<const N: usize>(name: &str, parts: &[&str]) -> Result<[f64; N]> {
    if parts.len() != N {
        bail!("mesh '{name}' expects {N} parameter(s)");
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().with_context(|| format!("bad parameter '{p}' in mesh '{name}'"))?;
    }
    Ok(out)
}

/// Built-in mesh by name, or `None` if the name is not a built-in.
pub fn builtin(name: &str) -> Result<Option<SimplicialComplex>> {
    let mut parts = name.split(':');
    let head = parts.next().unwrap_or_default();
    let rest: Vec<&str> = parts.collect();
    let mesh = match head {
        "single-tet" => generate::single_tet(),
        "regular-tet" => generate::regular_tet(),
        "two-tets" => generate::two_tets(),
        "kuhn-cube" => generate::kuhn_cube(),
        "box" => {
            let [n] = parse_parts::<1>(name, &rest)?;
            if n < 1.0 || n.fract() != 0.0 {
                bail!("box size must be a positive integer");
            }
            generate::box_mesh(n as usize)
        }
        "annulus" => {
            let [s, r, l] = parse_parts::<3>(name, &rest)?;
            if s < 3.0 || r < 1.0 || l < 1.0 {
                bail!("annulus needs at least 3 sectors, 1 radial cell and 1 layer");
            }
            generate::annulus(s as usize, r as usize, l as usize)
        }
        "sliver" => {
            let [n, t] = parse_parts::<2>(name, &rest)?;
            if n < 2.0 || n as usize % 2 != 0 || !(t > 0.0 && t < 0.5) {
                bail!("sliver mesh needs an even size and thickness in (0, 0.5)");
            }
            generate::sliver_box(n as usize, t)
        }
        _ => return Ok(None),
    };
    Ok(Some(mesh))
}

pub fn resolve_mesh(source: &str) -> Result<SimplicialComplex> {
    if Path::new(source).is_file() {
        let text = fs::read_to_string(source).with_context(|| format!("reading {source}"))?;
        return load_mesh(&text).with_context(|| format!("loading mesh {source}"));
    }
    builtin(source)?.with_context(|| format!("'{source}' is neither a mesh file nor a built-in mesh"))
}

pub fn materials(args: &MeshArgs, complex: &SimplicialComplex) -> Result<MaterialMap> {
    let Some(path) = &args.materials else {
        return Ok(MaterialMap::uniform(complex.count(3), args.eps, args.mu)?);
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut eps = Vec::new();
    let mut mu = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{}:{}: expected two numbers", path.display(), i + 1))?;
        let [e, m] = vals[..] else {
            bail!("{}:{}: expected `eps mu`", path.display(), i + 1);
        };
        eps.push(nalgebra::Matrix3::identity() * e);
        mu.push(nalgebra::Matrix3::identity() * m);
    }
    if eps.len() != complex.count(3) {
        bail!("material file has {} entries, mesh has {} tets", eps.len(), complex.count(3));
    }
    Ok(MaterialMap::from_tensors(eps, mu)?)
}

/// Writes to `path`, or prints to stdout when no path is given.
pub fn emit(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, content).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}
