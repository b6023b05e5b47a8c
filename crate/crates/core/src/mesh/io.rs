//! Plain-text field files.
//!
//! ```text
//! flatcore-field 1
//! domain rectangle <lx> <ly>      | domain disk <radius>
//! vertices <N>
//! triangles <M>
//! <x> <y>                         N lines
//! <i> <j> <k>                     M lines, zero-based vertex indices
//! <value>                         N lines
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Boundary flags and
//! geometric data are recomputed on load.

use std::io::{BufRead, Write};
use std::sync::Arc;

use super::{DomainKind, Mesh, ScalarField};
use crate::error::{Error, Result};

pub const MAGIC: &str = "flatcore-field 1";

pub fn write_field<W: Write>(w: &mut W, field: &ScalarField) -> Result<()> {
    let m = field.mesh();
    writeln!(w, "{MAGIC}")?;
    match m.domain() {
        DomainKind::Rectangle { lx, ly } => writeln!(w, "domain rectangle {lx:e} {ly:e}")?,
        DomainKind::Disk { radius } => writeln!(w, "domain disk {radius:e}")?,
    }
    writeln!(w, "vertices {}", m.n_vertices())?;
    writeln!(w, "triangles {}", m.n_triangles())?;
    for p in m.vertices() {
        writeln!(w, "{:e} {:e}", p[0], p[1])?;
    }
    for t in m.triangles() {
        writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
    }
    for v in field.values() {
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}

pub fn save_field(path: &std::path::Path, field: &ScalarField) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_field(&mut f, field)?;
    f.flush()?;
    Ok(())
}

pub fn read_field<R: BufRead>(r: R) -> Result<ScalarField> {
    let mut lines = r
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)))
        .filter(|l| match l {
            Ok((_, s)) => !(s.trim().is_empty() || s.trim_start().starts_with('#')),
            Err(_) => true,
        });
    let mut last = 0usize;
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some(Ok((n, s))) => {
                last = n;
                Ok((n, s))
            }
            Some(Err(e)) => Err(e.into()),
            None => Err(Error::Parse { line: last + 1, message: format!("unexpected end of file, expected {what}") }),
        }
    };
    let perr = |line: usize, msg: String| Error::Parse { line, message: msg };

    let (n, s) = next("header")?;
    if s.trim() != MAGIC {
        return Err(perr(n, format!("expected `{MAGIC}`")));
    }
    let (n, s) = next("domain line")?;
    let tok: Vec<&str> = s.split_whitespace().collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| perr(n, format!("bad number `{t}`")));
    let domain = match tok.as_slice() {
        ["domain", "rectangle", lx, ly] => DomainKind::Rectangle { lx: num(lx)?, ly: num(ly)? },
        ["domain", "disk", r] => DomainKind::Disk { radius: num(r)? },
        _ => return Err(perr(n, "expected `domain rectangle LX LY` or `domain disk R`".into())),
    };
    let mut count = |key: &str| -> Result<usize> {
        let (n, s) = next(key)?;
        let tok: Vec<&str> = s.split_whitespace().collect();
        match tok.as_slice() {
            [k, v] if *k == key => v.parse().map_err(|_| perr(n, format!("bad count `{v}`"))),
            _ => Err(perr(n, format!("expected `{key} <count>`"))),
        }
    };
    let nv = count("vertices")?;
    let nt = count("triangles")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, s) = next("vertex")?;
        let v: Vec<f64> = s
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| perr(n, format!("bad coordinate `{t}`"))))
            .collect::<Result<_>>()?;
        if v.len() != 2 {
            return Err(perr(n, "expected two coordinates".into()));
        }
        vertices.push([v[0], v[1]]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (n, s) = next("triangle")?;
        let v: Vec<usize> = s
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| perr(n, format!("bad index `{t}`"))))
            .collect::<Result<_>>()?;
        if v.len() != 3 {
            return Err(perr(n, "expected three vertex indices".into()));
        }
        triangles.push([v[0], v[1], v[2]]);
    }
    let mut values = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, s) = next("value")?;
        values.push(s.trim().parse::<f64>().map_err(|_| perr(n, format!("bad value `{}`", s.trim())))?);
    }
    let mesh = Mesh::from_parts(vertices, triangles, domain)?;
    ScalarField::new(Arc::new(mesh), values)
}

pub fn load_field(path: &std::path::Path) -> Result<ScalarField> {
    read_field(std::io::BufReader::new(std::fs::File::open(path)?))
}
