//! Plain-text mesh exchange format (see `docs/formats.md`).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{LabError, Result};
use crate::geometry::{Domain, Mesh};

const MAGIC: &str = "dtnlab-mesh 1";

/// Serialize a mesh. Floats use Rust's shortest round-trip `{:e}` form, so
/// `read_mesh(write_mesh(m))` reproduces every coordinate bit-for-bit.
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "id {}", mesh.id());
    let _ = writeln!(s, "domain {}", mesh.domain().name());
    let _ = writeln!(s, "vertices {}", mesh.n_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:e} {:e} {:e}", p[0], p[1], p[2]);
    }
    let _ = writeln!(s, "tets {}", mesh.tets().len());
    for t in mesh.tets() {
        let _ = writeln!(s, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "boundary_faces {}", mesh.boundary_faces().len());
    for f in mesh.boundary_faces() {
        let [a, b, c] = f.vertices;
        let n = f.normal;
        let _ = writeln!(s, "{a} {b} {c} {:e} {:e} {:e}", n[0], n[1], n[2]);
    }
    s
}

pub fn save_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, write_mesh(mesh))?;
    Ok(())
}

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    read_mesh(&text).map_err(|e| match e {
        LabError::Parse { line, message, .. } => LabError::Parse { path: Some(path.to_path_buf()), line, message },
        other => other,
    })
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        let (i, l) = self.inner.next().ok_or_else(|| parse_err(self.line + 1, "unexpected end of file"))?;
        self.line = i + 1;
        Ok(l)
    }

    fn header(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next()?;
        l.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| parse_err(self.line, &format!("expected `{key} ...`")))
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let v = self.header(key)?;
        v.trim().parse().map_err(|_| parse_err(self.line, &format!("bad {key} count")))
    }

    fn numbers<T: std::str::FromStr>(&mut self, n: usize) -> Result<Vec<T>> {
        let l = self.next()?;
        let out: Vec<T> = l
            .split_ascii_whitespace()
            .map(|t| t.parse::<T>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(self.line, "bad number"))?;
        if out.len() != n {
            return Err(parse_err(self.line, &format!("expected {n} fields, found {}", out.len())));
        }
        Ok(out)
    }
}

fn parse_err(line: usize, message: &str) -> LabError {
    LabError::Parse { path: None, line, message: message.to_string() }
}

/// Parse the text format. The boundary is recomputed from the tets and must
/// agree with the listed boundary faces.
pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    if lines.next()? != MAGIC {
        return Err(parse_err(1, "missing mesh header"));
    }
    let id = lines.header("id")?.to_string();
    let domain = match lines.header("domain")? {
        "cube" => Domain::Cube,
        "ball" => Domain::Ball,
        other => return Err(parse_err(lines.line, &format!("unknown domain `{other}`"))),
    };
    let nv = lines.count("vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let v = lines.numbers::<f64>(3)?;
        vertices.push([v[0], v[1], v[2]]);
    }
    let nt = lines.count("tets")?;
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let t = lines.numbers::<usize>(4)?;
        tets.push([t[0], t[1], t[2], t[3]]);
    }
    let nf = lines.count("boundary_faces")?;
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let l = lines.next()?;
        let fields: Vec<&str> = l.split_ascii_whitespace().collect();
        if fields.len() != 6 {
            return Err(parse_err(lines.line, "expected 3 indices and a normal"));
        }
        let mut tri = [0usize; 3];
        for (slot, f) in tri.iter_mut().zip(&fields[..3]) {
            *slot = f.parse().map_err(|_| parse_err(lines.line, "bad index"))?;
        }
        tri.sort_unstable();
        faces.push(tri);
    }
    let mesh = Mesh::from_parts(id, domain, vertices, tets)?;
    let mut computed: Vec<[usize; 3]> = mesh
        .boundary_faces()
        .iter()
        .map(|f| {
            let mut t = f.vertices;
            t.sort_unstable();
            t
        })
        .collect();
    computed.sort_unstable();
    faces.sort_unstable();
    if computed != faces {
        return Err(LabError::InvalidMesh("listed boundary faces disagree with the tets".into()));
    }
    Ok(mesh)
}
