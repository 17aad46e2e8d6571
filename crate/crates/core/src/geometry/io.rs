//! ASCII mesh formats: OFF and OBJ for planar triangle meshes, MEDIT `.mesh`
//! for tetrahedral meshes.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::SimplicialMesh;
use crate::{Error, Result};

/// Planar inputs may carry a z coordinate, but only up to this magnitude.
const PLANAR_Z_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    Medit,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "off" => Ok(MeshFormat::Off),
            "obj" => Ok(MeshFormat::Obj),
            "mesh" => Ok(MeshFormat::Medit),
            _ => Err(Error::InvalidInput(format!(
                "cannot infer mesh format from {}",
                path.display()
            ))),
        }
    }
}

impl FromStr for MeshFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(MeshFormat::Off),
            "obj" => Ok(MeshFormat::Obj),
            "medit" | "mesh" => Ok(MeshFormat::Medit),
            _ => Err(Error::InvalidInput(format!("unknown mesh format '{s}'"))),
        }
    }
}

pub fn load_mesh(path: &Path, format: Option<MeshFormat>) -> Result<SimplicialMesh> {
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text, format)
}

pub fn parse_mesh(text: &str, format: MeshFormat) -> Result<SimplicialMesh> {
    match format {
        MeshFormat::Off => parse_off(text),
        MeshFormat::Obj => parse_obj(text),
        MeshFormat::Medit => parse_medit(text),
    }
}

pub fn save_mesh(mesh: &SimplicialMesh, path: &Path, format: Option<MeshFormat>) -> Result<()> {
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    std::fs::write(path, format_mesh(mesh, format)?)?;
    Ok(())
}

pub fn format_mesh(mesh: &SimplicialMesh, format: MeshFormat) -> Result<String> {
    match format {
        MeshFormat::Off | MeshFormat::Obj if mesh.dim() != 2 => Err(Error::InvalidInput(
            "OFF/OBJ output is only defined for triangle meshes".into(),
        )),
        MeshFormat::Medit if mesh.dim() != 3 => Err(Error::InvalidInput(
            "MEDIT output is only defined for tetrahedral meshes".into(),
        )),
        MeshFormat::Off => Ok(write_off(mesh)),
        MeshFormat::Obj => Ok(write_obj(mesh)),
        MeshFormat::Medit => Ok(write_medit(mesh)),
    }
}

/// Non-empty, comment-stripped lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn num<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what}")))
}

fn planar(vertices: Vec<[f64; 3]>) -> Result<Vec<[f64; 3]>> {
    vertices
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            if p[2].abs() > PLANAR_Z_TOL {
                Err(Error::Geometry(format!("vertex {i} is not planar (z = {})", p[2])))
            } else {
                Ok([p[0], p[1], 0.0])
            }
        })
        .collect()
}

fn parse_off(text: &str) -> Result<SimplicialMesh> {
    let mut lines = content_lines(text);
    let (l0, header) = lines.next().ok_or_else(|| Error::parse(1, "empty OFF file"))?;
    let mut toks = header.split_whitespace();
    let first = toks.next().unwrap_or("");
    if !first.ends_with("OFF") {
        return Err(Error::parse(l0, "missing OFF header"));
    }
    // Counts may share the header line.
    let rest: Vec<&str> = toks.collect();
    let (counts_line, counts): (usize, Vec<&str>) = if rest.is_empty() {
        let (l, c) = lines.next().ok_or_else(|| Error::parse(l0, "missing counts"))?;
        (l, c.split_whitespace().collect())
    } else {
        (l0, rest)
    };
    let nv: usize = num(counts.first().copied(), counts_line, "vertex count")?;
    let nf: usize = num(counts.get(1).copied(), counts_line, "face count")?;
    let mut verts = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = lines.next().ok_or_else(|| Error::parse(counts_line, "truncated vertex list"))?;
        let mut t = s.split_whitespace();
        let x = num(t.next(), l, "x")?;
        let y = num(t.next(), l, "y")?;
        let z = t.next().map(|z| num(Some(z), l, "z")).transpose()?.unwrap_or(0.0);
        verts.push([x, y, z]);
    }
    let mut elems = Vec::with_capacity(3 * nf);
    for _ in 0..nf {
        let (l, s) = lines.next().ok_or_else(|| Error::parse(counts_line, "truncated face list"))?;
        let mut t = s.split_whitespace();
        let k: usize = num(t.next(), l, "face size")?;
        if k != 3 {
            return Err(Error::parse(l, format!("only triangles are supported, got {k}-gon")));
        }
        for _ in 0..3 {
            elems.push(num(t.next(), l, "face index")?);
        }
    }
    SimplicialMesh::new(2, planar(verts)?, elems)
}

fn parse_obj(text: &str) -> Result<SimplicialMesh> {
    let mut verts = Vec::new();
    let mut elems = Vec::new();
    for (l, s) in content_lines(text) {
        let mut t = s.split_whitespace();
        match t.next() {
            Some("v") => {
                let x = num(t.next(), l, "x")?;
                let y = num(t.next(), l, "y")?;
                let z = t.next().map(|z| num(Some(z), l, "z")).transpose()?.unwrap_or(0.0);
                verts.push([x, y, z]);
            }
            Some("f") => {
                let idx: Vec<&str> = t.collect();
                if idx.len() != 3 {
                    return Err(Error::parse(l, "only triangular faces are supported"));
                }
                for tok in idx {
                    // "i", "i/t", "i//n" and "i/t/n" all start with the vertex index.
                    let i: i64 = num(tok.split('/').next(), l, "face index")?;
                    let i = if i < 0 { verts.len() as i64 + i } else { i - 1 };
                    if i < 0 {
                        return Err(Error::parse(l, "face index out of range"));
                    }
                    elems.push(i as usize);
                }
            }
            // Normals, texture coordinates, groups and materials are ignored.
            _ => {}
        }
    }
    SimplicialMesh::new(2, planar(verts)?, elems)
}

fn parse_medit(text: &str) -> Result<SimplicialMesh> {
    let mut toks: Vec<(usize, &str)> = Vec::new();
    for (l, s) in content_lines(text) {
        toks.extend(s.split_whitespace().map(|t| (l, t)));
    }
    let mut pos = 0;
    let mut next = |what: &str| -> Result<(usize, &str)> {
        let t = toks
            .get(pos)
            .copied()
            .ok_or_else(|| Error::parse(0, format!("unexpected end of file, expected {what}")))?;
        pos += 1;
        Ok(t)
    };
    let mut verts = Vec::new();
    let mut tets = Vec::new();
    loop {
        let (l, kw) = match next("keyword") {
            Ok(t) => t,
            Err(_) => break,
        };
        match kw {
            "MeshVersionFormatted" => {
                next("version")?;
            }
            "Dimension" => {
                let (l, d) = next("dimension")?;
                if d != "3" {
                    return Err(Error::parse(l, "MEDIT input must be 3-dimensional"));
                }
            }
            "Vertices" => {
                let (l, n) = next("vertex count")?;
                let n: usize = num(Some(n), l, "vertex count")?;
                for _ in 0..n {
                    let mut p = [0.0; 3];
                    for x in &mut p {
                        let (l, t) = next("coordinate")?;
                        *x = num(Some(t), l, "coordinate")?;
                    }
                    next("vertex reference")?;
                    verts.push(p);
                }
            }
            "Tetrahedra" | "Triangles" | "Edges" | "Corners" | "Ridges" | "RequiredVertices" => {
                let k = match kw {
                    "Tetrahedra" => 5,
                    "Triangles" => 4,
                    "Edges" => 3,
                    _ => 1,
                };
                let (l, n) = next("element count")?;
                let n: usize = num(Some(n), l, "element count")?;
                for _ in 0..n {
                    let mut row = [0usize; 5];
                    for x in row.iter_mut().take(k) {
                        let (l, t) = next("element index")?;
                        *x = num(Some(t), l, "element index")?;
                    }
                    if kw == "Tetrahedra" {
                        for &i in &row[..4] {
                            if i == 0 {
                                return Err(Error::parse(l, "MEDIT indices are 1-based"));
                            }
                            tets.push(i - 1);
                        }
                    }
                }
            }
            "End" => break,
            other => return Err(Error::parse(l, format!("unsupported MEDIT section '{other}'"))),
        }
    }
    if tets.is_empty() {
        return Err(Error::parse(0, "MEDIT file has no Tetrahedra section"));
    }
    SimplicialMesh::new(3, verts, tets)
}

fn write_off(mesh: &SimplicialMesh) -> String {
    let mut s = String::from("OFF\n");
    let _ = writeln!(s, "{} {} 0", mesh.num_vertices(), mesh.num_elements());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
    }
    for el in mesh.elements() {
        let _ = writeln!(s, "3 {} {} {}", el[0], el[1], el[2]);
    }
    s
}

fn write_obj(mesh: &SimplicialMesh) -> String {
    let mut s = String::new();
    for p in mesh.vertices() {
        let _ = writeln!(s, "v {:e} {:e} 0", p[0], p[1]);
    }
    for el in mesh.elements() {
        let _ = writeln!(s, "f {} {} {}", el[0] + 1, el[1] + 1, el[2] + 1);
    }
    s
}

fn write_medit(mesh: &SimplicialMesh) -> String {
    let mut s = String::from("MeshVersionFormatted 2\nDimension 3\n");
    let _ = writeln!(s, "Vertices\n{}", mesh.num_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:e} {:e} {:e} 0", p[0], p[1], p[2]);
    }
    let _ = writeln!(s, "Tetrahedra\n{}", mesh.num_elements());
    for el in mesh.elements() {
        let _ = writeln!(s, "{} {} {} {} 0", el[0] + 1, el[1] + 1, el[2] + 1, el[3] + 1);
    }
    let _ = writeln!(s, "Triangles\n{}", mesh.num_boundary_facets());
    for f in mesh.boundary_facets() {
        let _ = writeln!(s, "{} {} {} 0", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s.push_str("End\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generators;

    const SQUARE_OFF: &str = "OFF\n# unit square\n4 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n3 0 1 2\n3 0 2 3\n";

    #[test]
    fn off_square() {
        let m = parse_mesh(SQUARE_OFF, MeshFormat::Off).unwrap();
        assert_eq!(m.num_elements(), 2);
        assert_eq!(m.num_boundary_facets(), 4);
    }

    #[test]
    fn off_zero_area_triangle_is_geometry_error() {
        let text = "OFF\n3 1 0\n0 0 0\n1 0 0\n2 0 0\n3 0 1 2\n";
        assert!(matches!(parse_mesh(text, MeshFormat::Off), Err(Error::Geometry(_))));
    }

    #[test]
    fn off_non_planar_is_geometry_error() {
        let text = "OFF\n3 1 0\n0 0 0\n1 0 0.1\n0 1 0\n3 0 1 2\n";
        assert!(matches!(parse_mesh(text, MeshFormat::Off), Err(Error::Geometry(_))));
        let tiny = "OFF\n3 1 0\n0 0 0\n1 0 1e-12\n0 1 0\n3 0 1 2\n";
        assert!(parse_mesh(tiny, MeshFormat::Off).is_ok());
    }

    #[test]
    fn malformed_files_are_parse_errors() {
        for (text, fmt) in [
            ("OFF\n4 2\n0 0 0\n", MeshFormat::Off),
            ("OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2\n", MeshFormat::Off),
            ("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n", MeshFormat::Off),
            ("v 0 0 0\nf 1 2\n", MeshFormat::Obj),
            ("MeshVersionFormatted 1\nDimension 3\nVertices\n1\n0 0\n", MeshFormat::Medit),
        ] {
            assert!(matches!(parse_mesh(text, fmt), Err(Error::Parse { .. })), "{text:?}");
        }
    }

    #[test]
    fn obj_with_slash_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 3/1\n";
        let m = parse_mesh(text, MeshFormat::Obj).unwrap();
        assert_eq!(m.num_elements(), 1);
    }

    #[test]
    fn round_trips_through_text() {
        let m = generators::disk(0.25).unwrap();
        for f in [MeshFormat::Off, MeshFormat::Obj] {
            let back = parse_mesh(&format_mesh(&m, f).unwrap(), f).unwrap();
            assert_eq!(back, m);
        }
        let b = generators::ball(2).unwrap();
        let back = parse_mesh(&format_mesh(&b, MeshFormat::Medit).unwrap(), MeshFormat::Medit).unwrap();
        assert_eq!(back, b);
        assert!(format_mesh(&b, MeshFormat::Off).is_err());
    }
}
