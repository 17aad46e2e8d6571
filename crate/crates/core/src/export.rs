//! Plain-text writers: MatrixMarket, legacy VTK, CSV and OBJ polylines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::geometry::SimplicialMesh;
use crate::solve::EigenResult;
use crate::sparse::CsrMatrix;
use crate::Result;

/// `%%MatrixMarket matrix coordinate real general`, 1-based, row-major order.
pub fn matrix_market(a: &CsrMatrix) -> String {
    let mut s = String::with_capacity(32 * a.nnz() + 64);
    s.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", a.nrows(), a.ncols(), a.nnz());
    for (r, c, v) in a.triplets() {
        let _ = writeln!(s, "{} {} {:.17e}", r + 1, c + 1, v);
    }
    s
}

/// Reads the coordinate format written by [`matrix_market`] (also accepts
/// `symmetric`, mirroring the stored triangle).
pub fn parse_matrix_market(text: &str) -> Result<CsrMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| crate::Error::parse(1, "empty file"))?;
    let h = header.to_ascii_lowercase();
    if !h.starts_with("%%matrixmarket matrix coordinate real") {
        return Err(crate::Error::parse(1, "unsupported MatrixMarket header"));
    }
    let symmetric = h.contains("symmetric");
    let mut size: Option<(usize, usize, usize)> = None;
    let mut t = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || crate::Error::parse(i + 1, format!("malformed line '{line}'"));
        match size {
            None => {
                if f.len() != 3 {
                    return Err(bad());
                }
                size = Some((f[0].parse().map_err(|_| bad())?, f[1].parse().map_err(|_| bad())?, f[2].parse().map_err(|_| bad())?));
            }
            Some((nr, nc, _)) => {
                if f.len() != 3 {
                    return Err(bad());
                }
                let r: usize = f[0].parse().map_err(|_| bad())?;
                let c: usize = f[1].parse().map_err(|_| bad())?;
                let v: f64 = f[2].parse().map_err(|_| bad())?;
                if r == 0 || c == 0 || r > nr || c > nc {
                    return Err(bad());
                }
                t.push((r - 1, c - 1, v));
                if symmetric && r != c {
                    t.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (nr, nc, _) = size.ok_or_else(|| crate::Error::parse(1, "missing size line"))?;
    Ok(CsrMatrix::from_triplets(nr, nc, &t))
}

/// A named per-vertex array for VTK output.
pub enum PointData<'a> {
    Scalars(&'a str, &'a [f64]),
    Colors(&'a str, &'a [[f64; 3]]),
}

/// Legacy ASCII `UNSTRUCTURED_GRID` with optional point data.
pub fn vtk_unstructured(mesh: &SimplicialMesh, title: &str, data: &[PointData<'_>]) -> String {
    let n = mesh.num_vertices();
    let k = mesh.dim() + 1;
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{}", title.replace('\n', " "));
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2]);
    }
    let ne = mesh.num_elements();
    let _ = writeln!(s, "CELLS {} {}", ne, ne * (k + 1));
    for el in mesh.elements() {
        s.push_str(&k.to_string());
        for v in el {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    let cell_type = if mesh.dim() == 2 { 5 } else { 10 };
    for _ in 0..ne {
        let _ = writeln!(s, "{cell_type}");
    }
    if !data.is_empty() {
        let _ = writeln!(s, "POINT_DATA {n}");
    }
    for d in data {
        match d {
            PointData::Scalars(name, vals) => {
                let _ = writeln!(s, "SCALARS {} double 1\nLOOKUP_TABLE default", sanitize(name));
                for v in vals.iter() {
                    let _ = writeln!(s, "{v:.17e}");
                }
            }
            PointData::Colors(name, vals) => {
                let _ = writeln!(s, "COLOR_SCALARS {} 3", sanitize(name));
                for c in vals.iter() {
                    let _ = writeln!(s, "{:.9} {:.9} {:.9}", c[0], c[1], c[2]);
                }
            }
        }
    }
    s
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

/// `mode,eigenvalue,residual,zero_mode`.
pub fn eigen_csv(eig: &EigenResult) -> String {
    let z = eig.num_zero_modes();
    let mut s = String::from("mode,eigenvalue,residual,zero_mode\n");
    for (k, (l, r)) in eig.values.iter().zip(&eig.residuals).enumerate() {
        let _ = writeln!(s, "{k},{l:.17e},{r:.3e},{}", k < z);
    }
    s
}

/// One row per mode: the eigenvalue, then the eigenvector entries.
pub fn eigenvectors_csv(eig: &EigenResult) -> String {
    let mut s = String::new();
    for (k, l) in eig.values.iter().enumerate() {
        let _ = write!(s, "{l:.17e}");
        for x in eig.vectors.column(k).iter() {
            let _ = write!(s, ",{x:.17e}");
        }
        s.push('\n');
    }
    s
}

/// One row per vertex: `vertex,<name>...`.
pub fn vertex_csv(columns: &[(&str, &[f64])]) -> String {
    let n = columns.first().map_or(0, |c| c.1.len());
    let mut s = String::from("vertex");
    for (name, _) in columns {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    for v in 0..n {
        let _ = write!(s, "{v}");
        for (_, col) in columns {
            let _ = write!(s, ",{:.17e}", col[v]);
        }
        s.push('\n');
    }
    s
}

/// Polylines as OBJ `l` records.
pub fn polylines_obj(lines: &[Vec<[f64; 3]>]) -> String {
    let mut s = String::new();
    for line in lines {
        for p in line {
            let _ = writeln!(s, "v {:.17e} {:.17e} {:.17e}", p[0], p[1], p[2]);
        }
    }
    let mut base = 1;
    for line in lines {
        if line.len() >= 2 {
            s.push('l');
            for i in 0..line.len() {
                let _ = write!(s, " {}", base + i);
            }
            s.push('\n');
        }
        base += line.len();
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generators;

    #[test]
    fn matrix_market_round_trip() {
        let a = CsrMatrix::from_triplets(3, 4, &[(0, 0, 1.5), (2, 3, -1.0 / 3.0), (1, 2, 1e-300)]);
        let text = matrix_market(&a);
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general\n3 4 3\n"));
        assert_eq!(parse_matrix_market(&text).unwrap(), a);
        let sym = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 2\n2 1 -1\n";
        assert_eq!(parse_matrix_market(sym).unwrap().get(0, 1), -1.0);
        assert!(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n").is_err());
    }

    #[test]
    fn vtk_layout() {
        let m = generators::square_grid(0.0, 1.0, 1).unwrap();
        let f = vec![0.0, 1.0, 2.0, 3.0];
        let text = vtk_unstructured(&m, "test", &[PointData::Scalars("u value", &f)]);
        assert!(text.contains("POINTS 4 double"));
        assert!(text.contains("CELLS 2 8"));
        assert!(text.contains("SCALARS u_value double 1"));
        assert_eq!(text.lines().filter(|l| *l == "5").count(), 2);
    }

    #[test]
    fn eigen_rows() {
        let eig = EigenResult {
            values: vec![0.0, 2.5],
            vectors: nalgebra::DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 1.0, -1.0, 0.0, 1.0]),
            residuals: vec![0.0, 1e-12],
            lambda_max: 10.0,
            zero_threshold: 1e-9,
            iterations: 0,
            dense: true,
        };
        let rows: Vec<Vec<f64>> =
            eigenvectors_csv(&eig).lines().map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
        assert_eq!(rows, vec![vec![0.0, 1.0, 1.0, 1.0], vec![2.5, -1.0, 0.0, 1.0]]);
        let summary = eigen_csv(&eig);
        assert!(summary.lines().nth(1).unwrap().ends_with(",true"));
        assert!(summary.lines().nth(2).unwrap().ends_with(",false"));
    }

    #[test]
    fn obj_polylines() {
        let text = polylines_obj(&[vec![[0.0; 3], [1.0, 0.0, 0.0]], vec![[2.0; 3]], vec![[0.0; 3]; 3]]);
        assert!(text.contains("l 1 2\n"));
        assert!(text.contains("l 4 5 6\n"));
        assert_eq!(text.lines().filter(|l| l.starts_with('l')).count(), 2);
    }
}
