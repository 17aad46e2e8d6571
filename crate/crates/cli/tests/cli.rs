use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn frameop(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frameop"))
        .current_dir(dir)
        .env("FFOP_THREADS", "1")
        .args(args)
        .output()
        .expect("spawn frameop")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = frameop(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn manifest(dir: &Path, out: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(out).join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn mesh_field_assemble_eigs_pipeline() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, &["--out", "m", "mesh", "gen", "--shape", "disk", "--h", "0.2", "--output", "disk.off"]);
    ok(d, &["--out", "f", "field", "gen", "--kind", "harmonic2d", "--mesh", "disk.off", "--output", "field.csv"]);
    ok(d, &["--out", "a", "assemble", "--mesh", "disk.off", "--field", "field.csv", "--epsilon", "0.2"]);
    ok(d, &["--out", "e", "eigs", "--mesh", "disk.off", "--field", "field.csv", "--num", "8"]);

    let mtx = fs::read_to_string(d.join("a/operator.mtx")).unwrap();
    assert!(mtx.starts_with("%%MatrixMarket matrix coordinate real"));
    let eigs = fs::read_to_string(d.join("e/eigenvalues.csv")).unwrap();
    let rows: Vec<&str> = eigs.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    // Neumann: constants are the only zero mode.
    assert!(rows[0].ends_with("true") && rows[1].ends_with("false"));
    let vecs = fs::read_to_string(d.join("e/eigenvectors.csv")).unwrap();
    let verts = fs::read_to_string(d.join("disk.off")).unwrap().lines().nth(1).unwrap().split_whitespace().next().unwrap().parse::<usize>().unwrap();
    assert_eq!(vecs.lines().count(), 8);
    assert!(vecs.lines().all(|l| l.split(',').count() == verts + 1));

    let m = manifest(d, "e");
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(m["parameters"]["zero_modes"], 1);
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap()).collect();
    assert!(outputs.iter().any(|p| p.ends_with("modes.vtk")));
    assert!(m["timings"].as_array().unwrap().iter().any(|t| t["stage"] == "total"));
}

#[test]
fn outputs_are_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, &["--out", "m", "mesh", "gen", "--shape", "square", "--n", "10", "--jitter", "0.2", "--seed", "3", "--output", "sq.off"]);
    for out in ["r1", "r2"] {
        ok(d, &["--out", out, "eigs", "--mesh", "sq.off", "--num", "6", "--method", "subspace", "--epsilon", "0.3"]);
        ok(d, &["--out", out, "distance", "--mesh", "sq.off", "--num", "10", "--paths", "3", "--at", "0,0"]);
    }
    for f in ["eigenvalues.csv", "modes.vtk", "distance.csv", "paths.obj"] {
        assert_eq!(fs::read(d.join("r1").join(f)).unwrap(), fs::read(d.join("r2").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn dirichlet_diffuse_and_color() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, &["--out", "m", "mesh", "gen", "--shape", "disk", "--h", "0.2", "--output", "disk.off"]);
    ok(d, &["--out", "dir", "dirichlet", "--mesh", "disk.off", "--square-wave", "2"]);
    let u: Vec<f64> = fs::read_to_string(d.join("dir/solution.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(u.iter().all(|x| x.is_finite()));
    // Boundary data is reproduced exactly; no maximum principle for a fourth-order problem.
    let boundary = u.iter().filter(|x| (x.abs() - 1.0).abs() < 1e-12).count();
    assert!(boundary >= 20, "{boundary} vertices carry the boundary values");

    ok(d, &["--out", "dif", "diffuse", "--mesh", "disk.off", "--epsilon", "1,0.1", "--source", "0"]);
    let header = fs::read_to_string(d.join("dif/diffusion.csv")).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "vertex,eps_1,eps_0.1");

    ok(d, &["--out", "col", "color", "--mesh", "disk.off"]);
    for line in fs::read_to_string(d.join("col/colors.csv")).unwrap().lines().skip(1) {
        for c in line.split(',').skip(1) {
            let c: f64 = c.parse().unwrap();
            assert!((0.0..=1.0).contains(&c));
        }
    }
}

#[test]
fn coframe_field_writes_warped_mesh() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, &["--out", "m", "mesh", "gen", "--shape", "square", "--n", "6", "--output", "sq.off"]);
    ok(d, &["--out", "f", "field", "gen", "--kind", "coframe", "--mesh", "sq.off", "--c", "0.1", "--warped-mesh", "w.off", "--output", "cf.csv"]);
    assert!(d.join("w.off").exists());
    ok(d, &["--out", "a", "assemble", "--mesh", "w.off", "--field", "cf.csv"]);
}

#[test]
fn exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    assert_eq!(frameop(d, &["no-such-command"]).status.code(), Some(1));
    assert_eq!(frameop(d, &["--help"]).status.code(), Some(0));
    assert_eq!(frameop(d, &["eigs", "--mesh", "missing.off"]).status.code(), Some(2));

    fs::write(d.join("bad.off"), "OFF\n3 1 0\n0 0 0\n1 0 0\n").unwrap();
    assert_eq!(frameop(d, &["assemble", "--mesh", "bad.off"]).status.code(), Some(2));

    ok(d, &["--out", "m", "mesh", "gen", "--shape", "disk", "--h", "0.3", "--output", "disk.off"]);
    assert_eq!(frameop(d, &["dirichlet", "--mesh", "disk.off", "--bc", "natural", "--square-wave", "2"]).status.code(), Some(1));
    assert_eq!(frameop(d, &["assemble", "--mesh", "disk.off", "--epsilon", "0"]).status.code(), Some(2));

    let bad_threads = Command::new(env!("CARGO_BIN_EXE_frameop"))
        .current_dir(d)
        .env("FFOP_THREADS", "zero")
        .args(["validate", "tensor", "--quick"])
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(1));
}

#[test]
fn quick_validation_passes() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, &["--out", "v", "validate", "invariants", "--quick"]);
    let m = manifest(d, "v");
    assert_eq!(m["parameters"]["passed"], true);
    assert!(d.join("v/invariants.csv").exists());
}
