use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion};

/// The 24 rotations mapping the coordinate axes onto themselves (up to sign).
pub fn octahedral_group() -> Vec<UnitQuaternion<f64>> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for p in perms {
        for signs in 0..8 {
            let mut m = Matrix3::zeros();
            for (col, &row) in p.iter().enumerate() {
                m[(row, col)] = if signs >> col & 1 == 1 { -1.0 } else { 1.0 };
            }
            if m.determinant() > 0.0 {
                out.push(UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m)));
            }
        }
    }
    out
}

/// Proper rotation whose columns are `±` the columns of `r`.
pub fn proper_rotation(r: &Matrix3<f64>) -> UnitQuaternion<f64> {
    let mut r = *r;
    if r.determinant() < 0.0 {
        r.column_mut(2).neg_mut();
    }
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r))
}

/// Representative of `q·G` (G the octahedral group), in the hemisphere of
/// `reference`, closest to it.
pub fn match_to(q: &UnitQuaternion<f64>, reference: &UnitQuaternion<f64>, group: &[UnitQuaternion<f64>]) -> Quaternion<f64> {
    let mut best = *q.quaternion();
    let mut best_dot = -1.0;
    for g in group {
        let c = (q * g).into_inner();
        let d = c.dot(reference.quaternion());
        if d.abs() > best_dot {
            best_dot = d.abs();
            best = if d < 0.0 { -c } else { c };
        }
    }
    best
}

/// Chordal mean of cross-equivalent rotations, each matched to the first.
pub fn average(qs: &[UnitQuaternion<f64>], group: &[UnitQuaternion<f64>]) -> UnitQuaternion<f64> {
    let reference = qs[0];
    let mut sum = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    for q in qs {
        sum += match_to(q, &reference, group);
    }
    if sum.norm() < 1e-12 {
        return reference;
    }
    UnitQuaternion::from_quaternion(sum)
}

/// Angle of the smallest rotation relating two crosses.
pub fn cross_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, group: &[UnitQuaternion<f64>]) -> f64 {
    let m = match_to(b, a, group);
    let d = m.dot(a.quaternion()).abs().min(1.0);
    2.0 * d.acos()
}
