//! Small fixed-size vector helpers for lattice geometry.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Determinant of a matrix whose rows are `m[0..3]`.
pub fn det(m: &Mat3) -> f64 {
    dot(&m[0], &cross(&m[1], &m[2]))
}

/// `x · M` where `x` is a row vector and `M` has lattice vectors as rows.
#[inline]
pub fn row_times(x: &Vec3, m: &Mat3) -> Vec3 {
    let mut out = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[j] += x[i] * m[i][j];
        }
    }
    out
}

/// Rows `b_j` with `a_i · b_j = 2π δ_ij`, or `None` for a singular matrix.
pub fn reciprocal_rows(a: &Mat3) -> Option<Mat3> {
    let v = det(a);
    if v.abs() < 1e-300 || !v.is_finite() {
        return None;
    }
    let f = 2.0 * std::f64::consts::PI / v;
    Some([
        scale(&cross(&a[1], &a[2]), f),
        scale(&cross(&a[2], &a[0]), f),
        scale(&cross(&a[0], &a[1]), f),
    ])
}

/// Inverse of a matrix with rows as given, so that `row_times(row_times(x, m), inv) == x`.
pub fn inverse(m: &Mat3) -> Option<Mat3> {
    let r = reciprocal_rows(m)?;
    let f = 0.5 / std::f64::consts::PI;
    // (m^-1)_{ij} = b_j[i] / 2π
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = r[j][i] * f;
        }
    }
    Some(inv)
}
