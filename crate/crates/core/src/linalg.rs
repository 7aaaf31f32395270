//! Dense row-major helpers for the small `d x d` matrices used along paths.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `out = a * b` for `d x d` row-major matrices.
pub fn matmul(a: &[f64], b: &[f64], out: &mut [f64], d: usize) {
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for m in 0..d {
                acc += a[i * d + m] * b[m * d + j];
            }
            out[i * d + j] = acc;
        }
    }
}

/// `out = a * v` for a `d x d` matrix and a vector.
pub fn matvec(a: &[f64], v: &[f64], out: &mut [f64], d: usize) {
    for i in 0..d {
        out[i] = dot(&a[i * d..(i + 1) * d], v);
    }
}

pub fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}
