//! Small dense kernels used by the recurrent cells.

/// Dot product with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out[r] += Σ_c m[r, c] * v[c]` for a row-major `rows × v.len()` matrix.
#[inline]
pub(crate) fn matvec_acc(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += dot(row, v);
    }
}

/// `out[c] += Σ_r m[r, c] * v[r]` (transposed product).
#[inline]
pub(crate) fn matvec_t_acc(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (&vr, row) in v.iter().zip(m.chunks_exact(cols)) {
        if vr != 0.0 {
            axpy(vr, row, out);
        }
    }
}

/// Rank-one update `m += u vᵀ`.
#[inline]
pub(crate) fn outer_acc(u: &[f64], v: &[f64], m: &mut [f64]) {
    let cols = v.len();
    for (&ur, row) in u.iter().zip(m.chunks_exact_mut(cols)) {
        if ur != 0.0 {
            axpy(ur, v, row);
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
