//! Dense kernels for the training hot loop.
//!
//! Reductions use a fixed 8-lane accumulation order so results are
//! bit-identical run to run (and the compiler is free to vectorize them).

const LANES: usize = 8;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..LANES {
            acc[i] += x[i] * y[i];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Row-major matrix-vector product `out = m * v` for an `rows x v.len()` matrix.
pub fn matvec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    debug_assert_eq!(m.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o = dot(row, v);
    }
}

/// `out[i * rows + r] = dot(m_r, xs[i])` for every row of `m`; each entry is
/// bit-identical to [`dot`], but rows stay in cache across samples.
pub fn matmul_rows(m: &[f64], xs: &[&[f64]], out: &mut [f64]) {
    let Some(cols) = xs.first().map(|x| x.len()) else {
        return;
    };
    let rows = m.len() / cols;
    debug_assert_eq!(out.len(), rows * xs.len());
    for (r, row) in m.chunks_exact(cols).enumerate() {
        let mut i = 0;
        while i + 4 <= xs.len() {
            let d = dot4(row, [xs[i], xs[i + 1], xs[i + 2], xs[i + 3]]);
            for k in 0..4 {
                out[(i + k) * rows + r] = d[k];
            }
            i += 4;
        }
        for (k, x) in xs.iter().enumerate().skip(i) {
            out[k * rows + r] = dot(row, x);
        }
    }
}

fn dot4(a: &[f64], xs: [&[f64]; 4]) -> [f64; 4] {
    let mut acc = [[0.0f64; LANES]; 4];
    let n = a.len() / LANES * LANES;
    for j in (0..n).step_by(LANES) {
        let w = &a[j..j + LANES];
        for (acc_k, x) in acc.iter_mut().zip(&xs) {
            let x = &x[j..j + LANES];
            for l in 0..LANES {
                acc_k[l] += w[l] * x[l];
            }
        }
    }
    let mut out = [0.0; 4];
    for k in 0..4 {
        let c = &acc[k];
        let mut s = ((c[0] + c[4]) + (c[1] + c[5])) + ((c[2] + c[6]) + (c[3] + c[7]));
        for j in n..a.len() {
            s += a[j] * xs[k][j];
        }
        out[k] = s;
    }
    out
}

/// `m_r += sum_i coef[i * rows + r] * xs[i]` for every row of `m`.
pub fn rank_update(m: &mut [f64], xs: &[&[f64]], coef: &[f64]) {
    let Some(cols) = xs.first().map(|x| x.len()) else {
        return;
    };
    let rows = m.len() / cols;
    for (r, row) in m.chunks_exact_mut(cols).enumerate() {
        let mut i = 0;
        while i + 4 <= xs.len() {
            let a = [coef[i * rows + r], coef[(i + 1) * rows + r], coef[(i + 2) * rows + r], coef[(i + 3) * rows + r]];
            let (x0, x1, x2, x3) = (xs[i], xs[i + 1], xs[i + 2], xs[i + 3]);
            for j in 0..cols {
                row[j] += (a[0] * x0[j] + a[1] * x1[j]) + (a[2] * x2[j] + a[3] * x3[j]);
            }
            i += 4;
        }
        for (k, x) in xs.iter().enumerate().skip(i) {
            axpy(coef[k * rows + r], x, row);
        }
    }
}

/// Numerically stable softmax of `logits` into `probs`.
pub fn softmax(logits: &[f64], probs: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (p, &z) in probs.iter_mut().zip(logits) {
        *p = (z - max).exp();
        sum += *p;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
}

/// `log(sum(exp(logits)))` without overflow.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
