//! Slice-level numeric kernels shared by the layer functions and the tape.
//!
//! Matrix products go through `matrixmultiply::dgemm`, which is single
//! threaded and has a fixed blocking order, so results are bit-reproducible.

/// `c[m×n] = a·b + beta·c`, with `a` and `b` addressed through row/column strides
/// and `c` row-major.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(k == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `y[b, o] = Σ_i x[b, i]·w[o, i] + bias[o]`.
pub(crate) fn dense_forward(
    x: &[f64],
    batch: usize,
    inp: usize,
    w: &[f64],
    out: usize,
    bias: Option<&[f64]>,
    y: &mut [f64],
) {
    gemm(batch, inp, out, x, (inp, 1), w, (1, inp), 0.0, y);
    if let Some(bias) = bias {
        for row in y.chunks_exact_mut(out) {
            for (v, b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
    }
}

/// Accumulates `dw += dyᵀ·x` and `db += Σ_b dy`; writes `dx = dy·w`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward(
    dy: &[f64],
    x: &[f64],
    w: &[f64],
    batch: usize,
    inp: usize,
    out: usize,
    dx: Option<&mut [f64]>,
    dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    if let Some(dx) = dx {
        gemm(batch, out, inp, dy, (out, 1), w, (inp, 1), 0.0, dx);
    }
    if let Some(dw) = dw {
        gemm(out, batch, inp, dy, (1, out), x, (inp, 1), 1.0, dw);
    }
    if let Some(db) = db {
        for row in dy.chunks_exact(out) {
            for (g, d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
    }
}

/// Geometry of a valid, stride-1 multi-channel 1-D convolution.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub channels: usize,
    pub len: usize,
    pub filters: usize,
    pub kernel: usize,
}

impl ConvGeom {
    pub fn out_len(&self) -> usize {
        self.len - self.kernel + 1
    }

    fn rows(&self) -> usize {
        self.channels * self.kernel
    }

    /// Unfolds one sample `[C, L]` into `[(C·K), Lo]`.
    fn im2col(&self, x: &[f64], col: &mut [f64]) {
        let lo = self.out_len();
        for c in 0..self.channels {
            let src = &x[c * self.len..(c + 1) * self.len];
            for k in 0..self.kernel {
                let row = (c * self.kernel + k) * lo;
                col[row..row + lo].copy_from_slice(&src[k..k + lo]);
            }
        }
    }
}

/// `y[b, f, p] = bias[f] + Σ_{c,k} kern[f, c, k]·x[b, c, p + k]` (cross-correlation).
pub(crate) fn conv_forward(g: ConvGeom, batch: usize, x: &[f64], kern: &[f64], bias: &[f64], y: &mut [f64]) {
    let lo = g.out_len();
    let mut col = vec![0.0; g.rows() * lo];
    let in_sz = g.channels * g.len;
    let out_sz = g.filters * lo;
    for b in 0..batch {
        g.im2col(&x[b * in_sz..(b + 1) * in_sz], &mut col);
        let yb = &mut y[b * out_sz..(b + 1) * out_sz];
        gemm(g.filters, g.rows(), lo, kern, (g.rows(), 1), &col, (lo, 1), 0.0, yb);
        for (f, row) in yb.chunks_exact_mut(lo).enumerate() {
            for v in row {
                *v += bias[f];
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward(
    g: ConvGeom,
    batch: usize,
    dy: &[f64],
    x: &[f64],
    kern: &[f64],
    mut dx: Option<&mut [f64]>,
    mut dkern: Option<&mut [f64]>,
    mut dbias: Option<&mut [f64]>,
) {
    let lo = g.out_len();
    let rows = g.rows();
    let in_sz = g.channels * g.len;
    let out_sz = g.filters * lo;
    let mut col = vec![0.0; rows * lo];
    let mut dcol = vec![0.0; rows * lo];
    for b in 0..batch {
        let dyb = &dy[b * out_sz..(b + 1) * out_sz];
        if let Some(dk) = dkern.as_deref_mut() {
            g.im2col(&x[b * in_sz..(b + 1) * in_sz], &mut col);
            gemm(g.filters, lo, rows, dyb, (lo, 1), &col, (1, lo), 1.0, dk);
        }
        if let Some(db) = dbias.as_deref_mut() {
            for (f, row) in dyb.chunks_exact(lo).enumerate() {
                db[f] += row.iter().sum::<f64>();
            }
        }
        if let Some(dx) = dx.as_deref_mut() {
            gemm(rows, g.filters, lo, kern, (1, rows), dyb, (lo, 1), 0.0, &mut dcol);
            let dxb = &mut dx[b * in_sz..(b + 1) * in_sz];
            dxb.fill(0.0);
            for c in 0..g.channels {
                for k in 0..g.kernel {
                    let src = &dcol[(c * g.kernel + k) * lo..][..lo];
                    let dst = &mut dxb[c * g.len + k..][..lo];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
}

/// Row means of a `[rows, positions]` block.
pub(crate) fn row_means(x: &[f64], positions: usize, y: &mut [f64]) {
    for (row, out) in x.chunks_exact(positions).zip(y.iter_mut()) {
        *out = row.iter().sum::<f64>() / positions as f64;
    }
}
