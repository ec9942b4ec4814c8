//! Raw slice kernels behind the tape ops. All of them accumulate into their
//! output (`+=`), which is what the backward passes want.

/// `c[m,n] += a[m,k] * b[k,n]`
pub fn gemm_nn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(a.len() == m * k && b.len() == k * n && c.len() == m * n);
    // SAFETY: the asserted lengths cover every index implied by the strides.
    unsafe { gemm(m, k, n, a, (k, 1), b, (n, 1), c) }
}

/// `c[m,n] += a[k,m]^T * b[k,n]`
pub fn gemm_tn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(a.len() == k * m && b.len() == k * n && c.len() == m * n);
    // SAFETY: as above, with `a` read column-major.
    unsafe { gemm(m, k, n, a, (1, m), b, (n, 1), c) }
}

/// `c[m,n] += a[m,k] * b[n,k]^T`
pub fn gemm_nt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(a.len() == m * k && b.len() == n * k && c.len() == m * n);
    // SAFETY: as above, with `b` read column-major.
    unsafe { gemm(m, k, n, a, (k, 1), b, (1, k), c) }
}

#[allow(clippy::too_many_arguments)]
unsafe fn gemm(m: usize, k: usize, n: usize, a: &[f64], sa: (usize, usize), b: &[f64], sb: (usize, usize), c: &mut [f64]) {
    if m == 0 || n == 0 {
        return;
    }
    matrixmultiply::dgemm(
        m,
        k,
        n,
        1.0,
        a.as_ptr(),
        sa.0 as isize,
        sa.1 as isize,
        b.as_ptr(),
        sb.0 as isize,
        sb.1 as isize,
        1.0,
        c.as_mut_ptr(),
        n as isize,
        1,
    );
}

/// Dot product with four independent accumulators (fixed order, so still
/// deterministic).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Geometry of one 2D cross-correlation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeom {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn patch_len(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn out_pixels(&self) -> usize {
        self.out_height() * self.out_width()
    }
}

/// Unfolds one `[C,H,W]` image into `[C*k*k, H'*W']` columns.
pub fn im2col(g: &ConvGeom, image: &[f64], cols: &mut [f64]) {
    let (oh, ow) = (g.out_height(), g.out_width());
    let pix = oh * ow;
    let k = g.kernel;
    for c in 0..g.channels {
        let plane = &image[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((c * k + ky) * k + kx) * pix..][..pix];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    let dst = &mut row[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= g.height as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        *d = if ix < 0 || ix >= g.width as isize {
                            0.0
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the image.
pub fn col2im(g: &ConvGeom, cols: &[f64], image: &mut [f64]) {
    let (oh, ow) = (g.out_height(), g.out_width());
    let pix = oh * ow;
    let k = g.kernel;
    for c in 0..g.channels {
        let plane = &mut image[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((c * k + ky) * k + kx) * pix..][..pix];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        if ix >= 0 && (ix as usize) < g.width {
                            dst[ix as usize] += row[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Channel-group time shift on a `[n, frames, channels, inner]` layout.
/// Channels `[0, fold)` move forward one frame, `[fold, 2*fold)` move back one
/// frame; vacated slots are zero. With `adjoint` the directions flip, which is
/// the transpose used by the backward pass.
pub fn temporal_shift(
    input: &[f64],
    output: &mut [f64],
    frames: usize,
    channels: usize,
    inner: usize,
    fold: usize,
    adjoint: bool,
) {
    let frame_len = channels * inner;
    let clip_len = frames * frame_len;
    let (fwd, bwd) = if adjoint { (-1isize, 1isize) } else { (1, -1) };
    for (src, dst) in input.chunks_exact(clip_len).zip(output.chunks_exact_mut(clip_len)) {
        for t in 0..frames {
            for c in 0..channels {
                let delta = if c < fold {
                    fwd
                } else if c < 2 * fold {
                    bwd
                } else {
                    0
                };
                let from = t as isize - delta;
                let d = &mut dst[t * frame_len + c * inner..][..inner];
                if from < 0 || from >= frames as isize {
                    d.fill(0.0);
                } else {
                    d.copy_from_slice(&src[from as usize * frame_len + c * inner..][..inner]);
                }
            }
        }
    }
}
