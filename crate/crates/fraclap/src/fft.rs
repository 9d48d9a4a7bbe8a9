//! Multilevel circulant embedding: applies a symmetric multilevel Toeplitz
//! matrix t_{|Δ|} in O(M log M).
//!
//! Each axis of extent n is embedded into a circulant of size m ≥ 2n−1
//! (rounded up to a 7-smooth FFT size). The embedded kernel is even in every
//! axis, so its transform — the symbol — is real; we store it as f64, which
//! also halves the memory of the cached spectrum. Input data occupies the
//! low n indices per axis; the same window of the inverse transform is the
//! product. The x-axis uses a real-to-complex transform (input is real and
//! the symbol preserves conjugate symmetry), y and z use strided
//! complex passes over the half-spectrum. Rows known to be zero (the padding
//! region) are skipped on the forward side; only rows inside the output
//! window are transformed on the inverse side.

use std::sync::{Arc, Mutex};

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

/// Smallest 7-smooth integer ≥ x.
pub fn next_fft_size(x: usize) -> usize {
    let mut m = x.max(2);
    'outer: loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
        if m == 0 {
            break 'outer;
        }
    }
    unreachable!()
}

/// Map a padded circulant index to the Toeplitz offset it represents, or
/// None inside the zero gap. The low block carries offsets 0..n−1, the high
/// block mirrors them (even symmetry).
#[inline]
fn embed(i: usize, n: usize, m: usize) -> Option<usize> {
    if i < n {
        Some(i)
    } else if m - i < n {
        Some(m - i)
    } else {
        None
    }
}

pub struct ConvPlan {
    /// Data extents (x, y, z); 1 on absent axes.
    n: [usize; 3],
    /// Padded circulant extents.
    m: [usize; 3],
    /// Half-spectrum length along x: m_x/2 + 1.
    cx: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fft_y: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    fft_z: Option<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>,
    /// Real symbol with the 1/(m_x m_y m_z) normalization folded in.
    symbol: Vec<f64>,
    /// Reusable complex work buffers (apply is reentrant).
    pool: Mutex<Vec<Vec<Complex<f64>>>>,
}

impl ConvPlan {
    /// Plan a convolution with the multilevel Toeplitz first column `t`
    /// (length n_x·n_y·n_z, x-fastest).
    pub fn new(n: [usize; 3], t: &[f64]) -> Self {
        assert_eq!(t.len(), n[0] * n[1] * n[2]);
        assert!(n[0] >= 1 && n[1] >= 1);
        let m = [
            next_fft_size(2 * n[0]),
            next_fft_size(2 * n[1]),
            if n[2] > 1 { next_fft_size(2 * n[2]) } else { 1 },
        ];
        let cx = m[0] / 2 + 1;
        let mut rplan = RealFftPlanner::<f64>::new();
        let r2c = rplan.plan_fft_forward(m[0]);
        let c2r = rplan.plan_fft_inverse(m[0]);
        let mut cplan = FftPlanner::<f64>::new();
        let fft_y = (
            cplan.plan_fft(m[1], FftDirection::Forward),
            cplan.plan_fft(m[1], FftDirection::Inverse),
        );
        let fft_z = (m[2] > 1).then(|| {
            (
                cplan.plan_fft(m[2], FftDirection::Forward),
                cplan.plan_fft(m[2], FftDirection::Inverse),
            )
        });
        let mut plan = Self {
            n,
            m,
            cx,
            r2c,
            c2r,
            fft_y,
            fft_z,
            symbol: Vec::new(),
            pool: Mutex::new(Vec::new()),
        };
        plan.build_symbol(t);
        plan
    }

    pub fn padded_shape(&self) -> [usize; 3] {
        self.m
    }

    fn build_symbol(&mut self, t: &[f64]) {
        let [nx, ny, nz] = self.n;
        let [mx, my, mz] = self.m;
        let cx = self.cx;
        let mut buf = vec![Complex::new(0.0, 0.0); cx * my * mz];
        let mut row = vec![0.0f64; mx];
        // x-pass on every nonzero embedded kernel row.
        for jz in 0..mz.max(1) {
            let Some(dz) = embed(jz, nz, mz) else { continue };
            for jy in 0..my {
                let Some(dy) = embed(jy, ny, my) else { continue };
                for (i, slot) in row.iter_mut().enumerate() {
                    *slot = match embed(i, nx, mx) {
                        Some(dx) => t[dx + nx * (dy + ny * dz)],
                        None => 0.0,
                    };
                }
                let lane = &mut buf[cx * (jy + my * jz)..cx * (jy + my * jz) + cx];
                self.r2c.process(&mut row, lane).expect("r2c length mismatch");
            }
        }
        self.yz_passes(&mut buf, true, true);
        // Even kernel ⇒ real spectrum; fold in the inverse normalization.
        let scale = 1.0 / (mx * my * mz) as f64;
        self.symbol = buf.iter().map(|c| c.re * scale).collect();
    }

    /// Strided complex passes along y (and z when present). `all_rows`
    /// transforms every lane; otherwise only lanes feeding the output window.
    fn y_pass(&self, buf: &mut [Complex<f64>], forward: bool, all_rows: bool) {
        let [_, _, nz] = self.n;
        let [_, my, mz] = self.m;
        let cx = self.cx;
        let fft = if forward { &self.fft_y.0 } else { &self.fft_y.1 };
        let mut lane = vec![Complex::new(0.0, 0.0); my];
        let zmax = if all_rows { mz } else { nz };
        for jz in 0..zmax {
            for ix in 0..cx {
                let base = ix + cx * my * jz;
                for (jy, slot) in lane.iter_mut().enumerate() {
                    *slot = buf[base + cx * jy];
                }
                fft.process(&mut lane);
                for (jy, &v) in lane.iter().enumerate() {
                    buf[base + cx * jy] = v;
                }
            }
        }
    }

    fn z_pass(&self, buf: &mut [Complex<f64>], forward: bool) {
        let Some((fwd, inv)) = &self.fft_z else { return };
        let [_, my, mz] = self.m;
        let cx = self.cx;
        let fft = if forward { fwd } else { inv };
        let stride = cx * my;
        let mut lane = vec![Complex::new(0.0, 0.0); mz];
        for jy in 0..my {
            for ix in 0..cx {
                let base = ix + cx * jy;
                for (jz, slot) in lane.iter_mut().enumerate() {
                    *slot = buf[base + stride * jz];
                }
                fft.process(&mut lane);
                for (jz, &v) in lane.iter().enumerate() {
                    buf[base + stride * jz] = v;
                }
            }
        }
    }

    fn yz_passes(&self, buf: &mut [Complex<f64>], forward: bool, all_y_rows: bool) {
        if forward {
            self.y_pass(buf, true, all_y_rows);
            self.z_pass(buf, true);
        } else {
            self.z_pass(buf, false);
            self.y_pass(buf, false, all_y_rows);
        }
    }

    /// out = (T u), both of length n_x·n_y·n_z, x-fastest.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let [nx, ny, nz] = self.n;
        let [mx, my, mz] = self.m;
        let cx = self.cx;
        assert_eq!(u.len(), nx * ny * nz);
        assert_eq!(out.len(), u.len());

        let mut buf = self.pool.lock().unwrap().pop().unwrap_or_default();
        buf.clear();
        buf.resize(cx * my * mz, Complex::new(0.0, 0.0));

        let mut row = vec![0.0f64; mx];
        let mut lane = vec![Complex::new(0.0, 0.0); cx];
        // Forward x on data rows only (everything else is zero padding).
        for jz in 0..nz {
            for jy in 0..ny {
                row[..nx].copy_from_slice(&u[nx * (jy + ny * jz)..nx * (jy + ny * jz) + nx]);
                row[nx..].fill(0.0);
                let dst = &mut buf[cx * (jy + my * jz)..cx * (jy + my * jz) + cx];
                self.r2c.process(&mut row, dst).expect("r2c length mismatch");
            }
        }
        // Forward y only on slabs that contain data; z sees everything.
        self.y_pass(&mut buf, true, false);
        self.z_pass(&mut buf, true);

        for (v, &s) in buf.iter_mut().zip(&self.symbol) {
            *v *= s;
        }

        self.z_pass(&mut buf, false);
        self.y_pass(&mut buf, false, false);
        // Inverse x on output rows only.
        for jz in 0..nz {
            for jy in 0..ny {
                let src = &buf[cx * (jy + my * jz)..cx * (jy + my * jz) + cx];
                lane.copy_from_slice(src);
                // Clear roundoff in the bins the real inverse requires real
                // (DC always; Nyquist only exists for even lengths).
                lane[0].im = 0.0;
                if mx % 2 == 0 {
                    lane[cx - 1].im = 0.0;
                }
                self.c2r.process(&mut lane, &mut row).expect("c2r length mismatch");
                out[nx * (jy + ny * jz)..nx * (jy + ny * jz) + nx].copy_from_slice(&row[..nx]);
            }
        }

        self.pool.lock().unwrap().push(buf);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct O(M²) multilevel Toeplitz product.
    fn dense_apply(n: [usize; 3], t: &[f64], u: &[f64]) -> Vec<f64> {
        let [nx, ny, nz] = n;
        let idx = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);
        let mut out = vec![0.0; u.len()];
        for pz in 0..nz {
            for py in 0..ny {
                for px in 0..nx {
                    let mut acc = 0.0;
                    for qz in 0..nz {
                        for qy in 0..ny {
                            for qx in 0..nx {
                                let d = idx(
                                    px.abs_diff(qx),
                                    py.abs_diff(qy),
                                    pz.abs_diff(qz),
                                );
                                acc += t[d] * u[idx(qx, qy, qz)];
                            }
                        }
                    }
                    out[idx(px, py, pz)] = acc;
                }
            }
        }
        out
    }

    fn rand_vec(len: usize, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(next_fft_size(510), 512);
        assert_eq!(next_fft_size(512), 512);
        assert_eq!(next_fft_size(4094), 4096);
        assert_eq!(next_fft_size(11), 12);
        assert_eq!(next_fft_size(2), 2);
    }

    #[test]
    fn matches_dense_2d() {
        for (nx, ny, seed) in [(5, 5, 1u64), (8, 3, 2), (1, 4, 3), (16, 16, 4)] {
            let n = [nx, ny, 1];
            let t = rand_vec(nx * ny, seed);
            let u = rand_vec(nx * ny, seed + 100);
            let plan = ConvPlan::new(n, &t);
            let mut out = vec![0.0; u.len()];
            plan.apply(&u, &mut out);
            let want = dense_apply(n, &t, &u);
            for (a, b) in out.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b} (n = {n:?})");
            }
        }
    }

    #[test]
    fn matches_dense_3d() {
        for (nx, ny, nz, seed) in [(4, 4, 4, 10u64), (5, 3, 2, 11), (2, 7, 3, 12)] {
            let n = [nx, ny, nz];
            let t = rand_vec(nx * ny * nz, seed);
            let u = rand_vec(nx * ny * nz, seed + 100);
            let plan = ConvPlan::new(n, &t);
            let mut out = vec![0.0; u.len()];
            plan.apply(&u, &mut out);
            let want = dense_apply(n, &t, &u);
            for (a, b) in out.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b} (n = {n:?})");
            }
        }
    }

    #[test]
    fn single_node() {
        let plan = ConvPlan::new([1, 1, 1], &[3.5]);
        let mut out = [0.0];
        plan.apply(&[2.0], &mut out);
        assert!((out[0] - 7.0).abs() < 1e-14);
    }

    #[test]
    fn reuse_is_consistent() {
        // Two applies through the buffer pool give identical results.
        let n = [6, 5, 1];
        let t = rand_vec(30, 77);
        let u = rand_vec(30, 78);
        let plan = ConvPlan::new(n, &t);
        let mut o1 = vec![0.0; 30];
        let mut o2 = vec![0.0; 30];
        plan.apply(&u, &mut o1);
        plan.apply(&u, &mut o2);
        assert_eq!(o1, o2);
    }
}
