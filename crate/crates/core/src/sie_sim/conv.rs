//! Discrete stochastic convolution on the truncation box.
//!
//! X_j(x) = Σ_{i<j} Σ_y K_{(j−i)Δt; x−y} G_i(y) is evaluated in Fourier
//! space: each G_i is transformed once on a zero-padded grid of side
//! ≥ 2n − 1 (no wrap-around), the sum over i becomes a pointwise
//! accumulation against the transformed kernels, and one inverse transform
//! per step recovers X_j. The kernel is even in every coordinate, so its
//! transform is real and two independent inputs travel as the real and
//! imaginary parts of one complex signal. Cost per pair of inputs is
//! O(M² N^d + M N^d log N) instead of O(M² L²).

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kernels::KernelTable;

fn smooth_size(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut m = n;
        for p in [2, 3, 5] {
            while m % p == 0 {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

pub(crate) struct BoxConvolver {
    d: usize,
    n: usize,
    big: usize,
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Transformed kernels for lags 1..=M, pre-scaled by 1/len.
    khat: Vec<Vec<f64>>,
}

impl BoxConvolver {
    /// `table` holds lags Δt, 2Δt, ... with radius ≥ n − 1.
    pub fn new(table: &KernelTable, d: usize, n: usize) -> Result<Self> {
        let radius = table.radius_steps().unwrap_or(0);
        if radius + 1 < n {
            return Err(Error::Size {
                what: "kernel table radius for the truncation box".into(),
                dims: vec![radius, n - 1],
                entries: 0,
                budget: 0,
            });
        }
        let big = smooth_size(2 * n - 1);
        let len = big.pow(d as u32);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(big);
        let inv = planner.plan_fft_inverse(big);
        let mut conv = Self {
            d,
            n,
            big,
            len,
            fwd,
            inv,
            khat: Vec::new(),
        };
        let scale = 1.0 / len as f64;
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        let mut disp = vec![0i64; d];
        for ti in 0..table.times().len() {
            for (p, b) in buf.iter_mut().enumerate() {
                let mut idx = p;
                let mut inside = true;
                for c in (0..d).rev() {
                    let q = idx % big;
                    idx /= big;
                    disp[c] = if q < n {
                        q as i64
                    } else if q + n > big {
                        q as i64 - big as i64
                    } else {
                        inside = false;
                        0
                    };
                }
                let v = if inside {
                    table.get_steps(ti, &disp).unwrap_or(0.0)
                } else {
                    0.0
                };
                *b = Complex64::new(v, 0.0);
            }
            conv.transform(&mut buf, false);
            conv.khat.push(buf.iter().map(|z| z.re * scale).collect());
        }
        Ok(conv)
    }

    pub fn zero_spectrum(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.len]
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let fft = if inverse { &self.inv } else { &self.fwd };
        let big = self.big;
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut line = vec![Complex64::new(0.0, 0.0); big];
        for c in 0..self.d {
            let stride = big.pow((self.d - 1 - c) as u32);
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            let outer = self.len / (big * stride);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * big * stride + inner;
                    for (k, l) in line.iter_mut().enumerate() {
                        *l = data[base + k * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (k, l) in line.iter().enumerate() {
                        data[base + k * stride] = *l;
                    }
                }
            }
        }
    }

    fn padded_index(&self, mut site: usize) -> usize {
        let mut idx = 0;
        let mut mul = 1;
        for _ in 0..self.d {
            idx += (site % self.n) * mul;
            site /= self.n;
            mul *= self.big;
        }
        idx
    }

    /// Forward transform of (re, im) box fields, where box site order is
    /// row-major with the last coordinate fastest.
    pub fn forward(&self, re: &[f64], im: Option<&[f64]>, out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (y, &r) in re.iter().enumerate() {
            let i = im.map_or(0.0, |v| v[y]);
            out[self.padded_index(y)] = Complex64::new(r, i);
        }
        self.transform(out, false);
    }

    /// acc = Σ_{i<j} K̂_{j−i} · hist[i].
    pub fn accumulate(&self, hist: &[Vec<Complex64>], j: usize, acc: &mut [Complex64]) {
        acc.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (i, h) in hist.iter().enumerate().take(j) {
            let k = &self.khat[j - 1 - i];
            for ((a, &hv), &kv) in acc.iter_mut().zip(h).zip(k) {
                *a += hv * kv;
            }
        }
    }

    /// Inverse transform of `acc` (destroyed) back onto the box.
    pub fn inverse(&self, acc: &mut [Complex64], re: &mut [f64], im: Option<&mut [f64]>) {
        self.transform(acc, true);
        for (y, r) in re.iter_mut().enumerate() {
            *r = acc[self.padded_index(y)].re;
        }
        if let Some(im) = im {
            for (y, v) in im.iter_mut().enumerate() {
                *v = acc[self.padded_index(y)].im;
            }
        }
    }
}
