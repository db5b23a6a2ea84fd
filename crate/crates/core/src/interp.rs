//! Piecewise Chebyshev interpolation on uniform panels.

use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct ChebyshevTable {
    start: f64,
    end: f64,
    width: f64,
    degree: usize,
    coeffs: Vec<f64>,
}

impl ChebyshevTable {
    /// Interpolates `f` on `[start, end]` with `panels` panels of `degree + 1`
    /// Chebyshev points each. `f` is called once per node.
    pub fn build<F: FnMut(f64) -> f64>(
        mut f: F,
        start: f64,
        end: f64,
        panels: usize,
        degree: usize,
    ) -> Self {
        assert!(end > start && panels > 0 && degree > 0);
        let width = (end - start) / panels as f64;
        let n = degree + 1;
        let cos_nodes: Vec<f64> = (0..n)
            .map(|j| (PI * (j as f64 + 0.5) / n as f64).cos())
            .collect();
        let mut coeffs = Vec::with_capacity(panels * n);
        let mut vals = vec![0.0; n];
        for p in 0..panels {
            let a = start + p as f64 * width;
            let c = a + 0.5 * width;
            for (v, x) in vals.iter_mut().zip(&cos_nodes) {
                *v = f(c + 0.5 * width * x);
            }
            for m in 0..n {
                let mut sum = 0.0;
                for (j, v) in vals.iter().enumerate() {
                    sum += v * (PI * m as f64 * (j as f64 + 0.5) / n as f64).cos();
                }
                let scale = if m == 0 { 1.0 } else { 2.0 };
                coeffs.push(scale * sum / n as f64);
            }
        }
        Self {
            start,
            end,
            width,
            degree,
            coeffs,
        }
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    /// Largest magnitude of the last coefficient over panels, relative to
    /// the leading one: a cheap truncation-error indicator.
    pub fn tail_indicator(&self) -> f64 {
        let n = self.degree + 1;
        self.coeffs
            .chunks(n)
            .map(|c| c[n - 1].abs() + c[n - 2].abs())
            .fold(0.0, f64::max)
    }

    /// Evaluates the interpolant; zero outside `[start, end]`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if !(x >= self.start && x <= self.end) {
            return 0.0;
        }
        let n = self.degree + 1;
        let rel = (x - self.start) / self.width;
        let panels = self.coeffs.len() / n;
        let p = (rel as usize).min(panels - 1);
        let u = 2.0 * (rel - p as f64) - 1.0;
        let c = &self.coeffs[p * n..(p + 1) * n];
        let (mut b1, mut b2) = (0.0, 0.0);
        for &ck in c[1..].iter().rev() {
            let b0 = ck + 2.0 * u * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        c[0] + u * b1 - b2
    }
}
