//! One-dimensional continuous-time symmetric random walk probabilities.
//!
//! With jumps ±δ at total rate 1/δ² the generator is the halved discrete
//! Laplacian and P(X_s = nδ) = e^{-x} I_n(x) with x = s/δ².

use statrs::function::factorial::ln_factorial;

/// Orders above this use the uniformization series instead of the Bessel
/// recurrence.
pub const BESSEL_MAX_ORDER: usize = 600;

/// Highest order carried by the backward recurrence at argument x. Terms past
/// it are below e^{-50} relative to the peak and are treated as zero.
#[inline]
pub fn recurrence_start(x: f64) -> usize {
    (100.0 * x).sqrt().ceil() as usize + 40
}

/// e^{-x} I_n(x) for n = 0..=n_max by Miller's backward recurrence,
/// normalized with e^{-x}(I_0 + 2 Σ_{n≥1} I_n) = 1.
///
/// The recurrence start depends on x only, so every entry is bit-identical
/// whatever `n_max` is requested. Orders above [`BESSEL_MAX_ORDER`] and up
/// to the start are filled from the uniformization series.
pub fn scaled_bessel_orders(x: f64, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    fill_scaled_bessel(x, &mut out);
    out
}

/// As [`scaled_bessel_orders`], writing into `out` (orders 0..out.len()).
pub fn fill_scaled_bessel(x: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    if out.is_empty() {
        return;
    }
    if x == 0.0 {
        out[0] = 1.0;
        return;
    }
    let start = recurrence_start(x);
    let keep = out.len().min(start + 1).min(BESSEL_MAX_ORDER + 1);
    let mut w = vec![0.0f64; start + 1];
    let mut next = 0.0;
    let mut cur = 1.0e-280;
    w[start] = cur;
    for n in (1..=start).rev() {
        let prev = next + (2.0 * n as f64 / x) * cur;
        next = cur;
        cur = prev;
        w[n - 1] = cur;
        if cur > 1.0e250 {
            for v in &mut w[n - 1..] {
                *v *= 1.0e-250;
            }
            next *= 1.0e-250;
            cur *= 1.0e-250;
        }
    }
    let mut norm = 0.0;
    for v in w[1..].iter().rev() {
        norm += v;
    }
    norm = w[0] + 2.0 * norm;
    for (o, v) in out.iter_mut().zip(&w).take(keep) {
        *o = v / norm;
    }
    if out.len() > BESSEL_MAX_ORDER + 1 {
        for (n, o) in out.iter_mut().enumerate().take(start + 1).skip(BESSEL_MAX_ORDER + 1) {
            *o = uniformization_probability(x, n as u64);
        }
    }
}

/// P(X = n) after a Poisson(x) number of ±1 steps:
/// Σ_j e^{-x} x^j / j! · C(j, (j+n)/2) 2^{-j}.
///
/// The summand is log-concave in j; the sum starts near its peak and walks
/// outward with the ratio x²/(4(u+1)(v+1)), u = (j+n)/2, v = (j−n)/2.
pub fn uniformization_probability(x: f64, n: u64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ln_term = |j: u64| {
        let up = (j + n) / 2;
        -x + j as f64 * x.ln() - ln_factorial(up) - ln_factorial(j - up) - j as f64 * std::f64::consts::LN_2
    };
    let peak = (x * x + (n * n) as f64).sqrt().round() as u64;
    let mut j0 = peak.max(n);
    j0 += (j0 - n) % 2;
    let first = ln_term(j0).exp();
    if first == 0.0 {
        return 0.0;
    }
    let cut = 1e-22;
    let x2 = x * x;
    let mut total = first;
    let (mut j, mut term, mut best) = (j0, first, first);
    loop {
        let (up, down) = (((j + n) / 2) as f64, ((j - n) / 2) as f64);
        term *= x2 / (4.0 * (up + 1.0) * (down + 1.0));
        j += 2;
        total += term;
        best = best.max(term);
        if term < cut * best || j > n + 20_000_000 {
            break;
        }
    }
    let (mut j, mut term) = (j0, first);
    while j >= n + 2 {
        let (up, down) = (((j + n) / 2) as f64, ((j - n) / 2) as f64);
        term *= 4.0 * up * down / x2;
        j -= 2;
        total += term;
        best = best.max(term);
        if term < cut * best {
            break;
        }
    }
    total
}

/// e^{-x} I_n(x) for a single order.
pub fn walk_probability(x: f64, n: u64) -> f64 {
    let start = recurrence_start(x);
    if n as usize > start {
        return 0.0;
    }
    if n as usize > BESSEL_MAX_ORDER {
        return uniformization_probability(x, n);
    }
    scaled_bessel_orders(x, n as usize)[n as usize]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_is_indicator() {
        let v = scaled_bessel_orders(0.0, 4);
        assert_eq!(v, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn known_bessel_values() {
        // e^{-1} I_0(1), e^{-1} I_1(1), e^{-10} I_3(10)
        let v = scaled_bessel_orders(1.0, 3);
        assert!((v[0] - 0.465_759_607_593_640_6).abs() < 1e-15);
        assert!((v[1] - 0.207_910_415_349_708_5).abs() < 1e-15);
        let w = scaled_bessel_orders(10.0, 3);
        assert!((w[3] - 0.079_830_361_029_840_51).abs() < 1e-14);
    }

    #[test]
    fn mass_sums_to_one() {
        for &x in &[1e-6, 0.3, 7.0, 250.0, 20_000.0] {
            let v = scaled_bessel_orders(x, recurrence_start(x));
            let total = v[0] + 2.0 * v[1..].iter().sum::<f64>();
            assert!((total - 1.0).abs() < 1e-13, "x={x}: {total}");
        }
    }

    #[test]
    fn entries_independent_of_request_length() {
        let a = scaled_bessel_orders(37.5, 5);
        let b = scaled_bessel_orders(37.5, 80);
        assert_eq!(&a[..], &b[..6]);
    }

    #[test]
    fn uniformization_agrees_with_bessel() {
        for &x in &[0.5, 4.0, 60.0, 900.0] {
            let v = scaled_bessel_orders(x, 40);
            for n in [0u64, 1, 3, 10, 40] {
                let u = uniformization_probability(x, n);
                let exact = v[n as usize];
                assert!((u - exact).abs() <= 1e-10 * exact, "x={x} n={n}: {u} vs {exact}");
            }
        }
    }

    #[test]
    fn high_orders_use_series() {
        let x = 5.0e5;
        let v = scaled_bessel_orders(x, 700);
        // Reference values e^{-x} I_n(x) at x = 5e5.
        assert!((v[601] / 3.931_492_333_218_191e-4 - 1.0).abs() < 1e-9);
        assert!((v[650] / 3.697_733_398_995_104_5e-4 - 1.0).abs() < 1e-9);
    }
}
