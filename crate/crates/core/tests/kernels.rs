use std::f64::consts::PI;

use islt::kernels::walk::{recurrence_start, scaled_bessel_orders, uniformization_probability, walk_probability};
use islt::kernels::{Kernels, KernelTable, Lattice};
use islt::params::ModelParams;
use statrs::function::gamma::ln_gamma;

/// Composite Simpson rule on [a, b] with n (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] != 0.0 {
                for j in 0..n {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
    }
    c
}

/// exp(xQ) for the walk generator on {-r..r} by scaling and squaring.
fn walk_expm(x: f64, r: usize) -> Vec<Vec<f64>> {
    let n = 2 * r + 1;
    let squarings = (x.max(1.0).log2().ceil() as u32) + 4;
    let h = x / f64::from(1u32 << squarings);
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        q[i][i] = -h;
        if i > 0 {
            q[i][i - 1] = 0.5 * h;
        }
        if i + 1 < n {
            q[i][i + 1] = 0.5 * h;
        }
    }
    let mut sum = vec![vec![0.0; n]; n];
    let mut term = vec![vec![0.0; n]; n];
    for i in 0..n {
        sum[i][i] = 1.0;
        term[i][i] = 1.0;
    }
    for m in 1..30 {
        term = mat_mul(&term, &q);
        for row in term.iter_mut() {
            row.iter_mut().for_each(|v| *v /= m as f64);
        }
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = mat_mul(&sum, &sum);
    }
    sum
}

/// e^{-x} I_n(x) from its power series summed in log form.
fn bessel_series(x: f64, n: u64) -> f64 {
    let n = n as f64;
    let mut total = 0.0;
    for j in 0..200_000 {
        let j = j as f64;
        let ln = -x + (n + 2.0 * j) * (0.5 * x).ln() - ln_gamma(j + 1.0) - ln_gamma(n + j + 1.0);
        let term = ln.exp();
        total += term;
        if j > x && term < 1e-30 * total {
            break;
        }
    }
    total
}

#[test]
fn bessel_matches_matrix_exponential() {
    let r = 20;
    for x in [0.1, 0.7, 2.0, 3.5] {
        let p = walk_expm(x, r);
        let orders = scaled_bessel_orders(x, 15);
        for (n, v) in orders.iter().enumerate() {
            let reference = p[r][r + n];
            assert!((v - reference).abs() <= 1e-8, "x={x} n={n}: {v} vs {reference}");
        }
    }
}

#[test]
fn walk_mass_sums_to_one() {
    for x in [1e-3, 0.5, 12.0, 400.0, 3.0e4] {
        let orders = scaled_bessel_orders(x, 2000);
        let total = orders[0] + 2.0 * orders[1..].iter().sum::<f64>();
        assert!((total - 1.0).abs() < 1e-12, "x={x}: {total}");
    }
}

#[test]
fn walk_probabilities_match_power_series() {
    for (x, n) in [(0.4, 3), (5.0, 0), (5.0, 12), (80.0, 40), (900.0, 330), (4.0e4, 1800)] {
        let v = walk_probability(x, n);
        let reference = bessel_series(x, n);
        let peak = bessel_series(x, 0);
        assert!(
            (v - reference).abs() < 1e-9 * reference + 1e-15 * peak,
            "x={x} n={n}: {v} vs {reference}"
        );
    }
}

#[test]
fn orders_past_recurrence_start_are_negligible() {
    let x = 900.0;
    let n = recurrence_start(x) as u64 + 1;
    assert_eq!(walk_probability(x, n), 0.0);
    assert!(bessel_series(x, n) < (-50.0f64).exp() * walk_probability(x, 0));
}

#[test]
fn uniformization_matches_power_series() {
    for (x, n) in [(3.0, 2), (50.0, 10), (700.0, 620), (1500.0, 900)] {
        let v = uniformization_probability(x, n);
        let reference = bessel_series(x, n);
        assert!(((v - reference) / reference).abs() < 1e-9, "x={x} n={n}");
    }
}

#[test]
fn brownian_kernel_is_heat_kernel() {
    for d in 1..=3 {
        let kernels = Kernels::new(ModelParams::new(0, d).unwrap()).unwrap();
        for t in [0.1, 1.0, 3.0] {
            let x: Vec<f64> = (0..d).map(|i| 0.3 * (i as f64 + 1.0)).collect();
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let reference = (-r2 / (2.0 * t)).exp() / (2.0 * PI * t).powf(0.5 * d as f64);
            let v = kernels.continuum(t, &x).unwrap();
            assert!(((v - reference) / reference).abs() < 1e-13);
        }
    }
}

#[test]
fn brownian_lattice_kernel_is_walk_product() {
    let params = ModelParams::new(0, 2).unwrap();
    let lat = Lattice::new(0.1, 2, 2.0).unwrap();
    let kernels = Kernels::new(params).unwrap();
    let t = 0.3;
    let x = t * lat.jump_rate();
    let v = kernels.lattice_steps(&lat, t, &[3, -5]).unwrap();
    let reference = bessel_series(x, 3) * bessel_series(x, 5);
    assert!(((v - reference) / reference).abs() < 1e-10);
}

/// Inverse half-stable density: exp(-s²/4t)/√(πt).
fn half_stable(t: f64, s: f64) -> f64 {
    (-s * s / (4.0 * t)).exp() / (PI * t).sqrt()
}

fn gaussian_1d(s: f64, x: f64) -> f64 {
    (-x * x / (2.0 * s)).exp() / (2.0 * PI * s).sqrt()
}

#[test]
fn half_stable_kernel_matches_direct_quadrature() {
    let kernels = Kernels::new(ModelParams::new(1, 1).unwrap()).unwrap();
    for (t, x) in [(1.0f64, 0.0), (1.0, 0.7), (0.25, 0.2), (2.0, 1.5)] {
        // s = w² removes the s^{-1/2} endpoint behavior.
        let w_max = (12.0 * t.sqrt()).sqrt();
        let reference = simpson(
            |w: f64| {
                if w == 0.0 {
                    return if x == 0.0 { 2.0 * half_stable(t, 0.0) / (2.0 * PI).sqrt() } else { 0.0 };
                }
                2.0 * w * gaussian_1d(w * w, x) * half_stable(t, w * w)
            },
            0.0,
            w_max,
            20_000,
        );
        let v = kernels.continuum(t, &[x]).unwrap();
        assert!(((v - reference) / reference).abs() < 1e-8, "t={t} x={x}: {v} vs {reference}");
    }
}

#[test]
fn quarter_stable_kernel_matches_nested_quadrature() {
    let kernels = Kernels::new(ModelParams::new(2, 1).unwrap()).unwrap();
    let t = 1.0;
    let x = 0.5;
    // Density of |B₂(|B₁(t)|)|: ∫ K₁(t, u) K₁(u, s) du with u = v².
    let density = |s: f64| {
        simpson(
            |v: f64| {
                if v == 0.0 {
                    return 0.0;
                }
                2.0 * v * half_stable(t, v * v) * half_stable(v * v, s)
            },
            0.0,
            3.5,
            4000,
        )
    };
    let reference = simpson(
        |w: f64| {
            if w == 0.0 {
                return 0.0;
            }
            2.0 * w * gaussian_1d(w * w, x) * density(w * w)
        },
        0.0,
        6.0,
        4000,
    );
    let v = kernels.continuum(t, &[x]).unwrap();
    assert!(((v - reference) / reference).abs() < 1e-6, "{v} vs {reference}");
}

#[test]
fn continuum_kernel_is_self_similar() {
    for (k, d) in [(1, 1), (1, 2), (2, 1), (2, 3)] {
        let params = ModelParams::new(k, d).unwrap();
        let kernels = Kernels::new(params).unwrap();
        let beta = params.beta();
        let x: Vec<f64> = (0..d).map(|i| 0.4 + 0.1 * i as f64).collect();
        let t = 0.5;
        for c in [0.25f64, 3.0] {
            let scaled: Vec<f64> = x.iter().map(|v| v * c.powf(-beta / 2.0)).collect();
            let lhs = kernels.continuum(c * t, &x).unwrap();
            let rhs = c.powf(-beta * d as f64 / 2.0) * kernels.continuum(t, &scaled).unwrap();
            assert!(((lhs - rhs) / rhs).abs() < 1e-8, "k={k} d={d} c={c}");
        }
    }
}

#[test]
fn lattice_kernel_rows_are_normalized() {
    for (k, d, delta) in [(0, 1, 0.05), (1, 1, 0.05), (1, 2, 0.1), (2, 2, 0.1), (3, 1, 0.1)] {
        let params = ModelParams::new(k, d).unwrap();
        let lat = Lattice::new(delta, d, 1.0).unwrap();
        let times = [0.25, 1.0];
        let radius = Kernels::new(params).unwrap().radius_for_tail(&lat, 1.0, 1e-10);
        let table = KernelTable::build_lattice(&params, &lat, &times, radius, 1 << 24).unwrap();
        for i in 0..times.len() {
            let sum = table.row_sum(i).unwrap();
            assert!((sum - 1.0).abs() < 1e-8, "k={k} d={d}: {sum}");
        }
    }
}

#[test]
fn lattice_kernel_approaches_continuum() {
    let params = ModelParams::new(1, 1).unwrap();
    let kernels = Kernels::new(params).unwrap();
    let continuum = kernels.continuum(1.0, &[0.5]).unwrap();
    let mut errors = Vec::new();
    for delta in [0.25, 0.125, 0.0625] {
        let lat = Lattice::new(delta, 1, 1.0).unwrap();
        let v = kernels.lattice(&lat, 1.0, &[0.5]).unwrap() / delta;
        errors.push((v / continuum - 1.0).abs());
    }
    assert!(errors[2] < errors[1] && errors[1] < errors[0], "{errors:?}");
    assert!(errors[2] < 0.012);
}
