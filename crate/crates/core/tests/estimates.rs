use std::f64::consts::PI;

use islt::estimates::fit::ScalingFit;
use islt::estimates::{
    l2_norm_continuum, l2_norm_lattice, spatial_difference_integral, temporal_difference_direct,
    temporal_difference_integral, temporal_difference_scan, Space,
};
use islt::kernels::Lattice;
use islt::params::ModelParams;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn half_stable(t: f64, s: f64) -> f64 {
    (-s * s / (4.0 * t)).exp() / (PI * t).sqrt()
}

#[test]
fn brownian_l2_norm_closed_form() {
    for d in 1..=3 {
        let params = ModelParams::new(0, d).unwrap();
        for t in [0.25, 1.0, 2.0] {
            let v = l2_norm_continuum(&params, t).unwrap();
            let reference = (4.0 * PI * t).powf(-0.5 * d as f64);
            assert!(((v - reference) / reference).abs() < 1e-10, "d={d} t={t}");
        }
    }
}

/// ∫∫ f(s₁) f(s₂) [2π(s₁+s₂)]^{-d/2} ds₁ ds₂ for the inverse half-stable
/// density f, with s = w² in both variables.
fn half_stable_l2(d: usize, t: f64) -> f64 {
    let w_max = (14.0 * t.sqrt()).sqrt();
    let inner = |w1: f64| {
        simpson(
            |w2: f64| {
                let r = w1 * w1 + w2 * w2;
                if r == 0.0 {
                    return 0.0;
                }
                4.0 * w1 * w2 * half_stable(t, w1 * w1) * half_stable(t, w2 * w2)
                    * (2.0 * PI * r).powf(-0.5 * d as f64)
            },
            0.0,
            w_max,
            1200,
        )
    };
    simpson(inner, 0.0, w_max, 1200)
}

#[test]
fn half_stable_l2_norm_matches_double_quadrature() {
    for d in [1, 2] {
        let params = ModelParams::new(1, d).unwrap();
        let t = 1.0;
        let v = l2_norm_continuum(&params, t).unwrap();
        let reference = half_stable_l2(d, t);
        assert!(((v - reference) / reference).abs() < 1e-5, "d={d}: {v} vs {reference}");
    }
}

#[test]
fn l2_norm_scales_with_time() {
    let params = ModelParams::new(2, 2).unwrap();
    let a = l2_norm_continuum(&params, 0.5).unwrap();
    let b = l2_norm_continuum(&params, 2.0).unwrap();
    let expected = 4f64.powf(-params.beta() * params.d as f64 / 2.0);
    assert!((b / a / expected - 1.0).abs() < 1e-8);
}

#[test]
fn lattice_l2_routes_agree() {
    let params = ModelParams::new(1, 2).unwrap();
    let lat = Lattice::new(0.125, 2, 1.0).unwrap();
    let l2 = l2_norm_lattice(&params, &lat, 1.0, 1 << 24).unwrap();
    let table = l2.table_value.expect("table fits the budget");
    assert!(((l2.value - table) / table).abs() < 1e-7, "{} vs {table}", l2.value);
    assert!((l2.ratio - 1.0).abs() < 0.05, "ratio {}", l2.ratio);
}

#[test]
fn brownian_temporal_difference_closed_form() {
    let params = ModelParams::new(0, 1).unwrap();
    let t = 1.0f64;
    for h in [0.01f64, 0.1, 0.4] {
        let r = t - h;
        let reference = (t / PI).sqrt() + (r / PI).sqrt()
            - 2.0 * ((2.0 * r + h).sqrt() - h.sqrt()) / (2.0 * PI).sqrt();
        let v = temporal_difference_integral(&params, &Space::Continuum, r, t).unwrap();
        assert!(((v - reference) / reference).abs() < 1e-6, "h={h}: {v} vs {reference}");
    }
}

#[test]
fn temporal_scan_agrees_with_direct_quadrature() {
    let params = ModelParams::new(1, 1).unwrap();
    let (r, t) = (0.75, 1.0);
    let scan = temporal_difference_scan(&params, t, &[t - r]).unwrap()[0];
    let direct = temporal_difference_direct(&params, r, t).unwrap();
    assert!(((scan - direct) / direct).abs() < 1e-4, "{scan} vs {direct}");
}

#[test]
fn brownian_spatial_difference_matches_quadrature() {
    let params = ModelParams::new(0, 1).unwrap();
    let t = 1.0;
    for z in [0.05f64, 0.3] {
        // 2∫₀^t (1 − e^{−z²/4s}) (4πs)^{−1/2} ds with s = w².
        let reference = 2.0
            * simpson(
                |w: f64| {
                    if w == 0.0 {
                        return 2.0 / (4.0 * PI).sqrt();
                    }
                    let s = w * w;
                    2.0 * w * -(-z * z / (4.0 * s)).exp_m1() / (4.0 * PI * s).sqrt()
                },
                0.0,
                1.0,
                20_000,
            );
        let v = spatial_difference_integral(&params, &Space::Continuum, t, &[z]).unwrap();
        assert!(((v - reference) / reference).abs() < 1e-7, "z={z}: {v} vs {reference}");
    }
}

#[test]
fn lattice_spatial_difference_tracks_continuum() {
    let params = ModelParams::new(1, 1).unwrap();
    let lat = Lattice::new(0.0125, 1, 2.0).unwrap();
    let z = [0.25];
    let continuum = spatial_difference_integral(&params, &Space::Continuum, 1.0, &z).unwrap();
    let lattice = spatial_difference_integral(&params, &Space::Lattice(lat), 1.0, &z).unwrap() / lat.delta;
    assert!((lattice / continuum - 1.0).abs() < 0.02, "{lattice} vs {continuum}");
}

#[test]
fn scaling_fit_rejects_degenerate_input() {
    assert!(ScalingFit::fit(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    assert!(ScalingFit::fit(&[1.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    assert!(ScalingFit::fit(&[1.0, 2.0, 3.0], &[1.0, -2.0, 3.0]).is_err());
}
