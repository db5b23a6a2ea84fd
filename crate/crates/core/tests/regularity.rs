use islt::error::Error;
use islt::estimates::fit::ScalingFit;
use islt::kernels::Lattice;
use islt::params::ModelParams;
use islt::regularity::{
    expected_slope, holder_bundle, holder_report, Direction, IncrementAccumulator, IncrementPlan,
    MIN_LAGS,
};
use islt::sie_sim::{SIEConfig, Simulator};

fn small(k: u32) -> SIEConfig {
    let mut c = SIEConfig::desk(ModelParams::new(k, 1).unwrap()).unwrap();
    c.lat = Lattice::new(0.05, 1, 1.0).unwrap();
    c.steps = 128;
    c.seed = 3;
    c
}

fn exact_panel_variance(sim: &Simulator, plan: &IncrementPlan, i: usize) -> Vec<f64> {
    plan.pairs(i)
        .iter()
        .map(|&(a, b)| sim.increment_variance(1.0, a, b))
        .collect()
}

#[test]
fn accumulated_moments_match_exact_gaussian_moments() {
    let mut config = small(1);
    config.replicas = 1200;
    let sim = Simulator::new(config).unwrap();
    let samples = sim.run(0..config.replicas as u64).unwrap();
    for direction in [Direction::Time, Direction::Space] {
        let mut acc = IncrementAccumulator::new(IncrementPlan::for_direction(&config, direction));
        samples.iter().for_each(|s| acc.add(s));
        let m1 = acc.moments(1).unwrap();
        let m2 = acc.moments(2).unwrap();
        for i in 0..m1.len() {
            let vars = exact_panel_variance(&sim, acc.plan(), i);
            let n = vars.len() as f64;
            let second = vars.iter().sum::<f64>() / n;
            // Gaussian increments: E|X|⁴ = 3σ⁴.
            let fourth = vars.iter().map(|v| 3.0 * v * v).sum::<f64>() / n;
            let z1 = (m1[i].moment - second) / m1[i].std_error;
            let z2 = (m2[i].moment - fourth) / m2[i].std_error;
            assert!(z1.abs() < 4.0 && z2.abs() < 4.0, "{direction:?} lag {i}: z = {z1}, {z2}");
        }
    }
}

#[test]
fn exact_time_slopes_on_holder_grid() {
    for k in [0, 1] {
        let params = ModelParams::new(k, 1).unwrap();
        let config = SIEConfig::holder(params).unwrap();
        let sim = Simulator::new(config).unwrap();
        let plan = IncrementPlan::time(&config);
        let values: Vec<f64> = (0..plan.lags.len())
            .map(|i| {
                let v = exact_panel_variance(&sim, &plan, i);
                v.iter().sum::<f64>() / v.len() as f64
            })
            .collect();
        let fit = ScalingFit::fit(&plan.lags, &values).unwrap();
        let expected = expected_slope(&params, Direction::Time, 1);
        assert!((fit.slope - expected).abs() < 0.07, "k={k}: {} vs {expected}", fit.slope);
    }
}

#[test]
fn holder_fits_refuse_small_ensembles() {
    let mut config = small(1);
    config.replicas = 20;
    let samples = Simulator::new(config).unwrap().run(0..20).unwrap();
    assert!(matches!(holder_report(&samples, 0.07), Err(Error::Usage(_))));
}

#[test]
fn coarse_three_dimensional_grid_refuses_space_fits() {
    let params = ModelParams::new(1, 3).unwrap();
    let config = SIEConfig::holder(params).unwrap();
    let plan = IncrementPlan::space(&config);
    assert!(plan.lags.len() < MIN_LAGS);
    let acc = IncrementAccumulator::new(plan);
    let bundle = holder_bundle(&params, &[acc], 0.07).unwrap();
    assert!(bundle.reports.is_empty());
    assert_eq!(bundle.refused[0].0, Direction::Space);
}

#[test]
fn time_lags_stay_in_physical_window() {
    for (k, d) in [(0, 1), (1, 1), (2, 1), (1, 2)] {
        let config = SIEConfig::holder(ModelParams::new(k, d).unwrap()).unwrap();
        let plan = IncrementPlan::time(&config);
        let lo = (4.0 * config.dt()).max(config.horizon / 16.0);
        assert!(plan.lags.len() >= MIN_LAGS);
        assert!(plan.lags.iter().all(|&h| h >= lo - 1e-12 && h <= config.horizon / 4.0 + 1e-12));
    }
}
