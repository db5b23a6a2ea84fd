use std::fs::File;
use std::io::{BufWriter, Write};

use islt::sie_sim::solver::cached_lag_table;
use islt::sie_sim::{picard_solve, Diffusion, MomentTracker, SIEConfig, Simulator, VarianceProbe};
use islt::kernels::table::cache_dir;
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::resolve::{pick, Resolver};
use crate::run::Run;
use crate::{ModelArgs, SimArgs};

/// Standard errors allowed between empirical and exact variance.
pub const VARIANCE_SIGMAS: f64 = 3.0;

#[derive(Serialize)]
struct ZeroReduction {
    max_abs_random: f64,
    pass: bool,
}

/// Replicas solved per batch; bounds the memory held at once.
pub fn batch_size() -> u64 {
    (8 * rayon::current_num_threads()).max(16) as u64
}

/// (step, centre site) at t = T/4, T/2, 3T/4, T.
pub fn probe_points(config: &SIEConfig) -> Vec<(usize, usize)> {
    let m = config.steps;
    let centre = config.site_count() / 2;
    [m / 4, m / 2, 3 * m / 4, m]
        .into_iter()
        .filter(|&j| j > 0)
        .map(|j| (j, centre))
        .collect()
}

pub fn simulator(config: &SIEConfig, run: &mut Run) -> Result<Simulator, CliError> {
    let (table, hit) = cached_lag_table(config, &cache_dir())?;
    run.set_cache(table.hash(), hit);
    Ok(Simulator::with_table(*config, table)?)
}

pub fn run(
    r: &Resolver,
    model: &ModelArgs,
    sim_args: &SimArgs,
    picard: Option<usize>,
    save_fields: Option<usize>,
    binary: bool,
) -> Result<bool, CliError> {
    let file = &r.settings.sie;
    let params = r.params(model, 1, 1)?;
    let config = r.sie_config(params, sim_args, SIEConfig::desk)?;
    let picard = picard.or(file.picard);
    let save_fields = pick(save_fields, file.save_fields.as_ref(), 1);
    let binary = binary || file.binary.unwrap_or(false);
    if let Some(n) = picard {
        let snapshot = json!({ "sie": config, "picard": n });
        let mut run = r.run("simulate-picard", snapshot, Some(config.seed))?;
        let report = picard_solve(&config, n)?;
        run.write_json("picard.json", &report)?;
        let csv = run.path("picard.csv");
        let mut out = BufWriter::new(File::create(&csv)?);
        writeln!(out, "n,d_star,ratio")?;
        for (i, d) in report.d_star.iter().enumerate() {
            let ratio = if i == 0 { f64::NAN } else { report.ratios[i - 1] };
            writeln!(out, "{i},{d:.17e},{ratio:.17e}")?;
        }
        out.flush()?;
        run.record(&csv);
        let pass = report.contracts && !report.diverged;
        say!(
            "[{}] Picard contraction: D* {:?}, ratios after n = 3 below {}; scheme gap {:.3e} ± {:.1e}",
            if pass { "PASS" } else { "FAIL" },
            report.d_star.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            report.contraction_limit,
            report.scheme_gap,
            report.scheme_gap_std_error
        );
        run.finish(pass)?;
        return Ok(pass);
    }

    let snapshot = json!({ "sie": config, "save_fields": save_fields, "binary": binary });
    let mut run = r.run("simulate", snapshot, Some(config.seed))?;
    let sim = simulator(&config, &mut run)?;
    let mut moments = MomentTracker::new(config.steps, config.site_count());
    let constant = match config.a {
        Diffusion::Constant { c } => Some(c),
        _ => None,
    };
    let mut probe = constant.map(|_| VarianceProbe::new(probe_points(&config)));
    let mut max_abs_random: f64 = 0.0;
    let total = config.replicas as u64;
    let mut start = 0;
    while start < total {
        let end = (start + batch_size()).min(total);
        for sample in sim.run(start..end)? {
            moments.add(&sample);
            if let Some(p) = probe.as_mut() {
                p.add(&sample);
            }
            max_abs_random = sample.random.iter().fold(max_abs_random, |m, v| m.max(v.abs()));
            if (sample.replica as usize) < save_fields {
                let path = run.path(&format!("field_r{}.csv", sample.replica));
                sample.write_csv(BufWriter::new(File::create(&path)?))?;
                run.record(&path);
                if binary {
                    let path = run.path(&format!("field_r{}.bin", sample.replica));
                    sample.write_binary(BufWriter::new(File::create(&path)?))?;
                    run.record(&path);
                }
            }
        }
        start = end;
    }

    let mut pass = true;
    let times = config.times();
    let summaries: Vec<_> = (1..=3).map(|q| moments.summary(q, &times)).collect();
    for s in &summaries {
        say!(
            "[{}] sup-x moment q={}: max {:.4e}, envelope C = {:.3}",
            if s.bounded { "PASS" } else { "FAIL" },
            s.q,
            s.sup_moment.iter().copied().fold(0.0, f64::max),
            s.envelope
        );
        pass &= s.bounded;
    }
    run.write_json("moments.json", &summaries)?;
    let csv = run.path("moments.csv");
    let mut out = BufWriter::new(File::create(&csv)?);
    writeln!(out, "t,m1,m2,m3")?;
    for (j, t) in times.iter().enumerate() {
        writeln!(
            out,
            "{t:.17e},{:.17e},{:.17e},{:.17e}",
            summaries[0].sup_moment[j], summaries[1].sup_moment[j], summaries[2].sup_moment[j]
        )?;
    }
    out.flush()?;
    run.record(&csv);

    if config.a.is_zero() {
        let z = ZeroReduction {
            max_abs_random,
            pass: max_abs_random == 0.0,
        };
        say!(
            "[{}] a = 0 reduction: max |U - deterministic part| = {:e}",
            if z.pass { "PASS" } else { "FAIL" },
            z.max_abs_random
        );
        pass &= z.pass;
        run.write_json("zero_reduction.json", &z)?;
    }
    if let (Some(c), Some(p)) = (constant, probe) {
        let checks = p.finish(&sim, c, VARIANCE_SIGMAS);
        for v in &checks {
            say!(
                "[{}] variance t={} x={:?}: {:.5e} vs exact {:.5e} (z = {:.2}, skew {:.3}, kurt {:.3})",
                if v.pass { "PASS" } else { "FAIL" },
                v.t,
                v.x,
                v.empirical,
                v.oracle,
                v.z_score,
                v.skewness,
                v.excess_kurtosis
            );
            pass &= v.pass;
        }
        run.write_json("variance.json", &checks)?;
    }
    run.finish(pass)?;
    Ok(pass)
}
