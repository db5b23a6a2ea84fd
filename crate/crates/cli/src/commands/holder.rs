use std::fs::File;
use std::io::{BufWriter, Write};

use islt::regularity::{
    holder_bundle, Direction, IncrementAccumulator, IncrementPlan, DEFAULT_TOLERANCE, MIN_REPLICAS,
};
use islt::sie_sim::SIEConfig;
use serde_json::json;

use super::simulate::{batch_size, simulator};
use crate::error::CliError;
use crate::resolve::{pick, Resolver};
use crate::{ModelArgs, SimArgs};

pub fn run(r: &Resolver, model: &ModelArgs, sim_args: &SimArgs, tolerance: Option<f64>) -> Result<bool, CliError> {
    let params = r.params(model, 1, 1)?;
    let config = r.sie_config(params, sim_args, SIEConfig::holder)?;
    let tolerance = pick(tolerance, r.settings.holder.tolerance.as_ref(), DEFAULT_TOLERANCE);
    if config.replicas < MIN_REPLICAS {
        return Err(CliError::Usage(format!(
            "Hölder fits need at least {MIN_REPLICAS} replicas; got {}",
            config.replicas
        )));
    }
    let snapshot = json!({ "sie": config, "tolerance": tolerance });
    let mut run = r.run("holder", snapshot, Some(config.seed))?;
    let sim = simulator(&config, &mut run)?;
    let mut accs: Vec<IncrementAccumulator> = [Direction::Time, Direction::Space]
        .into_iter()
        .map(|dir| IncrementAccumulator::new(IncrementPlan::for_direction(&config, dir)))
        .collect();
    let total = config.replicas as u64;
    let mut start = 0;
    while start < total {
        let end = (start + batch_size()).min(total);
        for sample in sim.run(start..end)? {
            for acc in &mut accs {
                acc.add(&sample);
            }
        }
        start = end;
    }
    let bundle = holder_bundle(&params, &accs, tolerance)?;
    run.write_json("holder_report.json", &bundle)?;
    let mut pass = true;
    for rep in &bundle.reports {
        let dir = match rep.direction {
            Direction::Time => "time",
            Direction::Space => "space",
        };
        let csv = run.path(&format!("holder_{dir}_q{}.csv", rep.q));
        let mut out = BufWriter::new(File::create(&csv)?);
        writeln!(out, "lag,moment,std_error")?;
        for m in &rep.moments {
            writeln!(out, "{:.17e},{:.17e},{:.17e}", m.lag, m.moment, m.std_error)?;
        }
        out.flush()?;
        run.record(&csv);
        say!(
            "[{}] {params} {dir} q={}: slope {:.4} ± {:.4}, bound {:.4} - {tolerance}{}",
            if rep.pass { "PASS" } else { "FAIL" },
            rep.q,
            rep.fitted_slope,
            rep.half_width,
            rep.expected_slope,
            if rep.sharp_observed { " (observed sharp)" } else { "" }
        );
        pass &= rep.pass;
    }
    for (dir, why) in &bundle.refused {
        say!("[SKIP] {params} {dir:?}: {why}");
    }
    run.finish(pass)?;
    Ok(pass)
}
