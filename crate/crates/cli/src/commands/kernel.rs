use std::fs::File;
use std::io::{BufWriter, Write};

use islt::estimates::verify::row_sum_report;
use islt::kernels::table::{cache_dir, KernelTable, DEFAULT_BUDGET};
use islt::kernels::{Kernels, Lattice};
use serde_json::json;

use super::verify::desk_delta;
use super::{print_suite, write_suite};
use crate::error::CliError;
use crate::resolve::{pick, Resolver};
use crate::ModelArgs;

const TAIL: f64 = 1e-9;

pub fn run(
    r: &Resolver,
    model: &ModelArgs,
    delta: Option<f64>,
    times: Option<Vec<f64>>,
    radius_steps: Option<usize>,
    budget: Option<usize>,
) -> Result<bool, CliError> {
    let file = &r.settings.kernel;
    let params = r.params(model, 1, 1)?;
    let delta = pick(delta, file.delta.as_ref(), desk_delta(params.d));
    let times = pick(times, file.times.as_ref(), vec![0.25, 0.5, 1.0]);
    let budget = pick(budget, file.budget.as_ref(), DEFAULT_BUDGET);
    let lat = Lattice::new(delta, params.d, 0.0).map_err(|e| CliError::Usage(e.to_string()))?;
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let radius = match radius_steps.or(file.radius_steps) {
        Some(n) => n,
        None => Kernels::new(params)?.radius_for_tail(&lat, t_max, TAIL),
    };
    let config = json!({
        "params": params,
        "delta": delta,
        "times": times,
        "radius_steps": radius,
        "budget": budget,
        "cache_dir": cache_dir(),
    });
    let mut run = r.run("kernel", config, None)?;
    let (table, hit) = KernelTable::load_or_build_lattice(&cache_dir(), &params, &lat, &times, radius, budget)?;
    run.set_cache(table.hash(), hit);
    say!(
        "kernel {params} delta={delta}: {} times, radius {radius} steps, cache {} ({})",
        times.len(),
        if hit { "hit" } else { "miss" },
        table.hash()
    );

    let slice = run.path("kernel_slice.csv");
    let mut out = BufWriter::new(File::create(&slice)?);
    writeln!(out, "t,x,value")?;
    let mut steps = vec![0i64; params.d];
    for (ti, &t) in table.times().iter().enumerate() {
        for n in -(radius as i64)..=radius as i64 {
            steps[0] = n;
            let v = table.get_steps(ti, &steps).unwrap_or(f64::NAN);
            writeln!(out, "{t},{},{v:.17e}", n as f64 * delta)?;
        }
    }
    out.flush()?;
    run.record(&slice);

    let report = row_sum_report(&table);
    print_suite(&report);
    write_suite(&mut run, &report)?;
    let pass = report.pass();
    run.finish(pass)?;
    Ok(pass)
}
