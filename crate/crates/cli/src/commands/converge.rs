use islt::estimates::limit::continuum_limit_report;
use islt::estimates::verify::verify_limit;
use serde_json::json;

use super::verify::limit_inputs;
use super::{print_suite, write_suite};
use crate::error::CliError;
use crate::resolve::{pick, Resolver};
use crate::ModelArgs;

pub fn run(
    r: &Resolver,
    model: &ModelArgs,
    t: Option<f64>,
    x: Option<Vec<f64>>,
    deltas: Option<Vec<f64>>,
    tolerances: Option<Vec<f64>>,
) -> Result<bool, CliError> {
    let file = &r.settings.verify;
    let params = r.params(model, 1, 1)?;
    let t = pick(t, file.t.as_ref(), 1.0);
    let x = pick(x, file.x.as_ref(), vec![0.5; params.d]);
    if x.len() != params.d {
        return Err(CliError::Usage(format!("point {x:?} does not have d = {} coordinates", params.d)));
    }
    let (deltas, tolerances) = limit_inputs(r, deltas, tolerances)?;
    let config = json!({ "params": params, "t": t, "x": x, "deltas": deltas, "tolerances": tolerances });
    let mut run = r.run("converge", config, None)?;
    let rows = continuum_limit_report(&params, t, &x, &deltas)?;
    run.write_json("limit_rows.json", &rows)?;
    let report = verify_limit(&params, t, &x, &deltas, &tolerances)?;
    print_suite(&report);
    write_suite(&mut run, &report)?;
    let pass = report.pass();
    run.finish(pass)?;
    Ok(pass)
}
