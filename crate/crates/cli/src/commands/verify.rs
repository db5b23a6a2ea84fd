use islt::estimates::verify::{
    verify_dde, verify_divergence, verify_l2, verify_limit, verify_normalization, verify_spatial,
    verify_temporal, SuiteReport,
};
use islt::kernels::Lattice;
use islt::params::ModelParams;
use serde_json::json;

use super::{print_suite, write_suite};
use crate::error::CliError;
use crate::resolve::{parse_beta, pick, Resolver};
use crate::{ModelArgs, Suite};

pub struct VerifyArgs {
    pub delta: Option<f64>,
    pub deltas: Option<Vec<f64>>,
    pub tolerances: Option<Vec<f64>>,
    pub t: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub compare: Option<Vec<String>>,
}

/// Lattice step of the desk-scale grids.
pub fn desk_delta(d: usize) -> f64 {
    match d {
        1 => 0.05,
        2 => 0.1,
        _ => 0.2,
    }
}

pub const LIMIT_DELTAS: [f64; 3] = [0.25, 0.125, 0.0625];
pub const LIMIT_TOLERANCES: [f64; 3] = [0.05, 0.025, 0.012];

fn check_dim(x: &[f64], params: &ModelParams) -> Result<(), CliError> {
    if x.len() != params.d {
        return Err(CliError::Usage(format!(
            "point {x:?} has {} coordinates, d = {}",
            x.len(),
            params.d
        )));
    }
    Ok(())
}

pub fn run(r: &Resolver, suite: Suite, model: &ModelArgs, a: VerifyArgs) -> Result<bool, CliError> {
    let file = &r.settings.verify;
    let t = pick(a.t, file.t.as_ref(), 1.0);
    let (name, config, report): (&str, _, SuiteReport) = match suite {
        Suite::L2 => {
            let params = r.params(model, 1, 1)?;
            let deltas = pick(a.deltas, file.deltas.as_ref(), vec![0.125, 0.0625]);
            let config = json!({ "params": params, "deltas": deltas });
            (
                "verify-l2",
                config,
                verify_l2(&params, &deltas)?,
            )
        }
        Suite::Temporal => {
            let params = r.params(model, 1, 1)?;
            params.require_field_dimension().map_err(|e| CliError::Usage(e.to_string()))?;
            let cross = params.d == 1;
            let config = json!({ "params": params, "cross_check": cross });
            ("verify-temporal", config, verify_temporal(&params, cross)?)
        }
        Suite::Spatial => {
            let d = pick(model.d, r.settings.model.d.as_ref(), 1);
            let compare = pick(
                a.compare,
                file.compare.as_ref(),
                vec!["1/2".to_string(), "1/4".to_string()],
            );
            let ks = compare.iter().map(|b| parse_beta(b)).collect::<Result<Vec<_>, _>>()?;
            if ks.is_empty() || ks.contains(&0) {
                return Err(CliError::Usage("spatial suite compares β < 1 values".into()));
            }
            ModelParams::for_sie(ks[0], d).map_err(|e| CliError::Usage(e.to_string()))?;
            let config = json!({ "d": d, "k": ks });
            ("verify-spatial", config, verify_spatial(&ks, d)?)
        }
        Suite::Dde => {
            let params = r.params(model, 1, 1)?;
            let delta = pick(a.delta, file.delta.as_ref(), 0.1);
            let x = pick(a.x, file.x.as_ref(), vec![0.5; params.d]);
            check_dim(&x, &params)?;
            let config = json!({ "params": params, "delta": delta, "t": t, "x": x });
            ("verify-dde", config, verify_dde(&params, delta, t, &x)?)
        }
        Suite::Limit => {
            let params = r.params(model, 1, 1)?;
            let (deltas, tolerances) = limit_inputs(r, a.deltas, a.tolerances)?;
            let x = pick(a.x, file.x.as_ref(), vec![0.5; params.d]);
            check_dim(&x, &params)?;
            let config = json!({ "params": params, "t": t, "x": x, "deltas": deltas, "tolerances": tolerances });
            ("verify-limit", config, verify_limit(&params, t, &x, &deltas, &tolerances)?)
        }
        Suite::Divergence => {
            let k = r.k(model, 1)?;
            let config = json!({ "k": k, "t": t });
            ("verify-divergence", config, verify_divergence(k, t)?)
        }
        Suite::Normalization => {
            let params = r.params(model, 1, 1)?;
            let delta = pick(a.delta, file.delta.as_ref(), desk_delta(params.d));
            let times = r
                .settings
                .kernel
                .times
                .clone()
                .unwrap_or_else(|| vec![0.25, 0.5, 1.0]);
            let lat = Lattice::new(delta, params.d, 0.0).map_err(|e| CliError::Usage(e.to_string()))?;
            let config = json!({ "params": params, "delta": delta, "times": times });
            ("verify-normalization", config, verify_normalization(&params, &lat, &times)?)
        }
    };
    let mut run = r.run(name, config, None)?;
    print_suite(&report);
    write_suite(&mut run, &report)?;
    let pass = report.pass();
    run.finish(pass)?;
    Ok(pass)
}

/// Steps and tolerances for the lattice limit, checked for equal length.
pub fn limit_inputs(
    r: &Resolver,
    deltas: Option<Vec<f64>>,
    tolerances: Option<Vec<f64>>,
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let file = &r.settings.verify;
    let deltas = pick(deltas, file.deltas.as_ref(), LIMIT_DELTAS.to_vec());
    let tolerances = pick(tolerances, file.tolerances.as_ref(), LIMIT_TOLERANCES.to_vec());
    if deltas.len() != tolerances.len() {
        return Err(CliError::Usage(format!(
            "{} lattice steps but {} tolerances",
            deltas.len(),
            tolerances.len()
        )));
    }
    Ok((deltas, tolerances))
}
