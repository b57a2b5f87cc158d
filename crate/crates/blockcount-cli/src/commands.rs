use blockcount::closedform::{
    beta31_pgf, bs_rho, export_record, moran_closed, wf_closed, ModelTag,
};
use blockcount::duality::{
    bs_absorption, bs_w_generating, kimura_fixation, moran_fixation, solve_w_moments,
};
use blockcount::geomfix::check_geometric;
use blockcount::measures::{Interior, LambdaMeasure, ModelParams};
use blockcount::recursions::{
    crow_kimura_geometric, geometric_pmf, solve_lambda_truncated, solve_moran, solve_star,
    SolverTag, StationaryPmf,
};
use blockcount::simulate::{
    occupancy, simulate_lambda_l, simulate_moran_l, JumpPath, RNG_ALGORITHM,
};
use clap::ValueEnum;
use serde_json::{json, Value};

use crate::model::Model;
use crate::{Artifact, CliError, SolveArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DualKind {
    Kimura,
    BsAbsorption,
    MoranFixation,
    WGenerating,
    Ancestral,
}

fn lambda<'a>(
    model: &'a Model,
    what: &str,
) -> Result<(&'a LambdaMeasure, &'a ModelParams), CliError> {
    match model {
        Model::Lambda {
            measure, params, ..
        } => Ok((measure, params)),
        Model::Moran(_) => Err(CliError::spec(format!(
            "{what} needs a measure file, not the Moran model"
        ))),
    }
}

/// `ρ` of the Bolthausen–Sznitman model, when the interior is exactly uniform with unit density.
fn bs_rho_if_unit(measure: &LambdaMeasure, params: &ModelParams) -> Option<f64> {
    match measure.interior {
        Interior::Uniform { c } if c == 1.0 && measure.m0 == 0.0 && measure.m1 == 0.0 => {
            bs_rho(params).ok()
        }
        _ => None,
    }
}

fn solve(model: &Model, solve: &SolveArgs) -> Result<(StationaryPmf, Value), CliError> {
    let out = match model {
        Model::Moran(p) => {
            let pmf = solve_moran(p)?;
            let closed = moran_closed(p)?;
            let sup = pmf.sup_distance(&closed.pmf);
            (pmf, json!({ "closed_form_sup_distance": sup }))
        }
        Model::Lambda {
            measure, params, ..
        } => match model.tag() {
            ModelTag::CrowKimura => {
                let (p, pmf) = crow_kimura_geometric(params, None)?;
                (pmf, json!({ "geometric_p": p }))
            }
            ModelTag::WrightFisher => (wf_closed(measure.m0, params)?.pmf, json!({})),
            ModelTag::Star => (solve_star(params, measure.m1, solve.k)?, json!({})),
            ModelTag::Beta31 => {
                let sol = beta31_pgf(params)?;
                (
                    sol.pmf,
                    json!({ "p1": sol.p1, "p2": sol.p2, "condition": sol.condition }),
                )
            }
            _ => {
                let pmf = solve_lambda_truncated(measure, params, solve.k, solve.tol)?;
                let extra = match bs_rho_if_unit(measure, params) {
                    Some(rho) => {
                        let geom = geometric_pmf(rho, Some(pmf.len()), SolverTag::Geometric)?;
                        json!({ "rho": rho, "geometric_sup_distance": pmf.sup_distance(&geom) })
                    }
                    None => json!({}),
                };
                (pmf, extra)
            }
        },
    };
    Ok(out)
}

pub fn stationary(model: &Model, args: &SolveArgs, n_moments: usize) -> Result<Artifact, CliError> {
    let (pmf, extra) = solve(model, args)?;
    let json = export_record(model.tag(), model.record(), &pmf, n_moments, extra);
    Ok(Artifact {
        json,
        csv: pmf.to_csv(),
    })
}

pub fn simulate(
    model: &Model,
    start: usize,
    events: u64,
    seed: u64,
    burn_in: f64,
) -> Result<(Artifact, JumpPath), CliError> {
    let path = match model {
        Model::Moran(p) => simulate_moran_l(p, start, events, seed)?,
        Model::Lambda {
            measure, params, ..
        } => simulate_lambda_l(measure, params, start, events, seed)?,
    };
    let occ = occupancy(&path, burn_in)?;
    let probs: Vec<Value> = occ
        .weights
        .keys()
        .map(|s| json!({ "state": s.to_string(), "probability": occ.probability(*s) }))
        .collect();
    let json = json!({
        "model": model.tag(),
        "params": model.record(),
        "start": start,
        "seed": seed,
        "rng": RNG_ALGORITHM,
        "events": events,
        "burn_in": burn_in,
        "n_jumps": path.n_jumps(),
        "absorbed": path.is_absorbed(),
        "final_state": path.final_state().to_string(),
        "occupancy": probs,
        "occupancy_mean": occ.mean(),
        "total_time": occ.total_time,
        "version": blockcount::VERSION,
    });
    Ok((
        Artifact {
            json,
            csv: occ.to_csv(),
        },
        path,
    ))
}

pub fn moments(model: &Model, n_max: usize, tol: f64) -> Result<Artifact, CliError> {
    let (measure, params) = lambda(model, "moments")?;
    let seq = solve_w_moments(measure, params, n_max, tol)?;
    let json = json!({
        "model": model.tag(),
        "params": model.record(),
        "w": seq.w,
        "truncation_k": seq.truncation_k,
        "residual": seq.residual,
        "monotonicity_defect": seq.monotonicity_defect,
        "version": blockcount::VERSION,
    });
    Ok(Artifact {
        json,
        csv: seq.to_csv(),
    })
}

pub fn geom_check(
    model: &Model,
    rho: Option<f64>,
    n_max: usize,
    tol: f64,
) -> Result<Artifact, CliError> {
    let (measure, params) = lambda(model, "geom-check")?;
    let (rho, source) = match rho {
        Some(r) => (r, "given"),
        None => match bs_rho_if_unit(measure, params) {
            Some(r) => (r, "bs_rho"),
            None => {
                let pmf = solve_lambda_truncated(measure, params, 64, 1e-12)?;
                (1.0 - pmf.p(1), "solved_p1")
            }
        },
    };
    let report = check_geometric(measure, params, rho, n_max, tol)?;
    let mut csv = String::from("n,residual\n");
    for (n, r) in report.cg3a.iter().enumerate() {
        csv.push_str(&format!("{n},{r:e}\n"));
    }
    let json = json!({
        "model": model.tag(),
        "params": model.record(),
        "rho_source": source,
        "report": report,
        "version": blockcount::VERSION,
    });
    Ok(Artifact { json, csv })
}

pub fn dual(
    model: &Model,
    what: DualKind,
    x: f64,
    k: usize,
    points: usize,
) -> Result<Artifact, CliError> {
    let (value, csv): (Value, String) = match what {
        DualKind::Kimura => {
            let (m, p) = lambda(model, "kimura")?;
            let v = kimura_fixation(x, p.sigma, m.m0)?;
            (
                json!({ "x": x, "fixation": v }),
                format!("x,fixation\n{x:e},{v:e}\n"),
            )
        }
        DualKind::BsAbsorption => {
            let (_, p) = lambda(model, "bs-absorption")?;
            let v = bs_absorption(x, p.sigma)?;
            (
                json!({ "x": x, "absorption": v }),
                format!("x,absorption\n{x:e},{v:e}\n"),
            )
        }
        DualKind::MoranFixation => {
            let Model::Moran(p) = model else {
                return Err(CliError::spec("moran-fixation needs --model moran"));
            };
            let v = moran_fixation(k, p.n, p.s)?;
            (
                json!({ "k": k, "fixation": v }),
                format!("k,fixation\n{k},{v:e}\n"),
            )
        }
        DualKind::WGenerating => {
            let (_, p) = lambda(model, "w-generating")?;
            if points == 0 {
                return Err(CliError::spec("--points must be positive"));
            }
            let probe = bs_w_generating(p, &[])?;
            let grid: Vec<f64> = (1..=points)
                .map(|i| probe.s2 * i as f64 / (points + 1) as f64)
                .collect();
            let w = bs_w_generating(p, &grid)?;
            let csv = w.to_csv();
            (serde_json::to_value(&w).expect("serializes"), csv)
        }
        DualKind::Ancestral => {
            if !(0.0..=1.0).contains(&x) {
                return Err(CliError::spec(format!("x = {x} not in [0,1]")));
            }
            let (pmf, _) = solve(model, &SolveArgs { k: 64, tol: 1e-12 })?;
            let v = blockcount::duality::ancestral_type_from_tails(&pmf, x);
            (json!({ "x": x, "h": v }), format!("x,h\n{x:e},{v:e}\n"))
        }
    };
    let json = json!({
        "model": model.tag(),
        "params": model.record(),
        "what": format!("{what:?}"),
        "result": value,
        "version": blockcount::VERSION,
    });
    Ok(Artifact { json, csv })
}
