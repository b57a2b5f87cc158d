use std::path::Path;

use blockcount::closedform::ModelTag;
use blockcount::measures::{Interior, LambdaMeasure, MeasureSpec, ModelParams, MoranParams};
use clap::Args;
use serde_json::{json, Value};

use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// `moran`, or a measure file (JSON with `m0`, `m1`, `interior`).
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta1: f64,
    /// Moran population size.
    #[arg(long = "N", default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub s: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub u0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub u1: f64,
}

#[derive(Debug, Clone)]
pub enum Model {
    Moran(MoranParams),
    Lambda {
        measure: LambdaMeasure,
        params: ModelParams,
        spec: Value,
    },
}

impl Model {
    pub fn resolve(args: &ModelArgs) -> Result<Model, CliError> {
        if args.model.eq_ignore_ascii_case("moran") {
            let p = MoranParams::new(args.n, args.s, args.u0, args.u1).map_err(CliError::Spec)?;
            return Ok(Model::Moran(p));
        }
        let path = Path::new(&args.model);
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::spec(format!("cannot read model file {}: {e}", path.display()))
        })?;
        let measure = MeasureSpec::from_json(&text).map_err(CliError::Spec)?;
        let spec = serde_json::to_value(measure.to_spec().map_err(CliError::Spec)?)
            .map_err(|e| CliError::spec(e.to_string()))?;
        let params =
            ModelParams::new(args.sigma, args.theta0, args.theta1).map_err(CliError::Spec)?;
        Ok(Model::Lambda {
            measure,
            params,
            spec,
        })
    }

    /// Resolved parameter record embedded in every artifact.
    pub fn record(&self) -> Value {
        match self {
            Model::Moran(p) => json!({ "N": p.n, "s": p.s, "u0": p.u0, "u1": p.u1 }),
            Model::Lambda { params, spec, .. } => json!({
                "sigma": params.sigma,
                "theta0": params.theta0,
                "theta1": params.theta1,
                "measure": spec,
            }),
        }
    }

    pub fn tag(&self) -> ModelTag {
        match self {
            Model::Moran(_) => ModelTag::Moran,
            Model::Lambda { measure, .. } => classify(measure),
        }
    }
}

pub fn classify(m: &LambdaMeasure) -> ModelTag {
    match (&m.interior, m.m0 > 0.0, m.m1 > 0.0) {
        (Interior::Zero, false, false) => ModelTag::CrowKimura,
        (Interior::Zero, true, false) => ModelTag::WrightFisher,
        (Interior::Zero, false, true) => ModelTag::Star,
        (Interior::Uniform { .. }, false, false) => ModelTag::BolthausenSznitman,
        (&Interior::Beta { a, b, mass }, false, false) if a == 3.0 && b == 1.0 && mass == 1.0 => {
            ModelTag::Beta31
        }
        _ => ModelTag::General,
    }
}
