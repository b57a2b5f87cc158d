//! Cross-check matrix: recursion vs closed form vs simulation vs master equations.

use blockcount::closedform::{
    beta31_pgf, bs_rho, moran_closed, star_closed, verify_master_equation, wf_closed,
    MasterEquation, ModelTag, PgfEvaluator,
};
use blockcount::duality::{ancestral_type_from_tails, kimura_fixation, solve_w_moments};
use blockcount::geomfix::check_geometric;
use blockcount::measures::{LambdaMeasure, ModelParams, MoranParams};
use blockcount::recursions::{
    geometric_pmf, solve_lambda_truncated, solve_moran, solve_moran_nullspace, solve_star,
    SolverTag,
};
use blockcount::simulate::{occupancy, simulate_moran_l};
use clap::ValueEnum;
use serde_json::{json, Value};

use crate::Artifact;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Quick,
    Full,
}

struct Check {
    name: String,
    value: f64,
    tol: f64,
    error: Option<String>,
}

impl Check {
    fn passed(&self) -> bool {
        self.error.is_none() && self.value <= self.tol
    }
}

fn check(name: impl Into<String>, tol: f64, f: impl FnOnce() -> blockcount::Result<f64>) -> Check {
    let name = name.into();
    match f() {
        Ok(value) if value.is_finite() => Check {
            name,
            value,
            tol,
            error: None,
        },
        Ok(value) => Check {
            name,
            value,
            tol,
            error: Some("non-finite".into()),
        },
        Err(e) => Check {
            name,
            value: f64::NAN,
            tol,
            error: Some(e.to_string()),
        },
    }
}

fn z_grid() -> Vec<f64> {
    (0..20).map(|i| 0.05 + 0.9 * i as f64 / 19.0).collect()
}

fn geometric_pgf(rho: f64) -> PgfEvaluator {
    PgfEvaluator::new(
        ModelTag::BolthausenSznitman,
        Value::Null,
        1.0 - rho,
        move |z| (1.0 - rho) * z / (1.0 - rho * z),
    )
    .with_derivative(move |z| (1.0 - rho) / ((1.0 - rho * z) * (1.0 - rho * z)))
}

fn moran_checks(out: &mut Vec<Check>, grid: &[(usize, f64, f64, f64)]) {
    for &(n, s, u0, u1) in grid {
        let tag = format!("N={n},s={s},u0={u0},u1={u1}");
        out.push(check(
            format!("moran shooting vs nullspace [{tag}]"),
            1e-9,
            || {
                let p = MoranParams::new(n, s, u0, u1)?;
                Ok(solve_moran(&p)?.sup_distance(&solve_moran_nullspace(&p)?))
            },
        ));
        out.push(check(
            format!("moran shooting vs closed form [{tag}]"),
            1e-9,
            || {
                let p = MoranParams::new(n, s, u0, u1)?;
                Ok(solve_moran(&p)?.sup_distance(&moran_closed(&p)?.pmf))
            },
        ));
        out.push(check(format!("moran ode residual [{tag}]"), 1e-6, || {
            let p = MoranParams::new(n, s, u0, u1)?;
            let cf = moran_closed(&p)?;
            let dummy = ModelParams::new(s, u0, u1)?;
            verify_master_equation(
                &cf.pgf,
                &LambdaMeasure::zero(),
                &dummy,
                &MasterEquation::MoranOde(p),
                &z_grid(),
            )
        }));
    }
}

fn kingman_checks(out: &mut Vec<Check>, values: &[f64]) {
    for &sigma in values {
        for &t0 in values {
            for &t1 in values {
                let tag = format!("sigma={sigma},theta0={t0},theta1={t1}");
                out.push(check(
                    format!("kingman truncated vs closed form [{tag}]"),
                    1e-8,
                    || {
                        let params = ModelParams::new(sigma, t0, t1)?;
                        let m = LambdaMeasure::kingman(2.0);
                        let pmf = solve_lambda_truncated(&m, &params, 64, 1e-12)?;
                        Ok(pmf.sup_distance(&wf_closed(2.0, &params)?.pmf))
                    },
                ));
                out.push(check(format!("kingman ode residual [{tag}]"), 1e-6, || {
                    let params = ModelParams::new(sigma, t0, t1)?;
                    let cf = wf_closed(2.0, &params)?;
                    verify_master_equation(
                        &cf.pgf,
                        &LambdaMeasure::kingman(2.0),
                        &params,
                        &MasterEquation::WfOde,
                        &z_grid(),
                    )
                }));
            }
        }
    }
}

fn bs_checks(out: &mut Vec<Check>) {
    let params = || ModelParams::new(1.0, 0.5, 0.5);
    out.push(check("bs truncated vs geometric", 1e-6, || {
        let params = params()?;
        let rho = bs_rho(&params)?;
        let pmf = solve_lambda_truncated(&LambdaMeasure::uniform(1.0), &params, 64, 1e-12)?;
        Ok(pmf.sup_distance(&geometric_pmf(rho, Some(pmf.len()), SolverTag::Geometric)?))
    }));
    out.push(check("bs geometric criterion", 1e-8, || {
        let params = params()?;
        let rho = bs_rho(&params)?;
        let r = check_geometric(&LambdaMeasure::uniform(1.0), &params, rho, 50, 1e-8)?;
        Ok(r.cg3a.iter().fold(r.cg3b.abs(), |m, v| m.max(v.abs())))
    }));
    out.push(check("bs carleman residual", 1e-6, || {
        let params = params()?;
        let pgf = geometric_pgf(bs_rho(&params)?);
        verify_master_equation(
            &pgf,
            &LambdaMeasure::uniform(1.0),
            &params,
            &MasterEquation::Carleman,
            &z_grid(),
        )
    }));
}

fn star_checks(out: &mut Vec<Check>) {
    out.push(check(
        "star closed form vs recursion (theta1=0)",
        1e-12,
        || {
            let params = ModelParams::new(1.0, 0.5, 0.0)?;
            let closed = star_closed(1.0, &params)?;
            let pmf = solve_star(&params, 1.0, closed.pmf.len())?;
            Ok(pmf.sup_distance(&closed.pmf))
        },
    ));
    out.push(check(
        "star closed form vs recursion (theta1=0.5)",
        1e-7,
        || {
            let params = ModelParams::new(1.0, 0.5, 0.5)?;
            let closed = star_closed(1.0, &params)?;
            let pmf = solve_star(&params, 1.0, 64)?;
            Ok(pmf.sup_distance(&closed.pmf))
        },
    ));
    out.push(check("star dess residual", 1e-6, || {
        let params = ModelParams::new(1.0, 0.5, 0.5)?;
        let closed = star_closed(1.0, &params)?;
        verify_master_equation(
            &closed.pgf,
            &LambdaMeasure::star(1.0),
            &params,
            &MasterEquation::StarDess,
            &z_grid(),
        )
    }));
}

fn beta31_checks(out: &mut Vec<Check>) {
    out.push(check("beta(3,1) ode vs truncated", 1e-6, || {
        let params = ModelParams::new(1.0, 0.5, 0.5)?;
        let sol = beta31_pgf(&params)?;
        let m = LambdaMeasure::beta(3.0, 1.0, 1.0)?;
        Ok(solve_lambda_truncated(&m, &params, 64, 1e-12)?.sup_distance(&sol.pmf))
    }));
}

fn duality_checks(out: &mut Vec<Check>) {
    out.push(check("moments without coalescence", 1e-10, || {
        let params = ModelParams::new(1.0, 1.0, 1.0)?;
        let seq = solve_w_moments(&LambdaMeasure::zero(), &params, 10, 1e-13)?;
        let q = (3.0 - 5f64.sqrt()) / 2.0;
        Ok(seq
            .w
            .iter()
            .enumerate()
            .map(|(n, w)| (w - q.powi(n as i32)).abs())
            .fold(0.0, f64::max))
    }));
    out.push(check(
        "kimura fixation vs conditioned poisson",
        1e-12,
        || {
            let params = ModelParams::new(1.0, 0.0, 0.0)?;
            let pmf = wf_closed(2.0, &params)?.pmf;
            let mut worst = 0.0f64;
            for &x in &[0.1, 0.3, 0.5, 0.9] {
                worst = worst.max(
                    (kimura_fixation(x, 1.0, 2.0)? - ancestral_type_from_tails(&pmf, x)).abs(),
                );
            }
            Ok(worst)
        },
    ));
}

fn simulation_checks(out: &mut Vec<Check>, events: u64, seed: u64) {
    out.push(check(
        format!("moran occupancy total variation ({events} events)"),
        0.01,
        || {
            let p = MoranParams::new(10, 0.5, 0.1, 0.1)?;
            let path = simulate_moran_l(&p, 1, events, seed)?;
            Ok(occupancy(&path, 0.1)?.total_variation(&solve_moran(&p)?))
        },
    ));
}

pub fn run(suite: Suite, seed: u64) -> (Artifact, bool) {
    let mut checks = Vec::new();
    match suite {
        Suite::Quick => {
            moran_checks(&mut checks, &[(10, 0.5, 0.1, 0.1), (25, 1.0, 0.05, 0.2)]);
            kingman_checks(&mut checks, &[1.0]);
            simulation_checks(&mut checks, 200_000, seed);
        }
        Suite::Full => {
            let mut grid = Vec::new();
            for &n in &[5, 20, 50] {
                for &s in &[0.1, 1.0] {
                    for &(u0, u1) in &[(0.0, 0.0), (0.1, 0.3), (0.5, 0.05)] {
                        grid.push((n, s, u0, u1));
                    }
                }
            }
            moran_checks(&mut checks, &grid);
            kingman_checks(&mut checks, &[0.5, 1.0, 2.0]);
            simulation_checks(&mut checks, 1_000_000, seed);
        }
    }
    bs_checks(&mut checks);
    star_checks(&mut checks);
    beta31_checks(&mut checks);
    duality_checks(&mut checks);

    let passed = checks.iter().all(Check::passed);
    let rows: Vec<Value> = checks
        .iter()
        .map(|c| {
            json!({
                "check": c.name,
                "value": c.value,
                "tol": c.tol,
                "passed": c.passed(),
                "error": c.error,
            })
        })
        .collect();
    let mut csv = String::from("check,value,tol,passed\n");
    for c in &checks {
        csv.push_str(&format!(
            "\"{}\",{:e},{:e},{}\n",
            c.name,
            c.value,
            c.tol,
            c.passed()
        ));
    }
    let json = json!({
        "suite": format!("{suite:?}").to_lowercase(),
        "seed": seed,
        "passed": passed,
        "checks": rows,
        "version": blockcount::VERSION,
    });
    (Artifact { json, csv }, passed)
}
