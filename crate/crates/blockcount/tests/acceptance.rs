//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use blockcount::closedform::{
    beta31_pgf, bs_rho, bs_rho_lambert, moran_closed, moran_moment_residual_pmf, star_closed,
    star_p1, verify_master_equation, wf_closed, wf_moment_residual_pmf, MasterEquation, ModelTag,
    PgfEvaluator,
};
use blockcount::duality::{
    ancestral_type_from_tails, bs_absorption, bs_w_generating, kimura_fixation, moran_fixation,
    solve_w_moments,
};
use blockcount::geomfix::{
    apply_s, build_discrete_fixed_point, check_geometric, proof_sum_identity,
    pushforward_to_lambda, rho_star, AtomicMeasure, SMeasure,
};
use blockcount::measures::{LambdaMeasure, ModelParams, MoranParams};
use blockcount::recursions::{
    geometric_pmf, solve_lambda_truncated, solve_moran, solve_moran_nullspace, solve_star,
    solve_star_with, SolverTag, StarMethod, StationaryPmf,
};
use blockcount::simulate::{
    moran_x_fixation_frequency, occupancy, simulate_killed_asg, simulate_moran_l,
};
use blockcount::specfun::{
    appell_f1, appell_f1_integral, gauss_2f1, gauss_2f1_integral, integral_i, integral_i_appell,
    integral_i_gauss, kummer_1f1, kummer_1f1_integral,
};
use blockcount::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn within(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() < limit
}

fn poisson_conditioned(lambda: f64, len: usize) -> StationaryPmf {
    let mut w = Vec::with_capacity(len);
    let mut t = 1.0;
    for n in 1..=len {
        t *= lambda / n as f64;
        w.push(t);
    }
    let norm = lambda.exp_m1();
    let probs = w.iter().map(|x| x / norm).collect();
    StationaryPmf {
        probs,
        truncation_k: len,
        residual: 0.0,
        solver: SolverTag::Geometric,
        warnings: vec![],
    }
}

fn geometric_pgf(rho: f64) -> PgfEvaluator {
    PgfEvaluator::new(
        ModelTag::BolthausenSznitman,
        serde_json::Value::Null,
        1.0 - rho,
        move |z| (1.0 - rho) * z / (1.0 - rho * z),
    )
    .with_derivative(move |z| (1.0 - rho) / ((1.0 - rho * z) * (1.0 - rho * z)))
}

fn moran_grid() -> Vec<MoranParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..50)
        .map(|_| {
            let n = rng.gen_range(2..=50);
            let s = rng.gen_range(0.05..2.0);
            let u0 = if rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(0.0..0.5)
            };
            let u1 = if rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(0.0..0.5)
            };
            MoranParams::new(n, s, u0, u1).unwrap()
        })
        .collect()
}

fn kingman_grid() -> Vec<ModelParams> {
    let v = [0.5, 1.0, 2.0];
    let mut out = Vec::new();
    for &s in &v {
        for &t0 in &v {
            for &t1 in &v {
                out.push(ModelParams::new(s, t0, t1).unwrap());
            }
        }
    }
    out
}

fn c1_moran_triple() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for p in moran_grid() {
        let a = solve_moran(&p)?;
        let b = solve_moran_nullspace(&p)?;
        let c = moran_closed(&p)?.pmf;
        worst = worst
            .max(a.sup_distance(&b))
            .max(a.sup_distance(&c))
            .max(b.sup_distance(&c));
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-9 && within(t, 5.0),
        format!(
            "max pairwise sup {worst:.2e} (tol 1e-9), {:.2}s (< 5s)",
            t.as_secs_f64()
        ),
    )
}

fn c2_moran_simulation() -> Result<Outcome> {
    let start = Instant::now();
    let p = MoranParams::new(10, 0.5, 0.1, 0.1)?;
    let path = simulate_moran_l(&p, 1, 1_000_000, 2024)?;
    let tv = occupancy(&path, 0.0)?.total_variation(&solve_moran(&p)?);
    let t = start.elapsed();
    outcome(
        tv <= 0.01 && within(t, 10.0),
        format!("TV {tv:.2e} (tol 1e-2), {:.2}s (< 10s)", t.as_secs_f64()),
    )
}

fn c3_kingman() -> Result<Outcome> {
    let m = LambdaMeasure::kingman(2.0);
    let mut worst: f64 = 0.0;
    for params in kingman_grid() {
        let pmf = solve_lambda_truncated(&m, &params, 64, 1e-13)?;
        worst = worst.max(pmf.sup_distance(&wf_closed(2.0, &params)?.pmf));
    }
    let mut poisson: f64 = 0.0;
    for sigma in [0.5, 1.0, 2.0] {
        let params = ModelParams::new(sigma, 0.0, 0.0)?;
        let pmf = solve_lambda_truncated(&m, &params, 64, 1e-14)?;
        poisson = poisson.max(pmf.sup_distance(&poisson_conditioned(sigma, pmf.len())));
    }
    outcome(
        worst <= 1e-8 && poisson <= 1e-12,
        format!(
            "grid sup {worst:.2e} (tol 1e-8), conditioned Poisson sup {poisson:.2e} (tol 1e-12)"
        ),
    )
}

fn c4_moran_to_kingman() -> Result<Outcome> {
    let (sigma, t0, t1) = (1.0, 0.5, 0.5);
    let limit = wf_closed(2.0, &ModelParams::new(sigma, t0, t1)?)?.pmf;
    let mut d = Vec::new();
    for n in [100usize, 1000, 10000] {
        let nf = n as f64;
        let p = MoranParams::new(n, sigma / nf, t0 / nf, t1 / nf)?;
        d.push(moran_closed(&p)?.pmf.sup_distance(&limit));
    }
    outcome(
        d[0] > d[1] && d[1] > d[2],
        format!("sup distances {:.2e} > {:.2e} > {:.2e}", d[0], d[1], d[2]),
    )
}

fn c5_bolthausen_sznitman() -> Result<Outcome> {
    let params = ModelParams::new(1.0, 0.5, 0.5)?;
    let rho = bs_rho(&params)?;
    let pmf = solve_lambda_truncated(&LambdaMeasure::uniform(1.0), &params, 64, 1e-13)?;
    let sup = pmf.sup_distance(&geometric_pmf(rho, Some(pmf.len()), SolverTag::Geometric)?);
    let rep = check_geometric(&LambdaMeasure::uniform(1.0), &params, rho, 50, 1e-8)?;
    let resid = rep.cg3a.iter().fold(rep.cg3b.abs(), |m, v| m.max(v.abs()));
    let mut lambert: f64 = 0.0;
    for &(s, a, b) in &[
        (1.0, 0.0, 0.0),
        (2.0, 0.0, 0.0),
        (1.0, 0.0, 0.7),
        (0.5, 0.0, 2.0),
        (1.0, 0.7, 0.0),
        (3.0, 0.2, 0.0),
    ] {
        let p = ModelParams::new(s, a, b)?;
        let w = bs_rho_lambert(&p).expect("Lambert form applies");
        lambert = lambert.max((w - bs_rho(&p)?).abs());
    }
    outcome(
        sup <= 1e-6 && resid <= 1e-8 && rep.passed && lambert <= 1e-12,
        format!(
            "geometric sup {sup:.2e} at K={} (tol 1e-6), criterion residual {resid:.2e} (tol 1e-8), Lambert {lambert:.2e} (tol 1e-12)",
            pmf.truncation_k
        ),
    )
}

fn c6_star() -> Result<Outcome> {
    let (m1, sigma, t0) = (1.0, 1.0, 0.5);
    let params = ModelParams::new(sigma, t0, 0.0)?;
    let pmf = solve_star(&params, m1, 200)?;
    let (x, c) = (sigma / (sigma + t0), 1.0 + m1 / (sigma + t0));
    let mut a = 1.0;
    let mut closed: f64 = 0.0;
    for n in 1..=pmf.len() {
        let next = a * x * n as f64 / (c + n as f64 - 1.0);
        closed = closed.max((pmf.p(n) - (a - next)).abs());
        a = next;
    }
    let params = ModelParams::new(sigma, t0, 0.5)?;
    let cf = star_closed(m1, &params)?;
    let forward = solve_star_with(
        &params,
        m1,
        200,
        Some(star_p1(m1, &params)?),
        StarMethod::Auto,
    )?;
    let mut pgf: f64 = 0.0;
    for i in 1..20 {
        let z = i as f64 / 20.0;
        pgf = pgf.max((cf.pgf.evaluate(z) - forward.pgf(z)).abs());
    }
    let at_one = (cf.pgf.evaluate(1.0 - 1e-10) - 1.0).abs();
    outcome(
        closed <= 1e-12 && pgf <= 1e-7 && at_one <= 1e-8,
        format!("theta1=0 sup {closed:.2e} (tol 1e-12), theta1=0.5 pgf {pgf:.2e} (tol 1e-7), |g(1)-1| {at_one:.2e} (tol 1e-8)"),
    )
}

fn c7_factorial_moments() -> Result<Outcome> {
    let mut moran: f64 = 0.0;
    for p in moran_grid() {
        let pmf = solve_moran(&p)?;
        moran = moran.max(moran_moment_residual_pmf(&p, &pmf, 10.min(p.n)));
    }
    let mut wf: f64 = 0.0;
    for params in kingman_grid() {
        let pmf = solve_lambda_truncated(&LambdaMeasure::kingman(2.0), &params, 64, 1e-13)?;
        wf = wf.max(wf_moment_residual_pmf(2.0, &params, &pmf, 10));
    }
    outcome(
        moran <= 1e-8 && wf <= 1e-8,
        format!("Moran residual {moran:.2e}, Kingman residual {wf:.2e} (tol 1e-8)"),
    )
}

fn c8_duality() -> Result<Outcome> {
    let start = Instant::now();
    let params = ModelParams::new(1.0, 1.0, 1.0)?;
    let m = LambdaMeasure::kingman(2.0);
    let w = solve_w_moments(&m, &params, 5, 1e-13)?.w;
    let reps = 100_000u64;
    let mut worst_z: f64 = 0.0;
    for n in 1..=5 {
        let hat = simulate_killed_asg(&m, &params, n, reps, 7 + n as u64)?;
        let se = (w[n] * (1.0 - w[n]) / reps as f64).sqrt();
        worst_z = worst_z.max((hat - w[n]).abs() / se);
    }
    let zero = solve_w_moments(&LambdaMeasure::zero(), &params, 10, 1e-14)?.w;
    let q = (3.0 - 5f64.sqrt()) / 2.0;
    let exact = zero
        .iter()
        .enumerate()
        .map(|(n, v)| (v - q.powi(n as i32)).abs())
        .fold(0.0, f64::max);
    let t = start.elapsed();
    outcome(
        worst_z <= 3.0 && exact <= 1e-10 && within(t, 60.0),
        format!("max |z| {worst_z:.2} (tol 3), zero-measure error {exact:.2e} (tol 1e-10), {:.2}s (< 60s)", t.as_secs_f64()),
    )
}

fn c9_generating_function() -> Result<Outcome> {
    let params = ModelParams::new(1.0, 1.0, 1.0)?;
    let taylor = bs_w_generating(&params, &[])?.taylor;
    let w = solve_w_moments(&LambdaMeasure::uniform(1.0), &params, 10, 1e-13)?.w;
    let err = (1..=10)
        .map(|n| (taylor[n - 1] - w[n]).abs())
        .fold(0.0, f64::max);
    outcome(
        err <= 1e-5,
        format!("max |Taylor - moment| {err:.2e} for n <= 10 (tol 1e-5)"),
    )
}

fn c10_fixed_point() -> Result<Outcome> {
    let mu = build_discrete_fixed_point(0.5, 0.3, 0.1, None)?;
    let SMeasure::Atomic(image) = apply_s(&SMeasure::Atomic(mu.clone()), 0.5)? else {
        unreachable!("atomic input gives atomic output")
    };
    let kmax = mu.truncation_k as i64;
    let mass = |m: &AtomicMeasure, k: i64| m.atoms.iter().find(|a| a.k == k).map(|a| a.mass);
    let mut fixed: f64 = 0.0;
    for a in mu.atoms.iter().filter(|a| a.k.abs() < kmax) {
        let b = mass(&image, a.k).unwrap_or(0.0);
        fixed = fixed.max((a.mass - b).abs() / a.mass);
    }
    let params = ModelParams::new(1.0, 0.2, 0.2)?;
    let (x0, m0) = (0.3, 0.05);
    let rho = rho_star(x0, m0, &params)?;
    let mu = build_discrete_fixed_point(rho, x0, m0, None)?;
    let (sum, closed) = proof_sum_identity(&mu, rho, x0, m0);
    let identity = (sum - closed).abs();
    let lambda = pushforward_to_lambda(&mu, rho)?;
    let pmf = solve_lambda_truncated(&lambda, &params, 64, 1e-13)?;
    let sup = pmf.sup_distance(&geometric_pmf(rho, Some(pmf.len()), SolverTag::Geometric)?);
    outcome(
        fixed <= 1e-12 && sup <= 1e-6 && identity <= 1e-10,
        format!(
            "fixed-point rel {fixed:.2e} (tol 1e-12), rho*={rho:.6} geometric sup {sup:.2e} (tol 1e-6), sum identity {identity:.2e} (tol 1e-10)"
        ),
    )
}

fn c11_master_equations() -> Result<Outcome> {
    let grid: Vec<f64> = (0..20).map(|i| 0.025 + 0.95 * i as f64 / 19.0).collect();
    let mut worst = [0.0f64; 4];
    for &(n, s, u0, u1) in &[
        (10, 0.5, 0.1, 0.1),
        (30, 1.5, 0.02, 0.3),
        (5, 0.2, 0.0, 0.4),
    ] {
        let p = MoranParams::new(n, s, u0, u1)?;
        let cf = moran_closed(&p)?;
        let dummy = ModelParams::new(s, u0, u1)?;
        let r = verify_master_equation(
            &cf.pgf,
            &LambdaMeasure::zero(),
            &dummy,
            &MasterEquation::MoranOde(p),
            &grid,
        )?;
        worst[0] = worst[0].max(r);
    }
    for params in [
        ModelParams::new(1.0, 0.5, 0.5)?,
        ModelParams::new(2.0, 1.0, 0.5)?,
    ] {
        let cf = wf_closed(2.0, &params)?;
        let r = verify_master_equation(
            &cf.pgf,
            &LambdaMeasure::kingman(2.0),
            &params,
            &MasterEquation::WfOde,
            &grid,
        )?;
        worst[1] = worst[1].max(r);
        let cf = star_closed(1.0, &params)?;
        let r = verify_master_equation(
            &cf.pgf,
            &LambdaMeasure::star(1.0),
            &params,
            &MasterEquation::StarDess,
            &grid,
        )?;
        worst[2] = worst[2].max(r);
        let pgf = geometric_pgf(bs_rho(&params)?);
        let r = verify_master_equation(
            &pgf,
            &LambdaMeasure::uniform(1.0),
            &params,
            &MasterEquation::Carleman,
            &grid,
        )?;
        worst[3] = worst[3].max(r);
    }
    let all = worst.iter().all(|r| *r <= 1e-6);
    outcome(
        all,
        format!(
            "Moran {:.2e}, Wright-Fisher {:.2e}, star {:.2e}, Carleman {:.2e} (tol 1e-6)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn c12_beta31() -> Result<Outcome> {
    let m = LambdaMeasure::beta(3.0, 1.0, 1.0)?;
    let mut worst: f64 = 0.0;
    for params in [
        ModelParams::new(1.0, 0.5, 0.5)?,
        ModelParams::new(2.0, 0.3, 1.0)?,
        ModelParams::new(0.5, 1.0, 0.2)?,
    ] {
        let ode = beta31_pgf(&params)?.pmf;
        worst = worst.max(solve_lambda_truncated(&m, &params, 64, 1e-13)?.sup_distance(&ode));
    }
    outcome(
        worst <= 1e-6,
        format!("ODE vs truncated sup {worst:.2e} (tol 1e-6)"),
    )
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn c13_special_functions() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = [0.0f64; 5];
    for _ in 0..100 {
        let a = rng.gen_range(-2.0..3.0);
        let b = rng.gen_range(0.2..3.0);
        let c = b + rng.gen_range(0.2..3.0);
        let z = rng.gen_range(-0.9..0.8);
        worst[0] = worst[0].max(rel(
            gauss_2f1(a, b, c, z)?.value,
            gauss_2f1_integral(a, b, c, z)?,
        ));

        let a = rng.gen_range(0.2..3.0);
        let c = a + rng.gen_range(0.2..3.0);
        let z = rng.gen_range(-5.0..5.0);
        worst[1] = worst[1].max(rel(
            kummer_1f1(a, c, z)?.value,
            kummer_1f1_integral(a, c, z)?,
        ));

        let a = rng.gen_range(0.2..3.0);
        let (b, c) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let d = a + rng.gen_range(0.2..3.0);
        let (z, w) = (rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7));
        worst[2] = worst[2].max(rel(
            appell_f1(a, b, c, d, z, w)?.value,
            appell_f1_integral(a, b, c, d, z, w)?,
        ));

        let alpha = rng.gen_range(0.2..3.0);
        let beta = rng.gen_range(0.2..3.0);
        let gamma = rng.gen_range(0.2..3.0);
        let nu = rng.gen_range(0.3..4.0);
        worst[3] = worst[3].max(rel(
            integral_i(alpha, beta, gamma, nu, 1.0)?,
            integral_i_gauss(alpha, beta, gamma, nu)?,
        ));
        let zmax = nu / (nu * nu + 2.0 * nu).sqrt();
        let z = zmax * rng.gen_range(0.05..0.9);
        worst[4] = worst[4].max(rel(
            integral_i(alpha, beta, gamma, nu, z)?,
            integral_i_appell(alpha, beta, gamma, nu, z)?,
        ));
    }
    let all = worst.iter().all(|r| *r <= 1e-9);
    outcome(
        all,
        format!(
            "2F1 {:.1e}, 1F1 {:.1e}, F1 {:.1e}, I(z=1) {:.1e}, I(z) {:.1e} (tol 1e-9)",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn c14_absorption() -> Result<Outcome> {
    let mut bs: f64 = 0.0;
    for sigma in [0.3, 1.0, 2.5] {
        let rho = bs_rho(&ModelParams::new(sigma, 0.0, 0.0)?)?;
        let g = geometric_pgf(rho);
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            bs = bs.max((bs_absorption(x, sigma)? - g.evaluate(1.0 - x)).abs());
        }
    }
    let mut kimura: f64 = 0.0;
    for &(sigma, m0) in &[(1.0, 2.0), (0.5, 1.0), (2.0, 4.0)] {
        let params = ModelParams::new(sigma, 0.0, 0.0)?;
        let pmf = poisson_conditioned(2.0 * sigma / m0, 80);
        let solved = solve_lambda_truncated(&LambdaMeasure::kingman(m0), &params, 64, 1e-14)?;
        for i in 1..20 {
            let x = i as f64 / 20.0;
            let k = kimura_fixation(x, sigma, m0)?;
            kimura = kimura.max((k - ancestral_type_from_tails(&pmf, x)).abs());
            kimura = kimura.max((k - ancestral_type_from_tails(&solved, x)).abs());
        }
    }
    let reps = 100_000u64;
    let mut worst_z: f64 = 0.0;
    for &(n, s, k) in &[(10, 0.5, 3), (20, 0.2, 1)] {
        let exact = moran_fixation(k, n, s)?;
        let hat = moran_x_fixation_frequency(&MoranParams::new(n, s, 0.0, 0.0)?, k, reps, 99)?;
        let se = (exact * (1.0 - exact) / reps as f64).sqrt();
        worst_z = worst_z.max((hat - exact).abs() / se);
    }
    outcome(
        bs <= 1e-13 && kimura <= 1e-12 && worst_z <= 3.0,
        format!("BS {bs:.2e} (tol 1e-13), Kimura {kimura:.2e} (tol 1e-12), Moran fixation max |z| {worst_z:.2} (tol 3)"),
    )
}

fn c15_negative_controls() -> Result<Outcome> {
    let params = ModelParams::new(1.0, 0.5, 0.5)?;
    let models = [
        ("Kingman", LambdaMeasure::kingman(2.0)),
        ("star", LambdaMeasure::star(1.0)),
        ("beta(2,1)", LambdaMeasure::beta(2.0, 1.0, 1.0)?),
        ("beta(1,2)", LambdaMeasure::beta(1.0, 2.0, 1.0)?),
        ("beta(3,1)", LambdaMeasure::beta(3.0, 1.0, 1.0)?),
    ];
    let mut accepted = Vec::new();
    let mut weakest = f64::INFINITY;
    for (name, m) in &models {
        for i in 1..=99 {
            let rho = i as f64 / 100.0;
            let rep = check_geometric(m, &params, rho, 20, 1e-8)?;
            if rep.passed {
                accepted.push(format!("{name} at rho={rho}"));
            }
            if rep.m0_zero && rep.m1_zero {
                let r = rep
                    .cg3a
                    .iter()
                    .fold(rep.cg3b.abs(), |acc, v| acc.max(v.abs()));
                weakest = weakest.min(r);
            }
        }
    }
    outcome(
        accepted.is_empty(),
        format!(
            "{} of 495 accepted; smallest beta residual {weakest:.2e} (tol 1e-8)",
            accepted.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 15] = [
        ("Moran triple agreement", c1_moran_triple),
        ("Moran simulation", c2_moran_simulation),
        ("Kingman", c3_kingman),
        ("Moran to Kingman convergence", c4_moran_to_kingman),
        ("Bolthausen-Sznitman geometry", c5_bolthausen_sznitman),
        ("Star-shaped", c6_star),
        ("Factorial moments", c7_factorial_moments),
        ("Duality", c8_duality),
        ("Generating function", c9_generating_function),
        ("Fixed-point pipeline", c10_fixed_point),
        ("Master-equation residuals", c11_master_equations),
        ("beta(3,1)", c12_beta31),
        ("Special functions", c13_special_functions),
        ("Absorption identities", c14_absorption),
        ("Negative controls", c15_negative_controls),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (passed, detail) = match run() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "[{}] {:>2}. {name}: {detail}",
            if passed { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
