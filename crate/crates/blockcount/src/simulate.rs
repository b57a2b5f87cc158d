//! Exact jump-chain simulators for the block counting processes, the
//! killed ASG and the Moran frequency chain.
//!
//! Random numbers come from ChaCha12 seeded with `seed`; replicate `r`
//! uses stream `r` of the same key, so replicates never share draws.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{LambdaMeasure, ModelParams, MoranParams};
use crate::recursions::StationaryPmf;

pub const RNG_ALGORITHM: &str = "ChaCha12";
/// Exit rates above this abort a Λ simulation.
pub const MAX_EXIT_RATE: f64 = 1e12;
/// States up to this cap keep their merger rates cached.
pub const RATE_CACHE_CAP: usize = 10_000;
/// Event budget per killed-ASG replicate.
pub const KILLED_EVENT_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PathModel {
    MoranL,
    LambdaL,
    KilledAsg,
    MoranX,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum State {
    Count(usize),
    /// The cemetery `Δ` of the killed ASG.
    Cemetery,
}

impl State {
    pub fn count(self) -> Option<usize> {
        match self {
            State::Count(n) => Some(n),
            State::Cemetery => None,
        }
    }
}

impl std::fmt::Display for State {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            State::Count(n) => write!(f, "{n}"),
            State::Cemetery => f.write_str("D"),
        }
    }
}

/// `holding_times[i]` is the sojourn in `states[i]`. The last sojourn is
/// the one in progress when the event budget ran out, or infinite if the
/// final state is absorbing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpPath {
    pub states: Vec<State>,
    pub holding_times: Vec<f64>,
    pub seed: u64,
    pub rng: &'static str,
    pub model_tag: PathModel,
}

impl JumpPath {
    pub fn n_jumps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn is_absorbed(&self) -> bool {
        self.holding_times.last().is_some_and(|t| t.is_infinite())
    }

    pub fn final_state(&self) -> State {
        *self.states.last().expect("paths hold at least one state")
    }

    /// CSV with columns `state,holding_time`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("state,holding_time\n");
        for (st, t) in self.states.iter().zip(&self.holding_times) {
            let _ = writeln!(s, "{st},{t:e}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyEstimate {
    pub weights: BTreeMap<State, f64>,
    pub total_time: f64,
    pub n_events: usize,
}

impl OccupancyEstimate {
    pub fn probability(&self, state: State) -> f64 {
        self.weights.get(&state).copied().unwrap_or(0.0) / self.total_time
    }

    /// Mean occupied count; the cemetery is ignored.
    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .filter_map(|(s, w)| s.count().map(|n| n as f64 * w))
            .sum::<f64>()
            / self.total_time
    }

    pub fn total_variation(&self, pmf: &StationaryPmf) -> f64 {
        let top = self
            .weights
            .keys()
            .filter_map(|s| s.count())
            .max()
            .unwrap_or(0)
            .max(pmf.len());
        let mut tv = (0..=top)
            .map(|n| (self.probability(State::Count(n)) - pmf.p(n)).abs())
            .sum::<f64>();
        tv += self.probability(State::Cemetery);
        0.5 * tv
    }

    /// CSV with columns `state,weight`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("state,weight\n");
        for (st, w) in &self.weights {
            let _ = writeln!(s, "{st},{w:e}");
        }
        s
    }
}

/// Time-weighted histogram after discarding the first `burn_in_fraction`
/// of the simulated time. An infinite final sojourn is left out.
pub fn occupancy(path: &JumpPath, burn_in_fraction: f64) -> Result<OccupancyEstimate> {
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(Error::InvalidParameter(format!(
            "burn-in fraction {burn_in_fraction} not in [0,1)"
        )));
    }
    if path.states.is_empty() {
        return Err(Error::EmptyPath);
    }
    let finite: Vec<(State, f64)> = path
        .states
        .iter()
        .zip(&path.holding_times)
        .filter(|(_, t)| t.is_finite())
        .map(|(s, t)| (*s, *t))
        .collect();
    let total: f64 = finite.iter().map(|(_, t)| t).sum();
    if finite.is_empty() || !(total > 0.0) {
        // absorbed at once: all mass on the absorbing state
        let mut weights = BTreeMap::new();
        weights.insert(path.final_state(), 1.0);
        return Ok(OccupancyEstimate {
            weights,
            total_time: 1.0,
            n_events: path.n_jumps(),
        });
    }
    let mut skip = burn_in_fraction * total;
    let mut weights = BTreeMap::new();
    for (s, t) in finite {
        let kept = if skip >= t {
            skip -= t;
            continue;
        } else {
            let k = t - skip;
            skip = 0.0;
            k
        };
        *weights.entry(s).or_insert(0.0) += kept;
    }
    let total_time = weights.values().sum();
    Ok(OccupancyEstimate {
        weights,
        total_time,
        n_events: path.n_jumps(),
    })
}

fn rng_for(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Picks index `i` with probability `w[i] / Σw` given a uniform on `[0, Σw)`.
fn pick(weights: &[f64], mut u: f64) -> usize {
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Runs a chain given a function returning `(target, rate)` lists.
fn run_chain<F>(
    start: State,
    max_events: u64,
    seed: u64,
    model_tag: PathModel,
    mut moves: F,
) -> Result<JumpPath>
where
    F: FnMut(State, &mut Vec<(State, f64)>) -> Result<()>,
{
    let mut rng = rng_for(seed, 0);
    let mut states = vec![start];
    let mut holding_times = Vec::new();
    let mut buf = Vec::new();
    let mut rates = Vec::new();
    let mut state = start;
    loop {
        buf.clear();
        moves(state, &mut buf)?;
        rates.clear();
        rates.extend(buf.iter().map(|(_, r)| *r));
        let total: f64 = rates.iter().sum();
        if !(total > 0.0) {
            holding_times.push(f64::INFINITY);
            break;
        }
        let hold: f64 = rng.sample::<f64, _>(Exp1) / total;
        holding_times.push(hold);
        if (states.len() - 1) as u64 >= max_events {
            break;
        }
        let u = rng.gen::<f64>() * total;
        state = buf[pick(&rates, u)].0;
        states.push(state);
    }
    Ok(JumpPath {
        states,
        holding_times,
        seed,
        rng: RNG_ALGORITHM,
        model_tag,
    })
}

/// Rates out of state `i` of `L^N`, pushed as `(target, rate)`.
fn moran_l_moves(p: &MoranParams, i: usize, out: &mut Vec<(State, f64)>) {
    let (n, nf, fi) = (p.n, p.n as f64, i as f64);
    if i < n {
        out.push((State::Count(i + 1), fi * (nf - fi) * p.s / nf));
    }
    if i >= 2 {
        out.push((
            State::Count(i - 1),
            fi * (fi - 1.0) / nf + (fi - 1.0) * p.u1 + p.u0,
        ));
        for j in 1..i - 1 {
            out.push((State::Count(j), p.u0));
        }
    }
}

pub fn simulate_moran_l(
    params: &MoranParams,
    start: usize,
    max_events: u64,
    seed: u64,
) -> Result<JumpPath> {
    if !(1..=params.n).contains(&start) {
        return Err(Error::InvalidParameter(format!(
            "start {start} not in [1, {}]",
            params.n
        )));
    }
    run_chain(
        State::Count(start),
        max_events,
        seed,
        PathModel::MoranL,
        |s, out| {
            moran_l_moves(params, s.count().unwrap_or(1), out);
            Ok(())
        },
    )
}

/// Merger rates `C(k,j)λ_{k,j}` cached per state.
struct RateCache<'a> {
    measure: &'a LambdaMeasure,
    cached: Vec<Option<Vec<f64>>>,
}

impl<'a> RateCache<'a> {
    fn new(measure: &'a LambdaMeasure) -> Self {
        RateCache {
            measure,
            cached: Vec::new(),
        }
    }

    fn with<R>(&mut self, k: usize, f: impl FnOnce(&[f64]) -> R) -> Result<R> {
        if k > RATE_CACHE_CAP {
            return Ok(f(&self.measure.merger_rates(k)?));
        }
        if self.cached.len() <= k {
            self.cached.resize(k + 1, None);
        }
        if self.cached[k].is_none() {
            self.cached[k] = Some(self.measure.merger_rates(k)?);
        }
        Ok(f(self.cached[k].as_deref().unwrap()))
    }
}

fn push_mergers(rates: &[f64], k: usize, out: &mut Vec<(State, f64)>) {
    for (j, &r) in rates.iter().enumerate().skip(2) {
        if r > 0.0 {
            out.push((State::Count(k - j + 1), r));
        }
    }
}

fn check_rate(out: &[(State, f64)]) -> Result<()> {
    let total: f64 = out.iter().map(|(_, r)| r).sum();
    if total > MAX_EXIT_RATE {
        return Err(Error::RateOverflow(total));
    }
    Ok(())
}

/// Rates out of `k` for `L^Λ`.
pub fn lambda_l_moves(
    measure: &LambdaMeasure,
    params: &ModelParams,
    k: usize,
) -> Result<Vec<(State, f64)>> {
    let mut out = Vec::new();
    let mut cache = RateCache::new(measure);
    lambda_moves_into(&mut cache, params, k, &mut out)?;
    Ok(out)
}

fn lambda_moves_into(
    cache: &mut RateCache,
    params: &ModelParams,
    k: usize,
    out: &mut Vec<(State, f64)>,
) -> Result<()> {
    let kf = k as f64;
    if params.sigma > 0.0 {
        out.push((State::Count(k + 1), kf * params.sigma));
    }
    cache.with(k, |r| push_mergers(r, k, out))?;
    if k >= 2 {
        if params.theta1 > 0.0 {
            out.push((State::Count(k - 1), (kf - 1.0) * params.theta1));
        }
        if params.theta0 > 0.0 {
            for l in 1..k {
                out.push((State::Count(k - l), params.theta0));
            }
        }
    }
    check_rate(out)
}

pub fn simulate_lambda_l(
    measure: &LambdaMeasure,
    params: &ModelParams,
    start: usize,
    max_events: u64,
    seed: u64,
) -> Result<JumpPath> {
    if start < 1 {
        return Err(Error::InvalidParameter("start must be at least 1".into()));
    }
    let mut cache = RateCache::new(measure);
    run_chain(
        State::Count(start),
        max_events,
        seed,
        PathModel::LambdaL,
        |s, out| lambda_moves_into(&mut cache, params, s.count().unwrap_or(1), out),
    )
}

fn killed_moves_into(
    cache: &mut RateCache,
    params: &ModelParams,
    s: State,
    out: &mut Vec<(State, f64)>,
) -> Result<()> {
    let k = match s {
        State::Count(k) if k > 0 => k,
        _ => return Ok(()),
    };
    let kf = k as f64;
    if params.sigma > 0.0 {
        out.push((State::Count(k + 1), kf * params.sigma));
    }
    cache.with(k, |r| push_mergers(r, k, out))?;
    if params.theta1 > 0.0 {
        out.push((State::Count(k - 1), kf * params.theta1));
    }
    if params.theta0 > 0.0 {
        out.push((State::Cemetery, kf * params.theta0));
    }
    check_rate(out)
}

/// One path of the killed ASG `R`; absorbing states are 0 and `Δ`.
pub fn simulate_killed_asg_path(
    measure: &LambdaMeasure,
    params: &ModelParams,
    start: usize,
    max_events: u64,
    seed: u64,
) -> Result<JumpPath> {
    let mut cache = RateCache::new(measure);
    run_chain(
        State::Count(start),
        max_events,
        seed,
        PathModel::KilledAsg,
        |s, out| killed_moves_into(&mut cache, params, s, out),
    )
}

/// Fraction of `n_reps` killed-ASG replicates started from `start` lines
/// that are absorbed at 0, an estimate of `w_n`.
pub fn simulate_killed_asg(
    measure: &LambdaMeasure,
    params: &ModelParams,
    start: usize,
    n_reps: u64,
    seed: u64,
) -> Result<f64> {
    if !(params.theta0 > 0.0 && params.theta1 > 0.0) {
        return Err(Error::PreconditionViolated(
            "killed ASG needs theta0 > 0 and theta1 > 0".into(),
        ));
    }
    if n_reps == 0 {
        return Err(Error::InvalidParameter("n_reps must be positive".into()));
    }
    let hits = (0..n_reps)
        .into_par_iter()
        .map_init(
            || (RateCache::new(measure), Vec::new(), Vec::new()),
            |(cache, buf, rates), rep| -> Result<u64> {
                let mut rng = rng_for(seed, rep);
                let mut state = State::Count(start);
                for _ in 0..KILLED_EVENT_LIMIT {
                    match state {
                        State::Count(0) => return Ok(1),
                        State::Cemetery => return Ok(0),
                        _ => {}
                    }
                    buf.clear();
                    killed_moves_into(cache, params, state, buf)?;
                    rates.clear();
                    rates.extend(buf.iter().map(|(_, r)| *r));
                    let total: f64 = rates.iter().sum();
                    let u = rng.gen::<f64>() * total;
                    state = buf[pick(rates, u)].0;
                }
                Err(Error::NonAbsorbing(KILLED_EVENT_LIMIT))
            },
        )
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(hits as f64 / n_reps as f64)
}

/// Rates `λ_k^N` (up) and `μ_k^N` (down) of `X^N`.
pub fn moran_x_rates(p: &MoranParams, k: usize) -> (f64, f64) {
    let (nf, kf) = (p.n as f64, k as f64);
    let up = kf * (nf - kf) * (1.0 + p.s) / nf + (nf - kf) * p.u0;
    let down = kf * (nf - kf) / nf + kf * p.u1;
    (up, down)
}

pub fn simulate_moran_x(
    params: &MoranParams,
    start: usize,
    max_events: u64,
    seed: u64,
) -> Result<JumpPath> {
    if start > params.n {
        return Err(Error::InvalidParameter(format!(
            "start {start} not in [0, {}]",
            params.n
        )));
    }
    run_chain(
        State::Count(start),
        max_events,
        seed,
        PathModel::MoranX,
        |s, out| {
            let k = s.count().unwrap_or(0);
            let (up, down) = moran_x_rates(params, k);
            if up > 0.0 {
                out.push((State::Count(k + 1), up));
            }
            if down > 0.0 {
                out.push((State::Count(k - 1), down));
            }
            Ok(())
        },
    )
}

/// Fraction of replicates of `X^N` from `start` that fix at `N`; needs
/// an absorbing chain (`u0 = 0` or `u1 = 0`).
pub fn moran_x_fixation_frequency(
    params: &MoranParams,
    start: usize,
    n_reps: u64,
    seed: u64,
) -> Result<f64> {
    if params.u0 > 0.0 && params.u1 > 0.0 {
        return Err(Error::PreconditionViolated(
            "X^N does not absorb when u0, u1 > 0".into(),
        ));
    }
    if start > params.n || n_reps == 0 {
        return Err(Error::InvalidParameter(
            "need start <= N and n_reps > 0".into(),
        ));
    }
    let hits = (0..n_reps)
        .into_par_iter()
        .map(|rep| -> Result<u64> {
            let mut rng = rng_for(seed, rep);
            let mut k = start;
            for _ in 0..KILLED_EVENT_LIMIT {
                let (up, down) = moran_x_rates(params, k);
                if up + down == 0.0 {
                    return Ok(u64::from(k == params.n));
                }
                k = if rng.gen::<f64>() * (up + down) < up {
                    k + 1
                } else {
                    k - 1
                };
            }
            Err(Error::NonAbsorbing(KILLED_EVENT_LIMIT))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(hits as f64 / n_reps as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_events() {
        let p = MoranParams::new(5, 0.5, 0.1, 0.1).unwrap();
        let path = simulate_moran_l(&p, 3, 0, 1).unwrap();
        assert_eq!(path.states, vec![State::Count(3)]);
        assert_eq!(path.holding_times.len(), 1);
        let occ = occupancy(&path, 0.0).unwrap();
        assert_eq!(occ.probability(State::Count(3)), 1.0);
    }

    #[test]
    fn deterministic() {
        let m = LambdaMeasure::kingman(2.0);
        let p = ModelParams::new(1.0, 0.5, 0.5).unwrap();
        let a = simulate_lambda_l(&m, &p, 5, 1000, 42).unwrap();
        let b = simulate_lambda_l(&m, &p, 5, 1000, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.holding_times.iter().all(|t| *t > 0.0));
    }

    #[test]
    fn exit_rates() {
        let m = LambdaMeasure::kingman(2.0);
        let p = ModelParams::new(0.5, 0.0, 0.0).unwrap();
        let total: f64 = lambda_l_moves(&m, &p, 3)
            .unwrap()
            .iter()
            .map(|(_, r)| r)
            .sum();
        assert!((total - 7.5).abs() < 1e-14);
        let m = LambdaMeasure::star(1.0);
        let p = ModelParams::new(1.0, 0.0, 0.0).unwrap();
        let moves = lambda_l_moves(&m, &p, 4).unwrap();
        assert_eq!(moves, vec![(State::Count(5), 4.0), (State::Count(1), 1.0)]);
    }

    #[test]
    fn absorbed_x() {
        let p = MoranParams::new(4, 1.0, 0.0, 0.0).unwrap();
        let path = simulate_moran_x(&p, 0, 10, 3).unwrap();
        assert!(path.is_absorbed());
        assert_eq!(path.n_jumps(), 0);
    }

    #[test]
    fn occupancy_burn_in() {
        let path = JumpPath {
            states: vec![State::Count(1), State::Count(2), State::Count(1)],
            holding_times: vec![2.0, 1.0, 1.0],
            seed: 0,
            rng: RNG_ALGORITHM,
            model_tag: PathModel::MoranL,
        };
        let occ = occupancy(&path, 0.5).unwrap();
        assert_eq!(occ.total_time, 2.0);
        assert_eq!(occ.probability(State::Count(1)), 0.5);
        assert!(occupancy(&path, 1.0).is_err());
    }
}
