//! Event-driven simulation of the exchange dynamics and of its hidden
//! parameter dual, plus the statistical estimators built on top of the
//! sampled trajectories.
//!
//! Every ordered pair carries a finite event rate and a normalized draw of
//! the exchange fractions `(u, v)`. Families with an integrable density
//! sample directly from beta distributions; the heavy-tailed family has
//! infinite total activity and is truncated at `u <= 1 - eps`, with draws
//! taken from a tabulated inverse distribution function. Truncated events
//! move almost nothing, so estimates are insensitive to `eps`, which the
//! test suite checks explicitly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta, Distribution, Exp, Gamma};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hidden;
use crate::kernels;
use crate::model::{AlphaWeights, KernelSpec, ModelSpec};
use crate::particles;
use crate::spectral;

/// Hard ceiling on any single pair rate and on the total event rate.
pub const RATE_CAP: f64 = 1e9;

/// Truncation of the heavy-tailed exchange density and resolution of its
/// tabulated inverse distribution function.
#[derive(Debug, Clone, Copy)]
pub struct TruncationPolicy {
    /// Events with `u > 1 - eps` are dropped.
    pub eps: f64,
    /// Table nodes, log-spaced in `1 - u`.
    pub nodes: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            eps: 1e-4,
            nodes: 2048,
        }
    }
}

/// Which side of the duality to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Process {
    /// Mass exchange: the pair `(x, y)` moves to
    /// `(u eta_x + (1-v) eta_y, (1-u) eta_x + v eta_y)`.
    Eta,
    /// Hidden parameters: the pair moves to
    /// `(u theta_x + (1-u) theta_y, (1-v) theta_x + v theta_y)`.
    Theta,
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub tmax: f64,
    /// Number of evenly spaced sample times, including zero and `tmax`.
    pub samples: usize,
    pub replicas: usize,
    pub seed: u64,
    pub truncation: TruncationPolicy,
}

#[derive(Debug)]
enum PairDraw {
    /// `u` beta distributed, `v = 1 - u`.
    Complementary(Beta<f64>),
    /// `u` and `v` independent betas.
    Independent(Beta<f64>, Beta<f64>),
    /// Tabulated inverse distribution function for `u`, `v = 1`.
    Table { cum: Vec<f64>, nodes: Vec<f64> },
    /// Finite support: cumulative weights over `(u, v)` pairs.
    Atoms { cum: Vec<f64>, uv: Vec<(f64, f64)> },
}

impl PairDraw {
    fn sample<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        match self {
            PairDraw::Complementary(b) => {
                let u = b.sample(rng);
                (u, 1.0 - u)
            }
            PairDraw::Independent(bu, bv) => (bu.sample(rng), bv.sample(rng)),
            PairDraw::Table { cum, nodes } => {
                let mass = *cum.last().unwrap();
                let r = rng.random::<f64>() * mass;
                let idx = cum.partition_point(|&c| c <= r).clamp(1, cum.len() - 1);
                let width = (cum[idx] - cum[idx - 1]).max(f64::MIN_POSITIVE);
                let frac = ((r - cum[idx - 1]) / width).clamp(0.0, 1.0);
                let u = nodes[idx - 1] + frac * (nodes[idx] - nodes[idx - 1]);
                (u, 1.0)
            }
            PairDraw::Atoms { cum, uv } => {
                let total = *cum.last().unwrap();
                let r = rng.random::<f64>() * total;
                let idx = cum.partition_point(|&c| c <= r).min(cum.len() - 1);
                uv[idx]
            }
        }
    }
}

#[derive(Debug)]
struct PairEvent {
    x: usize,
    y: usize,
    mass: f64,
    draw: PairDraw,
}

/// Aggregated exponential clocks: one event class per ordered interacting
/// pair, with its total rate and normalized `(u, v)` sampler.
#[derive(Debug)]
pub struct EventTable {
    events: Vec<PairEvent>,
    cum: Vec<f64>,
    total: f64,
}

impl EventTable {
    pub fn build(spec: &ModelSpec, policy: TruncationPolicy) -> Result<Self> {
        if !(policy.eps > 0.0 && policy.eps < 0.5) {
            return Err(Error::InvalidModel(format!(
                "truncation eps {} outside (0, 0.5)",
                policy.eps
            )));
        }
        if policy.nodes < 8 {
            return Err(Error::InvalidModel("truncation table needs >= 8 nodes".into()));
        }
        let alpha = spec.alpha.values();
        let mut events = Vec::new();
        match &spec.kernel {
            KernelSpec::Discrete { atoms } => {
                for (&(x, y), list) in atoms {
                    let mut cum = Vec::with_capacity(list.len());
                    let mut uv = Vec::with_capacity(list.len());
                    let mut acc = 0.0;
                    for a in list {
                        acc += a.w;
                        cum.push(acc);
                        uv.push((a.u, a.v));
                    }
                    events.push(PairEvent {
                        x,
                        y,
                        mass: acc,
                        draw: PairDraw::Atoms { cum, uv },
                    });
                }
            }
            named => {
                for (x, y) in spec.interacting_pairs() {
                    let c = spec.graph.conductance(x, y);
                    for (a, b) in [(x, y), (y, x)] {
                        let event = match named {
                            KernelSpec::Kmp => PairEvent {
                                x: a,
                                y: b,
                                mass: c / 2.0,
                                draw: PairDraw::Complementary(
                                    Beta::new(alpha[a], alpha[b]).expect("positive shapes"),
                                ),
                            },
                            KernelSpec::Iem { kappa } => PairEvent {
                                x: a,
                                y: b,
                                mass: c / 2.0,
                                draw: PairDraw::Independent(
                                    Beta::new(alpha[a] - kappa, *kappa).expect("positive shapes"),
                                    Beta::new(alpha[b] - kappa, *kappa).expect("positive shapes"),
                                ),
                            },
                            KernelSpec::Hp => {
                                let (cum, nodes) = hp_table(alpha[a], policy);
                                PairEvent {
                                    x: a,
                                    y: b,
                                    mass: c * cum.last().unwrap(),
                                    draw: PairDraw::Table { cum, nodes },
                                }
                            }
                            KernelSpec::Discrete { .. } => unreachable!(),
                        };
                        events.push(event);
                    }
                }
            }
        }

        let mut cum = Vec::with_capacity(events.len());
        let mut total = 0.0;
        for e in &events {
            if !e.mass.is_finite() || e.mass > RATE_CAP {
                return Err(Error::RateOverflow { mass: e.mass });
            }
            total += e.mass;
            cum.push(total);
        }
        if total > RATE_CAP {
            return Err(Error::RateOverflow { mass: total });
        }
        Ok(EventTable { events, cum, total })
    }

    pub fn total_rate(&self) -> f64 {
        self.total
    }

    pub fn classes(&self) -> usize {
        self.events.len()
    }
}

/// Cumulative integral of `u^(a-1) (1-u)^(-1)` over `[0, 1-eps]` on nodes
/// log-spaced in `1 - u`. The first cell absorbs the endpoint singularity
/// with the substitution `t = u^a`.
fn hp_table(a: f64, policy: TruncationPolicy) -> (Vec<f64>, Vec<f64>) {
    let n = policy.nodes;
    let nodes: Vec<f64> = (0..n)
        .map(|i| 1.0 - policy.eps.powf(i as f64 / (n - 1) as f64))
        .collect();
    let mut cum = Vec::with_capacity(n);
    cum.push(0.0);
    let head = {
        let upper = nodes[1].powf(a);
        adaptive_simpson(&|t: f64| 1.0 / (1.0 - t.powf(1.0 / a)), 0.0, upper, 1e-12) / a
    };
    cum.push(head);
    for i in 2..n {
        let cell = adaptive_simpson(
            &|u: f64| u.powf(a - 1.0) / (1.0 - u),
            nodes[i - 1],
            nodes[i],
            1e-12,
        );
        cum.push(cum[i - 1] + cell);
    }
    (cum, nodes)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Sampled trajectories: `states[replica][sample]` is the full state
/// vector at the matching entry of `times`.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Vec<f64>>>,
}

/// Runs independent replicas of the chosen process from a common initial
/// state, sampling each on an even time grid. Replicas are deterministic
/// in `(seed, replica index)` regardless of thread scheduling.
pub fn simulate(
    spec: &ModelSpec,
    process: Process,
    init: &[f64],
    opts: &SimOptions,
) -> Result<SimResult> {
    validate_init(spec, process, init)?;
    simulate_impl(spec, process, |_| init, opts)
}

/// Like [`simulate`], with one initial state per replica.
pub fn simulate_each(
    spec: &ModelSpec,
    process: Process,
    inits: &[Vec<f64>],
    opts: &SimOptions,
) -> Result<SimResult> {
    if inits.len() != opts.replicas {
        return Err(Error::InvalidModel(format!(
            "{} initial states for {} replicas",
            inits.len(),
            opts.replicas
        )));
    }
    for init in inits {
        validate_init(spec, process, init)?;
    }
    simulate_impl(spec, process, |r| inits[r].as_slice(), opts)
}

fn validate_init(spec: &ModelSpec, process: Process, init: &[f64]) -> Result<()> {
    if init.len() != spec.n() {
        return Err(Error::InvalidModel(format!(
            "initial state has {} entries for {} vertices",
            init.len(),
            spec.n()
        )));
    }
    for &v in init {
        if !v.is_finite() {
            return Err(Error::InvalidModel("initial state must be finite".into()));
        }
        match process {
            Process::Eta if v < 0.0 => {
                return Err(Error::InvalidModel("mass state must be nonnegative".into()))
            }
            Process::Theta if !(0.0..=1.0).contains(&v) => {
                return Err(Error::InvalidModel(
                    "hidden parameters must lie in [0, 1]".into(),
                ))
            }
            _ => {}
        }
    }
    Ok(())
}

fn simulate_impl<'a, F>(
    spec: &ModelSpec,
    process: Process,
    init_of: F,
    opts: &SimOptions,
) -> Result<SimResult>
where
    F: Fn(usize) -> &'a [f64] + Sync,
{
    if !(opts.tmax > 0.0 && opts.tmax.is_finite()) {
        return Err(Error::InvalidModel("tmax must be positive and finite".into()));
    }
    if opts.samples < 2 {
        return Err(Error::InvalidModel("need at least two sample times".into()));
    }
    if opts.replicas == 0 {
        return Err(Error::InvalidModel("need at least one replica".into()));
    }

    let table = EventTable::build(spec, opts.truncation)?;
    let times: Vec<f64> = (0..opts.samples)
        .map(|j| opts.tmax * j as f64 / (opts.samples - 1) as f64)
        .collect();

    if table.events.is_empty() || table.total == 0.0 {
        let rows = (0..opts.replicas)
            .map(|r| vec![init_of(r).to_vec(); times.len()])
            .collect();
        return Ok(SimResult { times, states: rows });
    }

    let states: Vec<Vec<Vec<f64>>> = (0..opts.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(opts.seed, r as u64));
            run_replica(&table, process, init_of(r), &times, &mut rng)
        })
        .collect();
    Ok(SimResult { times, states })
}

fn run_replica(
    table: &EventTable,
    process: Process,
    init: &[f64],
    times: &[f64],
    rng: &mut ChaCha20Rng,
) -> Vec<Vec<f64>> {
    let exp = Exp::new(table.total).expect("positive total rate");
    let mut state = init.to_vec();
    let total0: f64 = state.iter().sum();
    let mut snapshots = Vec::with_capacity(times.len());
    let mut next = 0usize;
    let mut t = 0.0f64;
    let mut steps = 0u64;
    while next < times.len() {
        let t_jump = t + exp.sample(rng);
        while next < times.len() && times[next] <= t_jump {
            snapshots.push(state.clone());
            next += 1;
        }
        if next >= times.len() {
            break;
        }
        t = t_jump;
        let r = rng.random::<f64>() * table.total;
        let idx = table.cum.partition_point(|&c| c <= r).min(table.events.len() - 1);
        let ev = &table.events[idx];
        let (u, v) = ev.draw.sample(rng);
        let (sx, sy) = (state[ev.x], state[ev.y]);
        match process {
            Process::Eta => {
                state[ev.x] = u * sx + (1.0 - v) * sy;
                state[ev.y] = (1.0 - u) * sx + v * sy;
            }
            Process::Theta => {
                state[ev.x] = (u * sx + (1.0 - u) * sy).clamp(0.0, 1.0);
                state[ev.y] = ((1.0 - v) * sx + v * sy).clamp(0.0, 1.0);
            }
        }
        steps += 1;
        if process == Process::Eta && steps % 1_000_000 == 0 {
            let sum: f64 = state.iter().sum();
            if sum > 0.0 {
                let fix = total0 / sum;
                for s in &mut state {
                    *s *= fix;
                }
            }
        }
    }
    snapshots
}

fn mix_seed(seed: u64, replica: u64) -> u64 {
    let mut z = seed ^ replica.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean weighted parameter variance across replicas at each sample time.
pub fn mean_var_pi(spec: &ModelSpec, sim: &SimResult) -> Result<Vec<f64>> {
    let pi = kernels::stationary_pi(spec)?;
    let reps = sim.states.len() as f64;
    let mut out = vec![0.0; sim.times.len()];
    for rep in &sim.states {
        for (j, state) in rep.iter().enumerate() {
            out[j] += hidden::var_pi(&pi, state);
        }
    }
    for v in &mut out {
        *v /= reps;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DecayEstimate {
    /// Fitted decay rate of the mean variance.
    pub rate: f64,
    /// Bootstrap standard error over replica resamples.
    pub stderr: f64,
    /// Fitting window `[0, end]` in time units.
    pub window_end: f64,
    /// Sample times that entered the fit.
    pub points: usize,
}

/// Least-squares decay rate of the log mean variance over the window
/// `[0, 3 / (gamma gap)]`, with a replica bootstrap for the standard
/// error.
pub fn estimate_decay(spec: &ModelSpec, sim: &SimResult, seed: u64) -> Result<DecayEstimate> {
    let gamma = kernels::gamma(spec)?.gamma;
    let gap = spectral::gap_rw(spec)?;
    let window_end = 3.0 / (gamma * gap);
    let mean = mean_var_pi(spec, sim)?;

    let idx: Vec<usize> = (0..sim.times.len())
        .filter(|&j| sim.times[j] <= window_end && mean[j] > 0.0)
        .collect();
    if idx.len() < 5 {
        return Err(Error::DegenerateWindow(format!(
            "{} usable sample times in [0, {window_end:.3}], need 5",
            idx.len()
        )));
    }
    let rate = -log_slope(&idx.iter().map(|&j| sim.times[j]).collect::<Vec<_>>(), &idx
        .iter()
        .map(|&j| mean[j])
        .collect::<Vec<_>>());

    let pi = kernels::stationary_pi(spec)?;
    let per_replica: Vec<Vec<f64>> = sim
        .states
        .iter()
        .map(|rep| {
            idx.iter()
                .map(|&j| hidden::var_pi(&pi, &rep[j]))
                .collect()
        })
        .collect();
    let times: Vec<f64> = idx.iter().map(|&j| sim.times[j]).collect();

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let reps = per_replica.len();
    let mut rates = Vec::new();
    for _ in 0..200 {
        let mut resampled = vec![0.0; idx.len()];
        for _ in 0..reps {
            let pick = rng.random_range(0..reps);
            for (acc, v) in resampled.iter_mut().zip(&per_replica[pick]) {
                *acc += v;
            }
        }
        let (ts, ms): (Vec<f64>, Vec<f64>) = times
            .iter()
            .zip(&resampled)
            .filter(|(_, &m)| m > 0.0)
            .map(|(&t, &m)| (t, m / reps as f64))
            .unzip();
        if ts.len() >= 5 {
            rates.push(-log_slope(&ts, &ms));
        }
    }
    if rates.len() < 20 {
        return Err(Error::DegenerateWindow(
            "too few bootstrap resamples with positive means".into(),
        ));
    }
    let mean_rate: f64 = rates.iter().sum::<f64>() / rates.len() as f64;
    let var: f64 = rates.iter().map(|r| (r - mean_rate).powi(2)).sum::<f64>()
        / (rates.len() - 1) as f64;

    Ok(DecayEstimate {
        rate,
        stderr: var.sqrt(),
        window_end,
        points: idx.len(),
    })
}

fn log_slope(ts: &[f64], ms: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let ys: Vec<f64> = ms.iter().map(|&m| m.ln()).collect();
    let tbar = ts.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&t, &y) in ts.iter().zip(&ys) {
        num += (t - tbar) * (y - ybar);
        den += (t - tbar) * (t - tbar);
    }
    num / den
}

/// Exact mean variance curve of the hidden process from the level-two
/// coefficient flow, for comparison against simulation.
pub fn exact_var_pi_curve(
    spec: &ModelSpec,
    theta0: &[f64],
    times: &[f64],
    cap: usize,
) -> Result<Vec<f64>> {
    let (space, coeffs) = hidden::var_pi_coeffs(spec)?;
    let gen = particles::build_generator(spec, 2, cap)?;
    let lt = gen.to_dense().transpose();
    let psi0 = nalgebra::DVector::from_column_slice(&coeffs);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let flowed = (lt.clone() * t).exp() * &psi0;
        out.push(hidden::dual_eval(&space, flowed.as_slice(), theta0));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DualityCheck {
    pub k: usize,
    pub t: f64,
    /// Largest deviation in bootstrap standard errors across monomials.
    pub max_z: f64,
    pub max_abs: f64,
}

/// Simulates the mass process and compares the empirical scaled moments
/// `eta^xi / xi!` at time `t` with the exact matrix exponential of the
/// level-`k` generator applied to their initial values.
pub fn duality_mc_check(
    spec: &ModelSpec,
    k: usize,
    t: f64,
    init: &[f64],
    replicas: usize,
    policy: TruncationPolicy,
    seed: u64,
    cap: usize,
) -> Result<DualityCheck> {
    let gen = particles::build_generator(spec, k, cap)?;
    let space = gen.space();
    let f0: Vec<f64> = space
        .configs()
        .iter()
        .map(|xi| scaled_monomial(xi, init))
        .collect();
    let exact = (gen.to_dense() * t).exp() * nalgebra::DVector::from_column_slice(&f0);

    let opts = SimOptions {
        tmax: t.max(f64::MIN_POSITIVE),
        samples: 2,
        replicas,
        seed,
        truncation: policy,
    };
    let sim = simulate(spec, Process::Eta, init, &opts)?;

    let dim = space.dim();
    let mut sum = vec![0.0; dim];
    let mut sumsq = vec![0.0; dim];
    for rep in &sim.states {
        let last = rep.last().unwrap();
        for (i, xi) in space.configs().iter().enumerate() {
            let value = scaled_monomial(xi, last);
            sum[i] += value;
            sumsq[i] += value * value;
        }
    }
    let n = replicas as f64;
    let mut max_z = 0.0f64;
    let mut max_abs = 0.0f64;
    for i in 0..dim {
        let mean = sum[i] / n;
        let var = (sumsq[i] / n - mean * mean).max(0.0) / n;
        let se = var.sqrt().max(1e-300);
        let diff = mean - exact[i];
        max_abs = max_abs.max(diff.abs());
        max_z = max_z.max(diff.abs() / se);
    }
    Ok(DualityCheck { k, t, max_z, max_abs })
}

fn scaled_monomial(xi: &[u32], state: &[f64]) -> f64 {
    let mut acc = 1.0;
    for (&m, &s) in xi.iter().zip(state) {
        for j in 0..m {
            acc *= s / (j as f64 + 1.0);
        }
    }
    acc
}

/// One draw from the Dirichlet distribution with the model's vertex
/// weights, scaled to total mass `total`.
pub fn dirichlet_sample<R: Rng>(alpha: &AlphaWeights, total: f64, rng: &mut R) -> Vec<f64> {
    let mut draw: Vec<f64> = alpha
        .values()
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let sum: f64 = draw.iter().sum();
    for d in &mut draw {
        *d *= total / sum;
    }
    draw
}
