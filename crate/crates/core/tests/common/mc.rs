//! Statistical helpers shared by the Monte Carlo suites.

use exgap_core::hidden;
use exgap_core::model::ModelSpec;
use exgap_core::montecarlo::{simulate, Process, SimOptions};
use exgap_core::particles;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct SampleStats {
    pub mean: f64,
    pub se: f64,
}

pub fn summarize(samples: &[f64]) -> SampleStats {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    SampleStats {
        mean,
        se: (var / n).sqrt(),
    }
}

/// Least-squares slope of `ln(values)` against `times`, restricted to
/// `times <= window_end`. Mirrors the fitting window of the decay
/// estimator so exact curves can serve as its reference.
pub fn log_slope_in_window(times: &[f64], values: &[f64], window_end: f64) -> f64 {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(&t, &v)| t <= window_end && v > 0.0)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    assert!(pts.len() >= 5, "window too short for a slope fit");
    let n = pts.len() as f64;
    let tbar = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, y) in pts {
        num += (t - tbar) * (y - ybar);
        den += (t - tbar) * (t - tbar);
    }
    num / den
}

/// Duality z-score for one `(xi, theta, t)` triple: the empirical mean of
/// `prod_x theta_t(x)^{xi_x}` under the hidden process against the exact
/// value obtained by flowing the monomial coefficients with the transposed
/// particle generator.
pub fn theta_duality_z(
    spec: &ModelSpec,
    xi: &[u32],
    theta0: &[f64],
    t: f64,
    replicas: usize,
    seed: u64,
) -> f64 {
    let k = xi.iter().sum::<u32>() as usize;
    let gen = particles::build_generator(spec, k, 20_000).unwrap();
    let ix = gen.space().index_of(xi).expect("xi indexes a configuration");

    let lt = gen.to_dense().transpose() * t;
    let flow = lt.exp();
    let coeffs: Vec<f64> = (0..gen.dim()).map(|z| flow[(z, ix)]).collect();
    let exact = hidden::dual_eval(gen.space(), &coeffs, theta0);

    let opts = SimOptions {
        tmax: t,
        samples: 2,
        replicas,
        seed,
        truncation: Default::default(),
    };
    let sim = simulate(spec, Process::Theta, theta0, &opts).unwrap();
    let samples: Vec<f64> = sim
        .states
        .iter()
        .map(|rep| {
            let end = rep.last().unwrap();
            xi.iter()
                .zip(end)
                .map(|(&p, &th)| th.powi(p as i32))
                .product()
        })
        .collect();
    let stats = summarize(&samples);
    (stats.mean - exact) / stats.se
}
