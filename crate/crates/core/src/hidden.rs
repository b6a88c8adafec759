//! The hidden-parameter description: polynomials in the per-vertex
//! parameters `theta`, the action of the dynamics on their coefficients,
//! and exact eigenfunction lifts built from the fresh spectrum of each
//! particle level.
//!
//! A degree-`k` monomial `theta^xi` is indexed by a level-`k` configuration
//! `xi`, so polynomial coefficient vectors live on the same spaces as the
//! particle generators, and the dynamics acts on them by the transposed
//! generator. Total degree is preserved, which keeps everything level by
//! level.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::dense;
use crate::error::{Error, Result};
use crate::kernels;
use crate::model::ModelSpec;
use crate::particles::{self, ConfigSpace, SparseGenerator};

/// Applies the dynamics to the coefficient vector of a degree-`k`
/// polynomial: the monomial flow is the transposed particle generator.
pub fn hpm_apply(gen: &SparseGenerator, coeffs: &[f64]) -> Vec<f64> {
    gen.apply_transpose(coeffs)
}

/// Evaluates `sum_xi coeffs[xi] theta^xi`.
pub fn dual_eval(space: &ConfigSpace, coeffs: &[f64], theta: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, xi) in space.configs().iter().enumerate() {
        if coeffs[i] == 0.0 {
            continue;
        }
        acc += coeffs[i] * monomial(xi, theta);
    }
    acc
}

/// Complex variant of [`dual_eval`] for lifted eigenvectors.
pub fn lift_eval(space: &ConfigSpace, coeffs: &[Complex<f64>], theta: &[f64]) -> Complex<f64> {
    let mut acc = Complex::new(0.0, 0.0);
    for (i, xi) in space.configs().iter().enumerate() {
        acc += coeffs[i] * monomial(xi, theta);
    }
    acc
}

fn monomial(xi: &[u32], theta: &[f64]) -> f64 {
    xi.iter()
        .zip(theta)
        .map(|(&m, &t)| t.powi(m as i32))
        .product()
}

/// The weighted parameter variance `sum_x pi_x theta_x^2 - (sum_x pi_x
/// theta_x)^2`.
pub fn var_pi(pi: &[f64], theta: &[f64]) -> f64 {
    let mean: f64 = pi.iter().zip(theta).map(|(&p, &t)| p * t).sum();
    let square: f64 = pi.iter().zip(theta).map(|(&p, &t)| p * t * t).sum();
    square - mean * mean
}

/// Coefficients of the weighted parameter variance as a degree-two
/// polynomial on the level-two space.
pub fn var_pi_coeffs(spec: &ModelSpec) -> Result<(ConfigSpace, Vec<f64>)> {
    let n = spec.n();
    let pi = kernels::stationary_pi(spec)?;
    let space = particles::enum_configs(n, 2, n * (n + 1) / 2 + 1)?;
    let mut coeffs = vec![0.0; space.dim()];
    let mut xi = vec![0u32; n];
    for x in 0..n {
        xi.fill(0);
        xi[x] = 2;
        coeffs[space.index_of(&xi).unwrap()] = pi[x] - pi[x] * pi[x];
        for y in x + 1..n {
            xi.fill(0);
            xi[x] = 1;
            xi[y] = 1;
            coeffs[space.index_of(&xi).unwrap()] = -2.0 * pi[x] * pi[y];
        }
    }
    Ok((space, coeffs))
}

/// Residual of the variance drift identity: applying the dynamics to the
/// variance polynomial must produce
///
/// ```text
/// -sum_{y != z} (chi + sigma)_{zy} theta_z^2
///   + 2 sum_{x < y} (chi + sigma)_{xy} theta_x theta_y.
/// ```
///
/// Returns the largest absolute coefficient mismatch.
pub fn drift_identity_check(spec: &ModelSpec, cap: usize) -> Result<f64> {
    let (space, var_coeffs) = var_pi_coeffs(spec)?;
    let gen = particles::build_generator(spec, 2, cap)?;
    let lhs = hpm_apply(&gen, &var_coeffs);

    let rates = kernels::walk_rates(spec)?;
    let n = spec.n();
    let mut rhs = vec![0.0; space.dim()];
    let mut xi = vec![0u32; n];
    for e in &rates.edges {
        let t = e.chi + e.sigma;
        xi.fill(0);
        xi[e.x] = 1;
        xi[e.y] = 1;
        rhs[space.index_of(&xi).unwrap()] += 2.0 * t;
        for z in [e.x, e.y] {
            xi.fill(0);
            xi[z] = 2;
            rhs[space.index_of(&xi).unwrap()] -= t;
        }
    }

    let residual = lhs
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok(residual)
}

/// Residual of the shift identity: the shifted product
/// `prod_x (theta_x - b)^(xi_x)` must equal the alternating sum of
/// repeated annihilations of plain monomials,
///
/// ```text
/// sum_{m=0}^{k} ((-b)^m / m!) (A_k ... A_(k-m+1) g_(k-m))(xi),
/// g_j(zeta) = theta^zeta,
/// ```
///
/// tested at `trials` random draws of `theta` and `b`. Returns the largest
/// absolute mismatch over all configurations and draws.
pub fn shift_identity_check(
    spec: &ModelSpec,
    k: usize,
    cap: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let n = spec.n();
    let spaces: Vec<ConfigSpace> = (0..=k)
        .map(|j| particles::enum_configs(n, j, cap))
        .collect::<Result<_>>()?;
    let anns: Vec<particles::Annihilation> = (1..=k)
        .map(|j| particles::annihilation(&spaces[j], &spaces[j - 1]))
        .collect();

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let theta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: f64 = rng.random_range(0.0..1.0);

        let mut rhs = vec![0.0; spaces[k].dim()];
        let mut weight = 1.0;
        for m in 0..=k {
            let j = k - m;
            let mut g: Vec<f64> = spaces[j]
                .configs()
                .iter()
                .map(|zeta| monomial(zeta, &theta))
                .collect();
            for level in j + 1..=k {
                g = anns[level - 1].apply(&g);
            }
            for (r, v) in rhs.iter_mut().zip(&g) {
                *r += weight * v;
            }
            weight *= -b / (m as f64 + 1.0);
        }

        for (i, xi) in spaces[k].configs().iter().enumerate() {
            let direct: f64 = xi
                .iter()
                .zip(&theta)
                .map(|(&m, &t)| (t - b).powi(m as i32))
                .product();
            worst = worst.max((direct - rhs[i]).abs());
        }
    }
    Ok(worst)
}

/// One eigenvalue of the dual dynamics that appears fresh at a level,
/// together with coefficient vectors of its lifted eigenfunctions. Each
/// vector `g` satisfies `L^T g = -lambda g` with unit norm, so the
/// polynomial `theta -> sum_xi g(xi) theta^xi` relaxes at rate `lambda`.
#[derive(Debug, Clone)]
pub struct LiftGroup {
    /// Decay rate (eigenvalue of the negated generator).
    pub eigenvalue: Complex<f64>,
    pub vectors: Vec<Vec<Complex<f64>>>,
}

/// Lifts every fresh eigenvalue of level `k` to explicit polynomial
/// eigenfunctions of the dual dynamics, grouped by eigenvalue.
pub fn eigen_lift(spec: &ModelSpec, k: usize, cap: usize) -> Result<Vec<LiftGroup>> {
    assert!(k >= 1, "level zero lifts nothing");
    let gen = particles::build_generator(spec, k, cap)?;
    let mu = particles::mu_hat(spec, &gen)?;
    let below = particles::build_generator(spec, k - 1, cap)?;

    let a = particles::annihilation(gen.space(), below.space());
    let mut cols = a.to_dense();
    for i in 0..gen.dim() {
        let scale = mu[i].sqrt();
        for j in 0..below.dim() {
            cols[(i, j)] *= scale;
        }
    }
    let w = dense::complement_basis(&cols);
    let s = dense::symmetrized(&gen, &mu);

    let reversible = spec.kernel.is_named()
        || particles::reversibility_residual(&gen, &mu) <= crate::spectral::REVERSIBILITY_TOL;

    let mut groups: Vec<LiftGroup> = Vec::new();
    if reversible {
        let m = w.transpose() * (-&s) * &w;
        let m = (&m + m.transpose()) * 0.5;
        let (vals, vecs) = dense::sym_eigs_sorted(m)?;
        for (i, &lambda) in vals.iter().enumerate() {
            let v = vecs.column(i).into_owned();
            let g_real = {
                let mut g = &w * v;
                for (row, gi) in g.iter_mut().enumerate() {
                    *gi *= mu[row].sqrt();
                }
                g
            };
            let g: Vec<Complex<f64>> = g_real.iter().map(|&x| Complex::from(x)).collect();
            push_grouped(&mut groups, Complex::from(lambda), g);
        }
    } else {
        let st = s.transpose();
        let m = w.transpose() * &st * &w;
        let betas = dense::complex_eigs_sorted(m.clone())?;
        let mut i = 0;
        while i < betas.len() {
            let beta = betas[i];
            let mut mult = 1;
            while i + mult < betas.len()
                && (betas[i + mult] - beta).norm() <= 1e-8 * beta.norm().max(1.0)
            {
                mult += 1;
            }
            let mut found: Vec<nalgebra::DVector<Complex<f64>>> = Vec::new();
            for _ in 0..mult {
                let v = dense::complex_inverse_iteration(&m, beta, &found).ok_or_else(|| {
                    Error::NotConverged(format!(
                        "eigenvector for lifted eigenvalue {beta} at level {k}"
                    ))
                })?;
                found.push(v);
            }
            for v in found {
                let mut g = nalgebra::DVector::<Complex<f64>>::zeros(gen.dim());
                for row in 0..gen.dim() {
                    let mut acc = Complex::new(0.0, 0.0);
                    for col in 0..w.ncols() {
                        acc += Complex::from(w[(row, col)]) * v[col];
                    }
                    g[row] = acc * Complex::from(mu[row].sqrt());
                }
                push_grouped(&mut groups, -beta, g.iter().cloned().collect());
            }
            i += mult;
        }
    }

    let scale = gen.amax().max(1.0);
    for group in &groups {
        for g in &group.vectors {
            let lt_g = apply_transpose_complex(&gen, g);
            let worst = lt_g
                .iter()
                .zip(g)
                .map(|(got, gi)| (got + group.eigenvalue * gi).norm())
                .fold(0.0f64, f64::max);
            if worst > 1e-9 * scale {
                return Err(Error::NotConverged(format!(
                    "lifted eigenvector residual {worst:e} at eigenvalue {}",
                    group.eigenvalue
                )));
            }
        }
    }
    Ok(groups)
}

fn push_grouped(groups: &mut Vec<LiftGroup>, lambda: Complex<f64>, g: Vec<Complex<f64>>) {
    let tol = 1e-8 * lambda.norm().max(1.0);
    if let Some(last) = groups
        .iter_mut()
        .find(|gr| (gr.eigenvalue - lambda).norm() <= tol)
    {
        last.vectors.push(g);
    } else {
        groups.push(LiftGroup {
            eigenvalue: lambda,
            vectors: vec![g],
        });
    }
}

fn apply_transpose_complex(gen: &SparseGenerator, v: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); gen.dim()];
    for i in 0..gen.dim() {
        out[i] += Complex::from(gen.diag(i)) * v[i];
        for &(j, w) in gen.row(i) {
            out[j] += Complex::from(w) * v[i];
        }
    }
    out
}

/// Largest ratio of `|g(theta)|` to the control envelope
/// `(min_x pi_x)^(-k/2) VarPi(theta)^(k/2)` over random `theta`, across
/// every lifted eigenfunction of level `k`. At most one up to rounding.
pub fn lift_control_ratio(
    spec: &ModelSpec,
    k: usize,
    cap: usize,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let groups = eigen_lift(spec, k, cap)?;
    let space = particles::enum_configs(spec.n(), k, cap)?;
    let pi = kernels::stationary_pi(spec)?;
    let pi_min = pi.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let theta: Vec<f64> = (0..spec.n()).map(|_| rng.random_range(0.0..1.0)).collect();
        let envelope = pi_min.powf(-(k as f64) / 2.0) * var_pi(&pi, &theta).powf(k as f64 / 2.0);
        if envelope < 1e-12 {
            continue;
        }
        for group in &groups {
            for g in &group.vectors {
                let value = lift_eval(&space, g, &theta).norm();
                worst = worst.max(value / envelope);
            }
        }
    }
    Ok(worst)
}
