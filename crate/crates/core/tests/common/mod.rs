//! Shared oracles for the integration tests.
//!
//! Everything here is deliberately independent of the library: moments are
//! obtained by adaptive quadrature instead of log-Gamma closed forms,
//! Dirichlet moments by stick-breaking reduction to one-dimensional Beta
//! integrals, and the matrix exponential by plain scaling-and-squaring of a
//! Taylor series. Tests compare library output against these.

#![allow(dead_code)]

pub mod mc;
pub mod models;

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
///
/// Plain recursive bisection with the usual 15x Richardson acceptance test.
/// The integrand must be smooth on the closed interval; endpoint
/// singularities have to be removed by substitution before calling this.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// `int_0^1 u^(a-1) (1-u)^(b-1) h(u) du` for `a, b > 0` and smooth `h`.
///
/// The endpoint singularities are absorbed exactly: on `[0, 1/2]` the
/// substitution `t = u^a` turns `u^(a-1) du` into `dt / a`, and on
/// `[1/2, 1]` the substitution `s = (1-u)^b` turns `(1-u)^(b-1) du` into
/// `ds / b`. Both transformed integrands are smooth, so adaptive Simpson
/// converges at full accuracy even for fractional weights.
pub fn beta_weighted(a: f64, b: f64, h: &dyn Fn(f64) -> f64, tol: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta_weighted needs positive weights");
    let left = {
        let g = move |t: f64| {
            let u = t.powf(1.0 / a);
            (1.0 - u).powf(b - 1.0) * h(u)
        };
        adaptive_simpson(&g, 0.0, 0.5f64.powf(a), 0.5 * tol) / a
    };
    let right = {
        let g = move |s: f64| {
            let u = 1.0 - s.powf(1.0 / b);
            u.powf(a - 1.0) * h(u)
        };
        adaptive_simpson(&g, 0.0, 0.5f64.powf(b), 0.5 * tol) / b
    };
    left + right
}

/// Quadrature moment of a single kernel direction, or `None` when the
/// integral diverges (harmonic family with no `(1-u)` power).
pub fn kmp_moment(c: f64, ax: f64, ay: f64, p: u32, q: u32, r: u32, s: u32) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    // v = 1 - u, so v^r (1-v)^s contributes u^s (1-u)^r.
    let h = move |u: f64| u.powi((p + s) as i32) * (1.0 - u).powi((q + r) as i32);
    let num = beta_weighted(ax, ay, &h, 1e-13);
    let den = beta_weighted(ax, ay, &|_| 1.0, 1e-13);
    0.5 * c * num / den
}

pub fn hp_moment(c: f64, ax: f64, p: u32, q: u32, _r: u32, s: u32) -> Option<f64> {
    if c == 0.0 {
        return Some(0.0);
    }
    if s >= 1 {
        return Some(0.0);
    }
    if q == 0 {
        return None;
    }
    Some(c * beta_weighted(ax + p as f64, q as f64, &|_| 1.0, 1e-13))
}

pub fn iem_moment(c: f64, ax: f64, ay: f64, kappa: f64, p: u32, q: u32, r: u32, s: u32) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    let mom = |a: f64, e1: u32, e2: u32| {
        if e1 == 0 && e2 == 0 {
            return 1.0;
        }
        let h = move |u: f64| u.powi(e1 as i32) * (1.0 - u).powi(e2 as i32);
        beta_weighted(a - kappa, kappa, &h, 1e-13) / beta_weighted(a - kappa, kappa, &|_| 1.0, 1e-13)
    };
    0.5 * c * mom(ax, p, q) * mom(ay, r, s)
}

pub fn discrete_moment(atoms: &[(f64, f64, f64)], p: u32, q: u32, r: u32, s: u32) -> f64 {
    atoms
        .iter()
        .map(|&(u, v, w)| {
            w * u.powi(p as i32)
                * (1.0 - u).powi(q as i32)
                * v.powi(r as i32)
                * (1.0 - v).powi(s as i32)
        })
        .sum()
}

/// `E[prod_x eta_x^(xi_x)]` under the Dirichlet law with weights `alpha`,
/// evaluated by stick-breaking: `eta_i = B_i * prod_(j<i) (1 - B_j)` with
/// independent `B_i ~ Beta(alpha_i, alpha_(i+1) + ... + alpha_(n-1))`, which
/// factors the simplex integral into one-dimensional Beta moments.
pub fn dirichlet_moment(alpha: &[f64], xi: &[u32]) -> f64 {
    assert_eq!(alpha.len(), xi.len());
    let n = alpha.len();
    let mut prod = 1.0;
    for i in 0..n - 1 {
        let tail_a: f64 = alpha[i + 1..].iter().sum();
        let tail_x: u32 = xi[i + 1..].iter().sum();
        let (p, q) = (xi[i], tail_x);
        if p == 0 && q == 0 {
            continue;
        }
        let h = move |u: f64| u.powi(p as i32) * (1.0 - u).powi(q as i32);
        prod *= beta_weighted(alpha[i], tail_a, &h, 1e-13)
            / beta_weighted(alpha[i], tail_a, &|_| 1.0, 1e-13);
    }
    prod
}

/// Quadrature value of the invariant weight of one occupation vector:
/// the multinomial factor `k! / prod xi_x!` times the Dirichlet moment.
pub fn mu_hat_oracle(alpha: &[f64], xi: &[u32]) -> f64 {
    let k: u32 = xi.iter().sum();
    let mut multinomial = 1.0;
    let mut used = 0u32;
    for &x in xi {
        for j in 1..=x {
            used += 1;
            multinomial *= used as f64 / j as f64;
        }
    }
    let _ = k;
    multinomial * dirichlet_moment(alpha, xi)
}

/// Dense matrix exponential by scaling and squaring of a Taylor series.
/// Only meant for the small generators that show up in tests.
pub fn expm_taylor(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let norm: f64 = a
        .iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = norm.log2().ceil().max(0.0) as u32 + 4;
    let scale = 0.5f64.powi(s as i32);
    let mut scaled = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            scaled[i][j] = a[i][j] * scale;
        }
    }
    let mut result = identity(n);
    let mut term = identity(n);
    for order in 1..=24 {
        term = mat_mul(&term, &scaled);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x /= order as f64;
            }
        }
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        result = mat_mul(&result, &result);
    }
    result
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn binom(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0;
    for j in 0..k.min(n - k) {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}
