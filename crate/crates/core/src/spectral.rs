//! Spectral gaps: the single-particle walk gap, exact level spectra, the
//! eigenvalues appearing fresh at each level, and the certified comparison
//! bounds between them.
//!
//! All spectra are reported for the negated generator, so eigenvalues are
//! decay rates with nonnegative real part and the stationary eigenvalue is
//! zero. Reversible levels go through a symmetric eigensolve after the
//! usual similarity transform; everything else falls back to a complex
//! Schur decomposition.

use num_complex::Complex;

use crate::dense;
use crate::error::{Error, Result};
use crate::kernels;
use crate::model::ModelSpec;
use crate::particles::{self, SparseGenerator};

/// Eigenvalues at most this fraction of the level's spectral radius count
/// as zero.
pub const ZERO_EIG_REL: f64 = 1e-9;
/// Largest normalized detailed-balance defect accepted by the reversible
/// path.
pub const REVERSIBILITY_TOL: f64 = 1e-10;
/// Relative tolerance for matching a lower-level eigenvalue inside the
/// next level's spectrum.
pub const MATCH_TOL: f64 = 1e-8;
/// Absolute slack granted to the certified inequalities.
pub const BOUND_TOL: f64 = 1e-9;
/// Relative tolerance for the equality of gaps under the comparison
/// criterion.
pub const EQUALITY_TOL: f64 = 1e-8;

/// Which eigensolver route a level takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMethod {
    /// Decide per level from the detailed-balance defect.
    Auto,
    /// Insist on the symmetric route; fail on irreversible levels.
    Reversible,
    /// Always use the complex route.
    General,
}

/// Spectral gap of the symmetrized single-particle walk: the second
/// smallest eigenvalue of the quadratic form
/// `sum_edges pi_edge (psi_x - psi_y)^2` over `L^2(pi)`.
pub fn gap_rw(spec: &ModelSpec) -> Result<f64> {
    let rates = kernels::walk_rates(spec)?;
    if rates.edges.is_empty() {
        return Err(Error::NoEdges);
    }
    let n = spec.n();
    let mut s = nalgebra::DMatrix::<f64>::zeros(n, n);
    for e in &rates.edges {
        if e.pi_edge == 0.0 {
            continue;
        }
        let (x, y) = (e.x, e.y);
        s[(x, y)] -= e.pi_edge / (rates.pi[x] * rates.pi[y]).sqrt();
        s[(y, x)] = s[(x, y)];
        s[(x, x)] += e.pi_edge / rates.pi[x];
        s[(y, y)] += e.pi_edge / rates.pi[y];
    }
    let (eigs, _) = dense::sym_eigs_sorted(s)?;
    Ok(eigs[1].max(0.0))
}

/// Spectrum of one level.
#[derive(Debug, Clone)]
pub struct LevelSpectrum {
    pub k: usize,
    pub dim: usize,
    /// Whether the symmetric route was used.
    pub reversible: bool,
    /// Eigenvalues of the negated level generator, sorted by real then
    /// imaginary part.
    pub eigs: Vec<Complex<f64>>,
}

impl LevelSpectrum {
    /// Number of eigenvalues indistinguishable from zero at this level's
    /// scale.
    pub fn zero_multiplicity(&self) -> usize {
        let thresh = ZERO_EIG_REL * self.radius();
        self.eigs.iter().filter(|e| e.norm() <= thresh).count()
    }

    pub fn radius(&self) -> f64 {
        self.eigs.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    /// Smallest real part among eigenvalues that are not zero; zero when
    /// the level has no nonzero eigenvalue.
    pub fn gap(&self) -> f64 {
        let thresh = ZERO_EIG_REL * self.radius();
        let min = self
            .eigs
            .iter()
            .filter(|e| e.norm() > thresh)
            .map(|e| e.re)
            .fold(f64::INFINITY, f64::min);
        if min.is_finite() {
            min.max(0.0)
        } else {
            0.0
        }
    }
}

fn decide_reversible(
    spec: &ModelSpec,
    gen: &SparseGenerator,
    mu: &[f64],
    method: SpectralMethod,
) -> Result<bool> {
    match method {
        SpectralMethod::General => Ok(false),
        SpectralMethod::Auto | SpectralMethod::Reversible => {
            let residual = if spec.kernel.is_named() {
                0.0
            } else {
                particles::reversibility_residual(gen, mu)
            };
            if residual <= REVERSIBILITY_TOL {
                Ok(true)
            } else if method == SpectralMethod::Reversible {
                Err(Error::AsymmetryDetected { residual })
            } else {
                Ok(false)
            }
        }
    }
}

fn level_spectrum(
    spec: &ModelSpec,
    gen: &SparseGenerator,
    mu: &[f64],
    method: SpectralMethod,
) -> Result<LevelSpectrum> {
    let reversible = decide_reversible(spec, gen, mu, method)?;
    let eigs = if reversible {
        let s = dense::symmetrized(gen, mu);
        let (vals, _) = dense::sym_eigs_sorted(-s)?;
        vals.into_iter().map(Complex::from).collect()
    } else {
        dense::complex_eigs_sorted(-gen.to_dense())?
    };
    Ok(LevelSpectrum {
        k: gen.space().k(),
        dim: gen.dim(),
        reversible,
        eigs,
    })
}

/// Exact spectrum of the level-`k` generator.
pub fn eig_level(
    spec: &ModelSpec,
    k: usize,
    cap: usize,
    method: SpectralMethod,
) -> Result<LevelSpectrum> {
    let gen = particles::build_generator(spec, k, cap)?;
    let mu = particles::mu_hat(spec, &gen)?;
    level_spectrum(spec, &gen, &mu, method)
}

/// Eigenvalues of level `k` that do not descend from level `k - 1`.
///
/// On reversible levels these are computed exactly as the spectrum of the
/// generator compressed to the orthogonal complement of the lifted
/// lower-level functions. Otherwise the lower spectrum is matched into the
/// upper one and the leftovers are returned; an unmatched lower eigenvalue
/// is an error, because the spectra of consecutive levels must nest.
pub fn new_eigs(
    spec: &ModelSpec,
    k: usize,
    cap: usize,
    method: SpectralMethod,
) -> Result<Vec<Complex<f64>>> {
    assert!(k >= 1, "level zero has no predecessor");
    let gen = particles::build_generator(spec, k, cap)?;
    let mu = particles::mu_hat(spec, &gen)?;
    let below = particles::build_generator(spec, k - 1, cap)?;
    new_eigs_impl(spec, &gen, &mu, &below, method)
}

fn new_eigs_impl(
    spec: &ModelSpec,
    gen: &SparseGenerator,
    mu: &[f64],
    below: &SparseGenerator,
    method: SpectralMethod,
) -> Result<Vec<Complex<f64>>> {
    let reversible = decide_reversible(spec, gen, mu, method)?;
    if reversible {
        let a = particles::annihilation(gen.space(), below.space());
        let mut cols = a.to_dense();
        for i in 0..gen.dim() {
            let scale = mu[i].sqrt();
            for j in 0..below.dim() {
                cols[(i, j)] *= scale;
            }
        }
        let w = dense::complement_basis(&cols);
        let s = dense::symmetrized(gen, mu);
        let m = w.transpose() * (-s) * &w;
        let m = (&m + m.transpose()) * 0.5;
        let (vals, _) = dense::sym_eigs_sorted(m)?;
        return Ok(vals.into_iter().map(Complex::from).collect());
    }

    let upper = level_spectrum(spec, gen, mu, SpectralMethod::General)?;
    let mu_below = particles::mu_hat(spec, below)?;
    let lower = level_spectrum(spec, below, &mu_below, SpectralMethod::General)?;
    let mut taken = vec![false; upper.eigs.len()];
    for e in &lower.eigs {
        let mut best: Option<(usize, f64)> = None;
        for (i, cand) in upper.eigs.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let dist = (cand - e).norm();
            if best.map_or(true, |(_, d)| dist < d) {
                best = Some((i, dist));
            }
        }
        let tol = MATCH_TOL * e.norm().max(1.0);
        match best {
            Some((i, d)) if d <= tol => taken[i] = true,
            _ => {
                return Err(Error::MatchFailure(format!(
                    "eigenvalue {e} of level {} has no partner at level {}",
                    lower.k, upper.k
                )))
            }
        }
    }
    let mut fresh: Vec<Complex<f64>> = upper
        .eigs
        .iter()
        .zip(&taken)
        .filter(|(_, &t)| !t)
        .map(|(e, _)| *e)
        .collect();
    dense::sort_complex(&mut fresh);
    Ok(fresh)
}

/// Everything the spectral layer knows about one level.
#[derive(Debug, Clone)]
pub struct LevelData {
    pub k: usize,
    pub dim: usize,
    pub reversible: bool,
    pub eigs: Vec<Complex<f64>>,
    pub new_eigs: Vec<Complex<f64>>,
    pub gap: f64,
    pub zero_multiplicity: usize,
}

/// Level-by-level spectra up to `kmax`, with the walk gap and kinetic
/// factor alongside.
#[derive(Debug, Clone)]
pub struct SpectrumSuite {
    pub kmax: usize,
    pub gap_rw: f64,
    pub gamma: f64,
    pub levels: Vec<LevelData>,
}

impl SpectrumSuite {
    /// Smallest level gap seen up to `kmax`.
    pub fn gap_upto(&self) -> f64 {
        self.levels.iter().map(|l| l.gap).fold(f64::INFINITY, f64::min)
    }
}

pub fn spectrum_suite(
    spec: &ModelSpec,
    kmax: usize,
    cap: usize,
    method: SpectralMethod,
) -> Result<SpectrumSuite> {
    assert!(kmax >= 1, "need at least one particle level");
    let rw = gap_rw(spec)?;
    let gamma = kernels::gamma(spec)?.gamma;
    let mut levels = Vec::with_capacity(kmax);
    let mut below = particles::build_generator(spec, 0, cap)?;
    for k in 1..=kmax {
        let gen = particles::build_generator(spec, k, cap)?;
        let mu = particles::mu_hat(spec, &gen)?;
        let spectrum = level_spectrum(spec, &gen, &mu, method)?;
        let fresh = new_eigs_impl(spec, &gen, &mu, &below, method)?;
        levels.push(LevelData {
            k,
            dim: spectrum.dim,
            reversible: spectrum.reversible,
            gap: spectrum.gap(),
            zero_multiplicity: spectrum.zero_multiplicity(),
            eigs: spectrum.eigs,
            new_eigs: fresh,
        });
        below = gen;
    }
    Ok(SpectrumSuite {
        kmax,
        gap_rw: rw,
        gamma,
        levels,
    })
}

/// Gap summary up to `kmax`.
#[derive(Debug, Clone)]
pub struct GapReport {
    pub kmax: usize,
    pub gap_rw: f64,
    pub gamma: f64,
    /// `(k, dim, gap)` per level.
    pub per_level: Vec<(usize, usize, f64)>,
    /// `min_k gap(L_k)`.
    pub gap: f64,
}

pub fn gap_upto(
    spec: &ModelSpec,
    kmax: usize,
    cap: usize,
    method: SpectralMethod,
) -> Result<GapReport> {
    let suite = spectrum_suite(spec, kmax, cap, method)?;
    Ok(GapReport {
        kmax,
        gap_rw: suite.gap_rw,
        gamma: suite.gamma,
        per_level: suite
            .levels
            .iter()
            .map(|l| (l.k, l.dim, l.gap))
            .collect(),
        gap: suite.gap_upto(),
    })
}

/// Verdict of one level inside a verification run.
#[derive(Debug, Clone)]
pub struct LevelVerdict {
    pub k: usize,
    pub dim: usize,
    pub gap: f64,
    /// Smallest real part among this level's fresh eigenvalues.
    pub min_new_re: Option<f64>,
    /// Fresh eigenvalues dominate the kinetic product; trivially true at
    /// level one, where freshness claims nothing.
    pub lower_ok: bool,
    pub zero_simple: bool,
}

/// Outcome of the certified-bound verification.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub kmax: usize,
    pub gap_rw: f64,
    pub gamma: f64,
    /// `gamma * gap_rw`, the kinetic lower bound for fresh eigenvalues.
    pub kinetic_product: f64,
    pub levels: Vec<LevelVerdict>,
    pub gap_upto: f64,
    /// Fresh eigenvalues at levels two and above clear the kinetic product.
    pub lower_ok: bool,
    /// Every level was handled by the symmetric route.
    pub reversible: bool,
    /// `min(1, gamma) * gap_rw <= gap_upto` always; additionally
    /// `gap_upto <= gap_rw` for reversible models, where interlacing gives
    /// the walk gap as an upper bound. Without reversibility the level
    /// gaps measure real parts and may exceed the symmetrized walk gap.
    pub sandwich_ok: bool,
    pub aldous_holds: bool,
    /// When the comparison criterion holds, every level gap must reach the
    /// walk gap.
    pub aldous_gap_ok: Option<bool>,
    pub pass: bool,
}

pub fn verify_bounds(spec: &ModelSpec, kmax: usize, cap: usize) -> Result<VerifyReport> {
    let suite = spectrum_suite(spec, kmax, cap, SpectralMethod::Auto)?;
    let kinetic = suite.gamma * suite.gap_rw;
    let tol = BOUND_TOL * kinetic.max(1.0);
    let mut levels = Vec::with_capacity(suite.levels.len());
    let mut lower_ok = true;
    for l in &suite.levels {
        let min_new_re = l.new_eigs.iter().map(|e| e.re).fold(f64::INFINITY, f64::min);
        let min_new_re = min_new_re.is_finite().then_some(min_new_re);
        let level_lower = l.k == 1
            || min_new_re.map_or(true, |m| m >= kinetic - tol);
        lower_ok &= level_lower;
        levels.push(LevelVerdict {
            k: l.k,
            dim: l.dim,
            gap: l.gap,
            min_new_re,
            lower_ok: level_lower,
            zero_simple: l.zero_multiplicity == 1,
        });
    }
    let gap_upto = suite.gap_upto();
    let reversible = suite.levels.iter().all(|l| l.reversible);
    let low = suite.gamma.min(1.0) * suite.gap_rw;
    let sandwich_tol = BOUND_TOL * suite.gap_rw.max(1.0);
    let mut sandwich_ok = gap_upto >= low - sandwich_tol;
    if reversible {
        sandwich_ok &= gap_upto <= suite.gap_rw + sandwich_tol;
    }
    let aldous = kernels::aldous_criterion(spec);
    let aldous_gap_ok = aldous.holds.then(|| {
        suite
            .levels
            .iter()
            .all(|l| l.gap >= suite.gap_rw - EQUALITY_TOL * suite.gap_rw.max(1.0))
    });
    let zero_simple_all = levels.iter().all(|l| l.zero_simple);
    let pass = lower_ok
        && sandwich_ok
        && aldous_gap_ok.unwrap_or(true)
        && zero_simple_all;
    Ok(VerifyReport {
        kmax,
        gap_rw: suite.gap_rw,
        gamma: suite.gamma,
        kinetic_product: kinetic,
        levels,
        gap_upto,
        lower_ok,
        reversible,
        sandwich_ok,
        aldous_holds: aldous.holds,
        aldous_gap_ok,
        pass,
    })
}

/// Exactness defects of the algebraic scaffolding, normalized by the
/// level's largest generator entry.
#[derive(Debug, Clone)]
pub struct LevelStructural {
    pub k: usize,
    /// `|| A L_(k-1) - L_k A ||_max`, normalized.
    pub intertwining: f64,
    /// `|| L_k^T mu ||_max`, normalized.
    pub mu_residual: f64,
    /// `|| diag(mu) L* - L^T diag(mu) ||_max`, normalized.
    pub backward: f64,
    /// Detailed-balance defect, informational.
    pub reversibility: f64,
}

#[derive(Debug, Clone)]
pub struct StructuralReport {
    pub levels: Vec<LevelStructural>,
}

pub const TOL_INTERTWINING: f64 = 1e-10;
pub const TOL_MU_RESIDUAL: f64 = 1e-9;
pub const TOL_BACKWARD: f64 = 1e-11;

impl StructuralReport {
    pub fn pass(&self) -> bool {
        self.levels.iter().all(|l| {
            l.intertwining <= TOL_INTERTWINING
                && l.mu_residual <= TOL_MU_RESIDUAL
                && l.backward <= TOL_BACKWARD
        })
    }
}

pub fn structural_checks(spec: &ModelSpec, kmax: usize, cap: usize) -> Result<StructuralReport> {
    let mut levels = Vec::with_capacity(kmax);
    let mut below = particles::build_generator(spec, 0, cap)?;
    for k in 1..=kmax {
        let gen = particles::build_generator(spec, k, cap)?;
        let mu = particles::mu_hat(spec, &gen)?;
        let scale = gen.amax().max(1.0);

        let a = particles::annihilation(gen.space(), below.space());
        let lift = a.to_dense();
        let intertwining = (&lift * below.to_dense() - gen.to_dense() * &lift).amax()
            / (scale * (k as f64));

        let residual = gen.apply_transpose(&mu);
        let mu_residual =
            residual.iter().fold(0.0f64, |m, r| m.max(r.abs())) / scale;

        let adj = particles::adjoint(&gen, &mu);
        let d = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&mu));
        let backward = (&d * adj.to_dense() - gen.to_dense().transpose() * &d).amax() / scale;

        let reversibility = particles::reversibility_residual(&gen, &mu);
        levels.push(LevelStructural {
            k,
            intertwining,
            mu_residual,
            backward,
            reversibility,
        });
        below = gen;
    }
    Ok(StructuralReport { levels })
}
