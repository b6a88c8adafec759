//! Exact k-particle machinery: configuration spaces, the lifted generator,
//! annihilation operators between adjacent levels, and the stationary
//! weights of each level.
//!
//! A configuration is an occupation vector over the vertices with total
//! mass k. Spaces are enumerated in colexicographic order so that every
//! matrix in the library has one canonical indexing. Generators are kept
//! sparse; the spectral layer densifies them on demand.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::kernels;
use crate::model::ModelSpec;

/// Number of occupation vectors over `n` sites with total mass `k`,
/// `C(n + k - 1, k)`, saturating at `u128::MAX` on overflow.
pub fn config_count(n: usize, k: usize) -> u128 {
    let mut result: u128 = 1;
    for i in 1..=(k as u128) {
        let factor = n as u128 - 1 + i;
        match result.checked_mul(factor) {
            Some(r) => result = r / i,
            None => return u128::MAX,
        }
    }
    result
}

/// All occupation vectors of one particle level, with index lookup.
#[derive(Debug, Clone)]
pub struct ConfigSpace {
    n: usize,
    k: usize,
    configs: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

/// Enumerates the level-`k` configuration space over `n` sites in
/// colexicographic order. Refuses spaces larger than `cap`.
pub fn enum_configs(n: usize, k: usize, cap: usize) -> Result<ConfigSpace> {
    let states = config_count(n, k);
    if states > cap as u128 {
        return Err(Error::TooLarge { states, cap });
    }
    let mut configs = Vec::with_capacity(states as usize);
    let mut scratch = vec![0u32; n];
    fill_colex(n, k as u32, &mut scratch, &mut configs);
    let index = configs
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i))
        .collect();
    Ok(ConfigSpace {
        n,
        k,
        configs,
        index,
    })
}

fn fill_colex(pos: usize, mass: u32, scratch: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if pos == 1 {
        scratch[0] = mass;
        out.push(scratch.clone());
        return;
    }
    for tail in 0..=mass {
        scratch[pos - 1] = tail;
        fill_colex(pos - 1, mass - tail, scratch, out);
    }
}

impl ConfigSpace {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn get(&self, i: usize) -> &[u32] {
        &self.configs[i]
    }

    pub fn configs(&self) -> &[Vec<u32>] {
        &self.configs
    }

    pub fn index_of(&self, config: &[u32]) -> Option<usize> {
        self.index.get(config).copied()
    }
}

/// Sparse conservative generator on one configuration space. Off-diagonal
/// entries are stored per row sorted by column; the diagonal is the negated
/// row sum, so rows always sum to zero exactly as stored.
#[derive(Debug, Clone)]
pub struct SparseGenerator {
    space: ConfigSpace,
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl SparseGenerator {
    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    /// Off-diagonal entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        match self.rows[i].binary_search_by(|(c, _)| c.cmp(&j)) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => 0.0,
        }
    }

    /// Matrix-vector product `L v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for i in 0..self.dim() {
            let mut acc = self.diag[i] * v[i];
            for &(j, w) in &self.rows[i] {
                acc += w * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Matrix-vector product `L^T v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for i in 0..self.dim() {
            out[i] += self.diag[i] * v[i];
            for &(j, w) in &self.rows[i] {
                out[j] += w * v[i];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = self.diag[i];
            for &(j, w) in &self.rows[i] {
                m[(i, j)] = w;
            }
        }
        m
    }

    /// Largest absolute entry, a cheap scale proxy for tolerances.
    pub fn amax(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.dim() {
            m = m.max(self.diag[i].abs());
            for &(_, w) in &self.rows[i] {
                m = m.max(w.abs());
            }
        }
        m
    }
}

fn binomial_table(k: u32) -> Vec<Vec<f64>> {
    let k = k as usize;
    let mut t = vec![vec![0.0; k + 1]; k + 1];
    for i in 0..=k {
        t[i][0] = 1.0;
        for j in 1..=i {
            t[i][j] = t[i - 1][j - 1] + if j <= i - 1 { t[i - 1][j] } else { 0.0 };
        }
    }
    t
}

/// Builds the level-`k` generator. The entry from `xi` to a configuration
/// `zeta` that redistributes the pair `{a, b}` sums, over both orientations
/// of the pair, the polynomial moments
///
/// ```text
/// sum_j C(xi_a, j) C(xi_b, zeta_a - j)
///       m_ab(j, xi_a - j, xi_b - zeta_a + j, zeta_a - j).
/// ```
///
/// Every such moment is finite off the diagonal even for kernels with
/// infinite total mass, because a moving particle always contributes a
/// positive power of `(1-u)` or `(1-v)`. The diagonal is assembled as the
/// negated row sum and never touches the raw mass.
pub fn build_generator(spec: &ModelSpec, k: usize, cap: usize) -> Result<SparseGenerator> {
    let space = enum_configs(spec.n(), k, cap)?;
    let dim = space.dim();
    let pairs = spec.interacting_pairs();
    let binom = binomial_table(k as u32);
    let mut memo: HashMap<(usize, usize, u32, u32, u32, u32), f64> = HashMap::new();

    let mut rows_acc: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); dim];
    let mut diag = vec![0.0; dim];
    let mut zeta = vec![0u32; spec.n()];
    for i in 0..dim {
        let xi = space.get(i);
        for &(x, y) in &pairs {
            for (a, b) in [(x, y), (y, x)] {
                let xa = xi[a];
                let xb = xi[b];
                let total = xa + xb;
                if total == 0 {
                    continue;
                }
                for za in 0..=total {
                    if za == xa {
                        continue;
                    }
                    let mut rate = 0.0;
                    let j_lo = za.saturating_sub(xb);
                    let j_hi = xa.min(za);
                    for j in j_lo..=j_hi {
                        let key = (a, b, j, xa - j, xb + j - za, za - j);
                        let m = match memo.get(&key) {
                            Some(&m) => m,
                            None => {
                                let m = kernels::mixed_moment(
                                    spec, a, b, j, xa - j, xb + j - za, za - j,
                                )
                                .expect_finite("off-diagonal generator moment")?;
                                memo.insert(key, m);
                                m
                            }
                        };
                        rate += binom[xa as usize][j as usize]
                            * binom[xb as usize][(za - j) as usize]
                            * m;
                    }
                    if rate == 0.0 {
                        continue;
                    }
                    zeta.copy_from_slice(xi);
                    zeta[a] = za;
                    zeta[b] = total - za;
                    let col = space
                        .index_of(&zeta)
                        .expect("pair redistribution preserves total mass");
                    *rows_acc[i].entry(col).or_insert(0.0) += rate;
                    diag[i] -= rate;
                }
            }
        }
    }

    let rows = rows_acc
        .into_iter()
        .map(|row| row.into_iter().collect())
        .collect();
    Ok(SparseGenerator { space, rows, diag })
}

/// The annihilation operator from level `k` to level `k - 1`: the only
/// nonzero entries are `A[xi, xi - delta_x] = xi_x`.
#[derive(Debug, Clone)]
pub struct Annihilation {
    from_dim: usize,
    to_dim: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

pub fn annihilation(from: &ConfigSpace, to: &ConfigSpace) -> Annihilation {
    assert_eq!(from.n(), to.n(), "annihilation spaces share the vertex set");
    assert_eq!(
        from.k(),
        to.k() + 1,
        "annihilation drops exactly one particle"
    );
    let mut rows = Vec::with_capacity(from.dim());
    let mut reduced = vec![0u32; from.n()];
    for i in 0..from.dim() {
        let xi = from.get(i);
        let mut row = Vec::new();
        for x in 0..from.n() {
            if xi[x] == 0 {
                continue;
            }
            reduced.copy_from_slice(xi);
            reduced[x] -= 1;
            let col = to
                .index_of(&reduced)
                .expect("removing a particle stays in the lower space");
            row.push((col, f64::from(xi[x])));
        }
        row.sort_unstable_by_key(|&(c, _)| c);
        rows.push(row);
    }
    Annihilation {
        from_dim: from.dim(),
        to_dim: to.dim(),
        rows,
    }
}

impl Annihilation {
    pub fn from_dim(&self) -> usize {
        self.from_dim
    }

    pub fn to_dim(&self) -> usize {
        self.to_dim
    }

    /// Lifts a level-`(k-1)` function to level `k`: `(A g)(xi) = sum_x
    /// xi_x g(xi - delta_x)`.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        assert_eq!(g.len(), self.to_dim);
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * g[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.from_dim, self.to_dim);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m[(i, j)] = w;
            }
        }
        m
    }
}

/// Stationary weights of one particle level, summing to one.
///
/// For the named families this is the closed-form compound weight of the
/// configuration, evaluated in log space:
///
/// ```text
/// mu_k(xi) = (k! / prod_x xi_x!) prod_x alpha_x^(xi_x) / |alpha|^(k)
/// ```
///
/// with rising factorials. For discrete kernels the weights are the
/// normalized left null vector of the generator, which must be unique and
/// strictly positive.
pub fn mu_hat(spec: &ModelSpec, gen: &SparseGenerator) -> Result<Vec<f64>> {
    let space = gen.space();
    if spec.kernel.is_named() {
        let k = space.k() as f64;
        let total = spec.alpha.total();
        let ln_common = ln_gamma(k + 1.0) - (ln_gamma(total + k) - ln_gamma(total));
        let mu = space
            .configs()
            .iter()
            .map(|xi| {
                let mut ln = ln_common;
                for (x, &m) in xi.iter().enumerate() {
                    if m == 0 {
                        continue;
                    }
                    let a = spec.alpha.get(x);
                    ln += ln_gamma(a + f64::from(m)) - ln_gamma(a) - ln_gamma(f64::from(m) + 1.0);
                }
                ln.exp()
            })
            .collect();
        return Ok(mu);
    }

    let dim = gen.dim();
    let mut m = gen.to_dense().transpose();
    let scale = m.amax().max(1.0);
    for j in 0..dim {
        m[(0, j)] = scale;
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(dim);
    rhs[0] = scale;
    let mu = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NullVectorNotUnique("level stationary weights".into()))?;
    if mu.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::NullVectorNotUnique(
            "level stationary weights are not strictly positive".into(),
        ));
    }
    let mu: Vec<f64> = mu.iter().cloned().collect();
    let residual = gen.apply_transpose(&mu);
    let tol = 1e-8 * gen.amax().max(1.0);
    if residual.iter().any(|r| r.abs() > tol) {
        return Err(Error::NullVectorNotUnique(format!(
            "level stationary weights fail balance, residual {:e}",
            residual.iter().fold(0.0f64, |a, r| a.max(r.abs()))
        )));
    }
    Ok(mu)
}

/// Adjoint generator with respect to the weights `mu`:
/// `L*(xi, zeta) = mu(zeta) L(zeta, xi) / mu(xi)` off the diagonal, with a
/// conservative diagonal. Coincides with `L` exactly when the level is
/// reversible.
pub fn adjoint(gen: &SparseGenerator, mu: &[f64]) -> SparseGenerator {
    let dim = gen.dim();
    assert_eq!(mu.len(), dim);
    let mut rows_acc: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); dim];
    let mut diag = vec![0.0; dim];
    for i in 0..dim {
        for &(j, w) in gen.row(i) {
            let entry = mu[i] * w / mu[j];
            rows_acc[j].insert(i, entry);
            diag[j] -= entry;
        }
    }
    let rows = rows_acc
        .into_iter()
        .map(|row| row.into_iter().collect())
        .collect();
    SparseGenerator {
        space: gen.space().clone(),
        rows,
        diag,
    }
}

/// Scale-normalized detailed-balance defect: the largest violation of
/// `mu_i L_ij = mu_j L_ji` relative to the largest flux entry. Zero (up to
/// rounding) exactly when the level is reversible for `mu`.
pub fn reversibility_residual(gen: &SparseGenerator, mu: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..gen.dim() {
        for &(j, w) in gen.row(i) {
            let forward = mu[i] * w;
            let backward = mu[j] * gen.entry(j, i);
            worst = worst.max((forward - backward).abs());
            scale = scale.max(forward.abs());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}
