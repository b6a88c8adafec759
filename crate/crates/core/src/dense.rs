//! Dense linear-algebra helpers shared by the spectral and lifting layers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::particles::SparseGenerator;

/// Similarity transform `S = D^{1/2} L D^{-1/2}` with `D = diag(mu)`.
/// Symmetric exactly when `L` is reversible for `mu`.
pub(crate) fn symmetrized(gen: &SparseGenerator, mu: &[f64]) -> DMatrix<f64> {
    let d = gen.dim();
    let mut s = DMatrix::zeros(d, d);
    for i in 0..d {
        s[(i, i)] = gen.diag(i);
        for &(j, w) in gen.row(i) {
            s[(i, j)] = (mu[i] / mu[j]).sqrt() * w;
        }
    }
    s
}

/// Eigenvalues (ascending) and matching eigenvector columns of a symmetric
/// matrix. The underlying QR iteration is capped so a stalled sweep
/// surfaces as an error instead of a hang.
pub(crate) fn sym_eigs_sorted(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let d = m.nrows();
    let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 200 * d.max(8))
        .ok_or_else(|| Error::NotConverged("symmetric eigensolver stalled".into()))?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

pub(crate) fn sort_complex(eigs: &mut [Complex<f64>]) {
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// All eigenvalues of a real matrix, sorted by real then imaginary part.
///
/// The Francis QR sweep can cycle on unlucky matrices, so every attempt is
/// iteration-capped, first retried with a looser deflation threshold and
/// then under seeded random orthogonal similarities, which leave the
/// spectrum unchanged but break the cycle.
pub(crate) fn complex_eigs_sorted(m: DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let d = m.nrows();
    if d <= 1 {
        return Ok(m.iter().map(|&x| Complex::from(x)).collect());
    }
    let budget = 150 * d.max(8);
    for attempt in 0..6u64 {
        let (target, eps) = match attempt {
            0 => (m.clone(), f64::EPSILON),
            1 => (m.clone(), 1e-13),
            _ => (rotated_copy(&m, attempt), 1e-13),
        };
        if let Some(schur) = nalgebra::linalg::Schur::try_new(target, eps, budget) {
            let mut out: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().cloned().collect();
            sort_complex(&mut out);
            return Ok(out);
        }
    }
    Err(Error::NotConverged(
        "nonsymmetric eigensolver stalled after randomized restarts".into(),
    ))
}

/// `Q^T M Q` for a deterministic pseudorandom orthogonal `Q`.
fn rotated_copy(m: &DMatrix<f64>, seed: u64) -> DMatrix<f64> {
    let d = m.nrows();
    let mut rng = ChaCha20Rng::seed_from_u64(0xE16_5EED ^ seed);
    let g = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
    let q = g.qr().q();
    q.transpose() * m * &q
}

/// Orthonormal basis of the Euclidean orthogonal complement of the column
/// span of `cols`, built by modified Gram-Schmidt over the standard basis.
/// Deterministic: candidate directions are tried in index order.
pub(crate) fn complement_basis(cols: &DMatrix<f64>) -> DMatrix<f64> {
    let d = cols.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut span_rank = 0usize;
    let absorb = |mut v: DVector<f64>, basis: &mut Vec<DVector<f64>>| -> bool {
        for _ in 0..2 {
            for b in basis.iter() {
                let proj = b.dot(&v);
                v.axpy(-proj, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
            true
        } else {
            false
        }
    };
    for j in 0..cols.ncols() {
        if absorb(cols.column(j).into_owned(), &mut basis) {
            span_rank += 1;
        }
    }
    let mut w = DMatrix::zeros(d, d - span_rank);
    let mut found = 0;
    for i in 0..d {
        if found == d - span_rank {
            break;
        }
        let mut e = DVector::zeros(d);
        e[i] = 1.0;
        if absorb(e, &mut basis) {
            w.set_column(found, basis.last().unwrap());
            found += 1;
        }
    }
    assert_eq!(found, d - span_rank, "complement basis completion failed");
    w
}

/// One eigenvector of a real matrix for a known (possibly complex)
/// eigenvalue, by shifted inverse iteration. `deflate` holds already-found
/// vectors of the same eigenvalue to keep repeated roots independent.
pub(crate) fn complex_inverse_iteration(
    m: &DMatrix<f64>,
    lambda: Complex<f64>,
    deflate: &[DVector<Complex<f64>>],
) -> Option<DVector<Complex<f64>>> {
    let d = m.nrows();
    let scale = m.amax().max(1.0) + lambda.norm();
    let mc: DMatrix<Complex<f64>> = m.map(Complex::from);
    let orthogonalize = |v: &mut DVector<Complex<f64>>| {
        for b in deflate {
            let proj = b.dotc(v);
            v.axpy(-proj, b, Complex::from(1.0));
        }
    };
    for &rel_shift in &[1e-13, 1e-10, 1e-7] {
        let shifted = lambda + Complex::new(rel_shift * scale, rel_shift * scale);
        let mut a = mc.clone();
        for i in 0..d {
            a[(i, i)] -= shifted;
        }
        let lu = a.lu();
        let mut v = DVector::from_element(d, Complex::new(1.0, 0.0));
        for i in 0..d {
            v[i] += Complex::new(0.0, (i as f64 + 1.0) / (d as f64 + 1.0));
        }
        orthogonalize(&mut v);
        if v.norm() < 1e-12 {
            continue;
        }
        v /= Complex::from(v.norm());
        for _ in 0..60 {
            let Some(mut w) = lu.solve(&v) else { break };
            orthogonalize(&mut w);
            let norm = w.norm();
            if !norm.is_finite() || norm < 1e-300 {
                break;
            }
            w /= Complex::from(norm);
            let residual = (&mc * &w - w.scale(1.0) * lambda).norm();
            v = w;
            if residual <= 1e-9 * scale {
                return Some(v);
            }
        }
    }
    None
}
