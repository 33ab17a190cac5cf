//! Small dense helpers shared by the numerical modules.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

pub type C64 = Complex<f64>;

const MAX_SWEEPS: usize = 10_000;

/// Largest entry-wise asymmetry relative to the largest entry.
pub fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let mut v = match SymmetricEigen::try_new(m.clone(), f64::EPSILON, MAX_SWEEPS) {
        Some(e) => e.eigenvalues,
        None => m.clone().symmetric_eigenvalues(),
    };
    v.as_mut_slice().sort_by(|a, b| a.total_cmp(b));
    v
}

/// Full symmetric eigendecomposition with eigenvalues ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::try_new(m.clone(), f64::EPSILON, MAX_SWEEPS)
        .unwrap_or_else(|| SymmetricEigen::new(m.clone()));
    let n = e.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| e.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &e.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Singular values, descending.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    let mut s = match m.clone().try_svd(false, false, f64::EPSILON, MAX_SWEEPS) {
        Some(svd) => svd.singular_values,
        None => sym_eigenvalues(&(m.transpose() * m)).map(|x| x.max(0.0).sqrt()),
    };
    s.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral norm. Symmetric input takes the cheaper eigenvalue route.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    if m.is_square() && relative_asymmetry(m) == 0.0 {
        let ev = sym_eigenvalues(m);
        return ev[0].abs().max(ev[ev.len() - 1].abs());
    }
    singular_values(m)[0]
}

pub fn complex_spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    match m.clone().try_svd(false, false, f64::EPSILON, MAX_SWEEPS) {
        Some(svd) => svd.singular_values.max(),
        None => {
            let g = m.adjoint() * m;
            let re = g.map(|z| z.re);
            sym_eigenvalues(&symmetrize(&re)).max().max(0.0).sqrt()
        }
    }
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

pub fn vec_to_complex(v: &DVector<f64>) -> DVector<C64> {
    v.map(|x| C64::new(x, 0.0))
}

pub fn check_finite_matrix(which: &str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{which} has non-finite entries")))
    }
}

pub fn check_square(m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.nrows(),
        });
    }
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.ncols(),
        });
    }
    Ok(())
}

pub fn check_len(v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    Ok(())
}
