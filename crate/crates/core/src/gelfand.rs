//! The triple V ⊂ H ⊂ V′ at finite dimension.
//!
//! H carries the inner product `(u, v) = vᵀ M_H u`, V the Gram matrix `G_V`.
//! The bridge Λ with `‖u‖_V² = (Λu, u)` is stored through its H-orthonormal
//! eigenbasis X, so `Λ^s = X D^s X⁻¹` with `X⁻¹ = Xᵀ M_H`. Dual elements are
//! kept as H-Riesz representatives.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::linalg::{self, check_finite_matrix, check_len, check_square};
use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Which norm to take.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Space {
    H,
    V,
    /// `V_γ = [H, V]_γ`
    Interp(f64),
    /// `V′_γ`, the dual of `V_γ`
    Dual(f64),
}

#[derive(Debug, Clone)]
pub struct GelfandTriple {
    mass: DMatrix<f64>,
    gram: DMatrix<f64>,
    mass_chol: Cholesky<f64, Dyn>,
    eigenvalues: DVector<f64>,
    basis: DMatrix<f64>,
    basis_inv: DMatrix<f64>,
    c_embed: f64,
}

fn check_spd(which: &str, m: &DMatrix<f64>) -> Result<()> {
    check_finite_matrix(which, m)?;
    let asym = linalg::relative_asymmetry(m);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric {
            which: which.to_string(),
            asymmetry: asym,
        });
    }
    let lo = linalg::sym_eigenvalues(&linalg::symmetrize(m))[0];
    if lo <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            which: which.to_string(),
            eigenvalue: lo,
        });
    }
    Ok(())
}

pub fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::range("gamma", gamma, "[0, 1]"))
    }
}

impl GelfandTriple {
    pub fn new(mass: DMatrix<f64>, gram: DMatrix<f64>) -> Result<Self> {
        if mass.nrows() == 0 {
            return Err(Error::invalid("empty mass matrix"));
        }
        let n = mass.nrows();
        check_square(&mass, n)?;
        check_square(&gram, n)?;
        check_spd("mass matrix", &mass)?;
        check_spd("V Gram matrix", &gram)?;
        let mass = linalg::symmetrize(&mass);
        let gram = linalg::symmetrize(&gram);
        let mass_chol = Cholesky::new(mass.clone()).ok_or_else(|| Error::NotPositiveDefinite {
            which: "mass matrix".into(),
            eigenvalue: linalg::sym_eigenvalues(&mass)[0],
        })?;
        let l = mass_chol.l();
        // C = L⁻¹ G L⁻ᵀ
        let y = l
            .solve_lower_triangular(&gram)
            .ok_or_else(|| Error::Singular("mass factor".into()))?;
        let c = l
            .solve_lower_triangular(&y.transpose())
            .ok_or_else(|| Error::Singular("mass factor".into()))?;
        let (eigenvalues, q) = linalg::sym_eigen(&linalg::symmetrize(&c));
        if eigenvalues[0] <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                which: "Λ".into(),
                eigenvalue: eigenvalues[0],
            });
        }
        let basis = l
            .transpose()
            .solve_upper_triangular(&q)
            .ok_or_else(|| Error::Singular("mass factor".into()))?;
        let basis_inv = basis.transpose() * &mass;
        let c_embed = 1.0 / eigenvalues[0].sqrt();
        Ok(GelfandTriple {
            mass,
            gram,
            mass_chol,
            eigenvalues,
            basis,
            basis_inv,
            c_embed,
        })
    }

    /// Identity mass with the given V Gram matrix.
    pub fn euclidean(gram: DMatrix<f64>) -> Result<Self> {
        let n = gram.nrows();
        Self::new(DMatrix::identity(n, n), gram)
    }

    /// 1×1 triple with `Λ = {lambda}`.
    pub fn scalar(lambda: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, lambda))
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Eigenvalues of Λ, ascending.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// H-orthonormal eigenvectors of Λ as columns.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn basis_inv(&self) -> &DMatrix<f64> {
        &self.basis_inv
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    pub fn c_embed(&self) -> f64 {
        self.c_embed
    }

    pub fn h_inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.mass * u))
    }

    /// Coordinates in the H-orthonormal eigenbasis.
    pub fn coords(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.basis_inv * u
    }

    pub fn from_coords(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.basis * c
    }

    pub fn norm(&self, u: &DVector<f64>, space: Space) -> Result<f64> {
        check_len(u, self.dim())?;
        let s = match space {
            Space::H => 0.0,
            Space::V => 1.0,
            Space::Interp(g) => {
                check_gamma(g)?;
                g
            }
            Space::Dual(g) => {
                check_gamma(g)?;
                -g
            }
        };
        Ok(self.scaled_coord_norm(u, s))
    }

    /// `‖D^{s/2} X⁻¹ u‖₂` without range checks.
    pub(crate) fn scaled_coord_norm(&self, u: &DVector<f64>, s: f64) -> f64 {
        let c = self.coords(u);
        if s == 0.0 {
            return c.norm();
        }
        c.iter()
            .zip(self.eigenvalues.iter())
            .map(|(x, l)| (x * l.powf(0.5 * s)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn h_norm(&self, u: &DVector<f64>) -> f64 {
        self.scaled_coord_norm(u, 0.0)
    }

    pub fn v_norm(&self, u: &DVector<f64>) -> f64 {
        self.scaled_coord_norm(u, 1.0)
    }

    /// `Λ^s = X D^s X⁻¹` as an H-operator.
    pub fn lambda_power(&self, s: f64) -> DMatrix<f64> {
        let mut scaled = self.basis.clone();
        for (j, l) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(l.powf(s));
        }
        scaled * &self.basis_inv
    }

    /// `M_H⁻¹ F`: the H-operator of a form matrix.
    pub fn h_representation(&self, form: &DMatrix<f64>) -> DMatrix<f64> {
        self.mass_chol.solve(form)
    }

    pub fn mass_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.mass_chol.solve(rhs)
    }

    /// H-adjoint `M_H⁻¹ Bᵀ M_H` of an H-operator.
    pub fn h_adjoint(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.mass_chol.solve(&(b.transpose() * &self.mass))
    }

    fn scale_rows_cols(&self, mut m: DMatrix<f64>, row_exp: f64, col_exp: f64) -> DMatrix<f64> {
        if row_exp != 0.0 {
            for (i, l) in self.eigenvalues.iter().enumerate() {
                m.row_mut(i).scale_mut(l.powf(row_exp));
            }
        }
        if col_exp != 0.0 {
            for (j, l) in self.eigenvalues.iter().enumerate() {
                m.column_mut(j).scale_mut(l.powf(col_exp));
            }
        }
        m
    }

    /// Euclidean image of an H-operator B as a map `V_{γ₁} → V′_{γ₂}`.
    pub fn reduce(&self, b: &DMatrix<f64>, from_gamma: f64, to_dual_gamma: f64) -> DMatrix<f64> {
        let core = &self.basis_inv * b * &self.basis;
        self.scale_rows_cols(core, -0.5 * to_dual_gamma, -0.5 * from_gamma)
    }

    /// Euclidean image of a form matrix F (H-operator `M_H⁻¹F`).
    pub fn reduce_form(&self, f: &DMatrix<f64>, from_gamma: f64, to_dual_gamma: f64) -> DMatrix<f64> {
        let core = self.basis.transpose() * f * &self.basis;
        self.scale_rows_cols(core, -0.5 * to_dual_gamma, -0.5 * from_gamma)
    }

    /// `‖B‖_{L(V_{γ₁}, V′_{γ₂})}` for an H-operator B.
    pub fn opnorm(&self, b: &DMatrix<f64>, from_gamma: f64, to_dual_gamma: f64) -> Result<f64> {
        check_square(b, self.dim())?;
        check_gamma(from_gamma)?;
        check_gamma(to_dual_gamma)?;
        Ok(linalg::spectral_norm(&self.reduce(b, from_gamma, to_dual_gamma)))
    }

    /// Same norm for a form matrix.
    pub fn form_opnorm(&self, f: &DMatrix<f64>, from_gamma: f64, to_dual_gamma: f64) -> Result<f64> {
        check_square(f, self.dim())?;
        check_gamma(from_gamma)?;
        check_gamma(to_dual_gamma)?;
        Ok(linalg::spectral_norm(&self.reduce_form(f, from_gamma, to_dual_gamma)))
    }

    /// Singular values of an H-operator measured in H on both sides, descending.
    pub fn h_singular_values(&self, b: &DMatrix<f64>) -> DVector<f64> {
        linalg::singular_values(&(&self.basis_inv * b * &self.basis))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn identity_triple() {
        let t = GelfandTriple::scalar(1.0).unwrap();
        assert_eq!(t.eigenvalues()[0], 1.0);
        assert_eq!(t.c_embed(), 1.0);
    }

    #[test]
    fn scalar_four() {
        let t = GelfandTriple::scalar(4.0).unwrap();
        assert_relative_eq!(t.eigenvalues()[0], 4.0, epsilon = 1e-15);
        assert_relative_eq!(t.c_embed(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn diagonal_triple() {
        let t = GelfandTriple::euclidean(diag(&[1.0, 4.0])).unwrap();
        assert_relative_eq!(t.eigenvalues()[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(t.eigenvalues()[1], 4.0, epsilon = 1e-15);
        assert_relative_eq!(t.c_embed(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            GelfandTriple::euclidean(m),
            Err(Error::NotSymmetric { .. })
        ));
        let m = diag(&[1.0, -2.0]);
        match GelfandTriple::euclidean(m) {
            Err(Error::NotPositiveDefinite { eigenvalue, .. }) => assert_eq!(eigenvalue, -2.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            GelfandTriple::new(DMatrix::identity(2, 2), DMatrix::identity(3, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn scalar_norms() {
        let t = GelfandTriple::scalar(4.0).unwrap();
        let u = DVector::from_vec(vec![1.0]);
        assert_relative_eq!(t.norm(&u, Space::Interp(1.0)).unwrap(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(
            t.norm(&u, Space::Interp(0.5)).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-15
        );
        assert_relative_eq!(t.norm(&u, Space::Dual(1.0)).unwrap(), 0.5, epsilon = 1e-15);
        assert!(t.norm(&u, Space::Interp(1.5)).is_err());
        assert!(t.norm(&u, Space::Dual(-0.1)).is_err());
    }

    #[test]
    fn opnorm_examples() {
        let t = GelfandTriple::euclidean(diag(&[1.0, 4.0])).unwrap();
        let lam = t.lambda_power(1.0);
        assert_relative_eq!(t.opnorm(&lam, 1.0, 1.0).unwrap(), 1.0, epsilon = 1e-14);
        let b = diag(&[0.0, 3.0]);
        assert_relative_eq!(t.opnorm(&b, 1.0, 0.0).unwrap(), 1.5, epsilon = 1e-14);
        let s = GelfandTriple::scalar(1.0).unwrap();
        let c = DMatrix::from_element(1, 1, -2.5);
        for g in [0.0, 0.3, 1.0] {
            assert_relative_eq!(s.opnorm(&c, g, g).unwrap(), 2.5, epsilon = 1e-15);
        }
        assert!(t.opnorm(&DMatrix::identity(3, 3), 1.0, 1.0).is_err());
    }

    #[test]
    fn nonidentity_mass() {
        let mass = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let gram = DMatrix::from_row_slice(2, 2, &[5.0, 1.0, 1.0, 3.0]);
        let t = GelfandTriple::new(mass.clone(), gram.clone()).unwrap();
        let x = t.basis();
        let ortho = x.transpose() * &mass * x;
        assert_relative_eq!(ortho, DMatrix::identity(2, 2), epsilon = 1e-13);
        let u = DVector::from_vec(vec![0.3, -1.2]);
        let v2 = u.dot(&(&gram * &u));
        assert_relative_eq!(t.v_norm(&u).powi(2), v2, epsilon = 1e-13);
        let h2 = u.dot(&(&mass * &u));
        assert_relative_eq!(t.h_norm(&u).powi(2), h2, epsilon = 1e-13);
    }
}
