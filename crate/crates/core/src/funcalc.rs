//! Functions of frozen operators `A(t) = M_H⁻¹ A_form(t)`.
//!
//! Two backends. `Eigen` diagonalizes `XᵀA_form X` (the operator in the
//! H-orthonormal Λ-basis) and falls back to `Contour` when the eigenvector
//! basis is ill-conditioned. `Contour` evaluates the semigroup by a trapezoid
//! rule on a left-opening parabola and fractional powers by the Balakrishnan
//! integral, using only shifted linear solves.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, DVector, Schur};
use serde::{Deserialize, Serialize};

use crate::formpath::{FormPath, Side};
use crate::gelfand::GelfandTriple;
use crate::linalg::{self, to_complex, vec_to_complex, C64};
use crate::quadrature::GaussRule;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Eigen,
    Contour,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourConfig {
    /// total trapezoid nodes on the parabola (conjugate pairs share one solve)
    pub nodes: usize,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig { nodes: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalakrishnanConfig {
    /// relative size of the discarded tails
    pub tail_tol: f64,
    /// trapezoid step in `s = ln μ`
    pub step: f64,
}

impl Default for BalakrishnanConfig {
    fn default() -> Self {
        // discretization error ~ exp(-2π d / step) with strip half-width d ≥ π/2
        BalakrishnanConfig {
            tail_tol: 1e-12,
            step: PI * PI / (1e-13f64).ln().abs(),
        }
    }
}

/// Eigendecomposition `A = V diag(θ) V⁻¹` of a frozen operator.
#[derive(Debug, Clone)]
pub struct Spectral {
    pub values: DVector<C64>,
    pub vectors: DMatrix<C64>,
    pub inverse: DMatrix<C64>,
    /// Frobenius condition number of the eigenvector basis in H
    pub condition: f64,
    real: Option<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)>,
}

impl Spectral {
    fn apply_fn<F: Fn(C64) -> C64>(&self, f: F, x: &DVector<f64>) -> DVector<f64> {
        if let Some((vals, v, vinv)) = &self.real {
            let mut c = vinv * x;
            for (ci, l) in c.iter_mut().zip(vals.iter()) {
                *ci *= f(C64::new(*l, 0.0)).re;
            }
            return v * c;
        }
        let mut c = &self.inverse * vec_to_complex(x);
        for (ci, l) in c.iter_mut().zip(self.values.iter()) {
            *ci *= f(*l);
        }
        (&self.vectors * c).map(|z| z.re)
    }

    fn matrix_fn<F: Fn(C64) -> C64>(&self, f: F) -> DMatrix<f64> {
        if let Some((vals, v, vinv)) = &self.real {
            let mut scaled = v.clone();
            for (j, l) in vals.iter().enumerate() {
                scaled.column_mut(j).scale_mut(f(C64::new(*l, 0.0)).re);
            }
            return scaled * vinv;
        }
        let mut scaled = self.vectors.clone();
        for (j, l) in self.values.iter().enumerate() {
            let fl = f(*l);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= fl);
        }
        (scaled * &self.inverse).map(|z| z.re)
    }
}

/// The operator at one time, with lazily computed spectral data.
#[derive(Debug)]
pub struct Frozen {
    triple: Arc<GelfandTriple>,
    form: DMatrix<f64>,
    op: DMatrix<f64>,
    spectral: OnceLock<Option<Spectral>>,
    bounds: OnceLock<(f64, f64)>,
}

impl Frozen {
    pub fn new(triple: Arc<GelfandTriple>, form: DMatrix<f64>) -> Self {
        let op = triple.h_representation(&form);
        Frozen {
            triple,
            form,
            op,
            spectral: OnceLock::new(),
            bounds: OnceLock::new(),
        }
    }

    pub fn form(&self) -> &DMatrix<f64> {
        &self.form
    }

    /// H-representation `M_H⁻¹ A_form`.
    pub fn op(&self) -> &DMatrix<f64> {
        &self.op
    }

    pub fn triple(&self) -> &Arc<GelfandTriple> {
        &self.triple
    }

    pub fn dim(&self) -> usize {
        self.op.nrows()
    }

    pub fn spectral(&self) -> Option<&Spectral> {
        self.spectral
            .get_or_init(|| {
                let x = self.triple.basis();
                let core = x.transpose() * &self.form * x;
                decompose(&core, x, self.triple.basis_inv())
            })
            .as_ref()
    }

    /// `(inf Re W, sup |W|)` for the numerical range W of the operator in H;
    /// every eigenvalue lies in that window.
    pub fn spectral_window(&self) -> (f64, f64) {
        *self.bounds.get_or_init(|| {
            let x = self.triple.basis();
            let core = x.transpose() * &self.form * x;
            let lo = linalg::sym_eigenvalues(&linalg::symmetrize(&core))[0];
            (lo, linalg::spectral_norm(&core))
        })
    }

    fn shifted_solve(&self, w: C64, rhs: &DMatrix<f64>) -> Result<DMatrix<C64>> {
        let sys = to_complex(&self.form) + to_complex(self.triple.mass()) * w;
        let lu = sys.lu();
        lu.solve(&to_complex(rhs))
            .ok_or_else(|| Error::Singular(format!("shifted system at {w}")))
    }

    fn shifted_solve_real(&self, mu: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let sys = &self.form + self.triple.mass() * mu;
        sys.lu()
            .solve(rhs)
            .ok_or_else(|| Error::Singular(format!("shifted system at {mu}")))
    }
}

fn decompose(core: &DMatrix<f64>, x: &DMatrix<f64>, xinv: &DMatrix<f64>) -> Option<Spectral> {
    let n = core.nrows();
    if linalg::relative_asymmetry(core) <= 1e-14 {
        let (vals, w) = linalg::sym_eigen(&linalg::symmetrize(core));
        let v = x * &w;
        let vinv = w.transpose() * xinv;
        return Some(Spectral {
            values: vals.map(|l| C64::new(l, 0.0)),
            vectors: to_complex(&v),
            inverse: to_complex(&vinv),
            condition: n as f64,
            real: Some((vals, v, vinv)),
        });
    }
    let (values, u) = schur_eigenvectors(core)?;
    let uinv = u.clone().try_inverse()?;
    let condition = u.norm() * uinv.norm();
    if !condition.is_finite() {
        return None;
    }
    Some(Spectral {
        values,
        vectors: to_complex(x) * u,
        inverse: uinv * to_complex(xinv),
        condition,
        real: None,
    })
}

/// Eigenpairs from the real Schur form by back substitution.
fn schur_eigenvectors(a: &DMatrix<f64>) -> Option<(DVector<C64>, DMatrix<C64>)> {
    let n = a.nrows();
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .or_else(|| Schur::try_new(a.clone(), 1e-13, 100_000))?;
    let (q, t) = schur.unpack();
    let tiny = f64::EPSILON * t.amax().max(f64::MIN_POSITIVE);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > tiny {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    let mut values = Vec::with_capacity(n);
    let mut vecs = DMatrix::<C64>::zeros(n, n);
    let tc = to_complex(&t);
    for (bi, &(r, size)) in blocks.iter().enumerate() {
        let lams: Vec<(C64, Vec<C64>)> = if size == 1 {
            vec![(tc[(r, r)], vec![C64::new(1.0, 0.0)])]
        } else {
            let (a00, a01, a10, a11) = (t[(r, r)], t[(r, r + 1)], t[(r + 1, r)], t[(r + 1, r + 1)]);
            let tr = 0.5 * (a00 + a11);
            let disc = C64::new(0.25 * (a00 - a11).powi(2) + a01 * a10, 0.0).sqrt();
            [tr + disc, tr - disc]
                .into_iter()
                .map(|l| {
                    let c1 = [C64::new(a01, 0.0), l - a00];
                    let c2 = [l - a11, C64::new(a10, 0.0)];
                    let pick = if c1[0].norm() + c1[1].norm() >= c2[0].norm() + c2[1].norm() {
                        c1
                    } else {
                        c2
                    };
                    (l, pick.to_vec())
                })
                .collect()
        };
        for (lam, head) in lams {
            let col = values.len();
            for (k, h) in head.iter().enumerate() {
                vecs[(r + k, col)] = *h;
            }
            for &(ri, si) in blocks[..bi].iter().rev() {
                let mut rhs = [C64::new(0.0, 0.0); 2];
                for (k, rk) in rhs.iter_mut().enumerate().take(si) {
                    let row = ri + k;
                    let mut acc = C64::new(0.0, 0.0);
                    for m in (ri + si)..(r + size) {
                        acc += tc[(row, m)] * vecs[(m, col)];
                    }
                    *rk = -acc;
                }
                let guard = |z: C64| if z.norm() < tiny { C64::new(tiny, 0.0) } else { z };
                if si == 1 {
                    vecs[(ri, col)] = rhs[0] / guard(tc[(ri, ri)] - lam);
                } else {
                    let b00 = tc[(ri, ri)] - lam;
                    let b01 = tc[(ri, ri + 1)];
                    let b10 = tc[(ri + 1, ri)];
                    let b11 = tc[(ri + 1, ri + 1)] - lam;
                    let det = guard(b00 * b11 - b01 * b10);
                    vecs[(ri, col)] = (rhs[0] * b11 - b01 * rhs[1]) / det;
                    vecs[(ri + 1, col)] = (b00 * rhs[1] - b10 * rhs[0]) / det;
                }
            }
            values.push(lam);
        }
    }
    let mut u = to_complex(&q) * vecs;
    for mut c in u.column_iter_mut() {
        let nrm = c.norm();
        if nrm == 0.0 || !nrm.is_finite() {
            return None;
        }
        c.unscale_mut(nrm);
    }
    Some((DVector::from_vec(values), u))
}

/// `φ₁(z) = (e^z − 1)/z` and `φ₂(z) = (e^z − 1 − z)/z²`.
pub fn phi12(z: C64) -> (C64, C64) {
    if z.norm() < 0.5 {
        let mut p1 = C64::new(0.0, 0.0);
        let mut p2 = C64::new(0.0, 0.0);
        let mut term = C64::new(1.0, 0.0);
        let mut fact1 = 1.0;
        for j in 0..24 {
            fact1 *= (j + 1) as f64;
            let fact2 = fact1 * (j + 2) as f64;
            p1 += term / fact1;
            p2 += term / fact2;
            term *= z;
        }
        (p1, p2)
    } else {
        let p1 = (z.exp() - 1.0) / z;
        let p2 = (p1 - 1.0) / z;
        (p1, p2)
    }
}

/// Exponential-integrator matrices for one step of length h:
/// `E = e^{-hA}`, `P1 = h(φ₁−φ₂)(−hA)`, `P2 = hφ₂(−hA)`, so that
/// `∫_0^h e^{-(h−s)A} g(s) ds = P1 g(0) + P2 g(h)` for linear g.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub h: f64,
    pub e: DMatrix<f64>,
    pub p1: DMatrix<f64>,
    pub p2: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KatoConstants {
    pub c1: f64,
    pub c2: f64,
    /// `C₁ ≥ 1e-8`
    pub uniform: bool,
}

type CacheKey = (u64, u64, bool);

#[derive(Debug)]
pub struct CalculusEngine {
    backend: Backend,
    pub contour: ContourConfig,
    pub balakrishnan: BalakrishnanConfig,
    /// eigenvector condition number above which the eigen backend defers to contour
    pub condition_limit: f64,
    cache: RwLock<HashMap<CacheKey, Arc<Frozen>>>,
}

impl Default for CalculusEngine {
    fn default() -> Self {
        Self::new(Backend::Eigen)
    }
}

impl Clone for CalculusEngine {
    fn clone(&self) -> Self {
        CalculusEngine {
            backend: self.backend,
            contour: self.contour,
            balakrishnan: self.balakrishnan,
            condition_limit: self.condition_limit,
            cache: RwLock::new(HashMap::new()),
        }
    }
}

impl CalculusEngine {
    pub fn new(backend: Backend) -> Self {
        CalculusEngine {
            backend,
            contour: ContourConfig::default(),
            balakrishnan: BalakrishnanConfig::default(),
            condition_limit: 1e8,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn clear_cache(&self) {
        self.cache.write().unwrap_or_else(|e| e.into_inner()).clear();
    }

    /// Frozen operator of the path at t, cached per path and time.
    pub fn freeze(&self, path: &FormPath, t: f64, side: Side) -> Result<Arc<Frozen>> {
        let key = (path.id(), t.to_bits(), side == Side::Left);
        if let Some(f) = self.cache.read().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(f.clone());
        }
        let frozen = Arc::new(Frozen::new(path.triple().clone(), path.form_side(t, side)?));
        let mut guard = self.cache.write().unwrap_or_else(|e| e.into_inner());
        Ok(guard.entry(key).or_insert(frozen).clone())
    }

    pub fn freeze_at(&self, path: &FormPath, t: f64) -> Result<Arc<Frozen>> {
        let side = if t >= path.tau() { Side::Left } else { Side::Right };
        self.freeze(path, t, side)
    }

    /// The spectral data the eigen backend would use, if acceptable.
    pub fn usable_spectral<'a>(&self, fr: &'a Frozen) -> Option<&'a Spectral> {
        if self.backend != Backend::Eigen {
            return None;
        }
        fr.spectral().filter(|s| s.condition <= self.condition_limit)
    }

    fn encloses(&self, fr: &Frozen, r: f64) -> bool {
        let omega = PI * self.contour.nodes.max(2) as f64 / (24.0 * r);
        match fr.spectral() {
            Some(s) => s
                .values
                .iter()
                .all(|l| l.im * l.im < omega * (omega + 2.0 * l.re)),
            None => true,
        }
    }

    fn contour_nodes(&self, r: f64) -> Vec<(C64, C64)> {
        let n = self.contour.nodes.max(2);
        let omega = PI * n as f64 / (24.0 * r);
        let eta = 6.0 / n as f64;
        let half = n.div_ceil(2);
        let mut out = Vec::with_capacity(half);
        for k in 0..half {
            let th = (k as f64 + 0.5 - (n % 2) as f64 * 0.5) * eta;
            let w = C64::new(1.0, th).powi(2) * omega;
            let dw = C64::new(0.0, 2.0 * omega) * C64::new(1.0, th);
            let c = (w * r).exp() * dw * eta / C64::new(0.0, 2.0 * PI);
            // conjugate partner folded in by taking twice the real part
            let weight = if n % 2 == 1 && k == 0 { c } else { c * 2.0 };
            out.push((w, weight));
        }
        out
    }

    fn contour_exp_raw(&self, fr: &Frozen, r: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut acc = DMatrix::<f64>::zeros(rhs.nrows(), rhs.ncols());
        let mrhs = fr.triple.mass() * rhs;
        for (w, c) in self.contour_nodes(r) {
            let y = fr.shifted_solve(w, &mrhs)?;
            acc.iter_mut().zip(y.iter()).for_each(|(a, z)| *a += (c * z).re);
        }
        Ok(acc)
    }

    /// Contour semigroup; splits `r` into `2^j` equal steps until the
    /// parabola encloses the spectrum with margin.
    fn contour_exp(&self, fr: &Frozen, r: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut steps = 0u32;
        while !self.encloses(fr, r / 2f64.powi(steps as i32)) {
            steps += 1;
            if steps > 40 {
                return Err(Error::Quadrature {
                    what: format!("spectrum cannot be enclosed for r = {r}"),
                    residual: r,
                });
            }
        }
        if steps == 0 {
            return self.contour_exp_raw(fr, r, rhs);
        }
        let n = fr.dim();
        let mut e = self.contour_exp_raw(fr, r / 2f64.powi(steps as i32), &DMatrix::identity(n, n))?;
        for _ in 0..steps {
            e = &e * &e;
        }
        Ok(e * rhs)
    }

    /// `e^{-rA}` as a matrix.
    pub fn exp_matrix(&self, fr: &Frozen, r: f64) -> Result<DMatrix<f64>> {
        check_duration(r)?;
        let n = fr.dim();
        if r == 0.0 {
            return Ok(DMatrix::identity(n, n));
        }
        if let Some(s) = self.usable_spectral(fr) {
            return Ok(s.matrix_fn(|l| (-l * r).exp()));
        }
        self.contour_exp(fr, r, &DMatrix::identity(n, n))
    }

    /// `e^{-rA} x`.
    pub fn exp_apply(&self, fr: &Frozen, r: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_duration(r)?;
        linalg::check_len(x, fr.dim())?;
        if r == 0.0 {
            return Ok(x.clone());
        }
        if let Some(s) = self.usable_spectral(fr) {
            return Ok(s.apply_fn(|l| (-l * r).exp(), x));
        }
        let rhs = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
        Ok(self.contour_exp(fr, r, &rhs)?.column(0).into_owned())
    }

    pub fn propagator(&self, fr: &Frozen, h: f64) -> Result<Propagator> {
        if !(h > 0.0) {
            return Err(Error::range("step", h, "(0, inf)"));
        }
        if let Some(s) = self.usable_spectral(fr) {
            let e = s.matrix_fn(|l| (-l * h).exp());
            let p1 = s.matrix_fn(|l| {
                let (a, b) = phi12(-l * h);
                (a - b) * h
            });
            let p2 = s.matrix_fn(|l| phi12(-l * h).1 * h);
            return Ok(Propagator { h, e, p1, p2 });
        }
        let n = fr.dim();
        let e = self.contour_exp(fr, h, &DMatrix::identity(n, n))?;
        let lu = (fr.op() * h).lu();
        let id = DMatrix::<f64>::identity(n, n);
        let phi1 = lu
            .solve(&(&id - &e))
            .ok_or_else(|| Error::Singular("operator not invertible".into()))?;
        let phi2 = lu
            .solve(&(&id - &phi1))
            .ok_or_else(|| Error::Singular("operator not invertible".into()))?;
        Ok(Propagator {
            h,
            e,
            p1: (&phi1 - &phi2) * h,
            p2: phi2 * h,
        })
    }

    /// `(μ + A)⁻¹ x` by a direct solve of `(μ M_H + A_form) y = M_H x`.
    pub fn resolvent_apply(&self, fr: &Frozen, mu: C64, x: &DVector<C64>) -> Result<DVector<C64>> {
        if x.len() != fr.dim() {
            return Err(Error::DimensionMismatch {
                expected: fr.dim(),
                got: x.len(),
            });
        }
        let mass = to_complex(fr.triple.mass());
        let sys = to_complex(&fr.form) + &mass * mu;
        let rhs = &mass * x;
        let y = sys
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular(format!("mu = {mu} in the spectrum")))?;
        let res = (&sys * &y - &rhs).norm();
        if !(res <= 1e-10 * rhs.norm().max(f64::MIN_POSITIVE)) || y.iter().any(|z| !z.is_finite()) {
            return Err(Error::Singular(format!(
                "mu = {mu} numerically in the spectrum (residual {res:.3e})"
            )));
        }
        Ok(y)
    }

    /// `(μ + A)⁻¹` as an H-operator for real μ.
    pub fn resolvent_matrix(&self, fr: &Frozen, mu: f64) -> Result<DMatrix<f64>> {
        fr.shifted_solve_real(mu, fr.triple.mass())
    }

    /// `A^{-α}` for α in (0, 1) by the Balakrishnan integral in `s = ln μ`.
    fn balakrishnan(&self, fr: &Frozen, alpha: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (lo, hi) = fr.spectral_window();
        if !(lo > 0.0) {
            return Err(Error::Degenerate(format!(
                "operator not coercive (numerical range reaches {lo:.3e})"
            )));
        }
        let tol = self.balakrishnan.tail_tol;
        let h = self.balakrishnan.step;
        let s_lo = lo.ln() + (tol * (1.0 - alpha)).ln() / (1.0 - alpha);
        let s_hi = hi.ln() - (tol * alpha).ln() / alpha;
        let count = ((s_hi - s_lo) / h).ceil() as usize;
        let mrhs = fr.triple.mass() * rhs;
        let mut acc = DMatrix::<f64>::zeros(rhs.nrows(), rhs.ncols());
        for k in 0..=count {
            let s = s_lo + k as f64 * h;
            let mu = s.exp();
            let y = fr.shifted_solve_real(mu, &mrhs)?;
            acc += y * (mu.powf(1.0 - alpha) * h);
        }
        Ok(acc * ((alpha * PI).sin() / PI))
    }

    fn contour_power(&self, fr: &Frozen, exponent: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if exponent == 0.0 {
            return Ok(rhs.clone());
        }
        if exponent == 1.0 {
            return Ok(fr.op() * rhs);
        }
        if exponent < 0.0 {
            return self.balakrishnan(fr, -exponent, rhs);
        }
        Ok(fr.op() * self.balakrishnan(fr, 1.0 - exponent, rhs)?)
    }

    /// `A^s` for s in [−1, 1] (principal branch).
    pub fn power_matrix(&self, fr: &Frozen, exponent: f64) -> Result<DMatrix<f64>> {
        check_exponent(exponent)?;
        let n = fr.dim();
        if let Some(s) = self.usable_spectral(fr) {
            return Ok(s.matrix_fn(|l| l.powf(exponent)));
        }
        if exponent == -1.0 {
            return fr
                .op()
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Singular("operator not invertible".into()));
        }
        let p = self.contour_power(fr, exponent, &DMatrix::identity(n, n))?;
        if exponent == -0.5 {
            let res = (&p * &p * fr.op() - DMatrix::<f64>::identity(n, n)).norm() / (n as f64).sqrt();
            if res > 1e-8 {
                return Err(Error::Quadrature {
                    what: "Balakrishnan square root".into(),
                    residual: res,
                });
            }
        }
        Ok(p)
    }

    pub fn power_apply(&self, fr: &Frozen, exponent: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_exponent(exponent)?;
        linalg::check_len(x, fr.dim())?;
        if let Some(s) = self.usable_spectral(fr) {
            return Ok(s.apply_fn(|l| l.powf(exponent), x));
        }
        if exponent == -1.0 {
            return fr
                .op()
                .clone()
                .lu()
                .solve(x)
                .ok_or_else(|| Error::Singular("operator not invertible".into()));
        }
        let rhs = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
        Ok(self.contour_power(fr, exponent, &rhs)?.column(0).into_owned())
    }

    /// `e^{-rA(t)} x`.
    pub fn semigroup(&self, path: &FormPath, t: f64, r: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        let fr = self.freeze_at(path, t)?;
        self.exp_apply(&fr, r, x)
    }

    /// `(μ + A(t))⁻¹ x`.
    pub fn resolvent(&self, path: &FormPath, t: f64, mu: C64, x: &DVector<C64>) -> Result<DVector<C64>> {
        let fr = self.freeze_at(path, t)?;
        self.resolvent_apply(&fr, mu, x)
    }

    /// `A(t)^s x` for `s ∈ {−1/2, 1/2} ∪ {1/p : p ≥ 2}` (any s in [−1, 1] is accepted).
    pub fn frac_power(&self, path: &FormPath, t: f64, exponent: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        let fr = self.freeze_at(path, t)?;
        self.power_apply(&fr, exponent, x)
    }

    /// Extreme H-singular values of `A(t)^{1/2} Λ^{-1/2}` over the given times.
    pub fn kato_constants(&self, path: &FormPath, times: &[f64]) -> Result<KatoConstants> {
        if times.is_empty() {
            return Err(Error::invalid("no times given"));
        }
        let tr = path.triple();
        let inv_sqrt = tr.lambda_power(-0.5);
        let mut c1 = f64::INFINITY;
        let mut c2 = 0.0f64;
        for &t in times {
            let fr = self.freeze_at(path, t)?;
            let root = self.power_matrix(&fr, 0.5)?;
            let sv = tr.h_singular_values(&(root * &inv_sqrt));
            c2 = c2.max(sv[0]);
            c1 = c1.min(sv[sv.len() - 1]);
        }
        Ok(KatoConstants {
            c1,
            c2,
            uniform: c1 >= 1e-8,
        })
    }
}

fn check_duration(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::range("duration", r, "[0, inf)"))
    }
}

fn check_exponent(s: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::range("exponent", s, "[-1, 1]"))
    }
}

/// `∫_0^∞ e^{-r d} (1 + r)^{γ/2 − 1} dr` together with `Γ(γ/2) d^{-γ/2}`.
pub fn laplace_weight_check(d: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(d > 0.0) {
        return Err(Error::range("time gap", d, "(0, inf)"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::range("gamma", gamma, "(0, 1]"));
    }
    let e = 0.5 * gamma - 1.0;
    let rule = GaussRule::new(20);
    // in v = r d the integrand is e^{-v} (1 + v/d)^e; grade panels towards v = 0
    let mut edges = vec![0.0];
    let mut x = (d * 1e-6).min(1e-3);
    while x < 60.0 {
        edges.push(x);
        x *= 2.0;
    }
    edges.push(60.0);
    let lhs: f64 = edges
        .windows(2)
        .map(|w| rule.integrate(w[0], w[1], |v| (-v).exp() * (1.0 + v / d).powf(e)))
        .sum::<f64>()
        / d;
    let rhs = statrs::function::gamma::gamma(0.5 * gamma) / d.powf(0.5 * gamma);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formpath::Interp;
    use approx::assert_relative_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    fn diag_path(v: &[f64]) -> FormPath {
        let tr = Arc::new(GelfandTriple::euclidean(diag(v)).unwrap());
        FormPath::constant(tr, diag(v), 1.0).unwrap()
    }

    fn engines() -> [CalculusEngine; 2] {
        [CalculusEngine::new(Backend::Eigen), CalculusEngine::new(Backend::Contour)]
    }

    #[test]
    fn scalar_semigroup() {
        let p = FormPath::scalar(1.0, 1.0, 1, Interp::PiecewiseLinear, |_| 1.0).unwrap();
        for e in engines() {
            let x = DVector::from_vec(vec![1.0]);
            let y = e.semigroup(&p, 0.0, 1.0, &x).unwrap();
            assert_relative_eq!(y[0], (-1.0f64).exp(), epsilon = 1e-10);
            assert_eq!(e.semigroup(&p, 0.0, 0.0, &x).unwrap(), x);
        }
    }

    #[test]
    fn diagonal_semigroup() {
        let p = diag_path(&[1.0, 4.0]);
        for e in engines() {
            let y = e
                .semigroup(&p, 0.3, 0.5, &DVector::from_vec(vec![1.0, 1.0]))
                .unwrap();
            assert_relative_eq!(y[0], (-0.5f64).exp(), epsilon = 1e-10);
            assert_relative_eq!(y[1], (-2.0f64).exp(), epsilon = 1e-10);
        }
    }

    #[test]
    fn resolvent_examples() {
        let e = CalculusEngine::default();
        let p = FormPath::scalar(1.0, 1.0, 1, Interp::PiecewiseLinear, |_| 1.0).unwrap();
        let one = DVector::from_vec(vec![C64::new(1.0, 0.0)]);
        let y = e.resolvent(&p, 0.0, C64::new(1.0, 0.0), &one).unwrap();
        assert_relative_eq!(y[0].re, 0.5, epsilon = 1e-15);
        let d = diag_path(&[1.0, 4.0]);
        let x = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(4.0, 0.0)]);
        let y = e.resolvent(&d, 0.0, C64::new(0.0, 0.0), &x).unwrap();
        assert_relative_eq!(y[0].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(y[1].re, 1.0, epsilon = 1e-15);
        let z = FormPath::scalar(1.0, 1.0, 1, Interp::PiecewiseLinear, |_| -2.0).unwrap();
        assert!(e.resolvent(&z, 0.0, C64::new(2.0, 0.0), &one).is_err());
    }

    #[test]
    fn power_examples() {
        for e in engines() {
            let p = FormPath::scalar(1.0, 1.0, 1, Interp::PiecewiseLinear, |_| 4.0).unwrap();
            let one = DVector::from_vec(vec![1.0]);
            assert_relative_eq!(e.frac_power(&p, 0.0, 0.5, &one).unwrap()[0], 2.0, epsilon = 1e-9);
            let d = diag_path(&[1.0, 4.0]);
            let y = e
                .frac_power(&d, 0.0, -0.5, &DVector::from_vec(vec![1.0, 2.0]))
                .unwrap();
            assert_relative_eq!(y[0], 1.0, epsilon = 1e-9);
            assert_relative_eq!(y[1], 1.0, epsilon = 1e-9);
            let c = FormPath::scalar(1.0, 1.0, 1, Interp::PiecewiseLinear, |_| 8.0).unwrap();
            assert_relative_eq!(
                e.frac_power(&c, 0.0, 1.0 / 3.0, &one).unwrap()[0],
                2.0,
                epsilon = 1e-9
            );
        }
    }

    fn convection_path() -> FormPath {
        let n = 6;
        let h = 1.0 / (n + 1) as f64;
        let mass = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 4.0 * h / 6.0,
            1 => h / 6.0,
            _ => 0.0,
        });
        let stiff = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0 / h,
            1 => -1.0 / h,
            _ => 0.0,
        });
        let conv = DMatrix::from_fn(n, n, |i, j| {
            if j == i + 1 {
                0.5
            } else if i == j + 1 {
                -0.5
            } else {
                0.0
            }
        });
        let tr = Arc::new(GelfandTriple::new(mass.clone(), &mass + &stiff).unwrap());
        FormPath::sample(tr, 1.0, 4, Interp::PiecewiseLinear, move |t| {
            &stiff * (1.0 + 0.5 * t) + &conv * 30.0
        })
        .unwrap()
    }

    #[test]
    fn backends_agree_on_nonsymmetric_operator() {
        let p = convection_path();
        let [eig, con] = engines();
        let fr = eig.freeze_at(&p, 0.4).unwrap();
        assert!(eig.usable_spectral(&fr).is_some());
        assert!(fr.spectral().unwrap().values.iter().any(|l| l.im.abs() > 0.0));
        for r in [1e-3, 0.01, 0.05] {
            let a = eig.exp_matrix(&fr, r).unwrap();
            let b = con.exp_matrix(&fr, r).unwrap();
            assert!((&a - &b).norm() <= 1e-7 * a.norm(), "r = {r}");
        }
        // far out the semigroup is negligible; the split contour stays accurate in absolute terms
        let a = eig.exp_matrix(&fr, 0.7).unwrap();
        let b = con.exp_matrix(&fr, 0.7).unwrap();
        assert!((&a - &b).norm() <= 1e-12);
        let a = eig.power_matrix(&fr, 0.5).unwrap();
        let b = con.power_matrix(&fr, 0.5).unwrap();
        assert!((&a - &b).norm() <= 1e-7 * a.norm());
        assert!((&a * &a - fr.op()).norm() <= 1e-7 * fr.op().norm());
        let pa = eig.propagator(&fr, 0.01).unwrap();
        let pb = con.propagator(&fr, 0.01).unwrap();
        assert!((&pa.p1 - &pb.p1).norm() <= 1e-7 * pa.p1.norm());
        assert!((&pa.p2 - &pb.p2).norm() <= 1e-7 * pa.p2.norm());
    }

    #[test]
    fn semigroup_property_and_adjoint() {
        let p = convection_path();
        let adj = p.adjoint().unwrap();
        let e = CalculusEngine::default();
        let fr = e.freeze_at(&p, 0.2).unwrap();
        let fa = e.freeze_at(&adj, 0.2).unwrap();
        let a = e.exp_matrix(&fr, 0.3).unwrap();
        let b = e.exp_matrix(&fr, 0.2).unwrap();
        let ab = e.exp_matrix(&fr, 0.5).unwrap();
        assert!((&a * &b - &ab).norm() <= 1e-9 * ab.norm());
        let ea = e.exp_matrix(&fa, 0.3).unwrap();
        let want = p.triple().h_adjoint(&a);
        assert!((&ea - &want).norm() <= 1e-9 * want.norm());
    }

    #[test]
    fn propagator_integrates_linear_data() {
        // scalar λ: ∫_0^h e^{-λ(h-s)} (g0 + (g1-g0) s/h) ds
        let lam = 3.0;
        let h = 0.4;
        let p = FormPath::scalar(1.0, 1.0, 1, Interp::PiecewiseLinear, |_| lam).unwrap();
        for e in engines() {
            let fr = e.freeze_at(&p, 0.0).unwrap();
            let pr = e.propagator(&fr, h).unwrap();
            let rule = GaussRule::new(20);
            let w0 = rule.integrate(0.0, h, |s| (-lam * (h - s)).exp() * (1.0 - s / h));
            let w1 = rule.integrate(0.0, h, |s| (-lam * (h - s)).exp() * s / h);
            assert_relative_eq!(pr.p1[(0, 0)], w0, epsilon = 1e-10);
            assert_relative_eq!(pr.p2[(0, 0)], w1, epsilon = 1e-10);
        }
    }

    #[test]
    fn phi_series_and_direct_agree() {
        for z in [C64::new(-0.49, 0.0), C64::new(0.3, 0.35), C64::new(-0.01, 0.0)] {
            let (a, b) = phi12(z);
            let a2 = (z.exp() - 1.0) / z;
            let b2 = (z.exp() - 1.0 - z) / (z * z);
            assert!((a - a2).norm() < 1e-13);
            assert!((b - b2).norm() < 1e-9);
        }
        let (a, b) = phi12(C64::new(0.0, 0.0));
        assert_eq!((a.re, b.re), (1.0, 0.5));
    }

    #[test]
    fn kato_symmetric_scalar() {
        let p = FormPath::scalar(1.0, 1.0, 4, Interp::PiecewiseLinear, |t| 1.0 + 3.0 * t).unwrap();
        let e = CalculusEngine::default();
        let k = e.kato_constants(&p, p.grid()).unwrap();
        assert_relative_eq!(k.c1, 1.0, epsilon = 1e-12);
        assert_relative_eq!(k.c2, 2.0, epsilon = 1e-12);
        assert!(k.uniform);
    }

    #[test]
    fn kato_constant_equals_bridge() {
        let d = diag_path(&[1.0, 9.0]);
        let k = CalculusEngine::default().kato_constants(&d, &[0.0]).unwrap();
        assert_relative_eq!(k.c1, 1.0, epsilon = 1e-12);
        assert_relative_eq!(k.c2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn laplace_weight_bound() {
        for d in [1e-3, 0.1, 1.0, 10.0] {
            for g in [0.25, 0.5, 1.0] {
                let (lhs, rhs) = laplace_weight_check(d, g).unwrap();
                assert!(lhs <= rhs, "d={d} g={g}: {lhs} > {rhs}");
                assert!(lhs > 0.0);
            }
        }
        // γ = 2 would make the weight 1: ∫ e^{-rd} dr = 1/d; check γ = 1 exactly on a large gap
        let (lhs, _) = laplace_weight_check(1e4, 1.0).unwrap();
        assert_relative_eq!(lhs, 1e-4, max_relative = 1e-3);
    }
}
