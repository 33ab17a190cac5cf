//! One-dimensional finite-element problems on `[0, 1]` as form paths, and
//! coefficient paths of prescribed time regularity.
//!
//! Piecewise-linear hat functions; coefficients are elementwise constants
//! integrated by the midpoint rule. `M_H` is the mass matrix and `G_V` the
//! mass plus unit-coefficient stiffness, so V is H¹₀ (Dirichlet) or H¹.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::duhamel::Forcing;
use crate::formpath::{FormPath, Interp};
use crate::gelfand::GelfandTriple;
use crate::{Error, Result};

/// Trace exponent surplus: Robin difference forms are measured in `V′_γ`
/// with `γ = 1/2 + ε_tr`.
pub const TRACE_EPS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Dirichlet,
    Neumann,
    Robin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fem1D {
    dofs: usize,
    bc: Boundary,
    h: f64,
}

impl Fem1D {
    /// `dofs` unknowns: interior nodes for Dirichlet (`h = 1/(n+1)`), all
    /// nodes otherwise (`h = 1/(n−1)`).
    pub fn new(dofs: usize, bc: Boundary) -> Result<Self> {
        let h = match bc {
            Boundary::Dirichlet if dofs >= 1 => 1.0 / (dofs + 1) as f64,
            Boundary::Neumann | Boundary::Robin if dofs >= 2 => 1.0 / (dofs - 1) as f64,
            _ => return Err(Error::invalid(format!("too few nodes ({dofs}) for {bc:?}"))),
        };
        Ok(Fem1D { dofs, bc, h })
    }

    pub fn dofs(&self) -> usize {
        self.dofs
    }

    pub fn bc(&self) -> Boundary {
        self.bc
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn elements(&self) -> usize {
        match self.bc {
            Boundary::Dirichlet => self.dofs + 1,
            _ => self.dofs - 1,
        }
    }

    pub fn element_midpoints(&self) -> Vec<f64> {
        (0..self.elements()).map(|e| (e as f64 + 0.5) * self.h).collect()
    }

    /// Coordinates of the unknowns.
    pub fn node_coords(&self) -> Vec<f64> {
        let off = if self.bc == Boundary::Dirichlet { 1 } else { 0 };
        (0..self.dofs).map(|i| (i + off) as f64 * self.h).collect()
    }

    fn element_dofs(&self, e: usize) -> [Option<usize>; 2] {
        match self.bc {
            Boundary::Dirichlet => [e.checked_sub(1), (e < self.dofs).then_some(e)],
            _ => [Some(e), Some(e + 1)],
        }
    }

    fn assemble<F: Fn(usize) -> [[f64; 2]; 2]>(&self, local: F) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dofs, self.dofs);
        for e in 0..self.elements() {
            let k = local(e);
            let d = self.element_dofs(e);
            for a in 0..2 {
                for b in 0..2 {
                    if let (Some(i), Some(j)) = (d[a], d[b]) {
                        m[(i, j)] += k[a][b];
                    }
                }
            }
        }
        m
    }

    fn check_coefs(&self, what: &str, c: &[f64]) -> Result<()> {
        if c.len() != self.elements() {
            return Err(Error::DimensionMismatch {
                expected: self.elements(),
                got: c.len(),
            });
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("{what} coefficient not finite")));
        }
        Ok(())
    }

    pub fn mass(&self) -> DMatrix<f64> {
        let h = self.h;
        self.assemble(|_| [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]])
    }

    /// `∫ c u′ v′` with c constant per element.
    pub fn stiffness(&self, c: &[f64]) -> Result<DMatrix<f64>> {
        self.check_coefs("diffusion", c)?;
        let h = self.h;
        Ok(self.assemble(|e| [[c[e] / h, -c[e] / h], [-c[e] / h, c[e] / h]]))
    }

    pub fn unit_stiffness(&self) -> DMatrix<f64> {
        self.stiffness(&vec![1.0; self.elements()])
            .expect("unit coefficients are valid")
    }

    /// `∫ b u′ v` (row: test function, column: trial function).
    pub fn convection(&self, b: &[f64]) -> Result<DMatrix<f64>> {
        self.check_coefs("convection", b)?;
        Ok(self.assemble(|e| [[-0.5 * b[e], 0.5 * b[e]], [-0.5 * b[e], 0.5 * b[e]]]))
    }

    /// `∫ m u v`.
    pub fn reaction(&self, m: &[f64]) -> Result<DMatrix<f64>> {
        self.check_coefs("reaction", m)?;
        let h = self.h;
        Ok(self.assemble(|e| {
            let s = m[e] * h / 6.0;
            [[2.0 * s, s], [s, 2.0 * s]]
        }))
    }

    /// `e₀e₀ᵀ + e_N e_Nᵀ`: the boundary term `u(0)v(0) + u(1)v(1)`.
    pub fn boundary(&self) -> Result<DMatrix<f64>> {
        if self.bc == Boundary::Dirichlet {
            return Err(Error::invalid("boundary term needs free end nodes"));
        }
        let mut b = DMatrix::zeros(self.dofs, self.dofs);
        b[(0, 0)] = 1.0;
        b[(self.dofs - 1, self.dofs - 1)] = 1.0;
        Ok(b)
    }

    pub fn triple(&self) -> Result<GelfandTriple> {
        let mass = self.mass();
        let gram = &mass + self.unit_stiffness();
        GelfandTriple::new(mass, gram)
    }

    /// Nodal interpolant of a function of x.
    pub fn interpolate<F: Fn(f64) -> f64>(&self, f: F) -> DVector<f64> {
        DVector::from_iterator(self.dofs, self.node_coords().into_iter().map(f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Constant,
    /// `ψ(t) = t/τ`
    Affine,
    Holder,
    FourierH,
    PiecewiseJump,
    /// independent uniform samples in `[lo, hi]` per time and element
    Random,
    File,
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        write!(f, "{}", s.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

fn default_mid() -> f64 {
    1.5
}
fn default_amp() -> f64 {
    0.5
}
fn default_alpha() -> f64 {
    0.75
}
fn default_terms() -> usize {
    64
}
fn default_lo() -> f64 {
    1.0
}
fn default_hi() -> f64 {
    3.0
}

/// Generator parameters. Values are `c(t, x) = mid + amp·ψ(t)·w(x)` with
/// `w(x) = cos(πx)` on element midpoints (`w ≡ 1` for scalar paths).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathParams {
    #[serde(default = "default_mid")]
    pub mid: f64,
    #[serde(default = "default_amp")]
    pub amp: f64,
    /// Hölder exponent or Fourier decay exponent
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// period of the Hölder profile (defaults to τ)
    pub period: Option<f64>,
    /// number of Fourier modes
    #[serde(default = "default_terms")]
    pub terms: usize,
    pub seed: u64,
    pub jumps: Vec<f64>,
    /// ψ on the pieces between jumps; defaults to alternating ∓1
    pub levels: Vec<f64>,
    /// spatial columns (0: one spatially constant column)
    pub elements: usize,
    /// required range `[α_ell, M_ell]` of every value
    pub window: Option<[f64; 2]>,
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
    /// piecewise-constant instead of piecewise-linear interpolation (random paths)
    pub piecewise_constant: bool,
}

impl Default for PathParams {
    fn default() -> Self {
        PathParams {
            mid: default_mid(),
            amp: default_amp(),
            alpha: default_alpha(),
            period: None,
            terms: default_terms(),
            seed: 0,
            jumps: Vec::new(),
            levels: Vec::new(),
            elements: 0,
            window: None,
            lo: default_lo(),
            hi: default_hi(),
            piecewise_constant: false,
        }
    }
}

/// A sampled coefficient `c(t_k, x_e)`; one column for spatially constant
/// coefficients, one per element otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPath {
    pub kind: PathKind,
    pub params: PathParams,
    pub grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub interp: Interp,
    pub breakpoints: Vec<f64>,
    /// smallest and largest value
    pub window: (f64, f64),
}

impl CoefficientPath {
    pub fn new(kind: PathKind, params: PathParams, grid: Vec<f64>, values: Vec<Vec<f64>>, interp: Interp) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::invalid("coefficient path needs one row per time sample (at least two)"));
        }
        if grid[0] != 0.0 {
            return Err(Error::range("first time sample", grid[0], "0"));
        }
        if let Some(w) = grid.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(format!("time column not increasing at {} -> {}", w[0], w[1])));
        }
        let cols = values[0].len();
        if cols == 0 || values.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("rows of unequal length"));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (k, row) in values.iter().enumerate() {
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("non-finite value at t = {}", grid[k])));
                }
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if let Some([a, b]) = params.window {
            if lo < a || hi > b {
                let bad = if lo < a { lo } else { hi };
                return Err(Error::range("coefficient (ellipticity window)", bad, &format!("[{a}, {b}]")));
            }
        }
        Ok(CoefficientPath {
            kind,
            params,
            grid,
            values,
            interp,
            breakpoints: Vec::new(),
            window: (lo, hi),
        })
    }

    pub fn tau(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn columns(&self) -> usize {
        self.values[0].len()
    }

    /// Row k broadcast to `elements` columns.
    pub fn row(&self, k: usize, elements: usize) -> Result<Vec<f64>> {
        let r = &self.values[k];
        match r.len() {
            1 => Ok(vec![r[0]; elements]),
            n if n == elements => Ok(r.clone()),
            n => Err(Error::DimensionMismatch { expected: elements, got: n }),
        }
    }

    /// Value of a single-column path at time t.
    pub fn scalar_at(&self, t: f64) -> f64 {
        let kmax = self.grid.len() - 2;
        let k = self.grid.partition_point(|&g| g <= t).saturating_sub(1).min(kmax);
        let th = ((t - self.grid[k]) / (self.grid[k + 1] - self.grid[k])).clamp(0.0, 1.0);
        match self.interp {
            Interp::PiecewiseLinear => self.values[k][0] * (1.0 - th) + self.values[k + 1][0] * th,
            Interp::PiecewiseConstantLeft => {
                if th >= 1.0 && k + 2 < self.grid.len() {
                    self.values[k + 1][0]
                } else {
                    self.values[k][0]
                }
            }
        }
    }
}

/// Uniform sample grid with `points` samples on `[0, τ]`.
pub fn uniform_grid(tau: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid("need tau > 0 and at least two grid points"));
    }
    let cells = points - 1;
    Ok((0..points)
        .map(|k| if k == cells { tau } else { tau * k as f64 / cells as f64 })
        .collect())
}

fn spatial_profile(elements: usize) -> Vec<f64> {
    if elements <= 1 {
        return vec![1.0];
    }
    (0..elements)
        .map(|e| (PI * (e as f64 + 0.5) / elements as f64).cos())
        .collect()
}

/// Random-sign Fourier profile, normalized by `(Σ k^{−(1+2α)})^{1/2}` and
/// clipped to `[−1, 1]` (clipping is 1-Lipschitz, so fractional regularity
/// below 1 is kept).
fn fourier_profile(params: &PathParams, tau: f64) -> impl Fn(f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let decay = 0.5 + params.alpha;
    let coefs: Vec<f64> = (1..=params.terms)
        .map(|k| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * (k as f64).powf(-decay)
        })
        .collect();
    let norm = coefs.iter().map(|c| c * c).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    move |t| {
        let s: f64 = coefs
            .iter()
            .enumerate()
            .map(|(k, c)| c * (PI * (k + 1) as f64 * t / tau).cos())
            .sum();
        (s / norm).clamp(-1.0, 1.0)
    }
}

/// Samples a coefficient path of the given kind on `grid` (jump times are
/// added to the grid for piecewise-jump paths).
pub fn generate_path(kind: PathKind, params: &PathParams, grid: &[f64]) -> Result<CoefficientPath> {
    if grid.len() < 2 {
        return Err(Error::invalid("need at least two grid points"));
    }
    let tau = grid[grid.len() - 1];
    let w = spatial_profile(params.elements);
    let profile_values = |psi: &dyn Fn(f64) -> f64, times: &[f64]| -> Vec<Vec<f64>> {
        times
            .iter()
            .map(|&t| {
                let p = psi(t);
                w.iter().map(|wx| params.mid + params.amp * p * wx).collect()
            })
            .collect()
    };
    let mut grid = grid.to_vec();
    let mut interp = Interp::PiecewiseLinear;
    let mut breakpoints = Vec::new();
    let values = match kind {
        PathKind::Constant => profile_values(&|_| 0.0, &grid),
        PathKind::Affine => profile_values(&|t| t / tau, &grid),
        PathKind::Holder => {
            if !(params.alpha > 0.0 && params.alpha <= 1.0) {
                return Err(Error::range("Hölder exponent", params.alpha, "(0, 1]"));
            }
            let period = params.period.unwrap_or(tau);
            if !(period > 0.0) {
                return Err(Error::range("period", period, "(0, inf)"));
            }
            let a = params.alpha;
            profile_values(
                &|t| {
                    let s = (2.0 * PI * t / period).sin();
                    s.signum() * s.abs().powf(a)
                },
                &grid,
            )
        }
        PathKind::FourierH => {
            if !(params.alpha > 0.0) || params.terms == 0 {
                return Err(Error::invalid("fourier path needs alpha > 0 and at least one term"));
            }
            let psi = fourier_profile(params, tau);
            profile_values(&psi, &grid)
        }
        PathKind::PiecewiseJump => {
            let mut jumps = params.jumps.clone();
            jumps.sort_by(f64::total_cmp);
            jumps.dedup();
            if let Some(&j) = jumps.iter().find(|&&j| !(j > 0.0 && j < tau)) {
                return Err(Error::range("jump time", j, &format!("(0, {tau})")));
            }
            let levels: Vec<f64> = if params.levels.is_empty() {
                (0..=jumps.len()).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect()
            } else if params.levels.len() == jumps.len() + 1 {
                params.levels.clone()
            } else {
                return Err(Error::invalid(format!(
                    "{} jumps need {} levels, got {}",
                    jumps.len(),
                    jumps.len() + 1,
                    params.levels.len()
                )));
            };
            grid.extend(jumps.iter().copied());
            grid.sort_by(f64::total_cmp);
            grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * tau);
            interp = Interp::PiecewiseConstantLeft;
            breakpoints = jumps.clone();
            let psi = |t: f64| levels[jumps.partition_point(|&j| j <= t * (1.0 + 1e-15))];
            profile_values(&psi, &grid)
        }
        PathKind::Random => {
            if !(params.hi >= params.lo) {
                return Err(Error::invalid("random path needs lo <= hi"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            if params.piecewise_constant {
                interp = Interp::PiecewiseConstantLeft;
            }
            let cols = w.len();
            grid.iter()
                .map(|_| (0..cols).map(|_| rng.random_range(params.lo..=params.hi)).collect())
                .collect()
        }
        PathKind::File => return Err(Error::invalid("file paths are read with ingest")),
    };
    let mut path = CoefficientPath::new(kind, params.clone(), grid, values, interp)?;
    path.breakpoints = breakpoints;
    Ok(path)
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Reads a CSV series with header `t,value` or `t,v_1,…,v_E`.
pub fn ingest_reader<R: Read>(reader: R) -> Result<CoefficientPath> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, 1, e.to_string()))?
        .clone();
    if header.len() < 2 || header.get(0) != Some("t") {
        return Err(parse_err(1, 1, "header must start with \"t\" followed by value columns"));
    }
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, 1, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(parse_err(line, rec.len().min(header.len()) + 1, "wrong number of fields"));
        }
        let mut row = Vec::with_capacity(rec.len() - 1);
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, col + 1, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, col + 1, "value is not finite"));
            }
            if col == 0 {
                if let Some(&prev) = grid.last() {
                    if !(v > prev) {
                        return Err(parse_err(line, 1, format!("time {v} does not increase (previous {prev})")));
                    }
                }
                grid.push(v);
            } else {
                row.push(v);
            }
        }
        values.push(row);
    }
    let params = PathParams {
        elements: if header.len() > 2 { header.len() - 1 } else { 0 },
        ..Default::default()
    };
    CoefficientPath::new(PathKind::File, params, grid, values, Interp::PiecewiseLinear)
}

pub fn ingest(file: &Path) -> Result<CoefficientPath> {
    ingest_reader(std::fs::File::open(file)?)
}

pub fn export_writer<W: Write>(path: &CoefficientPath, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    if path.columns() == 1 {
        header.push("value".into());
    } else {
        header.extend((1..=path.columns()).map(|i| format!("v_{i}")));
    }
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&header).map_err(io)?;
    for (t, row) in path.grid.iter().zip(&path.values) {
        let mut rec = vec![t.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export(path: &CoefficientPath, file: &Path) -> Result<()> {
    export_writer(path, std::fs::File::create(file)?)
}

/// An assembled problem with the data the solvers need to choose a pipeline.
#[derive(Debug, Clone)]
pub struct Problem {
    pub path: FormPath,
    pub fem: Option<Fem1D>,
    pub coefficient: CoefficientPath,
    /// exponent for which the difference bound is recorded
    pub gamma: f64,
    /// `sup ‖A(t) − A(s)‖_{L(V,H)}` when the problem has lower-order time dependence only
    pub m0: Option<f64>,
    pub gamma0_eligible: bool,
}

fn check_ellipticity(c: &CoefficientPath) -> Result<()> {
    if c.window.0 <= 0.0 {
        return Err(Error::range("diffusion coefficient (ellipticity)", c.window.0, "(0, inf)"));
    }
    Ok(())
}

fn fem_triple(fem: &Fem1D) -> Result<Arc<GelfandTriple>> {
    Ok(Arc::new(fem.triple()?))
}

/// `a(t, u, v) = ∫ c(t, x) u′ v′ dx` on the coefficient's sample grid.
pub fn assemble_elliptic(coeff: &CoefficientPath, bc: Boundary, nodes: usize) -> Result<FormPath> {
    check_ellipticity(coeff)?;
    let fem = Fem1D::new(nodes, bc)?;
    let triple = fem_triple(&fem)?;
    let ne = fem.elements();
    let forms = (0..coeff.grid.len())
        .into_par_iter()
        .map(|k| fem.stiffness(&coeff.row(k, ne)?))
        .collect::<Result<Vec<_>>>()?;
    let path = FormPath::new(triple, coeff.grid.clone(), forms, coeff.interp)?;
    path.with_breakpoints(coeff.breakpoints.clone())
}

/// `∫ u′v′ + β(t)(u(0)v(0) + u(1)v(1))` with a scalar β path; the
/// difference bound is recorded for `γ = 1/2 + ε_tr`.
pub fn assemble_robin(beta: &CoefficientPath, nodes: usize) -> Result<FormPath> {
    if beta.columns() != 1 {
        return Err(Error::invalid("Robin coefficient must be a single column"));
    }
    if beta.window.0 < 0.0 {
        return Err(Error::range("Robin coefficient", beta.window.0, "[0, inf)"));
    }
    let fem = Fem1D::new(nodes, Boundary::Robin)?;
    let triple = fem_triple(&fem)?;
    let k = fem.unit_stiffness();
    let b = fem.boundary()?;
    let forms = beta.values.iter().map(|r| &k + &b * r[0]).collect();
    let path = FormPath::new(triple, beta.grid.clone(), forms, beta.interp)?;
    path.with_breakpoints(beta.breakpoints.clone())?
        .with_difference_bound(0.5 + TRACE_EPS)
}

/// `‖β_Δ (e₀e₀ᵀ + e_N e_Nᵀ)‖_{L(V, V′_γ)}` from the 2×2 Gram product of the
/// two reduced boundary vectors.
pub fn robin_difference_norm(fem: &Fem1D, triple: &GelfandTriple, beta_diff: f64, gamma: f64) -> Result<f64> {
    if fem.bc() == Boundary::Dirichlet {
        return Err(Error::invalid("no boundary unknowns"));
    }
    let n = fem.dofs();
    let mut e = DMatrix::zeros(n, 2);
    e[(0, 0)] = 1.0;
    e[(n - 1, 1)] = 1.0;
    let core = triple.basis().transpose() * e;
    let scale = |s: f64| {
        let mut m = core.clone();
        for (i, l) in triple.eigenvalues().iter().enumerate() {
            m.row_mut(i).scale_mut(l.powf(s));
        }
        m
    };
    let w = scale(-0.5 * gamma);
    let z = scale(-0.5);
    let p = (w.transpose() * w) * (z.transpose() * z);
    // eigenvalues of a 2×2 product of PSD matrices are real and nonnegative
    let tr = p[(0, 0)] + p[(1, 1)];
    let det = p[(0, 0)] * p[(1, 1)] - p[(0, 1)] * p[(1, 0)];
    let lmax = 0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt());
    Ok(beta_diff.abs() * lmax.sqrt())
}

fn union_grid(grids: &[&[f64]]) -> Vec<f64> {
    let tau = grids[0][grids[0].len() - 1];
    let mut g: Vec<f64> = grids.iter().flat_map(|g| g.iter().copied()).collect();
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * tau);
    g
}

fn coefficient_row_at(c: &CoefficientPath, t: f64, elements: usize) -> Result<Vec<f64>> {
    let kmax = c.grid.len() - 2;
    let k = c.grid.partition_point(|&g| g <= t).saturating_sub(1).min(kmax);
    let th = ((t - c.grid[k]) / (c.grid[k + 1] - c.grid[k])).clamp(0.0, 1.0);
    let a = c.row(k, elements)?;
    match c.interp {
        Interp::PiecewiseLinear => {
            let b = c.row(k + 1, elements)?;
            Ok(a.iter().zip(&b).map(|(x, y)| x * (1.0 - th) + y * th).collect())
        }
        Interp::PiecewiseConstantLeft => {
            if th >= 1.0 && k + 2 < c.grid.len() {
                c.row(k + 1, elements)
            } else {
                Ok(a)
            }
        }
    }
}

/// Adds convection `∫ b u′ v` and reaction `∫ m u v` to a base path. All
/// three are sampled on the union of their grids; the result is piecewise
/// constant when any input is. Returns the path and `M₀ = sup ‖A(t) − A(s)‖_{L(V,H)}`.
pub fn assemble_lower_order(
    b: Option<&CoefficientPath>,
    m: Option<&CoefficientPath>,
    base: &FormPath,
    fem: &Fem1D,
) -> Result<(FormPath, f64)> {
    if base.dim() != fem.dofs() {
        return Err(Error::DimensionMismatch {
            expected: fem.dofs(),
            got: base.dim(),
        });
    }
    let tau = base.tau();
    let mut grids: Vec<&[f64]> = vec![base.grid()];
    let mut interp = base.interp();
    let mut breakpoints = base.breakpoints().to_vec();
    for c in [b, m].into_iter().flatten() {
        if (c.tau() - tau).abs() > 1e-12 * tau {
            return Err(Error::invalid("coefficient paths cover different intervals"));
        }
        grids.push(&c.grid);
        if c.interp == Interp::PiecewiseConstantLeft {
            interp = Interp::PiecewiseConstantLeft;
        }
        breakpoints.extend(c.breakpoints.iter().copied());
    }
    let grid = union_grid(&grids);
    let ne = fem.elements();
    let forms = grid
        .par_iter()
        .map(|&t| {
            let mut f = base.form_at(t)?;
            if let Some(b) = b {
                f += fem.convection(&coefficient_row_at(b, t, ne)?)?;
            }
            if let Some(m) = m {
                f += fem.reaction(&coefficient_row_at(m, t, ne)?)?;
            }
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    let path = FormPath::new(base.triple().clone(), grid, forms, interp)?.with_breakpoints(breakpoints)?;
    let m0 = path.difference_bound(0.0)?;
    Ok((path, m0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `a(t)` on `Λ = {1}`, with `a` the coefficient path itself
    Scalar,
    Elliptic,
    Robin,
    /// unit diffusion plus time-dependent reaction `m` and optional convection `b`
    LowerOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub kind: PathKind,
    #[serde(default)]
    pub params: PathParams,
    #[serde(default)]
    pub seed: u64,
    /// CSV series for `kind = "file"`, relative to the problem file
    #[serde(default)]
    pub file: Option<PathBuf>,
}

fn default_nodes() -> usize {
    16
}
fn default_tau() -> f64 {
    1.0
}
fn default_grid_points() -> usize {
    65
}

/// Problem description file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    #[serde(default)]
    pub bc: Boundary,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    pub path: PathSpec,
    /// convection path for lower-order problems
    #[serde(default)]
    pub convection: Option<PathSpec>,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| parse_err(e.line(), e.column(), e.to_string()))
    }

    pub fn load(file: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(file)?)
    }

    fn coefficient(&self, spec: &PathSpec, elements: usize, base_dir: &Path) -> Result<CoefficientPath> {
        if spec.kind == PathKind::File {
            let file = spec
                .file
                .as_ref()
                .ok_or_else(|| Error::invalid("file path kind needs \"file\""))?;
            let c = ingest(&base_dir.join(file))?;
            if (c.tau() - self.tau).abs() > 1e-12 * self.tau {
                return Err(Error::invalid(format!("series ends at {} but tau = {}", c.tau(), self.tau)));
            }
            return Ok(c);
        }
        let params = PathParams {
            seed: spec.seed,
            elements: if spec.params.elements == 0 { elements } else { spec.params.elements },
            ..spec.params.clone()
        };
        generate_path(spec.kind, &params, &uniform_grid(self.tau, self.grid_points)?)
    }

    /// Assembles the problem; relative file references resolve against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<Problem> {
        match self.kind {
            ProblemKind::Scalar => {
                let c = self.coefficient(&self.path, 0, base_dir)?;
                if c.columns() != 1 {
                    return Err(Error::invalid("scalar problems need a single-column coefficient"));
                }
                let triple = Arc::new(GelfandTriple::scalar(1.0)?);
                let forms = c.values.iter().map(|r| DMatrix::from_element(1, 1, r[0])).collect();
                let path = FormPath::new(triple, c.grid.clone(), forms, c.interp)?
                    .with_breakpoints(c.breakpoints.clone())?;
                Ok(Problem {
                    path,
                    fem: None,
                    coefficient: c,
                    gamma: 1.0,
                    m0: None,
                    gamma0_eligible: false,
                })
            }
            ProblemKind::Elliptic => {
                if self.bc == Boundary::Robin {
                    return Err(Error::invalid("use kind \"robin\" for Robin problems"));
                }
                let fem = Fem1D::new(self.nodes, self.bc)?;
                let c = self.coefficient(&self.path, fem.elements(), base_dir)?;
                let path = assemble_elliptic(&c, self.bc, self.nodes)?;
                Ok(Problem {
                    path,
                    fem: Some(fem),
                    coefficient: c,
                    gamma: 1.0,
                    m0: None,
                    gamma0_eligible: false,
                })
            }
            ProblemKind::Robin => {
                let fem = Fem1D::new(self.nodes, Boundary::Robin)?;
                let c = self.coefficient(&self.path, 0, base_dir)?;
                let path = assemble_robin(&c, self.nodes)?;
                Ok(Problem {
                    path,
                    fem: Some(fem),
                    coefficient: c,
                    gamma: 0.5 + TRACE_EPS,
                    m0: None,
                    gamma0_eligible: false,
                })
            }
            ProblemKind::LowerOrder => {
                let fem = Fem1D::new(self.nodes, self.bc)?;
                let triple = fem_triple(&fem)?;
                let base = FormPath::constant(triple, fem.unit_stiffness(), self.tau)?;
                let m = self.coefficient(&self.path, fem.elements(), base_dir)?;
                let b = match &self.convection {
                    Some(s) => Some(self.coefficient(s, fem.elements(), base_dir)?),
                    None => None,
                };
                let (path, m0) = assemble_lower_order(b.as_ref(), Some(&m), &base, &fem)?;
                Ok(Problem {
                    path,
                    fem: Some(fem),
                    coefficient: m,
                    gamma: 0.0,
                    m0: Some(m0),
                    gamma0_eligible: m0.is_finite(),
                })
            }
        }
    }
}

impl Problem {
    pub fn dim(&self) -> usize {
        self.path.dim()
    }

    fn shape(&self, name: &str) -> Result<DVector<f64>> {
        let (head, arg) = name.split_once(':').unwrap_or((name, ""));
        let fem = self.fem.as_ref();
        let n = self.dim();
        match (head, fem) {
            ("zero", _) => Ok(DVector::zeros(n)),
            ("one", None) => Ok(DVector::from_element(n, 1.0)),
            ("one", Some(f)) => Ok(f.interpolate(|_| 1.0)),
            ("sine", Some(f)) => Ok(f.interpolate(|x| (PI * x).sin())),
            ("sine", None) => Ok(DVector::from_element(n, 1.0)),
            ("mode", _) => {
                let k: usize = arg
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad mode index in {name:?}")))?;
                if k >= n {
                    return Err(Error::range("mode", k as f64, &format!("[0, {})", n)));
                }
                Ok(self.path.triple().basis().column(k).into_owned())
            }
            _ => Err(Error::invalid(format!(
                "unknown vector spec {name:?} (zero, one, sine, mode:<k>)"
            ))),
        }
    }

    /// Initial value from a spec: `zero`, `one`, `sine` (nodal sin πx) or `mode:<k>`.
    pub fn initial_value(&self, spec: &str) -> Result<DVector<f64>> {
        self.shape(spec)
    }

    /// Forcing from a spec: a vector spec (constant in time) or
    /// `<vector spec>*cos` for `f(t) = v cos(πt/τ)`.
    pub fn forcing(&self, spec: &str) -> Result<Forcing> {
        if spec == "zero" {
            return Ok(Forcing::zero(self.dim()));
        }
        if let Some(v) = spec.strip_suffix("*cos") {
            let v = self.shape(v)?;
            let tau = self.path.tau();
            return Ok(Forcing::new(v.len(), move |t| &v * (PI * t / tau).cos()));
        }
        Ok(Forcing::constant(self.shape(spec)?))
    }
}

/// Smallest generalized eigenvalue of a symmetric pencil `(K, M)`.
pub fn smallest_generalized_eigenvalue(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<f64> {
    let tr = GelfandTriple::new(m.clone(), k.clone())?;
    Ok(tr.lambda_min())
}
