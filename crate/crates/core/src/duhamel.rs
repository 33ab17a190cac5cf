//! Solution of `u′ + A(t)u = f`, `u(0) = u₀` by the frozen-coefficient
//! Duhamel representation `u = R₀u₀ + S₀u + L₀f`.
//!
//! On each interval of a subdivision the representation is solved by fixed
//! point iteration and the interval solutions are chained through their end
//! values. Volterra integrals against `e^{-(t−s)A(t)}` are integrated exactly
//! for piecewise-linear data with the φ-function propagators of `funcalc`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::formpath::{FormPath, Side};
use crate::funcalc::{CalculusEngine, Frozen, Propagator};
use crate::gelfand::GelfandTriple;
use crate::{estimates, linalg, Error, Result};

type ForcingFn = dyn Fn(f64) -> DVector<f64> + Send + Sync;

/// Right-hand side `f(t)`, evaluated pointwise.
#[derive(Clone)]
pub struct Forcing {
    dim: usize,
    f: Option<Arc<ForcingFn>>,
}

impl fmt::Debug for Forcing {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("Forcing")
            .field("dim", &self.dim)
            .field("zero", &self.f.is_none())
            .finish()
    }
}

impl Forcing {
    pub fn zero(dim: usize) -> Self {
        Forcing { dim, f: None }
    }

    pub fn constant(v: DVector<f64>) -> Self {
        let dim = v.len();
        Forcing {
            dim,
            f: Some(Arc::new(move |_| v.clone())),
        }
    }

    pub fn new<F: Fn(f64) -> DVector<f64> + Send + Sync + 'static>(dim: usize, f: F) -> Self {
        Forcing {
            dim,
            f: Some(Arc::new(f)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.f.is_none()
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        match &self.f {
            Some(f) => f(t),
            None => DVector::zeros(self.dim),
        }
    }

    /// `t ↦ e^{-νt} f(t)`.
    pub fn damped(&self, nu: f64) -> Forcing {
        match &self.f {
            None => self.clone(),
            Some(_) if nu == 0.0 => self.clone(),
            Some(f) => {
                let f = f.clone();
                Forcing::new(self.dim, move |t| f(t) * (-nu * t).exp())
            }
        }
    }

    fn samples(&self, times: &[f64]) -> Result<Vec<DVector<f64>>> {
        times
            .iter()
            .map(|&t| {
                let v = self.eval(t);
                if v.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid(format!("forcing not finite at t = {t}")));
                }
                Ok(v)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// target time step; each interval uses the nearest step dividing it
    pub dt: f64,
    /// fixed-point tolerance on the `L^∞(grid; V)` increment
    pub tol: f64,
    pub max_iter: usize,
    /// subdivision threshold for the eqHyp certificate
    pub eps: f64,
    /// how often ε is quartered when an interval fails the contraction probe
    pub eps_retries: usize,
    /// largest accepted probe value of `‖S₀‖`
    pub contraction_limit: f64,
    pub probes: usize,
    pub probe_steps: usize,
    /// bound on subinterval halvings in the γ = 0 solver
    pub max_halvings: usize,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            dt: 1.0 / 128.0,
            tol: 1e-10,
            max_iter: 200,
            eps: 0.25,
            eps_retries: 4,
            contraction_limit: 1.0,
            probes: 4,
            probe_steps: 2,
            max_halvings: 24,
            seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn with_dt(dt: f64) -> Self {
        SolveConfig {
            dt,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::range("dt", self.dt, "(0, inf)"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::range("tolerance", self.tol, "(0, inf)"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::range("eps", self.eps, "(0, inf)"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    BackwardEuler,
    CrankNicolson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Neumann,
    Gamma0,
    BackwardEuler,
    CrankNicolson,
}

/// Per-interval record of a fixed-point solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
    /// index of the interval's first node in the glued grid
    pub first_index: usize,
    pub iterations: usize,
    pub increments: Vec<f64>,
    /// largest ratio of consecutive nonzero increments
    pub max_ratio: Option<f64>,
    /// probe lower bound of `‖S₀‖` on the interval (Neumann only)
    pub probe: Option<f64>,
    pub certificate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub method: Method,
    pub dt: f64,
    pub tol: f64,
    /// increments are compared with `tol · scale`
    pub scale: f64,
    pub eps: Option<f64>,
    pub intervals: Vec<IntervalReport>,
    /// interval endpoints including 0 and τ
    pub breakpoints: Vec<f64>,
    pub breakpoint_v_norms: Vec<f64>,
    /// ν of the original problem when solved through a shift
    pub shift: f64,
}

impl SolveDiagnostics {
    fn plain(method: Method, dt: f64) -> Self {
        SolveDiagnostics {
            method,
            dt,
            tol: 0.0,
            scale: 1.0,
            eps: None,
            intervals: Vec::new(),
            breakpoints: Vec::new(),
            breakpoint_v_norms: Vec::new(),
            shift: 0.0,
        }
    }

    /// Largest increment ratio over all intervals.
    pub fn max_ratio(&self) -> Option<f64> {
        self.intervals
            .iter()
            .filter_map(|r| r.max_ratio)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }

    pub fn total_iterations(&self) -> usize {
        self.intervals.iter().map(|r| r.iterations).sum()
    }
}

/// Mean of `x(θ)²` over `θ ∈ [0, 1]` with `x(0) = a`, `x(1) = b`. With a
/// stiff decay rate μ the interpolant is `a e^{−μθ} + (b − a e^{−μ})θ`;
/// otherwise it is exponential when `ab > 0` and linear when not.
fn square_mean(a: f64, b: f64, mu: f64) -> f64 {
    if mu.is_finite() && mu > 1.0 {
        let mu = mu.min(700.0);
        let e = (-mu).exp();
        let c = b - a * e;
        let exp_sq = (1.0 - e * e) / (2.0 * mu);
        let cross = (1.0 - e * (1.0 + mu)) / (mu * mu);
        return a * a * exp_sq + 2.0 * a * c * cross + c * c / 3.0;
    }
    let (a2, b2) = (a * a, b * b);
    if a * b > 0.0 {
        let r = (b2 / a2).ln();
        if r.abs() < 1e-8 {
            // log mean near its diagonal
            return a2 * (1.0 + 0.5 * r + r * r / 6.0);
        }
        (b2 - a2) / r
    } else {
        (a2 + a * b + b2) / 3.0
    }
}

/// Values of a time-dependent vector on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub times: Vec<f64>,
    pub values: Vec<DVector<f64>>,
}

impl Samples {
    pub fn new(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::invalid("samples need one value per time"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("sample times must increase strictly"));
        }
        Ok(Samples { times, values })
    }

    /// Samples of a function on the uniform grid `kτ/steps`.
    pub fn uniform<F: Fn(f64) -> DVector<f64>>(tau: f64, steps: usize, f: F) -> Result<Self> {
        if steps == 0 || !(tau > 0.0) {
            return Err(Error::invalid("need tau > 0 and at least one step"));
        }
        let times = uniform_times(0.0, tau, steps);
        let values = times.iter().map(|&t| f(t)).collect();
        Samples::new(times, values)
    }

    fn step(&self) -> Result<f64> {
        let n = self.times.len() - 1;
        if n == 0 {
            return Ok(0.0);
        }
        let h = (self.times[n] - self.times[0]) / n as f64;
        let uniform = self
            .times
            .iter()
            .enumerate()
            .all(|(k, &t)| (t - (self.times[0] + k as f64 * h)).abs() <= 1e-9 * h);
        if !uniform {
            return Err(Error::invalid("samples must lie on a uniform grid"));
        }
        Ok(h)
    }

    fn index_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * (self.times[self.times.len() - 1] - self.times[0]).max(1.0);
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .ok_or_else(|| Error::invalid(format!("t = {t} is not a sample time")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryNorms {
    pub l2_h: f64,
    pub l2_v: f64,
    pub linf_v: f64,
    pub h1_h: f64,
    /// `‖A(·)u(·)‖_{L²(0,τ;H)}`
    pub au_l2_h: f64,
    /// `‖u‖_{H¹(0,τ;H)} + ‖u‖_{L^∞(0,τ;V)}`
    pub e_norm: f64,
}

/// A solution on a time grid with `A(t)u(t)` and `u′ = f − A(t)u` at the nodes.
///
/// At nodes where the path jumps both one-sided values of `A(t)u` are kept;
/// node integrals use the right value on the cell to the right and the left
/// value on the cell to the left.
#[derive(Debug, Clone)]
pub struct Trajectory {
    triple: Arc<GelfandTriple>,
    grid: Vec<f64>,
    values: Vec<DVector<f64>>,
    au: Vec<DVector<f64>>,
    au_left: Vec<DVector<f64>>,
    derivatives: Vec<DVector<f64>>,
    derivatives_left: Vec<DVector<f64>>,
    diagnostics: SolveDiagnostics,
}

impl Trajectory {
    /// Completes grid values with `A(t)u` and `u′` from the equation.
    pub fn assemble(
        path: &FormPath,
        forcing: &Forcing,
        grid: Vec<f64>,
        values: Vec<DVector<f64>>,
        diagnostics: SolveDiagnostics,
    ) -> Result<Self> {
        if grid.len() != values.len() || grid.len() < 2 {
            return Err(Error::invalid("trajectory needs matching grid and values"));
        }
        let tr = path.triple().clone();
        let f = forcing.samples(&grid)?;
        let last = grid.len() - 1;
        let sides: Vec<(DVector<f64>, DVector<f64>)> = grid
            .par_iter()
            .enumerate()
            .map(|(k, &t)| {
                let right_side = if k == last { Side::Left } else { Side::Right };
                let right = tr.mass_solve(&(path.form_side(t, right_side)? * &values[k]));
                let left = if k > 0 && path.jumps_at(t) {
                    tr.mass_solve(&(path.form_side(t, Side::Left)? * &values[k]))
                } else {
                    right.clone()
                };
                Ok((right, left))
            })
            .collect::<Result<_>>()?;
        let (au, au_left): (Vec<_>, Vec<_>) = sides.into_iter().unzip();
        let derivatives = f.iter().zip(&au).map(|(f, a)| f - a).collect();
        let derivatives_left = f.iter().zip(&au_left).map(|(f, a)| f - a).collect();
        let traj = Trajectory {
            triple: tr,
            grid,
            values,
            au,
            au_left,
            derivatives,
            derivatives_left,
            diagnostics,
        };
        traj.check_finite()?;
        Ok(traj)
    }

    pub fn check_finite(&self) -> Result<()> {
        let bad = self
            .values
            .iter()
            .chain(&self.au)
            .chain(&self.au_left)
            .any(|v| v.iter().any(|x| !x.is_finite()));
        if bad {
            return Err(Error::SolverRejected("trajectory contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn triple(&self) -> &Arc<GelfandTriple> {
        &self.triple
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    /// `u′(t_k)` (right-sided at jumps).
    pub fn derivative_values(&self) -> &[DVector<f64>] {
        &self.derivatives
    }

    /// `A(t_k)u(t_k)` (right-sided at jumps, left-sided at τ).
    pub fn au_values(&self) -> &[DVector<f64>] {
        &self.au
    }

    pub fn diagnostics(&self) -> &SolveDiagnostics {
        &self.diagnostics
    }

    pub(crate) fn diagnostics_mut(&mut self) -> &mut SolveDiagnostics {
        &mut self.diagnostics
    }

    pub fn final_value(&self) -> &DVector<f64> {
        &self.values[self.values.len() - 1]
    }

    pub fn tau(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn samples(&self) -> Samples {
        Samples {
            times: self.grid.clone(),
            values: self.values.clone(),
        }
    }

    /// Piecewise-linear interpolation of the values.
    pub fn value_at(&self, t: f64) -> Result<DVector<f64>> {
        if !(t >= self.grid[0] && t <= self.tau()) {
            return Err(Error::range("time", t, &format!("[0, {}]", self.tau())));
        }
        let k = self
            .grid
            .partition_point(|&g| g <= t)
            .saturating_sub(1)
            .min(self.grid.len() - 2);
        let th = (t - self.grid[k]) / (self.grid[k + 1] - self.grid[k]);
        Ok(&self.values[k] * (1.0 - th) + &self.values[k + 1] * th)
    }

    fn cell_integral<F: Fn(&DVector<f64>) -> f64>(&self, right: &[DVector<f64>], left: &[DVector<f64>], f: F) -> f64 {
        self.grid
            .windows(2)
            .enumerate()
            .map(|(k, w)| 0.5 * (w[1] - w[0]) * (f(&right[k]) + f(&left[k + 1])))
            .sum()
    }

    /// `∫ Σ_i λ_i^s c_i(t)² dt` over the Λ-coordinates `c_i` of a trajectory
    /// quantity. Per cell, each coordinate decays at the rate of the
    /// solution's own coordinate, read off from the right derivative.
    fn modal_integral(&self, right: &[DVector<f64>], left: &[DVector<f64>], s: f64) -> f64 {
        let tr = &self.triple;
        let w: DVector<f64> = tr.eigenvalues().map(|l| l.powf(s));
        let cr: Vec<DVector<f64>> = right.iter().map(|v| tr.coords(v)).collect();
        let cl: Vec<DVector<f64>> = left.iter().map(|v| tr.coords(v)).collect();
        self.grid
            .windows(2)
            .enumerate()
            .map(|(k, g)| {
                let h = g[1] - g[0];
                let u = tr.coords(&self.values[k]);
                let du = tr.coords(&self.derivatives[k]);
                (0..u.len())
                    .map(|i| {
                        let mu = if u[i] != 0.0 { -h * du[i] / u[i] } else { 0.0 };
                        w[i] * h * square_mean(cr[k][i], cl[k + 1][i], mu)
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn l2_h(&self) -> f64 {
        self.modal_integral(&self.values, &self.values, 0.0).sqrt()
    }

    pub fn l2_v(&self) -> f64 {
        self.modal_integral(&self.values, &self.values, 1.0).sqrt()
    }

    pub fn linf_v(&self) -> f64 {
        self.values
            .iter()
            .map(|v| self.triple.v_norm(v))
            .fold(0.0, f64::max)
    }

    pub fn derivative_l2_h(&self) -> f64 {
        self.modal_integral(&self.derivatives, &self.derivatives_left, 0.0)
            .sqrt()
    }

    pub fn h1_h(&self) -> f64 {
        self.l2_h().hypot(self.derivative_l2_h())
    }

    pub fn au_l2_h(&self) -> f64 {
        self.modal_integral(&self.au, &self.au_left, 0.0).sqrt()
    }

    pub fn norms(&self) -> TrajectoryNorms {
        let h1_h = self.h1_h();
        let linf_v = self.linf_v();
        TrajectoryNorms {
            l2_h: self.l2_h(),
            l2_v: self.l2_v(),
            linf_v,
            h1_h,
            au_l2_h: self.au_l2_h(),
            e_norm: h1_h + linf_v,
        }
    }

    /// `‖u − w‖_{L²(0,τ;H)} / ‖w‖_{L²(0,τ;H)}` on this grid, with w
    /// interpolated linearly.
    pub fn relative_l2_h_difference(&self, other: &Trajectory) -> Result<f64> {
        if (self.tau() - other.tau()).abs() > 1e-12 * self.tau() {
            return Err(Error::invalid("trajectories cover different intervals"));
        }
        let tr = &self.triple;
        let diffs: Vec<DVector<f64>> = self
            .grid
            .iter()
            .zip(&self.values)
            .map(|(&t, v)| Ok(v - other.value_at(t.min(other.tau()))?))
            .collect::<Result<_>>()?;
        let refs: Vec<DVector<f64>> = self
            .grid
            .iter()
            .map(|&t| other.value_at(t.min(other.tau())))
            .collect::<Result<_>>()?;
        let num = self.cell_integral(&diffs, &diffs, |v| tr.h_norm(v).powi(2));
        let den = self.cell_integral(&refs, &refs, |v| tr.h_norm(v).powi(2));
        if den == 0.0 {
            return Ok(num.sqrt());
        }
        Ok((num / den).sqrt())
    }

    /// Multiplies the values by `e^{νt}` and recomputes the derived data for
    /// the given problem.
    fn rescaled(&self, path: &FormPath, forcing: &Forcing, nu: f64) -> Result<Trajectory> {
        let values = self
            .grid
            .iter()
            .zip(&self.values)
            .map(|(&t, v)| v * (nu * t).exp())
            .collect();
        let mut diag = self.diagnostics.clone();
        diag.breakpoint_v_norms = diag
            .breakpoints
            .iter()
            .zip(&self.diagnostics.breakpoint_v_norms)
            .map(|(&t, &v)| v * (nu * t).exp())
            .collect();
        Trajectory::assemble(path, forcing, self.grid.clone(), values, diag)
    }
}

pub(crate) fn uniform_times(a: f64, b: f64, steps: usize) -> Vec<f64> {
    let h = (b - a) / steps as f64;
    (0..=steps)
        .map(|k| if k == steps { b } else { a + k as f64 * h })
        .collect()
}

fn steps_for(a: f64, b: f64, dt: f64) -> usize {
    (((b - a) / dt).round() as usize).max(1)
}

fn check_initial(path: &FormPath, u0: &DVector<f64>, forcing: &Forcing) -> Result<()> {
    linalg::check_len(u0, path.dim())?;
    if u0.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("initial value not finite"));
    }
    if forcing.dim() != path.dim() {
        return Err(Error::DimensionMismatch {
            expected: path.dim(),
            got: forcing.dim(),
        });
    }
    Ok(())
}

fn max_v_distance(tr: &GelfandTriple, a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| tr.v_norm(&(x - y)))
        .fold(0.0, f64::max)
}

fn max_v_norm(tr: &GelfandTriple, a: &[DVector<f64>]) -> f64 {
    a.iter().map(|x| tr.v_norm(x)).fold(0.0, f64::max)
}

fn max_ratio(incs: &[f64]) -> Option<f64> {
    incs.windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
}

/// Frozen operators and propagators on a uniform grid of one interval.
/// The operator at node k is the right value, except at the last node,
/// where the left value is used.
pub(crate) struct Stepper {
    times: Vec<f64>,
    frozen: Vec<Frozen>,
    props: Vec<Option<Propagator>>,
}

impl Stepper {
    pub(crate) fn new(engine: &CalculusEngine, path: &FormPath, a: f64, b: f64, steps: usize) -> Result<Self> {
        let times = uniform_times(a, b, steps);
        let h = (b - a) / steps as f64;
        let built: Vec<(Frozen, Option<Propagator>)> = times
            .par_iter()
            .enumerate()
            .map(|(k, &t)| {
                let side = if k == steps { Side::Left } else { Side::Right };
                let fr = Frozen::new(path.triple().clone(), path.form_side(t, side)?);
                let prop = if k > 0 { Some(engine.propagator(&fr, h)?) } else { None };
                Ok((fr, prop))
            })
            .collect::<Result<_>>()?;
        let (frozen, props) = built.into_iter().unzip();
        Ok(Stepper { times, frozen, props })
    }

    fn len(&self) -> usize {
        self.times.len()
    }

    pub(crate) fn times(&self) -> &[f64] {
        &self.times
    }

    /// `∫_a^{t_k} e^{-(t_k−s)A(t_k)} g(s) ds` for g linear between the columns.
    fn volterra(&self, k: usize, g: &DMatrix<f64>) -> DVector<f64> {
        let n = g.nrows();
        let mut acc = DVector::zeros(n);
        if k == 0 {
            return acc;
        }
        let p = self.props[k].as_ref().expect("propagator at k > 0");
        let w = &p.p1 * g.columns(0, k) + &p.p2 * g.columns(1, k);
        for j in 0..k {
            acc = &p.e * acc + w.column(j);
        }
        acc
    }

    fn r0(&self, engine: &CalculusEngine, u0: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        let a = self.times[0];
        self.times
            .par_iter()
            .zip(self.frozen.par_iter())
            .map(|(&t, fr)| engine.exp_apply(fr, t - a, u0))
            .collect()
    }

    fn l0(&self, f: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let g = DMatrix::from_columns(f);
        (0..self.len()).into_par_iter().map(|k| self.volterra(k, &g)).collect()
    }

    /// `Lf(t_k) = A(t_k) L₀f(t_k)`.
    pub(crate) fn l(&self, f: &[DVector<f64>]) -> Vec<DVector<f64>> {
        self.l0(f)
            .into_iter()
            .zip(&self.frozen)
            .map(|(v, fr)| fr.op() * v)
            .collect()
    }

    /// `S₀u(t_k) = ∫_a^{t_k} e^{-(t_k−s)A(t_k)} (A(t_k) − A(s)) u(s) ds`.
    fn s0(&self, u: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let um = DMatrix::from_columns(u);
        let z: Vec<DVector<f64>> = self.frozen.iter().zip(u).map(|(fr, x)| fr.op() * x).collect();
        let zm = DMatrix::from_columns(&z);
        (0..self.len())
            .into_par_iter()
            .map(|k| {
                if k == 0 {
                    return DVector::zeros(um.nrows());
                }
                let g = self.frozen[k].op() * um.columns(0, k + 1) - zm.columns(0, k + 1);
                self.volterra(k, &g)
            })
            .collect()
    }

    /// Largest ratio `‖S₀u‖/‖u‖` in `L^∞(grid; V)` over seeded probes.
    fn probe_s0(&self, tr: &GelfandTriple, probes: usize, steps: usize, seed: u64) -> f64 {
        let n = tr.dim();
        let m = self.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = 0.0f64;
        for p in 0..probes.max(1) {
            // alternate time-constant and time-rough probes
            let mut u: Vec<DVector<f64>> = if p % 2 == 0 {
                let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                vec![tr.from_coords(&c); m]
            } else {
                (0..m)
                    .map(|_| tr.from_coords(&DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))))
                    .collect()
            };
            for _ in 0..=steps {
                let norm = max_v_norm(tr, &u);
                if norm == 0.0 {
                    break;
                }
                let s = self.s0(&u);
                let ratio = max_v_norm(tr, &s) / norm;
                best = best.max(ratio);
                if ratio == 0.0 {
                    break;
                }
                u = s;
            }
        }
        best
    }
}

/// Fixed point `u = base + S₀u` on one interval.
fn neumann_iteration(
    tr: &GelfandTriple,
    stepper: &Stepper,
    base: Vec<DVector<f64>>,
    cfg: &SolveConfig,
    scale: f64,
) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    let mut u = base.clone();
    let mut incs = Vec::new();
    for _ in 0..cfg.max_iter {
        let s = stepper.s0(&u);
        let next: Vec<DVector<f64>> = base.iter().zip(&s).map(|(b, s)| b + s).collect();
        let inc = max_v_distance(tr, &next, &u);
        u = next;
        incs.push(inc);
        if inc <= cfg.tol * scale {
            return Ok((u, incs));
        }
        if !inc.is_finite() || inc > 1e8 * scale {
            return Err(Error::SolverRejected(format!(
                "fixed-point iteration diverged (increment {inc:.3e})"
            )));
        }
    }
    Err(Error::MaxIterations {
        iterations: cfg.max_iter,
        increment: *incs.last().unwrap_or(&f64::NAN),
    })
}

/// Solves a coercive problem by the Neumann fixed point on a subdivision
/// of `[0, τ]` and glues the interval solutions.
///
/// An interval whose probe norm of `S₀` is not below the contraction limit
/// triggers a new subdivision with ε/4, up to `eps_retries` times.
pub fn solve_neumann(
    engine: &CalculusEngine,
    path: &FormPath,
    u0: &DVector<f64>,
    forcing: &Forcing,
    cfg: &SolveConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_initial(path, u0, forcing)?;
    let hyp = path.hyp();
    if hyp.nu != 0.0 || !(hyp.delta > 0.0) {
        return Err(Error::SolverRejected(format!(
            "path not coercive (nu = {}, delta = {}); solve through nu_shift",
            hyp.nu, hyp.delta
        )));
    }
    let tr = path.triple().clone();
    let mut eps = cfg.eps;
    for attempt in 0..=cfg.eps_retries {
        let sub = path.subdivide(eps).map_err(|e| match e {
            Error::PathTooRough { .. } => Error::SolverRejected(format!("path too rough: {e}")),
            other => other,
        })?;
        let mut steppers = Vec::with_capacity(sub.len());
        let mut probes = Vec::with_capacity(sub.len());
        let mut contracting = true;
        for (i, (a, b)) in sub.intervals().enumerate() {
            let st = Stepper::new(engine, path, a, b, steps_for(a, b, cfg.dt))?;
            let probe = if path.is_constant() {
                0.0
            } else {
                st.probe_s0(&tr, cfg.probes, cfg.probe_steps, cfg.seed.wrapping_add(i as u64))
            };
            if !(probe < cfg.contraction_limit) {
                contracting = false;
                break;
            }
            steppers.push(st);
            probes.push(probe);
        }
        if !contracting {
            if attempt == cfg.eps_retries {
                break;
            }
            eps /= 4.0;
            continue;
        }
        return glue_neumann(engine, path, u0, forcing, cfg, eps, &sub.certificates, steppers, probes);
    }
    Err(Error::SolverRejected(format!(
        "path too rough: no contraction of S0 down to eps = {eps:.3e}"
    )))
}

#[allow(clippy::too_many_arguments)]
fn glue_neumann(
    engine: &CalculusEngine,
    path: &FormPath,
    u0: &DVector<f64>,
    forcing: &Forcing,
    cfg: &SolveConfig,
    eps: f64,
    certificates: &[f64],
    steppers: Vec<Stepper>,
    probes: Vec<f64>,
) -> Result<Trajectory> {
    let tr = path.triple().clone();
    let mut grid = vec![0.0];
    let mut values = vec![u0.clone()];
    let mut reports = Vec::with_capacity(steppers.len());
    let mut breakpoints = vec![0.0];
    let mut bp_norms = vec![tr.v_norm(u0)];
    let mut scale = 1.0f64;
    for (i, st) in steppers.iter().enumerate() {
        let start = values[values.len() - 1].clone();
        let r0 = st.r0(engine, &start)?;
        let l0 = if forcing.is_zero() {
            vec![DVector::zeros(tr.dim()); st.len()]
        } else {
            st.l0(&forcing.samples(&st.times)?)
        };
        let base: Vec<DVector<f64>> = r0.iter().zip(&l0).map(|(r, l)| r + l).collect();
        let local_scale = max_v_norm(&tr, &base).max(1.0);
        scale = scale.max(local_scale);
        let (u, incs) = neumann_iteration(&tr, st, base, cfg, local_scale)?;
        reports.push(IntervalReport {
            start: st.times[0],
            end: st.times[st.len() - 1],
            steps: st.len() - 1,
            first_index: grid.len() - 1,
            iterations: incs.len(),
            max_ratio: max_ratio(&incs),
            increments: incs,
            probe: Some(probes[i]),
            certificate: certificates.get(i).copied(),
        });
        grid.extend_from_slice(&st.times[1..]);
        values.extend(u.into_iter().skip(1));
        breakpoints.push(grid[grid.len() - 1]);
        bp_norms.push(tr.v_norm(&values[values.len() - 1]));
    }
    let diag = SolveDiagnostics {
        method: Method::Neumann,
        dt: cfg.dt,
        tol: cfg.tol,
        scale,
        eps: Some(eps),
        intervals: reports,
        breakpoints,
        breakpoint_v_norms: bp_norms,
        shift: 0.0,
    };
    Trajectory::assemble(path, forcing, grid, values, diag)
}

enum Gamma0Failure {
    NotContracting(Vec<f64>),
    Fatal(Error),
}

/// Solves with the anchored contraction `v ↦ K(v)`, where `K(v)` solves
/// `w′ + A(t_s)w = f − (A(t) − A(t_s))v`, `w(t_s) = u(t_s)` on a subinterval
/// starting at `t_s`. Subintervals are halved until the increments contract
/// and doubled again after each success.
pub fn solve_contraction_gamma0(
    engine: &CalculusEngine,
    path: &FormPath,
    u0: &DVector<f64>,
    forcing: &Forcing,
    cfg: &SolveConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_initial(path, u0, forcing)?;
    let m0 = path.difference_bound(0.0)?;
    if !m0.is_finite() {
        return Err(Error::SolverRejected("difference bound M0 is unbounded".into()));
    }
    let tr = path.triple().clone();
    let tau = path.tau();
    let steps = steps_for(0.0, tau, cfg.dt);
    let h = tau / steps as f64;
    let times = uniform_times(0.0, tau, steps);
    let ops: Vec<(DMatrix<f64>, DMatrix<f64>)> = times
        .par_iter()
        .map(|&t| {
            let right = path.operator_at(t, if t >= tau { Side::Left } else { Side::Right })?;
            let left = if t > 0.0 { path.operator_at(t, Side::Left)? } else { right.clone() };
            Ok((right, left))
        })
        .collect::<Result<_>>()?;
    let f = forcing.samples(&times)?;

    let mut values = vec![u0.clone()];
    let mut reports = Vec::new();
    let mut breakpoints = vec![0.0];
    let mut bp_norms = vec![tr.v_norm(u0)];
    let mut scale = 1.0f64;
    let mut start = 0usize;
    let mut len = steps;
    let mut halvings = 0usize;
    while start < steps {
        let l = len.min(steps - start);
        let anchor = Frozen::new(tr.clone(), path.form_side(times[start], Side::Right)?);
        let prop = engine.propagator(&anchor, h)?;
        let a0 = anchor.op();
        let ustart = values[values.len() - 1].clone();
        match gamma0_iteration(&tr, &prop, a0, &ops[start..=start + l], &f[start..=start + l], &ustart, cfg) {
            Ok((w, incs, sc)) => {
                scale = scale.max(sc);
                reports.push(IntervalReport {
                    start: times[start],
                    end: times[start + l],
                    steps: l,
                    first_index: start,
                    iterations: incs.len(),
                    max_ratio: max_ratio(&incs),
                    increments: incs,
                    probe: None,
                    certificate: None,
                });
                values.extend(w.into_iter().skip(1));
                start += l;
                breakpoints.push(times[start]);
                bp_norms.push(tr.v_norm(&values[values.len() - 1]));
                len = (2 * l).min(steps);
            }
            Err(Gamma0Failure::Fatal(e)) => return Err(e),
            Err(Gamma0Failure::NotContracting(incs)) => {
                halvings += 1;
                if l == 1 || halvings > cfg.max_halvings {
                    return Err(Error::SolverRejected(format!(
                        "no contraction on [{}, {}] after {} halvings (increments {:?})",
                        times[start],
                        times[start + l],
                        halvings - 1,
                        incs
                    )));
                }
                len = l / 2;
            }
        }
    }
    let diag = SolveDiagnostics {
        method: Method::Gamma0,
        dt: cfg.dt,
        tol: cfg.tol,
        scale,
        eps: None,
        intervals: reports,
        breakpoints,
        breakpoint_v_norms: bp_norms,
        shift: 0.0,
    };
    Trajectory::assemble(path, forcing, times, values, diag)
}

fn gamma0_iteration(
    tr: &GelfandTriple,
    prop: &Propagator,
    a0: &DMatrix<f64>,
    ops: &[(DMatrix<f64>, DMatrix<f64>)],
    f: &[DVector<f64>],
    ustart: &DVector<f64>,
    cfg: &SolveConfig,
) -> std::result::Result<(Vec<DVector<f64>>, Vec<f64>, f64), Gamma0Failure> {
    let l = ops.len() - 1;
    let mut v = vec![ustart.clone(); l + 1];
    let mut incs: Vec<f64> = Vec::new();
    let mut scale = None;
    for _ in 0..cfg.max_iter {
        let mut w = Vec::with_capacity(l + 1);
        w.push(ustart.clone());
        for j in 0..l {
            let g0 = &f[j] - (&ops[j].0 - a0) * &v[j];
            let g1 = &f[j + 1] - (&ops[j + 1].1 - a0) * &v[j + 1];
            let next = &prop.e * &w[j] + &prop.p1 * g0 + &prop.p2 * g1;
            w.push(next);
        }
        let sc = *scale.get_or_insert_with(|| max_v_norm(tr, &w).max(1.0));
        let inc = max_v_distance(tr, &w, &v);
        v = w;
        if !inc.is_finite() {
            return Err(Gamma0Failure::NotContracting(incs));
        }
        if let Some(&prev) = incs.last() {
            if prev > 0.0 && inc >= prev {
                incs.push(inc);
                return Err(Gamma0Failure::NotContracting(incs));
            }
        }
        incs.push(inc);
        if inc <= cfg.tol * sc {
            return Ok((v, incs, sc));
        }
    }
    let last = *incs.last().unwrap_or(&f64::NAN);
    Err(Gamma0Failure::Fatal(Error::MaxIterations {
        iterations: cfg.max_iter,
        increment: last,
    }))
}

/// Implicit stepping on a uniform grid with one-sided operators at jumps:
/// backward Euler `(M + Δt A(t_{k+1}⁻)) u_{k+1} = M u_k + Δt M f_{k+1}`, and
/// Crank–Nicolson with `A(t_k⁺)` on the explicit half.
pub fn solve_reference(
    path: &FormPath,
    u0: &DVector<f64>,
    forcing: &Forcing,
    dt: f64,
    scheme: Scheme,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::range("dt", dt, "(0, inf)"));
    }
    check_initial(path, u0, forcing)?;
    let tau = path.tau();
    let steps = steps_for(0.0, tau, dt);
    let h = tau / steps as f64;
    let times = uniform_times(0.0, tau, steps);
    let mass = path.triple().mass().clone();
    let f = forcing.samples(&times)?;
    let mut values = Vec::with_capacity(steps + 1);
    values.push(u0.clone());
    for k in 0..steps {
        let left = path.form_side(times[k + 1], Side::Left)?;
        let u = &values[k];
        let (sys, rhs) = match scheme {
            Scheme::BackwardEuler => (&mass + &left * h, &mass * (u + &f[k + 1] * h)),
            Scheme::CrankNicolson => {
                let right = path.form_side(times[k], Side::Right)?;
                let explicit = &mass * u - &right * u * (0.5 * h);
                (&mass + &left * (0.5 * h), explicit + &mass * ((&f[k] + &f[k + 1]) * (0.5 * h)))
            }
        };
        let next = sys
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular(format!("step matrix singular at t = {}", times[k + 1])))?;
        values.push(next);
    }
    let method = match scheme {
        Scheme::BackwardEuler => Method::BackwardEuler,
        Scheme::CrankNicolson => Method::CrankNicolson,
    };
    let mut diag = SolveDiagnostics::plain(method, dt);
    diag.breakpoints = vec![0.0, tau];
    diag.breakpoint_v_norms = vec![path.triple().v_norm(u0), path.triple().v_norm(&values[steps])];
    Trajectory::assemble(path, forcing, times, values, diag)
}

/// `(A, f) ↦ (A + ν, e^{-νt} f)`.
pub fn nu_shift(path: &FormPath, forcing: &Forcing, nu: f64) -> Result<(FormPath, Forcing)> {
    if !nu.is_finite() {
        return Err(Error::range("nu", nu, "finite reals"));
    }
    if nu == 0.0 {
        return Ok((path.clone(), forcing.clone()));
    }
    let shifted = path.shifted(nu)?.with_nu(0.0)?;
    Ok((shifted, forcing.damped(nu)))
}

/// `v ↦ e^{νt} v`, with `A(t)u` and `u′` recomputed for the original problem.
pub fn nu_unshift(path: &FormPath, forcing: &Forcing, solved: &Trajectory, nu: f64) -> Result<Trajectory> {
    if !nu.is_finite() {
        return Err(Error::range("nu", nu, "finite reals"));
    }
    let mut out = solved.rescaled(path, forcing, nu)?;
    out.diagnostics_mut().shift = nu;
    Ok(out)
}

/// Solves through the path's stored shift (identity when ν = 0).
pub fn solve_shifted(
    engine: &CalculusEngine,
    path: &FormPath,
    u0: &DVector<f64>,
    forcing: &Forcing,
    cfg: &SolveConfig,
    method: Method,
) -> Result<Trajectory> {
    let nu = path.hyp().nu;
    let (sp, sf) = nu_shift(path, forcing, nu)?;
    let v = match method {
        Method::Neumann => solve_neumann(engine, &sp, u0, &sf, cfg)?,
        Method::Gamma0 => solve_contraction_gamma0(engine, &sp, u0, &sf, cfg)?,
        Method::BackwardEuler => solve_reference(&sp, u0, &sf, cfg.dt, Scheme::BackwardEuler)?,
        Method::CrankNicolson => solve_reference(&sp, u0, &sf, cfg.dt, Scheme::CrankNicolson)?,
    };
    if nu == 0.0 {
        return Ok(v);
    }
    nu_unshift(path, forcing, &v, nu)
}

/// `max_k ‖u(t_k) − (R₀u(a) + S₀u + L₀f)(t_k)‖_V` with the integrals started
/// at the left end a of each solver interval. Trajectories without interval
/// records are treated as one interval on their (uniform) grid.
pub fn duhamel_residual(
    engine: &CalculusEngine,
    path: &FormPath,
    traj: &Trajectory,
    forcing: &Forcing,
) -> Result<f64> {
    let tr = path.triple();
    let intervals: Vec<(usize, usize)> = if traj.diagnostics.intervals.is_empty() {
        Samples::new(traj.grid.clone(), traj.values.clone())?.step()?;
        vec![(0, traj.grid.len() - 1)]
    } else {
        traj.diagnostics
            .intervals
            .iter()
            .map(|r| (r.first_index, r.steps))
            .collect()
    };
    let mut worst = 0.0f64;
    for (first, steps) in intervals {
        let a = traj.grid[first];
        let b = traj.grid[first + steps];
        let st = Stepper::new(engine, path, a, b, steps)?;
        let u = &traj.values[first..=first + steps];
        let r0 = st.r0(engine, &u[0])?;
        let s0 = st.s0(u);
        let l0 = st.l0(&forcing.samples(&st.times)?);
        for k in 0..st.len() {
            let rep = &r0[k] + &s0[k] + &l0[k];
            worst = worst.max(tr.v_norm(&(&u[k] - rep)));
        }
    }
    Ok(worst)
}

fn frozen_at(path: &FormPath, t: f64) -> Result<Frozen> {
    let side = if t >= path.tau() { Side::Left } else { Side::Right };
    Ok(Frozen::new(path.triple().clone(), path.form_side(t, side)?))
}

/// `e^{-tA(t)} u₀`.
pub fn apply_r0(engine: &CalculusEngine, path: &FormPath, u0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    engine.semigroup(path, t, t, u0)
}

/// `A(t) e^{-tA(t)} u₀`.
pub fn apply_r(engine: &CalculusEngine, path: &FormPath, u0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    let fr = frozen_at(path, t)?;
    Ok(fr.op() * engine.exp_apply(&fr, t, u0)?)
}

/// Frozen Volterra integral `∫_{t_0}^{t} e^{-(t−s)A(t)} g(s) ds` over samples of
/// g, with t a sample time.
fn sampled_volterra<G>(engine: &CalculusEngine, path: &FormPath, samples: &Samples, t: f64, g: G) -> Result<(Frozen, DVector<f64>)>
where
    G: Fn(&Frozen, usize) -> Result<DVector<f64>>,
{
    let h = samples.step()?;
    let k = samples.index_of(t)?;
    let fr = frozen_at(path, samples.times[k])?;
    if k == 0 {
        return Ok((fr, DVector::zeros(path.dim())));
    }
    let p = engine.propagator(&fr, h)?;
    let mut acc = DVector::zeros(path.dim());
    let mut g0 = g(&fr, 0)?;
    for j in 0..k {
        let g1 = g(&fr, j + 1)?;
        acc = &p.e * acc + &p.p1 * &g0 + &p.p2 * &g1;
        g0 = g1;
    }
    Ok((fr, acc))
}

/// `L₀f(t) = ∫_0^t e^{-(t−s)A(t)} f(s) ds`, f piecewise linear between samples.
pub fn apply_l0(engine: &CalculusEngine, path: &FormPath, f: &Samples, t: f64) -> Result<DVector<f64>> {
    Ok(sampled_volterra(engine, path, f, t, |_, j| Ok(f.values[j].clone()))?.1)
}

/// `Lf(t) = A(t) L₀f(t)`.
pub fn apply_l(engine: &CalculusEngine, path: &FormPath, f: &Samples, t: f64) -> Result<DVector<f64>> {
    let (fr, v) = sampled_volterra(engine, path, f, t, |_, j| Ok(f.values[j].clone()))?;
    Ok(fr.op() * v)
}

fn s0_integrand<'a>(path: &'a FormPath, u: &'a Samples) -> impl Fn(&Frozen, usize) -> Result<DVector<f64>> + 'a {
    move |fr, j| {
        let s = u.times[j];
        let side = if s >= path.tau() { Side::Left } else { Side::Right };
        let diff = fr.form() - path.form_side(s, side)?;
        Ok(path.triple().mass_solve(&(diff * &u.values[j])))
    }
}

/// `S₀u(t) = ∫_0^t e^{-(t−s)A(t)} (A(t) − A(s)) u(s) ds`.
pub fn apply_s0(engine: &CalculusEngine, path: &FormPath, u: &Samples, t: f64) -> Result<DVector<f64>> {
    Ok(sampled_volterra(engine, path, u, t, s0_integrand(path, u))?.1)
}

/// `Su(t) = A(t) S₀u(t)`.
pub fn apply_s(engine: &CalculusEngine, path: &FormPath, u: &Samples, t: f64) -> Result<DVector<f64>> {
    let (fr, v) = sampled_volterra(engine, path, u, t, s0_integrand(path, u))?;
    Ok(fr.op() * v)
}

/// Probe lower bound and proof-chain upper bound of `‖S₀‖` on
/// `L^∞(a, b; V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct S0NormEstimate {
    pub probe: f64,
    pub upper: f64,
    /// eqHyp certificate of the interval
    pub certificate: f64,
    /// `sup_r r^{1/2} ‖e^{-rA(t)}‖_{L(V′,H)}`
    pub c_semigroup: f64,
    /// quadratic-estimate constant of `A(t)*`
    pub c_quadratic: f64,
    /// lower Kato constant
    pub c1: f64,
}

/// The upper bound is `2 C_sg √C_q* / C₁ · √certificate`: the V-norm is
/// bounded by `‖A^{1/2}·‖/C₁`, the semigroup is split in two halves, one
/// carrying the `r^{-1/2}` smoothing from V′ to H and the other paired with
/// the adjoint quadratic estimate.
pub fn s0_operator_norm_estimate(
    engine: &CalculusEngine,
    path: &FormPath,
    interval: (f64, f64),
    cfg: &SolveConfig,
) -> Result<S0NormEstimate> {
    let (a, b) = interval;
    if !(a >= 0.0 && b > a && b <= path.tau() * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("interval [{a}, {b}] not inside [0, tau]")));
    }
    let b = b.min(path.tau());
    let tr = path.triple();
    let st = Stepper::new(engine, path, a, b, steps_for(a, b, cfg.dt))?;
    let probe = if path.is_constant() {
        0.0
    } else {
        st.probe_s0(tr, cfg.probes.max(4), cfg.probe_steps, cfg.seed)
    };
    let certificate = path.eq_hyp_certificate(a, b, 4)?;
    let mut times: Vec<f64> = path.grid().iter().copied().filter(|&t| t > a && t < b).collect();
    times.push(a);
    times.push(b);
    let sides: Vec<(f64, Side)> = times
        .iter()
        .flat_map(|&t| {
            let mut v = Vec::with_capacity(2);
            if t < b {
                v.push((t, Side::Right));
            }
            if t > a {
                v.push((t, Side::Left));
            }
            v
        })
        .collect();
    let adj = path.adjoint()?;
    let consts: Vec<(f64, f64, f64)> = sides
        .par_iter()
        .map(|&(t, side)| {
            let fr = Frozen::new(tr.clone(), path.form_side(t, side)?);
            let fa = Frozen::new(tr.clone(), adj.form_side(t, side)?);
            let csg = estimates::smoothing_constant(engine, &fr)?;
            let cq = estimates::quadratic_sup(engine, &fa, f64::INFINITY)?;
            let root = engine.power_matrix(&fr, 0.5)?;
            let sv = tr.h_singular_values(&(root * tr.lambda_power(-0.5)));
            Ok((csg, cq, sv[sv.len() - 1]))
        })
        .collect::<Result<_>>()?;
    let c_semigroup = consts.iter().map(|c| c.0).fold(0.0, f64::max);
    let c_quadratic = consts.iter().map(|c| c.1).fold(0.0, f64::max);
    let c1 = consts.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    let upper = 2.0 * c_semigroup * c_quadratic.sqrt() / c1 * certificate.sqrt();
    if probe > upper * (1.0 + 1e-6) {
        return Err(Error::Quadrature {
            what: format!("S0 probe {probe:.6e} exceeds the bound {upper:.6e}"),
            residual: probe - upper,
        });
    }
    Ok(S0NormEstimate {
        probe,
        upper,
        certificate,
        c_semigroup,
        c_quadratic,
        c1,
    })
}
