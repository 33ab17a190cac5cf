//! Time-dependent form families `t ↦ a(t)` sampled on a grid.
//!
//! Every difference-norm computation goes through sample-wise reductions
//! `D^{-γ/2} Xᵀ A_k X D^{-1/2}`, so `‖A(t) − A(s)‖_{L(V, V′_γ)}` is the spectral
//! norm of a short linear combination of reduced samples. Paths whose samples
//! differ from the first one by multiples of a single matrix skip the
//! decomposition entirely.

use std::cell::OnceCell;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::gelfand::{check_gamma, GelfandTriple};
use crate::linalg::{self, check_finite_matrix, check_square};
use crate::quadrature::GaussRule;
use crate::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interp {
    /// `A(t) = A_k` on `[t_k, t_{k+1})`
    PiecewiseConstantLeft,
    PiecewiseLinear,
}

/// One-sided evaluation at a time where the path may jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisConstants {
    /// bound of `‖A(t)‖_{L(V,V′)}`
    pub m: f64,
    /// coercivity of `A(t) + ν`
    pub delta: f64,
    pub nu: f64,
    /// bound of `‖A(t) − A(s)‖_{L(V,V′_γ)}` when computed
    pub m_gamma: Option<f64>,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub constants: HypothesisConstants,
    /// infimum of the shifts giving `δ > 0`; negative when the path is coercive with room to spare
    pub min_nu: f64,
    pub coercive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subdivision {
    pub breakpoints: Vec<f64>,
    /// certified sup-integral per interval
    pub certificates: Vec<f64>,
    pub eps: f64,
}

impl Subdivision {
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breakpoints.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Value of the path at a point: `(1−θ) A_{k0} + θ A_{k1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Point {
    k0: usize,
    k1: usize,
    theta: f64,
}

impl Point {
    fn new(k0: usize, k1: usize, theta: f64) -> Self {
        if theta == 0.0 || k0 == k1 {
            Point { k0, k1: k0, theta: 0.0 }
        } else if theta == 1.0 {
            Point { k0: k1, k1, theta: 0.0 }
        } else {
            Point { k0, k1, theta }
        }
    }

    fn terms(&self) -> [(usize, f64); 2] {
        [(self.k0, 1.0 - self.theta), (self.k1, self.theta)]
    }
}

#[derive(Debug, Clone)]
struct RankOne {
    coefs: Vec<f64>,
    direction: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct FormPath {
    id: u64,
    triple: Arc<GelfandTriple>,
    grid: Vec<f64>,
    forms: Vec<DMatrix<f64>>,
    interp: Interp,
    hyp: HypothesisConstants,
    min_nu: f64,
    breakpoints: Vec<f64>,
    rank_one: Option<RankOne>,
}

/// Affine piece of the path between two times, inside one grid cell.
#[derive(Debug, Clone, Copy)]
struct Segment {
    t0: f64,
    t1: f64,
    k0: usize,
    k1: usize,
    th0: f64,
    th1: f64,
    p0: Point,
    p1: Point,
}

impl Segment {
    fn new(t0: f64, t1: f64, k0: usize, k1: usize, th0: f64, th1: f64) -> Self {
        Segment {
            t0,
            t1,
            k0,
            k1,
            th0,
            th1,
            p0: Point::new(k0, k1, th0),
            p1: Point::new(k0, k1, th1),
        }
    }

    fn len(&self) -> f64 {
        self.t1 - self.t0
    }

    /// Value at fraction x of the segment.
    fn at(&self, x: f64) -> Point {
        if x == 0.0 {
            return self.p0;
        }
        if x == 1.0 {
            return self.p1;
        }
        Point::new(self.k0, self.k1, self.th0 + x * (self.th1 - self.th0))
    }
}

/// Norms of differences of path values for one target exponent.
pub(crate) struct DiffOracle<'a> {
    path: &'a FormPath,
    gamma: f64,
    scale: f64,
    reduced: Vec<OnceCell<DMatrix<f64>>>,
}

impl<'a> DiffOracle<'a> {
    fn new(path: &'a FormPath, gamma: f64) -> Self {
        let scale = match &path.rank_one {
            Some(r) => linalg::spectral_norm(&path.triple.reduce_form(&r.direction, 1.0, gamma)),
            None => 0.0,
        };
        DiffOracle {
            path,
            gamma,
            scale,
            reduced: (0..path.forms.len()).map(|_| OnceCell::new()).collect(),
        }
    }

    fn reduced(&self, k: usize) -> &DMatrix<f64> {
        self.reduced[k].get_or_init(|| self.path.triple.reduce_form(&self.path.forms[k], 1.0, self.gamma))
    }

    fn norm(&self, p: &Point, q: &Point) -> f64 {
        if p == q {
            return 0.0;
        }
        if let Some(r) = &self.path.rank_one {
            let c = |x: &Point| (1.0 - x.theta) * r.coefs[x.k0] + x.theta * r.coefs[x.k1];
            return (c(p) - c(q)).abs() * self.scale;
        }
        let n = self.path.triple.dim();
        let mut m = DMatrix::zeros(n, n);
        for (k, w) in p.terms() {
            if w != 0.0 {
                add_scaled(&mut m, w, self.reduced(k));
            }
        }
        for (k, w) in q.terms() {
            if w != 0.0 {
                add_scaled(&mut m, -w, self.reduced(k));
            }
        }
        linalg::spectral_norm(&m)
    }
}

fn add_scaled(m: &mut DMatrix<f64>, w: f64, x: &DMatrix<f64>) {
    m.iter_mut().zip(x.iter()).for_each(|(a, b)| *a += w * b);
}

/// `∫ g(r)² r^{-κ} dr` over `[r_lo, r_hi]` with g affine from `g_lo` to `g_hi`.
fn chord_integral(r_lo: f64, r_hi: f64, g_lo: f64, g_hi: f64, kappa: f64, rule: &GaussRule) -> f64 {
    let w = r_hi - r_lo;
    if w <= 0.0 {
        return 0.0;
    }
    let q = (g_hi - g_lo) / w;
    if r_lo == 0.0 {
        if g_lo > 0.0 && kappa >= 1.0 {
            return f64::INFINITY;
        }
        let p = g_lo;
        let head = if p == 0.0 {
            0.0
        } else {
            p * p * w.powf(1.0 - kappa) / (1.0 - kappa) + 2.0 * p * q * w.powf(2.0 - kappa) / (2.0 - kappa)
        };
        return head + q * q * w.powf(3.0 - kappa) / (3.0 - kappa);
    }
    if r_lo >= w {
        return rule.integrate(r_lo, r_hi, |r| {
            let g = g_lo + q * (r - r_lo);
            g * g * r.powf(-kappa)
        });
    }
    let p = g_lo - q * r_lo;
    let pw = |e: f64| {
        if e == 0.0 {
            (r_hi / r_lo).ln()
        } else {
            (r_hi.powf(e) - r_lo.powf(e)) / e
        }
    };
    p * p * pw(1.0 - kappa) + 2.0 * p * q * pw(2.0 - kappa) + q * q * pw(3.0 - kappa)
}

/// Pairwise norms between segment endpoints, filled on demand.
struct NodeNorms<'o, 'a> {
    oracle: &'o DiffOracle<'a>,
    points: Vec<Point>,
    cache: Vec<f64>,
}

impl<'o, 'a> NodeNorms<'o, 'a> {
    fn new(oracle: &'o DiffOracle<'a>, segs: &[Segment]) -> Self {
        let points: Vec<Point> = segs.iter().flat_map(|s| [s.p0, s.p1]).collect();
        let n = points.len();
        NodeNorms {
            oracle,
            points,
            cache: vec![f64::NAN; n * n],
        }
    }

    fn get(&mut self, a: usize, b: usize) -> f64 {
        let n = self.points.len();
        let v = self.cache[a * n + b];
        if !v.is_nan() {
            return v;
        }
        let v = self.oracle.norm(&self.points[a], &self.points[b]);
        self.cache[a * n + b] = v;
        self.cache[b * n + a] = v;
        v
    }
}

/// Node index of a segment endpoint: node `2j` is the left end of segment j.
fn node_time(segs: &[Segment], node: usize) -> f64 {
    let s = &segs[node / 2];
    if node % 2 == 0 {
        s.t0
    } else {
        s.t1
    }
}

/// Contribution of segment j to the weighted integral seen from node e.
fn node_segment_term(
    norms: &mut NodeNorms,
    segs: &[Segment],
    e: usize,
    j: usize,
    kappa: f64,
    rule: &GaussRule,
) -> f64 {
    let te = node_time(segs, e);
    let s = &segs[j];
    let ga = norms.get(e, 2 * j);
    let gb = norms.get(e, 2 * j + 1);
    if te <= s.t0 {
        chord_integral(s.t0 - te, s.t1 - te, ga, gb, kappa, rule)
    } else {
        chord_integral((te - s.t1).max(0.0), te - s.t0, gb, ga, kappa, rule)
    }
}

impl FormPath {
    pub fn new(
        triple: Arc<GelfandTriple>,
        grid: Vec<f64>,
        forms: Vec<DMatrix<f64>>,
        interp: Interp,
    ) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::invalid("a path needs at least two time samples"));
        }
        if grid.len() != forms.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: forms.len(),
            });
        }
        if grid[0] != 0.0 {
            return Err(Error::range("first time sample", grid[0], "{0}"));
        }
        for w in grid.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::invalid(format!(
                    "time grid not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        let n = triple.dim();
        for f in &forms {
            check_square(f, n)?;
            check_finite_matrix("form sample", f)?;
        }
        let mut path = FormPath {
            id: fresh_id(),
            triple,
            grid,
            forms,
            interp,
            hyp: HypothesisConstants {
                m: 0.0,
                delta: 0.0,
                nu: 0.0,
                m_gamma: None,
                gamma: 1.0,
            },
            min_nu: 0.0,
            breakpoints: Vec::new(),
            rank_one: None,
        };
        path.rank_one = path.detect_rank_one();
        let check = path.check_with_nu(0.0);
        let nu = if check.coercive {
            0.0
        } else {
            check.min_nu + path.triple.lambda_min()
        };
        let check = path.check_with_nu(nu);
        path.hyp = check.constants;
        path.min_nu = check.min_nu;
        Ok(path)
    }

    /// Time-independent path on `[0, tau]`.
    pub fn constant(triple: Arc<GelfandTriple>, form: DMatrix<f64>, tau: f64) -> Result<Self> {
        Self::new(
            triple,
            vec![0.0, tau],
            vec![form.clone(), form],
            Interp::PiecewiseLinear,
        )
    }

    /// Samples `f(t_k)` of a form-valued function on a uniform grid.
    pub fn sample<F: Fn(f64) -> DMatrix<f64>>(
        triple: Arc<GelfandTriple>,
        tau: f64,
        cells: usize,
        interp: Interp,
        f: F,
    ) -> Result<Self> {
        if cells == 0 || !(tau > 0.0) {
            return Err(Error::invalid("need tau > 0 and at least one cell"));
        }
        let grid: Vec<f64> = (0..=cells).map(|k| tau * k as f64 / cells as f64).collect();
        let forms = grid.iter().map(|&t| f(t)).collect();
        Self::new(triple, grid, forms, interp)
    }

    /// Scalar path on `Λ = {lambda}`.
    pub fn scalar<F: Fn(f64) -> f64>(
        lambda: f64,
        tau: f64,
        cells: usize,
        interp: Interp,
        a: F,
    ) -> Result<Self> {
        let triple = Arc::new(GelfandTriple::scalar(lambda)?);
        Self::sample(triple, tau, cells, interp, |t| DMatrix::from_element(1, 1, a(t)))
    }

    fn detect_rank_one(&self) -> Option<RankOne> {
        let base = &self.forms[0];
        let diffs: Vec<DMatrix<f64>> = self.forms.iter().map(|f| f - base).collect();
        let scale = self.forms.iter().map(|f| f.norm()).fold(0.0, f64::max);
        let tol = 64.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        let (kstar, big) = diffs
            .iter()
            .enumerate()
            .map(|(k, d)| (k, d.norm()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if big <= tol {
            return Some(RankOne {
                coefs: vec![0.0; self.forms.len()],
                direction: DMatrix::zeros(base.nrows(), base.ncols()),
            });
        }
        let dir = diffs[kstar].clone();
        let dd = dir.norm_squared();
        let mut coefs = Vec::with_capacity(diffs.len());
        for d in &diffs {
            let c = d.dot(&dir) / dd;
            if (d - &dir * c).norm() > tol {
                return None;
            }
            coefs.push(c);
        }
        Some(RankOne {
            coefs,
            direction: dir,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn triple(&self) -> &Arc<GelfandTriple> {
        &self.triple
    }

    pub fn dim(&self) -> usize {
        self.triple.dim()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn forms(&self) -> &[DMatrix<f64>] {
        &self.forms
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn tau(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn hyp(&self) -> &HypothesisConstants {
        &self.hyp
    }

    /// Infimum of the admissible shifts.
    pub fn min_nu(&self) -> f64 {
        self.min_nu
    }

    /// User-declared breakpoints honoured by [`FormPath::subdivide`].
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// True when all samples lie on one line through the first sample.
    pub fn is_rank_one(&self) -> bool {
        self.rank_one.is_some()
    }

    pub fn is_constant(&self) -> bool {
        self.rank_one
            .as_ref()
            .is_some_and(|r| r.coefs.iter().all(|&c| c == 0.0))
    }

    pub fn with_breakpoints(mut self, mut points: Vec<f64>) -> Result<Self> {
        let tau = self.tau();
        for &p in &points {
            if !(p > 0.0 && p < tau) {
                return Err(Error::range("breakpoint", p, "(0, tau)"));
            }
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        self.breakpoints = points;
        Ok(self)
    }

    /// Re-evaluates the hypothesis constants for a given shift.
    pub fn with_nu(mut self, nu: f64) -> Result<Self> {
        if !nu.is_finite() {
            return Err(Error::range("nu", nu, "finite reals"));
        }
        let check = self.check_with_nu(nu);
        self.hyp = HypothesisConstants {
            m_gamma: self.hyp.m_gamma,
            gamma: self.hyp.gamma,
            ..check.constants
        };
        Ok(self)
    }

    /// Computes and stores the uniform difference bound for exponent γ.
    pub fn with_difference_bound(mut self, gamma: f64) -> Result<Self> {
        let mg = self.difference_bound(gamma)?;
        self.hyp.m_gamma = Some(mg);
        self.hyp.gamma = gamma;
        Ok(self)
    }

    fn with_forms(&self, forms: Vec<DMatrix<f64>>) -> Result<Self> {
        let mut p = FormPath::new(self.triple.clone(), self.grid.clone(), forms, self.interp)?;
        p.breakpoints = self.breakpoints.clone();
        if self.hyp.m_gamma.is_some() {
            p = p.with_difference_bound(self.hyp.gamma)?;
        }
        Ok(p)
    }

    /// The path of `A(t) + ν`.
    pub fn shifted(&self, nu: f64) -> Result<Self> {
        let mass = self.triple.mass();
        self.with_forms(self.forms.iter().map(|f| f + mass * nu).collect())
    }

    /// The path of the H-adjoints `A(t)*`.
    pub fn adjoint(&self) -> Result<Self> {
        self.with_forms(self.forms.iter().map(|f| f.transpose()).collect())
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t <= self.tau() {
            Ok(())
        } else {
            Err(Error::range("time", t, &format!("[0, {}]", self.tau())))
        }
    }

    /// Cell k with `t_k ≤ t ≤ t_{k+1}` and the local coordinate.
    fn locate(&self, t: f64) -> (usize, f64) {
        let kmax = self.grid.len() - 2;
        let k = self.grid.partition_point(|&g| g <= t).saturating_sub(1).min(kmax);
        let th = ((t - self.grid[k]) / (self.grid[k + 1] - self.grid[k])).clamp(0.0, 1.0);
        (k, th)
    }

    pub(crate) fn point(&self, t: f64, side: Side) -> Point {
        let (mut k, mut th) = self.locate(t);
        if side == Side::Left && th == 0.0 && k > 0 {
            k -= 1;
            th = 1.0;
        }
        match self.interp {
            Interp::PiecewiseLinear => Point::new(k, k + 1, th),
            Interp::PiecewiseConstantLeft => {
                if th == 1.0 && side == Side::Right && k + 2 < self.grid.len() {
                    Point::new(k + 1, k + 1, 0.0)
                } else {
                    Point::new(k, k, 0.0)
                }
            }
        }
    }

    fn eval_point(&self, p: &Point) -> DMatrix<f64> {
        if p.theta == 0.0 {
            self.forms[p.k0].clone()
        } else {
            &self.forms[p.k0] * (1.0 - p.theta) + &self.forms[p.k1] * p.theta
        }
    }

    /// One-sided form value. For piecewise-constant paths the last sample is
    /// never used: the value on the final cell extends to τ.
    pub fn form_side(&self, t: f64, side: Side) -> Result<DMatrix<f64>> {
        self.check_range(t)?;
        Ok(self.eval_point(&self.point(t, side)))
    }

    /// Right-continuous form value (left limit at τ).
    pub fn form_at(&self, t: f64) -> Result<DMatrix<f64>> {
        let side = if t >= self.tau() { Side::Left } else { Side::Right };
        self.form_side(t, side)
    }

    /// H-representation `M_H⁻¹ A_form(t)`.
    pub fn operator_at(&self, t: f64, side: Side) -> Result<DMatrix<f64>> {
        Ok(self.triple.h_representation(&self.form_side(t, side)?))
    }

    /// True when the path has a jump at t.
    pub fn jumps_at(&self, t: f64) -> bool {
        t > 0.0 && t < self.tau() && self.point(t, Side::Left) != self.point(t, Side::Right)
    }

    fn check_with_nu(&self, nu: f64) -> HypothesisCheck {
        let tr = &self.triple;
        let x = tr.basis();
        let mut m = 0.0f64;
        let mut delta = f64::INFINITY;
        let mut min_nu = f64::NEG_INFINITY;
        let last = match self.interp {
            Interp::PiecewiseLinear => self.forms.len(),
            Interp::PiecewiseConstantLeft => self.forms.len() - 1,
        };
        for f in &self.forms[..last] {
            let core = x.transpose() * f * x;
            let sym = linalg::symmetrize(&core);
            min_nu = min_nu.max(-linalg::sym_eigenvalues(&sym)[0]);
            let red = tr.reduce_form(f, 1.0, 1.0);
            m = m.max(linalg::spectral_norm(&red));
            let mut shifted = linalg::symmetrize(&red);
            for (i, l) in tr.eigenvalues().iter().enumerate() {
                shifted[(i, i)] += nu / l;
            }
            delta = delta.min(linalg::sym_eigenvalues(&shifted)[0]);
        }
        HypothesisCheck {
            constants: HypothesisConstants {
                m,
                delta,
                nu,
                m_gamma: None,
                gamma: 1.0,
            },
            min_nu,
            coercive: delta > 0.0,
        }
    }

    /// Boundedness and coercivity constants at the path's shift.
    ///
    /// Both extremes are attained at samples: the norm is convex and the
    /// coercivity eigenvalue concave along each linear piece.
    pub fn verify_hypotheses(&self) -> Result<HypothesisCheck> {
        let mut check = self.check_with_nu(self.hyp.nu);
        check.constants.m_gamma = self.hyp.m_gamma;
        check.constants.gamma = self.hyp.gamma;
        if !check.min_nu.is_finite() || !check.constants.m.is_finite() {
            return Err(Error::Degenerate("non-finite hypothesis constants".into()));
        }
        Ok(check)
    }

    pub(crate) fn oracle(&self, gamma: f64) -> DiffOracle<'_> {
        DiffOracle::new(self, gamma)
    }

    /// `‖A_form(t) − A_form(s)‖_{L(V, V′_γ)}`.
    pub fn diff_norm(&self, t: f64, s: f64, gamma: f64) -> Result<f64> {
        self.check_range(t)?;
        self.check_range(s)?;
        check_gamma(gamma)?;
        let side = |x: f64| if x >= self.tau() { Side::Left } else { Side::Right };
        let (p, q) = (self.point(t, side(t)), self.point(s, side(s)));
        if p == q {
            return Ok(0.0);
        }
        if self.rank_one.is_some() {
            return Ok(self.oracle(gamma).norm(&p, &q));
        }
        let d = self.eval_point(&p) - self.eval_point(&q);
        Ok(linalg::spectral_norm(&self.triple.reduce_form(&d, 1.0, gamma)))
    }

    /// `sup_{t,s} ‖A(t) − A(s)‖_{L(V,V′_γ)}`, attained at pairs of samples.
    pub fn difference_bound(&self, gamma: f64) -> Result<f64> {
        check_gamma(gamma)?;
        let oracle = self.oracle(gamma);
        let last = match self.interp {
            Interp::PiecewiseLinear => self.forms.len(),
            Interp::PiecewiseConstantLeft => self.forms.len() - 1,
        };
        let pts: Vec<Point> = (0..last).map(|k| Point::new(k, k, 0.0)).collect();
        let mut best = 0.0f64;
        for i in 0..pts.len() {
            for j in 0..i {
                best = best.max(oracle.norm(&pts[i], &pts[j]));
            }
        }
        Ok(best)
    }

    fn check_interval(&self, a: f64, b: f64) -> Result<()> {
        self.check_range(a)?;
        self.check_range(b)?;
        if !(b > a) {
            return Err(Error::invalid(format!("empty interval [{a}, {b}]")));
        }
        Ok(())
    }

    /// Affine pieces covering `[a, b]`, each grid cell split into `refine` parts.
    fn segments(&self, a: f64, b: f64, refine: usize) -> Vec<Segment> {
        let refine = refine.max(1);
        let mut out = Vec::new();
        for k in 0..self.grid.len() - 1 {
            let (g0, g1) = (self.grid[k], self.grid[k + 1]);
            let lo = g0.max(a);
            let hi = g1.min(b);
            if !(hi > lo) {
                continue;
            }
            let h = g1 - g0;
            let th_lo = if lo == g0 { 0.0 } else { (lo - g0) / h };
            let th_hi = if hi == g1 { 1.0 } else { (hi - g0) / h };
            let mut times = Vec::with_capacity(refine + 1);
            let mut thetas = Vec::with_capacity(refine + 1);
            for i in 0..=refine {
                let x = i as f64 / refine as f64;
                let (t, th) = if i == 0 {
                    (lo, th_lo)
                } else if i == refine {
                    (hi, th_hi)
                } else {
                    (lo + x * (hi - lo), th_lo + x * (th_hi - th_lo))
                };
                times.push(t);
                thetas.push(th);
            }
            for i in 0..refine {
                out.push(match self.interp {
                    Interp::PiecewiseLinear => {
                        Segment::new(times[i], times[i + 1], k, k + 1, thetas[i], thetas[i + 1])
                    }
                    Interp::PiecewiseConstantLeft => {
                        Segment::new(times[i], times[i + 1], k, k, 0.0, 0.0)
                    }
                });
            }
        }
        out
    }

    /// `sup_t ∫_a^b ‖A(t) − A(s)‖²_{L(V,V′)} / |t − s| ds` over grid times t in
    /// `[a, b]`, bounded above by integrating the chord of the convex norm on
    /// each piece in closed form. Infinite across a jump.
    pub fn eq_hyp_certificate(&self, a: f64, b: f64, refine: usize) -> Result<f64> {
        self.check_interval(a, b)?;
        let segs = self.segments(a, b, refine);
        let oracle = self.oracle(1.0);
        let mut norms = NodeNorms::new(&oracle, &segs);
        let rule = GaussRule::new(8);
        let mut best = 0.0f64;
        for e in 0..2 * segs.len() {
            let mut total = 0.0;
            for j in 0..segs.len() {
                total += node_segment_term(&mut norms, &segs, e, j, 1.0, &rule);
            }
            best = best.max(total);
        }
        Ok(best)
    }

    /// `sup_s ∫_s^b ‖A(t) − A(s)‖²_{L(V,V′_γ)} / |t − s|^γ dt` over grid times s.
    pub fn ll2_certificate(&self, gamma: f64, a: f64, b: f64, refine: usize) -> Result<f64> {
        check_gamma(gamma)?;
        self.check_interval(a, b)?;
        let segs = self.segments(a, b, refine);
        let oracle = self.oracle(gamma);
        let mut norms = NodeNorms::new(&oracle, &segs);
        let rule = GaussRule::new(8);
        let mut best = 0.0f64;
        for e in 0..2 * segs.len() {
            let te = node_time(&segs, e);
            let mut total = 0.0;
            for j in 0..segs.len() {
                if segs[j].t0 >= te {
                    total += node_segment_term(&mut norms, &segs, e, j, gamma, &rule);
                }
            }
            best = best.max(total);
        }
        Ok(best)
    }

    /// Greedy left-to-right subdivision certifying the sup-integral below `eps`
    /// on every interval. Jumps and declared breakpoints always split.
    pub fn subdivide(&self, eps: f64) -> Result<Subdivision> {
        if !(eps > 0.0) {
            return Err(Error::range("eps", eps, "(0, inf)"));
        }
        let segs = self.segments(0.0, self.tau(), 1);
        let forced: Vec<f64> = self.breakpoints.iter().map(|&b| self.snap(b)).collect();
        let oracle = self.oracle(1.0);
        let mut norms = NodeNorms::new(&oracle, &segs);
        let rule = GaussRule::new(8);

        let mut breakpoints = vec![0.0];
        let mut certificates = Vec::new();
        let mut start = 0;
        let mut totals: Vec<f64> = Vec::new();
        let mut current = 0.0f64;
        let mut j = 0;
        while j < segs.len() {
            let forced_here = j > start && forced.contains(&segs[j].t0);
            let mut trial = totals.clone();
            let mut worst = 0.0f64;
            if !forced_here {
                for (idx, v) in trial.iter_mut().enumerate() {
                    *v += node_segment_term(&mut norms, &segs, 2 * start + idx, j, 1.0, &rule);
                    worst = worst.max(*v);
                }
                for e in [2 * j, 2 * j + 1] {
                    let mut total = 0.0;
                    for i in start..=j {
                        total += node_segment_term(&mut norms, &segs, e, i, 1.0, &rule);
                    }
                    trial.push(total);
                    worst = worst.max(total);
                }
            }
            if !forced_here && worst < eps {
                totals = trial;
                current = worst;
                j += 1;
            } else if j == start {
                return Err(Error::PathTooRough {
                    start: segs[j].t0,
                    end: segs[j].t1,
                    value: worst,
                    eps,
                });
            } else {
                breakpoints.push(segs[j].t0);
                certificates.push(current);
                start = j;
                totals.clear();
                current = 0.0;
            }
        }
        breakpoints.push(self.tau());
        certificates.push(current);
        Ok(Subdivision {
            breakpoints,
            certificates,
            eps,
        })
    }

    fn snap(&self, t: f64) -> f64 {
        let k = self.grid.partition_point(|&g| g < t);
        let cands = [k.saturating_sub(1), k.min(self.grid.len() - 1)];
        cands
            .iter()
            .map(|&i| self.grid[i])
            .min_by(|x, y| (x - t).abs().total_cmp(&(y - t).abs()))
            .unwrap_or(t)
    }

    /// `(∫∫_{[a,b]²} ‖A(t) − A(s)‖²_{L(V,V′_γ)} / |t − s|^{2α+1} ds dt)^{1/2}`.
    ///
    /// Same-piece pairs are integrated in closed form, touching pieces through
    /// a Duffy split of the corner, distant pieces by tensor Gauss rules.
    pub fn sobolev_seminorm(&self, alpha: f64, gamma: f64, a: f64, b: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::range("alpha", alpha, "(0, 1)"));
        }
        check_gamma(gamma)?;
        self.check_interval(a, b)?;
        let segs = self.segments(a, b, 1);
        let oracle = self.oracle(gamma);
        let far = GaussRule::new(6);
        let duffy = GaussRule::new(16);
        let beta = 2.0 * alpha + 1.0;
        let mut total = 0.0;
        for (i, si) in segs.iter().enumerate() {
            let d = oracle.norm(&si.p0, &si.p1);
            let l = si.len();
            total += d * d * 2.0 * l.powf(1.0 - 2.0 * alpha)
                / ((2.0 - 2.0 * alpha) * (3.0 - 2.0 * alpha));
            for (j, sj) in segs.iter().enumerate().skip(i + 1) {
                let part = if j == i + 1 && sj.t0 == si.t1 {
                    self.touching_pair(&oracle, si, sj, alpha, &duffy, &far)
                } else {
                    let mut acc = 0.0;
                    for (s, ws) in far.on(0.0, 1.0) {
                        let ps = si.at(s);
                        let ts = si.t0 + s * si.len();
                        for (t, wt) in far.on(0.0, 1.0) {
                            let pt = sj.at(t);
                            let tt = sj.t0 + t * sj.len();
                            let g = oracle.norm(&pt, &ps);
                            acc += ws * wt * g * g / (tt - ts).powf(beta);
                        }
                    }
                    acc * si.len() * sj.len()
                };
                total += 2.0 * part;
            }
        }
        Ok(total.sqrt())
    }

    /// Double integral over `left × right` where `left` ends where `right` starts.
    fn touching_pair(
        &self,
        oracle: &DiffOracle,
        left: &Segment,
        right: &Segment,
        alpha: f64,
        duffy: &GaussRule,
        far: &GaussRule,
    ) -> f64 {
        let beta = 2.0 * alpha + 1.0;
        let jump = oracle.norm(&left.p1, &right.p0);
        if jump > 0.0 && alpha >= 0.5 {
            return f64::INFINITY;
        }
        let (ll, lr) = (left.len(), right.len());
        let m = ll.min(lr);
        // p: distance of t to the junction (right side), q: of s (left side)
        let f = |p: f64, q: f64| {
            let pt = right.at(p / lr);
            let ps = left.at(1.0 - q / ll);
            let g = oracle.norm(&pt, &ps);
            g * g
        };
        let mut corner = 0.0;
        if jump == 0.0 {
            let c = m.powf(1.0 - 2.0 * alpha) / (3.0 - 2.0 * alpha);
            for (w, ww) in duffy.on(0.0, 1.0) {
                let k = (1.0 + w).powf(-beta);
                corner += ww * k * (f(m, m * w) + f(m * w, m));
            }
            corner *= c;
        } else {
            let e = 1.0 / (1.0 - 2.0 * alpha);
            let c = m.powf(1.0 - 2.0 * alpha) * e;
            for (y, wy) in duffy.on(0.0, 1.0) {
                let r = m * y.powf(e);
                for (w, ww) in duffy.on(0.0, 1.0) {
                    let k = (1.0 + w).powf(-beta);
                    corner += wy * ww * k * (f(r, r * w) + f(r * w, r));
                }
            }
            corner *= c;
        }
        // leftover strips, split geometrically away from the corner
        let mut strips = 0.0;
        for (long_is_right, long) in [(true, lr), (false, ll)] {
            let mut lo = m;
            while lo < long {
                let hi = (2.0 * lo).min(long);
                for (x, wx) in far.on(lo, hi) {
                    for (y, wy) in far.on(0.0, m) {
                        let (p, q) = if long_is_right { (x, y) } else { (y, x) };
                        strips += wx * wy * f(p, q) / (p + q).powf(beta);
                    }
                }
                lo = hi;
            }
        }
        corner + strips
    }
}
