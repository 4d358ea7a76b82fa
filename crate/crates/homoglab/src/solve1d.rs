//! Essentially-exact solver for `−(a u′)′ = f` on an interval with
//! Dirichlet data, via 1D flux integration.
//!
//! Writing `F(x) = ∫ₛˣ f`, the flux `σ = a u′` satisfies `σ = C − F`
//! for a constant `C` fixed by the boundary data, and
//! `u(x) = u(s) + ∫ₛˣ (C − F)/a`. All integrals use composite 5-point
//! Gauss on a partition that contains every known coefficient
//! discontinuity as a cell boundary, so piecewise-constant
//! checkerboard coefficients are integrated exactly and the sweep over
//! ε isolates the homogenization error from quadrature bias.

use crate::error::{Error, Result};
use crate::fields::FieldRealization;

/// Open interval `(s, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub s: f64,
    pub t: f64,
}

impl Interval {
    pub fn new(s: f64, t: f64) -> Result<Self> {
        if s < t && s.is_finite() && t.is_finite() {
            Ok(Self { s, t })
        } else {
            Err(Error::InvalidSpec(format!(
                "interval needs s < t, got ({s}, {t})"
            )))
        }
    }

    /// The unit interval `(0, 1)`.
    pub fn unit() -> Self {
        Self { s: 0.0, t: 1.0 }
    }

    pub fn length(&self) -> f64 {
        self.t - self.s
    }
}

type RealFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Source term `f`, optionally with an analytic antiderivative
/// (used exactly when present, integrated numerically otherwise).
pub struct Source1D {
    f: Box<RealFn>,
    antiderivative: Option<Box<RealFn>>,
}

impl Source1D {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            f: Box::new(f),
            antiderivative: None,
        }
    }

    pub fn with_antiderivative<F, A>(f: F, antiderivative: A) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        A: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            f: Box::new(f),
            antiderivative: Some(Box::new(antiderivative)),
        }
    }

    /// The source `f(x) = −3(2x − 1)` used throughout the 1D studies,
    /// with antiderivative `3x − 3x²`.
    pub fn cubic_bench() -> Self {
        Self::with_antiderivative(|x| -3.0 * (2.0 * x - 1.0), |x| 3.0 * x - 3.0 * x * x)
    }

    /// Constant source `f ≡ c`.
    pub fn constant(c: f64) -> Self {
        Self::with_antiderivative(move |_| c, move |x| c * x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

/// A 1D coefficient the solver can integrate: pointwise evaluation plus
/// the locations of its jump discontinuities.
pub trait Coefficient1d {
    fn eval(&self, x: f64) -> f64;

    /// Sorted discontinuity locations strictly inside the domain.
    fn breakpoints(&self, _domain: Interval) -> Vec<f64> {
        Vec::new()
    }
}

/// Constant coefficient.
pub struct ConstantCoeff(pub f64);

impl Coefficient1d for ConstantCoeff {
    fn eval(&self, _x: f64) -> f64 {
        self.0
    }
}

/// Smooth coefficient given by a closure.
pub struct SmoothCoeff<F>(pub F);

impl<F: Fn(f64) -> f64> Coefficient1d for SmoothCoeff<F> {
    fn eval(&self, x: f64) -> f64 {
        self.0(x)
    }
}

/// Piecewise-constant coefficient: `values[i]` on
/// `[breaks[i-1], breaks[i])` with implicit outer pieces.
pub struct PiecewiseConstant {
    /// Strictly increasing jump locations.
    pub breaks: Vec<f64>,
    /// One more value than breaks.
    pub values: Vec<f64>,
}

impl Coefficient1d for PiecewiseConstant {
    fn eval(&self, x: f64) -> f64 {
        let i = self.breaks.partition_point(|&b| b <= x);
        self.values[i]
    }

    fn breakpoints(&self, domain: Interval) -> Vec<f64> {
        self.breaks
            .iter()
            .copied()
            .filter(|&b| b > domain.s && b < domain.t)
            .collect()
    }
}

/// The ε-scaled coefficient `x ↦ a(x/ε)` of a field realization,
/// reporting its tile lattice as breakpoints.
pub struct ScaledField<'a> {
    pub realization: &'a FieldRealization,
    pub eps: f64,
}

impl Coefficient1d for ScaledField<'_> {
    fn eval(&self, x: f64) -> f64 {
        self.realization.eval_scaled_1d(self.eps, x)
    }

    fn breakpoints(&self, domain: Interval) -> Vec<f64> {
        self.realization
            .scaled_breakpoints_1d(self.eps, domain.s, domain.t)
    }
}

/// Discrete solution: `u` and the flux `σ = a u′ = C − F` sampled on
/// the quadrature partition (base cell boundaries and midpoints).
#[derive(Debug, Clone)]
pub struct Solution1D {
    /// Sorted sample points from `s` to `t`; odd length, base-cell
    /// boundaries at even indices.
    pub grid: Vec<f64>,
    /// `u` at the grid points; both endpoint values equal the
    /// Dirichlet data exactly.
    pub u: Vec<f64>,
    /// `σ(x) = C − F(x)` at the grid points.
    pub flux: Vec<f64>,
    /// The flux constant `C`.
    pub flux_constant: f64,
    /// Run metadata carried along for reports.
    pub meta: SolveMeta,
}

/// Metadata describing where a solution came from.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveMeta {
    pub eps: Option<f64>,
    pub seed: Option<u64>,
    /// Base quadrature cells requested.
    pub n_cells: usize,
}

/// Solves `−(a u′)′ = f` on `domain` with homogeneous Dirichlet data.
pub fn solve_exact<C: Coefficient1d + ?Sized>(
    coeff: &C,
    f: &Source1D,
    domain: Interval,
    n_cells: usize,
) -> Result<Solution1D> {
    solve_with_data(coeff, f, domain, n_cells, 0.0, 0.0)
}

/// General Dirichlet data `u(s) = left`, `u(t) = right`: the lifting
/// only shifts the flux constant `C` in the quadrature identities.
pub fn solve_with_data<C: Coefficient1d + ?Sized>(
    coeff: &C,
    f: &Source1D,
    domain: Interval,
    n_cells: usize,
    left: f64,
    right: f64,
) -> Result<Solution1D> {
    let core = FluxSolve::build(coeff, f, domain, n_cells)?;
    Ok(core.solution(left, right))
}

/// Integrates `g(x, σ(x), a(x))` over the domain with the same
/// composite Gauss rule used by [`solve_exact`] (homogeneous data).
/// Useful for energy densities such as `σ u′ = σ²/a`.
pub fn flux_integral<C: Coefficient1d + ?Sized, G>(
    coeff: &C,
    f: &Source1D,
    domain: Interval,
    n_cells: usize,
    g: G,
) -> Result<f64>
where
    G: Fn(f64, f64, f64) -> f64,
{
    let core = FluxSolve::build(coeff, f, domain, n_cells)?;
    let c = core.flux_constant(0.0, 0.0);
    let mut total = 0.0;
    for cell in 0..core.n_refined() {
        let (xl, xr) = core.cell(cell);
        let half = 0.5 * (xr - xl);
        let mid = 0.5 * (xl + xr);
        for (node, w) in GAUSS5 {
            let x = mid + half * node;
            let a = core.coeff_at(x);
            let sigma = c - core.f_integral(cell, x);
            total += w * half * g(x, sigma, a);
        }
    }
    Ok(total)
}

impl Solution1D {
    /// Stored flux samples `σ(xᵢ)`.
    pub fn flux(&self) -> &[f64] {
        &self.flux
    }

    /// Piecewise-linear evaluation of `u`.
    pub fn eval_u(&self, x: f64) -> f64 {
        interp(&self.grid, &self.u, x)
    }

    /// Piecewise-linear evaluation of `σ`.
    pub fn eval_flux(&self, x: f64) -> f64 {
        interp(&self.grid, &self.flux, x)
    }

    /// `‖u − v‖_{L²}` by composite Simpson on the solution grid.
    pub fn l2_error<V: Fn(f64) -> f64>(&self, v: V) -> f64 {
        simpson_triples(&self.grid, |i, x| {
            let d = self.u[i] - v(x);
            d * d
        })
        .sqrt()
    }

    /// `‖σ − w‖_{L²}` against a reference flux rule.
    pub fn flux_l2_error<W: Fn(f64) -> f64>(&self, w: W) -> f64 {
        simpson_triples(&self.grid, |i, x| {
            let d = self.flux[i] - w(x);
            d * d
        })
        .sqrt()
    }

    /// `‖u‖_{L²}`.
    pub fn l2_norm(&self) -> f64 {
        self.l2_error(|_| 0.0)
    }
}

/// Composite Simpson over stored triples of a grid with midpoints at
/// odd indices; `val(i, x)` supplies the integrand at grid index `i`.
fn simpson_triples<V: Fn(usize, f64) -> f64>(grid: &[f64], val: V) -> f64 {
    debug_assert!(grid.len() % 2 == 1);
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < grid.len() {
        let h = grid[i + 2] - grid[i];
        total +=
            h / 6.0 * (val(i, grid[i]) + 4.0 * val(i + 1, grid[i + 1]) + val(i + 2, grid[i + 2]));
        i += 2;
    }
    total
}

/// Simpson integration of tabulated values on a solution grid.
pub fn integrate_grid(grid: &[f64], values: &[f64]) -> f64 {
    assert_eq!(grid.len(), values.len());
    simpson_triples(grid, |i, _| values[i])
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let hi = xs.partition_point(|&p| p <= x);
    let (x0, x1) = (xs[hi - 1], xs[hi]);
    let t = (x - x0) / (x1 - x0);
    ys[hi - 1] * (1.0 - t) + ys[hi] * t
}

// --- solver core -------------------------------------------------------------

/// 5-point Gauss–Legendre rule on [-1, 1]; exact for degree ≤ 9.
const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

struct FluxSolve<'a, C: Coefficient1d + ?Sized> {
    /// Refined partition: base boundaries at even indices, cell
    /// midpoints at odd indices.
    xs: Vec<f64>,
    /// F at every partition point.
    f_at_pts: Vec<f64>,
    /// Per refined cell: (∫ 1/a, ∫ F/a).
    cell_integrals: Vec<(f64, f64)>,
    source: &'a Source1D,
    coeff: &'a C,
    domain: Interval,
    n_cells: usize,
}

impl<'a, C: Coefficient1d + ?Sized> FluxSolve<'a, C> {
    fn build(coeff: &'a C, source: &'a Source1D, domain: Interval, n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::InvalidSpec(format!(
                "n_cells must be >= 2, got {n_cells}"
            )));
        }
        let xs = build_partition(domain, n_cells, &coeff.breakpoints(domain));
        let mut solver = FluxSolve {
            xs,
            f_at_pts: Vec::new(),
            cell_integrals: Vec::new(),
            source,
            coeff,
            domain,
            n_cells,
        };
        solver.tabulate_source();
        solver.integrate_cells()?;
        Ok(solver)
    }

    fn n_refined(&self) -> usize {
        self.xs.len() - 1
    }

    fn cell(&self, i: usize) -> (f64, f64) {
        (self.xs[i], self.xs[i + 1])
    }

    fn coeff_at(&self, x: f64) -> f64 {
        self.coeff.eval(x)
    }

    /// F(x) for x inside cell `i` (or at its boundaries).
    fn f_integral(&self, i: usize, x: f64) -> f64 {
        if let Some(a) = &self.source.antiderivative {
            a(x) - a(self.domain.s)
        } else {
            self.f_at_pts[i] + gauss(self.xs[i], x, |t| self.source.eval(t))
        }
    }

    /// Tabulates F at partition points (cumulative Gauss when no
    /// analytic antiderivative is available).
    fn tabulate_source(&mut self) {
        let n = self.xs.len();
        let mut vals = Vec::with_capacity(n);
        if let Some(a) = &self.source.antiderivative {
            let a_s = a(self.domain.s);
            vals.extend(self.xs.iter().map(|&x| a(x) - a_s));
        } else {
            let mut acc = 0.0;
            vals.push(0.0);
            for i in 1..n {
                acc += gauss(self.xs[i - 1], self.xs[i], |t| self.source.eval(t));
                vals.push(acc);
            }
        }
        self.f_at_pts = vals;
    }

    fn integrate_cells(&mut self) -> Result<()> {
        let mut cells = Vec::with_capacity(self.n_refined());
        for i in 0..self.n_refined() {
            let (xl, xr) = self.cell(i);
            let half = 0.5 * (xr - xl);
            let mid = 0.5 * (xl + xr);
            let mut inv = 0.0;
            let mut f_over_a = 0.0;
            for (node, w) in GAUSS5 {
                let x = mid + half * node;
                let a = self.coeff_at(x);
                if !a.is_finite() || a <= 0.0 {
                    return Err(Error::CoefficientOutOfRange {
                        x: vec![x],
                        value: a,
                    });
                }
                inv += w * half / a;
                f_over_a += w * half * self.f_integral(i, x) / a;
            }
            cells.push((inv, f_over_a));
        }
        self.cell_integrals = cells;
        Ok(())
    }

    fn flux_constant(&self, left: f64, right: f64) -> f64 {
        let q1: f64 = self.cell_integrals.iter().map(|c| c.0).sum();
        let qf: f64 = self.cell_integrals.iter().map(|c| c.1).sum();
        (right - left + qf) / q1
    }

    fn solution(&self, left: f64, right: f64) -> Solution1D {
        let c = self.flux_constant(left, right);
        let n = self.xs.len();
        let mut u = Vec::with_capacity(n);
        u.push(left);
        let mut acc = left;
        for &(inv, f_over_a) in &self.cell_integrals {
            acc += c * inv - f_over_a;
            u.push(acc);
        }
        // The cumulative sum reproduces the right boundary value up to
        // roundoff; pin it exactly.
        u[n - 1] = right;
        let flux: Vec<f64> = (0..n).map(|i| c - self.f_at_pts[i]).collect();
        Solution1D {
            grid: self.xs.clone(),
            u,
            flux,
            flux_constant: c,
            meta: SolveMeta {
                eps: None,
                seed: None,
                n_cells: self.n_cells,
            },
        }
    }
}

fn gauss<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GAUSS5
        .iter()
        .map(|&(n, w)| w * half * f(mid + half * n))
        .sum()
}

/// Uniform base cells plus every breakpoint, then one midpoint split
/// per cell so Simpson triples stay within base cells.
fn build_partition(domain: Interval, n_cells: usize, breakpoints: &[f64]) -> Vec<f64> {
    let len = domain.length();
    let mut base: Vec<f64> = (0..=n_cells)
        .map(|i| domain.s + len * i as f64 / n_cells as f64)
        .collect();
    base.extend(
        breakpoints
            .iter()
            .copied()
            .filter(|&b| b > domain.s && b < domain.t),
    );
    base.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tol = 1e-12 * len.max(1.0);
    base.dedup_by(|a, b| (*a - *b).abs() <= tol);
    // Endpoints must survive dedup exactly.
    base[0] = domain.s;
    *base.last_mut().unwrap() = domain.t;

    let mut refined = Vec::with_capacity(2 * base.len() - 1);
    for w in base.windows(2) {
        refined.push(w[0]);
        refined.push(0.5 * (w[0] + w[1]));
    }
    refined.push(domain.t);
    refined
}
