//! Effective-coefficient estimation.
//!
//! In 1D the homogenized coefficient has the closed form
//! `ā = ⟨1/a⟩⁻¹` (harmonic mean). In higher dimensions it is only
//! characterized through the corrector problem; the computable
//! surrogate here is periodization: solve the periodic cell problem on
//! a torus of `L × L` unit tiles for one realization, average the flux
//! `a (∇χ + ξ)` over the torus, and ensemble-average over seeds.

use crate::error::{Error, Result};
use crate::fem2d::{
    cg_solve, default_max_iter, element_stiffness_q1, solve_periodic_cell, CsrMatrix,
    PeriodicCellProblem,
};
use crate::fields::{make_realization, FieldRealization, FieldSpec, Seed};
use rayon::prelude::*;

/// How an effective tensor was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Closed-form 1D harmonic mean.
    Formula,
    /// Periodization cell problem.
    Periodization,
}

/// Estimated effective tensor (scalar in 1D lives in `entries[0][0]`).
#[derive(Debug, Clone)]
pub struct EffectiveTensor {
    pub dim: usize,
    pub entries: [[f64; 2]; 2],
    /// Per-entry standard errors (zero for single realizations).
    pub stderr: [[f64; 2]; 2],
    pub provenance: Provenance,
    pub torus_side: Option<usize>,
    /// Number of realizations that contributed.
    pub ensemble: usize,
    /// Realizations that failed to solve (quorum permitting).
    pub failures: usize,
    /// Largest relative off-diagonal asymmetry observed before
    /// symmetrization.
    pub asymmetry: f64,
}

impl EffectiveTensor {
    /// The scalar value of a 1D tensor.
    pub fn scalar(&self) -> f64 {
        self.entries[0][0]
    }

    /// Eigenvalues of the (symmetric) tensor, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        match self.dim {
            1 => vec![self.entries[0][0]],
            _ => {
                let [[a, b], [_, c]] = self.entries;
                let mean = 0.5 * (a + c);
                let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                vec![mean - rad, mean + rad]
            }
        }
    }
}

/// Harmonic–arithmetic (Reuss–Voigt) bounds on the effective
/// eigenvalues of a tile spec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoigtReussBounds {
    pub harmonic: f64,
    pub arithmetic: f64,
}

/// Closed-form bounds `(Σ pᵢ/κᵢ)⁻¹ ≤ λ(A⁰) ≤ Σ pᵢ κᵢ`.
pub fn voigt_reuss_bounds(kappas: &[f64], probs: &[f64]) -> VoigtReussBounds {
    let harmonic = 1.0 / probs.iter().zip(kappas).map(|(p, k)| p / k).sum::<f64>();
    let arithmetic = probs.iter().zip(kappas).map(|(p, k)| p * k).sum();
    VoigtReussBounds {
        harmonic,
        arithmetic,
    }
}

/// Harmonic mean of a discrete tile law: `(Σ pᵢ/κᵢ)⁻¹`.
pub fn harmonic_mean_tiles(kappas: &[f64], probs: &[f64]) -> f64 {
    voigt_reuss_bounds(kappas, probs).harmonic
}

/// Harmonic mean of a smooth 1-periodic coefficient:
/// `(∫₀¹ 1/a)⁻¹` by adaptive Simpson to absolute tolerance `tol`.
pub fn harmonic_mean_periodic<F: Fn(f64) -> f64>(a: F, tol: f64) -> f64 {
    1.0 / adaptive_simpson(&|x| 1.0 / a(x), 0.0, 1.0, tol, 40)
}

/// Harmonic mean of a [`FieldSpec`]'s one-point law; the 1D
/// homogenized coefficient of Theorem-level theory.
pub fn harmonic_mean_1d(spec: &FieldSpec) -> Result<f64> {
    match spec {
        FieldSpec::Constant { value } => Ok(*value),
        FieldSpec::Periodic1d => Ok(harmonic_mean_periodic(
            crate::fields::eval_periodic_1d,
            1e-13,
        )),
        FieldSpec::Checkerboard1d(s) => Ok(harmonic_mean_tiles(&s.kappas, &s.probs)),
        FieldSpec::Checkerboard2d(_) => Err(Error::InvalidSpec(
            "harmonic mean formula is one-dimensional; use periodization for 2D".into(),
        )),
    }
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, right, 0.5 * tol, depth - 1)
        }
    }
    recurse(f, a, b, simpson(f, a, b), tol, depth)
}

/// Discrete periodic corrector χ_ξ on the torus `[0, L)²`, the
/// computational surrogate of the abstract potential-field solution.
#[derive(Debug, Clone)]
pub struct Corrector {
    pub torus_side: usize,
    pub elements_per_side: usize,
    pub xi: [f64; 2],
    /// Mean-zero nodal values, row-major on the periodic grid.
    pub chi: Vec<f64>,
    /// Centroid gradients per element.
    pub elem_grad: Vec<[f64; 2]>,
    /// Element coefficient values the corrector was solved against.
    pub coeff: Vec<f64>,
    /// Final CG relative residual.
    pub residual: f64,
}

impl Corrector {
    pub fn h(&self) -> f64 {
        self.torus_side as f64 / self.elements_per_side as f64
    }

    /// Torus average of `∇χ` (vanishes by periodicity).
    pub fn mean_gradient(&self) -> [f64; 2] {
        let n = self.elem_grad.len() as f64;
        let mut m = [0.0; 2];
        for g in &self.elem_grad {
            m[0] += g[0] / n;
            m[1] += g[1] / n;
        }
        m
    }
}

/// Samples a realization's element coefficients on the torus
/// `[0, L)²` (unit tiles, `m` elements per tile).
pub fn torus_coefficients(
    realization: &FieldRealization,
    torus_side: usize,
    elements_per_tile: usize,
) -> Vec<f64> {
    let n = torus_side * elements_per_tile;
    let h = 1.0 / elements_per_tile as f64;
    let mut coeff = Vec::with_capacity(n * n);
    for ej in 0..n {
        for ei in 0..n {
            let cx = (ei as f64 + 0.5) * h;
            let cy = (ej as f64 + 0.5) * h;
            coeff.push(realization.eval2(cx, cy));
        }
    }
    coeff
}

/// Solves the periodic cell problem for direction `ξ` against a
/// realization.
pub fn corrector_solve(
    realization: &FieldRealization,
    torus_side: usize,
    xi: [f64; 2],
    elements_per_tile: usize,
    tol: f64,
) -> Result<Corrector> {
    let coeff = torus_coefficients(realization, torus_side, elements_per_tile);
    corrector_solve_coeffs(coeff, torus_side, xi, tol)
}

/// Cell problem on explicit element coefficients (row-major,
/// `(L·m)²` entries).
pub fn corrector_solve_coeffs(
    coeff: Vec<f64>,
    torus_side: usize,
    xi: [f64; 2],
    tol: f64,
) -> Result<Corrector> {
    let n = (coeff.len() as f64).sqrt().round() as usize;
    let problem = PeriodicCellProblem::new(torus_side, n, coeff, xi)?;
    let sol = solve_periodic_cell(&problem, tol)?;
    Ok(Corrector {
        torus_side,
        elements_per_side: n,
        xi,
        chi: sol.chi,
        elem_grad: sol.elem_grad,
        coeff: problem.coeff,
        residual: sol.diagnostics.residual,
    })
}

/// Torus average of the flux `a (∇χ + ξ)`; exact per-element
/// integration (centroid gradients are element averages for Q1).
fn average_flux(c: &Corrector) -> [f64; 2] {
    let h = c.h();
    let area = (c.torus_side * c.torus_side) as f64;
    let cell = h * h / area;
    let mut avg = [0.0; 2];
    for (e, g) in c.elem_grad.iter().enumerate() {
        avg[0] += cell * c.coeff[e] * (g[0] + c.xi[0]);
        avg[1] += cell * c.coeff[e] * (g[1] + c.xi[1]);
    }
    avg
}

/// Periodization estimate from one realization: solves the cell
/// problem for ξ = e₁, e₂, symmetrizes `(A + Aᵀ)/2`, and records the
/// raw asymmetry.
pub fn effective_tensor_single(
    realization: &FieldRealization,
    torus_side: usize,
    elements_per_tile: usize,
    tol: f64,
) -> Result<EffectiveTensor> {
    let coeff = torus_coefficients(realization, torus_side, elements_per_tile);
    effective_tensor_from_coeffs(&coeff, torus_side, tol)
}

/// Periodization estimate on explicit element coefficients.
pub fn effective_tensor_from_coeffs(
    coeff: &[f64],
    torus_side: usize,
    tol: f64,
) -> Result<EffectiveTensor> {
    let mut raw = [[0.0f64; 2]; 2];
    for (j, xi) in [[1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
        let corr = corrector_solve_coeffs(coeff.to_vec(), torus_side, xi, tol)?;
        let col = average_flux(&corr);
        raw[0][j] = col[0];
        raw[1][j] = col[1];
    }
    let scale = raw[0][0].abs().max(raw[1][1].abs()).max(f64::MIN_POSITIVE);
    let asymmetry = (raw[0][1] - raw[1][0]).abs() / scale;
    let sym = 0.5 * (raw[0][1] + raw[1][0]);
    Ok(EffectiveTensor {
        dim: 2,
        entries: [[raw[0][0], sym], [sym, raw[1][1]]],
        stderr: [[0.0; 2]; 2],
        provenance: Provenance::Periodization,
        torus_side: Some(torus_side),
        ensemble: 1,
        failures: 0,
        asymmetry,
    })
}

/// Ensemble periodization: realizations from seeds
/// `seed0, seed0+1, …, seed0+M−1`, solved independently (in parallel),
/// averaged entrywise with standard errors `sd/√M`. Individual
/// failures are tolerated down to a quorum of half the ensemble.
pub fn effective_tensor_ensemble(
    spec: &FieldSpec,
    torus_side: usize,
    ensemble: usize,
    seed0: Seed,
    elements_per_tile: usize,
    tol: f64,
) -> Result<EffectiveTensor> {
    if ensemble < 2 {
        return Err(Error::InvalidSpec("ensemble needs M >= 2".into()));
    }
    let members: Vec<Result<EffectiveTensor>> = (0..ensemble)
        .into_par_iter()
        .map(|k| {
            let r = make_realization(spec, Seed(seed0.0.wrapping_add(k as u64)))?;
            effective_tensor_single(&r, torus_side, elements_per_tile, tol)
        })
        .collect();
    let ok: Vec<&EffectiveTensor> = members.iter().filter_map(|m| m.as_ref().ok()).collect();
    let failures = ensemble - ok.len();
    if ok.len() * 2 < ensemble {
        return Err(Error::QuorumNotMet {
            ok: ok.len(),
            total: ensemble,
        });
    }
    let n = ok.len() as f64;
    let mut mean = [[0.0f64; 2]; 2];
    for t in &ok {
        for (i, row) in mean.iter_mut().enumerate() {
            for (j, m) in row.iter_mut().enumerate() {
                *m += t.entries[i][j] / n;
            }
        }
    }
    let mut stderr = [[0.0f64; 2]; 2];
    if ok.len() > 1 {
        for t in &ok {
            for (i, row) in stderr.iter_mut().enumerate() {
                for (j, s) in row.iter_mut().enumerate() {
                    let d = t.entries[i][j] - mean[i][j];
                    *s += d * d;
                }
            }
        }
        for row in &mut stderr {
            for s in row.iter_mut() {
                *s = (*s / (n - 1.0)).sqrt() / n.sqrt();
            }
        }
    }
    let asymmetry = ok.iter().map(|t| t.asymmetry).fold(0.0, f64::max);
    Ok(EffectiveTensor {
        dim: 2,
        entries: mean,
        stderr,
        provenance: Provenance::Periodization,
        torus_side: Some(torus_side),
        ensemble: ok.len(),
        failures,
        asymmetry,
    })
}

/// Flux/energy consistency of a solved corrector: the two quadratic
/// forms agree up to the CG residual by Galerkin orthogonality. Both
/// sides use exact per-element integrals of the bilinear corrector.
#[derive(Debug, Clone, Copy)]
pub struct EnergyConsistency {
    /// `ξ · ⟨a (∇χ + ξ)⟩`.
    pub flux_value: f64,
    /// `⟨(ξ + ∇χ) · a (ξ + ∇χ)⟩`.
    pub energy_value: f64,
    /// Relative gap between the two.
    pub gap: f64,
}

pub fn energy_consistency(corrector: &Corrector, xi: [f64; 2]) -> EnergyConsistency {
    let n = corrector.elements_per_side;
    let h = corrector.h();
    let area = (corrector.torus_side * corrector.torus_side) as f64;
    let unit_stiff = element_stiffness_q1(1.0, h, h);
    let xi_sq = xi[0] * xi[0] + xi[1] * xi[1];

    let mut flux = 0.0;
    let mut energy = 0.0;
    for ej in 0..n {
        for ei in 0..n {
            let e = ej * n + ei;
            let a = corrector.coeff[e];
            let g = corrector.elem_grad[e];
            let xig = xi[0] * g[0] + xi[1] * g[1];
            flux += a * h * h * (xi_sq + xig);
            // ∫_e |∇χ|² = χᵀ K̂ χ with the unit-coefficient stiffness.
            let nodes = [
                wrap_node(n, ei, ej),
                wrap_node(n, ei + 1, ej),
                wrap_node(n, ei + 1, ej + 1),
                wrap_node(n, ei, ej + 1),
            ];
            let mut grad_sq = 0.0;
            for (li, &ni) in nodes.iter().enumerate() {
                for (lj, &nj) in nodes.iter().enumerate() {
                    grad_sq += corrector.chi[ni] * unit_stiff[li][lj] * corrector.chi[nj];
                }
            }
            energy += a * (h * h * (xi_sq + 2.0 * xig) + grad_sq);
        }
    }
    flux /= area;
    energy /= area;
    let gap = (flux - energy).abs() / energy.abs().max(f64::MIN_POSITIVE);
    EnergyConsistency {
        flux_value: flux,
        energy_value: energy,
        gap,
    }
}

fn wrap_node(n: usize, i: usize, j: usize) -> usize {
    (j % n) * n + (i % n)
}

/// Structural check of an effective tensor: symmetry and the
/// eigenvalue range `[ν₁ − tol, ν₂ + tol]`.
#[derive(Debug, Clone)]
pub struct SpdReport {
    pub symmetry_gap: f64,
    pub symmetric_ok: bool,
    pub eigenvalues: Vec<f64>,
    pub range_ok: bool,
    /// How far the worst eigenvalue lies outside the admissible range
    /// (zero when inside).
    pub margin: f64,
    pub pass: bool,
}

pub fn spd_check(tensor: &EffectiveTensor, nu1: f64, nu2: f64, tol: f64) -> SpdReport {
    let symmetry_gap = (tensor.entries[0][1] - tensor.entries[1][0]).abs();
    let symmetric_ok = symmetry_gap <= tol.max(1e-12);
    let eigenvalues = tensor.eigenvalues();
    let mut margin = 0.0f64;
    for &ev in &eigenvalues {
        if ev < nu1 - tol {
            margin = margin.max(nu1 - tol - ev);
        }
        if ev > nu2 + tol {
            margin = margin.max(ev - nu2 - tol);
        }
    }
    let range_ok = margin == 0.0;
    SpdReport {
        symmetry_gap,
        symmetric_ok,
        eigenvalues,
        range_ok,
        margin,
        pass: symmetric_ok && range_ok,
    }
}

/// 1D periodization route: P1 periodic cell problem on `[0, L)` with
/// unit tiles. The discrete flux is constant, so the estimate equals
/// the harmonic mean of the realized element coefficients exactly
/// (up to the CG residual) — the 1D consistency of the variational
/// machinery.
pub fn effective_scalar_1d(
    realization: &FieldRealization,
    torus_side: usize,
    elements_per_tile: usize,
    tol: f64,
) -> Result<f64> {
    if torus_side < 2 {
        return Err(Error::InvalidSpec(
            "torus side must be at least 2 tiles".into(),
        ));
    }
    let n = torus_side * elements_per_tile;
    let h = 1.0 / elements_per_tile as f64;
    let coeff: Vec<f64> = (0..n)
        .map(|e| realization.eval1((e as f64 + 0.5) * h))
        .collect();
    if let Some(&bad) = coeff.iter().find(|&&a| !a.is_finite() || a <= 0.0) {
        return Err(Error::CoefficientOutOfRange {
            x: vec![],
            value: bad,
        });
    }

    // Pinned periodic P1 system over nodes 1..n.
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n - 1);
    let mut rhs = vec![0.0; n - 1];
    for node in 1..n {
        let left = (node + n - 1) % n;
        let right = node % n;
        let a_left = coeff[left];
        let a_right = coeff[right];
        let mut cols = std::collections::BTreeMap::new();
        *cols.entry(node - 1).or_insert(0.0) += (a_left + a_right) / h;
        let prev = (node + n - 1) % n;
        if prev != 0 {
            *cols.entry(prev - 1).or_insert(0.0) += -a_left / h;
        }
        let next = (node + 1) % n;
        if next != 0 {
            *cols.entry(next - 1).or_insert(0.0) += -a_right / h;
        }
        rhs[node - 1] = -a_left + a_right;
        rows.push(cols.into_iter().collect());
    }
    let a = CsrMatrix::from_rows(rows);
    let (x, _) = cg_solve(&a, &rhs, tol, default_max_iter(a.n()))?;
    let mut chi = Vec::with_capacity(n);
    chi.push(0.0);
    chi.extend_from_slice(&x);
    // q̄ = ⟨a (χ′ + 1)⟩ over the torus.
    let mut q = 0.0;
    for e in 0..n {
        let grad = (chi[(e + 1) % n] - chi[e]) / h;
        q += coeff[e] * (grad + 1.0) * h;
    }
    Ok(q / torus_side as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Checkerboard1DSpec, Checkerboard2DSpec};
    use approx::assert_abs_diff_eq;

    const SQRT3: f64 = 1.732_050_807_568_877_2;

    fn checker2d(kappas: Vec<f64>, probs: Vec<f64>) -> FieldSpec {
        FieldSpec::Checkerboard2d(Checkerboard2DSpec::new(kappas, probs, true).unwrap())
    }

    #[test]
    fn harmonic_mean_of_periodic_profile_is_sqrt3() {
        let h = harmonic_mean_1d(&FieldSpec::Periodic1d).unwrap();
        assert_abs_diff_eq!(h, SQRT3, epsilon = 1e-8);
    }

    #[test]
    fn harmonic_mean_closed_forms() {
        assert_abs_diff_eq!(
            harmonic_mean_tiles(&[1.0, 3.0], &[0.5, 0.5]),
            1.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            harmonic_mean_1d(&FieldSpec::Constant { value: 2.25 }).unwrap(),
            2.25,
            epsilon = 1e-15
        );
        let spec = FieldSpec::Checkerboard1d(
            Checkerboard1DSpec::new(vec![1.0, 3.0], vec![0.5, 0.5], true).unwrap(),
        );
        assert_abs_diff_eq!(harmonic_mean_1d(&spec).unwrap(), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn voigt_reuss_values() {
        let b = voigt_reuss_bounds(&[1.0, 3.0], &[0.5, 0.5]);
        assert_abs_diff_eq!(b.harmonic, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.arithmetic, 2.0, epsilon = 1e-15);

        let single = voigt_reuss_bounds(&[2.0], &[1.0]);
        assert_eq!(single.harmonic, 2.0);
        assert_eq!(single.arithmetic, 2.0);

        let four = voigt_reuss_bounds(&[1.0, 10.0, 50.0, 100.0], &[0.4, 0.2, 0.2, 0.2]);
        assert_abs_diff_eq!(four.harmonic, 1.0 / 0.426, epsilon = 1e-12);
        assert_abs_diff_eq!(four.arithmetic, 32.4, epsilon = 1e-12);
    }

    #[test]
    fn homogeneous_medium_gives_identity_scaled() {
        let r = make_realization(&FieldSpec::Constant { value: 2.5 }, Seed(0)).unwrap();
        let t = effective_tensor_single(&r, 4, 2, 1e-12).unwrap();
        assert_abs_diff_eq!(t.entries[0][0], 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(t.entries[1][1], 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(t.entries[0][1], 0.0, epsilon = 1e-12);
        // Zero corrector for a homogeneous medium.
        let c = corrector_solve(&r, 4, [1.0, 0.0], 2, 1e-12).unwrap();
        assert!(c.chi.iter().all(|&x| x.abs() < 1e-12));
    }

    fn stripe_coeffs(l: usize, m: usize, axis: usize, v0: f64, v1: f64) -> Vec<f64> {
        let n = l * m;
        let mut coeff = Vec::with_capacity(n * n);
        for ej in 0..n {
            for ei in 0..n {
                let tile = if axis == 0 { ei / m } else { ej / m };
                coeff.push(if tile % 2 == 0 { v0 } else { v1 });
            }
        }
        coeff
    }

    #[test]
    fn stripe_medium_effective_tensor_is_diag_harmonic_arithmetic() {
        let coeff = stripe_coeffs(8, 2, 0, 1.0, 3.0);
        let t = effective_tensor_from_coeffs(&coeff, 8, 1e-11).unwrap();
        assert_abs_diff_eq!(t.entries[0][0], 1.5, epsilon = 1e-8);
        assert_abs_diff_eq!(t.entries[1][1], 2.0, epsilon = 1e-8);
        assert!(t.entries[0][1].abs() < 1e-9);
        assert!(t.asymmetry < 1e-9);
    }

    #[test]
    fn corrector_is_linear_in_xi() {
        let spec = checker2d(vec![1.0, 4.0], vec![0.5, 0.5]);
        let r = make_realization(&spec, Seed(17)).unwrap();
        let c1 = corrector_solve(&r, 4, [1.0, 0.0], 2, 1e-12).unwrap();
        let c2 = corrector_solve(&r, 4, [2.0, 0.0], 2, 1e-12).unwrap();
        for (a, b) in c1.chi.iter().zip(&c2.chi) {
            assert!((2.0 * a - b).abs() < 1e-9, "{a} vs {b}");
        }
        // Superposition: tensor applied to ξ via unit correctors equals
        // the direct solve for ξ.
        let xi = [0.6, -0.8];
        let direct = corrector_solve(&r, 4, xi, 2, 1e-12).unwrap();
        let ce1 = corrector_solve(&r, 4, [1.0, 0.0], 2, 1e-12).unwrap();
        let ce2 = corrector_solve(&r, 4, [0.0, 1.0], 2, 1e-12).unwrap();
        for i in 0..direct.chi.len() {
            let lin = xi[0] * ce1.chi[i] + xi[1] * ce2.chi[i];
            assert!((direct.chi[i] - lin).abs() < 1e-9);
        }
    }

    #[test]
    fn corrector_mean_gradient_is_zero() {
        let spec = checker2d(vec![1.0, 10.0, 50.0, 100.0], vec![0.4, 0.2, 0.2, 0.2]);
        let r = make_realization(&spec, Seed(5)).unwrap();
        let c = corrector_solve(&r, 4, [1.0, 0.0], 2, 1e-11).unwrap();
        let m = c.mean_gradient();
        assert!(m[0].abs() < 1e-10 && m[1].abs() < 1e-10, "{m:?}");
    }

    #[test]
    fn energy_consistency_gap_is_solver_level() {
        let spec = checker2d(vec![1.0, 4.0], vec![0.5, 0.5]);
        for seed in [1u64, 2, 3] {
            let r = make_realization(&spec, Seed(seed)).unwrap();
            let c = corrector_solve(&r, 4, [1.0, 0.0], 2, 1e-10).unwrap();
            let ec = energy_consistency(&c, [1.0, 0.0]);
            assert!(ec.gap < 1e-6, "seed {seed}: gap {}", ec.gap);
            // Homogeneous trial field J(0) bounds the minimum.
            let j_zero: f64 = {
                let h = c.h();
                c.coeff.iter().map(|a| a * h * h).sum::<f64>()
                    / (c.torus_side * c.torus_side) as f64
            };
            assert!(j_zero >= ec.energy_value - 1e-10);
        }
    }

    #[test]
    fn homogeneous_energy_consistency_exact() {
        let r = make_realization(&FieldSpec::Constant { value: 3.0 }, Seed(0)).unwrap();
        let c = corrector_solve(&r, 2, [1.0, 0.0], 2, 1e-12).unwrap();
        let ec = energy_consistency(&c, [1.0, 0.0]);
        assert_abs_diff_eq!(ec.flux_value, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ec.energy_value, 3.0, epsilon = 1e-12);
        assert!(ec.gap < 1e-12);
    }

    #[test]
    fn realized_voigt_reuss_bounds_hold() {
        // Eigenvalues within the realized tile bounds, which hold for
        // every single realization (ensemble bounds only hold whp).
        let spec = checker2d(vec![1.0, 4.0], vec![0.5, 0.5]);
        for seed in 0..10u64 {
            let r = make_realization(&spec, Seed(seed)).unwrap();
            let coeff = torus_coefficients(&r, 4, 2);
            let t = effective_tensor_from_coeffs(&coeff, 4, 1e-11).unwrap();
            let n = coeff.len() as f64;
            let arith = coeff.iter().sum::<f64>() / n;
            let harm = n / coeff.iter().map(|a| 1.0 / a).sum::<f64>();
            for ev in t.eigenvalues() {
                assert!(
                    ev >= harm - 1e-8 && ev <= arith + 1e-8,
                    "seed {seed}: ev {ev} outside [{harm}, {arith}]"
                );
            }
        }
    }

    #[test]
    fn ensemble_mean_and_stderr_behave() {
        let spec = FieldSpec::Constant { value: 2.0 };
        let t = effective_tensor_ensemble(&spec, 2, 4, Seed(0), 2, 1e-12).unwrap();
        assert_abs_diff_eq!(t.entries[0][0], 2.0, epsilon = 1e-11);
        assert!(t.stderr[0][0] < 1e-11);
        assert_eq!(t.failures, 0);

        let spec = checker2d(vec![1.0, 4.0], vec![0.5, 0.5]);
        let small = effective_tensor_ensemble(&spec, 4, 8, Seed(100), 2, 1e-10).unwrap();
        let large = effective_tensor_ensemble(&spec, 4, 32, Seed(100), 2, 1e-10).unwrap();
        assert!(large.stderr[0][0] < small.stderr[0][0]);
    }

    #[test]
    fn spd_check_pass_and_fail() {
        let good = EffectiveTensor {
            dim: 2,
            entries: [[1.5, 0.0], [0.0, 2.0]],
            stderr: [[0.0; 2]; 2],
            provenance: Provenance::Periodization,
            torus_side: Some(8),
            ensemble: 1,
            failures: 0,
            asymmetry: 0.0,
        };
        let report = spd_check(&good, 1.0, 3.0, 1e-9);
        assert!(report.pass);
        assert_eq!(report.margin, 0.0);

        let bad = EffectiveTensor {
            entries: [[0.5, 0.0], [0.0, 2.0]],
            ..good
        };
        let report = spd_check(&bad, 1.0, 3.0, 0.0);
        assert!(!report.pass);
        assert_abs_diff_eq!(report.margin, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn one_dimensional_periodization_equals_realized_harmonic_mean() {
        let spec = FieldSpec::Checkerboard1d(
            Checkerboard1DSpec::new(vec![1.0, 3.0], vec![0.5, 0.5], true).unwrap(),
        );
        for seed in 0..5u64 {
            let r = make_realization(&spec, Seed(seed)).unwrap();
            for l in [2usize, 8, 32] {
                let est = effective_scalar_1d(&r, l, 4, 1e-13).unwrap();
                let n = l * 4;
                let h = 0.25;
                let harm = n as f64
                    / (0..n)
                        .map(|e| 1.0 / r.eval1((e as f64 + 0.5) * h))
                        .sum::<f64>();
                assert_abs_diff_eq!(est, harm, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn one_dimensional_ensemble_approaches_closed_form() {
        let spec = FieldSpec::Checkerboard1d(
            Checkerboard1DSpec::new(vec![1.0, 3.0], vec![0.5, 0.5], true).unwrap(),
        );
        let l = 64;
        let m = 64;
        let mut mean = 0.0;
        for seed in 0..m {
            let r = make_realization(&spec, Seed(seed)).unwrap();
            mean += effective_scalar_1d(&r, l, 2, 1e-12).unwrap() / m as f64;
        }
        assert!((mean - 1.5).abs() < 0.05, "ensemble mean {mean}");
    }
}
