//! Measure-preserving dynamics on the 2-torus.
//!
//! The workhorse is Arnold's cat map
//! `T(x) = ((2 x₁ + x₂) mod 1, (x₁ + x₂) mod 1)`, a hyperbolic toral
//! automorphism. The module provides float orbits for visualization,
//! Birkhoff time averages, an equidistribution diagnostic, and an exact
//! rational-arithmetic path for period detection. Floating-point orbits
//! of a hyperbolic map are chaotic (rounding destroys periodicity), so
//! every periodicity claim goes through [`RationalTorusPoint`].

/// A point on the unit 2-torus, both coordinates in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint {
    pub x1: f64,
    pub x2: f64,
}

impl TorusPoint {
    /// Wraps arbitrary real coordinates into `[0, 1)`.
    pub fn new(x1: f64, x2: f64) -> Self {
        Self {
            x1: wrap_unit(x1),
            x2: wrap_unit(x2),
        }
    }
}

/// Reduces `x` mod 1 into `[0, 1)`. Exact integers map to `0.0`;
/// negative inputs are shifted up.
pub fn wrap_unit(x: f64) -> f64 {
    let f = x - x.floor();
    // `x - floor(x)` can round up to 1.0 for tiny negative x.
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// One application of the cat map.
///
/// The map's matrix `[[2, 1], [1, 1]]` has determinant 1, so it
/// preserves Lebesgue measure on the torus.
pub fn cat_map_step(p: TorusPoint) -> TorusPoint {
    TorusPoint::new(2.0 * p.x1 + p.x2, p.x1 + p.x2)
}

/// The orbit `[T(p0), T²(p0), …, T^N(p0)]`.
pub fn orbit(p0: TorusPoint, n: usize) -> Vec<TorusPoint> {
    let mut out = Vec::with_capacity(n);
    let mut p = p0;
    for _ in 0..n {
        p = cat_map_step(p);
        out.push(p);
    }
    out
}

/// A torus point with exact rational coordinates `(p1/q, p2/q)`.
///
/// The cat map restricted to denominator-`q` rationals is the integer
/// map `(p1, p2) ↦ (2 p1 + p2 mod q, p1 + p2 mod q)`, evaluated here
/// without any rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RationalTorusPoint {
    pub p1: u64,
    pub p2: u64,
    pub q: u64,
}

impl RationalTorusPoint {
    /// Reduces numerators mod `q`. Panics if `q == 0`.
    pub fn new(p1: u64, p2: u64, q: u64) -> Self {
        assert!(q > 0, "denominator must be positive");
        Self {
            p1: p1 % q,
            p2: p2 % q,
            q,
        }
    }

    /// One exact cat-map step.
    pub fn step(self) -> Self {
        Self {
            p1: (2 * self.p1 + self.p2) % self.q,
            p2: (self.p1 + self.p2) % self.q,
            q: self.q,
        }
    }

    /// Float embedding of the point.
    pub fn to_float(self) -> TorusPoint {
        TorusPoint::new(
            self.p1 as f64 / self.q as f64,
            self.p2 as f64 / self.q as f64,
        )
    }
}

/// Smallest `k ≤ max_iter` with `T^k(p0) = p0`, in exact arithmetic.
/// Returns `None` if no return occurs within the budget.
pub fn detect_period(p0: RationalTorusPoint, max_iter: usize) -> Option<usize> {
    let mut p = p0;
    for k in 1..=max_iter {
        p = p.step();
        if p == p0 {
            return Some(k);
        }
    }
    None
}

/// Birkhoff time average `(1/N) Σ_{n=1}^{N} f(Tⁿ(p0))`.
pub fn birkhoff_time_average<F>(p0: TorusPoint, observable: F, n: usize) -> f64
where
    F: Fn(TorusPoint) -> f64,
{
    assert!(n >= 1);
    let mut p = p0;
    let mut sum = 0.0;
    for _ in 0..n {
        p = cat_map_step(p);
        sum += observable(p);
    }
    sum / n as f64
}

/// Histogram of an orbit on a uniform `m × m` grid, plus its time
/// average under `observable`.
#[derive(Debug, Clone)]
pub struct OrbitStats {
    /// Orbit length `N`.
    pub length: usize,
    /// `(1/N) Σ f` over the orbit.
    pub time_average: f64,
    /// Row-major `m × m` cell counts; the counts sum to `N`.
    pub bin_counts: Vec<u64>,
    /// Grid resolution per axis.
    pub grid_m: usize,
}

/// Bins an orbit on an `m × m` grid and records the time average of
/// `observable` along it.
pub fn orbit_stats<F>(points: &[TorusPoint], grid_m: usize, observable: F) -> OrbitStats
where
    F: Fn(TorusPoint) -> f64,
{
    assert!(grid_m >= 1);
    assert!(!points.is_empty());
    let mut bins = vec![0u64; grid_m * grid_m];
    let mut sum = 0.0;
    for &p in points {
        bins[bin_index(p, grid_m)] += 1;
        sum += observable(p);
    }
    OrbitStats {
        length: points.len(),
        time_average: sum / points.len() as f64,
        bin_counts: bins,
        grid_m,
    }
}

fn bin_index(p: TorusPoint, m: usize) -> usize {
    // Coordinates live in [0,1), so the cast stays in 0..m; the min
    // guards against a stray 1.0 from upstream arithmetic.
    let i = ((p.x1 * m as f64) as usize).min(m - 1);
    let j = ((p.x2 * m as f64) as usize).min(m - 1);
    j * m + i
}

/// Max-norm equidistribution discrepancy of an orbit on an `m × m`
/// grid: `max over cells |empirical frequency − 1/m²|`.
pub fn equidistribution_discrepancy(points: &[TorusPoint], grid_m: usize) -> f64 {
    assert!(grid_m >= 2);
    assert!(!points.is_empty());
    let stats = orbit_stats(points, grid_m, |_| 0.0);
    let n = points.len() as f64;
    let uniform = 1.0 / (grid_m * grid_m) as f64;
    stats
        .bin_counts
        .iter()
        .map(|&c| (c as f64 / n - uniform).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::splitmix64;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_unit_canonical_range() {
        assert_eq!(wrap_unit(0.0), 0.0);
        assert_eq!(wrap_unit(1.0), 0.0);
        assert_eq!(wrap_unit(2.0), 0.0);
        assert_abs_diff_eq!(wrap_unit(-0.3), 0.7, epsilon = 1e-15);
        assert_eq!(wrap_unit(-1e-17), 0.0);
        assert!(wrap_unit(0.999_999_999_999) < 1.0);
    }

    #[test]
    fn origin_is_fixed_point() {
        let p = TorusPoint::new(0.0, 0.0);
        assert_eq!(cat_map_step(p), p);
        let orb = orbit(p, 3);
        assert_eq!(orb, vec![p, p, p]);
    }

    #[test]
    fn step_direct_evaluation() {
        let p = cat_map_step(TorusPoint::new(0.5, 0.5));
        assert_eq!(p.x1, 0.5);
        assert_eq!(p.x2, 0.0);
    }

    #[test]
    fn map_matrix_is_unimodular() {
        // [[2,1],[1,1]] has determinant 1, so Lebesgue measure is
        // preserved.
        let (a, b, c, d) = (2i64, 1i64, 1i64, 1i64);
        assert_eq!(a * d - b * c, 1);
    }

    #[test]
    fn irrational_start_fills_the_grid_in_1000_steps() {
        let p0 = TorusPoint::new(1.0 / 32.0, PI / 32.0);
        let orb = orbit(p0, 1000);
        // 1000 iterates cover an 8×8 grid completely and a 16×16 grid
        // up to a single cell (this orbit leaves exactly one empty).
        let coarse = orbit_stats(&orb, 8, |_| 0.0);
        assert_eq!(coarse.bin_counts.iter().filter(|&&c| c == 0).count(), 0);
        let fine = orbit_stats(&orb, 16, |_| 0.0);
        let empty = fine.bin_counts.iter().filter(|&&c| c == 0).count();
        assert!(empty <= 1, "{empty} empty cells of 256");
        assert_eq!(fine.bin_counts.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn rational_start_orbit_is_finite() {
        // 1/32 is dyadic, so the float orbit is exact and must cycle.
        let p0 = TorusPoint::new(1.0 / 32.0, 1.0 / 32.0);
        let orb = orbit(p0, 1000);
        let mut distinct: Vec<(u64, u64)> = orb
            .iter()
            .map(|p| ((p.x1 * 32.0) as u64, (p.x2 * 32.0) as u64))
            .collect();
        distinct.sort_unstable();
        distinct.dedup();
        assert!(distinct.len() < 32 * 32);
    }

    #[test]
    fn detect_period_fixed_point() {
        assert_eq!(detect_period(RationalTorusPoint::new(0, 0, 1), 10), Some(1));
    }

    #[test]
    fn detect_period_q32_regression() {
        // Brute-force value, frozen as the regression baseline.
        let p = RationalTorusPoint::new(1, 1, 32);
        let k = detect_period(p, 10_000).expect("q=32 must be periodic");
        let mut q = p;
        for _ in 0..k {
            q = q.step();
        }
        assert_eq!(q, p);
        assert_eq!(k, PERIOD_1_1_32);
    }

    /// Regression value for the period of (1/32, 1/32), established by
    /// the brute-force iteration in `detect_period_q32_regression`.
    const PERIOD_1_1_32: usize = 24;

    #[test]
    fn detect_period_bounded_by_matrix_order_mod_5() {
        // Order of [[2,1],[1,1]] in GL₂(ℤ/5), by brute force.
        let order = {
            let mult = |a: [u64; 4], b: [u64; 4]| {
                [
                    (a[0] * b[0] + a[1] * b[2]) % 5,
                    (a[0] * b[1] + a[1] * b[3]) % 5,
                    (a[2] * b[0] + a[3] * b[2]) % 5,
                    (a[2] * b[1] + a[3] * b[3]) % 5,
                ]
            };
            let m = [2, 1, 1, 1];
            let mut acc = m;
            let mut k = 1;
            while acc != [1, 0, 0, 1] {
                acc = mult(acc, m);
                k += 1;
                assert!(k < 1000);
            }
            k
        };
        let k = detect_period(RationalTorusPoint::new(1, 2, 5), 1000).unwrap();
        assert!(k <= order, "point period {k} exceeds matrix order {order}");
    }

    #[test]
    fn birkhoff_average_of_constant_is_one() {
        let avg = birkhoff_time_average(TorusPoint::new(0.3, 0.4), |_| 1.0, 12345);
        assert_eq!(avg, 1.0);
    }

    #[test]
    fn birkhoff_average_cosine_product_vanishes() {
        let f = |p: TorusPoint| (2.0 * PI * p.x1).cos() * (2.0 * PI * p.x2).cos();
        let avg = birkhoff_time_average(TorusPoint::new(1.0 / 32.0, PI / 32.0), f, 100_000);
        assert!(avg.abs() < 0.02, "avg = {avg}");
    }

    #[test]
    fn birkhoff_average_of_coordinate_is_half() {
        let avg = birkhoff_time_average(TorusPoint::new(1.0 / 32.0, PI / 32.0), |p| p.x1, 100_000);
        assert!((avg - 0.5).abs() < 0.02, "avg = {avg}");
    }

    #[test]
    fn discrepancy_of_fixed_point_orbit() {
        let orb = orbit(TorusPoint::new(0.0, 0.0), 100);
        let d = equidistribution_discrepancy(&orb, 2);
        assert_abs_diff_eq!(d, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn discrepancy_of_uniform_sample_is_small() {
        // Counter-based uniform points; binomial SE per cell ≈ 2.4e-4.
        let mut pts = Vec::with_capacity(1_000_000);
        for i in 0..1_000_000u64 {
            let a = splitmix64(splitmix64(0xD15C_4EAA_u64 ^ i));
            let b = splitmix64(a);
            pts.push(TorusPoint::new(u64_to_unit(a), u64_to_unit(b)));
        }
        let d = equidistribution_discrepancy(&pts, 4);
        assert!(d < 0.005, "d = {d}");
    }

    #[test]
    fn discrepancy_of_cat_orbit_decays() {
        let orb = orbit(TorusPoint::new(1.0 / 32.0, PI / 32.0), 100_000);
        let d = equidistribution_discrepancy(&orb, 8);
        assert!(d < 0.01, "d = {d}");
    }

    #[test]
    fn measure_preservation_by_sampling() {
        // Push 10⁶ uniform samples through the map; each 8×8 cell keeps
        // frequency 1/64 within 5 binomial standard errors.
        let n = 1_000_000u64;
        let mut counts = vec![0u64; 64];
        for i in 0..n {
            let a = splitmix64(splitmix64(0xCA7_1AB5 ^ i));
            let b = splitmix64(a);
            let p = cat_map_step(TorusPoint::new(u64_to_unit(a), u64_to_unit(b)));
            counts[bin_index(p, 8)] += 1;
        }
        let p = 1.0 / 64.0;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        for (cell, &c) in counts.iter().enumerate() {
            let freq = c as f64 / n as f64;
            assert!(
                (freq - p).abs() <= 5.0 * se,
                "cell {cell}: freq {freq} vs {p} (5se = {})",
                5.0 * se
            );
        }
    }

    #[test]
    fn exact_periodicity_all_denominators_up_to_64() {
        for q in 1..=64u64 {
            for p1 in 0..q {
                for p2 in 0..q {
                    let p = RationalTorusPoint::new(p1, p2, q);
                    let k = detect_period(p, 100_000)
                        .unwrap_or_else(|| panic!("({p1},{p2})/{q} not periodic"));
                    let mut r = p;
                    for _ in 0..k {
                        r = r.step();
                    }
                    assert_eq!(r, p);
                }
            }
        }
    }

    #[test]
    fn birkhoff_shift_invariance_bound() {
        let f = |p: TorusPoint| (2.0 * PI * p.x1).sin();
        let p0 = TorusPoint::new(0.123, 0.456);
        for n in [10usize, 100, 1000] {
            let a = birkhoff_time_average(p0, f, n);
            let b = birkhoff_time_average(cat_map_step(p0), f, n);
            assert!((a - b).abs() <= 2.0 / n as f64 + 1e-12);
        }
    }

    fn u64_to_unit(h: u64) -> f64 {
        (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    proptest! {
        #[test]
        fn wrap_always_in_unit_interval(x in -1e6f64..1e6) {
            let w = wrap_unit(x);
            prop_assert!((0.0..1.0).contains(&w));
        }

        #[test]
        fn group_law_iterates_compose(
            x1 in 0.0f64..1.0, x2 in 0.0f64..1.0,
            a in 1usize..20, b in 1usize..20,
        ) {
            // T^(a+b) and T^a ∘ T^b execute the same float operation
            // sequence, so they agree bit-for-bit.
            let p = TorusPoint::new(x1, x2);
            let mut lhs = p;
            for _ in 0..a + b {
                lhs = cat_map_step(lhs);
            }
            let mut rhs = p;
            for _ in 0..b {
                rhs = cat_map_step(rhs);
            }
            for _ in 0..a {
                rhs = cat_map_step(rhs);
            }
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn rational_period_divides_matrix_behaviour(q in 1u64..40, p1 in 0u64..40, p2 in 0u64..40) {
            let p = RationalTorusPoint::new(p1 % q, p2 % q, q);
            let k = detect_period(p, 100_000).unwrap();
            let mut r = p;
            for _ in 0..k {
                r = r.step();
            }
            prop_assert_eq!(r, p);
        }
    }
}
