//! Seeded, stationary random coefficient fields.
//!
//! Every field is a deterministic function of `(spec, seed, point)`:
//! tile categories come from a counter-based hash (the splitmix64
//! finalizer chain below), so evaluation is O(1) per point, order
//! independent, and bit-identical across platforms and thread
//! schedules. The seed plays the role of the sample-space element ω.
//!
//! Checkerboards draw one uniform global offset per realization
//! (enabled by default), which upgrades the ℤⁿ-stationary tile process
//! to a strictly stationary one under arbitrary real shifts.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// RNG seed; identical seeds give bit-identical realizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

/// Uniform ellipticity bounds `0 < ν₁ ≤ a ≤ ν₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityBounds {
    pub nu1: f64,
    pub nu2: f64,
}

impl EllipticityBounds {
    pub fn new(nu1: f64, nu2: f64) -> Result<Self> {
        if !(nu1 > 0.0 && nu2 >= nu1) {
            return Err(Error::InvalidSpec(format!(
                "ellipticity bounds need 0 < nu1 <= nu2, got ({nu1}, {nu2})"
            )));
        }
        Ok(Self { nu1, nu2 })
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.nu1 && v <= self.nu2
    }
}

// --- counter-based hashing -------------------------------------------------
//
// The exact mixing constants, fixed for bit-exact reproducibility:
//   gamma = 0x9E3779B97F4A7C15
//   m1    = 0xBF58476D1CE4E5B9
//   m2    = 0x94D049BB133111EB
// One round is z += gamma; z = (z ^ z>>30) * m1; z = (z ^ z>>27) * m2;
// z ^= z>>31 (the splitmix64 step). Hashing a coordinate list folds
// each coordinate into the state with xor followed by another round.

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const SPLITMIX_M1: u64 = 0xBF58_476D_1CE4_E5B9;
const SPLITMIX_M2: u64 = 0x94D0_49BB_1331_11EB;

/// Domain-separation tags so the tile stream and the offset stream
/// never overlap ("tile", "offset" in ASCII).
const TILE_DOMAIN: u64 = 0x7469_6c65;
const OFFSET_DOMAIN: u64 = 0x6f66_6673_6574;

/// One splitmix64 round.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(SPLITMIX_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(SPLITMIX_M1);
    z = (z ^ (z >> 27)).wrapping_mul(SPLITMIX_M2);
    z ^ (z >> 31)
}

/// Folds integer coordinates into a seeded splitmix64 chain.
fn hash_coords(seed: u64, coords: &[i64]) -> u64 {
    let mut h = splitmix64(seed);
    for &c in coords {
        h = splitmix64(h ^ (c as u64));
    }
    h
}

/// Top 53 bits of a word as a uniform double in `[0, 1)`.
fn u64_to_unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

// --- specs ------------------------------------------------------------------

/// 1D checkerboard: i.i.d. unit tiles with conductivity `kappas[i]`
/// drawn with probability `probs[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkerboard1DSpec {
    pub kappas: Vec<f64>,
    pub probs: Vec<f64>,
    pub offset_enabled: bool,
}

/// 2D checkerboard with scalar-isotropic tiles (value · Identity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkerboard2DSpec {
    pub kappas: Vec<f64>,
    pub probs: Vec<f64>,
    pub offset_enabled: bool,
}

fn validate_tiles(kappas: &[f64], probs: &[f64]) -> Result<()> {
    if kappas.is_empty() || kappas.len() != probs.len() {
        return Err(Error::InvalidSpec(format!(
            "kappas ({}) and probs ({}) must be equal nonzero lengths",
            kappas.len(),
            probs.len()
        )));
    }
    if kappas.iter().any(|&k| !k.is_finite() || k <= 0.0) {
        return Err(Error::InvalidSpec("kappas must be positive finite".into()));
    }
    if probs.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::InvalidSpec("probs must lie in (0, 1]".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidSpec(format!("probs sum to {total}, not 1")));
    }
    Ok(())
}

impl Checkerboard1DSpec {
    pub fn new(kappas: Vec<f64>, probs: Vec<f64>, offset_enabled: bool) -> Result<Self> {
        validate_tiles(&kappas, &probs)?;
        Ok(Self {
            kappas,
            probs,
            offset_enabled,
        })
    }
}

impl Checkerboard2DSpec {
    pub fn new(kappas: Vec<f64>, probs: Vec<f64>, offset_enabled: bool) -> Result<Self> {
        validate_tiles(&kappas, &probs)?;
        Ok(Self {
            kappas,
            probs,
            offset_enabled,
        })
    }
}

/// The coefficient fields the laboratory knows how to realize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FieldSpec {
    /// Constant coefficient `a ≡ value`.
    Constant {
        value: f64,
    },
    /// The periodic 1D profile `a(x) = 2 + sin(2πx)`.
    Periodic1d,
    Checkerboard1d(Checkerboard1DSpec),
    Checkerboard2d(Checkerboard2DSpec),
}

impl FieldSpec {
    /// Spatial dimension of the field (1 or 2).
    pub fn dim(&self) -> usize {
        match self {
            FieldSpec::Checkerboard2d(_) => 2,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FieldSpec::Constant { value } => {
                if *value > 0.0 && value.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(format!(
                        "constant field must be positive, got {value}"
                    )))
                }
            }
            FieldSpec::Periodic1d => Ok(()),
            FieldSpec::Checkerboard1d(s) => validate_tiles(&s.kappas, &s.probs),
            FieldSpec::Checkerboard2d(s) => validate_tiles(&s.kappas, &s.probs),
        }
    }

    /// Tight ellipticity bounds implied by the spec.
    pub fn bounds(&self) -> EllipticityBounds {
        let (lo, hi) = match self {
            FieldSpec::Constant { value } => (*value, *value),
            FieldSpec::Periodic1d => (1.0, 3.0),
            FieldSpec::Checkerboard1d(s) => minmax(&s.kappas),
            FieldSpec::Checkerboard2d(s) => minmax(&s.kappas),
        };
        EllipticityBounds { nu1: lo, nu2: hi }
    }

    fn offset_enabled(&self) -> bool {
        match self {
            FieldSpec::Checkerboard1d(s) => s.offset_enabled,
            FieldSpec::Checkerboard2d(s) => s.offset_enabled,
            _ => false,
        }
    }
}

fn minmax(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// The periodic 1D coefficient `a(x) = 2 + sin(2πx)`.
pub fn eval_periodic_1d(x: f64) -> f64 {
    2.0 + (2.0 * std::f64::consts::PI * x).sin()
}

/// Closed-form ensemble mean `⟨1/a⟩ = Σ pᵢ/κᵢ` of a tile spec.
/// The reciprocal is the 1D homogenized coefficient.
pub fn ensemble_mean_inverse(spec: &Checkerboard1DSpec) -> f64 {
    spec.probs
        .iter()
        .zip(&spec.kappas)
        .map(|(p, k)| p / k)
        .sum()
}

/// Draws the tile category for `(seed, tile_index)`: the hash word maps
/// to u ∈ [0,1) and the first category with `u < cumulative` wins
/// (half-open category boundaries).
pub fn sample_tile_category(seed: Seed, tile_index: &[i64], probs: &[f64]) -> usize {
    let h = hash_coords(splitmix64(seed.0 ^ TILE_DOMAIN), tile_index);
    let u = u64_to_unit(h);
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    probs.len() - 1
}

/// One realization a(·, ω): the spec plus its seed-derived global
/// offset. Evaluation is pure; the value is immutable after
/// construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct FieldRealization {
    spec: FieldSpec,
    seed: Seed,
    offset: [f64; 2],
}

/// Builds the realization for `(spec, seed)`, drawing the global offset
/// from the seed stream when the spec enables it. The tile containing
/// `x` is `floor(x + offset)` componentwise.
pub fn make_realization(spec: &FieldSpec, seed: Seed) -> Result<FieldRealization> {
    spec.validate()?;
    let mut offset = [0.0; 2];
    if spec.offset_enabled() {
        let off_seed = splitmix64(seed.0 ^ OFFSET_DOMAIN);
        for (i, o) in offset.iter_mut().enumerate().take(spec.dim()) {
            *o = u64_to_unit(hash_coords(off_seed, &[i as i64]));
        }
    }
    Ok(FieldRealization {
        spec: spec.clone(),
        seed,
        offset,
    })
}

impl FieldRealization {
    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    /// The seed-derived global offset (zero when disabled).
    pub fn offset(&self) -> &[f64; 2] {
        &self.offset
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn bounds(&self) -> EllipticityBounds {
        self.spec.bounds()
    }

    /// Evaluates a 1D field at `x`.
    ///
    /// Panics if the spec is 2D.
    pub fn eval1(&self, x: f64) -> f64 {
        match &self.spec {
            FieldSpec::Constant { value } => *value,
            FieldSpec::Periodic1d => eval_periodic_1d(x),
            FieldSpec::Checkerboard1d(s) => {
                let tile = (x + self.offset[0]).floor() as i64;
                s.kappas[sample_tile_category(self.seed, &[tile], &s.probs)]
            }
            FieldSpec::Checkerboard2d(_) => panic!("eval1 called on a 2D field"),
        }
    }

    /// Evaluates a 2D field at `(x1, x2)`; 1D specs are extended as
    /// constants along x2.
    pub fn eval2(&self, x1: f64, x2: f64) -> f64 {
        match &self.spec {
            FieldSpec::Checkerboard2d(s) => {
                let t1 = (x1 + self.offset[0]).floor() as i64;
                let t2 = (x2 + self.offset[1]).floor() as i64;
                s.kappas[sample_tile_category(self.seed, &[t1, t2], &s.probs)]
            }
            _ => self.eval1(x1),
        }
    }

    /// `a^ε(x) = a(x/ε)` in 1D.
    pub fn eval_scaled_1d(&self, eps: f64, x: f64) -> f64 {
        self.eval1(x / eps)
    }

    /// `A^ε(x) = A(x/ε)` in 2D.
    pub fn eval_scaled_2d(&self, eps: f64, x1: f64, x2: f64) -> f64 {
        self.eval2(x1 / eps, x2 / eps)
    }

    /// Coefficient-discontinuity locations of the ε-scaled field inside
    /// `(s, t)`: tile boundaries sit at `x = ε (k − offset)`, k ∈ ℤ.
    /// Smooth specs report none.
    pub fn scaled_breakpoints_1d(&self, eps: f64, s: f64, t: f64) -> Vec<f64> {
        match &self.spec {
            FieldSpec::Checkerboard1d(_) => {
                let mut out = Vec::new();
                let k0 = (s / eps + self.offset[0]).ceil() as i64;
                let mut k = k0;
                loop {
                    let x = eps * (k as f64 - self.offset[0]);
                    if x >= t {
                        break;
                    }
                    if x > s {
                        out.push(x);
                    }
                    k += 1;
                }
                out
            }
            _ => Vec::new(),
        }
    }
}

/// The microstructural scale ε > 0 in `a^ε(x) = a(x/ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParameter {
    pub eps: f64,
}

impl ScaleParameter {
    pub fn new(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps.is_finite() {
            Ok(Self { eps })
        } else {
            Err(Error::InvalidSpec(format!(
                "eps must be positive, got {eps}"
            )))
        }
    }
}

/// Midpoint-rule average of `observable(a(x))` over the window
/// `[0, R]ⁿ`, with `n_samples` points per axis. For ergodic fields this
/// Birkhoff average converges to the ensemble mean as R grows.
pub fn spatial_average<F>(
    realization: &FieldRealization,
    observable: F,
    window: f64,
    n_samples: usize,
) -> f64
where
    F: Fn(f64) -> f64,
{
    assert!(window > 0.0 && n_samples >= 1);
    let h = window / n_samples as f64;
    match realization.dim() {
        1 => {
            let mut sum = 0.0;
            for i in 0..n_samples {
                let x = (i as f64 + 0.5) * h;
                sum += observable(realization.eval1(x));
            }
            sum / n_samples as f64
        }
        2 => {
            let mut sum = 0.0;
            for j in 0..n_samples {
                let y = (j as f64 + 0.5) * h;
                for i in 0..n_samples {
                    let x = (i as f64 + 0.5) * h;
                    sum += observable(realization.eval2(x, y));
                }
            }
            sum / (n_samples * n_samples) as f64
        }
        d => unreachable!("unsupported dimension {d}"),
    }
}
