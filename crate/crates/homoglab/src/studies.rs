//! Declarative experiment harness: JSON study configs in, CSV reports
//! out.
//!
//! Configs are parsed strictly (unknown keys are rejected — silent
//! typos are the main reproducibility hazard) and every report carries
//! a provenance header with the config hash, code version, and seed.
//! Identical config + seed produces byte-identical report bodies.

use crate::error::{Error, Result};
use crate::fem2d::{
    l2_diff, l2_norm, solve_dirichlet, solve_dirichlet_const_matrix, StructuredMesh,
};
use crate::fields::{
    make_realization, Checkerboard1DSpec, Checkerboard2DSpec, FieldRealization, FieldSpec,
    ScaleParameter, Seed,
};
use crate::homog::{
    effective_tensor_ensemble, harmonic_mean_1d, spd_check, voigt_reuss_bounds, EffectiveTensor,
};
use crate::solve1d::{
    flux_integral, solve_exact, Coefficient1d, ConstantCoeff, Interval, ScaledField, SmoothCoeff,
    Solution1D, Source1D,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

// --- reports -----------------------------------------------------------------

/// Tabular study output with a provenance comment header.
#[derive(Debug, Clone)]
pub struct CsvReport {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// `# key=value` header lines.
    pub provenance: Vec<(String, String)>,
}

impl CsvReport {
    pub fn new<S: Into<String>>(columns: Vec<S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            provenance: vec![("version".into(), env!("CARGO_PKG_VERSION").into())],
        }
    }

    pub fn tag<K: Into<String>, V: ToString>(&mut self, key: K, value: V) {
        self.provenance.push((key.into(), value.to_string()));
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "column count mismatch");
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.provenance {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &std::path::Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Everything a study run wants written to disk.
#[derive(Debug, Default)]
pub struct StudyOutput {
    /// `(file name, report)` pairs; the first is the primary table.
    pub reports: Vec<(String, CsvReport)>,
    /// Optional `summary.json` payload.
    pub summary: Option<serde_json::Value>,
    /// Optional raw binary sidecars `(file name, bytes)`.
    pub blobs: Vec<(String, Vec<u8>)>,
}

/// FNV-1a hash of the canonical config JSON, quoted in report headers.
pub fn config_hash(canonical_json: &str) -> String {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in canonical_json.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

// --- field / source configs ---------------------------------------------------

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    #[serde(rename = "constant")]
    Constant,
    #[serde(rename = "periodic-1d")]
    Periodic1d,
    #[serde(rename = "checkerboard-1d")]
    Checkerboard1d,
    #[serde(rename = "checkerboard-2d")]
    Checkerboard2d,
}

/// Wire form of a coefficient field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub kind: FieldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    /// Uniform global offset making the tile process strictly
    /// stationary. On by default.
    #[serde(default = "default_true")]
    pub offset: bool,
}

impl FieldConfig {
    pub fn to_spec(&self) -> Result<FieldSpec> {
        let tiles = || -> Result<(Vec<f64>, Vec<f64>)> {
            match (&self.kappas, &self.probs) {
                (Some(k), Some(p)) => Ok((k.clone(), p.clone())),
                _ => Err(Error::Config(
                    "checkerboard fields need kappas and probs".into(),
                )),
            }
        };
        match self.kind {
            FieldKind::Constant => {
                let value = self
                    .value
                    .ok_or_else(|| Error::Config("constant field needs a value".into()))?;
                Ok(FieldSpec::Constant { value })
            }
            FieldKind::Periodic1d => Ok(FieldSpec::Periodic1d),
            FieldKind::Checkerboard1d => {
                let (k, p) = tiles()?;
                Ok(FieldSpec::Checkerboard1d(Checkerboard1DSpec::new(
                    k,
                    p,
                    self.offset,
                )?))
            }
            FieldKind::Checkerboard2d => {
                let (k, p) = tiles()?;
                Ok(FieldSpec::Checkerboard2d(Checkerboard2DSpec::new(
                    k,
                    p,
                    self.offset,
                )?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    /// `f(x) = −3(2x − 1)`, the 1D bench source.
    #[serde(rename = "bench-1d")]
    Bench1d,
    #[serde(rename = "constant")]
    Constant,
    /// Centered Gaussian bump
    /// `f = A/(2πℓ) · exp(−((x₁−½)² + (x₂−½)²)/(2ℓ))`.
    #[serde(rename = "gaussian-2d")]
    Gaussian2d,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub kind: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

impl SourceConfig {
    pub fn bench_1d() -> Self {
        Self {
            kind: SourceKind::Bench1d,
            value: None,
            amplitude: None,
            length: None,
        }
    }

    /// The 2D study default: amplitude 5, length 0.05.
    pub fn gaussian_default() -> Self {
        Self {
            kind: SourceKind::Gaussian2d,
            value: None,
            amplitude: Some(5.0),
            length: Some(0.05),
        }
    }

    pub fn to_source_1d(&self) -> Result<Source1D> {
        match self.kind {
            SourceKind::Bench1d => Ok(Source1D::cubic_bench()),
            SourceKind::Constant => {
                let c = self
                    .value
                    .ok_or_else(|| Error::Config("constant source needs a value".into()))?;
                Ok(Source1D::constant(c))
            }
            SourceKind::Gaussian2d => Err(Error::Config(
                "gaussian-2d source is two-dimensional".into(),
            )),
        }
    }

    pub fn to_source_2d(&self) -> Result<impl Fn(f64, f64) -> f64 + Copy> {
        let (amp, len) = match self.kind {
            SourceKind::Gaussian2d => (
                self.amplitude
                    .ok_or_else(|| Error::Config("gaussian source needs amplitude".into()))?,
                self.length
                    .ok_or_else(|| Error::Config("gaussian source needs length".into()))?,
            ),
            SourceKind::Constant => {
                let c = self
                    .value
                    .ok_or_else(|| Error::Config("constant source needs a value".into()))?;
                // Encode a constant as the limit form directly.
                return Ok(Gaussian2d {
                    scale: c,
                    inv_two_len: 0.0,
                }
                .into_fn());
            }
            SourceKind::Bench1d => {
                return Err(Error::Config("bench-1d source is one-dimensional".into()))
            }
        };
        if !len.is_finite() || len <= 0.0 {
            return Err(Error::Config("gaussian length must be positive".into()));
        }
        Ok(Gaussian2d {
            scale: amp / (2.0 * std::f64::consts::PI * len),
            inv_two_len: 1.0 / (2.0 * len),
        }
        .into_fn())
    }
}

#[derive(Clone, Copy)]
struct Gaussian2d {
    scale: f64,
    inv_two_len: f64,
}

impl Gaussian2d {
    fn into_fn(self) -> impl Fn(f64, f64) -> f64 + Copy {
        move |x: f64, y: f64| {
            let r2 = (x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5);
            self.scale * (-self.inv_two_len * r2).exp()
        }
    }
}

fn validate_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::Config("eps list must be nonempty".into()));
    }
    if eps_list.iter().any(|&e| !e.is_finite() || e <= 0.0) {
        return Err(Error::Config("eps values must be positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(
            "eps values must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

fn default_eps_halving(k: usize) -> Vec<f64> {
    (1..=k).map(|i| 0.5f64.powi(i as i32)).collect()
}

/// Base quadrature cells for an ε-scaled 1D solve: enough to resolve
/// the oscillation. Refuses to auto-size past 2²² cells; pick
/// `n_cells` explicitly for more extreme scales.
fn cells_for_eps(eps: f64) -> Result<usize> {
    let cells = ((16.0 / eps).ceil() as usize).max(256);
    if cells > 1 << 22 {
        return Err(Error::Config(format!(
            "eps = {eps} would need {cells} quadrature cells; set n_cells explicitly"
        )));
    }
    Ok(cells)
}

// --- study configs -------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Converge1dConfig {
    pub field: FieldConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cells: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Converge2dConfig {
    pub field: FieldConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    /// Elements per mesh axis.
    #[serde(default = "default_mesh")]
    pub mesh: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceConfig>,
    /// Periodization torus side (tiles) for the reference tensor.
    #[serde(default = "default_small_torus")]
    pub torus_side: usize,
    /// Ensemble size for the reference tensor.
    #[serde(default = "default_small_ensemble")]
    pub ensemble: usize,
    #[serde(default = "default_epp_small")]
    pub elements_per_tile: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Also dump per-ε coefficient and solution rasters.
    #[serde(default = "default_true")]
    pub dumps: bool,
}

fn default_mesh() -> usize {
    128
}
fn default_small_torus() -> usize {
    8
}
fn default_small_ensemble() -> usize {
    8
}
fn default_epp_small() -> usize {
    2
}
fn default_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConvConfig {
    pub field: FieldConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cells: Option<usize>,
    #[serde(default = "default_bump_center")]
    pub bump_center: f64,
    #[serde(default = "default_bump_width")]
    pub bump_width: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_bump_center() -> f64 {
    0.5
}
fn default_bump_width() -> f64 {
    0.6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicConfig {
    /// Float starting points; defaults to the classic pair
    /// (1/32, π/32) and (1/32, 1/32).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_grid_m")]
    pub grid_m: usize,
    /// Rational starts (p1, p2, q) for exact period detection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rational_starts: Option<Vec<[u64; 3]>>,
    #[serde(default = "default_max_period_iter")]
    pub max_period_iter: usize,
}

fn default_iterations() -> usize {
    1000
}
fn default_grid_m() -> usize {
    8
}
fn default_max_period_iter() -> usize {
    1_000_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpFieldConfig {
    pub field: FieldConfig,
    #[serde(default = "default_eps_one")]
    pub eps: f64,
    /// Raster resolution per axis.
    pub resolution: usize,
    #[serde(default)]
    pub seed: u64,
    /// Sampling window `[lo, hi]` per axis; defaults to `[0, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 2]>,
    /// Also write a row-major little-endian f64 sidecar with a
    /// 16-byte header (8-byte magic, u32 nx, u32 ny).
    #[serde(default)]
    pub binary_sidecar: bool,
}

fn default_eps_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solve1dConfig {
    pub field: FieldConfig,
    #[serde(default = "default_eps_one")]
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cells: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solve2dConfig {
    pub field: FieldConfig,
    #[serde(default = "default_eps_one")]
    pub eps: f64,
    #[serde(default = "default_mesh")]
    pub mesh: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceConfig>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogenizeConfig {
    pub field: FieldConfig,
    #[serde(default = "default_torus")]
    pub torus_side: usize,
    #[serde(default = "default_ensemble")]
    pub ensemble: usize,
    #[serde(default = "default_epp")]
    pub elements_per_tile: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_torus() -> usize {
    16
}
fn default_ensemble() -> usize {
    16
}
fn default_epp() -> usize {
    4
}

// --- runners -----------------------------------------------------------------

enum Coeff1dChoice<'a> {
    Scaled(ScaledField<'a>),
    Smooth(SmoothCoeff<Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>>),
}

impl Coefficient1d for Coeff1dChoice<'_> {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Coeff1dChoice::Scaled(c) => c.eval(x),
            Coeff1dChoice::Smooth(c) => c.eval(x),
        }
    }

    fn breakpoints(&self, domain: Interval) -> Vec<f64> {
        match self {
            Coeff1dChoice::Scaled(c) => c.breakpoints(domain),
            Coeff1dChoice::Smooth(c) => c.breakpoints(domain),
        }
    }
}

fn scaled_coeff_1d(realization: &FieldRealization, eps: f64) -> Coeff1dChoice<'_> {
    match realization.spec() {
        FieldSpec::Checkerboard1d(_) => Coeff1dChoice::Scaled(ScaledField { realization, eps }),
        _ => {
            let r = realization.clone();
            Coeff1dChoice::Smooth(SmoothCoeff(Box::new(move |x| r.eval_scaled_1d(eps, x))))
        }
    }
}

/// Reference solution of the homogenized 1D problem, on a fine grid.
fn reference_1d(abar: f64, source: &Source1D) -> Result<Solution1D> {
    solve_exact(&ConstantCoeff(abar), source, Interval::unit(), 4096)
}

/// ε-sweep of `‖u^ε − ū‖` and `‖σ^ε − ā ū′‖` against the homogenized
/// solution. Per-ε failures become `error` rows; the sweep continues.
pub fn run_convergence_1d(config: &Converge1dConfig) -> Result<StudyOutput> {
    let spec = config.field.to_spec()?;
    if spec.dim() != 1 {
        return Err(Error::Config(
            "converge-1d needs a one-dimensional field".into(),
        ));
    }
    let eps_list = config
        .eps_list
        .clone()
        .unwrap_or_else(|| default_eps_halving(8));
    validate_eps_list(&eps_list)?;
    let source_cfg = config.source.clone().unwrap_or_else(SourceConfig::bench_1d);
    let source = source_cfg.to_source_1d()?;
    let abar = harmonic_mean_1d(&spec)?;
    let reference = reference_1d(abar, &source)?;
    let realization = make_realization(&spec, Seed(config.seed))?;

    let rows: Vec<Vec<String>> = eps_list
        .par_iter()
        .map(|&eps| {
            let run = || -> Result<(usize, f64, f64)> {
                let n_cells = match config.n_cells {
                    Some(n) => n,
                    None => cells_for_eps(eps)?,
                };
                let coeff = scaled_coeff_1d(&realization, eps);
                let sol = solve_exact(&coeff, &source, Interval::unit(), n_cells)?;
                let l2 = sol.l2_error(|x| reference.eval_u(x));
                let flux = sol.flux_l2_error(|x| reference.eval_flux(x));
                Ok((n_cells, l2, flux))
            };
            match run() {
                Ok((n_cells, l2, flux)) => vec![
                    fmt(eps),
                    fmt(l2),
                    fmt(flux),
                    n_cells.to_string(),
                    config.seed.to_string(),
                ],
                Err(e) => vec![
                    fmt(eps),
                    format!("error: {e}"),
                    "error".into(),
                    config.n_cells.unwrap_or(0).to_string(),
                    config.seed.to_string(),
                ],
            }
        })
        .collect();

    let mut report = CsvReport::new(vec!["eps", "l2_error", "flux_l2_error", "n_cells", "seed"]);
    report.tag("abar", fmt(abar));
    report.tag("seed", config.seed);
    for row in rows {
        report.push_row(row);
    }
    Ok(StudyOutput {
        reports: vec![("convergence.csv".into(), report)],
        ..Default::default()
    })
}

/// 2D ε-sweep on one realization against the constant-Α⁰ solution,
/// with optional coefficient/solution rasters per ε.
pub fn run_convergence_2d(config: &Converge2dConfig) -> Result<StudyOutput> {
    let spec = config.field.to_spec()?;
    if spec.dim() != 2 && !matches!(spec, FieldSpec::Constant { .. }) {
        return Err(Error::Config(
            "converge-2d needs a two-dimensional field".into(),
        ));
    }
    let eps_list = config
        .eps_list
        .clone()
        .unwrap_or_else(|| vec![0.5, 0.25, 0.125]);
    validate_eps_list(&eps_list)?;
    let source_cfg = config
        .source
        .clone()
        .unwrap_or_else(SourceConfig::gaussian_default);
    let f = source_cfg.to_source_2d()?;
    let mesh = StructuredMesh::unit_square(config.mesh, config.mesh)?;
    let realization = make_realization(&spec, Seed(config.seed))?;

    // Homogenized reference: ensemble periodization tensor, or the
    // constant itself for a homogeneous field.
    let tensor = match &spec {
        FieldSpec::Constant { value } => constant_tensor(*value),
        _ => effective_tensor_ensemble(
            &spec,
            config.torus_side,
            config.ensemble,
            Seed(config.seed),
            config.elements_per_tile,
            config.tol,
        )?,
    };
    let reference = solve_dirichlet_const_matrix(&mesh, tensor.entries, f, config.tol)?;
    let ref_norm = l2_norm(&mesh, &reference.u);

    let mut output = StudyOutput::default();
    let solves: Vec<(f64, Result<crate::fem2d::FemSolution>)> = eps_list
        .par_iter()
        .map(|&eps| {
            (
                eps,
                solve_dirichlet(&mesh, &realization, eps, f, config.tol),
            )
        })
        .collect();

    let mut report = CsvReport::new(vec!["eps", "rel_l2_gap", "cg_iterations", "mesh", "seed"]);
    report.tag("seed", config.seed);
    report.tag("a0_00", fmt(tensor.entries[0][0]));
    report.tag("a0_11", fmt(tensor.entries[1][1]));
    report.tag("a0_01", fmt(tensor.entries[0][1]));
    report.tag("torus_side", config.torus_side);
    report.tag("ensemble", config.ensemble);
    for (eps, solve) in solves {
        match solve {
            Ok(sol) => {
                let gap = l2_diff(&mesh, &sol.u, &reference.u) / ref_norm;
                report.push_row(vec![
                    fmt(eps),
                    fmt(gap),
                    sol.diagnostics.iterations.to_string(),
                    config.mesh.to_string(),
                    config.seed.to_string(),
                ]);
                if config.dumps {
                    let tag = format!("eps_{eps:.6}");
                    output.reports.push((
                        format!("solution_{tag}.csv"),
                        solution_raster(&mesh, &sol.u),
                    ));
                    output.reports.push((
                        format!("field_{tag}.csv"),
                        field_raster_2d(&realization, eps, config.mesh, 0.0, 1.0),
                    ));
                }
            }
            Err(e) => {
                report.push_row(vec![
                    fmt(eps),
                    format!("error: {e}"),
                    "error".into(),
                    config.mesh.to_string(),
                    config.seed.to_string(),
                ]);
            }
        }
    }
    if config.dumps {
        output.reports.push((
            "reference_solution.csv".into(),
            solution_raster(&mesh, &reference.u),
        ));
    }
    output
        .reports
        .insert(0, ("convergence2d.csv".into(), report));
    Ok(output)
}

fn constant_tensor(value: f64) -> EffectiveTensor {
    EffectiveTensor {
        dim: 2,
        entries: [[value, 0.0], [0.0, value]],
        stderr: [[0.0; 2]; 2],
        provenance: crate::homog::Provenance::Formula,
        torus_side: None,
        ensemble: 1,
        failures: 0,
        asymmetry: 0.0,
    }
}

/// Smooth compactly supported bump on `(c − w/2, c + w/2)`.
pub fn interior_bump(center: f64, width: f64) -> impl Fn(f64) -> f64 + Copy {
    move |x: f64| {
        let t = (x - center) / (0.5 * width);
        if t.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - t * t)).exp()
        }
    }
}

/// Weighted energy-density convergence (the numerical face of the
/// div–curl lemma): `gap(ε) = |∫ φ σ^ε u^ε′ − ∫ φ ā (ū′)²|`.
pub fn run_energy_convergence(config: &EnergyConvConfig) -> Result<StudyOutput> {
    let spec = config.field.to_spec()?;
    if spec.dim() != 1 {
        return Err(Error::Config(
            "energy-conv needs a one-dimensional field".into(),
        ));
    }
    if !(config.bump_width > 0.0
        && config.bump_center - 0.5 * config.bump_width > 0.0
        && config.bump_center + 0.5 * config.bump_width < 1.0)
    {
        return Err(Error::Config(
            "bump support must lie strictly inside (0, 1)".into(),
        ));
    }
    let eps_list = config
        .eps_list
        .clone()
        .unwrap_or_else(|| default_eps_halving(6));
    validate_eps_list(&eps_list)?;
    let source = Source1D::cubic_bench();
    let abar = harmonic_mean_1d(&spec)?;
    let bump = interior_bump(config.bump_center, config.bump_width);
    let realization = make_realization(&spec, Seed(config.seed))?;

    // Homogenized limit ∫ φ ā (ū′)² dx = ∫ φ σ̄²/ā dx.
    let limit = flux_integral(
        &ConstantCoeff(abar),
        &source,
        Interval::unit(),
        4096,
        |x, sigma, a| bump(x) * sigma * sigma / a,
    )?;

    let rows: Vec<Vec<String>> = eps_list
        .par_iter()
        .map(|&eps| {
            let run = || -> Result<(usize, f64)> {
                let n_cells = match config.n_cells {
                    Some(n) => n,
                    None => cells_for_eps(eps)?,
                };
                let coeff = scaled_coeff_1d(&realization, eps);
                let val =
                    flux_integral(&coeff, &source, Interval::unit(), n_cells, |x, sigma, a| {
                        bump(x) * sigma * sigma / a
                    })?;
                Ok((n_cells, val))
            };
            match run() {
                Ok((n_cells, val)) => vec![
                    fmt(eps),
                    fmt((val - limit).abs()),
                    n_cells.to_string(),
                    config.seed.to_string(),
                ],
                Err(e) => vec![
                    fmt(eps),
                    format!("error: {e}"),
                    config.n_cells.unwrap_or(0).to_string(),
                    config.seed.to_string(),
                ],
            }
        })
        .collect();

    let mut report = CsvReport::new(vec!["eps", "energy_gap", "n_cells", "seed"]);
    report.tag("abar", fmt(abar));
    report.tag("limit", fmt(limit));
    report.tag("bump_center", config.bump_center);
    report.tag("bump_width", config.bump_width);
    for row in rows {
        report.push_row(row);
    }
    Ok(StudyOutput {
        reports: vec![("energy.csv".into(), report)],
        ..Default::default()
    })
}

/// Cat-map orbit dumps plus equidistribution/period diagnostics.
pub fn run_ergodic_demo(config: &ErgodicConfig) -> Result<StudyOutput> {
    use crate::ergodics::{
        detect_period, equidistribution_discrepancy, orbit, RationalTorusPoint, TorusPoint,
    };
    if config.grid_m < 2 {
        return Err(Error::Config("grid_m must be at least 2".into()));
    }
    if config.iterations == 0 {
        return Err(Error::Config("iterations must be positive".into()));
    }
    let starts = config.starts.clone().unwrap_or_else(|| {
        vec![
            [1.0 / 32.0, std::f64::consts::PI / 32.0],
            [1.0 / 32.0, 1.0 / 32.0],
        ]
    });
    let rational = config
        .rational_starts
        .clone()
        .unwrap_or_else(|| vec![[1, 1, 32]]);

    let mut output = StudyOutput::default();
    let mut diag = CsvReport::new(vec![
        "orbit",
        "x1_0",
        "x2_0",
        "n",
        "grid_m",
        "discrepancy",
        "period",
    ]);
    for (idx, &[x1, x2]) in starts.iter().enumerate() {
        let p0 = TorusPoint::new(x1, x2);
        let orb = orbit(p0, config.iterations);
        let mut dump = CsvReport::new(vec!["n", "x1", "x2"]);
        dump.tag("x1_0", fmt(x1));
        dump.tag("x2_0", fmt(x2));
        for (n, p) in orb.iter().enumerate() {
            dump.push_row(vec![(n + 1).to_string(), fmt(p.x1), fmt(p.x2)]);
        }
        output.reports.push((format!("orbit_{idx}.csv"), dump));
        let d = equidistribution_discrepancy(&orb, config.grid_m);
        diag.push_row(vec![
            idx.to_string(),
            fmt(x1),
            fmt(x2),
            config.iterations.to_string(),
            config.grid_m.to_string(),
            fmt(d),
            String::new(),
        ]);
    }
    for &[p1, p2, q] in &rational {
        if q == 0 {
            return Err(Error::Config(
                "rational start needs a positive denominator".into(),
            ));
        }
        let p = RationalTorusPoint::new(p1, p2, q);
        let period = detect_period(p, config.max_period_iter);
        let f = p.to_float();
        diag.push_row(vec![
            format!("{p1}/{q},{p2}/{q}"),
            fmt(f.x1),
            fmt(f.x2),
            config.max_period_iter.to_string(),
            config.grid_m.to_string(),
            String::new(),
            period
                .map(|k| k.to_string())
                .unwrap_or_else(|| "none".into()),
        ]);
    }
    output
        .reports
        .insert(0, ("ergodic_summary.csv".into(), diag));
    Ok(output)
}

/// Rasterizes a realization to CSV (`i,x,value` in 1D,
/// `i,j,x1,x2,value` in 2D), optionally with a binary sidecar.
pub fn run_dump_field(config: &DumpFieldConfig) -> Result<StudyOutput> {
    if config.resolution == 0 {
        return Err(Error::Config("resolution must be positive".into()));
    }
    ScaleParameter::new(config.eps)?;
    let spec = config.field.to_spec()?;
    let realization = make_realization(&spec, Seed(config.seed))?;
    let [lo, hi] = config.domain.unwrap_or([0.0, 1.0]);
    if !lo.is_finite() || !hi.is_finite() || hi <= lo {
        return Err(Error::Config("domain must satisfy lo < hi".into()));
    }
    let mut output = StudyOutput::default();
    let n = config.resolution;
    let h = (hi - lo) / n as f64;
    if spec.dim() == 1 {
        let mut report = CsvReport::new(vec!["i", "x", "value"]);
        report.tag("seed", config.seed);
        report.tag("eps", config.eps);
        for i in 0..n {
            let x = lo + (i as f64 + 0.5) * h;
            report.push_row(vec![
                i.to_string(),
                fmt(x),
                fmt(realization.eval_scaled_1d(config.eps, x)),
            ]);
        }
        output.reports.push(("field.csv".into(), report));
    } else {
        let report = field_raster_2d(&realization, config.eps, n, lo, hi);
        if config.binary_sidecar {
            let mut blob = Vec::with_capacity(16 + 8 * n * n);
            blob.extend_from_slice(b"HOMOGLAB");
            blob.extend_from_slice(&(n as u32).to_le_bytes());
            blob.extend_from_slice(&(n as u32).to_le_bytes());
            for j in 0..n {
                let y = lo + (j as f64 + 0.5) * h;
                for i in 0..n {
                    let x = lo + (i as f64 + 0.5) * h;
                    blob.extend_from_slice(
                        &realization.eval_scaled_2d(config.eps, x, y).to_le_bytes(),
                    );
                }
            }
            output.blobs.push(("field.f64".into(), blob));
        }
        output.reports.push(("field.csv".into(), report));
    }
    Ok(output)
}

fn field_raster_2d(
    realization: &FieldRealization,
    eps: f64,
    n: usize,
    lo: f64,
    hi: f64,
) -> CsvReport {
    let h = (hi - lo) / n as f64;
    let mut report = CsvReport::new(vec!["i", "j", "x1", "x2", "value"]);
    report.tag("eps", eps);
    report.tag("seed", realization.seed().0);
    for j in 0..n {
        let y = lo + (j as f64 + 0.5) * h;
        for i in 0..n {
            let x = lo + (i as f64 + 0.5) * h;
            report.push_row(vec![
                i.to_string(),
                j.to_string(),
                fmt(x),
                fmt(y),
                fmt(realization.eval_scaled_2d(eps, x, y)),
            ]);
        }
    }
    report
}

fn solution_raster(mesh: &StructuredMesh, u: &[f64]) -> CsvReport {
    let mut report = CsvReport::new(vec!["i", "j", "x1", "x2", "u"]);
    for j in 0..=mesh.ny {
        for i in 0..=mesh.nx {
            let (x, y) = mesh.node_coords(i, j);
            report.push_row(vec![
                i.to_string(),
                j.to_string(),
                fmt(x),
                fmt(y),
                fmt(u[mesh.node_index(i, j)]),
            ]);
        }
    }
    report
}

/// One ε-scaled 1D solve dumped as `x,u,sigma`.
pub fn run_solve1d(config: &Solve1dConfig) -> Result<StudyOutput> {
    let spec = config.field.to_spec()?;
    if spec.dim() != 1 {
        return Err(Error::Config(
            "solve1d needs a one-dimensional field".into(),
        ));
    }
    ScaleParameter::new(config.eps)?;
    let source = config
        .source
        .clone()
        .unwrap_or_else(SourceConfig::bench_1d)
        .to_source_1d()?;
    let realization = make_realization(&spec, Seed(config.seed))?;
    let n_cells = match config.n_cells {
        Some(n) => n,
        None => cells_for_eps(config.eps)?,
    };
    let coeff = scaled_coeff_1d(&realization, config.eps);
    let mut sol = solve_exact(&coeff, &source, Interval::unit(), n_cells)?;
    sol.meta.eps = Some(config.eps);
    sol.meta.seed = Some(config.seed);

    let mut report = CsvReport::new(vec!["x", "u", "sigma"]);
    report.tag("eps", config.eps);
    report.tag("seed", config.seed);
    report.tag("n_cells", n_cells);
    for i in 0..sol.grid.len() {
        report.push_row(vec![fmt(sol.grid[i]), fmt(sol.u[i]), fmt(sol.flux[i])]);
    }
    Ok(StudyOutput {
        reports: vec![("solution.csv".into(), report)],
        ..Default::default()
    })
}

/// One 2D Dirichlet solve: nodal dump plus per-element flux dump.
pub fn run_solve2d(config: &Solve2dConfig) -> Result<StudyOutput> {
    let spec = config.field.to_spec()?;
    ScaleParameter::new(config.eps)?;
    let f = config
        .source
        .clone()
        .unwrap_or_else(SourceConfig::gaussian_default)
        .to_source_2d()?;
    let realization = make_realization(&spec, Seed(config.seed))?;
    let mesh = StructuredMesh::unit_square(config.mesh, config.mesh)?;
    let sol = solve_dirichlet(&mesh, &realization, config.eps, f, config.tol)?;

    let mut solution = solution_raster(&mesh, &sol.u);
    solution.tag("eps", config.eps);
    solution.tag("seed", config.seed);
    solution.tag("cg_iterations", sol.diagnostics.iterations);
    solution.tag("cg_residual", fmt(sol.diagnostics.residual));

    let mut flux = CsvReport::new(vec!["e", "x1c", "x2c", "flux1", "flux2"]);
    for ej in 0..mesh.ny {
        for ei in 0..mesh.nx {
            let e = ej * mesh.nx + ei;
            let (cx, cy) = mesh.elem_centroid(ei, ej);
            flux.push_row(vec![
                e.to_string(),
                fmt(cx),
                fmt(cy),
                fmt(sol.elem_flux[e][0]),
                fmt(sol.elem_flux[e][1]),
            ]);
        }
    }
    Ok(StudyOutput {
        reports: vec![("solution.csv".into(), solution), ("flux.csv".into(), flux)],
        ..Default::default()
    })
}

/// Ensemble periodization run: tensor table plus a JSON summary with
/// bounds and SPD verdicts.
pub fn run_homogenize(config: &HomogenizeConfig) -> Result<StudyOutput> {
    let spec = config.field.to_spec()?;
    let (kappas, probs) = match &spec {
        FieldSpec::Checkerboard2d(s) => (s.kappas.clone(), s.probs.clone()),
        FieldSpec::Constant { value } => (vec![*value], vec![1.0]),
        _ => {
            return Err(Error::Config(
                "homogenize estimates 2D tensors; 1D fields have the closed form".into(),
            ))
        }
    };
    let tensor = effective_tensor_ensemble(
        &spec,
        config.torus_side,
        config.ensemble,
        Seed(config.seed),
        config.elements_per_tile,
        config.tol,
    )?;
    let bounds = voigt_reuss_bounds(&kappas, &probs);
    let nu = spec.bounds();
    let spd = spd_check(&tensor, nu.nu1, nu.nu2, 1e-8);
    let eigenvalues = tensor.eigenvalues();
    let bounds_ok = eigenvalues
        .iter()
        .all(|&ev| ev >= bounds.harmonic - 1e-8 && ev <= bounds.arithmetic + 1e-8);

    let mut report = CsvReport::new(vec!["entry", "i", "j", "mean", "stderr", "L", "M"]);
    report.tag("seed", config.seed);
    report.tag("elements_per_tile", config.elements_per_tile);
    for i in 0..2 {
        for j in 0..2 {
            report.push_row(vec![
                format!("a{i}{j}"),
                i.to_string(),
                j.to_string(),
                fmt(tensor.entries[i][j]),
                fmt(tensor.stderr[i][j]),
                config.torus_side.to_string(),
                tensor.ensemble.to_string(),
            ]);
        }
    }
    let summary = serde_json::json!({
        "entries": tensor.entries,
        "stderr": tensor.stderr,
        "eigenvalues": eigenvalues,
        "torus_side": config.torus_side,
        "ensemble": tensor.ensemble,
        "failures": tensor.failures,
        "asymmetry": tensor.asymmetry,
        "voigt_reuss": { "harmonic": bounds.harmonic, "arithmetic": bounds.arithmetic },
        "bounds_check": if bounds_ok { "pass" } else { "fail" },
        "spd_check": if spd.pass { "pass" } else { "fail" },
        "spd_margin": spd.margin,
        "symmetry_gap": spd.symmetry_gap,
    });
    Ok(StudyOutput {
        reports: vec![("effective_tensor.csv".into(), report)],
        summary: Some(summary),
        blobs: Vec::new(),
    })
}
