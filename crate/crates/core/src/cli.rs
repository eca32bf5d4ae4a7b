//! Command-line front end: `exponents`, `predict`, `quasimode`, `scaling`,
//! `sphere`.
//!
//! Every command reads an optional JSON config, applies flag overrides, and
//! emits a JSON report (plus CSV or binary side files when `--out` names a
//! directory). Reports embed the resolved config and a format version.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exponents::{breakpoints, delta, sigma, ExponentResult};
use crate::flat_quasimode::{
    defect_bound, verify_tube_bound, Evaluator, FourierMultiplier, SpectralCap, TubeCheck,
    DEFAULT_NODE_BUDGET, DEFAULT_TUBE_EPS,
};
use crate::geometry::{Lattice, RigidMotion};
use crate::index::LebesgueIndex;
use crate::region_norms::{
    dyadic_h_list, fit_exponent, records_to_csv, sweep, AlphaChoice, BoxRegion, ExperimentRecord,
    FieldSource, FitResult, GridSpec, SweepConfig,
};
use crate::scale_predictor::{
    exponent_curve, predict_alpha, Prediction, ScaleQuery, DEFAULT_ALPHA_STEP,
};
use crate::sphere_harmonics::{
    build_u1, build_un, concentration_check, l2_norm, laplacian_residual, pair_correlation,
    u1_norm_squared_exact, ConcentrationReport, HarmonicSum, SphereGrid, DEFAULT_EPSILON,
    HARMONICITY_TOLERANCE,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "quasimode-lab",
    version,
    about = "Quasimode and L^p growth-exponent experiments"
)]
pub struct Cli {
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Closed-form exponents delta and sigma
    Exponents(Overrides),
    /// Optimal concentration scale and the E(alpha) curve
    Predict(Overrides),
    /// Sample a flat quasimode and verify its defect and tube bounds
    Quasimode(Overrides),
    /// h-sweep of L^p norms over shrinking neighbourhoods with a power-law fit
    Scaling(Overrides),
    /// Build a sum of rotated harmonics on the sphere and verify it
    Sphere(Overrides),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    /// JSON config file; flags below override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Lebesgue exponent(s), comma separated; `inf` for infinity
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<LebesgueIndex>>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// A number, or `auto` where the command supports it
    #[arg(long)]
    pub alpha: Option<AlphaChoice>,
    #[arg(long)]
    pub j: Option<u32>,
    /// h = 2^-h_start (first value of a dyadic list)
    #[arg(long)]
    pub h_start: Option<u32>,
    #[arg(long)]
    pub h_count: Option<u32>,
    /// Output directory; without it the report goes to stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn not_applicable(flag: &str, command: &str) -> LabError {
    LabError::domain(format!("option --{flag} does not apply to `{command}`"))
}

fn explicit_alpha(a: AlphaChoice, command: &str) -> Result<f64> {
    match a {
        AlphaChoice::Explicit(x) => Ok(x),
        AlphaChoice::Auto => Err(LabError::domain(format!(
            "`{command}` needs a numeric alpha"
        ))),
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => Ok(T::default()),
    }
}

/// One pass/fail line of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Verification {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Verification {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }

    /// Strictly above `0`.
    fn positive(name: &str, value: f64) -> Self {
        Verification {
            name: name.into(),
            value,
            tolerance: 0.0,
            passed: value > 0.0,
        }
    }
}

#[derive(Debug, Serialize)]
struct Report<'a, C: Serialize, R: Serialize> {
    format: String,
    version: u32,
    tool_version: &'a str,
    config: &'a C,
    results: &'a R,
    verifications: &'a [Verification],
    passed: bool,
}

fn report_json<C: Serialize, R: Serialize>(
    command: &str,
    config: &C,
    results: &R,
    verifications: &[Verification],
) -> Result<String> {
    let report = Report {
        format: format!("quasimode-lab/{command}"),
        version: FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        config,
        results,
        verifications,
        passed: verifications.iter().all(|v| v.passed),
    };
    let mut s = serde_json::to_string_pretty(&report)?;
    s.push('\n');
    Ok(s)
}

/// `# format` and `# config` comment lines ahead of a CSV table.
fn csv_preamble<C: Serialize>(command: &str, config: &C) -> Result<String> {
    Ok(format!(
        "# quasimode-lab/{command} version {FORMAT_VERSION}\n# config: {}\n",
        serde_json::to_string(config)?
    ))
}

/// Files a command wants written, all produced before anything touches disk.
struct Outputs {
    report_name: String,
    report: String,
    side_files: Vec<(String, Vec<u8>)>,
    verifications: Vec<Verification>,
}

impl Outputs {
    fn emit(self, out: Option<&Path>) -> Result<()> {
        match out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                fs::write(dir.join(&self.report_name), &self.report)?;
                for (name, bytes) in &self.side_files {
                    fs::write(dir.join(name), bytes)?;
                }
            }
            None => print!("{}", self.report),
        }
        let failed: Vec<String> = self
            .verifications
            .iter()
            .filter(|v| !v.passed)
            .map(|v| format!("{} = {} (tolerance {})", v.name, v.value, v.tolerance))
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(LabError::Verification(failed.join("; ")))
        }
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

// ---------------------------------------------------------------- exponents

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentsConfig {
    pub n: u32,
    /// Defaults to `n` (whole manifold).
    pub k: Option<u32>,
    pub p: Vec<LebesgueIndex>,
    pub beta: Option<f64>,
}

impl Default for ExponentsConfig {
    fn default() -> Self {
        ExponentsConfig {
            n: 3,
            k: None,
            p: vec![
                LebesgueIndex::integer(2),
                LebesgueIndex::integer(4),
                LebesgueIndex::Infinite,
            ],
            beta: None,
        }
    }
}

impl ExponentsConfig {
    fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(n) = o.n {
            self.n = n as u32;
        }
        if let Some(k) = o.k {
            self.k = Some(k as u32);
        }
        if let Some(p) = &o.p {
            self.p = p.clone();
        }
        if let Some(b) = o.beta {
            self.beta = Some(b);
        }
        for (set, flag) in [
            (o.alpha.is_some(), "alpha"),
            (o.j.is_some(), "j"),
            (o.h_start.is_some(), "h-start"),
            (o.h_count.is_some(), "h-count"),
        ] {
            if set {
                return Err(not_applicable(flag, "exponents"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct ExponentRow {
    pub n: u32,
    pub k: u32,
    pub p: LebesgueIndex,
    pub delta: ExponentResult,
    pub sigma: Option<ExponentResult>,
}

#[derive(Debug, Serialize)]
struct ExponentsResults {
    p_stz: LebesgueIndex,
    p_hyp: LebesgueIndex,
    rows: Vec<ExponentRow>,
}

pub fn exponent_rows(cfg: &ExponentsConfig) -> Result<Vec<ExponentRow>> {
    let k = cfg.k.unwrap_or(cfg.n);
    if cfg.p.is_empty() {
        return Err(LabError::domain("at least one p is required"));
    }
    cfg.p
        .iter()
        .map(|&p| {
            let sigma = match cfg.beta {
                Some(b) if k < cfg.n => Some(sigma(cfg.n, k, p, b)?),
                Some(_) => return Err(LabError::domain("beta needs k < n")),
                None => None,
            };
            Ok(ExponentRow {
                n: cfg.n,
                k,
                p,
                delta: delta(cfg.n, k, p)?,
                sigma,
            })
        })
        .collect()
}

fn run_exponents(o: &Overrides) -> Result<Outputs> {
    let mut cfg: ExponentsConfig = load_config(o.config.as_deref())?;
    cfg.apply(o)?;
    let bp = breakpoints(cfg.n)?;
    let rows = exponent_rows(&cfg)?;
    let mut csv = csv_preamble("exponents", &cfg)?;
    csv.push_str("n,k,p,delta,delta_exact,delta_regime,log_loss,sigma,sigma_exact,sigma_regime\n");
    for r in &rows {
        let (s, se, sr) = match &r.sigma {
            Some(s) => (
                fmt_f(s.exponent),
                s.exact.to_string(),
                serde_json::to_value(s.regime)?
                    .as_str()
                    .unwrap_or("")
                    .to_string(),
            ),
            None => Default::default(),
        };
        let dr = serde_json::to_value(r.delta.regime)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.k,
            r.p,
            fmt_f(r.delta.exponent),
            r.delta.exact,
            dr.as_str().unwrap_or(""),
            r.delta.log_loss || r.sigma.as_ref().is_some_and(|s| s.log_loss),
            s,
            se,
            sr
        );
    }
    let results = ExponentsResults {
        p_stz: bp.p_stz,
        p_hyp: bp.p_hyp,
        rows,
    };
    Ok(Outputs {
        report_name: "exponents.json".into(),
        report: report_json("exponents", &cfg, &results, &[])?,
        side_files: vec![("exponents.csv".into(), csv.into_bytes())],
        verifications: vec![],
    })
}

// ---------------------------------------------------------------- predict

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    pub n: u32,
    pub k: u32,
    pub p: Vec<LebesgueIndex>,
    pub beta: f64,
    pub alpha_step: f64,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            n: 2,
            k: 1,
            p: vec![LebesgueIndex::integer(2)],
            beta: 0.75,
            alpha_step: DEFAULT_ALPHA_STEP,
        }
    }
}

impl PredictConfig {
    fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(n) = o.n {
            self.n = n as u32;
        }
        if let Some(k) = o.k {
            self.k = k as u32;
        }
        if let Some(p) = &o.p {
            self.p = p.clone();
        }
        if let Some(b) = o.beta {
            self.beta = b;
        }
        for (set, flag) in [
            (o.alpha.is_some(), "alpha"),
            (o.j.is_some(), "j"),
            (o.h_start.is_some(), "h-start"),
            (o.h_count.is_some(), "h-count"),
        ] {
            if set {
                return Err(not_applicable(flag, "predict"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct PredictRow {
    p: LebesgueIndex,
    prediction: Prediction,
    sigma: f64,
}

fn run_predict(o: &Overrides) -> Result<Outputs> {
    let mut cfg: PredictConfig = load_config(o.config.as_deref())?;
    cfg.apply(o)?;
    if cfg.p.is_empty() {
        return Err(LabError::domain("at least one p is required"));
    }
    let mut rows = Vec::new();
    let mut csv = csv_preamble("predict", &cfg)?;
    csv.push_str("p,alpha,exponent\n");
    let mut verifications = Vec::new();
    for &p in &cfg.p {
        let query = ScaleQuery {
            n: cfg.n,
            k: cfg.k,
            p,
            beta: cfg.beta,
            alpha_step: cfg.alpha_step,
        };
        let prediction = predict_alpha(&query)?;
        let s = sigma(cfg.n, cfg.k, p, cfg.beta)?.exponent;
        for pt in exponent_curve(&query)? {
            let _ = writeln!(csv, "{},{},{}", p, fmt_f(pt.alpha), fmt_f(pt.exponent));
        }
        verifications.push(Verification::at_most(
            &format!("|max E - sigma| at p={p}"),
            (prediction.exponent_at_max - s).abs(),
            1e-3,
        ));
        rows.push(PredictRow {
            p,
            prediction,
            sigma: s,
        });
    }
    Ok(Outputs {
        report_name: "predict.json".into(),
        report: report_json("predict", &cfg, &rows, &verifications)?,
        side_files: vec![("predict_curve.csv".into(), csv.into_bytes())],
        verifications,
    })
}

// ---------------------------------------------------------------- quasimode

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldFormat {
    #[default]
    Binary,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuasimodeConfig {
    pub n: usize,
    pub h: f64,
    pub alpha: f64,
    pub omega0: Option<Vec<f64>>,
    pub epsilon_cap: f64,
    pub motion: Option<RigidMotion>,
    /// Sampling lattice; defaults to the cube of half-width `grid_extent` at
    /// step `h/4`.
    pub grid: Option<Lattice>,
    pub grid_extent: f64,
    pub tube_eps: f64,
    pub tube_samples: usize,
    /// Half-width of the box used for the physical-side defect check.
    /// Unset means `0.5` for `n = 2` and no check for `n = 3`; `0` disables it.
    pub defect_extent: Option<f64>,
    pub node_budget: usize,
    pub field_format: FieldFormat,
}

impl Default for QuasimodeConfig {
    fn default() -> Self {
        QuasimodeConfig {
            n: 2,
            h: 2f64.powi(-6),
            alpha: 0.25,
            omega0: None,
            epsilon_cap: 1.0,
            motion: None,
            grid: None,
            grid_extent: 0.25,
            tube_eps: DEFAULT_TUBE_EPS,
            tube_samples: 5,
            defect_extent: None,
            node_budget: DEFAULT_NODE_BUDGET,
            field_format: FieldFormat::Binary,
        }
    }
}

impl QuasimodeConfig {
    fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(n) = o.n {
            self.n = n;
        }
        if let Some(a) = o.alpha {
            self.alpha = explicit_alpha(a, "quasimode")?;
        }
        if let Some(e) = o.h_start {
            self.h = 2f64.powi(-(e as i32));
        }
        for (set, flag) in [
            (o.k.is_some(), "k"),
            (o.p.is_some(), "p"),
            (o.beta.is_some(), "beta"),
            (o.j.is_some(), "j"),
            (o.h_count.is_some(), "h-count"),
        ] {
            if set {
                return Err(not_applicable(flag, "quasimode"));
            }
        }
        Ok(())
    }

    pub fn cap(&self) -> Result<SpectralCap> {
        let mut cap =
            SpectralCap::new(self.n, self.h, self.alpha)?.with_epsilon(self.epsilon_cap)?;
        if let Some(w) = &self.omega0 {
            cap = cap.with_direction(w.clone())?;
        }
        Ok(cap)
    }
}

#[derive(Debug, Serialize)]
struct QuasimodeResults {
    cap: SpectralCap,
    amplitude: f64,
    l2_norm_squared: f64,
    origin_exact: f64,
    origin_quadrature: [f64; 2],
    defect_bound: f64,
    tube: TubeCheck,
    physical_defect_ratio: Option<f64>,
    grid: Lattice,
    fourier_nodes: usize,
    sampled_l2: f64,
    field_file: Option<String>,
}

fn run_quasimode(o: &Overrides) -> Result<Outputs> {
    let mut cfg: QuasimodeConfig = load_config(o.config.as_deref())?;
    cfg.apply(o)?;
    let cap = cfg.cap()?;
    let h = cap.h;
    if !(cfg.tube_eps > 0.0 && cfg.tube_eps <= DEFAULT_TUBE_EPS) {
        return Err(LabError::domain(format!(
            "tube_eps = {} must lie in (0, 0.1]",
            cfg.tube_eps
        )));
    }
    let evaluator = Evaluator::new(cap.clone())?.with_budget(cfg.node_budget);
    let grid = match &cfg.grid {
        Some(g) => g.clone(),
        None => {
            let e = cfg.grid_extent;
            BoxRegion {
                frame: RigidMotion::identity(cfg.n),
                half_widths: vec![e; cfg.n],
            }
            .lattice(h / 4.0)?
        }
    };
    let field = evaluator.evaluate_lattice(&grid, cfg.motion.as_ref())?;
    let origin = evaluator.evaluate(&[vec![0.0; cfg.n]], None)?[0];
    let origin_exact = cap.value_at_origin();
    let tube = verify_tube_bound(&cap, cfg.tube_eps, cfg.tube_samples)?;
    let defect = defect_bound(&cap);

    let extent = cfg
        .defect_extent
        .unwrap_or(if cfg.n == 2 { 0.5 } else { 0.0 });
    let physical_defect_ratio = match extent {
        e if e > 0.0 => {
            let region = BoxRegion {
                frame: RigidMotion::identity(cfg.n),
                half_widths: vec![e; cfg.n],
            };
            let plain = FieldSource::new(cap.clone()).with_budget(cfg.node_budget);
            let base = plain.sample(&region, &GridSpec::default())?;
            let applied = plain
                .with_multiplier(FourierMultiplier::Defect)
                .sample(&region, &GridSpec::default())?;
            Some(applied.sampled_l2() / base.sampled_l2())
        }
        _ => None,
    };

    let mut verifications = vec![
        Verification::at_most(
            "origin relative error",
            (origin.re / origin_exact - 1.0).abs(),
            1e-6,
        ),
        Verification::at_most(
            "defect bound minus (2h + h^2)",
            (defect - (2.0 * h + h * h)).abs(),
            1e-15,
        ),
        Verification::positive("tube constant", tube.constant),
    ];
    if let Some(r) = physical_defect_ratio {
        verifications.push(Verification::at_most(
            "physical defect ratio over h",
            r / h,
            3.0,
        ));
    }

    let (name, bytes) = match cfg.field_format {
        FieldFormat::Binary => {
            let mut buf = Vec::new();
            field.write_binary(BufWriter::new(&mut buf))?;
            ("field.bin", buf)
        }
        FieldFormat::Json => ("field.json", field.to_json()?.into_bytes()),
    };
    let results = QuasimodeResults {
        amplitude: cap.amplitude(),
        l2_norm_squared: cap.l2_norm_squared(),
        origin_exact,
        origin_quadrature: [origin.re, origin.im],
        defect_bound: defect,
        tube,
        physical_defect_ratio,
        grid: field.grid.clone(),
        fourier_nodes: field.meta.fourier_nodes,
        sampled_l2: field.sampled_l2(),
        field_file: o.out.as_ref().map(|_| name.to_string()),
        cap,
    };
    Ok(Outputs {
        report_name: "quasimode.json".into(),
        report: report_json("quasimode", &cfg, &results, &verifications)?,
        side_files: vec![(name.into(), bytes)],
        verifications,
    })
}

// ---------------------------------------------------------------- scaling

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    pub n: usize,
    pub k: usize,
    pub p: Vec<LebesgueIndex>,
    pub beta: f64,
    pub alpha: AlphaChoice,
    pub h_start: u32,
    pub h_count: u32,
    pub grid: GridSpec,
    pub record_timing: bool,
    /// Allowed `|fitted exponent − σ|`.
    pub tolerance: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            n: 2,
            k: 1,
            p: vec![
                LebesgueIndex::integer(2),
                LebesgueIndex::integer(4),
                LebesgueIndex::integer(8),
                LebesgueIndex::Infinite,
            ],
            beta: 0.75,
            alpha: AlphaChoice::Auto,
            h_start: 4,
            h_count: 6,
            grid: GridSpec::default(),
            record_timing: false,
            tolerance: 0.15,
        }
    }
}

impl ScalingConfig {
    fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(n) = o.n {
            self.n = n;
        }
        if let Some(k) = o.k {
            self.k = k;
        }
        if let Some(p) = &o.p {
            self.p = p.clone();
        }
        if let Some(b) = o.beta {
            self.beta = b;
        }
        if let Some(a) = o.alpha {
            self.alpha = a;
        }
        if let Some(s) = o.h_start {
            self.h_start = s;
        }
        if let Some(c) = o.h_count {
            self.h_count = c;
        }
        if o.j.is_some() {
            return Err(not_applicable("j", "scaling"));
        }
        Ok(())
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            n: self.n,
            k: self.k,
            p: self.p.clone(),
            beta: self.beta,
            alpha: self.alpha,
            h_list: dyadic_h_list(self.h_start, self.h_count),
            grid: self.grid,
            record_timing: self.record_timing,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ScalingFit {
    pub p: LebesgueIndex,
    pub alpha: f64,
    pub fit: FitResult,
    pub sigma: f64,
    pub deviation: f64,
}

#[derive(Debug, Serialize)]
struct ScalingResults {
    records: Vec<ExperimentRecord>,
    fits: Vec<ScalingFit>,
}

pub fn scaling_fits(cfg: &ScalingConfig, records: &[ExperimentRecord]) -> Result<Vec<ScalingFit>> {
    cfg.p
        .iter()
        .map(|&p| {
            let group: Vec<ExperimentRecord> =
                records.iter().filter(|r| r.p == p).cloned().collect();
            let fit = fit_exponent(&group)?;
            let s = sigma(cfg.n as u32, cfg.k as u32, p, cfg.beta)?.exponent;
            Ok(ScalingFit {
                p,
                alpha: group[0].alpha,
                fit,
                sigma: s,
                deviation: fit.exponent - s,
            })
        })
        .collect()
}

fn run_scaling(o: &Overrides) -> Result<Outputs> {
    let mut cfg: ScalingConfig = load_config(o.config.as_deref())?;
    cfg.apply(o)?;
    let records = sweep(&cfg.sweep_config())?;
    let fits = scaling_fits(&cfg, &records)?;
    let verifications: Vec<Verification> = fits
        .iter()
        .map(|f| {
            Verification::at_most(
                &format!("|fit - sigma| at p={}", f.p),
                f.deviation.abs(),
                cfg.tolerance,
            )
        })
        .collect();
    let mut csv = csv_preamble("scaling", &cfg)?;
    csv.push_str(&records_to_csv(&records));
    let results = ScalingResults { records, fits };
    Ok(Outputs {
        report_name: "scaling.json".into(),
        report: report_json("scaling", &cfg, &results, &verifications)?,
        side_files: vec![("scaling.csv".into(), csv.into_bytes())],
        verifications,
    })
}

// ---------------------------------------------------------------- sphere

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SphereConfig {
    pub n: usize,
    pub j: u32,
    pub alpha: f64,
    pub epsilon: f64,
    pub nodes_per_h: f64,
    pub eps_region: f64,
    pub concentration_samples: usize,
    /// Rotation offsets `|s − s′| = 1, …, pair_max` for the decay fit, cut
    /// off where `h·s² > 1`; `0` skips it.
    pub pair_max: u32,
    /// Points for the finite-difference Laplacian check (run only for
    /// `j ≤ fd_max_j`).
    pub fd_points: usize,
    pub fd_max_j: u32,
    pub seed: u64,
}

impl Default for SphereConfig {
    fn default() -> Self {
        SphereConfig {
            n: 2,
            j: 200,
            alpha: 0.3,
            epsilon: DEFAULT_EPSILON,
            nodes_per_h: 4.0,
            eps_region: 0.1,
            concentration_samples: 5,
            pair_max: 10,
            fd_points: 100,
            fd_max_j: 20,
            seed: 7,
        }
    }
}

impl SphereConfig {
    fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(n) = o.n {
            self.n = n;
        }
        if let Some(j) = o.j {
            self.j = j;
        }
        if let Some(a) = o.alpha {
            self.alpha = explicit_alpha(a, "sphere")?;
        }
        for (set, flag) in [
            (o.k.is_some(), "k"),
            (o.p.is_some(), "p"),
            (o.beta.is_some(), "beta"),
            (o.h_start.is_some(), "h-start"),
            (o.h_count.is_some(), "h-count"),
        ] {
            if set {
                return Err(not_applicable(flag, "sphere"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct PairPoint {
    pub separation: u32,
    pub correlation: f64,
    /// `correlation / ‖u‖²`.
    pub relative: f64,
}

#[derive(Debug, Serialize)]
pub struct SphereResults {
    pub h: f64,
    pub terms: usize,
    pub max_harmonicity_residual: f64,
    pub l2_norm_u1: f64,
    pub l2_norm_u1_exact: Option<f64>,
    pub l2_norm_un: f64,
    pub concentration: ConcentrationReport,
    pub pairs: Vec<PairPoint>,
    pub pair_fit: Option<FitResult>,
    pub laplacian_residual: Option<f64>,
}

/// All sphere measurements for a config, with their verification lines.
pub fn sphere_measurements(
    cfg: &SphereConfig,
) -> Result<(HarmonicSum, SphereResults, Vec<Verification>)> {
    if !(0.0..=0.5).contains(&cfg.alpha) {
        return Err(LabError::domain(format!(
            "alpha = {} outside [0, 1/2]",
            cfg.alpha
        )));
    }
    let grid = SphereGrid {
        nodes_per_h: cfg.nodes_per_h,
    };
    let un = build_un(cfg.n, cfg.j, cfg.alpha, cfg.epsilon)?;
    let u1 = build_u1(cfg.n, cfg.j)?;
    let l2_u1 = l2_norm(&u1, &grid)?;
    let l2_u1_exact = if cfg.n == 2 {
        Some(u1_norm_squared_exact(2, cfg.j)?.sqrt())
    } else {
        None
    };
    let l2_un = l2_norm(&un, &grid)?;
    let concentration = concentration_check(&un, cfg.eps_region, cfg.concentration_samples)?;

    // decay between rotated copies of the last-but-one stage
    let mut base = u1.clone().with_epsilon(cfg.epsilon);
    while base.k + 1 < cfg.n {
        base = crate::sphere_harmonics::extend(&base, cfg.alpha)?;
    }
    let base_sq = l2_norm(&base, &grid)?.powi(2);
    let pairs: Vec<PairPoint> = (1..=cfg.pair_max)
        .take_while(|&d| base.h * (d as f64).powi(2) <= 1.0)
        .map(|d| {
            let c = pair_correlation(&base, 0, d, cfg.n, &grid)?;
            Ok(PairPoint {
                separation: d,
                correlation: c,
                relative: c / base_sq,
            })
        })
        .collect::<Result<_>>()?;
    let pair_fit = if pairs.len() >= 3 {
        let pts: Vec<(f64, f64)> = pairs
            .iter()
            .map(|p| (p.separation as f64, p.relative))
            .collect();
        Some(crate::region_norms::fit_power_law(&pts)?)
    } else {
        None
    };

    let laplacian = if cfg.j <= cfg.fd_max_j && cfg.fd_points > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let pts: Vec<Vec<f64>> = (0..cfg.fd_points)
            .map(|_| loop {
                let v: Vec<f64> = (0..=cfg.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let r = crate::geometry::norm(&v);
                if r > 0.1 && r <= 1.0 {
                    break v.iter().map(|x| x / r).collect();
                }
            })
            .collect();
        Some(laplacian_residual(&un, &pts, 1e-4)?)
    } else {
        None
    };

    let mut verifications = vec![Verification::at_most(
        "max harmonicity residual",
        un.max_harmonicity_residual(),
        HARMONICITY_TOLERANCE,
    )];
    if let Some(exact) = l2_u1_exact {
        verifications.push(Verification::at_most(
            "u1 norm relative error",
            (l2_u1 / exact - 1.0).abs(),
            1e-4,
        ));
    }
    verifications.push(Verification::positive(
        "concentration constant",
        concentration.constant,
    ));
    if let Some(f) = &pair_fit {
        verifications.push(Verification::at_most(
            "pair correlation decay slope",
            f.slope,
            -1.5,
        ));
    }
    if let Some(r) = laplacian {
        verifications.push(Verification::at_most(
            "finite-difference Laplacian residual",
            r,
            1e-3,
        ));
    }
    let results = SphereResults {
        h: un.h,
        terms: un.terms.len(),
        max_harmonicity_residual: un.max_harmonicity_residual(),
        l2_norm_u1: l2_u1,
        l2_norm_u1_exact: l2_u1_exact,
        l2_norm_un: l2_un,
        concentration,
        pairs,
        pair_fit,
        laplacian_residual: laplacian,
    };
    Ok((un, results, verifications))
}

#[derive(Serialize)]
struct HarmonicSumFile<'a> {
    format: &'a str,
    version: u32,
    config: &'a SphereConfig,
    #[serde(flatten)]
    sum: &'a HarmonicSum,
}

fn run_sphere(o: &Overrides) -> Result<Outputs> {
    let mut cfg: SphereConfig = load_config(o.config.as_deref())?;
    cfg.apply(o)?;
    let (un, results, verifications) = sphere_measurements(&cfg)?;
    let mut sum_json = serde_json::to_string_pretty(&HarmonicSumFile {
        format: "quasimode-lab/harmonic-sum",
        version: FORMAT_VERSION,
        config: &cfg,
        sum: &un,
    })?;
    sum_json.push('\n');
    Ok(Outputs {
        report_name: "sphere.json".into(),
        report: report_json("sphere", &cfg, &results, &verifications)?,
        side_files: vec![("harmonic_sum.json".into(), sum_json.into_bytes())],
        verifications,
    })
}

// ---------------------------------------------------------------- entry

pub fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(LabError::domain("--threads must be positive"));
        }
        // a second initialisation in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    let (outputs, out) = match &cli.command {
        Command::Exponents(o) => (run_exponents(o)?, o.out.clone()),
        Command::Predict(o) => (run_predict(o)?, o.out.clone()),
        Command::Quasimode(o) => (run_quasimode(o)?, o.out.clone()),
        Command::Scaling(o) => (run_scaling(o)?, o.out.clone()),
        Command::Sphere(o) => (run_sphere(o)?, o.out.clone()),
    };
    outputs.emit(out.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("quasimode-lab").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn parses_overrides() {
        let cli = parse(&[
            "--threads",
            "2",
            "scaling",
            "--p",
            "2,inf",
            "--alpha",
            "auto",
            "--h-start",
            "5",
        ]);
        assert_eq!(cli.threads, Some(2));
        match cli.command {
            Command::Scaling(o) => {
                assert_eq!(
                    o.p,
                    Some(vec![LebesgueIndex::integer(2), LebesgueIndex::Infinite])
                );
                assert_eq!(o.alpha, Some(AlphaChoice::Auto));
                assert_eq!(o.h_start, Some(5));
            }
            other => panic!("wrong command {other:?}"),
        }
    }

    #[test]
    fn exponent_single_query() {
        let cfg = ExponentsConfig {
            n: 3,
            k: Some(2),
            p: vec![LebesgueIndex::integer(2)],
            beta: Some(0.75),
        };
        let rows = exponent_rows(&cfg).unwrap();
        assert_eq!(rows[0].sigma.unwrap().exponent, -0.125);
        let whole = ExponentsConfig {
            n: 3,
            k: None,
            p: vec![LebesgueIndex::integer(2)],
            beta: None,
        };
        let rows = exponent_rows(&whole).unwrap();
        assert!(rows[0].sigma.is_none());
    }

    #[test]
    fn inapplicable_flag_is_a_domain_error() {
        let o = Overrides {
            j: Some(3),
            ..Default::default()
        };
        assert!(matches!(run_exponents(&o), Err(LabError::Domain(_))));
    }

    #[test]
    fn predict_rejects_negative_beta() {
        let o = Overrides {
            beta: Some(-0.1),
            ..Default::default()
        };
        assert_eq!(run_predict(&o).err().map(|e| e.exit_code()), Some(2));
    }

    #[test]
    fn sphere_rejects_large_alpha() {
        let o = Overrides {
            alpha: Some(AlphaChoice::Explicit(0.6)),
            ..Default::default()
        };
        assert_eq!(run_sphere(&o).err().map(|e| e.exit_code()), Some(2));
    }

    #[test]
    fn scaling_needs_three_h() {
        let o = Overrides {
            h_count: Some(2),
            ..Default::default()
        };
        assert_eq!(run_scaling(&o).err().map(|e| e.exit_code()), Some(2));
    }

    #[test]
    fn config_files_reject_unknown_fields() {
        assert!(serde_json::from_str::<ScalingConfig>(r#"{"betta": 0.5}"#).is_err());
        let c: ScalingConfig =
            serde_json::from_str(r#"{"p": ["2", "inf"], "alpha": 0.25}"#).unwrap();
        assert_eq!(c.alpha, AlphaChoice::Explicit(0.25));
        assert_eq!(c.beta, 0.75);
    }
}
