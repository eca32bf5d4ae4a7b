//! Flat submanifolds, their shrinking neighbourhoods `Σ_β`, sampled `L^p`
//! norms over them, `h`-sweeps and power-law fits.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::flat_quasimode::{
    Evaluator, FourierMultiplier, SampledField, SpectralCap, DEFAULT_NODE_BUDGET,
};
use crate::geometry::{Lattice, RigidMotion};
use crate::index::LebesgueIndex;
use crate::quadrature::pairwise_sum;
use crate::scale_predictor::{predict_alpha, ScaleQuery};

/// Largest admissible lattice step, in units of `h`.
pub const MAX_STEP_OVER_H: f64 = 0.25;
pub const DEFAULT_EXTENT: f64 = 0.5;

/// The plane `{z = 0}`, `x = (y, z)` with `y ∈ ℝᵏ`, placed in `ℝⁿ` by `frame`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatSubmanifold {
    pub n: usize,
    pub k: usize,
    pub frame: RigidMotion,
}

impl FlatSubmanifold {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        let s = FlatSubmanifold {
            n,
            k,
            frame: RigidMotion::identity(n),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_frame(mut self, frame: RigidMotion) -> Result<Self> {
        self.frame = frame;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.k + 1 > self.n {
            return Err(LabError::domain(format!(
                "need 1 <= k <= n-1, got n={}, k={}",
                self.n, self.k
            )));
        }
        if self.frame.dim() != self.n {
            return Err(LabError::domain(
                "submanifold frame has the wrong dimension",
            ));
        }
        self.frame.validate()
    }
}

/// A box in the submanifold's `(y, z)` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub frame: RigidMotion,
    pub half_widths: Vec<f64>,
}

impl BoxRegion {
    /// `[−1/2, 1/2]ⁿ` in the given frame.
    pub fn unit(frame: RigidMotion) -> Self {
        let n = frame.dim();
        BoxRegion {
            frame,
            half_widths: vec![DEFAULT_EXTENT; n],
        }
    }

    pub fn volume(&self) -> f64 {
        self.half_widths.iter().map(|w| 2.0 * w).product()
    }

    /// Midpoint lattice with step at most `max_step` on every axis.
    pub fn lattice(&self, max_step: f64) -> Result<Lattice> {
        if self.half_widths.iter().any(|w| !(*w > 0.0)) {
            return Err(LabError::domain("region is empty"));
        }
        let cells: Vec<usize> = self
            .half_widths
            .iter()
            .map(|w| ((2.0 * w / max_step) - 1e-9).ceil().max(1.0) as usize)
            .collect();
        let lo: Vec<f64> = self.half_widths.iter().map(|w| -w).collect();
        Lattice::midpoints(&lo, &self.half_widths, &cells)
    }
}

/// `Σ_β = {|y|_∞ ≤ extent, |z|_∞ ≤ h^β}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubularNeighborhood {
    pub submanifold: FlatSubmanifold,
    pub beta: f64,
    pub h: f64,
    pub extent: f64,
}

impl TubularNeighborhood {
    pub fn new(submanifold: FlatSubmanifold, beta: f64, h: f64) -> Result<Self> {
        let t = TubularNeighborhood {
            submanifold,
            beta,
            h,
            extent: DEFAULT_EXTENT,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        self.submanifold.validate()?;
        if !(self.h > 0.0 && self.h < 1.0) {
            return Err(LabError::domain(format!("h = {} outside (0, 1)", self.h)));
        }
        if !self.beta.is_finite() || !(self.extent > 0.0) {
            return Err(LabError::domain("region is empty"));
        }
        Ok(())
    }

    pub fn thickness(&self) -> f64 {
        self.h.powf(self.beta)
    }

    pub fn region(&self) -> BoxRegion {
        let k = self.submanifold.k;
        let n = self.submanifold.n;
        let mut half_widths = vec![self.extent; k];
        half_widths.extend(std::iter::repeat_n(self.thickness(), n - k));
        BoxRegion {
            frame: self.submanifold.frame.clone(),
            half_widths,
        }
    }

    /// A short stable identifier, e.g. `sigma_k1_b0.75`.
    pub fn id(&self) -> String {
        format!("sigma_k{}_b{}", self.submanifold.k, self.beta)
    }
}

/// Where a sampled field comes from.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSource {
    pub cap: SpectralCap,
    pub motion: Option<RigidMotion>,
    pub multiplier: FourierMultiplier,
    pub budget: usize,
}

impl FieldSource {
    pub fn new(cap: SpectralCap) -> Self {
        FieldSource {
            cap,
            motion: None,
            multiplier: FourierMultiplier::Identity,
            budget: DEFAULT_NODE_BUDGET,
        }
    }

    pub fn with_motion(mut self, motion: RigidMotion) -> Self {
        self.motion = Some(motion);
        self
    }

    pub fn with_multiplier(mut self, multiplier: FourierMultiplier) -> Self {
        self.multiplier = multiplier;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    /// Samples the field on the region's midpoint lattice. Values are indexed
    /// in region coordinates.
    pub fn sample(&self, region: &BoxRegion, grid: &GridSpec) -> Result<SampledField> {
        let step = grid.max_step(self.cap.h)?;
        let lattice = region.lattice(step)?;
        // T_M(F y) = T(M⁻¹ F y), so the lattice sees the motion F⁻¹ ∘ M
        let motion = match &self.motion {
            Some(m) => region.frame.inverse().compose(m),
            None => region.frame.inverse(),
        };
        Evaluator::new(self.cap.clone())?
            .with_budget(self.budget)
            .with_multiplier(self.multiplier)
            .evaluate_lattice(&lattice, Some(&motion))
    }
}

/// Lattice resolution: step `≤ step_over_h · h` on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub step_over_h: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            step_over_h: MAX_STEP_OVER_H,
        }
    }
}

impl GridSpec {
    pub fn max_step(&self, h: f64) -> Result<f64> {
        if !(self.step_over_h > 0.0) || self.step_over_h > MAX_STEP_OVER_H {
            return Err(LabError::resolution(format!(
                "grid step {}·h is coarser than h/4",
                self.step_over_h
            )));
        }
        Ok(self.step_over_h * h)
    }
}

/// `(Σ |v|^p · cell volume)^{1/p}`, or `max |v|` for `p = ∞`.
pub fn lp_from_samples(abs_values: &[f64], cell_volume: f64, p: LebesgueIndex) -> Result<f64> {
    if abs_values.is_empty() {
        return Err(LabError::domain("region is empty"));
    }
    match p {
        LebesgueIndex::Infinite => Ok(abs_values.iter().cloned().fold(0.0, f64::max)),
        LebesgueIndex::Finite(_) => {
            let pf = p.to_f64();
            if !(pf >= 1.0) {
                return Err(LabError::domain(format!("p = {p} below 1")));
            }
            let terms: Vec<f64> = abs_values.iter().map(|v| v.powf(pf)).collect();
            Ok((pairwise_sum(&terms) * cell_volume).powf(1.0 / pf))
        }
    }
}

pub fn field_lp(field: &SampledField, p: LebesgueIndex) -> Result<f64> {
    let abs: Vec<f64> = field.values.iter().map(|v| v.norm()).collect();
    lp_from_samples(&abs, field.grid.cell_volume(), p)
}

pub fn lp_norm(
    source: &FieldSource,
    region: &TubularNeighborhood,
    p: LebesgueIndex,
    grid: &GridSpec,
) -> Result<f64> {
    region.validate()?;
    field_lp(&source.sample(&region.region(), grid)?, p)
}

/// `sup_z ‖T(·, z)‖_{L^p_y} · (2h^β)^{(n−k)/p}`, computed on the samples of a
/// field whose lattice is laid out in `(y, z)` order.
pub fn slab_bound(field: &SampledField, k: usize, p: LebesgueIndex) -> Result<f64> {
    let grid = &field.grid;
    let n = grid.dim();
    if k < 1 || k >= n {
        return Err(LabError::domain("slab bound needs 1 <= k <= n-1"));
    }
    let z_count: usize = grid.count[k..].iter().product();
    let y_count: usize = grid.count[..k].iter().product();
    let y_cell: f64 = grid.step[..k].iter().product();
    let z_extent: f64 = grid.count[k..]
        .iter()
        .zip(&grid.step[k..])
        .map(|(&c, s)| c as f64 * s)
        .product();
    let mut sup: f64 = 0.0;
    for zi in 0..z_count {
        let slice: Vec<f64> = (0..y_count)
            .map(|yi| field.values[yi * z_count + zi].norm())
            .collect();
        sup = sup.max(lp_from_samples(&slice, y_cell, p)?);
    }
    Ok(sup * z_extent.powf(p.reciprocal_f64()))
}

/// How the cap scale is chosen for a sweep. Serialized as `"auto"` or a
/// number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AlphaRepr", into = "AlphaRepr")]
pub enum AlphaChoice {
    Auto,
    Explicit(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AlphaRepr {
    Number(f64),
    Word(String),
}

impl From<AlphaChoice> for AlphaRepr {
    fn from(a: AlphaChoice) -> Self {
        match a {
            AlphaChoice::Auto => AlphaRepr::Word("auto".into()),
            AlphaChoice::Explicit(x) => AlphaRepr::Number(x),
        }
    }
}

impl TryFrom<AlphaRepr> for AlphaChoice {
    type Error = LabError;

    fn try_from(r: AlphaRepr) -> Result<Self> {
        match r {
            AlphaRepr::Number(x) => Ok(AlphaChoice::Explicit(x)),
            AlphaRepr::Word(w) => w.parse(),
        }
    }
}

impl std::str::FromStr for AlphaChoice {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("auto") {
            return Ok(AlphaChoice::Auto);
        }
        t.parse::<f64>()
            .map(AlphaChoice::Explicit)
            .map_err(|_| LabError::domain(format!("alpha must be a number or \"auto\", got {s:?}")))
    }
}

impl AlphaChoice {
    pub fn resolve(&self, n: usize, k: usize, p: LebesgueIndex, beta: f64) -> Result<f64> {
        match *self {
            AlphaChoice::Explicit(a) => Ok(a),
            AlphaChoice::Auto => {
                Ok(predict_alpha(&ScaleQuery::new(n as u32, k as u32, p, beta))?.table_alpha)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: usize,
    pub k: usize,
    pub p: Vec<LebesgueIndex>,
    pub beta: f64,
    pub alpha: AlphaChoice,
    pub h_list: Vec<f64>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub record_timing: bool,
}

/// Dyadic list `2^{-start}, …, 2^{-(start+count-1)}`.
pub fn dyadic_h_list(start: u32, count: u32) -> Vec<f64> {
    (start..start + count)
        .map(|e| 2f64.powi(-(e as i32)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub n: usize,
    pub k: usize,
    pub p: LebesgueIndex,
    pub beta: f64,
    pub alpha: f64,
    pub h: f64,
    pub region: String,
    pub norm: f64,
    /// Fourier-side quadrature nodes.
    pub nodes: usize,
    /// Physical-side lattice samples.
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ms: Option<f64>,
}

/// Runs the sweep. Fields are computed once per `(α, h)` and reused for every
/// `p` sharing that `α`; records are ordered by `p` then `h`.
pub fn sweep(config: &SweepConfig) -> Result<Vec<ExperimentRecord>> {
    if config.h_list.len() < 3 {
        return Err(LabError::domain(format!(
            "a sweep needs at least 3 values of h, got {}",
            config.h_list.len()
        )));
    }
    if config.p.is_empty() {
        return Err(LabError::domain("a sweep needs at least one p"));
    }
    let sub = FlatSubmanifold::new(config.n, config.k)?;
    let alphas: Vec<f64> = config
        .p
        .iter()
        .map(|&p| config.alpha.resolve(config.n, config.k, p, config.beta))
        .collect::<Result<_>>()?;
    let mut distinct: Vec<f64> = Vec::new();
    for &a in &alphas {
        if !distinct.contains(&a) {
            distinct.push(a);
        }
    }
    let jobs: Vec<(f64, f64)> = distinct
        .iter()
        .flat_map(|&a| config.h_list.iter().map(move |&h| (a, h)))
        .collect();

    let measured: Vec<Result<Vec<(LebesgueIndex, ExperimentRecord)>>> = jobs
        .par_iter()
        .map(|&(alpha, h)| {
            let start = Instant::now();
            let region = TubularNeighborhood::new(sub.clone(), config.beta, h)?;
            // ω₀ = e₁ in local coordinates, so the tube's long axis is y₁
            let source = FieldSource::new(SpectralCap::new(config.n, h, alpha)?)
                .with_motion(sub.frame.clone());
            let field = source.sample(&region.region(), &config.grid)?;
            let mut out = Vec::new();
            for (&p, &a) in config.p.iter().zip(&alphas) {
                if a != alpha {
                    continue;
                }
                out.push((
                    p,
                    ExperimentRecord {
                        n: config.n,
                        k: config.k,
                        p,
                        beta: config.beta,
                        alpha,
                        h,
                        region: region.id(),
                        norm: field_lp(&field, p)?,
                        nodes: field.meta.fourier_nodes,
                        samples: field.values.len(),
                        ms: None,
                    },
                ));
            }
            if config.record_timing {
                let ms = start.elapsed().as_secs_f64() * 1e3;
                out.iter_mut().for_each(|(_, r)| r.ms = Some(ms));
            }
            Ok(out)
        })
        .collect();

    let mut all = Vec::new();
    for m in measured {
        all.extend(m?);
    }
    let mut records = Vec::new();
    for &p in &config.p {
        for &h in &config.h_list {
            if let Some((_, r)) = all.iter().find(|(q, r)| *q == p && r.h == h) {
                records.push(r.clone());
            }
        }
    }
    Ok(records)
}

/// Least-squares fit of `log(norm)` against `log(h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// `−slope`: the measured norm grows like `h^{−exponent}`.
    pub exponent: f64,
    pub max_residual: f64,
    pub points: usize,
}

pub fn fit_exponent(records: &[ExperimentRecord]) -> Result<FitResult> {
    let pairs: Vec<(f64, f64)> = records.iter().map(|r| (r.h, r.norm)).collect();
    fit_power_law(&pairs)
}

/// Fits `y ≈ e^{c} x^{slope}` to `(x, y)` pairs with positive entries.
pub fn fit_power_law(pairs: &[(f64, f64)]) -> Result<FitResult> {
    let mut xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(LabError::domain("fit needs at least 3 distinct abscissae"));
    }
    if pairs
        .iter()
        .any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(LabError::domain("fit needs positive finite data"));
    }
    let lx: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(FitResult {
        slope,
        intercept,
        exponent: -slope,
        max_residual,
        points: pairs.len(),
    })
}

pub const CSV_HEADER: &str = "n,k,p,beta,alpha,h,norm,nodes,ms";

/// Floats are written with 17 significant digits; `ms` is blank unless timing
/// was recorded.
pub fn records_to_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let ms = r.ms.map(|v| format!("{v:.3}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            r.n, r.k, r.p, r.beta, r.alpha, r.h, r.norm, r.nodes, ms
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(h: f64, norm: f64) -> ExperimentRecord {
        ExperimentRecord {
            n: 2,
            k: 1,
            p: LebesgueIndex::integer(2),
            beta: 0.5,
            alpha: 0.5,
            h,
            region: "r".into(),
            norm,
            nodes: 1,
            samples: 1,
            ms: None,
        }
    }

    #[test]
    fn exact_power_law_fits() {
        let hs = dyadic_h_list(2, 5);
        let rs: Vec<_> = hs.iter().map(|&h| rec(h, h.powf(-0.5))).collect();
        let fit = fit_exponent(&rs).unwrap();
        assert!((fit.exponent - 0.5).abs() < 1e-12);
        assert!(fit.max_residual < 1e-12);
        let rs: Vec<_> = hs.iter().map(|&h| rec(h, 3.0)).collect();
        let fit = fit_exponent(&rs).unwrap();
        assert!(fit.exponent.abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_degenerate_h() {
        let rs = vec![rec(0.1, 1.0), rec(0.1, 2.0), rec(0.05, 1.0)];
        assert!(fit_exponent(&rs).is_err());
        assert!(fit_exponent(&[rec(0.1, 1.0), rec(0.05, 0.0), rec(0.01, 1.0)]).is_err());
    }

    #[test]
    fn constant_field_norm_is_volume_power() {
        let vals = vec![1.0; 400];
        let cell = 0.25 / 400.0;
        for p in [1i64, 2, 3, 7] {
            let got = lp_from_samples(&vals, cell, LebesgueIndex::integer(p)).unwrap();
            assert!((got - 0.25f64.powf(1.0 / p as f64)).abs() < 1e-14);
        }
        assert_eq!(
            lp_from_samples(&vals, cell, LebesgueIndex::Infinite).unwrap(),
            1.0
        );
        assert!(lp_from_samples(&[], 1.0, LebesgueIndex::Infinite).is_err());
    }

    #[test]
    fn region_boxes() {
        let sub = FlatSubmanifold::new(3, 2).unwrap();
        let t = TubularNeighborhood::new(sub, 0.5, 0.01).unwrap();
        assert_eq!(t.region().half_widths, vec![0.5, 0.5, 0.1]);
        assert!((t.region().volume() - 0.2).abs() < 1e-15);
        assert!(FlatSubmanifold::new(2, 2).is_err());
        assert!(FlatSubmanifold::new(2, 0).is_err());
        let l = t.region().lattice(0.0025).unwrap();
        assert_eq!(l.count, vec![400, 400, 80]);
    }

    #[test]
    fn coarse_grid_is_a_resolution_error() {
        let g = GridSpec { step_over_h: 0.5 };
        assert!(matches!(g.max_step(0.1), Err(LabError::Resolution(_))));
    }

    #[test]
    fn sweep_needs_three_h() {
        let cfg = SweepConfig {
            n: 2,
            k: 1,
            p: vec![LebesgueIndex::integer(2)],
            beta: 0.75,
            alpha: AlphaChoice::Auto,
            h_list: vec![0.1, 0.05],
            grid: GridSpec::default(),
            record_timing: false,
        };
        assert!(matches!(sweep(&cfg), Err(LabError::Domain(_))));
    }

    #[test]
    fn auto_alpha_examples() {
        let a = AlphaChoice::Auto
            .resolve(2, 1, LebesgueIndex::integer(2), 0.75)
            .unwrap();
        assert_eq!(a, 0.5);
        let a = AlphaChoice::Auto
            .resolve(2, 1, LebesgueIndex::Infinite, 0.75)
            .unwrap();
        assert_eq!(a, 0.0);
        assert_eq!(
            serde_json::to_string(&AlphaChoice::Auto).unwrap(),
            "\"auto\""
        );
        assert_eq!(
            serde_json::from_str::<AlphaChoice>("0.25").unwrap(),
            AlphaChoice::Explicit(0.25)
        );
        assert!(serde_json::from_str::<AlphaChoice>("\"sometimes\"").is_err());
    }

    #[test]
    fn small_sweep_shares_metadata() {
        let cfg = SweepConfig {
            n: 2,
            k: 1,
            p: vec![LebesgueIndex::integer(2), LebesgueIndex::Infinite],
            beta: 0.75,
            alpha: AlphaChoice::Explicit(0.25),
            h_list: dyadic_h_list(3, 3),
            grid: GridSpec::default(),
            record_timing: false,
        };
        let rs = sweep(&cfg).unwrap();
        assert_eq!(rs.len(), 6);
        for r in &rs {
            assert_eq!((r.n, r.k, r.beta, r.alpha), (2, 1, 0.75, 0.25));
            assert!(r.norm > 0.0 && r.ms.is_none());
        }
        let csv = records_to_csv(&rs);
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 7);
    }
}
