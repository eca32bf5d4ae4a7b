//! Which concentration scale is sharp.
//!
//! A flat-model quasimode `T_α` is of size `h^{-(n-1)(1-α)/2}` on an
//! `h^{1-2α} × (h^{1-α})^{n-1}` tube. Aligning the long axis with the
//! submanifold and intersecting with `Σ_β` gives a lower bound
//! `‖T_α‖_{L^p(Σ_β)} ≳ h^{-E(α)}`; maximizing `E` over `α ∈ [0, 1/2]`
//! predicts both the sharp exponent and the sharp example. The closed-form
//! case table (point, tube, or `T_{1-β}`) is kept as an independent
//! cross-check of the optimizer.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exponents::{breakpoints, clamp_beta, sigma};
use crate::index::LebesgueIndex;

pub const DEFAULT_ALPHA_STEP: f64 = 1.0 / 1024.0;
/// Width of the band below the maximum that still counts as a maximizer.
pub const ARGMAX_TOLERANCE: f64 = 1e-9;

/// `E(α) = (n−1)(1−α)/2 − [(1−2α) + (1−α)(k−1) + (n−k)·max(1−α, β)] / p`.
///
/// `beta` is clamped into `[1/2, 1]` first.
pub fn tube_exponent(n: u32, k: u32, p: LebesgueIndex, beta: f64, alpha: f64) -> Result<f64> {
    if n < 2 || k == 0 || k >= n {
        return Err(LabError::domain(format!(
            "tube exponent needs 1 <= k < n, got n={n} k={k}"
        )));
    }
    p.require_at_least_two()?;
    if !(0.0..=0.5).contains(&alpha) {
        return Err(LabError::domain(format!(
            "alpha = {alpha} outside [0, 1/2]"
        )));
    }
    let (beta, _) = clamp_beta(beta)?;
    Ok(tube_exponent_unchecked(
        n,
        k,
        p.reciprocal_f64(),
        beta,
        alpha,
    ))
}

fn tube_exponent_unchecked(n: u32, k: u32, inv_p: f64, beta: f64, alpha: f64) -> f64 {
    let (n, k) = (n as f64, k as f64);
    let amplitude = (n - 1.0) * (1.0 - alpha) / 2.0;
    let volume =
        (1.0 - 2.0 * alpha) + (1.0 - alpha) * (k - 1.0) + (n - k) * (1.0 - alpha).max(beta);
    amplitude - volume * inv_p
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleQuery {
    pub n: u32,
    pub k: u32,
    pub p: LebesgueIndex,
    pub beta: f64,
    #[serde(default = "default_step")]
    pub alpha_step: f64,
}

fn default_step() -> f64 {
    DEFAULT_ALPHA_STEP
}

impl ScaleQuery {
    pub fn new(n: u32, k: u32, p: LebesgueIndex, beta: f64) -> Self {
        ScaleQuery {
            n,
            k,
            p,
            beta,
            alpha_step: DEFAULT_ALPHA_STEP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseLabel {
    T0Point,
    ThalfTube,
    TOneMinusBeta,
    AllScalesCritical,
}

/// A closed interval of maximizing scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaInterval {
    pub lo: f64,
    pub hi: f64,
}

impl AlphaInterval {
    pub fn contains(&self, alpha: f64, tol: f64) -> bool {
        alpha >= self.lo - tol && alpha <= self.hi + tol
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub alpha_star: Vec<AlphaInterval>,
    pub exponent_at_max: f64,
    pub case_label: CaseLabel,
    /// The scale predicted by the case table.
    pub table_alpha: f64,
    /// `e` with `|t − s| ≈ h^e` at the dominant contribution, `e = 1 − 2α`.
    pub critical_time_scale: f64,
    /// The clamped `β` actually used.
    pub beta: f64,
}

/// One sample of the `E(α)` curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub alpha: f64,
    pub exponent: f64,
}

/// The scan grid: multiples of `step` in `[0, 1/2]`, plus `1/2` and the kink
/// `1 − β`.
fn alpha_grid(step: f64, beta: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(LabError::domain(format!(
            "alpha grid step {step} must lie in (0, 1/2]"
        )));
    }
    let count = (0.5 / step).floor() as usize;
    let mut grid: Vec<f64> = (0..=count).map(|i| i as f64 * step).collect();
    grid.push(0.5);
    let kink = 1.0 - beta;
    if (0.0..=0.5).contains(&kink) {
        grid.push(kink);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    Ok(grid)
}

/// Samples `E(α)` on the scan grid of `query`.
pub fn exponent_curve(query: &ScaleQuery) -> Result<Vec<CurvePoint>> {
    let ScaleQuery {
        n,
        k,
        p,
        beta,
        alpha_step,
    } = *query;
    // validates everything once
    tube_exponent(n, k, p, beta, 0.0)?;
    let (beta, _) = clamp_beta(beta)?;
    let inv_p = p.reciprocal_f64();
    Ok(alpha_grid(alpha_step, beta)?
        .into_iter()
        .map(|alpha| CurvePoint {
            alpha,
            exponent: tube_exponent_unchecked(n, k, inv_p, beta, alpha),
        })
        .collect())
}

/// The closed-form case table: which `T_α` is expected to be sharp.
///
/// Boundary values of `p` are assigned to the lower-`p` case; the optimizer
/// reports a whole interval of maximizers there.
pub fn case_table(n: u32, k: u32, p: LebesgueIndex, beta: f64) -> Result<(CaseLabel, f64)> {
    let bp = breakpoints(n)?;
    let (beta, _) = clamp_beta(beta)?;
    Ok(if p > bp.p_stz {
        (CaseLabel::T0Point, 0.0)
    } else if k + 1 == n && p <= bp.p_hyp {
        (CaseLabel::ThalfTube, 0.5)
    } else {
        (CaseLabel::TOneMinusBeta, 1.0 - beta)
    })
}

/// `p` values at which `E` has a flat piece and ties are expected.
fn is_critical_p(n: u32, k: u32, p: LebesgueIndex) -> Result<bool> {
    let bp = breakpoints(n)?;
    Ok(p == bp.p_stz
        || (k + 1 == n && p == bp.p_hyp)
        || (k + 2 == n && p == LebesgueIndex::integer(2)))
}

fn group_maximizers(curve: &[CurvePoint], max: f64) -> Vec<AlphaInterval> {
    let mut out: Vec<AlphaInterval> = Vec::new();
    let mut open: Option<AlphaInterval> = None;
    for pt in curve {
        if pt.exponent >= max - ARGMAX_TOLERANCE {
            open = Some(match open {
                Some(iv) => AlphaInterval {
                    lo: iv.lo,
                    hi: pt.alpha,
                },
                None => AlphaInterval {
                    lo: pt.alpha,
                    hi: pt.alpha,
                },
            });
        } else if let Some(iv) = open.take() {
            out.push(iv);
        }
    }
    out.extend(open);
    out
}

/// Maximizes `E(α)` over the scan grid and cross-checks the result against
/// the case table and against `σ`.
pub fn predict_alpha(query: &ScaleQuery) -> Result<Prediction> {
    let curve = exponent_curve(query)?;
    let max = curve
        .iter()
        .map(|c| c.exponent)
        .fold(f64::NEG_INFINITY, f64::max);
    let alpha_star = group_maximizers(&curve, max);
    let ScaleQuery {
        n,
        k,
        p,
        beta,
        alpha_step,
    } = *query;
    let (beta, _) = clamp_beta(beta)?;

    let (table_label, table_alpha) = case_table(n, k, p, beta)?;
    let tol = alpha_step + 1e-12;
    if !alpha_star.iter().any(|iv| iv.contains(table_alpha, tol)) {
        return Err(LabError::Consistency(format!(
            "case table predicts alpha = {table_alpha} for (n={n}, k={k}, p={p}, beta={beta}) \
             but the maximizers are {alpha_star:?}"
        )));
    }
    if !is_critical_p(n, k, p)? && (alpha_star.len() != 1 || alpha_star[0].width() > tol) {
        return Err(LabError::Consistency(format!(
            "non-critical p = {p} for (n={n}, k={k}, beta={beta}) has a non-unique maximizer \
             {alpha_star:?}"
        )));
    }
    let sigma = sigma(n, k, p, beta)?.exponent;
    let slope_bound = (n as f64 + 1.0) * p.reciprocal_f64() + (n as f64 - 1.0) / 2.0;
    if (max - sigma).abs() > 2.0 * alpha_step * slope_bound + 1e-12 {
        return Err(LabError::Consistency(format!(
            "max E(alpha) = {max} differs from sigma = {sigma} for (n={n}, k={k}, p={p}, beta={beta})"
        )));
    }

    let covers_all =
        alpha_star.len() == 1 && alpha_star[0].lo <= 1e-12 && alpha_star[0].hi >= 0.5 - 1e-12;
    let case_label = if covers_all {
        CaseLabel::AllScalesCritical
    } else {
        table_label
    };

    Ok(Prediction {
        alpha_star,
        exponent_at_max: max,
        case_label,
        table_alpha,
        critical_time_scale: 1.0 - 2.0 * table_alpha,
        beta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContributionRegime {
    SmallestScale,
    LargestScale,
    AllScales,
}

/// Resolves `∫ (h + |τ|)^{-γ_p p/2} dτ`: which propagation times dominate.
pub fn contribution_regime(gamma_p: f64, p: LebesgueIndex) -> Result<ContributionRegime> {
    if !(gamma_p >= 0.0) {
        return Err(LabError::domain(format!(
            "gamma_p = {gamma_p} must be non-negative"
        )));
    }
    p.require_at_least_two()?;
    let power = if p.is_infinite() {
        if gamma_p > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        gamma_p * p.to_f64() / 2.0
    };
    Ok(if (power - 1.0).abs() <= 1e-12 {
        ContributionRegime::AllScales
    } else if power > 1.0 {
        ContributionRegime::SmallestScale
    } else {
        ContributionRegime::LargestScale
    })
}

/// Exponents of the two `TT*` kernel bounds
/// `‖·‖_{L¹→L^∞} ≲ h^{-κ∞}(h+τ)^{-γ∞}` and `‖·‖_{L²→L²} ≲ h^{-κ₂}(h+τ)^{-γ₂}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub kappa_inf: f64,
    pub gamma_inf: f64,
    pub kappa_2: f64,
    pub gamma_2: f64,
    pub tau: f64,
}

impl DecayProfile {
    /// `L²(M) → L^p(M)`.
    pub fn whole_manifold(n: u32, tau: f64) -> Self {
        let d = (n as f64 - 1.0) / 2.0;
        DecayProfile {
            kappa_inf: d,
            gamma_inf: d,
            kappa_2: 0.0,
            gamma_2: 0.0,
            tau,
        }
    }

    /// `L²(M) → L^p(Σ)` for a `k`-dimensional submanifold.
    pub fn submanifold(n: u32, k: u32, tau: f64) -> Self {
        let d = (n as f64 - 1.0) / 2.0;
        let c = (n as f64 - k as f64) / 2.0;
        DecayProfile {
            kappa_inf: d,
            gamma_inf: d,
            kappa_2: c,
            gamma_2: c,
            tau,
        }
    }

    /// `L²(M) → L^p(Σ_β)`: whole-manifold numerology for `τ ≤ h^{2β−1}`,
    /// submanifold numerology (with the `h^{β(n−k)/2}` gain) beyond.
    pub fn tubular(n: u32, k: u32, beta: f64, h: f64, tau: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(LabError::domain(format!("h = {h} outside (0, 1)")));
        }
        if !(tau >= 0.0) {
            return Err(LabError::domain(format!(
                "tau = {tau} must be non-negative"
            )));
        }
        if k == 0 || k >= n {
            return Err(LabError::domain(format!(
                "need 1 <= k < n, got n={n} k={k}"
            )));
        }
        if !(0.5..=1.0).contains(&beta) {
            return Err(LabError::domain(format!("beta = {beta} outside [1/2, 1]")));
        }
        let d = (n as f64 - 1.0) / 2.0;
        let c = (n as f64 - k as f64) / 2.0;
        let (kappa_2, gamma_2) = if tau <= h.powf(2.0 * beta - 1.0) {
            (0.0, 0.0)
        } else {
            (c - beta * c, c)
        };
        Ok(DecayProfile {
            kappa_inf: d,
            gamma_inf: d,
            kappa_2,
            gamma_2,
            tau,
        })
    }

    /// Decay power after interpolating the two bounds at exponent `p`
    /// (weight `2/p` on the `L²` bound).
    pub fn gamma_p(&self, p: LebesgueIndex) -> f64 {
        let theta = 2.0 * p.reciprocal_f64();
        (1.0 - theta) * self.gamma_inf + theta * self.gamma_2
    }

    pub fn kappa_p(&self, p: LebesgueIndex) -> f64 {
        let theta = 2.0 * p.reciprocal_f64();
        (1.0 - theta) * self.kappa_inf + theta * self.kappa_2
    }
}

/// The heuristic `L²(Σ_β) → L²(Σ_β)` bound on the `TT*` kernel at separation
/// `τ`.
pub fn kernel_l2_bound(n: u32, k: u32, beta: f64, h: f64, tau: f64) -> Result<f64> {
    let prof = DecayProfile::tubular(n, k, beta, h, tau)?;
    Ok(h.powf(-prof.kappa_2) * (h + tau).powf(-prof.gamma_2))
}
