//! Closed-form growth exponents.
//!
//! `delta(n, k, p)` is the exponent in `‖u‖_{L^p(X)} ≲ h^{-δ} ‖u‖_{L²(M)}` for a
//! `k`-dimensional submanifold `X` of an `n`-manifold (`k = n` is the whole
//! manifold), and `sigma(n, k, p, β)` the exponent for the `h^β`-neighbourhood
//! `Σ_β` of a `k`-dimensional submanifold.
//!
//! All branch formulas carry a minus sign in front of their `1/p` terms. With
//! that convention every branch pair agrees at its breakpoint and the
//! normalisation `δ(n, n, 2) = 0` holds.

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::index::{exact, exact_from_f64, exact_int, exact_to_f64, Exact, LebesgueIndex};

/// A query for either `delta` (where `beta` is ignored) or `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentQuery {
    pub n: u32,
    pub k: u32,
    pub p: LebesgueIndex,
    #[serde(default)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    HighP,
    MiddleP,
    LowP,
    ClampedLowBeta,
    ClampedHighBeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Justification {
    Obs1WholeManifold,
    Obs3SubmanifoldSlab,
    Interpolation,
    BurqZuilyEndpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentResult {
    /// Power of `h^{-1}` in the bound.
    pub exponent: f64,
    #[serde(serialize_with = "serialize_exact")]
    pub exact: Exact,
    pub regime: Regime,
    pub log_loss: bool,
    pub justification: Justification,
}

fn serialize_exact<S: serde::Serializer>(
    x: &Exact,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    serializer.serialize_str(&x.to_string())
}

impl ExponentResult {
    fn new(exact: Exact, regime: Regime, log_loss: bool, justification: Justification) -> Self {
        ExponentResult {
            exponent: exact_to_f64(exact),
            exact,
            regime,
            log_loss,
            justification,
        }
    }
}

/// The two critical Lebesgue indices of dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Breakpoints {
    /// Stein–Tomas index `2(n+1)/(n-1)`.
    pub p_stz: LebesgueIndex,
    /// Hypersurface index `2n/(n-1)`.
    pub p_hyp: LebesgueIndex,
}

impl Breakpoints {
    pub fn inv_stz(&self) -> Exact {
        self.p_stz.reciprocal()
    }

    pub fn inv_hyp(&self) -> Exact {
        self.p_hyp.reciprocal()
    }
}

fn check_dimension(n: u32) -> Result<()> {
    if n < 2 {
        return Err(LabError::domain(format!(
            "ambient dimension n = {n} must be at least 2"
        )));
    }
    Ok(())
}

pub fn breakpoints(n: u32) -> Result<Breakpoints> {
    check_dimension(n)?;
    let n = n as i64;
    Ok(Breakpoints {
        p_stz: LebesgueIndex::ratio(2 * (n + 1), n - 1),
        p_hyp: LebesgueIndex::ratio(2 * n, n - 1),
    })
}

/// Whole-manifold exponent `δ(n, n, p)` as an exact rational, with the branch
/// that produced it.
fn whole_manifold(n: i128, inv_p: Exact, inv_stz: Exact) -> (Exact, Regime) {
    if inv_p <= inv_stz {
        (exact(n - 1, 2) - exact_int(n) * inv_p, Regime::HighP)
    } else {
        (exact(n - 1, 4) - exact(n - 1, 2) * inv_p, Regime::LowP)
    }
}

fn hypersurface(n: i128, inv_p: Exact, inv_hyp: Exact) -> (Exact, Regime) {
    if inv_p <= inv_hyp {
        (exact(n - 1, 2) - exact_int(n - 1) * inv_p, Regime::HighP)
    } else {
        (exact(n - 1, 4) - exact(n - 2, 2) * inv_p, Regime::LowP)
    }
}

fn log_loss_at(n: u32, k: u32, p: &LebesgueIndex) -> bool {
    p.reciprocal() == exact(1, 2) && k + 2 == n && !(n == 3 && k == 2)
}

pub fn delta(n: u32, k: u32, p: LebesgueIndex) -> Result<ExponentResult> {
    check_dimension(n)?;
    if k > n {
        return Err(LabError::domain(format!(
            "submanifold dimension k = {k} exceeds n = {n}"
        )));
    }
    p.require_at_least_two()?;
    let bp = breakpoints(n)?;
    let inv_p = p.reciprocal();
    let ni = n as i128;
    let result = if k == n {
        let (e, regime) = whole_manifold(ni, inv_p, bp.inv_stz());
        ExponentResult::new(e, regime, false, Justification::Obs1WholeManifold)
    } else if k + 1 == n {
        let (e, regime) = hypersurface(ni, inv_p, bp.inv_hyp());
        ExponentResult::new(e, regime, false, Justification::Obs3SubmanifoldSlab)
    } else {
        let e = exact(ni - 1, 2) - exact_int(k as i128) * inv_p;
        ExponentResult::new(
            e,
            Regime::HighP,
            log_loss_at(n, k, &p),
            Justification::Obs3SubmanifoldSlab,
        )
    };
    Ok(result)
}

/// Clamps `beta` into `[1/2, 1]`, reporting which side (if any) was hit.
pub fn clamp_beta(beta: f64) -> Result<(f64, Option<Regime>)> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(LabError::domain(format!(
            "beta = {beta} must be a positive real"
        )));
    }
    Ok(if beta < 0.5 {
        (0.5, Some(Regime::ClampedLowBeta))
    } else if beta > 1.0 {
        (1.0, Some(Regime::ClampedHighBeta))
    } else {
        (beta, None)
    })
}

/// The interpolated middle branch `β(n−1)/2 − β(n+1)/p + 1/p`.
fn middle_branch(n: i128, beta: Exact, inv_p: Exact) -> Exact {
    beta * exact(n - 1, 2) - beta * exact_int(n + 1) * inv_p + inv_p
}

pub fn sigma(n: u32, k: u32, p: LebesgueIndex, beta: f64) -> Result<ExponentResult> {
    check_dimension(n)?;
    if k == 0 || k >= n {
        return Err(LabError::domain(format!(
            "sigma needs 1 <= k <= n-1, got k = {k}, n = {n} (use delta for k = n)"
        )));
    }
    p.require_at_least_two()?;
    let (beta, clamped) = clamp_beta(beta)?;
    let b = exact_from_f64(beta)?;
    let bp = breakpoints(n)?;
    let inv_p = p.reciprocal();
    let ni = n as i128;

    let (e, regime, justification) = if inv_p <= bp.inv_stz() {
        let (e, _) = whole_manifold(ni, inv_p, bp.inv_stz());
        (e, Regime::HighP, Justification::Obs1WholeManifold)
    } else if k + 1 == n {
        if inv_p <= bp.inv_hyp() {
            (
                middle_branch(ni, b, inv_p),
                Regime::MiddleP,
                Justification::Interpolation,
            )
        } else {
            let (d, _) = hypersurface(ni, inv_p, bp.inv_hyp());
            (
                d - b * inv_p,
                Regime::LowP,
                Justification::Obs3SubmanifoldSlab,
            )
        }
    } else {
        let justification = if inv_p == exact(1, 2) {
            Justification::BurqZuilyEndpoint
        } else {
            Justification::Interpolation
        };
        (middle_branch(ni, b, inv_p), Regime::LowP, justification)
    };
    Ok(ExponentResult::new(
        e,
        clamped.unwrap_or(regime),
        log_loss_at(n, k, &p),
        justification,
    ))
}

/// A point `(1/p, exponent)` in the interpolation plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExponentPoint {
    pub inv_p: Exact,
    pub exponent: Exact,
}

impl ExponentPoint {
    pub fn new(inv_p: Exact, exponent: Exact) -> Self {
        ExponentPoint { inv_p, exponent }
    }
}

/// Linear interpolation of the exponent in the variable `1/p`.
pub fn interpolate(a: ExponentPoint, b: ExponentPoint, p: LebesgueIndex) -> Result<Exact> {
    if a.inv_p == b.inv_p {
        return Err(LabError::domain("interpolation endpoints share the same p"));
    }
    let x = p.reciprocal();
    let (lo, hi) = if a.inv_p < b.inv_p {
        (a.inv_p, b.inv_p)
    } else {
        (b.inv_p, a.inv_p)
    };
    if x < lo || x > hi {
        return Err(LabError::domain(format!(
            "p = {p} lies outside the interpolation range"
        )));
    }
    let t = (x - a.inv_p) / (b.inv_p - a.inv_p);
    Ok(a.exponent * (Exact::one() - t) + b.exponent * t)
}

/// The Burq–Zuily `L²` endpoint `(1/2, 1/2 − β)`.
pub fn burq_zuily_endpoint(beta: f64) -> Result<ExponentPoint> {
    let b = exact_from_f64(beta)?;
    Ok(ExponentPoint::new(exact(1, 2), exact(1, 2) - b))
}

/// The Stein–Tomas point `(1/p_stz, δ(n, n, p_stz))`.
pub fn stein_tomas_point(n: u32) -> Result<ExponentPoint> {
    let bp = breakpoints(n)?;
    let d = delta(n, n, bp.p_stz)?;
    Ok(ExponentPoint::new(bp.inv_stz(), d.exact))
}
