//! Exact eigenfunctions of the Laplacian on `Sⁿ` built from rotated
//! highest-weight harmonics `(i x₁ + a·x')^j`.
//!
//! Stage `k` is `u_k = h^{-(n-1)/4 + (1/2-α)(k-1)/2} Σ_l (i x₁ + P_l(x₂, …, x_{k+1}))^j`
//! with `h = (j(j+n-1))^{-1/2}`; each stage rotates every term of the previous
//! one in the `(x₂, x_{k+1})` plane.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{dot, norm, RigidMotion};
use crate::quadrature::{composite_gauss, pairwise_sum, Rule1d};

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const HARMONICITY_TOLERANCE: f64 = 1e-12;
/// Minimum quadrature density, in nodes per `h` of angle.
pub const MIN_NODES_PER_H: f64 = 4.0;
const QUADRATURE_ORDER: usize = 10;
/// Terms below this fraction of the largest one are dropped.
const RELATIVE_FLOOR_LN: f64 = -690.7755278982137; // ln(1e-300)

/// `h = (j(j+n−1))^{−1/2}`.
pub fn semiclassical_h(n: usize, j: u32) -> f64 {
    let j = j as f64;
    1.0 / (j * (j + n as f64 - 1.0)).sqrt()
}

/// The linear form `⟨c, x⟩ = i x₁ + Σ_{m≥2} a_m x_m`; `a` holds `a₂, …, a_{n+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTerm {
    #[serde(rename = "re")]
    pub a: Vec<f64>,
    #[serde(default = "yes")]
    pub im_x1: bool,
}

fn yes() -> bool {
    true
}

impl HarmonicTerm {
    pub fn new(a: Vec<f64>) -> Self {
        HarmonicTerm { a, im_x1: true }
    }

    /// `Σ_m c_m² = −1 + |a|²`; zero exactly when `⟨c,x⟩^j` is harmonic.
    pub fn harmonicity_residual(&self) -> f64 {
        dot(&self.a, &self.a) - 1.0
    }

    pub fn linear_form(&self, x: &[f64]) -> Complex64 {
        Complex64::new(dot(&self.a, &x[1..]), x[0])
    }

    /// The term of `u ∘ R`: `⟨c, R x⟩ = ⟨Rᵀ c, x⟩`. `R` must fix `x₁`.
    pub fn rotated(&self, r: &RigidMotion) -> Self {
        let mut c = vec![0.0];
        c.extend_from_slice(&self.a);
        let rc = r.rotate_back(&c);
        HarmonicTerm::new(rc[1..].to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSum {
    pub n: usize,
    pub k: usize,
    pub j: u32,
    pub h: f64,
    /// `None` for the base harmonic.
    pub alpha: Option<f64>,
    pub epsilon: f64,
    pub prefactor_exponent: f64,
    /// Extra constant factor, `1` unless the sum has been rescaled.
    #[serde(default = "one")]
    pub scale: f64,
    pub terms: Vec<HarmonicTerm>,
}

fn one() -> f64 {
    1.0
}

/// `u₁ = h^{−(n−1)/4} (i x₁ + x₂)^j`.
pub fn build_u1(n: usize, j: u32) -> Result<HarmonicSum> {
    if n < 2 {
        return Err(LabError::domain(format!("need n >= 2, got {n}")));
    }
    if j < 1 {
        return Err(LabError::domain("need j >= 1"));
    }
    let mut a = vec![0.0; n];
    a[0] = 1.0;
    Ok(HarmonicSum {
        n,
        k: 1,
        j,
        h: semiclassical_h(n, j),
        alpha: None,
        epsilon: DEFAULT_EPSILON,
        prefactor_exponent: -(n as f64 - 1.0) / 4.0,
        scale: 1.0,
        terms: vec![HarmonicTerm::new(a)],
    })
}

/// `R_{s,k}`: rotation of `ℝ^{n+1}` mixing `x₂` and `x_{k+1}`.
pub fn rotation(n: usize, s: f64, k: usize, h: f64) -> Result<RigidMotion> {
    if k < 2 || k > n {
        return Err(LabError::domain(format!(
            "rotation needs 2 <= k <= n, got k={k}, n={n}"
        )));
    }
    let hs2 = h * s * s;
    if hs2 > 1.0 {
        return Err(LabError::domain(format!("h*s^2 = {hs2} exceeds 1")));
    }
    let c = (1.0 - hs2).sqrt();
    let t = h.sqrt() * s;
    let mut m = RigidMotion::identity(n + 1);
    m.rotation[1][1] = c;
    m.rotation[1][k] = t;
    m.rotation[k][1] = -t;
    m.rotation[k][k] = c;
    Ok(m)
}

/// Number of rotations per stage: `s = 0, …, S−1` with `S = ⌈ε h^{α−1/2}⌉`.
pub fn rotations_per_stage(h: f64, alpha: f64, epsilon: f64) -> usize {
    ((epsilon * h.powf(alpha - 0.5)).ceil() as usize).max(1)
}

impl HarmonicSum {
    pub fn prefactor(&self) -> f64 {
        self.scale * self.h.powf(self.prefactor_exponent)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self
    }

    pub fn max_harmonicity_residual(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.harmonicity_residual().abs())
            .fold(0.0, f64::max)
    }

    /// Checks `|1 − a₂²| ≤ ε h^{2α}`, `|a_m| ≤ ε h^α` (`m ≥ 3`) and that
    /// coordinates beyond `k+1` vanish.
    fn check_bounds(&self, alpha: f64, per_stage: usize) -> Result<()> {
        let eps = self.epsilon;
        let h = self.h;
        for (idx, t) in self.terms.iter().enumerate() {
            let s = (idx % per_stage) as u32;
            let fail = |detail: String| LabError::Construction {
                s,
                term: idx,
                detail,
            };
            let a2 = t.a[0];
            if (1.0 - a2 * a2).abs() > eps * h.powf(2.0 * alpha) + 1e-15 {
                return Err(fail(format!(
                    "|1 - a2^2| = {} > eps h^(2 alpha)",
                    (1.0 - a2 * a2).abs()
                )));
            }
            for (m, &am) in t.a.iter().enumerate().skip(1) {
                let coord = m + 2;
                if coord > self.k + 1 {
                    if am != 0.0 {
                        return Err(fail(format!(
                            "coefficient of x{coord} is nonzero beyond stage"
                        )));
                    }
                } else if am.abs() > eps * h.powf(alpha) + 1e-15 {
                    return Err(fail(format!("|a{coord}| = {} > eps h^alpha", am.abs())));
                }
            }
            if t.harmonicity_residual().abs() > HARMONICITY_TOLERANCE {
                return Err(fail(format!(
                    "harmonicity residual {}",
                    t.harmonicity_residual()
                )));
            }
        }
        Ok(())
    }

    /// `(j log|⟨c,x⟩|, j arg⟨c,x⟩)` for one term; `None` where the form vanishes.
    fn term_log(&self, t: &HarmonicTerm, x: &[f64]) -> Option<(f64, f64)> {
        let z = t.linear_form(x);
        let r2 = z.norm_sqr();
        if r2 == 0.0 {
            None
        } else {
            let j = self.j as f64;
            Some((0.5 * j * r2.ln(), j * z.arg()))
        }
    }

    /// Value at a Cartesian point of `ℝ^{n+1}` (normally on the sphere).
    pub fn evaluate_cartesian(&self, x: &[f64]) -> Complex64 {
        const STACK: usize = 32;
        if self.terms.len() <= STACK {
            let mut buf = [None; STACK];
            self.sum_logs(x, &mut buf[..self.terms.len()])
        } else {
            let mut buf = vec![None; self.terms.len()];
            self.sum_logs(x, &mut buf)
        }
    }

    fn sum_logs(&self, x: &[f64], logs: &mut [Option<(f64, f64)>]) -> Complex64 {
        let mut max = f64::NEG_INFINITY;
        for (slot, t) in logs.iter_mut().zip(&self.terms) {
            *slot = self.term_log(t, x);
            if let Some((lm, _)) = *slot {
                max = max.max(lm);
            }
        }
        if max == f64::NEG_INFINITY {
            return Complex64::new(0.0, 0.0);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for &(lm, ph) in logs.iter().flatten() {
            let rel = lm - max;
            if rel < RELATIVE_FLOOR_LN {
                continue;
            }
            let (s, c) = ph.sin_cos();
            acc += Complex64::new(c, s) * rel.exp();
        }
        acc * (max.exp() * self.prefactor())
    }

    /// `u ∘ R`.
    pub fn compose_rotation(&self, r: &RigidMotion) -> Self {
        let mut out = self.clone();
        out.terms = self.terms.iter().map(|t| t.rotated(r)).collect();
        out
    }
}

/// Stage `k−1 → k`: every term is rotated by `R_{s,k}` for each `s`, and the
/// prefactor gains `h^{(1/2−α)/2}`.
pub fn extend(prev: &HarmonicSum, alpha: f64) -> Result<HarmonicSum> {
    if prev.k >= prev.n {
        return Err(LabError::domain(format!(
            "stage {} is already final for n = {}",
            prev.k, prev.n
        )));
    }
    if !(0.0..=0.5).contains(&alpha) {
        return Err(LabError::domain(format!(
            "alpha = {alpha} outside [0, 1/2]"
        )));
    }
    if let Some(a) = prev.alpha {
        if a != alpha {
            return Err(LabError::domain("alpha must be the same at every stage"));
        }
    }
    let k = prev.k + 1;
    let h = prev.h;
    let per_stage = rotations_per_stage(h, alpha, prev.epsilon);
    let rotations: Vec<RigidMotion> = (0..per_stage)
        .map(|s| rotation(prev.n, s as f64, k, h))
        .collect::<Result<_>>()?;
    let mut terms = Vec::with_capacity(prev.terms.len() * per_stage);
    for t in &prev.terms {
        for r in &rotations {
            terms.push(t.rotated(r));
        }
    }
    let next = HarmonicSum {
        k,
        alpha: Some(alpha),
        prefactor_exponent: prev.prefactor_exponent + (0.5 - alpha) / 2.0,
        terms,
        ..prev.clone()
    };
    next.check_bounds(alpha, per_stage)?;
    Ok(next)
}

/// `u_n` built from `u₁` by `n − 1` extensions.
pub fn build_un(n: usize, j: u32, alpha: f64, epsilon: f64) -> Result<HarmonicSum> {
    let mut u = build_u1(n, j)?.with_epsilon(epsilon);
    while u.k < n {
        u = extend(&u, alpha)?;
    }
    Ok(u)
}

/// A point of `Sⁿ` in the angles `φ₁ ∈ [0, 2π)`, `φ₂, …, φ_n ∈ [0, π]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub angles: Vec<f64>,
    pub x: Vec<f64>,
}

impl SpherePoint {
    pub fn from_angles(angles: Vec<f64>) -> Result<Self> {
        let n = angles.len();
        if n < 1 {
            return Err(LabError::domain("a sphere point needs at least one angle"));
        }
        if !(0.0..=2.0 * PI).contains(&angles[0])
            || angles[1..].iter().any(|a| !(0.0..=PI).contains(a))
        {
            return Err(LabError::domain(format!("angles {angles:?} out of range")));
        }
        let x = angles_to_cartesian(&angles);
        Ok(SpherePoint { angles, x })
    }
}

/// `x_{n+1} = cos φ_n`, `x_m = sin φ_n ⋯ sin φ_m cos φ_{m−1}`,
/// `x₁ = sin φ_n ⋯ sin φ₂ sin φ₁`.
pub fn angles_to_cartesian(angles: &[f64]) -> Vec<f64> {
    let n = angles.len();
    let mut x = vec![0.0; n + 1];
    let mut tail = 1.0;
    for m in (1..=n).rev() {
        let phi = angles[m - 1];
        x[m] = tail * phi.cos();
        tail *= phi.sin();
    }
    x[0] = tail;
    x
}

/// `(π/2, …, π/2)`, the point `e₁` where every term equals `i^j`.
pub fn concentration_center(n: usize) -> SpherePoint {
    SpherePoint::from_angles(vec![PI / 2.0; n]).expect("valid angles")
}

pub fn evaluate(u: &HarmonicSum, pt: &SpherePoint) -> Result<Complex64> {
    if pt.x.len() != u.n + 1 {
        return Err(LabError::domain(
            "point dimension does not match the sphere",
        ));
    }
    Ok(u.evaluate_cartesian(&pt.x))
}

/// Tensor Gauss–Legendre grid in `(φ₁, …, φ_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereGrid {
    pub nodes_per_h: f64,
}

impl Default for SphereGrid {
    fn default() -> Self {
        SphereGrid {
            nodes_per_h: MIN_NODES_PER_H,
        }
    }
}

impl SphereGrid {
    fn rules(&self, n: usize, h: f64) -> Result<Vec<Rule1d>> {
        if !(n == 2 || n == 3) {
            return Err(LabError::domain(format!(
                "sphere quadrature supports n in {{2, 3}}, got {n}"
            )));
        }
        if !(self.nodes_per_h >= MIN_NODES_PER_H) {
            return Err(LabError::resolution(format!(
                "{} nodes per h is below the minimum of {MIN_NODES_PER_H}",
                self.nodes_per_h
            )));
        }
        let panels =
            |len: f64| (self.nodes_per_h * len / h / QUADRATURE_ORDER as f64).ceil() as usize;
        let mut rules = vec![composite_gauss(
            0.0,
            2.0 * PI,
            panels(2.0 * PI),
            QUADRATURE_ORDER,
        )];
        for _ in 1..n {
            rules.push(composite_gauss(0.0, PI, panels(PI), QUADRATURE_ORDER));
        }
        Ok(rules)
    }

    pub fn node_count(&self, n: usize, h: f64) -> Result<usize> {
        Ok(self.rules(n, h)?.iter().map(|r| r.len()).product())
    }

    /// `∫_{Sⁿ} f dμ` for real `f` given in Cartesian coordinates.
    pub fn integrate<F>(&self, n: usize, h: f64, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let (re, _) = self.integrate_parts(n, h, |x| Complex64::new(f(x), 0.0))?;
        Ok(re)
    }

    pub fn integrate_complex<F>(&self, n: usize, h: f64, f: F) -> Result<Complex64>
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let (re, im) = self.integrate_parts(n, h, f)?;
        Ok(Complex64::new(re, im))
    }

    fn integrate_parts<F>(&self, n: usize, h: f64, f: F) -> Result<(f64, f64)>
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let rules = self.rules(n, h)?;
        let inner = &rules[0];
        let inner_trig: Vec<(f64, f64)> = inner.nodes.iter().map(|p| p.sin_cos()).collect();
        // rows enumerate (φ₂, …, φ_n), φ_n slowest
        let outer_counts: Vec<usize> = rules[1..].iter().map(|r| r.len()).collect();
        let rows: usize = outer_counts.iter().product();
        let row_sums: Vec<(f64, f64)> = (0..rows)
            .into_par_iter()
            .map(|row| {
                let mut rem = row;
                let mut angles = vec![0.0; n];
                let mut weight = 1.0;
                for d in 0..n - 1 {
                    let r = &rules[d + 1];
                    let i = rem % r.len();
                    rem /= r.len();
                    angles[d + 1] = r.nodes[i];
                    // Jacobian Π sin^{m−1} φ_m
                    weight *= r.weights[i] * r.nodes[i].sin().powi(d as i32 + 1);
                }
                let mut x = vec![0.0; n + 1];
                let mut tail = 1.0;
                for m in (2..=n).rev() {
                    let phi = angles[m - 1];
                    x[m] = tail * phi.cos();
                    tail *= phi.sin();
                }
                let mut re = Vec::with_capacity(inner.len());
                let mut im = Vec::with_capacity(inner.len());
                for (&(s1, c1), &w) in inner_trig.iter().zip(&inner.weights) {
                    x[1] = tail * c1;
                    x[0] = tail * s1;
                    let v = f(&x) * w;
                    re.push(v.re);
                    im.push(v.im);
                }
                (pairwise_sum(&re) * weight, pairwise_sum(&im) * weight)
            })
            .collect();
        let re: Vec<f64> = row_sums.iter().map(|r| r.0).collect();
        let im: Vec<f64> = row_sums.iter().map(|r| r.1).collect();
        Ok((pairwise_sum(&re), pairwise_sum(&im)))
    }
}

/// `‖u‖_{L²(Sⁿ)}`.
pub fn l2_norm(u: &HarmonicSum, grid: &SphereGrid) -> Result<f64> {
    weighted_l2_norm(u, grid, 0.0)
}

/// `‖u‖` in `L²` with weight `(1 + h(x_{k+2}² + ⋯ + x_{n+1}²))^w`.
pub fn weighted_l2_norm(u: &HarmonicSum, grid: &SphereGrid, w: f64) -> Result<f64> {
    let h = u.h;
    let k = u.k;
    let single =
        (u.terms.len() == 1).then(|| (&u.terms[0], u.prefactor().powi(2), 2.0 * u.j as f64));
    let sq = grid.integrate(u.n, h, |x| {
        let v = match single {
            // |u|² = C |⟨c,x⟩|^{2j}
            Some((t, c, twice_j)) => {
                let r2 = t.linear_form(x).norm_sqr();
                if r2 == 0.0 {
                    0.0
                } else {
                    c * (0.5 * twice_j * r2.ln()).exp()
                }
            }
            None => u.evaluate_cartesian(x).norm_sqr(),
        };
        if w == 0.0 {
            v
        } else {
            let tail: f64 = x[k + 1..].iter().map(|t| t * t).sum();
            v * (1.0 + h * tail).powf(w)
        }
    })?;
    Ok(sq.sqrt())
}

/// `‖u₁‖² = h^{−1/2} · 2π · ∫₀^π sin^{2j+1} θ dθ` on `S²`.
pub fn u1_norm_squared_exact(n: usize, j: u32) -> Result<f64> {
    if n != 2 {
        return Err(LabError::domain(
            "closed-form norm is available for n = 2 only",
        ));
    }
    // ∫₀^π sin^{2j+1} = 2 Π_{i=1}^{j} 2i/(2i+1)
    let log_wallis: f64 = (1..=j)
        .map(|i| (2.0 * i as f64 / (2.0 * i as f64 + 1.0)).ln())
        .sum();
    let h = semiclassical_h(n, j);
    Ok(h.powf(-0.5) * 2.0 * PI * 2.0 * log_wallis.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    /// `min |u| · h^{(n−1)(1−α)/2}` over the samples.
    pub constant: f64,
    pub min_abs: f64,
    pub center_abs: f64,
    pub samples: usize,
}

/// Samples `|u|` on `|φ₁ − π/2| ≤ η h^{1−2α}`, `|φ_m − π/2| ≤ η h^{1−α}`.
pub fn concentration_check(
    u: &HarmonicSum,
    eps_region: f64,
    samples: usize,
) -> Result<ConcentrationReport> {
    if u.k != u.n {
        return Err(LabError::domain(format!(
            "concentration check needs stage n = {}, got {}",
            u.n, u.k
        )));
    }
    let alpha = u.alpha.unwrap_or(0.5);
    let h = u.h;
    let n = u.n;
    let s = samples.max(1);
    let offs: Vec<f64> = (0..s)
        .map(|i| {
            if s == 1 {
                0.0
            } else {
                -1.0 + 2.0 * i as f64 / (s - 1) as f64
            }
        })
        .collect();
    let mut widths = vec![eps_region * h.powf(1.0 - 2.0 * alpha)];
    widths.extend(std::iter::repeat_n(eps_region * h.powf(1.0 - alpha), n - 1));
    let total = s.pow(n as u32);
    let mut min_abs = f64::INFINITY;
    for mut flat in 0..total {
        let mut angles = vec![PI / 2.0; n];
        for d in (0..n).rev() {
            angles[d] += offs[flat % s] * widths[d];
            flat /= s;
        }
        let v = u.evaluate_cartesian(&angles_to_cartesian(&angles)).norm();
        min_abs = min_abs.min(v);
    }
    let center_abs = evaluate(u, &concentration_center(n))?.norm();
    let scale = h.powf((n as f64 - 1.0) * (1.0 - alpha) / 2.0);
    Ok(ConcentrationReport {
        constant: min_abs * scale,
        min_abs,
        center_abs,
        samples: total,
    })
}

/// `|∫ (u ∘ R_{s,k}) · conj(u ∘ R_{s′,k}) dμ|`.
pub fn pair_correlation(
    u: &HarmonicSum,
    s: u32,
    s_prime: u32,
    k: usize,
    grid: &SphereGrid,
) -> Result<f64> {
    let a = u.compose_rotation(&rotation(u.n, s as f64, k, u.h)?);
    let b = u.compose_rotation(&rotation(u.n, s_prime as f64, k, u.h)?);
    let v = if u.terms.len() == 1 {
        // one exponential per node: e^{j(log z_a + conj log z_b)}
        let p2 = u.prefactor().powi(2);
        grid.integrate_complex(u.n, u.h, |x| {
            match (a.term_log(&a.terms[0], x), b.term_log(&b.terms[0], x)) {
                (Some((la, pa)), Some((lb, pb))) => {
                    let (s, c) = (pa - pb).sin_cos();
                    Complex64::new(c, s) * (p2 * (la + lb).exp())
                }
                _ => Complex64::new(0.0, 0.0),
            }
        })?
    } else {
        grid.integrate_complex(u.n, u.h, |x| {
            a.evaluate_cartesian(x) * b.evaluate_cartesian(x).conj()
        })?
    };
    Ok(v.norm())
}

/// `‖Δ_S u − λ² u‖ / ‖λ² u‖` over the given unit vectors, with the spherical
/// Laplacian (positive convention) obtained from central differences of the
/// degree-zero extension `u(x/|x|)`.
pub fn laplacian_residual(u: &HarmonicSum, points: &[Vec<f64>], delta: f64) -> Result<f64> {
    let dim = u.n + 1;
    let lambda2 = u.j as f64 * (u.j as f64 + u.n as f64 - 1.0);
    let ext = |x: &[f64]| {
        let r = norm(x);
        let y: Vec<f64> = x.iter().map(|v| v / r).collect();
        u.evaluate_cartesian(&y)
    };
    let mut err = Vec::new();
    let mut reference = Vec::new();
    for x in points {
        if x.len() != dim {
            return Err(LabError::domain(
                "point dimension does not match the sphere",
            ));
        }
        let centre = ext(x);
        let mut lap = Complex64::new(0.0, 0.0);
        for d in 0..dim {
            let mut p = x.clone();
            p[d] += delta;
            let mut m = x.clone();
            m[d] -= delta;
            lap += (ext(&p) + ext(&m) - centre * 2.0) / (delta * delta);
        }
        err.push((-lap - centre * lambda2).norm_sqr());
        reference.push((centre * lambda2).norm_sqr());
    }
    Ok((pairwise_sum(&err) / pairwise_sum(&reference)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_harmonic_examples() {
        let u = build_u1(2, 50).unwrap();
        assert_eq!(u.max_harmonicity_residual(), 0.0);
        let h = u.h;
        let v = u.evaluate_cartesian(&[1.0, 0.0, 0.0]);
        assert!((v.norm() / h.powf(-0.25) - 1.0).abs() < 1e-12);
        assert_eq!(u.evaluate_cartesian(&[0.0, 0.0, 1.0]).norm(), 0.0);
        assert!((h * h * 50.0 * 51.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn off_equator_decay() {
        let u = build_u1(2, 80).unwrap();
        for d in [0.05f64, 0.2, 0.6] {
            // geodesic distance d from the circle x₃ = 0
            let x = [d.cos(), 0.0, d.sin()];
            let want = u.h.powf(-0.25) * (1.0 - d.sin().powi(2)).powf(40.0);
            assert!((u.evaluate_cartesian(&x).norm() / want - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotations_are_orthogonal() {
        let r = rotation(3, 0.0, 2, 0.01).unwrap();
        assert_eq!(r, RigidMotion::identity(4));
        for (s, k, h) in [(3.0, 2, 0.01), (7.0, 3, 0.02), (1.0, 2, 0.9)] {
            rotation(3, s, k, h).unwrap().validate().unwrap();
        }
        assert!(rotation(2, 11.0, 2, 0.01).is_err());
        let (s, sp, h) = (3.0, 5.0, 0.01);
        let rs = rotation(2, s, 2, h).unwrap();
        let rsp = rotation(2, sp, 2, h).unwrap();
        let c = rs.compose(&rsp.inverse());
        let want = ((1.0 - h * s * s) * (1.0 - h * sp * sp)).sqrt() + h * s * sp;
        assert!((c.rotation[1][1] - want).abs() < 1e-15);
    }

    #[test]
    fn stage_counts_and_bounds() {
        // j = 400, α = 0.3: S = ⌈ε·h^{-0.2}⌉
        let h = semiclassical_h(2, 400);
        assert_eq!(rotations_per_stage(h, 0.3, 0.1), 1);
        assert_eq!(rotations_per_stage(h, 0.3, 1.0), 4);
        assert_eq!(rotations_per_stage(h, 0.5, 0.9), 1);
        let u = build_un(2, 400, 0.3, 1.0).unwrap();
        assert_eq!(u.terms.len(), 4);
        assert!(u.max_harmonicity_residual() < 1e-12);
        let u3 = build_un(3, 30, 0.2, 0.5).unwrap();
        assert_eq!(u3.k, 3);
        assert!(u3.max_harmonicity_residual() < 1e-12);
    }

    #[test]
    fn bound_violation_names_the_term() {
        // ε > 1 makes the largest rotation overshoot |a₃| ≤ ε h^α
        let u = build_u1(2, 100).unwrap().with_epsilon(3.0);
        match extend(&u, 0.3) {
            Err(LabError::Construction { s, .. }) => assert!(s > 0),
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => panic!("expected a construction error"),
        }
    }

    #[test]
    fn rotation_action_matches_point_rotation() {
        let u = build_un(2, 40, 0.3, 1.0).unwrap();
        let r = rotation(2, 2.0, 2, u.h).unwrap();
        let ur = u.compose_rotation(&r);
        for angles in [[0.3, 1.2], [1.7, 1.5], [4.0, 0.4]] {
            let x = angles_to_cartesian(&angles);
            let a = ur.evaluate_cartesian(&x);
            let b = u.evaluate_cartesian(&r.rotate(&x));
            assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn conversion_formulae() {
        let p = SpherePoint::from_angles(vec![0.4, 1.1, 2.0]).unwrap();
        assert!((norm(&p.x) - 1.0).abs() < 1e-15);
        assert!((p.x[3] - 2f64.cos()).abs() < 1e-15);
        assert!((p.x[0] - 2f64.sin() * 1.1f64.sin() * 0.4f64.sin()).abs() < 1e-15);
        let c = concentration_center(2);
        assert!((c.x[0] - 1.0).abs() < 1e-15);
        assert!(SpherePoint::from_angles(vec![0.0, 4.0]).is_err());
    }

    #[test]
    fn wallis_oracle_matches_quadrature() {
        let u = build_u1(2, 30).unwrap();
        let got = l2_norm(&u, &SphereGrid::default()).unwrap();
        let want = u1_norm_squared_exact(2, 30).unwrap().sqrt();
        assert!((got / want - 1.0).abs() < 1e-10);
        let doubled = l2_norm(&u.clone().scaled(2.0), &SphereGrid::default()).unwrap();
        assert!((doubled / got - 2.0).abs() < 1e-12);
        assert!(matches!(
            l2_norm(&u, &SphereGrid { nodes_per_h: 2.0 }),
            Err(LabError::Resolution(_))
        ));
    }

    #[test]
    fn pair_correlation_closed_form() {
        // ⟨(c·x)^j, (c'·x)^j⟩ ∝ (c·c̄')^j, so the ratio to ‖u‖² is cos^{2j}(θ/2)
        let u = build_u1(2, 40).unwrap();
        let grid = SphereGrid::default();
        let nn = l2_norm(&u, &grid).unwrap().powi(2);
        assert!((pair_correlation(&u, 2, 2, 2, &grid).unwrap() / nn - 1.0).abs() < 1e-10);
        let h = u.h;
        let (s, sp) = (1.0, 3.0);
        let cos_theta = ((1.0 - h * s * s) * (1.0 - h * sp * sp)).sqrt() + h * s * sp;
        let want = ((1.0 + cos_theta) / 2.0).powi(40);
        let got = pair_correlation(&u, 1, 3, 2, &grid).unwrap() / nn;
        assert!((got / want - 1.0).abs() < 1e-8, "{got} vs {want}");
        let swapped = pair_correlation(&u, 3, 1, 2, &grid).unwrap() / nn;
        assert!((swapped - got).abs() < 1e-14);
    }

    #[test]
    fn finite_difference_laplacian() {
        let u = build_un(2, 12, 0.3, 1.0).unwrap();
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|i| angles_to_cartesian(&[0.3 * i as f64, 0.2 + 0.13 * i as f64]))
            .collect();
        let r = laplacian_residual(&u, &pts, 1e-4).unwrap();
        assert!(r < 1e-3, "{r}");
    }

    #[test]
    fn json_round_trip() {
        let u = build_un(2, 20, 0.3, 1.0).unwrap();
        let s = serde_json::to_string(&u).unwrap();
        assert!(s.contains("\"im_x1\":true"));
        assert_eq!(serde_json::from_str::<HarmonicSum>(&s).unwrap(), u);
    }
}
