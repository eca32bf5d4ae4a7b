//! Flat-model quasimodes `T_α` on `ℝⁿ`, `n ∈ {2, 3}`.
//!
//! `T_α` is the inverse semiclassical Fourier transform of the indicator of
//! the cap `{ξ = rω : |r − 1| < h, ∠(ω, ω₀) < h^α}` times the amplitude
//! `h^{-1/2 - α(n-1)/2}`:
//!
//! ```text
//! T_α(x) = (2πh)^{-n/2} ∫ e^{i⟨x,ξ⟩/h} f_α(ξ) dξ
//! ```
//!
//! The integral is evaluated in polar (`n = 2`) or spherical (`n = 3`)
//! coordinates with composite Gauss–Legendre rules whose panel counts are
//! fixed a priori from the largest phase variation across each coordinate.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use ndarray::linalg::general_mat_mul;
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{dot, norm, Lattice, RigidMotion};
use crate::quadrature::ResolutionRule;

pub const DEFAULT_NODE_BUDGET: usize = 4_000_000;
/// Default `ε` for the non-oscillation tube.
pub const DEFAULT_TUBE_EPS: f64 = 0.1;

/// Fourier-side description of `T_α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCap {
    pub n: usize,
    pub h: f64,
    pub alpha: f64,
    pub omega0: Vec<f64>,
    #[serde(default = "one")]
    pub epsilon_cap: f64,
}

fn one() -> f64 {
    1.0
}

impl SpectralCap {
    /// A cap pointing along `e₁`.
    pub fn new(n: usize, h: f64, alpha: f64) -> Result<Self> {
        let mut omega0 = vec![0.0; n];
        if n > 0 {
            omega0[0] = 1.0;
        }
        let cap = SpectralCap {
            n,
            h,
            alpha,
            omega0,
            epsilon_cap: 1.0,
        };
        cap.validate()?;
        Ok(cap)
    }

    pub fn with_direction(mut self, omega0: Vec<f64>) -> Result<Self> {
        let len = norm(&omega0);
        if omega0.len() != self.n || !(len > 0.0) {
            return Err(LabError::domain(
                "cap direction must be a nonzero vector of length n",
            ));
        }
        self.omega0 = omega0.into_iter().map(|v| v / len).collect();
        self.validate()?;
        Ok(self)
    }

    pub fn with_epsilon(mut self, epsilon_cap: f64) -> Result<Self> {
        self.epsilon_cap = epsilon_cap;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n == 2 || self.n == 3) {
            return Err(LabError::domain(format!(
                "field evaluation supports n in {{2, 3}}, got {}",
                self.n
            )));
        }
        if !(self.h > 0.0 && self.h < 1.0) {
            return Err(LabError::domain(format!("h = {} outside (0, 1)", self.h)));
        }
        if !(0.0..=0.5).contains(&self.alpha) {
            return Err(LabError::domain(format!(
                "alpha = {} outside [0, 1/2]",
                self.alpha
            )));
        }
        if !(self.epsilon_cap > 0.0 && self.epsilon_cap <= 1.0) {
            return Err(LabError::domain(format!(
                "epsilon_cap = {} outside (0, 1]",
                self.epsilon_cap
            )));
        }
        if self.omega0.len() != self.n || (norm(&self.omega0) - 1.0).abs() > 1e-12 {
            return Err(LabError::domain("omega0 must be a unit vector in R^n"));
        }
        Ok(())
    }

    pub fn amplitude(&self) -> f64 {
        self.h.powf(-0.5 - self.alpha * (self.n as f64 - 1.0) / 2.0)
    }

    /// Half-width of the radial shell around `|ξ| = 1`.
    pub fn radial_half_width(&self) -> f64 {
        self.epsilon_cap * self.h
    }

    /// Geodesic angular radius of the cap around `ω₀`.
    pub fn angular_radius(&self) -> f64 {
        (self.epsilon_cap * self.h.powf(self.alpha)).min(PI)
    }

    /// Exact Lebesgue measure of the cap.
    pub fn volume(&self) -> f64 {
        let w = self.radial_half_width();
        let theta = self.angular_radius();
        match self.n {
            2 => 2.0 * w * 2.0 * theta,
            _ => ((1.0 + w).powi(3) - (1.0 - w).powi(3)) / 3.0 * 2.0 * PI * (1.0 - theta.cos()),
        }
    }

    /// `‖f_α‖²_{L²}`, which equals `‖T_α‖²_{L²(ℝⁿ)}` by Plancherel.
    pub fn l2_norm_squared(&self) -> f64 {
        self.amplitude().powi(2) * self.volume()
    }

    /// `T_α(0)`: the phase is identically one there.
    pub fn value_at_origin(&self) -> f64 {
        (2.0 * PI * self.h).powf(-(self.n as f64) / 2.0) * self.amplitude() * self.volume()
    }

    /// Orthonormal frame whose first vector is `ω₀`.
    pub fn frame(&self) -> Vec<Vec<f64>> {
        let w = &self.omega0;
        match self.n {
            2 => vec![w.clone(), vec![-w[1], w[0]]],
            _ => {
                // Gram–Schmidt against the coordinate axis least aligned with ω₀
                let axis = (0..3)
                    .min_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs()))
                    .unwrap_or(0);
                let mut u = vec![0.0; 3];
                u[axis] = 1.0;
                let c = dot(&u, w);
                for i in 0..3 {
                    u[i] -= c * w[i];
                }
                let len = norm(&u);
                u.iter_mut().for_each(|v| *v /= len);
                let v = vec![
                    w[1] * u[2] - w[2] * u[1],
                    w[2] * u[0] - w[0] * u[2],
                    w[0] * u[1] - w[1] * u[0],
                ];
                vec![w.clone(), u, v]
            }
        }
    }
}

/// `sup_{ξ ∈ supp f_α} ||ξ|² − 1|`.
pub fn defect_bound(cap: &SpectralCap) -> f64 {
    let w = cap.radial_half_width();
    (1.0 + w).powi(2) - 1.0
}

/// A multiplier applied on the Fourier side before inversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourierMultiplier {
    #[default]
    Identity,
    /// `|ξ|² − 1`, the symbol of `h²Δ − 1` up to sign.
    Defect,
}

/// Quadrature nodes `ξ_q` (flattened, stride `n`) with weights that already
/// include amplitude, Jacobian, normalisation and multiplier.
#[derive(Debug, Clone)]
pub struct NodeSet {
    n: usize,
    xi: Vec<f64>,
    weights: Vec<f64>,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn xi(&self, q: usize) -> &[f64] {
        &self.xi[q * self.n..(q + 1) * self.n]
    }

    /// `Σ_q w_q e^{i⟨x, ξ_q⟩/h}`.
    fn sum_at(&self, x: &[f64], h: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for q in 0..self.len() {
            let phase = dot(x, self.xi(q)) / h;
            let (s, c) = phase.sin_cos();
            acc += Complex64::new(c, s) * self.weights[q];
        }
        acc
    }
}

/// Evaluates `T_α` (optionally moved by a rigid motion, optionally with a
/// Fourier multiplier) by quadrature.
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub cap: SpectralCap,
    pub rule: ResolutionRule,
    pub budget: usize,
    pub multiplier: FourierMultiplier,
}

impl Evaluator {
    pub fn new(cap: SpectralCap) -> Result<Self> {
        cap.validate()?;
        Ok(Evaluator {
            cap,
            rule: ResolutionRule::default(),
            budget: DEFAULT_NODE_BUDGET,
            multiplier: FourierMultiplier::Identity,
        })
    }

    pub fn with_rule(mut self, rule: ResolutionRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_multiplier(mut self, multiplier: FourierMultiplier) -> Self {
        self.multiplier = multiplier;
        self
    }

    /// Panel counts (radial first) needed to resolve every point with
    /// `|x| ≤ reach`.
    pub fn panels(&self, reach: f64) -> Vec<usize> {
        let cap = &self.cap;
        let h = cap.h;
        let w = cap.radial_half_width();
        let theta = cap.angular_radius();
        let rate = (1.0 + w) * reach / h;
        let radial = self.rule.panels_for(reach * 2.0 * w / h);
        match cap.n {
            2 => vec![radial, self.rule.panels_for(rate * 2.0 * theta)],
            _ => {
                let sin_max = if theta >= PI / 2.0 { 1.0 } else { theta.sin() };
                vec![
                    radial,
                    self.rule.panels_for(rate * theta),
                    self.rule.panels_for(rate * sin_max * 2.0 * PI),
                ]
            }
        }
    }

    pub fn node_count(&self, reach: f64) -> usize {
        self.panels(reach)
            .iter()
            .map(|p| p * self.rule.order)
            .product()
    }

    fn check_budget(&self, panels: &[usize]) -> Result<()> {
        let needed: usize = panels.iter().map(|p| p * self.rule.order).product();
        if needed > self.budget {
            return Err(LabError::Budget {
                needed,
                budget: self.budget,
            });
        }
        Ok(())
    }

    fn multiplier_at(&self, r: f64) -> f64 {
        match self.multiplier {
            FourierMultiplier::Identity => 1.0,
            FourierMultiplier::Defect => r * r - 1.0,
        }
    }

    fn build_nodes(&self, panels: &[usize]) -> Result<NodeSet> {
        self.check_budget(panels)?;
        let cap = &self.cap;
        let n = cap.n;
        let w = cap.radial_half_width();
        let theta = cap.angular_radius();
        let frame = cap.frame();
        let order = self.rule.order;
        let scale = (2.0 * PI * cap.h).powf(-(n as f64) / 2.0) * cap.amplitude();
        let radial = crate::quadrature::composite_gauss(1.0 - w, 1.0 + w, panels[0], order);
        let mut xi = Vec::new();
        let mut weights = Vec::new();
        match n {
            2 => {
                let ang = crate::quadrature::composite_gauss(-theta, theta, panels[1], order);
                for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
                    let m = self.multiplier_at(r);
                    for (&t, &wt) in ang.nodes.iter().zip(&ang.weights) {
                        let (s, c) = t.sin_cos();
                        xi.extend(
                            frame[0]
                                .iter()
                                .zip(&frame[1])
                                .map(|(a, b)| r * (c * a + s * b)),
                        );
                        weights.push(scale * wr * wt * r * m);
                    }
                }
            }
            _ => {
                let polar = crate::quadrature::composite_gauss(0.0, theta, panels[1], order);
                let azim = crate::quadrature::composite_gauss(0.0, 2.0 * PI, panels[2], order);
                let azim_trig: Vec<(f64, f64)> = azim.nodes.iter().map(|a| a.sin_cos()).collect();
                for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
                    let m = self.multiplier_at(r);
                    for (&psi, &wp) in polar.nodes.iter().zip(&polar.weights) {
                        let (sp, cp) = psi.sin_cos();
                        for (&(sa, ca), &wa) in azim_trig.iter().zip(&azim.weights) {
                            xi.extend((0..3).map(|d| {
                                r * (cp * frame[0][d] + sp * (ca * frame[1][d] + sa * frame[2][d]))
                            }));
                            weights.push(scale * wr * wp * wa * r * r * sp * m);
                        }
                    }
                }
            }
        }
        Ok(NodeSet { n, xi, weights })
    }

    pub fn nodes(&self, reach: f64) -> Result<NodeSet> {
        self.build_nodes(&self.panels(reach))
    }

    fn local_point(&self, x: &[f64], motion: Option<&RigidMotion>) -> Vec<f64> {
        match motion {
            Some(m) => m.apply_inverse(x),
            None => x.to_vec(),
        }
    }

    /// Pointwise evaluation. Each point is resolved by a rule chosen from its
    /// own distance to the tube centre, so values do not depend on the rest of
    /// the batch.
    pub fn evaluate(
        &self,
        points: &[Vec<f64>],
        motion: Option<&RigidMotion>,
    ) -> Result<Vec<Complex64>> {
        if let Some(m) = motion {
            if m.dim() != self.cap.n {
                return Err(LabError::domain("motion dimension does not match the cap"));
            }
            m.validate()?;
        }
        if points.iter().any(|p| p.len() != self.cap.n) {
            return Err(LabError::domain("evaluation point has the wrong dimension"));
        }
        let local: Vec<Vec<f64>> = points.iter().map(|x| self.local_point(x, motion)).collect();
        let keys: Vec<Vec<usize>> = local.iter().map(|x| self.panels(norm(x))).collect();
        let mut cache: HashMap<Vec<usize>, NodeSet> = HashMap::new();
        for key in &keys {
            if !cache.contains_key(key) {
                let nodes = self.build_nodes(key)?;
                cache.insert(key.clone(), nodes);
            }
        }
        let h = self.cap.h;
        Ok(local
            .par_iter()
            .zip(keys.par_iter())
            .map(|(x, key)| cache[key].sum_at(x, h))
            .collect())
    }

    /// Evaluation on a whole lattice as a sum of separable plane waves: the
    /// sample array is a complex matrix product of per-row and per-column
    /// phase factors.
    pub fn evaluate_lattice(
        &self,
        grid: &Lattice,
        motion: Option<&RigidMotion>,
    ) -> Result<SampledField> {
        grid.validate()?;
        let n = self.cap.n;
        if grid.dim() != n {
            return Err(LabError::domain("lattice dimension does not match the cap"));
        }
        let identity = RigidMotion::identity(n);
        let m = motion.unwrap_or(&identity);
        m.validate()?;
        let reach = grid
            .corners()
            .iter()
            .map(|c| norm(&m.apply_inverse(c)))
            .fold(0.0, f64::max);
        let nodes = self.nodes(reach)?;
        let values = lattice_sum(&nodes, grid, m, self.cap.h);
        Ok(SampledField {
            grid: grid.clone(),
            values,
            meta: FieldMeta {
                n,
                h: self.cap.h,
                alpha: self.cap.alpha,
                omega0: self.cap.omega0.clone(),
                epsilon_cap: self.cap.epsilon_cap,
                motion: motion.cloned(),
                multiplier: self.multiplier,
                fourier_nodes: nodes.len(),
            },
        })
    }
}

const NODE_BLOCK: usize = 512;

fn lattice_sum(nodes: &NodeSet, grid: &Lattice, m: &RigidMotion, h: f64) -> Vec<Complex64> {
    let n = grid.dim();
    let cols = grid.count[n - 1];
    let rows: usize = grid.count[..n - 1].iter().product();
    let origin: Vec<f64> = grid
        .origin
        .iter()
        .zip(&m.translation)
        .map(|(a, b)| a - b)
        .collect();
    let base = m.rotate_back(&origin);
    // lattice generators in the cap's local coordinates
    let gens: Vec<Vec<f64>> = (0..n)
        .map(|d| m.rotation[d].iter().map(|v| v * grid.step[d]).collect())
        .collect();
    let row_index: Vec<Vec<usize>> = (0..rows)
        .map(|r| {
            let mut idx = vec![0usize; n - 1];
            let mut rem = r;
            for d in (0..n - 1).rev() {
                idx[d] = rem % grid.count[d];
                rem /= grid.count[d];
            }
            idx
        })
        .collect();

    let mut out_re = Array2::<f64>::zeros((rows, cols));
    let mut out_im = Array2::<f64>::zeros((rows, cols));
    let total = nodes.len();
    let mut start = 0;
    while start < total {
        let end = (start + NODE_BLOCK).min(total);
        let qb = end - start;
        let mut c_re = Array2::<f64>::zeros((rows, qb));
        let mut c_im = Array2::<f64>::zeros((rows, qb));
        let mut e_re = Array2::<f64>::zeros((qb, cols));
        let mut e_im = Array2::<f64>::zeros((qb, cols));
        for (j, q) in (start..end).enumerate() {
            let xi = nodes.xi(q);
            let w = nodes.weights[q];
            let b = dot(&base, xi) / h;
            let g: Vec<f64> = gens.iter().map(|gd| dot(gd, xi) / h).collect();
            for (r, idx) in row_index.iter().enumerate() {
                let phase = b + idx
                    .iter()
                    .zip(&g)
                    .map(|(&i, gd)| i as f64 * gd)
                    .sum::<f64>();
                let (s, c) = phase.sin_cos();
                c_re[[r, j]] = w * c;
                c_im[[r, j]] = w * s;
            }
            for i in 0..cols {
                let (s, c) = (i as f64 * g[n - 1]).sin_cos();
                e_re[[j, i]] = c;
                e_im[[j, i]] = s;
            }
        }
        general_mat_mul(1.0, &c_re, &e_re, 1.0, &mut out_re);
        general_mat_mul(-1.0, &c_im, &e_im, 1.0, &mut out_re);
        general_mat_mul(1.0, &c_re, &e_im, 1.0, &mut out_im);
        general_mat_mul(1.0, &c_im, &e_re, 1.0, &mut out_im);
        start = end;
    }
    out_re
        .iter()
        .zip(out_im.iter())
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect()
}

/// `T_α` at each point with the default resolution rule and node budget.
pub fn evaluate(
    cap: &SpectralCap,
    points: &[Vec<f64>],
    motion: Option<&RigidMotion>,
) -> Result<Vec<Complex64>> {
    Evaluator::new(cap.clone())?.evaluate(points, motion)
}

/// Metadata carried alongside sampled values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub n: usize,
    pub h: f64,
    pub alpha: f64,
    pub omega0: Vec<f64>,
    pub epsilon_cap: f64,
    pub motion: Option<RigidMotion>,
    pub multiplier: FourierMultiplier,
    pub fourier_nodes: usize,
}

/// Complex samples of a field on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub grid: Lattice,
    pub values: Vec<Complex64>,
    pub meta: FieldMeta,
}

pub const FIELD_FORMAT: &str = "quasimode-lab/sampled-field";
pub const FIELD_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct FieldHeader {
    format: String,
    version: u32,
    encoding: String,
    n: usize,
    h: f64,
    alpha: f64,
    omega0: Vec<f64>,
    epsilon_cap: f64,
    motion: Option<RigidMotion>,
    multiplier: FourierMultiplier,
    fourier_nodes: usize,
    grid: Lattice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<[f64; 2]>>,
}

impl SampledField {
    fn header(&self, encoding: &str) -> FieldHeader {
        FieldHeader {
            format: FIELD_FORMAT.to_string(),
            version: FIELD_FORMAT_VERSION,
            encoding: encoding.to_string(),
            n: self.meta.n,
            h: self.meta.h,
            alpha: self.meta.alpha,
            omega0: self.meta.omega0.clone(),
            epsilon_cap: self.meta.epsilon_cap,
            motion: self.meta.motion.clone(),
            multiplier: self.meta.multiplier,
            fourier_nodes: self.meta.fourier_nodes,
            grid: self.grid.clone(),
            values: None,
        }
    }

    fn from_header(header: FieldHeader, values: Vec<Complex64>) -> Result<Self> {
        if header.format != FIELD_FORMAT {
            return Err(LabError::domain(format!(
                "unknown field format {:?}",
                header.format
            )));
        }
        header.grid.validate()?;
        if values.len() != header.grid.len() {
            return Err(LabError::domain(format!(
                "field holds {} samples but the grid has {}",
                values.len(),
                header.grid.len()
            )));
        }
        Ok(SampledField {
            grid: header.grid,
            values,
            meta: FieldMeta {
                n: header.n,
                h: header.h,
                alpha: header.alpha,
                omega0: header.omega0,
                epsilon_cap: header.epsilon_cap,
                motion: header.motion,
                multiplier: header.multiplier,
                fourier_nodes: header.fourier_nodes,
            },
        })
    }

    /// One-line JSON header, a newline, then `(re, im)` pairs as
    /// little-endian `f64` in row-major order.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &self.header("f64le-pairs"))?;
        out.write_all(b"\n")?;
        for v in &self.values {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: BufRead>(mut input: R) -> Result<Self> {
        let mut line = Vec::new();
        input.read_until(b'\n', &mut line)?;
        let header: FieldHeader = serde_json::from_slice(&line)?;
        if header.encoding != "f64le-pairs" {
            return Err(LabError::domain(format!(
                "unexpected encoding {:?}",
                header.encoding
            )));
        }
        let count = header.grid.len();
        let mut bytes = vec![0u8; count * 16];
        input.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        SampledField::from_header(header, values)
    }

    /// Pure-JSON variant for small grids.
    pub fn to_json(&self) -> Result<String> {
        let mut header = self.header("json");
        header.values = Some(self.values.iter().map(|v| [v.re, v.im]).collect());
        Ok(serde_json::to_string_pretty(&header)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut header: FieldHeader = serde_json::from_str(text)?;
        let values = header
            .values
            .take()
            .ok_or_else(|| LabError::domain("JSON field has no values"))?
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect();
        SampledField::from_header(header, values)
    }

    /// `(Σ |v|² · cell volume)^{1/2}`.
    pub fn sampled_l2(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        (crate::quadrature::pairwise_sum(&sq) * self.grid.cell_volume()).sqrt()
    }
}

/// The non-oscillation box of `T_α`: half-width `ε h^{1−2α}` along `ω₀` and
/// `ε h^{1−α}` across it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubeBox {
    pub center: Vec<f64>,
    /// Unit axes in ambient coordinates; the first is the long axis.
    pub axes: Vec<Vec<f64>>,
    pub half_widths: Vec<f64>,
}

impl TubeBox {
    /// `samples` evenly spaced points per axis, corners included.
    pub fn sample_points(&self, samples: usize) -> Vec<Vec<f64>> {
        let n = self.center.len();
        let s = samples.max(1);
        let offsets: Vec<f64> = (0..s)
            .map(|i| {
                if s == 1 {
                    0.0
                } else {
                    -1.0 + 2.0 * i as f64 / (s - 1) as f64
                }
            })
            .collect();
        let total = s.pow(n as u32);
        (0..total)
            .map(|mut flat| {
                let mut x = self.center.clone();
                for d in (0..n).rev() {
                    let t = offsets[flat % s] * self.half_widths[d];
                    flat /= s;
                    for (xi, ai) in x.iter_mut().zip(&self.axes[d]) {
                        *xi += t * ai;
                    }
                }
                x
            })
            .collect()
    }
}

pub fn tube_region(cap: &SpectralCap, eps: f64, motion: Option<&RigidMotion>) -> Result<TubeBox> {
    cap.validate()?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(LabError::domain(format!("tube eps = {eps} outside (0, 1)")));
    }
    let h = cap.h;
    let mut half_widths = vec![eps * h.powf(1.0 - 2.0 * cap.alpha)];
    half_widths.extend(std::iter::repeat_n(
        eps * h.powf(1.0 - cap.alpha),
        cap.n - 1,
    ));
    let frame = cap.frame();
    let (center, axes) = match motion {
        Some(m) => (
            m.translation.clone(),
            frame.iter().map(|a| m.rotate(a)).collect(),
        ),
        None => (vec![0.0; cap.n], frame),
    };
    Ok(TubeBox {
        center,
        axes,
        half_widths,
    })
}

/// Outcome of sampling `|T_α|` over its non-oscillation box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TubeCheck {
    /// `min |T_α| · h^{(n−1)(1−α)/2}` over the samples.
    pub constant: f64,
    pub min_abs: f64,
    pub samples: usize,
}

pub fn verify_tube_bound(cap: &SpectralCap, eps: f64, samples: usize) -> Result<TubeCheck> {
    if !(eps > 0.0 && eps <= DEFAULT_TUBE_EPS) {
        return Err(LabError::domain(format!(
            "tube check needs 0 < eps <= 0.1, got {eps}"
        )));
    }
    let tube = tube_region(cap, eps, None)?;
    let points = tube.sample_points(samples);
    let values = evaluate(cap, &points, None)?;
    let min_abs = values
        .iter()
        .map(|v| v.norm())
        .fold(f64::INFINITY, f64::min);
    let scale = cap.h.powf((cap.n as f64 - 1.0) * (1.0 - cap.alpha) / 2.0);
    Ok(TubeCheck {
        constant: min_abs * scale,
        min_abs,
        samples: points.len(),
    })
}
