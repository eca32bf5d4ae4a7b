//! Rigid motions of `ℝⁿ` and rectangular sampling lattices.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `x ↦ R x + t` with `R` orthogonal. Rows of `rotation` are rows of `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub rotation: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
}

impl RigidMotion {
    pub fn identity(n: usize) -> Self {
        let rotation = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        RigidMotion {
            rotation,
            translation: vec![0.0; n],
        }
    }

    pub fn new(rotation: Vec<Vec<f64>>, translation: Vec<f64>) -> Result<Self> {
        let m = RigidMotion {
            rotation,
            translation,
        };
        m.validate()?;
        Ok(m)
    }

    /// Rotation by `angle` in the `(i, j)` coordinate plane.
    pub fn plane_rotation(n: usize, i: usize, j: usize, angle: f64) -> Self {
        let mut m = RigidMotion::identity(n);
        let (s, c) = angle.sin_cos();
        m.rotation[i][i] = c;
        m.rotation[i][j] = -s;
        m.rotation[j][i] = s;
        m.rotation[j][j] = c;
        m
    }

    pub fn with_translation(mut self, t: Vec<f64>) -> Self {
        self.translation = t;
        self
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.translation.len();
        if self.rotation.len() != n || self.rotation.iter().any(|r| r.len() != n) {
            return Err(LabError::domain("rigid motion has inconsistent dimensions"));
        }
        for i in 0..n {
            for j in 0..n {
                let rtr: f64 = (0..n)
                    .map(|m| self.rotation[m][i] * self.rotation[m][j])
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (rtr - want).abs() > ORTHOGONALITY_TOLERANCE {
                    return Err(LabError::domain(format!(
                        "rotation is not orthogonal: (R^T R)[{i}][{j}] = {rtr}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn rotate(&self, x: &[f64]) -> Vec<f64> {
        self.rotation.iter().map(|row| dot(row, x)).collect()
    }

    /// `Rᵀ x`.
    pub fn rotate_back(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|j| (0..n).map(|i| self.rotation[i][j] * x[i]).sum())
            .collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rotate(x)
            .iter()
            .zip(&self.translation)
            .map(|(a, b)| a + b)
            .collect()
    }

    /// `M⁻¹ x = Rᵀ (x − t)`.
    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        let shifted: Vec<f64> = x
            .iter()
            .zip(&self.translation)
            .map(|(a, b)| a - b)
            .collect();
        self.rotate_back(&shifted)
    }

    pub fn inverse(&self) -> Self {
        let n = self.dim();
        let rotation: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| self.rotation[j][i]).collect())
            .collect();
        let t = self.rotate_back(&self.translation);
        RigidMotion {
            rotation,
            translation: t.into_iter().map(|v| -v).collect(),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidMotion) -> Self {
        let n = self.dim();
        let rotation: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|m| self.rotation[i][m] * other.rotation[m][j])
                            .sum()
                    })
                    .collect()
            })
            .collect();
        RigidMotion {
            rotation,
            translation: self.apply(&other.translation),
        }
    }
}

/// An axis-aligned rectangular lattice `origin + Σ_d i_d · step_d · e_d`,
/// `0 ≤ i_d < count_d`, stored in row-major order (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub origin: Vec<f64>,
    pub step: Vec<f64>,
    pub count: Vec<usize>,
}

impl Lattice {
    pub fn new(origin: Vec<f64>, step: Vec<f64>, count: Vec<usize>) -> Result<Self> {
        let l = Lattice {
            origin,
            step,
            count,
        };
        l.validate()?;
        Ok(l)
    }

    /// Cell midpoints of the box `[lo, hi]` cut into `cells[d]` cells per axis.
    pub fn midpoints(lo: &[f64], hi: &[f64], cells: &[usize]) -> Result<Self> {
        let step: Vec<f64> = lo
            .iter()
            .zip(hi)
            .zip(cells)
            .map(|((a, b), &c)| (b - a) / c as f64)
            .collect();
        let origin: Vec<f64> = lo.iter().zip(&step).map(|(a, s)| a + s / 2.0).collect();
        Lattice::new(origin, step, cells.to_vec())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.origin.len();
        if self.step.len() != n || self.count.len() != n || n == 0 {
            return Err(LabError::domain("lattice has inconsistent dimensions"));
        }
        if self.count.contains(&0) {
            return Err(LabError::domain("lattice counts must be positive"));
        }
        if self.step.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(LabError::domain(
                "lattice steps must be finite and non-negative",
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn len(&self) -> usize {
        self.count.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.step.iter().product()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0usize; self.dim()];
        let mut rem = flat;
        for d in (0..self.dim()).rev() {
            idx[d] = rem % self.count[d];
            rem /= self.count[d];
        }
        idx.iter()
            .enumerate()
            .map(|(d, &i)| self.origin[d] + i as f64 * self.step[d])
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// All `2^n` corner points.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|d| {
                        let i = if mask >> d & 1 == 1 {
                            self.count[d] - 1
                        } else {
                            0
                        };
                        self.origin[d] + i as f64 * self.step[d]
                    })
                    .collect()
            })
            .collect()
    }
}
