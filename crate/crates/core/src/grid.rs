//! Staggered radial finite-volume grids.
//!
//! Cells `[e_i, e_{i+1}]` cover `[0, rmax]` with `e_0 = 0`; samples sit at
//! cell midpoints `r_i`, so the origin is never a node. Quadrature weights are
//! the exact cell volumes `∫ r^{N−1} dr` and fluxes cross faces with area
//! `e^{N−1}`. The face at the origin carries no flux (even parity) and the
//! outer face carries a homogeneous Dirichlet condition.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Tridiagonal;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Spacing {
    Uniform,
    /// Cell widths grow by `ratio` from the origin outward.
    Geometric { ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    spacing: Spacing,
    faces: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `c_i = area(e_{i+1}) / (r_{i+1} − r_i)`; the last entry couples to the
    /// Dirichlet boundary at `rmax`.
    couplings: Vec<f64>,
}

/// Surface measure of the unit sphere in `ℝᴺ` (`2` for `N = 1`).
pub fn sphere_surface(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => f64::NAN,
    }
}

fn face_area(dim: usize, e: f64) -> f64 {
    match dim {
        1 => 1.0,
        2 => e,
        _ => e * e,
    }
}

/// `∫_a^b r^{k} dr` for `k > −1`.
fn power_integral(k: f64, a: f64, b: f64) -> f64 {
    if k == 0.0 {
        b - a
    } else {
        (b.powf(k + 1.0) - a.powf(k + 1.0)) / (k + 1.0)
    }
}

impl RadialGrid {
    pub fn uniform(dim: usize, n: usize, rmax: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidGrid(format!("need at least 4 cells, got {n}")));
        }
        if !(rmax.is_finite() && rmax > 0.0) {
            return Err(Error::InvalidGrid(format!("rmax = {rmax} must be positive")));
        }
        let h = rmax / n as f64;
        let mut faces: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        faces[n] = rmax;
        Self::build(dim, Spacing::Uniform, faces)
    }

    /// Uniform grid with spacing close to `h`.
    pub fn with_spacing(dim: usize, h: f64, rmax: f64) -> Result<Self> {
        let n = (rmax / h).round().max(4.0) as usize;
        Self::uniform(dim, n, rmax)
    }

    pub fn geometric(dim: usize, n: usize, rmax: f64, ratio: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidGrid(format!("need at least 4 cells, got {n}")));
        }
        if !(ratio.is_finite() && ratio >= 1.0) {
            return Err(Error::InvalidGrid(format!("geometric ratio {ratio} must be >= 1")));
        }
        if !(rmax.is_finite() && rmax > 0.0) {
            return Err(Error::InvalidGrid(format!("rmax = {rmax} must be positive")));
        }
        let mut faces = Vec::with_capacity(n + 1);
        faces.push(0.0);
        let mut w = 1.0;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += w;
            faces.push(acc);
            w *= ratio;
        }
        let scale = rmax / acc;
        for e in faces.iter_mut() {
            *e *= scale;
        }
        faces[n] = rmax;
        Self::build(dim, Spacing::Geometric { ratio }, faces)
    }

    /// Grid from explicit cell faces `0 = e_0 < e_1 < … < e_n`.
    pub fn from_faces(dim: usize, spacing: Spacing, faces: Vec<f64>) -> Result<Self> {
        Self::build(dim, spacing, faces)
    }

    fn build(dim: usize, spacing: Spacing, faces: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if faces.len() < 5 || faces[0] != 0.0 {
            return Err(Error::InvalidGrid("faces must start at 0 and bound at least 4 cells".into()));
        }
        if faces.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidGrid("faces must be strictly increasing and finite".into()));
        }
        let n = faces.len() - 1;
        if spacing == Spacing::Uniform {
            return Ok(Self::build_uniform(dim, faces[n], n));
        }
        let nodes: Vec<f64> = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let d = dim as f64;
        let weights: Vec<f64> = faces
            .windows(2)
            .map(|w| (w[1].powi(dim as i32) - w[0].powi(dim as i32)) / d)
            .collect();
        let mut couplings = Vec::with_capacity(n);
        for i in 0..n - 1 {
            couplings.push(face_area(dim, faces[i + 1]) / (nodes[i + 1] - nodes[i]));
        }
        couplings.push(face_area(dim, faces[n]) / (faces[n] - nodes[n - 1]));
        Ok(RadialGrid { dim, spacing, faces, nodes, weights, couplings })
    }

    /// Geometry from the nominal step: differences of rounded nodes would
    /// carry `eps·r` each, which the discrete operators amplify by `1/h`.
    fn build_uniform(dim: usize, rmax: f64, n: usize) -> Self {
        let h = rmax / n as f64;
        let mut faces: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        faces[n] = rmax;
        let nodes = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let hn = h.powi(dim as i32);
        let weights = (0..n as u64)
            .map(|i| ((i + 1).pow(dim as u32) - i.pow(dim as u32)) as f64 * hn / dim as f64)
            .collect();
        let mut couplings: Vec<f64> = faces[1..n].iter().map(|&f| face_area(dim, f) / h).collect();
        couplings.push(face_area(dim, rmax) / (0.5 * h));
        RadialGrid { dim, spacing: Spacing::Uniform, faces, nodes, weights, couplings }
    }

    /// Same cell structure with every length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidGrid(format!("scale factor {factor} must be positive")));
        }
        let faces = self.faces.iter().map(|e| e * factor).collect();
        Self::build(self.dim, self.spacing, faces)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn spacing(&self) -> Spacing {
        self.spacing
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }
    /// Cell volumes `∫_{cell} r^{N−1} dr` (no sphere factor).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }
    pub fn rmax(&self) -> f64 {
        self.faces[self.faces.len() - 1]
    }
    /// Width of the innermost cell.
    pub fn h_min(&self) -> f64 {
        self.faces[1]
    }
    /// Width of the outermost cell.
    pub fn h_max(&self) -> f64 {
        let n = self.faces.len();
        self.faces[n - 1] - self.faces[n - 2]
    }
    pub fn surface(&self) -> f64 {
        sphere_surface(self.dim)
    }

    /// Cell averages of `r^k` against `r^{N−1}dr`; exact for the singular
    /// weights `k = −2σ` as long as `N + k > 0`.
    pub fn power_average(&self, k: f64) -> Result<Vec<f64>> {
        let d = self.dim as f64;
        if !(d + k > 0.0) {
            return Err(Error::InvalidInput(format!("r^{k} is not integrable in dimension {}", self.dim)));
        }
        Ok(self
            .faces
            .windows(2)
            .zip(&self.weights)
            .map(|(w, &vol)| power_integral(d - 1.0 + k, w[0], w[1]) / vol)
            .collect())
    }

    /// `A u` for the symmetric stiffness matrix, `−Δ_h = W⁻¹A`.
    pub fn apply_stiffness<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        let n = self.len();
        debug_assert_eq!(u.len(), n);
        let c = &self.couplings;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            // differences first: keeps the rounding floor at eps·|u′|/h
            let right = if i + 1 < n { u[i] - u[i + 1] } else { u[i] };
            let mut acc = right.scale(c[i]);
            if i > 0 {
                acc += (u[i] - u[i - 1]).scale(c[i - 1]);
            }
            out.push(acc);
        }
        out
    }

    /// Discrete radial Laplacian `Δ_h u`.
    pub fn laplacian<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        let mut a = self.apply_stiffness(u);
        for (ai, w) in a.iter_mut().zip(&self.weights) {
            *ai = ai.scale(-1.0 / w);
        }
        a
    }

    /// Symmetric tridiagonal stiffness matrix `A`.
    pub fn stiffness_matrix(&self) -> Tridiagonal<f64> {
        let n = self.len();
        let c = &self.couplings;
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            diag.push(c[i] + if i > 0 { c[i - 1] } else { 0.0 });
        }
        let off: Vec<f64> = c[..n - 1].iter().map(|x| -x).collect();
        Tridiagonal::new(off.clone(), diag, off)
    }

    /// `Σ c_i |u_{i+1} − u_i|² + c_bnd |u_{n−1}|²` so that
    /// `‖∇u‖₂² = S_N · grad_form(u) = S_N · uᴴ A u`.
    pub fn grad_form<T: Scalar>(&self, u: &[T]) -> f64 {
        let n = self.len();
        let c = &self.couplings;
        let mut acc = 0.0;
        for i in 0..n - 1 {
            acc += c[i] * (u[i + 1] - u[i]).abs2();
        }
        acc + c[n - 1] * u[n - 1].abs2()
    }

    /// Second-order `∂_r u`, even across the origin and odd across `rmax`.
    pub fn derivative<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        let n = self.len();
        let r = &self.nodes;
        let rmax = self.rmax();
        let mut out = Vec::with_capacity(n);
        if self.spacing == Spacing::Uniform {
            // node differences carry eps·r of rounding; the nominal step does not
            let inv = 0.5 * n as f64 / rmax;
            for i in 0..n {
                let f0 = if i == 0 { u[0] } else { u[i - 1] };
                let f2 = if i + 1 == n { -u[n - 1] } else { u[i + 1] };
                out.push((f2 - f0).scale(inv));
            }
            return out;
        }
        for i in 0..n {
            let (x0, f0) = if i == 0 { (-r[0], u[0]) } else { (r[i - 1], u[i - 1]) };
            let (x2, f2) = if i + 1 == n { (2.0 * rmax - r[n - 1], -u[n - 1]) } else { (r[i + 1], u[i + 1]) };
            let h1 = r[i] - x0;
            let h2 = x2 - r[i];
            let a = -h2 / (h1 * (h1 + h2));
            let c = h1 / (h2 * (h1 + h2));
            // weights sum to zero; rounded weights would not, leaving eps·u/h
            out.push((f0 - u[i]).scale(a) + (f2 - u[i]).scale(c));
        }
        out
    }

    /// Scaling generator `Λu = (N/2) u + r ∂_r u`.
    pub fn lambda_op<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        let half_n = self.dim as f64 / 2.0;
        self.derivative(u)
            .into_iter()
            .zip(u.iter().zip(&self.nodes))
            .map(|(du, (&ui, &r))| ui.scale(half_n) + du.scale(r))
            .collect()
    }

    /// Index `i` with `r_i <= r < r_{i+1}`, clamped to the node range.
    pub fn locate(&self, r: f64) -> usize {
        let nodes = &self.nodes;
        match nodes.binary_search_by(|x| x.partial_cmp(&r).unwrap_or(core::cmp::Ordering::Less)) {
            Ok(i) => i.min(nodes.len() - 1),
            Err(0) => 0,
            Err(i) => (i - 1).min(nodes.len() - 1),
        }
    }
}
