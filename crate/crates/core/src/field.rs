//! Sampled radial fields and their norms.
//!
//! All integrals carry the sphere factor `S_N`, so `norm_l2` is the genuine
//! `L²(ℝᴺ)` norm of the radial function.

use alloc::sync::Arc;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct RadialField<T> {
    grid: Arc<RadialGrid>,
    values: Vec<T>,
}

pub type RealField = RadialField<f64>;
pub type ComplexField = RadialField<Complex64>;

impl<T: Scalar> RadialField<T> {
    /// Rejects length mismatches and non-finite samples.
    pub fn new(grid: Arc<RadialGrid>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(alloc::format!(
                "field has {} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let f = RadialField { grid, values };
        f.check_finite("field")?;
        Ok(f)
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> T) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        RadialField { grid, values: alloc::vec![T::zero(); n] }
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { what, index }),
            None => Ok(()),
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> RadialField<U> {
        RadialField { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise `f(r, u(r))`.
    pub fn map_r<U: Scalar>(&self, f: impl Fn(f64, T) -> U) -> RadialField<U> {
        let values = self.grid.nodes().iter().zip(&self.values).map(|(&r, &v)| f(r, v)).collect();
        RadialField { grid: self.grid.clone(), values }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert!(Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        RadialField { grid: self.grid.clone(), values }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }
    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }
    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| v.scale(s))
    }
    /// `self += s · other`.
    pub fn axpy(&mut self, s: T, other: &Self) {
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    /// `∫ |u|² dx`.
    pub fn norm_l2_sq(&self) -> f64 {
        self.grid.surface() * self.values.iter().zip(self.grid.weights()).map(|(v, w)| v.abs2() * w).sum::<f64>()
    }
    pub fn norm_l2(&self) -> f64 {
        self.norm_l2_sq().sqrt()
    }
    /// `∫ |∇u|² dx`.
    pub fn grad_sq(&self) -> f64 {
        self.grid.surface() * self.grid.grad_form(&self.values)
    }
    pub fn norm_h1_sq(&self) -> f64 {
        self.norm_l2_sq() + self.grad_sq()
    }
    pub fn norm_h1(&self) -> f64 {
        self.norm_h1_sq().sqrt()
    }
    /// `∫ |u|^q dx`.
    pub fn lq_pow(&self, q: f64) -> f64 {
        self.grid.surface()
            * self.values.iter().zip(self.grid.weights()).map(|(v, w)| v.abs2().powf(q / 2.0) * w).sum::<f64>()
    }
    pub fn norm_lq(&self, q: f64) -> f64 {
        self.lq_pow(q).powf(1.0 / q)
    }
    /// `∫ |x|² |u|² dx`.
    pub fn virial(&self) -> f64 {
        let w = self.weighted_norm(|r| r);
        w * w
    }
    /// `‖u‖_{Σ¹}² = ‖u‖_{H¹}² + ‖|x|u‖₂²`.
    pub fn norm_sigma1_sq(&self) -> f64 {
        self.norm_h1_sq() + self.virial()
    }
    pub fn norm_sigma1(&self) -> f64 {
        self.norm_sigma1_sq().sqrt()
    }
    /// `∫ |x|^k |u|² dx` using exact cell averages of `r^k`.
    pub fn power_weighted_sq(&self, k: f64) -> Result<f64> {
        let avg = self.grid.power_average(k)?;
        Ok(self.grid.surface()
            * self.values.iter().zip(self.grid.weights()).zip(&avg).map(|((v, w), a)| v.abs2() * w * a).sum::<f64>())
    }
    /// `‖ω(|x|) u‖₂` for a smooth weight evaluated at the nodes.
    pub fn weighted_norm(&self, weight: impl Fn(f64) -> f64) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(self.grid.weights())
            .zip(self.grid.nodes())
            .map(|((v, w), &r)| {
                let m = weight(r);
                v.abs2() * m * m * w
            })
            .sum();
        (self.grid.surface() * s).sqrt()
    }
    /// `‖ω u‖_{H¹}` for a smooth weight `ω` evaluated at the nodes.
    pub fn weighted_h1_norm(&self, weight: impl Fn(f64) -> f64) -> f64 {
        let wu: Vec<T> =
            self.values.iter().zip(self.grid.nodes()).map(|(&v, &r)| v.scale(weight(r))).collect();
        let f = RadialField { grid: self.grid.clone(), values: wu };
        f.norm_h1()
    }
    /// `(u, v)₂ = Re ∫ u v̄ dx`.
    pub fn inner(&self, other: &Self) -> f64 {
        self.grid.surface()
            * self
                .values
                .iter()
                .zip(&other.values)
                .zip(self.grid.weights())
                .map(|((a, b), w)| a.re_dot(*b) * w)
                .sum::<f64>()
    }
    pub fn laplacian(&self) -> Self {
        RadialField { grid: self.grid.clone(), values: self.grid.laplacian(&self.values) }
    }
    pub fn lambda_op(&self) -> Self {
        RadialField { grid: self.grid.clone(), values: self.grid.lambda_op(&self.values) }
    }
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.magnitude()).fold(0.0, f64::max)
    }
}

impl RealField {
    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

impl ComplexField {
    pub fn re(&self) -> RealField {
        self.map(|v| v.re)
    }
    pub fn im(&self) -> RealField {
        self.map(|v| v.im)
    }
    /// `P⁺ + i P⁻`.
    pub fn from_re_im(re: &RealField, im: &RealField) -> ComplexField {
        let values = re.values.iter().zip(&im.values).map(|(&a, &b)| Complex64::new(a, b)).collect();
        RadialField { grid: re.grid.clone(), values }
    }
    pub fn times_i(&self) -> ComplexField {
        self.map(|v| Complex64::new(-v.im, v.re))
    }
}

/// Composite Gauss–Legendre quadrature of `f` on `[a, b]`; used as an
/// independent oracle in tests and diagnostics.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    // 8-point rule
    const X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
    const W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let c = a + (k as f64 + 0.5) * h;
        let half = 0.5 * h;
        for (x, w) in X.iter().zip(&W) {
            acc += w * half * (f(c - half * x) + f(c + half * x));
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sphere_surface;
    use alloc::vec;
    use proptest::prelude::*;

    fn grid(dim: usize, n: usize, rmax: f64) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::uniform(dim, n, rmax).unwrap())
    }

    #[test]
    fn gaussian_mass_matches_oracle() {
        for dim in 1..=3 {
            let g = grid(dim, 120_000, 12.0);
            let u = RealField::from_fn(g, |r| (-r * r / 2.0).exp()).unwrap();
            let oracle = sphere_surface(dim)
                * gauss_legendre(|r| r.powi(dim as i32 - 1) * (-r * r).exp(), 0.0, 12.0, 200);
            assert!((u.norm_l2_sq() - oracle).abs() < 1e-8 * oracle, "dim {dim}: {} vs {oracle}", u.norm_l2_sq());
        }
        // N = 1 closed form √π
        let g = grid(1, 40_000, 12.0);
        let u = RealField::from_fn(g, |r| (-r * r / 2.0).exp()).unwrap();
        assert!((u.norm_l2_sq() - core::f64::consts::PI.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn zero_field_norms_vanish() {
        let g = grid(2, 64, 4.0);
        let z = ComplexField::zeros(g);
        assert_eq!(z.norm_l2(), 0.0);
        assert_eq!(z.norm_h1(), 0.0);
        assert_eq!(z.norm_lq(3.0), 0.0);
        assert_eq!(z.norm_sigma1(), 0.0);
        assert_eq!(z.weighted_norm(|r| r), 0.0);
    }

    #[test]
    fn sigma1_decomposition() {
        let g = grid(1, 256, 10.0);
        let u = RealField::from_fn(g, |r| 1.0 / r.cosh()).unwrap();
        let lhs = u.norm_sigma1_sq();
        assert!((lhs - (u.norm_h1_sq() + u.virial())).abs() < 1e-14 * lhs);
    }

    #[test]
    fn non_finite_rejected() {
        let g = grid(1, 8, 1.0);
        let err = RealField::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap_err();
        assert_eq!(err, Error::NonFinite { what: "field", index: 2 });
    }

    #[test]
    fn monomial_exponential_norms_refine() {
        // r^k e^{−r}: coarse vs 10× refined reference, relative 1e-8
        for dim in 1..=3 {
            for k in 0..=4 {
                let f = |r: f64| r.powi(k) * (-r).exp();
                let coarse = RealField::from_fn(grid(dim, 200_000, 40.0), f).unwrap().norm_l2_sq();
                let fine = RealField::from_fn(grid(dim, 2_000_000, 40.0), f).unwrap().norm_l2_sq();
                assert!((coarse - fine).abs() < 1e-8 * fine, "dim {dim} k {k}: {coarse} vs {fine}");
            }
        }
    }

    proptest! {
        #[test]
        fn inner_product_is_symmetric_and_bounded(a in -2.0f64..2.0, b in 0.1f64..3.0, c in -1.0f64..1.0) {
            let g = grid(2, 300, 8.0);
            let u = ComplexField::from_fn(g.clone(), |r| Complex64::new(a * (-b * r * r).exp(), c * r * (-r * r).exp())).unwrap();
            let v = ComplexField::from_fn(g, |r| Complex64::new((-r).exp(), a * (-r * r).exp())).unwrap();
            let uv = u.inner(&v);
            prop_assert!((uv - v.inner(&u)).abs() <= 1e-13 * (1.0 + uv.abs()));
            prop_assert!(uv.abs() <= u.norm_l2() * v.norm_l2() * (1.0 + 1e-12));
        }
    }
}
