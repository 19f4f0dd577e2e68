//! Power nonlinearities `f(z) = |z|^{4/N} z`, `g(z) = |z|^{p−1} z`, their
//! potentials `F`, `G` and real-Fréchet differentials at a nonnegative real
//! base.
//!
//! Every kind is a member of the family `z ↦ |z|^q z` (potential
//! `|z|^{q+2}/(q+2)`), so the catalogue stores only `q`.

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    /// `f(z) = |z|^{4/N} z`
    #[serde(rename = "f")]
    CritForce,
    /// `F(z) = |z|^{2+4/N}/(2+4/N)`
    #[serde(rename = "F")]
    CritPotential,
    /// `g(z) = |z|^{p−1} z`
    #[serde(rename = "g")]
    SubForce,
    /// `G(z) = |z|^{p+1}/(p+1)`
    #[serde(rename = "G")]
    SubPotential,
}

/// `z ↦ |z|^q z` and its potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Power {
    pub q: f64,
}

impl Power {
    pub fn critical(dim: usize) -> Self {
        Power { q: 4.0 / dim as f64 }
    }
    pub fn subcritical(p: f64) -> Self {
        Power { q: p - 1.0 }
    }
    pub fn of_kind(kind: Kind, dim: usize, p: f64) -> Self {
        match kind {
            Kind::CritForce | Kind::CritPotential => Self::critical(dim),
            Kind::SubForce | Kind::SubPotential => Self::subcritical(p),
        }
    }

    #[inline]
    pub fn force(&self, z: Complex64) -> Complex64 {
        let m2 = z.re * z.re + z.im * z.im;
        if m2 == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        z * m2.powf(self.q / 2.0)
    }

    /// `|z|^{q+2}/(q+2)`.
    #[inline]
    pub fn potential(&self, z: Complex64) -> f64 {
        let m2 = z.re * z.re + z.im * z.im;
        m2.powf(self.q / 2.0 + 1.0) / (self.q + 2.0)
    }

    /// `|z|^{q+2}/(q+2)` from `|z|²`.
    #[inline]
    pub fn potential_of_density(&self, rho: f64) -> f64 {
        rho.max(0.0).powf(self.q / 2.0 + 1.0) / (self.q + 2.0)
    }

    /// First differential of the force at a real base `a ≥ 0`.
    #[inline]
    pub fn dforce(&self, a: f64, h: Complex64) -> Complex64 {
        let aq = a.powf(self.q);
        Complex64::new((self.q + 1.0) * aq * h.re, aq * h.im)
    }

    /// Second differential `d²(force)(a)(h, k)`.
    #[inline]
    pub fn d2force(&self, a: f64, h: Complex64, k: Complex64) -> Complex64 {
        let q = self.q;
        let c = a.powf(q - 1.0);
        Complex64::new(
            (q + 1.0) * q * c * h.re * k.re + q * c * h.im * k.im,
            q * c * (h.re * k.im + h.im * k.re),
        )
    }

    /// `dF(a)(h) = Re(force(a) h̄)`.
    #[inline]
    pub fn dpotential(&self, a: f64, h: Complex64) -> f64 {
        a.powf(self.q + 1.0) * h.re
    }

    /// `d²F(a)(h, k) = Re(dforce(a)(h) k̄)`.
    #[inline]
    pub fn d2potential(&self, a: f64, h: Complex64, k: Complex64) -> f64 {
        let aq = a.powf(self.q);
        (self.q + 1.0) * aq * h.re * k.re + aq * h.im * k.im
    }

    /// Taylor coefficients of the force up to third order at a base `a > 0`.
    pub fn taylor(&self, a: f64) -> Taylor {
        let q = self.q;
        let a1 = a.powf(q);
        let a2 = a.powf(q - 1.0);
        let a3 = a.powf(q - 2.0);
        Taylor {
            value: a * a1,
            r_a: (q + 1.0) * a1,
            i_b: a1,
            r_aa: (q + 1.0) * q / 2.0 * a2,
            r_bb: q / 2.0 * a2,
            i_ab: q * a2,
            r_aaa: (q + 1.0) * q * (q - 1.0) / 6.0 * a3,
            r_abb: q * (q - 1.0) / 2.0 * a3,
            i_aab: q * (q - 1.0) / 2.0 * a3,
            i_bbb: q / 2.0 * a3,
        }
    }
}

/// Coefficients of
/// `Re force(a + x + iy) = value + r_a x + r_aa x² + r_bb y² + r_aaa x³ + r_abb x y² + O(4)`,
/// `Im force(a + x + iy) = i_b y + i_ab x y + i_aab x² y + i_bbb y³ + O(4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Taylor {
    pub value: f64,
    pub r_a: f64,
    pub i_b: f64,
    pub r_aa: f64,
    pub r_bb: f64,
    pub i_ab: f64,
    pub r_aaa: f64,
    pub r_abb: f64,
    pub i_aab: f64,
    pub i_bbb: f64,
}

fn check_base(base: f64) -> Result<()> {
    if !(base.is_finite() && base >= 0.0) {
        return Err(Error::InvalidInput(alloc::format!("base {base} must be a nonnegative real")));
    }
    Ok(())
}

/// `kind(z)`; potentials are returned on the real axis.
pub fn nonlinearity_eval(kind: Kind, dim: usize, p: f64, z: Complex64) -> Complex64 {
    let pw = Power::of_kind(kind, dim, p);
    match kind {
        Kind::CritForce | Kind::SubForce => pw.force(z),
        Kind::CritPotential | Kind::SubPotential => Complex64::new(pw.potential(z), 0.0),
    }
}

/// First real-Fréchet differential of `kind` at a real base.
pub fn real_differential(kind: Kind, dim: usize, p: f64, base: f64, dir: Complex64) -> Result<Complex64> {
    check_base(base)?;
    let pw = Power::of_kind(kind, dim, p);
    Ok(match kind {
        Kind::CritForce | Kind::SubForce => pw.dforce(base, dir),
        Kind::CritPotential | Kind::SubPotential => Complex64::new(pw.dpotential(base, dir), 0.0),
    })
}

/// Second real-Fréchet differential of `kind` at a real base, evaluated on
/// `(h, k)`.
pub fn real_second_differential(
    kind: Kind,
    dim: usize,
    p: f64,
    base: f64,
    h: Complex64,
    k: Complex64,
) -> Result<Complex64> {
    check_base(base)?;
    let pw = Power::of_kind(kind, dim, p);
    Ok(match kind {
        Kind::CritForce | Kind::SubForce => pw.d2force(base, h, k),
        Kind::CritPotential | Kind::SubPotential => Complex64::new(pw.d2potential(base, h, k), 0.0),
    })
}
