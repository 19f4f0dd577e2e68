//! Problem parameters and the derived exponents `α_p`, `α_σ`, `α`.

use alloc::format;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign pattern of the two perturbations.
///
/// `PlusMinus` is `C₁ = +C₀, C₂ = −1`; `MinusPlus` is `C₁ = −C₀, C₂ = +1`;
/// `Critical` drops both (`C₁ = C₂ = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    PlusMinus,
    MinusPlus,
    Critical,
}

impl Branch {
    /// `(C₁, C₂)` for a coupling `C₀`.
    pub fn couplings(self, c0: f64) -> (f64, f64) {
        match self {
            Branch::PlusMinus => (c0, -1.0),
            Branch::MinusPlus => (-c0, 1.0),
            Branch::Critical => (0.0, 0.0),
        }
    }
}

/// Admissibility of `(p, σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Admissibility {
    /// `1 < p < 1 + 4/N`, `0 < σ < min{N/4, 1}`.
    Strict,
    /// `0 < σ < min{N/2, 1}`; the potential is then only form-bounded and
    /// `ε`-regularity of the decomposition is weaker.
    Relaxed,
}

/// Request passed to [`make_params`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRequest {
    pub dim: usize,
    /// `None` derives `p` from `α_p = α_σ`.
    pub p: Option<f64>,
    pub sigma: f64,
    pub c0: f64,
    pub branch: Branch,
    pub e0: f64,
    pub admissibility: Admissibility,
    /// Require `α_p = α_σ > 1` (the regime with the `|t|` blow-up rate).
    pub require_balanced_rate: bool,
}

impl ParamRequest {
    pub fn new(dim: usize, sigma: f64, c0: f64, branch: Branch) -> Self {
        ParamRequest {
            dim,
            p: None,
            sigma,
            c0,
            branch,
            e0: 1.0,
            admissibility: Admissibility::Strict,
            require_balanced_rate: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    #[serde(rename = "N")]
    pub dim: usize,
    pub p: f64,
    pub sigma: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    pub branch: Branch,
    pub alpha_p: f64,
    pub alpha_sigma: f64,
    /// Common value when `α_p = α_σ`.
    pub alpha: Option<f64>,
    pub omega: Option<f64>,
    #[serde(rename = "E0")]
    pub e0: f64,
    pub admissibility: Admissibility,
}

/// `α_p = 2 − N(p−1)/2`.
pub fn alpha_p(dim: usize, p: f64) -> f64 {
    2.0 - dim as f64 * (p - 1.0) / 2.0
}

/// `α_σ = 2 − 2σ`.
pub fn alpha_sigma(sigma: f64) -> f64 {
    2.0 - 2.0 * sigma
}

/// The `p` with `α_p = α_σ`, namely `1 + 4σ/N`.
pub fn balanced_p(dim: usize, sigma: f64) -> f64 {
    1.0 + 4.0 * sigma / dim as f64
}

/// The `σ` with `α_p = α_σ`, namely `N(p−1)/4`.
pub fn balanced_sigma(dim: usize, p: f64) -> f64 {
    dim as f64 * (p - 1.0) / 4.0
}

pub fn make_params(req: ParamRequest) -> Result<ProblemParams> {
    let n = req.dim;
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidParams(format!("dimension N = {n} not in {{1, 2, 3}}")));
    }
    let nf = n as f64;
    for (name, v) in [("sigma", req.sigma), ("C0", req.c0), ("E0", req.e0)] {
        if !v.is_finite() {
            return Err(Error::InvalidParams(format!("{name} is not finite")));
        }
    }
    let sigma_cap = match req.admissibility {
        Admissibility::Strict => (nf / 4.0).min(1.0),
        Admissibility::Relaxed => (nf / 2.0).min(1.0),
    };
    if !(req.sigma > 0.0 && req.sigma < sigma_cap) {
        return Err(Error::InvalidParams(format!(
            "sigma = {} outside (0, {sigma_cap})",
            req.sigma
        )));
    }
    let p = match req.p {
        Some(p) => p,
        None => balanced_p(n, req.sigma),
    };
    if !(p.is_finite() && p > 1.0 && p < 1.0 + 4.0 / nf) {
        return Err(Error::InvalidParams(format!("p = {p} outside (1, 1 + 4/N)")));
    }
    if req.c0 < 0.0 {
        return Err(Error::InvalidParams(format!("C0 = {} is negative", req.c0)));
    }
    let ap = alpha_p(n, p);
    let asg = alpha_sigma(req.sigma);
    let balanced = req.p.is_none() || (ap - asg).abs() <= 4.0 * f64::EPSILON * ap.abs().max(1.0);
    let alpha = if balanced { Some(asg) } else { None };
    if req.require_balanced_rate {
        match alpha {
            Some(a) if a > 1.0 => {}
            Some(a) => {
                return Err(Error::InvalidParams(format!("alpha = {a} <= 1 in the balanced-rate regime")))
            }
            None => {
                return Err(Error::InvalidParams(format!(
                    "alpha_p = {ap} differs from alpha_sigma = {asg}"
                )))
            }
        }
    }
    Ok(ProblemParams {
        dim: n,
        p,
        sigma: req.sigma,
        c0: req.c0,
        branch: req.branch,
        alpha_p: ap,
        alpha_sigma: asg,
        alpha,
        omega: None,
        e0: req.e0,
        admissibility: req.admissibility,
    })
}

impl ProblemParams {
    /// `(C₁, C₂)`.
    pub fn couplings(&self) -> (f64, f64) {
        self.branch.couplings(self.c0)
    }

    pub fn c1(&self) -> f64 {
        self.couplings().0
    }

    pub fn c2(&self) -> f64 {
        self.couplings().1
    }

    /// Critical exponent `4/N`.
    pub fn crit_exponent(&self) -> f64 {
        4.0 / self.dim as f64
    }

    /// `α` when balanced, else `α_σ` (the order of the potential).
    pub fn alpha_or_sigma(&self) -> f64 {
        self.alpha.unwrap_or(self.alpha_sigma)
    }

    /// `α` or an error naming the imbalance.
    pub fn require_alpha(&self) -> Result<f64> {
        self.alpha.ok_or_else(|| {
            Error::InvalidParams(format!(
                "alpha_p = {} differs from alpha_sigma = {}",
                self.alpha_p, self.alpha_sigma
            ))
        })
    }

    pub fn with_c0(mut self, c0: f64) -> Self {
        self.c0 = c0;
        self
    }

    pub fn with_branch(mut self, branch: Branch) -> Self {
        self.branch = branch;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn derive(n: usize, sigma: f64) -> Result<ProblemParams> {
        make_params(ParamRequest::new(n, sigma, 1.0, Branch::PlusMinus))
    }

    #[test]
    fn derived_exponents_examples() {
        let a = derive(1, 0.2).unwrap();
        assert!((a.p - 1.8).abs() < 1e-15);
        assert!((a.alpha.unwrap() - 1.6).abs() < 1e-15);
        let b = derive(2, 0.4).unwrap();
        assert!((b.p - 1.8).abs() < 1e-15);
        assert!((b.alpha.unwrap() - 1.2).abs() < 1e-15);
        assert!(derive(1, 0.3).is_err());
    }

    #[test]
    fn relaxed_mode_widens_sigma() {
        let mut req = ParamRequest::new(1, 0.3, 1.0, Branch::PlusMinus);
        req.admissibility = Admissibility::Relaxed;
        assert!(make_params(req).is_ok());
    }

    #[test]
    fn balanced_rate_regime_requires_alpha_above_one() {
        let mut req = ParamRequest::new(3, 0.6, 1.0, Branch::PlusMinus);
        req.require_balanced_rate = true;
        assert!(make_params(req).is_err());
        req.sigma = 0.4;
        assert!(make_params(req).is_ok());
    }

    #[test]
    fn rejects_out_of_range_p() {
        let mut req = ParamRequest::new(1, 0.2, 1.0, Branch::PlusMinus);
        req.p = Some(5.0);
        assert!(make_params(req).is_err());
        req.p = Some(1.0);
        assert!(make_params(req).is_err());
    }

    #[test]
    fn branch_couplings() {
        assert_eq!(Branch::PlusMinus.couplings(2.0), (2.0, -1.0));
        assert_eq!(Branch::MinusPlus.couplings(2.0), (-2.0, 1.0));
        assert_eq!(Branch::Critical.couplings(2.0), (0.0, 0.0));
    }

    proptest! {
        #[test]
        fn p_sigma_derivation_is_involutive(n in 1usize..=3, frac in 0.01f64..0.99) {
            let sigma = frac * (n as f64 / 4.0).min(1.0);
            let p = balanced_p(n, sigma);
            let back = balanced_sigma(n, p);
            prop_assert!((back - sigma).abs() <= 4.0 * f64::EPSILON * sigma.max(1.0));
            let params = derive(n, sigma).unwrap();
            prop_assert!((params.alpha_p - params.alpha_sigma).abs() <= 8.0 * f64::EPSILON);
        }
    }
}
