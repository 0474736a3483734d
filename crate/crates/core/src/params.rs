//! Scalar parameter algebra.
//!
//! The rescaling exponents `(alpha, gamma, beta)` are tied together by
//!
//! * `beta = (alpha + 2 - gamma) / (theta + 2)` (stationary profile survives the rescaling),
//! * `N beta - 2 gamma = 0` (charge independent of `eps`),
//! * `beta > 1` (internal energy of the rescaled profile blows up as `eps -> 0`),
//!
//! and the nonlinearity power must lie in `(1 + theta/N, 1 + (2 + theta)/N)`.
//! Relations are checked, never repaired.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Spatial dimension `N`.
    pub dim: usize,
    /// Riesz order, `0 < theta < N`.
    pub theta: f64,
    /// Nonlinearity power.
    pub p: f64,
    /// Mass in the unscaled equation.
    pub m: f64,
    /// Frequency of the stationary profile.
    pub omega: f64,
    /// Semiclassical parameter.
    pub eps: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    /// Initial velocity.
    pub v: Vec<f64>,
}

/// One broken relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    NonFinite,
    VelocityDimension,
    ThetaRange,
    PowerRange,
    BetaRelation,
    ChargeNormalization,
    BetaAboveOne,
    NonPositive,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::NonFinite => "all fields finite",
            Violation::VelocityDimension => "v has N components",
            Violation::ThetaRange => "0<θ<N",
            Violation::PowerRange => "p∈(1+θ/N, 1+(2+θ)/N)",
            Violation::BetaRelation => "β=(α+2−γ)/(θ+2)",
            Violation::ChargeNormalization => "Nβ−2γ=0",
            Violation::BetaAboveOne => "β>1",
            Violation::NonPositive => "m>0, ω>0, ε>0",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, v: Violation) -> bool {
        self.violations.contains(&v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub charge_exponent: f64,
    pub j_exponent: f64,
    pub j_exponent_reduced: f64,
    pub kappa_exponent: f64,
    pub omega_eps: f64,
}

/// Coefficients linking the unscaled equation to the rescaled problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GceCoefficients {
    /// Exponent of `eps` in front of the profile for the unscaled initial datum.
    pub data_amplitude_exponent: f64,
    /// Multiplicative factor of the rescaling `psi -> psi_hat`.
    pub transform_amplitude: f64,
    /// Spatial dilation `1/sqrt(m)`.
    pub space_scale: f64,
}

/// Solve the two linear relations for `(alpha, beta)` given `gamma`.
///
/// Returns `(alpha, beta)` with `beta = 2 gamma / N`.
pub fn solve_line(dim: usize, theta: f64, gamma: f64) -> Result<(f64, f64)> {
    let n = dim as f64;
    if !(theta > 0.0 && theta < n) {
        return Err(Error::InvalidParameter(format!("θ={theta} outside (0, {dim})")));
    }
    if !gamma.is_finite() || gamma <= n / 2.0 {
        return Err(Error::InvalidParameter(format!(
            "β would be ≤ 1 (γ={gamma} ≤ N/2={})",
            n / 2.0
        )));
    }
    let beta = 2.0 * gamma / n;
    let alpha = beta * (theta + 2.0) - 2.0 + gamma;
    Ok((alpha, beta))
}

fn close_rel(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1.0)
}

impl ModelParams {
    /// Build from the independent inputs, deriving `(alpha, beta)` from `gamma`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        theta: f64,
        p: f64,
        gamma: f64,
        eps: f64,
        omega: f64,
        m: f64,
        v: Vec<f64>,
    ) -> Result<Self> {
        let (alpha, beta) = solve_line(dim, theta, gamma)?;
        let params = ModelParams { dim, theta, p, m, omega, eps, alpha, gamma, beta, v };
        let report = params.validate();
        if !report.is_ok() {
            let names: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::InvalidParameter(format!("violated: {}", names.join(", "))));
        }
        Ok(params)
    }

    /// All fields given explicitly; nothing is checked.
    #[allow(clippy::too_many_arguments)]
    pub fn raw(
        dim: usize,
        theta: f64,
        p: f64,
        m: f64,
        omega: f64,
        eps: f64,
        alpha: f64,
        gamma: f64,
        beta: f64,
        v: Vec<f64>,
    ) -> Self {
        ModelParams { dim, theta, p, m, omega, eps, alpha, gamma, beta, v }
    }

    pub fn validate(&self) -> ValidationResult {
        let mut out = ValidationResult::default();
        let scalars = [self.theta, self.p, self.m, self.omega, self.eps, self.alpha, self.gamma, self.beta];
        if scalars.iter().chain(self.v.iter()).any(|x| !x.is_finite()) {
            out.violations.push(Violation::NonFinite);
            return out;
        }
        let n = self.dim as f64;
        if self.v.len() != self.dim {
            out.violations.push(Violation::VelocityDimension);
        }
        if !(self.m > 0.0 && self.omega > 0.0 && self.eps > 0.0) {
            out.violations.push(Violation::NonPositive);
        }
        if !(self.theta > 0.0 && self.theta < n) {
            out.violations.push(Violation::ThetaRange);
        }
        let lo = 1.0 + self.theta / n;
        let hi = 1.0 + (2.0 + self.theta) / n;
        if !(self.p > lo && self.p < hi) {
            out.violations.push(Violation::PowerRange);
        }
        let beta_rel = (self.alpha + 2.0 - self.gamma) / (self.theta + 2.0);
        if !close_rel(self.beta, beta_rel) {
            out.violations.push(Violation::BetaRelation);
        }
        if (n * self.beta - 2.0 * self.gamma).abs() > REL_TOL {
            out.violations.push(Violation::ChargeNormalization);
        }
        if self.beta <= 1.0 {
            out.violations.push(Violation::BetaAboveOne);
        }
        out
    }

    /// The analysis behind the model needs `N >= 3`; lower dimensions are evaluated but flagged.
    pub fn theory_regime(&self) -> bool {
        self.dim >= 3
    }

    /// Frequency of the rescaled stationary profile, `omega * eps^(2 - 2 beta)`.
    pub fn omega_eps(&self) -> f64 {
        self.omega * self.eps.powf(2.0 - 2.0 * self.beta)
    }

    pub fn kappa_exponent(&self) -> f64 {
        self.gamma * (2.0 * self.p - 1.0) - self.alpha
    }

    /// Coupling in front of the nonlocal term.
    pub fn kappa(&self) -> f64 {
        self.eps.powf(self.kappa_exponent())
    }

    pub fn scaling_report(&self) -> ScalingReport {
        let n = self.dim as f64;
        ScalingReport {
            charge_exponent: n * self.beta - 2.0 * self.gamma,
            j_exponent: 2.0 - 2.0 * self.gamma + self.beta * (n - 2.0),
            j_exponent_reduced: 2.0 * (1.0 - self.beta),
            kappa_exponent: self.kappa_exponent(),
            omega_eps: self.omega_eps(),
        }
    }

    pub fn gce_coefficients(&self) -> Result<GceCoefficients> {
        if self.p == 1.0 {
            return Err(Error::InvalidParameter("p = 1 makes the rescaling singular".into()));
        }
        if self.m <= 0.0 {
            return Err(Error::InvalidParameter(format!("m={} must be positive", self.m)));
        }
        let pm1 = self.p - 1.0;
        Ok(GceCoefficients {
            data_amplitude_exponent: (self.gamma - self.alpha) / (2.0 * pm1),
            transform_amplitude: self.m.powf(-self.theta / (4.0 * pm1))
                * self.eps.powf((self.alpha - self.gamma * (2.0 * self.p - 1.0)) / (2.0 * pm1)),
            space_scale: 1.0 / self.m.sqrt(),
        })
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        ModelParams { eps, ..self.clone() }
    }

    pub fn with_omega(&self, omega: f64) -> Self {
        ModelParams { omega, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn physical(gamma: f64) -> ModelParams {
        ModelParams::new(3, 2.0, 2.0, gamma, 0.5, 1.0, 1.0, vec![0.0; 3]).unwrap()
    }

    #[test]
    fn physical_case_validates() {
        let p = ModelParams::raw(3, 2.0, 2.0, 1.0, 1.0, 0.5, 9.0, 3.0, 2.0, vec![0.0; 3]);
        // 3 alpha + 6 = 11 gamma and beta = 2 gamma / 3
        assert_eq!(3.0 * p.alpha + 6.0, 11.0 * p.gamma);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn gamma_zero_rescaling_fails_beta() {
        let p = ModelParams::raw(3, 2.0, 2.0, 1.0, 1.0, 0.5, 2.0, 0.0, 1.0, vec![0.0; 3]);
        let r = p.validate();
        assert!(r.contains(Violation::BetaAboveOne));
        assert!(!r.contains(Violation::BetaRelation));
        assert_eq!(Violation::BetaAboveOne.to_string(), "β>1");
    }

    #[test]
    fn power_out_of_range() {
        let p = ModelParams::raw(3, 2.0, 3.0, 1.0, 1.0, 0.5, 9.0, 3.0, 2.0, vec![0.0; 3]);
        let r = p.validate();
        assert!(r.contains(Violation::PowerRange));
        assert_eq!(r.violations.len(), 1);
    }

    #[test]
    fn solve_line_examples() {
        let (a, b) = solve_line(3, 2.0, 3.0).unwrap();
        assert_eq!((a, b), (9.0, 2.0));
        let (a, b) = solve_line(3, 2.0, 3.3).unwrap();
        assert!((a - 10.1).abs() < 1e-12 && (b - 2.2).abs() < 1e-12);
        let err = solve_line(3, 2.0, 1.5).unwrap_err();
        assert!(err.to_string().contains("β would be ≤ 1"));
    }

    #[test]
    fn omega_eps_and_kappa() {
        let p = physical(3.0);
        assert!((p.omega_eps() - 4.0).abs() < 1e-12);
        assert_eq!(p.kappa_exponent(), 0.0);
        assert_eq!(p.kappa(), 1.0);
        let mut q = p.clone();
        q.beta = 1.0;
        for eps in [0.1, 0.5, 2.0] {
            assert_eq!(q.with_eps(eps).omega_eps(), q.omega);
        }
    }

    #[test]
    fn gce_examples() {
        let p = physical(3.0);
        let c = p.gce_coefficients().unwrap();
        assert_eq!(c.data_amplitude_exponent, -3.0);
        assert!((c.transform_amplitude - 1.0).abs() < 1e-15);
        assert_eq!(c.space_scale, 1.0);
        let mut q = p.clone();
        q.m = 4.0;
        let c = q.gce_coefficients().unwrap();
        assert!((c.transform_amplitude - 0.5).abs() < 1e-15);
        assert!((c.space_scale - 0.5).abs() < 1e-15);
        q.p = 1.0;
        assert!(q.gce_coefficients().is_err());
    }

    #[test]
    fn new_rejects_bad_power() {
        assert!(ModelParams::new(3, 2.0, 3.0, 3.0, 0.5, 1.0, 1.0, vec![0.0; 3]).is_err());
        assert!(ModelParams::new(3, 2.0, 2.0, 1.0, 0.5, 1.0, 1.0, vec![0.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn solved_params_validate(dim in 1usize..=4, tfrac in 0.05f64..0.95, pfrac in 0.05f64..0.95,
                                  gextra in 1e-3f64..5.0, eps in 0.05f64..2.0) {
            let n = dim as f64;
            let theta = tfrac * n;
            let p = 1.0 + theta / n + pfrac * 2.0 / n;
            let gamma = n / 2.0 + gextra;
            let params = ModelParams::new(dim, theta, p, gamma, eps, 1.3, 1.0, vec![0.1; dim]).unwrap();
            let r = params.scaling_report();
            prop_assert!(r.charge_exponent.abs() < 1e-12);
            prop_assert!((r.j_exponent - r.j_exponent_reduced).abs() < 1e-12);
            let one = params.with_eps(1.0);
            prop_assert_eq!(one.omega_eps(), one.omega);
            prop_assert_eq!(one.kappa(), 1.0);
        }
    }
}
