//! Constrained minimizers of
//!
//! ```text
//! J(u) = ½∫|∇u|² − (1/p)∫(I_θ * |u|^p)|u|^p      on  Σ_ν = { ‖u‖₂² = ν }
//! ```
//!
//! computed by a semi-implicit normalized gradient flow, and certified by
//! residuals only (the minimizer is not assumed unique).

use std::sync::Arc;

use log::{debug, info};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{det_sum, AxisMap, GridOps, GridSpec, ScalarField};
use crate::riesz::RieszOperator;

/// Relative slack on `J` increases attributed to roundoff.
const ROUNDOFF_SLACK: f64 = 1e-13;
/// Charge fraction allowed to leave the box in a rescaling.
const OUT_OF_BOX_MASS: f64 = 1e-8;

/// `J`, `E_ω` and friends for fixed `(θ, p)` on one grid.
#[derive(Debug, Clone)]
pub struct EnergyFunctional {
    riesz: Arc<RieszOperator>,
    p: f64,
}

/// The three integrals every functional here is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrals {
    /// `‖∇u‖²`
    pub kinetic: f64,
    /// `‖u‖²`
    pub charge: f64,
    /// `∫(I_θ * |u|^p)|u|^p`
    pub hartree: f64,
}

#[derive(Debug, Clone)]
pub enum SeedProfile {
    Gaussian { width: f64, center: Vec<f64> },
    Field(ScalarField),
}

#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub dtau: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: SeedProfile,
    /// Clip negative overshoot before renormalizing.
    pub project_positive: bool,
}

impl FlowOptions {
    /// `dtau = 0.1 h²`, `tol = 1e-8`, `2e5` iterations, Gaussian seed of width `L/6`.
    pub fn defaults(grid: &GridSpec) -> Self {
        FlowOptions {
            dtau: 0.1 * grid.spacing().powi(2),
            tol: 1e-8,
            max_iters: 200_000,
            seed: SeedProfile::Gaussian { width: grid.extent / 6.0, center: vec![0.0; grid.dim] },
            project_positive: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub u: ScalarField,
    pub nu: f64,
    pub omega: f64,
    pub j_value: f64,
    pub residual_flow: f64,
    pub pohozaev_residuals: [f64; 3],
    pub nehari_residual: f64,
    pub iterations: usize,
}

/// Scalar record written next to the profile snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateMeta {
    pub nu: f64,
    pub omega: f64,
    pub j_value: f64,
    pub residual_flow: f64,
    pub pohozaev_residuals: [f64; 3],
    pub nehari_residual: f64,
    pub iterations: usize,
    pub stationarity: f64,
    pub sigma: f64,
}

/// Per-iteration trace of the flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowStep {
    pub j: f64,
    pub dtau: f64,
    pub increment: f64,
}

/// `σ = (N+θ−(N−2)p) / (2ω(p−1)) · c_min`.
pub fn sigma(dim: usize, theta: f64, p: f64, omega: f64, c_min: f64) -> Result<f64> {
    let n = dim as f64;
    if !(c_min > 0.0) {
        return Err(Error::InvalidParameter(format!("c_min={c_min} must be positive")));
    }
    let num = n + theta - (n - 2.0) * p;
    let den = 2.0 * omega * (p - 1.0);
    if !(num > 0.0 && den > 0.0) {
        return Err(Error::InvalidParameter("σ prefactor not positive".into()));
    }
    Ok(num / den * c_min)
}

/// `J(u_τ)` for `u_τ(x) = τ^{N/2} u(τx)` from the two integrals of `u`.
pub fn dilated_j(dim: usize, theta: f64, p: f64, kinetic: f64, hartree: f64, tau: f64) -> f64 {
    let n = dim as f64;
    0.5 * tau * tau * kinetic - tau.powf(n * p - theta - n) / p * hartree
}

impl EnergyFunctional {
    pub fn new(riesz: Arc<RieszOperator>, p: f64) -> Self {
        EnergyFunctional { riesz, p }
    }

    pub fn grid(&self) -> &GridSpec {
        self.riesz.grid()
    }

    pub fn riesz(&self) -> &Arc<RieszOperator> {
        &self.riesz
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn theta(&self) -> f64 {
        self.riesz.theta()
    }

    pub fn dim(&self) -> usize {
        self.grid().dim
    }

    pub fn integrals(&self, u: &ScalarField) -> Result<Integrals> {
        Ok(Integrals { kinetic: u.grad_norm_sq(), charge: u.charge(), hartree: self.riesz.hartree_energy(u, self.p)? })
    }

    pub fn j(&self, u: &ScalarField) -> Result<f64> {
        let i = self.integrals(u)?;
        Ok(0.5 * i.kinetic - i.hartree / self.p)
    }

    /// L²-gradient of `J`: `−Δu − 2 (I_θ * |u|^p)|u|^{p−2}u`.
    pub fn grad_j(&self, u: &ScalarField) -> Result<ScalarField> {
        let nl = self.riesz.nonlocal_term(u, self.p)?;
        let g = u.laplacian().scale(-1.0).axpy(-2.0, &nl)?;
        Ok(if u.is_real() { g.real_part() } else { g })
    }

    pub fn e_omega(&self, u: &ScalarField, omega: f64) -> Result<f64> {
        let i = self.integrals(u)?;
        Ok(0.5 * i.kinetic + omega * i.charge - i.hartree / self.p)
    }

    /// `½‖∇u‖² + ω‖u‖² − D(u)`, zero on the Nehari set.
    pub fn nehari_residual(&self, u: &ScalarField, omega: f64) -> Result<f64> {
        let i = self.integrals(u)?;
        Ok(0.5 * i.kinetic + omega * i.charge - i.hartree)
    }

    /// Multiplier of `½ΔU + (I_θ*|U|^p)|U|^{p−2}U = ωU` tested against `U`.
    pub fn extract_omega(&self, u: &ScalarField) -> Result<f64> {
        let i = self.integrals(u)?;
        omega_from(&i)
    }

    /// Pohožaev, Nehari and energy-line residuals, each divided by `‖∇U‖²`.
    ///
    /// The third entry compares `E_ω(U)` with the energy `2ω(p−1)‖U‖²/(N+θ−(N−2)p)`
    /// that the first two identities force.
    pub fn pohozaev_residuals(&self, u: &ScalarField, omega: f64) -> Result<[f64; 3]> {
        let i = self.integrals(u)?;
        Ok(self.residuals_from(&i, omega))
    }

    fn residuals_from(&self, i: &Integrals, omega: f64) -> [f64; 3] {
        let n = self.dim() as f64;
        let (p, theta) = (self.p, self.theta());
        let poho = 0.5 * (n - 2.0) * i.kinetic + omega * n * i.charge - (n + theta) / p * i.hartree;
        let nehari = 0.5 * i.kinetic + omega * i.charge - i.hartree;
        let energy = 0.5 * i.kinetic + omega * i.charge - i.hartree / p;
        let implied = 2.0 * omega * (p - 1.0) * i.charge / (n + theta - (n - 2.0) * p);
        [poho / i.kinetic, nehari / i.kinetic, (energy - implied) / i.kinetic]
    }

    /// `‖grad_J(U) + 2ωU‖₂ / ‖∇U‖₂`.
    pub fn stationarity(&self, u: &ScalarField, omega: f64) -> Result<f64> {
        let g = self.grad_j(u)?.axpy(2.0 * omega, u)?;
        Ok((g.charge() / u.grad_norm_sq()).sqrt())
    }

    pub fn sigma_of(&self, u: &ScalarField, omega: f64) -> Result<f64> {
        sigma(self.dim(), self.theta(), self.p, omega, self.e_omega(u, omega)?)
    }

    fn seed_field(&self, seed: &SeedProfile) -> Result<ScalarField> {
        match seed {
            SeedProfile::Gaussian { width, center } => {
                if !(*width > 0.0) {
                    return Err(Error::InvalidParameter("seed width must be positive".into()));
                }
                let c = center.clone();
                let w2 = 2.0 * width * width;
                Ok(ScalarField::from_fn_real(*self.grid(), move |x| {
                    let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
                    (-r2 / w2).exp()
                }))
            }
            SeedProfile::Field(f) => {
                if !f.grid().same_as(self.grid()) {
                    return Err(Error::GridMismatch("seed field grid".into()));
                }
                Ok(f.real_part())
            }
        }
    }

    /// Minimize `J` on `Σ_ν`.
    pub fn normalized_gradient_flow(&self, nu: f64, opts: &FlowOptions) -> Result<GroundState> {
        self.normalized_gradient_flow_traced(nu, opts, |_| {})
    }

    /// As [`Self::normalized_gradient_flow`], reporting every accepted step.
    pub fn normalized_gradient_flow_traced<F: FnMut(&FlowStep)>(
        &self,
        nu: f64,
        opts: &FlowOptions,
        mut trace: F,
    ) -> Result<GroundState> {
        if !(nu > 0.0) {
            return Err(Error::InvalidParameter(format!("ν={nu} must be positive")));
        }
        if !(opts.dtau > 0.0) {
            return Err(Error::InvalidParameter("dtau must be positive".into()));
        }
        let grid = *self.grid();
        let ops = GridOps::shared(&grid);
        let seed = self.seed_field(&opts.seed)?;
        if seed.values().iter().any(|z| z.re < 0.0) || !(seed.charge() > 0.0) {
            return Err(Error::InvalidParameter("seed profile must be positive".into()));
        }
        let mut u = renormalize(&seed, nu);
        let mut state = FlowState::new(self, &u)?;
        let mut dtau = opts.dtau;
        let dtau_floor = opts.dtau * 2f64.powi(-40);
        let mut increment = f64::INFINITY;
        let mut iters = 0;
        while iters < opts.max_iters {
            iters += 1;
            // explicit nonlocal and multiplier terms, implicit diffusion; the
            // multiplier keeps exact solutions as the only fixed points
            let omega = state.omega;
            let mut spec: Vec<Complex64> = u
                .values()
                .par_iter()
                .zip(&state.conv)
                .map(|(z, c)| {
                    let a = z.re;
                    let nl = if a != 0.0 { c * a.abs().powf(self.p - 2.0) * a } else { 0.0 };
                    Complex64::from(a + dtau * (nl - omega * a))
                })
                .collect();
            ops.fft.forward(&mut spec);
            let scale = 1.0 / grid.len() as f64;
            spec.par_iter_mut().zip(&ops.k2).for_each(|(z, k2)| *z *= scale / (1.0 + 0.5 * dtau * k2));
            ops.fft.inverse(&mut spec);
            let mut next: Vec<f64> = spec.iter().map(|z| z.re).collect();
            if opts.project_positive {
                next.iter_mut().for_each(|x| *x = x.max(0.0));
            }
            let candidate = renormalize(&ScalarField::from_real(grid, next)?, nu);
            let cand_state = FlowState::new(self, &candidate)?;
            if cand_state.j > state.j + ROUNDOFF_SLACK * state.j.abs() {
                dtau *= 0.5;
                debug!("flow backtrack at iter {iters}: dtau -> {dtau:e}");
                if dtau < dtau_floor {
                    return Err(Error::NotConverged { iters, residual: increment });
                }
                continue;
            }
            increment = candidate.sub(&u)?.sup_norm() / dtau;
            u = candidate;
            state = cand_state;
            trace(&FlowStep { j: state.j, dtau, increment });
            if increment < opts.tol {
                break;
            }
        }
        if !(increment < opts.tol) {
            return Err(Error::NotConverged { iters, residual: increment });
        }
        if !(state.j < 0.0) {
            return Err(Error::NotMinimizer(state.j));
        }
        info!("flow converged: {iters} iterations, J = {:.12e}", state.j);
        self.certify(u, nu, increment, iters)
    }

    /// Populate multiplier and residuals for a profile on `Σ_ν`.
    pub fn certify(&self, u: ScalarField, nu: f64, residual_flow: f64, iterations: usize) -> Result<GroundState> {
        let i = self.integrals(&u)?;
        let omega = omega_from(&i)?;
        let res = self.residuals_from(&i, omega);
        Ok(GroundState {
            nu,
            omega,
            j_value: 0.5 * i.kinetic - i.hartree / self.p,
            residual_flow,
            pohozaev_residuals: res,
            nehari_residual: res[1],
            iterations,
            u,
        })
    }

    /// Repeat the flow with `ν ← σ(ν)` for the given number of rounds.
    pub fn self_consistent_sigma(&self, nu0: f64, opts: &FlowOptions, rounds: usize) -> Result<(GroundState, Vec<f64>)> {
        let mut nu = nu0;
        let mut history = Vec::new();
        let mut last = None;
        for _ in 0..rounds.max(1) {
            let mut o = opts.clone();
            if let Some(prev) = &last {
                let GroundState { u, .. } = prev;
                o.seed = SeedProfile::Field(u.clone());
            }
            let gs = self.normalized_gradient_flow(nu, &o)?;
            nu = self.sigma_of(&gs.u, gs.omega)?;
            history.push(nu);
            last = Some(gs);
        }
        Ok((last.expect("at least one round"), history))
    }

    /// `w(x) = τ^{(θ+2)/(2(p−1))} u(τx)` with `τ = √(ω_target/ω_u)`.
    pub fn sphere_to_nehari(&self, u: &ScalarField, omega_target: f64) -> Result<ScalarField> {
        if !(omega_target > 0.0) {
            return Err(Error::InvalidParameter("target ω must be positive".into()));
        }
        let omega = self.extract_omega(u)?;
        if !(omega > 0.0) {
            return Err(Error::InvalidParameter(format!("input multiplier {omega} is not positive")));
        }
        self.dilate(u, (omega_target / omega).sqrt())
    }

    /// `u(x) = τ^{(θ+2)/(2(p−1))} w(τx)` with `τ = (ν/‖w‖²)^{(p−1)/(θ+2−N(p−1))}`.
    pub fn nehari_to_sphere(&self, w: &ScalarField, nu_target: f64) -> Result<ScalarField> {
        if !(nu_target > 0.0) {
            return Err(Error::InvalidParameter("target ν must be positive".into()));
        }
        let n = self.dim() as f64;
        let (p, theta) = (self.p, self.theta());
        let tau = (nu_target / w.charge()).powf((p - 1.0) / (theta + 2.0 - n * (p - 1.0)));
        self.dilate(w, tau)
    }

    fn dilate(&self, u: &ScalarField, tau: f64) -> Result<ScalarField> {
        let grid = *u.grid();
        let amp = tau.powf((self.theta() + 2.0) / (2.0 * (self.p - 1.0)));
        if (tau - 1.0).abs() < 1e-15 {
            return Ok(u.scale(amp));
        }
        if tau < 1.0 {
            // samples come from |y| < τL only; the rest of u must be negligible
            let lim = tau * grid.extent;
            let lost = det_sum(grid.len(), |i| {
                let x = grid.position(i);
                if (0..grid.dim).any(|a| x[a].abs() >= lim) {
                    u.values()[i].norm_sqr()
                } else {
                    0.0
                }
            }) * grid.cell_volume();
            if lost > OUT_OF_BOX_MASS * u.charge() {
                return Err(Error::OutOfBox(format!(
                    "dilation τ={tau:.4} pushes {:.2e} of the charge outside the box",
                    lost / u.charge()
                )));
            }
        }
        let map = AxisMap { scale: tau, offset: vec![0.0; grid.dim] };
        Ok(u.resample(grid, &map)?.scale(amp))
    }

    /// A dilation `τ ∈ (0, 1]` with `J(u_τ) < 0`, found by bisection on the
    /// two-term scaling law of `J`.
    pub fn find_negative_dilation(&self, u: &ScalarField) -> Result<(f64, f64)> {
        let i = self.integrals(u)?;
        let (dim, theta, p) = (self.dim(), self.theta(), self.p);
        if !(i.hartree > 0.0) {
            return Err(Error::InvalidParameter("D(u) = 0: degenerate field".into()));
        }
        let jt = |tau: f64| dilated_j(dim, theta, p, i.kinetic, i.hartree, tau);
        if jt(1.0) < 0.0 {
            return Ok((1.0, jt(1.0)));
        }
        // J < 0 on (0, τ_b); bracket τ_b and return its midpoint from the left
        let mut lo: f64 = 0.0;
        let mut hi: f64 = 1.0;
        while jt(hi / 2.0) >= 0.0 && hi > 1e-300 {
            hi /= 2.0;
        }
        lo = lo.max(hi / 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if jt(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = lo / 2.0;
        Ok((tau, jt(tau)))
    }

    pub fn meta(&self, gs: &GroundState) -> Result<GroundStateMeta> {
        Ok(GroundStateMeta {
            nu: gs.nu,
            omega: gs.omega,
            j_value: gs.j_value,
            residual_flow: gs.residual_flow,
            pohozaev_residuals: gs.pohozaev_residuals,
            nehari_residual: gs.nehari_residual,
            iterations: gs.iterations,
            stationarity: self.stationarity(&gs.u, gs.omega)?,
            sigma: self.sigma_of(&gs.u, gs.omega)?,
        })
    }
}

fn omega_from(i: &Integrals) -> Result<f64> {
    if !(i.charge > 0.0) {
        return Err(Error::ZeroCharge);
    }
    Ok((i.hartree - 0.5 * i.kinetic) / i.charge)
}

fn renormalize(u: &ScalarField, nu: f64) -> ScalarField {
    u.scale((nu / u.charge()).sqrt())
}

/// Cached evaluation at the current iterate: the convolution is reused for
/// both `J` and the next explicit step.
struct FlowState {
    conv: Vec<f64>,
    j: f64,
    omega: f64,
}

impl FlowState {
    fn new(f: &EnergyFunctional, u: &ScalarField) -> Result<Self> {
        let dens = RieszOperator::density(u, f.p);
        let conv = f.riesz.convolve_values(&dens);
        let hartree = det_sum(dens.len(), |i| conv[i] * dens[i]) * u.grid().cell_volume();
        let kinetic = u.grad_norm_sq();
        let omega = omega_from(&Integrals { kinetic, charge: u.charge(), hartree })?;
        Ok(FlowState { conv, j: 0.5 * kinetic - hartree / f.p, omega })
    }
}

/// Radius of the half-maximum level of a profile, measured along the first
/// axis through its maximum with linear interpolation.
pub fn profile_half_width(u: &ScalarField) -> f64 {
    let grid = u.grid();
    let vals: Vec<f64> = u.values().iter().map(|z| z.norm()).collect();
    let (imax, vmax) = vals.iter().enumerate().fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let m = grid.unravel(imax);
    let n = grid.points;
    let stride = n.pow((grid.dim - 1) as u32);
    let half = vmax / 2.0;
    let h = grid.spacing();
    let mut radius = grid.extent;
    for dir in [1i64, -1] {
        let mut prev = vmax;
        for step in 1..n as i64 / 2 {
            let j = (m[0] as i64 + dir * step).rem_euclid(n as i64) as usize;
            let v = vals[imax - m[0] * stride + j * stride];
            if v <= half {
                let frac = (prev - half) / (prev - v);
                radius = radius.min((step as f64 - 1.0 + frac) * h);
                break;
            }
            prev = v;
        }
    }
    radius
}

/// Smallest radius about the barycenter holding all but `lambda` of the charge.
pub fn concentration_radius(u: &ScalarField, lambda: f64) -> Result<f64> {
    let q = u.barycenter()?;
    let grid = u.grid();
    let mut lo = 0.0;
    let mut hi = grid.extent * (grid.dim as f64).sqrt();
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if u.mass_outside_ball(&q, mid.max(1e-300))? < lambda {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldKind;
    use crate::riesz::RieszMode;
    use rand::{Rng, SeedableRng};

    fn functional(dim: usize, theta: f64, p: f64, extent: f64, n: usize) -> EnergyFunctional {
        let g = GridSpec::new(dim, extent, n).unwrap();
        EnergyFunctional::new(Arc::new(RieszOperator::build(g, theta, RieszMode::FreeSpace).unwrap()), p)
    }

    fn bump(grid: GridSpec) -> ScalarField {
        ScalarField::from_fn_real(grid, |x| (-x.iter().map(|a| a * a).sum::<f64>()).exp() * (1.0 + 0.2 * x[0]))
    }

    fn random_dir(grid: GridSpec, rng: &mut rand_chacha::ChaCha8Rng) -> ScalarField {
        let v = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        ScalarField::from_real(grid, v).unwrap()
    }

    #[test]
    fn zero_field() {
        let f = functional(2, 1.0, 2.0, 4.0, 16);
        let z = ScalarField::zeros(*f.grid(), FieldKind::Real);
        assert_eq!(f.j(&z).unwrap(), 0.0);
        assert_eq!(f.grad_j(&z).unwrap().sup_norm(), 0.0);
        assert_eq!(f.e_omega(&z, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn directional_derivative_matches_gradient() {
        let f = functional(2, 1.0, 1.8, 5.0, 32);
        let g = *f.grid();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let u = bump(g).axpy(0.05, &random_dir(g, &mut rng)).unwrap();
        let grad = f.grad_j(&u).unwrap();
        for _ in 0..3 {
            let v = random_dir(g, &mut rng);
            let h = 1e-4;
            let fd = (f.j(&u.axpy(h, &v).unwrap()).unwrap() - f.j(&u.axpy(-h, &v).unwrap()).unwrap()) / (2.0 * h);
            let an = grad.real_inner(&v).unwrap();
            assert!((fd - an).abs() < 1e-6 * an.abs(), "{fd} vs {an}");
        }
    }

    #[test]
    fn dilation_law_for_j() {
        let (dim, theta, p) = (2, 1.0, 2.0);
        let coarse = functional(dim, theta, p, 8.0, 64);
        let fine = functional(dim, theta, p, 4.0, 64);
        let prof = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp();
        let u = ScalarField::from_fn_real(*coarse.grid(), prof);
        let ut = ScalarField::from_fn_real(*fine.grid(), |x| 2.0 * prof(&[2.0 * x[0], 2.0 * x[1]]));
        let i = coarse.integrals(&u).unwrap();
        let expected = dilated_j(dim, theta, p, i.kinetic, i.hartree, 2.0);
        let got = fine.j(&ut).unwrap();
        assert!((got - expected).abs() < 1e-8 * expected.abs());
    }

    #[test]
    fn e_omega_identity() {
        let f = functional(2, 1.0, 2.0, 4.0, 32);
        let u = bump(*f.grid());
        let nu = u.charge();
        assert!((f.e_omega(&u, 0.7).unwrap() - f.j(&u).unwrap() - 0.7 * nu).abs() < 1e-12);
    }

    #[test]
    fn sigma_examples() {
        assert!((sigma(3, 2.0, 2.0, 1.0, 1.0).unwrap() - 1.5).abs() < 1e-15);
        assert!((sigma(3, 2.0, 2.0, 1.0, 2.0).unwrap() - 3.0).abs() < 1e-15);
        assert!(sigma(3, 2.0, 2.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn negative_dilation_exists() {
        let f = functional(2, 1.0, 2.0, 6.0, 32);
        // narrow bump: kinetic energy dominates at τ = 1
        let u = ScalarField::from_fn_real(*f.grid(), |x| 50.0f64.sqrt() * (-25.0 * (x[0] * x[0] + x[1] * x[1])).exp());
        assert!(f.j(&u).unwrap() > 0.0);
        let (tau, jv) = f.find_negative_dilation(&u).unwrap();
        assert!(tau > 0.0 && tau <= 1.0 && jv < 0.0);
        let e = 2.0 * 2.0 - 1.0 - 2.0;
        assert!(e > 0.0 && e < 2.0);
        let z = ScalarField::zeros(*f.grid(), FieldKind::Real);
        assert!(f.find_negative_dilation(&z).is_err());
    }

    #[test]
    fn flow_on_small_2d_problem() {
        let f = functional(2, 1.0, 2.0, 24.0, 64);
        let mut opts = FlowOptions::defaults(f.grid());
        opts.dtau = 0.5;
        opts.tol = 1e-9;
        let mut js = Vec::new();
        let gs = f.normalized_gradient_flow_traced(4.0, &opts, |s| js.push(s.j)).unwrap();
        assert!((gs.u.charge() - 4.0).abs() < 1e-10 * 4.0);
        assert!(gs.j_value < 0.0 && gs.omega > 0.0);
        assert!(js.windows(2).all(|w| w[1] <= w[0] + ROUNDOFF_SLACK * w[0].abs()));
        assert!(gs.u.values().iter().all(|z| z.re >= -1e-12));
        assert!(gs.pohozaev_residuals.iter().all(|r| r.abs() < 1e-3), "{:?}", gs.pohozaev_residuals);
        assert!(f.stationarity(&gs.u, gs.omega).unwrap() < 1e-3);
        // τ = 1 already gives J < 0 on the minimizer
        assert_eq!(f.find_negative_dilation(&gs.u).unwrap().0, 1.0);

        // identity conversion, round trip, and multiplier of the Nehari image
        let same = f.sphere_to_nehari(&gs.u, gs.omega).unwrap();
        assert!(same.sub(&gs.u).unwrap().sup_norm() < 1e-14 * gs.u.sup_norm());
        let w = f.sphere_to_nehari(&gs.u, 1.3 * gs.omega).unwrap();
        assert!(f.nehari_residual(&w, 1.3 * gs.omega).unwrap().abs() < 1e-3 * w.grad_norm_sq());
        assert!((f.extract_omega(&w).unwrap() - 1.3 * gs.omega).abs() < 1e-3 * gs.omega);
        let back = f.nehari_to_sphere(&w, gs.nu).unwrap();
        let err = back.sub(&gs.u).unwrap().charge().sqrt() / gs.u.charge().sqrt();
        assert!(err < 1e-4, "round trip {err:e}");
    }

    #[test]
    fn gaussian_is_not_certified() {
        let f = functional(2, 1.0, 2.0, 10.0, 32);
        let u = ScalarField::from_fn_real(*f.grid(), |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp()).scale(3.0);
        let omega = f.extract_omega(&u).unwrap();
        assert!(omega.is_finite());
        let r = f.pohozaev_residuals(&u, omega).unwrap();
        assert!(r.iter().any(|x| x.abs() > 1e-1), "{r:?}");
    }

    #[test]
    fn expanding_dilation_out_of_box() {
        let f = functional(2, 1.0, 2.0, 4.0, 32);
        let u = ScalarField::from_fn_real(*f.grid(), |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        let omega = f.extract_omega(&u).unwrap();
        let target = if omega > 0.0 { omega * 0.01 } else { 1.0 };
        if omega > 0.0 {
            assert!(matches!(f.sphere_to_nehari(&u, target), Err(Error::OutOfBox(_))));
        }
        assert!(matches!(f.dilate(&u, 0.1), Err(Error::OutOfBox(_))));
    }

    #[test]
    fn half_width_of_gaussian() {
        let g = GridSpec::new(2, 8.0, 128).unwrap();
        let u = ScalarField::from_fn_real(g, |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        let expected = (2.0 * 2f64.ln()).sqrt();
        assert!((profile_half_width(&u) - expected).abs() < 0.02);
        let r = concentration_radius(&u, 0.01).unwrap();
        // e^{-r^2} tail fraction in 2D is e^{-R^2}
        assert!((r - (100f64).ln().sqrt()).abs() < 0.15, "{r}");
    }
}
