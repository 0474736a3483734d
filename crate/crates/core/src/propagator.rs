//! Strang splitting for
//!
//! ```text
//! i ε ∂ψ/∂t = -(ε²/2) Δψ + V ψ - κ (I_θ * |ψ|^p) |ψ|^{p-2} ψ,   κ = ε^{γ(2p-1)-α}
//! ```
//!
//! and construction of concentrated initial data `ε^{-γ}(U+w)(ε^{-β}x) e^{i x·v/ε}`.

use std::path::PathBuf;
use std::sync::Arc;

use log::{debug, info, warn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, DiagOptions, TrajectorySample};
use crate::error::{Error, Result};
use crate::field::{snapshot, AxisMap, FieldKind, GridOps, GridSpec, ScalarField};
use crate::ground_state::profile_half_width;
use crate::params::ModelParams;
use crate::potential::PotentialSpec;
use crate::riesz::RieszOperator;

/// Grid points required per profile half-width and per phase wavelength.
pub const MIN_POINTS_PER_SCALE: f64 = 8.0;
/// Default constant of the time-step rule.
pub const DEFAULT_CT: f64 = 0.5;
/// Charge fraction outside `L/2` of the barycenter that aborts an evolution.
pub const BOUNDARY_ABORT_MASS: f64 = 1e-4;

/// `ψ₀(x) = ε^{-γ}(U+w)(ε^{-β}x) e^{i x·v/ε}` on `grid`.
pub fn build_initial_data(
    u: &ScalarField,
    params: &ModelParams,
    w: Option<&ScalarField>,
    grid: GridSpec,
) -> Result<ScalarField> {
    if params.v.len() != grid.dim || u.grid().dim != grid.dim {
        return Err(Error::GridMismatch("dimension of profile, grid and velocity differ".into()));
    }
    let profile = match w {
        Some(w) => u.add(w)?,
        None => u.clone(),
    };
    let (eps, beta, gamma) = (params.eps, params.beta, params.gamma);
    let h = grid.spacing();
    let width = profile_half_width(&profile) * eps.powf(beta);
    if width < MIN_POINTS_PER_SCALE * h {
        return Err(Error::Unresolved(format!(
            "profile half-width {width:.4e} spans {:.2} grid cells, need {MIN_POINTS_PER_SCALE}",
            width / h
        )));
    }
    let speed = params.v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if speed > 0.0 {
        let wavelength = 2.0 * std::f64::consts::PI * eps / speed;
        if wavelength < MIN_POINTS_PER_SCALE * h {
            return Err(Error::Unresolved(format!(
                "phase wavelength 2πε/|v| = {wavelength:.4e} spans {:.2} grid cells, need {MIN_POINTS_PER_SCALE}",
                wavelength / h
            )));
        }
    }
    let map = AxisMap { scale: eps.powf(-beta), offset: vec![0.0; grid.dim] };
    let amp = eps.powf(-gamma);
    let v = params.v.clone();
    let rescaled = profile.resample(grid, &map)?.scale(amp);
    let psi = rescaled.with_phase(move |x| x.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / eps);
    let (c0, c1) = (profile.charge(), psi.charge());
    if (c1 - c0).abs() > 1e-8 * c0 {
        warn!("initial data charge {c1:.12e} differs from profile charge {c0:.12e}");
    }
    Ok(psi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// `|‖U+w‖² − σ|` with `σ = ‖U‖²`.
    pub charge_match: f64,
    /// H¹ norm of `w`.
    pub w_norm: f64,
    /// `K ε^{2(β−1)}`.
    pub w_bound: f64,
    pub grad_s_sup: f64,
    /// `∫ V(x) u_ε(0,x)² dx`.
    pub potential_moment: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub admissible: bool,
    pub violations: Vec<String>,
}

/// Test the four conditions defining admissible data at level `K`.
pub fn check_admissibility(
    u: &ScalarField,
    w: Option<&ScalarField>,
    grad_s_sup: f64,
    potential: &PotentialSpec,
    params: &ModelParams,
    k: f64,
) -> Result<AdmissibilityReport> {
    let zero = ScalarField::zeros(*u.grid(), FieldKind::Real);
    let w = w.unwrap_or(&zero);
    let total = u.add(w)?;
    let sigma = u.charge();
    let charge_match = (total.charge() - sigma).abs();
    let w_norm = w.h1_norm();
    let w_bound = k * params.eps.powf(2.0 * (params.beta - 1.0));
    // ∫V(x) ε^{-2γ}|U+w|²(ε^{-β}x) dx = ∫V(ε^β y)|U+w|²(y) dy since Nβ = 2γ
    let scale = params.eps.powf(params.beta);
    let grid = *u.grid();
    let weight: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let y = grid.position(i);
            let x: Vec<f64> = y[..grid.dim].iter().map(|t| t * scale).collect();
            potential.eval(&x)
        })
        .collect();
    let potential_moment = params.eps.powf(params.dim as f64 * params.beta - 2.0 * params.gamma)
        * total.weighted_density_integral(&weight);

    let mut violations = Vec::new();
    if charge_match > 1e-8 * sigma {
        violations.push(format!("charge: ‖U+w‖² − σ = {charge_match:.3e}"));
    }
    if !(w_norm < w_bound) {
        violations.push(format!("perturbation: ‖w‖ = {w_norm:.4e} not below Kε^(2(β−1)) = {w_bound:.4e}"));
    }
    if !(grad_s_sup <= k) {
        violations.push(format!("phase gradient: {grad_s_sup:.4e} > K = {k}"));
    }
    if !(potential_moment <= k) {
        violations.push(format!("potential moment: {potential_moment:.4e} > K = {k}"));
    }
    Ok(AdmissibilityReport {
        charge_match,
        w_norm,
        w_bound,
        grad_s_sup,
        potential_moment,
        k,
        admissible: violations.is_empty(),
        violations,
    })
}

/// Smooth random `w` with `‖U+w‖² = ‖U‖²` and H¹ norm `target`.
pub fn random_perturbation(u: &ScalarField, target: f64, seed: u64) -> Result<ScalarField> {
    if !(target > 0.0) {
        return Err(Error::InvalidParameter("perturbation size must be positive".into()));
    }
    let grid = *u.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    // low-pass the noise and localize it on the profile
    let kcut = 4.0 * std::f64::consts::PI / profile_half_width(u).max(grid.spacing());
    let ops = GridOps::shared(&grid);
    let smooth = ScalarField::from_real(grid, noise)?
        .apply_multiplier(|i| Complex64::from((-ops.k2[i] / (kcut * kcut)).exp()))
        .real_part();
    let umax = u.sup_norm();
    let local = smooth.mul_real(&u.values().iter().map(|z| z.re.abs() / umax).collect::<Vec<_>>())?;
    let nu = u.charge();
    let w1 = local.axpy(-local.real_inner(u)? / nu, u)?;
    let n1 = w1.charge();
    if !(n1 > 0.0) {
        return Err(Error::InvalidParameter("degenerate perturbation".into()));
    }
    // w(s) = s·w1 − c(s)·U with (1−c)² ν + s² ‖w1‖² = ν
    let build = |s: f64| -> Result<ScalarField> {
        let c = 1.0 - (1.0 - s * s * n1 / nu).max(0.0).sqrt();
        w1.scale(s).axpy(-c, u)
    };
    let smax = (nu / n1).sqrt();
    let (mut lo, mut hi) = (0.0, smax);
    if build(hi)?.h1_norm() < target {
        return Err(Error::InvalidParameter(format!("perturbation norm {target} unreachable")));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if build(mid)?.h1_norm() < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    build(0.5 * (lo + hi))
}

/// Step size from `dt ≤ c_t ε / max(|V| + κ|W|)`.
pub fn max_stable_dt(c_t: f64, eps: f64, v_max: f64, kappa_w_max: f64) -> f64 {
    c_t * eps / (v_max + kappa_w_max)
}

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    /// Diagnostics every this many steps (the final time is always sampled).
    pub callback_stride: usize,
    pub diag: DiagOptions,
    /// Write `psi_<step>.chqf` into the directory every so many steps.
    pub snapshots: Option<(usize, PathBuf)>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { callback_stride: 1, diag: DiagOptions::default(), snapshots: None }
    }
}

/// `ψ(t)` with everything needed to advance it.
#[derive(Debug, Clone)]
pub struct PropagatorState {
    pub psi: ScalarField,
    pub t: f64,
    pub params: ModelParams,
    pub potential: PotentialSpec,
    v_grid: Vec<f64>,
    v_max: f64,
    riesz: Arc<RieszOperator>,
    dt: f64,
    coupling: f64,
    steps: usize,
    kinetic: Vec<Complex64>,
}

impl PropagatorState {
    /// Takes ψ₀ on the operator's grid; `dt` is set from the rule with `c_t`.
    pub fn new(
        psi: ScalarField,
        params: ModelParams,
        potential: PotentialSpec,
        riesz: Arc<RieszOperator>,
        c_t: f64,
    ) -> Result<Self> {
        if !psi.grid().same_as(riesz.grid()) {
            return Err(Error::GridMismatch("ψ and Riesz operator grids differ".into()));
        }
        if !params.validate().is_ok() {
            return Err(Error::InvalidParameter(format!("{:?}", params.validate().violations)));
        }
        potential.validate()?;
        if (riesz.theta() - params.theta).abs() > 0.0 {
            return Err(Error::InvalidParameter("Riesz order differs from θ".into()));
        }
        let grid = *psi.grid();
        let v_grid: Vec<f64> = (0..grid.len()).into_par_iter().map(|i| potential.eval(&grid.position(i)[..grid.dim])).collect();
        let v_max = v_grid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let coupling = params.kappa();
        let mut s = PropagatorState {
            psi: psi.into_complex(),
            t: 0.0,
            params,
            potential,
            v_grid,
            v_max,
            riesz,
            dt: 0.0,
            coupling,
            steps: 0,
            kinetic: vec![],
        };
        let dt = s.dt_limit(c_t);
        s.set_dt(dt)?;
        Ok(s)
    }

    pub fn grid(&self) -> &GridSpec {
        self.psi.grid()
    }

    pub fn riesz(&self) -> &Arc<RieszOperator> {
        &self.riesz
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Coefficient of the nonlocal term; `κ` unless overridden.
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// Replace `κ` (zero gives the linear Schrödinger flow).
    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    /// `c_t ε / max(|V| + κ|W|)` for the current field.
    pub fn dt_limit(&self, c_t: f64) -> f64 {
        let w = self.nonlocal_potential();
        let wmax = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        max_stable_dt(c_t, self.params.eps, self.v_max, self.coupling.abs() * wmax)
    }

    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt={dt} must be positive")));
        }
        if dt != self.dt {
            let ops = GridOps::shared(self.grid());
            let eps = self.params.eps;
            let norm = 1.0 / self.grid().len() as f64;
            self.kinetic = ops.k2.par_iter().map(|k2| Complex64::from_polar(norm, -0.5 * dt * eps * k2)).collect();
            self.dt = dt;
        }
        Ok(())
    }

    /// `W = (I_θ * |ψ|^p)|ψ|^{p−2}`.
    pub fn nonlocal_potential(&self) -> Vec<f64> {
        let (conv, weight) = self.riesz.potential_and_weight(&self.psi, self.params.p);
        conv.iter().zip(&weight).map(|(c, w)| c * w).collect()
    }

    fn potential_substep(&mut self, tau: f64) {
        let w = if self.coupling != 0.0 { self.nonlocal_potential() } else { vec![0.0; self.v_grid.len()] };
        let (eps, kappa) = (self.params.eps, self.coupling);
        self.psi
            .values_mut()
            .par_iter_mut()
            .zip(&self.v_grid)
            .zip(&w)
            .for_each(|((z, v), w)| *z *= Complex64::from_polar(1.0, -tau * (v - kappa * w) / eps));
    }

    fn kinetic_substep(&mut self) {
        let ops = GridOps::shared(self.psi.grid());
        let data = self.psi.values_mut();
        ops.fft.forward(data);
        data.par_iter_mut().zip(&self.kinetic).for_each(|(z, m)| *z *= m);
        ops.fft.inverse(data);
    }

    /// One potential–kinetic–potential step.
    pub fn strang_step(&mut self) -> Result<()> {
        let half = 0.5 * self.dt;
        self.potential_substep(half);
        self.kinetic_substep();
        self.potential_substep(half);
        self.steps += 1;
        self.t += self.dt;
        if !self.psi.all_finite() {
            return Err(Error::NonFinite { step: self.steps });
        }
        Ok(())
    }

    /// Complex conjugate of ψ; evolving the conjugate runs time backwards.
    pub fn conjugate(&mut self) {
        self.psi.values_mut().par_iter_mut().for_each(|z| *z = z.conj());
    }

    pub fn diagnostics(&self, opts: &DiagOptions) -> Result<TrajectorySample> {
        dynamics::diagnostics_with(&self.psi, self.t, &self.potential, &self.params, &self.riesz, self.coupling, opts)
    }

    /// Advance by `duration` in `ceil(duration/dt)` equal steps (never longer
    /// than the current `dt`), sampling diagnostics every `callback_stride` steps.
    pub fn evolve(&mut self, duration: f64, opts: &EvolveOptions) -> Result<Vec<TrajectorySample>> {
        if !(duration >= 0.0) {
            return Err(Error::InvalidParameter(format!("T={duration} must be nonnegative")));
        }
        let stride = opts.callback_stride.max(1);
        let mut samples = vec![self.guarded_sample(&opts.diag)?];
        if duration == 0.0 {
            return Ok(samples);
        }
        let nsteps = (duration / self.dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        self.set_dt(duration / nsteps as f64)?;
        let t0 = self.t;
        info!("evolving {nsteps} steps of dt = {:.6e} on {}^{} points", self.dt, self.grid().points, self.grid().dim);
        for k in 1..=nsteps {
            self.strang_step()?;
            if k == nsteps {
                self.t = t0 + duration;
            }
            if k % stride == 0 || k == nsteps {
                samples.push(self.guarded_sample(&opts.diag)?);
                debug!("t = {:.6}", self.t);
            }
            if let Some((every, dir)) = &opts.snapshots {
                if *every > 0 && k % every == 0 {
                    snapshot::save(&self.psi, &dir.join(format!("psi_{:08}.chqf", self.steps)))?;
                }
            }
        }
        Ok(samples)
    }

    fn guarded_sample(&self, diag: &DiagOptions) -> Result<TrajectorySample> {
        let s = self.diagnostics(diag)?;
        let outside = self.psi.mass_outside_ball(&s.barycenter, 0.5 * self.grid().extent)?;
        if outside > BOUNDARY_ABORT_MASS {
            return Err(Error::BoundaryTouch(format!(
                "charge fraction {outside:.3e} beyond L/2 of the barycenter at t = {:.6}",
                self.t
            )));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::{EnergyFunctional, FlowOptions};
    use crate::riesz::RieszMode;
    use std::f64::consts::PI;

    fn params_2d(eps: f64, v: Vec<f64>) -> ModelParams {
        ModelParams::new(2, 1.0, 2.0, 1.25, eps, 1.0, 1.0, v).unwrap()
    }

    fn profile(n: usize, extent: f64) -> (ScalarField, f64) {
        let g = GridSpec::new(2, extent, n).unwrap();
        let f = EnergyFunctional::new(Arc::new(RieszOperator::build(g, 1.0, RieszMode::FreeSpace).unwrap()), 2.0);
        let mut o = FlowOptions::defaults(&g);
        o.dtau = 0.05;
        o.tol = 1e-9;
        o.seed = crate::ground_state::SeedProfile::Gaussian { width: 1.0, center: vec![0.0, 0.0] };
        let gs = f.normalized_gradient_flow(10.0, &o).unwrap();
        (gs.u, gs.omega)
    }

    #[test]
    fn identity_parameters_reproduce_profile() {
        let (u, _) = profile(128, 8.0);
        let p = params_2d(1.0, vec![0.0, 0.0]);
        let psi = build_initial_data(&u, &p, None, *u.grid()).unwrap();
        assert_eq!(psi.real_part().values(), u.values());
        assert!(psi.values().iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn charge_and_momentum_of_initial_data() {
        let (u, _) = profile(128, 8.0);
        let eps = 0.5;
        let p = params_2d(eps, vec![0.4, -0.3]);
        let g = GridSpec::new(2, 4.5, 256).unwrap();
        let psi = build_initial_data(&u, &p, None, g).unwrap();
        assert!((psi.charge() - u.charge()).abs() < 1e-8 * u.charge());
        let mom = psi.momentum_integral(eps);
        for a in 0..2 {
            let q = mom[a] * eps.powi(2) / psi.charge();
            assert!((q - p.v[a]).abs() < 1e-6, "{q}");
        }
    }

    #[test]
    fn resolution_rules_are_enforced() {
        let (u, _) = profile(128, 8.0);
        let coarse = GridSpec::new(2, 4.5, 64).unwrap();
        let err = build_initial_data(&u, &params_2d(0.5, vec![0.0, 0.0]), None, coarse).unwrap_err();
        assert!(matches!(&err, Error::Unresolved(m) if m.contains("profile")));
        let g = GridSpec::new(2, 4.5, 256).unwrap();
        let err = build_initial_data(&u, &params_2d(0.5, vec![40.0, 0.0]), None, g).unwrap_err();
        assert!(matches!(&err, Error::Unresolved(m) if m.contains("phase")));
    }

    #[test]
    fn admissibility_conditions() {
        let (u, _) = profile(128, 8.0);
        let v = PotentialSpec::harmonic();
        let p = params_2d(0.5, vec![0.5, 0.0]);
        let k = 10.0;
        let rep = check_admissibility(&u, None, 0.5, &v, &p, k).unwrap();
        assert!(rep.admissible, "{rep:?}");
        let bound = k * 0.5f64.powf(2.0 * (p.beta - 1.0));
        let w = random_perturbation(&u, 2.0 * bound, 3).unwrap();
        assert!((w.h1_norm() - 2.0 * bound).abs() < 1e-9 * bound);
        let rep = check_admissibility(&u, Some(&w), 0.5, &v, &p, k).unwrap();
        assert!(!rep.admissible && rep.violations.len() == 1 && rep.violations[0].starts_with("perturbation"));
        assert!(rep.charge_match < 1e-8 * u.charge());
        // the bound shrinks with ε: a fixed w becomes inadmissible
        let w = random_perturbation(&u, 0.5 * bound, 4).unwrap();
        assert!(check_admissibility(&u, Some(&w), 0.5, &v, &p, k).unwrap().admissible);
        assert!(!check_admissibility(&u, Some(&w), 0.5, &v, &p.with_eps(0.1), k).unwrap().admissible);
    }

    #[test]
    fn free_gaussian_dispersion() {
        // i ε ψ_t = -(ε²/2) ψ_xx:  ψ(t) = (1 + iεt/s²)^{-N/2} exp(-|x|²/(2 s² (1 + iεt/s²)))
        let eps = 0.5;
        let s2 = 0.25;
        let g = GridSpec::new(2, 6.0, 128).unwrap();
        let exact = |t: f64| {
            let a = Complex64::new(1.0, eps * t / s2);
            ScalarField::from_fn_complex(g, move |x| {
                let r2 = x[0] * x[0] + x[1] * x[1];
                (-(r2 / (2.0 * s2)) / a).exp() / a
            })
        };
        let p = params_2d(eps, vec![0.0, 0.0]);
        let r = Arc::new(RieszOperator::build(g, 1.0, RieszMode::FreeSpace).unwrap());
        let mut st = PropagatorState::new(exact(0.0), p, PotentialSpec::zero(), r, DEFAULT_CT).unwrap().with_coupling(0.0);
        st.set_dt(0.01).unwrap();
        for _ in 0..100 {
            st.strang_step().unwrap();
        }
        let err = st.psi.sub(&exact(1.0)).unwrap().sup_norm();
        assert!(err < 1e-6, "{err:e}");
    }

    #[test]
    fn charge_conserved_and_time_reversible() {
        let (u, _) = profile(128, 8.0);
        let p = params_2d(0.5, vec![0.5, 0.0]);
        let g = GridSpec::new(2, 4.5, 256).unwrap();
        let psi0 = build_initial_data(&u, &p, None, g).unwrap();
        let r = Arc::new(RieszOperator::build(g, 1.0, RieszMode::FreeSpace).unwrap());
        let mut st = PropagatorState::new(psi0.clone(), p, PotentialSpec::harmonic(), r, DEFAULT_CT).unwrap();
        let c0 = psi0.charge();
        for _ in 0..50 {
            st.strang_step().unwrap();
        }
        assert!((st.psi.charge() - c0).abs() < 1e-12 * c0);
        st.conjugate();
        for _ in 0..50 {
            st.strang_step().unwrap();
        }
        st.conjugate();
        let err = st.psi.sub(&psi0).unwrap().charge().sqrt() / c0.sqrt();
        assert!(err < 1e-10, "{err:e}");
    }

    #[test]
    fn evolve_zero_duration_gives_one_sample() {
        let (u, _) = profile(128, 8.0);
        let p = params_2d(0.5, vec![0.0, 0.0]);
        let g = GridSpec::new(2, 4.5, 256).unwrap();
        let psi0 = build_initial_data(&u, &p, None, g).unwrap();
        let r = Arc::new(RieszOperator::build(g, 1.0, RieszMode::FreeSpace).unwrap());
        let mut st = PropagatorState::new(psi0, p, PotentialSpec::harmonic(), r, DEFAULT_CT).unwrap();
        let s = st.evolve(0.0, &EvolveOptions::default()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].t, 0.0);
        let s = st.evolve(0.05, &EvolveOptions { callback_stride: 1000, ..Default::default() }).unwrap();
        assert_eq!(s.len(), 2);
        assert!((st.t - 0.05).abs() < 1e-15);
    }

    #[test]
    fn boundary_touch_aborts() {
        let g = GridSpec::new(2, 3.0, 64).unwrap();
        // wide packet: much of its charge is already beyond L/2
        let psi = ScalarField::from_fn_real(g, |x| (-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp());
        let p = params_2d(0.5, vec![0.0, 0.0]);
        let r = Arc::new(RieszOperator::build(g, 1.0, RieszMode::FreeSpace).unwrap());
        let mut st = PropagatorState::new(psi, p, PotentialSpec::zero(), r, DEFAULT_CT).unwrap();
        assert!(matches!(st.evolve(0.1, &EvolveOptions::default()), Err(Error::BoundaryTouch(_))));
    }

    #[test]
    fn plane_wave_kinetic_phase() {
        let g = GridSpec::new(1, PI, 16).unwrap();
        let p = ModelParams::new(1, 0.5, 2.0, 0.75, 0.5, 1.0, 1.0, vec![0.0]).unwrap();
        let psi = ScalarField::from_fn_complex(g, |x| Complex64::from_polar(1.0, 3.0 * x[0]));
        let r = Arc::new(RieszOperator::build(g, 0.5, RieszMode::FreeSpace).unwrap());
        let mut st = PropagatorState::new(psi.clone(), p, PotentialSpec::zero(), r, DEFAULT_CT).unwrap().with_coupling(0.0);
        st.set_dt(0.1).unwrap();
        st.strang_step().unwrap();
        let expect = psi.values()[5] * Complex64::from_polar(1.0, -0.1 * 0.5 * 9.0 / 2.0);
        assert!((st.psi.values()[5] - expect).norm() < 1e-13);
    }
}
