//! Barycenter dynamics: per-sample diagnostics of `ψ(t)`, the Newtonian
//! reference `q̈ = −∇V(q)`, and ε-sweeps comparing the two.
//!
//! The Newton residual is evaluated from the force integral,
//! `H_ε = ∇V(q_ε) − ‖ψ‖⁻² ∫ ∇V |ψ|²`, not by differentiating `q_ε`.

use std::io::Write;
use std::sync::Arc;

use log::{info, warn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{det_sum, GridOps, GridSpec, ScalarField};
use crate::ground_state::profile_half_width;
use crate::params::ModelParams;
use crate::potential::PotentialSpec;
use crate::propagator::{build_initial_data, EvolveOptions, PropagatorState};
use crate::riesz::{RieszMode, RieszOperator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagOptions {
    /// Charge level defining the concentration radius.
    pub lambda: f64,
    /// Concentration radius in profile units; the physical radius is `r_hat ε^β`.
    pub r_hat: f64,
}

impl Default for DiagOptions {
    fn default() -> Self {
        DiagOptions { lambda: 0.01, r_hat: 8.0 }
    }
}

impl DiagOptions {
    /// `r_hat` = 8 half-widths of `u`.
    pub fn for_profile(u: &ScalarField) -> Self {
        DiagOptions { r_hat: 8.0 * profile_half_width(u), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub charge: f64,
    pub energy_total: f64,
    /// `J_ε(|ψ|)`.
    pub energy_internal: f64,
    /// `∫ V |ψ|²`.
    pub energy_potential: f64,
    pub barycenter: Vec<f64>,
    /// `∫ p_ε`.
    pub momentum: Vec<f64>,
    /// `‖ψ‖⁻² ∫ ∇V |ψ|²`.
    pub force: Vec<f64>,
    pub h_eps: Vec<f64>,
    pub concentration_center: Vec<f64>,
    pub mass_outside: f64,
}

impl TrajectorySample {
    /// `½∫|∇S|²u²`, the remainder of the energy split.
    pub fn kinetic_dynamical(&self) -> f64 {
        self.energy_total - self.energy_internal - self.energy_potential
    }

    /// `q̇_ε` from the momentum integral.
    pub fn velocity(&self, eps: f64) -> Vec<f64> {
        let s = eps.powi(self.momentum.len() as i32) / self.charge;
        self.momentum.iter().map(|p| p * s).collect()
    }

    pub fn h_norm(&self) -> f64 {
        self.h_eps.iter().map(|h| h * h).sum::<f64>().sqrt()
    }
}

/// Diagnostics with the model coupling `κ = ε^{γ(2p−1)−α}`.
pub fn diagnostics(
    psi: &ScalarField,
    t: f64,
    potential: &PotentialSpec,
    params: &ModelParams,
    riesz: &RieszOperator,
    opts: &DiagOptions,
) -> Result<TrajectorySample> {
    diagnostics_with(psi, t, potential, params, riesz, params.kappa(), opts)
}

pub(crate) fn diagnostics_with(
    psi: &ScalarField,
    t: f64,
    potential: &PotentialSpec,
    params: &ModelParams,
    riesz: &RieszOperator,
    coupling: f64,
    opts: &DiagOptions,
) -> Result<TrajectorySample> {
    let grid = *psi.grid();
    let dim = grid.dim;
    let vol = grid.cell_volume();
    let eps = params.eps;
    let charge = psi.charge();
    if !(charge > 0.0) {
        return Err(Error::ZeroCharge);
    }
    let vals = psi.values();
    let grad = psi.gradient();
    let g: Vec<&[Complex64]> = grad.iter().map(|f| f.values()).collect();

    let grad_sq = det_sum(grid.len(), |i| g.iter().map(|ga| ga[i].norm_sqr()).sum::<f64>()) * vol;
    // ∇|ψ| = Re(ψ̄∇ψ)/|ψ|
    let modulus_grad_sq = det_sum(grid.len(), |i| {
        let r2 = vals[i].norm_sqr();
        if r2 > 0.0 {
            g.iter().map(|ga| (vals[i].conj() * ga[i]).re.powi(2)).sum::<f64>() / r2
        } else {
            0.0
        }
    }) * vol;
    let hartree = riesz.hartree_energy(psi, params.p)?;
    let binding = coupling / params.p * hartree;
    let v_at = |i: usize| potential.eval(&grid.position(i)[..dim]);
    let energy_potential = det_sum(grid.len(), |i| v_at(i) * vals[i].norm_sqr()) * vol;

    let barycenter = psi.barycenter()?;
    let mscale = eps.powi(1 - dim as i32);
    let momentum: Vec<f64> = (0..dim)
        .map(|a| det_sum(grid.len(), |i| (vals[i].conj() * g[a][i]).im) * vol * mscale)
        .collect();
    let force: Vec<f64> = (0..dim)
        .map(|a| det_sum(grid.len(), |i| potential.grad(&grid.position(i)[..dim])[a] * vals[i].norm_sqr()) * vol / charge)
        .collect();
    let grad_q = potential.grad(&barycenter);
    let h_eps = grad_q.iter().zip(&force).map(|(a, b)| a - b).collect();

    let concentration_center = concentration_center_with(psi, params, opts);
    let radius = opts.r_hat * eps.powf(params.beta);
    let mass_outside = psi.mass_outside_ball(&concentration_center, radius)?;

    Ok(TrajectorySample {
        t,
        charge,
        energy_total: 0.5 * eps * eps * grad_sq + energy_potential - binding,
        energy_internal: 0.5 * eps * eps * modulus_grad_sq - binding,
        energy_potential,
        barycenter,
        momentum,
        force,
        h_eps,
        concentration_center,
        mass_outside,
    })
}

/// Argmax of `|ψ|²` mollified by a Gaussian of width `r_hat ε^β / 2`; ties go
/// to the smallest flat index.
pub fn concentration_center(psi: &ScalarField, params: &ModelParams) -> Vec<f64> {
    concentration_center_with(psi, params, &DiagOptions::default())
}

pub fn concentration_center_with(psi: &ScalarField, params: &ModelParams, opts: &DiagOptions) -> Vec<f64> {
    let grid = *psi.grid();
    let ops = GridOps::shared(&grid);
    let width = 0.5 * opts.r_hat * params.eps.powf(params.beta);
    let dens = ScalarField::from_real(grid, psi.values().iter().map(|z| z.norm_sqr()).collect())
        .expect("density on own grid");
    let smooth = dens.apply_multiplier(|i| Complex64::from((-0.5 * ops.k2[i] * width * width).exp()));
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, z) in smooth.values().iter().enumerate() {
        if z.re > best_val {
            best_val = z.re;
            best = i;
        }
    }
    grid.position(best)[..grid.dim].to_vec()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalTrajectory {
    pub times: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub qdot: Vec<Vec<f64>>,
}

/// RK4 for `q̈ = −∇V(q)`, `q(0) = 0`, `q̇(0) = v0`, in equal steps no longer than `dt`.
pub fn classical_trajectory(potential: &PotentialSpec, v0: &[f64], horizon: f64, dt: f64) -> Result<ClassicalTrajectory> {
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::InvalidParameter("classical trajectory needs dt > 0 and T ≥ 0".into()));
    }
    let n = v0.len();
    let steps = (horizon / dt * (1.0 - 1e-12)).ceil() as usize;
    let h = if steps > 0 { horizon / steps as f64 } else { 0.0 };
    let rhs = |y: &[f64]| -> Vec<f64> {
        let mut d = y[n..].to_vec();
        d.extend(potential.grad(&y[..n]).into_iter().map(|g| -g));
        d
    };
    let mut y: Vec<f64> = vec![0.0; n].into_iter().chain(v0.iter().copied()).collect();
    let mut out = ClassicalTrajectory { times: vec![0.0], q: vec![y[..n].to_vec()], qdot: vec![y[n..].to_vec()] };
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };
    for k in 1..=steps {
        let k1 = rhs(&y);
        let k2 = rhs(&axpy(&y, 0.5 * h, &k1));
        let k3 = rhs(&axpy(&y, 0.5 * h, &k2));
        let k4 = rhs(&axpy(&y, h, &k3));
        for i in 0..2 * n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.times.push(k as f64 * h);
        out.q.push(y[..n].to_vec());
        out.qdot.push(y[n..].to_vec());
    }
    Ok(out)
}

impl ClassicalTrajectory {
    pub fn energy(&self, potential: &PotentialSpec, k: usize) -> f64 {
        0.5 * self.qdot[k].iter().map(|v| v * v).sum::<f64>() + potential.eval(&self.q[k])
    }

    /// Cubic Hermite interpolation of `q` at `t` inside the time range.
    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        let (t0, t1) = (*self.times.first()?, *self.times.last()?);
        let slack = 1e-12 * (1.0 + t1.abs());
        if t < t0 - slack || t > t1 + slack {
            return None;
        }
        if self.times.len() == 1 {
            return Some(self.q[0].clone());
        }
        let j = match self.times.binary_search_by(|x| x.partial_cmp(&t).expect("finite times")) {
            Ok(j) => return Some(self.q[j].clone()),
            Err(j) => j.clamp(1, self.times.len() - 1) - 1,
        };
        let h = self.times[j + 1] - self.times[j];
        let s = ((t - self.times[j]) / h).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let (h00, h10, h01, h11) = (2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2);
        Some(
            (0..self.q[j].len())
                .map(|a| {
                    h00 * self.q[j][a] + h10 * h * self.qdot[j][a] + h01 * self.q[j + 1][a] + h11 * h * self.qdot[j + 1][a]
                })
                .collect(),
        )
    }
}

/// `max |q_ε(t) − q_classical(t)|` over the sample times covered by the reference.
pub fn compare_trajectories(samples: &[TrajectorySample], classical: &ClassicalTrajectory) -> Result<f64> {
    let mut worst: Option<f64> = None;
    for s in samples {
        if let Some(q) = classical.interpolate(s.t) {
            let d = q.iter().zip(&s.barycenter).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            worst = Some(worst.map_or(d, |w| w.max(d)));
        }
    }
    worst.ok_or_else(|| Error::InvalidParameter("trajectories share no sample times".into()))
}

/// Largest relative deviation of charge and total energy from their initial values.
pub fn conservation_drift(samples: &[TrajectorySample]) -> (f64, f64) {
    let Some(first) = samples.first() else { return (0.0, 0.0) };
    let c = samples.iter().map(|s| (s.charge - first.charge).abs()).fold(0.0, f64::max) / first.charge;
    let e = samples.iter().map(|s| (s.energy_total - first.energy_total).abs()).fold(0.0, f64::max)
        / first.energy_total.abs().max(f64::MIN_POSITIVE);
    (c, e)
}

/// Grid points per axis for `eps`: `n_ref (eps_ref/eps)^β` rounded up to a power of two.
pub fn sweep_points(n_ref: usize, eps_ref: f64, eps: f64, beta: f64) -> usize {
    let want = (n_ref as f64 * (eps_ref / eps).powf(beta) * (1.0 - 1e-12)).ceil() as usize;
    want.max(8).next_power_of_two()
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Shared model; `eps` is replaced per member.
    pub params: ModelParams,
    pub potential: PotentialSpec,
    /// Ground-state profile `U` (on its own grid).
    pub profile: ScalarField,
    pub eps_list: Vec<f64>,
    /// Half-width of the physical box.
    pub extent: f64,
    /// Points per axis at the largest ε.
    pub n_ref: usize,
    pub horizon: f64,
    pub c_t: f64,
    pub callback_stride: usize,
    pub diag: DiagOptions,
    /// Step of the classical reference.
    pub classical_dt: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepMember {
    pub eps: f64,
    pub points: usize,
    pub dt: f64,
    pub steps: usize,
    pub sup_h: f64,
    pub sup_distance: f64,
    pub sup_center_gap: f64,
    pub charge_drift: f64,
    pub energy_drift: f64,
    #[serde(skip)]
    pub samples: Vec<TrajectorySample>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub horizon: f64,
    pub members: Vec<SweepMember>,
    /// First failing member, if any; `members` then holds the ones that finished.
    pub failure: Option<String>,
}

impl SweepReport {
    pub fn into_result(self) -> Result<Self> {
        match &self.failure {
            Some(m) => Err(Error::Unresolved(format!("sweep aborted: {m}"))),
            None => Ok(self),
        }
    }
}

/// Evolve one member of a sweep.
pub fn run_member(cfg: &SweepConfig, eps: f64) -> Result<SweepMember> {
    let params = cfg.params.with_eps(eps);
    let eps_ref = cfg.eps_list.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let points = sweep_points(cfg.n_ref, eps_ref, eps, params.beta);
    let grid = GridSpec::new(params.dim, cfg.extent, points)?;
    let riesz = Arc::new(RieszOperator::build(grid, params.theta, RieszMode::FreeSpace)?);
    let psi0 = build_initial_data(&cfg.profile, &params, None, grid)?;
    let mut state = PropagatorState::new(psi0, params.clone(), cfg.potential.clone(), riesz, cfg.c_t)?;
    let opts = EvolveOptions { callback_stride: cfg.callback_stride, diag: cfg.diag.clone(), snapshots: None };
    let samples = state.evolve(cfg.horizon, &opts)?;
    let classical = classical_trajectory(&cfg.potential, &params.v, cfg.horizon, cfg.classical_dt)?;
    let (charge_drift, energy_drift) = conservation_drift(&samples);
    let gap = |s: &TrajectorySample| {
        s.barycenter.iter().zip(&s.concentration_center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    };
    let member = SweepMember {
        eps,
        points,
        dt: state.dt(),
        steps: state.steps(),
        sup_h: samples.iter().map(TrajectorySample::h_norm).fold(0.0, f64::max),
        sup_distance: compare_trajectories(&samples, &classical)?,
        sup_center_gap: samples.iter().map(gap).fold(0.0, f64::max),
        charge_drift,
        energy_drift,
        samples,
    };
    info!(
        "ε = {eps}: n = {points}, sup|H| = {:.3e}, sup|q − q_cl| = {:.3e}",
        member.sup_h, member.sup_distance
    );
    Ok(member)
}

/// Run every ε of the sweep (concurrently) and collect the report.
pub fn run_epsilon_sweep(cfg: &SweepConfig) -> SweepReport {
    let results: Vec<(f64, Result<SweepMember>)> = cfg.eps_list.par_iter().map(|&e| (e, run_member(cfg, e))).collect();
    let mut members = Vec::new();
    let mut failure = None;
    for (eps, r) in results {
        match r {
            Ok(m) => members.push(m),
            Err(e) => {
                warn!("sweep member ε = {eps} failed: {e}");
                failure.get_or_insert_with(|| format!("ε = {eps}: {e}"));
            }
        }
    }
    SweepReport { horizon: cfg.horizon, members, failure }
}

/// Column names of the trajectory CSV for dimension `dim`.
pub fn csv_header(dim: usize) -> Vec<String> {
    let axes = ["x", "y", "z"];
    let mut h: Vec<String> = ["t", "charge", "E_total", "E_internal", "E_potential"].iter().map(|s| s.to_string()).collect();
    for prefix in ["q", "p", "f", "H", "qhat"] {
        h.extend(axes[..dim].iter().map(|a| format!("{prefix}{a}")));
    }
    h.push("mass_outside".into());
    h
}

pub fn write_trajectory_csv<W: Write>(samples: &[TrajectorySample], dim: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(dim))?;
    for s in samples {
        let mut row = vec![s.t, s.charge, s.energy_total, s.energy_internal, s.energy_potential];
        for v in [&s.barycenter, &s.momentum, &s.force, &s.h_eps, &s.concentration_center] {
            row.extend_from_slice(v);
        }
        row.push(s.mass_outside);
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
