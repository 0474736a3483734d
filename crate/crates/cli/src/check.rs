//! Invariant smoke suite behind `choquard check`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::gamma::gamma;

use choquard_core::{EnergyFunctional, ExperimentConfig, GridSpec, RieszMode, RieszOperator, ScalarField};

use crate::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn row(name: &str, passed: bool, detail: String) -> CheckRow {
    CheckRow { name: name.into(), passed, detail }
}

/// Closed form of `(I_θ ∗ e^{−|y|²})(0)`.
pub fn gaussian_oracle(dim: usize, theta: f64) -> f64 {
    let n = dim as f64;
    gamma((n - theta) / 2.0) / (2f64.powf(theta) * gamma(n / 2.0))
}

/// Every row is computed even when an earlier one fails.
pub fn run_checks(cfg: &ExperimentConfig) -> CliResult<Vec<CheckRow>> {
    let m = &cfg.model;
    let mut rows = Vec::new();

    rows.push(match cfg.model_params() {
        Ok(p) => {
            let note = if p.theory_regime() { "" } else { " (below N = 3: outside the analysed regime)" };
            row("model parameters", true, format!("α = {:.6}, β = {:.6}, κ = ε^{:.6}{note}", p.alpha, p.beta, p.kappa_exponent()))
        }
        Err(e) => row("model parameters", false, e.to_string()),
    });

    let potential = cfg.potential.as_ref().expect("checked by require");
    rows.push(match potential.certify_assumptions(m.dim, cfg.grid.extent, &[], 256, cfg.seed) {
        Ok(c) if c.exempt => row("potential assumptions", true, "exempt (V ≡ 0)".into()),
        Ok(c) => row(
            "potential assumptions",
            c.accepted(),
            format!(
                "worst margins V0 {:.3e}, V1 {:.3e}, V2 {:.3e}",
                c.v0.worst_margin, c.v1.worst_margin, c.v2.worst_margin
            ),
        ),
        Err(e) => row("potential assumptions", false, e.to_string()),
    });

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let g = GridSpec::new(m.dim, 1.0, 16)?;
    let f = ScalarField::from_real(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let spec = f.fft();
    let parseval = (spec.charge() - f.charge()).abs() / f.charge();
    let round = spec.ifft().sub(&f)?.sup_norm();
    rows.push(row("FFT Parseval", parseval < 1e-12 && round < 1e-12, format!("relative {parseval:.1e}, round trip {round:.1e}")));

    if m.theta > 0.0 && m.theta < m.dim as f64 {
        let n = [0, 512, 128, 64][m.dim.min(3)];
        let g = GridSpec::new(m.dim, 8.0, n)?;
        let op = RieszOperator::build(g, m.theta, RieszMode::FreeSpace)?;
        let gauss = ScalarField::from_fn_real(g, |x| (-x.iter().map(|t| t * t).sum::<f64>()).exp());
        let value = op.convolve(&gauss)?.values()[g.ravel(&vec![n / 2; m.dim])].re;
        let oracle = gaussian_oracle(m.dim, m.theta);
        let err = (value - oracle).abs();
        rows.push(row("Riesz Gaussian oracle", err < 1e-4, format!("grid {value:.8} vs {oracle:.8} (error {err:.1e}), {n}^{}", m.dim)));

        let (extent, n) = [(0.0, 0), (6.0, 256), (5.0, 64), (6.0, 32)][m.dim.min(3)];
        let g = GridSpec::new(m.dim, extent, n)?;
        let func = EnergyFunctional::new(Arc::new(RieszOperator::build(g, m.theta, RieszMode::FreeSpace)?), m.p);
        let bump = ScalarField::from_fn_real(g, |x| (-x.iter().map(|t| t * t).sum::<f64>() / 2.0).exp());
        let weight = bump.re();
        let mut random = |amp: f64| -> CliResult<ScalarField> {
            let r = (0..g.len()).map(|_| amp * rng.random_range(-1.0..1.0)).collect();
            Ok(ScalarField::from_real(g, r)?.mul_real(&weight)?)
        };
        let u = bump.add(&random(0.1)?)?;
        let grad = func.grad_j(&u)?;
        let mut worst: f64 = 0.0;
        let h = 1e-4;
        for _ in 0..10 {
            let v = random(1.0)?;
            let fd = (func.j(&u.axpy(h, &v)?)? - func.j(&u.axpy(-h, &v)?)?) / (2.0 * h);
            let an = grad.real_inner(&v)?;
            worst = worst.max((fd - an).abs() / an.abs());
        }
        rows.push(row("gradient check", worst < 1e-5, format!("max relative error {worst:.1e} over 10 directions")));
    } else {
        rows.push(row("Riesz Gaussian oracle", false, format!("θ = {} outside (0, N)", m.theta)));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_values() {
        assert!((gaussian_oracle(3, 2.0) - 0.5).abs() < 1e-14);
        // N = 2, θ = 1: Γ(1/2)/2
        assert!((gaussian_oracle(2, 1.0) - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-14);
    }
}
