//! Riesz potential `I_θ(x) = c_{N,θ} |x|^{θ-N}` applied by FFT.
//!
//! Free-space mode convolves on a grid doubled per axis with the kernel
//! sampled in physical space, so no periodic images enter. The singular
//! origin is handled by lattice-sum corrections: the origin weight and a
//! discrete-Laplacian stencil around it carry `-Z_N(s)` and `-Z_N(s-2)`
//! (`s = N - θ`), which removes the `h^θ` and `h^{θ+2}` error terms of the
//! punctured Riemann sum. Periodic mode is the multiplier `|k|^{-θ}` with
//! the zero mode removed.

mod zeta;

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

pub use self::zeta::epstein_zeta;

use crate::error::{Error, Result};
use crate::field::{det_sum, FftNd, GridOps, GridSpec, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RieszMode {
    #[default]
    FreeSpace,
    Periodic,
}

/// `Γ((N-θ)/2) / (Γ(θ/2) π^{N/2} 2^θ)`.
pub fn riesz_constant(dim: usize, theta: f64) -> f64 {
    let n = dim as f64;
    gamma((n - theta) / 2.0) / (gamma(theta / 2.0) * std::f64::consts::PI.powf(n / 2.0) * 2f64.powf(theta))
}

pub struct RieszOperator {
    grid: GridSpec,
    theta: f64,
    mode: RieszMode,
    /// Points per axis of the transform grid (`2n` in free-space mode).
    padded: usize,
    fft: Arc<FftNd>,
    /// Real multiplier, including quadrature weight and inverse-FFT normalization.
    spectrum: Vec<f64>,
}

impl std::fmt::Debug for RieszOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RieszOperator")
            .field("grid", &self.grid)
            .field("theta", &self.theta)
            .field("mode", &self.mode)
            .finish()
    }
}

impl RieszOperator {
    pub fn build(grid: GridSpec, theta: f64, mode: RieszMode) -> Result<Self> {
        let n = grid.dim as f64;
        if !(theta > 0.0 && theta < n) {
            return Err(Error::InvalidParameter(format!("θ={theta} outside (0, {})", grid.dim)));
        }
        match mode {
            RieszMode::FreeSpace => Ok(Self::build_free_space(grid, theta)),
            RieszMode::Periodic => Ok(Self::build_periodic(grid, theta)),
        }
    }

    fn build_free_space(grid: GridSpec, theta: f64) -> Self {
        let dim = grid.dim;
        let m = 2 * grid.points;
        let h = grid.spacing();
        let s = dim as f64 - theta;
        let c = riesz_constant(dim, theta);
        let len = m.pow(dim as u32);
        let disp = |i: usize| if i <= grid.points { i as f64 } else { i as f64 - m as f64 };
        let mut kernel: Vec<Complex64> = (0..len)
            .into_par_iter()
            .map(|flat| {
                let mut rest = flat;
                let mut r2 = 0.0;
                for _ in 0..dim {
                    let j = disp(rest % m);
                    rest /= m;
                    r2 += j * j;
                }
                if r2 == 0.0 {
                    Complex64::default()
                } else {
                    Complex64::from(c * (r2.sqrt() * h).powf(-s))
                }
            })
            .collect();
        let z0 = epstein_zeta(dim, s);
        let z2 = epstein_zeta(dim, s - 2.0);
        let stencil = -c * z2 * h.powf(-s) / (2.0 * dim as f64);
        kernel[0] = Complex64::from(-c * z0 * h.powf(-s) - 2.0 * dim as f64 * stencil);
        for axis in 0..dim {
            let stride = m.pow((dim - 1 - axis) as u32);
            kernel[stride] += stencil;
            kernel[(m - 1) * stride] += stencil;
        }
        let fft = FftNd::shared(dim, m);
        fft.forward(&mut kernel);
        let w = grid.cell_volume() / len as f64;
        let spectrum = kernel.iter().map(|z| z.re * w).collect();
        RieszOperator { grid, theta, mode: RieszMode::FreeSpace, padded: m, fft, spectrum }
    }

    fn build_periodic(grid: GridSpec, theta: f64) -> Self {
        let ops = GridOps::shared(&grid);
        let len = grid.len() as f64;
        let spectrum = ops
            .k2
            .iter()
            .map(|&k2| if k2 == 0.0 { 0.0 } else { k2.powf(-theta / 2.0) / len })
            .collect();
        RieszOperator { grid, theta, mode: RieszMode::Periodic, padded: grid.points, fft: ops.fft.clone(), spectrum }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn mode(&self) -> RieszMode {
        self.mode
    }

    /// Multiplier values scaled back to the continuous-transform normalization.
    pub fn kernel_spectrum(&self) -> Vec<f64> {
        let len = self.padded.pow(self.grid.dim as u32) as f64;
        let w = match self.mode {
            RieszMode::FreeSpace => len / self.grid.cell_volume(),
            RieszMode::Periodic => len,
        };
        self.spectrum.iter().map(|x| x * w).collect()
    }

    /// `I_θ * f` on the grid nodes for real samples `f`.
    pub fn convolve_values(&self, f: &[f64]) -> Vec<f64> {
        let grid = self.grid;
        let n = grid.points;
        let dim = grid.dim;
        let m = self.padded;
        let mut buf = vec![Complex64::default(); m.pow(dim as u32)];
        // copy the n-block into the corner of the padded array
        let embed = |flat: usize| {
            let mut rest = flat;
            let mut out = 0usize;
            let mut mul = 1usize;
            for _ in 0..dim {
                out += (rest % n) * mul;
                rest /= n;
                mul *= m;
            }
            out
        };
        for (i, &v) in f.iter().enumerate() {
            buf[embed(i)] = Complex64::from(v);
        }
        self.fft.forward(&mut buf);
        buf.par_iter_mut().zip(&self.spectrum).for_each(|(z, w)| *z *= w);
        self.fft.inverse(&mut buf);
        (0..grid.len()).into_par_iter().map(|i| buf[embed(i)].re).collect()
    }

    pub fn convolve(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        ScalarField::from_real(self.grid, self.convolve_values(&f.re()))
    }

    fn check(&self, f: &ScalarField) -> Result<()> {
        if f.grid().same_as(&self.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("field and Riesz operator grids differ".into()))
        }
    }

    /// `|u|^p` pointwise.
    pub fn density(u: &ScalarField, p: f64) -> Vec<f64> {
        u.values().par_iter().map(|z| z.norm().powf(p)).collect()
    }

    /// `D(u) = ∫ (I_θ * |u|^p) |u|^p`.
    pub fn hartree_energy(&self, u: &ScalarField, p: f64) -> Result<f64> {
        self.check(u)?;
        let g = Self::density(u, p);
        let conv = self.convolve_values(&g);
        Ok(det_sum(g.len(), |i| conv[i] * g[i]) * self.grid.cell_volume())
    }

    /// `I_θ * |u|^p` together with the weight `|u|^{p-2}` (zero where `u = 0`).
    pub fn potential_and_weight(&self, u: &ScalarField, p: f64) -> (Vec<f64>, Vec<f64>) {
        let g = Self::density(u, p);
        let conv = self.convolve_values(&g);
        let weight = u
            .values()
            .par_iter()
            .map(|z| {
                let a = z.norm();
                if a > 0.0 {
                    a.powf(p - 2.0)
                } else {
                    0.0
                }
            })
            .collect();
        (conv, weight)
    }

    /// `(I_θ * |u|^p) |u|^{p-2} u`.
    pub fn nonlocal_term(&self, u: &ScalarField, p: f64) -> Result<ScalarField> {
        self.check(u)?;
        let (conv, weight) = self.potential_and_weight(u, p);
        let w: Vec<f64> = conv.iter().zip(&weight).map(|(a, b)| a * b).collect();
        u.mul_real(&w)
    }

    /// `D(u) / (‖∇u‖^{Np-θ-N} ‖u‖^{2p-Np+N+θ})`.
    pub fn hls_ratio(&self, u: &ScalarField, p: f64) -> Result<f64> {
        let n = self.grid.dim as f64;
        let grad = u.grad_norm_sq().sqrt();
        let norm = u.charge().sqrt();
        let denom = grad.powf(n * p - self.theta - n) * norm.powf(2.0 * p - n * p + n + self.theta);
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::InvalidParameter("HLS ratio denominator vanishes".into()));
        }
        Ok(self.hartree_energy(u, p)? / denom)
    }
}
