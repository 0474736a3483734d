//! Periodic grids, scalar fields, spectral calculus and the observables that
//! are plain functionals of a field (charge, barycenter, localized mass,
//! momentum).

mod fft;
mod grid;
mod interp;
pub mod snapshot;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::fft::FftNd;
pub use self::grid::GridSpec;
pub use self::interp::AxisMap;

use crate::error::{Error, Result};

/// Chunk length for deterministic partial sums.
const SUM_CHUNK: usize = 4096;

/// Mass fraction outside `L/2` of the barycenter above which a warning is logged.
pub const BOUNDARY_WARN_MASS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    Real,
    Complex,
}

/// Values on a [`GridSpec`], stored as complex numbers. A `Real` field has
/// identically zero imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    kind: FieldKind,
    data: Vec<Complex64>,
}

/// Spectral tables shared per grid.
pub(crate) struct GridOps {
    pub fft: Arc<FftNd>,
    /// Per-axis angular wavenumbers (FFT order).
    pub k: Vec<f64>,
    /// `|k|^2` for every flat spectral index.
    pub k2: Vec<f64>,
}

static OPS: OnceLock<Mutex<HashMap<(usize, usize, u64), Arc<GridOps>>>> = OnceLock::new();

impl GridOps {
    pub(crate) fn shared(grid: &GridSpec) -> Arc<GridOps> {
        let cache = OPS.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (grid.dim, grid.points, grid.extent.to_bits());
        let mut map = cache.lock().expect("grid ops cache poisoned");
        map.entry(key)
            .or_insert_with(|| {
                let k = grid.wavenumbers();
                let k2 = (0..grid.len())
                    .map(|idx| {
                        let m = grid.unravel(idx);
                        (0..grid.dim).map(|a| k[m[a]] * k[m[a]]).sum()
                    })
                    .collect();
                Arc::new(GridOps { fft: FftNd::shared(grid.dim, grid.points), k, k2 })
            })
            .clone()
    }
}

/// Deterministic sum: fixed chunks summed in parallel, then folded in order.
pub(crate) fn det_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = len.div_ceil(SUM_CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * SUM_CHUNK;
            let hi = (lo + SUM_CHUNK).min(len);
            (lo..hi).map(&f).sum::<f64>()
        })
        .collect();
    partial.iter().sum()
}

impl ScalarField {
    pub fn zeros(grid: GridSpec, kind: FieldKind) -> Self {
        ScalarField { grid, kind, data: vec![Complex64::default(); grid.len()] }
    }

    pub fn from_real(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        Ok(ScalarField { grid, kind: FieldKind::Real, data: values.into_iter().map(Complex64::from).collect() })
    }

    pub fn from_complex(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        Ok(ScalarField { grid, kind: FieldKind::Complex, data: values })
    }

    pub fn from_fn_real<F: Fn(&[f64]) -> f64 + Sync>(grid: GridSpec, f: F) -> Self {
        let dim = grid.dim;
        let data = (0..grid.len())
            .into_par_iter()
            .map(|i| Complex64::from(f(&grid.position(i)[..dim])))
            .collect();
        ScalarField { grid, kind: FieldKind::Real, data }
    }

    pub fn from_fn_complex<F: Fn(&[f64]) -> Complex64 + Sync>(grid: GridSpec, f: F) -> Self {
        let dim = grid.dim;
        let data = (0..grid.len()).into_par_iter().map(|i| f(&grid.position(i)[..dim])).collect();
        ScalarField { grid, kind: FieldKind::Complex, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn is_real(&self) -> bool {
        self.kind == FieldKind::Real
    }

    pub fn values(&self) -> &[Complex64] {
        &self.data
    }

    /// Mutable access; a real field is re-tagged complex.
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        self.kind = FieldKind::Complex;
        &mut self.data
    }

    /// Real parts.
    pub fn re(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn into_complex(mut self) -> Self {
        self.kind = FieldKind::Complex;
        self
    }

    /// Drop imaginary parts and tag as real.
    pub fn real_part(&self) -> Self {
        let data = self.data.iter().map(|z| Complex64::new(z.re, 0.0)).collect();
        ScalarField { grid: self.grid, kind: FieldKind::Real, data }
    }

    /// Pointwise modulus, tagged real.
    pub fn modulus(&self) -> Self {
        let data = self.data.par_iter().map(|z| Complex64::new(z.norm(), 0.0)).collect();
        ScalarField { grid: self.grid, kind: FieldKind::Real, data }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn check_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }

    fn combined_kind(&self, other: &ScalarField) -> FieldKind {
        if self.is_real() && other.is_real() {
            FieldKind::Real
        } else {
            FieldKind::Complex
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        let data = self.data.par_iter().map(|z| z * c).collect();
        ScalarField { grid: self.grid, kind: self.kind, data }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &ScalarField) -> Result<Self> {
        self.check_grid(other)?;
        let data = self.data.par_iter().zip(&other.data).map(|(a, b)| a + b * c).collect();
        Ok(ScalarField { grid: self.grid, kind: self.combined_kind(other), data })
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// Pointwise product with a real multiplier.
    pub fn mul_real(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.data.len() {
            return Err(Error::GridMismatch("multiplier length".into()));
        }
        let data = self.data.par_iter().zip(weights).map(|(z, w)| z * w).collect();
        Ok(ScalarField { grid: self.grid, kind: self.kind, data })
    }

    /// Multiply by `e^{i phase(x)}`.
    pub fn with_phase<F: Fn(&[f64]) -> f64 + Sync>(&self, phase: F) -> Self {
        let dim = self.grid.dim;
        let grid = self.grid;
        let data = self
            .data
            .par_iter()
            .enumerate()
            .map(|(i, z)| z * Complex64::from_polar(1.0, phase(&grid.position(i)[..dim])))
            .collect();
        ScalarField { grid: self.grid, kind: FieldKind::Complex, data }
    }

    pub fn map_values<F: Fn(Complex64) -> Complex64 + Sync>(&self, f: F, kind: FieldKind) -> Self {
        let data = self.data.par_iter().map(|&z| f(z)).collect();
        ScalarField { grid: self.grid, kind, data }
    }

    /// Periodic roll by whole cells.
    pub fn shift_cells(&self, shift: &[i64]) -> Self {
        let n = self.grid.points as i64;
        let grid = self.grid;
        let data = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let m = grid.unravel(i);
                let mut src = [0usize; 3];
                for a in 0..grid.dim {
                    src[a] = (m[a] as i64 - shift.get(a).copied().unwrap_or(0)).rem_euclid(n) as usize;
                }
                self.data[grid.ravel(&src)]
            })
            .collect();
        ScalarField { grid: self.grid, kind: self.kind, data }
    }

    // ---- spectral calculus ----

    /// Unitary forward transform; the result lives on the same grid as coefficients.
    pub fn fft(&self) -> Self {
        let ops = GridOps::shared(&self.grid);
        let mut data = self.data.clone();
        ops.fft.forward(&mut data);
        let s = 1.0 / (self.grid.len() as f64).sqrt();
        data.par_iter_mut().for_each(|z| *z *= s);
        ScalarField { grid: self.grid, kind: FieldKind::Complex, data }
    }

    /// Unitary inverse transform.
    pub fn ifft(&self) -> Self {
        let ops = GridOps::shared(&self.grid);
        let mut data = self.data.clone();
        ops.fft.inverse(&mut data);
        let s = 1.0 / (self.grid.len() as f64).sqrt();
        data.par_iter_mut().for_each(|z| *z *= s);
        ScalarField { grid: self.grid, kind: FieldKind::Complex, data }
    }

    /// Apply a Fourier multiplier given per flat spectral index.
    pub fn apply_multiplier<F>(&self, mult: F) -> Self
    where
        F: Fn(usize) -> Complex64 + Sync,
    {
        let ops = GridOps::shared(&self.grid);
        let mut data = self.data.clone();
        ops.fft.forward(&mut data);
        let s = 1.0 / self.grid.len() as f64;
        data.par_iter_mut().enumerate().for_each(|(i, z)| *z *= mult(i) * s);
        ops.fft.inverse(&mut data);
        ScalarField { grid: self.grid, kind: FieldKind::Complex, data }
    }

    /// Spectral gradient; the Nyquist mode is dropped so real fields stay real.
    pub fn gradient(&self) -> Vec<ScalarField> {
        let ops = GridOps::shared(&self.grid);
        let n = self.grid.points;
        let grid = self.grid;
        (0..grid.dim)
            .map(|axis| {
                let g = self.apply_multiplier(|i| {
                    let m = grid.unravel(i)[axis];
                    if m == n / 2 {
                        Complex64::default()
                    } else {
                        Complex64::new(0.0, ops.k[m])
                    }
                });
                if self.is_real() {
                    g.real_part()
                } else {
                    g
                }
            })
            .collect()
    }

    pub fn laplacian(&self) -> Self {
        let ops = GridOps::shared(&self.grid);
        let out = self.apply_multiplier(|i| Complex64::from(-ops.k2[i]));
        if self.is_real() {
            out.real_part()
        } else {
            out
        }
    }

    /// `∫|∇f|^2` as `⟨f, -Δf⟩`, computed in spectral space.
    pub fn grad_norm_sq(&self) -> f64 {
        let ops = GridOps::shared(&self.grid);
        let spec = self.fft();
        let vol = self.grid.cell_volume();
        det_sum(spec.data.len(), |i| ops.k2[i] * spec.data[i].norm_sqr()) * vol
    }

    /// Full Sobolev norm `sqrt(‖f‖² + ‖∇f‖²)`.
    pub fn h1_norm(&self) -> f64 {
        (self.charge() + self.grad_norm_sq()).sqrt()
    }

    // ---- integrals and observables ----

    /// `∫ |f|^2` by Riemann sum.
    pub fn charge(&self) -> f64 {
        let d = &self.data;
        det_sum(d.len(), |i| d[i].norm_sqr()) * self.grid.cell_volume()
    }

    /// `Re ∫ conj(self) other`.
    pub fn real_inner(&self, other: &ScalarField) -> Result<f64> {
        self.check_grid(other)?;
        let (a, b) = (&self.data, &other.data);
        Ok(det_sum(a.len(), |i| (a[i].conj() * b[i]).re) * self.grid.cell_volume())
    }

    /// `∫ conj(self) other`.
    pub fn inner(&self, other: &ScalarField) -> Result<Complex64> {
        self.check_grid(other)?;
        let (a, b) = (&self.data, &other.data);
        let re = det_sum(a.len(), |i| (a[i].conj() * b[i]).re);
        let im = det_sum(a.len(), |i| (a[i].conj() * b[i]).im);
        Ok(Complex64::new(re, im) * self.grid.cell_volume())
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `∫ w |f|^2` for a real weight.
    pub fn weighted_density_integral(&self, weight: &[f64]) -> f64 {
        let d = &self.data;
        det_sum(d.len(), |i| weight[i] * d[i].norm_sqr()) * self.grid.cell_volume()
    }

    /// Charge-normalized first moment in box-chart coordinates.
    pub fn barycenter(&self) -> Result<Vec<f64>> {
        let c = self.charge();
        if !(c > 0.0) {
            return Err(Error::ZeroCharge);
        }
        let grid = self.grid;
        let vol = grid.cell_volume();
        Ok((0..grid.dim)
            .map(|a| {
                det_sum(self.data.len(), |i| grid.coord(grid.unravel(i)[a]) * self.data[i].norm_sqr()) * vol / c
            })
            .collect())
    }

    /// Fraction of charge at periodic distance greater than `radius` from `center`.
    pub fn mass_outside_ball(&self, center: &[f64], radius: f64) -> Result<f64> {
        let c = self.charge();
        if !(c > 0.0) {
            return Err(Error::ZeroCharge);
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("radius {radius} must be positive")));
        }
        let grid = self.grid;
        let r2 = radius * radius;
        let outside = det_sum(self.data.len(), |i| {
            let x = grid.position(i);
            let d2: f64 = (0..grid.dim)
                .map(|a| {
                    let d = grid.wrap(x[a] - center[a]);
                    d * d
                })
                .sum();
            if d2 > r2 {
                self.data[i].norm_sqr()
            } else {
                0.0
            }
        }) * grid.cell_volume();
        Ok((outside / c).clamp(0.0, 1.0))
    }

    /// Charge fraction farther than `L/2` from the barycenter; logs a warning
    /// above [`BOUNDARY_WARN_MASS`].
    pub fn boundary_mass(&self) -> Result<f64> {
        let q = self.barycenter()?;
        let m = self.mass_outside_ball(&q, self.grid.extent / 2.0)?;
        if m > BOUNDARY_WARN_MASS {
            warn!("boundary touch: mass {m:e} beyond L/2 of the barycenter");
        }
        Ok(m)
    }

    /// `∫ Im(conj ψ ∇ψ)` (no `eps` scaling).
    pub fn current_integral(&self) -> Vec<f64> {
        let vol = self.grid.cell_volume();
        self.gradient()
            .iter()
            .map(|g| det_sum(self.data.len(), |i| (self.data[i].conj() * g.data[i]).im) * vol)
            .collect()
    }

    /// `∫ p_eps = eps^{-(N-1)} ∫ Im(conj ψ ∇ψ)`.
    pub fn momentum_integral(&self, eps: f64) -> Vec<f64> {
        let s = eps.powi(-(self.grid.dim as i32 - 1));
        self.current_integral().into_iter().map(|v| v * s).collect()
    }

    /// Interpolate onto `target` by trigonometric interpolation along each axis,
    /// sampling the source at `map(axis, x)`.
    pub fn resample(&self, target: GridSpec, map: &AxisMap) -> Result<Self> {
        interp::resample(self, target, map)
    }
}
