//! Separable trigonometric interpolation between grids.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{FieldKind, GridSpec, ScalarField};
use crate::error::{Error, Result};

/// Affine coordinate map `y = scale * x + offset[axis]` from target to source.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisMap {
    pub scale: f64,
    pub offset: Vec<f64>,
}

impl AxisMap {
    pub fn identity(dim: usize) -> Self {
        AxisMap { scale: 1.0, offset: vec![0.0; dim] }
    }

    /// Source evaluated at `(x - center) / width`.
    pub fn dilation(dim: usize, width: f64, center: &[f64]) -> Self {
        AxisMap { scale: 1.0 / width, offset: (0..dim).map(|a| -center[a] / width).collect() }
    }
}

/// Cardinal function of even-`n` trigonometric interpolation on a period `2L`.
fn cardinal(xi: f64, h: f64, period: f64, n: usize) -> f64 {
    let a = std::f64::consts::PI * xi / h;
    let b = (std::f64::consts::PI * xi / period).tan();
    if b.abs() < 1e-300 || xi.abs() < 1e-13 * h {
        return 1.0;
    }
    a.sin() / (n as f64 * b)
}

fn weights(src: &GridSpec, target: &GridSpec, scale: f64, offset: f64) -> Vec<f64> {
    let ns = src.points;
    let h = src.spacing();
    let period = 2.0 * src.extent;
    let mut w = vec![0.0; target.points * ns];
    for i in 0..target.points {
        let y = scale * target.coord(i) + offset;
        // the source is taken to vanish outside its own box
        if y < -src.extent - 1e-12 * h || y >= src.extent {
            continue;
        }
        let row = &mut w[i * ns..(i + 1) * ns];
        let nearest = ((y + src.extent) / h).round();
        if ((y + src.extent) / h - nearest).abs() < 1e-12 {
            row[(nearest as usize) % ns] = 1.0;
            continue;
        }
        for (j, r) in row.iter_mut().enumerate() {
            *r = cardinal(y - src.coord(j), h, period, ns);
        }
    }
    w
}

pub(super) fn resample(src: &ScalarField, target: GridSpec, map: &AxisMap) -> Result<ScalarField> {
    let dim = src.grid.dim;
    if target.dim != dim || map.offset.len() != dim {
        return Err(Error::GridMismatch("resample dimension".into()));
    }
    let ns = src.grid.points;
    let nt = target.points;
    let mut shape = vec![ns; dim];
    let mut data: Vec<Complex64> = src.values().to_vec();
    for axis in 0..dim {
        let w = weights(&src.grid, &target, map.scale, map.offset[axis]);
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out = vec![Complex64::default(); outer * nt * inner];
        out.par_chunks_mut(nt * inner).enumerate().for_each(|(o, block)| {
            for i in 0..nt {
                let row = &w[i * ns..(i + 1) * ns];
                let dst = &mut block[i * inner..(i + 1) * inner];
                for (j, &wij) in row.iter().enumerate() {
                    if wij == 0.0 {
                        continue;
                    }
                    let s = &data[(o * ns + j) * inner..(o * ns + j + 1) * inner];
                    for (d, v) in dst.iter_mut().zip(s) {
                        *d += v * wij;
                    }
                }
            }
        });
        shape[axis] = nt;
        data = out;
    }
    let field = match src.kind() {
        FieldKind::Real => ScalarField::from_real(target, data.iter().map(|z| z.re).collect())?,
        FieldKind::Complex => ScalarField::from_complex(target, data)?,
    };
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn identity_is_exact() {
        let g = GridSpec::new(2, 3.0, 16).unwrap();
        let f = ScalarField::from_fn_real(g, |x| (x[0] * 0.7).sin() + x[1]);
        let r = f.resample(g, &AxisMap::identity(2)).unwrap();
        assert_eq!(r, f);
    }

    #[test]
    fn band_limited_is_reproduced_off_grid() {
        let l = PI;
        let src = GridSpec::new(1, l, 32).unwrap();
        let f = ScalarField::from_fn_real(src, |x| (3.0 * x[0]).cos() + 0.5 * (5.0 * x[0]).sin());
        let tgt = GridSpec::new(1, l, 128).unwrap();
        let r = f.resample(tgt, &AxisMap::identity(1)).unwrap();
        for (i, z) in r.values().iter().enumerate() {
            let x = tgt.coord(i);
            assert!((z.re - ((3.0 * x).cos() + 0.5 * (5.0 * x).sin())).abs() < 1e-12);
        }
    }

    #[test]
    fn dilation_of_gaussian() {
        let src = GridSpec::new(2, 8.0, 64).unwrap();
        let f = ScalarField::from_fn_real(src, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let tgt = GridSpec::new(2, 2.0, 64).unwrap();
        let map = AxisMap::dilation(2, 0.25, &[0.1, -0.2]);
        let r = f.resample(tgt, &map).unwrap();
        for (i, z) in r.values().iter().enumerate() {
            let x = tgt.position(i);
            let y0 = (x[0] - 0.1) / 0.25;
            let y1 = (x[1] + 0.2) / 0.25;
            let exact = if y0.abs() < 8.0 && y1.abs() < 8.0 { (-(y0 * y0 + y1 * y1)).exp() } else { 0.0 };
            assert!((z.re - exact).abs() < 1e-9, "{} vs {}", z.re, exact);
        }
    }
}
