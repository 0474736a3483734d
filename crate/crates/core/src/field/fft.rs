//! Multi-dimensional complex FFT on cubic arrays, built from 1-D rustfft plans.
//!
//! Transforms are unnormalized; callers scale. Each line is transformed
//! independently, so results do not depend on the thread count.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub struct FftNd {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<FftNd>>>> = OnceLock::new();

impl FftNd {
    pub fn new(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftNd {
            dim,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Plans are shared per `(dim, n)`.
    pub fn shared(dim: usize, n: usize) -> Arc<FftNd> {
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("fft cache poisoned");
        map.entry((dim, n)).or_insert_with(|| Arc::new(FftNd::new(dim, n))).clone()
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len(), "fft buffer length");
        let n = self.n;
        let scratch_len = plan.get_inplace_scratch_len();
        let mut lines = vec![Complex64::default(); data.len()];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                data.par_chunks_mut(n * 64.min(data.len() / n).max(1)).for_each_init(
                    || vec![Complex64::default(); scratch_len],
                    |scratch, chunk| plan.process_with_scratch(chunk, scratch),
                );
                continue;
            }
            // gather: line (outer, inner) -> lines[(outer*stride + inner)*n + i]
            {
                let src: &[Complex64] = data;
                lines.par_chunks_mut(n).enumerate().for_each(|(line, out)| {
                    let outer = line / stride;
                    let inner = line % stride;
                    let base = outer * n * stride + inner;
                    for (i, o) in out.iter_mut().enumerate() {
                        *o = src[base + i * stride];
                    }
                });
            }
            lines.par_chunks_mut(n * 64.min(data.len() / n).max(1)).for_each_init(
                || vec![Complex64::default(); scratch_len],
                |scratch, chunk| plan.process_with_scratch(chunk, scratch),
            );
            // scatter: data chunk c = outer*n + i holds inner = 0..stride
            {
                let src: &[Complex64] = &lines;
                data.par_chunks_mut(stride).enumerate().for_each(|(c, out)| {
                    let outer = c / n;
                    let i = c % n;
                    for (inner, o) in out.iter_mut().enumerate() {
                        *o = src[(outer * stride + inner) * n + i];
                    }
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(dim: usize, n: usize, data: &[Complex64]) -> Vec<Complex64> {
        let len = n.pow(dim as u32);
        let idx = |mut f: usize| {
            let mut m = vec![0usize; dim];
            for a in (0..dim).rev() {
                m[a] = f % n;
                f /= n;
            }
            m
        };
        (0..len)
            .map(|k| {
                let km = idx(k);
                let mut acc = Complex64::default();
                for (j, v) in data.iter().enumerate() {
                    let jm = idx(j);
                    let phase: f64 = km.iter().zip(&jm).map(|(a, b)| (a * b) as f64).sum::<f64>();
                    acc += v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * phase / n as f64);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        for dim in 1..=3 {
            let n: usize = 8;
            let len = n.pow(dim as u32);
            let data: Vec<Complex64> =
                (0..len).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
            let mut fast = data.clone();
            FftNd::new(dim, n).forward(&mut fast);
            let slow = naive_dft(dim, n, &data);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-10, "dim {dim}: {a} vs {b}");
            }
        }
    }
}
