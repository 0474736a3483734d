//! Epstein zeta function of the integer lattice, `Z_N(s) = Σ'_{j∈Z^N} |j|^{-s}`,
//! analytically continued through the theta-function splitting at `t = 1`.
//! The self-dual lattice makes both halves incomplete-gamma sums.

use statrs::function::gamma::{gamma, gamma_ur};

const SHELLS: i64 = 6;

/// `Γ(a, x)` for `a > -1`, `x > 0`.
fn upper_gamma(a: f64, x: f64) -> f64 {
    if a > 0.0 {
        gamma_ur(a, x) * gamma(a)
    } else {
        (upper_gamma(a + 1.0, x) - x.powf(a) * (-x).exp()) / a
    }
}

pub fn epstein_zeta(dim: usize, s: f64) -> f64 {
    let n = dim as f64;
    if s.abs() < 1e-14 {
        return -1.0;
    }
    assert!(s > -2.0 && s < n, "epstein_zeta: s={s} outside (-2, {dim})");
    let side = (2 * SHELLS + 1) as usize;
    let mut head = 0.0;
    let mut tail = 0.0;
    for flat in 0..side.pow(dim as u32) {
        let mut rest = flat;
        let mut q = 0i64;
        for _ in 0..dim {
            let j = (rest % side) as i64 - SHELLS;
            rest /= side;
            q += j * j;
        }
        if q == 0 {
            continue;
        }
        let x = std::f64::consts::PI * q as f64;
        head += upper_gamma(s / 2.0, x) * x.powf(-s / 2.0);
        tail += upper_gamma((n - s) / 2.0, x) * x.powf(-(n - s) / 2.0);
    }
    let g = head + tail - 2.0 / (n - s) - 2.0 / s;
    std::f64::consts::PI.powf(s / 2.0) * g / gamma(s / 2.0)
}
