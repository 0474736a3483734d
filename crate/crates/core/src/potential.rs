//! Closed-form external potentials and sampled checks of the growth
//! conditions
//!
//! ```text
//! (V0)  V ≥ 0
//! (V1)  |∇V(x)| ≤ V(x)^b     for |x| > R1
//! (V2)  V(x) ≥ |x|^a         for |x| > R1
//! ```
//!
//! The checks are evidence from sampling, not proofs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField};

/// Relative slack for the inequality checks (equality cases are common).
const MARGIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    /// `Σ c_a x_a²`; one coefficient means isotropic.
    Harmonic,
    /// `c0 |x|² + c1 |x|⁴`.
    QuarticAnharmonic,
    /// `c0 |x|^{c1}`.
    PowerLaw,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    #[serde(default)]
    pub coefficients: Vec<f64>,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "R1")]
    pub r1: f64,
    /// Accept the potential even when the growth conditions fail.
    #[serde(default)]
    pub exempt: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub passed: bool,
    /// Smallest relative margin seen; negative means violated.
    pub worst_margin: f64,
    /// Point where the worst margin occurred.
    pub witness: Vec<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub v0: AssumptionCheck,
    pub v1: AssumptionCheck,
    pub v2: AssumptionCheck,
    pub exempt: bool,
}

impl CertReport {
    pub fn all_passed(&self) -> bool {
        self.v0.passed && self.v1.passed && self.v2.passed
    }

    /// Passed, or failed with the exemption flag set.
    pub fn accepted(&self) -> bool {
        self.exempt || self.all_passed()
    }
}

impl PotentialSpec {
    /// `|x|²` with `a = 2`, `b = 3/4`, `R1 = 4`.
    pub fn harmonic() -> Self {
        PotentialSpec { kind: PotentialKind::Harmonic, coefficients: vec![1.0], a: 2.0, b: 0.75, r1: 4.0, exempt: false }
    }

    /// `|x|² + λ|x|⁴` with `a = 2`, `b = 0.9`, `R1 = 8`.
    pub fn quartic(lambda: f64) -> Self {
        PotentialSpec {
            kind: PotentialKind::QuarticAnharmonic,
            coefficients: vec![1.0, lambda],
            a: 2.0,
            b: 0.9,
            r1: 8.0,
            exempt: false,
        }
    }

    /// `c|x|^s`.
    pub fn power_law(c: f64, s: f64, a: f64, b: f64, r1: f64) -> Self {
        PotentialSpec { kind: PotentialKind::PowerLaw, coefficients: vec![c, s], a, b, r1, exempt: false }
    }

    /// `V ≡ 0`, exempt from the growth conditions.
    pub fn zero() -> Self {
        PotentialSpec { kind: PotentialKind::Zero, coefficients: vec![], a: 2.0, b: 0.5, r1: 2.0, exempt: true }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.a > 1.0) {
            return bad(format!("growth exponent a={} must exceed 1", self.a));
        }
        if !(self.b > 0.0 && self.b < 1.0) {
            return bad(format!("gradient exponent b={} must lie in (0,1)", self.b));
        }
        if !(self.r1 > 1.0) {
            return bad(format!("R1={} must exceed 1", self.r1));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return bad("non-finite potential coefficient".into());
        }
        let need = match self.kind {
            PotentialKind::Harmonic => (1, usize::MAX),
            PotentialKind::QuarticAnharmonic | PotentialKind::PowerLaw => (2, 2),
            PotentialKind::Zero => (0, usize::MAX),
        };
        if self.coefficients.len() < need.0 || self.coefficients.len() > need.1 {
            return bad(format!("{:?} takes {}..{} coefficients", self.kind, need.0, need.1.min(3)));
        }
        Ok(())
    }

    fn harmonic_coeff(&self, axis: usize) -> f64 {
        if self.coefficients.len() == 1 {
            self.coefficients[0]
        } else {
            self.coefficients.get(axis).copied().unwrap_or(0.0)
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self.kind {
            PotentialKind::Harmonic => x.iter().enumerate().map(|(a, v)| self.harmonic_coeff(a) * v * v).sum(),
            PotentialKind::QuarticAnharmonic => self.coefficients[0] * r2 + self.coefficients[1] * r2 * r2,
            PotentialKind::PowerLaw => self.coefficients[0] * r2.sqrt().powf(self.coefficients[1]),
            PotentialKind::Zero => 0.0,
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self.kind {
            PotentialKind::Harmonic => x.iter().enumerate().map(|(a, v)| 2.0 * self.harmonic_coeff(a) * v).collect(),
            PotentialKind::QuarticAnharmonic => {
                let f = 2.0 * self.coefficients[0] + 4.0 * self.coefficients[1] * r2;
                x.iter().map(|v| f * v).collect()
            }
            PotentialKind::PowerLaw => {
                if r2 == 0.0 {
                    return vec![0.0; x.len()];
                }
                let (c, s) = (self.coefficients[0], self.coefficients[1]);
                let f = c * s * r2.sqrt().powf(s - 2.0);
                x.iter().map(|v| f * v).collect()
            }
            PotentialKind::Zero => vec![0.0; x.len()],
        }
    }

    /// `V` and the components of `∇V` at the grid nodes.
    pub fn sample_on_grid(&self, grid: &GridSpec) -> (ScalarField, Vec<ScalarField>) {
        let dim = grid.dim;
        let v = ScalarField::from_fn_real(*grid, |x| self.eval(x));
        let g = (0..dim).map(|a| ScalarField::from_fn_real(*grid, |x| self.grad(x)[a])).collect();
        (v, g)
    }

    /// Sample (V0) in the cube `[-extent, extent]^dim` and (V1), (V2) on the
    /// given shells (default `R1·{1.01, 1.5, 2, 3, 5, 10}`).
    pub fn certify_assumptions(
        &self,
        dim: usize,
        extent: f64,
        shell_radii: &[f64],
        sample_count: usize,
        seed: u64,
    ) -> Result<CertReport> {
        self.validate()?;
        if !(1..=3).contains(&dim) || !(extent > 0.0) {
            return Err(Error::InvalidParameter("certification box".into()));
        }
        let defaults: Vec<f64> = [1.01, 1.5, 2.0, 3.0, 5.0, 10.0].iter().map(|f| f * self.r1).collect();
        let shells = if shell_radii.is_empty() { &defaults[..] } else { shell_radii };
        if let Some(r) = shells.iter().find(|&&r| !(r > self.r1)) {
            return Err(Error::InvalidParameter(format!("shell radius {r} not above R1={}", self.r1)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut box_points = axis_points(dim, extent);
        for _ in 0..sample_count {
            box_points.push((0..dim).map(|_| rng.random_range(-extent..=extent)).collect());
        }
        let mut v0 = Tracker::default();
        for x in &box_points {
            let v = self.eval(x);
            let scale = 1.0 + x.iter().map(|t| t * t).sum::<f64>();
            v0.observe(v / scale, x);
        }

        let mut dirs = unit_directions(dim);
        for _ in 0..sample_count {
            let g: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let n = g.iter().map(|t| t * t).sum::<f64>().sqrt();
            if n > 0.0 {
                dirs.push(g.into_iter().map(|t| t / n).collect());
            }
        }
        let (mut v1, mut v2) = (Tracker::default(), Tracker::default());
        for &r in shells {
            for d in &dirs {
                let x: Vec<f64> = d.iter().map(|t| t * r).collect();
                let v = self.eval(&x);
                let gn = self.grad(&x).iter().map(|t| t * t).sum::<f64>().sqrt();
                let cap = v.max(0.0).powf(self.b);
                v1.observe(if cap > 0.0 { (cap - gn) / cap } else if gn == 0.0 { -1.0 } else { -f64::INFINITY }, &x);
                let floor = r.powf(self.a);
                v2.observe((v - floor) / floor, &x);
            }
        }
        Ok(CertReport { v0: v0.finish(), v1: v1.finish(), v2: v2.finish(), exempt: self.exempt })
    }
}

#[derive(Default)]
struct Tracker {
    worst: Option<(f64, Vec<f64>)>,
    samples: usize,
}

impl Tracker {
    fn observe(&mut self, margin: f64, x: &[f64]) {
        self.samples += 1;
        if self.worst.as_ref().is_none_or(|(m, _)| margin < *m) {
            self.worst = Some((margin, x.to_vec()));
        }
    }

    fn finish(self) -> AssumptionCheck {
        let (worst_margin, witness) = self.worst.unwrap_or((f64::INFINITY, vec![]));
        AssumptionCheck { passed: worst_margin >= -MARGIN_SLACK, worst_margin, witness, samples: self.samples }
    }
}

/// `±e_a` and the main diagonals, normalized.
fn unit_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for a in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[a] = s;
            out.push(e);
        }
    }
    for mask in 0..(1usize << dim) {
        let n = (dim as f64).sqrt();
        out.push((0..dim).map(|a| if mask >> a & 1 == 1 { -1.0 / n } else { 1.0 / n }).collect());
    }
    out
}

/// Points along each axis and diagonal of the cube, 33 per ray.
fn axis_points(dim: usize, extent: f64) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; dim]];
    for d in unit_directions(dim) {
        let reach = extent / d.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        for k in 1..=32 {
            let s = reach * k as f64 / 32.0;
            out.push(d.iter().map(|t| t * s).collect());
        }
    }
    out
}
