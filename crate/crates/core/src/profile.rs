//! Self-similar heat profile of the singular datum `A |x|^{-alpha}` and the
//! constant of the logarithmic case `alpha = N`.
//!
//! For `0 < alpha < N` the heat flow with diffusivity `a` started from
//! `A |x|^{-alpha}` is `U(x, t) = t^{-alpha/2} f(x / sqrt(t))` with
//! `f(eta) = A * integral of G_a(eta - z, 1) |z|^{-alpha} dz`.
//! The integral is split at a small ball around the singularity: inside it
//! the Gaussian is replaced by its value plus curvature at `eta` and the
//! radial power is integrated in closed form; outside, adaptive quadrature.
//! The split radius is halved until the result settles.

use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kernel::{check_dimension, sphere_measure};
use crate::quadrature;

/// `exp(-42)` is below 1e-18: the Gaussian is cut where `|y|^2 > 42 * 4at`.
const GAUSSIAN_CUTOFF: f64 = 42.0;
const SPLIT_TOLERANCE: f64 = 1e-10;
const MAX_SPLIT_HALVINGS: usize = 40;

/// Heat evolution of `A |x|^{-alpha}` in dimension `N`, evaluated pointwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDatumFlow {
    alpha: f64,
    amplitude: f64,
    diffusivity: f64,
    dimension: usize,
}

impl PowerDatumFlow {
    pub fn new(alpha: f64, amplitude: f64, diffusivity: f64, dimension: usize) -> Result<Self> {
        check_dimension(dimension)?;
        for (name, v) in [("alpha", alpha), ("amplitude", amplitude), ("diffusivity", diffusivity)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if alpha >= dimension as f64 {
            return Err(Error::LogCaseRequired { alpha, dimension });
        }
        Ok(PowerDatumFlow {
            alpha,
            amplitude,
            diffusivity,
            dimension,
        })
    }

    /// Value at distance `r` from the origin and time `t > 0`.
    pub fn value(&self, r: f64, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::param("t", format!("must be positive, got {t}")));
        }
        let r = r.abs();
        let spread = 4.0 * self.diffusivity * t;
        let mut rho = 0.1 * (self.diffusivity * t).sqrt().min(1.0);
        let mut previous = self.split_evaluation(r, spread, rho)?;
        for _ in 0..MAX_SPLIT_HALVINGS {
            rho /= 2.0;
            let next = self.split_evaluation(r, spread, rho)?;
            if (next - previous).abs() <= SPLIT_TOLERANCE * next.abs().max(f64::MIN_POSITIVE) {
                return Ok(self.amplitude * next);
            }
            previous = next;
        }
        Err(Error::Quadrature(format!(
            "singular split did not settle at r = {r}, t = {t}"
        )))
    }

    fn split_evaluation(&self, r: f64, spread: f64, rho: f64) -> Result<f64> {
        let n = self.dimension as f64;
        let alpha = self.alpha;
        let gauss = (PI * spread).powf(-n / 2.0) * (-r * r / spread).exp();
        let laplacian = gauss * (4.0 * r * r / (spread * spread) - 2.0 * n / spread);
        let sigma = sphere_measure(self.dimension);
        let inner = gauss * sigma * rho.powf(n - alpha) / (n - alpha)
            + laplacian / (2.0 * n) * sigma * rho.powf(n + 2.0 - alpha) / (n + 2.0 - alpha);
        let outer = match self.dimension {
            1 => self.outer_1d(r, spread, rho)?,
            _ => self.outer_2d(r, spread, rho)?,
        };
        Ok(inner + outer)
    }

    fn outer_1d(&self, r: f64, spread: f64, rho: f64) -> Result<f64> {
        let alpha = self.alpha;
        let height = (PI * spread).powf(-0.5);
        let reach = (GAUSSIAN_CUTOFF * spread).sqrt();
        let integrand = |z: f64| z.abs().powf(-alpha) * height * (-(r - z) * (r - z) / spread).exp();
        let mut total = 0.0;
        // z >= rho
        let (lo, hi) = (rho.max(r - reach), r + reach);
        if hi > lo {
            total += quadrature::integrate(integrand, lo, hi, 1e-15, 1e-13)?.value;
        }
        // z <= -rho
        let (lo, hi) = (r - reach, -rho);
        if hi > lo {
            total += quadrature::integrate(integrand, lo, hi, 1e-15, 1e-13)?.value;
        }
        Ok(total)
    }

    fn outer_2d(&self, r: f64, spread: f64, rho: f64) -> Result<f64> {
        let alpha = self.alpha;
        let height = 1.0 / (PI * spread);
        let reach = (GAUSSIAN_CUTOFF * spread).sqrt();
        let integrand = |s: f64| {
            // integral over the circle |z| = s of G(x - z), scaled by exp(-(r-s)^2/spread)
            let kappa = 2.0 * r * s / spread;
            s.powf(1.0 - alpha) * height * (-(r - s) * (r - s) / spread).exp() * angular_average(kappa)
        };
        let (lo, hi) = (rho.max(r - reach), r + reach);
        if hi <= lo {
            return Ok(0.0);
        }
        Ok(quadrature::integrate(integrand, lo, hi, 1e-15, 1e-13)?.value)
    }
}

/// `integral_0^{2 pi} exp(-kappa (1 - cos theta)) d theta`, i.e.
/// `2 pi e^{-kappa} I_0(kappa)`, by the periodic trapezoid rule (spectrally
/// accurate once the node count exceeds ~ sqrt(74 kappa)).
fn angular_average(kappa: f64) -> f64 {
    if kappa == 0.0 {
        return 2.0 * PI;
    }
    let m = 32 + (10.0 * kappa.sqrt()).ceil() as usize;
    let step = 2.0 * PI / m as f64;
    (0..m)
        .map(|k| (-kappa * (1.0 - (k as f64 * step).cos())).exp())
        .sum::<f64>()
        * step
}

/// Sampled profile `f` with `U_{alpha,A}(x, t) = t^{-alpha/2} f(|x| / sqrt(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfSimilarProfile {
    flow: PowerDatumFlow,
    eta_max: f64,
    samples: Vec<f64>,
}

impl SelfSimilarProfile {
    /// Samples `f` at `n_eta` equispaced radii on `[0, eta_max]`.
    pub fn new(
        alpha: f64,
        amplitude: f64,
        diffusivity: f64,
        dimension: usize,
        eta_max: f64,
        n_eta: usize,
    ) -> Result<Self> {
        let flow = PowerDatumFlow::new(alpha, amplitude, diffusivity, dimension)?;
        if !(eta_max > 0.0 && eta_max.is_finite()) {
            return Err(Error::param("eta_max", format!("must be positive, got {eta_max}")));
        }
        if n_eta < 4 {
            return Err(Error::param("n_eta", format!("need at least 4 samples, got {n_eta}")));
        }
        let step = eta_max / (n_eta - 1) as f64;
        let samples = (0..n_eta)
            .into_par_iter()
            .map(|k| flow.value(k as f64 * step, 1.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(SelfSimilarProfile {
            flow,
            eta_max,
            samples,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.flow.alpha
    }

    pub fn amplitude(&self) -> f64 {
        self.flow.amplitude
    }

    pub fn diffusivity(&self) -> f64 {
        self.flow.diffusivity
    }

    pub fn dimension(&self) -> usize {
        self.flow.dimension
    }

    pub fn eta_max(&self) -> f64 {
        self.eta_max
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn flow(&self) -> &PowerDatumFlow {
        &self.flow
    }

    fn step(&self) -> f64 {
        self.eta_max / (self.samples.len() - 1) as f64
    }

    /// `f(eta)`: Catmull-Rom interpolation of the samples (using evenness at
    /// the origin); direct quadrature beyond `eta_max`.
    pub fn value(&self, eta: f64) -> f64 {
        let eta = eta.abs();
        let last = self.samples.len() - 1;
        if eta > self.eta_max {
            return self.flow.value(eta, 1.0).unwrap_or(f64::NAN);
        }
        let pos = eta / self.step();
        let i = (pos.floor() as usize).min(last - 1);
        let s = pos - i as f64;
        let at = |k: isize| -> f64 {
            let k = k.unsigned_abs().min(last);
            self.samples[k]
        };
        let i = i as isize;
        let (p0, p1, p2) = (at(i - 1), at(i), at(i + 1));
        // at the far end the ghost node comes from quadratic extrapolation
        let p3 = if i + 2 <= last as isize { at(i + 2) } else { 3.0 * p2 - 3.0 * p1 + p0 };
        0.5 * (2.0 * p1
            + (-p0 + p2) * s
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s * s
            + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * s * s * s)
    }

    /// `U_{alpha,A}` at distance `r` and time `t > 0`.
    pub fn evaluate(&self, r: f64, t: f64) -> f64 {
        t.powf(-self.flow.alpha / 2.0) * self.value(r / t.sqrt())
    }

    pub fn to_field(&self, grid: &Grid, t: f64) -> Result<Field> {
        if grid.dimension() != self.flow.dimension {
            return Err(Error::GridMismatch);
        }
        Field::new(grid, (0..grid.len()).map(|i| self.evaluate(grid.radius(i), t)).collect(), t)
    }

    /// `|f(eta_max) eta_max^alpha - A| / A`.
    pub fn tail_deviation(&self) -> f64 {
        let last = *self.samples.last().expect("at least 4 samples");
        (last * self.eta_max.powf(self.flow.alpha) - self.flow.amplitude).abs() / self.flow.amplitude
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "# alpha={},A={},diffusivity={},N={}",
            self.flow.alpha, self.flow.amplitude, self.flow.diffusivity, self.flow.dimension
        )?;
        writeln!(out, "eta,f")?;
        let step = self.step();
        for (k, v) in self.samples.iter().enumerate() {
            writeln!(out, "{:.10e},{:.16e}", k as f64 * step, v)?;
        }
        Ok(())
    }
}

/// `C_{A,N}` in `u(x, t) / log t ~ C_{A,N} U_a(x, t)` for tails `A |x|^{-N}`.
///
/// Closed form `A sigma_{N-1} / 2`: the mass of `A |y|^{-N}` over
/// `1 <= |y| <= sqrt(t)` is `(A sigma_{N-1} / 2) log t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogCaseConstant {
    value: f64,
}

impl LogCaseConstant {
    pub fn new(amplitude: f64, dimension: usize) -> Result<Self> {
        check_dimension(dimension)?;
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::param("amplitude", format!("must be positive, got {amplitude}")));
        }
        Ok(LogCaseConstant {
            value: amplitude * sphere_measure(dimension) / 2.0,
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_log_case_and_bad_parameters() {
        assert!(matches!(
            SelfSimilarProfile::new(1.0, 1.0, 0.2, 1, 3.0, 16),
            Err(Error::LogCaseRequired { .. })
        ));
        assert!(matches!(
            SelfSimilarProfile::new(2.0, 1.0, 0.2, 2, 3.0, 16),
            Err(Error::LogCaseRequired { .. })
        ));
        assert!(SelfSimilarProfile::new(0.5, -1.0, 0.2, 1, 3.0, 16).is_err());
        assert!(SelfSimilarProfile::new(0.5, 1.0, 0.2, 1, 3.0, 2).is_err());
    }

    #[test]
    fn angular_average_matches_series() {
        // 2 pi e^{-k} I_0(k) with I_0 from its power series
        for kappa in [0.0f64, 0.3, 2.0, 15.0, 80.0] {
            let mut term = 1.0;
            let mut sum = 1.0;
            for m in 1..400 {
                term *= (kappa / 2.0).powi(2) / (m as f64).powi(2);
                sum += term;
            }
            let exact = 2.0 * PI * (-kappa).exp() * sum;
            assert!((angular_average(kappa) - exact).abs() < 1e-13 * exact.max(1e-300), "kappa={kappa}");
        }
    }

    #[test]
    fn profile_is_positive_and_nonincreasing() {
        let p = SelfSimilarProfile::new(0.5, 1.0, 1.0 / 6.0, 1, 4.0, 81).unwrap();
        assert!(p.samples().iter().all(|&v| v > 0.0));
        assert!(p.samples().windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn profile_is_linear_in_amplitude() {
        let p1 = SelfSimilarProfile::new(0.5, 1.0, 0.3, 1, 2.0, 9).unwrap();
        let p3 = SelfSimilarProfile::new(0.5, 3.0, 0.3, 1, 2.0, 9).unwrap();
        for (a, b) in p1.samples().iter().zip(p3.samples()) {
            assert!((3.0 * a - b).abs() < 1e-12 * b);
        }
    }

    #[test]
    fn interpolation_reproduces_direct_values() {
        let p = SelfSimilarProfile::new(0.5, 1.0, 0.2, 1, 3.0, 301).unwrap();
        for eta in [0.0137, 0.5, 1.234, 2.999] {
            let direct = p.flow().value(eta, 1.0).unwrap();
            assert!((p.value(eta) - direct).abs() < 1e-8, "eta={eta}");
        }
    }

    #[test]
    fn two_dimensional_profile_tail() {
        let p = SelfSimilarProfile::new(1.0, 1.0, 0.25, 2, 30.0, 7).unwrap();
        assert!(p.samples().iter().all(|&v| v > 0.0));
        assert!(p.tail_deviation() < 0.02, "{}", p.tail_deviation());
    }

    #[test]
    fn log_constant_closed_form() {
        assert_eq!(LogCaseConstant::new(1.0, 1).unwrap().value(), 1.0);
        assert!((LogCaseConstant::new(1.0, 2).unwrap().value() - PI).abs() < 1e-15);
        let a = LogCaseConstant::new(0.7, 2).unwrap().value();
        let b = LogCaseConstant::new(1.4, 2).unwrap().value();
        assert!((b - 2.0 * a).abs() < 1e-15);
        assert!(LogCaseConstant::new(0.0, 1).is_err());
    }
}
