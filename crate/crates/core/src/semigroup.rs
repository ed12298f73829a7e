//! Exact spectral evaluation of the linear flows on a periodic grid.
//!
//! The discrete nonlocal operator `L f = J * f - f` is diagonal in Fourier
//! space with symbol `J-hat(xi) - 1`, so `S(t) = exp(t L)` is applied exactly
//! by one forward and one inverse FFT. The same holds for the heat semigroup
//! with multiplier `exp(-a |xi|^2 t)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kernel::DiscreteKernel;

fn check_time(name: &'static str, dt: f64) -> Result<()> {
    if dt >= 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and >= 0, got {dt}")))
    }
}

fn check_diffusivity(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::param("diffusivity", format!("must be positive, got {a}")))
    }
}

/// Fourier multiplier of `S(dt)`.
pub fn linear_multiplier(kernel: &DiscreteKernel, dt: f64) -> Vec<f64> {
    kernel.symbol().iter().map(|&s| ((s - 1.0) * dt).exp()).collect()
}

/// `S(dt) f`; the time stamp advances by `dt`.
pub fn propagate_linear(kernel: &DiscreteKernel, f: &Field, dt: f64) -> Result<Field> {
    check_time("dt", dt)?;
    if kernel.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    f.ensure_finite("linear propagation input")?;
    if dt == 0.0 {
        return Ok(f.clone());
    }
    let multiplier = linear_multiplier(kernel, dt);
    let values = f.grid().transform().apply_multiplier(f.values(), &multiplier);
    Ok(Field::from_parts(f.grid(), values, f.time() + dt))
}

/// Regular part `W(., t)` of the fundamental solution
/// `U(t) = e^{-t} delta + W(t)`, centred at the origin node.
///
/// Computed as the inverse transform of `exp((J-hat - 1) t) - e^{-t}`, so it
/// solves `W_t = L W + e^{-t} J`, `W(0) = 0` exactly on the grid and carries
/// mass `1 - e^{-t}`.
pub fn w_part(kernel: &DiscreteKernel, t: f64) -> Result<Field> {
    check_time("t", t)?;
    let grid = kernel.grid();
    let decay = (-t).exp();
    let delta_height = 1.0 / grid.cell_volume();
    let spectrum = kernel
        .symbol()
        .iter()
        .map(|&s| (((s - 1.0) * t).exp() - decay) * delta_height)
        .map(|v| rustfft::num_complex::Complex64::new(v, 0.0))
        .collect();
    let wrapped = grid.transform().inverse_real(spectrum);
    Ok(Field::from_parts(grid, grid.unwrap_origin(&wrapped), t))
}

/// Gaussian `(4 pi a t)^{-N/2} exp(-|x|^2 / (4 a t))` sampled on the grid.
pub fn heat_kernel(diffusivity: f64, t: f64, grid: &Grid) -> Result<Field> {
    check_diffusivity(diffusivity)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::param("t", format!("heat kernel needs t > 0, got {t}")));
    }
    let spread = 4.0 * diffusivity * t;
    let height = (PI * spread).powf(-(grid.dimension() as f64) / 2.0);
    Ok(Field::from_fn(grid, t, |p| height * (-(p[0] * p[0] + p[1] * p[1]) / spread).exp()))
}

/// Heat semigroup with diffusivity `a` over `dt`, applied spectrally.
pub fn heat_semigroup(f: &Field, diffusivity: f64, dt: f64) -> Result<Field> {
    check_diffusivity(diffusivity)?;
    check_time("dt", dt)?;
    f.ensure_finite("heat semigroup input")?;
    if dt == 0.0 {
        return Ok(f.clone());
    }
    let multiplier: Vec<f64> = f
        .grid()
        .frequency_sq()
        .iter()
        .map(|&k2| (-diffusivity * k2 * dt).exp())
        .collect();
    let values = f.grid().transform().apply_multiplier(f.values(), &multiplier);
    Ok(Field::from_parts(f.grid(), values, f.time() + dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::convolve;
    use crate::kernel::{Kernel, KernelShape};

    fn bump_on(l: f64, n: usize) -> DiscreteKernel {
        let g = Grid::new(1, l, n).unwrap();
        Kernel::new(KernelShape::Bump, 1.0, 1).unwrap().discretize(&g).unwrap()
    }

    #[test]
    fn constants_are_invariant() {
        let k = bump_on(32.0, 512);
        let one = Field::constant(k.grid(), 1.0, 0.0);
        for t in [0.1, 1.0, 25.0] {
            let s = propagate_linear(&k, &one, t).unwrap();
            assert!(s.values().iter().all(|v| (v - 1.0).abs() < 1e-13));
            assert_eq!(s.time(), t);
            let h = heat_semigroup(&one, 0.3, t).unwrap();
            assert!(h.values().iter().all(|v| (v - 1.0).abs() < 1e-13));
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let k = bump_on(32.0, 512);
        let f = Field::from_fn(k.grid(), 1.5, |p| (p[0] / 3.0).sin());
        assert_eq!(propagate_linear(&k, &f, 0.0).unwrap(), f);
        assert_eq!(heat_semigroup(&f, 0.2, 0.0).unwrap(), f);
        assert!(propagate_linear(&k, &f, -1.0).is_err());
    }

    #[test]
    fn semigroup_law() {
        let k = bump_on(32.0, 512);
        let f = Field::from_fn(k.grid(), 0.0, |p| (-p[0] * p[0]).exp() + 0.1 * (p[0] / 5.0).cos());
        let ts = propagate_linear(&k, &propagate_linear(&k, &f, 0.7).unwrap(), 2.3).unwrap();
        let direct = propagate_linear(&k, &f, 3.0).unwrap();
        for (a, b) in ts.values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn w_at_time_zero_vanishes() {
        let k = bump_on(32.0, 512);
        let w = w_part(&k, 0.0).unwrap();
        assert!(w.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn w_mass_and_sign() {
        let k = bump_on(64.0, 2048);
        for t in [0.5, 1.0, 5.0] {
            let w = w_part(&k, t).unwrap();
            assert!((w.integral() - (1.0 - (-t).exp())).abs() < 1e-10);
            assert!(w.min() >= -1e-10);
        }
    }

    #[test]
    fn w_solves_its_forced_equation() {
        // W(t + dt) = S(dt) W(t) + int_0^dt S(dt - s) e^{-(t+s)} J ds;
        // check the derivative by central differences against L W + e^{-t} J
        let k = bump_on(32.0, 512);
        let (t, dt) = (2.0, 1e-4);
        let w = w_part(&k, t).unwrap();
        let wp = w_part(&k, t + dt).unwrap();
        let wm = w_part(&k, t - dt).unwrap();
        let jw = convolve(&k, &w).unwrap();
        let grid = k.grid();
        let j = grid.unwrap_origin(k.values());
        #[allow(clippy::needless_range_loop)]
        for i in 0..grid.len() {
            let lhs = (wp.values()[i] - wm.values()[i]) / (2.0 * dt);
            let rhs = jw.values()[i] - w.values()[i] + (-t).exp() * j[i];
            assert!((lhs - rhs).abs() < 1e-7, "node {i}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn heat_kernel_normalisation_and_moment() {
        let g = Grid::new(1, 64.0, 4096).unwrap();
        let a = 1.0 / 6.0;
        let t = 12.0;
        let gk = heat_kernel(a, t, &g).unwrap();
        assert!((gk.integral() - 1.0).abs() < 1e-8);
        let m2: f64 = (0..g.len()).map(|i| gk.values()[i] * g.radius(i).powi(2)).sum::<f64>() * g.spacing();
        assert!((m2 / (2.0 * a * t) - 1.0).abs() < 1e-6);
        assert!(heat_kernel(a, 0.0, &g).is_err());
        assert!(heat_kernel(-1.0, 1.0, &g).is_err());
    }

    #[test]
    fn heat_kernel_chapman_kolmogorov() {
        let g = Grid::new(1, 64.0, 4096).unwrap();
        let a = 0.25;
        let g1 = heat_kernel(a, 2.0, &g).unwrap();
        let evolved = heat_semigroup(&g1, a, 3.0).unwrap();
        let g5 = heat_kernel(a, 5.0, &g).unwrap();
        for (x, y) in evolved.values().iter().zip(g5.values()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn two_dimensional_mass() {
        let g = Grid::new(2, 16.0, 128).unwrap();
        let k = Kernel::new(KernelShape::Bump, 1.0, 2).unwrap().discretize(&g).unwrap();
        let w = w_part(&k, 3.0).unwrap();
        assert!((w.integral() - (1.0 - (-3f64).exp())).abs() < 1e-10);
        assert!(w.min() >= -1e-10);
        let gk = heat_kernel(k.diffusivity(), 20.0, &g).unwrap();
        assert!((gk.integral() - 1.0).abs() < 1e-8);
    }
}
