//! Convolution kernels `J`: radially symmetric, nonnegative, unit mass and
//! supported in the ball of radius `R`.
//!
//! A [`Kernel`] is the continuum object (exact moments, closed-form or
//! quadrature). A [`DiscreteKernel`] is its restriction to a periodic
//! [`Grid`]: nodal samples renormalised to unit discrete mass, together with
//! the discrete Fourier symbol and discrete second moment.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quadrature;

/// Radial profile family; every shape is rescaled to the support radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelShape {
    /// `exp(-1 / (1 - |x/R|^2))` on `|x| < R`, smooth with compact support.
    Bump,
    /// Indicator of the open ball `|x| < R` (half value on the sphere).
    Uniform,
    /// `(1 - |x/R|^2)_+`.
    Quadratic,
}

impl KernelShape {
    /// Unnormalised profile as a function of `s = |x| / R`.
    pub fn profile(self, s: f64) -> f64 {
        match self {
            KernelShape::Bump => {
                if s < 1.0 {
                    (-1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }
            KernelShape::Uniform => {
                if (s - 1.0).abs() <= 1e-12 {
                    0.5
                } else if s < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelShape::Quadratic => (1.0 - s * s).max(0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelShape::Bump => "bump",
            KernelShape::Uniform => "uniform",
            KernelShape::Quadratic => "quadratic",
        }
    }
}

impl fmt::Display for KernelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bump" => Ok(KernelShape::Bump),
            "uniform" => Ok(KernelShape::Uniform),
            "quadratic" => Ok(KernelShape::Quadratic),
            other => Err(Error::UnknownShape(other.to_string())),
        }
    }
}

impl TryFrom<String> for KernelShape {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelShape> for String {
    fn from(shape: KernelShape) -> String {
        shape.name().to_string()
    }
}

/// Serialisable kernel description as it appears in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub shape: KernelShape,
    pub radius: f64,
    pub dimension: usize,
}

/// Measure of the unit sphere `S^{N-1}` for N = 1, 2.
pub(crate) fn sphere_measure(dimension: usize) -> f64 {
    match dimension {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => unreachable!("dimension validated at construction"),
    }
}

pub(crate) fn check_dimension(dimension: usize) -> Result<()> {
    if dimension == 1 || dimension == 2 {
        Ok(())
    } else {
        Err(Error::param("dimension", format!("must be 1 or 2, got {dimension}")))
    }
}

/// Continuum kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    shape: KernelShape,
    dimension: usize,
    radius: f64,
    normalization: f64,
    diffusivity: f64,
}

impl Kernel {
    pub fn new(shape: KernelShape, radius: f64, dimension: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("radius", format!("must be positive, got {radius}")));
        }
        check_dimension(dimension)?;
        let mass = radial_moment(shape, dimension, 0)?;
        let second = radial_moment(shape, dimension, 2)?;
        let n = dimension as f64;
        Ok(Kernel {
            shape,
            dimension,
            radius,
            normalization: radius.powi(dimension as i32) * mass,
            diffusivity: radius * radius * second / (2.0 * n * mass),
        })
    }

    /// Builds a kernel from a shape name, rejecting unknown shapes.
    pub fn parse(shape: &str, radius: f64, dimension: usize) -> Result<Self> {
        Kernel::new(shape.parse()?, radius, dimension)
    }

    pub fn from_spec(spec: &KernelSpec) -> Result<Self> {
        Kernel::new(spec.shape, spec.radius, spec.dimension)
    }

    pub fn spec(&self) -> KernelSpec {
        KernelSpec {
            shape: self.shape,
            radius: self.radius,
            dimension: self.dimension,
        }
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Constant `c` such that `J(x) = profile(|x| / R) / c`.
    pub fn normalization_constant(&self) -> f64 {
        self.normalization
    }

    /// `a = (1 / 2N) * integral of J(z) |z|^2 dz`.
    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    /// `J` as a function of `|x|`.
    pub fn radial_value(&self, r: f64) -> f64 {
        self.shape.profile(r.abs() / self.radius) / self.normalization
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        self.radial_value(r)
    }

    /// Samples the kernel on `grid` (see [`DiscreteKernel`]).
    pub fn discretize(&self, grid: &Grid) -> Result<DiscreteKernel> {
        DiscreteKernel::new(*self, grid)
    }

    /// Discrete Fourier symbol on the frequencies of `grid`.
    pub fn symbol(&self, grid: &Grid) -> Result<Vec<f64>> {
        Ok(self.discretize(grid)?.symbol)
    }
}

/// `sigma_{N-1} * integral_0^1 profile(s) s^{N-1+k} ds`.
fn radial_moment(shape: KernelShape, dimension: usize, k: i32) -> Result<f64> {
    let sigma = sphere_measure(dimension);
    let power = dimension as i32 - 1 + k;
    let d = f64::from(power);
    let value = match shape {
        KernelShape::Uniform => sigma / (d + 1.0),
        KernelShape::Quadratic => sigma * 2.0 / ((d + 1.0) * (d + 3.0)),
        KernelShape::Bump => {
            let integral = quadrature::integrate(
                |s| KernelShape::Bump.profile(s) * s.powi(power),
                0.0,
                1.0,
                1e-16,
                1e-14,
            )?;
            sigma * integral.value
        }
    };
    Ok(value)
}

/// Kernel sampled at the nodes of a periodic grid.
///
/// Values are stored in wrapped (FFT) order: entry `i` is `J` at the
/// periodic displacement of node `i` from the origin. They are rescaled so
/// that `sum J_i h^N = 1` exactly, which makes the discrete linear flow
/// conserve mass to round-off.
#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    kernel: Kernel,
    grid: Grid,
    values: Vec<f64>,
    symbol: Vec<f64>,
    raw_mass: f64,
    diffusivity: f64,
}

impl DiscreteKernel {
    fn new(kernel: Kernel, grid: &Grid) -> Result<Self> {
        if grid.dimension() != kernel.dimension {
            return Err(Error::param(
                "dimension",
                format!("kernel is {}-d but grid is {}-d", kernel.dimension, grid.dimension()),
            ));
        }
        let h = grid.spacing();
        if h > kernel.radius / 4.0 * (1.0 + 1e-12) {
            return Err(Error::UnresolvedKernel {
                spacing: h,
                radius: kernel.radius,
            });
        }
        if kernel.radius > grid.half_length() / 2.0 {
            return Err(Error::KernelExceedsDomain {
                radius: kernel.radius,
                half_length: grid.half_length(),
            });
        }

        let cell = grid.cell_volume();
        let mut values: Vec<f64> = (0..grid.len())
            .map(|i| {
                let d = grid.displacement(i);
                kernel.radial_value(d[0].hypot(d[1]))
            })
            .collect();
        let raw_mass: f64 = values.iter().sum::<f64>() * cell;
        let scale = 1.0 / raw_mass;
        values.iter_mut().for_each(|v| *v *= scale);

        let weighted: Vec<f64> = values.iter().map(|v| v * cell).collect();
        let symbol = grid
            .transform()
            .forward(&weighted)
            .into_iter()
            .map(|c| c.re)
            .collect();

        let n = kernel.dimension as f64;
        let diffusivity = (0..grid.len())
            .map(|i| {
                let d = grid.displacement(i);
                weighted[i] * (d[0] * d[0] + d[1] * d[1])
            })
            .sum::<f64>()
            / (2.0 * n);

        Ok(DiscreteKernel {
            kernel,
            grid: grid.clone(),
            values,
            symbol,
            raw_mass,
            diffusivity,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Renormalised nodal values in wrapped order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `J-hat(xi)` on the grid frequencies, in FFT order; `J-hat(0) = 1`.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// Discrete mass `sum J h^N` of the continuum-normalised samples, before
    /// renormalisation.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    /// Second-moment diffusivity of the sampled kernel. Agrees with
    /// [`Kernel::diffusivity`] to quadrature accuracy for smooth shapes and is
    /// the constant that matches the discrete symbol exactly.
    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    /// Recovers the diffusivity from the symbol alone: least-squares fit of
    /// `(1 - J-hat(xi)) / |xi|^2 = a - b |xi|^2` over `0 < |xi| <= xi_max`.
    pub fn symbol_diffusivity(&self, xi_max: f64) -> Result<f64> {
        let freq = self.grid.frequency_sq();
        let (mut sx, mut sy, mut sxx, mut sxy, mut count) = (0.0, 0.0, 0.0, 0.0, 0usize);
        for (&k2, &s) in freq.iter().zip(&self.symbol) {
            if k2 > 0.0 && k2 <= xi_max * xi_max {
                let y = (1.0 - s) / k2;
                sx += k2;
                sy += y;
                sxx += k2 * k2;
                sxy += k2 * y;
                count += 1;
            }
        }
        if count < 2 {
            return Err(Error::param(
                "xi_max",
                format!("only {count} frequencies in (0, {xi_max}]; enlarge the domain"),
            ));
        }
        let c = count as f64;
        let denom = c * sxx - sx * sx;
        if denom.abs() < f64::EPSILON * c * sxx {
            // every frequency has the same modulus
            return Ok(sy / c);
        }
        let slope = (c * sxy - sx * sy) / denom;
        Ok((sy - slope * sx) / c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_1d_is_one_half() {
        let k = Kernel::new(KernelShape::Uniform, 1.0, 1).unwrap();
        assert!((k.radial_value(0.3) - 0.5).abs() < 1e-15);
        assert!((k.radial_value(-0.99) - 0.5).abs() < 1e-15);
        assert_eq!(k.radial_value(1.5), 0.0);
        assert!((k.diffusivity() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn bump_peaks_at_origin_and_vanishes_on_sphere() {
        let k = Kernel::new(KernelShape::Bump, 1.0, 1).unwrap();
        assert_eq!(k.radial_value(1.0), 0.0);
        let peak = k.radial_value(0.0);
        for i in 1..100 {
            assert!(k.radial_value(i as f64 / 100.0) < peak);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            Kernel::new(KernelShape::Bump, 0.0, 1),
            Err(Error::InvalidParameter { name: "radius", .. })
        ));
        assert!(Kernel::new(KernelShape::Bump, -1.0, 1).is_err());
        assert!(Kernel::new(KernelShape::Bump, 1.0, 3).is_err());
        let err = Kernel::parse("triangle", 1.0, 1).unwrap_err();
        assert_eq!(err, Error::UnknownShape("triangle".into()));
        assert!(err.to_string().contains("triangle"));
    }

    #[test]
    fn closed_form_diffusivities() {
        for n in 1..=2usize {
            let nf = n as f64;
            let u = Kernel::new(KernelShape::Uniform, 2.0, n).unwrap();
            assert!((u.diffusivity() - 4.0 / (2.0 * (nf + 2.0))).abs() < 1e-14);
            let q = Kernel::new(KernelShape::Quadratic, 2.0, n).unwrap();
            assert!((q.diffusivity() - 4.0 / (2.0 * (nf + 4.0))).abs() < 1e-14);
        }
    }

    #[test]
    fn diffusivity_scales_quadratically() {
        for shape in [KernelShape::Bump, KernelShape::Uniform, KernelShape::Quadratic] {
            for n in 1..=2 {
                let a1 = Kernel::new(shape, 1.0, n).unwrap().diffusivity();
                let a3 = Kernel::new(shape, 3.0, n).unwrap().diffusivity();
                assert!((a3 / a1 - 9.0).abs() < 1e-12, "{shape} N={n}");
            }
        }
    }

    #[test]
    fn spec_roundtrip_through_json_like_strings() {
        let shape: KernelShape = "quadratic".parse().unwrap();
        assert_eq!(String::from(shape), "quadratic");
    }

    #[test]
    fn unresolved_and_oversized_kernels_are_rejected() {
        let grid = Grid::new(1, 8.0, 16).unwrap(); // h = 1
        let k = Kernel::new(KernelShape::Bump, 2.0, 1).unwrap();
        assert!(matches!(k.discretize(&grid), Err(Error::UnresolvedKernel { .. })));
        let fine = Grid::new(1, 8.0, 256).unwrap();
        let big = Kernel::new(KernelShape::Bump, 5.0, 1).unwrap();
        assert!(matches!(big.discretize(&fine), Err(Error::KernelExceedsDomain { .. })));
    }

    #[test]
    fn discrete_kernel_has_unit_mass_and_symbol_at_zero() {
        let grid = Grid::new(2, 4.0, 64).unwrap();
        let k = Kernel::new(KernelShape::Bump, 1.0, 2).unwrap().discretize(&grid).unwrap();
        let mass: f64 = k.values().iter().sum::<f64>() * grid.cell_volume();
        assert!((mass - 1.0).abs() < 1e-14);
        assert!((k.symbol()[0] - 1.0).abs() < 1e-14);
        assert!(k.values().iter().all(|&v| v >= 0.0));
    }
}
