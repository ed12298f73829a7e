//! Uniform periodic grids on `[-L, L)^N`, fields sampled on them, FFT
//! convolution with a [`DiscreteKernel`], and the norms used by the decay
//! estimates.
//!
//! Node `j` along an axis sits at `x_j = -L + j h` with `h = 2L / n`, so the
//! origin is node `n / 2`. In two dimensions values are stored row-major with
//! the first coordinate as the slow index.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{check_dimension, DiscreteKernel};
use crate::spectral::Transform;

struct GridInner {
    dimension: usize,
    half_length: f64,
    points: usize,
    spacing: f64,
    frequency_sq: Vec<f64>,
    transform: Transform,
}

/// Periodic grid; cheap to clone (shared FFT plans and frequency table).
#[derive(Clone)]
pub struct Grid(Arc<GridInner>);

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dimension", &self.0.dimension)
            .field("half_length", &self.0.half_length)
            .field("points_per_axis", &self.0.points)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.dimension == other.0.dimension
                && self.0.points == other.0.points
                && self.0.half_length == other.0.half_length)
    }
}

impl Grid {
    pub fn new(dimension: usize, half_length: f64, points_per_axis: usize) -> Result<Self> {
        check_dimension(dimension)?;
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::param("half_length", format!("must be positive, got {half_length}")));
        }
        if points_per_axis < 16 || !points_per_axis.is_power_of_two() {
            return Err(Error::param(
                "points_per_axis",
                format!("must be a power of two >= 16, got {points_per_axis}"),
            ));
        }
        let n = points_per_axis;
        let axis: Vec<f64> = (0..n).map(|k| axis_frequency(k, n, half_length)).collect();
        let frequency_sq = match dimension {
            1 => axis.iter().map(|k| k * k).collect(),
            _ => (0..n * n)
                .map(|idx| {
                    let (a, b) = (axis[idx / n], axis[idx % n]);
                    a * a + b * b
                })
                .collect(),
        };
        Ok(Grid(Arc::new(GridInner {
            dimension,
            half_length,
            points: n,
            spacing: 2.0 * half_length / n as f64,
            frequency_sq,
            transform: Transform::new(n, dimension),
        })))
    }

    pub fn dimension(&self) -> usize {
        self.0.dimension
    }

    pub fn half_length(&self) -> f64 {
        self.0.half_length
    }

    pub fn points_per_axis(&self) -> usize {
        self.0.points
    }

    pub fn spacing(&self) -> f64 {
        self.0.spacing
    }

    /// `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.0.spacing.powi(self.0.dimension as i32)
    }

    /// Total number of nodes, `n^N`.
    pub fn len(&self) -> usize {
        self.0.points.pow(self.0.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same grid with the domain and node count both doubled (same spacing).
    pub fn doubled(&self) -> Result<Grid> {
        Grid::new(self.0.dimension, 2.0 * self.0.half_length, 2 * self.0.points)
    }

    fn axis_index(&self, idx: usize) -> (usize, usize) {
        match self.0.dimension {
            1 => (idx, 0),
            _ => (idx / self.0.points, idx % self.0.points),
        }
    }

    /// Node coordinates; the second entry is zero on 1-d grids.
    pub fn position(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.axis_index(idx);
        let coord = |k: usize| -self.0.half_length + k as f64 * self.0.spacing;
        match self.0.dimension {
            1 => [coord(i), 0.0],
            _ => [coord(i), coord(j)],
        }
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let p = self.position(idx);
        p[0].hypot(p[1])
    }

    /// Periodic displacement from the origin of wrapped (FFT-order) node
    /// `idx`: `k h` for `k < n/2`, `(k - n) h` otherwise.
    pub fn displacement(&self, idx: usize) -> [f64; 2] {
        let n = self.0.points;
        let (i, j) = self.axis_index(idx);
        let wrap = |k: usize| {
            let k = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
            k * self.0.spacing
        };
        match self.0.dimension {
            1 => [wrap(i), 0.0],
            _ => [wrap(i), wrap(j)],
        }
    }

    /// `|xi|^2` on the discrete frequencies, in FFT order.
    pub fn frequency_sq(&self) -> &[f64] {
        &self.0.frequency_sq
    }

    pub(crate) fn transform(&self) -> &Transform {
        &self.0.transform
    }

    /// Rearranges wrapped (FFT-order) values into node order, i.e. moves the
    /// zero displacement to the node at the origin.
    pub(crate) fn unwrap_origin(&self, wrapped: &[f64]) -> Vec<f64> {
        let n = self.0.points;
        let half = n / 2;
        match self.0.dimension {
            1 => (0..n).map(|j| wrapped[(j + half) % n]).collect(),
            _ => (0..n * n)
                .map(|idx| {
                    let (i, j) = (idx / n, idx % n);
                    wrapped[((i + half) % n) * n + (j + half) % n]
                })
                .collect(),
        }
    }

    /// Errors unless `half_length >= required`.
    pub fn check_budget(&self, required: f64) -> Result<()> {
        if self.0.half_length + 1e-12 < required {
            Err(Error::DomainBudget {
                half_length: self.0.half_length,
                required,
            })
        } else {
            Ok(())
        }
    }
}

fn axis_frequency(k: usize, n: usize, half_length: f64) -> f64 {
    let k = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
    PI * k / half_length
}

/// Domain budget `K sqrt(T) + safety * R * sqrt(T)`: the observation window
/// plus the distance signals travel through the kernel by time `T`.
pub fn domain_budget(kernel_radius: f64, window: f64, t_max: f64, safety: f64) -> f64 {
    let root = t_max.max(0.0).sqrt();
    window * root + safety * kernel_radius * root
}

/// Real function on a grid, stamped with a time.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    time: f64,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::param(
                "values",
                format!("expected {} samples, got {}", grid.len(), values.len()),
            ));
        }
        if !(time >= 0.0 && time.is_finite()) {
            return Err(Error::param("time", format!("must be finite and >= 0, got {time}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "field values".into(),
            });
        }
        Ok(Field {
            grid: grid.clone(),
            values,
            time,
        })
    }

    pub(crate) fn from_parts(grid: &Grid, values: Vec<f64>, time: f64) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field {
            grid: grid.clone(),
            values,
            time,
        }
    }

    pub fn zeros(grid: &Grid, time: f64) -> Self {
        Field::from_parts(grid, vec![0.0; grid.len()], time)
    }

    pub fn constant(grid: &Grid, value: f64, time: f64) -> Self {
        Field::from_parts(grid, vec![value; grid.len()], time)
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &Grid, time: f64, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Field::from_parts(grid, values, time)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_parts(&self.grid, self.values.iter().map(|&v| f(v)).collect(), self.time)
    }

    /// Pointwise `self - other`, keeping the time of `self`.
    pub fn difference(&self, other: &Field) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field::from_parts(&self.grid, values, self.time))
    }

    /// Discrete integral `sum f h^N`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn ensure_finite(&self, context: &str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite {
                context: context.to_string(),
            })
        }
    }

    /// Writes `x,value` (or `x,y,value`) rows preceded by a `#` header line
    /// carrying `t`, `L`, `n` and, when given, the tail parameters.
    pub fn write_csv<W: Write>(&self, mut out: W, tail: Option<(f64, f64)>) -> io::Result<()> {
        let g = &self.grid;
        write!(out, "# t={},L={},n={}", self.time, g.half_length(), g.points_per_axis())?;
        if let Some((alpha, amplitude)) = tail {
            write!(out, ",alpha={alpha},A={amplitude}")?;
        }
        writeln!(out)?;
        if g.dimension() == 1 {
            writeln!(out, "x,value")?;
            for (i, v) in self.values.iter().enumerate() {
                writeln!(out, "{:.10e},{:.16e}", g.position(i)[0], v)?;
            }
        } else {
            writeln!(out, "x,y,value")?;
            for (i, v) in self.values.iter().enumerate() {
                let p = g.position(i);
                writeln!(out, "{:.10e},{:.10e},{:.16e}", p[0], p[1], v)?;
            }
        }
        Ok(())
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.time == other.time && self.values == other.values
    }
}

/// Parabolic observation window `|x| <= K sqrt(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolaWindow {
    k: f64,
}

impl ParabolaWindow {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::param("window", format!("K must be positive, got {k}")));
        }
        Ok(ParabolaWindow { k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn radius(&self, t: f64) -> f64 {
        self.k * t.sqrt()
    }

    /// The window must stay within half of the periodic cell.
    pub fn check(&self, grid: &Grid, t: f64) -> Result<()> {
        let radius = self.radius(t);
        let limit = grid.half_length() / 2.0;
        if radius > limit * (1.0 + 1e-12) {
            Err(Error::WindowTooLarge { radius, limit })
        } else {
            Ok(())
        }
    }

    /// Node indices inside the closed ball of radius `K sqrt(t)`.
    pub fn nodes(&self, grid: &Grid, t: f64) -> Result<Vec<usize>> {
        self.check(grid, t)?;
        let radius = self.radius(t) * (1.0 + 1e-12);
        Ok((0..grid.len()).filter(|&i| grid.radius(i) <= radius).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatumForm {
    /// `A (1 + |x|^2)^{-alpha/2}`.
    RegularizedPower,
    /// Caller-supplied samples on a fixed grid.
    Samples(Field),
    /// Identically zero datum.
    Zero,
}

/// Bounded nonnegative initial datum with tail law `|x|^alpha u_0 -> A`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDatum {
    amplitude: f64,
    alpha: f64,
    bound: f64,
    form: DatumForm,
}

impl InitialDatum {
    pub fn regularized_power(amplitude: f64, alpha: f64) -> Result<Self> {
        check_positive("amplitude", amplitude)?;
        check_positive("alpha", alpha)?;
        Ok(InitialDatum {
            amplitude,
            alpha,
            // max of (1 + r)^a (1 + r^2)^{-a/2} is at r = 1
            bound: amplitude * 2f64.powf(alpha / 2.0),
            form: DatumForm::RegularizedPower,
        })
    }

    /// Datum given by samples; must be nonnegative.
    pub fn from_samples(samples: Field, amplitude: f64, alpha: f64) -> Result<Self> {
        check_positive("amplitude", amplitude)?;
        check_positive("alpha", alpha)?;
        if samples.min() < 0.0 {
            return Err(Error::param("samples", "initial datum must be nonnegative"));
        }
        let grid = samples.grid().clone();
        let bound = samples
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| (1.0 + grid.radius(i)).powf(alpha) * v)
            .fold(0.0, f64::max);
        Ok(InitialDatum {
            amplitude,
            alpha,
            bound,
            form: DatumForm::Samples(samples),
        })
    }

    pub fn zero(alpha: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        Ok(InitialDatum {
            amplitude: 0.0,
            alpha,
            bound: 0.0,
            form: DatumForm::Zero,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `B` with `(1 + |x|)^alpha u_0(x) <= B`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn form(&self) -> &DatumForm {
        &self.form
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.form, DatumForm::Zero)
    }

    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        match &self.form {
            DatumForm::RegularizedPower => {
                let (a, alpha) = (self.amplitude, self.alpha);
                Ok(Field::from_fn(grid, 0.0, |p| {
                    a * (1.0 + p[0] * p[0] + p[1] * p[1]).powf(-alpha / 2.0)
                }))
            }
            DatumForm::Samples(field) => {
                if field.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                Ok(field.clone().with_time(0.0))
            }
            DatumForm::Zero => Ok(Field::zeros(grid, 0.0)),
        }
    }

    /// Checks `alpha <= N` and that `|x|^alpha u_0` is within 2% of `A` on
    /// the outermost decade of dyadic shells.
    pub fn check_tail(&self, grid: &Grid) -> Result<()> {
        if self.alpha > grid.dimension() as f64 {
            return Err(Error::param(
                "alpha",
                format!("tail exponent {} exceeds the dimension {}", self.alpha, grid.dimension()),
            ));
        }
        if self.is_zero() {
            return Ok(());
        }
        let shells = tail_ratio(&self.sample(grid)?, self.alpha)?;
        let deviation = outer_decade_deviation(&shells, self.amplitude);
        if deviation > 0.02 {
            return Err(Error::TailLaw {
                amplitude: self.amplitude,
                deviation,
                allowed: 0.02,
            });
        }
        Ok(())
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

/// Periodic discrete convolution `(J * f)(x_i) = sum_j J(x_i - x_j) f_j h^N`.
pub fn convolve(kernel: &DiscreteKernel, f: &Field) -> Result<Field> {
    if kernel.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    f.ensure_finite("convolution input")?;
    let values = f.grid().transform().apply_multiplier(f.values(), kernel.symbol());
    Ok(Field::from_parts(f.grid(), values, f.time()))
}

/// `max |f|` over the grid, or over `|x| <= K sqrt(t)` when a window is given.
pub fn sup_norm(f: &Field, window: Option<ParabolaWindow>, t: f64) -> Result<f64> {
    match window {
        None => Ok(f.values().iter().fold(0.0, |m, v| m.max(v.abs()))),
        Some(w) => {
            let nodes = w.nodes(f.grid(), t)?;
            Ok(nodes.iter().fold(0.0, |m, &i| m.max(f.values()[i].abs())))
        }
    }
}

/// `(sum |f|^q h^N)^{1/q}`; `q = inf` is the sup norm.
pub fn lq_norm(f: &Field, q: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::param("q", format!("must be >= 1, got {q}")));
    }
    if q.is_infinite() {
        return sup_norm(f, None, f.time());
    }
    let sum: f64 = if q == 1.0 {
        f.values().iter().map(|v| v.abs()).sum()
    } else if q == 2.0 {
        f.values().iter().map(|v| v * v).sum()
    } else {
        f.values().iter().map(|v| v.abs().powf(q)).sum()
    };
    Ok((sum * f.grid().cell_volume()).powf(1.0 / q))
}

/// Weak-`L^q` quasi-norm `sup_lambda lambda |{|f| > lambda}|^{1/q}` with level
/// sets measured as node counts times `h^N`.
///
/// The distribution function of a grid function is a step function, so the
/// supremum is attained as `lambda` increases to one of the sampled values
/// and is evaluated exactly over all of them.
pub fn weak_lq_seminorm(f: &Field, q: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::param("q", format!("must be >= 1, got {q}")));
    }
    let mut levels: Vec<f64> = f.values().iter().map(|v| v.abs()).filter(|&v| v > 0.0).collect();
    if levels.is_empty() {
        return Ok(0.0);
    }
    levels.sort_unstable_by(|a, b| b.total_cmp(a));
    let cell = f.grid().cell_volume();
    Ok(levels
        .iter()
        .enumerate()
        .map(|(i, &lambda)| lambda * ((i + 1) as f64 * cell).powf(1.0 / q))
        .fold(0.0, f64::max))
}

/// Statistics of `|x|^alpha f(x)` over one dyadic shell `r_inner <= |x| < r_outer`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellStat {
    pub r_inner: f64,
    pub r_outer: f64,
    pub min: f64,
    pub max: f64,
    pub nodes: usize,
}

/// Shell statistics of `|x|^alpha f` over the dyadic shells
/// `[L 2^{-k-1}, L 2^{-k})`, outermost first, down to the grid spacing.
pub fn tail_ratio(f: &Field, alpha: f64) -> Result<Vec<ShellStat>> {
    if !(alpha > 0.0) {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    let grid = f.grid();
    let l = grid.half_length();
    let h = grid.spacing();
    let mut shells = Vec::new();
    let mut outer = l;
    while outer > 2.0 * h {
        shells.push(ShellStat {
            r_inner: outer / 2.0,
            r_outer: outer,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            nodes: 0,
        });
        outer /= 2.0;
    }
    for (i, &v) in f.values().iter().enumerate() {
        let r = grid.radius(i);
        if r >= l || r < outer {
            continue;
        }
        // shell k holds L 2^{-k-1} <= r < L 2^{-k}
        let mut k = ((l / r).log2().floor() as usize).min(shells.len() - 1);
        while k > 0 && r >= shells[k].r_outer {
            k -= 1;
        }
        while k < shells.len() && r < shells[k].r_inner {
            k += 1;
        }
        let Some(shell) = shells.get_mut(k) else { continue };
        let scaled = r.powf(alpha) * v;
        shell.min = shell.min.min(scaled);
        shell.max = shell.max.max(scaled);
        shell.nodes += 1;
    }
    shells.retain(|s| s.nodes > 0);
    Ok(shells)
}

/// Largest relative deviation `|v - A| / A` over the shells whose inner radius
/// lies within a decade of the outermost radius.
pub fn outer_decade_deviation(shells: &[ShellStat], amplitude: f64) -> f64 {
    let Some(first) = shells.first() else {
        return f64::INFINITY;
    };
    let cutoff = first.r_outer / 10.0;
    shells
        .iter()
        .filter(|s| s.r_inner >= cutoff)
        .map(|s| ((s.max - amplitude).abs()).max((s.min - amplitude).abs()) / amplitude)
        .fold(0.0, f64::max)
}
