//! Rescaled error curves of the long-time theorems and log-log rate fits.

use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{domain_budget, lq_norm, sup_norm, Field, Grid, InitialDatum, ParabolaWindow};
use crate::kernel::DiscreteKernel;
use crate::profile::{LogCaseConstant, SelfSimilarProfile};
use crate::semigroup::{heat_kernel, heat_semigroup, propagate_linear, w_part};

/// Safety factor of the domain budget used by the linear curves.
pub const LINEAR_BUDGET_SAFETY: f64 = 2.0;

/// How the raw norm was rescaled: `t^power` times the norm of `u / log t`
/// when `log` is set, over `|x| <= K sqrt(t)` when a window is given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rescaling {
    pub power: f64,
    pub log: bool,
    pub window: Option<f64>,
}

impl Rescaling {
    pub fn plain() -> Self {
        Rescaling {
            power: 0.0,
            log: false,
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    label: String,
    points: Vec<(f64, f64)>,
    rescaling: Rescaling,
}

impl ErrorCurve {
    /// Times strictly increasing and positive; values finite and >= 0.
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, rescaling: Rescaling) -> Result<Self> {
        if points.iter().any(|&(t, v)| !(t > 0.0 && t.is_finite() && v >= 0.0 && v.is_finite())) {
            return Err(Error::param("points", "need positive times and finite nonnegative values"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::param("points", "times must be strictly increasing"));
        }
        Ok(ErrorCurve {
            label: label.into(),
            points,
            rescaling,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn rescaling(&self) -> Rescaling {
        self.rescaling
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    /// Value at time `t` (relative match 1e-9).
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| (p.0 - t).abs() <= 1e-9 * t.abs().max(1.0))
            .map(|p| p.1)
    }

    /// Last value below the first.
    pub fn decreasing_trend(&self) -> bool {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) if self.points.len() > 1 => b.1 < a.1,
            _ => false,
        }
    }

    /// `max / min` of the values; infinite if some value is zero.
    pub fn spread(&self) -> f64 {
        let max = self.points.iter().map(|p| p.1).fold(0.0, f64::max);
        let min = self.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Same curve multiplied by `t^power`.
    pub fn rescaled(&self, power: f64) -> ErrorCurve {
        ErrorCurve {
            label: self.label.clone(),
            points: self.points.iter().map(|&(t, v)| (t, v * t.powf(power))).collect(),
            rescaling: Rescaling {
                power: self.rescaling.power + power,
                ..self.rescaling
            },
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# {}", self.label)?;
        writeln!(out, "t,value")?;
        for (t, v) in &self.points {
            writeln!(out, "{t:.10e},{v:.16e}")?;
        }
        Ok(())
    }
}

/// Least-squares line through `(log t, log value)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub exponent: f64,
    pub log_constant: f64,
    /// Largest absolute deviation of `log value` from the line.
    pub residual: f64,
    pub points_used: usize,
    /// Points dropped because their value was zero.
    pub excluded: usize,
}

/// Ordinary least squares `y = slope x + intercept`; returns
/// `(slope, intercept, max |residual|)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).abs())
        .fold(0.0, f64::max);
    (slope, intercept, residual)
}

/// Fits `value ~ C t^exponent`; needs 4 positive points spanning a decade.
pub fn fit_rate(curve: &ErrorCurve) -> Result<RateFit> {
    let used: Vec<(f64, f64)> = curve.points.iter().copied().filter(|p| p.1 > 0.0).collect();
    let excluded = curve.points.len() - used.len();
    if used.len() < 4 {
        return Err(Error::TooFewPoints(used.len()));
    }
    let (first, last) = (used[0].0, used[used.len() - 1].0);
    if last < 10.0 * first * (1.0 - 1e-12) {
        return Err(Error::param(
            "curve",
            format!("fit range [{first}, {last}] spans less than one decade"),
        ));
    }
    let x: Vec<f64> = used.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let (exponent, log_constant, residual) = fit_line(&x, &y);
    Ok(RateFit {
        exponent,
        log_constant,
        residual,
        points_used: used.len(),
        excluded,
    })
}

/// Conjugate exponent `q' = q / (q - 1)` for `q` in `[1, inf]`.
pub fn conjugate(q: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::param("q", format!("must lie in [1, inf], got {q}")));
    }
    Ok(if q == 1.0 {
        f64::INFINITY
    } else if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    })
}

fn check_times(times: &[f64]) -> Result<f64> {
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::param("times", "need positive finite times"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("times", "times must be strictly increasing"));
    }
    Ok(*times.last().expect("nonempty"))
}

fn linear_budget(kernel: &DiscreteKernel, t_max: f64) -> Result<()> {
    kernel
        .grid()
        .check_budget(domain_budget(kernel.kernel().radius(), 0.0, t_max, LINEAR_BUDGET_SAFETY))
}

/// `t^{alpha/2} |u_L(t) - u_Delta(t)|_inf`: the nonlocal linear flow against
/// the heat flow (diffusivity of the discrete kernel) of the same datum.
pub fn linear_error_curve(kernel: &DiscreteKernel, datum: &InitialDatum, times: &[f64]) -> Result<ErrorCurve> {
    let t_max = check_times(times)?;
    linear_budget(kernel, t_max)?;
    let u0 = datum.sample(kernel.grid())?;
    let alpha = datum.alpha();
    let a = kernel.diffusivity();
    let points = times
        .par_iter()
        .map(|&t| {
            let nonlocal = propagate_linear(kernel, &u0, t)?;
            let heat = heat_semigroup(&u0, a, t)?;
            Ok((t, t.powf(alpha / 2.0) * sup_norm(&nonlocal.difference(&heat)?, None, t)?))
        })
        .collect::<Result<Vec<_>>>()?;
    ErrorCurve::new(
        "linear: t^(alpha/2) |u_L - u_heat|_inf",
        points,
        Rescaling {
            power: alpha / 2.0,
            log: false,
            window: None,
        },
    )
}

/// `t^{alpha/2} sup_{|x| <= K sqrt t} |u - U_{alpha,A}|` over the given
/// snapshots (each carries its own time).
pub fn supercritical_error_curve(
    snapshots: &[&Field],
    profile: &SelfSimilarProfile,
    window: ParabolaWindow,
) -> Result<ErrorCurve> {
    let alpha = profile.alpha();
    let points = snapshots
        .par_iter()
        .map(|field| {
            let grid = field.grid();
            if grid.dimension() != profile.dimension() {
                return Err(Error::GridMismatch);
            }
            let t = field.time();
            let nodes = window.nodes(grid, t)?;
            let worst = nodes
                .iter()
                .map(|&i| (field.values()[i] - profile.evaluate(grid.radius(i), t)).abs())
                .fold(0.0, f64::max);
            Ok((t, t.powf(alpha / 2.0) * worst))
        })
        .collect::<Result<Vec<_>>>()?;
    ErrorCurve::new(
        format!("supercritical: t^(alpha/2) |u - U|_inf on |x| <= {} sqrt(t)", window.k()),
        points,
        Rescaling {
            power: alpha / 2.0,
            log: false,
            window: Some(window.k()),
        },
    )
}

/// `t^{N/2} sup_{|x| <= K sqrt t} |u / log t - C U_a|` over snapshots with
/// `t >= e^2`.
pub fn log_error_curve(
    snapshots: &[&Field],
    constant: LogCaseConstant,
    diffusivity: f64,
    window: ParabolaWindow,
) -> Result<ErrorCurve> {
    if !(diffusivity > 0.0 && diffusivity.is_finite()) {
        return Err(Error::param("diffusivity", format!("must be positive, got {diffusivity}")));
    }
    let points = snapshots
        .par_iter()
        .map(|field| {
            let grid = field.grid();
            let t = field.time();
            if t < (2.0f64).exp() {
                return Err(Error::LogTimeTooSmall { t });
            }
            let n = grid.dimension() as f64;
            let spread = 4.0 * diffusivity * t;
            let height = constant.value() * (PI * spread).powf(-n / 2.0);
            let log_t = t.ln();
            let worst = window
                .nodes(grid, t)?
                .iter()
                .map(|&i| {
                    let r = grid.radius(i);
                    (field.values()[i] / log_t - height * (-r * r / spread).exp()).abs()
                })
                .fold(0.0, f64::max);
            Ok((t, t.powf(n / 2.0) * worst))
        })
        .collect::<Result<Vec<_>>>()?;
    ErrorCurve::new(
        format!("log case: t^(N/2) |u/log t - C U_a|_inf on |x| <= {} sqrt(t)", window.k()),
        points,
        Rescaling {
            power: f64::NAN,
            log: true,
            window: Some(window.k()),
        },
    )
}

/// Curves `|W(t) - U_a(t)|_{q'}` and `|W(t)|_{q'}` for every `q`, in the
/// order `[W - U (q_1), W (q_1), W - U (q_2), ...]`.
pub fn w_estimate_curves(kernel: &DiscreteKernel, times: &[f64], q_list: &[f64]) -> Result<Vec<ErrorCurve>> {
    let t_max = check_times(times)?;
    linear_budget(kernel, t_max)?;
    let conjugates = q_list.iter().map(|&q| conjugate(q)).collect::<Result<Vec<_>>>()?;
    let a = kernel.diffusivity();
    let grid = kernel.grid();
    // per time: [(|W - U|, |W|) for each q]
    let rows = times
        .par_iter()
        .map(|&t| {
            let w = w_part(kernel, t)?;
            let u = heat_kernel(a, t, grid)?;
            let gap = w.difference(&u)?;
            conjugates
                .iter()
                .map(|&qp| Ok((lq_norm(&gap, qp)?, lq_norm(&w, qp)?)))
                .collect::<Result<Vec<(f64, f64)>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut curves = Vec::with_capacity(2 * q_list.len());
    for (k, (&q, &qp)) in q_list.iter().zip(&conjugates).enumerate() {
        let gap_points = times.iter().zip(&rows).map(|(&t, row)| (t, row[k].0)).collect();
        let w_points = times.iter().zip(&rows).map(|(&t, row)| (t, row[k].1)).collect();
        curves.push(ErrorCurve::new(format!("|W - U|_{{q'}} q={q} q'={qp}"), gap_points, Rescaling::plain())?);
        curves.push(ErrorCurve::new(format!("|W|_{{q'}} q={q} q'={qp}"), w_points, Rescaling::plain())?);
    }
    Ok(curves)
}

/// Numerical estimate of the log-case constant: the slope of
/// `u_heat(0, t) (4 pi a t)^{N/2}` against `log t`, where `u_heat` is the
/// heat flow of `A (1 + |x|^2)^{-N/2}` sampled on `grid`.
pub fn log_constant_fit(amplitude: f64, grid: &Grid, diffusivity: f64, times: &[f64]) -> Result<f64> {
    check_times(times)?;
    if times.len() < 4 {
        return Err(Error::TooFewPoints(times.len()));
    }
    let n = grid.dimension() as f64;
    let datum = InitialDatum::regularized_power(amplitude, n)?.sample(grid)?;
    let origin = (0..grid.len())
        .min_by(|&i, &j| grid.radius(i).total_cmp(&grid.radius(j)))
        .expect("nonempty grid");
    let values = times
        .par_iter()
        .map(|&t| {
            let u = heat_semigroup(&datum, diffusivity, t)?;
            Ok(u.values()[origin] * (4.0 * PI * diffusivity * t).powf(n / 2.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let logs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    Ok(fit_line(&logs, &values).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Kernel, KernelShape};

    fn curve(points: Vec<(f64, f64)>) -> ErrorCurve {
        ErrorCurve::new("synthetic", points, Rescaling::plain()).unwrap()
    }

    fn log_times(from: f64, to: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| (from.ln() + (to.ln() - from.ln()) * k as f64 / (n - 1) as f64).exp())
            .collect()
    }

    #[test]
    fn fit_recovers_exact_power() {
        let c = curve(log_times(1.0, 1e3, 9).into_iter().map(|t| (t, 3.0 * t.powi(-2))).collect());
        let fit = fit_rate(&c).unwrap();
        assert!((fit.exponent + 2.0).abs() < 1e-12);
        assert!((fit.log_constant - 3f64.ln()).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        let flat = fit_rate(&curve(log_times(1.0, 1e2, 5).into_iter().map(|t| (t, 0.7)).collect())).unwrap();
        assert!(flat.exponent.abs() < 1e-12);
    }

    #[test]
    fn fit_tolerates_oscillation() {
        let c = curve(
            log_times(10.0, 1e4, 40)
                .into_iter()
                .map(|t| (t, (1.0 + 0.1 * t.ln().sin()) / t))
                .collect(),
        );
        assert!((fit_rate(&c).unwrap().exponent + 1.0).abs() < 0.05);
    }

    #[test]
    fn fit_rejects_short_curves() {
        let c = curve(vec![(1.0, 1.0), (2.0, 0.0), (5.0, 0.5), (20.0, 0.1), (30.0, 0.2)]);
        assert_eq!(fit_rate(&c).unwrap().excluded, 1);
        let c = curve(vec![(1.0, 1.0), (2.0, 0.0), (5.0, 0.5), (20.0, 0.1)]);
        assert!(matches!(fit_rate(&c), Err(Error::TooFewPoints(3))));
        let c = curve(vec![(1.0, 1.0), (2.0, 0.9), (3.0, 0.5), (5.0, 0.1)]);
        assert!(fit_rate(&c).is_err());
    }

    #[test]
    fn curve_validation() {
        assert!(ErrorCurve::new("x", vec![(1.0, -1.0)], Rescaling::plain()).is_err());
        assert!(ErrorCurve::new("x", vec![(2.0, 1.0), (1.0, 1.0)], Rescaling::plain()).is_err());
        let c = curve(vec![(1.0, 2.0), (10.0, 1.0)]);
        assert!(c.decreasing_trend());
        assert_eq!(c.spread(), 2.0);
        assert_eq!(c.rescaled(1.0).values(), vec![2.0, 10.0]);
        assert_eq!(c.value_at(10.0), Some(1.0));
    }

    #[test]
    fn conjugates() {
        assert_eq!(conjugate(1.0).unwrap(), f64::INFINITY);
        assert_eq!(conjugate(f64::INFINITY).unwrap(), 1.0);
        for q in [1.5, 2.0, 4.0] {
            let qp = conjugate(q).unwrap();
            assert!((1.0 / q + 1.0 / qp - 1.0).abs() < 1e-15);
        }
        assert!(conjugate(0.5).is_err());
    }

    fn bump(l: f64, n: usize) -> DiscreteKernel {
        let grid = Grid::new(1, l, n).unwrap();
        Kernel::new(KernelShape::Bump, 1.0, 1).unwrap().discretize(&grid).unwrap()
    }

    #[test]
    fn zero_datum_gives_zero_linear_curve() {
        let k = bump(64.0, 1024);
        let c = linear_error_curve(&k, &InitialDatum::zero(0.5).unwrap(), &[1.0, 10.0, 100.0]).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_curve_checks_budget() {
        let k = bump(16.0, 256);
        let datum = InitialDatum::regularized_power(1.0, 0.5).unwrap();
        assert!(matches!(linear_error_curve(&k, &datum, &[1.0, 1e3]), Err(Error::DomainBudget { .. })));
    }

    #[test]
    fn profile_against_itself_is_zero_and_window_monotone() {
        let grid = Grid::new(1, 64.0, 1024).unwrap();
        let profile = SelfSimilarProfile::new(0.5, 1.0, 0.2, 1, 4.0, 201).unwrap();
        let fields: Vec<Field> = [1.0, 4.0].iter().map(|&t| profile.to_field(&grid, t).unwrap()).collect();
        let refs: Vec<&Field> = fields.iter().collect();
        let c = supercritical_error_curve(&refs, &profile, ParabolaWindow::new(3.0).unwrap()).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));

        let shifted: Vec<Field> = fields.iter().map(|f| f.map(|v| v * 1.1 + 0.01)).collect();
        let refs: Vec<&Field> = shifted.iter().collect();
        let narrow = supercritical_error_curve(&refs, &profile, ParabolaWindow::new(1.0).unwrap()).unwrap();
        let wide = supercritical_error_curve(&refs, &profile, ParabolaWindow::new(3.0).unwrap()).unwrap();
        for (a, b) in narrow.values().iter().zip(wide.values()) {
            assert!(*a <= b);
        }
    }

    #[test]
    fn log_curve_zero_on_exact_shape_and_rejects_early_times() {
        let grid = Grid::new(1, 64.0, 1024).unwrap();
        let c = LogCaseConstant::new(0.5, 1).unwrap();
        let a = 0.3;
        let fields: Vec<Field> = [10.0, 30.0]
            .iter()
            .map(|&t| {
                let g = heat_kernel(a, t, &grid).unwrap();
                g.map(|v| v * c.value() * t.ln())
            })
            .collect();
        let refs: Vec<&Field> = fields.iter().collect();
        let curve = log_error_curve(&refs, c, a, ParabolaWindow::new(2.0).unwrap()).unwrap();
        assert!(curve.values().iter().all(|&v| v < 1e-14));
        let early = heat_kernel(a, 5.0, &grid).unwrap();
        assert!(matches!(
            log_error_curve(&[&early], c, a, ParabolaWindow::new(2.0).unwrap()),
            Err(Error::LogTimeTooSmall { .. })
        ));
    }

    #[test]
    fn w_mass_curve() {
        let k = bump(64.0, 1024);
        let times = [0.5, 1.0, 5.0];
        let curves = w_estimate_curves(&k, &times, &[f64::INFINITY]).unwrap();
        assert_eq!(curves.len(), 2);
        for (&t, v) in times.iter().zip(curves[1].values()) {
            assert!((v - (1.0 - (-t).exp())).abs() < 1e-9);
        }
    }
}
