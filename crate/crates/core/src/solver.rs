//! Time integration of `u_t = J * u - u - |u|^{p-1} u`.
//!
//! The production solver is Strang splitting in which both sub-flows are
//! solved exactly: the linear flow spectrally and the absorption ODE in
//! closed form. An independent Picard solver on the Duhamel formulation
//! serves as a cross-check over short horizons.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{domain_budget, sup_norm, Field, InitialDatum};
use crate::kernel::DiscreteKernel;
use crate::semigroup::{linear_multiplier, propagate_linear};

/// Kernel, datum and absorption exponent `p`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    kernel: DiscreteKernel,
    datum: InitialDatum,
    exponent: f64,
}

impl ProblemSpec {
    pub fn new(kernel: DiscreteKernel, datum: InitialDatum, exponent: f64) -> Result<Self> {
        check_exponent(exponent)?;
        Ok(ProblemSpec {
            kernel,
            datum,
            exponent,
        })
    }

    pub fn kernel(&self) -> &DiscreteKernel {
        &self.kernel
    }

    pub fn datum(&self) -> &InitialDatum {
        &self.datum
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// `p > 1 + 2 / alpha`.
    pub fn supercritical(&self) -> bool {
        self.exponent > 1.0 + 2.0 / self.datum.alpha()
    }

    pub fn require_supercritical(&self) -> Result<()> {
        if self.supercritical() {
            Ok(())
        } else {
            Err(Error::param(
                "p",
                format!(
                    "p = {} is not supercritical for alpha = {} (need p > {})",
                    self.exponent,
                    self.datum.alpha(),
                    1.0 + 2.0 / self.datum.alpha()
                ),
            ))
        }
    }

    pub fn initial_field(&self) -> Result<Field> {
        self.datum.sample(self.kernel.grid())
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::param("p", format!("absorption exponent must exceed 1, got {p}")))
    }
}

/// Domain-size rule `L >= K sqrt(T) + safety R sqrt(T)` checked before a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetRule {
    pub window: f64,
    pub safety: f64,
}

/// Step-size schedule `dt = clamp(growth * t, dt_min, dt_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt_min: f64,
    pub dt_max: f64,
    pub growth: f64,
    pub budget: Option<BudgetRule>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt_min: 0.01,
            dt_max: 2.0,
            growth: 1.0 / 50.0,
            budget: None,
        }
    }
}

impl SolverConfig {
    /// Fixed step `dt`.
    pub fn fixed(dt: f64) -> Self {
        SolverConfig {
            dt_min: dt,
            dt_max: dt,
            growth: 0.0,
            budget: None,
        }
    }

    /// Same schedule with every step halved, for the accuracy audit.
    pub fn halved(&self) -> Self {
        SolverConfig {
            dt_min: self.dt_min / 2.0,
            dt_max: self.dt_max / 2.0,
            growth: self.growth / 2.0,
            budget: self.budget,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min.is_finite()) {
            return Err(Error::param("dt_min", format!("must be positive, got {}", self.dt_min)));
        }
        if !(self.dt_max >= self.dt_min && self.dt_max.is_finite()) {
            return Err(Error::param("dt_max", format!("must be >= dt_min, got {}", self.dt_max)));
        }
        if !(self.growth >= 0.0 && self.growth.is_finite()) {
            return Err(Error::param("growth", format!("must be >= 0, got {}", self.growth)));
        }
        Ok(())
    }

    fn step_at(&self, t: f64) -> f64 {
        (self.growth * t).clamp(self.dt_min, self.dt_max)
    }
}

fn absorb_value(w: f64, p: f64, dt: f64) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    let m = w.abs();
    // (m^{1-p} + (p-1) dt)^{-1/(p-1)} written without overflow for small m
    let decayed = m * (1.0 + (p - 1.0) * dt * m.powf(p - 1.0)).powf(-1.0 / (p - 1.0));
    decayed.copysign(w)
}

/// Exact flow of `w' = -|w|^{p-1} w` over `dt`, pointwise.
pub fn absorption_step(f: &Field, p: f64, dt: f64) -> Result<Field> {
    check_exponent(p)?;
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be finite and >= 0, got {dt}")));
    }
    f.ensure_finite("absorption input")?;
    let values = f.values().iter().map(|&w| absorb_value(w, p, dt)).collect();
    Ok(Field::from_parts(f.grid(), values, f.time() + dt))
}

fn strang_values(spec: &ProblemSpec, values: &[f64], dt: f64) -> Result<Vec<f64>> {
    let p = spec.exponent;
    let half: Vec<f64> = values.iter().map(|&w| absorb_value(w, p, dt / 2.0)).collect();
    let multiplier = linear_multiplier(&spec.kernel, dt);
    let mut out = spec.kernel.grid().transform().apply_multiplier(&half, &multiplier);
    for w in out.iter_mut() {
        *w = absorb_value(*w, p, dt / 2.0);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("splitting step of size {dt}"),
        });
    }
    Ok(out)
}

/// One Strang step: half absorption, exact linear step, half absorption.
pub fn strang_step(spec: &ProblemSpec, f: &Field, dt: f64) -> Result<Field> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be finite and >= 0, got {dt}")));
    }
    if f.grid() != spec.kernel.grid() {
        return Err(Error::GridMismatch);
    }
    f.ensure_finite("splitting input")?;
    if dt == 0.0 {
        return Ok(f.clone());
    }
    Ok(Field::from_parts(f.grid(), strang_values(spec, f.values(), dt)?, f.time() + dt))
}

/// Advances `f` to `target` with the schedule of `config`; returns the new
/// field, the number of steps and the last step size.
fn advance(spec: &ProblemSpec, f: Field, target: f64, config: &SolverConfig) -> Result<(Field, usize, f64)> {
    let mut t = f.time();
    let grid = f.grid().clone();
    let mut values = f.into_values();
    let mut steps = 0;
    let mut last = 0.0;
    while t < target {
        let mut dt = config.step_at(t);
        // land exactly on the target; avoid a sliver step
        if t + dt * (1.0 + 1e-9) >= target {
            dt = target - t;
        }
        values = strang_values(spec, &values, dt)?;
        t = if target - (t + dt) <= 0.0 { target } else { t + dt };
        steps += 1;
        last = dt;
    }
    Ok((Field::from_parts(&grid, values, target), steps, last))
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub field: Field,
    /// Step size used to reach this snapshot.
    pub dt: f64,
    /// Steps taken since the previous snapshot.
    pub steps: usize,
}

/// Snapshots at caller-requested times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    snapshots: Vec<Snapshot>,
    config: SolverConfig,
    exponent: f64,
}

impl Trajectory {
    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.field.time()).collect()
    }

    /// Snapshot at time `t` (relative match 1e-9).
    pub fn at(&self, t: f64) -> Result<&Field> {
        self.snapshots
            .iter()
            .find(|s| (s.field.time() - t).abs() <= 1e-9 * t.abs().max(1.0))
            .map(|s| &s.field)
            .ok_or(Error::MissingSnapshot { requested: t })
    }

    /// One CSV per snapshot plus `index.csv` with `t,file,dt,steps`.
    pub fn export(&self, dir: &Path, tail: Option<(f64, f64)>) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut index = io::BufWriter::new(fs::File::create(dir.join("index.csv"))?);
        writeln!(index, "t,file,dt,steps")?;
        for (k, snap) in self.snapshots.iter().enumerate() {
            let name = format!("snapshot_{k:04}.csv");
            let file = io::BufWriter::new(fs::File::create(dir.join(&name))?);
            snap.field.write_csv(file, tail)?;
            writeln!(index, "{:.10e},{},{:.6e},{}", snap.field.time(), name, snap.dt, snap.steps)?;
        }
        index.flush()
    }
}

/// Strang splitting from `t = 0` with snapshots at `times` (strictly
/// increasing, nonnegative).
pub fn solve(spec: &ProblemSpec, times: &[f64], config: &SolverConfig) -> Result<Trajectory> {
    config.validate()?;
    if times.is_empty() {
        return Err(Error::param("times", "no sample times requested"));
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::param("times", "sample times must be finite and >= 0"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("times", "sample times must be strictly increasing"));
    }
    let t_max = *times.last().expect("nonempty");
    if let Some(rule) = config.budget {
        let grid = spec.kernel.grid();
        grid.check_budget(domain_budget(spec.kernel.kernel().radius(), rule.window, t_max, rule.safety))?;
    }
    let mut current = spec.initial_field()?;
    let mut snapshots = Vec::with_capacity(times.len());
    for &target in times {
        let (next, steps, dt) = advance(spec, current, target, config)?;
        snapshots.push(Snapshot {
            field: next.clone(),
            dt,
            steps,
        });
        current = next;
    }
    Ok(Trajectory {
        snapshots,
        config: *config,
        exponent: spec.exponent,
    })
}

/// Observed order `log2(|u_dt - u_{dt/2}| / |u_{dt/2} - u_{dt/4}|)` at
/// `horizon`, with fixed steps.
pub fn richardson_order(spec: &ProblemSpec, horizon: f64, dt: f64) -> Result<f64> {
    let run = |step: f64| -> Result<Field> {
        let traj = solve(spec, &[horizon], &SolverConfig::fixed(step))?;
        Ok(traj.snapshots[0].field.clone())
    };
    let coarse = run(dt)?;
    let mid = run(dt / 2.0)?;
    let fine = run(dt / 4.0)?;
    let e1 = sup_norm(&coarse.difference(&mid)?, None, horizon)?;
    let e2 = sup_norm(&mid.difference(&fine)?, None, horizon)?;
    Ok((e1 / e2).log2())
}

/// Fixed point of the Duhamel map at the horizon, with diagnostics.
#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub field: Field,
    pub iterations: usize,
    /// Sup-distance between successive iterates over the whole time mesh.
    pub distances: Vec<f64>,
    /// `p (2 |u_0|_inf)^{p-1} horizon`.
    pub contraction: f64,
}

const PICARD_MAX_ITERATIONS: usize = 200;

/// Iterates `T v = S(t) u_0 - int_0^t S(t - s) |v|^{p-1} v ds` from
/// `v = S(t) u_0`; the integral uses the trapezoid rule on `nodes` equal
/// time steps, applied recursively through `S`.
pub fn picard_solve(spec: &ProblemSpec, horizon: f64, tol: f64, nodes: usize) -> Result<PicardSolution> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param("horizon", format!("must be positive, got {horizon}")));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    if nodes == 0 {
        return Err(Error::param("nodes", "need at least one time step"));
    }
    let p = spec.exponent;
    let u0 = spec.initial_field()?;
    let bound = sup_norm(&u0, None, 0.0)?;
    let contraction = p * (2.0 * bound).powf(p - 1.0) * horizon;
    let grid = u0.grid().clone();
    if bound == 0.0 {
        return Ok(PicardSolution {
            field: Field::zeros(&grid, horizon),
            iterations: 1,
            distances: vec![0.0],
            contraction: 0.0,
        });
    }
    if contraction >= 0.5 {
        return Err(Error::NonContraction(format!(
            "p (2|u0|)^(p-1) T = {contraction:.3} >= 1/2; use a shorter horizon"
        )));
    }
    let step = horizon / nodes as f64;
    let transform = grid.transform();
    let multiplier = linear_multiplier(&spec.kernel, step);
    let shift = |v: &[f64]| transform.apply_multiplier(v, &multiplier);

    let mut linear = Vec::with_capacity(nodes + 1);
    linear.push(u0.values().to_vec());
    for k in 0..nodes {
        let next = shift(&linear[k]);
        linear.push(next);
    }
    let power = |v: &[f64]| -> Vec<f64> { v.iter().map(|&w| w.abs().powf(p - 1.0) * w).collect() };

    let mut iterate = linear.clone();
    let mut distances = Vec::new();
    for iteration in 1..=PICARD_MAX_ITERATIONS {
        let mut next = Vec::with_capacity(nodes + 1);
        next.push(linear[0].clone());
        let mut integral = vec![0.0; grid.len()];
        let mut previous_source = power(&iterate[0]);
        for k in 1..=nodes {
            let source = power(&iterate[k]);
            let carried: Vec<f64> = integral
                .iter()
                .zip(&previous_source)
                .map(|(i, s)| i + 0.5 * step * s)
                .collect();
            integral = shift(&carried);
            for (i, s) in integral.iter_mut().zip(&source) {
                *i += 0.5 * step * s;
            }
            next.push(linear[k].iter().zip(&integral).map(|(l, i)| l - i).collect());
            previous_source = source;
        }
        let distance = next
            .iter()
            .zip(&iterate)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        if !distance.is_finite() || (distances.first().is_some_and(|&d0: &f64| distance > 1e3 * d0)) {
            return Err(Error::NonContraction(format!("iterates diverge (distance {distance:.3e})")));
        }
        distances.push(distance);
        iterate = next;
        if distance < tol {
            let values = iterate.pop().expect("nodes + 1 entries");
            return Ok(PicardSolution {
                field: Field::from_parts(&grid, values, horizon),
                iterations: iteration,
                distances,
                contraction,
            });
        }
    }
    Err(Error::NonContraction(format!(
        "no convergence to {tol:.1e} in {PICARD_MAX_ITERATIONS} iterations"
    )))
}

/// `S(t - t0)` applied to the restart field `u(., t0)`.
pub fn linear_companion(kernel: &DiscreteKernel, restart: &Field, t: f64) -> Result<Field> {
    let t0 = restart.time();
    if !(t >= t0) {
        return Err(Error::param("t", format!("companion time {t} precedes the restart time {t0}")));
    }
    propagate_linear(kernel, restart, t - t0)
}

/// Both sides of `u(t) - u_L(t) = -int_{t0}^t S(t - s) |u|^{p-1} u ds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuhamelResidual {
    /// `|u(t) - S(t - t0) u(t0)|_inf` from the trajectory.
    pub direct: f64,
    /// Sup norm of the trapezoid quadrature of the Duhamel integral.
    pub quadrature: f64,
    /// Time nodes used by the converged quadrature.
    pub nodes: usize,
}

const DUHAMEL_START_NODES: usize = 8;
const DUHAMEL_MAX_NODES: usize = 1024;

/// Duhamel residual between `t0` and `t`, both snapshots of `traj`.
///
/// The quadrature re-solves from `u(t0)` onto `m` equal subintervals and
/// doubles `m` until the sup norm changes by less than 1%.
pub fn duhamel_residual(spec: &ProblemSpec, traj: &Trajectory, t0: f64, t: f64) -> Result<DuhamelResidual> {
    if !(t > t0) {
        return Err(Error::param("t", format!("need t > t0, got t0 = {t0}, t = {t}")));
    }
    let start = traj.at(t0)?;
    let end = traj.at(t)?;
    let companion = linear_companion(&spec.kernel, start, t)?;
    let direct = sup_norm(&end.difference(&companion)?, None, t)?;

    let mut nodes = DUHAMEL_START_NODES;
    let mut previous = duhamel_quadrature(spec, start, t, nodes, &traj.config)?;
    let mut change = f64::INFINITY;
    while nodes < DUHAMEL_MAX_NODES {
        nodes *= 2;
        let value = duhamel_quadrature(spec, start, t, nodes, &traj.config)?;
        change = (value - previous).abs() / value.abs().max(f64::MIN_POSITIVE);
        previous = value;
        if change < 0.01 || value == 0.0 {
            return Ok(DuhamelResidual {
                direct,
                quadrature: value,
                nodes,
            });
        }
    }
    Err(Error::InsufficientSnapshots { nodes, change })
}

fn duhamel_quadrature(spec: &ProblemSpec, start: &Field, t: f64, nodes: usize, config: &SolverConfig) -> Result<f64> {
    let t0 = start.time();
    let step = (t - t0) / nodes as f64;
    let p = spec.exponent;
    let power = |f: &Field| -> Vec<f64> { f.values().iter().map(|&w| w.abs().powf(p - 1.0) * w).collect() };
    let multiplier = linear_multiplier(&spec.kernel, step);
    let transform = start.grid().transform();
    let mut current = start.clone();
    let mut previous_source = power(&current);
    let mut integral = vec![0.0; start.grid().len()];
    for k in 1..=nodes {
        let target = if k == nodes { t } else { t0 + k as f64 * step };
        current = advance(spec, current, target, config)?.0;
        let source = power(&current);
        let carried: Vec<f64> = integral
            .iter()
            .zip(&previous_source)
            .map(|(i, s)| i + 0.5 * step * s)
            .collect();
        integral = transform.apply_multiplier(&carried, &multiplier);
        for (i, s) in integral.iter_mut().zip(&source) {
            *i += 0.5 * step * s;
        }
        previous_source = source;
    }
    Ok(integral.iter().fold(0.0, |m, v| m.max(v.abs())))
}
