//! Execution of one validated experiment.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use nonlocal_core::asymptotics::{
    fit_rate, linear_error_curve, log_constant_fit, log_error_curve, supercritical_error_curve, w_estimate_curves,
    ErrorCurve, Rescaling,
};
use nonlocal_core::grid::{outer_decade_deviation, sup_norm, tail_ratio, ShellStat};
use nonlocal_core::profile::{LogCaseConstant, SelfSimilarProfile};
use nonlocal_core::semigroup::{propagate_linear, w_part};
use nonlocal_core::solver::{
    duhamel_residual, linear_companion, picard_solve, richardson_order, solve, BudgetRule, ProblemSpec,
    SolverConfig, Trajectory,
};
use nonlocal_core::{DiscreteKernel, Field, Grid, InitialDatum, Kernel, ParabolaWindow};
use sha2::{Digest, Sha256};

use crate::config::{rate_exponent, AuditKind, CheckSpec, Experiment, ExperimentKind};
use crate::report::{AuditRecord, CheckRecord, Comparison, FitRecord, GridInfo, KernelInfo, Provenance, Report};
use crate::LabError;

const PROFILE_SAMPLES_PER_UNIT: f64 = 400.0;
const DOMAIN_AUDIT_LIMIT: f64 = 0.1;
const TIMESTEP_AUDIT_LIMIT: f64 = 0.01;

/// Runs `exp`, writing artifacts into `staging`.
pub fn execute(exp: &Experiment, staging: &Path, strict: bool) -> Result<Report, LabError> {
    let mut run = Run {
        exp,
        staging,
        checks: Vec::new(),
        fits: Vec::new(),
        artifacts: Vec::new(),
        audits: Vec::new(),
    };
    match exp.config.kind {
        ExperimentKind::LinearAsymptotics => run.linear()?,
        ExperimentKind::WEstimates => run.w_estimates()?,
        ExperimentKind::Supercritical | ExperimentKind::LogCase => run.long_time()?,
        ExperimentKind::TailPreservation => run.tail()?,
        ExperimentKind::SolverCrossval => run.crossval()?,
    }
    debug_assert_eq!(run.checks.len(), exp.checks.len());
    let checks_pass = run.checks.iter().all(|c| c.passed);
    let audits_pass = run.audits.iter().all(|a| a.passed);
    let kernel = exp.kernel.kernel();
    Ok(Report {
        name: exp.config.name.clone(),
        kind: exp.config.kind.name().to_string(),
        passed: checks_pass && (!strict || audits_pass),
        checks: run.checks,
        fits: run.fits,
        artifacts: run.artifacts,
        provenance: Provenance {
            config_sha256: sha256_hex(exp.source.as_bytes()),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            grid: GridInfo {
                dimension: exp.grid.dimension(),
                half_length: exp.grid.half_length(),
                points: exp.grid.points_per_axis(),
                spacing: exp.grid.spacing(),
            },
            kernel: KernelInfo {
                shape: kernel.shape().name().to_string(),
                radius: kernel.radius(),
                diffusivity: kernel.diffusivity(),
                discrete_diffusivity: exp.kernel.diffusivity(),
            },
            audits: run.audits,
            strict,
        },
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Run<'a> {
    exp: &'a Experiment,
    staging: &'a Path,
    checks: Vec<CheckRecord>,
    fits: Vec<FitRecord>,
    artifacts: Vec<String>,
    audits: Vec<AuditRecord>,
}

/// Result of evaluating one check.
struct Measured {
    value: f64,
    threshold: Comparison,
    note: Option<String>,
}

fn measured(value: f64, threshold: Comparison) -> Measured {
    Measured {
        value,
        threshold,
        note: None,
    }
}

fn trivially(note: &str) -> Measured {
    Measured {
        value: 0.0,
        threshold: Comparison::AtMost { limit: 0.0 },
        note: Some(note.to_string()),
    }
}

fn anchor(kind: ExperimentKind, name: &str) -> String {
    let text = match (kind, name) {
        (ExperimentKind::LinearAsymptotics, "decreasing") => {
            "the nonlocal linear flow approaches the heat flow: t^(alpha/2) |u_L - u_heat|_inf decreases"
        }
        (ExperimentKind::LinearAsymptotics, "slope") => {
            "t^(alpha/2) |u_L - u_heat|_inf <= C t^(-mu) for every mu < alpha/(2N)"
        }
        (_, "mass_identity") => "the regular part W of the fundamental solution has mass 1 - e^(-t)",
        (_, "diffusivity") => "the diffusivity is a = (1/(2N)) * integral of J(z) |z|^2 dz",
        (_, "symbol_diffusivity") => "the symbol expands as J-hat(xi) = 1 - a |xi|^2 + O(|xi|^4)",
        (_, "rescaled_bounded") => "t^((N+1)/2) |W - U_a|_inf stays bounded",
        (ExperimentKind::WEstimates, _) => "|W - U_a|_(q') <= C_q t^(-(N+1)/(2q)) with 1/q + 1/q' = 1",
        (ExperimentKind::Supercritical, "ratio" | "slope_negative" | "decreasing") => {
            "for p > 1 + 2/alpha, t^(alpha/2) |u - U_(alpha,A)|_inf on |x| <= K sqrt(t) tends to 0"
        }
        (ExperimentKind::LogCase, "ratio" | "decreasing") => {
            "for alpha = N, t^(N/2) |u/log t - C_(A,N) U_a|_inf on |x| <= K sqrt(t) tends to 0"
        }
        (_, "log_constant") => "C_(A,N) = A sigma_(N-1) / 2 matches the heat-flow fit of u(0,t) t^(N/2) / log t",
        (_, "comparison") => "comparison principle: 0 <= u <= u_L pointwise",
        (_, "bounded") => "the solution stays below |u_0|_inf",
        (_, "duhamel_trend") => {
            "the Duhamel remainder t^(alpha/2) |u - S(t - t0) u(t0)|_inf at t = 2 t0 shrinks as t0 grows"
        }
        (_, "duhamel_agreement") => "u - u_L equals minus the Duhamel integral of |u|^(p-1) u",
        (_, "datum_tail") => "the datum satisfies |x|^alpha u_0 -> A on the outer decade",
        (_, "tail") => "|x|^alpha u(x,t) -> A uniformly for t in bounded sets",
        (_, "picard_gap") => "the fixed point of the Duhamel map coincides with the splitting solution",
        (_, "richardson_order") => "Strang splitting with exact sub-flows is second-order accurate",
        (_, "contraction") => "Picard iterates contract with ratio <= p (2 |u_0|_inf)^(p-1) T",
        _ => "unlisted check",
    };
    text.to_string()
}

fn curve_is_zero(curve: &ErrorCurve) -> bool {
    curve.values().iter().all(|&v| v == 0.0)
}

fn time_index(times: &[f64], t: f64) -> Option<usize> {
    times.iter().position(|s| (s - t).abs() <= 1e-9 * t.max(1.0))
}

impl Run<'_> {
    fn check(&mut self, spec: &CheckSpec, eval: impl FnOnce(&CheckSpec) -> Result<Measured, LabError>) -> Result<(), LabError> {
        let started = Instant::now();
        let m = eval(spec)?;
        let passed = m.value.is_finite() && m.threshold.holds(m.value);
        self.checks.push(CheckRecord {
            name: spec.name.clone(),
            anchor: anchor(self.exp.config.kind, &spec.name),
            measured: m.value,
            threshold: m.threshold,
            passed,
            runtime_seconds: started.elapsed().as_secs_f64(),
            note: m.note,
        });
        Ok(())
    }

    fn write_artifact(&mut self, name: &str, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), LabError> {
        let path = self.staging.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut out = BufWriter::new(fs::File::create(&path)?);
        write(&mut out)?;
        out.flush()?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn write_curve(&mut self, name: &str, curve: &ErrorCurve) -> Result<(), LabError> {
        self.write_artifact(name, |out| curve.write_csv(out))?;
        if let Ok(fit) = fit_rate(curve) {
            self.fits.push(FitRecord {
                curve: name.trim_end_matches(".csv").to_string(),
                exponent: fit.exponent,
                log_constant: fit.log_constant,
                residual: fit.residual,
                points_used: fit.points_used,
                excluded: fit.excluded,
            });
        }
        Ok(())
    }

    fn audit(&mut self, name: &str, reference: f64, rerun: f64, limit: f64) {
        let (change, note) = if reference == 0.0 && rerun == 0.0 {
            (0.0, Some("error identically zero".to_string()))
        } else {
            ((rerun - reference).abs() / reference.abs(), None)
        };
        self.audits.push(AuditRecord {
            name: name.to_string(),
            measured: change,
            limit,
            passed: change <= limit,
            note,
        });
    }

    fn datum(&self) -> &InitialDatum {
        self.exp.datum.as_ref().expect("validated: datum present")
    }

    fn solver_config(&self, window: f64) -> SolverConfig {
        let s = &self.exp.config.solver;
        SolverConfig {
            dt_min: s.dt_min,
            dt_max: s.dt_max,
            growth: s.growth,
            budget: Some(BudgetRule {
                window,
                safety: s.safety,
            }),
        }
    }

    fn doubled_kernel(&self) -> Result<DiscreteKernel, LabError> {
        let grid = self.exp.grid.doubled()?;
        Ok(Kernel::from_spec(&self.exp.config.kernel)?.discretize(&grid)?)
    }

    /// Common handling of decay checks on an error curve.
    fn curve_checks(&mut self, curve: &ErrorCurve, default_slope_limit: Option<f64>) -> Result<(), LabError> {
        let times = curve.times();
        let values = curve.values();
        let zero = curve_is_zero(curve);
        let kind = self.exp.config.kind;
        for spec in self.exp.checks.clone() {
            match spec.name.as_str() {
                "decreasing" => self.check(&spec, |_| {
                    if zero {
                        return Ok(trivially("error curve identically zero"));
                    }
                    let ratio = values[values.len() - 1] / values[0];
                    Ok(measured(ratio, Comparison::Below { limit: 1.0 }))
                })?,
                "slope" | "slope_negative" => self.check(&spec, |c| {
                    if zero {
                        return Ok(trivially("error curve identically zero"));
                    }
                    let limit = c.tolerance.or(default_slope_limit).unwrap_or(0.0);
                    let fit = fit_rate(curve)?;
                    let threshold = if spec.name == "slope" {
                        Comparison::AtMost { limit }
                    } else {
                        Comparison::Below { limit }
                    };
                    Ok(measured(fit.exponent, threshold))
                })?,
                "ratio" => self.check(&spec, |c| {
                    // supercritical: one decade after the start, limit 0.5;
                    // log case: the last decade, limit 1
                    let (early, late, limit) = match kind {
                        ExperimentKind::Supercritical => (times[0], 10.0 * times[0], 0.5),
                        _ => (times[times.len() - 1] / 10.0, times[times.len() - 1], 1.0),
                    };
                    let early = c.early.unwrap_or(early);
                    let late = c.late.unwrap_or(late);
                    let limit = c.tolerance.unwrap_or(limit);
                    let (Some(i), Some(j)) = (time_index(&times, early), time_index(&times, late)) else {
                        return Err(LabError::Config(format!(
                            "check `ratio` needs sample times {early} and {late}"
                        )));
                    };
                    if zero {
                        return Ok(trivially("error curve identically zero"));
                    }
                    let mut m = measured(values[j] / values[i], Comparison::Below { limit });
                    m.note = Some(format!("value {:.4e} at t = {early}, {:.4e} at t = {late}", values[i], values[j]));
                    Ok(m)
                })?,
                _ => {}
            }
        }
        Ok(())
    }

    fn linear(&mut self) -> Result<(), LabError> {
        let datum = self.datum().clone();
        let times = self.exp.times.clone();
        let curve = linear_error_curve(&self.exp.kernel, &datum, &times)?;
        self.write_curve("linear_error.csv", &curve)?;
        self.curve_checks(&curve, Some(-0.1))?;
        if self.exp.audits.contains(&AuditKind::Domain) {
            let rerun = linear_error_curve(&self.doubled_kernel()?, &datum, &times)?;
            let last = times.len() - 1;
            self.audit("domain", curve.values()[last], rerun.values()[last], DOMAIN_AUDIT_LIMIT);
        }
        Ok(())
    }

    fn w_estimates(&mut self) -> Result<(), LabError> {
        let exp = self.exp;
        let times = exp.times.clone();
        let n = exp.grid.dimension() as f64;
        let mut q_list: Vec<f64> = exp.config.q.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0]);
        for c in &exp.checks {
            if let Some(q) = rate_exponent(&c.name) {
                if !q_list.contains(&q) {
                    q_list.push(q);
                }
            }
        }
        if exp.checks.iter().any(|c| c.name == "rescaled_bounded") && !q_list.contains(&1.0) {
            q_list.push(1.0);
        }
        let curves = if q_list.is_empty() {
            Vec::new()
        } else {
            w_estimate_curves(&exp.kernel, &times, &q_list)?
        };
        for (k, q) in q_list.iter().enumerate() {
            let tag = if q.is_infinite() { "inf".to_string() } else { format!("{q}") };
            self.write_curve(&format!("w_minus_heat_q{tag}.csv"), &curves[2 * k])?;
            self.write_curve(&format!("w_q{tag}.csv"), &curves[2 * k + 1])?;
        }
        for spec in exp.checks.clone() {
            match spec.name.as_str() {
                "mass_identity" => self.check(&spec, |c| {
                    let mut worst: f64 = 0.0;
                    for t in [0.5, 1.0, 5.0, 10.0] {
                        let w = w_part(&exp.kernel, t)?;
                        worst = worst.max((w.integral() - (1.0 - (-t).exp())).abs());
                    }
                    Ok(measured(worst, Comparison::AtMost { limit: c.tolerance.unwrap_or(1e-8) }))
                })?,
                "diffusivity" => self.check(&spec, |c| {
                    let target = c.target.expect("validated: target present");
                    Ok(measured(
                        exp.kernel.kernel().diffusivity(),
                        Comparison::Within {
                            target,
                            tolerance: c.tolerance.unwrap_or(1e-10),
                        },
                    ))
                })?,
                "symbol_diffusivity" => self.check(&spec, |c| {
                    let a = exp.kernel.kernel().diffusivity();
                    Ok(measured(
                        exp.kernel.symbol_diffusivity(0.1)?,
                        Comparison::Within {
                            target: c.target.unwrap_or(a),
                            tolerance: c.tolerance.unwrap_or(1e-4),
                        },
                    ))
                })?,
                "rescaled_bounded" => self.check(&spec, |c| {
                    let k = q_list.iter().position(|&q| q == 1.0).expect("q = 1 added");
                    let spread = curves[2 * k].rescaled((n + 1.0) / 2.0).spread();
                    Ok(measured(spread, Comparison::AtMost { limit: c.tolerance.unwrap_or(3.0) }))
                })?,
                name => {
                    let q = rate_exponent(name).expect("validated check name");
                    self.check(&spec, |c| {
                        let k = q_list.iter().position(|&x| x == q).expect("q added");
                        let fit = fit_rate(&curves[2 * k])?;
                        Ok(measured(
                            fit.exponent,
                            Comparison::Within {
                                target: c.target.unwrap_or(-(n + 1.0) / (2.0 * q)),
                                tolerance: c.tolerance.unwrap_or(0.15),
                            },
                        ))
                    })?
                }
            }
        }
        Ok(())
    }

    /// Supercritical and log-case experiments share the solve and audits.
    fn long_time(&mut self) -> Result<(), LabError> {
        let exp = self.exp;
        let kind = exp.config.kind;
        let datum = self.datum().clone();
        let p = exp.config.exponent.expect("validated");
        let window = ParabolaWindow::new(exp.config.window.expect("validated"))?;
        let curve_times = exp.times.clone();
        let duhamel_t0: Vec<f64> = if exp.checks.iter().any(|c| c.name.starts_with("duhamel")) {
            (0..3).map(|k| curve_times[0] * 2f64.powi(k)).collect()
        } else {
            Vec::new()
        };
        let mut solve_times: Vec<f64> = curve_times.clone();
        for t0 in &duhamel_t0 {
            solve_times.push(*t0);
            solve_times.push(2.0 * t0);
        }
        solve_times.sort_by(f64::total_cmp);
        solve_times.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.max(1.0));

        let config = self.solver_config(window.k());
        let profile = match (kind, datum.is_zero()) {
            (ExperimentKind::Supercritical, false) => Some(SelfSimilarProfile::new(
                datum.alpha(),
                datum.amplitude(),
                exp.kernel.diffusivity(),
                exp.grid.dimension(),
                window.k(),
                (PROFILE_SAMPLES_PER_UNIT * window.k()).ceil() as usize + 1,
            )?),
            _ => None,
        };
        let error_curve = |kernel: &DiscreteKernel, config: &SolverConfig| -> Result<(ErrorCurve, ProblemSpec, Trajectory), LabError> {
            let spec = ProblemSpec::new(kernel.clone(), datum.clone(), p)?;
            let traj = solve(&spec, &solve_times, config)?;
            let fields: Vec<&Field> = curve_times.iter().map(|&t| traj.at(t)).collect::<Result<_, _>>()?;
            let curve = match (&profile, kind, datum.is_zero()) {
                (_, _, true) => zero_datum_curve(&fields, window, datum.alpha())?,
                (Some(profile), _, false) => supercritical_error_curve(&fields, profile, window)?,
                (None, _, false) => log_error_curve(
                    &fields,
                    LogCaseConstant::new(datum.amplitude(), kernel.grid().dimension())?,
                    kernel.diffusivity(),
                    window,
                )?,
            };
            Ok((curve, spec, traj))
        };
        let (curve, spec, traj) = error_curve(&exp.kernel, &config)?;

        let curve_name = match kind {
            ExperimentKind::Supercritical => "supercritical_error.csv",
            _ => "log_error.csv",
        };
        self.write_curve(curve_name, &curve)?;
        if let Some(profile) = &profile {
            self.write_artifact("profile.csv", |out| profile.write_csv(out))?;
        }
        if exp.config.export_fields {
            traj.export(&self.staging.join("fields"), Some((datum.alpha(), datum.amplitude())))?;
            self.artifacts.push("fields/index.csv".to_string());
        }
        self.curve_checks(&curve, None)?;

        let u0 = spec.initial_field()?;
        for check in exp.checks.clone() {
            match check.name.as_str() {
                "comparison" => self.check(&check, |c| {
                    let mut worst: f64 = 0.0;
                    for snap in traj.snapshots() {
                        let linear = propagate_linear(&exp.kernel, &u0, snap.field.time())?;
                        worst = worst
                            .max(-snap.field.min())
                            .max(snap.field.difference(&linear)?.max());
                    }
                    Ok(measured(worst, Comparison::AtMost { limit: c.tolerance.unwrap_or(1e-10) }))
                })?,
                "bounded" => self.check(&check, |c| {
                    let bound = sup_norm(&u0, None, 0.0)?;
                    let excess = traj
                        .snapshots()
                        .iter()
                        .map(|s| s.field.max() - bound)
                        .fold(f64::NEG_INFINITY, f64::max);
                    Ok(measured(excess, Comparison::AtMost { limit: c.tolerance.unwrap_or(1e-10) }))
                })?,
                "duhamel_trend" => self.check(&check, |c| {
                    let alpha = datum.alpha();
                    let values: Vec<f64> = duhamel_t0
                        .iter()
                        .map(|&t0| {
                            let t = 2.0 * t0;
                            let companion = linear_companion(&exp.kernel, traj.at(t0)?, t)?;
                            let gap = traj.at(t)?.difference(&companion)?;
                            Ok(t.powf(alpha / 2.0) * sup_norm(&gap, None, t)?)
                        })
                        .collect::<Result<_, nonlocal_core::Error>>()?;
                    if values.iter().all(|&v| v == 0.0) {
                        return Ok(trivially("remainder identically zero"));
                    }
                    let worst = values.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
                    let mut m = measured(worst, Comparison::Below { limit: c.tolerance.unwrap_or(1.0) });
                    m.note = Some(format!(
                        "remainders {:.4e}, {:.4e}, {:.4e} at t0 = {}, {}, {}",
                        values[0], values[1], values[2], duhamel_t0[0], duhamel_t0[1], duhamel_t0[2]
                    ));
                    Ok(m)
                })?,
                "duhamel_agreement" => self.check(&check, |c| {
                    let t0 = duhamel_t0[0];
                    let r = duhamel_residual(&spec, &traj, t0, 2.0 * t0)?;
                    if r.direct == 0.0 && r.quadrature == 0.0 {
                        return Ok(trivially("remainder identically zero"));
                    }
                    let mut m = measured(
                        (r.direct - r.quadrature).abs() / r.direct,
                        Comparison::AtMost { limit: c.tolerance.unwrap_or(0.1) },
                    );
                    m.note = Some(format!("direct {:.4e}, quadrature {:.4e} with {} nodes", r.direct, r.quadrature, r.nodes));
                    Ok(m)
                })?,
                "log_constant" => self.check(&check, |c| {
                    if datum.is_zero() {
                        return Ok(trivially("zero datum: C = 0"));
                    }
                    let n = exp.grid.dimension();
                    let grid = match n {
                        1 => Grid::new(1, 2048.0, 4096)?,
                        _ => Grid::new(2, 512.0, 1024)?,
                    };
                    let times: Vec<f64> = (8..=16).map(|k| 10f64.powf(k as f64 / 4.0)).collect();
                    let closed = LogCaseConstant::new(datum.amplitude(), n)?.value();
                    let fitted = log_constant_fit(datum.amplitude(), &grid, 1.0, &times)?;
                    let mut m = measured(
                        (fitted - closed).abs() / closed,
                        Comparison::AtMost { limit: c.tolerance.unwrap_or(0.03) },
                    );
                    m.note = Some(format!("closed form {closed:.6}, heat-flow fit {fitted:.6}"));
                    Ok(m)
                })?,
                _ => {}
            }
        }

        let last = curve_times.len() - 1;
        let reference = curve.values()[last];
        if exp.audits.contains(&AuditKind::Domain) {
            let (rerun, _, _) = error_curve(&self.doubled_kernel()?, &config)?;
            self.audit("domain", reference, rerun.values()[last], DOMAIN_AUDIT_LIMIT);
        }
        if exp.audits.contains(&AuditKind::Timestep) {
            let (rerun, _, _) = error_curve(&exp.kernel, &config.halved())?;
            self.audit("timestep", reference, rerun.values()[last], TIMESTEP_AUDIT_LIMIT);
        }
        Ok(())
    }

    fn tail(&mut self) -> Result<(), LabError> {
        let exp = self.exp;
        let datum = self.datum().clone();
        let u0 = datum.sample(&exp.grid)?;
        let fields: Vec<Field> = match exp.config.exponent {
            Some(p) => {
                let spec = ProblemSpec::new(exp.kernel.clone(), datum.clone(), p)?;
                let traj = solve(&spec, &exp.times, &self.solver_config(0.0))?;
                traj.snapshots().iter().map(|s| s.field.clone()).collect()
            }
            None => exp
                .times
                .iter()
                .map(|&t| propagate_linear(&exp.kernel, &u0, t))
                .collect::<Result<_, _>>()?,
        };
        let alpha = datum.alpha();
        let shells: Vec<(f64, Vec<ShellStat>)> = std::iter::once(&u0)
            .chain(&fields)
            .map(|f| Ok((f.time(), tail_ratio(f, alpha)?)))
            .collect::<Result<_, nonlocal_core::Error>>()?;
        self.write_artifact("tail_shells.csv", |out| {
            writeln!(out, "t,r_inner,r_outer,min,max,nodes")?;
            for (t, list) in &shells {
                for s in list {
                    writeln!(out, "{t:.10e},{:.10e},{:.10e},{:.16e},{:.16e},{}", s.r_inner, s.r_outer, s.min, s.max, s.nodes)?;
                }
            }
            Ok(())
        })?;
        let amplitude = datum.amplitude();
        for check in exp.checks.clone() {
            let limit_default = if check.name == "datum_tail" { 0.02 } else { 0.05 };
            self.check(&check, |c| {
                if datum.is_zero() {
                    return Ok(trivially("zero datum"));
                }
                let deviation = match c.name.as_str() {
                    "datum_tail" => outer_decade_deviation(&shells[0].1, amplitude),
                    _ => shells[1..]
                        .iter()
                        .map(|(_, s)| outer_decade_deviation(s, amplitude))
                        .fold(0.0, f64::max),
                };
                Ok(measured(deviation, Comparison::AtMost { limit: c.tolerance.unwrap_or(limit_default) }))
            })?;
        }
        Ok(())
    }

    fn crossval(&mut self) -> Result<(), LabError> {
        let exp = self.exp;
        let spec = ProblemSpec::new(exp.kernel.clone(), self.datum().clone(), exp.config.exponent.expect("validated"))?;
        let horizon = exp.config.horizon.unwrap_or(0.5);
        let needs_picard = exp.checks.iter().any(|c| c.name == "picard_gap" || c.name == "contraction");
        let picard = if needs_picard {
            Some(picard_solve(&spec, horizon, 1e-13, 500)?)
        } else {
            None
        };
        for check in exp.checks.clone() {
            match check.name.as_str() {
                "picard_gap" => self.check(&check, |c| {
                    let split = solve(&spec, &[horizon], &SolverConfig::fixed(horizon / 100.0))?;
                    let fixed = &picard.as_ref().expect("computed").field;
                    let gap = sup_norm(&fixed.difference(split.at(horizon)?)?, None, horizon)?;
                    Ok(measured(gap, Comparison::AtMost { limit: c.tolerance.unwrap_or(1e-5) }))
                })?,
                "contraction" => self.check(&check, |_| {
                    let sol = picard.as_ref().expect("computed");
                    let worst = sol
                        .distances
                        .windows(2)
                        .filter(|w| w[0] > 0.0)
                        .map(|w| w[1] / w[0])
                        .fold(0.0, f64::max);
                    Ok(measured(worst, Comparison::AtMost { limit: sol.contraction }))
                })?,
                "richardson_order" => self.check(&check, |c| {
                    if spec.datum().is_zero() {
                        return Ok(trivially("zero datum: splitting is exact"));
                    }
                    let order = richardson_order(&spec, 2.0 * horizon, horizon / 5.0)?;
                    Ok(measured(order, Comparison::AtLeast { limit: c.tolerance.unwrap_or(1.9) }))
                })?,
                _ => {}
            }
        }
        Ok(())
    }
}

/// Error curve when the datum is zero: the windowed sup of `|u|` itself.
fn zero_datum_curve(fields: &[&Field], window: ParabolaWindow, alpha: f64) -> Result<ErrorCurve, LabError> {
    let points = fields
        .iter()
        .map(|f| Ok((f.time(), f.time().powf(alpha / 2.0) * sup_norm(f, Some(window), f.time())?)))
        .collect::<Result<Vec<_>, nonlocal_core::Error>>()?;
    Ok(ErrorCurve::new("zero datum: windowed sup of |u|", points, Rescaling::plain())?)
}
