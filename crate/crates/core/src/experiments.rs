//! The batch experiments behind the command-line subcommands.
//!
//! Each experiment is a pure function of a resolved configuration and
//! returns its report and output files in memory; callers decide where to
//! write them. Ensemble members run in parallel but are always reported in
//! member order.

use std::fmt::Write as _;

use crate::checks;
use crate::config::{InitialKind, OutputFormat, ResolvedConfig};
use crate::diagnostics::{attraction_diagnostic, calibrate_dissipation, dissipation_check, energy_series, DissipationReport};
use crate::error::{Error, Result};
use crate::grid::{norm_l2, DiscreteOperators, GridSpec};
use crate::ic::{random_state, scale_to_chi, scale_to_norm};
use crate::io::{fmt_f64, snapshot_bytes, CsvTable};
use crate::model::BoundaryLift;
use crate::oracle::{ForcingMode, ManufacturedForcing};
use crate::solver::{recover_u_sigma, Integrator, Scheme, SolverConfig, State, TrajectoryRecord};

/// One output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn csv(name: impl Into<String>, table: &CsvTable) -> Result<Self> {
        Ok(Self {
            name: name.into(),
            bytes: table.to_bytes()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub report: String,
    pub artifacts: Vec<Artifact>,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "never".to_owned(), fmt_f64)
}

fn header(out: &mut String, title: &str, rc: &ResolvedConfig) {
    let _ = writeln!(out, "# {title}");
    let _ = writeln!(out, "grid = {}", rc.grid.signature());
    let _ = writeln!(out, "scheme = {}", rc.solver.scheme.name());
    let _ = writeln!(out, "dt = {}", fmt_f64(rc.solver.dt));
    let _ = writeln!(out, "R_cut = {}", fmt_f64(rc.params.cutoff_radius));
    let _ = writeln!(out, "seed = {}", rc.source.diagnostics.seed);
}

fn wants(rc: &ResolvedConfig, f: OutputFormat) -> bool {
    rc.source.output.formats.contains(&f)
}

/// Initial state of ensemble member `member` under the `[initial]` block.
pub fn initial_state(rc: &ResolvedConfig, ops: &DiscreteOperators, member: u64) -> Result<State> {
    let init = &rc.source.initial;
    match init.kind {
        InitialKind::Zero => Ok(State::zero(rc.grid)),
        InitialKind::Random => {
            let s = random_state(ops, rc.source.diagnostics.seed, member, &init.field_spec())?;
            scale_to_norm(&s, init.norm)
        }
    }
}

fn energy_table(traj: &TrajectoryRecord, rc: &ResolvedConfig) -> Result<CsvTable> {
    let mut t = CsvTable::new(["t", "chi", "v_l2", "v_hm1", "varpi_l2", "tau_h1"]);
    for e in energy_series(traj, &rc.params) {
        t.push(vec![e.t, e.chi, e.v_l2, e.v_hm1, e.varpi_l2, e.tau_h1])?;
    }
    Ok(t)
}

/// One trajectory from member 0 of the initial-data block.
pub fn simulate(rc: &ResolvedConfig) -> Result<Outcome> {
    let ops = rc.operators()?;
    let s0 = initial_state(rc, &ops, 0)?;
    let integ = Integrator::new(&ops, &rc.lift, rc.params, rc.solver)?;
    let mut report = String::new();
    header(&mut report, "simulate", rc);
    let (traj, diverged) = match integ.integrate(&s0) {
        Ok(t) => (t, None),
        Err(Error::Diverged { step, t, partial }) => (*partial, Some((step, t))),
        Err(e) => return Err(e),
    };
    let mut artifacts = Vec::new();
    if wants(rc, OutputFormat::Csv) {
        artifacts.push(Artifact::csv("energy.csv", &energy_table(&traj, rc)?)?);
    }
    let phys = recover_u_sigma(&traj, &rc.lift, &rc.params)?;
    if let (Some(last), true) = (traj.last(), wants(rc, OutputFormat::Pdif)) {
        let t = fmt_f64(last.t);
        let fields = [
            ("v", &last.v),
            ("tau", &last.tau),
            ("u", phys.u.last().unwrap()),
            ("sigma", phys.sigma.last().unwrap()),
        ];
        for (name, f) in fields {
            let (data, hdr) = snapshot_bytes(f, &[("field", name.to_owned()), ("t", t.clone())])?;
            artifacts.push(Artifact {
                name: format!("{name}_final.pdif"),
                bytes: data,
            });
            artifacts.push(Artifact {
                name: format!("{name}_final.pdif.hdr"),
                bytes: hdr.into_bytes(),
            });
        }
    }
    let energy = energy_series(&traj, &rc.params);
    let max_u = phys.u.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
    let _ = writeln!(report, "samples = {}", traj.len());
    if let (Some(a), Some(b)) = (energy.first(), energy.last()) {
        let _ = writeln!(report, "chi_initial = {}", fmt_f64(a.chi));
        let _ = writeln!(report, "chi_final = {}", fmt_f64(b.chi));
        let _ = writeln!(report, "t_final = {}", fmt_f64(b.t));
    }
    let _ = writeln!(report, "max_abs_u = {}", fmt_f64(max_u));
    if let Some((step, t)) = diverged {
        let _ = writeln!(report, "status = FAIL (diverged at step {step}, t = {})", fmt_f64(t));
    } else {
        let _ = writeln!(report, "status = PASS");
    }
    Ok(Outcome {
        passed: diverged.is_none(),
        report,
        artifacts,
    })
}

fn integrate_all(integ: &Integrator<'_>, starts: &[State]) -> Result<Vec<TrajectoryRecord>> {
    crate::par_map(starts, |s| integ.integrate(s)).into_iter().collect()
}

/// Two-phase dissipation experiment: Γ̂ is calibrated on one ensemble and
/// the estimate is validated on a disjoint, held-out ensemble.
pub fn dissipation(rc: &ResolvedConfig) -> Result<Outcome> {
    let d = &rc.source.diagnostics;
    let ops = rc.operators()?;
    let cfg = SolverConfig {
        t_end: d.dissipation_t_end,
        ..rc.solver
    };
    let integ = Integrator::new(&ops, &rc.lift, rc.params, cfg)?;
    let spec = rc.source.initial.field_spec();
    let base = rc.source.initial.norm.max(f64::MIN_POSITIVE);

    // calibration: norms log-spaced over [base/10, 10·base]
    let cal_starts = (0..d.calibration_size)
        .map(|m| {
            let frac = if d.calibration_size > 1 {
                m as f64 / (d.calibration_size - 1) as f64
            } else {
                0.5
            };
            let s = random_state(&ops, d.seed, m as u64, &spec)?;
            scale_to_norm(&s, base * 10f64.powf(2.0 * frac - 1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let calibration = integrate_all(&integ, &cal_starts)?;
    let est = calibrate_dissipation(&ops, &rc.params, &calibration, d.late_fraction, d.safety)?;

    // validation: held-out members with χ(0) = Γ̂ · factor^{i/(V−1)}
    let offset = d.calibration_size as u64;
    let val_starts = (0..d.validation_size)
        .map(|i| {
            let frac = if d.validation_size > 1 {
                i as f64 / (d.validation_size - 1) as f64
            } else {
                1.0
            };
            let s = random_state(&ops, d.seed, offset + i as u64, &spec)?;
            let level = est.big_gamma_hat.max(f64::MIN_POSITIVE);
            scale_to_chi(&s, level * d.chi_max_factor.powf(frac), &ops, &rc.params)
        })
        .collect::<Result<Vec<_>>>()?;
    let validation = integrate_all(&integ, &val_starts)?;
    let reports: Vec<DissipationReport> = validation
        .iter()
        .map(|t| dissipation_check(t, &est, &rc.params, d.tolerance))
        .collect();

    let mut report = String::new();
    header(&mut report, "dissipation", rc);
    let _ = writeln!(report, "method = two-phase (calibrate Gamma_hat on one ensemble, validate on a held-out ensemble)");
    let _ = writeln!(report, "gamma_hat = {}", fmt_f64(est.gamma_hat));
    let _ = writeln!(report, "Gamma_hat = {}", fmt_f64(est.big_gamma_hat));
    let _ = writeln!(report, "calibration_runs = {}", est.method.calibration_runs);
    let _ = writeln!(report, "late_fraction = {}", fmt_f64(est.method.late_fraction));
    let _ = writeln!(report, "safety_factor = {}", fmt_f64(est.method.safety_factor));
    let _ = writeln!(report, "late_chi_max = {}", fmt_f64(est.method.late_chi_max));
    let _ = writeln!(report, "horizon = {}", fmt_f64(d.dissipation_t_end));
    let _ = writeln!(report, "tolerance = {}", fmt_f64(d.tolerance));
    let _ = writeln!(report);
    let _ = writeln!(report, "run  chi0                     entry_time               max_chi/bound            status");
    let mut summary = CsvTable::new(["run", "chi0", "entry_time", "exit_time", "max_chi_over_bound", "passed"]);
    let mut artifacts = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        let _ = writeln!(
            report,
            "{i:<4} {:<24} {:<24} {:<24} {}",
            fmt_f64(r.chi0),
            fmt_opt(r.entry_time),
            fmt_f64(r.max_chi_over_bound),
            if r.passed { "PASS" } else { "FAIL" }
        );
        if let Some((t, chi, bound)) = r.first_violation {
            let _ = writeln!(report, "     first violation at t = {}: chi = {} > {}", fmt_f64(t), fmt_f64(chi), fmt_f64(bound));
        }
        if let Some(t) = r.exit_time {
            let _ = writeln!(report, "     left the absorbing set at t = {}", fmt_f64(t));
        }
        summary.push(vec![
            i as f64,
            r.chi0,
            r.entry_time.unwrap_or(f64::NAN),
            r.exit_time.unwrap_or(f64::NAN),
            r.max_chi_over_bound,
            if r.passed { 1.0 } else { 0.0 },
        ])?;
        if wants(rc, OutputFormat::Csv) {
            let mut t = CsvTable::new(["t", "chi", "bound", "margin"]);
            for row in &r.series {
                t.push(vec![row.t, row.chi, row.bound, row.margin])?;
            }
            artifacts.push(Artifact::csv(format!("dissipation_run_{i:03}.csv"), &t)?);
        }
    }
    let passed = reports.iter().all(|r| r.passed);
    let _ = writeln!(report, "\nstatus = {}", if passed { "PASS" } else { "FAIL" });
    if wants(rc, OutputFormat::Csv) {
        artifacts.insert(0, Artifact::csv("dissipation_summary.csv", &summary)?);
    }
    Ok(Outcome {
        passed,
        report,
        artifacts,
    })
}

/// Attraction of a random ensemble towards its own late-time tails.
pub fn attract(rc: &ResolvedConfig) -> Result<Outcome> {
    let d = &rc.source.diagnostics;
    let ops = rc.operators()?;
    let integ = Integrator::new(&ops, &rc.lift, rc.params, rc.solver)?;
    let spec = rc.source.initial.field_spec();
    let n = d.ensemble_size;
    // norms spread over [norm/4, 2·norm]
    let starts = (0..n)
        .map(|m| {
            let s = random_state(&ops, d.seed, m as u64, &spec)?;
            let w = if n > 1 { m as f64 / (n - 1) as f64 } else { 1.0 };
            scale_to_norm(&s, rc.source.initial.norm * (0.25 + 1.75 * w))
        })
        .collect::<Result<Vec<_>>>()?;
    let ensemble = integrate_all(&integ, &starts)?;
    let r = attraction_diagnostic(&ensemble, &d.shifts, d.delta, d.horizon, &ops, d.tolerance)?;
    let contracted = r.contraction <= 0.1;
    let passed = r.monotone && contracted;

    let mut report = String::new();
    header(&mut report, "attract", rc);
    let _ = writeln!(report, "delta = {}", fmt_f64(r.delta));
    let _ = writeln!(report, "horizon = {}", fmt_f64(r.horizon));
    let _ = writeln!(report, "ensemble_size = {n}");
    let _ = writeln!(report, "proxy_shift = {}", fmt_f64(r.proxy_shift));
    let _ = writeln!(report, "section_diameter = {}", fmt_f64(r.section_diameter));
    let _ = writeln!(report, "regularity_gap = {}", fmt_f64(r.regularity_gap));
    let _ = writeln!(report, "\nh                        A(h)");
    let mut table = CsvTable::new(["h", "A"]);
    for (h, a) in r.shifts.iter().zip(&r.values) {
        let _ = writeln!(report, "{:<24} {}", fmt_f64(*h), fmt_f64(*a));
        table.push(vec![*h, *a])?;
    }
    let _ = writeln!(report, "\nmonotone_within_tolerance = {}", r.monotone);
    let _ = writeln!(report, "contraction = {}", fmt_f64(r.contraction));
    let _ = writeln!(report, "status = {}", if passed { "PASS" } else { "FAIL" });
    let artifacts = if wants(rc, OutputFormat::Csv) {
        vec![Artifact::csv("attraction.csv", &table)?]
    } else {
        Vec::new()
    };
    Ok(Outcome {
        passed,
        report,
        artifacts,
    })
}

/// Error of one manufactured-solution run at its final time.
pub fn mms_error(
    grid: GridSpec,
    rc: &ResolvedConfig,
    scheme: Scheme,
    dt: f64,
    mode: ForcingMode,
) -> Result<f64> {
    let m = &rc.source.mms;
    let ops = DiscreteOperators::new(grid)?;
    let lift = BoundaryLift::new(&grid, &rc.source.model.boundary, &rc.params)?;
    let sol = m.solution();
    let forcing = ManufacturedForcing::new(sol, mode, &ops, &lift, rc.params);
    let steps = (m.t_end / dt).round().max(1.0);
    let cfg = SolverConfig::new(m.t_end / steps, m.t_end, scheme).with_stride(steps as usize);
    let integ = Integrator::new(&ops, &lift, rc.params, cfg)?;
    let traj = integ.integrate_forced(&sol.state(&grid, 0.0), &forcing)?;
    let last = traj.last().ok_or_else(|| Error::Trajectory("empty run".into()))?;
    let exact = sol.state(&grid, last.t);
    Ok(norm_l2(&last.v.sub(&exact.v)?).hypot(norm_l2(&last.tau.sub(&exact.tau)?)))
}

/// Observed orders `log(eᵢ/eᵢ₊₁)/log(hᵢ/hᵢ₊₁)`.
pub fn observed_orders(sizes: &[f64], errors: &[f64]) -> Vec<f64> {
    sizes
        .windows(2)
        .zip(errors.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

fn mms_grid(rc: &ResolvedConfig, n: usize) -> Result<GridSpec> {
    let l = rc.grid.lengths();
    if rc.grid.dimension() == 1 {
        GridSpec::interval(l[0], n)
    } else {
        GridSpec::rectangle(l[0], l[1], n, n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsStudy {
    pub spatial_h: Vec<f64>,
    pub spatial_errors: Vec<f64>,
    pub spatial_orders: Vec<f64>,
    /// `(scheme, errors, orders)` over `temporal_dts`.
    pub temporal: Vec<(Scheme, Vec<f64>, Vec<f64>)>,
}

impl MmsStudy {
    pub fn spatial_ok(&self) -> bool {
        self.spatial_orders.iter().all(|p| (p - 2.0).abs() <= 0.2)
    }

    pub fn temporal_ok(&self) -> bool {
        self.temporal.iter().all(|(s, _, orders)| {
            let need = if *s == Scheme::ImexEuler { 0.9 } else { 1.8 };
            orders.iter().all(|p| *p >= need)
        })
    }
}

/// Spatial refinement (Crank–Nicolson, analytic forcing, `dt ∝ h`) and
/// temporal refinement for both schemes (discrete-consistent forcing).
pub fn mms_study(rc: &ResolvedConfig) -> Result<MmsStudy> {
    let m = &rc.source.mms;
    let mut spatial_h = Vec::new();
    for &n in &m.spatial_counts {
        spatial_h.push(mms_grid(rc, n)?.min_spacing());
    }
    let spatial_errors = crate::par_map(&m.spatial_counts, |&n| {
        let g = mms_grid(rc, n)?;
        mms_error(g, rc, Scheme::ImexCn, m.spatial_dt_ratio * g.min_spacing(), ForcingMode::Analytic)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let g = mms_grid(rc, m.temporal_count)?;
    let mut temporal = Vec::new();
    for scheme in [Scheme::ImexEuler, Scheme::ImexCn] {
        let errors = crate::par_map(&m.temporal_dts, |&dt| mms_error(g, rc, scheme, dt, ForcingMode::DiscreteConsistent))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let orders = observed_orders(&m.temporal_dts, &errors);
        temporal.push((scheme, errors, orders));
    }
    Ok(MmsStudy {
        spatial_orders: observed_orders(&spatial_h, &spatial_errors),
        spatial_h,
        spatial_errors,
        temporal,
    })
}

pub fn mms(rc: &ResolvedConfig) -> Result<Outcome> {
    let m = &rc.source.mms;
    let study = mms_study(rc)?;
    let mut report = String::new();
    header(&mut report, "mms", rc);
    let _ = writeln!(report, "t_end = {}", fmt_f64(m.t_end));
    let _ = writeln!(report, "\n## spatial (imex-cn, analytic forcing, dt = {} h)", fmt_f64(m.spatial_dt_ratio));
    let _ = writeln!(report, "h                        error                    order");
    let mut artifacts = Vec::new();
    let mut t = CsvTable::new(["h", "error", "order"]);
    for (i, (h, e)) in study.spatial_h.iter().zip(&study.spatial_errors).enumerate() {
        let order = if i > 0 { study.spatial_orders[i - 1] } else { f64::NAN };
        let _ = writeln!(report, "{:<24} {:<24} {}", fmt_f64(*h), fmt_f64(*e), if i > 0 { fmt_f64(order) } else { "-".into() });
        t.push(vec![*h, *e, order])?;
    }
    artifacts.push(Artifact::csv("mms_spatial.csv", &t)?);
    for (scheme, errors, orders) in &study.temporal {
        let _ = writeln!(report, "\n## temporal ({}, discrete-consistent forcing, n = {})", scheme.name(), m.temporal_count);
        let _ = writeln!(report, "dt                       error                    order");
        let mut t = CsvTable::new(["dt", "error", "order"]);
        for (i, (dt, e)) in m.temporal_dts.iter().zip(errors).enumerate() {
            let order = if i > 0 { orders[i - 1] } else { f64::NAN };
            let _ = writeln!(report, "{:<24} {:<24} {}", fmt_f64(*dt), fmt_f64(*e), if i > 0 { fmt_f64(order) } else { "-".into() });
            t.push(vec![*dt, *e, order])?;
        }
        artifacts.push(Artifact::csv(format!("mms_temporal_{}.csv", scheme.name()), &t)?);
    }
    let passed = study.spatial_ok() && study.temporal_ok();
    let _ = writeln!(report, "\nspatial_order_in_[1.8,2.2] = {}", study.spatial_ok());
    let _ = writeln!(report, "temporal_orders_ok = {}", study.temporal_ok());
    let _ = writeln!(report, "status = {}", if passed { "PASS" } else { "FAIL" });
    if !wants(rc, OutputFormat::Csv) {
        artifacts.clear();
    }
    Ok(Outcome {
        passed,
        report,
        artifacts,
    })
}

/// Runs the identity and oracle suite.
pub fn verify(rc: &ResolvedConfig) -> Result<Outcome> {
    let results = checks::run_all(rc)?;
    let mut report = String::new();
    header(&mut report, "verify", rc);
    let mut table = CsvTable::new(["check", "passed"]);
    for (i, c) in results.iter().enumerate() {
        let _ = writeln!(report, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        table.push(vec![(i + 1) as f64, if c.passed { 1.0 } else { 0.0 }])?;
    }
    let passed = results.iter().all(|c| c.passed);
    let _ = writeln!(report, "status = {}", if passed { "PASS" } else { "FAIL" });
    let artifacts = if wants(rc, OutputFormat::Csv) {
        vec![Artifact::csv("verify.csv", &table)?]
    } else {
        Vec::new()
    };
    Ok(Outcome {
        passed,
        report,
        artifacts,
    })
}
