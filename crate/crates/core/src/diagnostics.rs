//! Long-time diagnostics: the energy functional χ, dissipation and
//! absorbing-set checks, continuous dependence, trajectory shifts and the
//! attraction functional in H^{-δ}.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{frechet_prenorm, hmdelta_weights, norm_l2, DiscreteOperators, FrechetPrenorm};
use crate::model::ModelParams;
use crate::solver::{GronwallConstant, Integrator, NormSample, State, TrajectoryRecord};

/// χ and its ingredients at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub chi: f64,
    pub v_l2: f64,
    pub v_hm1: f64,
    pub varpi_l2: f64,
    pub tau_h1: f64,
}

impl EnergyRecord {
    pub fn from_norms(t: f64, n: &NormSample, p: &ModelParams) -> Self {
        Self {
            t,
            chi: chi_from_components(n.v_hm1, n.v_l2, n.varpi_l2, p),
            v_l2: n.v_l2,
            v_hm1: n.v_hm1,
            varpi_l2: n.varpi_l2,
            tau_h1: n.tau_h1,
        }
    }

    /// χ recomputed from the stored component norms.
    pub fn reconstructed_chi(&self, p: &ModelParams) -> f64 {
        chi_from_components(self.v_hm1, self.v_l2, self.varpi_l2, p)
    }
}

/// `(μ/2)‖v‖²₋₁ + (νD/2)‖v‖² + (E/2)‖ϖ‖²`
pub fn chi_from_components(v_hm1: f64, v_l2: f64, varpi_l2: f64, p: &ModelParams) -> f64 {
    0.5 * p.mu * v_hm1 * v_hm1 + 0.5 * p.nu * p.diffusion * v_l2 * v_l2 + 0.5 * p.stress_diffusion * varpi_l2 * varpi_l2
}

pub fn chi(s: &State, ops: &DiscreteOperators, p: &ModelParams) -> Result<f64> {
    let n = NormSample::of(s, ops, p.nu)?;
    Ok(chi_from_components(n.v_hm1, n.v_l2, n.varpi_l2, p))
}

pub fn energy_series(traj: &TrajectoryRecord, p: &ModelParams) -> Vec<EnergyRecord> {
    traj.states()
        .iter()
        .zip(traj.norms())
        .map(|(s, n)| EnergyRecord::from_norms(s.t, n, p))
        .collect()
}

/// Certified decay rate γ̂ of χ.
///
/// For μ > 0: `min(μD/(μ/λ₁ + νD), β_G)`. For μ = 0 the H⁻¹ term drops
/// out of χ and `0.9·min(β_G, Dλ₁)` is used.
pub fn compute_gamma(ops: &DiscreteOperators, p: &ModelParams) -> Result<f64> {
    p.validate()?;
    let lambda1 = ops.lambda_min();
    if !(lambda1 > 0.0) || !lambda1.is_finite() {
        return Err(Error::Solver("first eigenvalue unavailable".into()));
    }
    let (mu, d, nu) = (p.mu, p.diffusion, p.nu);
    let g = if mu > 0.0 {
        (mu * d / (mu / lambda1 + nu * d)).min(p.beta_glass)
    } else {
        0.9 * p.beta_glass.min(d * lambda1)
    };
    Ok(g)
}

/// How Γ̂ was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationInfo {
    pub calibration_runs: usize,
    /// Samples with `t − t₀ ≥ late_fraction · span` count as late.
    pub late_fraction: f64,
    pub safety_factor: f64,
    pub late_chi_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationEstimate {
    pub gamma_hat: f64,
    #[serde(rename = "Gamma_hat")]
    pub big_gamma_hat: f64,
    pub method: CalibrationInfo,
}

pub const DEFAULT_LATE_FRACTION: f64 = 0.5;
pub const DEFAULT_SAFETY: f64 = 1.5;

/// Calibration phase: Γ̂ = safety × max late-time χ over `calibration`.
pub fn calibrate_dissipation(
    ops: &DiscreteOperators,
    p: &ModelParams,
    calibration: &[TrajectoryRecord],
    late_fraction: f64,
    safety: f64,
) -> Result<DissipationEstimate> {
    if calibration.is_empty() {
        return Err(Error::Trajectory("calibration ensemble is empty".into()));
    }
    if !(0.0..1.0).contains(&late_fraction) || !(safety >= 1.0) {
        return Err(Error::param("late_fraction", "need 0 ≤ late_fraction < 1 and safety ≥ 1"));
    }
    let mut late_max = 0.0f64;
    for traj in calibration {
        let t0 = traj.states().first().map_or(0.0, |s| s.t);
        let cut = late_fraction * traj.span();
        for e in energy_series(traj, p) {
            if e.t - t0 >= cut {
                late_max = late_max.max(e.chi);
            }
        }
    }
    Ok(DissipationEstimate {
        gamma_hat: compute_gamma(ops, p)?,
        big_gamma_hat: safety * late_max,
        method: CalibrationInfo {
            calibration_runs: calibration.len(),
            late_fraction,
            safety_factor: safety,
            late_chi_max: late_max,
        },
    })
}

/// One row of the dissipation CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipationRow {
    pub t: f64,
    pub chi: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationReport {
    pub passed: bool,
    pub chi0: f64,
    /// `(t, χ, bound)` at the first sample above the bound.
    pub first_violation: Option<(f64, f64, f64)>,
    /// First time with `χ ≤ 2Γ̂`.
    pub entry_time: Option<f64>,
    /// First later time with `χ > 2Γ̂(1 + tol)`.
    pub exit_time: Option<f64>,
    pub max_chi_over_bound: f64,
    pub series: Vec<DissipationRow>,
}

impl DissipationReport {
    pub fn absorbed(&self) -> bool {
        self.entry_time.is_some() && self.exit_time.is_none()
    }
}

/// Validation phase: `χ(t) ≤ e^{−γ̂(t−t₀)}χ(t₀) + Γ̂(1 + tol)` at every
/// sample, plus entry into and no exit from `{χ ≤ 2Γ̂}`.
pub fn dissipation_check(traj: &TrajectoryRecord, est: &DissipationEstimate, p: &ModelParams, tol: f64) -> DissipationReport {
    let energy = energy_series(traj, p);
    let t0 = energy.first().map_or(0.0, |e| e.t);
    let chi0 = energy.first().map_or(0.0, |e| e.chi);
    let level = 2.0 * est.big_gamma_hat;
    let mut report = DissipationReport {
        passed: true,
        chi0,
        first_violation: None,
        entry_time: None,
        exit_time: None,
        max_chi_over_bound: 0.0,
        series: Vec::with_capacity(energy.len()),
    };
    for e in &energy {
        let bound = (-est.gamma_hat * (e.t - t0)).exp() * chi0 + est.big_gamma_hat * (1.0 + tol);
        let ratio = if bound > 0.0 {
            e.chi / bound
        } else if e.chi > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        report.max_chi_over_bound = report.max_chi_over_bound.max(ratio);
        if !(e.chi <= bound) && report.first_violation.is_none() {
            report.first_violation = Some((e.t, e.chi, bound));
        }
        match report.entry_time {
            None if e.chi <= level => report.entry_time = Some(e.t),
            Some(_) if report.exit_time.is_none() && !(e.chi <= level * (1.0 + tol)) => report.exit_time = Some(e.t),
            _ => {}
        }
        report.series.push(DissipationRow {
            t: e.t,
            chi: e.chi,
            bound,
            margin: bound - e.chi,
        });
    }
    report.passed = report.first_violation.is_none() && report.absorbed();
    report
}

/// `sqrt(‖a.v − b.v‖² + ‖a.τ − b.τ‖²)`
pub fn state_distance_vtau(a: &State, b: &State) -> Result<f64> {
    let dv = norm_l2(&a.v.sub(&b.v)?);
    let dt = norm_l2(&a.tau.sub(&b.tau)?);
    Ok(dv.hypot(dt))
}

/// `sqrt(‖a.v − b.v‖² + ‖a.ϖ − b.ϖ‖²)`
pub fn state_distance_vvarpi(a: &State, b: &State, nu: f64) -> Result<f64> {
    let dv = norm_l2(&a.v.sub(&b.v)?);
    let dw = norm_l2(&a.varpi(nu).sub(&b.varpi(nu))?);
    Ok(dv.hypot(dw))
}

/// Operator norm of `(v, ϖ) ↦ (v, ϖ − νv)` (and of its inverse).
pub fn tau_varpi_norm(nu: f64) -> f64 {
    0.5 * (nu.abs() + (nu * nu + 4.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityRow {
    pub member: usize,
    pub ic_distance: f64,
    /// `sup_t d(t) / d(0)`
    pub amplification: f64,
    /// `sup_t d(t) / bound(t)`
    pub bound_usage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub passed: bool,
    pub horizon: f64,
    /// `e^{ĈT}` times the norm-equivalence constants.
    pub lipschitz_bound: f64,
    pub empirical_modulus: f64,
    pub rows: Vec<ContinuityRow>,
}

/// Integrates `base` and each `base + perturbation` and checks
/// `‖S(t)a − S(t)b‖ ≤ slack · K e^{Ĉt} ‖a − b‖` in the `(v, τ)` metric,
/// where `K` includes the equivalence with the `(v, ϖ)` metric in which Ĉ
/// is derived. Perturbations are rescaled to length `radius`.
pub fn semiflow_continuity_check(
    integrator: &Integrator<'_>,
    base: &State,
    perturbations: &[State],
    radius: f64,
    constant: &GronwallConstant,
    slack: f64,
) -> Result<ContinuityReport> {
    if !(radius >= 0.0) {
        return Err(Error::param("radius", "must be nonnegative"));
    }
    let nu = integrator.params().nu;
    let k = constant.prefactor * tau_varpi_norm(nu).powi(2);
    let reference = integrator.integrate(base)?;
    let horizon = reference.span();
    let mut rows = Vec::with_capacity(perturbations.len());
    let mut passed = true;
    for (member, dir) in perturbations.iter().enumerate() {
        let len = norm_l2(&dir.v).hypot(norm_l2(&dir.tau));
        let scale = if len > 0.0 { radius / len } else { 0.0 };
        let start = State::new(
            base.t,
            base.v.lin_comb(1.0, &dir.v, scale)?,
            base.tau.lin_comb(1.0, &dir.tau, scale)?,
        )?;
        let ic_distance = state_distance_vtau(base, &start)?;
        let other = integrator.integrate(&start)?;
        let (mut amp, mut usage) = (0.0f64, 0.0f64);
        for (a, b) in reference.states().iter().zip(other.states()) {
            let d = state_distance_vtau(a, b)?;
            let bound = slack * k * ic_distance * (constant.rate * (a.t - base.t)).exp();
            if ic_distance > 0.0 {
                amp = amp.max(d / ic_distance);
                usage = usage.max(d / bound);
            } else if d > 0.0 {
                amp = f64::INFINITY;
                usage = f64::INFINITY;
            }
        }
        passed &= usage <= 1.0;
        rows.push(ContinuityRow {
            member,
            ic_distance,
            amplification: amp,
            bound_usage: usage,
        });
    }
    Ok(ContinuityReport {
        passed,
        horizon,
        lipschitz_bound: slack * k * (constant.rate * horizon).exp(),
        empirical_modulus: rows.iter().map(|r| r.amplification).fold(0.0, f64::max),
        rows,
    })
}

fn samples_for(dt_sample: f64, h: f64, what: &str) -> Result<usize> {
    let k = h / dt_sample;
    let r = k.round();
    if !(h >= 0.0) || (k - r).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::Trajectory(format!(
            "{what} {h} is not a multiple of the sample spacing {dt_sample}"
        )));
    }
    Ok(r as usize)
}

/// `T(h)`: drops the first `h/Δt_sample` samples and relabels the rest with
/// the original leading sample times, so `T(0)` is the identity and
/// `T(a)∘T(b) = T(a+b)` hold exactly.
pub fn shift_trajectory(traj: &TrajectoryRecord, h: f64) -> Result<TrajectoryRecord> {
    let k = samples_for(traj.sample_dt(), h, "shift")?;
    if k >= traj.len() {
        return Err(Error::Shift(h));
    }
    let states = traj.states();
    let shifted = states[k..]
        .iter()
        .zip(states)
        .map(|(s, label)| State {
            t: label.t,
            v: s.v.clone(),
            tau: s.tau.clone(),
        })
        .collect();
    TrajectoryRecord::new(traj.sample_dt(), shifted, traj.norms()[k..].to_vec())
}

/// Per-sample H^{-δ}-weighted spectral coordinates of `(v, τ)`, so that
/// product distances are plain Euclidean distances.
#[derive(Debug, Clone)]
pub struct SpectralTrajectory {
    coords: Vec<Vec<f64>>,
    l2_norms: Vec<f64>,
}

impl SpectralTrajectory {
    pub fn new(traj: &TrajectoryRecord, ops: &DiscreteOperators, delta: f64) -> Result<Self> {
        let w: Vec<f64> = hmdelta_weights(ops, delta)?.iter().map(|w| w.sqrt()).collect();
        let mut coords = Vec::with_capacity(traj.len());
        let mut l2_norms = Vec::with_capacity(traj.len());
        for s in traj.states() {
            let cv = ops.spectral_coefficients(&s.v)?;
            let ct = ops.spectral_coefficients(&s.tau)?;
            let mut c = Vec::with_capacity(2 * w.len());
            c.extend(cv.iter().zip(&w).map(|(c, w)| c * w));
            c.extend(ct.iter().zip(&w).map(|(c, w)| c * w));
            coords.push(c);
            l2_norms.push(norm_l2(&s.v).hypot(norm_l2(&s.tau)));
        }
        Ok(Self {
            coords,
            l2_norms,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// max over `j ≤ m` of the distance between samples `a_off + j` and `b_off + j`.
    fn window_distance(&self, a_off: usize, other: &Self, b_off: usize, m: usize) -> f64 {
        (0..=m)
            .map(|j| {
                let (x, y) = (&self.coords[a_off + j], &other.coords[b_off + j]);
                x.iter().zip(y).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
            })
            .fold(0.0, f64::max)
            .sqrt()
    }
}

fn check_strides(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
        return Err(Error::Trajectory(format!("sample spacings differ: {a} vs {b}")));
    }
    Ok(())
}

/// `max_{t ∈ [0, M]} (‖Δv(t)‖²_{-δ} + ‖Δτ(t)‖²_{-δ})^{1/2}`
pub fn traj_distance(a: &TrajectoryRecord, b: &TrajectoryRecord, delta: f64, horizon: f64, ops: &DiscreteOperators) -> Result<f64> {
    check_strides(a.sample_dt(), b.sample_dt())?;
    if a.states().first().map(|s| s.grid()) != b.states().first().map(|s| s.grid()) {
        return Err(Error::GridMismatch);
    }
    let m = samples_for(a.sample_dt(), horizon, "horizon")?;
    if m >= a.len() || m >= b.len() {
        return Err(Error::Trajectory(format!("trajectories shorter than the horizon {horizon}")));
    }
    let sa = SpectralTrajectory::new(a, ops, delta)?;
    let sb = SpectralTrajectory::new(b, ops, delta)?;
    Ok(sa.window_distance(0, &sb, 0, m))
}

/// Fréchet pre-norm of a trajectory in `C([0, ∞); H^{-δ} × H^{-δ})`, with
/// `a_i` the sup over samples in `[t₀, t₀ + i]` for `i = 1, …, ⌊span⌋`.
pub fn trajectory_prenorm(traj: &TrajectoryRecord, ops: &DiscreteOperators, delta: f64) -> Result<FrechetPrenorm> {
    let spec = SpectralTrajectory::new(traj, ops, delta)?;
    let t0 = traj.states().first().map_or(0.0, |s| s.t);
    let units = traj.span().floor() as usize;
    let mut sups = vec![0.0f64; units];
    for (s, c) in traj.states().iter().zip(&spec.coords) {
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        let first = ((s.t - t0).ceil() as usize).max(1);
        for a in sups.iter_mut().skip(first - 1) {
            *a = a.max(norm);
        }
    }
    frechet_prenorm(&sups)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractionReport {
    pub delta: f64,
    pub horizon: f64,
    pub shifts: Vec<f64>,
    /// A(h) for each shift.
    pub values: Vec<f64>,
    /// Shift at which the proxy bundle starts.
    pub proxy_shift: f64,
    /// E₀-diameter of the section proxy {y(0) | y in the bundle}.
    pub section_diameter: f64,
    /// max over the section proxy of `‖y‖_{L₂} / ‖y‖_{-δ}` (0 for zero elements).
    pub regularity_gap: f64,
    /// A(hᵢ₊₁) ≤ (1 + tol)·A(hᵢ) for consecutive shifts.
    pub monotone: bool,
    /// A(h_last) / A(h_first), 0 when both vanish.
    pub contraction: f64,
}

/// Empirical attraction of an ensemble towards its own late-time tails.
///
/// The proxy bundle consists of each member's tail starting at the largest
/// sample-aligned shift that still leaves a window of length `horizon`.
/// `A(h) = max_i min_j d(T(h)uᵢ, proxy_j)` over `[0, horizon]`.
pub fn attraction_diagnostic(
    ensemble: &[TrajectoryRecord],
    shifts: &[f64],
    delta: f64,
    horizon: f64,
    ops: &DiscreteOperators,
    tol: f64,
) -> Result<AttractionReport> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::Trajectory("empty ensemble".into()))?;
    let dt = first.sample_dt();
    for t in ensemble {
        check_strides(dt, t.sample_dt())?;
    }
    let m = samples_for(dt, horizon, "horizon")?;
    let len = ensemble.iter().map(|t| t.len()).min().unwrap_or(0);
    let shift_idx = shifts
        .iter()
        .map(|&h| samples_for(dt, h, "shift"))
        .collect::<Result<Vec<_>>>()?;
    let max_shift = shift_idx.iter().copied().max().unwrap_or(0);
    if len == 0 || max_shift + m >= len {
        return Err(Error::Trajectory(format!(
            "trajectories of {len} samples cannot hold shift {} plus horizon {horizon}",
            max_shift as f64 * dt
        )));
    }
    let proxy = len - 1 - m;
    let spectral = crate::par_map(ensemble, |t| SpectralTrajectory::new(t, ops, delta))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let values: Vec<f64> = shift_idx
        .iter()
        .map(|&k| {
            spectral
                .iter()
                .map(|a| {
                    spectral
                        .iter()
                        .map(|b| a.window_distance(k, b, proxy, m))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        })
        .collect();

    let mut diameter = 0.0f64;
    let mut gap = 0.0f64;
    for (i, a) in spectral.iter().enumerate() {
        for b in &spectral[i + 1..] {
            diameter = diameter.max(a.window_distance(proxy, b, proxy, 0));
        }
        let e0 = a.coords[proxy].iter().map(|c| c * c).sum::<f64>().sqrt();
        if e0 > 0.0 {
            gap = gap.max(a.l2_norms[proxy] / e0);
        }
    }

    let monotone = values.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol) + 1e-14);
    let (a0, alast) = (values[0], *values.last().unwrap());
    let contraction = if a0 > 0.0 {
        alast / a0
    } else if alast > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(AttractionReport {
        delta,
        horizon,
        shifts: shifts.to_vec(),
        values,
        proxy_shift: proxy as f64 * dt,
        section_diameter: diameter,
        regularity_gap: gap,
        monotone,
        contraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressBoundReport {
    /// False when max|u| > 1 somewhere; the bound is then not asserted.
    pub premise_holds: bool,
    pub max_abs_u: f64,
    /// min over samples and nodes of `bound − |ς|`.
    pub min_slack: f64,
    pub passed: bool,
}

/// Checks `|ς(t)| ≤ e^{−β_G t}|ς(0)| + (μ + νβ_R)/β_G` with `ς = σ − νu`
/// at every node of a physical trajectory.
pub fn stress_bound_check(
    u: &[crate::grid::DiscreteField],
    sigma: &[crate::grid::DiscreteField],
    times: &[f64],
    p: &ModelParams,
    tol: f64,
) -> Result<StressBoundReport> {
    if u.len() != sigma.len() || u.len() != times.len() || u.is_empty() {
        return Err(Error::Trajectory("inconsistent physical trajectory".into()));
    }
    let max_abs_u = u.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
    let vs0: Vec<f64> = u[0]
        .values()
        .iter()
        .zip(sigma[0].values())
        .map(|(u, s)| s - p.nu * u)
        .collect();
    let mut min_slack = f64::INFINITY;
    for ((uf, sf), &t) in u.iter().zip(sigma).zip(times) {
        for ((u, s), v0) in uf.values().iter().zip(sf.values()).zip(&vs0) {
            let vs = s - p.nu * u;
            let bound = crate::oracle::stress_bound(*v0, t - times[0], p);
            min_slack = min_slack.min(bound - vs.abs());
        }
    }
    let premise_holds = max_abs_u <= 1.0;
    Ok(StressBoundReport {
        premise_holds,
        max_abs_u,
        min_slack,
        passed: !premise_holds || min_slack >= -tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DiscreteField, GridSpec};
    use crate::model::BoundaryLift;
    use crate::solver::{Scheme, SolverConfig};

    fn ops(n: usize) -> DiscreteOperators {
        DiscreteOperators::new(GridSpec::interval(1.0, n).unwrap()).unwrap()
    }

    fn record(ops: &DiscreteOperators, values: &[f64]) -> TrajectoryRecord {
        let g = *ops.grid();
        let states = values
            .iter()
            .enumerate()
            .map(|(k, &a)| State {
                t: k as f64 * 0.5,
                v: DiscreteField::from_vec(g, vec![a; g.len()]),
                tau: DiscreteField::from_vec(g, vec![-a; g.len()]),
            })
            .collect();
        TrajectoryRecord::from_states(0.5, states, ops, 1.0).unwrap()
    }

    #[test]
    fn gamma_examples() {
        let o = ops(64);
        let p = ModelParams {
            mu: 1.0,
            ..ModelParams::default()
        };
        let l1 = o.lambda_min();
        let g = compute_gamma(&o, &p).unwrap();
        assert_eq!(g, (1.0 / (1.0 / l1 + 1.0)).min(0.5));
        let p = ModelParams {
            beta_glass: 1e9,
            beta_rubber: 2e9,
            beta_inf: 1e9,
            ..p
        };
        assert_eq!(compute_gamma(&o, &p).unwrap(), 1.0 / (1.0 / l1 + 1.0));
        let p = ModelParams {
            mu: 0.0,
            ..ModelParams::default()
        };
        assert_eq!(compute_gamma(&o, &p).unwrap(), 0.9 * 0.5);
    }

    #[test]
    fn chi_reconstructs_from_components() {
        let o = ops(16);
        let p = ModelParams::default();
        let tr = record(&o, &[1.0, 0.3, -2.0]);
        for e in energy_series(&tr, &p) {
            assert_eq!(e.chi, e.reconstructed_chi(&p));
            assert!(e.chi >= 0.0);
        }
    }

    #[test]
    fn zero_trajectory_passes_dissipation() {
        let o = ops(8);
        let p = ModelParams::default();
        let tr = record(&o, &[0.0; 5]);
        let est = DissipationEstimate {
            gamma_hat: 0.4,
            big_gamma_hat: 0.0,
            method: CalibrationInfo {
                calibration_runs: 1,
                late_fraction: 0.5,
                safety_factor: 1.5,
                late_chi_max: 0.0,
            },
        };
        let r = dissipation_check(&tr, &est, &p, 0.05);
        assert!(r.passed);
        assert_eq!(r.entry_time, Some(0.0));
        assert!(r.series.iter().all(|row| row.chi == 0.0));
    }

    #[test]
    fn exit_from_absorbing_set_fails() {
        let o = ops(8);
        let p = ModelParams::default();
        let tr = record(&o, &[1.0, 0.1, 0.1, 1.0]);
        let est = calibrate_dissipation(&o, &p, &[record(&o, &[0.1, 0.1])], 0.5, 1.5).unwrap();
        let r = dissipation_check(&tr, &est, &p, 0.05);
        assert!(r.entry_time.is_some() && r.exit_time.is_some());
        assert!(!r.passed);
    }

    #[test]
    fn shifts_compose() {
        let o = ops(8);
        let tr = record(&o, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(shift_trajectory(&tr, 0.0).unwrap(), tr);
        let ab = shift_trajectory(&shift_trajectory(&tr, 0.5).unwrap(), 1.0).unwrap();
        assert_eq!(ab, shift_trajectory(&tr, 1.5).unwrap());
        assert_eq!(ab.states()[0].v.values()[0], 3.0);
        assert_eq!(ab.states()[0].t, 0.0);
        assert!(shift_trajectory(&tr, 0.3).is_err());
        assert!(shift_trajectory(&tr, 3.0).is_err());
    }

    #[test]
    fn distance_of_single_mode() {
        let o = ops(32);
        let g = *o.grid();
        let k = 2;
        let c = 0.7;
        let e = o.eigenfield(k);
        let mk = |scale: f64| {
            let states = (0..3)
                .map(|j| State {
                    t: j as f64,
                    v: e.scaled(scale),
                    tau: DiscreteField::zeros(g),
                })
                .collect();
            TrajectoryRecord::from_states(1.0, states, &o, 1.0).unwrap()
        };
        let (a, b) = (mk(c), mk(0.0));
        for delta in [0.5, 1.0] {
            let d = traj_distance(&a, &b, delta, 2.0, &o).unwrap();
            let expected = c * o.eigenvalue(k).powf(-delta / 2.0);
            assert!((d - expected).abs() < 1e-12 * expected);
            assert_eq!(d, traj_distance(&b, &a, delta, 2.0, &o).unwrap());
        }
        assert_eq!(traj_distance(&a, &a, 0.5, 2.0, &o).unwrap(), 0.0);
    }

    #[test]
    fn attraction_of_single_trajectory_vanishes_at_proxy() {
        let o = ops(8);
        let tr = record(&o, &[5.0, 4.0, 3.0, 2.0, 1.0, 1.0]);
        let r = attraction_diagnostic(&[tr], &[0.0, 1.0, 1.5], 0.5, 1.0, &o, 0.05).unwrap();
        assert_eq!(r.proxy_shift, 1.5);
        assert_eq!(*r.values.last().unwrap(), 0.0);
        assert!(r.monotone);
        assert!(r.values[0] > r.values[1]);
    }

    #[test]
    fn prenorm_uses_unit_interval_sups() {
        let o = ops(8);
        // samples every 0.5: unit intervals [0,1], [0,2] see sups 2 and 3
        let tr = record(&o, &[1.0, 2.0, 1.0, 3.0, 0.5]);
        let p = trajectory_prenorm(&tr, &o, 1.0).unwrap();
        let n = |a: f64| {
            let e = o.eigenvalues();
            let c = o.spectral_coefficients(&DiscreteField::from_vec(*o.grid(), vec![a; 8])).unwrap();
            (2.0 * c.iter().zip(&e).map(|(c, l)| c * c / l).sum::<f64>()).sqrt()
        };
        let (a1, a2) = (n(2.0), n(3.0));
        let expected = 0.5 * a1 / (1.0 + a1) + 0.25 * a2 / (1.0 + a2);
        assert!((p.value - expected).abs() < 1e-14);
        assert_eq!(p.tail_bound, 0.25);
    }

    #[test]
    fn attraction_needs_enough_samples() {
        let o = ops(8);
        let tr = record(&o, &[1.0, 1.0, 1.0]);
        assert!(attraction_diagnostic(&[tr], &[0.0, 1.0], 0.5, 1.0, &o, 0.05).is_err());
    }

    #[test]
    fn continuity_with_zero_radius() {
        let o = ops(16);
        let p = ModelParams::default().with_cutoff(20.0);
        let lift = BoundaryLift::homogeneous(o.grid());
        let int = Integrator::new(&o, &lift, p, SolverConfig::new(0.05, 0.5, Scheme::ImexCn)).unwrap();
        let base = State::zero(*o.grid());
        let dir = State {
            t: 0.0,
            v: o.eigenfield(0),
            tau: o.eigenfield(1),
        };
        let c = crate::solver::gronwall_constant(&o, &p).unwrap();
        let r = semiflow_continuity_check(&int, &base, std::slice::from_ref(&dir), 0.0, &c, 1.1).unwrap();
        assert_eq!(r.rows[0].amplification, 0.0);
        let r = semiflow_continuity_check(&int, &base, &[dir], 1e-3, &c, 1.1).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn stress_bound_premise() {
        let g = GridSpec::interval(1.0, 4).unwrap();
        let p = ModelParams::default();
        let u = vec![DiscreteField::from_vec(g, vec![2.0; 4])];
        let s = vec![DiscreteField::zeros(g)];
        let r = stress_bound_check(&u, &s, &[0.0], &p, 1e-8).unwrap();
        assert!(!r.premise_holds && r.passed);
    }
}
