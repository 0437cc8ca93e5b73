//! Self-checks run by `polydiff verify`.

use rand_distr::{Distribution, StandardNormal};

use crate::config::ResolvedConfig;
use crate::diagnostics::{shift_trajectory, state_distance_vvarpi, trajectory_prenorm};
use crate::error::Result;
use crate::experiments;
use crate::grid::{inner_hm1, inner_l2, norm_h1, norm_hm1, norm_hmdelta, norm_l2, DiscreteField, DiscreteOperators, GridSpec};
use crate::ic::{member_rng, random_state, scale_to_norm, RandomFieldSpec};
use crate::model::{BoundaryLift, BoundaryPreset};
use crate::oracle::{stress_asymptotic_level, stress_bound, StressOdeProblem};
use crate::solver::{gronwall_constant, recover_u_sigma, Integrator, Scheme, SolverConfig, State};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn sci(xs: &[f64]) -> String {
    format!("[{}]", xs.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", "))
}

fn fixed(xs: &[f64]) -> String {
    format!("[{}]", xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", "))
}

fn white_noise(grid: GridSpec, seed: u64, member: u64) -> DiscreteField {
    let mut rng = member_rng(seed, member);
    let values = (0..grid.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    DiscreteField::from_vec(grid, values)
}

/// Duality, Friedrichs and H^{-δ}/H⁻¹ consistency on `grid`.
pub fn calculus_identities(grid: GridSpec, seed: u64) -> Result<CheckResult> {
    let ops = DiscreteOperators::new(grid)?;
    let mut worst_duality = 0.0f64;
    for k in 0..100 {
        let u = white_noise(grid, seed, 2 * k);
        let v = white_noise(grid, seed, 2 * k + 1);
        let lv = ops.apply(&v)?;
        let lhs = (inner_hm1(&u, &lv, &ops)? + inner_l2(&u, &v)?).abs();
        worst_duality = worst_duality.max(lhs / (norm_l2(&u) * norm_l2(&v)));
    }
    let k_friedrichs = ops.friedrichs_constant();
    let mut friedrichs_ok = true;
    for k in 0..1000 {
        let f = white_noise(grid, seed ^ 0xF00D, k);
        friedrichs_ok &= norm_l2(&f) <= k_friedrichs * norm_h1(&f, &ops)? * (1.0 + 1e-12);
    }
    let e1 = ops.eigenfield(0);
    let equality_gap = (norm_l2(&e1) - k_friedrichs * norm_h1(&e1, &ops)?).abs();
    let mut worst_hm = 0.0f64;
    for k in 0..20 {
        let f = white_noise(grid, seed ^ 0xBEEF, k);
        let a = norm_hmdelta(&f, &ops, 1.0)?;
        let b = norm_hm1(&f, &ops)?;
        worst_hm = worst_hm.max((a - b).abs() / b);
    }
    let passed = worst_duality <= 1e-8 && friedrichs_ok && equality_gap <= 1e-8 && worst_hm <= 1e-8;
    Ok(result(
        "calculus identities",
        passed,
        format!(
            "{}: duality {worst_duality:.2e}, Friedrichs {}, e1 gap {equality_gap:.2e}, H^-1 vs spectral {worst_hm:.2e}",
            grid.signature(),
            if friedrichs_ok { "holds" } else { "violated" }
        ),
    ))
}

/// ‖sin(πx)‖₋₁ on (0, 1) against 1/(π√2) under mesh halving.
pub fn analytic_norm_values() -> Result<CheckResult> {
    let exact = 1.0 / (std::f64::consts::PI * 2f64.sqrt());
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for n in [63, 127, 255] {
        let g = GridSpec::interval(1.0, n)?;
        let ops = DiscreteOperators::new(g)?;
        let f = g.sample(|[x, _]| (std::f64::consts::PI * x).sin());
        hs.push(g.spacing(0));
        errs.push((norm_hm1(&f, &ops)? - exact).abs());
    }
    let orders = experiments::observed_orders(&hs, &errs);
    let passed = orders.iter().all(|p| (p - 2.0).abs() <= 0.2);
    Ok(result(
        "analytic H^-1 norm",
        passed,
        format!("errors {}, observed orders {}", sci(&errs), fixed(&orders)),
    ))
}

pub fn manufactured_convergence(rc: &ResolvedConfig) -> Result<CheckResult> {
    let s = experiments::mms_study(rc)?;
    let temporal: Vec<String> = s
        .temporal
        .iter()
        .map(|(sch, _, o)| format!("{} {}", sch.name(), fixed(o)))
        .collect();
    Ok(result(
        "manufactured-solution convergence",
        s.spatial_ok() && s.temporal_ok(),
        format!("spatial orders {}; temporal {}", fixed(&s.spatial_orders), temporal.join(", ")),
    ))
}

/// `u(t) = Σ aₖ sin(ωₖt + θₖ)` with `Σ|aₖ| ≤ 1`.
#[derive(Debug, Clone, Copy)]
pub struct BoundedPath {
    amp: [f64; 4],
    freq: [f64; 4],
    phase: [f64; 4],
}

impl BoundedPath {
    pub fn random(seed: u64, member: u64) -> Self {
        use rand::Rng;
        let mut rng = member_rng(seed, member);
        let mut amp = [0.0f64; 4];
        let mut freq = [0.0; 4];
        let mut phase = [0.0; 4];
        for k in 0..4 {
            amp[k] = rng.random_range(-1.0..1.0);
            freq[k] = rng.random_range(0.0..3.0);
            phase[k] = rng.random_range(0.0..std::f64::consts::TAU);
        }
        let total: f64 = amp.iter().map(|a| a.abs()).sum();
        let scale = rng.random_range(0.2..1.0) / total.max(1e-300);
        amp.iter_mut().for_each(|a| *a *= scale);
        Self { amp, freq, phase }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (0..4).map(|k| self.amp[k] * (self.freq[k] * t + self.phase[k]).sin()).sum()
    }
}

/// Frozen-concentration solver stress against the closed form, and the
/// pointwise bound on random bounded paths.
pub fn stress_oracle(rc: &ResolvedConfig) -> Result<CheckResult> {
    let p = rc.params;
    let seed = rc.source.diagnostics.seed;
    // (a) convergence of the frozen-u solver stress
    let l = rc.grid.lengths();
    let g = if rc.grid.dimension() == 1 {
        GridSpec::interval(l[0], 16)?
    } else {
        GridSpec::rectangle(l[0], l[1], 4, 4)?
    };
    let ops = DiscreteOperators::new(g)?;
    let lift = BoundaryLift::new(&g, &rc.source.model.boundary, &p)?;
    let s0 = scale_to_norm(&random_state(&ops, seed, 7, &RandomFieldSpec::default())?, 1.0)?;
    let t_end = 2.0;
    let varsigma = |s: &State| -> Vec<f64> {
        let (phi, varphi) = (lift.phi().values(), lift.varphi().values());
        (0..g.len())
            .map(|k| s.tau.values()[k] + varphi[k] - p.nu * phi[k])
            .collect()
    };
    let vs0 = varsigma(&s0);
    let reference = (0..g.len())
        .map(|k| {
            let u = s0.v.values()[k] + lift.phi().values()[k];
            StressOdeProblem::new(move |_| u, vs0[k], p).solve_at(&[t_end]).map(|v| v[0])
        })
        .collect::<Result<Vec<_>>>()?;
    let dts = [0.1, 0.05, 0.025, 0.0125];
    let mut errs = Vec::new();
    for dt in dts {
        let mut cfg = SolverConfig::new(dt, t_end, Scheme::ImexCn);
        cfg.sample_stride = cfg.num_steps();
        cfg.frozen_concentration = true;
        let traj = Integrator::new(&ops, &lift, p, cfg)?.integrate(&s0)?;
        let end = varsigma(traj.last().unwrap());
        errs.push(end.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let orders = experiments::observed_orders(&dts, &errs);
    let converges = orders.iter().all(|o| *o >= 1.8);

    // (b) the pointwise bound on random bounded paths
    let horizon = 10.0 / p.beta_glass;
    let times: Vec<f64> = (0..=80).map(|k| horizon * k as f64 / 80.0).collect();
    let level = stress_asymptotic_level(&p);
    let paths: Vec<u64> = (0..100).collect();
    let outcomes = crate::par_map(&paths, |&m| -> Result<(f64, f64)> {
        let path = BoundedPath::random(seed ^ 0x5EED, m);
        let mut rng = member_rng(seed ^ 0xABCD, m);
        let v0 = 5.0 * level * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        let vals = StressOdeProblem::new(|t| path.eval(t), v0, p).solve_at(&times)?;
        let slack = times
            .iter()
            .zip(&vals)
            .map(|(t, v)| stress_bound(v0, *t, &p) - v.abs())
            .fold(f64::INFINITY, f64::min);
        Ok((slack, vals.last().unwrap().abs()))
    });
    let mut min_slack = f64::INFINITY;
    let mut worst_final = 0.0f64;
    for o in outcomes {
        let (s, f) = o?;
        min_slack = min_slack.min(s);
        worst_final = worst_final.max(f);
    }
    let bounded = min_slack >= -1e-8 && worst_final <= level + 0.01;
    Ok(result(
        "stress oracle",
        converges && bounded,
        format!(
            "frozen-u errors {} orders {}; bound slack min {min_slack:.3e}; max |varsigma| at t = {horizon} is {worst_final:.6} (level {level:.6})",
            sci(&errs),
            fixed(&orders)
        ),
    ))
}

pub fn dissipation(rc: &ResolvedConfig) -> Result<CheckResult> {
    let o = experiments::dissipation(rc)?;
    let line = o
        .report
        .lines()
        .filter(|l| l.starts_with("gamma_hat") || l.starts_with("Gamma_hat"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(result("dissipation", o.passed, line))
}

/// Bit-identical paired runs and the Gronwall growth bound.
pub fn continuous_dependence(rc: &ResolvedConfig) -> Result<CheckResult> {
    let p = rc.params;
    let seed = rc.source.diagnostics.seed;
    let ops = rc.operators()?;
    let cfg = SolverConfig {
        t_end: 5.0,
        ..rc.solver
    };
    let integ = Integrator::new(&ops, &rc.lift, p, cfg)?;
    let spec = rc.source.initial.field_spec();
    let base = scale_to_norm(&random_state(&ops, seed, 0, &spec)?, rc.source.initial.norm)?;
    let a = integ.integrate(&base)?;
    let b = integ.integrate(&base)?;
    let identical = a == b;
    let c = gronwall_constant(&ops, &p)?;
    let mut worst = 0.0f64;
    for (i, eps) in [1e-3, 1e-6].into_iter().enumerate() {
        let dir = random_state(&ops, seed, 100 + i as u64, &spec)?;
        let len = state_distance_vvarpi(&dir, &State::zero(rc.grid), p.nu)?;
        let k = eps / len;
        let start = State::new(0.0, base.v.lin_comb(1.0, &dir.v, k)?, base.tau.lin_comb(1.0, &dir.tau, k)?)?;
        let eps0 = state_distance_vvarpi(&base, &start, p.nu)?;
        let other = integ.integrate(&start)?;
        for (x, y) in a.states().iter().zip(other.states()) {
            let d = state_distance_vvarpi(x, y, p.nu)?;
            worst = worst.max(d / (1.1 * eps0 * (c.rate * x.t).exp()));
        }
    }
    Ok(result(
        "uniqueness and continuous dependence",
        identical && worst <= 1.0,
        format!(
            "paired runs identical: {identical}; max distance/(1.1 eps e^(Ct)) = {worst:.3e} with C = {:.4}, prefactor {:.4}",
            c.rate, c.prefactor
        ),
    ))
}

/// Shift semigroup and the restart property of the integrator.
pub fn semigroup_laws(rc: &ResolvedConfig) -> Result<CheckResult> {
    let ops = rc.operators()?;
    let spec = rc.source.initial.field_spec();
    let s0 = scale_to_norm(&random_state(&ops, rc.source.diagnostics.seed, 3, &spec)?, 1.0)?;
    let dt = rc.solver.dt;
    let stride = rc.solver.sample_stride;
    let sample = dt * stride as f64;
    let cfg = SolverConfig {
        t_end: 40.0 * sample,
        ..rc.solver
    };
    let integ = Integrator::new(&ops, &rc.lift, rc.params, cfg)?;
    let traj = integ.integrate(&s0)?;
    let identity = shift_trajectory(&traj, 0.0)? == traj;
    let mut composes = true;
    for (a, b) in [(1usize, 2usize), (5, 7), (0, 11), (13, 0)] {
        let (ha, hb) = (a as f64 * sample, b as f64 * sample);
        let lhs = shift_trajectory(&shift_trajectory(&traj, hb)?, ha)?;
        let rhs = shift_trajectory(&traj, (a + b) as f64 * sample)?;
        composes &= lhs == rhs;
    }
    // S(t)∘S(s) = S(t+s): restart from an intermediate sample
    let mid = &traj.states()[15];
    let first = SolverConfig {
        t_end: 25.0 * sample,
        ..rc.solver
    };
    let cont = Integrator::new(&ops, &rc.lift, rc.params, first)?.integrate(mid)?;
    let restart = cont
        .states()
        .iter()
        .zip(&traj.states()[15..])
        .all(|(x, y)| x.v == y.v && x.tau == y.tau && (x.t - y.t).abs() <= 1e-12 * y.t.max(1.0));
    let prenorm = trajectory_prenorm(&traj, &ops, rc.source.diagnostics.delta)?;
    Ok(result(
        "semigroup and shift laws",
        identity && composes && restart,
        format!(
            "T(0) = id: {identity}; T(a)T(b) = T(a+b): {composes}; restart determinism: {restart}; Frechet pre-norm {:.6} (tail {:.1e})",
            prenorm.value, prenorm.tail_bound
        ),
    ))
}

pub fn attraction(rc: &ResolvedConfig) -> Result<CheckResult> {
    let o = experiments::attract(rc)?;
    let detail = o
        .report
        .lines()
        .filter(|l| l.starts_with("contraction") || l.starts_with("monotone"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(result("attraction", o.passed, detail))
}

/// Zero stays zero; constant boundary data with zero perturbation stays at rest.
pub fn rest_state(rc: &ResolvedConfig) -> Result<CheckResult> {
    let p = rc.params;
    let ops = rc.operators()?;
    let cfg = SolverConfig {
        t_end: 5.0,
        ..rc.solver
    };
    let hom = BoundaryLift::homogeneous(&rc.grid);
    let traj = Integrator::new(&ops, &hom, p, cfg)?.integrate(&State::zero(rc.grid))?;
    let zero_kept = traj
        .states()
        .iter()
        .all(|s| s.v.values().iter().chain(s.tau.values()).all(|x| *x == 0.0));

    let lift = BoundaryLift::new(&rc.grid, &BoundaryPreset::Constant { value: p.u_transition }, &p)?;
    let traj = Integrator::new(&ops, &lift, p, cfg)?.integrate(&State::zero(rc.grid))?;
    let chi_max = crate::diagnostics::energy_series(&traj, &p)
        .iter()
        .map(|e| e.chi)
        .fold(0.0, f64::max);
    let phys = recover_u_sigma(&traj, &lift, &p)?;
    let mut dev = 0.0f64;
    for (u, s) in phys.u.iter().zip(&phys.sigma) {
        dev = dev.max(u.sub(lift.phi())?.max_abs());
        dev = dev.max(s.sub(lift.varphi())?.max_abs());
    }
    let passed = zero_kept && chi_max <= 1e-24 && dev <= 1e-12;
    Ok(result(
        "rest states",
        passed,
        format!("zero preserved: {zero_kept}; constant data phi = {}: max chi {chi_max:.2e}, max deviation {dev:.2e}", p.u_transition),
    ))
}

pub fn reproducibility(rc: &ResolvedConfig) -> Result<CheckResult> {
    let a = experiments::simulate(rc)?;
    let b = experiments::simulate(rc)?;
    let same = a == b && rc.to_toml()? == rc.to_toml()?;
    Ok(result(
        "reproducibility",
        same,
        format!("{} artifacts compared byte for byte", a.artifacts.len()),
    ))
}

/// Every check in order.
pub fn run_all(rc: &ResolvedConfig) -> Result<Vec<CheckResult>> {
    let seed = rc.source.diagnostics.seed;
    Ok(vec![
        calculus_identities(rc.grid, seed)?,
        analytic_norm_values()?,
        manufactured_convergence(rc)?,
        stress_oracle(rc)?,
        dissipation(rc)?,
        continuous_dependence(rc)?,
        semigroup_laws(rc)?,
        attraction(rc)?,
        rest_state(rc)?,
        reproducibility(rc)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_paths_stay_in_the_unit_interval() {
        for m in 0..20 {
            let p = BoundedPath::random(1, m);
            for k in 0..200 {
                assert!(p.eval(0.1 * k as f64).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn identities_hold_on_small_grids() {
        assert!(calculus_identities(GridSpec::interval(1.0, 20).unwrap(), 1).unwrap().passed);
        assert!(calculus_identities(GridSpec::rectangle(1.0, 2.0, 5, 4).unwrap(), 1).unwrap().passed);
    }

    #[test]
    fn analytic_norm_converges_at_second_order() {
        let r = analytic_norm_values().unwrap();
        assert!(r.passed, "{}", r.detail);
    }

    #[test]
    fn formatting_helpers() {
        assert_eq!(sci(&[1234.5]), "[1.234e3]");
        assert_eq!(fixed(&[1.0, 2.25]), "[1.000, 2.250]");
    }
}
