//! IMEX time stepping of the homogenized system.
//!
//! Diffusion in `v` is implicit (θ-scheme, one sparse Cholesky factorization per
//! `dt`); the pointwise relaxation ODE for `τ` is explicit midpoint RK2.
//! One step from `(vⁿ, τⁿ)`:
//!
//! ```text
//!   τ*   = τⁿ + dt/2 · γ(vⁿ, τⁿ)
//!   (I − θ dt d Δ_h) vⁿ⁺¹ = vⁿ + dt [E Δ_h τ* + h + (1−θ) d Δ_h vⁿ]
//!   τⁿ⁺¹ = τⁿ + dt · γ(½(vⁿ + vⁿ⁺¹), τ*)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm_h1, norm_hm1, norm_l2, DiscreteField, DiscreteOperators, GridSpec};
use crate::linalg::SparseCholesky;
use crate::model::{beta0_with_grad, gamma_into, BoundaryLift, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Backward Euler diffusion, θ = 1.
    ImexEuler,
    /// Crank–Nicolson diffusion, θ = ½.
    ImexCn,
}

impl Scheme {
    pub fn theta(self) -> f64 {
        match self {
            Scheme::ImexEuler => 1.0,
            Scheme::ImexCn => 0.5,
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Scheme::ImexEuler => 1,
            Scheme::ImexCn => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::ImexEuler => "imex-euler",
            Scheme::ImexCn => "imex-cn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub sample_stride: usize,
    pub max_value_guard: f64,
    /// Holds `v` fixed and evolves only the stress ODE.
    #[serde(default)]
    pub frozen_concentration: bool,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64, scheme: Scheme) -> Self {
        Self {
            dt,
            t_end,
            scheme,
            sample_stride: 1,
            max_value_guard: 1e12,
            frozen_concentration: false,
        }
    }

    /// `min(0.25/β_R, h)`
    pub fn default_dt(grid: &GridSpec, p: &ModelParams) -> f64 {
        (0.25 / p.beta_rubber).min(grid.min_spacing())
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param("dt", "must be positive"));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::param("t_end", "must be at least dt"));
        }
        if self.sample_stride == 0 {
            return Err(Error::param("sample_stride", "must be at least 1"));
        }
        if !(self.max_value_guard > 0.0) {
            return Err(Error::param("max_value_guard", "must be positive"));
        }
        Ok(())
    }

    /// Number of steps to reach `t_end` (rounded to the nearest step).
    pub fn num_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }

    /// Time between recorded samples.
    pub fn sample_dt(&self) -> f64 {
        self.dt * self.sample_stride as f64
    }
}

/// `(v, τ)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub v: DiscreteField,
    pub tau: DiscreteField,
}

impl State {
    pub fn new(t: f64, v: DiscreteField, tau: DiscreteField) -> Result<Self> {
        v.check_same_grid(&tau)?;
        if !v.is_finite() || !tau.is_finite() {
            return Err(Error::param("state", "values must be finite"));
        }
        Ok(Self { t, v, tau })
    }

    pub fn zero(grid: GridSpec) -> Self {
        Self {
            t: 0.0,
            v: DiscreteField::zeros(grid),
            tau: DiscreteField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.v.grid()
    }

    /// ϖ = τ + νv
    pub fn varpi(&self, nu: f64) -> DiscreteField {
        self.tau.lin_comb(1.0, &self.v, nu).expect("state fields share a grid")
    }

    /// Rebuilds `(v, τ)` from `(v, ϖ)`.
    pub fn from_varpi(t: f64, v: DiscreteField, varpi: &DiscreteField, nu: f64) -> Result<Self> {
        let tau = varpi.lin_comb(1.0, &v, -nu)?;
        Self::new(t, v, tau)
    }
}

/// Norms recorded with each sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormSample {
    pub v_l2: f64,
    pub v_hm1: f64,
    pub varpi_l2: f64,
    pub tau_h1: f64,
}

impl NormSample {
    pub fn of(s: &State, ops: &DiscreteOperators, nu: f64) -> Result<Self> {
        Ok(Self {
            v_l2: norm_l2(&s.v),
            v_hm1: norm_hm1(&s.v, ops)?,
            varpi_l2: norm_l2(&s.varpi(nu)),
            tau_h1: norm_h1(&s.tau, ops)?,
        })
    }
}

/// Uniformly sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    sample_dt: f64,
    states: Vec<State>,
    norms: Vec<NormSample>,
}

impl TrajectoryRecord {
    pub fn new(sample_dt: f64, states: Vec<State>, norms: Vec<NormSample>) -> Result<Self> {
        if !(sample_dt > 0.0) {
            return Err(Error::Trajectory("sample spacing must be positive".into()));
        }
        if states.len() != norms.len() {
            return Err(Error::Trajectory("one norm record per state required".into()));
        }
        if states.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::Trajectory("sample times must increase".into()));
        }
        Ok(Self {
            sample_dt,
            states,
            norms,
        })
    }

    /// Builds a record and computes the norm series.
    pub fn from_states(sample_dt: f64, states: Vec<State>, ops: &DiscreteOperators, nu: f64) -> Result<Self> {
        let norms = states
            .iter()
            .map(|s| NormSample::of(s, ops, nu))
            .collect::<Result<Vec<_>>>()?;
        Self::new(sample_dt, states, norms)
    }

    pub fn sample_dt(&self) -> f64 {
        self.sample_dt
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn norms(&self) -> &[NormSample] {
        &self.norms
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Time of the last sample relative to the first.
    pub fn span(&self) -> f64 {
        match (self.states.first(), self.states.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn last(&self) -> Option<&State> {
        self.states.last()
    }
}

/// Source terms added to the right-hand sides (used for manufactured solutions).
pub trait Forcing: Sync {
    fn add_v_source(&self, t: f64, out: &mut [f64]);
    fn add_tau_source(&self, t: f64, out: &mut [f64]);
}

/// No extra sources.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unforced;

impl Forcing for Unforced {
    fn add_v_source(&self, _t: f64, _out: &mut [f64]) {}
    fn add_tau_source(&self, _t: f64, _out: &mut [f64]) {}
}

/// Time stepper bound to one grid, boundary lift, parameter set and `dt`.
///
/// Holds the factorization of `I − θ dt d Δ_h`; shareable read-only between
/// threads integrating different trajectories.
#[derive(Debug, Clone)]
pub struct Integrator<'a> {
    ops: &'a DiscreteOperators,
    lift: &'a BoundaryLift,
    params: ModelParams,
    cfg: SolverConfig,
    implicit: SparseCholesky,
    reaction: bool,
}

impl<'a> Integrator<'a> {
    pub fn new(ops: &'a DiscreteOperators, lift: &'a BoundaryLift, params: ModelParams, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        if lift.grid() != ops.grid() {
            return Err(Error::GridMismatch);
        }
        let coeff = cfg.scheme.theta() * cfg.dt * params.d();
        let implicit = SparseCholesky::factor(&ops.laplacian().shifted(1.0, -coeff))?;
        Ok(Self {
            ops,
            lift,
            params,
            cfg,
            implicit,
            reaction: true,
        })
    }

    /// Drops γ and h, leaving `v' = dΔ_h v + EΔ_h τ`, `τ' = 0`.
    pub fn without_reaction(mut self) -> Self {
        self.reaction = false;
        self
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn ops(&self) -> &DiscreteOperators {
        self.ops
    }

    pub fn lift(&self) -> &BoundaryLift {
        self.lift
    }

    fn gamma(&self, v: &[f64], tau: &[f64], out: &mut [f64]) {
        if self.reaction {
            gamma_into(v, tau, self.lift, &self.params, out);
        } else {
            out.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    fn advance(&self, s: &State, t_next: f64, index: usize, forcing: &dyn Forcing) -> std::result::Result<State, (usize, f64)> {
        let dt = self.cfg.dt;
        let theta = self.cfg.scheme.theta();
        let p = &self.params;
        let n = s.v.len();
        let (v0, tau0) = (s.v.values(), s.tau.values());
        let t0 = s.t;

        let mut g = vec![0.0; n];
        self.gamma(v0, tau0, &mut g);
        forcing.add_tau_source(t0, &mut g);
        let tau_half: Vec<f64> = tau0.iter().zip(&g).map(|(t, g)| t + 0.5 * dt * g).collect();

        let v1 = if self.cfg.frozen_concentration {
            v0.to_vec()
        } else {
            let lap = self.ops.laplacian();
            let lap_tau = lap.mul_vec(&tau_half);
            let mut rhs = vec![0.0; n];
            let mut f_new = vec![0.0; n];
            let mut f_old = vec![0.0; n];
            forcing.add_v_source(t_next, &mut f_new);
            if theta < 1.0 {
                forcing.add_v_source(t0, &mut f_old);
            }
            let lap_v = if theta < 1.0 { lap.mul_vec(v0) } else { vec![0.0; n] };
            let h = self.lift.h().values();
            for k in 0..n {
                let src = if self.reaction { h[k] } else { 0.0 };
                rhs[k] = v0[k]
                    + dt * (p.stress_diffusion * lap_tau[k]
                        + src
                        + theta * f_new[k]
                        + (1.0 - theta) * (f_old[k] + p.d() * lap_v[k]));
            }
            self.implicit.solve_in_place(&mut rhs);
            rhs
        };

        let v_mid: Vec<f64> = v0.iter().zip(&v1).map(|(a, b)| 0.5 * (a + b)).collect();
        self.gamma(&v_mid, &tau_half, &mut g);
        forcing.add_tau_source(t0 + 0.5 * dt, &mut g);
        let tau1: Vec<f64> = tau0.iter().zip(&g).map(|(t, g)| t + dt * g).collect();

        let finite = v1.iter().chain(&tau1).all(|x| x.is_finite());
        let vmax = v1.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !finite || vmax > self.cfg.max_value_guard {
            return Err((index, t_next));
        }
        let grid = *s.v.grid();
        Ok(State {
            t: t_next,
            v: DiscreteField::from_vec(grid, v1),
            tau: DiscreteField::from_vec(grid, tau1),
        })
    }

    fn diverged(&self, step: usize, t: f64, partial: Vec<State>) -> Error {
        let partial = TrajectoryRecord::from_states(self.cfg.sample_dt(), partial, self.ops, self.params.nu)
            .unwrap_or_else(|_| TrajectoryRecord {
                sample_dt: self.cfg.sample_dt(),
                states: Vec::new(),
                norms: Vec::new(),
            });
        Error::Diverged {
            step,
            t,
            partial: Box::new(partial),
        }
    }

    /// One step from `s` to `s.t + dt`.
    pub fn step(&self, s: &State) -> Result<State> {
        self.step_forced(s, &Unforced)
    }

    pub fn step_forced(&self, s: &State, forcing: &dyn Forcing) -> Result<State> {
        if s.v.grid() != self.ops.grid() || s.tau.grid() != self.ops.grid() {
            return Err(Error::GridMismatch);
        }
        let index = (s.t / self.cfg.dt).round() as usize;
        self.advance(s, s.t + self.cfg.dt, index, forcing)
            .map_err(|(step, t)| self.diverged(step, t, Vec::new()))
    }

    /// Steps from `s0` to `t_end`, recording every `sample_stride` steps.
    ///
    /// Times are `t0 + k·dt` computed from the step counter, so runs with
    /// identical inputs are bitwise identical.
    pub fn integrate(&self, s0: &State) -> Result<TrajectoryRecord> {
        self.integrate_forced(s0, &Unforced)
    }

    pub fn integrate_forced(&self, s0: &State, forcing: &dyn Forcing) -> Result<TrajectoryRecord> {
        if s0.v.grid() != self.ops.grid() || s0.tau.grid() != self.ops.grid() {
            return Err(Error::GridMismatch);
        }
        if !s0.v.is_finite() || !s0.tau.is_finite() {
            return Err(Error::param("initial state", "values must be finite"));
        }
        let steps = self.cfg.num_steps();
        let stride = self.cfg.sample_stride;
        let t0 = s0.t;
        let mut states = Vec::with_capacity(steps / stride + 1);
        states.push(s0.clone());
        let mut cur = s0.clone();
        for k in 0..steps {
            let t_next = t0 + (k + 1) as f64 * self.cfg.dt;
            cur = match self.advance(&cur, t_next, k + 1, forcing) {
                Ok(s) => s,
                Err((step, t)) => return Err(self.diverged(step, t, states)),
            };
            if (k + 1) % stride == 0 {
                states.push(cur.clone());
            }
        }
        TrajectoryRecord::from_states(self.cfg.sample_dt(), states, self.ops, self.params.nu)
    }
}

/// Trajectory in the original variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalTrajectory {
    pub times: Vec<f64>,
    pub u: Vec<DiscreteField>,
    pub sigma: Vec<DiscreteField>,
}

/// Applies `(v, τ) ↦ (u, σ)` to every sample.
pub fn recover_u_sigma(traj: &TrajectoryRecord, lift: &BoundaryLift, p: &ModelParams) -> Result<PhysicalTrajectory> {
    let mut out = PhysicalTrajectory {
        times: traj.times(),
        u: Vec::with_capacity(traj.len()),
        sigma: Vec::with_capacity(traj.len()),
    };
    for s in traj.states() {
        let (u, sigma) = crate::model::lift_state(&s.v, &s.tau, lift, p)?;
        out.u.push(u);
        out.sigma.push(sigma);
    }
    Ok(out)
}

/// Growth constant for the distance between two solutions in `(v, ϖ)`.
///
/// With `F(u, σ) = β₀(u, σ)σ` and Lipschitz bounds `L_u ≥ |∂F/∂u|`,
/// `L_σ ≥ |∂F/∂σ|`, the weighted energy
/// `Z = (μ/2)‖w‖²₋₁ + (νD/2)‖w‖² + (E/2)‖ξ‖²` of the difference satisfies
/// `Z' ≤ 2 rate · Z`, hence
/// `(‖w(t)‖² + ‖ξ(t)‖²)^{1/2} ≤ prefactor · e^{rate·t} · (‖w₀‖² + ‖ξ₀‖²)^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallConstant {
    pub rate: f64,
    pub prefactor: f64,
    pub lipschitz_u: f64,
    pub lipschitz_sigma: f64,
}

impl GronwallConstant {
    /// Bound on the `(v, ϖ)` distance at time `t` for initial distance `eps`.
    pub fn bound(&self, eps: f64, t: f64) -> f64 {
        self.prefactor * eps * (self.rate * t).exp()
    }
}

/// Samples `∂[β₀(u,σ)σ]/∂u` and `∂[β₀(u,σ)σ]/∂σ` over the region where β₀ is
/// not constant and returns their suprema (with a 2% margin).
pub fn lipschitz_bounds(p: &ModelParams) -> Result<(f64, f64)> {
    let r = p.cutoff_radius;
    if !r.is_finite() {
        return Err(Error::param("R_cut", "Lipschitz bounds need a finite cutoff radius"));
    }
    const N: usize = 801;
    let extent = 2.05 * r;
    let mut us: Vec<f64> = (0..N).map(|i| -extent + 2.0 * extent * i as f64 / (N - 1) as f64).collect();
    // the tanh profile peaks at the transition point
    us.push(p.u_transition);
    let sigmas: Vec<f64> = (0..N).map(|i| -extent + 2.0 * extent * i as f64 / (N - 1) as f64).collect();
    let (mut lu, mut ls) = (0.0f64, p.beta_inf);
    for &u in &us {
        for &s in &sigmas {
            let (b, bu, bs) = beta0_with_grad(u, s, p);
            lu = lu.max((bu * s).abs());
            ls = ls.max((b + bs * s).abs());
        }
    }
    Ok((1.02 * lu, 1.02 * ls))
}

pub fn gronwall_constant(ops: &DiscreteOperators, p: &ModelParams) -> Result<GronwallConstant> {
    let (lu, ls) = lipschitz_bounds(p)?;
    let (d, e, mu, nu) = (p.diffusion, p.stress_diffusion, p.mu, p.nu);
    let lambda1 = ops.lambda_min();
    let rate = (0.5 * lu + ls).max((0.5 * e * lu - mu * d) / (nu * d)).max(0.0);
    let upper = (mu / lambda1 + nu * d).max(e);
    let lower = (nu * d).min(e);
    Ok(GronwallConstant {
        rate,
        prefactor: (upper / lower).sqrt(),
        lipschitz_u: lu,
        lipschitz_sigma: ls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BoundaryPreset;

    fn setup(n: usize) -> (DiscreteOperators, ModelParams) {
        let g = GridSpec::interval(1.0, n).unwrap();
        (DiscreteOperators::new(g).unwrap(), ModelParams::default().with_cutoff(20.0))
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::new(0.01, 1.0, Scheme::ImexCn);
        assert!(c.validate().is_ok());
        c.dt = 0.0;
        assert!(c.validate().is_err());
        let c = SolverConfig::new(0.1, 0.01, Scheme::ImexCn);
        assert!(c.validate().is_err());
        let c = SolverConfig::new(0.1, 1.0, Scheme::ImexCn).with_stride(0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn homogeneous_rest_state_is_preserved() {
        let (ops, p) = setup(32);
        let lift = BoundaryLift::homogeneous(ops.grid());
        for scheme in [Scheme::ImexEuler, Scheme::ImexCn] {
            let cfg = SolverConfig::new(0.05, 2.0, scheme).with_stride(4);
            let int = Integrator::new(&ops, &lift, p, cfg).unwrap();
            let traj = int.integrate(&State::zero(*ops.grid())).unwrap();
            for (s, n) in traj.states().iter().zip(traj.norms()) {
                assert!(s.v.values().iter().all(|&x| x == 0.0));
                assert!(s.tau.values().iter().all(|&x| x == 0.0));
                assert_eq!(*n, NormSample::default());
            }
        }
    }

    #[test]
    fn inhomogeneous_rest_state_is_preserved_for_constant_data() {
        let (ops, p) = setup(24);
        let lift = BoundaryLift::new(ops.grid(), &BoundaryPreset::Constant { value: 0.9 }, &p).unwrap();
        let int = Integrator::new(&ops, &lift, p, SolverConfig::new(0.05, 1.0, Scheme::ImexCn)).unwrap();
        let traj = int.integrate(&State::zero(*ops.grid())).unwrap();
        let last = traj.last().unwrap();
        assert!(last.v.max_abs() < 1e-14 && last.tau.max_abs() < 1e-14);
    }

    #[test]
    fn sampling_and_times() {
        let (ops, p) = setup(8);
        let lift = BoundaryLift::homogeneous(ops.grid());
        let cfg = SolverConfig::new(0.1, 1.0, Scheme::ImexEuler).with_stride(3);
        let traj = Integrator::new(&ops, &lift, p, cfg)
            .unwrap()
            .integrate(&State::zero(*ops.grid()))
            .unwrap();
        // 10 steps, samples at 0, 3, 6, 9
        assert_eq!(traj.len(), 4);
        let t = traj.times();
        assert_eq!(t[3], 9.0 * 0.1);
        assert!((traj.sample_dt() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn divergence_is_reported_with_partial_trajectory() {
        let (ops, p) = setup(16);
        let lift = BoundaryLift::homogeneous(ops.grid());
        let mut cfg = SolverConfig::new(0.01, 1.0, Scheme::ImexEuler);
        cfg.max_value_guard = 0.5;
        let int = Integrator::new(&ops, &lift, p, cfg).unwrap();
        let g = *ops.grid();
        let s0 = State::new(0.0, DiscreteField::zeros(g), g.sample(|[x, _]| 50.0 * (std::f64::consts::PI * x).sin())).unwrap();
        match int.integrate(&s0) {
            Err(Error::Diverged { step, partial, .. }) => {
                assert!(step >= 1);
                assert!(!partial.is_empty());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn linear_part_is_dissipative_for_any_dt() {
        let (ops, p) = setup(32);
        let lift = BoundaryLift::homogeneous(ops.grid());
        let g = *ops.grid();
        let v0 = g.sample(|[x, _]| if x < 0.5 { 1.0 } else { -0.3 });
        for scheme in [Scheme::ImexEuler, Scheme::ImexCn] {
            for dt in [1e-3, 0.1, 10.0] {
                let cfg = SolverConfig::new(dt, 20.0 * dt, scheme);
                let int = Integrator::new(&ops, &lift, p, cfg).unwrap().without_reaction();
                let traj = int.integrate(&State::new(0.0, v0.clone(), DiscreteField::zeros(g)).unwrap()).unwrap();
                let norms: Vec<f64> = traj.norms().iter().map(|n| n.v_l2).collect();
                assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-14)), "{scheme:?} dt={dt}");
            }
        }
    }

    #[test]
    fn frozen_concentration_keeps_v() {
        let (ops, p) = setup(10);
        let lift = BoundaryLift::new(ops.grid(), &BoundaryPreset::Constant { value: 0.4 }, &p).unwrap();
        let mut cfg = SolverConfig::new(0.01, 0.5, Scheme::ImexCn);
        cfg.frozen_concentration = true;
        let g = *ops.grid();
        let v0 = g.sample(|[x, _]| x);
        let traj = Integrator::new(&ops, &lift, p, cfg)
            .unwrap()
            .integrate(&State::new(0.0, v0.clone(), DiscreteField::zeros(g)).unwrap())
            .unwrap();
        assert_eq!(traj.last().unwrap().v, v0);
        assert!(traj.last().unwrap().tau.max_abs() > 0.0);
    }

    #[test]
    fn lipschitz_needs_finite_cutoff() {
        let p = ModelParams::default();
        assert!(lipschitz_bounds(&p).is_err());
        let (lu, ls) = lipschitz_bounds(&p.with_cutoff(5.0)).unwrap();
        assert!(lu > 0.0 && ls >= p.beta_glass);
    }

    #[test]
    fn lipschitz_dominates_random_difference_quotients() {
        let p = ModelParams::default().with_cutoff(4.0);
        let (lu, ls) = lipschitz_bounds(&p).unwrap();
        let f = |u: f64, s: f64| crate::model::beta0(u, s, &p) * s;
        let mut x = 0.123_f64;
        let mut next = || {
            x = (x * 9301.0 + 49297.0) % 233280.0;
            x / 233280.0 * 20.0 - 10.0
        };
        for _ in 0..2000 {
            let (u, s, du, ds) = (next(), next(), next() * 1e-3, next() * 1e-3);
            let diff = (f(u + du, s + ds) - f(u, s)).abs();
            assert!(diff <= lu * du.abs() + ls * ds.abs() + 1e-12);
        }
    }
}
