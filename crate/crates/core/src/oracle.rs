//! Independent references for the solver: the variation-of-constants
//! representation of the pointwise stress, manufactured-solution forcings,
//! and a dense brute-force RK4 integrator.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{DiscreteField, DiscreteOperators, GridSpec};
use crate::model::{beta0, gamma_point, BoundaryLift, ModelParams};
use crate::solver::{Forcing, State};

// 10-point Gauss–Legendre on [-1, 1]
const GL_NODES: [f64; 10] = [
    -0.973_906_528_517_171_7,
    -0.865_063_366_688_984_5,
    -0.679_409_568_299_024_4,
    -0.433_395_394_129_247_2,
    -0.148_874_338_981_631_2,
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 10] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
    0.295_524_224_714_752_87,
    0.269_266_719_309_996_35,
    0.219_086_362_515_982_04,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_14,
];

fn gauss_legendre(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES
        .iter()
        .zip(&GL_WEIGHTS)
        .map(|(x, w)| w * f(m + r * x))
        .sum::<f64>()
        * r
}

/// Pointwise stress relaxation along a prescribed concentration history.
///
/// With `ς = σ − νu` the stress equation at a fixed point reads
/// `ς' = −β₀(u, νu + ς)ς + (μ − νβ₀)u`, whose solution is
///
/// ```text
///   ς(t) = ς(0) e^{−∫₀ᵗβ₀} + ∫₀ᵗ e^{∫ₜˢβ₀} (μ − νβ₀(s)) u(s) ds.
/// ```
pub struct StressOdeProblem<F: Fn(f64) -> f64> {
    pub u_path: F,
    pub varsigma0: f64,
    pub params: ModelParams,
}

const COLLOCATION: usize = 8;
const PICARD_TOL: f64 = 1e-12;
const PICARD_MAX_ITER: usize = 100;
const LOCAL_TOL: f64 = 1e-12;
const MAX_DEPTH: u32 = 24;

impl<F: Fn(f64) -> f64> StressOdeProblem<F> {
    pub fn new(u_path: F, varsigma0: f64, params: ModelParams) -> Self {
        Self {
            u_path,
            varsigma0,
            params,
        }
    }

    fn rate(&self, s: f64, varsigma: f64) -> f64 {
        let u = (self.u_path)(s);
        beta0(u, self.params.nu * u + varsigma, &self.params)
    }

    fn source(&self, s: f64, varsigma: f64) -> f64 {
        let u = (self.u_path)(s);
        let b = beta0(u, self.params.nu * u + varsigma, &self.params);
        (self.params.mu - self.params.nu * b) * u
    }

    /// ς(b) from ς(a) on one collocation interval.
    ///
    /// ς inside the interval is the polynomial through `(a, ς_a)` and the
    /// Gauss–Legendre collocation nodes; node values are updated by Picard
    /// iteration of the integral representation until they stop changing.
    fn propagate(&self, a: f64, b: f64, va: f64) -> Result<f64> {
        let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
        let mut xs = [0.0; COLLOCATION + 1];
        xs[0] = a;
        for j in 0..COLLOCATION {
            // Gauss–Legendre nodes of order 8
            xs[j + 1] = m + r * GL8[j];
        }
        let mut ys = [va; COLLOCATION + 1];
        let interp = |ys: &[f64; COLLOCATION + 1], s: f64| -> f64 {
            let mut acc = 0.0;
            for i in 0..=COLLOCATION {
                let mut l = 1.0;
                for k in 0..=COLLOCATION {
                    if k != i {
                        l *= (s - xs[k]) / (xs[i] - xs[k]);
                    }
                }
                acc += l * ys[i];
            }
            acc
        };
        let eval_at = |ys: &[f64; COLLOCATION + 1], s: f64| -> f64 {
            let big_b = |x: f64| gauss_legendre(a, x, |xi| self.rate(xi, interp(ys, xi)));
            let bs = big_b(s);
            let decay = va * (-bs).exp();
            let conv = gauss_legendre(a, s, |rr| {
                let vr = interp(ys, rr);
                (big_b(rr) - bs).exp() * self.source(rr, vr)
            });
            decay + conv
        };
        for _ in 0..PICARD_MAX_ITER {
            let mut next = ys;
            let mut change = 0.0f64;
            for j in 1..=COLLOCATION {
                next[j] = eval_at(&ys, xs[j]);
                change = change.max((next[j] - ys[j]).abs() / next[j].abs().max(1.0));
            }
            ys = next;
            if !change.is_finite() {
                break;
            }
            if change <= PICARD_TOL {
                return Ok(eval_at(&ys, b));
            }
        }
        Err(Error::NoConvergence { t0: a, t1: b })
    }

    fn propagate_adaptive(&self, a: f64, b: f64, va: f64, depth: u32) -> Result<f64> {
        let mid = 0.5 * (a + b);
        let halves = self
            .propagate(a, mid, va)
            .and_then(|vm| self.propagate(mid, b, vm));
        let whole = self.propagate(a, b, va);
        match (whole, halves) {
            (Ok(w), Ok(h)) if (w - h).abs() <= LOCAL_TOL * h.abs().max(1.0) => Ok(h),
            (_, halves) if depth >= MAX_DEPTH => halves.and(Err(Error::NoConvergence { t0: a, t1: b })),
            _ => {
                let vm = self.propagate_adaptive(a, mid, va, depth + 1)?;
                self.propagate_adaptive(mid, b, vm, depth + 1)
            }
        }
    }

    /// ς at each of `times` (sorted ascending, all ≥ 0).
    pub fn solve_at(&self, times: &[f64]) -> Result<Vec<f64>> {
        if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::param("times", "must be nonnegative and sorted"));
        }
        // panel width keeps the Picard map contractive
        let panel = 0.5 / self.params.beta_rubber.max(1.0);
        let mut out = Vec::with_capacity(times.len());
        let (mut t, mut v) = (0.0, self.varsigma0);
        for &target in times {
            while target - t > 0.0 {
                let next = (t + panel).min(target);
                v = self.propagate_adaptive(t, next, v, 0)?;
                t = next;
            }
            out.push(v);
        }
        Ok(out)
    }
}

// 8-point Gauss–Legendre nodes
const GL8: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];

/// ς(t) for one time.
pub fn stress_closed_form<F: Fn(f64) -> f64>(prob: &StressOdeProblem<F>, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::param("t", "must be nonnegative"));
    }
    Ok(prob.solve_at(&[t])?[0])
}

/// Right side of `|ς(t)| ≤ e^{−tβ_G}|ς(0)| + (μ + νβ_R)/β_G`, valid while `|u| ≤ 1`.
pub fn stress_bound(varsigma0: f64, t: f64, p: &ModelParams) -> f64 {
    (-t * p.beta_glass).exp() * varsigma0.abs() + stress_asymptotic_level(p)
}

/// `(μ + νβ_R)/β_G`
pub fn stress_asymptotic_level(p: &ModelParams) -> f64 {
    (p.mu + p.nu * p.beta_rubber) / p.beta_glass
}

/// Closed-form space-time fields for manufactured-solution tests:
/// `v* = a_v e^{−rate·t} S(x)`, `τ* = a_τ e^{−rate·t} S(x)` with
/// `S(x) = Π_a sin(k_a π x_a / L_a)`, which vanishes on the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpSineSolution {
    pub amp_v: f64,
    pub amp_tau: f64,
    pub rate: f64,
    pub modes: [usize; 2],
}

impl Default for ExpSineSolution {
    fn default() -> Self {
        Self {
            amp_v: 1.0,
            amp_tau: 1.0,
            rate: 1.0,
            modes: [1, 1],
        }
    }
}

impl ExpSineSolution {
    fn shape(&self, grid: &GridSpec, x: [f64; 2]) -> f64 {
        (0..grid.dimension())
            .map(|a| (self.modes[a] as f64 * PI * x[a] / grid.lengths()[a]).sin())
            .product()
    }

    /// −ΔS = shape_eigenvalue · S
    fn shape_eigenvalue(&self, grid: &GridSpec) -> f64 {
        (0..grid.dimension())
            .map(|a| (self.modes[a] as f64 * PI / grid.lengths()[a]).powi(2))
            .sum()
    }

    pub fn v(&self, grid: &GridSpec, t: f64) -> DiscreteField {
        let c = self.amp_v * (-self.rate * t).exp();
        grid.sample(|x| c * self.shape(grid, x))
    }

    pub fn tau(&self, grid: &GridSpec, t: f64) -> DiscreteField {
        let c = self.amp_tau * (-self.rate * t).exp();
        grid.sample(|x| c * self.shape(grid, x))
    }

    pub fn state(&self, grid: &GridSpec, t: f64) -> State {
        State {
            t,
            v: self.v(grid, t),
            tau: self.tau(grid, t),
        }
    }
}

/// How spatial derivatives of the manufactured fields are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingMode {
    /// Exact Laplacians: the discrete solution converges to v* at the
    /// spatial order of the stencil.
    Analytic,
    /// Δ_h applied to nodal samples: v* solves the semi-discrete system
    /// exactly, isolating the time discretization error.
    DiscreteConsistent,
}

/// Sources `f_v = ∂ₜv* − dΔv* − EΔτ* − h` and `f_τ = ∂ₜτ* − γ(x, v*, τ*)`.
pub struct ManufacturedForcing<'a> {
    pub solution: ExpSineSolution,
    pub mode: ForcingMode,
    ops: &'a DiscreteOperators,
    lift: &'a BoundaryLift,
    params: ModelParams,
    shape: Vec<f64>,
    lap_shape: Vec<f64>,
}

impl<'a> ManufacturedForcing<'a> {
    pub fn new(
        solution: ExpSineSolution,
        mode: ForcingMode,
        ops: &'a DiscreteOperators,
        lift: &'a BoundaryLift,
        params: ModelParams,
    ) -> Self {
        let grid = ops.grid();
        let shape = grid.sample(|x| solution.shape(grid, x)).into_vec();
        let lap_shape = match mode {
            ForcingMode::Analytic => {
                let k2 = solution.shape_eigenvalue(grid);
                shape.iter().map(|s| -k2 * s).collect()
            }
            ForcingMode::DiscreteConsistent => ops.laplacian().mul_vec(&shape),
        };
        Self {
            solution,
            mode,
            ops,
            lift,
            params,
            shape,
            lap_shape,
        }
    }

    /// `(f_v, f_τ)` at time `t`.
    pub fn fields(&self, t: f64) -> (DiscreteField, DiscreteField) {
        let g = *self.ops.grid();
        let mut fv = vec![0.0; g.len()];
        let mut ft = vec![0.0; g.len()];
        self.add_v_source(t, &mut fv);
        self.add_tau_source(t, &mut ft);
        (DiscreteField::from_vec(g, fv), DiscreteField::from_vec(g, ft))
    }
}

impl Forcing for ManufacturedForcing<'_> {
    fn add_v_source(&self, t: f64, out: &mut [f64]) {
        let s = &self.solution;
        let p = &self.params;
        let e = (-s.rate * t).exp();
        let h = self.lift.h().values();
        for k in 0..out.len() {
            let dt_v = -s.rate * s.amp_v * e * self.shape[k];
            let lap_v = s.amp_v * e * self.lap_shape[k];
            let lap_tau = s.amp_tau * e * self.lap_shape[k];
            out[k] += dt_v - p.d() * lap_v - p.stress_diffusion * lap_tau - h[k];
        }
    }

    fn add_tau_source(&self, t: f64, out: &mut [f64]) {
        let s = &self.solution;
        let e = (-s.rate * t).exp();
        let (phi, varphi) = (self.lift.phi().values(), self.lift.varphi().values());
        for k in 0..out.len() {
            let v = s.amp_v * e * self.shape[k];
            let tau = s.amp_tau * e * self.shape[k];
            out[k] += -s.rate * tau - gamma_point(phi[k], varphi[k], v, tau, &self.params);
        }
    }
}

/// Forcing fields for the manufactured pair at time `t`.
pub fn manufactured_forcing(
    solution: ExpSineSolution,
    mode: ForcingMode,
    t: f64,
    ops: &DiscreteOperators,
    lift: &BoundaryLift,
    p: &ModelParams,
) -> (DiscreteField, DiscreteField) {
    ManufacturedForcing::new(solution, mode, ops, lift, *p).fields(t)
}

/// Largest grid the dense reference accepts.
pub const DENSE_LIMIT: usize = 512;

/// Classical RK4 on the semi-discrete system with a dense Δ_h and at least
/// 100 substeps per call.
pub struct DenseReference<'a> {
    lift: &'a BoundaryLift,
    params: ModelParams,
    n: usize,
    lap: Vec<f64>,
    spectral_radius: f64,
    reaction: bool,
}

impl<'a> DenseReference<'a> {
    pub fn new(ops: &DiscreteOperators, lift: &'a BoundaryLift, params: ModelParams) -> Result<Self> {
        let n = ops.grid().len();
        if n > DENSE_LIMIT {
            return Err(Error::TooLarge {
                nodes: n,
                limit: DENSE_LIMIT,
            });
        }
        if lift.grid() != ops.grid() {
            return Err(Error::GridMismatch);
        }
        let mut lap = vec![0.0; n * n];
        let mut radius = 0.0f64;
        for i in 0..n {
            let mut row_sum = 0.0;
            for (j, v) in ops.laplacian().row(i) {
                lap[i * n + j] = v;
                row_sum += v.abs();
            }
            radius = radius.max(row_sum);
        }
        Ok(Self {
            lift,
            params,
            n,
            lap,
            spectral_radius: radius,
            reaction: true,
        })
    }

    pub fn without_reaction(mut self) -> Self {
        self.reaction = false;
        self
    }

    fn dense_lap(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| self.lap[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn rhs(&self, v: &[f64], tau: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = &self.params;
        let lv = self.dense_lap(v);
        let lt = self.dense_lap(tau);
        let h = self.lift.h().values();
        let (phi, varphi) = (self.lift.phi().values(), self.lift.varphi().values());
        let mut dv = vec![0.0; self.n];
        let mut dtau = vec![0.0; self.n];
        for k in 0..self.n {
            dv[k] = p.d() * lv[k] + p.stress_diffusion * lt[k];
            if self.reaction {
                dv[k] += h[k];
                dtau[k] = gamma_point(phi[k], varphi[k], v[k], tau[k], p);
            }
        }
        (dv, dtau)
    }

    /// Advances `s` by `dt`.
    pub fn step(&self, s: &State, dt: f64) -> Result<State> {
        if s.v.len() != self.n || s.tau.len() != self.n {
            return Err(Error::GridMismatch);
        }
        let stiff = self.params.d() * self.spectral_radius + self.params.beta_rubber * (1.0 + self.params.nu);
        let substeps = 100usize.max((dt * stiff / 2.0).ceil() as usize);
        let h = dt / substeps as f64;
        let mut v = s.v.values().to_vec();
        let mut tau = s.tau.values().to_vec();
        let axpy = |x: &[f64], a: f64, y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(x, y)| x + a * y).collect() };
        for _ in 0..substeps {
            let (k1v, k1t) = self.rhs(&v, &tau);
            let (k2v, k2t) = self.rhs(&axpy(&v, 0.5 * h, &k1v), &axpy(&tau, 0.5 * h, &k1t));
            let (k3v, k3t) = self.rhs(&axpy(&v, 0.5 * h, &k2v), &axpy(&tau, 0.5 * h, &k2t));
            let (k4v, k4t) = self.rhs(&axpy(&v, h, &k3v), &axpy(&tau, h, &k3t));
            for k in 0..self.n {
                v[k] += h / 6.0 * (k1v[k] + 2.0 * k2v[k] + 2.0 * k3v[k] + k4v[k]);
                tau[k] += h / 6.0 * (k1t[k] + 2.0 * k2t[k] + 2.0 * k3t[k] + k4t[k]);
            }
        }
        let g = *s.v.grid();
        Ok(State {
            t: s.t + dt,
            v: DiscreteField::from_vec(g, v),
            tau: DiscreteField::from_vec(g, tau),
        })
    }
}

/// One dense RK4 reference step of length `dt`.
pub fn dense_reference_step(
    s: &State,
    dt: f64,
    ops: &DiscreteOperators,
    lift: &BoundaryLift,
    p: &ModelParams,
) -> Result<State> {
    DenseReference::new(ops, lift, *p)?.step(s, dt)
}
