//! Physical parameters, the relaxation rate β₀ with its saturation cutoff,
//! boundary data, and the right-hand sides of the homogenized system
//!
//! ```text
//!   v_t = d Δv + E Δτ + h,    τ_t = γ(x, v, τ),    d = D + νE
//! ```
//!
//! where `v = u − φ`, `ϖ = σ − ϕ` and `τ = ϖ − νv`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DiscreteField, GridSpec};

/// Concentration dependence of the raw (uncut) relaxation rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateLaw {
    /// `β = ½(β_R+β_G) + ½(β_R−β_G) tanh((u − u_RG)/δ_β)`
    #[default]
    Tanh,
    /// Tanh profile whose transition point moves with stress:
    /// argument `(u − u_RG + coupling·σ)/δ_β`.
    StressShifted { coupling: f64 },
}

/// Model constants. Field names in config files follow the usual symbols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "D")]
    pub diffusion: f64,
    #[serde(rename = "E")]
    pub stress_diffusion: f64,
    pub mu: f64,
    pub nu: f64,
    #[serde(rename = "beta_R")]
    pub beta_rubber: f64,
    #[serde(rename = "beta_G")]
    pub beta_glass: f64,
    pub delta_beta: f64,
    #[serde(rename = "u_RG")]
    pub u_transition: f64,
    pub beta_inf: f64,
    /// ℓ¹ radius in (u, σ) beyond which β₀ starts blending to `beta_inf`.
    /// Infinite disables the cutoff.
    #[serde(rename = "R_cut")]
    pub cutoff_radius: f64,
    #[serde(default)]
    pub law: RateLaw,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            diffusion: 1.0,
            stress_diffusion: 1.0,
            mu: 0.5,
            nu: 1.0,
            beta_rubber: 2.0,
            beta_glass: 0.5,
            delta_beta: 0.2,
            u_transition: 0.5,
            beta_inf: 1.0,
            cutoff_radius: f64::INFINITY,
            law: RateLaw::Tanh,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive and finite, got {v}")))
            }
        };
        pos("D", self.diffusion)?;
        pos("E", self.stress_diffusion)?;
        pos("nu", self.nu)?;
        pos("delta_beta", self.delta_beta)?;
        pos("beta_G", self.beta_glass)?;
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::param("mu", format!("must be nonnegative, got {}", self.mu)));
        }
        if !(self.beta_rubber > self.beta_glass) || !self.beta_rubber.is_finite() {
            return Err(Error::param("beta_R", "must be finite and exceed beta_G"));
        }
        if !(self.beta_inf >= self.beta_glass && self.beta_inf <= self.beta_rubber) {
            return Err(Error::param("beta_inf", "must lie in [beta_G, beta_R]"));
        }
        if !(self.cutoff_radius > 0.0) {
            return Err(Error::param("R_cut", "must be positive"));
        }
        if !self.u_transition.is_finite() {
            return Err(Error::param("u_RG", "must be finite"));
        }
        if let RateLaw::StressShifted { coupling } = self.law {
            if !coupling.is_finite() {
                return Err(Error::param("law.coupling", "must be finite"));
            }
        }
        Ok(())
    }

    /// d = D + νE
    pub fn d(&self) -> f64 {
        self.diffusion + self.nu * self.stress_diffusion
    }

    pub fn with_cutoff(mut self, r: f64) -> Self {
        self.cutoff_radius = r;
        self
    }
}

fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    if c.is_finite() {
        1.0 / (c * c)
    } else {
        0.0
    }
}

fn raw_rate(u: f64, sigma: f64, p: &ModelParams) -> (f64, f64, f64) {
    let mid = 0.5 * (p.beta_rubber + p.beta_glass);
    let half = 0.5 * (p.beta_rubber - p.beta_glass);
    let (arg, coupling) = match p.law {
        RateLaw::Tanh => (u - p.u_transition, 0.0),
        RateLaw::StressShifted { coupling } => (u - p.u_transition + coupling * sigma, coupling),
    };
    let z = arg / p.delta_beta;
    let du = half * sech2(z) / p.delta_beta;
    (mid + half * z.tanh(), du, coupling * du)
}

// quintic smoothstep 6x⁵ − 15x⁴ + 10x³ and its derivative
fn smoothstep(x: f64) -> (f64, f64) {
    let x = x.clamp(0.0, 1.0);
    (x * x * x * (x * (6.0 * x - 15.0) + 10.0), 30.0 * x * x * (1.0 - x) * (1.0 - x))
}

/// Relaxation rate β₀(u, σ) and its partial derivatives `(β₀, ∂β₀/∂u, ∂β₀/∂σ)`.
///
/// Equal to the raw law for `|u| + |σ| ≤ R_cut`, to `β_∞` for
/// `|u| + |σ| ≥ 2 R_cut`, and a quintic-smoothstep blend in between.
pub fn beta0_with_grad(u: f64, sigma: f64, p: &ModelParams) -> (f64, f64, f64) {
    let r_cut = p.cutoff_radius;
    let r = u.abs() + sigma.abs();
    if r >= 2.0 * r_cut {
        return (p.beta_inf, 0.0, 0.0);
    }
    let (raw, du, ds) = raw_rate(u, sigma, p);
    if r <= r_cut {
        return (raw, du, ds);
    }
    let (s, s_prime) = smoothstep((r - r_cut) / r_cut);
    let dr = s_prime / r_cut * (p.beta_inf - raw);
    let value = raw + s * (p.beta_inf - raw);
    (
        value,
        (1.0 - s) * du + dr * u.signum(),
        (1.0 - s) * ds + dr * sigma.signum(),
    )
}

pub fn beta0(u: f64, sigma: f64, p: &ModelParams) -> f64 {
    beta0_with_grad(u, sigma, p).0
}

/// Solves `β₀(φ, s)·s = μφ` for the stress boundary value `s`.
///
/// The root lies between 0 and `μφ/β_G` because `β_G ≤ β₀ ≤ β_R`.
/// Newton steps are accepted only while they stay inside the shrinking
/// bracket; otherwise the step is a bisection.
pub fn solve_boundary_compat(phi: f64, p: &ModelParams) -> Result<f64> {
    if !phi.is_finite() {
        return Err(Error::param("phi", "boundary value must be finite"));
    }
    let target = p.mu * phi;
    if target == 0.0 {
        return Ok(0.0);
    }
    let f = |s: f64| beta0(phi, s, p) * s - target;
    // outer end nudged outward: a saturated tanh can round β₀ just below β_G
    let outer = target / p.beta_glass * (1.0 + 1e-9);
    let (mut lo, mut hi) = if target > 0.0 { (0.0, outer) } else { (outer, 0.0) };
    let (flo, fhi) = (f(lo), f(hi));
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if flo * fhi > 0.0 {
        return Err(Error::NoBracket { phi });
    }
    let increasing = fhi > 0.0;
    let tol = 1e-14 * target.abs().max(1.0);
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (b, _, bs) = beta0_with_grad(phi, s, p);
        let fs = b * s - target;
        if fs.abs() <= tol {
            return Ok(s);
        }
        if (fs > 0.0) == increasing {
            hi = s;
        } else {
            lo = s;
        }
        let slope = b + bs * s;
        let newton = s - fs / slope;
        s = if slope != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
    }
    if f(s).abs() <= 1e-12 * target.abs().max(1.0) {
        Ok(s)
    } else {
        Err(Error::NoBracket { phi })
    }
}

/// Concentration boundary datum φ, given on the closed domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum BoundaryPreset {
    /// φ ≡ value
    Constant { value: f64 },
    /// φ linear in x from `left` at x = 0 to `right` at x = Lx.
    Ramp { left: f64, right: f64 },
    /// φ = base + amplitude·exp(−|x − center|²/width²)
    GaussianBump {
        base: f64,
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// φ sampled on every node of the closed grid (x-fastest); Laplacians
    /// of the lift are then taken with the discrete stencil.
    Tabulated { values: Vec<f64> },
}

impl Default for BoundaryPreset {
    fn default() -> Self {
        BoundaryPreset::Ramp {
            left: 0.0,
            right: 1.0,
        }
    }
}

impl BoundaryPreset {
    pub fn homogeneous() -> Self {
        BoundaryPreset::Constant { value: 0.0 }
    }

    /// Value, gradient and Laplacian at `x` for the closed-form presets.
    fn eval(&self, x: [f64; 2], grid: &GridSpec) -> (f64, [f64; 2], f64) {
        match self {
            BoundaryPreset::Constant { value } => (*value, [0.0; 2], 0.0),
            BoundaryPreset::Ramp { left, right } => {
                let slope = (right - left) / grid.lengths()[0];
                (left + slope * x[0], [slope, 0.0], 0.0)
            }
            BoundaryPreset::GaussianBump {
                base,
                amplitude,
                center,
                width,
            } => {
                let dim = grid.dimension();
                let w2 = width * width;
                let mut r2 = 0.0;
                let mut dx = [0.0; 2];
                for a in 0..dim {
                    dx[a] = x[a] - center.get(a).copied().unwrap_or(0.0);
                    r2 += dx[a] * dx[a];
                }
                let e = amplitude * (-r2 / w2).exp();
                let grad = [-2.0 * dx[0] / w2 * e, -2.0 * dx[1] / w2 * e];
                let lap = e * (4.0 * r2 / (w2 * w2) - 2.0 * dim as f64 / w2);
                (base + e, grad, lap)
            }
            BoundaryPreset::Tabulated { .. } => unreachable!("tabulated data has no closed form"),
        }
    }

    fn validate(&self, grid: &GridSpec) -> Result<()> {
        match self {
            BoundaryPreset::Constant { value } if !value.is_finite() => {
                Err(Error::param("boundary.value", "must be finite"))
            }
            BoundaryPreset::Ramp { left, right } if !(left.is_finite() && right.is_finite()) => {
                Err(Error::param("boundary.left/right", "must be finite"))
            }
            BoundaryPreset::GaussianBump { width, center, .. } => {
                if !(*width > 0.0) {
                    return Err(Error::param("boundary.width", "must be positive"));
                }
                if center.len() != grid.dimension() {
                    return Err(Error::param("boundary.center", "needs one coordinate per axis"));
                }
                Ok(())
            }
            BoundaryPreset::Tabulated { values } => {
                if values.len() != grid.closed_len() {
                    return Err(Error::param(
                        "boundary.values",
                        format!("expected {} closed-grid values, got {}", grid.closed_len(), values.len()),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::param("boundary.values", "must be finite"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Boundary data lifted into the domain, and the source term
/// `h = DΔφ + EΔϕ` on the interior nodes.
///
/// ϕ is never supplied: it is derived pointwise from φ by
/// [`solve_boundary_compat`], so the compatibility relation holds by construction.
#[derive(Debug, Clone)]
pub struct BoundaryLift {
    phi: DiscreteField,
    varphi: DiscreteField,
    h: DiscreteField,
    // closed-grid boundary samples (φ, ϕ)
    boundary: Vec<(f64, f64)>,
    max_abs_data: f64,
}

impl BoundaryLift {
    /// Lifts the preset and derives ϕ.
    ///
    /// If `p.cutoff_radius` is infinite the caller usually wants
    /// [`default_cutoff_radius`] applied afterwards; see [`resolve_model`].
    pub fn new(grid: &GridSpec, preset: &BoundaryPreset, p: &ModelParams) -> Result<Self> {
        p.validate()?;
        preset.validate(grid)?;
        let [cx, cy] = grid.closed_counts();
        let closed_phi: Vec<f64> = match preset {
            BoundaryPreset::Tabulated { values } => values.clone(),
            _ => (0..cy)
                .flat_map(|j| (0..cx).map(move |i| (i, j)))
                .map(|(i, j)| preset.eval(grid.closed_coords(i, j), grid).0)
                .collect(),
        };
        let closed_varphi = closed_phi
            .iter()
            .map(|&f| solve_boundary_compat(f, p))
            .collect::<Result<Vec<_>>>()?;

        let n = grid.len();
        let mut phi = vec![0.0; n];
        let mut varphi = vec![0.0; n];
        let mut boundary = Vec::new();
        for j in 0..cy {
            for i in 0..cx {
                let c = j * cx + i;
                match grid.interior_index(i, j) {
                    Some(k) => {
                        phi[k] = closed_phi[c];
                        varphi[k] = closed_varphi[c];
                    }
                    None => boundary.push((closed_phi[c], closed_varphi[c])),
                }
            }
        }

        let h = match preset {
            BoundaryPreset::Tabulated { .. } => {
                let lap_phi = closed_laplacian(grid, &closed_phi);
                let lap_varphi = closed_laplacian(grid, &closed_varphi);
                lap_phi
                    .iter()
                    .zip(&lap_varphi)
                    .map(|(a, b)| p.diffusion * a + p.stress_diffusion * b)
                    .collect()
            }
            _ => (0..n)
                .map(|k| {
                    let (f, grad, lap) = preset.eval(grid.coords(k), grid);
                    // ϕ = S(φ): Δϕ = S'(φ)Δφ + S''(φ)|∇φ|²
                    let g2 = grad[0] * grad[0] + grad[1] * grad[1];
                    let (s1, s2) = compat_derivatives(f, p)?;
                    Ok(p.diffusion * lap + p.stress_diffusion * (s1 * lap + s2 * g2))
                })
                .collect::<Result<Vec<f64>>>()?,
        };
        if h.iter().any(|v: &f64| !v.is_finite()) {
            return Err(Error::param("boundary", "source term h is not finite"));
        }
        let max_abs_data = closed_phi
            .iter()
            .chain(&closed_varphi)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self {
            phi: DiscreteField::from_vec(*grid, phi),
            varphi: DiscreteField::from_vec(*grid, varphi),
            h: DiscreteField::from_vec(*grid, h),
            boundary,
            max_abs_data,
        })
    }

    /// Zero boundary data on `grid`.
    pub fn homogeneous(grid: &GridSpec) -> Self {
        let n = grid.closed_len() - grid.len();
        Self {
            phi: DiscreteField::zeros(*grid),
            varphi: DiscreteField::zeros(*grid),
            h: DiscreteField::zeros(*grid),
            boundary: vec![(0.0, 0.0); n],
            max_abs_data: 0.0,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.phi.grid()
    }

    /// φ on interior nodes.
    pub fn phi(&self) -> &DiscreteField {
        &self.phi
    }

    /// ϕ on interior nodes.
    pub fn varphi(&self) -> &DiscreteField {
        &self.varphi
    }

    pub fn h(&self) -> &DiscreteField {
        &self.h
    }

    /// `(φ, ϕ)` at the closed-grid boundary nodes.
    pub fn boundary_values(&self) -> &[(f64, f64)] {
        &self.boundary
    }

    /// `max |φ| + max |ϕ|` over the closed grid is bounded by twice this.
    pub fn max_abs_data(&self) -> f64 {
        self.max_abs_data
    }

    /// `max |β₀(φ, ϕ)ϕ − μφ|` over the boundary nodes.
    pub fn compat_residual(&self, p: &ModelParams) -> f64 {
        self.boundary
            .iter()
            .map(|&(f, s)| (beta0(f, s, p) * s - p.mu * f).abs())
            .fold(0.0, f64::max)
    }
}

/// `R_cut = 10·(1 + max|ϕ| + max|φ|)`.
pub fn default_cutoff_radius(lift: &BoundaryLift) -> f64 {
    let interior = lift.phi.values().iter().copied().zip(lift.varphi.values().iter().copied());
    let (mf, ms) = lift
        .boundary
        .iter()
        .copied()
        .chain(interior)
        .fold((0.0f64, 0.0f64), |(mf, ms), (f, s)| (mf.max(f.abs()), ms.max(s.abs())));
    10.0 * (1.0 + mf + ms)
}

/// Resolves an unset (infinite) cutoff radius against the boundary data and
/// builds the lift with the final parameters.
///
/// Data computed without the cutoff satisfy `|φ| + |ϕ| < R_cut`, so ϕ is
/// unchanged by applying it.
pub fn resolve_model(grid: &GridSpec, preset: &BoundaryPreset, p: &ModelParams) -> Result<(ModelParams, BoundaryLift)> {
    if p.cutoff_radius.is_finite() {
        return Ok((*p, BoundaryLift::new(grid, preset, p)?));
    }
    let uncut = BoundaryLift::new(grid, preset, p)?;
    let resolved = p.with_cutoff(default_cutoff_radius(&uncut));
    let lift = BoundaryLift::new(grid, preset, &resolved)?;
    Ok((resolved, lift))
}

// S'(φ) from implicit differentiation of β₀(φ, s)s = μφ; S'' by central
// differences of S'.
fn compat_slope(phi: f64, p: &ModelParams) -> Result<f64> {
    let s = solve_boundary_compat(phi, p)?;
    let (b, bu, bs) = beta0_with_grad(phi, s, p);
    Ok((p.mu - bu * s) / (b + bs * s))
}

fn compat_derivatives(phi: f64, p: &ModelParams) -> Result<(f64, f64)> {
    let eta = 1e-5 * phi.abs().max(1.0);
    let s1 = compat_slope(phi, p)?;
    let s2 = (compat_slope(phi + eta, p)? - compat_slope(phi - eta, p)?) / (2.0 * eta);
    Ok((s1, s2))
}

fn closed_laplacian(grid: &GridSpec, closed: &[f64]) -> Vec<f64> {
    let [cx, _] = grid.closed_counts();
    let hx2 = grid.spacing(0).powi(2);
    let mut out = vec![0.0; grid.len()];
    let cy = grid.closed_counts()[1];
    for j in 0..cy {
        for i in 0..cx {
            let Some(k) = grid.interior_index(i, j) else { continue };
            let c = j * cx + i;
            let mut l = (closed[c - 1] - 2.0 * closed[c] + closed[c + 1]) / hx2;
            if grid.dimension() == 2 {
                let hy2 = grid.spacing(1).powi(2);
                l += (closed[c - cx] - 2.0 * closed[c] + closed[c + cx]) / hy2;
            }
            out[k] = l;
        }
    }
    out
}

/// β(x, v, ϖ) = β₀(v + φ, ϖ + ϕ)
#[inline]
pub fn beta_shifted(phi: f64, varphi: f64, v: f64, varpi: f64, p: &ModelParams) -> f64 {
    beta0(v + phi, varpi + varphi, p)
}

/// g(x, v, ϖ) = μφ − β₀(v + φ, ϖ + ϕ)ϕ
#[inline]
pub fn g_source(phi: f64, varphi: f64, v: f64, varpi: f64, p: &ModelParams) -> f64 {
    p.mu * phi - beta_shifted(phi, varphi, v, varpi, p) * varphi
}

/// γ(x, v, τ) = μv − β(x,v,τ+νv)τ − νβ(x,v,τ+νv)v + g(x,v,τ+νv) at one node.
#[inline]
pub fn gamma_point(phi: f64, varphi: f64, v: f64, tau: f64, p: &ModelParams) -> f64 {
    let varpi = tau + p.nu * v;
    let b = beta_shifted(phi, varphi, v, varpi, p);
    p.mu * v - b * tau - p.nu * b * v + g_source(phi, varphi, v, varpi, p)
}

/// Pointwise γ(x, v, τ) on the grid.
pub fn gamma_rhs(v: &DiscreteField, tau: &DiscreteField, lift: &BoundaryLift, p: &ModelParams) -> Result<DiscreteField> {
    v.check_same_grid(tau)?;
    v.check_same_grid(&lift.phi)?;
    let mut out = DiscreteField::zeros(*v.grid());
    gamma_into(v.values(), tau.values(), lift, p, out.values_mut());
    Ok(out)
}

pub(crate) fn gamma_into(v: &[f64], tau: &[f64], lift: &BoundaryLift, p: &ModelParams, out: &mut [f64]) {
    let phi = lift.phi.values();
    let varphi = lift.varphi.values();
    for k in 0..out.len() {
        out[k] = gamma_point(phi[k], varphi[k], v[k], tau[k], p);
    }
}

/// `(v, τ) ↦ (u, σ) = (v + φ, τ + νv + ϕ)`
pub fn lift_state(
    v: &DiscreteField,
    tau: &DiscreteField,
    lift: &BoundaryLift,
    p: &ModelParams,
) -> Result<(DiscreteField, DiscreteField)> {
    v.check_same_grid(tau)?;
    v.check_same_grid(&lift.phi)?;
    let u = v.add(&lift.phi)?;
    let sigma = DiscreteField::from_vec(
        *v.grid(),
        (0..v.len())
            .map(|k| tau.values()[k] + p.nu * v.values()[k] + lift.varphi.values()[k])
            .collect(),
    );
    Ok((u, sigma))
}

/// Inverse of [`lift_state`].
pub fn drop_state(
    u: &DiscreteField,
    sigma: &DiscreteField,
    lift: &BoundaryLift,
    p: &ModelParams,
) -> Result<(DiscreteField, DiscreteField)> {
    u.check_same_grid(sigma)?;
    u.check_same_grid(&lift.phi)?;
    let v = u.sub(&lift.phi)?;
    let tau = DiscreteField::from_vec(
        *u.grid(),
        (0..u.len())
            .map(|k| sigma.values()[k] - lift.varphi.values()[k] - p.nu * v.values()[k])
            .collect(),
    );
    Ok((v, tau))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::default().with_cutoff(10.0)
    }

    #[test]
    fn validation_catches_bad_constants() {
        let mut p = params();
        assert!(p.validate().is_ok());
        p.beta_glass = 3.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.mu = -1.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.beta_inf = 5.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.nu = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn d_is_exact() {
        let p = ModelParams {
            diffusion: 0.3,
            stress_diffusion: 0.7,
            nu: 1.9,
            ..params()
        };
        assert_eq!(p.d(), 0.3 + 1.9 * 0.7);
    }

    #[test]
    fn beta0_midpoint_and_limits() {
        let p = params();
        assert_eq!(beta0(p.u_transition, 0.0, &p), 0.5 * (p.beta_rubber + p.beta_glass));
        let uncut = p.with_cutoff(f64::INFINITY);
        assert!((beta0(1e3, 0.0, &uncut) - p.beta_rubber).abs() < 1e-12);
        assert!((beta0(-1e3, 0.0, &uncut) - p.beta_glass).abs() < 1e-12);
        assert_eq!(beta0(3.0 * p.cutoff_radius, 0.0, &p), p.beta_inf);
        assert_eq!(beta0(-1.5 * p.cutoff_radius, 1.5 * p.cutoff_radius, &p), p.beta_inf);
    }

    #[test]
    fn beta0_gradient_matches_finite_differences() {
        let p = ModelParams {
            law: RateLaw::StressShifted { coupling: 0.3 },
            ..params()
        };
        for &(u, s) in &[(0.4, 0.1), (12.0, 3.0), (-7.0, 8.5), (2.0, -14.0)] {
            let (_, bu, bs) = beta0_with_grad(u, s, &p);
            let e = 1e-6;
            let fu = (beta0(u + e, s, &p) - beta0(u - e, s, &p)) / (2.0 * e);
            let fs = (beta0(u, s + e, &p) - beta0(u, s - e, &p)) / (2.0 * e);
            assert!((bu - fu).abs() < 1e-6, "{u} {s}: {bu} vs {fu}");
            assert!((bs - fs).abs() < 1e-6, "{u} {s}: {bs} vs {fs}");
        }
    }

    #[test]
    fn compat_examples() {
        let p = params();
        assert_eq!(solve_boundary_compat(0.0, &p).unwrap(), 0.0);
        for &phi in &[0.3, 1.0, -2.0, 7.5] {
            let s = solve_boundary_compat(phi, &p).unwrap();
            // σ-independent law: closed form
            let expected = p.mu * phi / beta0(phi, 0.0, &p.with_cutoff(f64::INFINITY));
            assert!((s - expected).abs() < 1e-12, "{phi}: {s} vs {expected}");
        }
        let maxwell = ModelParams { mu: 0.0, ..p };
        assert_eq!(solve_boundary_compat(3.0, &maxwell).unwrap(), 0.0);
    }

    #[test]
    fn compat_with_stress_dependent_law() {
        let p = ModelParams {
            law: RateLaw::StressShifted { coupling: 2.0 },
            ..params()
        };
        for &phi in &[0.1, 0.6, 1.0, -0.8, 4.0] {
            let s = solve_boundary_compat(phi, &p).unwrap();
            assert!((beta0(phi, s, &p) * s - p.mu * phi).abs() <= 1e-12);
        }
    }

    #[test]
    fn lift_has_compatible_boundary_and_finite_h() {
        let g = GridSpec::interval(1.0, 31).unwrap();
        let p = params();
        for preset in [
            BoundaryPreset::Constant { value: 0.8 },
            BoundaryPreset::Ramp { left: 0.0, right: 1.0 },
            BoundaryPreset::GaussianBump {
                base: 0.2,
                amplitude: 0.6,
                center: vec![0.5],
                width: 0.2,
            },
        ] {
            let lift = BoundaryLift::new(&g, &preset, &p).unwrap();
            assert!(lift.compat_residual(&p) <= 1e-10);
            assert!(lift.h().is_finite());
        }
    }

    #[test]
    fn constant_boundary_has_zero_source() {
        let g = GridSpec::rectangle(1.0, 1.0, 5, 5).unwrap();
        let lift = BoundaryLift::new(&g, &BoundaryPreset::Constant { value: 0.7 }, &params()).unwrap();
        assert!(lift.h().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn analytic_h_agrees_with_tabulated_stencil() {
        // the same ramp, once closed-form and once tabulated: h differs by O(h²)
        let p = params();
        let mut errs = Vec::new();
        for n in [15, 31, 63] {
            let g = GridSpec::interval(1.0, n).unwrap();
            let preset = BoundaryPreset::Ramp { left: 0.0, right: 1.0 };
            let a = BoundaryLift::new(&g, &preset, &p).unwrap();
            let [cx, _] = g.closed_counts();
            let values = (0..cx).map(|i| g.closed_coords(i, 0)[0]).collect();
            let b = BoundaryLift::new(&g, &BoundaryPreset::Tabulated { values }, &p).unwrap();
            let e = a.h().sub(b.h()).unwrap().max_abs();
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn tabulated_length_is_checked() {
        let g = GridSpec::interval(1.0, 4).unwrap();
        let bad = BoundaryPreset::Tabulated { values: vec![0.0; 4] };
        assert!(BoundaryLift::new(&g, &bad, &params()).is_err());
    }

    #[test]
    fn gamma_vanishes_at_rest() {
        let g = GridSpec::interval(1.0, 9).unwrap();
        let p = params();
        let lift = BoundaryLift::new(&g, &BoundaryPreset::default(), &p).unwrap();
        let z = DiscreteField::zeros(g);
        let gam = gamma_rhs(&z, &z, &lift, &p).unwrap();
        assert!(gam.max_abs() <= 1e-14);
    }

    #[test]
    fn gamma_homogeneous_constant_beta() {
        // homogeneous boundary and β_R = β_G + tiny: β is effectively constant
        let g = GridSpec::interval(1.0, 5).unwrap();
        let p = ModelParams {
            beta_rubber: 1.0 + 1e-300,
            beta_glass: 1.0,
            beta_inf: 1.0,
            ..params()
        };
        let lift = BoundaryLift::homogeneous(&g);
        let v = g.sample(|[x, _]| x.sin());
        let tau = g.sample(|[x, _]| x * x - 0.3);
        let gam = gamma_rhs(&v, &tau, &lift, &p).unwrap();
        for k in 0..g.len() {
            let (vk, tk) = (v.values()[k], tau.values()[k]);
            let expected = p.mu * vk - 1.0 * (tk + p.nu * vk);
            assert!((gam.values()[k] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn lift_and_drop_examples() {
        let g = GridSpec::interval(1.0, 6).unwrap();
        let p = params();
        let lift = BoundaryLift::new(&g, &BoundaryPreset::default(), &p).unwrap();
        let z = DiscreteField::zeros(g);
        let (u, s) = lift_state(&z, &z, &lift, &p).unwrap();
        assert_eq!(&u, lift.phi());
        assert_eq!(&s, lift.varphi());

        let hom = BoundaryLift::homogeneous(&g);
        let one = DiscreteField::from_vec(g, vec![1.0; 6]);
        let p1 = ModelParams { nu: 1.0, ..p };
        let (_, s) = lift_state(&one, &z, &hom, &p1).unwrap();
        assert!(s.values().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let g = GridSpec::interval(1.0, 6).unwrap();
        let g2 = GridSpec::interval(1.0, 7).unwrap();
        let p = params();
        let lift = BoundaryLift::homogeneous(&g);
        let a = DiscreteField::zeros(g2);
        assert!(gamma_rhs(&a, &a, &lift, &p).is_err());
        assert!(lift_state(&a, &a, &lift, &p).is_err());
    }
}
