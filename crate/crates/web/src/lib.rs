//! Browser demo: three small computations exposed to JavaScript.
//!
//! The plain functions are ordinary Rust and are tested natively; the
//! `js_*` wrappers only adapt errors for wasm-bindgen.

use polydiff_core::diagnostics::{compute_gamma, energy_series};
use polydiff_core::ic::{random_state, scale_to_norm, RandomFieldSpec};
use polydiff_core::model::{beta0, resolve_model, BoundaryPreset, ModelParams};
use polydiff_core::solver::{recover_u_sigma, Integrator, Scheme, SolverConfig, State};
use polydiff_core::{DiscreteOperators, GridSpec};
use wasm_bindgen::prelude::*;

fn demo_params(beta_r: f64, beta_g: f64, nu: f64) -> ModelParams {
    ModelParams {
        beta_rubber: beta_r,
        beta_glass: beta_g,
        beta_inf: 0.5 * (beta_r + beta_g),
        nu,
        ..ModelParams::default()
    }
}

/// `[u₀, β₀(u₀, 0), u₁, β₀(u₁, 0), …]` for `samples` points on `[0, u_max]`.
pub fn rate_curve(beta_r: f64, beta_g: f64, delta_beta: f64, u_rg: f64, u_max: f64, samples: usize) -> Result<Vec<f64>, String> {
    let p = ModelParams {
        delta_beta,
        u_transition: u_rg,
        ..demo_params(beta_r, beta_g, 1.0)
    };
    p.validate().map_err(|e| e.to_string())?;
    let n = samples.max(2);
    Ok((0..n)
        .flat_map(|i| {
            let u = u_max * i as f64 / (n - 1) as f64;
            [u, beta0(u, 0.0, &p)]
        })
        .collect())
}

/// Sorption into an initially dry film: `u = σ = 0` inside, `u = surface`
/// on both faces. Returns `frames` concentration profiles on the closed
/// grid (`n + 2` values each, faces included), oldest first.
pub fn sorption(surface: f64, beta_r: f64, beta_g: f64, nu: f64, t_end: f64, n: usize, frames: usize) -> Result<Vec<f64>, String> {
    let run = || -> polydiff_core::Result<Vec<f64>> {
        let grid = GridSpec::interval(1.0, n)?;
        let ops = DiscreteOperators::new(grid)?;
        let p = demo_params(beta_r, beta_g, nu);
        let (p, lift) = resolve_model(&grid, &BoundaryPreset::Constant { value: surface }, &p)?;
        let frames = frames.max(2);
        let steps_per_frame = ((t_end / (frames - 1) as f64) / SolverConfig::default_dt(&grid, &p)).ceil().max(1.0);
        let dt = t_end / ((frames - 1) as f64 * steps_per_frame);
        let cfg = SolverConfig::new(dt, t_end, Scheme::ImexCn).with_stride(steps_per_frame as usize);
        // u = 0, σ = 0  ⇒  v = −φ, τ = −ϕ + νφ
        let v = lift.phi().scaled(-1.0);
        let tau = lift.phi().lin_comb(p.nu, lift.varphi(), -1.0)?;
        let traj = Integrator::new(&ops, &lift, p, cfg)?.integrate(&State::new(0.0, v, tau)?)?;
        let phys = recover_u_sigma(&traj, &lift, &p)?;
        let mut out = Vec::with_capacity(frames * (n + 2));
        for u in phys.u.iter().take(frames) {
            out.push(surface);
            out.extend_from_slice(u.values());
            out.push(surface);
        }
        Ok(out)
    };
    run().map_err(|e| e.to_string())
}

/// `[t, χ(t), e^{−γ̂t}χ(0), …]` for one random start of product norm `norm`.
pub fn energy_decay(norm: f64, seed: u64, t_end: f64, n: usize) -> Result<Vec<f64>, String> {
    let run = || -> polydiff_core::Result<Vec<f64>> {
        let grid = GridSpec::interval(1.0, n)?;
        let ops = DiscreteOperators::new(grid)?;
        let (p, lift) = resolve_model(&grid, &BoundaryPreset::default(), &ModelParams::default())?;
        let gamma = compute_gamma(&ops, &p)?;
        let s0 = scale_to_norm(&random_state(&ops, seed, 0, &RandomFieldSpec::default())?, norm)?;
        let dt_cap = SolverConfig::default_dt(&grid, &p);
        let stride = (0.1 / dt_cap).ceil();
        let cfg = SolverConfig::new(0.1 / stride, t_end, Scheme::ImexCn).with_stride(stride as usize);
        let traj = Integrator::new(&ops, &lift, p, cfg)?.integrate(&s0)?;
        let e = energy_series(&traj, &p);
        let chi0 = e.first().map_or(0.0, |r| r.chi);
        Ok(e.iter()
            .flat_map(|r| [r.t, r.chi, (-gamma * r.t).exp() * chi0])
            .collect())
    };
    run().map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = rateCurve)]
pub fn js_rate_curve(beta_r: f64, beta_g: f64, delta_beta: f64, u_rg: f64, u_max: f64, samples: usize) -> Result<Vec<f64>, JsValue> {
    rate_curve(beta_r, beta_g, delta_beta, u_rg, u_max, samples).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = sorption)]
pub fn js_sorption(surface: f64, beta_r: f64, beta_g: f64, nu: f64, t_end: f64, n: usize, frames: usize) -> Result<Vec<f64>, JsValue> {
    sorption(surface, beta_r, beta_g, nu, t_end, n, frames).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = energyDecay)]
pub fn js_energy_decay(norm: f64, seed: u64, t_end: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    energy_decay(norm, seed, t_end, n).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_curve_spans_glass_to_rubber() {
        let c = rate_curve(2.0, 0.5, 0.1, 0.5, 1.5, 31).unwrap();
        assert_eq!(c.len(), 62);
        assert!((c[1] - 0.5).abs() < 1e-3);
        assert!((c[61] - 2.0).abs() < 1e-3);
        assert!(rate_curve(0.5, 2.0, 0.1, 0.5, 1.5, 31).is_err());
    }

    #[test]
    fn sorption_starts_dry_and_takes_up_penetrant() {
        let n = 32;
        let out = sorption(0.8, 2.0, 0.5, 1.0, 4.0, n, 5).unwrap();
        assert_eq!(out.len(), 5 * (n + 2));
        let mass = |f: usize| out[f * (n + 2) + 1..(f + 1) * (n + 2) - 1].iter().sum::<f64>();
        assert!(mass(0).abs() < 1e-12);
        assert!(mass(4) > mass(1) && mass(1) > 0.0);
    }

    #[test]
    fn energy_decay_rows() {
        let out = energy_decay(1.0, 3, 2.0, 32).unwrap();
        assert_eq!(out.len() % 3, 0);
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], out[2]);
    }
}
