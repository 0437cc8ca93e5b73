//! Solver and operators against dense linear algebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use polydiff_core::grid::{DiscreteOperators, GridSpec};
use polydiff_core::ic::{random_state, scale_to_norm, RandomFieldSpec};
use polydiff_core::model::{resolve_model, BoundaryLift, BoundaryPreset, ModelParams};
use polydiff_core::oracle::DenseReference;
use polydiff_core::solver::{Integrator, Scheme, SolverConfig, State};

fn second_difference(n: usize, h: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => -2.0 / (h * h),
        1 => 1.0 / (h * h),
        _ => 0.0,
    })
}

/// Δ_h assembled independently, x fastest.
fn dense_laplacian(g: &GridSpec) -> DMatrix<f64> {
    let nx = g.counts()[0];
    let ax = second_difference(nx, g.spacing(0));
    if g.dimension() == 1 {
        return ax;
    }
    let ny = g.counts()[1];
    DMatrix::identity(ny, ny).kronecker(&ax) + second_difference(ny, g.spacing(1)).kronecker(&DMatrix::identity(nx, nx))
}

fn grids() -> Vec<GridSpec> {
    vec![
        GridSpec::interval(1.0, 20).unwrap(),
        GridSpec::interval(2.5, 7).unwrap(),
        GridSpec::rectangle(1.0, 1.0, 6, 6).unwrap(),
        GridSpec::rectangle(2.0, 0.7, 7, 4).unwrap(),
    ]
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn laplacian_matches_dense_assembly() {
    for g in grids() {
        let ops = DiscreteOperators::new(g).unwrap();
        let a = dense_laplacian(&g);
        let f = g.sample(|[x, y]| (3.0 * x).sin() + x * y - y * y);
        let lib = ops.apply(&f).unwrap();
        let dense = &a * DVector::from_column_slice(f.values());
        assert!(max_diff(lib.values(), dense.as_slice()) <= 1e-9 * dense.amax().max(1.0), "{}", g.signature());
        let back = ops.solve(&lib).unwrap();
        assert!(max_diff(back.values(), f.values()) <= 1e-10);
    }
}

#[test]
fn eigenpairs_match_dense_decomposition() {
    for g in grids() {
        let ops = DiscreteOperators::new(g).unwrap();
        let a = dense_laplacian(&g);
        let mut dense: Vec<f64> = SymmetricEigen::new(-&a).eigenvalues.iter().copied().collect();
        dense.sort_by(f64::total_cmp);
        let lib = ops.eigenvalues();
        for (x, y) in lib.iter().zip(&dense) {
            assert!((x - y).abs() <= 1e-10 * y, "{}: {x} vs {y}", g.signature());
        }
        for k in [0, g.len() / 2, g.len() - 1] {
            let e = DVector::from_column_slice(ops.eigenfield(k).values());
            let residual = (&a * &e + ops.eigenvalue(k) * &e).amax();
            assert!(residual <= 1e-9 * ops.eigenvalue(k) * e.amax());
            // orthonormal under the midpoint weight
            assert!((g.cell_volume() * e.dot(&e) - 1.0).abs() <= 1e-12);
        }
    }
}

/// With γ and h dropped, τ stays put and
/// `v(t) = e^{tdΔ}v₀ + (e^{tdΔ} − I)(E/d)τ₀`.
fn linear_exact(g: &GridSpec, p: &ModelParams, s0: &State, t: f64) -> (Vec<f64>, Vec<f64>) {
    let eig = SymmetricEigen::new(dense_laplacian(g));
    let q = &eig.eigenvectors;
    let expm = q * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (t * p.d() * l).exp())) * q.transpose();
    let v0 = DVector::from_column_slice(s0.v.values());
    let tau0 = DVector::from_column_slice(s0.tau.values());
    let n = g.len();
    let v = &expm * v0 + (&expm - DMatrix::identity(n, n)) * tau0 * (p.stress_diffusion / p.d());
    (v.as_slice().to_vec(), s0.tau.values().to_vec())
}

#[test]
fn linear_case_against_matrix_exponential() {
    let p = ModelParams::default();
    for g in [GridSpec::interval(1.0, 24).unwrap(), GridSpec::rectangle(1.0, 1.0, 5, 6).unwrap()] {
        let ops = DiscreteOperators::new(g).unwrap();
        let lift = BoundaryLift::homogeneous(&g);
        let s0 = scale_to_norm(&random_state(&ops, 5, 0, &Default::default()).unwrap(), 1.0).unwrap();
        let t = 0.05;
        let (v_exact, tau_exact) = linear_exact(&g, &p, &s0, t);

        let dense = DenseReference::new(&ops, &lift, p).unwrap().without_reaction();
        let r = dense.step(&s0, t).unwrap();
        assert!(max_diff(r.v.values(), &v_exact) <= 1e-8, "{}", g.signature());
        assert_eq!(r.tau.values(), &tau_exact[..]);

        let mut errs = Vec::new();
        for dt in [0.005, 0.0025, 0.00125] {
            let cfg = SolverConfig::new(dt, t, Scheme::ImexCn);
            let traj = Integrator::new(&ops, &lift, p, cfg).unwrap().without_reaction().integrate(&s0).unwrap();
            let last = traj.last().unwrap();
            assert_eq!(last.tau.values(), &tau_exact[..]);
            errs.push(max_diff(last.v.values(), &v_exact));
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.8, "{errs:?}");
        }
    }
}

#[test]
fn nonlinear_solver_converges_to_dense_reference() {
    let g = GridSpec::interval(1.0, 16).unwrap();
    let ops = DiscreteOperators::new(g).unwrap();
    let (p, lift) = resolve_model(&g, &BoundaryPreset::default(), &ModelParams::default()).unwrap();
    // smooth start: with every mode excited, Crank–Nicolson loses order on stiff modes
    let spec = RandomFieldSpec { modes: 3, decay: 2.0 };
    let s0 = scale_to_norm(&random_state(&ops, 2, 0, &spec).unwrap(), 1.0).unwrap();
    let t_end = 0.5;
    let reference = DenseReference::new(&ops, &lift, p).unwrap().step(&s0, t_end).unwrap();
    for (scheme, need) in [(Scheme::ImexEuler, 0.9), (Scheme::ImexCn, 1.8)] {
        let mut errs = Vec::new();
        for dt in [0.005, 0.0025, 0.00125] {
            let traj = Integrator::new(&ops, &lift, p, SolverConfig::new(dt, t_end, scheme))
                .unwrap()
                .integrate(&s0)
                .unwrap();
            let last = traj.last().unwrap();
            errs.push(max_diff(last.v.values(), reference.v.values()).max(max_diff(last.tau.values(), reference.tau.values())));
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= need, "{}: {errs:?}", scheme.name());
        }
    }
}

#[test]
fn dense_reference_rejects_large_grids() {
    let g = GridSpec::rectangle(1.0, 1.0, 32, 32).unwrap();
    let ops = DiscreteOperators::new(g).unwrap();
    let lift = BoundaryLift::homogeneous(&g);
    assert!(DenseReference::new(&ops, &lift, ModelParams::default()).is_err());
}
