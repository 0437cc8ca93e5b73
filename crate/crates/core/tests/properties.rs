use polydiff_core::config::RunConfig;
use polydiff_core::diagnostics::{chi, shift_trajectory, state_distance_vtau, state_distance_vvarpi};
use polydiff_core::grid::{inner_hm1, inner_l2, norm_h1, norm_hm1, norm_hmdelta, norm_l2, DiscreteField, DiscreteOperators, GridSpec};
use polydiff_core::io::{decode_pdif, encode_pdif, CsvTable};
use polydiff_core::model::{beta0, solve_boundary_compat, BoundaryLift, ModelParams};
use polydiff_core::oracle::{stress_bound, stress_closed_form, StressOdeProblem};
use polydiff_core::solver::{Integrator, Scheme, SolverConfig, State};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = GridSpec> {
    prop_oneof![
        (2usize..48, 0.5f64..3.0).prop_map(|(n, l)| GridSpec::interval(l, n).unwrap()),
        (2usize..10, 2usize..10, 0.5f64..2.0, 0.5f64..2.0).prop_map(|(nx, ny, lx, ly)| GridSpec::rectangle(lx, ly, nx, ny).unwrap()),
    ]
}

fn field(g: GridSpec) -> impl Strategy<Value = DiscreteField> {
    prop::collection::vec(-10.0f64..10.0, g.len()).prop_map(move |v| DiscreteField::from_vec(g, v))
}

fn grid_and_fields(k: usize) -> impl Strategy<Value = (GridSpec, Vec<DiscreteField>)> {
    grid_strategy().prop_flat_map(move |g| (Just(g), prop::collection::vec(field(g), k)))
}

fn params() -> impl Strategy<Value = ModelParams> {
    (0.0f64..2.0, 0.1f64..2.0, 0.1f64..1.0, 0.1f64..3.0, 0.05f64..0.5, -1.0f64..1.0).prop_map(
        |(mu, nu, bg, extra, db, urg)| ModelParams {
            mu,
            nu,
            beta_glass: bg,
            beta_rubber: bg + extra,
            beta_inf: bg + 0.5 * extra,
            delta_beta: db,
            u_transition: urg,
            cutoff_radius: 20.0,
            ..ModelParams::default()
        },
    )
}

fn nonzero(f: &DiscreteField) -> bool {
    norm_l2(f) > 1e-6
}

proptest! {
    #[test]
    fn duality((g, fs) in grid_and_fields(2)) {
        prop_assume!(nonzero(&fs[0]) && nonzero(&fs[1]));
        let ops = DiscreteOperators::new(g).unwrap();
        let lv = ops.apply(&fs[1]).unwrap();
        let lhs = inner_hm1(&fs[0], &lv, &ops).unwrap() + inner_l2(&fs[0], &fs[1]).unwrap();
        prop_assert!(lhs.abs() <= 1e-8 * norm_l2(&fs[0]) * norm_l2(&fs[1]));
    }

    #[test]
    fn friedrichs_and_norm_ordering((g, fs) in grid_and_fields(1)) {
        let f = &fs[0];
        prop_assume!(nonzero(f));
        let ops = DiscreteOperators::new(g).unwrap();
        let k = ops.friedrichs_constant();
        let (l2, h1, hm1) = (norm_l2(f), norm_h1(f, &ops).unwrap(), norm_hm1(f, &ops).unwrap());
        prop_assert!(l2 <= k * h1 * (1.0 + 1e-12));
        prop_assert!(hm1 <= k * l2 * (1.0 + 1e-12));
        let spectral = norm_hmdelta(f, &ops, 1.0).unwrap();
        prop_assert!((spectral - hm1).abs() <= 1e-9 * hm1);
        let half = norm_hmdelta(f, &ops, 0.5).unwrap();
        prop_assert!(hm1 <= half * k.sqrt() * (1.0 + 1e-12));
        prop_assert!(half <= l2 * k.sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn spectral_round_trip((g, fs) in grid_and_fields(1)) {
        let ops = DiscreteOperators::new(g).unwrap();
        let c = ops.spectral_coefficients(&fs[0]).unwrap();
        let back = ops.synthesize(&c).unwrap();
        let err = back.sub(&fs[0]).unwrap().max_abs();
        prop_assert!(err <= 1e-11 * (1.0 + fs[0].max_abs()));
        let parseval = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((parseval - norm_l2(&fs[0])).abs() <= 1e-11 * (1.0 + norm_l2(&fs[0])));
    }

    #[test]
    fn chi_is_a_nonnegative_quadratic_form((g, fs) in grid_and_fields(2), p in params(), a in -5.0f64..5.0) {
        let ops = DiscreteOperators::new(g).unwrap();
        let s = State::new(0.0, fs[0].clone(), fs[1].clone()).unwrap();
        let c = chi(&s, &ops, &p).unwrap();
        prop_assert!(c >= 0.0);
        let scaled = State::new(0.0, fs[0].scaled(a), fs[1].scaled(a)).unwrap();
        let ca = chi(&scaled, &ops, &p).unwrap();
        prop_assert!((ca - a * a * c).abs() <= 1e-10 * (1.0 + a * a * c));
    }

    #[test]
    fn distances_are_metrics((_, fs) in grid_and_fields(6), nu in 0.1f64..3.0) {
        let st = |i: usize| State::new(0.0, fs[2 * i].clone(), fs[2 * i + 1].clone()).unwrap();
        let (a, b, c) = (st(0), st(1), st(2));
        for d in [
            |x: &State, y: &State, _| state_distance_vtau(x, y).unwrap(),
            |x: &State, y: &State, nu| state_distance_vvarpi(x, y, nu).unwrap(),
        ] {
            prop_assert_eq!(d(&a, &a, nu), 0.0);
            prop_assert_eq!(d(&a, &b, nu), d(&b, &a, nu));
            prop_assert!(d(&a, &c, nu) <= (d(&a, &b, nu) + d(&b, &c, nu)) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rate_stays_between_glass_and_rubber(p in params(), u in -50.0f64..50.0, sigma in -50.0f64..50.0) {
        let b = beta0(u, sigma, &p);
        prop_assert!(b >= p.beta_glass - 1e-12 && b <= p.beta_rubber + 1e-12);
    }

    #[test]
    fn boundary_compatibility_is_solved(p in params(), phi in -3.0f64..3.0) {
        let s = solve_boundary_compat(phi, &p).unwrap();
        prop_assert!((beta0(phi, s, &p) * s - p.mu * phi).abs() <= 1e-10 * (1.0 + p.mu * phi.abs()));
    }

    #[test]
    fn pdif_round_trip(data in prop::collection::vec(any::<f64>(), 0..64), split in 1usize..4) {
        let dims = if split > 1 && data.len() % split == 0 { vec![split, data.len() / split] } else { vec![data.len()] };
        let (d, back) = decode_pdif(&encode_pdif(&dims, &data).unwrap()).unwrap();
        prop_assert_eq!(d, dims);
        prop_assert!(data.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn csv_floats_round_trip(rows in prop::collection::vec(prop::array::uniform3(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO), 0..20)) {
        let mut t = CsvTable::new(["a", "b", "c"]);
        for r in &rows {
            t.push(r.to_vec()).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        t.write(&p).unwrap();
        let back = CsvTable::read(&p).unwrap();
        prop_assert!(back.rows.iter().flatten().zip(t.rows.iter().flatten()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(back.rows.len(), rows.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stress_never_exceeds_its_bound(p in params(), u in -1.0f64..1.0, s0 in -30.0f64..30.0, t in 0.0f64..20.0) {
        let prob = StressOdeProblem::new(move |_| u, s0, p);
        let v = stress_closed_form(&prob, t).unwrap();
        prop_assert!(v.abs() <= stress_bound(s0, t, &p) + 1e-8);
    }

    #[test]
    fn shifts_form_a_semigroup(a in 0usize..12, b in 0usize..12, seed in any::<u64>()) {
        let g = GridSpec::interval(1.0, 12).unwrap();
        let ops = DiscreteOperators::new(g).unwrap();
        let p = ModelParams::default();
        let lift = BoundaryLift::homogeneous(&g);
        let cfg = SolverConfig::new(0.01, 0.3, Scheme::ImexCn).with_stride(1);
        let s0 = polydiff_core::ic::random_state(&ops, seed, 0, &Default::default()).unwrap();
        let traj = Integrator::new(&ops, &lift, p, cfg).unwrap().integrate(&s0).unwrap();
        let dt = traj.sample_dt();
        prop_assert!(shift_trajectory(&traj, 0.0).unwrap() == traj);
        let lhs = shift_trajectory(&shift_trajectory(&traj, b as f64 * dt).unwrap(), a as f64 * dt).unwrap();
        let rhs = shift_trajectory(&traj, (a + b) as f64 * dt).unwrap();
        prop_assert!(lhs == rhs);
        prop_assert_eq!(rhs.len(), traj.len() - a - b);
    }

    #[test]
    fn resolved_config_echo_is_a_fixed_point(n in 4usize..64, mu in 0.0f64..2.0, seed in any::<u64>()) {
        let src = format!("[grid]\ncounts = [{n}]\n[model]\nmu = {mu:?}\n[diagnostics]\nseed = {seed}\n");
        let rc = RunConfig::from_toml_str(&src).unwrap().resolve().unwrap();
        let echo = rc.to_toml().unwrap();
        let again = RunConfig::from_toml_str(&echo).unwrap().resolve().unwrap();
        prop_assert_eq!(again.to_toml().unwrap(), echo);
        prop_assert_eq!(again.params, rc.params);
        prop_assert_eq!(again.solver, rc.solver);
    }
}
