use lp_rmdp::bellman::{
    drvi_s, drvi_sa, robust_bellman_policy, robust_policy_eval, s_rect_optimal_backup, threshold_root,
};
use lp_rmdp::model::random_mdp;
use lp_rmdp::oracle::{brute_robust_value, classical_value_iteration, exhaustive_sa_optimum};
use lp_rmdp::{Policy, RawMdp, Rectangularity, RmdpError, TabularMdp, UncertaintySpec};

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn zero_radius_matches_classical_iteration() {
    for seed in 0..6 {
        let m = random_mdp::<f64>(4, 3, 0.9, seed).unwrap();
        let (classical, _) = classical_value_iteration(&m, 1e-11).unwrap();
        for mode in [Rectangularity::Sa, Rectangularity::S] {
            let u = UncertaintySpec::uniform(mode, 2.0, 4, 3, 0.0, 0.0).unwrap();
            let v = match mode {
                Rectangularity::Sa => drvi_sa(&m, &u, 1e-11),
                Rectangularity::S => drvi_s(&m, &u, 1e-11),
            }
            .unwrap()
            .values;
            assert!(sup(&v, &classical) < 1e-8);
        }
    }
}

#[test]
fn reported_bound_follows_residual() {
    let m = random_mdp::<f64>(5, 2, 0.8, 3).unwrap();
    let u = UncertaintySpec::uniform(Rectangularity::Sa, 1.5, 5, 2, 0.2, 0.01).unwrap();
    let sol = drvi_sa(&m, &u, 1e-6).unwrap();
    assert!(2.0 * 0.8 * sol.residual <= 1e-6 * 0.2);
    assert!((sol.eps_opt_bound - 2.0 * 0.8 * sol.residual / 0.2).abs() < 1e-18);
}

#[test]
fn policy_value_is_a_fixed_point_and_matches_oracle() {
    let m = random_mdp::<f64>(2, 2, 0.9, 11).unwrap();
    for (mode, p) in [(Rectangularity::Sa, 2.0), (Rectangularity::S, 3.0), (Rectangularity::Sa, f64::INFINITY)] {
        let u = UncertaintySpec::uniform(mode, p, 2, 2, 0.3, 0.05).unwrap();
        let pi = Policy::from_rows(vec![vec![0.3, 0.7], vec![0.9, 0.1]]).unwrap();
        let ev = robust_policy_eval(&m, &u, &pi, 1e-9).unwrap();
        let again = robust_bellman_policy(&m, &u, &pi, &ev.values).unwrap();
        assert!(sup(&again, &ev.values) < 1e-9);
        let brute = brute_robust_value(&m, &u, &pi, 1e-3, 1e-7).unwrap();
        assert!(sup(&brute, &ev.values) < 5e-3);
        // the action values average back to the state values
        for s in 0..2 {
            let avg: f64 = (0..2).map(|a| pi.prob(s, a) * ev.q.get(s, a)).sum();
            assert!((avg - ev.values[s]).abs() < 1e-9);
        }
    }
}

#[test]
fn sa_solver_matches_exhaustive_search() {
    for seed in 0..5 {
        let m = random_mdp::<f64>(2, 2, 0.9, 40 + seed).unwrap();
        let u = UncertaintySpec::uniform(Rectangularity::Sa, [1.0, 2.0, 3.0, f64::INFINITY, 1.5][seed as usize], 2, 2, 0.25, 0.0)
            .unwrap();
        let sol = drvi_sa(&m, &u, 1e-9).unwrap();
        let (pi, best) = exhaustive_sa_optimum(&m, &u, 1e-3).unwrap();
        assert!(sup(&sol.values, &best) < 1e-3);
        assert_eq!(sol.policy.as_deterministic(), pi.as_deterministic());
    }
}

#[test]
fn s_rectangular_policy_beats_policy_grid() {
    let m = random_mdp::<f64>(2, 2, 0.9, 77).unwrap();
    let u = UncertaintySpec::uniform(Rectangularity::S, 2.0, 2, 2, 0.3, 0.1).unwrap();
    let sol = drvi_s(&m, &u, 1e-9).unwrap();
    for i in 0..=10 {
        for j in 0..=10 {
            let (a, b) = (i as f64 / 10.0, j as f64 / 10.0);
            let pi = Policy::from_rows(vec![vec![a, 1.0 - a], vec![b, 1.0 - b]]).unwrap();
            let v = robust_policy_eval(&m, &u, &pi, 1e-9).unwrap().values;
            assert!(v.iter().zip(&sol.values).all(|(x, y)| *x <= y + 1e-7));
        }
    }
}

#[test]
fn threshold_root_matches_reference_roots() {
    // roots from a bracketing solver at 1e-15
    let cases: [(&[f64], f64, f64, f64); 3] = [
        (&[0.3, 0.9, 0.7], 0.5, 2.0, 0.4608835008437366),
        (&[1.0, 1.2, 0.4], 0.3, 3.0, 0.9033787397197468),
        (&[0.0, 0.1, 0.2], 1.0, 1.5, -0.37725434379385037),
    ];
    for (q, sigma, p, expected) in cases {
        let x = threshold_root(q, sigma, p).unwrap();
        assert!((x - expected).abs() < 1e-10, "{x} vs {expected}");
    }
}

#[test]
fn threshold_solve_satisfies_its_equation() {
    let m = random_mdp::<f64>(6, 4, 0.9, 5).unwrap();
    let v: Vec<f64> = (0..6).map(|i| i as f64 * 0.7).collect();
    for p in [1.0, 1.5, 2.0, 4.0] {
        let u = UncertaintySpec::uniform(Rectangularity::S, p, 6, 4, 0.2, 0.1).unwrap();
        for s in 0..6 {
            let t = s_rect_optimal_backup(&m, &u, &v, s).unwrap();
            let top = t.q_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(t.x >= top - t.sigma - 1e-12 && t.x <= top + 1e-12);
            let lhs: f64 = t.advantage.iter().map(|a| a.max(0.0).powf(p)).sum();
            assert!((lhs - t.sigma.powf(p)).abs() < 1e-8);
            let total: f64 = t.policy.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn modes_coincide_with_one_action() {
    let m = random_mdp::<f64>(4, 1, 0.9, 2).unwrap();
    let sa = UncertaintySpec::uniform(Rectangularity::Sa, 2.0, 4, 1, 0.3, 0.1).unwrap();
    let s = UncertaintySpec::uniform(Rectangularity::S, 2.0, 4, 1, 0.3, 0.1).unwrap();
    let a = drvi_sa(&m, &sa, 1e-10).unwrap();
    let b = drvi_s(&m, &s, 1e-10).unwrap();
    assert!(sup(&a.values, &b.values) < 1e-9);
}

#[test]
fn wrong_mode_is_rejected() {
    let m = random_mdp::<f64>(3, 2, 0.9, 1).unwrap();
    let u = UncertaintySpec::uniform(Rectangularity::S, 2.0, 3, 2, 0.1, 0.0).unwrap();
    assert!(matches!(drvi_sa(&m, &u, 1e-6), Err(RmdpError::ModeMismatch { .. })));
}

#[test]
fn single_precision_solver_runs() {
    let raw = RawMdp::<f32> {
        num_states: 2,
        num_actions: 2,
        kernel: vec![vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![vec![0.5, 0.5], vec![0.0, 1.0]]],
        reward: vec![vec![1.0, 0.0], vec![0.0, 0.5]],
        discount: 0.8,
        initial_dist: vec![0.5, 0.5],
    };
    let m = TabularMdp::new(raw).unwrap();
    let u = UncertaintySpec::uniform(Rectangularity::Sa, 2.0f32, 2, 2, 0.1, 0.0).unwrap();
    let sol = drvi_sa(&m, &u, 1e-4).unwrap();
    assert!(sol.values.iter().all(|v| v.is_finite() && *v > 0.0));
}
