use lp_rmdp::model::random_mdp;
use lp_rmdp::{Rectangularity, Uncertainty};
use lp_rmdp_cli::experiment::{fit_slope, horizon_table, median, run, with_discount, ExperimentConfig};

fn config(mode: Rectangularity, p: f64) -> ExperimentConfig {
    ExperimentConfig {
        model: random_mdp(4, 2, 0.9, 5).unwrap(),
        uncertainty: Uncertainty::uniform(mode, p, 4, 2, 0.1, 0.0).unwrap(),
        n_grid: vec![5, 50, 500],
        num_seeds: 4,
        first_seed: 10,
        tol: 1e-6,
    }
}

#[test]
fn slope_of_exact_power_law() {
    let pts: Vec<(f64, f64)> = [10.0f64, 100.0, 1000.0].iter().map(|n| (n.ln(), (3.0 * n.powf(-0.5)).ln())).collect();
    assert!((fit_slope(&pts).unwrap() + 0.5).abs() < 1e-12);
    assert_eq!(fit_slope(&pts[..1]), None);
    assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
}

#[test]
fn records_follow_grid_order_and_stay_nonnegative() {
    for (mode, p) in [(Rectangularity::Sa, 1.0), (Rectangularity::S, 2.0)] {
        let cfg = config(mode, p);
        let out = run(&cfg).unwrap();
        assert!(out.failures.is_empty());
        let cells: Vec<(u64, u64)> = out.records.iter().map(|r| (r.n, r.seed)).collect();
        let expected: Vec<(u64, u64)> = [5, 50, 500].iter().flat_map(|&n| (10..14).map(move |s| (n, s))).collect();
        assert_eq!(cells, expected);
        for r in &out.records {
            assert!(r.eps_hat >= -2.0 * out.max_eps_opt_bound);
            assert_eq!(r.mode, mode.name());
        }
        assert_eq!(out.medians().len(), 3);
    }
}

#[test]
fn invalid_grids_are_rejected() {
    let mut cfg = config(Rectangularity::Sa, 1.0);
    cfg.n_grid = vec![10, 10];
    assert!(run(&cfg).is_err());
    cfg.n_grid = vec![10];
    cfg.num_seeds = 0;
    assert!(run(&cfg).is_err());
}

#[test]
fn horizon_comparison_pairs_grid_points() {
    let cfg = config(Rectangularity::Sa, 2.0);
    let first = run(&cfg).unwrap();
    let second = run(&with_discount(&cfg, 0.95).unwrap()).unwrap();
    assert_eq!(second.records[0].gamma, 0.95);
    let table = horizon_table(&first, &second);
    assert_eq!(table.iter().map(|r| r.0).collect::<Vec<_>>(), vec![5, 50, 500]);
}
