use lp_rmdp::bellman::drvi_sa;
use lp_rmdp::generative::{build_empirical, empirical_rmdp, pair_stream, sample_next};
use lp_rmdp::model::random_mdp;
use lp_rmdp::oracle::classical_value_iteration;
use lp_rmdp::{validate_mdp, EmpiricalModel, Rectangularity, UncertaintySpec};

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[test]
fn counts_match_per_pair_streams() {
    let m = random_mdp::<f64>(4, 3, 0.9, 8).unwrap();
    let emp = build_empirical(&m, 250, 12).unwrap();
    // visiting pairs in reverse order gives the same counts
    for s in (0..4).rev() {
        for a in (0..3).rev() {
            let mut rng = pair_stream(12, s, a);
            let mut counts = vec![0u64; 4];
            for _ in 0..250 {
                counts[sample_next(&m, s, a, &mut rng)] += 1;
            }
            assert_eq!(emp.counts(s, a), counts.as_slice());
            assert_eq!(counts.iter().sum::<u64>(), 250);
        }
    }
    assert_eq!(emp.total_samples(), 250 * 12);
}

#[test]
fn l1_error_shrinks_like_inverse_root() {
    let m = random_mdp::<f64>(5, 2, 0.9, 3).unwrap();
    let mean_error = |n: u64| {
        let mut total = 0.0;
        for seed in 0..20 {
            let emp = build_empirical(&m, n, seed).unwrap();
            for s in 0..5 {
                for a in 0..2 {
                    total += l1(emp.kernel_hat(s, a), m.row(s, a));
                }
            }
        }
        total / 200.0
    };
    let ratio = mean_error(100) / mean_error(10_000);
    assert!((5.0..=20.0).contains(&ratio), "{ratio}");
}

#[test]
fn large_count_surrogate_recovers_kernel() {
    let m = random_mdp::<f64>(3, 2, 0.9, 6).unwrap();
    let n = 1u64 << 30;
    let mut counts = Vec::new();
    for s in 0..3 {
        for a in 0..2 {
            let mut row: Vec<u64> = m.row(s, a).iter().map(|p| (p * n as f64).round() as u64).collect();
            let drift = row.iter().sum::<u64>() as i64 - n as i64;
            row[0] = (row[0] as i64 - drift) as u64;
            counts.extend(row);
        }
    }
    let emp = EmpiricalModel::from_counts(3, 2, n, counts).unwrap();
    let u = UncertaintySpec::uniform(Rectangularity::Sa, 2.0, 3, 2, 0.1, 0.0).unwrap();
    let m_hat = empirical_rmdp(&m, &emp, &u).unwrap();
    validate_mdp(&m_hat.to_raw()).unwrap();
    for s in 0..3 {
        for a in 0..2 {
            assert!(l1(m_hat.row(s, a), m.row(s, a)) <= 3.0 / n as f64);
            assert_eq!(m_hat.reward(s, a), m.reward(s, a));
        }
    }
}

#[test]
fn empirical_model_solves_like_classical() {
    let m = random_mdp::<f64>(4, 3, 0.9, 1).unwrap();
    let emp = build_empirical(&m, 50, 2).unwrap();
    let u = UncertaintySpec::nominal(Rectangularity::Sa, 4, 3);
    let m_hat = empirical_rmdp(&m, &emp, &u).unwrap();
    let robust = drvi_sa(&m_hat, &u, 1e-10).unwrap().values;
    let (classical, _) = classical_value_iteration(&m_hat, 1e-10).unwrap();
    assert!(robust.iter().zip(&classical).all(|(a, b)| (a - b).abs() < 1e-8));
}

#[test]
fn mismatched_shapes_are_rejected() {
    let m = random_mdp::<f64>(4, 3, 0.9, 1).unwrap();
    let other = random_mdp::<f64>(3, 3, 0.9, 1).unwrap();
    let emp = build_empirical(&other, 5, 2).unwrap();
    let u = UncertaintySpec::nominal(Rectangularity::Sa, 4, 3);
    assert!(empirical_rmdp(&m, &emp, &u).is_err());
}
