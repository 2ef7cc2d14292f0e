use careflow::driftnet::{Direction, DriftModel};
use careflow::flowcore::{euler_endpoint, forward_loss, interpolate, margin, sample_pairs, FlowConfig};
use careflow::metrics::{centroid_gap, energy_distance};
use careflow::numkit::{Matrix, SeededRng};
use careflow::{Label, Modality, Task};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = SeededRng::new(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

fn labels(n: usize, classes: usize) -> Vec<Label> {
    (0..n).map(|i| Label::Class(i % classes)).collect()
}

fn cfg(epsilon: f64, beta: usize) -> FlowConfig {
    FlowConfig {
        epsilon,
        beta,
        euler_steps: 2,
        task: Task::Classification,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pair_counts_follow_beta(b in 1usize..12, beta in 0usize..6, seed in any::<u64>()) {
        let x = matrix(b, 4, seed);
        let pairs = sample_pairs(&x, &x, &labels(b, 3), Modality::Acoustic, Modality::Language, &cfg(0.1, beta), &mut SeededRng::new(seed)).unwrap();
        let cross = if b > 1 { beta * b } else { 0 };
        prop_assert_eq!(pairs.len(), b + cross);
        prop_assert_eq!(pairs.same_sample_count(), b);
        for p in &pairs.pairs {
            prop_assert!((0.0..1.0).contains(&p.t));
            if p.same_sample {
                prop_assert_eq!(p.src, p.tgt);
                prop_assert_eq!(p.eta, 0.0);
            } else {
                prop_assert!(p.src != p.tgt);
                prop_assert!(p.eta >= 0.1);
            }
        }
    }

    #[test]
    fn larger_epsilon_never_raises_the_forward_loss(seed in any::<u64>(), lo in 0.0f64..1.0, extra in 0.0f64..2.0) {
        let mut rng = SeededRng::new(seed);
        let drift = DriftModel::new(4, Direction::Forward, &mut rng).unwrap();
        let (xs, xt) = (matrix(6, 4, seed ^ 1), matrix(6, 4, seed ^ 2));
        let sample = |eps: f64| {
            let batch = sample_pairs(&xs, &xt, &labels(6, 2), Modality::Visual, Modality::Language, &cfg(eps, 3), &mut SeededRng::new(seed)).unwrap();
            forward_loss(&drift, &batch).unwrap()
        };
        let (small, large) = (sample(lo), sample(lo + extra));
        prop_assert!(large.loss <= small.loss + 1e-12);
        prop_assert!(large.active <= small.active);
        prop_assert!(small.loss >= 0.0);
    }

    #[test]
    fn margins_are_symmetric_and_bounded(a in 0usize..5, b in 0usize..5, eps in 0.0f64..3.0) {
        let m = margin(Label::Class(a), Label::Class(b), false, eps);
        prop_assert_eq!(m, margin(Label::Class(b), Label::Class(a), false, eps));
        prop_assert_eq!(m, eps + if a == b { 0.0 } else { 1.0 });
        prop_assert_eq!(margin(Label::Class(a), Label::Class(b), true, eps), 0.0);
    }

    #[test]
    fn interpolation_endpoints(seed in any::<u64>(), t in 0.0f64..=1.0) {
        let x = matrix(2, 5, seed);
        let (a, b) = (x.row(0), x.row(1));
        prop_assert_eq!(interpolate(a, b, 0.0).unwrap(), a.to_vec());
        prop_assert_eq!(interpolate(a, b, 1.0).unwrap(), b.to_vec());
        let mid = interpolate(a, b, t).unwrap();
        for ((m, p), q) in mid.iter().zip(a).zip(b) {
            prop_assert!(*m >= p.min(*q) - 1e-12 && *m <= p.max(*q) + 1e-12);
        }
    }

    #[test]
    fn energy_distance_is_a_symmetric_nonnegative_gap(seed in any::<u64>(), n in 2usize..9, m in 2usize..9, shift in -3.0f64..3.0) {
        let a = matrix(n, 3, seed);
        let b = matrix(m, 3, seed.wrapping_add(7)).map(|v| v + shift);
        let ab = energy_distance(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, energy_distance(&b, &a).unwrap());
        prop_assert_eq!(energy_distance(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(centroid_gap(&a, &b).unwrap(), centroid_gap(&b, &a).unwrap());
    }

    #[test]
    fn zero_drift_is_the_identity_map(seed in any::<u64>(), steps in 1usize..9) {
        let mut drift = DriftModel::new(4, Direction::Forward, &mut SeededRng::new(seed)).unwrap();
        drift.net_mut().zero_output_layer();
        let x = matrix(5, 4, seed);
        prop_assert_eq!(euler_endpoint(&drift, &x, steps).unwrap(), x);
    }

    #[test]
    fn transpose_is_an_involution(rows in 1usize..7, cols in 1usize..7, seed in any::<u64>()) {
        let m = matrix(rows, cols, seed);
        prop_assert_eq!(m.transpose().transpose(), m.clone());
        let gram = m.t_matmul(&m).unwrap();
        prop_assert_eq!(gram.clone(), gram.transpose());
    }
}
