mod common;

use cauchy_bench::datagen::{Dataset, Matrix, Synthetic};
use cauchy_bench::losses::LossSpec;
use cauchy_bench::nn::{self, forward, init_params, train_with_order, NetworkConfig, TrainConfig};
use cauchy_bench::seed;
use common::{fd_check, random_case, reference_forward};
use rand::seq::SliceRandom;

#[test]
fn backprop_matches_finite_differences() {
    let specs = [
        LossSpec::mse(),
        LossSpec::clf(0.1).unwrap(),
        LossSpec::clf(1.0).unwrap(),
        LossSpec::clf(10.0).unwrap(),
    ];
    for cfg in [NetworkConfig::new(2, vec![10]), NetworkConfig::new(8, vec![14, 14])] {
        for spec in &specs {
            assert_eq!(fd_check(&cfg, spec), 20);
        }
    }
}

#[test]
fn forward_matches_straight_line_evaluation() {
    let cfg = NetworkConfig::new(2, vec![10]);
    for s in 0..20 {
        let (p, x, _) = random_case(&cfg, s);
        let (got, cache) = forward(&p, &x).unwrap();
        let (want, _) = reference_forward(&p, &x);
        assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
        assert_eq!(cache.prediction(), got);
    }
    assert!(forward(&init_params::<f64>(&cfg, 0).unwrap(), &[1.0]).is_err());
}

#[test]
fn row_order_does_not_matter_when_batches_follow_the_rows() {
    let data: Dataset<f64> = Synthetic::Hc2.generate(200, 4).unwrap();
    let cfg = NetworkConfig::new(2, vec![10]);
    let tc = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let mut perm: Vec<usize> = (0..data.len()).collect();
    perm.shuffle(&mut seed::rng(77));
    let permuted = data.select(&perm);
    let mut inverse = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inverse[old] = new;
    }

    let orders: Vec<Vec<usize>> = {
        let mut rng = seed::rng(tc.seed);
        let mut o: Vec<usize> = (0..data.len()).collect();
        (0..tc.epochs)
            .map(|_| {
                o.shuffle(&mut rng);
                o.clone()
            })
            .collect()
    };
    for spec in [LossSpec::mse(), LossSpec::clf(1.0).unwrap()] {
        let init = init_params(&cfg, 3).unwrap();
        let a = train_with_order(init.clone(), &data, &spec, &tc, |e| orders[e].clone()).unwrap();
        let b = train_with_order(init, &permuted, &spec, &tc, |e| orders[e].iter().map(|&i| inverse[i]).collect()).unwrap();
        assert_eq!(a.epoch_loss, b.epoch_loss);
        assert_eq!(a.params, b.params);
    }
}

#[test]
fn training_loss_is_finite_every_epoch() {
    let data: Dataset<f64> = Synthetic::Hc8.generate(300, 2).unwrap();
    let std = nn::Standardizer::fit(&data.x);
    let x: Matrix<f64> = std.transform(&data.x);
    let data = Dataset::new(x, data.y.clone(), data.feature_names.clone(), data.target_name.clone()).unwrap();
    let cfg = NetworkConfig::new(8, vec![14, 14]);
    let tc = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    for spec in [LossSpec::mse(), LossSpec::clf(100.0).unwrap()] {
        let out = nn::train_from(init_params(&cfg, 1).unwrap(), &data, &spec, &tc).unwrap();
        assert_eq!(out.epoch_loss.len(), 10);
        assert!(out.epoch_loss.iter().all(|l| l.is_finite()));
        assert!(out.epoch_loss.last() < out.epoch_loss.first());
    }
}
