use eoslab::cli::{ExperimentConfig, Params};
use eoslab::diagnostics::format_float;
use eoslab::numerics::RandomStream;
use eoslab::stability::{expected_loss_change, PosteriorSpec, QuadraticProblem};
use eoslab::training::{OptimizerKind, TrainConfig};
use eoslab::Objective;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #[test]
    fn noiseless_expected_change_is_the_gd_step(
        seed in any::<u64>(),
        d in 1usize..6,
        rho in 0.01f64..1.0,
    ) {
        let mut rng = RandomStream::new(seed).rng();
        let ev: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..3.0) / rho).collect();
        let q = QuadraticProblem::random_rotation(&ev, &mut rng).unwrap();
        let m: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let g = q.gradient(&m);
        let next: Vec<f64> = m.iter().zip(&g).map(|(a, b)| a - rho * b).collect();
        let realised = q.loss(&next) - q.loss(&m);
        let expected = expected_loss_change(&q, &m, rho, &PosteriorSpec::noiseless(d)).unwrap();
        let scale = q.loss(&m).max(q.loss(&next)).max(1e-12);
        prop_assert!((realised - expected).abs() <= 1e-10 * scale, "{realised} vs {expected}");
    }

    #[test]
    fn float_text_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let back: f64 = format_float(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn streams_depend_only_on_path(seed in any::<u64>(), i in 0u64..1000, j in 0u64..1000) {
        let a: u64 = RandomStream::new(seed).child(i).child(j).rng().gen();
        let b: u64 = RandomStream::new(seed).child(i).child(j).rng().gen();
        prop_assert_eq!(a, b);
        if i != j {
            let c: u64 = RandomStream::new(seed).child(j).child(i).rng().gen();
            prop_assert_ne!(a, c);
        }
    }

    #[test]
    fn train_config_round_trips_through_toml(
        seed in 0..=i64::MAX as u64,
        rho in 1e-4f64..1.0,
        sigma2 in 0.0f64..1.0,
        n_samples in 1usize..16,
        steps in 1u64..100_000,
        hidden in proptest::collection::vec(1usize..128, 0..4),
        vgd in any::<bool>(),
    ) {
        let config = ExperimentConfig::new(seed, Params::Train(TrainConfig {
            optimizer: if vgd { OptimizerKind::Vgd } else { OptimizerKind::Gd },
            rho,
            sigma2,
            n_samples,
            steps,
            hidden,
            ..TrainConfig::default()
        }));
        let back = ExperimentConfig::from_toml_str(&config.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, config);
    }
}
