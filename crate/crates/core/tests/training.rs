use std::sync::OnceLock;

use lodsdf::geometry::{desk_shapes, sample_training_set, AnalyticShape, SdfSample, SdfSampleSet};
use lodsdf::network::{Conditioning, NetworkConfig, NetworkParams};
use lodsdf::training::{
    fine_mse, fit_latent, fit_latent_masked, grad_check, sdf_loss, train, FitConfig, FullMask, HalfSpaceMask,
    LossBatch, LossWeights, TrainConfig, TrainOutput, TrainingError,
};
use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_samples(rng: &mut ChaCha8Rng, n: usize) -> Vec<SdfSample> {
    let shape = AnalyticShape::sphere(Point3::new(0.05, 0.0, -0.05), 0.3).unwrap();
    (0..n)
        .map(|_| {
            let p = Point3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            );
            SdfSample { position: p, distance: shape.distance(&p) }
        })
        .collect()
}

fn tiny_net(rng: &mut ChaCha8Rng, conditioning: Conditioning) -> (NetworkParams, Vec<f64>) {
    let cfg = NetworkConfig {
        layers: rng.random_range(3..=5),
        hidden: rng.random_range(2..=8),
        latent: rng.random_range(1..=4),
        max_bandwidth: rng.random_range(4.0..24.0),
        conditioning,
        ..NetworkConfig::desk()
    };
    let params = NetworkParams::init(&cfg, rng.random()).unwrap();
    let latent = (0..cfg.latent).map(|_| rng.random_range(-0.5..0.5)).collect();
    (params, latent)
}

#[test]
fn hand_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for conditioning in [Conditioning::HiddenConcat, Conditioning::InputConcat, Conditioning::OutputConcat] {
        for _ in 0..6 {
            let (params, latent) = tiny_net(&mut rng, conditioning);
            let fine = random_samples(&mut rng, 5);
            let coarse = random_samples(&mut rng, 3);
            let batch = LossBatch::new(fine.iter(), coarse.iter(), 1e-2);
            let weights = LossWeights { lambda_c: 1e-2, lambda_reg: 1e-3 };
            let levels: Vec<usize> = (1..params.layers()).collect();
            let report = grad_check(&params, &latent, &batch, &weights, &levels, 1e-4).unwrap();
            println!("{conditioning:?} {:?}", report.per_class);
            assert!(report.max_rel_error() < 1e-4, "{:?}", report.per_class);
        }
    }
}

#[test]
fn latent_gradient_predicts_directional_change() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..10 {
        let (params, latent) = tiny_net(&mut rng, Conditioning::HiddenConcat);
        let fine = random_samples(&mut rng, 8);
        let coarse = random_samples(&mut rng, 8);
        let batch = LossBatch::new(fine.iter(), coarse.iter(), 1e-2);
        let weights = LossWeights { lambda_c: 1e-2, lambda_reg: 1e-3 };
        let levels: Vec<usize> = (1..params.layers()).collect();
        let (base, grads) = sdf_loss(&params, &latent, &batch, &weights, &levels, false).unwrap();
        let dir: Vec<f64> = (0..latent.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let slope: f64 = grads.latent.iter().zip(&dir).map(|(g, d)| g * d).sum();
        // the first-order remainder shrinks quadratically with the step
        let remainder = |t: f64| {
            let moved: Vec<f64> = latent.iter().zip(&dir).map(|(l, d)| l + t * d).collect();
            let (loss, _) = sdf_loss(&params, &moved, &batch, &weights, &levels, false).unwrap();
            (loss.total - base.total - t * slope).abs()
        };
        let (r1, r2) = (remainder(1e-3), remainder(5e-4));
        assert!(r2 < 0.3 * r1 + 1e-15, "{r1:e} -> {r2:e}");
    }
}

struct SphereRun {
    data: Vec<SdfSampleSet>,
    out: TrainOutput,
}

/// One analytic sphere, d_h = 32, d_l = 16, 5k steps.
fn sphere_run() -> &'static SphereRun {
    static RUN: OnceLock<SphereRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let sphere = desk_shapes().into_iter().find(|(n, _)| *n == "sphere").unwrap().1;
        let data = vec![sample_training_set(&sphere, 20_000, 0.05, 3).unwrap()];
        let net = NetworkConfig { hidden: 32, latent: 16, ..NetworkConfig::desk() };
        let cfg = TrainConfig { steps: 5000, samples_per_shape: 256, ..TrainConfig::default() };
        let out = train(&data, &cfg, &net, |_| {}).unwrap();
        SphereRun { data, out }
    })
}

#[test]
fn single_sphere_overfits() {
    let run = sphere_run();
    assert_eq!(run.out.codebook.len(), 1);
    let level = run.out.params.config.heads();
    let mse = fine_mse(&run.out.params, run.out.codebook.row(0), &run.data[0], level).unwrap();
    assert!(mse < 1e-4, "{mse:e}");
    assert!(run.out.params.max_frequency_ratio() < 1.0);
}

#[test]
fn smoothed_loss_does_not_increase() {
    let avg = sphere_run().out.history.moving_average(200);
    let checkpoints: Vec<f64> = avg.iter().step_by(200).copied().collect();
    // minibatch noise on the final plateau is about 1% per window
    for pair in checkpoints.windows(2) {
        assert!(pair[1] <= 1.05 * pair[0], "{checkpoints:?}");
    }
    assert!(checkpoints.last().unwrap() * 100.0 < checkpoints[0]);
}

#[test]
fn refitting_a_training_shape_recovers_its_loss() {
    let run = sphere_run();
    let params = &run.out.params;
    let set = &run.data[0];
    let fitted = fit_latent(params, set, &FitConfig { samples_per_step: 512, ..FitConfig::default() }).unwrap();
    let weights = LossWeights { lambda_c: 1e-2, lambda_reg: 1e-4 };
    let levels: Vec<usize> = (1..params.layers()).collect();
    let batch = LossBatch::new(set.fine.iter(), set.coarse.iter(), 1e-2);
    let loss = |l: &[f64]| sdf_loss(params, l, &batch, &weights, &levels, false).unwrap().0.total;
    let (fit_loss, book_loss) = (loss(&fitted.0), loss(run.out.codebook.row(0)));
    assert!(fit_loss <= 2.0 * book_loss, "{fit_loss:e} vs {book_loss:e}");
}

#[test]
fn fitting_edge_cases() {
    let run = sphere_run();
    let params = &run.out.params;
    let set = &run.data[0];
    let zero = fit_latent(params, set, &FitConfig { steps: 0, ..FitConfig::default() }).unwrap();
    assert!(zero.0.iter().all(|v| *v == 0.0));

    let cfg = FitConfig { steps: 30, samples_per_step: 256, ..FitConfig::default() };
    let a = fit_latent(params, set, &cfg).unwrap();
    assert_eq!(a, fit_latent(params, set, &cfg).unwrap());
    assert_eq!(a, fit_latent_masked(params, set, &FullMask, &cfg).unwrap());

    let sliver: HalfSpaceMask = "halfspace:x<-0.5".parse().unwrap();
    assert!(matches!(fit_latent_masked(params, set, &sliver, &cfg), Err(TrainingError::Mask(_))));
    let outside: HalfSpaceMask = "halfspace:x>2".parse().unwrap();
    assert!(matches!(fit_latent_masked(params, set, &outside, &cfg), Err(TrainingError::Mask(_))));
}

#[test]
fn training_is_deterministic() {
    let shapes = desk_shapes();
    let data: Vec<_> = shapes[..2]
        .iter()
        .enumerate()
        .map(|(i, (_, s))| {
            let mut d = sample_training_set(s, 2000, 0.05, i as u64).unwrap();
            d.shape_id = i;
            d
        })
        .collect();
    let net = NetworkConfig { layers: 4, hidden: 8, latent: 4, ..NetworkConfig::desk() };
    let cfg = TrainConfig { steps: 40, samples_per_shape: 32, ..TrainConfig::default() };
    let (a, b) = (train(&data, &cfg, &net, |_| {}).unwrap(), train(&data, &cfg, &net, |_| {}).unwrap());
    assert_eq!(a.params, b.params);
    assert_eq!(a.codebook, b.codebook);
    assert_eq!(a.history.to_csv(), b.history.to_csv());
    assert_eq!(a.codebook.len(), 2);
}

#[test]
fn runaway_learning_rate_reports_divergence() {
    let sphere = desk_shapes().into_iter().next().unwrap().1;
    let data = vec![sample_training_set(&sphere, 2000, 0.05, 0).unwrap()];
    let net = NetworkConfig { layers: 4, hidden: 8, latent: 4, ..NetworkConfig::desk() };
    let cfg = TrainConfig { steps: 200, lr_start: 1e150, lr_end: 1e150, ..TrainConfig::default() };
    assert!(matches!(train(&data, &cfg, &net, |_| {}), Err(TrainingError::Diverged { .. })));
}
