//! Behavioural properties of fair supernet training.

use pathnas::supernet::{
    train_standalone, SupernetConfig, SupernetState, TaskConfig, ToyTask, TrainingRun,
};
use pathnas::{Architecture, LayerGroup, SearchSpace};

fn labels(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Paper-shaped choice counts {4, 6, 3} at toy depth.
fn mixed_space() -> SearchSpace {
    SearchSpace::new(vec![
        LayerGroup::anonymous("backbone", 2, 4).unwrap(),
        LayerGroup::anonymous("head", 1, 6).unwrap(),
        LayerGroup::new("inter", 1, labels(&["r4", "r8", "r16"])).unwrap(),
    ])
    .unwrap()
}

fn small_task() -> TaskConfig {
    TaskConfig {
        train_size: 384,
        val_size: 192,
        ..Default::default()
    }
}

#[test]
fn update_counts_exactly_equal_after_every_macro_step() {
    let cfg = small_task();
    let task = ToyTask::<f64>::generate(&cfg).unwrap();
    let mut run = TrainingRun::new(&mixed_space(), &cfg, &SupernetConfig::default()).unwrap();
    assert_eq!(run.state().accumulation_window(), 12);
    for n in 1..=5u64 {
        run.macro_step(&task).unwrap();
        let counts = run.state().update_counts();
        for (layer, row) in counts.iter().enumerate() {
            let per_block = 12 / row.len() as u64 * n;
            assert!(
                row.iter().all(|&c| c == per_block),
                "layer {layer} after {n} steps: {row:?}"
            );
        }
    }
}

#[test]
fn epoch_mean_loss_decreases() {
    let cfg = TaskConfig::default();
    let task = ToyTask::<f64>::generate(&cfg).unwrap();
    let space = SearchSpace::uniform(3, 3).unwrap();
    let mut run = TrainingRun::new(&space, &cfg, &SupernetConfig::default()).unwrap();
    // one epoch = one pass over the training batches
    let steps_per_epoch = (task.train().len() / 3) as u64;
    let epochs: Vec<f64> = (0..8)
        .map(|_| {
            let s = run.train(&task, steps_per_epoch).unwrap();
            s.losses.iter().sum::<f64>() / s.losses.len() as f64
        })
        .collect();
    assert!(epochs.last().unwrap() < &epochs[0], "{epochs:?}");
}

#[test]
fn untrained_accuracy_is_chance_level() {
    let cfg = TaskConfig {
        num_classes: 2,
        val_size: 400,
        ..Default::default()
    };
    let task = ToyTask::<f64>::generate(&cfg).unwrap();
    let space = SearchSpace::uniform(3, 3).unwrap();
    let accs: Vec<f64> = (0..20)
        .map(|seed| {
            let s = SupernetState::new(
                &space,
                cfg.input_dim,
                2,
                &SupernetConfig {
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            s.estimate_fitness(&Architecture::new(vec![0, 1, 2]), task.val())
                .unwrap()
        })
        .collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((mean - 0.5).abs() <= 0.1, "mean untrained accuracy {mean}");
}

#[test]
fn standalone_path_learns_separable_task() {
    let cfg = TaskConfig {
        num_classes: 2,
        clusters_per_class: 1,
        center_scale: 2.0,
        spread: 0.4,
        ..Default::default()
    };
    let task = ToyTask::<f64>::generate(&cfg).unwrap();
    let space = SearchSpace::uniform(3, 3).unwrap();
    let acc = train_standalone(
        &space,
        &Architecture::zeros(3),
        &task,
        &SupernetConfig::default(),
        200,
    )
    .unwrap();
    assert!(acc > 0.9, "accuracy {acc}");
}

#[test]
fn training_is_deterministic() {
    let cfg = small_task();
    let task = ToyTask::<f64>::generate(&cfg).unwrap();
    let go = || {
        let mut run = TrainingRun::new(
            &mixed_space(),
            &cfg,
            &SupernetConfig {
                seed: 4,
                ..Default::default()
            },
        )
        .unwrap();
        run.train(&task, 3).unwrap();
        run.to_bytes().unwrap()
    };
    assert_eq!(go(), go());
}

#[test]
fn f32_supernet_trains() {
    let cfg = small_task();
    let task = ToyTask::<f32>::generate(&cfg).unwrap();
    let mut run =
        TrainingRun::<f32>::new(&mixed_space(), &cfg, &SupernetConfig::default()).unwrap();
    let s = run.train(&task, 20).unwrap();
    assert!(s.losses.iter().all(|l| l.is_finite()));
    let bytes = run.to_bytes().unwrap();
    let back = TrainingRun::<f32>::from_bytes(&bytes).unwrap();
    assert_eq!(back.state(), run.state());
}
