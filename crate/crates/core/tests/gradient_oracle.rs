//! Finite-difference oracle for every supernet block type and for the
//! attention composition.

use pathnas::attention::{gradient_check_attention, AttentionBlock, Direction, FeatureMap};
use pathnas::supernet::{gradient_errors, Batch, BlockKind, SupernetConfig, SupernetState};
use pathnas::{Architecture, LayerGroup, SearchSpace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;

fn labels(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Every activation, wide and narrow, plus all three attention ratios.
fn all_kinds_space() -> SearchSpace {
    SearchSpace::new(vec![
        LayerGroup::new("wide", 1, labels(&["relu", "tanh", "linear", "softplus"])).unwrap(),
        LayerGroup::new(
            "narrow",
            1,
            labels(&[
                "relu-narrow",
                "tanh-narrow",
                "linear-narrow",
                "softplus-narrow",
            ]),
        )
        .unwrap(),
        LayerGroup::new("attn", 1, labels(&["r4", "r8", "r16"])).unwrap(),
    ])
    .unwrap()
}

fn batch(seed: u64, n: usize, dim: usize, classes: usize) -> Batch<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Batch {
        inputs: (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect())
            .collect(),
        labels: (0..n).map(|i| i % classes).collect(),
    }
}

#[test]
fn supernet_gradients_match_finite_differences() {
    let space = all_kinds_space();
    let state = SupernetState::<f64>::new(
        &space,
        6,
        3,
        &SupernetConfig {
            seed: 11,
            ..Default::default()
        },
    )
    .unwrap();
    let b = batch(1, 5, 6, 3);
    let mut seen = std::collections::HashSet::new();
    for i in 0..4 {
        let arch = Architecture::new(vec![i, (i + 1) % 4, i % 3]);
        let errors = gradient_errors(&state, &arch, &b, STEP).unwrap();
        for (l, &c) in arch.choices().iter().enumerate() {
            let kind = state.block(l, c).kind();
            assert!(
                errors[l] < TOLERANCE,
                "{kind}: relative error {}",
                errors[l]
            );
            seen.insert(kind);
        }
        assert!(errors[3] < TOLERANCE, "classifier: {}", errors[3]);
    }
    assert_eq!(seen.len(), 11);
    assert!(seen.contains(&BlockKind::Attention { ratio: 16 }));
}

#[test]
fn deep_stack_gradients() {
    let space = SearchSpace::new(vec![
        LayerGroup::new("a", 3, labels(&["tanh", "softplus-narrow", "relu"])).unwrap(),
        LayerGroup::new("b", 2, labels(&["r4", "r8"])).unwrap(),
    ])
    .unwrap();
    let state = SupernetState::<f64>::new(
        &space,
        4,
        2,
        &SupernetConfig {
            seed: 2,
            ..Default::default()
        },
    )
    .unwrap();
    let b = batch(7, 4, 4, 2);
    for arch in [
        vec![0, 1, 2, 0, 1],
        vec![1, 0, 1, 1, 0],
        vec![2, 2, 0, 0, 0],
    ] {
        let err =
            pathnas::supernet::gradient_check(&state, &Architecture::new(arch.clone()), &b, STEP)
                .unwrap();
        assert!(err < TOLERANCE, "{arch:?}: {err}");
    }
}

#[test]
fn attention_composition_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    use rand::Rng;
    for (seed, r) in [(0u64, 4usize), (1, 8)] {
        let sources = vec![
            FeatureMap::from_fn(3, 4, 4, |c, y, x| {
                ((c * 7 + y * 3 + x + seed as usize) as f64 * 0.37).sin()
            })
            .unwrap(),
            FeatureMap::from_fn(5, 2, 2, |c, y, x| ((c + 2 * y + x) as f64 * 0.61).cos()).unwrap(),
        ];
        let target = FeatureMap::from_fn(8, 4, 4, |_, _, _| rng.gen_range(-1.0..1.0)).unwrap();
        let block =
            AttentionBlock::<f64>::random(8, 8, r, Direction::ForegroundToBackground, &mut rng)
                .unwrap();
        let err = gradient_check_attention(&block, &sources, &target, STEP).unwrap();
        assert!(err < TOLERANCE, "r={r}: {err}");
    }
}
