//! Golden values computed by an independent NumPy re-implementation.

use approx::assert_relative_eq;
use pathnas::attention::{AttentionBlock, Direction};
use pathnas::linalg::Matrix;
use pathnas::oracle::{FitnessLandscape, LandscapeKind, LandscapeParams};
use pathnas::supernet::{Batch, SupernetConfig, SupernetState};
use pathnas::{Architecture, LayerGroup, SearchSpace};

const FIXTURE: &str = include_str!("fixtures/interacting_3x3_seed42.json");

fn arch(v: &[usize]) -> Architecture {
    Architecture::new(v.to_vec())
}

#[test]
fn interacting_landscape_generation_is_frozen() {
    let space = SearchSpace::uniform(3, 3).unwrap();
    let params = LandscapeParams {
        interaction_count: 6,
        ..Default::default()
    };
    let generated =
        FitnessLandscape::<f64>::generate(&space, LandscapeKind::Interacting, 42, &params).unwrap();
    assert_eq!(generated, FitnessLandscape::from_json(FIXTURE).unwrap());
}

#[test]
fn interacting_fitness_golden() {
    let l = FitnessLandscape::<f64>::from_json(FIXTURE).unwrap();
    let golden = [
        ([0, 0, 0], 1.7765356845478675),
        ([0, 0, 2], 2.329836368052372),
        ([1, 0, 1], 2.174243696602945),
        ([2, 2, 1], 1.4077927756101924),
        ([2, 1, 2], 1.4873590628005595),
    ];
    for (a, f) in golden {
        assert_relative_eq!(l.fitness(&arch(&a)).unwrap(), f, max_relative = 1e-14);
    }
    let (best, f) = l.brute_force_optimum(1000).unwrap();
    assert_eq!(best, arch(&[0, 0, 2]));
    assert_relative_eq!(f, 2.329836368052372, max_relative = 1e-14);
}

#[test]
fn hashed_noise_golden() {
    let mut doc = FitnessLandscape::<f64>::from_json(FIXTURE)
        .unwrap()
        .to_document();
    doc.noise_sigma = 0.05;
    let l = FitnessLandscape::<f64>::from_document(&doc).unwrap();
    let golden = [
        ([0, 0, 0], 1.77333457844101),
        ([0, 0, 2], 2.306272087400177),
        ([1, 0, 1], 2.252152866752022),
        ([2, 2, 1], 1.5246386669502558),
        ([2, 1, 2], 1.4936178499709198),
    ];
    for (a, f) in golden {
        assert_relative_eq!(l.fitness(&arch(&a)).unwrap(), f, max_relative = 1e-12);
    }
}

#[test]
fn excite_golden() {
    let w1 = Matrix::from_fn(8, 2, |i, j| {
        0.5 * (0.7 * i as f64 - 0.3 * j as f64 + 0.2).sin()
    });
    let w2 = Matrix::from_fn(2, 4, |i, j| {
        0.4 * (0.5 * i as f64 + 0.9 * j as f64 - 0.1).cos()
    });
    let block = AttentionBlock::new(4, 8, 4, Direction::ForegroundToBackground, w1, w2).unwrap();
    let a = block.excite(&[0.3, -1.2, 0.8, 2.0]).unwrap();
    let golden = [
        0.03492087086864885,
        0.4884825396696826,
        0.712303237313835,
        0.6011165924041888,
        0.20721542138100077,
        0.0,
        0.0,
        0.0,
    ];
    for (x, g) in a.iter().zip(golden) {
        assert_relative_eq!(*x, g, max_relative = 1e-12);
    }
}

fn formula_matrix(k: usize, rows: usize, cols: usize, offset: f64) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |r, c| {
        0.5 * (1.3 * k as f64 + 0.7 * r as f64 - 0.45 * c as f64 + 0.1).sin() + offset
    })
}

#[test]
fn supernet_logits_golden() {
    let one = |name: &str, label: &str| LayerGroup::new(name, 1, vec![label.to_string()]).unwrap();
    let space = SearchSpace::new(vec![
        one("a", "tanh"),
        one("b", "relu-narrow"),
        one("c", "r4"),
        one("d", "softplus"),
    ])
    .unwrap();
    let mut s = SupernetState::<f64>::new(
        &space,
        4,
        3,
        &SupernetConfig {
            hidden_width: 8,
            ..Default::default()
        },
    )
    .unwrap();
    let shapes = [(8, 4), (8, 8), (8, 2), (8, 8)];
    for (l, (rows, cols)) in shapes.into_iter().enumerate() {
        let params = s.block_params_mut(l, 0);
        if l == 2 {
            params[0] = formula_matrix(4, 8, 2, 0.0);
            params[1] = formula_matrix(5, 2, 8, 0.0);
        } else {
            let k = if l == 3 { 6 } else { 2 * l };
            params[0] = formula_matrix(k, rows, cols, 0.0);
            params[1] = formula_matrix(k + 1, rows, 1, 0.3);
        }
    }
    let head = s.head_params_mut();
    head[0] = formula_matrix(8, 3, 8, 0.0);
    head[1] = formula_matrix(9, 3, 1, 0.3);

    let inputs = (0..3)
        .map(|s| {
            (0..4)
                .map(|i| 0.6 * (s + 1) as f64 * (i as f64 - 1.5) + 0.8 * ((3 * s + i) as f64).cos())
                .collect()
        })
        .collect();
    let batch = Batch {
        inputs,
        labels: vec![0, 1, 2],
    };
    let (logits, _) = s.forward(&Architecture::zeros(4), &batch).unwrap();
    let golden = [
        [0.8531198726719684, 0.1708262295826336, -0.45071497088357604],
        [
            -1.4594242689904322,
            -3.3291934675005592,
            -3.4920962705329783,
        ],
        [-1.1412799945200882, -2.635965657003827, -2.749820795269808],
    ];
    for (row, g) in logits.iter().zip(golden) {
        for (x, y) in row.iter().zip(g) {
            assert_relative_eq!(*x, y, max_relative = 1e-12);
        }
    }
}
