//! Property tests of the crossbar and quantizer invariants.

use crossbar_core::crossbar::{crossbar_matvec, Device, InputEncoding, TileShape};
use crossbar_core::device::{ideal_ladder, NoiseSpec};
use crossbar_core::quantizer::{quantize, sse};
use crossbar_core::{rng, Matrix};
use proptest::prelude::*;

const R_MIN: f64 = 9402.0;
const R_MAX: f64 = 9919.5;

/// Weights, input, state count and tile shape.
#[derive(Debug, Clone)]
struct Case {
    w: Matrix,
    x: Vec<f64>,
    n_states: usize,
    tile: TileShape,
}

fn case() -> impl Strategy<Value = Case> {
    (1usize..=12, 1usize..=12, 1usize..=8, 1usize..=5, 1usize..=5).prop_flat_map(|(m, n, n_states, tr, tc)| {
        (
            proptest::collection::vec(-3.0f64..3.0, m * n),
            proptest::collection::vec(-2.0f64..2.0, n),
        )
            .prop_map(move |(w, x)| Case {
                w: Matrix::from_vec(m, n, w).unwrap(),
                x,
                n_states,
                tile: TileShape::new(tr, tc).unwrap(),
            })
    })
}

fn encoding() -> impl Strategy<Value = InputEncoding> {
    (prop_oneof![-1e-2f64..-1e-5, 1e-5f64..1e-2], -1e-3f64..1e-3).prop_map(|(a_i, b_i)| InputEncoding { a_i, b_i })
}

fn ideal(n_states: usize) -> Device {
    Device::ideal(ideal_ladder(n_states, R_MIN, R_MAX).unwrap())
}

fn run(c: &Case, x: &[f64], tile: TileShape, input: &InputEncoding) -> Vec<f64> {
    let q = quantize(&c.w, c.n_states).unwrap();
    crossbar_matvec(&q, x, tile, &ideal(c.n_states), input, &mut rng::root(0), None).unwrap().y_tilde
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(a, b)| (a - b).abs() <= tol * (1.0 + b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn noiseless_retrieval_is_exact_for_any_tiling(c in case(), input in encoding()) {
        let q = quantize(&c.w, c.n_states).unwrap();
        let exact = q.values().matvec(&c.x).unwrap();
        let tiled = run(&c, &c.x, c.tile, &input);
        let whole = run(&c, &c.x, TileShape::new(c.w.rows(), c.w.cols()).unwrap(), &input);
        prop_assert!(close(&tiled, &exact, 1e-9), "tiled {tiled:?} vs {exact:?}");
        prop_assert!(close(&whole, &exact, 1e-9), "single tile {whole:?} vs {exact:?}");
    }

    #[test]
    fn retrieval_divides_the_encoding_out(c in case(), e1 in encoding(), e2 in encoding()) {
        let y1 = run(&c, &c.x, c.tile, &e1);
        let y2 = run(&c, &c.x, c.tile, &e2);
        prop_assert!(close(&y1, &y2, 1e-9), "{y1:?} vs {y2:?}");
    }

    #[test]
    fn outputs_are_affine_in_the_input(c in case(), x2 in proptest::collection::vec(-2.0f64..2.0, 12), input in encoding()) {
        let x2 = &x2[..c.x.len()];
        let sum: Vec<f64> = c.x.iter().zip(x2).map(|(a, b)| a + b).collect();
        let zero = vec![0.0; c.x.len()];
        let y_sum = run(&c, &sum, c.tile, &input);
        let y1 = run(&c, &c.x, c.tile, &input);
        let y2 = run(&c, x2, c.tile, &input);
        let y0 = run(&c, &zero, c.tile, &input);
        let composed: Vec<f64> = (0..y1.len()).map(|i| y1[i] + y2[i] - y0[i]).collect();
        prop_assert!(close(&y_sum, &composed, 1e-9), "{y_sum:?} vs {composed:?}");
    }

    #[test]
    fn noisy_products_are_seed_determined(c in case(), seed in any::<u64>()) {
        let q = quantize(&c.w, c.n_states).unwrap();
        let device = Device::new(ideal_ladder(c.n_states, R_MIN, R_MAX).unwrap(), NoiseSpec::new(50.0, 50.0, seed).unwrap());
        let go = || {
            crossbar_matvec(&q, &c.x, c.tile, &device, &InputEncoding::UNIT_TO_HALF_MILLIAMP, &mut rng::root(seed), None)
                .unwrap()
                .y_tilde
        };
        prop_assert_eq!(go(), go());
    }

    #[test]
    fn every_weight_goes_to_a_nearest_level(w in proptest::collection::vec(-5.0f64..5.0, 1..40), n in 1usize..=10) {
        let m = Matrix::from_vec(1, w.len(), w.clone()).unwrap();
        let q = quantize(&m, n).unwrap();
        let levels = q.level_set().levels();
        for (i, &wi) in w.iter().enumerate() {
            let assigned = (wi - levels[q.assignment()[i]]).abs();
            let best = levels.iter().map(|l| (wi - l).abs()).fold(f64::INFINITY, f64::min);
            prop_assert!(assigned <= best + 1e-12, "weight {wi}: {assigned} vs {best}");
        }
    }

    #[test]
    fn requantizing_is_lossless(w in proptest::collection::vec(-5.0f64..5.0, 1..40), n in 1usize..=10) {
        let m = Matrix::from_vec(1, w.len(), w).unwrap();
        let q = quantize(&m, n).unwrap();
        let again = quantize(q.values(), n).unwrap();
        let scale: f64 = q.values().as_slice().iter().map(|v| v * v).sum::<f64>() + 1.0;
        prop_assert!(again.sse() <= 1e-20 * scale, "sse after requantizing {}", again.sse());
    }

    #[test]
    fn more_states_never_lose_to_one(w in proptest::collection::vec(-5.0f64..5.0, 1..40)) {
        let one = sse(&w, quantize(&Matrix::from_vec(1, w.len(), w.clone()).unwrap(), 1).unwrap().level_set());
        for n in [2, 4, 8, 16, 32, 64] {
            let q = quantize(&Matrix::from_vec(1, w.len(), w.clone()).unwrap(), n).unwrap();
            prop_assert!(q.sse() <= one + 1e-9, "N={n}: {} > {one}", q.sse());
        }
    }

    #[test]
    fn ideal_ladders_are_equidistant(n in 2usize..=64, r_min in 100.0f64..1e4, span in 1.0f64..1e4) {
        let ladder = ideal_ladder(n, r_min, r_min + span).unwrap();
        let s = ladder.nominal_states();
        let d0 = s[1] - s[0];
        for w in s.windows(2) {
            prop_assert!(((w[1] - w[0]) - d0).abs() < 1e-9 * span);
        }
    }
}
