use proptest::prelude::*;

use tensor_complete::tv::{laplacian, shrink, tv_norm};
use tensor_complete::{khatri_rao, DenseTensor, Matrix};

fn shape_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 1..5)
}

fn tensor_strategy() -> impl Strategy<Value = DenseTensor> {
    shape_strategy().prop_flat_map(|shape| {
        let len: usize = shape.iter().product();
        prop::collection::vec(-10.0f64..10.0, len).prop_map(move |data| DenseTensor::new(shape.clone(), data).unwrap())
    })
}

fn column(v: &[f64]) -> Matrix {
    Matrix::new(v.len(), 1, v.to_vec()).unwrap()
}

proptest! {
    #[test]
    fn fold_inverts_unfold(t in tensor_strategy(), mode_seed in 0usize..8) {
        let mode = mode_seed % t.order();
        let m = t.unfold(mode).unwrap();
        prop_assert_eq!(DenseTensor::fold(&m, mode, t.shape()).unwrap(), t);
    }

    #[test]
    fn unfolded_outer_product_is_khatri_rao(vectors in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 1..5), 2..5), mode_seed in 0usize..8) {
        let mode = mode_seed % vectors.len();
        let t = DenseTensor::outer(&vectors).unwrap();
        // Remaining modes ascending, lowest fastest: the highest mode is the outer Khatri-Rao factor.
        let mut acc: Option<Matrix> = None;
        for (k, v) in vectors.iter().enumerate() {
            if k == mode {
                continue;
            }
            acc = Some(match acc {
                None => column(v),
                Some(fast) => khatri_rao(&column(v), &fast).unwrap(),
            });
        }
        let expected = column(&vectors[mode]).matmul(&acc.unwrap().transpose()).unwrap();
        let got = t.unfold(mode).unwrap();
        for (a, b) in got.data().iter().zip(expected.data()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn mode_products_compose(
        t in tensor_strategy(),
        mode_seed in 0usize..8,
        a_data in prop::collection::vec(-2.0f64..2.0, 36),
        b_data in prop::collection::vec(-2.0f64..2.0, 36),
    ) {
        let mode = mode_seed % t.order();
        let d = t.shape()[mode];
        let a = Matrix::new(3, d, a_data[..3 * d].to_vec()).unwrap();
        let b = Matrix::new(2, 3, b_data[..6].to_vec()).unwrap();
        let stepwise = t.mode_product(mode, &a).unwrap().mode_product(mode, &b).unwrap();
        let direct = t.mode_product(mode, &b.matmul(&a).unwrap()).unwrap();
        let scale = 1.0 + direct.inf_norm();
        prop_assert!(stepwise.sub(&direct).unwrap().inf_norm() <= 1e-12 * scale);

        if t.order() > 1 {
            let other = (mode + 1) % t.order();
            let e = t.shape()[other];
            let c = Matrix::new(2, e, b_data[..2 * e].to_vec()).unwrap();
            let ac = t.mode_product(mode, &a).unwrap().mode_product(other, &c).unwrap();
            let ca = t.mode_product(other, &c).unwrap().mode_product(mode, &a).unwrap();
            prop_assert!(ac.sub(&ca).unwrap().inf_norm() <= 1e-12 * (1.0 + ac.inf_norm()));
        }
    }

    #[test]
    fn hadamard_norm_inequality(t in tensor_strategy(), seed in any::<u64>()) {
        let mut s = seed;
        let other = t.map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        });
        let h = t.hadamard(&other).unwrap();
        prop_assert!(h.frobenius_norm() <= t.frobenius_norm() * other.inf_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn laplacian_is_linear(t in tensor_strategy(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let u = t.map(|v| (v * 1.7).sin());
        let combo = t.scale(a).add(&u.scale(b)).unwrap();
        let lhs = laplacian(&combo);
        let rhs = laplacian(&t).scale(a).add(&laplacian(&u).scale(b)).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().inf_norm() <= 1e-10);
    }

    #[test]
    fn tv_ignores_constant_shift(t in tensor_strategy(), c in -5.0f64..5.0) {
        let shifted = t.map(|v| v + c);
        let (a, b) = (tv_norm(&t), tv_norm(&shifted));
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
        prop_assert!(tv_norm(&DenseTensor::filled(t.shape(), c).unwrap()) == 0.0);
    }

    #[test]
    fn shrink_is_a_contraction(x in -10.0f64..10.0, y in -10.0f64..10.0, lambda in 0.0f64..3.0) {
        prop_assert!((shrink(x, lambda) - shrink(y, lambda)).abs() <= (x - y).abs() + 1e-12);
        prop_assert!(shrink(x, lambda).abs() <= x.abs());
    }
}
