use ndiff::gradcheck::{check, op_suite, DEFAULT_EPS};
use ndiff::{Tape, Tensor};
use proptest::prelude::*;

#[test]
fn every_op_matches_finite_differences() {
    let reports = op_suite(10, 0x5eed).unwrap();
    for r in &reports {
        println!("{:<22} {:.2e}", r.op, r.max_rel_err);
        assert!(r.max_rel_err < 1e-4, "{}: {:e}", r.op, r.max_rel_err);
    }
}

#[test]
fn composed_attention_block() {
    let mut seed = 1u64;
    let mut next = || {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let mut m = |r: usize, c: usize| Tensor::matrix(r, c, (0..r * c).map(|_| next()).collect()).unwrap();
    let inputs = vec![m(3, 4), m(4, 4), m(4, 4), m(1, 4), m(1, 4)];
    let err = check(&inputs, DEFAULT_EPS, |_, x| {
        let q = x[0].matmul(x[1])?;
        let k = x[0].matmul(x[2])?;
        let att = q.matmul(k.transpose()?)?.scale(0.5).softmax(1)?;
        let h = att.matmul(x[0])?.add(x[0])?;
        let y = h.layer_norm(x[3], x[4], 1e-5)?.relu();
        Ok(y.mul(y)?.sum())
    })
    .unwrap();
    assert!(err < 1e-4, "{err:e}");
}

fn matrix(max: usize) -> impl Strategy<Value = Tensor> {
    (1..max, 1..max).prop_flat_map(|(r, c)| {
        prop::collection::vec(-5.0f64..5.0, r * c)
            .prop_map(move |d| Tensor::matrix(r, c, d).unwrap())
    })
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(x in matrix(6)) {
        let tape = Tape::new();
        let y = tape.leaf(x).softmax(1).unwrap().value();
        for i in 0..y.rows() {
            let s: f64 = y.row_slice(i).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn masked_positions_are_exactly_zero(x in matrix(6), bits in any::<u64>()) {
        let (r, c) = (x.rows(), x.cols());
        let mask: Vec<bool> = (0..r * c).map(|i| i % c == 0 || (bits >> (i % 64)) & 1 == 1).collect();
        let tape = Tape::new();
        let y = tape.leaf(x).masked_softmax(1, &mask).unwrap().value();
        for (v, m) in y.data().iter().zip(&mask) {
            if !m { prop_assert_eq!(*v, 0.0); }
        }
        for i in 0..r {
            let s: f64 = y.row_slice(i).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn segment_sum_preserves_total(x in matrix(8), seed in any::<u64>()) {
        let ids: Vec<usize> = (0..x.rows()).map(|i| ((seed >> (i % 60)) % 3) as usize).collect();
        let total = x.sum();
        let tape = Tape::new();
        let s = tape.leaf(x).segment_sum(ids, 3).unwrap().value();
        prop_assert!((s.sum() - total).abs() <= 1e-9);
    }

    #[test]
    fn forward_and_backward_are_deterministic(x in matrix(6), w in matrix(6)) {
        let run = || {
            let tape = Tape::new();
            let a = tape.leaf(x.clone());
            let b = tape.leaf(w.clone());
            let y = a.transpose().unwrap().matmul(a).unwrap().softmax(1).unwrap().sum();
            let z = b.mul(b).unwrap().sum();
            let out = y.add(z).unwrap();
            let g = tape.backward(out).unwrap();
            (out.value().item().to_bits(), g.wrt(a).unwrap().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        };
        prop_assert_eq!(run(), run());
    }
}
