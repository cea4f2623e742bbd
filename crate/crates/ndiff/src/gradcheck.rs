//! Central finite-difference checks of analytic gradients.
//!
//! Errors are normwise per input tensor:
//! `max|analytic - numeric| / max(max|analytic|, max|numeric|, FLOOR)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::ops::DropoutKey;
use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-5;
const FLOOR: f64 = 1e-8;

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    diff / inf(analytic).max(inf(numeric)).max(FLOOR)
}

/// Compare analytic and numeric gradients of the scalar `f(inputs)` with
/// respect to every input. Returns the largest per-input error.
pub fn check<F>(inputs: &[Tensor], eps: f64, f: F) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&tape, &vars)?;
    let grads = tape.backward(out)?;

    let eval = |xs: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<_> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        Ok(f(&tape, &vars)?.value().item())
    };

    let mut worst = 0.0f64;
    let mut work = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads
            .wrt(*v)
            .map(|g| g.data().to_vec())
            .unwrap_or_else(|| vec![0.0; inputs[i].len()]);
        let mut numeric = vec![0.0; inputs[i].len()];
        for (j, slot) in numeric.iter_mut().enumerate() {
            let x0 = inputs[i].data()[j];
            work[i].data_mut()[j] = x0 + eps;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = x0 - eps;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = x0;
            *slot = (plus - minus) / (2.0 * eps);
        }
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    Ok(worst)
}

/// Like [`check`] but differentiates with respect to the parameters of a
/// store. `max_entries` caps how many entries per tensor are probed; the
/// probed entries are drawn with `seed`.
pub fn check_params<F>(
    store: &ParamStore,
    eps: f64,
    max_entries: Option<usize>,
    seed: u64,
    f: F,
) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &ParamStore) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let out = f(&tape, store)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<Option<Tensor>> = {
        let mut v = vec![None; store.len()];
        for (id, g) in grads.param_grads() {
            v[id.0] = Some(g.clone());
        }
        v
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = store.clone();
    let mut worst = 0.0f64;
    for i in 0..store.len() {
        let id = ParamId(i);
        let base = store.get(id).clone();
        let n = base.len();
        let picks: Vec<usize> = match max_entries {
            Some(k) if k < n => (0..k).map(|_| rng.gen_range(0..n)).collect(),
            _ => (0..n).collect(),
        };
        let mut a = Vec::with_capacity(picks.len());
        let mut num = Vec::with_capacity(picks.len());
        for &j in &picks {
            let mut t = base.clone();
            t.data_mut()[j] = base.data()[j] + eps;
            work.set(id, t.clone())?;
            let plus = f(&Tape::new(), &work)?.value().item();
            t.data_mut()[j] = base.data()[j] - eps;
            work.set(id, t)?;
            let minus = f(&Tape::new(), &work)?.value().item();
            num.push((plus - minus) / (2.0 * eps));
            a.push(analytic[i].as_ref().map_or(0.0, |g| g.data()[j]));
        }
        work.set(id, base)?;
        worst = worst.max(rel_err(&a, &num));
    }
    Ok(worst)
}

/// Result of one operator in [`op_suite`].
#[derive(Clone, Debug)]
pub struct OpReport {
    pub op: &'static str,
    pub max_rel_err: f64,
}

fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::uniform(r, c, 1.0, rng)
}

/// Values bounded away from zero so kinks are never straddled.
fn away_from_zero(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    rand_mat(rng, r, c).map(|x| x.signum() * (0.1 + x.abs()))
}

/// Contract a tensor-valued output to a scalar with fixed random weights.
fn contract<'t>(tape: &'t Tape, out: Var<'t>, seed: u64) -> Result<Var<'t>> {
    let shape = out.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0FF_EE00);
    let n: usize = shape.iter().product();
    let w = Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    Ok(out.mul(tape.constant(w))?.sum())
}

type Case = (Vec<Tensor>, Box<dyn for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>>);

fn make_case(op: &'static str, rng: &mut ChaCha8Rng) -> Case {
    let r = rng.gen_range(1..5);
    let c = rng.gen_range(1..5);
    let k = rng.gen_range(1..5);
    match op {
        "matmul" => (
            vec![rand_mat(rng, r, k), rand_mat(rng, k, c)],
            Box::new(|_, x| x[0].matmul(x[1])),
        ),
        "transpose" => (vec![rand_mat(rng, r, c)], Box::new(|_, x| x[0].transpose())),
        "add" => (
            vec![rand_mat(rng, r, c), rand_mat(rng, r, c)],
            Box::new(|_, x| x[0].add(x[1])),
        ),
        "add_bias" => (
            vec![rand_mat(rng, r, c), rand_mat(rng, 1, c)],
            Box::new(|_, x| x[0].add_bias(x[1])),
        ),
        "sub" => (
            vec![rand_mat(rng, r, c), rand_mat(rng, r, c)],
            Box::new(|_, x| x[0].sub(x[1])),
        ),
        "mul" => (
            vec![rand_mat(rng, r, c), rand_mat(rng, r, c)],
            Box::new(|_, x| x[0].mul(x[1])),
        ),
        "scale" => (vec![rand_mat(rng, r, c)], Box::new(|_, x| Ok(x[0].scale(-2.5)))),
        "concat_rows" => (
            vec![rand_mat(rng, r, c), rand_mat(rng, k, c)],
            Box::new(|t, x| t.concat(&[x[0], x[1]], 0)),
        ),
        "concat_cols" => (
            vec![rand_mat(rng, r, c), rand_mat(rng, r, k)],
            Box::new(|t, x| t.concat(&[x[0], x[1]], 1)),
        ),
        "slice" => {
            let start = rng.gen_range(0..c);
            let len = rng.gen_range(1..=c - start);
            let axis = rng.gen_range(0..2);
            let m = rand_mat(rng, c, c);
            (vec![m], Box::new(move |_, x| x[0].slice(axis, start, len)))
        }
        "gather_rows" => {
            let idx: Vec<usize> = (0..k + 2).map(|_| rng.gen_range(0..r)).collect();
            (
                vec![rand_mat(rng, r, c)],
                Box::new(move |_, x| x[0].gather_rows(idx.clone())),
            )
        }
        "embedding_lookup_sum" => {
            let idx: Vec<usize> = (0..k * 2)
                .map(|i| if i % 2 == 0 { rng.gen_range(0..r) } else { rng.gen_range(0..3) })
                .collect();
            (
                vec![rand_mat(rng, r, c), rand_mat(rng, 3, c)],
                Box::new(move |t, x| t.embedding_lookup_sum(&[x[0], x[1]], &idx)),
            )
        }
        "relu" => (vec![away_from_zero(rng, r, c)], Box::new(|_, x| Ok(x[0].relu()))),
        "leaky_relu" => (
            vec![away_from_zero(rng, r, c)],
            Box::new(|_, x| Ok(x[0].leaky_relu(0.2))),
        ),
        "softmax" => {
            let axis = rng.gen_range(0..2);
            (vec![rand_mat(rng, r, c)], Box::new(move |_, x| x[0].softmax(axis)))
        }
        "masked_softmax" => {
            let axis = 1;
            let c = c + 1;
            let mask: Vec<bool> = (0..r * c)
                .map(|i| i % c == 0 || rng.gen_bool(0.6))
                .collect();
            (
                vec![rand_mat(rng, r, c)],
                Box::new(move |_, x| x[0].masked_softmax(axis, &mask)),
            )
        }
        "layer_norm" => {
            let c = c + 1;
            (
                vec![rand_mat(rng, r, c), rand_mat(rng, 1, c), rand_mat(rng, 1, c)],
                Box::new(|_, x| x[0].layer_norm(x[1], x[2], 1e-5)),
            )
        }
        "dropout" => {
            let key = DropoutKey {
                seed: rng.gen(),
                layer: 3,
                step: 1,
                sample: 0,
            };
            (
                vec![rand_mat(rng, r, c)],
                Box::new(move |_, x| x[0].dropout(0.4, true, key)),
            )
        }
        "segment_sum" => {
            let ids: Vec<usize> = (0..r).map(|_| rng.gen_range(0..k)).collect();
            (
                vec![rand_mat(rng, r, c)],
                Box::new(move |_, x| x[0].segment_sum(ids.clone(), k)),
            )
        }
        "segment_softmax" => {
            let ids: Vec<usize> = (0..r + 2).map(|_| rng.gen_range(0..k)).collect();
            (
                vec![rand_mat(rng, r + 2, c)],
                Box::new(move |_, x| x[0].segment_softmax(ids.clone(), k)),
            )
        }
        "scale_rows" => (
            vec![rand_mat(rng, r, c), rand_mat(rng, r, 1)],
            Box::new(|_, x| x[0].scale_rows(x[1])),
        ),
        "sum" => (vec![rand_mat(rng, r, c)], Box::new(|_, x| Ok(x[0].sum()))),
        "mean_rows" => (vec![rand_mat(rng, r, c)], Box::new(|_, x| x[0].mean_rows())),
        "cross_entropy" => {
            let v = c + 1;
            let targets: Vec<Option<usize>> = (0..r)
                .map(|i| (i == 0 || rng.gen_bool(0.7)).then(|| rng.gen_range(0..v)))
                .collect();
            (
                vec![rand_mat(rng, r, v)],
                Box::new(move |_, x| x[0].cross_entropy(&targets)),
            )
        }
        "mse" => (
            vec![rand_mat(rng, r, c), rand_mat(rng, r, c)],
            Box::new(|_, x| x[0].mse(x[1])),
        ),
        other => unreachable!("unknown op {other}"),
    }
}

/// Every differentiable operator, in suite order.
pub const OPS: &[&str] = &[
    "matmul",
    "transpose",
    "add",
    "add_bias",
    "sub",
    "mul",
    "scale",
    "concat_rows",
    "concat_cols",
    "slice",
    "gather_rows",
    "embedding_lookup_sum",
    "relu",
    "leaky_relu",
    "softmax",
    "masked_softmax",
    "layer_norm",
    "dropout",
    "segment_sum",
    "segment_softmax",
    "scale_rows",
    "sum",
    "mean_rows",
    "cross_entropy",
    "mse",
];

/// Check every operator at `trials` random shapes and seeds.
pub fn op_suite(trials: u64, seed: u64) -> Result<Vec<OpReport>> {
    let mut reports = Vec::with_capacity(OPS.len());
    for (n, &op) in OPS.iter().enumerate() {
        let mut worst = 0.0f64;
        for trial in 0..trials {
            let case_seed = seed ^ ((n as u64) << 32) ^ trial;
            let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
            let (inputs, f) = make_case(op, &mut rng);
            let err = check(&inputs, DEFAULT_EPS, |t, x| {
                let out = f(t, x)?;
                contract(t, out, case_seed)
            })?;
            worst = worst.max(err);
        }
        reports.push(OpReport {
            op,
            max_rel_err: worst,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_a_wrong_gradient() {
        // The constant copy hides half of d(x*x)/dx from the tape.
        let x = Tensor::row(&[0.7, -0.3]);
        let err = check(&[x], DEFAULT_EPS, |t, v| {
            let c = t.constant((*v[0].value()).clone());
            Ok(v[0].mul(c)?.sum())
        })
        .unwrap();
        assert!(err > 0.4, "err = {err}");
    }

    #[test]
    fn params_check_on_linear_model() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = store.add("w", Tensor::uniform(3, 2, 1.0, &mut rng)).unwrap();
        let x = Tensor::uniform(4, 3, 1.0, &mut rng);
        let err = check_params(&store, DEFAULT_EPS, None, 0, |t, s| {
            let y = t.constant(x.clone()).matmul(t.param(s, w))?;
            Ok(y.mul(y)?.sum())
        })
        .unwrap();
        assert!(err < 1e-8, "err = {err}");
    }
}
