#![allow(dead_code)]

use chem::{align_atoms, parse_reaction, AlignedReaction};
use ndiff::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ralign::{Task, TrainConfig};

/// Aligned reaction with the middle segment as condition molecules.
pub fn rxn(s: &str) -> AlignedReaction {
    let r = parse_reaction(s).unwrap();
    let mut a = align_atoms(&r.reactants, &r.products).unwrap();
    a.condition_mols = r.reagents;
    a
}

pub fn small_cfg(task: Task) -> TrainConfig {
    let mut cfg = TrainConfig::preset(task.name()).unwrap();
    cfg.hidden = 16;
    cfg.layers = 2;
    cfg.dec_layers = 1;
    cfg.heads = 4;
    cfg.cond_layers = 2;
    cfg.dropout = 0.0;
    cfg
}

pub fn random(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

// Plain dense reference arithmetic on row vectors.

pub fn row(t: &Tensor, r: usize) -> Vec<f64> {
    t.row_slice(r).to_vec()
}

pub fn vecmat(x: &[f64], w: &Tensor) -> Vec<f64> {
    (0..w.cols())
        .map(|j| x.iter().enumerate().map(|(i, xi)| xi * w.get(i, j)).sum())
        .collect()
}

pub fn vadd(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn relu(a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| x.max(0.0)).collect()
}

/// `relu(x W1 + b1) W2 + b2` with weights read from `store` by name prefix.
pub fn ffn(store: &ndiff::ParamStore, name: &str, x: &[f64]) -> Vec<f64> {
    let p = |s: &str| store.get(store.id(&format!("{name}.{s}")).unwrap()).clone();
    let h = relu(&vadd(&vecmat(x, &p("l1.w")), p("l1.b").data()));
    vadd(&vecmat(&h, &p("l2.w")), p("l2.b").data())
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
