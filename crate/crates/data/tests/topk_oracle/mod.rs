//! Permutation brute-force top-k matcher shared by test targets.

#![allow(dead_code)]

use ralign_data::{topk_accuracy, Combo};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POOL: &[&str] = &["A", "B", "C", "D"];

fn permutations(items: &[Option<String>]) -> Vec<Vec<Option<String>>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

/// Slot-wise equality under some reordering within each component type.
fn brute_match(p: &Combo, r: &Combo) -> bool {
    match (p, r) {
        (Combo::Slots(p), Combo::Slots(r)) => {
            p[0] == r[0]
                && permutations(&p[1..3]).iter().any(|s| s[..] == r[1..3])
                && permutations(&p[3..5]).iter().any(|s| s[..] == r[3..5])
        }
        (Combo::Reagents(p), Combo::Reagents(r)) => {
            let p: Vec<Option<String>> = p.iter().cloned().map(Some).collect();
            let r: Vec<Option<String>> = r.iter().cloned().map(Some).collect();
            p.len() == r.len() && permutations(&p).contains(&r)
        }
        _ => false,
    }
}

pub fn brute_topk(preds: &[Vec<Combo>], refs: &[Vec<Combo>], k: usize) -> f64 {
    let mut hits = 0;
    for (p, r) in preds.iter().zip(refs) {
        let mut hit = false;
        for rank in 0..k.min(p.len()) {
            for reference in r {
                hit |= brute_match(&p[rank], reference);
            }
        }
        hits += hit as usize;
    }
    hits as f64 / preds.len() as f64
}

pub fn random_combo(rng: &mut ChaCha8Rng) -> Combo {
    let pick = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.3) {
            None
        } else {
            Some(POOL[rng.gen_range(0..POOL.len())].to_string())
        }
    };
    if rng.gen_bool(0.75) {
        Combo::Slots(std::array::from_fn(|_| pick(rng)))
    } else {
        let n = rng.gen_range(0..4);
        Combo::Reagents((0..n).map(|_| POOL[rng.gen_range(0..POOL.len())].to_string()).collect())
    }
}

/// A near-miss of `c`: shuffled within component types, sometimes mutated.
pub fn variant(c: &Combo, rng: &mut ChaCha8Rng) -> Combo {
    let mut c = c.clone();
    match &mut c {
        Combo::Slots(s) => {
            if rng.gen_bool(0.5) {
                s.swap(1, 2);
            }
            if rng.gen_bool(0.5) {
                s.swap(3, 4);
            }
            if rng.gen_bool(0.3) {
                let i = rng.gen_range(0..5);
                s[i] = Some(POOL[rng.gen_range(0..POOL.len())].to_string());
            }
        }
        Combo::Reagents(r) => {
            if r.len() > 1 && rng.gen_bool(0.5) {
                r.reverse();
            }
            if rng.gen_bool(0.3) {
                r.push("A".into());
            }
        }
    }
    c
}

/// `cases` random prediction/reference sets; `topk_accuracy` must equal
/// the brute force per case for k in 1..=5 and in aggregate. Returns the
/// number of cases or the first disagreement.
pub fn check_cases(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut preds = Vec::new();
    let mut refs = Vec::new();
    for _ in 0..cases {
        let base = random_combo(&mut rng);
        let nref = rng.gen_range(1..3);
        let r: Vec<Combo> = (0..nref).map(|_| variant(&base, &mut rng)).collect();
        let npred = rng.gen_range(0..6);
        let p: Vec<Combo> = (0..npred)
            .map(|_| if rng.gen_bool(0.5) { variant(&base, &mut rng) } else { random_combo(&mut rng) })
            .collect();
        for k in 1..=5 {
            let got = topk_accuracy(std::slice::from_ref(&p), std::slice::from_ref(&r), k).map_err(|e| e.to_string())?;
            if got != brute_topk(std::slice::from_ref(&p), std::slice::from_ref(&r), k) {
                return Err(format!("{p:?} vs {r:?} at k={k}"));
            }
        }
        preds.push(p);
        refs.push(r);
    }
    let mut last = 0.0;
    for k in [1, 2, 3, 5, 10] {
        let got = topk_accuracy(&preds, &refs, k).map_err(|e| e.to_string())?;
        if got != brute_topk(&preds, &refs, k) {
            return Err(format!("aggregate disagreement at k={k}"));
        }
        if got < last {
            return Err(format!("top-{k} below a smaller k"));
        }
        last = got;
    }
    Ok(cases)
}
