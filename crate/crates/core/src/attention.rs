//! Reaction-center-aware cross-attention.
//!
//! The first `ceil(h/2)` heads attend over every reactant and product node.
//! The remaining heads see only reaction-center nodes; their softmax is
//! normalised jointly over reactant and product centers. All heads use the
//! same `1/sqrt(d_k)` logit scaling.

use std::sync::atomic::{AtomicU64, Ordering};

use ndiff::{ParamStore, Tape, Var};

use crate::error::Result;
use crate::nn::{Attended, Mha};

static RC_FALLBACKS: AtomicU64 = AtomicU64::new(0);

/// How many times restricted heads fell back to full attention because a
/// reaction had no reaction center.
pub fn rc_fallback_count() -> u64 {
    RC_FALLBACKS.load(Ordering::Relaxed)
}

pub fn normal_heads(heads: usize) -> usize {
    heads.div_ceil(2)
}

/// `q`: queries x d. `memory`: `[H_R; H_P]`. `rc`: one flag per memory row.
/// With `vanilla` every head is unrestricted.
pub fn rc_attention<'t>(
    mha: &Mha,
    t: &'t Tape,
    s: &ParamStore,
    q: Var<'t>,
    memory: Var<'t>,
    rc: &[bool],
    vanilla: bool,
) -> Result<Attended<'t>> {
    if vanilla {
        return mha.attend(t, s, q, memory, None, 0);
    }
    if !rc.iter().any(|&x| x) {
        RC_FALLBACKS.fetch_add(1, Ordering::Relaxed);
        log::warn!("empty reaction center; restricted heads use full attention");
        return mha.attend(t, s, q, memory, None, 0);
    }
    let rows = q.shape()[0];
    let mask: Vec<bool> = (0..rows).flat_map(|_| rc.iter().copied()).collect();
    mha.attend(t, s, q, memory, Some(&mask), normal_heads(mha.heads))
}
