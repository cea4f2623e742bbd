//! Top-k accuracy over condition combinations and regression metrics.

use serde::Serialize;

use crate::error::{DataError, Result};

/// A predicted or recorded set of conditions. Molecules are compared as
/// strings, so callers canonicalize first (see `normalize_molecule`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Combo {
    /// Catalyst, solvent 1, solvent 2, reagent 1, reagent 2.
    Slots([Option<String>; 5]),
    /// Full reagent list of a generation target.
    Reagents(Vec<String>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Catalyst,
    Solvent,
    Reagent,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Catalyst, Component::Solvent, Component::Reagent];

    fn slots(self) -> std::ops::Range<usize> {
        match self {
            Component::Catalyst => 0..1,
            Component::Solvent => 1..3,
            Component::Reagent => 3..5,
        }
    }
}

fn multiset(items: impl IntoIterator<Item = Option<String>>) -> Vec<Option<String>> {
    let mut v: Vec<_> = items.into_iter().collect();
    v.sort();
    v
}

impl Combo {
    /// Order-free key: one sorted multiset per component type.
    pub fn key(&self) -> Vec<Vec<Option<String>>> {
        match self {
            Combo::Slots(s) => Component::ALL
                .iter()
                .map(|c| multiset(s[c.slots()].iter().cloned()))
                .collect(),
            Combo::Reagents(r) => vec![multiset(r.iter().cloned().map(Some))],
        }
    }

    pub fn matches(&self, other: &Combo) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other) && self.key() == other.key()
    }

    fn component_key(&self, c: Component) -> Option<Vec<Option<String>>> {
        match self {
            Combo::Slots(s) => Some(multiset(s[c.slots()].iter().cloned())),
            Combo::Reagents(_) => None,
        }
    }
}

fn check_lengths(preds: usize, refs: usize) -> Result<()> {
    if preds != refs {
        return Err(DataError::Metric(format!("{preds} prediction lists for {refs} reference sets")));
    }
    Ok(())
}

fn fraction(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Fraction of rows where one of the first `k` ranked predictions matches
/// any reference combination. Missing ranks count as misses.
pub fn topk_accuracy(preds: &[Vec<Combo>], refs: &[Vec<Combo>], k: usize) -> Result<f64> {
    check_lengths(preds.len(), refs.len())?;
    let hits = preds
        .iter()
        .zip(refs)
        .filter(|(p, r)| p.iter().take(k).any(|p| r.iter().any(|r| p.matches(r))))
        .count();
    Ok(fraction(hits, preds.len()))
}

/// Top-k restricted to one component type of slot combinations.
pub fn component_topk(preds: &[Vec<Combo>], refs: &[Vec<Combo>], k: usize, c: Component) -> Result<f64> {
    check_lengths(preds.len(), refs.len())?;
    let hits = preds
        .iter()
        .zip(refs)
        .filter(|(p, r)| {
            p.iter().take(k).any(|p| {
                let pk = p.component_key(c);
                pk.is_some() && r.iter().any(|r| r.component_key(c) == pk)
            })
        })
        .count();
    Ok(fraction(hits, preds.len()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopkReport {
    pub ks: Vec<usize>,
    pub overall: Vec<f64>,
    /// Empty for generation targets.
    pub components: Vec<(Component, Vec<f64>)>,
}

impl TopkReport {
    pub fn compute(preds: &[Vec<Combo>], refs: &[Vec<Combo>], ks: &[usize]) -> Result<Self> {
        let overall = ks.iter().map(|&k| topk_accuracy(preds, refs, k)).collect::<Result<_>>()?;
        let slotted = refs.iter().flatten().any(|c| matches!(c, Combo::Slots(_)));
        let components = if slotted {
            Component::ALL
                .iter()
                .map(|&c| {
                    let v = ks.iter().map(|&k| component_topk(preds, refs, k, c)).collect::<Result<_>>()?;
                    Ok((c, v))
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(TopkReport {
            ks: ks.to_vec(),
            overall,
            components,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegressionMetrics {
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
}

/// MAE, RMSE and R² = 1 - SS_res / SS_tot. With constant targets R² is 1
/// for an exact fit and 0 otherwise.
pub fn regression_metrics(preds: &[f64], targets: &[f64]) -> Result<RegressionMetrics> {
    check_lengths(preds.len(), targets.len())?;
    let n = preds.len();
    if n == 0 {
        return Err(DataError::Metric("no samples".into()));
    }
    let nf = n as f64;
    let mean = targets.iter().sum::<f64>() / nf;
    let (mut abs, mut ss_res, mut ss_tot) = (0.0, 0.0, 0.0);
    for (p, t) in preds.iter().zip(targets) {
        abs += (p - t).abs();
        ss_res += (p - t) * (p - t);
        ss_tot += (t - mean) * (t - mean);
    }
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(RegressionMetrics {
        n,
        mae: abs / nf,
        rmse: (ss_res / nf).sqrt(),
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slots(s: [&str; 5]) -> Combo {
        Combo::Slots(s.map(|x| (!x.is_empty()).then(|| x.to_string())))
    }

    #[test]
    fn solvent_order_is_ignored() {
        let p = slots(["[Pd]", "A", "B", "", ""]);
        let r = slots(["[Pd]", "B", "A", "", ""]);
        assert!(p.matches(&r));
        assert!(!p.matches(&slots(["[Pd]", "A", "", "B", ""])));
        assert!(!slots(["", "", "", "", ""]).matches(&slots(["X", "", "", "", ""])));
    }

    #[test]
    fn topk_counts_rank() {
        let refs = vec![vec![slots(["C", "", "", "", ""])]];
        let preds = vec![vec![slots(["A", "", "", "", ""]), slots(["B", "", "", "", ""]), slots(["C", "", "", "", ""])]];
        assert_eq!(topk_accuracy(&preds, &refs, 1).unwrap(), 0.0);
        assert_eq!(topk_accuracy(&preds, &refs, 3).unwrap(), 1.0);
        assert_eq!(topk_accuracy(&preds, &refs, 10).unwrap(), 1.0);
        assert_eq!(topk_accuracy(&[vec![]], &refs, 5).unwrap(), 0.0);
    }

    #[test]
    fn per_component() {
        let refs = vec![vec![slots(["P", "S", "T", "R", ""])]];
        let preds = vec![vec![slots(["Q", "T", "S", "", ""])]];
        assert_eq!(component_topk(&preds, &refs, 1, Component::Catalyst).unwrap(), 0.0);
        assert_eq!(component_topk(&preds, &refs, 1, Component::Solvent).unwrap(), 1.0);
        assert_eq!(component_topk(&preds, &refs, 1, Component::Reagent).unwrap(), 0.0);
    }

    #[test]
    fn regression_cases() {
        let m = regression_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m.mae, m.rmse, m.r2), (0.0, 0.0, 1.0));
        let m = regression_metrics(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.r2, 0.0);
        // Hand case: errors 1, -1, 2, 0 on targets 0, 2, 4, 6 (mean 3, SS_tot 20).
        let m = regression_metrics(&[1.0, 1.0, 6.0, 6.0], &[0.0, 2.0, 4.0, 6.0]).unwrap();
        assert!((m.mae - 1.0).abs() < 1e-15);
        assert!((m.rmse - 1.5f64.sqrt()).abs() < 1e-15);
        assert!((m.r2 - (1.0 - 6.0 / 20.0)).abs() < 1e-15);
        assert!(regression_metrics(&[], &[]).is_err());
    }
}
