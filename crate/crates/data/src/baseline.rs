use std::collections::HashMap;

use crate::metrics::Combo;

/// Ranks condition combinations by training-set frequency and predicts the
/// same ranking for every reaction.
#[derive(Clone, Debug, Default)]
pub struct MajorityBaseline {
    ranked: Vec<(Combo, usize)>,
}

impl MajorityBaseline {
    pub fn fit<'a>(combos: impl IntoIterator<Item = &'a Combo>) -> Self {
        let mut counts: HashMap<Vec<Vec<Option<String>>>, (Combo, usize)> = HashMap::new();
        for c in combos {
            counts.entry(c.key()).or_insert_with(|| (c.clone(), 0)).1 += 1;
        }
        let mut ranked: Vec<(Combo, usize)> = counts.into_values().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        MajorityBaseline { ranked }
    }

    pub fn predict(&self, k: usize) -> Vec<Combo> {
        self.ranked.iter().take(k).map(|(c, _)| c.clone()).collect()
    }
}
