use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::category::Category;
use super::Registry;
use crate::store::SolveRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryRow {
    pub category: Category,
    pub label: &'static str,
    pub available: u64,
    pub solves: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub available: u64,
    pub solves: u64,
}

/// Per-category coverage and solve counts.
///
/// `rows` always holds all eleven categories in table order. Solves whose
/// challenge id is not in the registry are counted in `unknown_solves` (and
/// the ids listed in `unknown_challenges`); they are excluded from `total`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryStats {
    pub rows: Vec<CategoryRow>,
    pub total: Totals,
    pub unknown_solves: u64,
    pub unknown_challenges: Vec<String>,
}

pub fn category_stats<'a>(
    registry: &Registry,
    solves: impl IntoIterator<Item = &'a SolveRecord>,
) -> CategoryStats {
    let mut available: BTreeMap<Category, u64> = BTreeMap::new();
    for m in registry.manifests() {
        *available.entry(m.category).or_default() += 1;
    }

    let pairs: BTreeSet<(&str, &str)> = solves
        .into_iter()
        .map(|r| (r.user_id.as_str(), r.challenge_id.as_str()))
        .collect();

    let mut solved: BTreeMap<Category, u64> = BTreeMap::new();
    let mut unknown_solves = 0;
    let mut unknown_challenges = BTreeSet::new();
    for (_, challenge) in &pairs {
        match registry.manifest(challenge) {
            Some(m) => *solved.entry(m.category).or_default() += 1,
            None => {
                unknown_solves += 1;
                unknown_challenges.insert(challenge.to_string());
            }
        }
    }
    if !unknown_challenges.is_empty() {
        log::warn!(
            "{unknown_solves} solve(s) reference challenges missing from the archive: {}",
            unknown_challenges.iter().cloned().collect::<Vec<_>>().join(", ")
        );
    }

    let rows: Vec<CategoryRow> = Category::ALL
        .iter()
        .map(|&c| CategoryRow {
            category: c,
            label: c.label(),
            available: available.get(&c).copied().unwrap_or(0),
            solves: solved.get(&c).copied().unwrap_or(0),
        })
        .collect();
    let total = rows.iter().fold(Totals::default(), |t, r| Totals {
        available: t.available + r.available,
        solves: t.solves + r.solves,
    });

    CategoryStats {
        rows,
        total,
        unknown_solves,
        unknown_challenges: unknown_challenges.into_iter().collect(),
    }
}
