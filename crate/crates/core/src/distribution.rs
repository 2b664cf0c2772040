//! Sub-structure distribution: pick each satellite's combination of basic
//! sub-structure indices. The scrolling rule slides a per-group cursor one
//! position per satellite so combinations rotate across the index space;
//! random and static (fixed prefix) rules serve as ablation baselines.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::substructure::substructure_count;

/// Persistent start position of the scrolling window for one inter-group
/// set. Carried across satellites and across rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScrollCursor {
    pub position: usize,
}

impl ScrollCursor {
    pub fn start() -> Self {
        ScrollCursor { position: 0 }
    }
}

/// Satellite id -> ordered combination of sub-structure indices.
pub type Assignment = BTreeMap<usize, Vec<usize>>;

/// Scrolling distribution: satellite `j` (ascending id order) receives the
/// window `{(cursor + m) mod L : m < n_j}` and the cursor then advances by
/// exactly one position. Returns the assignment and the advanced cursor.
pub fn assign_scrolling(
    sats: &[(usize, f64)],
    levels: usize,
    cursor: ScrollCursor,
) -> Result<(Assignment, ScrollCursor)> {
    let sats = checked_order(sats, levels)?;
    let mut assignment = Assignment::new();
    let mut position = cursor.position % levels;
    for (id, budget) in sats {
        let n = substructure_count(budget, levels)?;
        let combo = (0..n).map(|m| (position + m) % levels).collect();
        assignment.insert(id, combo);
        position = (position + 1) % levels;
    }
    Ok((assignment, ScrollCursor { position }))
}

/// Random distribution: combinations drawn uniformly without replacement
/// from the caller's seeded generator, reported in ascending index order.
pub fn assign_random(
    sats: &[(usize, f64)],
    levels: usize,
    rng: &mut impl Rng,
) -> Result<Assignment> {
    let sats = checked_order(sats, levels)?;
    let mut assignment = Assignment::new();
    for (id, budget) in sats {
        let n = substructure_count(budget, levels)?;
        let mut combo = rand::seq::index::sample(rng, levels, n).into_vec();
        combo.sort_unstable();
        assignment.insert(id, combo);
    }
    Ok(assignment)
}

/// Static distribution: satellite `j` always receives the fixed prefix
/// `{0, ..., n_j - 1}`, identical every round.
pub fn assign_static(sats: &[(usize, f64)], levels: usize) -> Result<Assignment> {
    let sats = checked_order(sats, levels)?;
    let mut assignment = Assignment::new();
    for (id, budget) in sats {
        let n = substructure_count(budget, levels)?;
        assignment.insert(id, (0..n).collect());
    }
    Ok(assignment)
}

/// Validate inputs and return satellites in ascending id order.
fn checked_order(sats: &[(usize, f64)], levels: usize) -> Result<Vec<(usize, f64)>> {
    if levels == 0 {
        return Err(Error::rejected("level count must be at least 1"));
    }
    if sats.is_empty() {
        return Err(Error::rejected("no satellites to assign"));
    }
    let mut ordered = sats.to_vec();
    ordered.sort_by_key(|&(id, _)| id);
    for pair in ordered.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::rejected(format!(
                "duplicate satellite id {}",
                pair[0].0
            )));
        }
    }
    Ok(ordered)
}
