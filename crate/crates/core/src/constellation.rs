//! Abstract orbit geometry: orbits carry a period ratio and a set of member
//! satellites; one training round spans the longest period and is cut into
//! equal contact windows. A satellite passes the ground station once per
//! multiple of its own period, so short-period orbits visit more often —
//! the imbalance the period-corrected aggregation compensates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One orbit: dimensionless period ratio plus its member satellite ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSpec {
    pub index: usize,
    pub period: f64,
    pub members: Vec<usize>,
}

/// One satellite's appearance in a contact event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Participant {
    pub sat: usize,
    pub orbit: usize,
    pub period: f64,
}

/// All satellites visible to the ground station during one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactEvent {
    /// Window start time within the round, in [0, round_duration).
    pub time: f64,
    /// Window index (the inter-group set id k).
    pub group: usize,
    /// Sorted by satellite id; each satellite listed once.
    pub participants: Vec<Participant>,
}

impl ContactEvent {
    pub fn satellite_ids(&self) -> Vec<usize> {
        self.participants.iter().map(|p| p.sat).collect()
    }
}

/// The per-round contact structure. Non-empty windows appear as events in
/// time order; `windows` keeps the configured count even when some are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSchedule {
    pub round_duration: f64,
    pub windows: usize,
    pub events: Vec<ContactEvent>,
}

/// Build the per-round schedule. The round is `[0, p_max)` split into
/// `windows` equal windows; a satellite on period `p` passes at
/// `{(m * p + phase) mod p_max : m = 1..floor(p_max / p)}` and every pass is
/// bucketed into its window. `phases` optionally offsets each orbit
/// (defaults to zero for all).
pub fn build_schedule(
    orbits: &[OrbitSpec],
    windows: usize,
    phases: Option<&[f64]>,
) -> Result<RoundSchedule> {
    if orbits.is_empty() {
        return Err(Error::rejected("constellation needs at least one orbit"));
    }
    if windows == 0 {
        return Err(Error::rejected("window count must be at least 1"));
    }
    if windows > 1_000_000 {
        return Err(Error::rejected(format!(
            "{windows} windows cannot be represented in one round"
        )));
    }
    if let Some(p) = phases {
        if p.len() != orbits.len() {
            return Err(Error::rejected(format!(
                "{} phase offsets for {} orbits",
                p.len(),
                orbits.len()
            )));
        }
    }
    let mut seen_orbits = BTreeSet::new();
    let mut seen_sats = BTreeSet::new();
    let mut any_member = false;
    for orbit in orbits {
        if orbit.period <= 0.0 || !orbit.period.is_finite() {
            return Err(Error::rejected(format!(
                "orbit {} has non-positive period {}",
                orbit.index, orbit.period
            )));
        }
        if !seen_orbits.insert(orbit.index) {
            return Err(Error::rejected(format!(
                "duplicate orbit index {}",
                orbit.index
            )));
        }
        for &sat in &orbit.members {
            any_member = true;
            if !seen_sats.insert(sat) {
                return Err(Error::rejected(format!(
                    "satellite {sat} belongs to more than one orbit"
                )));
            }
        }
    }
    if !any_member {
        return Err(Error::rejected("constellation has no satellites"));
    }

    let p_max = orbits
        .iter()
        .map(|o| o.period)
        .fold(f64::NEG_INFINITY, f64::max);
    let window_width = p_max / windows as f64;

    // window index -> sorted participant set
    let mut buckets: BTreeMap<usize, BTreeMap<usize, Participant>> = BTreeMap::new();
    for (oi, orbit) in orbits.iter().enumerate() {
        let phase = phases.map_or(0.0, |p| p[oi]);
        let passes = (p_max / orbit.period + 1e-9).floor() as usize;
        for &sat in &orbit.members {
            for m in 1..=passes {
                let time = (m as f64 * orbit.period + phase).rem_euclid(p_max);
                let window = ((time / window_width).floor() as usize).min(windows - 1);
                buckets.entry(window).or_default().insert(
                    sat,
                    Participant {
                        sat,
                        orbit: orbit.index,
                        period: orbit.period,
                    },
                );
            }
        }
    }

    let events = buckets
        .into_iter()
        .map(|(window, sats)| ContactEvent {
            time: window as f64 * window_width,
            group: window,
            participants: sats.into_values().collect(),
        })
        .collect();
    Ok(RoundSchedule {
        round_duration: p_max,
        windows,
        events,
    })
}

/// Split one event's participants into intra-group sets, one per orbit.
pub fn intra_groups(event: &ContactEvent) -> BTreeMap<usize, Vec<Participant>> {
    let mut groups: BTreeMap<usize, Vec<Participant>> = BTreeMap::new();
    for p in &event.participants {
        groups.entry(p.orbit).or_default().push(*p);
    }
    groups
}
