//! Aggregation machinery: orbital-period-corrected intra-group averaging of
//! sub-structures, cosine-distance staleness scoring, and the pseudo-
//! synchronous strategy that merges low-staleness group models immediately
//! and buffers high-staleness ones for an end-of-round synchronous mix.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{flatten, ModelWeights};
use crate::substructure::CustomizedGlobalModel;

/// Time-weighting family `s(tau)` applied on top of the cosine distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum TimeWeighting {
    Constant,
    Polynomial { a: f64 },
    Hinge { a: f64, b: f64 },
}

/// Mixing knobs for the pseudo-synchronous strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AggregationConfig {
    /// Asynchronous mixing weight on an immediately merged group model.
    pub alpha: f64,
    /// Synchronous mixing weight kept by the latest model at round end.
    pub beta: f64,
    /// Staleness threshold separating immediate merge from buffering.
    pub gamma_th: f64,
    pub weighting: TimeWeighting,
    /// Rescale intra-group coefficients to sum to one (the literal
    /// period-corrected coefficients shrink the aggregate every round).
    pub normalize: bool,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            alpha: 0.6,
            beta: 0.7,
            gamma_th: 0.6,
            weighting: TimeWeighting::Polynomial { a: 0.5 },
            normalize: true,
        }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::rejected(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::rejected(format!("beta {} outside [0, 1]", self.beta)));
        }
        if self.gamma_th < 0.0 || self.gamma_th.is_nan() {
            return Err(Error::rejected(format!(
                "staleness threshold {} must be >= 0",
                self.gamma_th
            )));
        }
        match self.weighting {
            TimeWeighting::Constant => {}
            TimeWeighting::Polynomial { a } => {
                if a <= 0.0 {
                    return Err(Error::rejected("polynomial exponent must be positive"));
                }
            }
            TimeWeighting::Hinge { a, b } => {
                if a <= 0.0 || b < 0.0 {
                    return Err(Error::rejected("hinge needs a > 0 and b >= 0"));
                }
            }
        }
        Ok(())
    }
}

/// One satellite's trained copy of a sub-structure, with the data volume and
/// orbital period that weight it.
#[derive(Debug, Clone)]
pub struct SubContribution {
    pub weights: ModelWeights,
    pub dataset_size: f64,
    pub orbit_period: f64,
}

/// Per-satellite last-update bookkeeping for staleness. Times are in the
/// schedule's time base (rounds). A satellite first seen at time `t` is
/// treated as current at `t`, so its first observed lag is zero.
#[derive(Debug, Clone, Default)]
pub struct StalenessClock {
    last_update: BTreeMap<usize, f64>,
}

impl StalenessClock {
    pub fn new() -> Self {
        StalenessClock::default()
    }

    /// Mean lag of `members` at time `now`, lazily initializing newcomers.
    pub fn observe(&mut self, members: &[usize], now: f64) -> Result<f64> {
        if members.is_empty() {
            return Err(Error::rejected("cannot observe an empty member set"));
        }
        let mut total = 0.0;
        for &id in members {
            let last = *self.last_update.entry(id).or_insert(now);
            total += (now - last).max(0.0);
        }
        Ok(total / members.len() as f64)
    }

    /// Record that `members` delivered a model at time `now`.
    pub fn mark(&mut self, members: &[usize], now: f64) {
        for &id in members {
            self.last_update.insert(id, now);
        }
    }
}

/// Cache of high-staleness group models awaiting the round-end merge.
#[derive(Debug, Clone, Default)]
pub struct StaleBuffer {
    entries: Vec<(CustomizedGlobalModel, f64)>,
}

impl StaleBuffer {
    pub fn new() -> Self {
        StaleBuffer::default()
    }

    pub fn push(&mut self, model: CustomizedGlobalModel, dataset_size: f64) {
        self.entries.push((model, dataset_size));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// What one pseudo-synchronous step decided, for metrics and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeDecision {
    pub merged: bool,
    pub distance: f64,
    pub tau: f64,
    pub staleness: f64,
}

/// Weighted intra-group mean of one sub-structure index.
///
/// Literal mode uses coefficients `(p_j / p_max) * |D_i| / sum |D|`, which
/// penalize short-period satellites for their extra contact passes; the
/// normalized mode rescales those coefficients to sum to one.
pub fn aggregate_substructures(
    contributions: &[SubContribution],
    p_max: f64,
    normalize: bool,
) -> Result<ModelWeights> {
    if contributions.is_empty() {
        return Err(Error::rejected("no contributions to aggregate"));
    }
    if p_max <= 0.0 {
        return Err(Error::rejected("maximum orbital period must be positive"));
    }
    let shape = &contributions[0].weights;
    let mut total_data = 0.0;
    for c in contributions {
        if !shape.same_shape(&c.weights) {
            return Err(Error::dims(
                "contributions to one sub-structure must share a shape",
            ));
        }
        if c.dataset_size < 0.0 {
            return Err(Error::rejected("dataset sizes must be non-negative"));
        }
        if c.orbit_period <= 0.0 || c.orbit_period > p_max {
            return Err(Error::rejected(format!(
                "orbit period {} outside (0, {p_max}]",
                c.orbit_period
            )));
        }
        total_data += c.dataset_size;
    }
    if total_data <= 0.0 {
        return Err(Error::rejected("group holds no data"));
    }

    let mut coefficients: Vec<f64> = contributions
        .iter()
        .map(|c| (c.orbit_period / p_max) * (c.dataset_size / total_data))
        .collect();
    if normalize {
        let sum: f64 = coefficients.iter().sum();
        for w in &mut coefficients {
            *w /= sum;
        }
    }

    let mut out = shape.zeros_like();
    for (c, &coefficient) in contributions.iter().zip(&coefficients) {
        out.add_scaled(&c.weights, coefficient)?;
    }
    Ok(out)
}

/// `1 - cos` angle between two models' flattened parameter vectors.
pub fn cosine_distance(a: &ModelWeights, b: &ModelWeights) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::dims("cosine distance needs identical shapes"));
    }
    let va = flatten(a);
    let vb = flatten(b);
    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    let na: f64 = va.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::rejected(
            "cosine distance undefined for an all-zero model",
        ));
    }
    let cos = (dot / (na * nb)).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}

/// The time-weighting factor `s(tau)` alone (also used by the asynchronous
/// baseline's mixing rate).
pub fn time_weight(tau: f64, weighting: TimeWeighting) -> Result<f64> {
    if tau < 0.0 || tau.is_nan() {
        return Err(Error::rejected(format!("lag {tau} must be >= 0")));
    }
    Ok(match weighting {
        TimeWeighting::Constant => 1.0,
        TimeWeighting::Polynomial { a } => (tau + 1.0).powf(-a),
        TimeWeighting::Hinge { a, b } => {
            if tau <= b {
                1.0
            } else {
                1.0 / (a * (tau - b) + 1.0)
            }
        }
    })
}

/// Staleness score `S = d * s(tau)`.
pub fn staleness(d: f64, tau: f64, config: &AggregationConfig) -> Result<f64> {
    config.validate()?;
    if d < 0.0 || d.is_nan() {
        return Err(Error::rejected(format!("distance {d} must be >= 0")));
    }
    Ok(d * time_weight(tau, config.weighting)?)
}

/// One arrival of a customized group model at the ground station.
///
/// Low-staleness models fold into the latest model immediately; stale ones
/// wait in the buffer for [`flush_buffer`]. The members' clocks advance in
/// both cases. The threshold test uses the raw score; the mixing weight is
/// clamped to [0, 1] so the update stays a convex combination.
#[allow(clippy::too_many_arguments)]
pub fn pseudo_sync_step(
    latest: &mut ModelWeights,
    incoming: &CustomizedGlobalModel,
    members: &[usize],
    dataset_size: f64,
    now: f64,
    clock: &mut StalenessClock,
    buffer: &mut StaleBuffer,
    config: &AggregationConfig,
) -> Result<MergeDecision> {
    config.validate()?;
    if !latest.same_shape(&incoming.weights) {
        return Err(Error::dims(
            "incoming group model shape differs from the latest model",
        ));
    }
    let distance = cosine_distance(latest, &incoming.weights)?;
    let tau = clock.observe(members, now)?;
    let score = staleness(distance, tau, config)?;
    let merged = score <= config.gamma_th;
    if merged {
        let s = score.clamp(0.0, 1.0);
        latest.scale(1.0 - s);
        latest.add_scaled(&incoming.weights, config.alpha * s)?;
    } else {
        buffer.push(incoming.clone(), dataset_size);
    }
    clock.mark(members, now);
    Ok(MergeDecision {
        merged,
        distance,
        tau,
        staleness: score,
    })
}

/// Round-end synchronous merge of everything buffered. Returns whether any
/// buffered model was folded in; the buffer is left empty either way.
pub fn flush_buffer(
    latest: &mut ModelWeights,
    buffer: &mut StaleBuffer,
    config: &AggregationConfig,
) -> Result<bool> {
    config.validate()?;
    if buffer.is_empty() {
        return Ok(false);
    }
    let total: f64 = buffer.entries.iter().map(|(_, size)| size).sum();
    if total <= 0.0 {
        return Err(Error::rejected("buffered models hold no data"));
    }
    let mut merged = latest.zeros_like();
    for (model, size) in &buffer.entries {
        merged.add_scaled(&model.weights, size / total)?;
    }
    latest.scale(config.beta);
    latest.add_scaled(&merged, 1.0 - config.beta)?;
    buffer.clear();
    Ok(true)
}
