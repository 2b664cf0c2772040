//! Satellite characterization: map raw compute, memory, and uplink figures to
//! normalized training budgets. The overall budget is the componentwise
//! minimum and determines how many sub-structures a satellite can train.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw per-satellite resources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceProfile {
    /// Compute rate allocated to training, FLOP/s.
    pub gamma: f64,
    /// Memory available for the model, bytes.
    pub mem_avail: f64,
    /// Average uplink rate to the ground station, bits/s.
    pub uplink_rate: f64,
}

/// What one round of full-model training demands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    /// Local update epochs per round.
    pub eta: f64,
    /// FLOPs for one epoch of full-model training.
    pub theta: f64,
    /// Full model size in bytes (memory footprint).
    pub mem_model: f64,
    /// Full model size in bits (transfer volume).
    pub model_bits: f64,
    /// Contact window duration, seconds.
    pub contact_time: f64,
}

/// Normalized budgets, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetVector {
    /// Computing budget.
    pub c: f64,
    /// Memory (storage) budget.
    pub s: f64,
    /// Uplink budget.
    pub u: f64,
    /// Available budget: min(c, s, u).
    pub b: f64,
}

impl BudgetVector {
    /// A budget assigned directly (sampled mode), bypassing characterization.
    pub fn direct(b: f64) -> Result<Self> {
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::rejected(format!("budget {b} outside (0, 1]")));
        }
        Ok(BudgetVector { c: b, s: b, u: b, b })
    }
}

/// Characterize one satellite for one round.
///
/// `orbit_period` is the satellite's orbital period in seconds; compute
/// available over one period is measured against one round's workload.
pub fn compute_budgets(
    profile: &ResourceProfile,
    workload: &WorkloadSpec,
    orbit_period: f64,
) -> Result<BudgetVector> {
    if workload.eta <= 0.0
        || workload.theta <= 0.0
        || workload.mem_model <= 0.0
        || workload.model_bits <= 0.0
        || workload.contact_time <= 0.0
    {
        return Err(Error::rejected("workload fields must all be positive"));
    }
    if orbit_period <= 0.0 {
        return Err(Error::rejected("orbit period must be positive"));
    }
    if profile.gamma < 0.0 || profile.mem_avail < 0.0 || profile.uplink_rate < 0.0 {
        return Err(Error::rejected("resources must be non-negative"));
    }
    let c = (profile.gamma * orbit_period / (workload.eta * workload.theta)).min(1.0);
    let s = (profile.mem_avail / workload.mem_model).min(1.0);
    let u = (profile.uplink_rate * workload.contact_time / workload.model_bits).min(1.0);
    let b = c.min(s).min(u);
    Ok(BudgetVector { c, s, u, b })
}

/// Draw one budget from a discrete distribution (sampled assignment mode).
pub fn sample_discrete(values: &[f64], weights: &[f64], rng: &mut impl Rng) -> Result<f64> {
    if values.is_empty() || values.len() != weights.len() {
        return Err(Error::rejected(
            "budget distribution needs matching, non-empty values and weights",
        ));
    }
    if let Some(&bad) = values.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
        return Err(Error::rejected(format!("budget value {bad} outside (0, 1]")));
    }
    let index = WeightedIndex::new(weights)
        .map_err(|e| Error::rejected(format!("bad budget weights: {e}")))?;
    Ok(values[index.sample(rng)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::component_rng;
    use proptest::prelude::*;

    fn workload() -> WorkloadSpec {
        WorkloadSpec {
            eta: 1.0,
            theta: 1.0,
            mem_model: 1.0,
            model_bits: 1.0,
            contact_time: 1.0,
        }
    }

    #[test]
    fn compute_ratio_of_exactly_one_saturates() {
        let profile = ResourceProfile {
            gamma: 5.0,
            mem_avail: 1.0,
            uplink_rate: 1.0,
        };
        let spec = WorkloadSpec {
            eta: 2.0,
            theta: 10.0,
            ..workload()
        };
        let budget = compute_budgets(&profile, &spec, 4.0).unwrap();
        assert_eq!(budget.c, 1.0); // gamma * period == eta * theta
    }

    #[test]
    fn uplink_budget_from_measured_constants() {
        // 12 Mbps over a 5-minute contact against a 528 MB model.
        let profile = ResourceProfile {
            gamma: 1.0,
            mem_avail: 1.0,
            uplink_rate: 12e6,
        };
        let spec = WorkloadSpec {
            model_bits: 528e6 * 8.0,
            contact_time: 300.0,
            ..workload()
        };
        let budget = compute_budgets(&profile, &spec, 1.0).unwrap();
        let expect = 12e6 * 300.0 / (528e6 * 8.0);
        assert!((budget.u - expect).abs() < 1e-12);
        assert!((budget.u - 0.8523).abs() < 5e-5);
    }

    #[test]
    fn available_budget_is_componentwise_minimum() {
        let profile = ResourceProfile {
            gamma: 0.9,
            mem_avail: 0.6,
            uplink_rate: 0.85,
        };
        let budget = compute_budgets(&profile, &workload(), 1.0).unwrap();
        assert_eq!((budget.c, budget.s, budget.u), (0.9, 0.6, 0.85));
        assert_eq!(budget.b, 0.6);
    }

    #[test]
    fn rejects_nonpositive_workload() {
        let profile = ResourceProfile {
            gamma: 1.0,
            mem_avail: 1.0,
            uplink_rate: 1.0,
        };
        let spec = WorkloadSpec {
            theta: 0.0,
            ..workload()
        };
        assert!(compute_budgets(&profile, &spec, 1.0).is_err());
        assert!(compute_budgets(&profile, &workload(), 0.0).is_err());
    }

    #[test]
    fn direct_budget_validates_range() {
        assert!(BudgetVector::direct(0.25).is_ok());
        assert!(BudgetVector::direct(1.0).is_ok());
        assert!(BudgetVector::direct(0.0).is_err());
        assert!(BudgetVector::direct(1.5).is_err());
    }

    #[test]
    fn discrete_sampling_is_seeded_and_respects_support() {
        let values = [0.25, 0.5, 0.75, 1.0];
        let weights = [1.0; 4];
        let mut a = component_rng(9, "budget-sample");
        let mut b = component_rng(9, "budget-sample");
        for _ in 0..100 {
            let x = sample_discrete(&values, &weights, &mut a).unwrap();
            let y = sample_discrete(&values, &weights, &mut b).unwrap();
            assert_eq!(x, y);
            assert!(values.contains(&x));
        }
        assert!(sample_discrete(&[], &[], &mut a).is_err());
        assert!(sample_discrete(&[0.5], &[1.0, 1.0], &mut a).is_err());
        assert!(sample_discrete(&[2.0], &[1.0], &mut a).is_err());
    }

    proptest! {
        #[test]
        fn budgets_never_exceed_one_and_b_is_min(
            gamma in 0.0..1e12f64,
            mem in 0.0..1e12f64,
            rate in 0.0..1e12f64,
            eta in 1e-3..1e3f64,
            theta in 1e-3..1e9f64,
            mem_model in 1e-3..1e9f64,
            bits in 1e-3..1e12f64,
            contact in 1e-3..1e5f64,
            period in 1e-3..1e6f64,
        ) {
            let profile = ResourceProfile { gamma, mem_avail: mem, uplink_rate: rate };
            let spec = WorkloadSpec { eta, theta, mem_model, model_bits: bits, contact_time: contact };
            let budget = compute_budgets(&profile, &spec, period).unwrap();
            prop_assert!(budget.c <= 1.0 && budget.s <= 1.0 && budget.u <= 1.0);
            prop_assert!(budget.c >= 0.0 && budget.s >= 0.0 && budget.u >= 0.0);
            prop_assert_eq!(budget.b, budget.c.min(budget.s).min(budget.u));
        }

        #[test]
        fn more_resources_never_shrink_budgets(
            gamma in 0.0..1e9f64,
            mem in 0.0..1e9f64,
            rate in 0.0..1e9f64,
            bump in 0.0..1e9f64,
        ) {
            let spec = WorkloadSpec {
                eta: 2.0,
                theta: 1e6,
                mem_model: 1e6,
                model_bits: 1e8,
                contact_time: 60.0,
            };
            let base = ResourceProfile { gamma, mem_avail: mem, uplink_rate: rate };
            let before = compute_budgets(&base, &spec, 100.0).unwrap();

            let richer = ResourceProfile { gamma: gamma + bump, ..base };
            let after = compute_budgets(&richer, &spec, 100.0).unwrap();
            prop_assert!(after.c >= before.c && after.b >= before.b);

            let richer = ResourceProfile { mem_avail: mem + bump, ..base };
            let after = compute_budgets(&richer, &spec, 100.0).unwrap();
            prop_assert!(after.s >= before.s && after.b >= before.b);

            let richer = ResourceProfile { uplink_rate: rate + bump, ..base };
            let after = compute_budgets(&richer, &spec, 100.0).unwrap();
            prop_assert!(after.u >= before.u && after.b >= before.b);
        }
    }
}
