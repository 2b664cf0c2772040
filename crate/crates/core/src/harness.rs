//! Experiment orchestration: wire the schedule, budgets, sub-structure
//! distribution, local training, and aggregation into complete federated
//! strategies, with deterministic seeding and overhead accounting.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::aggregation::{
    aggregate_substructures, flush_buffer, pseudo_sync_step, time_weight, StaleBuffer,
    StalenessClock, SubContribution,
};
use crate::budget::{compute_budgets, sample_discrete, BudgetVector, WorkloadSpec};
use crate::config::{
    BudgetMode, DataSource, DistributionRule, ExperimentConfig, PartitionKind, Strategy,
};
use crate::constellation::{build_schedule, ContactEvent, RoundSchedule};
use crate::data::{load_csv, partition_iid, partition_noniid, standardize, synth_blobs, Dataset};
use crate::distribution::{assign_random, assign_scrolling, assign_static, ScrollCursor};
use crate::error::{Error, Result};
use crate::metrics::MetricsRecord;
use crate::model::{
    evaluate_accuracy, train_sgd, LabeledBatch, ModelWeights,
};
use crate::rng::component_rng;
use crate::substructure::{
    derive_partition_plan, partition, substructure_count, assemble, CustomizedGlobalModel,
    PartitionPlan, SubStructureModel,
};

/// Forward plus backward cost per parameter per sample, in FLOPs.
const FLOPS_PER_PARAM_SAMPLE: f64 = 6.0;
/// Every parameter travels as a 64-bit float.
const BITS_PER_PARAM: f64 = 64.0;

/// Everything [`run_experiment`] leaves behind.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<MetricsRecord>,
    pub final_model: ModelWeights,
}

/// The materialized, seeded inputs of one run: datasets, shards, budgets,
/// the contact schedule, and the initial global model.
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub train: Dataset,
    pub test: Dataset,
    /// Local dataset per satellite id.
    pub shards: Vec<LabeledBatch>,
    pub budgets: Vec<BudgetVector>,
    pub schedule: RoundSchedule,
    pub initial_model: ModelWeights,
}

/// The seeded generator for one local training job. Satellites, rounds,
/// groups, and sub-structure indices all get independent streams, so adding
/// or dropping one job never perturbs another.
pub fn local_train_rng(seed: u64, round: usize, group: usize, sat: usize, sub: usize) -> ChaCha8Rng {
    component_rng(seed, &format!("train-r{round}-g{group}-s{sat}-w{sub}"))
}

/// Materialize data, shards, budgets, schedule, and the initial model from a
/// validated config.
pub fn prepare(config: &ExperimentConfig) -> Result<ExperimentSetup> {
    config.validate()?;
    let seed = config.seed;
    let n_sats = config.constellation.satellite_count();

    let (mut train, mut test) = match config.data.source {
        DataSource::Synthetic => {
            let mut rng = component_rng(seed, "data");
            synth_blobs(
                config.data.classes,
                config.data.dims,
                config.data.samples_per_class,
                config.data.separation,
                &mut rng,
            )?
        }
        DataSource::Csv => {
            let train_path = config.data.train_csv.as_ref().unwrap();
            let test_path = config.data.test_csv.as_ref().unwrap();
            let mut train = load_csv(train_path, config.data.csv_header)?;
            let mut test = load_csv(test_path, config.data.csv_header)?
                .with_split(crate::data::Split::Test);
            if train.dims() != test.dims() {
                return Err(Error::rejected(format!(
                    "train has {} features, test has {}",
                    train.dims(),
                    test.dims()
                )));
            }
            let classes = train.classes.max(test.classes);
            train.classes = classes;
            test.classes = classes;
            (train, test)
        }
    };

    if config.data.standardize {
        standardize(&mut train, &mut test);
    }

    let assignment = {
        let mut rng = component_rng(seed, "partition");
        match config.data.partition {
            PartitionKind::Iid => partition_iid(&train, n_sats, &mut rng)?,
            PartitionKind::Noniid => partition_noniid(
                &train,
                n_sats,
                config.data.total_shards.unwrap(),
                config.data.shards_per_sat.unwrap(),
                &mut rng,
            )?,
        }
    };
    let mut shards = Vec::with_capacity(n_sats);
    for sat in 0..n_sats {
        let indices = assignment.get(&sat).ok_or_else(|| {
            Error::rejected(format!("satellite {sat} received no shard"))
        })?;
        if indices.is_empty() {
            return Err(Error::rejected(format!("satellite {sat} has no data")));
        }
        shards.push(train.batch(indices));
    }

    let orbits = config.constellation.orbits();
    let budgets = match config.budget.mode {
        BudgetMode::Sampled => {
            let weights = if config.budget.weights.is_empty() {
                vec![1.0; config.budget.values.len()]
            } else {
                config.budget.weights.clone()
            };
            let mut rng = component_rng(seed, "budgets");
            let mut budgets = Vec::with_capacity(n_sats);
            for _ in 0..n_sats {
                let b = sample_discrete(&config.budget.values, &weights, &mut rng)?;
                budgets.push(BudgetVector::direct(b)?);
            }
            budgets
        }
        BudgetMode::Derived => {
            let workload = WorkloadSpec {
                eta: config.model.local_epochs as f64,
                theta: config.budget.theta.unwrap(),
                mem_model: config.budget.mem_model.unwrap(),
                model_bits: config.budget.model_bits.unwrap(),
                contact_time: config.constellation.contact_seconds,
            };
            let mut period_of = vec![0.0; n_sats];
            for orbit in &orbits {
                for &sat in &orbit.members {
                    period_of[sat] = orbit.period;
                }
            }
            config
                .budget
                .profiles
                .iter()
                .enumerate()
                .map(|(sat, profile)| compute_budgets(profile, &workload, period_of[sat]))
                .collect::<Result<Vec<_>>>()?
        }
    };

    let phases = if config.constellation.seeded_phases {
        let mut rng = component_rng(seed, "phases");
        Some(
            orbits
                .iter()
                .map(|o| rng.gen_range(0.0..o.period))
                .collect::<Vec<f64>>(),
        )
    } else {
        None
    };
    let schedule = build_schedule(&orbits, config.constellation.windows, phases.as_deref())?;

    let mut widths = vec![train.dims()];
    widths.extend_from_slice(&config.model.hidden);
    widths.push(train.classes);
    let mut rng = component_rng(seed, "init");
    let initial_model = ModelWeights::init(&widths, config.model.activation, &mut rng)?;

    Ok(ExperimentSetup {
        train,
        test,
        shards,
        budgets,
        schedule,
        initial_model,
    })
}

/// Run the configured strategy to completion and return per-evaluation
/// metrics plus the final global model.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    let setup = prepare(config)?;
    run_prepared(config, &setup)
}

/// [`run_experiment`] on an existing setup (shared across baselines).
pub fn run_prepared(config: &ExperimentConfig, setup: &ExperimentSetup) -> Result<RunOutput> {
    let mut state = RunState::new(setup.initial_model.clone());
    let test_batch = setup.test.full_batch();

    // Width-sliced baseline: one fixed plan over the whole run, derived from
    // every satellite's budget.
    let vheterofl_plan = if config.strategy == Strategy::Vheterofl {
        let all: Vec<f64> = setup.budgets.iter().map(|b| b.b).collect();
        Some(derive_partition_plan(&setup.initial_model, &all)?)
    } else {
        None
    };

    for round in 0..config.rounds {
        let context = |e: Error| Error::rejected(format!("round {}: {e}", round + 1));
        match config.strategy {
            Strategy::Ideal => round_sync_full(&mut state, setup, config, round, false)
                .map_err(context)?,
            Strategy::Fedavg => round_sync_full(&mut state, setup, config, round, true)
                .map_err(context)?,
            Strategy::Fedasync => {
                round_async_full(&mut state, setup, config, round).map_err(context)?
            }
            Strategy::Vheterofl => round_vheterofl(
                &mut state,
                setup,
                config,
                round,
                vheterofl_plan.as_ref().unwrap(),
            )
            .map_err(context)?,
            Strategy::SsFedavg => {
                round_ss_sync(&mut state, setup, config, round).map_err(context)?
            }
            Strategy::SsFedasync | Strategy::Fedsn => {
                round_ss_async(&mut state, setup, config, round).map_err(context)?
            }
        }
        if config.strategy == Strategy::Fedsn {
            flush_buffer(&mut state.model, &mut state.buffer, &config.aggregation)
                .map_err(context)?;
        }

        let due = (round + 1) % config.eval_every == 0 || round + 1 == config.rounds;
        if due {
            let accuracy = evaluate_accuracy(&state.model, &test_batch).map_err(context)?;
            state.push_record(config, round + 1, (round + 1) as f64, accuracy);
        }
        state.round_losses.clear();
    }

    Ok(RunOutput {
        records: state.records,
        final_model: state.model,
    })
}

struct RunState {
    model: ModelWeights,
    clock: StalenessClock,
    buffer: StaleBuffer,
    cursors: BTreeMap<usize, ScrollCursor>,
    flops: f64,
    bits: f64,
    round_losses: Vec<f64>,
    records: Vec<MetricsRecord>,
}

impl RunState {
    fn new(model: ModelWeights) -> Self {
        RunState {
            model,
            clock: StalenessClock::new(),
            buffer: StaleBuffer::new(),
            cursors: BTreeMap::new(),
            flops: 0.0,
            bits: 0.0,
            round_losses: Vec::new(),
            records: Vec::new(),
        }
    }

    /// Record an evaluation after a contact event, when configured.
    fn maybe_eval_event(
        &mut self,
        config: &ExperimentConfig,
        setup: &ExperimentSetup,
        round: usize,
        now: f64,
    ) -> Result<()> {
        if config.eval_per_event {
            let accuracy = evaluate_accuracy(&self.model, &setup.test.full_batch())?;
            self.push_record(config, round + 1, now, accuracy);
        }
        Ok(())
    }

    fn push_record(&mut self, config: &ExperimentConfig, round: usize, time: f64, accuracy: f64) {
        let train_loss = if self.round_losses.is_empty() {
            0.0
        } else {
            self.round_losses.iter().sum::<f64>() / self.round_losses.len() as f64
        };
        self.records.push(MetricsRecord {
            round,
            time,
            strategy: config.strategy.name().to_string(),
            accuracy,
            train_loss,
            cumulative_flops: self.flops,
            cumulative_bits: self.bits,
        });
    }

    fn charge(&mut self, params: usize, samples: usize, epochs: usize) {
        self.flops += FLOPS_PER_PARAM_SAMPLE * params as f64 * samples as f64 * epochs as f64;
        self.bits += 2.0 * params as f64 * BITS_PER_PARAM;
    }
}

/// Event time in round units: round index plus the within-round fraction.
fn round_time(round: usize, event: &ContactEvent, schedule: &RoundSchedule) -> f64 {
    round as f64 + event.time / schedule.round_duration
}

fn train_once(
    config: &ExperimentConfig,
    round: usize,
    group: usize,
    sat: usize,
    sub: usize,
    base: &ModelWeights,
    shard: &LabeledBatch,
) -> Result<(ModelWeights, f64)> {
    let mut rng = local_train_rng(config.seed, round, group, sat, sub);
    train_sgd(
        base,
        shard,
        config.model.learning_rate,
        config.model.local_epochs,
        config.model.batch_size,
        &mut rng,
    )
}

/// Synchronous full-model round: eligible satellites train from the round-
/// start model and the round ends with a dataset-weighted average. With
/// `dropout` set, satellites whose budget is below one sit out entirely.
fn round_sync_full(
    state: &mut RunState,
    setup: &ExperimentSetup,
    config: &ExperimentConfig,
    round: usize,
    dropout: bool,
) -> Result<()> {
    let participants: Vec<usize> = (0..setup.shards.len())
        .filter(|&sat| !dropout || setup.budgets[sat].b >= 1.0)
        .collect();
    if participants.is_empty() {
        return Ok(());
    }
    let snapshot = state.model.clone();
    let total: f64 = participants
        .iter()
        .map(|&sat| setup.shards[sat].len() as f64)
        .sum();
    let mut mean = snapshot.zeros_like();
    for &sat in &participants {
        let shard = &setup.shards[sat];
        let (trained, loss) = train_once(config, round, 0, sat, 0, &snapshot, shard)?;
        state.round_losses.push(loss);
        state.charge(snapshot.param_count(), shard.len(), config.model.local_epochs);
        mean.add_scaled(&trained, shard.len() as f64 / total)?;
    }
    state.model = mean;
    Ok(())
}

/// Asynchronous full-model strategy: at every contact event, each eligible
/// satellite trains from the current model and merges immediately with rate
/// `alpha * s(tau)`. Satellites with budget below one sit out.
fn round_async_full(
    state: &mut RunState,
    setup: &ExperimentSetup,
    config: &ExperimentConfig,
    round: usize,
) -> Result<()> {
    for event in &setup.schedule.events {
        let now = round_time(round, event, &setup.schedule);
        for participant in &event.participants {
            let sat = participant.sat;
            if setup.budgets[sat].b < 1.0 {
                continue;
            }
            let shard = &setup.shards[sat];
            let (trained, loss) =
                train_once(config, round, event.group, sat, 0, &state.model, shard)?;
            state.round_losses.push(loss);
            state.charge(state.model.param_count(), shard.len(), config.model.local_epochs);
            let tau = state.clock.observe(&[sat], now)?;
            let rate = (config.aggregation.alpha
                * time_weight(tau, config.aggregation.weighting)?)
            .clamp(0.0, 1.0);
            state.model.scale(1.0 - rate);
            state.model.add_scaled(&trained, rate)?;
            state.clock.mark(&[sat], now);
        }
        state.maybe_eval_event(config, setup, round, now)?;
    }
    Ok(())
}

/// What one contact event produces under the sub-structure pipeline.
struct GroupOutcome {
    customized: CustomizedGlobalModel,
    dataset_size: f64,
    members: Vec<usize>,
}

/// The intra-group pipeline: derive the partition plan from the group's
/// budgets, slice the base model, assign combinations, train each assigned
/// sub-structure independently, aggregate per index with period correction,
/// and assemble the customized group model. Indices nobody trained keep the
/// base model's slices.
fn group_pipeline(
    state: &mut RunState,
    setup: &ExperimentSetup,
    config: &ExperimentConfig,
    round: usize,
    event: &ContactEvent,
    base: &ModelWeights,
) -> Result<GroupOutcome> {
    let sats: Vec<(usize, f64)> = event
        .participants
        .iter()
        .map(|p| (p.sat, setup.budgets[p.sat].b))
        .collect();
    let budget_values: Vec<f64> = sats.iter().map(|&(_, b)| b).collect();
    let plan = derive_partition_plan(base, &budget_values)?;
    let parts = partition(base, &plan)?;

    let assignment = match config.distribution.rule {
        DistributionRule::Scrolling => {
            let cursor = state
                .cursors
                .entry(event.group)
                .or_insert_with(ScrollCursor::start);
            let (assignment, next) = assign_scrolling(&sats, plan.levels(), *cursor)?;
            *cursor = next;
            assignment
        }
        DistributionRule::Random => {
            let mut rng = component_rng(
                config.seed,
                &format!("assign-r{round}-g{}", event.group),
            );
            assign_random(&sats, plan.levels(), &mut rng)?
        }
        DistributionRule::Static => assign_static(&sats, plan.levels())?,
    };

    let period_of: BTreeMap<usize, f64> = event
        .participants
        .iter()
        .map(|p| (p.sat, p.period))
        .collect();
    let mut contributions: BTreeMap<usize, Vec<SubContribution>> = BTreeMap::new();
    for (&sat, combo) in &assignment {
        let shard = &setup.shards[sat];
        for &sub in combo {
            let (trained, loss) =
                train_once(config, round, event.group, sat, sub, &parts[sub].model, shard)?;
            state.round_losses.push(loss);
            state.charge(
                parts[sub].model.param_count(),
                shard.len(),
                config.model.local_epochs,
            );
            contributions.entry(sub).or_default().push(SubContribution {
                weights: trained,
                dataset_size: shard.len() as f64,
                orbit_period: period_of[&sat],
            });
        }
    }

    let mut aggregated = Vec::with_capacity(plan.levels());
    let mut contributors = Vec::new();
    for (sub, part) in parts.iter().enumerate() {
        match contributions.get(&sub) {
            Some(group) => {
                let model = aggregate_substructures(
                    group,
                    setup.schedule.round_duration,
                    config.aggregation.normalize,
                )?;
                aggregated.push(SubStructureModel { index: sub, model });
                contributors.push(sub);
            }
            None => aggregated.push(part.clone()),
        }
    }
    let weights = assemble(&aggregated, &plan)?;
    let members: Vec<usize> = sats.iter().map(|&(id, _)| id).collect();
    let dataset_size: f64 = members
        .iter()
        .map(|&sat| setup.shards[sat].len() as f64)
        .sum();
    Ok(GroupOutcome {
        customized: CustomizedGlobalModel::new(weights, event.group, round, contributors),
        dataset_size,
        members,
    })
}

/// Sub-structures with synchronous aggregation: every event trains against
/// the round-start model; the round ends with a dataset-weighted average of
/// the customized group models.
fn round_ss_sync(
    state: &mut RunState,
    setup: &ExperimentSetup,
    config: &ExperimentConfig,
    round: usize,
) -> Result<()> {
    let snapshot = state.model.clone();
    let mut collected: Vec<(ModelWeights, f64)> = Vec::new();
    for event in &setup.schedule.events {
        let outcome = group_pipeline(state, setup, config, round, event, &snapshot)?;
        collected.push((outcome.customized.weights, outcome.dataset_size));
    }
    if collected.is_empty() {
        return Ok(());
    }
    let total: f64 = collected.iter().map(|(_, size)| size).sum();
    let mut mean = snapshot.zeros_like();
    for (weights, size) in &collected {
        mean.add_scaled(weights, size / total)?;
    }
    state.model = mean;
    Ok(())
}

/// Sub-structures with per-event merging. The full pipeline applies the
/// staleness threshold and buffer; the asynchronous ablation merges every
/// arrival at rate `alpha * s(tau)`.
fn round_ss_async(
    state: &mut RunState,
    setup: &ExperimentSetup,
    config: &ExperimentConfig,
    round: usize,
) -> Result<()> {
    for event in &setup.schedule.events {
        let now = round_time(round, event, &setup.schedule);
        let base = state.model.clone();
        let outcome = group_pipeline(state, setup, config, round, event, &base)?;
        match config.strategy {
            Strategy::Fedsn => {
                pseudo_sync_step(
                    &mut state.model,
                    &outcome.customized,
                    &outcome.members,
                    outcome.dataset_size,
                    now,
                    &mut state.clock,
                    &mut state.buffer,
                    &config.aggregation,
                )?;
            }
            Strategy::SsFedasync => {
                let tau = state.clock.observe(&outcome.members, now)?;
                let rate = (config.aggregation.alpha
                    * time_weight(tau, config.aggregation.weighting)?)
                .clamp(0.0, 1.0);
                state.model.scale(1.0 - rate);
                state.model.add_scaled(&outcome.customized.weights, rate)?;
                state.clock.mark(&outcome.members, now);
            }
            other => {
                return Err(Error::rejected(format!(
                    "round_ss_async cannot run strategy {}",
                    other.name()
                )))
            }
        }
        state.maybe_eval_event(config, setup, round, now)?;
    }
    Ok(())
}

/// Width-sliced baseline: every satellite trains the nested prefix of the
/// model its budget affords (prefix widths follow the plan's block
/// boundaries) from the round-start model, and every parameter region is
/// dataset-weighted-averaged over exactly the satellites that trained it.
fn round_vheterofl(
    state: &mut RunState,
    setup: &ExperimentSetup,
    config: &ExperimentConfig,
    round: usize,
    plan: &PartitionPlan,
) -> Result<()> {
    let snapshot = state.model.clone();
    let depth = snapshot.layers.len();
    let mut numerator = snapshot.zeros_like();
    let mut denominator = snapshot.zeros_like();

    for sat in 0..setup.shards.len() {
        let blocks = substructure_count(setup.budgets[sat].b, plan.levels())?;
        let prefix: Vec<usize> = (0..plan.hidden_widths().len())
            .map(|h| plan.prefix(h, blocks).end)
            .collect();
        let sub = extract_prefix(&snapshot, &prefix)?;
        let shard = &setup.shards[sat];
        let (trained, loss) = train_once(config, round, 0, sat, 0, &sub, shard)?;
        state.round_losses.push(loss);
        state.charge(sub.param_count(), shard.len(), config.model.local_epochs);

        let weight = shard.len() as f64;
        for i in 0..depth {
            let rows = if i == 0 { snapshot.input_dim() } else { prefix[i - 1] };
            let cols = if i == depth - 1 {
                snapshot.output_dim()
            } else {
                prefix[i]
            };
            for r in 0..rows {
                for c in 0..cols {
                    let v = numerator.layers[i].weight.get(r, c)
                        + weight * trained.layers[i].weight.get(r, c);
                    numerator.layers[i].weight.set(r, c, v);
                    let d = denominator.layers[i].weight.get(r, c) + weight;
                    denominator.layers[i].weight.set(r, c, d);
                }
            }
            for c in 0..cols {
                numerator.layers[i].bias[c] += weight * trained.layers[i].bias[c];
                denominator.layers[i].bias[c] += weight;
            }
        }
    }

    let mut merged = snapshot.clone();
    for i in 0..depth {
        for r in 0..merged.layers[i].weight.rows() {
            for c in 0..merged.layers[i].weight.cols() {
                let d = denominator.layers[i].weight.get(r, c);
                if d > 0.0 {
                    merged.layers[i]
                        .weight
                        .set(r, c, numerator.layers[i].weight.get(r, c) / d);
                }
            }
        }
        for c in 0..merged.layers[i].bias.len() {
            let d = denominator.layers[i].bias[c];
            if d > 0.0 {
                merged.layers[i].bias[c] = numerator.layers[i].bias[c] / d;
            }
        }
    }
    state.model = merged;
    Ok(())
}

/// The nested sub-model spanning the first `prefix[h]` channels of each
/// hidden dimension (cross-block weights inside the prefix included).
fn extract_prefix(model: &ModelWeights, prefix: &[usize]) -> Result<ModelWeights> {
    let depth = model.layers.len();
    let mut layers = Vec::with_capacity(depth);
    for (i, layer) in model.layers.iter().enumerate() {
        let rows = if i == 0 {
            0..model.input_dim()
        } else {
            0..prefix[i - 1]
        };
        let cols = if i == depth - 1 {
            0..model.output_dim()
        } else {
            0..prefix[i]
        };
        let weight = layer.weight.slice(rows, cols.clone());
        let bias = layer.bias[cols].to_vec();
        layers.push(crate::model::DenseLayer { weight, bias });
    }
    ModelWeights::new(layers, model.activation)
}
