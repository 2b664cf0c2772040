//! Channel-wise sub-structure customization: split the global model into `L`
//! basic sub-structures along hidden-channel blocks and assemble aggregated
//! sub-structures back into a block-diagonal customized global model.
//!
//! Input and output layers keep their outer dimensions; only hidden channels
//! are partitioned. Hidden-to-hidden weights outside the diagonal blocks are
//! never trained and are exactly zero in every assembled model.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::model::{DenseLayer, ModelWeights};

/// Where each of the `L` channel blocks sits in every hidden dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    levels: usize,
    input_dim: usize,
    hidden_widths: Vec<usize>,
    output_dim: usize,
    /// `blocks[h][l]` is the channel range of block `l` in hidden dimension `h`.
    blocks: Vec<Vec<Range<usize>>>,
}

/// One basic sub-structure: a complete, trainable model over block `index`'s
/// hidden channels. The output bias is carried in full by every sub-structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SubStructureModel {
    pub index: usize,
    pub model: ModelWeights,
}

/// A block-diagonal model assembled from one group's aggregated
/// sub-structures, tagged with the group, round, and contributors that
/// produced it for staleness accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomizedGlobalModel {
    pub weights: ModelWeights,
    pub group: usize,
    pub round: usize,
    /// Sub-structure indices actually trained in the group this round.
    pub contributors: Vec<usize>,
}

impl PartitionPlan {
    /// Split every hidden dimension into exactly `levels` contiguous blocks,
    /// as equal as possible, remainder channels going to the lowest-index
    /// blocks.
    pub fn with_levels(shape: &ModelWeights, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::rejected("partition needs at least one level"));
        }
        let hidden_widths = shape.hidden_widths();
        if let Some(&narrow) = hidden_widths.iter().find(|&&w| w < levels) {
            return Err(Error::rejected(format!(
                "hidden width {narrow} cannot host {levels} blocks"
            )));
        }
        let blocks = hidden_widths
            .iter()
            .map(|&width| {
                let base = width / levels;
                let remainder = width % levels;
                let mut start = 0;
                (0..levels)
                    .map(|l| {
                        let size = base + usize::from(l < remainder);
                        let range = start..start + size;
                        start += size;
                        range
                    })
                    .collect()
            })
            .collect();
        Ok(PartitionPlan {
            levels,
            input_dim: shape.input_dim(),
            hidden_widths,
            output_dim: shape.output_dim(),
            blocks,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.hidden_widths
    }

    /// Channel range of block `level` in hidden dimension `hidden`.
    pub fn block(&self, hidden: usize, level: usize) -> Range<usize> {
        self.blocks[hidden][level].clone()
    }

    /// Channel range covered by the first `count` blocks of dimension
    /// `hidden` — the nested prefix widths used by width-sliced baselines.
    pub fn prefix(&self, hidden: usize, count: usize) -> Range<usize> {
        if count == 0 {
            return 0..0;
        }
        0..self.blocks[hidden][count - 1].end
    }

    fn matches(&self, model: &ModelWeights) -> bool {
        model.input_dim() == self.input_dim
            && model.output_dim() == self.output_dim
            && model.hidden_widths() == self.hidden_widths
    }
}

/// Number of basic sub-structures: `L = floor(1 / min(budgets))`, clamped to
/// the narrowest hidden width so every block is non-empty.
pub fn derive_partition_plan(shape: &ModelWeights, budgets: &[f64]) -> Result<PartitionPlan> {
    if budgets.is_empty() {
        return Err(Error::rejected("cannot derive a plan from zero budgets"));
    }
    if let Some(&bad) = budgets.iter().find(|&&b| !(b > 0.0 && b <= 1.0)) {
        return Err(Error::rejected(format!(
            "budget {bad} outside (0, 1]"
        )));
    }
    let min = budgets.iter().cloned().fold(f64::INFINITY, f64::min);
    let raw = (1.0 / min + 1e-9).floor() as usize;
    let cap = shape
        .hidden_widths()
        .into_iter()
        .min()
        .expect("models have at least one hidden dimension");
    let levels = raw.clamp(1, cap);
    PartitionPlan::with_levels(shape, levels)
}

/// How many basic sub-structures a budget `b` can carry out of `levels`.
pub fn substructure_count(b: f64, levels: usize) -> Result<usize> {
    if !(b > 0.0 && b <= 1.0) {
        return Err(Error::rejected(format!("budget {b} outside (0, 1]")));
    }
    if levels == 0 {
        return Err(Error::rejected("level count must be at least 1"));
    }
    Ok(((b * levels as f64 + 1e-9).floor() as usize).max(1))
}

/// Slice the global model into its `L` basic sub-structures.
///
/// Sub-structure `l` keeps all input rows, block-`l` hidden channels on every
/// hidden dimension, and all output columns; the output bias is copied whole.
pub fn partition(global: &ModelWeights, plan: &PartitionPlan) -> Result<Vec<SubStructureModel>> {
    if !plan.matches(global) {
        return Err(Error::rejected(
            "partition plan was derived for a different model shape",
        ));
    }
    let depth = global.layers.len();
    let mut parts = Vec::with_capacity(plan.levels);
    for l in 0..plan.levels {
        let mut layers = Vec::with_capacity(depth);
        for (i, layer) in global.layers.iter().enumerate() {
            let rows = if i == 0 {
                0..plan.input_dim
            } else {
                plan.block(i - 1, l)
            };
            let cols = if i == depth - 1 {
                0..plan.output_dim
            } else {
                plan.block(i, l)
            };
            let weight = layer.weight.slice(rows, cols.clone());
            let bias = layer.bias[cols].to_vec();
            layers.push(DenseLayer { weight, bias });
        }
        parts.push(SubStructureModel {
            index: l,
            model: ModelWeights::new(layers, global.activation)?,
        });
    }
    Ok(parts)
}

/// Recombine one sub-structure per index into the block-diagonal customized
/// model. Output bias is the arithmetic mean over the `L` copies; everything
/// outside the plan's blocks stays exactly zero.
pub fn assemble(parts: &[SubStructureModel], plan: &PartitionPlan) -> Result<ModelWeights> {
    if parts.len() != plan.levels {
        return Err(Error::rejected(format!(
            "expected {} sub-structures, got {}",
            plan.levels,
            parts.len()
        )));
    }
    let mut seen = vec![false; plan.levels];
    for part in parts {
        if part.index >= plan.levels {
            return Err(Error::rejected(format!(
                "sub-structure index {} outside 0..{}",
                part.index, plan.levels
            )));
        }
        if seen[part.index] {
            return Err(Error::rejected(format!(
                "duplicate sub-structure index {}",
                part.index
            )));
        }
        seen[part.index] = true;
    }

    let depth = plan.hidden_widths.len() + 1;
    let mut layers: Vec<DenseLayer> = Vec::with_capacity(depth);
    for i in 0..depth {
        let rows = if i == 0 {
            plan.input_dim
        } else {
            plan.hidden_widths[i - 1]
        };
        let cols = if i == depth - 1 {
            plan.output_dim
        } else {
            plan.hidden_widths[i]
        };
        layers.push(DenseLayer::zeros(rows, cols));
    }

    let activation = parts[0].model.activation;
    // Canonical index order makes the result independent of the caller's
    // slice order even where floating-point accumulation is involved.
    let mut ordered: Vec<&SubStructureModel> = parts.iter().collect();
    ordered.sort_by_key(|p| p.index);
    for part in &ordered {
        let l = part.index;
        if part.model.layers.len() != depth {
            return Err(Error::dims(format!(
                "sub-structure {l} has {} layers, plan expects {depth}",
                part.model.layers.len()
            )));
        }
        for (i, sub_layer) in part.model.layers.iter().enumerate() {
            let row_start = if i == 0 { 0 } else { plan.block(i - 1, l).start };
            let col_range = if i == depth - 1 {
                0..plan.output_dim
            } else {
                plan.block(i, l)
            };
            let expect_rows = if i == 0 {
                plan.input_dim
            } else {
                plan.block(i - 1, l).len()
            };
            if sub_layer.weight.rows() != expect_rows
                || sub_layer.weight.cols() != col_range.len()
            {
                return Err(Error::dims(format!(
                    "sub-structure {l} layer {i} is {}x{}, plan expects {}x{}",
                    sub_layer.weight.rows(),
                    sub_layer.weight.cols(),
                    expect_rows,
                    col_range.len()
                )));
            }
            layers[i]
                .weight
                .write_block(row_start, col_range.start, &sub_layer.weight);
            if i < depth - 1 {
                layers[i].bias[col_range].copy_from_slice(&sub_layer.bias);
            }
        }
    }
    // Every sub-structure carries a full-length copy of the output bias and
    // the assembled model takes their mean. Averaging offsets from the first
    // copy keeps the result bitwise identical to that copy whenever all
    // copies agree, for any number of levels.
    let reference = &ordered[0].model.layers[depth - 1].bias;
    let scale = 1.0 / plan.levels as f64;
    for (c, b) in layers[depth - 1].bias.iter_mut().enumerate() {
        let mut delta = 0.0;
        for part in &ordered {
            delta += part.model.layers[depth - 1].bias[c] - reference[c];
        }
        *b = reference[c] + delta * scale;
    }
    ModelWeights::new(layers, activation)
}

impl CustomizedGlobalModel {
    pub fn new(
        weights: ModelWeights,
        group: usize,
        round: usize,
        contributors: Vec<usize>,
    ) -> Self {
        CustomizedGlobalModel {
            weights,
            group,
            round,
            contributors,
        }
    }
}
