//! Dataset plumbing: CSV ingestion, a synthetic Gaussian-blobs generator,
//! feature standardization, and the IID / label-sorted non-IID shard
//! partitioners that hand each satellite its local dataset.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::LabeledBatch;

/// Which side of the train/test split a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// An immutable labeled dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub split: Split,
}

/// Satellite id -> sample indices into the train split.
pub type ShardAssignment = BTreeMap<usize, Vec<usize>>;

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, classes: usize, split: Split) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::dims(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        if features.rows() == 0 {
            return Err(Error::rejected("datasets must hold at least one sample"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::rejected(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.features.cols()
    }

    /// The whole dataset as one batch.
    pub fn full_batch(&self) -> LabeledBatch {
        LabeledBatch {
            inputs: self.features.clone(),
            labels: self.labels.clone(),
        }
    }

    /// The rows at `indices` as a batch, in the given order.
    pub fn batch(&self, indices: &[usize]) -> LabeledBatch {
        self.full_batch().subset(indices)
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }
}

/// Load `d` feature columns followed by one non-negative integer label
/// column. The class count is `max label + 1`.
pub fn load_csv(path: &Path, has_header: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            line: 0,
            message: format!("{path:?}: {e}"),
        })?;

    let mut features: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut width: Option<usize> = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        match width {
            None => {
                if record.len() < 2 {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "need at least one feature and a label, found {} cells",
                            record.len()
                        ),
                    });
                }
                width = Some(record.len());
            }
            Some(w) if record.len() != w => {
                return Err(Error::Parse {
                    line,
                    message: format!("ragged row: {} cells, expected {w}", record.len()),
                });
            }
            _ => {}
        }
        let cells = record.len();
        for (i, cell) in record.iter().enumerate() {
            if i + 1 < cells {
                let value: f64 = cell.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("feature column {i}: {cell:?} is not a number"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("feature column {i}: {cell:?} is not finite"),
                    });
                }
                features.push(value);
            } else {
                let label: i64 = cell.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("label {cell:?} is not an integer"),
                })?;
                if label < 0 {
                    return Err(Error::Parse {
                        line,
                        message: format!("label {label} is negative"),
                    });
                }
                labels.push(label as usize);
            }
        }
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::Parse {
            line: 0,
            message: format!("{path:?} holds no data rows"),
        });
    }
    let d = width.unwrap() - 1;
    let classes = labels.iter().max().unwrap() + 1;
    Dataset::new(Matrix::from_vec(n, d, features)?, labels, classes, Split::Train)
}

/// Write a dataset in the same layout [`load_csv`] reads (no header). Floats
/// use the shortest representation that parses back to the same bits.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in 0..dataset.len() {
        let mut row: Vec<String> = dataset
            .features
            .row(r)
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        row.push(format!("{}", dataset.labels[r]));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Unit-variance Gaussian clusters whose class means sit at mutual distance
/// `separation`, split 80/20 into train/test. Needs `d >= q - 1` so that `q`
/// equidistant means exist.
pub fn synth_blobs(
    q: usize,
    d: usize,
    n_per_class: usize,
    separation: f64,
    rng: &mut impl Rng,
) -> Result<(Dataset, Dataset)> {
    if q < 2 {
        return Err(Error::rejected("need at least two classes"));
    }
    if d == 0 {
        return Err(Error::rejected("need at least one feature dimension"));
    }
    if d < q - 1 {
        return Err(Error::rejected(format!(
            "{q} equidistant class means do not fit in {d} dimensions"
        )));
    }
    if n_per_class < 5 {
        return Err(Error::rejected(
            "need at least five samples per class for an 80/20 split",
        ));
    }
    if separation < 0.0 || !separation.is_finite() {
        return Err(Error::rejected("separation must be finite and >= 0"));
    }

    let means = simplex_means(q, d, separation);
    let train_per_class = n_per_class * 4 / 5;
    let mut train_rows = Vec::new();
    let mut train_labels = Vec::new();
    let mut test_rows = Vec::new();
    let mut test_labels = Vec::new();
    for (class, mean) in means.iter().enumerate() {
        for i in 0..n_per_class {
            let sample: Vec<f64> = mean
                .iter()
                .map(|&m| m + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
                .collect();
            if i < train_per_class {
                train_rows.extend_from_slice(&sample);
                train_labels.push(class);
            } else {
                test_rows.extend_from_slice(&sample);
                test_labels.push(class);
            }
        }
    }
    let train = Dataset::new(
        Matrix::from_vec(train_labels.len(), d, train_rows)?,
        train_labels,
        q,
        Split::Train,
    )?;
    let test = Dataset::new(
        Matrix::from_vec(test_labels.len(), d, test_rows)?,
        test_labels,
        q,
        Split::Test,
    )?;
    Ok((train, test))
}

/// `q` points in `R^d` with all pairwise distances equal to `separation`:
/// scaled basis vectors when `d >= q`, otherwise (`d == q - 1`) the first
/// `q - 1` scaled basis vectors plus one point on the all-ones diagonal.
fn simplex_means(q: usize, d: usize, separation: f64) -> Vec<Vec<f64>> {
    let a = separation / 2.0_f64.sqrt();
    let mut means = Vec::with_capacity(q);
    if d >= q {
        for class in 0..q {
            let mut mean = vec![0.0; d];
            mean[class] = a;
            means.push(mean);
        }
    } else {
        for class in 0..q - 1 {
            let mut mean = vec![0.0; d];
            mean[class] = a;
            means.push(mean);
        }
        let c = a * (1.0 + (q as f64).sqrt()) / (q - 1) as f64;
        means.push(vec![c; d]);
    }
    means
}

/// Standardize both splits with the train split's per-column mean and
/// standard deviation. Constant columns are left centered but unscaled.
pub fn standardize(train: &mut Dataset, test: &mut Dataset) {
    let d = train.dims();
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    for r in 0..train.len() {
        for (c, m) in mean.iter_mut().enumerate() {
            *m += train.features.get(r, c);
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut std = vec![0.0; d];
    for r in 0..train.len() {
        for (c, s) in std.iter_mut().enumerate() {
            let diff = train.features.get(r, c) - mean[c];
            *s += diff * diff;
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    for dataset in [train, test] {
        for r in 0..dataset.len() {
            for c in 0..d {
                let v = (dataset.features.get(r, c) - mean[c]) / std[c];
                dataset.features.set(r, c, v);
            }
        }
    }
}

/// Random near-equal shards: a seeded permutation cut into `n_sats` pieces
/// whose sizes differ by at most one (larger shards to lower ids).
pub fn partition_iid(train: &Dataset, n_sats: usize, rng: &mut impl Rng) -> Result<ShardAssignment> {
    if n_sats == 0 {
        return Err(Error::rejected("need at least one satellite"));
    }
    if train.len() < n_sats {
        return Err(Error::rejected(format!(
            "{} samples cannot cover {n_sats} satellites",
            train.len()
        )));
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    shuffle(&mut order, rng);
    let base = train.len() / n_sats;
    let remainder = train.len() % n_sats;
    let mut assignment = ShardAssignment::new();
    let mut cursor = 0;
    for sat in 0..n_sats {
        let size = base + usize::from(sat < remainder);
        assignment.insert(sat, order[cursor..cursor + size].to_vec());
        cursor += size;
    }
    Ok(assignment)
}

/// Label-sorted non-IID shards: sort samples by label, cut into
/// `total_shards` contiguous shards, deal `shards_per_sat` shards to each
/// satellite by a seeded permutation.
pub fn partition_noniid(
    train: &Dataset,
    n_sats: usize,
    total_shards: usize,
    shards_per_sat: usize,
    rng: &mut impl Rng,
) -> Result<ShardAssignment> {
    if n_sats == 0 || total_shards == 0 || shards_per_sat == 0 {
        return Err(Error::rejected("shard counts must be positive"));
    }
    if total_shards != n_sats * shards_per_sat {
        return Err(Error::rejected(format!(
            "{total_shards} shards != {n_sats} satellites x {shards_per_sat} each"
        )));
    }
    if train.len() < total_shards {
        return Err(Error::rejected(format!(
            "{} samples cannot fill {total_shards} shards",
            train.len()
        )));
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.sort_by_key(|&i| (train.labels[i], i));

    let base = train.len() / total_shards;
    let remainder = train.len() % total_shards;
    let mut shards = Vec::with_capacity(total_shards);
    let mut cursor = 0;
    for shard in 0..total_shards {
        let size = base + usize::from(shard < remainder);
        shards.push(order[cursor..cursor + size].to_vec());
        cursor += size;
    }

    let mut deal: Vec<usize> = (0..total_shards).collect();
    shuffle(&mut deal, rng);
    let mut assignment = ShardAssignment::new();
    for sat in 0..n_sats {
        let mut indices = Vec::new();
        for &shard in &deal[sat * shards_per_sat..(sat + 1) * shards_per_sat] {
            indices.extend_from_slice(&shards[shard]);
        }
        assignment.insert(sat, indices);
    }
    Ok(assignment)
}

/// Fisher-Yates with the caller's stream.
fn shuffle(values: &mut [usize], rng: &mut impl Rng) {
    for i in (1..values.len()).rev() {
        let j = rng.gen_range(0..=i);
        values.swap(i, j);
    }
}
