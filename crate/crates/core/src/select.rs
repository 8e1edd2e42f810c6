//! Metric selection: Pearson redundancy filter plus a small random-forest
//! classifier (CART, Gini) with mean-decrease-impurity feature importance.
//!
//! The forest is written from scratch so that training is bit-deterministic
//! given (data order, seed): per-tree generators come from
//! [`crate::rng::stream_seed`], candidate features and thresholds are scanned
//! in ascending order, and ties keep the first-best split.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index::sample as sample_without_replacement;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// The five degradation classes the classifier distinguishes, in canonical
/// order.
pub const CLASSES: [&str; 5] = ["noise", "blur", "low_res", "regions_missing", "band_missing"];

/// Map a recipe kind tag to its degradation class.
pub fn degradation_class(kind_name: &str) -> Option<&'static str> {
    match kind_name {
        "gaussian_noise" | "poisson_noise" => Some("noise"),
        "gaussian_blur" | "motion_blur" => Some("blur"),
        "super_res" => Some("low_res"),
        "inpaint" => Some("regions_missing"),
        "band_drop" => Some("band_missing"),
        _ => None,
    }
}

/// A labeled feature matrix: one row per cube, one column per metric.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSamples {
    paths: Vec<String>,
    features: Vec<f64>, // row-major N×d
    labels: Vec<usize>, // indices into class_names
    class_names: Vec<String>,
    feature_names: Vec<String>,
}

impl LabeledSamples {
    /// `features` is row-major with `labels.len()` rows of
    /// `feature_names.len()` columns; `paths` may be empty (filled with "").
    pub fn new(
        paths: Vec<String>,
        features: Vec<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        let d = feature_names.len();
        if n < 2 {
            return Err(Error::data(format!("need at least 2 samples, got {n}")));
        }
        if d == 0 {
            return Err(Error::data("need at least 1 feature column".to_string()));
        }
        if features.len() != n * d {
            return Err(Error::dimension(format!(
                "feature matrix length {} does not match {n}x{d}",
                features.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("feature matrix contains non-finite values".to_string()));
        }
        if let Some(l) = labels.iter().find(|l| **l >= class_names.len()) {
            return Err(Error::data(format!("label {l} outside the {} known classes", class_names.len())));
        }
        let paths = if paths.is_empty() { vec![String::new(); n] } else { paths };
        if paths.len() != n {
            return Err(Error::dimension(format!("path count {} does not match {n} rows", paths.len())));
        }
        Ok(LabeledSamples { paths, features, labels, class_names, feature_names })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn paths(&self) -> &[String] {
        &self.paths
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Column `j` gathered across rows.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.row(i)[j]).collect()
    }

    /// Restrict to the given feature columns (ascending, in the given order).
    pub fn select_columns(&self, kept: &[usize]) -> Result<LabeledSamples> {
        if let Some(j) = kept.iter().find(|j| **j >= self.dim()) {
            return Err(Error::invalid_param(format!("column {j} out of range {}", self.dim())));
        }
        let features = (0..self.len())
            .flat_map(|i| kept.iter().map(move |j| self.row(i)[*j]))
            .collect();
        LabeledSamples::new(
            self.paths.clone(),
            features,
            self.labels.clone(),
            self.class_names.clone(),
            kept.iter().map(|j| self.feature_names[*j].clone()).collect(),
        )
    }

    /// Restrict to the given rows.
    fn select_rows(&self, rows: &[usize]) -> Result<LabeledSamples> {
        LabeledSamples::new(
            rows.iter().map(|i| self.paths[*i].clone()).collect(),
            rows.iter().flat_map(|i| self.row(*i).iter().copied()).collect(),
            rows.iter().map(|i| self.labels[*i]).collect(),
            self.class_names.clone(),
            self.feature_names.clone(),
        )
    }

    /// CSV with mandatory header `path,label,<feature names…>`; label cells
    /// hold class names. Floats are written shortest-roundtrip.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["path".to_string(), "label".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.len() {
            let mut rec = vec![self.paths[i].clone(), self.class_names[self.labels[i]].clone()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parse the CSV written by [`LabeledSamples::write_csv`]. The class set
    /// is the canonical five-class order when all labels belong to it,
    /// otherwise the distinct labels sorted lexicographically.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(csv_err)?.clone();
        if header.len() < 3 || &header[0] != "path" || &header[1] != "label" {
            return Err(Error::data(format!(
                "expected header path,label,<metrics…>, got {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let feature_names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut paths = Vec::new();
        let mut label_names = Vec::new();
        let mut features = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != header.len() {
                return Err(Error::data(format!("row {i} has {} fields, expected {}", rec.len(), header.len())));
            }
            paths.push(rec[0].to_string());
            label_names.push(rec[1].to_string());
            for f in rec.iter().skip(2) {
                features.push(
                    f.parse::<f64>()
                        .map_err(|e| Error::data(format!("row {i}: bad float {f:?}: {e}")))?,
                );
            }
        }
        let distinct: BTreeSet<&str> = label_names.iter().map(String::as_str).collect();
        let class_names: Vec<String> = if distinct.iter().all(|l| CLASSES.contains(l)) {
            CLASSES.iter().filter(|c| distinct.contains(**c)).map(|c| c.to_string()).collect()
        } else {
            distinct.iter().map(|c| c.to_string()).collect()
        };
        let labels = label_names
            .iter()
            .map(|l| class_names.iter().position(|c| c == l).expect("label drawn from distinct set"))
            .collect();
        LabeledSamples::new(paths, features, labels, class_names, feature_names)
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::data(format!("csv: {e}"))
}

/// Pearson correlation of two equal-length columns; `None` when either has
/// (numerically) zero variance.
fn column_pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        saa += dx * dx;
        sbb += dy * dy;
        sab += dx * dy;
    }
    if saa * sbb < 1e-24 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Greedy redundancy filter: scan columns in order, keep a column iff its
/// |Pearson ρ| against every already-kept column is strictly below
/// `rho_max`. Zero-variance columns are dropped before the scan. Returns
/// kept indices ascending; idempotent on its own output.
pub fn pearson_filter(samples: &LabeledSamples, rho_max: f64) -> Result<Vec<usize>> {
    if !(rho_max > 0.0 && rho_max <= 1.0) {
        return Err(Error::invalid_param(format!("rho_max {rho_max} out of (0, 1]")));
    }
    if samples.len() < 3 {
        return Err(Error::data(format!(
            "pearson filter needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    let columns: Vec<Vec<f64>> = (0..samples.dim()).map(|j| samples.column(j)).collect();
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..samples.dim() {
        let mean = columns[j].iter().sum::<f64>() / columns[j].len() as f64;
        if columns[j].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() < 1e-24 {
            continue;
        }
        let redundant = kept.iter().any(|k| {
            match column_pearson(&columns[j], &columns[*k]) {
                Some(rho) => rho.abs() >= rho_max,
                None => false,
            }
        });
        if !redundant {
            kept.push(j);
        }
    }
    Ok(kept)
}

/// Random-forest hyperparameters. `features_per_split = None` means ⌈√d⌉.
/// Every field except `seed` has a serde default, so a JSON config may give
/// just `{"seed": N}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfConfig {
    #[serde(default = "default_n_trees")]
    pub n_trees: usize,
    #[serde(default = "default_max_depth")]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    #[serde(default)]
    pub features_per_split: Option<usize>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
    pub seed: u64,
}

fn default_n_trees() -> usize {
    100
}

fn default_max_depth() -> Option<usize> {
    Some(12)
}

fn default_min_leaf() -> usize {
    2
}

fn default_bootstrap() -> bool {
    true
}

impl RfConfig {
    /// Standard defaults: 100 trees, depth 12, min_leaf 2, ⌈√d⌉ features
    /// per split, bootstrap on.
    pub fn new(seed: u64) -> Self {
        RfConfig {
            n_trees: 100,
            max_depth: Some(12),
            min_leaf: 2,
            features_per_split: None,
            bootstrap: true,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid_param("n_trees must be positive".to_string()));
        }
        if self.min_leaf == 0 {
            return Err(Error::invalid_param("min_leaf must be positive".to_string()));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::invalid_param("features_per_split must be positive".to_string()));
        }
        Ok(())
    }
}

/// One CART node: either a binary split on `feature <= threshold` or a leaf
/// holding the per-class training histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
    Leaf { counts: Vec<usize> },
}

impl TreeNode {
    fn predict(&self, row: &[f64]) -> usize {
        match self {
            TreeNode::Split { feature, threshold, left, right } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
            TreeNode::Leaf { counts } => argmax_counts(counts),
        }
    }
}

/// Lowest index among the maxima.
fn argmax_counts(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, c) in counts.iter().enumerate() {
        if *c > counts[best] {
            best = i;
        }
    }
    best
}

/// A trained forest: trees, normalized mean-decrease-impurity importances,
/// the class and feature name sets, and the training config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub importances: Vec<f64>,
    pub classes: Vec<String>,
    pub feature_names: Vec<String>,
    pub config: RfConfig,
}

impl ForestModel {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::data(format!("model encode: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: ForestModel =
            serde_json::from_str(s).map_err(|e| Error::data(format!("model decode: {e}")))?;
        let d = model.feature_names.len();
        fn check(node: &TreeNode, d: usize, k: usize) -> Result<()> {
            match node {
                TreeNode::Split { feature, left, right, .. } => {
                    if *feature >= d {
                        return Err(Error::data(format!("split feature {feature} out of range {d}")));
                    }
                    check(left, d, k)?;
                    check(right, d, k)
                }
                TreeNode::Leaf { counts } => {
                    if counts.len() != k {
                        return Err(Error::data(format!("leaf histogram length {} != {k} classes", counts.len())));
                    }
                    Ok(())
                }
            }
        }
        for t in &model.trees {
            check(t, d, model.classes.len())?;
        }
        Ok(model)
    }
}

/// Gini impurity of a class histogram.
fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    1.0 - counts.iter().map(|c| (*c as f64 / n) * (*c as f64 / n)).sum::<f64>()
}

struct TreeBuilder<'a> {
    samples: &'a LabeledSamples,
    n_classes: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
    m_features: usize,
    n_root: f64,
    importances: Vec<f64>,
}

impl TreeBuilder<'_> {
    fn class_counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for i in idx {
            counts[self.samples.labels()[*i]] += 1;
        }
        counts
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize, rng: &mut impl Rng) -> TreeNode {
        let counts = self.class_counts(&idx);
        let parent_gini = gini(&counts, idx.len());
        let depth_ok = self.max_depth.is_none_or(|d| depth < d);
        if parent_gini == 0.0 || !depth_ok || idx.len() < 2 * self.min_leaf {
            return TreeNode::Leaf { counts };
        }
        // Candidate features are sampled per node, then scanned ascending so
        // tie-breaking is order-stable.
        let d = self.samples.dim();
        let mut feats: Vec<usize> =
            sample_without_replacement(rng, d, self.m_features.min(d)).into_iter().collect();
        feats.sort_unstable();

        let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, decrease)
        for f in feats {
            let mut order: Vec<usize> = idx.clone();
            order.sort_by(|a, b| {
                self.samples.row(*a)[f].partial_cmp(&self.samples.row(*b)[f]).expect("finite features")
            });
            let mut left = vec![0usize; self.n_classes];
            let total = counts.clone();
            let n = idx.len() as f64;
            for (pos, i) in order.iter().enumerate() {
                left[self.samples.labels()[*i]] += 1;
                let nl = pos + 1;
                if nl == order.len() {
                    break;
                }
                let (v, vnext) = (self.samples.row(*i)[f], self.samples.row(order[pos + 1])[f]);
                if v == vnext || nl < self.min_leaf || order.len() - nl < self.min_leaf {
                    continue;
                }
                let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let decrease = parent_gini
                    - (nl as f64 / n) * gini(&left, nl)
                    - ((order.len() - nl) as f64 / n) * gini(&right, order.len() - nl);
                if decrease > 1e-12 && best.is_none_or(|(_, _, bd)| decrease > bd) {
                    best = Some((f, (v + vnext) / 2.0, decrease));
                }
            }
        }
        let Some((feature, threshold, decrease)) = best else {
            return TreeNode::Leaf { counts };
        };
        self.importances[feature] += (idx.len() as f64 / self.n_root) * decrease;
        let (mut li, mut ri) = (Vec::new(), Vec::new());
        for i in idx {
            if self.samples.row(i)[feature] <= threshold {
                li.push(i);
            } else {
                ri.push(i);
            }
        }
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(self.build(li, depth + 1, rng)),
            right: Box::new(self.build(ri, depth + 1, rng)),
        }
    }
}

/// Train a forest. Deterministic given (data order, seed): tree `t` draws
/// from substream `t`, bootstrap first, then node-level feature sampling in
/// depth-first build order.
pub fn train_forest(samples: &LabeledSamples, config: &RfConfig) -> Result<ForestModel> {
    config.validate()?;
    let present: BTreeSet<usize> = samples.labels().iter().copied().collect();
    if present.len() < 2 {
        return Err(Error::data(format!("need at least 2 classes in training data, got {}", present.len())));
    }
    let d = samples.dim();
    let m_features = config.features_per_split.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize);
    let n = samples.len();
    let mut trees = Vec::with_capacity(config.n_trees);
    let mut raw_importances = vec![0.0f64; d];
    for t in 0..config.n_trees {
        let mut rng = stream_rng(config.seed, t as u64);
        let idx: Vec<usize> = if config.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut builder = TreeBuilder {
            samples,
            n_classes: samples.class_names().len(),
            min_leaf: config.min_leaf,
            max_depth: config.max_depth,
            m_features,
            n_root: idx.len() as f64,
            importances: vec![0.0f64; d],
        };
        trees.push(builder.build(idx, 0, &mut rng));
        for (acc, v) in raw_importances.iter_mut().zip(&builder.importances) {
            *acc += v / config.n_trees as f64;
        }
    }
    let total: f64 = raw_importances.iter().sum();
    if total <= 0.0 {
        return Err(Error::data("no split had positive impurity decrease; features carry no signal".to_string()));
    }
    let importances = raw_importances.iter().map(|v| v / total).collect();
    Ok(ForestModel {
        trees,
        importances,
        classes: samples.class_names().to_vec(),
        feature_names: samples.feature_names().to_vec(),
        config: config.clone(),
    })
}

/// Majority vote over trees; ties go to the lowest class id. Returns the
/// winning class and the per-class vote histogram.
pub fn predict(model: &ForestModel, row: &[f64]) -> Result<(usize, Vec<usize>)> {
    if row.len() != model.feature_names.len() {
        return Err(Error::dimension(format!(
            "feature row length {} != model dimension {}",
            row.len(),
            model.feature_names.len()
        )));
    }
    let mut votes = vec![0usize; model.classes.len()];
    for t in &model.trees {
        votes[t.predict(row)] += 1;
    }
    Ok((argmax_counts(&votes), votes))
}

/// K×K counts, rows = true class, columns = predicted class.
pub fn confusion_matrix(model: &ForestModel, test: &LabeledSamples) -> Result<Vec<Vec<usize>>> {
    if test.is_empty() {
        return Err(Error::data("empty test set".to_string()));
    }
    if test.class_names() != model.classes.as_slice() {
        return Err(Error::data(format!(
            "test class set {:?} does not match model {:?}",
            test.class_names(),
            model.classes
        )));
    }
    let k = model.classes.len();
    let mut m = vec![vec![0usize; k]; k];
    for i in 0..test.len() {
        let (pred, _) = predict(model, test.row(i))?;
        m[test.labels()[i]][pred] += 1;
    }
    Ok(m)
}

/// Fraction of the confusion-matrix mass on the diagonal.
pub fn accuracy(confusion: &[Vec<usize>]) -> f64 {
    let total: usize = confusion.iter().map(|r| r.iter().sum::<usize>()).sum();
    let diag: usize = confusion.iter().enumerate().map(|(i, r)| r[i]).sum();
    diag as f64 / total as f64
}

/// (name, importance) pairs, descending importance, ties by name.
pub fn importance_report(model: &ForestModel) -> Vec<(String, f64)> {
    let mut report: Vec<(String, f64)> = model
        .feature_names
        .iter()
        .cloned()
        .zip(model.importances.iter().copied())
        .collect();
    report.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite importances").then(a.0.cmp(&b.0)));
    report
}

/// Seeded stratified split: per class, shuffle rows and move
/// round(test_fraction·n_c) of them (at least 1 when the class has ≥ 2
/// rows) to the test set. Returns (train, test).
pub fn stratified_split(
    samples: &LabeledSamples,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledSamples, LabeledSamples)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid_param(format!("test_fraction {test_fraction} out of (0, 1)")));
    }
    let mut rng = stream_rng(seed, 0);
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for class in 0..samples.class_names().len() {
        let mut rows: Vec<usize> =
            (0..samples.len()).filter(|i| samples.labels()[*i] == class).collect();
        if rows.is_empty() {
            continue;
        }
        // Fisher-Yates on the class's row list.
        for i in (1..rows.len()).rev() {
            rows.swap(i, rng.random_range(0..=i));
        }
        let mut n_test = (test_fraction * rows.len() as f64).round() as usize;
        if rows.len() >= 2 {
            n_test = n_test.clamp(1, rows.len() - 1);
        } else {
            n_test = 0;
        }
        test_rows.extend_from_slice(&rows[..n_test]);
        train_rows.extend_from_slice(&rows[n_test..]);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok((samples.select_rows(&train_rows)?, samples.select_rows(&test_rows)?))
}
