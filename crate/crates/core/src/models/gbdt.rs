//! Leaf-wise histogram gradient boosting with binary logistic loss.
//!
//! Each iteration computes `g = p − y`, `h = p(1 − p)`, grows one tree by
//! repeatedly splitting the leaf with the largest gain
//! `½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)]` until `num_leaves` is reached
//! or no split has positive gain, and adds `−learning_rate · G/(H+λ)` per
//! leaf to the scores. Leaf values are stored already shrunk.
//!
//! Features are bucketed by rank: each distinct training value of a feature
//! is its own bin as long as there are at most `max_bin` of them, so integer
//! features in `[0, n]` bin as the identity, and any strictly increasing
//! transform of a feature leaves all routing unchanged.
//!
//! Ties between equal gains go to the lowest feature index, then the lowest
//! bin threshold, then the earliest-created leaf.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{EncodingKind, LabeledDataset};
use crate::error::{Error, Result};
use crate::metrics::auc;
use crate::seeds::{derive_seed, rng_from, Purpose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub num_leaves: usize,
    pub feature_fraction: f64,
    pub bagging_fraction: f64,
    pub bagging_freq: usize,
    pub learning_rate: f64,
    pub num_iterations: usize,
    /// Stop once validation AUC has not improved for this many iterations.
    pub early_stopping_rounds: Option<usize>,
    pub max_bin: usize,
    pub min_data_in_leaf: usize,
    pub min_sum_hessian_in_leaf: f64,
    pub lambda_l2: f64,
    pub min_gain_to_split: f64,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            num_leaves: 63,
            feature_fraction: 0.5,
            bagging_fraction: 0.5,
            bagging_freq: 20,
            learning_rate: 0.01,
            num_iterations: 1000,
            early_stopping_rounds: Some(50),
            max_bin: 255,
            min_data_in_leaf: 20,
            min_sum_hessian_in_leaf: 1e-3,
            lambda_l2: 1.0,
            min_gain_to_split: 0.0,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    fn validate(&self) -> Result<()> {
        let frac = |x: f64| x > 0.0 && x <= 1.0;
        if !frac(self.feature_fraction) || !frac(self.bagging_fraction) {
            return Err(Error::InvalidConfig("feature and bagging fractions must lie in (0, 1]".into()));
        }
        if self.num_leaves < 2 {
            return Err(Error::InvalidConfig("num_leaves must be at least 2".into()));
        }
        if !(2..=256).contains(&self.max_bin) {
            return Err(Error::InvalidConfig("max_bin must lie in 2..=256".into()));
        }
        if self.learning_rate <= 0.0 || self.lambda_l2 < 0.0 {
            return Err(Error::InvalidConfig("learning rate must be positive and lambda non-negative".into()));
        }
        Ok(())
    }
}

/// Row-major feature matrix of `f64`.
#[derive(Clone, Copy, Debug)]
pub struct Features<'a> {
    pub values: &'a [f64],
    pub width: usize,
}

impl<'a> Features<'a> {
    pub fn new(values: &'a [f64], width: usize) -> Result<Self> {
        if width == 0 || !values.len().is_multiple_of(width) {
            return Err(Error::Shape(format!("{} values do not form rows of width {width}", values.len())));
        }
        Ok(Self { values, width })
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.width
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }
}

/// Converts integer dataset features to `f64` model input.
pub fn dataset_features(data: &LabeledDataset) -> Vec<f64> {
    data.features().iter().map(|&x| x as f64).collect()
}

/// Per-feature bin upper bounds: a value `x` falls in the first bin `b`
/// with `x ≤ upper[b]`, or the last bin if it exceeds them all.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    upper: Vec<Vec<f64>>,
}

impl BinMapper {
    fn fit(x: Features<'_>, max_bin: usize) -> Self {
        let upper = (0..x.width)
            .map(|f| {
                let mut vals: Vec<f64> = (0..x.rows()).map(|r| x.row(r)[f]).collect();
                vals.sort_unstable_by(f64::total_cmp);
                vals.dedup();
                if vals.len() <= max_bin {
                    vals
                } else {
                    // equal numbers of distinct values per bin
                    (1..=max_bin).map(|b| vals[b * vals.len() / max_bin - 1]).collect()
                }
            })
            .collect();
        Self { upper }
    }

    pub fn bins(&self, feature: usize) -> usize {
        self.upper[feature].len()
    }

    pub fn bin(&self, feature: usize, x: f64) -> u8 {
        let ub = &self.upper[feature];
        ub.partition_point(|&u| u < x).min(ub.len() - 1) as u8
    }

    /// Largest value routed to bins `≤ b`.
    pub fn threshold_value(&self, feature: usize, b: u8) -> f64 {
        self.upper[feature][b as usize]
    }

    fn transform(&self, x: Features<'_>) -> Vec<u8> {
        let mut out = Vec::with_capacity(x.values.len());
        for r in 0..x.rows() {
            out.extend(x.row(r).iter().enumerate().map(|(f, &v)| self.bin(f, v)));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `bin(x[feature]) ≤ bin_threshold` (equivalently
    /// `x[feature] ≤ threshold`) go left.
    Split { feature: usize, bin_threshold: u8, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    fn leaf_of(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
                Node::Leaf { .. } => return i,
            }
        }
    }

    /// Routes `rows` of a binned matrix down the tree, calling `visit` once
    /// per reached leaf with that leaf's node index and rows.
    fn for_each_leaf(&self, rows: Vec<u32>, binned: &[u8], width: usize, mut visit: impl FnMut(usize, &[u32])) {
        let mut stack = vec![(0usize, rows)];
        while let Some((i, rows)) = stack.pop() {
            match self.nodes[i] {
                Node::Split { feature, bin_threshold, left, right, .. } => {
                    let (l, r) = split_rows(&rows, |row| binned[row as usize * width + feature] <= bin_threshold);
                    stack.push((right, r));
                    stack.push((left, l));
                }
                Node::Leaf { .. } => visit(i, &rows),
            }
        }
    }

    /// Adds this tree's output to `scores`, one entry per row of `binned`.
    fn add_values(&self, scores: &mut [f64], binned: &[u8], width: usize) {
        self.for_each_leaf((0..scores.len() as u32).collect(), binned, width, |node, rows| {
            let v = self.value(node);
            for &r in rows {
                scores[r as usize] += v;
            }
        });
    }

    fn value(&self, node: usize) -> f64 {
        match self.nodes[node] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("routing ends at a leaf"),
        }
    }

    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        self.value(self.leaf_of(x))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub config: GbdtConfig,
    pub base_score: f64,
    pub bins: BinMapper,
    pub trees: Vec<Tree>,
}

/// Per-iteration record of a fit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitHistory {
    pub train_loss: Vec<f64>,
    pub validation_auc: Vec<f64>,
    /// Number of trees kept (the best validation iteration when early
    /// stopping is active).
    pub best_iteration: usize,
}

#[derive(Clone, Copy, Debug, Default)]
struct Bin {
    g: f64,
    h: f64,
    count: u32,
}

#[derive(Clone, Copy, Debug)]
struct SplitCandidate {
    gain: f64,
    feature: usize,
    bin: u8,
}

struct Leaf {
    node: usize,
    rows: Vec<u32>,
    hist: Vec<Bin>,
    best: Option<SplitCandidate>,
}

struct Grower<'a> {
    cfg: &'a GbdtConfig,
    binned: &'a [u8],
    width: usize,
    stride: usize,
    nbins: Vec<usize>,
    features: Vec<usize>,
    grad: &'a [f64],
    hess: &'a [f64],
}

impl Grower<'_> {
    fn histogram(&self, rows: &[u32]) -> Vec<Bin> {
        let mut hist = vec![Bin::default(); self.width * self.stride];
        for &r in rows {
            let r = r as usize;
            let (g, h) = (self.grad[r], self.hess[r]);
            let row = &self.binned[r * self.width..(r + 1) * self.width];
            for &f in &self.features {
                let b = &mut hist[f * self.stride + row[f] as usize];
                b.g += g;
                b.h += h;
                b.count += 1;
            }
        }
        hist
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.lambda_l2)
    }

    fn best_split(&self, hist: &[Bin]) -> Option<SplitCandidate> {
        let mut best: Option<SplitCandidate> = None;
        for &f in &self.features {
            let bins = &hist[f * self.stride..f * self.stride + self.nbins[f]];
            let total = bins.iter().fold(Bin::default(), |a, b| Bin { g: a.g + b.g, h: a.h + b.h, count: a.count + b.count });
            let parent = self.score(total.g, total.h);
            let mut left = Bin::default();
            for (t, b) in bins[..bins.len() - 1].iter().enumerate() {
                left.g += b.g;
                left.h += b.h;
                left.count += b.count;
                let right = Bin { g: total.g - left.g, h: total.h - left.h, count: total.count - left.count };
                if (left.count as usize) < self.cfg.min_data_in_leaf || (right.count as usize) < self.cfg.min_data_in_leaf {
                    continue;
                }
                if left.h < self.cfg.min_sum_hessian_in_leaf || right.h < self.cfg.min_sum_hessian_in_leaf {
                    continue;
                }
                let gain = 0.5 * (self.score(left.g, left.h) + self.score(right.g, right.h) - parent);
                if gain > self.cfg.min_gain_to_split && best.is_none_or(|b| gain > b.gain) {
                    best = Some(SplitCandidate { gain, feature: f, bin: t as u8 });
                }
            }
        }
        best
    }

    fn leaf_value(&self, hist: &[Bin]) -> f64 {
        // every row lands in exactly one bin of any active feature
        let f = self.features[0];
        let (g, h) = hist[f * self.stride..(f + 1) * self.stride].iter().fold((0.0, 0.0), |a, b| (a.0 + b.g, a.1 + b.h));
        -self.cfg.learning_rate * g / (h + self.cfg.lambda_l2)
    }

    /// Grows one tree over `bag`; also returns each leaf's node and rows.
    fn grow(&self, bag: &[u32], bins: &BinMapper) -> (Tree, Vec<(usize, Vec<u32>)>) {
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let hist = self.histogram(bag);
        let best = self.best_split(&hist);
        let mut leaves = vec![Leaf { node: 0, rows: bag.to_vec(), hist, best }];
        while leaves.len() < self.cfg.num_leaves {
            let mut pick: Option<(usize, f64)> = None;
            for (i, leaf) in leaves.iter().enumerate() {
                if let Some(c) = leaf.best {
                    if pick.is_none_or(|(_, g)| c.gain > g) {
                        pick = Some((i, c.gain));
                    }
                }
            }
            let Some((li, _)) = pick else { break };
            let parent = std::mem::take(&mut leaves[li].rows);
            let split = leaves[li].best.expect("picked leaf has a split");
            let (left_rows, right_rows) = split_rows(&parent, |r| self.binned[r as usize * self.width + split.feature] <= split.bin);

            let left_is_small = left_rows.len() <= right_rows.len();
            let small_hist = self.histogram(if left_is_small { &left_rows } else { &right_rows });
            let mut large_hist = std::mem::take(&mut leaves[li].hist);
            for (l, s) in large_hist.iter_mut().zip(&small_hist) {
                l.g -= s.g;
                l.h -= s.h;
                l.count -= s.count;
            }
            let (left_hist, right_hist) = if left_is_small { (small_hist, large_hist) } else { (large_hist, small_hist) };

            let left_node = nodes.len();
            let right_node = left_node + 1;
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[leaves[li].node] = Node::Split {
                feature: split.feature,
                bin_threshold: split.bin,
                threshold: bins.threshold_value(split.feature, split.bin),
                left: left_node,
                right: right_node,
            };
            let left_best = self.best_split(&left_hist);
            let right_best = self.best_split(&right_hist);
            leaves[li] = Leaf { node: left_node, rows: left_rows, hist: left_hist, best: left_best };
            leaves.push(Leaf { node: right_node, rows: right_rows, hist: right_hist, best: right_best });
        }
        for leaf in &leaves {
            nodes[leaf.node] = Node::Leaf { value: self.leaf_value(&leaf.hist) };
        }
        (Tree { nodes }, leaves.into_iter().map(|l| (l.node, l.rows)).collect())
    }
}

/// Stable partition of `rows` by `goes_left`, without data-dependent
/// branches.
fn split_rows(rows: &[u32], goes_left: impl Fn(u32) -> bool) -> (Vec<u32>, Vec<u32>) {
    let mut left = vec![0u32; rows.len()];
    let mut right = vec![0u32; rows.len()];
    let (mut nl, mut nr) = (0, 0);
    for &r in rows {
        left[nl] = r;
        right[nr] = r;
        let go = goes_left(r) as usize;
        nl += go;
        nr += 1 - go;
    }
    left.truncate(nl);
    right.truncate(nr);
    (left, right)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn logloss(scores: &[f64], labels: &[u8]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            // log(1 + e^{−s}) for y = 1, log(1 + e^{s}) for y = 0, stably
            let z = if y == 1 { -s } else { s };
            z.max(0.0) + (-z.abs()).exp().ln_1p()
        })
        .sum();
    total / scores.len() as f64
}

/// Fits on `v1` datasets, using `valid` for early stopping.
pub fn gbdt_fit(train: &LabeledDataset, valid: Option<&LabeledDataset>, config: &GbdtConfig) -> Result<(GbdtModel, FitHistory)> {
    for d in std::iter::once(train).chain(valid) {
        if d.kind() != EncodingKind::V1 {
            return Err(Error::EncodingMismatch { model: "lgbm".into(), expected: 1, found: d.kind().index() });
        }
    }
    let x = dataset_features(train);
    let vx = valid.map(dataset_features);
    let x = Features::new(&x, train.width())?;
    let v = match (&vx, valid) {
        (Some(vx), Some(vd)) => Some((Features::new(vx, vd.width())?, vd.labels())),
        _ => None,
    };
    GbdtModel::fit(x, train.labels(), v, config)
}

impl GbdtModel {
    pub fn fit(
        x: Features<'_>,
        y: &[u8],
        valid: Option<(Features<'_>, &[u8])>,
        config: &GbdtConfig,
    ) -> Result<(Self, FitHistory)> {
        config.validate()?;
        let rows = x.rows();
        if rows == 0 {
            return Err(Error::EmptyClass(0));
        }
        if y.len() != rows {
            return Err(Error::SizeMismatch { expected: rows, found: y.len() });
        }
        if let Some((vx, vy)) = valid {
            if vx.width != x.width || vy.len() != vx.rows() {
                return Err(Error::Shape("validation set does not match training shape".into()));
            }
        }
        let bins = BinMapper::fit(x, config.max_bin);
        let binned = bins.transform(x);
        let nbins: Vec<usize> = (0..x.width).map(|f| bins.bins(f)).collect();
        let stride = nbins.iter().copied().max().unwrap_or(1);

        let prior = (y.iter().filter(|&&t| t == 1).count() as f64 / rows as f64).clamp(1e-7, 1.0 - 1e-7);
        let base_score = (prior / (1.0 - prior)).ln();
        let mut scores = vec![base_score; rows];

        let valid_binned = valid.map(|(vx, vy)| (bins.transform(vx), vy));
        let mut valid_scores = valid.map(|(vx, _)| vec![base_score; vx.rows()]);
        let stop_on_auc = match (config.early_stopping_rounds, valid) {
            (Some(_), Some((_, vy))) => vy.contains(&0) && vy.contains(&1),
            _ => false,
        };

        let mut bag_rng = rng_from(derive_seed(config.seed, Purpose::GbdtBagging, 0));
        let mut feature_rng = rng_from(derive_seed(config.seed, Purpose::GbdtFeatures, 0));
        let all_rows: Vec<u32> = (0..rows as u32).collect();
        let mut bag = all_rows.clone();
        let mut out_of_bag: Vec<u32> = Vec::new();
        let bag_size = ((rows as f64 * config.bagging_fraction).round() as usize).clamp(1, rows);
        let feature_count = ((x.width as f64 * config.feature_fraction).round() as usize).clamp(1, x.width);

        let mut grad = vec![0.0; rows];
        let mut hess = vec![0.0; rows];
        let mut trees: Vec<Tree> = Vec::new();
        let mut history = FitHistory::default();
        let mut best_auc = f64::NEG_INFINITY;
        let mut best_iter = 0;

        for it in 0..config.num_iterations {
            let mut loss = 0.0;
            for r in 0..rows {
                let p = sigmoid(scores[r]);
                grad[r] = p - y[r] as f64;
                hess[r] = p * (1.0 - p);
                loss -= if y[r] == 1 { p.ln() } else { (1.0 - p).ln() };
            }
            if it > 0 {
                history.train_loss.push(loss / rows as f64);
            }
            if grad.iter().chain(&hess).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient at iteration {it}")));
            }
            if config.bagging_fraction < 1.0 && config.bagging_freq > 0 && it % config.bagging_freq == 0 {
                let mut pool = all_rows.clone();
                let (chosen, rest) = pool.partial_shuffle(&mut bag_rng, bag_size);
                bag = chosen.to_vec();
                bag.sort_unstable();
                out_of_bag = rest.to_vec();
                out_of_bag.sort_unstable();
            }
            let mut features: Vec<usize> = (0..x.width).collect();
            if feature_count < x.width {
                features.partial_shuffle(&mut feature_rng, feature_count);
                features.truncate(feature_count);
                features.sort_unstable();
            }
            let grower = Grower {
                cfg: config,
                binned: &binned,
                width: x.width,
                stride,
                nbins: nbins.clone(),
                features,
                grad: &grad,
                hess: &hess,
            };
            let (tree, leaf_rows) = grower.grow(&bag, &bins);
            for (node, members) in &leaf_rows {
                let v = tree.value(*node);
                for &r in members {
                    scores[r as usize] += v;
                }
            }
            tree.for_each_leaf(out_of_bag.clone(), &binned, x.width, |node, members| {
                let v = tree.value(node);
                for &r in members {
                    scores[r as usize] += v;
                }
            });
            if let (Some(vs), Some((vb, vy))) = (valid_scores.as_mut(), valid_binned.as_ref()) {
                tree.add_values(vs, vb, x.width);
                if stop_on_auc {
                    let a = auc(vs, vy)?;
                    history.validation_auc.push(a);
                    if a > best_auc {
                        best_auc = a;
                        best_iter = it;
                    }
                }
            }
            trees.push(tree);
            if stop_on_auc && it - best_iter >= config.early_stopping_rounds.unwrap_or(usize::MAX) {
                break;
            }
        }
        if !trees.is_empty() {
            history.train_loss.push(logloss(&scores, y));
        }
        if stop_on_auc {
            trees.truncate(best_iter + 1);
        }
        history.best_iteration = trees.len();
        Ok((Self { config: config.clone(), base_score, bins, trees }, history))
    }

    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict_raw(x)).sum::<f64>()
    }

    /// `P(class 1 | x)`.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.predict_raw(x))
    }

    pub fn predict_scores(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        if data.width() != self.bins.upper.len() {
            return Err(Error::SizeMismatch { expected: self.bins.upper.len(), found: data.width() });
        }
        let values = dataset_features(data);
        let binned = self.bins.transform(Features::new(&values, data.width())?);
        let mut raw = vec![self.base_score; data.len()];
        for tree in &self.trees {
            tree.add_values(&mut raw, &binned, data.width());
        }
        Ok(raw.into_iter().map(sigmoid).collect())
    }

    /// Text format. Header lines carry the config (as JSON) and the base
    /// score; then one `bins` line per feature; then each tree as a
    /// `tree <i> <nodes>` line followed by one
    /// `<feature> <bin_threshold> <left> <right> <leaf_value>` line per node
    /// (`-1 0 0 0 v` for leaves).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "kronml-gbdt trees={} features={}", self.trees.len(), self.bins.upper.len()).unwrap();
        writeln!(s, "config {}", serde_json::to_string(&self.config).expect("config serializes")).unwrap();
        writeln!(s, "base_score {}", self.base_score).unwrap();
        for ub in &self.bins.upper {
            let vals: Vec<String> = ub.iter().map(|v| v.to_string()).collect();
            writeln!(s, "bins {}", vals.join(",")).unwrap();
        }
        for (i, t) in self.trees.iter().enumerate() {
            writeln!(s, "tree {i} {}", t.nodes.len()).unwrap();
            for node in &t.nodes {
                match *node {
                    Node::Split { feature, bin_threshold, left, right, .. } => {
                        writeln!(s, "{feature} {bin_threshold} {left} {right} 0").unwrap()
                    }
                    Node::Leaf { value } => writeln!(s, "-1 0 0 0 {value}").unwrap(),
                }
            }
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|reason| Error::format(path, reason))
    }

    fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty file")?;
        let mut words = header.split_whitespace();
        if words.next() != Some("kronml-gbdt") {
            return Err("not a gbdt model file".into());
        }
        let mut field = |name: &str| -> std::result::Result<usize, String> {
            words
                .next()
                .and_then(|w| w.strip_prefix(name))
                .and_then(|w| w.strip_prefix('='))
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| format!("missing {name}"))
        };
        let ntrees = field("trees")?;
        let nfeatures = field("features")?;
        let config: GbdtConfig = serde_json::from_str(
            lines.next().and_then(|l| l.strip_prefix("config ")).ok_or("missing config")?,
        )
        .map_err(|e| e.to_string())?;
        let base_score: f64 = lines
            .next()
            .and_then(|l| l.strip_prefix("base_score "))
            .and_then(|v| v.parse().ok())
            .ok_or("missing base_score")?;
        let mut upper = Vec::with_capacity(nfeatures);
        for _ in 0..nfeatures {
            let line = lines.next().and_then(|l| l.strip_prefix("bins ")).ok_or("missing bins line")?;
            let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(str::parse).collect();
            let vals = vals.map_err(|e| format!("bins: {e}"))?;
            if vals.is_empty() {
                return Err("empty bin list".into());
            }
            upper.push(vals);
        }
        let bins = BinMapper { upper };
        let mut trees = Vec::with_capacity(ntrees);
        for i in 0..ntrees {
            let head = lines.next().ok_or("missing tree")?;
            let count: usize = head
                .strip_prefix(&format!("tree {i} "))
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| format!("bad tree header {head:?}"))?;
            let mut nodes = Vec::with_capacity(count);
            for _ in 0..count {
                let line = lines.next().ok_or("missing node")?;
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.len() != 5 {
                    return Err(format!("bad node {line:?}"));
                }
                let feature: i64 = t[0].parse().map_err(|_| "bad feature")?;
                if feature < 0 {
                    nodes.push(Node::Leaf { value: t[4].parse().map_err(|_| "bad leaf value")? });
                } else {
                    let feature = feature as usize;
                    let bin_threshold: u8 = t[1].parse().map_err(|_| "bad threshold")?;
                    if feature >= nfeatures || bin_threshold as usize >= bins.bins(feature) {
                        return Err(format!("split out of range in {line:?}"));
                    }
                    nodes.push(Node::Split {
                        feature,
                        bin_threshold,
                        threshold: bins.threshold_value(feature, bin_threshold),
                        left: t[2].parse().map_err(|_| "bad child")?,
                        right: t[3].parse().map_err(|_| "bad child")?,
                    });
                }
            }
            if nodes.iter().any(|n| matches!(n, Node::Split { left, right, .. } if *left >= count || *right >= count)) {
                return Err(format!("tree {i} has a dangling child"));
            }
            trees.push(Tree { nodes });
        }
        Ok(Self { config, base_score, bins, trees })
    }
}
