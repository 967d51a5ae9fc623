//! CART trees with Gini impurity, bagged into a random forest.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::InspectorError;
use crate::seeds::stream_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
    pub bootstrap: bool,
    /// Features tried per split; `floor(sqrt(F))` (at least 1) when unset.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 8,
            seed: 0,
            bootstrap: true,
            max_features: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        /// Fraction of training samples in this leaf labeled cheater.
        fraction: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { fraction, .. } => return *fraction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

/// Gini impurity of a node with `pos` positives among `n`.
pub fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

/// Best axis-aligned split of `rows` over `features`: lowest weighted child
/// impurity, ties to the earlier feature and lower threshold.
pub fn best_split(x: &[Vec<f64>], y: &[bool], rows: &[usize], features: &[usize]) -> Option<(usize, f64, f64)> {
    let n = rows.len() as f64;
    let total_pos = rows.iter().filter(|&&r| y[r]).count() as f64;
    let parent = gini(total_pos, n);
    let mut best: Option<(usize, f64, f64)> = None;
    let mut sorted = rows.to_vec();
    for &f in features {
        sorted.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left_pos = 0.0;
        for k in 0..sorted.len() - 1 {
            if y[sorted[k]] {
                left_pos += 1.0;
            }
            let (a, b) = (x[sorted[k]][f], x[sorted[k + 1]][f]);
            if a == b {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = n - nl;
            let impurity = (nl * gini(left_pos, nl) + nr * gini(total_pos - left_pos, nr)) / n;
            if impurity < parent - 1e-12 && best.is_none_or(|(_, _, bi)| impurity < bi - 1e-15) {
                let mid = a + (b - a) / 2.0;
                // Guard against the midpoint rounding onto the upper value.
                let threshold = if mid < b { mid } else { a };
                best = Some((f, threshold, impurity));
            }
        }
    }
    best
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    config: &'a ForestConfig,
    max_features: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let pos = rows.iter().filter(|&&r| self.y[r]).count();
        self.nodes.push(Node::Leaf {
            fraction: if rows.is_empty() {
                0.0
            } else {
                pos as f64 / rows.len() as f64
            },
            samples: rows.len(),
        });
        self.nodes.len() - 1
    }

    fn grow(&mut self, rows: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let pos = rows.iter().filter(|&&r| self.y[r]).count();
        if depth >= self.config.max_depth
            || rows.len() < self.config.min_samples_split.max(2)
            || pos == 0
            || pos == rows.len()
        {
            return self.leaf(rows);
        }
        let f_total = self.x[0].len();
        let mut features: Vec<usize> = (0..f_total).collect();
        // Partial Fisher-Yates: the first `max_features` entries are the sample.
        for i in 0..self.max_features.min(f_total) {
            let j = rng.random_range(i..f_total);
            features.swap(i, j);
        }
        features.truncate(self.max_features.min(f_total));
        features.sort_unstable();
        let Some((feature, threshold, _)) = best_split(self.x, self.y, rows, &features) else {
            return self.leaf(rows);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            fraction: 0.0,
            samples: 0,
        });
        let left = self.grow(&l, depth + 1, rng);
        let right = self.grow(&r, depth + 1, rng);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

/// Fits a forest. Rows are put into a canonical order first, so the result
/// does not depend on the order they are given in.
pub fn fit_forest(x: &[Vec<f64>], y: &[bool], config: &ForestConfig) -> Result<ForestModel, InspectorError> {
    if x.len() != y.len() {
        return Err(InspectorError::LengthMismatch {
            expected: y.len(),
            got: x.len(),
        });
    }
    if !y.iter().any(|&v| v) || !y.iter().any(|&v| !v) {
        return Err(InspectorError::SingleClass);
    }
    let n_features = x[0].len();
    if n_features == 0 || x.iter().any(|r| r.len() != n_features) {
        return Err(InspectorError::LengthMismatch {
            expected: n_features.max(1),
            got: x.iter().map(|r| r.len()).find(|&l| l != n_features).unwrap_or(0),
        });
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| {
        x[a].iter()
            .zip(&x[b])
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y[a].cmp(&y[b]))
    });
    let xs: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let ys: Vec<bool> = order.iter().map(|&i| y[i]).collect();

    let max_features = config
        .max_features
        .unwrap_or_else(|| (n_features as f64).sqrt().floor() as usize)
        .clamp(1, n_features);
    let mut trees = Vec::with_capacity(config.n_trees);
    for t in 0..config.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, &[t as u64]));
        let mut rows: Vec<usize> = if config.bootstrap {
            (0..xs.len()).map(|_| rng.random_range(0..xs.len())).collect()
        } else {
            (0..xs.len()).collect()
        };
        rows.sort_unstable();
        let mut b = Builder {
            x: &xs,
            y: &ys,
            config,
            max_features,
            nodes: Vec::new(),
        };
        b.grow(&rows, 0, &mut rng);
        trees.push(Tree { nodes: b.nodes });
    }
    Ok(ForestModel {
        config: config.clone(),
        n_features,
        trees,
    })
}

impl ForestModel {
    /// Mean leaf fraction over all trees.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.0;
        }
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &[f64], cut: f64) -> (f64, bool) {
        let p = self.predict_proba(x);
        (p, p >= cut)
    }
}
