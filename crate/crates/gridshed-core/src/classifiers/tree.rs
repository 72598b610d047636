//! CART decision tree with Gini impurity.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        prob_safe: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl DecisionTree {
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { prob_safe } => return prob_safe,
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    rows: &'a [&'a [f64]],
    labels: &'a [u8],
    nodes: Vec<TreeNode>,
    max_depth: usize,
    min_leaf: usize,
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let pos = idx.iter().filter(|&&i| self.labels[i] == 1).count();
        self.nodes.push(TreeNode::Leaf { prob_safe: pos as f64 / idx.len().max(1) as f64 });
        self.nodes.len() - 1
    }

    fn build(&mut self, idx: &[usize], depth: usize) -> usize {
        let pos = idx.iter().filter(|&&i| self.labels[i] == 1).count();
        let pure = pos == 0 || pos == idx.len();
        if pure || depth >= self.max_depth || idx.len() < 2 * self.min_leaf {
            return self.leaf(idx);
        }

        let parent_impurity = gini(pos, idx.len());
        let n_features = self.rows[0].len();
        let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
        let mut sorted = idx.to_vec();
        for f in 0..n_features {
            sorted.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]));
            let mut left_pos = 0usize;
            for cut in 1..sorted.len() {
                if self.labels[sorted[cut - 1]] == 1 {
                    left_pos += 1;
                }
                let (lo, hi) = (self.rows[sorted[cut - 1]][f], self.rows[sorted[cut]][f]);
                if lo == hi || cut < self.min_leaf || sorted.len() - cut < self.min_leaf {
                    continue;
                }
                let nl = cut;
                let nr = sorted.len() - cut;
                let weighted = (nl as f64 * gini(left_pos, nl)
                    + nr as f64 * gini(pos - left_pos, nr))
                    / sorted.len() as f64;
                // zero-gain splits are allowed (XOR-style patterns need them);
                // recursion still terminates through the depth and size caps
                let gain = parent_impurity - weighted;
                let threshold = 0.5 * (lo + hi);
                if gain > -1e-12 && best.map_or(true, |(bg, _, _)| gain > bg) {
                    best = Some((gain, f, threshold));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            return self.leaf(idx);
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.rows[i][feature] <= threshold);
        // placeholder, patched after children are built
        self.nodes.push(TreeNode::Split { feature, threshold, left: 0, right: 0 });
        let at = self.nodes.len() - 1;
        let left = self.build(&left_idx, depth + 1);
        let right = self.build(&right_idx, depth + 1);
        self.nodes[at] = TreeNode::Split { feature, threshold, left, right };
        at
    }
}

/// Grow a CART classifier. Single-class data collapses to one leaf.
pub fn train_decision_tree(
    rows: &[&[f64]],
    labels: &[u8],
    max_depth: usize,
    min_leaf: usize,
) -> DecisionTree {
    assert_eq!(rows.len(), labels.len());
    assert!(!rows.is_empty(), "empty training set");
    let mut b = Builder { rows, labels, nodes: Vec::new(), max_depth, min_leaf };
    let idx: Vec<usize> = (0..rows.len()).collect();
    let root = b.build(&idx, 0);
    debug_assert_eq!(root, 0);
    DecisionTree { nodes: b.nodes, n_features: rows[0].len(), max_depth, min_leaf }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(data: &[(Vec<f64>, u8)], max_depth: usize, min_leaf: usize) -> DecisionTree {
        let rows: Vec<&[f64]> = data.iter().map(|(r, _)| r.as_slice()).collect();
        let labels: Vec<u8> = data.iter().map(|(_, l)| *l).collect();
        train_decision_tree(&rows, &labels, max_depth, min_leaf)
    }

    #[test]
    fn threshold_separable_data_needs_one_split() {
        let data: Vec<(Vec<f64>, u8)> =
            (0..20).map(|i| (vec![i as f64], u8::from(i >= 10))).collect();
        let tree = fit(&data, 12, 1);
        assert_eq!(tree.depth(), 1);
        for (row, label) in &data {
            let p = tree.predict_proba(row);
            assert_eq!(u8::from(p >= 0.5), *label);
        }
    }

    #[test]
    fn pure_class_input_is_a_single_leaf() {
        let data: Vec<(Vec<f64>, u8)> = (0..10).map(|i| (vec![i as f64], 1u8)).collect();
        let tree = fit(&data, 12, 1);
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict_proba(&[123.0]), 1.0);
    }

    #[test]
    fn xor_pattern_needs_depth_two() {
        // replicate each corner so min_leaf is satisfiable
        let mut data = Vec::new();
        for _ in 0..5 {
            data.push((vec![0.0, 0.0], 0u8));
            data.push((vec![0.0, 1.0], 1u8));
            data.push((vec![1.0, 0.0], 1u8));
            data.push((vec![1.0, 1.0], 0u8));
        }
        let tree = fit(&data, 4, 1);
        assert!(tree.depth() >= 2);
        for (row, label) in &data {
            assert_eq!(u8::from(tree.predict_proba(row) >= 0.5), *label);
        }
    }

    #[test]
    fn training_accuracy_beats_majority_baseline() {
        let mut rng = crate::rng::substream(31, "tree", 0);
        use rand::Rng;
        let data: Vec<(Vec<f64>, u8)> = (0..200)
            .map(|_| {
                let x: f64 = rng.gen_range(-1.0..1.0);
                let y: f64 = rng.gen_range(-1.0..1.0);
                (vec![x, y], u8::from(x * x + y * y < 0.5))
            })
            .collect();
        let tree = fit(&data, 12, 5);
        let correct = data
            .iter()
            .filter(|(row, label)| u8::from(tree.predict_proba(row) >= 0.5) == *label)
            .count();
        let majority = data.iter().filter(|(_, l)| *l == 1).count().max(
            data.iter().filter(|(_, l)| *l == 0).count(),
        );
        assert!(correct >= majority, "{correct} < {majority}");
    }
}
