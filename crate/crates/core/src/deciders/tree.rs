//! Depth-limited CART classifier with Gini impurity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DEPTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf { prediction: u8, counts: [usize; 2] },
    Split { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> u8 {
        match self {
            TreeNode::Leaf { prediction, .. } => *prediction,
            TreeNode::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub root: TreeNode,
    pub max_depth: usize,
    /// Total weighted impurity decrease per feature, normalized to sum 1
    /// (all zero when the tree has no informative split).
    pub importance: Vec<f64>,
}

fn gini(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = c[1] as f64 / n;
    2.0 * p * (1.0 - p)
}

fn leaf(counts: [usize; 2]) -> TreeNode {
    // ties go to retrieval
    TreeNode::Leaf { prediction: u8::from(counts[1] >= counts[0]), counts }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    max_depth: usize,
    importance: Vec<f64>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> [usize; 2] {
        let ones = idx.iter().filter(|i| self.y[**i] == 1).count();
        [idx.len() - ones, ones]
    }

    /// Best split as (feature, threshold, weighted child impurity).
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64, f64)> {
        let n = idx.len() as f64;
        let total = self.counts(idx);
        let mut best: Option<(usize, f64, f64)> = None;
        for f in 0..self.x[0].len() {
            let mut order: Vec<usize> = idx.to_vec();
            order.sort_by(|a, b| self.x[*a][f].total_cmp(&self.x[*b][f]));
            let mut left = [0usize; 2];
            for k in 0..order.len() - 1 {
                left[usize::from(self.y[order[k]])] += 1;
                let (a, b) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                if a == b {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let nl = (left[0] + left[1]) as f64;
                let impurity = (nl * gini(left) + (n - nl) * gini(right)) / n;
                let threshold = a + (b - a) / 2.0;
                // strict improvement only: earlier features and lower thresholds win ties
                if best.is_none_or(|(_, _, g)| impurity < g - 1e-15) {
                    best = Some((f, threshold, impurity));
                }
            }
        }
        best
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> TreeNode {
        let counts = self.counts(&idx);
        if depth >= self.max_depth || counts[0] == 0 || counts[1] == 0 {
            return leaf(counts);
        }
        let Some((feature, threshold, impurity)) = self.best_split(&idx) else {
            return leaf(counts);
        };
        self.importance[feature] += idx.len() as f64 * (gini(counts) - impurity).max(0.0);
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|i| self.x[*i][feature] <= threshold);
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(self.build(l, depth + 1)),
            right: Box::new(self.build(r, depth + 1)),
        }
    }
}

pub fn fit_tree(x: &[Vec<f64>], y: &[u8], max_depth: usize) -> Result<TreeParams> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::invalid(format!("{} feature rows for {} labels", x.len(), y.len())));
    }
    let mut b = Builder { x, y, max_depth, importance: vec![0.0; x[0].len()] };
    let root = b.build((0..x.len()).collect(), 0);
    let total: f64 = b.importance.iter().sum();
    let importance = if total > 0.0 { b.importance.iter().map(|v| v / total).collect() } else { b.importance };
    Ok(TreeParams { root, max_depth, importance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_function_needs_one_split() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![f64::from(i)]).collect();
        let y: Vec<u8> = (0..8).map(|i| u8::from(i >= 5)).collect();
        let t = fit_tree(&x, &y, MAX_DEPTH).unwrap();
        assert_eq!(t.root.depth(), 1);
        match &t.root {
            TreeNode::Split { threshold, .. } => assert_eq!(*threshold, 4.5),
            TreeNode::Leaf { .. } => panic!("expected a split"),
        }
    }

    #[test]
    fn pure_input_is_a_leaf() {
        let t = fit_tree(&[vec![1.0], vec![2.0]], &[1, 1], MAX_DEPTH).unwrap();
        assert_eq!(t.root.depth(), 0);
        assert_eq!(t.root.predict(&[0.0]), 1);
    }

    #[test]
    fn xor_is_fitted_at_depth_two() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let t = fit_tree(&x, &y, MAX_DEPTH).unwrap();
        assert_eq!(t.root.depth(), 2);
        assert!(x.iter().zip(y).all(|(x, y)| t.root.predict(x) == y));
    }
}
