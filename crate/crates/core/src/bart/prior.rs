//! Tree-structure prior: a node at depth `d` splits with probability
//! `base * (1 + d)^(-power)`; the split variable is drawn from the split
//! probabilities and the split value uniformly among the valid candidates.

use crate::matrix::Matrix;
use crate::tree::{split_values, Tree};

use super::BartConfig;

#[inline]
pub fn split_probability(base: f64, power: f64, depth: usize) -> f64 {
    base * (1.0 + depth as f64).powf(-power)
}

/// Log prior of a tree structure. Candidate counts are taken from the
/// training rows reaching each internal node.
pub fn log_tree_prior(tree: &Tree, config: &BartConfig, split_probs: &[f64], x: &Matrix) -> f64 {
    let mut lp = 0.0;
    for (id, node) in tree.nodes().iter().enumerate() {
        let p = split_probability(config.base, config.power, node.depth);
        match tree.rule(id) {
            None => lp += (1.0 - p).ln(),
            Some(rule) => {
                let rows = tree.rows_at(id, x);
                let n_cand = split_values(x, &rows, rule.var, config.min_node_size).len();
                lp += p.ln() + split_probs[rule.var].ln() - (n_cand.max(1) as f64).ln();
            }
        }
    }
    lp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::SplitRule;

    #[test]
    fn root_only() {
        let cfg = BartConfig::default();
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let lp = log_tree_prior(&Tree::leaf(1, 0.0), &cfg, &[1.0], &x);
        assert!((lp - 0.05f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn depth_one_single_candidate() {
        let cfg = BartConfig::default();
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let mut t = Tree::leaf(1, 0.0);
        t.split_leaf(0, SplitRule { var: 0, value: 0.0 }, 0.0, 0.0);
        let lp = log_tree_prior(&t, &cfg, &[1.0], &x);
        let expected = 0.95f64.ln() + 2.0 * (1.0 - 0.95 / 4.0f64).ln();
        assert!((lp - expected).abs() < 1e-12);
    }
}
