//! Mutable chain state and the individual Gibbs / Metropolis–Hastings
//! updates of one sweep.

use crate::matrix::Matrix;
use crate::rng::RngStream;
use crate::tree::{split_values, Forest, SplitRule, Tree};

use super::conjugate::{leaf_log_marginal, leaf_posterior, LeafStats};
use super::prior::split_probability;
use super::sparse::{theta_grid, theta_grid_posterior, ThetaPoint};
use super::BartConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Grow,
    Prune,
    Change,
}

impl Move {
    fn index(self) -> usize {
        match self {
            Move::Grow => 0,
            Move::Prune => 1,
            Move::Change => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MoveStats {
    pub proposed: [u64; 3],
    pub accepted: [u64; 3],
}

impl MoveStats {
    pub fn acceptance_rate(&self, m: Move) -> f64 {
        let i = m.index();
        self.accepted[i] as f64 / self.proposed[i].max(1) as f64
    }
}

pub struct BartState<'a> {
    x: &'a Matrix,
    config: BartConfig,
    /// Centered training outcome (or latent variable) the forest is fit to.
    target: Vec<f64>,
    forest: Forest,
    tree_fits: Vec<Vec<f64>>,
    /// `target - Σ_t tree_fits[t]`, row-wise.
    residual: Vec<f64>,
    sigma: f64,
    sigma_lambda: f64,
    leaf_sd: f64,
    split_probs: Vec<f64>,
    theta: f64,
    theta_grid: Vec<ThetaPoint>,
    likelihood: bool,
    structure_fixed: bool,
    stats: MoveStats,
    partial: Vec<f64>,
    leaf_of: Vec<usize>,
}

impl<'a> BartState<'a> {
    /// Fresh state with every tree a single zero leaf.
    pub fn new(
        x: &'a Matrix,
        target: Vec<f64>,
        offset: f64,
        config: BartConfig,
        sigma: f64,
        sigma_lambda: f64,
        leaf_sd: f64,
    ) -> Self {
        let n = x.nrows();
        let p = x.ncols();
        assert_eq!(target.len(), n);
        let forest = Forest::new(config.num_trees, p, offset);
        let residual = target.clone();
        Self {
            x,
            tree_fits: vec![vec![0.0; n]; config.num_trees],
            config,
            target,
            forest,
            residual,
            sigma,
            sigma_lambda,
            leaf_sd,
            split_probs: vec![1.0 / p as f64; p],
            theta: p as f64,
            theta_grid: theta_grid(p),
            likelihood: true,
            structure_fixed: false,
            stats: MoveStats::default(),
            partial: vec![0.0; n],
            leaf_of: vec![0; n],
        }
    }

    pub fn config(&self) -> &BartConfig {
        &self.config
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn set_sigma(&mut self, sigma: f64) {
        self.sigma = sigma;
    }

    pub fn leaf_sd(&self) -> f64 {
        self.leaf_sd
    }

    pub fn split_probs(&self) -> &[f64] {
        &self.split_probs
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn set_theta(&mut self, theta: f64) {
        self.theta = theta;
    }

    pub fn stats(&self) -> MoveStats {
        self.stats
    }

    /// With the likelihood disabled the tree moves target the structure prior.
    pub fn set_likelihood(&mut self, enabled: bool) {
        self.likelihood = enabled;
    }

    /// Freezes every tree structure; sweeps then only redraw leaf heights
    /// (and the noise scale).
    pub fn set_structure_fixed(&mut self, fixed: bool) {
        self.structure_fixed = fixed;
    }

    /// Fitted values of the sum of trees (without the offset) at training rows.
    pub fn fitted(&self) -> Vec<f64> {
        self.target.iter().zip(&self.residual).map(|(t, r)| t - r).collect()
    }

    /// Replaces the target, keeping the forest; residuals follow.
    pub fn set_target(&mut self, target: Vec<f64>) {
        for i in 0..target.len() {
            self.residual[i] += target[i] - self.target[i];
        }
        self.target = target;
    }

    /// Replaces tree `t` (e.g. to freeze a known structure).
    pub fn set_tree(&mut self, t: usize, tree: Tree) {
        self.forest.trees[t] = tree;
        self.refresh_tree_fit(t);
    }

    fn refresh_tree_fit(&mut self, t: usize) {
        let tree = &self.forest.trees[t];
        for i in 0..self.x.nrows() {
            let old = self.tree_fits[t][i];
            let new = tree.predict(self.x.row(i));
            self.residual[i] += old - new;
            self.tree_fits[t][i] = new;
        }
    }

    /// Largest `|target - Σ tree(x) - residual|` with trees re-evaluated
    /// from scratch.
    pub fn residual_discrepancy(&self) -> f64 {
        (0..self.x.nrows())
            .map(|i| {
                let row = self.x.row(i);
                let fit: f64 = self.forest.trees.iter().map(|t| t.predict(row)).sum();
                (self.target[i] - fit - self.residual[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    fn load_partial(&mut self, t: usize) {
        let tree = &self.forest.trees[t];
        for i in 0..self.x.nrows() {
            self.partial[i] = self.residual[i] + self.tree_fits[t][i];
            self.leaf_of[i] = tree.leaf_index(self.x.row(i));
        }
    }

    fn rows_in(&self, node: usize) -> Vec<usize> {
        (0..self.leaf_of.len()).filter(|&i| self.leaf_of[i] == node).collect()
    }

    fn stats_of(&self, rows: &[usize]) -> LeafStats {
        let mut s = LeafStats::default();
        for &i in rows {
            s.push(self.partial[i]);
        }
        s
    }

    fn split_stats(&self, rows: &[usize], rule: SplitRule) -> (LeafStats, LeafStats) {
        let (mut l, mut r) = (LeafStats::default(), LeafStats::default());
        for &i in rows {
            if rule.goes_left(self.x.row(i)) {
                l.push(self.partial[i]);
            } else {
                r.push(self.partial[i]);
            }
        }
        (l, r)
    }

    fn marginal(&self, s: &LeafStats) -> f64 {
        if self.likelihood {
            leaf_log_marginal(s, self.sigma, self.leaf_sd)
        } else {
            0.0
        }
    }

    fn p_split(&self, depth: usize) -> f64 {
        split_probability(self.config.base, self.config.power, depth)
    }

    /// One Metropolis–Hastings step on the structure of tree `t`, with leaf
    /// heights integrated out against the partial residuals of all other
    /// trees. Accepted proposals leave stale leaf heights that the following
    /// [`gibbs_leaf_update`](Self::gibbs_leaf_update) refreshes; the residual
    /// cache stays exact either way.
    pub fn mh_tree_update(&mut self, t: usize, rng: &mut RngStream) -> bool {
        let mp = self.config.move_probs;
        let mv = match rng.categorical(&[mp.grow, mp.prune, mp.change]) {
            0 => Move::Grow,
            1 => Move::Prune,
            _ => Move::Change,
        };
        self.stats.proposed[mv.index()] += 1;
        self.load_partial(t);
        let accepted = match mv {
            Move::Grow => self.propose_grow(t, rng),
            Move::Prune => self.propose_prune(t, rng),
            Move::Change => self.propose_change(t, rng),
        };
        if accepted {
            self.stats.accepted[mv.index()] += 1;
            #[cfg(debug_assertions)]
            if let Err(e) = self.forest.trees[t].validate() {
                panic!("invalid tree after {mv:?}: {e}");
            }
        }
        accepted
    }

    fn leaf_counts(&self, tree: &Tree) -> Vec<usize> {
        let mut counts = vec![0usize; tree.len()];
        for &l in &self.leaf_of {
            counts[l] += 1;
        }
        counts
    }

    fn propose_grow(&mut self, t: usize, rng: &mut RngStream) -> bool {
        let m = self.config.min_node_size.max(1);
        let tree = &self.forest.trees[t];
        let counts = self.leaf_counts(tree);
        let growable: Vec<usize> = tree.leaves().into_iter().filter(|&l| counts[l] >= 2 * m).collect();
        if growable.is_empty() {
            return false;
        }
        let leaf = growable[rng.index(growable.len())];
        let var = rng.categorical(&self.split_probs);
        let rows = self.rows_in(leaf);
        let values = split_values(self.x, &rows, var, m);
        if values.is_empty() {
            return false;
        }
        let rule = SplitRule {
            var,
            value: values[rng.index(values.len())],
        };
        let (ls, rs) = self.split_stats(&rows, rule);
        let parent = ls.merge(&rs);

        let depth = tree.node(leaf).depth;
        let (p_d, p_child) = (self.p_split(depth), self.p_split(depth + 1));
        let nog_before = tree.nog_nodes().len();
        let parent_was_nog = tree.node(leaf).parent.is_some_and(|p| {
            let (l, r) = tree.children(p).unwrap();
            tree.is_leaf(l) && tree.is_leaf(r)
        });
        let nog_after = nog_before + 1 - usize::from(parent_was_nog);

        let log_lik = self.marginal(&ls) + self.marginal(&rs) - self.marginal(&parent);
        let log_prior = p_d.ln() + 2.0 * (1.0 - p_child).ln() - (1.0 - p_d).ln();
        let mp = self.config.move_probs;
        let log_proposal = (mp.prune / nog_after as f64).ln() - (mp.grow / growable.len() as f64).ln();
        if rng.uniform_open().ln() < log_lik + log_prior + log_proposal {
            let value = tree.leaf_value(leaf).unwrap();
            self.forest.trees[t].split_leaf(leaf, rule, value, value);
            true
        } else {
            false
        }
    }

    fn propose_prune(&mut self, t: usize, rng: &mut RngStream) -> bool {
        let m = self.config.min_node_size.max(1);
        let tree = &self.forest.trees[t];
        let nogs = tree.nog_nodes();
        if nogs.is_empty() {
            return false;
        }
        let node = nogs[rng.index(nogs.len())];
        let (l, r) = tree.children(node).unwrap();
        let counts = self.leaf_counts(tree);
        let growable_before = tree.leaves().into_iter().filter(|&id| counts[id] >= 2 * m).count();
        let growable_after = growable_before + 1
            - usize::from(counts[l] >= 2 * m)
            - usize::from(counts[r] >= 2 * m);
        let ls = self.stats_of(&self.rows_in(l));
        let rs = self.stats_of(&self.rows_in(r));
        let merged = ls.merge(&rs);

        let depth = tree.node(node).depth;
        let (p_d, p_child) = (self.p_split(depth), self.p_split(depth + 1));
        let log_lik = self.marginal(&merged) - self.marginal(&ls) - self.marginal(&rs);
        let log_prior = (1.0 - p_d).ln() - p_d.ln() - 2.0 * (1.0 - p_child).ln();
        let mp = self.config.move_probs;
        let log_proposal =
            (mp.grow / growable_after as f64).ln() - (mp.prune / nogs.len() as f64).ln();
        if rng.uniform_open().ln() < log_lik + log_prior + log_proposal {
            let value = tree.leaf_value(l).unwrap();
            self.forest.trees[t].collapse(node, value);
            self.refresh_tree_fit(t);
            true
        } else {
            false
        }
    }

    fn propose_change(&mut self, t: usize, rng: &mut RngStream) -> bool {
        let m = self.config.min_node_size.max(1);
        let tree = &self.forest.trees[t];
        let nogs = tree.nog_nodes();
        if nogs.is_empty() {
            return false;
        }
        let node = nogs[rng.index(nogs.len())];
        let (l, r) = tree.children(node).unwrap();
        let mut rows = self.rows_in(l);
        rows.extend(self.rows_in(r));
        let var = rng.categorical(&self.split_probs);
        let values = split_values(self.x, &rows, var, m);
        if values.is_empty() {
            return false;
        }
        let rule = SplitRule {
            var,
            value: values[rng.index(values.len())],
        };
        let (new_l, new_r) = self.split_stats(&rows, rule);
        let old_l = self.stats_of(&self.rows_in(l));
        let old_r = self.stats_of(&self.rows_in(r));
        // Prior and proposal terms for the rule cancel: both are
        // s_var / #candidates at the same rows.
        let log_lik = self.marginal(&new_l) + self.marginal(&new_r)
            - self.marginal(&old_l)
            - self.marginal(&old_r);
        if rng.uniform_open().ln() < log_lik {
            self.forest.trees[t].set_rule(node, rule);
            self.refresh_tree_fit(t);
            true
        } else {
            false
        }
    }

    /// Draws every leaf height of tree `t` from its conjugate normal posterior
    /// given the partial residuals, then updates the residual cache.
    pub fn gibbs_leaf_update(&mut self, t: usize, rng: &mut RngStream) {
        self.load_partial(t);
        let len = self.forest.trees[t].len();
        let mut n = vec![0usize; len];
        let mut sum = vec![0.0; len];
        for i in 0..self.partial.len() {
            n[self.leaf_of[i]] += 1;
            sum[self.leaf_of[i]] += self.partial[i];
        }
        let tree = &mut self.forest.trees[t];
        let mut values = vec![0.0; len];
        for leaf in tree.leaves() {
            let (mean, var) = leaf_posterior(n[leaf], sum[leaf], self.sigma, self.leaf_sd);
            values[leaf] = rng.normal(mean, var.sqrt());
            tree.set_leaf_value(leaf, values[leaf]);
        }
        for i in 0..self.partial.len() {
            let v = values[self.leaf_of[i]];
            self.tree_fits[t][i] = v;
            self.residual[i] = self.partial[i] - v;
        }
    }

    /// `sigma^2 ~ (nu * lambda + SSR) / chi2(nu + n)`.
    pub fn gibbs_sigma_update(&mut self, rng: &mut RngStream) {
        let nu = self.config.sigma_df;
        let ssr: f64 = self.residual.iter().map(|r| r * r).sum();
        let n = self.residual.len() as f64;
        let df = nu + n;
        let scale = (nu * self.sigma_lambda + ssr) / df;
        self.sigma = rng.scaled_inv_chi_squared(df, scale).sqrt();
    }

    /// Dirichlet refresh of the split probabilities from the forest's split
    /// counts, then a grid Gibbs step for the concentration.
    pub fn gibbs_split_prob_update(&mut self, rng: &mut RngStream) {
        let p = self.x.ncols();
        let counts = self.forest.split_counts(p);
        let a = self.theta / p as f64;
        let alpha: Vec<f64> = counts.iter().map(|&c| a + c as f64).collect();
        self.split_probs = rng.dirichlet(&alpha);
        let post = theta_grid_posterior(&self.split_probs, &self.theta_grid);
        self.theta = self.theta_grid[rng.categorical(&post)].theta;
    }

    /// Every tree once (structure then heights), then the noise scale when
    /// `update_sigma`, then the split probabilities in sparse mode.
    pub fn sweep(&mut self, rng: &mut RngStream, update_sigma: bool) {
        for t in 0..self.config.num_trees {
            if !self.structure_fixed {
                self.mh_tree_update(t, rng);
            }
            self.gibbs_leaf_update(t, rng);
        }
        if update_sigma {
            self.gibbs_sigma_update(rng);
        }
        if self.config.sparse {
            self.gibbs_split_prob_update(rng);
        }
        #[cfg(debug_assertions)]
        {
            let d = self.residual_discrepancy();
            assert!(d < 1e-10, "residual cache drifted by {d}");
        }
    }
}
