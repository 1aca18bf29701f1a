//! Binary regression trees with axis-aligned splits, stored as index-based
//! node arrays, and their additive combination.
//!
//! Routing convention: `x[var] <= value` goes left, everything else right.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRule {
    pub var: usize,
    pub value: f64,
}

impl SplitRule {
    #[inline]
    pub fn goes_left(&self, x: &[f64]) -> bool {
        x[self.var] <= self.value
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Leaf {
        value: f64,
    },
    Internal {
        rule: SplitRule,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub depth: usize,
    pub parent: Option<usize>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    n_features: usize,
}

impl Tree {
    /// Root-only tree.
    pub fn leaf(n_features: usize, value: f64) -> Self {
        Self {
            nodes: vec![Node {
                kind: NodeKind::Leaf { value },
                depth: 0,
                parent: None,
            }],
            n_features,
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].is_leaf()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.is_leaf(i)).collect()
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn internal_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| !self.is_leaf(i)).collect()
    }

    /// Internal nodes whose two children are both leaves.
    pub fn nog_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| match self.nodes[i].kind {
                NodeKind::Internal { left, right, .. } => self.is_leaf(left) && self.is_leaf(right),
                NodeKind::Leaf { .. } => false,
            })
            .collect()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn rule(&self, id: usize) -> Option<SplitRule> {
        match self.nodes[id].kind {
            NodeKind::Internal { rule, .. } => Some(rule),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub fn children(&self, id: usize) -> Option<(usize, usize)> {
        match self.nodes[id].kind {
            NodeKind::Internal { left, right, .. } => Some((left, right)),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub fn leaf_value(&self, id: usize) -> Option<f64> {
        match self.nodes[id].kind {
            NodeKind::Leaf { value } => Some(value),
            NodeKind::Internal { .. } => None,
        }
    }

    pub fn set_leaf_value(&mut self, id: usize, value: f64) {
        if let NodeKind::Leaf { value: v } = &mut self.nodes[id].kind {
            *v = value;
        }
    }

    /// Replaces leaf `id` by an internal node with two new leaf children and
    /// returns the children's ids.
    pub fn split_leaf(&mut self, id: usize, rule: SplitRule, left_value: f64, right_value: f64) -> (usize, usize) {
        assert!(self.is_leaf(id), "node {id} is not a leaf");
        assert!(rule.var < self.n_features, "split variable out of range");
        let depth = self.nodes[id].depth + 1;
        let left = self.nodes.len();
        let right = left + 1;
        for value in [left_value, right_value] {
            self.nodes.push(Node {
                kind: NodeKind::Leaf { value },
                depth,
                parent: Some(id),
            });
        }
        self.nodes[id].kind = NodeKind::Internal { rule, left, right };
        (left, right)
    }

    /// Collapses internal node `id`, whose children must both be leaves, into
    /// a leaf holding `value`. Node ids may be renumbered; the collapsed
    /// node's new id is returned.
    pub fn collapse(&mut self, id: usize, value: f64) -> usize {
        let (left, right) = self.children(id).expect("collapse on a leaf");
        assert!(self.is_leaf(left) && self.is_leaf(right), "children must be leaves");
        self.nodes[id].kind = NodeKind::Leaf { value };
        let mut id = id;
        let (hi, lo) = if left > right { (left, right) } else { (right, left) };
        for slot in [hi, lo] {
            if let Some(moved_from) = self.remove_detached(slot) {
                if moved_from == id {
                    id = slot;
                }
            }
        }
        id
    }

    /// Swap-removes a node nobody references. Returns the old index of the
    /// node moved into `slot`, if any.
    fn remove_detached(&mut self, slot: usize) -> Option<usize> {
        let last = self.nodes.len() - 1;
        self.nodes.swap_remove(slot);
        if slot == last {
            return None;
        }
        if let Some(p) = self.nodes[slot].parent {
            if let NodeKind::Internal { left, right, .. } = &mut self.nodes[p].kind {
                if *left == last {
                    *left = slot;
                }
                if *right == last {
                    *right = slot;
                }
            }
        }
        if let NodeKind::Internal { left, right, .. } = self.nodes[slot].kind {
            self.nodes[left].parent = Some(slot);
            self.nodes[right].parent = Some(slot);
        }
        Some(last)
    }

    /// Replaces the rule at internal node `id`.
    pub fn set_rule(&mut self, id: usize, new_rule: SplitRule) {
        if let NodeKind::Internal { rule, .. } = &mut self.nodes[id].kind {
            *rule = new_rule;
        }
    }

    /// Id of the leaf containing `x`. No dimension check.
    #[inline]
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id].kind {
                NodeKind::Leaf { .. } => return id,
                NodeKind::Internal { rule, left, right } => {
                    id = if rule.goes_left(x) { *left } else { *right };
                }
            }
        }
    }

    /// Step height of the leaf containing `x`. No dimension check.
    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)].kind {
            NodeKind::Leaf { value } => value,
            NodeKind::Internal { .. } => unreachable!(),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.predict(x))
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got,
            });
        }
        Ok(())
    }

    pub fn leaf_assignments(&self, x: &Matrix) -> Result<Vec<usize>> {
        self.check_dim(x.ncols())?;
        Ok(x.rows().map(|row| self.leaf_index(row)).collect())
    }

    /// Whether routing `x` passes through node `id`.
    pub fn reaches(&self, id: usize, x: &[f64]) -> bool {
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            let (rule, left) = match self.nodes[p].kind {
                NodeKind::Internal { rule, left, .. } => (rule, left),
                NodeKind::Leaf { .. } => unreachable!(),
            };
            if rule.goes_left(x) != (left == cur) {
                return false;
            }
            cur = p;
        }
        true
    }

    /// Training rows routed through node `id`.
    pub fn rows_at(&self, id: usize, x: &Matrix) -> Vec<usize> {
        (0..x.nrows()).filter(|&i| self.reaches(id, x.row(i))).collect()
    }

    /// Checks the structural invariants: one root, binary internal nodes,
    /// consistent parent links and depths, `2 * leaves - 1` nodes.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let roots = self.nodes.iter().filter(|n| n.parent.is_none()).count();
        if roots != 1 || self.nodes[0].parent.is_some() {
            return Err(format!("expected node 0 as the only root, found {roots} roots"));
        }
        if self.nodes[0].depth != 0 {
            return Err("root depth must be 0".into());
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if let NodeKind::Internal { rule, left, right } = node.kind {
                if left == right || left >= self.nodes.len() || right >= self.nodes.len() {
                    return Err(format!("node {id} has invalid children ({left}, {right})"));
                }
                if rule.var >= self.n_features {
                    return Err(format!("node {id} splits on variable {} >= {}", rule.var, self.n_features));
                }
                for c in [left, right] {
                    if self.nodes[c].parent != Some(id) {
                        return Err(format!("child {c} does not point back to parent {id}"));
                    }
                    if self.nodes[c].depth != node.depth + 1 {
                        return Err(format!("child {c} depth {} != {} + 1", self.nodes[c].depth, node.depth));
                    }
                }
            }
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id], true) {
                return Err(format!("node {id} reached twice"));
            }
            if let Some((l, r)) = self.children(id) {
                stack.push(l);
                stack.push(r);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err("unreachable nodes present".into());
        }
        if self.nodes.len() != 2 * self.num_leaves() - 1 {
            return Err("node count differs from 2 * leaves - 1".into());
        }
        Ok(())
    }

    /// One node per line: `id kind rule-or-value children`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (id, node) in self.nodes.iter().enumerate() {
            match node.kind {
                NodeKind::Leaf { value } => {
                    let _ = writeln!(out, "{id} leaf {value}");
                }
                NodeKind::Internal { rule, left, right } => {
                    let _ = writeln!(out, "{id} split x{}<={} {left} {right}", rule.var, rule.value);
                }
            }
        }
        out
    }
}

/// Split values for `var` at the rows `rows` such that both children keep at
/// least `min_node_size` rows. Ascending.
pub fn split_values(x: &Matrix, rows: &[usize], var: usize, min_node_size: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = rows.iter().map(|&i| x.get(i, var)).collect();
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    let min = min_node_size.max(1);
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && vals[j + 1] == vals[i] {
            j += 1;
        }
        // rows with value <= vals[i] go left
        let left = j + 1;
        if left >= min && n - left >= min {
            out.push(vals[i]);
        }
        i = j + 1;
    }
    out
}

/// All valid split rules at leaf `node`, ordered by variable then value.
pub fn grow_candidates(tree: &Tree, node: usize, x: &Matrix, min_node_size: usize) -> Vec<SplitRule> {
    let rows = tree.rows_at(node, x);
    (0..x.ncols())
        .flat_map(|var| {
            split_values(x, &rows, var, min_node_size)
                .into_iter()
                .map(move |value| SplitRule { var, value })
        })
        .collect()
}

/// Sum of trees plus a centering constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub offset: f64,
}

impl Forest {
    pub fn new(num_trees: usize, n_features: usize, offset: f64) -> Self {
        Self {
            trees: vec![Tree::leaf(n_features, 0.0); num_trees],
            offset,
        }
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.offset + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let mut total = self.offset;
        for t in &self.trees {
            total += t.evaluate(x)?;
        }
        Ok(total)
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Vec<f64> {
        x.rows().map(|row| self.predict(row)).collect()
    }

    /// Number of internal nodes splitting on each variable.
    pub fn split_counts(&self, n_features: usize) -> Vec<usize> {
        let mut counts = vec![0; n_features];
        for t in &self.trees {
            for id in t.internal_nodes() {
                counts[t.rule(id).unwrap().var] += 1;
            }
        }
        counts
    }
}
