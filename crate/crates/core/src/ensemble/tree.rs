//! Greedy CART classification trees with Gini impurity.

use crate::block_store::Record;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Training class counts, indexed like [`DecisionTree::classes`].
    Leaf { counts: Vec<u64> },
    /// Records with `features[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub(crate) classes: Vec<u32>,
    pub(crate) nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

/// Index of the largest count; ties go to the smallest index.
pub(crate) fn argmax_first<T: PartialOrd>(counts: &[T]) -> usize {
    let mut best = 0;
    for (i, c) in counts.iter().enumerate() {
        if *c > counts[best] {
            best = i;
        }
    }
    best
}

impl DecisionTree {
    /// Fits a tree on `records`, whose labels must be codes from `classes`
    /// (ascending). Splits are chosen by the largest impurity decrease, first
    /// feature and lowest threshold winning ties, and are taken whenever a
    /// node is impure and both children can hold `min_leaf` records, even if
    /// the decrease is zero.
    pub fn fit(records: &[Record], classes: &[u32], params: TreeParams) -> Self {
        let n_features = records.first().map_or(0, |r| r.features.len());
        let columns: Vec<Vec<f64>> = (0..n_features)
            .map(|f| records.iter().map(|r| r.features[f]).collect())
            .collect();
        let labels: Vec<u16> = records
            .iter()
            .map(|r| {
                let code = r.label.expect("training records are labeled");
                classes.binary_search(&code).expect("label is a declared class") as u16
            })
            .collect();
        let sorted: Vec<Vec<u32>> = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..records.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();

        let mut builder = Builder {
            columns: &columns,
            labels: &labels,
            n_classes: classes.len(),
            params,
            nodes: Vec::new(),
            goes_left: vec![false; records.len()],
        };
        let root_members: Vec<u32> = (0..records.len() as u32).collect();
        builder.build(root_members, sorted, 0);
        Self {
            classes: classes.to_vec(),
            nodes: builder.nodes,
        }
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    fn leaf_for(&self, features: &[f64]) -> &[u64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if features[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Index into [`classes`](Self::classes) of the predicted class.
    pub fn predict_index(&self, features: &[f64]) -> usize {
        argmax_first(self.leaf_for(features))
    }

    pub fn predict(&self, features: &[f64]) -> u32 {
        self.classes[self.predict_index(features)]
    }

    /// Class distribution at the leaf reached by `features`.
    pub fn predict_proba(&self, features: &[f64]) -> Vec<f64> {
        let counts = self.leaf_for(features);
        let total: u64 = counts.iter().sum();
        counts
            .iter()
            .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
            .collect()
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Every split has two in-range children appearing after it, so the node
    /// array encodes a finite binary tree rooted at 0.
    pub fn is_well_formed(&self, n_features: usize) -> bool {
        !self.nodes.is_empty()
            && self.nodes.iter().enumerate().all(|(i, node)| match node {
                Node::Leaf { counts } => counts.len() == self.classes.len(),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    *feature < n_features
                        && threshold.is_finite()
                        && *left > i
                        && *right > i
                        && left != right
                        && *left < self.nodes.len()
                        && *right < self.nodes.len()
                }
            })
    }
}

struct Builder<'a> {
    columns: &'a [Vec<f64>],
    labels: &'a [u16],
    n_classes: usize,
    params: TreeParams,
    nodes: Vec<Node>,
    goes_left: Vec<bool>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn build(&mut self, members: Vec<u32>, sorted: Vec<Vec<u32>>, depth: usize) -> usize {
        let mut counts = vec![0u64; self.n_classes];
        for &i in &members {
            counts[self.labels[i as usize] as usize] += 1;
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: counts.clone() });

        let n = members.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.params.max_depth || n < 2 * self.params.min_leaf {
            return id;
        }
        let Some(best) = self.best_split(&sorted, &counts) else {
            return id;
        };

        let col = &self.columns[best.feature];
        for &i in &members {
            self.goes_left[i as usize] = col[i as usize] <= best.threshold;
        }
        let (left_members, right_members): (Vec<u32>, Vec<u32>) =
            members.iter().partition(|&&i| self.goes_left[i as usize]);
        let mut left_sorted = Vec::with_capacity(sorted.len());
        let mut right_sorted = Vec::with_capacity(sorted.len());
        for list in sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&i| self.goes_left[i as usize]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        let left = self.build(left_members, left_sorted, depth + 1);
        let right = self.build(right_members, right_sorted, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Minimizes `n_l·Gini_l + n_r·Gini_r = (n_l − Σc_l²/n_l) + (n_r − Σc_r²/n_r)`.
    fn best_split(&self, sorted: &[Vec<u32>], counts: &[u64]) -> Option<BestSplit> {
        let n = counts.iter().sum::<u64>() as f64;
        let total_sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<BestSplit> = None;
        let mut left = vec![0u64; self.n_classes];
        for (f, list) in sorted.iter().enumerate() {
            let col = &self.columns[f];
            left.iter_mut().for_each(|c| *c = 0);
            let (mut sq_l, mut sq_r) = (0.0f64, total_sq);
            for pos in 0..list.len() - 1 {
                let i = list[pos] as usize;
                let c = self.labels[i] as usize;
                let right_c = counts[c] - left[c];
                sq_l += (2 * left[c] + 1) as f64;
                sq_r -= (2 * right_c - 1) as f64;
                left[c] += 1;

                let n_l = pos + 1;
                let n_r = list.len() - n_l;
                if n_l < min_leaf || n_r < min_leaf {
                    continue;
                }
                let (v, next) = (col[i], col[list[pos + 1] as usize]);
                if v >= next {
                    continue;
                }
                let impurity = (n_l as f64 - sq_l / n_l as f64) + (n_r as f64 - sq_r / n_r as f64);
                if best.as_ref().is_none_or(|b| impurity < b.impurity - 1e-12 * n) {
                    let mid = v + (next - v) / 2.0;
                    best = Some(BestSplit {
                        feature: f,
                        threshold: if mid < next { mid } else { v },
                        impurity,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(x: &[f64], y: u32) -> Record {
        Record::new(x.to_vec(), Some(y))
    }

    fn params(max_depth: usize) -> TreeParams {
        TreeParams { max_depth, min_leaf: 1 }
    }

    fn accuracy(t: &DecisionTree, data: &[Record]) -> f64 {
        data.iter().filter(|r| t.predict(&r.features) == r.label.unwrap()).count() as f64 / data.len() as f64
    }

    #[test]
    fn separable_stump() {
        let data: Vec<Record> = [-3.0, -2.0, -0.5, 0.5, 1.0, 4.0]
            .iter()
            .map(|&x| rec(&[x], u32::from(x > 0.0)))
            .collect();
        let t = DecisionTree::fit(&data, &[0, 1], params(1));
        match &t.nodes()[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.0);
            }
            n => panic!("expected split, got {n:?}"),
        }
        assert_eq!(accuracy(&t, &data), 1.0);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn single_class_is_root_only() {
        let data: Vec<Record> = (0..5).map(|i| rec(&[i as f64], 1)).collect();
        let t = DecisionTree::fit(&data, &[0, 1], params(4));
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict(&[100.0]), 1);
    }

    #[test]
    fn min_leaf_limits_splits() {
        let data: Vec<Record> = (0..4).map(|i| rec(&[i as f64], u32::from(i == 3))).collect();
        let t = DecisionTree::fit(&data, &[0, 1], TreeParams { max_depth: 3, min_leaf: 2 });
        // Only the 2/2 cut is allowed.
        match &t.nodes()[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 1.5),
            n => panic!("expected split, got {n:?}"),
        }
        assert!(DecisionTree::fit(&data[..3], &[0, 1], TreeParams { max_depth: 3, min_leaf: 2 })
            .nodes()
            .len()
            == 1);
    }

    #[test]
    fn leaf_ties_go_to_smallest_class() {
        let data = vec![rec(&[0.0], 1), rec(&[0.0], 0)];
        let t = DecisionTree::fit(&data, &[0, 1], params(3));
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict(&[0.0]), 0);
        assert_eq!(t.predict_proba(&[0.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn trees_are_well_formed_and_bounded() {
        let data: Vec<Record> = (0..200)
            .map(|i| {
                let x = (i * 37 % 101) as f64;
                let y = (i * 11 % 53) as f64;
                rec(&[x, y], u32::from((x - 50.0) * (y - 26.0) > 0.0))
            })
            .collect();
        for depth in 1..6 {
            let t = DecisionTree::fit(&data, &[0, 1], params(depth));
            assert!(t.is_well_formed(2));
            assert!(t.depth() <= depth);
        }
    }
}
