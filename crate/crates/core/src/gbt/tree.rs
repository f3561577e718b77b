use crate::features::FeatureMatrix;

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary regression tree stored as a flat node list rooted at index 0.
/// Rows with `x[feature] <= threshold` go left.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub(crate) fn from_nodes(nodes: Vec<Node>) -> Self {
        Self { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Grows one tree on `residuals` restricted to the rows in `sorted[0]`.
/// `sorted[f]` lists the active rows ordered by feature `f`.
pub(crate) fn grow(x: &FeatureMatrix, residuals: &[f64], sorted: Vec<Vec<usize>>, params: &TreeParams) -> RegressionTree {
    let mut nodes = Vec::new();
    let mut go_left = vec![false; x.n_rows()];
    build(x, residuals, sorted, 0, params, &mut nodes, &mut go_left);
    RegressionTree::from_nodes(nodes)
}

fn build(
    x: &FeatureMatrix,
    r: &[f64],
    sorted: Vec<Vec<usize>>,
    depth: usize,
    params: &TreeParams,
    nodes: &mut Vec<Node>,
    go_left: &mut [bool],
) -> usize {
    let rows = &sorted[0];
    let n = rows.len();
    let sum: f64 = rows.iter().map(|&i| r[i]).sum();
    let me = nodes.len();
    nodes.push(Node::Leaf { value: sum / n as f64 });
    if depth >= params.max_depth || n < 2 * params.min_samples_leaf {
        return me;
    }
    let Some(best) = best_split(x, r, &sorted, sum, params.min_samples_leaf) else {
        return me;
    };
    for &i in rows {
        go_left[i] = x.get(i, best.feature) <= best.threshold;
    }
    let (mut left, mut right) = (Vec::with_capacity(sorted.len()), Vec::with_capacity(sorted.len()));
    for list in sorted {
        let (l, rr): (Vec<usize>, Vec<usize>) = list.into_iter().partition(|&i| go_left[i]);
        left.push(l);
        right.push(rr);
    }
    let l = build(x, r, left, depth + 1, params, nodes, go_left);
    let rt = build(x, r, right, depth + 1, params, nodes, go_left);
    nodes[me] = Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        left: l,
        right: rt,
    };
    me
}

/// Exact scan over every boundary between distinct sorted values. A
/// candidate replaces the incumbent only on strictly larger gain, so ties
/// keep the lowest feature index and then the lowest threshold.
fn best_split(x: &FeatureMatrix, r: &[f64], sorted: &[Vec<usize>], total: f64, min_leaf: usize) -> Option<Best> {
    let n = sorted[0].len();
    let nf = n as f64;
    let sum_sq: f64 = sorted[0].iter().map(|&i| r[i] * r[i]).sum();
    let parent = total * total / nf;
    let min_gain = f64::EPSILON * sum_sq.max(f64::MIN_POSITIVE);
    let mut best: Option<Best> = None;
    for (f, list) in sorted.iter().enumerate() {
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += r[list[k]];
            let nl = k + 1;
            if nl < min_leaf {
                continue;
            }
            if n - nl < min_leaf {
                break;
            }
            let (a, b) = (x.get(list[k], f), x.get(list[k + 1], f));
            if a == b {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / (n - nl) as f64 - parent;
            if gain > min_gain && best.as_ref().is_none_or(|bst| gain > bst.gain) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some(Best {
                    gain,
                    feature: f,
                    threshold,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_all(x: &FeatureMatrix) -> Vec<Vec<usize>> {
        (0..x.n_cols())
            .map(|f| {
                let mut idx: Vec<usize> = (0..x.n_rows()).collect();
                idx.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
                idx
            })
            .collect()
    }

    #[test]
    fn step_function_single_split() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = xs.iter().map(|&v| if v < 5.0 { -1.0 } else { 1.0 }).collect();
        let x = FeatureMatrix::from_column("x", &xs);
        let t = grow(
            &x,
            &y,
            sorted_all(&x),
            &TreeParams {
                max_depth: 3,
                min_samples_leaf: 1,
            },
        );
        assert_eq!(t.n_leaves(), 2);
        match t.nodes()[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 4.5);
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(t.predict_row(&[-100.0]), -1.0);
        assert_eq!(t.predict_row(&[100.0]), 1.0);
    }

    #[test]
    fn tie_prefers_lowest_feature() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
        let x = FeatureMatrix::new(vec!["a".into(), "b".into()], rows).unwrap();
        let y: Vec<f64> = (0..8).map(|i| if i < 4 { 0.0 } else { 1.0 }).collect();
        let t = grow(
            &x,
            &y,
            sorted_all(&x),
            &TreeParams {
                max_depth: 1,
                min_samples_leaf: 1,
            },
        );
        assert!(matches!(t.nodes()[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn respects_min_leaf_and_depth() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = xs.iter().map(|v| (v * 0.7).sin()).collect();
        let x = FeatureMatrix::from_column("x", &xs);
        let t = grow(
            &x,
            &y,
            sorted_all(&x),
            &TreeParams {
                max_depth: 2,
                min_samples_leaf: 5,
            },
        );
        assert!(t.depth() <= 2);
        assert!(t.n_leaves() <= 4);
        let mut counts = std::collections::BTreeMap::new();
        for &v in &xs {
            *counts.entry(t.predict_row(&[v]).to_bits()).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 5));
    }

    #[test]
    fn constant_feature_never_splits() {
        let x = FeatureMatrix::from_column("x", &[1.0; 6]);
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let t = grow(
            &x,
            &y,
            sorted_all(&x),
            &TreeParams {
                max_depth: 4,
                min_samples_leaf: 1,
            },
        );
        assert_eq!(t.nodes(), &[Node::Leaf { value: 3.5 }]);
    }
}
