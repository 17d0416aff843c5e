use super::GbdtError;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Rows with `features[feature] <= threshold` (equivalently
    /// `bin <= bin`) go left.
    Split {
        feature: usize,
        bin: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Unshrunk leaf output.
    Leaf { value: f64 },
}

/// A binary regression tree stored in preorder, root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Builds a tree from nodes in any layout (root at index 0) and
    /// re-lays it out in preorder.
    pub fn new(nodes: Vec<Node>) -> Result<Self, GbdtError> {
        if nodes.is_empty() {
            return Err(GbdtError::InvalidTree("tree has no nodes".into()));
        }
        let mut out = Vec::with_capacity(nodes.len());
        let mut visited = vec![false; nodes.len()];
        preorder(&nodes, 0, &mut out, &mut visited)?;
        if out.len() != nodes.len() {
            return Err(GbdtError::InvalidTree("unreachable nodes".into()));
        }
        Ok(Self { nodes: out })
    }

    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// Same structure with every leaf value multiplied by `factor`.
    pub(crate) fn scaled(mut self, factor: f64) -> Self {
        for node in &mut self.nodes {
            if let Node::Leaf { value } = node {
                *value *= factor;
            }
        }
        self
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(*value),
            Node::Split { .. } => None,
        })
    }

    pub fn max_abs_leaf(&self) -> f64 {
        self.leaf_values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Unshrunk output for a raw feature vector.
    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if features[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Largest feature index referenced by a split.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

fn preorder(
    nodes: &[Node],
    at: usize,
    out: &mut Vec<Node>,
    visited: &mut [bool],
) -> Result<usize, GbdtError> {
    let node = nodes
        .get(at)
        .ok_or_else(|| GbdtError::InvalidTree(format!("child index {at} out of range")))?;
    if std::mem::replace(&mut visited[at], true) {
        return Err(GbdtError::InvalidTree(format!("node {at} reached twice")));
    }
    let here = out.len();
    match node {
        Node::Leaf { value } => {
            if !value.is_finite() {
                return Err(GbdtError::InvalidTree("non-finite leaf value".into()));
            }
            out.push(node.clone());
        }
        Node::Split {
            feature,
            bin,
            threshold,
            left,
            right,
        } => {
            if !threshold.is_finite() {
                return Err(GbdtError::InvalidTree("non-finite threshold".into()));
            }
            out.push(Node::Leaf { value: 0.0 });
            let new_left = preorder(nodes, *left, out, visited)?;
            let new_right = preorder(nodes, *right, out, visited)?;
            out[here] = Node::Split {
                feature: *feature,
                bin: *bin,
                threshold: *threshold,
                left: new_left,
                right: new_right,
            };
        }
    }
    Ok(here)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump(threshold: f64, lo: f64, hi: f64) -> Vec<Node> {
        vec![
            Node::Split {
                feature: 0,
                bin: 0,
                threshold,
                left: 2,
                right: 1,
            },
            Node::Leaf { value: hi },
            Node::Leaf { value: lo },
        ]
    }

    #[test]
    fn relayout_to_preorder() {
        let t = Tree::new(stump(0.5, -1.0, 2.0)).unwrap();
        assert_eq!(t.nodes()[1], Node::Leaf { value: -1.0 });
        assert_eq!(t.predict(&[0.5]), -1.0);
        assert_eq!(t.predict(&[0.6]), 2.0);
        assert_eq!(t.max_abs_leaf(), 2.0);
        assert_eq!(t.num_leaves(), 2);
    }

    #[test]
    fn rejects_cycles_and_dangling() {
        let mut nodes = stump(0.5, 1.0, 2.0);
        nodes[0] = Node::Split {
            feature: 0,
            bin: 0,
            threshold: 0.5,
            left: 0,
            right: 1,
        };
        assert!(Tree::new(nodes).is_err());
        let mut nodes = stump(0.5, 1.0, 2.0);
        nodes.push(Node::Leaf { value: 3.0 });
        assert!(Tree::new(nodes).is_err());
        assert!(Tree::new(vec![Node::Leaf { value: f64::NAN }]).is_err());
        assert!(Tree::new(Vec::new()).is_err());
    }
}
