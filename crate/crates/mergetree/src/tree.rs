//! Merge trees: rooted trees with a height function increasing towards the root.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::TreeError;

/// Vertex handle. Indices follow the lexicographic order of the ids.
pub type V = usize;

/// Absolute tolerance used by every numerical assertion.
pub const TAU: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    pub height: f64,
    pub parent: Option<String>,
}

impl NodeRecord {
    pub fn new(id: &str, height: f64, parent: Option<&str>) -> Self {
        NodeRecord { id: id.to_string(), height, parent: parent.map(str::to_string) }
    }
}

/// On-disk tree format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeFile {
    pub nodes: Vec<NodeRecord>,
    #[serde(default)]
    pub generic: bool,
}

#[derive(Debug, Clone)]
pub struct MergeTree {
    ids: Vec<String>,
    heights: Vec<f64>,
    parent: Vec<Option<V>>,
    children: Vec<Vec<V>>,
    root: V,
    depth: Vec<usize>,
    tin: Vec<usize>,
    tout: Vec<usize>,
    low: Vec<V>,
    preorder: Vec<V>,
    index: HashMap<String, V>,
}

impl PartialEq for MergeTree {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids && self.heights == other.heights && self.parent == other.parent
    }
}

/// Shorthand used by fixtures: `(id, height, parent)`.
pub fn tree(nodes: &[(&str, f64, Option<&str>)]) -> Result<MergeTree, TreeError> {
    let recs = nodes.iter().map(|(i, h, p)| NodeRecord::new(i, *h, *p)).collect();
    MergeTree::validate(recs, false)
}

impl MergeTree {
    /// Checks the records and builds the tree. `strict` adds root order and genericity checks.
    pub fn validate(mut recs: Vec<NodeRecord>, strict: bool) -> Result<MergeTree, TreeError> {
        if recs.is_empty() {
            return Err(TreeError::Empty);
        }
        recs.sort_by(|a, b| a.id.cmp(&b.id));
        let n = recs.len();
        let mut index = HashMap::with_capacity(n);
        for (i, r) in recs.iter().enumerate() {
            if index.insert(r.id.clone(), i).is_some() {
                return Err(TreeError::DuplicateId(r.id.clone()));
            }
            if !r.height.is_finite() {
                return Err(TreeError::NonFinite(r.id.clone()));
            }
        }
        let mut parent = vec![None; n];
        let mut roots = Vec::new();
        for (i, r) in recs.iter().enumerate() {
            match &r.parent {
                None => roots.push(i),
                Some(p) => match index.get(p) {
                    Some(&j) => parent[i] = Some(j),
                    None => {
                        return Err(TreeError::UnknownParent { child: r.id.clone(), parent: p.clone() })
                    }
                },
            }
        }
        if roots.is_empty() {
            return Err(TreeError::NoRoot);
        }
        if roots.len() > 1 {
            return Err(TreeError::MultipleRoots(roots.iter().map(|&i| recs[i].id.clone()).collect()));
        }
        let root = roots[0];
        let mut children = vec![Vec::new(); n];
        for i in 0..n {
            if let Some(p) = parent[i] {
                children[p].push(i);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            seen[v] = true;
            stack.extend(children[v].iter().copied());
        }
        let lost: Vec<String> = (0..n).filter(|&i| !seen[i]).map(|i| recs[i].id.clone()).collect();
        if !lost.is_empty() {
            return Err(TreeError::Cycle(lost));
        }
        for i in 0..n {
            if let Some(p) = parent[i] {
                let (hc, hp) = (recs[i].height, recs[p].height);
                if hc > hp || (strict && hc == hp) {
                    return Err(TreeError::NonIncreasing { child: recs[i].id.clone(), parent: recs[p].id.clone() });
                }
            }
        }
        let ids: Vec<String> = recs.iter().map(|r| r.id.clone()).collect();
        let heights: Vec<f64> = recs.iter().map(|r| r.height).collect();
        if strict {
            if n > 1 && children[root].len() < 2 {
                return Err(TreeError::RootOrder { root: ids[root].clone(), children: children[root].len() });
            }
            if let Some(d) = duplicate_heights(&ids, &heights) {
                return Err(TreeError::DuplicateHeights(d));
            }
        }
        Ok(Self::assemble(ids, heights, parent, children, root, index))
    }

    fn assemble(
        ids: Vec<String>,
        heights: Vec<f64>,
        parent: Vec<Option<V>>,
        children: Vec<Vec<V>>,
        root: V,
        index: HashMap<String, V>,
    ) -> MergeTree {
        let n = ids.len();
        let mut depth = vec![0; n];
        let mut tin = vec![0; n];
        let mut tout = vec![0; n];
        let mut preorder = Vec::with_capacity(n);
        let mut clock = 0;
        let mut stack = vec![(root, false)];
        while let Some((v, done)) = stack.pop() {
            if done {
                tout[v] = clock;
                continue;
            }
            tin[v] = clock;
            clock += 1;
            preorder.push(v);
            stack.push((v, true));
            for &c in children[v].iter().rev() {
                depth[c] = depth[v] + 1;
                stack.push((c, false));
            }
        }
        let mut low: Vec<V> = (0..n).collect();
        for &v in preorder.iter().rev() {
            for &c in &children[v] {
                let (a, b) = (low[v], low[c]);
                if heights[b] < heights[a] || (heights[b] == heights[a] && b < a) {
                    low[v] = b;
                }
            }
        }
        MergeTree { ids, heights, parent, children, root, depth, tin, tout, low, preorder, index }
    }

    pub fn from_file(file: TreeFile, strict: bool) -> Result<MergeTree, TreeError> {
        Self::validate(file.nodes, strict || file.generic)
    }

    pub fn from_json(s: &str, strict: bool) -> Result<MergeTree, TreeError> {
        let file: TreeFile = serde_json::from_str(s).map_err(|e| TreeError::Format(e.to_string()))?;
        Self::from_file(file, strict)
    }

    pub fn records(&self) -> Vec<NodeRecord> {
        (0..self.len())
            .map(|v| NodeRecord {
                id: self.ids[v].clone(),
                height: self.heights[v],
                parent: self.parent[v].map(|p| self.ids[p].clone()),
            })
            .collect()
    }

    pub fn to_file(&self) -> TreeFile {
        TreeFile { nodes: self.records(), generic: self.is_generic() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("tree serializes")
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, v: V) -> &str {
        &self.ids[v]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vertex(&self, id: &str) -> Result<V, TreeError> {
        self.index.get(id).copied().ok_or_else(|| TreeError::UnknownVertex(id.to_string()))
    }

    pub fn height(&self, v: V) -> f64 {
        self.heights[v]
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn parent(&self, v: V) -> Option<V> {
        self.parent[v]
    }

    pub fn children(&self, v: V) -> &[V] {
        &self.children[v]
    }

    pub fn root(&self) -> V {
        self.root
    }

    pub fn is_leaf(&self, v: V) -> bool {
        self.children[v].is_empty()
    }

    pub fn leaves(&self) -> Vec<V> {
        (0..self.len()).filter(|&v| self.is_leaf(v)).collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.children.iter().filter(|c| c.is_empty()).count()
    }

    /// Vertices in depth-first preorder from the root.
    pub fn preorder(&self) -> &[V] {
        &self.preorder
    }

    /// Root has depth 0.
    pub fn depth(&self, v: V) -> usize {
        self.depth[v]
    }

    /// `a <= b` in the tree order: b is an ancestor of a or equal to it.
    pub fn leq(&self, a: V, b: V) -> bool {
        self.tin[b] <= self.tin[a] && self.tout[a] <= self.tout[b]
    }

    pub fn lt(&self, a: V, b: V) -> bool {
        a != b && self.leq(a, b)
    }

    pub fn comparable(&self, a: V, b: V) -> bool {
        self.leq(a, b) || self.leq(b, a)
    }

    pub fn lca(&self, a: V, b: V) -> V {
        let (mut a, mut b) = (a, b);
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].unwrap();
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].unwrap();
        }
        while a != b {
            a = self.parent[a].unwrap();
            b = self.parent[b].unwrap();
        }
        a
    }

    /// Least common ancestor of a nonempty set.
    pub fn lca_all(&self, vs: &[V]) -> Option<V> {
        let (&first, rest) = vs.split_first()?;
        Some(rest.iter().fold(first, |acc, &v| self.lca(acc, v)))
    }

    /// Same as `lca_all` but by ids.
    pub fn lca_ids(&self, ids: &[&str]) -> Result<String, TreeError> {
        let vs = ids.iter().map(|i| self.vertex(i)).collect::<Result<Vec<_>, _>>()?;
        let v = self.lca_all(&vs).ok_or(TreeError::Empty)?;
        Ok(self.ids[v].clone())
    }

    /// Strict ancestors from the parent up to the root.
    pub fn ancestors(&self, v: V) -> Ancestors<'_> {
        Ancestors { tree: self, cur: self.parent[v] }
    }

    /// All vertices of sub(v), in preorder.
    pub fn subtree(&self, v: V) -> Vec<V> {
        let lo = self.tin[v];
        let hi = self.tout[v];
        self.preorder[lo..hi].to_vec()
    }

    /// Number of vertices of sub(v).
    pub fn subtree_size(&self, v: V) -> usize {
        self.tout[v] - self.tin[v]
    }

    /// Lowest vertex of sub(v).
    pub fn low(&self, v: V) -> V {
        self.low[v]
    }

    /// min of the height over sub(v).
    pub fn sub_min(&self, v: V) -> f64 {
        self.heights[self.low[v]]
    }

    /// Lowest vertex of the tree.
    pub fn argmin(&self) -> V {
        self.low[self.root]
    }

    pub fn span(&self) -> f64 {
        self.heights[self.root] - self.sub_min(self.root)
    }

    /// Pairwise distinct heights.
    pub fn is_generic(&self) -> bool {
        duplicate_heights(&self.ids, &self.heights).is_none()
    }

    /// Per vertex `(len, lvl)`: len counts the vertices on the path to the root.
    pub fn len_lvl(&self) -> Vec<(usize, usize)> {
        let total = self.depth.iter().max().copied().unwrap_or(0) + 1;
        self.depth.iter().map(|&d| (d + 1, total - (d + 1))).collect()
    }

    /// Deterministic jitter of tied heights: the k-th member of a tie group
    /// (deeper first, then by id) moves up by k * scale / (|V| + 1).
    pub fn perturb_to_generic(&self, scale: f64) -> Result<MergeTree, TreeError> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(TreeError::BadScale);
        }
        let n = self.len();
        let mut order: Vec<V> = (0..n).collect();
        order.sort_by(|&a, &b| {
            self.heights[a]
                .total_cmp(&self.heights[b])
                .then(self.depth[b].cmp(&self.depth[a]))
                .then(a.cmp(&b))
        });
        let mut h = self.heights.clone();
        let step = scale / (n as f64 + 1.0);
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && self.heights[order[j + 1]] == self.heights[order[i]] {
                j += 1;
            }
            for (k, &v) in order[i..=j].iter().enumerate() {
                h[v] = self.heights[v] + k as f64 * step;
            }
            i = j + 1;
        }
        for v in 0..n {
            if let Some(p) = self.parent[v] {
                if h[v] >= h[p] {
                    return Err(TreeError::ScaleTooLarge { child: self.ids[v].clone(), parent: self.ids[p].clone() });
                }
            }
        }
        if let Some(d) = duplicate_heights(&self.ids, &h) {
            return Err(TreeError::DuplicateHeights(d));
        }
        let mut t = self.clone();
        t.heights = h;
        Ok(t)
    }

    /// Same tree with every height shifted by `h`.
    pub fn shifted(&self, h: f64) -> MergeTree {
        let mut t = self.clone();
        t.heights.iter_mut().for_each(|x| *x += h);
        t
    }

    /// sub(v) as a standalone tree, keeping ids.
    pub fn subtree_tree(&self, v: V) -> MergeTree {
        let recs = self
            .subtree(v)
            .into_iter()
            .map(|u| NodeRecord {
                id: self.ids[u].clone(),
                height: self.heights[u],
                parent: if u == v { None } else { self.parent[u].map(|p| self.ids[p].clone()) },
            })
            .collect();
        MergeTree::validate(recs, false).expect("subtree of a valid tree")
    }
}

pub struct Ancestors<'a> {
    tree: &'a MergeTree,
    cur: Option<V>,
}

impl Iterator for Ancestors<'_> {
    type Item = V;
    fn next(&mut self) -> Option<V> {
        let v = self.cur?;
        self.cur = self.tree.parent[v];
        Some(v)
    }
}

fn duplicate_heights(ids: &[String], h: &[f64]) -> Option<Vec<String>> {
    let mut order: Vec<usize> = (0..h.len()).collect();
    order.sort_by(|&a, &b| h[a].total_cmp(&h[b]).then(a.cmp(&b)));
    for w in order.windows(2) {
        if h[w[0]] == h[w[1]] {
            let tied: Vec<String> =
                order.iter().filter(|&&i| h[i] == h[w[0]]).map(|&i| ids[i].clone()).collect();
            return Some(tied);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t_a() -> MergeTree {
        tree(&[("a", 0.0, Some("r")), ("b", 1.0, Some("r")), ("r", 2.0, None)]).unwrap()
    }

    fn caterpillar() -> MergeTree {
        tree(&[
            ("p", 0.0, Some("s")),
            ("q", 0.5, Some("s")),
            ("s", 1.0, Some("r")),
            ("u", 0.2, Some("r")),
            ("r", 1.5, None),
        ])
        .unwrap()
    }

    #[test]
    fn minimal_tree_validates() {
        let t = t_a();
        let leaves: Vec<&str> = t.leaves().iter().map(|&v| t.id(v)).collect();
        assert_eq!(leaves, vec!["a", "b"]);
        assert_eq!(t.id(t.root()), "r");
    }

    #[test]
    fn decreasing_edge_is_rejected() {
        let e = tree(&[("a", 2.0, Some("r")), ("r", 1.0, None)]).unwrap_err();
        assert_eq!(e, TreeError::NonIncreasing { child: "a".into(), parent: "r".into() });
        assert_eq!(e.to_string(), "non-increasing height on edge (a,r)");
    }

    #[test]
    fn strict_mode_rejects_ties() {
        let recs = vec![
            NodeRecord::new("a", 0.0, Some("r")),
            NodeRecord::new("b", 0.0, Some("r")),
            NodeRecord::new("r", 1.0, None),
        ];
        let e = MergeTree::validate(recs.clone(), true).unwrap_err();
        assert_eq!(e, TreeError::DuplicateHeights(vec!["a".into(), "b".into()]));
        assert!(MergeTree::validate(recs, false).is_ok());
    }

    #[test]
    fn structural_errors() {
        let two_roots = vec![NodeRecord::new("a", 0.0, None), NodeRecord::new("b", 1.0, None)];
        assert!(matches!(MergeTree::validate(two_roots, false), Err(TreeError::MultipleRoots(_))));
        let cyc = vec![
            NodeRecord::new("r", 5.0, None),
            NodeRecord::new("a", 0.0, Some("b")),
            NodeRecord::new("b", 1.0, Some("a")),
        ];
        assert_eq!(
            MergeTree::validate(cyc, false).unwrap_err(),
            TreeError::Cycle(vec!["a".into(), "b".into()])
        );
        assert_eq!(MergeTree::validate(vec![], false).unwrap_err(), TreeError::Empty);
        let lonely = vec![NodeRecord::new("a", 0.0, Some("r")), NodeRecord::new("r", 1.0, None)];
        assert!(matches!(MergeTree::validate(lonely.clone(), true), Err(TreeError::RootOrder { .. })));
        assert!(MergeTree::validate(lonely, false).is_ok());
    }

    #[test]
    fn lca_examples() {
        let t = t_a();
        assert_eq!(t.lca_ids(&["a", "b"]).unwrap(), "r");
        assert_eq!(t.lca_ids(&["a"]).unwrap(), "a");
        let c = caterpillar();
        assert_eq!(c.lca_ids(&["p", "u"]).unwrap(), "r");
        assert_eq!(c.lca_ids(&["p", "q"]).unwrap(), "s");
        assert!(matches!(c.lca_ids(&["zz"]), Err(TreeError::UnknownVertex(_))));
    }

    #[test]
    fn len_lvl_examples() {
        let t = t_a();
        let ll = t.len_lvl();
        let a = t.vertex("a").unwrap();
        let r = t.vertex("r").unwrap();
        assert_eq!(ll[r], (1, 1));
        assert_eq!(ll[a], (2, 0));
        let c = caterpillar();
        let ll = c.len_lvl();
        assert_eq!(ll[c.vertex("p").unwrap()], (3, 0));
        assert_eq!(ll[c.vertex("r").unwrap()].1, 2);
        let single = tree(&[("x", 0.0, None)]).unwrap();
        assert_eq!(single.len_lvl(), vec![(1, 0)]);
    }

    #[test]
    fn perturb_examples() {
        let t = tree(&[("a", 0.0, Some("r")), ("b", 0.0, Some("r")), ("r", 1.0, None)]).unwrap();
        let p = t.perturb_to_generic(1e-6).unwrap();
        assert_eq!(p.height(p.vertex("a").unwrap()), 0.0);
        assert!((p.height(p.vertex("b").unwrap()) - 2.5e-7).abs() < 1e-18);
        assert_eq!(p.height(p.vertex("r").unwrap()), 1.0);
        let g = t_a();
        assert_eq!(g.perturb_to_generic(1e-6).unwrap(), g);
        let tight = tree(&[
            ("a", 0.0, Some("r")),
            ("b", 0.0, Some("r")),
            ("c", 0.0, Some("r")),
            ("r", 1e-9, None),
        ])
        .unwrap();
        assert!(matches!(tight.perturb_to_generic(1e-6), Err(TreeError::ScaleTooLarge { .. })));
    }

    #[test]
    fn json_round_trip() {
        let t = caterpillar();
        let s = t.to_json();
        let back = MergeTree::from_json(&s, false).unwrap();
        assert_eq!(back, t);
        let raw = r#"{"nodes":[{"id":"a","height":0.0,"parent":"r"},{"id":"b","height":1.0,"parent":"r"},{"id":"r","height":2.0,"parent":null}],"generic":true}"#;
        let t = MergeTree::from_json(raw, false).unwrap();
        assert_eq!(t.leaf_count(), 2);
    }

    #[test]
    fn subtree_queries() {
        let c = caterpillar();
        let s = c.vertex("s").unwrap();
        let sub: Vec<&str> = c.subtree(s).iter().map(|&v| c.id(v)).collect();
        assert_eq!(sub, vec!["s", "p", "q"]);
        assert_eq!(c.id(c.low(s)), "p");
        assert_eq!(c.id(c.argmin()), "p");
        let st = c.subtree_tree(s);
        assert_eq!(st.len(), 3);
        assert_eq!(st.id(st.root()), "s");
    }
}
