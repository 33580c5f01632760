//! The pruning operator P_ε and its induced coupling.

use serde::{Deserialize, Serialize};

use crate::coupling::{Class, Coupling, CouplingContext, Side};
use crate::tree::{MergeTree, NodeRecord, TAU, V};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalKind {
    /// small-weight leaf
    Leaf,
    /// father left with a single child
    OrderTwo,
    /// root left with a single child, which becomes the new root
    Root,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub id: String,
    pub kind: RemovalKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneResult {
    pub eps: f64,
    pub tree: MergeTree,
    /// pruned vertex -> vertex of the input tree
    pub injection: Vec<V>,
    /// pairs (pruned vertex, input vertex)
    pub coupling: Coupling,
    pub log: Vec<Removal>,
    pub degenerate: bool,
}

/// Applies (P) until nothing changes. Ties between equal gaps go to the smaller id.
pub fn prune(t: &MergeTree, eps: f64) -> PruneResult {
    let n = t.len();
    let mut alive = vec![true; n];
    let mut parent: Vec<Option<V>> = (0..n).map(|v| t.parent(v)).collect();
    let mut nchild: Vec<usize> = (0..n).map(|v| t.children(v).len()).collect();
    let mut log = Vec::new();
    loop {
        let cand = (0..n)
            .filter(|&v| alive[v] && nchild[v] == 0)
            .filter_map(|v| parent[v].map(|p| (t.height(p) - t.height(v), v)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some((gap, l)) = cand else { break };
        if gap >= eps {
            break;
        }
        let p = parent[l].unwrap();
        alive[l] = false;
        nchild[p] -= 1;
        log.push(Removal { id: t.id(l).to_string(), kind: RemovalKind::Leaf });
        if nchild[p] == 1 {
            let c = (0..n).find(|&c| alive[c] && parent[c] == Some(p)).unwrap();
            alive[p] = false;
            parent[c] = parent[p];
            let kind = if parent[p].is_none() { RemovalKind::Root } else { RemovalKind::OrderTwo };
            log.push(Removal { id: t.id(p).to_string(), kind });
        }
    }
    let recs: Vec<NodeRecord> = (0..n)
        .filter(|&v| alive[v])
        .map(|v| NodeRecord { id: t.id(v).to_string(), height: t.height(v), parent: parent[v].map(|p| t.id(p).to_string()) })
        .collect();
    let tree = MergeTree::validate(recs, false).expect("pruning keeps a valid tree");
    let injection: Vec<V> = (0..tree.len()).map(|v| t.vertex(tree.id(v)).unwrap()).collect();
    let coupling = Coupling::unchecked(injection.iter().enumerate().map(|(a, &b)| (a, b)).collect());
    let degenerate = tree.len() == 1;
    PruneResult { eps, tree, injection, coupling, log, degenerate }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningReport {
    pub eps: f64,
    pub cost: f64,
    pub points: [bool; 5],
    pub failures: Vec<String>,
}

impl PruningReport {
    pub fn pass(&self) -> bool {
        self.points.iter().all(|&b| b)
    }
}

/// Checks the five properties of the induced coupling C_ε.
pub fn check_pruning_lemma(t: &MergeTree, res: &PruneResult) -> PruningReport {
    let (p, eps) = (&res.tree, res.eps);
    let mut fails = Vec::new();
    let mut points = [true; 5];
    let mut fail = |i: usize, msg: String, points: &mut [bool; 5]| {
        points[i] = false;
        fails.push(format!("({}) {msg}", i + 1));
    };

    if let Err(e) = Coupling::validate(p, t, res.coupling.pairs()) {
        fail(0, e.to_string(), &mut points);
    }

    let kept: Vec<V> = p.leaves().iter().map(|&l| res.injection[l]).collect();
    if kept.iter().any(|&l| !t.is_leaf(l)) {
        fail(1, "a pruned leaf is not a leaf of the input".into(), &mut points);
    }
    if !kept.contains(&t.argmin()) {
        fail(1, format!("lowest leaf {} removed", t.id(t.argmin())), &mut points);
    }
    for v in 0..t.len() {
        for w in t.subtree(v) {
            if w != v && t.height(v) - t.height(w) >= eps && !kept.iter().any(|&l| t.lt(t.lca(l, w), v)) {
                fail(1, format!("no kept leaf meets {} below {}", t.id(w), t.id(v)), &mut points);
            }
        }
    }

    let ctx = CouplingContext::new(p, t, &res.coupling);
    let (_, _, sc) = ctx.side(Side::G);
    let mut removed = vec![true; t.len()];
    for &v in &res.injection {
        removed[v] = false;
    }
    for v in (0..t.len()).filter(|&v| removed[v]) {
        if sc.lambda[v].len() > 1 {
            fail(2, format!("{} has {} coupled clusters below", t.id(v), sc.lambda[v].len()), &mut points);
        }
        if sc.class[v] == Class::Deleted {
            let gap = t.height(sc.phi[v].unwrap()) - t.height(v);
            if !sc.lambda[v].is_empty() || gap >= eps {
                fail(2, format!("{} deleted with gap {gap}", t.id(v)), &mut points);
            }
            match sc.eta[v] {
                Some(e) if p.height(e) < t.height(v) => {}
                _ => fail(3, format!("{} has no lower surviving vertex", t.id(v)), &mut points),
            }
        }
    }

    let cost = ctx.norm();
    if cost > eps / 2.0 + TAU {
        fail(4, format!("norm {cost} above {}", eps / 2.0), &mut points);
    }
    PruningReport { eps, cost, points, failures: fails }
}

/// Candidate ε values: every height difference between a leaf and one of its ancestors.
pub fn breakpoints(t: &MergeTree) -> Vec<f64> {
    let mut out: Vec<f64> =
        t.leaves().into_iter().flat_map(|l| t.ancestors(l).map(move |a| t.height(a) - t.height(l))).collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Smallest ε whose pruning leaves at most `max_leaves` leaves. ε = 0 when already within budget.
pub fn prune_to_leaf_budget(t: &MergeTree, max_leaves: usize) -> (f64, PruneResult) {
    let max_leaves = max_leaves.max(1);
    if t.leaf_count() <= max_leaves {
        return (0.0, prune(t, 0.0));
    }
    let bps: Vec<f64> = breakpoints(t).into_iter().map(f64::next_up).collect();
    // the leaf count only decreases as ε grows
    let i = bps.partition_point(|&e| prune(t, e).tree.leaf_count() > max_leaves);
    let eps = bps[i.min(bps.len() - 1)];
    (eps, prune(t, eps))
}
