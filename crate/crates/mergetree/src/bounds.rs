//! Bottom-up tables of rooted-pair costs and the resulting two-sided bounds on
//! the interleaving distance.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{Coupling, CouplingContext};
use crate::error::SolveError;
use crate::program::{build_program, CostTable, Direction, Penalty};
use crate::prune::{prune, prune_to_leaf_budget};
use crate::tree::{MergeTree, TAU, V};

/// Cost of deleting everything outside sub(r) and sub(r'), clamped at 0.
pub fn deletion_penalty(t: &MergeTree, g: &MergeTree, r: V, rp: V) -> f64 {
    let (fr, gr) = (t.sub_min(r), g.sub_min(rp));
    let mut h: f64 = 0.0;
    for v in (0..t.len()).filter(|&v| !t.leq(v, r)) {
        h = h.max(0.5 * (t.height(t.lca(v, r)) - t.height(v))).max(gr - t.height(v));
    }
    for w in (0..g.len()).filter(|&w| !g.leq(w, rp)) {
        h = h.max(0.5 * (g.height(g.lca(w, rp)) - g.height(w))).max(fr - g.height(w));
    }
    h
}

#[derive(Debug, Clone, Copy)]
pub struct BoundsConfig {
    pub penalty: Penalty,
    /// add `e` to the stored upper value of one pair right after it is computed
    pub inject: Option<(V, V, f64)>,
    pub timeout: Option<Duration>,
    /// charge collapsed vertices in the lower-bound programs
    pub collapse: bool,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { penalty: Penalty::Root, inject: None, timeout: None, collapse: true }
    }
}

/// One direction of the bottom-up algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub direction: Direction,
    /// w[x][y], `inf` where no special rooted coupling exists
    pub w: Vec<Vec<f64>>,
    /// selected antichain of each solved pair
    pub sel: Vec<Vec<Vec<(V, V)>>>,
    pub nodes: u64,
    pub ms: f64,
}

impl Table {
    pub fn get(&self, x: V, y: V) -> f64 {
        self.w[x][y]
    }

    /// {(x,y)} together with the stored pieces below it.
    pub fn unwind(&self, x: V, y: V) -> Vec<(V, V)> {
        let mut out = vec![(x, y)];
        for &(a, b) in &self.sel[x][y] {
            out.extend(self.unwind(a, b));
        }
        out.sort_unstable();
        out
    }
}

/// Fills W for every vertex pair, pairs grouped by lvl(x) + lvl(y) so that a
/// group only reads strictly lower groups.
pub fn bottom_up(t: &MergeTree, g: &MergeTree, direction: Direction, cfg: &BoundsConfig) -> Result<Table, SolveError> {
    let start = Instant::now();
    let (lt, lg) = (t.len_lvl(), g.len_lvl());
    let mut groups: Vec<Vec<(V, V)>> = Vec::new();
    for x in 0..t.len() {
        for y in 0..g.len() {
            let s = lt[x].1 + lg[y].1;
            if groups.len() <= s {
                groups.resize(s + 1, Vec::new());
            }
            groups[s].push((x, y));
        }
    }
    let mut table = CostTable::new(t.len(), g.len());
    let mut w = vec![vec![f64::INFINITY; g.len()]; t.len()];
    let mut sel = vec![vec![Vec::new(); g.len()]; t.len()];
    let mut nodes = 0;
    for group in groups {
        let solved: Vec<Result<(V, V, f64, Vec<(V, V)>, u64), SolveError>> = group
            .par_iter()
            .map(|&(x, y)| {
                let (lx, ly) = (t.is_leaf(x), g.is_leaf(y));
                if lx && ly {
                    return Ok((x, y, (t.height(x) - g.height(y)).abs(), vec![], 0));
                }
                if direction == Direction::Up && lx != ly {
                    return Ok((x, y, f64::INFINITY, vec![], 0));
                }
                let p = build_program(t, g, x, y, &table, direction, cfg.penalty)?.with_collapse(cfg.collapse);
                let left = cfg.timeout.map(|l| l.saturating_sub(start.elapsed()));
                match p.solve_with_timeout(left) {
                    Ok(r) => Ok((x, y, r.value, r.selected, r.nodes)),
                    Err(SolveError::Infeasible) => Ok((x, y, f64::INFINITY, vec![], 0)),
                    Err(e) => Err(e),
                }
            })
            .collect();
        for r in solved {
            let (x, y, mut v, s, n) = r?;
            if direction == Direction::Up {
                if let Some((ix, iy, e)) = cfg.inject {
                    if (ix, iy) == (x, y) {
                        v += e;
                    }
                }
            }
            table.set(x, y, v);
            w[x][y] = v;
            sel[x][y] = s;
            nodes += n;
        }
    }
    Ok(Table { direction, w, sel, nodes, ms: start.elapsed().as_secs_f64() * 1e3 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsResult {
    pub lower: f64,
    pub upper: f64,
    pub root_pair: (String, String),
    pub lower_pair: (String, String),
    pub witness: Vec<(String, String)>,
    /// true norm of the witness on the full trees
    pub witness_norm: f64,
    pub table_sizes: (usize, usize),
    pub ms: f64,
    pub ms_lower: f64,
    pub ms_upper: f64,
    #[serde(skip)]
    pub h: Vec<Vec<f64>>,
    #[serde(skip)]
    pub up: Option<Table>,
    #[serde(skip)]
    pub down: Option<Table>,
}

fn argmin_pair(h: &[Vec<f64>], w: &Table) -> (V, V, f64) {
    let mut best = (0, 0, f64::INFINITY);
    for (x, row) in h.iter().enumerate() {
        for (y, &hv) in row.iter().enumerate() {
            let v = hv.max(w.get(x, y));
            if v < best.2 {
                best = (x, y, v);
            }
        }
    }
    best
}

/// Both bounds, the best root pair and the witness coupling behind the upper bound.
pub fn interleaving_bounds(t: &MergeTree, g: &MergeTree) -> Result<BoundsResult, SolveError> {
    interleaving_bounds_with(t, g, &BoundsConfig::default())
}

pub fn interleaving_bounds_with(t: &MergeTree, g: &MergeTree, cfg: &BoundsConfig) -> Result<BoundsResult, SolveError> {
    let start = Instant::now();
    let h: Vec<Vec<f64>> = (0..t.len()).map(|x| (0..g.len()).map(|y| deletion_penalty(t, g, x, y)).collect()).collect();
    let up = bottom_up(t, g, Direction::Up, cfg)?;
    let down = bottom_up(t, g, Direction::Down, cfg)?;
    let (x, y, upper) = argmin_pair(&h, &up);
    let (lx, ly, lower) = argmin_pair(&h, &down);
    let pairs = up.unwind(x, y);
    let witness_norm = CouplingContext::new(t, g, &Coupling::unchecked(pairs.clone())).norm();
    Ok(BoundsResult {
        lower,
        upper,
        root_pair: (t.id(x).into(), g.id(y).into()),
        lower_pair: (t.id(lx).into(), g.id(ly).into()),
        witness: pairs.iter().map(|&(a, b)| (t.id(a).into(), g.id(b).into())).collect(),
        witness_norm,
        table_sizes: (t.len(), g.len()),
        ms: start.elapsed().as_secs_f64() * 1e3,
        ms_lower: down.ms,
        ms_upper: up.ms,
        h,
        up: Some(up),
        down: Some(down),
    })
}

impl BoundsResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    pub fn witness_coupling(&self, t: &MergeTree, g: &MergeTree) -> Coupling {
        Coupling::unchecked(self.witness.iter().map(|(a, b)| (t.vertex(a).unwrap(), g.vertex(b).unwrap())).collect())
    }

    pub fn consistent(&self) -> bool {
        self.lower <= self.upper + TAU && self.witness_norm <= self.upper + TAU
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DOpt {
    pub value: f64,
    pub eps: f64,
    pub leaves: (usize, usize),
    pub upper: f64,
    pub lower: f64,
}

/// max{ε/2, upper bound on the pruned pair} with the smallest common ε
/// bringing both trees within `max_leaves`.
pub fn d_opt(t: &MergeTree, g: &MergeTree, max_leaves: usize, cfg: &BoundsConfig) -> Result<DOpt, SolveError> {
    let (et, _) = prune_to_leaf_budget(t, max_leaves);
    let (eg, _) = prune_to_leaf_budget(g, max_leaves);
    let eps = et.max(eg);
    let (pt, pg) = (prune(t, eps).tree, prune(g, eps).tree);
    let b = interleaving_bounds_with(&pt, &pg, cfg)?;
    Ok(DOpt {
        value: b.upper.max(eps / 2.0),
        eps,
        leaves: (pt.leaf_count(), pg.leaf_count()),
        upper: b.upper,
        lower: b.lower,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::tree;

    fn t_a() -> MergeTree {
        tree(&[("a", 0.0, Some("r")), ("b", 1.0, Some("r")), ("r", 2.0, None)]).unwrap()
    }
    fn g_a() -> MergeTree {
        tree(&[("a'", 0.0, Some("r'")), ("b'", 1.0, Some("r'")), ("r'", 3.0, None)]).unwrap()
    }

    #[test]
    fn penalty_examples() {
        let (t, g) = (t_a(), g_a());
        assert_eq!(deletion_penalty(&t, &g, t.root(), g.root()), 0.0);
        let (b, b2) = (t.vertex("b").unwrap(), g.vertex("b'").unwrap());
        assert_eq!(deletion_penalty(&t, &g, b, b2), 1.5);
        assert_eq!(deletion_penalty(&t, &g, t.root(), b2), 1.5);
    }

    #[test]
    fn tables_on_fixture() {
        let (t, g) = (t_a(), g_a());
        let up = bottom_up(&t, &g, Direction::Up, &BoundsConfig::default()).unwrap();
        let v = |s: &str| t.vertex(s).unwrap();
        let w = |s: &str| g.vertex(s).unwrap();
        assert_eq!(up.get(v("a"), w("a'")), 0.0);
        assert_eq!(up.get(v("a"), w("b'")), 1.0);
        assert_eq!(up.get(v("b"), w("a'")), 1.0);
        assert_eq!(up.get(v("b"), w("b'")), 0.0);
        assert_eq!(up.get(t.root(), g.root()), 1.0);
        let down = bottom_up(&t, &g, Direction::Down, &BoundsConfig::default()).unwrap();
        assert!(down.get(t.root(), g.root()) <= 1.0);
        let tt = bottom_up(&t, &t, Direction::Up, &BoundsConfig::default()).unwrap();
        assert!((0..t.len()).all(|x| tt.get(x, x) == 0.0));
    }

    #[test]
    fn bounds_on_fixture() {
        let (t, g) = (t_a(), g_a());
        let b = interleaving_bounds(&t, &g).unwrap();
        assert_eq!((b.lower, b.upper), (1.0, 1.0));
        assert!(b.consistent());
        let c = b.witness_coupling(&t, &g);
        assert!(Coupling::validate(&t, &g, c.pairs()).is_ok());
        assert!(CouplingContext::new(&t, &g, &c).is_special());
        let s = interleaving_bounds(&t, &t).unwrap();
        assert_eq!((s.lower, s.upper), (0.0, 0.0));
        let d = d_opt(&t, &g, 2, &BoundsConfig::default()).unwrap();
        assert_eq!(d.value, b.upper);
        assert_eq!(d.eps, 0.0);
    }

    #[test]
    fn collapse_term_tightens_lower() {
        let t = tree(&[("p0", 0.0, Some("m0")), ("p1", 0.1, Some("m0")), ("p2", 0.2, Some("m1")), ("m0", 4.0, Some("m1")), ("m1", 4.2, None)]).unwrap();
        let g = tree(&[("p0", 0.0, Some("m0")), ("p1", 0.1, Some("m0")), ("p2", 0.2, Some("m1")), ("m0", 2.5, Some("m1")), ("m1", 3.7, None)]).unwrap();
        let plain = interleaving_bounds_with(&t, &g, &BoundsConfig { collapse: false, ..Default::default() }).unwrap();
        let tight = interleaving_bounds(&t, &g).unwrap();
        assert_eq!(plain.upper, tight.upper);
        assert!((plain.lower - 0.5).abs() < 1e-12);
        assert!((tight.lower - 1.5).abs() < 1e-12 && (tight.upper - 1.5).abs() < 1e-12);
    }

    #[test]
    fn json_shape() {
        let (t, g) = (t_a(), g_a());
        let v: serde_json::Value = serde_json::from_str(&interleaving_bounds(&t, &g).unwrap().to_json()).unwrap();
        for k in ["lower", "upper", "root_pair", "witness", "table_sizes", "ms"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}
