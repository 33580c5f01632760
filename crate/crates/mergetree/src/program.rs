//! The binary min-max program for a rooted subtree pair and its exact solver.
//!
//! Variables are a[x,y] for non-root vertices of the two subtrees, plus u[x], u[y].
//! The solver never materialises u: in every feasible point u = [Λ ≥ 2].
//! It answers "is there a feasible point with objective ≤ z" by a complete
//! depth-first search, and binary searches z over the finite set of values
//! the objective can take.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::tree::{MergeTree, V};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

/// Penalty for an internal deletion with several coupled clusters below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    /// g(r_G) - f(x)
    #[default]
    Root,
    /// f(father(x)) - f(x), experimental
    Father,
}

/// Subtree-pair costs indexed by full-tree vertices. `None` is a missing entry,
/// `inf` a pair that can never be selected.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    n_g: usize,
    w: Vec<Option<f64>>,
}

impl CostTable {
    pub fn new(n_t: usize, n_g: usize) -> CostTable {
        CostTable { n_g, w: vec![None; n_t * n_g] }
    }

    pub fn get(&self, x: V, y: V) -> Option<f64> {
        self.w[x * self.n_g + y]
    }

    pub fn set(&mut self, x: V, y: V, v: f64) {
        self.w[x * self.n_g + y] = Some(v);
    }
}

/// Per-vertex constants of one side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SideData {
    /// non-root vertices of the subtree, preorder
    verts: Vec<V>,
    /// position in `verts` of the father, None for children of the subtree root
    father: Vec<Option<usize>>,
    /// min height in the subtree of each vertex
    low: Vec<f64>,
    /// 0.5 (h(father) - low)
    a: Vec<f64>,
    /// penalty coefficient of u
    f2: Vec<f64>,
    /// comp[i][j]: vertices i and j comparable (or equal)
    comp: Vec<Vec<bool>>,
    /// below[i][j]: j ≤ i
    below: Vec<Vec<bool>>,
    /// below_father[i][j]: j < father(i)
    below_father: Vec<Vec<bool>>,
    /// position of the lowest leaf, None when the subtree is a single vertex
    argmin: Option<usize>,
    leaves: Vec<usize>,
    m: f64,
    q: f64,
    /// heights by position, the subtree root last
    hts: Vec<f64>,
    /// lca[i][j] by position, the subtree root being `len()`
    lca: Vec<Vec<usize>>,
}

impl SideData {
    fn new(t: &MergeTree, r: V, other_root_height: f64, penalty: Penalty) -> SideData {
        let verts: Vec<V> = t.subtree(r).into_iter().filter(|&v| v != r).collect();
        let pos = |v: V| verts.iter().position(|&u| u == v);
        let n = verts.len();
        let father: Vec<Option<usize>> = verts.iter().map(|&v| pos(t.parent(v).unwrap())).collect();
        let low: Vec<f64> = verts.iter().map(|&v| t.sub_min(v)).collect();
        let a = (0..n).map(|i| 0.5 * (t.height(t.parent(verts[i]).unwrap()) - low[i])).collect();
        let f2 = verts
            .iter()
            .map(|&v| match penalty {
                Penalty::Root => other_root_height - t.height(v),
                Penalty::Father => t.height(t.parent(v).unwrap()) - t.height(v),
            })
            .collect();
        let comp = (0..n).map(|i| (0..n).map(|j| t.comparable(verts[i], verts[j])).collect()).collect();
        let below = (0..n).map(|i| (0..n).map(|j| t.leq(verts[j], verts[i])).collect()).collect();
        let below_father = (0..n)
            .map(|i| (0..n).map(|j| t.lt(verts[j], t.parent(verts[i]).unwrap())).collect())
            .collect();
        let argmin = pos(t.low(r));
        let leaves: Vec<usize> = (0..n).filter(|&i| t.is_leaf(verts[i])).collect();
        let m = 1.0 / (leaves.len().max(1) as f64 + 1.0);
        let all: Vec<V> = verts.iter().copied().chain([r]).collect();
        let hts = all.iter().map(|&v| t.height(v)).collect();
        let lca = all.iter().map(|&u| all.iter().map(|&v| pos(t.lca(u, v)).unwrap_or(n)).collect()).collect();
        SideData { verts, father, low, a, f2, comp, below, below_father, argmin, leaves, m, q: -1.5 * m, hts, lca }
    }

    fn len(&self) -> usize {
        self.verts.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxProgram {
    pub direction: Direction,
    pub penalty: Penalty,
    pub x0: V,
    pub y0: V,
    ids_t: Vec<String>,
    ids_g: Vec<String>,
    st: SideData,
    sg: SideData,
    /// selectable pairs (i, j, cost) by side positions, finite cost only
    pairs: Vec<(usize, usize, f64)>,
    pub root_term: f64,
    pub k: f64,
    pub linearized: bool,
    /// going down, also charge vertices above two or more selected pairs
    pub collapse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub value: f64,
    /// the selected antichain C(𝒱), full-tree vertices
    pub selected: Vec<(V, V)>,
    pub nodes: u64,
    pub ms: f64,
}

/// Builds the program for the subtree pair (x0, y0).
pub fn build_program(
    t: &MergeTree,
    g: &MergeTree,
    x0: V,
    y0: V,
    table: &CostTable,
    direction: Direction,
    penalty: Penalty,
) -> Result<MinMaxProgram, SolveError> {
    let st = SideData::new(t, x0, g.height(y0), penalty);
    let sg = SideData::new(g, y0, t.height(x0), penalty);
    let mut pairs = Vec::new();
    for (i, &x) in st.verts.iter().enumerate() {
        for (j, &y) in sg.verts.iter().enumerate() {
            let w = table.get(x, y).ok_or_else(|| SolveError::MissingCost(t.id(x).into(), g.id(y).into()))?;
            if w.is_finite() {
                pairs.push((i, j, w));
            }
        }
    }
    let ht: Vec<f64> = t.subtree(x0).iter().map(|&v| t.height(v)).collect();
    let hg: Vec<f64> = g.subtree(y0).iter().map(|&v| g.height(v)).collect();
    let mut maxdiff: f64 = 0.0;
    for a in &ht {
        for b in &hg {
            maxdiff = maxdiff.max((a - b).abs());
        }
    }
    let all = ht.iter().chain(&hg);
    let span = all.clone().fold(f64::NEG_INFINITY, |m, &h| m.max(h)) - all.fold(f64::INFINITY, |m, &h| m.min(h));
    Ok(MinMaxProgram {
        direction,
        penalty,
        x0,
        y0,
        ids_t: t.ids().to_vec(),
        ids_g: g.ids().to_vec(),
        st,
        sg,
        pairs,
        root_term: (t.height(x0) - g.height(y0)).abs(),
        k: maxdiff + span.max(1.0),
        linearized: false,
        collapse: false,
    })
}

/// Adds z and the constraints z ≥ F_i (and z ≥ B_i going up).
pub fn linearize(mut p: MinMaxProgram) -> MinMaxProgram {
    p.linearized = true;
    p
}

/// A linear expression Σ coef·var + constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LinExpr {
    pub terms: Vec<(String, f64)>,
    pub constant: f64,
}

impl LinExpr {
    fn add(&mut self, var: String, c: f64) {
        if c != 0.0 {
            self.terms.push((var, c));
        }
    }

    fn scaled(&self, s: f64) -> LinExpr {
        LinExpr { terms: self.terms.iter().map(|(v, c)| (v.clone(), c * s)).collect(), constant: self.constant * s }
    }

    fn plus(mut self, o: &LinExpr) -> LinExpr {
        self.terms.extend(o.terms.iter().cloned());
        self.constant += o.constant;
        self
    }

    pub fn eval(&self, val: &dyn Fn(&str) -> f64) -> f64 {
        self.terms.iter().map(|(v, c)| c * val(v)).sum::<f64>() + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

/// `expr sense 0`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinConstraint {
    pub tag: String,
    pub expr: LinExpr,
    pub sense: Sense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    /// B elements feed (6), everything else (5)
    pub is_b: bool,
    pub expr: LinExpr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramDump {
    pub direction: Direction,
    pub penalty: Penalty,
    pub root_pair: (String, String),
    pub binary: Vec<String>,
    pub continuous: Vec<String>,
    pub constraints: Vec<LinConstraint>,
    pub objective: Vec<Component>,
    pub k: f64,
    /// collapse term active; it is not part of the linear constraints
    pub collapse: bool,
    pub m_t: f64,
    pub q_t: f64,
    pub m_g: f64,
    pub q_g: f64,
}

impl ProgramDump {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }
}

/// Shared evaluation of the objective terms, also used by the search.
struct Terms<'a> {
    p: &'a MinMaxProgram,
}

impl<'a> Terms<'a> {
    fn up(&self) -> bool {
        self.p.direction == Direction::Up
    }

    /// B element for an uncovered T vertex i and a selected pair below its father
    fn b_t(&self, i: usize, pair: usize) -> f64 {
        let (_, j, _) = self.p.pairs[pair];
        self.p.sg.low[j] - self.p.st.low[i]
    }

    fn b_g(&self, j: usize, pair: usize) -> f64 {
        let (i, _, _) = self.p.pairs[pair];
        self.p.st.low[i] - self.p.sg.low[j]
    }
}

impl MinMaxProgram {
    /// Turns the collapse term on or off; it only acts going down.
    pub fn with_collapse(mut self, on: bool) -> MinMaxProgram {
        self.collapse = on;
        self
    }

    fn collapses(&self) -> bool {
        self.collapse && self.direction == Direction::Down
    }

    /// Per vertex of each side, the LCA (other-side position) of the partners
    /// of the selected pairs at or below it.
    fn chi(&self, sel: &[usize]) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
        let mut ct = vec![None; self.st.len()];
        let mut cg = vec![None; self.sg.len()];
        for &q in sel {
            let (a, b, _) = self.pairs[q];
            for (i, c) in ct.iter_mut().enumerate() {
                if self.st.below[i][a] {
                    *c = Some(c.map_or(b, |c: usize| self.sg.lca[c][b]));
                }
            }
            for (j, c) in cg.iter_mut().enumerate() {
                if self.sg.below[j][b] {
                    *c = Some(c.map_or(a, |c: usize| self.st.lca[c][a]));
                }
            }
        }
        (ct, cg)
    }

    pub fn is_base_case(&self) -> bool {
        self.st.len() == 0 && self.sg.len() == 0
    }

    pub fn variable_count(&self) -> usize {
        self.pairs.len() + self.st.len() + self.sg.len()
    }

    fn a_name(&self, p: usize) -> String {
        let (i, j, _) = self.pairs[p];
        format!("a[{},{}]", self.ids_t[self.st.verts[i]], self.ids_g[self.sg.verts[j]])
    }

    fn u_name(&self, side_t: bool, i: usize) -> String {
        if side_t {
            format!("uT[{}]", self.ids_t[self.st.verts[i]])
        } else {
            format!("uG[{}]", self.ids_g[self.sg.verts[i]])
        }
    }

    /// c_x as a linear expression.
    fn c_expr(&self, side_t: bool, i: usize) -> LinExpr {
        let mut e = LinExpr::default();
        for (p, &(a, b, _)) in self.pairs.iter().enumerate() {
            if (side_t && a == i) || (!side_t && b == i) {
                e.add(self.a_name(p), 1.0);
            }
        }
        e
    }

    fn sum_c(&self, side_t: bool, pick: impl Fn(usize) -> bool) -> LinExpr {
        let s = if side_t { &self.st } else { &self.sg };
        (0..s.len()).filter(|&i| pick(i)).fold(LinExpr::default(), |e, i| e.plus(&self.c_expr(side_t, i)))
    }

    fn lambda_expr(&self, side_t: bool, i: usize) -> LinExpr {
        let s = if side_t { &self.st } else { &self.sg };
        self.sum_c(side_t, |j| s.below[i][j])
    }

    fn d_expr(&self, side_t: bool, i: usize) -> LinExpr {
        let s = if side_t { &self.st } else { &self.sg };
        self.sum_c(side_t, |j| s.comp[i][j])
    }

    /// Variables, linear constraints and objective components.
    pub fn dump(&self) -> ProgramDump {
        let up = self.direction == Direction::Up;
        let mut binary: Vec<String> = (0..self.pairs.len()).map(|p| self.a_name(p)).collect();
        let mut cons = Vec::new();
        let mut obj = Vec::new();
        for side_t in [true, false] {
            let s = if side_t { &self.st } else { &self.sg };
            for i in 0..s.len() {
                binary.push(self.u_name(side_t, i));
            }
            for &l in &s.leaves {
                cons.push(LinConstraint { tag: "(1)".into(), expr: self.lambda_path(side_t, l).plus(&LinExpr { terms: vec![], constant: -1.0 }), sense: Sense::Le });
            }
            for i in 0..s.len() {
                let u = LinExpr { terms: vec![(self.u_name(side_t, i), 1.0)], constant: 0.0 };
                let lam = self.lambda_expr(side_t, i);
                cons.push(LinConstraint { tag: "(2)".into(), expr: u.clone().plus(&lam.scaled(-0.5)), sense: Sense::Le });
                let mut e3 = u.plus(&lam.scaled(-s.m));
                e3.constant -= s.q;
                cons.push(LinConstraint { tag: "(3)".into(), expr: e3, sense: Sense::Ge });
            }
            if up {
                let mut e = match s.argmin {
                    Some(x) => self.lambda_path(side_t, x),
                    None => LinExpr::default(),
                };
                e.constant -= 1.0;
                cons.push(LinConstraint { tag: "(4)".into(), expr: e, sense: Sense::Ge });
            }
        }
        // #selected ≠ 1, through uR = [#selected ≥ 2]
        binary.push("uR".into());
        let total = self.sum_c(true, |_| true);
        let ur = LinExpr { terms: vec![("uR".into(), 1.0)], constant: 0.0 };
        cons.push(LinConstraint { tag: "(root)".into(), expr: ur.clone().plus(&total.scaled(-0.5)), sense: Sense::Le });
        let nl = self.st.leaves.len().max(1) as f64;
        cons.push(LinConstraint { tag: "(root)".into(), expr: total.plus(&ur.scaled(-nl)), sense: Sense::Le });

        obj.push(Component { name: "root".into(), is_b: false, expr: LinExpr { terms: vec![], constant: self.root_term } });
        for side_t in [true, false] {
            let s = if side_t { &self.st } else { &self.sg };
            let tag = if side_t { "T" } else { "G" };
            for i in 0..s.len() {
                let id = if side_t { &self.ids_t[s.verts[i]] } else { &self.ids_g[s.verts[i]] };
                if side_t {
                    let mut e = LinExpr::default();
                    for (p, &(a, _, w)) in self.pairs.iter().enumerate() {
                        if a == i {
                            e.add(self.a_name(p), w);
                        }
                    }
                    obj.push(Component { name: format!("F1[{id}]"), is_b: false, expr: e });
                }
                if up {
                    let mut e = LinExpr::default();
                    e.add(self.u_name(side_t, i), s.f2[i]);
                    obj.push(Component { name: format!("F2{tag}[{id}]"), is_b: false, expr: e });
                }
                let d = self.d_expr(side_t, i);
                let a = LinExpr { terms: vec![], constant: s.a[i] }.plus(&d.scaled(-s.a[i]));
                obj.push(Component { name: format!("A{tag}[{id}]"), is_b: false, expr: a });
                if up {
                    for v in (0..s.len()).filter(|&v| s.below_father[i][v]) {
                        let mut e = LinExpr::default();
                        for (p, &(a, b, _)) in self.pairs.iter().enumerate() {
                            if side_t && a == v {
                                e.add(self.a_name(p), self.sg.low[b] - s.low[i]);
                            }
                            if !side_t && b == v {
                                e.add(self.a_name(p), self.st.low[a] - s.low[i]);
                            }
                        }
                        let e = e.plus(&d.scaled(-self.k));
                        obj.push(Component { name: format!("B{tag}[{id}]"), is_b: true, expr: e });
                    }
                }
            }
        }
        let mut continuous = Vec::new();
        if self.linearized {
            continuous.push("z".to_string());
            for c in &obj {
                let e = LinExpr { terms: vec![("z".into(), 1.0)], constant: 0.0 }.plus(&c.expr.scaled(-1.0));
                cons.push(LinConstraint { tag: if c.is_b { "(6)".into() } else { "(5)".into() }, expr: e, sense: Sense::Ge });
            }
        }
        ProgramDump {
            direction: self.direction,
            penalty: self.penalty,
            root_pair: (self.ids_t[self.x0].clone(), self.ids_g[self.y0].clone()),
            binary,
            continuous,
            constraints: cons,
            objective: obj,
            k: self.k,
            collapse: self.collapses(),
            m_t: self.st.m,
            q_t: self.st.q,
            m_g: self.sg.m,
            q_g: self.sg.q,
        }
    }

    /// Σ c over the path from position l up to (not including) the subtree root.
    fn lambda_path(&self, side_t: bool, l: usize) -> LinExpr {
        let s = if side_t { &self.st } else { &self.sg };
        self.sum_c(side_t, |j| s.below[j][l])
    }

    /// Objective value of a selection, or None when it is not feasible.
    pub fn evaluate(&self, selected: &[(V, V)]) -> Option<f64> {
        let idx: Option<Vec<usize>> = selected
            .iter()
            .map(|&(x, y)| self.pairs.iter().position(|&(a, b, _)| self.st.verts[a] == x && self.sg.verts[b] == y))
            .collect();
        let idx = idx?;
        self.eval_idx(&idx)
    }

    fn eval_idx(&self, sel: &[usize]) -> Option<f64> {
        let terms = Terms { p: self };
        let up = terms.up();
        for (k, &p) in sel.iter().enumerate() {
            for &q in &sel[k + 1..] {
                let (a, b, _) = self.pairs[p];
                let (c, d, _) = self.pairs[q];
                if self.st.comp[a][c] || self.sg.comp[b][d] {
                    return None;
                }
            }
        }
        if sel.len() == 1 {
            return None;
        }
        let chi = self.chi(sel);
        let mut val = self.root_term;
        for &p in sel {
            val = val.max(self.pairs[p].2);
        }
        for side_t in [true, false] {
            let s = if side_t { &self.st } else { &self.sg };
            let key = |p: usize| if side_t { self.pairs[p].0 } else { self.pairs[p].1 };
            if up {
                let covered = s.argmin.is_some_and(|x| sel.iter().any(|&p| s.below[key(p)][x]));
                if !covered {
                    return None;
                }
            }
            for i in 0..s.len() {
                let lam = sel.iter().filter(|&&p| s.below[i][key(p)]).count();
                let d = sel.iter().filter(|&&p| s.comp[i][key(p)]).count();
                if up && lam >= 2 {
                    val = val.max(s.f2[i]);
                }
                if lam >= 2 && self.collapses() {
                    let (o, c) = if side_t { (&self.sg, chi.0[i]) } else { (&self.st, chi.1[i]) };
                    val = val.max((o.hts[c.unwrap()] - s.hts[i]).abs());
                }
                if d == 0 {
                    val = val.max(s.a[i]);
                    if up {
                        for &p in sel.iter().filter(|&&p| s.below_father[i][key(p)]) {
                            val = val.max(if side_t { terms.b_t(i, p) } else { terms.b_g(i, p) });
                        }
                    }
                }
            }
        }
        Some(val)
    }

    /// Every value the objective can take, sorted, at least the root term.
    fn candidates(&self) -> Vec<f64> {
        let up = self.direction == Direction::Up;
        let mut c = vec![self.root_term];
        c.extend(self.pairs.iter().map(|p| p.2));
        for s in [&self.st, &self.sg] {
            c.extend(s.a.iter().copied());
            if up {
                c.extend(s.f2.iter().copied());
            }
        }
        if up {
            for &(a, b, _) in &self.pairs {
                c.extend(self.st.low.iter().map(|l| self.sg.low[b] - l));
                c.extend(self.sg.low.iter().map(|l| self.st.low[a] - l));
            }
        }
        if self.collapses() {
            for a in &self.st.hts {
                c.extend(self.sg.hts.iter().map(|b| (a - b).abs()));
            }
        }
        c.retain(|&v| v >= self.root_term);
        c.sort_by(f64::total_cmp);
        c.dedup();
        c
    }

    /// Exact optimum by threshold search.
    pub fn solve_exact(&self) -> Result<SolveResult, SolveError> {
        self.solve_with_timeout(None)
    }

    pub fn solve_with_timeout(&self, timeout: Option<Duration>) -> Result<SolveResult, SolveError> {
        let start = Instant::now();
        if self.is_base_case() {
            return Ok(SolveResult { value: self.root_term, selected: vec![], nodes: 0, ms: 0.0 });
        }
        let (sel, nodes) = self.threshold_search(start, timeout)?;
        let value = self.eval_idx(&sel).expect("search returns feasible points");
        let mut selected: Vec<(V, V)> =
            sel.iter().map(|&p| (self.st.verts[self.pairs[p].0], self.sg.verts[self.pairs[p].1])).collect();
        selected.sort_unstable();
        Ok(SolveResult { value, selected, nodes, ms: start.elapsed().as_secs_f64() * 1e3 })
    }

    /// Selected pair indices of an optimum, and the search nodes used.
    fn threshold_search(&self, start: Instant, timeout: Option<Duration>) -> Result<(Vec<usize>, u64), SolveError> {
        let cands = self.candidates();
        let (mut lo, mut hi) = (0, cands.len());
        let mut best: Option<Vec<usize>> = None;
        let mut nodes = 0;
        if self.collapses() {
            // the collapse term only adds to the objective: the plain optimum bounds it
            // from below, and the plain optimum's selection is feasible
            let plain = MinMaxProgram { collapse: false, ..self.clone() };
            let (sel, n) = plain.threshold_search(start, timeout)?;
            nodes += n;
            let v0 = plain.eval_idx(&sel).expect("search returns feasible points");
            let v1 = self.eval_idx(&sel).expect("plain points stay feasible");
            lo = cands.partition_point(|&c| c < v0);
            hi = cands.partition_point(|&c| c < v1);
            best = Some(sel);
        }
        let mut search = Search::new(self, start, timeout);
        // smallest candidate with a feasible point
        while lo < hi {
            let mid = (lo + hi) / 2;
            match search.decide(cands[mid])? {
                Some(sel) => {
                    best = Some(sel);
                    hi = mid;
                }
                None => lo = mid + 1,
            }
        }
        Ok((best.ok_or(SolveError::Infeasible)?, nodes + search.nodes))
    }
}

/// Memo entries kept per decision before the memo is flushed; flushing only costs repeated work.
const MEMO_CAP: usize = 1 << 22;

/// Appends the membership bitset of `items` over `0..n`.
fn push_bits(key: &mut Vec<u8>, n: usize, items: &[usize]) {
    let at = key.len();
    key.resize(at + n.div_ceil(8), 0);
    for &i in items {
        key[at + i / 8] |= 1 << (i % 8);
    }
}

struct Search<'a> {
    p: &'a MinMaxProgram,
    nodes: u64,
    start: Instant,
    timeout: Option<Duration>,
}

struct State {
    sel: Vec<usize>,
    cov_t: Vec<u32>,
    cov_g: Vec<u32>,
    lam_t: Vec<u32>,
    lam_g: Vec<u32>,
}

impl<'a> Search<'a> {
    fn new(p: &'a MinMaxProgram, start: Instant, timeout: Option<Duration>) -> Search<'a> {
        Search { p, nodes: 0, start, timeout }
    }

    fn decide(&mut self, z: f64) -> Result<Option<Vec<usize>>, SolveError> {
        let p = self.p;
        let mut st = State {
            sel: vec![],
            cov_t: vec![0; p.st.len()],
            cov_g: vec![0; p.sg.len()],
            lam_t: vec![0; p.st.len()],
            lam_g: vec![0; p.sg.len()],
        };
        let mut seen = HashSet::new();
        Ok(if self.dfs(z, &mut st, &mut seen)? { Some(st.sel) } else { None })
    }

    fn apply(&self, st: &mut State, q: usize, sign: i32) {
        let (a, b, _) = self.p.pairs[q];
        let upd = |v: &mut u32| *v = (*v as i32 + sign) as u32;
        for i in 0..self.p.st.len() {
            if self.p.st.comp[i][a] {
                upd(&mut st.cov_t[i]);
            }
            if self.p.st.below[i][a] {
                upd(&mut st.lam_t[i]);
            }
        }
        for j in 0..self.p.sg.len() {
            if self.p.sg.comp[j][b] {
                upd(&mut st.cov_g[j]);
            }
            if self.p.sg.below[j][b] {
                upd(&mut st.lam_g[j]);
            }
        }
        if sign > 0 {
            st.sel.push(q);
        } else {
            st.sel.pop();
        }
    }

    /// Some Λ ≥ 2 vertex whose penalty exceeds z.
    fn penalty_broken(&self, z: f64, st: &State) -> bool {
        if self.p.direction == Direction::Down {
            return false;
        }
        (0..self.p.st.len()).any(|i| st.lam_t[i] >= 2 && self.p.st.f2[i] > z)
            || (0..self.p.sg.len()).any(|j| st.lam_g[j] >= 2 && self.p.sg.f2[j] > z)
    }

    /// Uncovered vertices that some feasible completion has to cover.
    fn must_cover(&self, z: f64, st: &State) -> (Vec<usize>, Vec<usize>) {
        let p = self.p;
        let terms = Terms { p };
        let up = terms.up();
        let mut mt = Vec::new();
        for i in 0..p.st.len() {
            if st.cov_t[i] > 0 {
                continue;
            }
            let b = up && st.sel.iter().any(|&q| p.st.below_father[i][p.pairs[q].0] && terms.b_t(i, q) > z);
            if p.st.a[i] > z || b || (up && p.st.argmin == Some(i)) {
                mt.push(i);
            }
        }
        let mut mg = Vec::new();
        for j in 0..p.sg.len() {
            if st.cov_g[j] > 0 {
                continue;
            }
            let b = up && st.sel.iter().any(|&q| p.sg.below_father[j][p.pairs[q].1] && terms.b_g(j, q) > z);
            if p.sg.a[j] > z || b || (up && p.sg.argmin == Some(j)) {
                mg.push(j);
            }
        }
        (mt, mg)
    }

    fn available(&self, z: f64, st: &State, q: usize) -> bool {
        let (a, b, w) = self.p.pairs[q];
        w <= z && st.cov_t[a] == 0 && st.cov_g[b] == 0
    }

    /// Adding pair `q` keeps every collapse term it raises within z.
    fn collapse_fits(&self, z: f64, st: &State, ct: &[Option<usize>], cg: &[Option<usize>], q: usize) -> bool {
        let p = self.p;
        let (a, b, _) = p.pairs[q];
        let fits_t = (0..p.st.len()).all(|i| {
            i == a || st.lam_t[i] == 0 || !p.st.below[i][a] || p.sg.hts[p.sg.lca[ct[i].unwrap()][b]] - p.st.hts[i] <= z
        });
        fits_t
            && (0..p.sg.len()).all(|j| {
                j == b || st.lam_g[j] == 0 || !p.sg.below[j][b] || p.st.hts[p.st.lca[cg[j].unwrap()][a]] - p.sg.hts[j] <= z
            })
    }

    fn dfs(&mut self, z: f64, st: &mut State, seen: &mut HashSet<Vec<u8>>) -> Result<bool, SolveError> {
        self.nodes += 1;
        if self.nodes % 1024 == 0 {
            if let Some(lim) = self.timeout {
                if self.start.elapsed() > lim {
                    return Err(SolveError::Timeout);
                }
            }
        }
        if self.penalty_broken(z, st) {
            return Ok(false);
        }
        let p = self.p;
        let (mt, mg) = self.must_cover(z, st);
        // the future depends only on the two vertex sets and what is still owed
        let (nt_len, ng_len) = (p.st.len(), p.sg.len());
        let mut key = Vec::with_capacity(2 * (nt_len + ng_len) / 8 + 8);
        let set_t: Vec<usize> = st.sel.iter().map(|&q| p.pairs[q].0).collect();
        let set_g: Vec<usize> = st.sel.iter().map(|&q| p.pairs[q].1).collect();
        push_bits(&mut key, nt_len, &set_t);
        push_bits(&mut key, ng_len, &set_g);
        push_bits(&mut key, nt_len, &mt);
        push_bits(&mut key, ng_len, &mg);
        // collapsed vertices whose partner LCA is still too low need a pair below them
        let (mut nt, mut ng) = (Vec::new(), Vec::new());
        let chis = p.collapses().then(|| p.chi(&st.sel));
        if let Some((ct, cg)) = &chis {
            for (side_t, chi, out) in [(true, ct, &mut nt), (false, cg, &mut ng)] {
                let (s, o) = if side_t { (&p.st, &p.sg) } else { (&p.sg, &p.st) };
                let lam = if side_t { &st.lam_t } else { &st.lam_g };
                for i in 0..s.len() {
                    if lam[i] < 2 {
                        continue;
                    }
                    let up = o.hts[chi[i].unwrap()] - s.hts[i];
                    if up > z {
                        return Ok(false);
                    }
                    if -up > z {
                        out.push(i);
                    }
                }
            }
            for c in ct.iter().chain(cg) {
                let c = c.map_or(u32::MAX, |c| c as u32);
                if nt_len.max(ng_len) < 255 {
                    key.push(c.min(255) as u8);
                } else {
                    key.extend(c.to_le_bytes());
                }
            }
        }
        if seen.len() >= MEMO_CAP {
            seen.clear();
        }
        if !seen.insert(key) {
            return Ok(false);
        }
        // pairs that keep every term within z once added
        let usable: Vec<bool> = (0..p.pairs.len())
            .map(|q| self.available(z, st, q) && chis.as_ref().is_none_or(|(ct, cg)| self.collapse_fits(z, st, ct, cg, q)))
            .collect();
        let pick = |ok: &dyn Fn(usize, usize) -> bool| -> Vec<usize> {
            (0..p.pairs.len()).filter(|&q| usable[q] && ok(p.pairs[q].0, p.pairs[q].1)).collect()
        };
        let options: Vec<usize> = if mt.is_empty() && mg.is_empty() && nt.is_empty() && ng.is_empty() {
            if st.sel.len() != 1 {
                return Ok(true);
            }
            pick(&|_, _| true)
        } else {
            // the constrained vertex with the fewest ways to satisfy it; χ only climbs
            // along ancestors, so a set lifts it far enough iff one of its pairs does
            let lifts_t = |i: usize, a: usize, b: usize| {
                a == i || chis.as_ref().is_some_and(|(ct, _)| p.sg.hts[p.sg.lca[ct[i].unwrap()][b]] >= p.st.hts[i] - z)
            };
            let lifts_g = |j: usize, a: usize, b: usize| {
                b == j || chis.as_ref().is_some_and(|(_, cg)| p.st.hts[p.st.lca[cg[j].unwrap()][a]] >= p.sg.hts[j] - z)
            };
            let opts = mt
                .iter()
                .map(|&i| pick(&|a, _| p.st.comp[i][a]))
                .chain(mg.iter().map(|&j| pick(&|_, b| p.sg.comp[j][b])))
                .chain(nt.iter().map(|&i| pick(&|a, b| p.st.below[i][a] && lifts_t(i, a, b))))
                .chain(ng.iter().map(|&j| pick(&|a, b| p.sg.below[j][b] && lifts_g(j, a, b))));
            let mut best: Option<Vec<usize>> = None;
            for o in opts {
                if best.as_ref().is_none_or(|b| o.len() < b.len()) {
                    let empty = o.is_empty();
                    best = Some(o);
                    if empty {
                        break;
                    }
                }
            }
            best.unwrap()
        };
        for q in options {
            self.apply(st, q, 1);
            if self.dfs(z, st, seen)? {
                return Ok(true);
            }
            self.apply(st, q, -1);
        }
        Ok(false)
    }
}
