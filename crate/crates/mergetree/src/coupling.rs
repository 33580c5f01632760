//! Couplings between two merge trees, their auxiliary maps and costs.

use serde::{Deserialize, Serialize};

use crate::error::CouplingError;
use crate::tree::{MergeTree, V};

/// A validated set of pairs `(t-vertex, g-vertex)`, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coupling {
    pairs: Vec<(V, V)>,
}

/// On-disk coupling format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingFile {
    pub pairs: Vec<(String, String)>,
}

impl Coupling {
    /// Wraps pairs without checking (C1)-(C4). Callers that build couplings
    /// by construction use this; everything else goes through `validate`.
    pub fn unchecked(mut pairs: Vec<(V, V)>) -> Coupling {
        pairs.sort_unstable();
        pairs.dedup();
        Coupling { pairs }
    }

    pub fn validate(t: &MergeTree, g: &MergeTree, pairs: &[(V, V)]) -> Result<Coupling, CouplingError> {
        let mut errs = Vec::new();
        if pairs.is_empty() {
            return Err(CouplingError::Empty);
        }
        for &(a, b) in pairs {
            if a >= t.len() {
                return Err(CouplingError::UnknownVertex(format!("#{a}")));
            }
            if b >= g.len() {
                return Err(CouplingError::UnknownVertex(format!("#{b}")));
            }
        }
        let mut seen_t = vec![false; t.len()];
        let mut seen_g = vec![false; g.len()];
        for &(a, b) in pairs {
            if std::mem::replace(&mut seen_t[a], true) {
                errs.push(CouplingError::C2(t.id(a).to_string()));
            }
            if std::mem::replace(&mut seen_g[b], true) {
                errs.push(CouplingError::C2(g.id(b).to_string()));
            }
        }
        for i in 0..pairs.len() {
            for j in i + 1..pairs.len() {
                let ((a, b), (c, d)) = (pairs[i], pairs[j]);
                if t.lt(a, c) != g.lt(b, d) || t.lt(c, a) != g.lt(d, b) {
                    errs.push(CouplingError::C3(t.id(a).into(), g.id(b).into(), t.id(c).into(), g.id(d).into()));
                }
            }
        }
        let maximal: Vec<(V, V)> = pairs
            .iter()
            .copied()
            .filter(|&(a, b)| !pairs.iter().any(|&(c, d)| t.lt(a, c) || g.lt(b, d)))
            .collect();
        if maximal.len() != 1 {
            errs.push(CouplingError::C1(
                maximal.iter().map(|&(a, b)| (t.id(a).to_string(), g.id(b).to_string())).collect(),
            ));
        }
        let coupled_t: Vec<bool> = seen_t;
        let coupled_g: Vec<bool> = seen_g;
        for (tree, coupled) in [(t, &coupled_t), (g, &coupled_g)] {
            let lam = lambda_sets(tree, coupled);
            for v in 0..tree.len() {
                if coupled[v] && lam[v].len() == 1 {
                    errs.push(CouplingError::C4 { vertex: tree.id(v).into(), witness: tree.id(lam[v][0]).into() });
                }
            }
        }
        match errs.len() {
            0 => Ok(Coupling::unchecked(pairs.to_vec())),
            1 => Err(errs.pop().unwrap()),
            _ => Err(CouplingError::Many(errs)),
        }
    }

    pub fn from_ids(t: &MergeTree, g: &MergeTree, pairs: &[(&str, &str)]) -> Result<Coupling, CouplingError> {
        let mut out = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            let a = t.vertex(a).map_err(|_| CouplingError::UnknownVertex(a.to_string()))?;
            let b = g.vertex(b).map_err(|_| CouplingError::UnknownVertex(b.to_string()))?;
            out.push((a, b));
        }
        Coupling::validate(t, g, &out)
    }

    pub fn from_file(t: &MergeTree, g: &MergeTree, file: &CouplingFile) -> Result<Coupling, CouplingError> {
        let refs: Vec<(&str, &str)> = file.pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        Coupling::from_ids(t, g, &refs)
    }

    pub fn to_file(&self, t: &MergeTree, g: &MergeTree) -> CouplingFile {
        CouplingFile { pairs: self.pairs.iter().map(|&(a, b)| (t.id(a).to_string(), g.id(b).to_string())).collect() }
    }

    pub fn pairs(&self) -> &[(V, V)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn transpose(&self) -> Coupling {
        Coupling::unchecked(self.pairs.iter().map(|&(a, b)| (b, a)).collect())
    }

    /// The maximal pair.
    pub fn max_pair(&self, t: &MergeTree) -> (V, V) {
        *self.pairs.iter().max_by(|x, y| t.height(x.0).total_cmp(&t.height(y.0))).expect("nonempty coupling")
    }
}

/// For each vertex, the maximal coupled vertices strictly below it.
pub fn lambda_sets(t: &MergeTree, coupled: &[bool]) -> Vec<Vec<V>> {
    let mut lam: Vec<Vec<V>> = vec![Vec::new(); t.len()];
    for &v in t.preorder().iter().rev() {
        let mut acc = Vec::new();
        for &c in t.children(v) {
            if coupled[c] {
                acc.push(c);
            } else {
                acc.extend(lam[c].iter().copied());
            }
        }
        acc.sort_unstable();
        lam[v] = acc;
    }
    lam
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Coupled,
    Unused,
    Deleted,
}

/// Per-vertex data for one side of a coupling. Opposite-tree vertices in `chi`, `eta`, `partner`.
#[derive(Debug, Clone, PartialEq)]
pub struct SideContext {
    pub class: Vec<Class>,
    pub partner: Vec<Option<V>>,
    pub lambda: Vec<Vec<V>>,
    pub phi: Vec<Option<V>>,
    pub phi_fallback: Vec<bool>,
    pub delta: Vec<Option<V>>,
    pub chi: Vec<Option<V>>,
    pub eta: Vec<Option<V>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingContext<'a> {
    pub t: &'a MergeTree,
    pub g: &'a MergeTree,
    pub coupling: Coupling,
    pub side_t: SideContext,
    pub side_g: SideContext,
}

fn side(x: &MergeTree, y: &MergeTree, pairs: &[(V, V)]) -> SideContext {
    let n = x.len();
    let mut partner = vec![None; n];
    for &(a, b) in pairs {
        partner[a] = Some(b);
    }
    let coupled: Vec<bool> = partner.iter().map(Option::is_some).collect();
    let lambda = lambda_sets(x, &coupled);
    let (top, top_partner) = *pairs.iter().max_by(|p, q| x.height(p.0).total_cmp(&x.height(q.0))).unwrap();
    let class: Vec<Class> = (0..n)
        .map(|v| {
            if coupled[v] {
                Class::Coupled
            } else if lambda[v].len() == 1 {
                Class::Unused
            } else {
                Class::Deleted
            }
        })
        .collect();
    // gamma(u): lowest opposite vertex coupled strictly below u
    let gamma = |u: V| -> Option<V> {
        pairs
            .iter()
            .filter(|&&(a, _)| x.lt(a, u))
            .map(|&(_, b)| b)
            .min_by(|&p, &q| y.height(p).total_cmp(&y.height(q)).then(p.cmp(&q)))
    };
    let mut phi = vec![None; n];
    let mut phi_fallback = vec![false; n];
    let mut eta = vec![None; n];
    let mut delta = vec![None; n];
    let mut chi = vec![None; n];
    for v in 0..n {
        match x.ancestors(v).find(|&u| coupled[u] || !lambda[u].is_empty()) {
            Some(u) => {
                phi[v] = Some(u);
                // a coupled ancestor with nothing coupled below ends the search too
                phi_fallback[v] = lambda[u].is_empty();
                eta[v] = if lambda[u].is_empty() { partner[u] } else { gamma(u) };
            }
            None => {
                phi[v] = Some(top);
                phi_fallback[v] = true;
                eta[v] = Some(top_partner);
            }
        }
        delta[v] = std::iter::once(v).chain(x.ancestors(v)).find(|&u| coupled[u]);
        if !lambda[v].is_empty() {
            let images: Vec<V> = lambda[v].iter().map(|&u| partner[u].unwrap()).collect();
            chi[v] = y.lca_all(&images);
        }
    }
    SideContext { class, partner, lambda, phi, phi_fallback, delta, chi, eta }
}

impl<'a> CouplingContext<'a> {
    pub fn new(t: &'a MergeTree, g: &'a MergeTree, c: &Coupling) -> CouplingContext<'a> {
        let tr: Vec<(V, V)> = c.pairs.iter().map(|&(a, b)| (b, a)).collect();
        CouplingContext { t, g, coupling: c.clone(), side_t: side(t, g, &c.pairs), side_g: side(g, t, &tr) }
    }

    pub fn transposed(&self) -> CouplingContext<'a> {
        CouplingContext::new(self.g, self.t, &self.coupling.transpose())
    }

    pub fn side(&self, s: Side) -> (&MergeTree, &MergeTree, &SideContext) {
        match s {
            Side::T => (self.t, self.g, &self.side_t),
            Side::G => (self.g, self.t, &self.side_g),
        }
    }

    pub fn vertex_cost(&self, s: Side, v: V) -> (f64, CostCase) {
        let (x, y, c) = self.side(s);
        match c.class[v] {
            Class::Coupled => ((x.height(v) - y.height(c.partner[v].unwrap())).abs(), CostCase::Couple),
            Class::Unused => (0.0, CostCase::UnusedZero),
            Class::Deleted if c.lambda[v].is_empty() => {
                let half = 0.5 * (x.height(c.phi[v].unwrap()) - x.height(v));
                let up = y.height(c.eta[v].unwrap()) - x.height(v);
                if half >= up {
                    (half, CostCase::DeleteHalving)
                } else {
                    (up, CostCase::DeleteEta)
                }
            }
            Class::Deleted => ((x.height(v) - y.height(c.chi[v].unwrap())).abs(), CostCase::DeleteMany),
        }
    }

    pub fn report(&self) -> CostReport {
        let mk = |s: Side| -> Vec<VertexCost> {
            let (x, _, c) = self.side(s);
            (0..x.len())
                .map(|v| {
                    let (cost, case) = self.vertex_cost(s, v);
                    VertexCost { id: x.id(v).to_string(), cost, case, phi_fallback: c.phi_fallback[v] && c.class[v] == Class::Deleted }
                })
                .collect()
        };
        let t = mk(Side::T);
        let g = mk(Side::G);
        let norm_inf = t.iter().chain(g.iter()).map(|c| c.cost).fold(0.0, f64::max);
        let phi_fallback = t.iter().chain(g.iter()).any(|c| c.phi_fallback);
        CostReport { t, g, norm_inf, phi_fallback }
    }

    pub fn norm(&self) -> f64 {
        let mut m: f64 = 0.0;
        for s in [Side::T, Side::G] {
            let (x, _, _) = self.side(s);
            for v in 0..x.len() {
                m = m.max(self.vertex_cost(s, v).0);
            }
        }
        m
    }

    /// Lowest vertex strictly below the maximal coupled vertex is coupled, on both sides.
    pub fn is_special(&self) -> bool {
        [Side::T, Side::G].into_iter().all(|s| {
            let (x, _, c) = self.side(s);
            let top = (0..x.len()).filter(|&v| c.class[v] == Class::Coupled).max_by(|&a, &b| x.height(a).total_cmp(&x.height(b))).unwrap();
            let below = x
                .subtree(top)
                .into_iter()
                .filter(|&v| v != top)
                .min_by(|&a, &b| x.height(a).total_cmp(&x.height(b)).then(a.cmp(&b)));
            match below {
                None => true,
                Some(v) => c.class[v] == Class::Coupled,
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    T,
    G,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostCase {
    Couple,
    DeleteHalving,
    DeleteEta,
    DeleteMany,
    UnusedZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexCost {
    pub id: String,
    pub cost: f64,
    pub case: CostCase,
    pub phi_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub t: Vec<VertexCost>,
    pub g: Vec<VertexCost>,
    pub norm_inf: f64,
    pub phi_fallback: bool,
}

/// ‖C‖∞ without building a report.
pub fn coupling_norm(t: &MergeTree, g: &MergeTree, c: &Coupling) -> f64 {
    CouplingContext::new(t, g, c).norm()
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
    fn t_b() -> MergeTree {
        tree(&[("x", 0.0, Some("m")), ("v", 0.5, Some("m")), ("m", 1.0, None)]).unwrap()
    }
    fn g_b() -> MergeTree {
        tree(&[("x'", 0.0, Some("r'")), ("w'", 0.8, Some("r'")), ("r'", 1.0, None)]).unwrap()
    }

    #[test]
    fn validation_examples() {
        let (t, g) = (t_a(), g_a());
        assert!(Coupling::from_ids(&t, &g, &[("a", "a'"), ("b", "b'"), ("r", "r'")]).is_ok());
        let e = Coupling::from_ids(&t, &g, &[("a", "a'"), ("b", "b'")]).unwrap_err();
        assert!(matches!(e, CouplingError::C1(ref m) if m.len() == 2));
        let e = Coupling::from_ids(&t, &g, &[("a", "a'"), ("r", "r'")]).unwrap_err();
        assert_eq!(
            e,
            CouplingError::Many(vec![
                CouplingError::C4 { vertex: "r".into(), witness: "a".into() },
                CouplingError::C4 { vertex: "r'".into(), witness: "a'".into() },
            ])
        );
        let e = Coupling::from_ids(&t, &g, &[("a", "a'"), ("a", "b'"), ("r", "r'")]).unwrap_err();
        assert!(e.to_string().contains("C2"));
        let e = Coupling::from_ids(&t, &g, &[("a", "r'"), ("r", "a'")]).unwrap_err();
        assert!(e.to_string().contains("C3"));
    }

    #[test]
    fn context_single_leaf_pair() {
        let (t, g) = (t_a(), g_a());
        let c = Coupling::from_ids(&t, &g, &[("a", "a'")]).unwrap();
        let ctx = CouplingContext::new(&t, &g, &c);
        let b = t.vertex("b").unwrap();
        let r = t.vertex("r").unwrap();
        assert_eq!(ctx.side_t.class[b], Class::Deleted);
        assert!(ctx.side_t.lambda[b].is_empty());
        assert_eq!(ctx.side_t.phi[b], Some(r));
        assert_eq!(ctx.side_t.eta[b], Some(g.vertex("a'").unwrap()));
        assert_eq!(ctx.side_t.class[r], Class::Unused);
    }

    #[test]
    fn context_full_matching() {
        let (t, g) = (t_a(), g_a());
        let c = Coupling::from_ids(&t, &g, &[("a", "a'"), ("b", "b'"), ("r", "r'")]).unwrap();
        let ctx = CouplingContext::new(&t, &g, &c);
        let r = t.vertex("r").unwrap();
        assert_eq!(ctx.side_t.lambda[r], vec![t.vertex("a").unwrap(), t.vertex("b").unwrap()]);
        assert!(ctx.side_t.class.iter().all(|&k| k == Class::Coupled));
        assert_eq!(ctx.vertex_cost(Side::T, r), (1.0, CostCase::Couple));
        assert_eq!(ctx.vertex_cost(Side::T, t.vertex("a").unwrap()).0, 0.0);
        assert_eq!(ctx.report().norm_inf, 1.0);
        assert!(ctx.is_special());
    }

    pub(crate) fn tb_pairs(t: &MergeTree, g: &MergeTree) -> Coupling {
        Coupling::unchecked(vec![(t.vertex("x").unwrap(), g.vertex("x'").unwrap()), (t.root(), g.root())])
    }

    #[test]
    fn two_step_deletions() {
        let (t, g) = (t_b(), g_b());
        // #Lambda(m) = 1, so (C4) rejects this set; its costs are still well defined.
        assert!(Coupling::from_ids(&t, &g, &[("x", "x'"), ("m", "r'")]).is_err());
        let c = tb_pairs(&t, &g);
        let ctx = CouplingContext::new(&t, &g, &c);
        let v = t.vertex("v").unwrap();
        let w = g.vertex("w'").unwrap();
        assert_eq!(ctx.side_t.phi[v], Some(t.vertex("m").unwrap()));
        assert_eq!(ctx.side_t.eta[v], Some(g.vertex("x'").unwrap()));
        assert_eq!(ctx.side_g.phi[w], Some(g.vertex("r'").unwrap()));
        assert_eq!(ctx.side_g.eta[w], Some(t.vertex("x").unwrap()));
        let (cv, kv) = ctx.vertex_cost(Side::T, v);
        assert!((cv - 0.25).abs() < 1e-12);
        assert_eq!(kv, CostCase::DeleteHalving);
        let (cw, _) = ctx.vertex_cost(Side::G, w);
        assert!((cw - 0.1).abs() < 1e-12);
        assert!((ctx.report().norm_inf - 0.25).abs() < 1e-12);
    }

    #[test]
    fn identity_and_special() {
        let t = t_a();
        let id: Vec<(V, V)> = (0..t.len()).map(|v| (v, v)).collect();
        let c = Coupling::validate(&t, &t, &id).unwrap();
        assert_eq!(coupling_norm(&t, &t, &c), 0.0);
        let g = g_a();
        let c = Coupling::from_ids(&t, &g, &[("b", "b'")]).unwrap();
        assert!(CouplingContext::new(&t, &g, &c).is_special());
        let (tb, gb) = (t_b(), g_b());
        let c = Coupling::from_ids(&tb, &gb, &[("v", "w'"), ("m", "r'")]);
        // (v,w'),(m,r') has #Lambda(m) = 1 and is rejected; the predicate
        // is exercised on the unchecked pair set instead.
        assert!(c.is_err());
        let raw = Coupling::unchecked(vec![(tb.vertex("v").unwrap(), gb.vertex("w'").unwrap()), (tb.root(), gb.root())]);
        assert!(!CouplingContext::new(&tb, &gb, &raw).is_special());
    }

    #[test]
    fn root_only_uses_fallback() {
        let (t, g) = (t_a(), g_a());
        let c = Coupling::from_ids(&t, &g, &[("r", "r'")]).unwrap();
        let ctx = CouplingContext::new(&t, &g, &c);
        let rep = ctx.report();
        assert!(rep.phi_fallback);
        // a: max{(2-0)/2, 3-0} = 3
        assert_eq!(rep.t[t.vertex("a").unwrap()].cost, 3.0);
    }
}
