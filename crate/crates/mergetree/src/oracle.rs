//! Exhaustive coupling enumeration for small trees: exact distance, rooted and
//! special rooted families, and an empirical check of the decomposition identity.

use std::collections::HashMap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::coupling::{Coupling, CouplingContext, Side};
use crate::error::OracleError;
use crate::tree::{MergeTree, TAU, V};

pub const DEFAULT_CAP: usize = 5;

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    /// Maximum leaf count per tree.
    pub cap: usize,
    pub timeout: Option<Duration>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { cap: DEFAULT_CAP, timeout: Some(Duration::from_secs(60)) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    All,
    Rooted,
    RootedSpecial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMember {
    pub coupling: Coupling,
    pub norm: f64,
    pub special: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingFamily {
    pub kind: FamilyKind,
    pub members: Vec<FamilyMember>,
    /// Minimum norm, `inf` for an empty family.
    pub min: f64,
    pub minimizers: Vec<Coupling>,
}

impl CouplingFamily {
    fn build(kind: FamilyKind, mut members: Vec<FamilyMember>) -> CouplingFamily {
        members.sort_by(|a, b| a.coupling.pairs().cmp(b.coupling.pairs()));
        let min = members.iter().map(|m| m.norm).fold(f64::INFINITY, f64::min);
        let minimizers =
            members.iter().filter(|m| m.norm <= min + near(min)).map(|m| m.coupling.clone()).collect();
        CouplingFamily { kind, members, min, minimizers }
    }

    /// Lexicographically smallest minimizer.
    pub fn best(&self) -> Option<&Coupling> {
        self.minimizers.first()
    }
}

fn near(x: f64) -> f64 {
    1e-12 * (1.0 + x.abs())
}

type Family = Rc<Vec<Vec<(V, V)>>>;

/// Memoised rooted families over a pair of trees.
pub struct Enumerator<'a> {
    t: &'a MergeTree,
    g: &'a MergeTree,
    memo: HashMap<(V, V), Family>,
    start: Instant,
    timeout: Option<Duration>,
}

impl<'a> Enumerator<'a> {
    pub fn new(t: &'a MergeTree, g: &'a MergeTree, cfg: &OracleConfig) -> Result<Enumerator<'a>, OracleError> {
        if t.leaf_count() > cfg.cap || g.leaf_count() > cfg.cap {
            return Err(OracleError::CapExceeded { leaves_t: t.leaf_count(), leaves_g: g.leaf_count(), cap: cfg.cap });
        }
        Ok(Enumerator { t, g, memo: HashMap::new(), start: Instant::now(), timeout: cfg.timeout })
    }

    fn tick(&self) -> Result<(), OracleError> {
        match self.timeout {
            Some(lim) if self.start.elapsed() > lim => Err(OracleError::Timeout(lim.as_secs_f64())),
            _ => Ok(()),
        }
    }

    /// Antichains of pairs strictly below (x, y), vertices pairwise incomparable on both sides.
    fn antichains(&self, x: V, y: V) -> Vec<Vec<(V, V)>> {
        let (t, g) = (self.t, self.g);
        let cands: Vec<(V, V)> = t
            .subtree(x)
            .into_iter()
            .filter(|&a| a != x)
            .flat_map(|a| g.subtree(y).into_iter().filter(move |&b| b != y).map(move |b| (a, b)))
            .collect();
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(
            t: &MergeTree,
            g: &MergeTree,
            cands: &[(V, V)],
            i: usize,
            cur: &mut Vec<(V, V)>,
            out: &mut Vec<Vec<(V, V)>>,
        ) {
            if i == cands.len() {
                out.push(cur.clone());
                return;
            }
            rec(t, g, cands, i + 1, cur, out);
            let (a, b) = cands[i];
            if cur.iter().all(|&(c, d)| !t.comparable(a, c) && !g.comparable(b, d)) {
                cur.push((a, b));
                rec(t, g, cands, i + 1, cur, out);
                cur.pop();
            }
        }
        rec(self.t, self.g, &cands, 0, &mut cur, &mut out);
        out
    }

    /// All couplings of the subtrees at x and y that contain (x, y).
    pub fn rooted(&mut self, x: V, y: V) -> Result<Family, OracleError> {
        if let Some(f) = self.memo.get(&(x, y)) {
            return Ok(f.clone());
        }
        self.tick()?;
        let mut fam: Vec<Vec<(V, V)>> = Vec::new();
        for ac in self.antichains(x, y) {
            if ac.len() == 1 {
                continue;
            }
            let mut partial: Vec<Vec<(V, V)>> = vec![vec![(x, y)]];
            for &(a, b) in &ac {
                let sub = self.rooted(a, b)?;
                let mut next = Vec::with_capacity(partial.len() * sub.len());
                for p in &partial {
                    for s in sub.iter() {
                        let mut q = p.clone();
                        q.extend_from_slice(s);
                        next.push(q);
                    }
                }
                partial = next;
                self.tick()?;
            }
            for mut p in partial {
                p.sort_unstable();
                fam.push(p);
            }
        }
        let fam = Rc::new(fam);
        self.memo.insert((x, y), fam.clone());
        Ok(fam)
    }
}

/// Subtree pair with index maps back into the full trees.
struct SubPair {
    t: MergeTree,
    g: MergeTree,
    to_t: Vec<Option<V>>,
    to_g: Vec<Option<V>>,
}

impl SubPair {
    fn new(t: &MergeTree, g: &MergeTree, x: V, y: V) -> SubPair {
        let (st, sg) = (t.subtree_tree(x), g.subtree_tree(y));
        let to_t = (0..t.len()).map(|v| st.vertex(t.id(v)).ok()).collect();
        let to_g = (0..g.len()).map(|v| sg.vertex(g.id(v)).ok()).collect();
        SubPair { t: st, g: sg, to_t, to_g }
    }

    fn member(&self, pairs: &[(V, V)]) -> FamilyMember {
        let local: Vec<(V, V)> = pairs.iter().map(|&(a, b)| (self.to_t[a].unwrap(), self.to_g[b].unwrap())).collect();
        let c = Coupling::unchecked(local);
        let ctx = CouplingContext::new(&self.t, &self.g, &c);
        FamilyMember { coupling: Coupling::unchecked(pairs.to_vec()), norm: ctx.norm(), special: ctx.is_special() }
    }
}

fn full_member(t: &MergeTree, g: &MergeTree, pairs: &[(V, V)]) -> FamilyMember {
    let c = Coupling::unchecked(pairs.to_vec());
    let ctx = CouplingContext::new(t, g, &c);
    FamilyMember { norm: ctx.norm(), special: ctx.is_special(), coupling: c }
}

/// Complete, deterministic enumeration of the requested family on the full trees.
pub fn enumerate_couplings(
    t: &MergeTree,
    g: &MergeTree,
    kind: FamilyKind,
    cfg: &OracleConfig,
) -> Result<CouplingFamily, OracleError> {
    let mut en = Enumerator::new(t, g, cfg)?;
    let mut members = Vec::new();
    let roots: Vec<(V, V)> = match kind {
        FamilyKind::All => (0..t.len()).flat_map(|x| (0..g.len()).map(move |y| (x, y))).collect(),
        _ => vec![(t.root(), g.root())],
    };
    for (x, y) in roots {
        for p in en.rooted(x, y)?.iter() {
            let m = full_member(t, g, p);
            if kind != FamilyKind::RootedSpecial || m.special {
                members.push(m);
            }
        }
        en.tick()?;
    }
    Ok(CouplingFamily::build(kind, members))
}

/// Exact interleaving distance as the minimum coupling norm, with the
/// lexicographically smallest minimizer.
pub fn exact_interleaving(t: &MergeTree, g: &MergeTree, cfg: &OracleConfig) -> Result<(f64, Coupling), OracleError> {
    let fam = enumerate_couplings(t, g, FamilyKind::All, cfg)?;
    let best = fam.best().expect("the root pair alone is always a coupling").clone();
    Ok((fam.min, best))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub exact: f64,
    /// min over antichains of the norm of the special extension.
    pub special_min: f64,
    /// min over antichains of the restricted cost of the minimal extension.
    pub lower: f64,
    pub antichains: usize,
    /// Antichains left out because some pair has no special rooted coupling.
    pub skipped: usize,
    /// Whether every used special minimizer is also a rooted minimizer.
    pub minimal_special: bool,
    pub equal: bool,
    pub lower_ok: bool,
}

impl DecompositionReport {
    pub fn check(&self) -> Result<(), OracleError> {
        if !self.equal {
            return Err(OracleError::Decomposition(format!(
                "special extension min {} differs from exact {}",
                self.special_min, self.exact
            )));
        }
        if !self.lower_ok {
            return Err(OracleError::Decomposition(format!("lower value {} above exact {}", self.lower, self.exact)));
        }
        Ok(())
    }
}

/// Minimizers of the rooted and rooted-special families of every subtree pair.
struct SubMinimizers {
    rooted: HashMap<(V, V), (f64, Vec<(V, V)>)>,
    special: HashMap<(V, V), (f64, Vec<(V, V)>)>,
}

fn sub_minimizers(en: &mut Enumerator, t: &MergeTree, g: &MergeTree) -> Result<SubMinimizers, OracleError> {
    let mut rooted = HashMap::new();
    let mut special = HashMap::new();
    for x in 0..t.len() {
        for y in 0..g.len() {
            let sp = SubPair::new(t, g, x, y);
            let fam = en.rooted(x, y)?;
            let mut all = Vec::new();
            let mut sp_members = Vec::new();
            for p in fam.iter() {
                let m = sp.member(p);
                if m.special {
                    sp_members.push(m.clone());
                }
                all.push(m);
            }
            let a = CouplingFamily::build(FamilyKind::Rooted, all);
            rooted.insert((x, y), (a.min, a.best().unwrap().pairs().to_vec()));
            let s = CouplingFamily::build(FamilyKind::RootedSpecial, sp_members);
            if let Some(b) = s.best() {
                special.insert((x, y), (s.min, b.pairs().to_vec()));
            }
        }
    }
    Ok(SubMinimizers { rooted, special })
}

/// Antichains of V_T x V_G with at least one pair.
fn all_antichains(t: &MergeTree, g: &MergeTree) -> Vec<Vec<(V, V)>> {
    let cands: Vec<(V, V)> = (0..t.len()).flat_map(|a| (0..g.len()).map(move |b| (a, b))).collect();
    let mut out = Vec::new();
    fn rec(t: &MergeTree, g: &MergeTree, cands: &[(V, V)], i: usize, cur: &mut Vec<(V, V)>, out: &mut Vec<Vec<(V, V)>>) {
        if i == cands.len() {
            if !cur.is_empty() {
                out.push(cur.clone());
            }
            return;
        }
        rec(t, g, cands, i + 1, cur, out);
        let (a, b) = cands[i];
        if cur.iter().all(|&(c, d)| !t.comparable(a, c) && !g.comparable(b, d)) {
            cur.push((a, b));
            rec(t, g, cands, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(t, g, &cands, 0, &mut Vec::new(), &mut out);
    out
}

fn extension(t: &MergeTree, g: &MergeTree, ac: &[(V, V)], table: &HashMap<(V, V), (f64, Vec<(V, V)>)>) -> Option<Vec<(V, V)>> {
    let mut pairs = Vec::new();
    if ac.len() >= 2 {
        let xs: Vec<V> = ac.iter().map(|p| p.0).collect();
        let ys: Vec<V> = ac.iter().map(|p| p.1).collect();
        pairs.push((t.lca_all(&xs).unwrap(), g.lca_all(&ys).unwrap()));
    }
    for p in ac {
        pairs.extend_from_slice(&table.get(p)?.1);
    }
    Some(pairs)
}

/// Largest cost over vertices that are coupled or have a coupled vertex below.
fn restricted_cost(ctx: &CouplingContext) -> f64 {
    let mut m: f64 = 0.0;
    for s in [Side::T, Side::G] {
        let (x, _, c) = ctx.side(s);
        for v in 0..x.len() {
            if c.partner[v].is_some() || !c.lambda[v].is_empty() {
                m = m.max(ctx.vertex_cost(s, v).0);
            }
        }
    }
    m
}

/// Checks both decomposition statements against the exact value.
pub fn verify_decomposition(t: &MergeTree, g: &MergeTree, cfg: &OracleConfig) -> Result<DecompositionReport, OracleError> {
    let (exact, _) = exact_interleaving(t, g, cfg)?;
    let mut en = Enumerator::new(t, g, cfg)?;
    let mins = sub_minimizers(&mut en, t, g)?;
    let minimal_special =
        mins.special.iter().all(|(k, (v, _))| *v <= mins.rooted[k].0 + near(*v));
    let mut special_min = f64::INFINITY;
    let mut lower = f64::INFINITY;
    let mut skipped = 0;
    let acs = all_antichains(t, g);
    for ac in &acs {
        en.tick()?;
        let low = extension(t, g, ac, &mins.rooted).expect("rooted family is never empty");
        let c = Coupling::validate(t, g, &low)
            .map_err(|e| OracleError::Decomposition(format!("minimal extension invalid: {e}")))?;
        lower = lower.min(restricted_cost(&CouplingContext::new(t, g, &c)));
        match extension(t, g, ac, &mins.special) {
            None => skipped += 1,
            Some(sp) => {
                let c = Coupling::validate(t, g, &sp)
                    .map_err(|e| OracleError::Decomposition(format!("special extension invalid: {e}")))?;
                special_min = special_min.min(CouplingContext::new(t, g, &c).norm());
            }
        }
    }
    Ok(DecompositionReport {
        exact,
        special_min,
        lower,
        antichains: acs.len(),
        skipped,
        minimal_special,
        equal: (special_min - exact).abs() <= TAU,
        lower_ok: lower <= exact + TAU,
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
    fn t_b() -> MergeTree {
        tree(&[("x", 0.0, Some("m")), ("v", 0.5, Some("m")), ("m", 1.0, None)]).unwrap()
    }
    fn g_b() -> MergeTree {
        tree(&[("x'", 0.0, Some("r'")), ("w'", 0.8, Some("r'")), ("r'", 1.0, None)]).unwrap()
    }

    fn power_set(t: &MergeTree, g: &MergeTree) -> Vec<Vec<(V, V)>> {
        let all: Vec<(V, V)> = (0..t.len()).flat_map(|a| (0..g.len()).map(move |b| (a, b))).collect();
        let mut out = Vec::new();
        for mask in 1u32..(1 << all.len()) {
            let s: Vec<(V, V)> = (0..all.len()).filter(|i| mask >> i & 1 == 1).map(|i| all[i]).collect();
            if Coupling::validate(t, g, &s).is_ok() {
                out.push(s);
            }
        }
        out.sort();
        out
    }

    #[test]
    fn enumeration_matches_power_set() {
        let cfg = OracleConfig::default();
        for (t, g) in [(t_a(), g_a()), (t_b(), g_b()), (t_a(), t_b())] {
            let fam = enumerate_couplings(&t, &g, FamilyKind::All, &cfg).unwrap();
            let got: Vec<Vec<(V, V)>> = fam.members.iter().map(|m| m.coupling.pairs().to_vec()).collect();
            assert_eq!(got, power_set(&t, &g));
        }
    }

    #[test]
    fn families_on_ta_ga() {
        let (t, g) = (t_a(), g_a());
        let cfg = OracleConfig::default();
        let all = enumerate_couplings(&t, &g, FamilyKind::All, &cfg).unwrap();
        for m in &all.members {
            assert!(Coupling::validate(&t, &g, m.coupling.pairs()).is_ok());
        }
        let a = |s| t.vertex(s).unwrap();
        let b = |s| g.vertex(s).unwrap();
        let singles = all.members.iter().filter(|m| m.coupling.len() == 1).count();
        assert_eq!(singles, 9);
        let full1 = vec![(a("a"), b("a'")), (a("b"), b("b'")), (a("r"), b("r'"))];
        let full2 = vec![(a("a"), b("b'")), (a("b"), b("a'")), (a("r"), b("r'"))];
        for f in [full1, full2] {
            assert!(all.members.iter().any(|m| m.coupling == Coupling::unchecked(f.clone())));
        }
        let rooted = enumerate_couplings(&t, &g, FamilyKind::Rooted, &cfg).unwrap();
        assert!(rooted.members.iter().all(|m| m.coupling.pairs().contains(&(t.root(), g.root()))));
        let id = enumerate_couplings(&t, &t, FamilyKind::RootedSpecial, &cfg).unwrap();
        assert_eq!(id.min, 0.0);
    }

    #[test]
    fn exact_values() {
        let cfg = OracleConfig::default();
        let (t, g) = (t_a(), g_a());
        assert_eq!(exact_interleaving(&t, &t, &cfg).unwrap().0, 0.0);
        let (d, w) = exact_interleaving(&t, &g, &cfg).unwrap();
        assert_eq!(d, 1.0);
        // the singleton {(a,a')} ties with the full matching and is lexicographically first
        assert_eq!(w, Coupling::from_ids(&t, &g, &[("a", "a'")]).unwrap());
        let full = Coupling::from_ids(&t, &g, &[("a", "a'"), ("b", "b'"), ("r", "r'")]).unwrap();
        let fam = enumerate_couplings(&t, &g, FamilyKind::All, &cfg).unwrap();
        assert!(fam.minimizers.contains(&full));
        let (d, _) = exact_interleaving(&t_b(), &g_b(), &cfg).unwrap();
        assert!(d <= 0.25 + TAU);
        assert_eq!(exact_interleaving(&g, &t, &cfg).unwrap().0, 1.0);
    }

    #[test]
    fn decomposition_fixtures() {
        let cfg = OracleConfig::default();
        for (t, g, v) in [(t_a(), t_a(), Some(0.0)), (t_a(), g_a(), Some(1.0)), (t_b(), g_b(), None)] {
            let rep = verify_decomposition(&t, &g, &cfg).unwrap();
            rep.check().unwrap();
            if let Some(v) = v {
                assert_eq!(rep.exact, v);
                assert_eq!(rep.special_min, v);
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let cfg = OracleConfig { cap: 1, timeout: None };
        assert!(matches!(
            exact_interleaving(&t_a(), &g_a(), &cfg),
            Err(OracleError::CapExceeded { leaves_t: 2, leaves_g: 2, cap: 1 })
        ));
    }
}
