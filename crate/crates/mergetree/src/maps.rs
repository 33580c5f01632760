//! Maps between metric merge trees induced by couplings, ε-good map checks,
//! and the reverse construction of a coupling from a good map.

use serde::{Deserialize, Serialize};

use crate::coupling::{Class, Coupling, CouplingContext, Side, SideContext};
use crate::error::MapError;
use crate::point::{meet, point_leq, point_lt, rel_tol, structural_shift, Carrier, MetricPoint};
use crate::tree::{MergeTree, V};

/// α_C (ε = 0) or its shifted version α_C^ε, stored through its vertex anchors.
#[derive(Debug, Clone)]
pub struct InducedMap<'a> {
    pub src: &'a MergeTree,
    pub dst: &'a MergeTree,
    pub eps: f64,
    side: SideContext,
    anchors: Vec<Option<MetricPoint>>,
}

impl<'a> InducedMap<'a> {
    /// Map from the `side` tree of the context to the other one.
    pub fn new(ctx: &CouplingContext<'a>, side: Side, eps: f64) -> Result<InducedMap<'a>, MapError> {
        let (src, dst, sc) = match side {
            Side::T => (ctx.t, ctx.g, ctx.side_t.clone()),
            Side::G => (ctx.g, ctx.t, ctx.side_g.clone()),
        };
        let mut anchors = vec![None; src.len()];
        for x in 0..src.len() {
            anchors[x] = match sc.class[x] {
                Class::Coupled => Some(MetricPoint::at(dst, sc.partner[x].unwrap())),
                Class::Unused => None,
                Class::Deleted if sc.lambda[x].is_empty() => {
                    let eta = sc.eta[x].unwrap();
                    let fx = src.height(x);
                    let mid = fx + 0.5 * (src.height(sc.phi[x].unwrap()) - fx);
                    let k = (mid - dst.height(eta)).max(0.0);
                    Some(structural_shift(dst, &MetricPoint::at(dst, eta), k)?)
                }
                Class::Deleted => Some(MetricPoint::at(dst, sc.chi[x].unwrap())),
            };
        }
        Ok(InducedMap { src, dst, eps, side: sc, anchors })
    }

    /// α_C^ε with ε = ‖C‖∞ after checking the precondition ε ≥ ‖C‖∞.
    pub fn good(ctx: &CouplingContext<'a>, side: Side, eps: f64) -> Result<InducedMap<'a>, MapError> {
        let norm = ctx.norm();
        if eps < norm - rel_tol(ctx.t).max(rel_tol(ctx.g)) {
            return Err(MapError::EpsilonBelowNorm { eps, norm });
        }
        InducedMap::new(ctx, side, eps)
    }

    pub fn anchor(&self, v: V) -> Option<MetricPoint> {
        self.anchors[v]
    }

    fn is_anchor(&self, v: V) -> bool {
        self.anchors[v].is_some()
    }

    /// α_C(p) before the ε shift.
    pub fn eval_raw(&self, p: &MetricPoint) -> Result<MetricPoint, MapError> {
        p.check(self.src)?;
        let p = p.normalize(self.src);
        let a = p.floor(self.src);
        let at_vertex = p.height == self.src.height(a);
        if at_vertex && self.is_anchor(a) {
            return Ok(self.anchors[a].unwrap());
        }
        let l = if self.is_anchor(a) { a } else { self.side.lambda[a][0] };
        let u = self.src.ancestors(a).find(|&v| self.is_anchor(v));
        let al = self.anchors[l].unwrap();
        let fl = self.src.height(l);
        match u {
            None => structural_shift(self.dst, &al, (p.height - fl).max(0.0)),
            Some(u) => {
                let au = self.anchors[u].unwrap();
                let fu = self.src.height(u);
                let lam = (fu - p.height) / (fu - fl);
                let h = lam * al.height + (1.0 - lam) * au.height;
                structural_shift(self.dst, &al, (h - al.height).max(0.0))
            }
        }
    }

    /// α_C^ε(p): the raw image lifted to height f(p) + ε.
    pub fn eval(&self, p: &MetricPoint) -> Result<MetricPoint, MapError> {
        let q = self.eval_raw(p)?;
        let k = p.height + self.eps - q.height;
        let tol = rel_tol(self.src).max(rel_tol(self.dst));
        if k < -tol {
            return Err(MapError::NegativeShift(k));
        }
        structural_shift(self.dst, &q, k.max(0.0))
    }

    pub fn eval_vertex(&self, v: V) -> Result<MetricPoint, MapError> {
        self.eval(&MetricPoint::at(self.src, v))
    }

    /// Images of all source vertices under α^ε.
    pub fn vertex_images(&self) -> Result<Vec<MetricPoint>, MapError> {
        (0..self.src.len()).map(|v| self.eval_vertex(v)).collect()
    }
}

/// Vertices, `k` interior points per edge and `k` points on the ray.
pub fn sample_points(t: &MergeTree, k: usize) -> Vec<MetricPoint> {
    let mut out = Vec::new();
    for v in 0..t.len() {
        out.push(MetricPoint::at(t, v));
        if let Some(p) = t.parent(v) {
            let (lo, hi) = (t.height(v), t.height(p));
            for i in 1..=k {
                let h = lo + (hi - lo) * i as f64 / (k + 1) as f64;
                if h > lo && h < hi {
                    out.push(MetricPoint { carrier: Carrier::Edge(v), height: h });
                }
            }
        }
    }
    let top = t.height(t.root());
    let step = t.span().max(1.0) / k.max(1) as f64;
    for i in 1..=k {
        out.push(MetricPoint { carrier: Carrier::Ray, height: top + step * i as f64 });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodMapReport {
    pub eps: f64,
    pub samples: usize,
    pub p1_max_residual: f64,
    pub p2_violations: Vec<(String, String)>,
    pub p3_max_gap: f64,
    pub p3_witnesses: Vec<(String, String)>,
    pub pass: bool,
}

/// Checks (P1)-(P3) for α^ε on vertices plus `k` samples per edge.
pub fn check_eps_good(map: &InducedMap, k: usize) -> Result<GoodMapReport, MapError> {
    let (src, dst, eps) = (map.src, map.dst, map.eps);
    let tol = rel_tol(src).max(rel_tol(dst));
    let pts = sample_points(src, k);
    let imgs: Vec<MetricPoint> = pts.iter().map(|p| map.eval(p)).collect::<Result<_, _>>()?;
    let p1 = pts.iter().zip(&imgs).map(|(p, q)| (q.height - p.height - eps).abs()).fold(0.0, f64::max);

    let lifted: Vec<MetricPoint> =
        pts.iter().map(|p| structural_shift(src, p, 2.0 * eps)).collect::<Result<_, _>>()?;
    let mut p2 = Vec::new();
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if i != j && point_lt(dst, &imgs[i], &imgs[j], tol) && !point_leq(src, &lifted[i], &lifted[j], tol) {
                p2.push((pts[i].label(src), pts[j].label(src)));
            }
        }
    }

    // image of each edge is the path between the images of its endpoints
    let vimg = map.vertex_images()?;
    let mut segs: Vec<(MetricPoint, Option<MetricPoint>)> = Vec::new();
    for v in 0..src.len() {
        segs.push((vimg[v], src.parent(v).map(|p| vimg[p])));
    }
    let mut p3_gap: f64 = 0.0;
    let mut wit = Vec::new();
    for y in 0..dst.len() {
        let py = MetricPoint::at(dst, y);
        let inside = segs.iter().any(|(a, b)| {
            point_leq(dst, a, &py, tol) && b.map_or(true, |b| point_leq(dst, &py, &b, tol))
        });
        if inside {
            continue;
        }
        let w = segs
            .iter()
            .filter(|(_, b)| b.map_or(true, |b| point_leq(dst, &py, &b, tol)))
            .map(|(a, _)| meet(dst, &py, a))
            .min_by(|p, q| p.height.total_cmp(&q.height))
            .expect("the ray segment always reaches above y");
        let gap = w.height - py.height;
        if gap > p3_gap {
            p3_gap = gap;
        }
        if gap > 2.0 * eps + tol {
            wit.push((dst.id(y).to_string(), w.label(dst)));
        }
    }
    let pass = p1 <= tol && p2.is_empty() && wit.is_empty();
    Ok(GoodMapReport {
        eps,
        samples: pts.len(),
        p1_max_residual: p1,
        p2_violations: p2,
        p3_max_gap: p3_gap,
        p3_witnesses: wit,
        pass,
    })
}

/// Largest deviation of β^ε α^ε from s^{2ε} on sampled points, and the number
/// of samples where β α (p) is not above p.
pub fn composition_check(alpha: &InducedMap, beta: &InducedMap, k: usize) -> Result<(f64, usize), MapError> {
    let t = alpha.src;
    let tol = rel_tol(t).max(rel_tol(alpha.dst));
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for p in sample_points(t, k) {
        let q = beta.eval(&alpha.eval(&p)?)?;
        worst = worst.max((q.height - p.height - 2.0 * alpha.eps).abs());
        if !point_leq(t, &p, &q, tol) {
            bad += 1;
        }
    }
    Ok((worst, bad))
}

/// Builds a coupling from the vertex images α(v) of an ε-good map.
pub fn extract_coupling(
    src: &MergeTree,
    dst: &MergeTree,
    images: &[MetricPoint],
    eps: f64,
) -> Result<Coupling, MapError> {
    let tol = rel_tol(src).max(rel_tol(dst));
    for v in 0..src.len() {
        images[v].check(dst)?;
        let r = (images[v].height - src.height(v) - eps).abs();
        if r > tol {
            return Err(MapError::HeightLaw { vertex: src.id(v).to_string(), residual: r });
        }
        if let Some(p) = src.parent(v) {
            if !point_leq(dst, &images[v], &images[p], tol) {
                return Err(MapError::NotMonotone(src.id(v).to_string(), src.id(p).to_string()));
            }
        }
    }
    let phi: Vec<V> = images.iter().map(|p| p.normalize(dst).floor(dst)).collect();
    let leaves = src.leaves();
    let chosen: Vec<V> = leaves
        .iter()
        .copied()
        .filter(|&v| !leaves.iter().any(|&u| u != v && point_lt(dst, &images[u], &images[v], tol)))
        .collect();
    // images closer than the tolerance on one carrier: keep the lowest
    let mut chosen: Vec<V> = chosen
        .iter()
        .copied()
        .filter(|&v| {
            !chosen.iter().any(|&u| {
                phi[u] == phi[v] && (images[u].height, u) < (images[v].height, v)
            })
        })
        .collect();
    chosen.sort_unstable();
    // leaves whose images share the carrier of a chosen image are equally valid picks
    let groups: Vec<Vec<V>> = chosen
        .iter()
        .map(|&v| {
            let mut g = vec![v];
            g.extend(leaves.iter().copied().filter(|&u| u != v && phi[u] == phi[v]));
            g
        })
        .collect();
    let combos: usize = groups.iter().map(Vec::len).try_fold(1usize, |a, l| a.checked_mul(l)).unwrap_or(usize::MAX);
    let first = build_pairs(src, dst, &chosen, &phi);
    if combos == 1 || combos > MAX_LEAF_CHOICES {
        return Ok(Coupling::validate(src, dst, &first)?);
    }
    let mut best: Option<(f64, Coupling)> = None;
    for k in 0..combos {
        let (mut pick, mut r) = (Vec::with_capacity(groups.len()), k);
        for g in &groups {
            pick.push(g[r % g.len()]);
            r /= g.len();
        }
        pick.sort_unstable();
        let Ok(c) = Coupling::validate(src, dst, &build_pairs(src, dst, &pick, &phi)) else { continue };
        let cost = CouplingContext::new(src, dst, &c).norm();
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, c));
        }
        if cost <= eps + tol {
            break;
        }
    }
    match best {
        Some((_, c)) => Ok(c),
        None => Ok(Coupling::validate(src, dst, &first)?),
    }
}

/// Upper limit on the leaf selections tried when images share carriers.
const MAX_LEAF_CHOICES: usize = 256;

/// Couples the chosen leaves with the floors of their images and closes the set upward.
fn build_pairs(src: &MergeTree, dst: &MergeTree, chosen: &[V], phi: &[V]) -> Vec<(V, V)> {
    let mut pairs: Vec<(V, V)> = chosen.iter().map(|&v| (v, phi[v])).collect();
    if chosen.len() >= 2 {
        let mut has = vec![false; src.len()];
        for &v in chosen {
            has[v] = true;
        }
        for &v in src.preorder().iter().rev() {
            if src.children(v).iter().any(|&c| has[c]) {
                has[v] = true;
            }
        }
        let images_of = |x: V| -> Vec<V> {
            let mut s: Vec<V> = chosen.iter().filter(|&&v| src.leq(v, x)).map(|&v| phi[v]).collect();
            s.sort_unstable();
            s
        };
        let mut internal: Vec<V> =
            (0..src.len()).filter(|&x| src.children(x).iter().filter(|&&c| has[c]).count() >= 2).collect();
        internal.sort_by(|&a, &b| src.height(b).total_cmp(&src.height(a)));
        let top = internal[0];
        let all: Vec<V> = images_of(top);
        pairs.push((top, dst.lca_all(&all).unwrap()));
        for &x in &internal[1..] {
            let s = images_of(x);
            let w = dst.lca_all(&s).unwrap();
            let mut below: Vec<V> = chosen.iter().map(|&v| phi[v]).filter(|&u| dst.leq(u, w)).collect();
            below.sort_unstable();
            if below == s {
                pairs.push((x, w));
            }
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::coupling_norm;
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
    fn full(t: &MergeTree, g: &MergeTree) -> Coupling {
        Coupling::from_ids(t, g, &[("a", "a'"), ("b", "b'"), ("r", "r'")]).unwrap()
    }

    #[test]
    fn full_coupling_shifted() {
        let (t, g) = (t_a(), g_a());
        let ctx = CouplingContext::new(&t, &g, &full(&t, &g));
        let m = InducedMap::new(&ctx, Side::T, 1.0).unwrap();
        let img = m.eval_vertex(t.vertex("a").unwrap()).unwrap();
        assert_eq!(img, MetricPoint { carrier: Carrier::Edge(g.vertex("a'").unwrap()), height: 1.0 });
        let raw = InducedMap::new(&ctx, Side::T, 0.0).unwrap();
        assert_eq!(raw.eval_raw(&MetricPoint::at(&t, t.root())).unwrap(), MetricPoint::at(&g, g.root()));
        let rep = check_eps_good(&m, 3).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.p1_max_residual, 0.0);
    }

    #[test]
    fn deleted_leaf_image() {
        let (t, g) = (t_b(), g_b());
        let c = Coupling::unchecked(vec![(t.vertex("x").unwrap(), g.vertex("x'").unwrap()), (t.root(), g.root())]);
        let ctx = CouplingContext::new(&t, &g, &c);
        let raw = InducedMap::new(&ctx, Side::T, 0.0).unwrap();
        let v = t.vertex("v").unwrap();
        // k = 0.5 + 0.25 - 0 = 0.75 above x'
        let a = raw.anchor(v).unwrap();
        assert_eq!(a, MetricPoint { carrier: Carrier::Edge(g.vertex("x'").unwrap()), height: 0.75 });
        let m = InducedMap::new(&ctx, Side::T, 0.25).unwrap();
        assert_eq!(m.eval_vertex(v).unwrap().height, 0.75);
    }

    #[test]
    fn identity_is_zero_good() {
        let t = t_a();
        let id: Vec<(V, V)> = (0..t.len()).map(|v| (v, v)).collect();
        let c = Coupling::validate(&t, &t, &id).unwrap();
        let ctx = CouplingContext::new(&t, &t, &c);
        let m = InducedMap::good(&ctx, Side::T, 0.0).unwrap();
        let rep = check_eps_good(&m, 3).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.p3_max_gap, 0.0);
        let back = extract_coupling(&t, &t, &m.vertex_images().unwrap(), 0.0).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn precondition_guard() {
        let (t, g) = (t_a(), g_a());
        let ctx = CouplingContext::new(&t, &g, &full(&t, &g));
        assert!(matches!(InducedMap::good(&ctx, Side::T, 0.9), Err(MapError::EpsilonBelowNorm { .. })));
    }

    #[test]
    fn round_trips() {
        let (t, g) = (t_a(), g_a());
        let ctx = CouplingContext::new(&t, &g, &full(&t, &g));
        let m = InducedMap::good(&ctx, Side::T, 1.0).unwrap();
        let c = extract_coupling(&t, &g, &m.vertex_images().unwrap(), 1.0).unwrap();
        assert!(coupling_norm(&t, &g, &c) <= 1.0 + 1e-9);

        let (t, g) = (t_b(), g_b());
        let c = Coupling::unchecked(vec![(t.vertex("x").unwrap(), g.vertex("x'").unwrap()), (t.root(), g.root())]);
        let ctx = CouplingContext::new(&t, &g, &c);
        let m = InducedMap::new(&ctx, Side::T, 0.25).unwrap();
        let back = extract_coupling(&t, &g, &m.vertex_images().unwrap(), 0.25).unwrap();
        assert!(coupling_norm(&t, &g, &back) <= 0.25 + 1e-9);
    }

    #[test]
    fn composition_full() {
        let (t, g) = (t_a(), g_a());
        let ctx = CouplingContext::new(&t, &g, &full(&t, &g));
        let a = InducedMap::good(&ctx, Side::T, 1.0).unwrap();
        let b = InducedMap::good(&ctx, Side::G, 1.0).unwrap();
        let (res, bad) = composition_check(&a, &b, 3).unwrap();
        assert!(res <= 1e-9 && bad == 0);
    }
}
