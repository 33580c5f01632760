//! Points of the metric merge tree: edges are named by their lower vertex,
//! the root carries an infinite ray.

use serde::{Deserialize, Serialize};

use crate::error::MapError;
use crate::tree::{MergeTree, TAU, V};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Carrier {
    Edge(V),
    Ray,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub carrier: Carrier,
    pub height: f64,
}

impl MetricPoint {
    /// The point sitting at vertex `v`.
    pub fn at(t: &MergeTree, v: V) -> MetricPoint {
        if v == t.root() {
            MetricPoint { carrier: Carrier::Ray, height: t.height(v) }
        } else {
            MetricPoint { carrier: Carrier::Edge(v), height: t.height(v) }
        }
    }

    /// Point at height `h` on the edge above `v` (or on the ray when `v` is the root).
    pub fn on(t: &MergeTree, v: V, h: f64) -> Result<MetricPoint, MapError> {
        let p = if v == t.root() {
            MetricPoint { carrier: Carrier::Ray, height: h }
        } else {
            MetricPoint { carrier: Carrier::Edge(v), height: h }
        };
        p.check(t)?;
        Ok(p.normalize(t))
    }

    /// Vertex at the bottom of the carrier.
    pub fn floor(&self, t: &MergeTree) -> V {
        match self.carrier {
            Carrier::Edge(v) => v,
            Carrier::Ray => t.root(),
        }
    }

    /// `Some(v)` when the point coincides with a vertex.
    pub fn vertex(&self, t: &MergeTree) -> Option<V> {
        let v = self.floor(t);
        (self.height == t.height(v)).then_some(v)
    }

    pub fn check(&self, t: &MergeTree) -> Result<(), MapError> {
        let ok = match self.carrier {
            Carrier::Edge(v) => {
                v < t.len()
                    && v != t.root()
                    && self.height >= t.height(v)
                    && self.height <= t.height(t.parent(v).unwrap())
            }
            Carrier::Ray => self.height >= t.height(t.root()),
        };
        if ok && self.height.is_finite() {
            Ok(())
        } else {
            Err(MapError::InvalidPoint(format!("{:?}", self)))
        }
    }

    /// Moves a point sitting exactly at the top of its edge onto the parent.
    pub fn normalize(self, t: &MergeTree) -> MetricPoint {
        let mut p = self;
        while let Carrier::Edge(v) = p.carrier {
            let up = t.parent(v).unwrap();
            if p.height >= t.height(up) {
                p = MetricPoint::at(t, up);
                p.height = self.height;
            } else {
                break;
            }
        }
        p
    }

    /// Label used in reports.
    pub fn label(&self, t: &MergeTree) -> String {
        match self.vertex(t) {
            Some(v) => t.id(v).to_string(),
            None => match self.carrier {
                Carrier::Edge(v) => format!("{}@{}", t.id(v), self.height),
                Carrier::Ray => format!("ray@{}", self.height),
            },
        }
    }
}

/// `p <= q`: q lies on the upward path from p, up to tolerance `tol`, read as
/// p ≤ s^tol(q).
pub fn point_leq(t: &MergeTree, p: &MetricPoint, q: &MetricPoint, tol: f64) -> bool {
    let q = if tol > 0.0 { structural_shift(t, q, tol).expect("tol is nonnegative") } else { q.clone() };
    if q.height < p.height {
        return false;
    }
    match q.carrier {
        Carrier::Ray => true,
        Carrier::Edge(b) => {
            let a = p.floor(t);
            if a == b || t.lt(a, b) {
                true
            } else {
                // p may sit at the top of its edge, i.e. at q's floor vertex
                matches!(p.carrier, Carrier::Edge(pa) if t.parent(pa) == Some(b) && (p.height - t.height(b)).abs() <= tol)
            }
        }
    }
}

/// Strict order with a height gap larger than `tol`.
pub fn point_lt(t: &MergeTree, p: &MetricPoint, q: &MetricPoint, tol: f64) -> bool {
    q.height > p.height + tol && point_leq(t, p, q, tol)
}

/// Structural map s^k.
pub fn structural_shift(t: &MergeTree, p: &MetricPoint, k: f64) -> Result<MetricPoint, MapError> {
    if k < 0.0 {
        return Err(MapError::NegativeShift(k));
    }
    let h = p.height + k;
    let mut v = p.floor(t);
    while let Some(up) = t.parent(v) {
        if h >= t.height(up) {
            v = up;
        } else {
            break;
        }
    }
    Ok(if v == t.root() {
        MetricPoint { carrier: Carrier::Ray, height: h }
    } else {
        MetricPoint { carrier: Carrier::Edge(v), height: h }
    })
}

/// Lowest point above both `p` and `q`.
pub fn meet(t: &MergeTree, p: &MetricPoint, q: &MetricPoint) -> MetricPoint {
    if point_leq(t, p, q, 0.0) {
        return *q;
    }
    if point_leq(t, q, p, 0.0) {
        return *p;
    }
    let z = t.lca(p.floor(t), q.floor(t));
    let mut m = MetricPoint::at(t, z);
    m.height = m.height.max(p.height).max(q.height);
    m.normalize(t)
}

/// Shortest path distance 2 f(LCA) - f(x) - f(y).
pub fn path_distance(t: &MergeTree, p: &MetricPoint, q: &MetricPoint) -> Result<f64, MapError> {
    p.check(t)?;
    q.check(t)?;
    let m = meet(t, p, q);
    Ok((2.0 * m.height - p.height - q.height).max(0.0))
}

/// Tolerance scaled by the height span of the tree.
pub fn rel_tol(t: &MergeTree) -> f64 {
    TAU * t.span().max(1.0)
}
