//! Canonical encoding of a separatrix configuration.
//!
//! The skeleton is a combinatorial map: darts with a twin involution and a
//! counter-clockwise successor at their tail. Any homeomorphism of the disc
//! preserving infinity maps boundary arcs to boundary arcs, so a BFS numbering
//! started from each boundary dart, in both orientations, and minimised
//! lexicographically is a complete invariant of the labelled map.

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::skeleton::{EdgeKind, LimitSet, NodeLabel, Skeleton};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Variant {
    /// orientation of orbits preserved (disc reflection allowed)
    FlowPreserving,
    /// all orbits reversed simultaneously
    TimeReversed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TopoSignature {
    pub code: Vec<i64>,
    /// code of the time-reversed configuration
    pub reversed: Vec<i64>,
    pub s: usize,
    pub r: usize,
}

impl TopoSignature {
    /// Short stable digest, identical for time-reversed twins.
    pub fn hash(&self) -> String {
        let key = self.code.clone().min(self.reversed.clone());
        let mut h = Sha256::new();
        for x in key {
            h.update(x.to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

#[derive(Clone, Copy)]
struct Frame {
    /// reflect the disc: clockwise successors, faces on the other side
    mirror: bool,
    /// reverse time: flip directions, swap alpha/omega, swap node stability
    reverse: bool,
}

fn label_code(l: NodeLabel, f: Frame) -> i64 {
    let l = if f.reverse { l.time_reversed() } else { l };
    l as i64
}

fn limit_code(sk: &Skeleton, l: LimitSet, f: Frame) -> i64 {
    match l {
        LimitSet::Node(i) => label_code(sk.nodes[i].label, f),
        LimitSet::Line => 100,
        LimitSet::Closed => 101,
        LimitSet::Cycle => 102,
        LimitSet::Unknown => 103,
    }
}

fn kind_code(k: EdgeKind) -> i64 {
    match k {
        EdgeKind::BoundaryArc => 0,
        EdgeKind::Separatrix => 1,
        EdgeKind::SingularLine => 2,
    }
}

fn face_code(sk: &Skeleton, face: usize, f: Frame, out: &mut Vec<i64>) {
    let fc = &sk.faces[face];
    out.push(fc.outer as i64);
    match &fc.rep {
        Some(rep) => {
            let (a, w) = if f.reverse { (rep.omega, rep.alpha) } else { (rep.alpha, rep.omega) };
            out.push(limit_code(sk, a, f));
            out.push(limit_code(sk, w, f));
        }
        None => out.extend([-1, -1]),
    }
    let mut nested: Vec<Vec<i64>> = fc.nested.iter().map(|&c| component_code(sk, c, f)).collect();
    nested.sort();
    out.push(nested.len() as i64);
    for n in nested {
        out.push(n.len() as i64);
        out.extend(n);
    }
}

fn dart_face(sk: &Skeleton, d: usize, f: Frame) -> usize {
    if f.mirror {
        sk.dart_face[d ^ 1]
    } else {
        sk.dart_face[d]
    }
}

fn successor(sk: &Skeleton, d: usize, f: Frame) -> usize {
    if f.mirror {
        // clockwise successor: the dart whose ccw successor is d
        sk.rotation.iter().position(|&x| x == d).unwrap()
    } else {
        sk.rotation[d]
    }
}

/// Encoding of the connected component reached from `start`.
fn encode_from(sk: &Skeleton, start: usize, f: Frame) -> Vec<i64> {
    let nd = sk.rotation.len();
    let mut num = vec![usize::MAX; nd];
    let mut order = vec![start];
    num[start] = 0;
    let mut k = 0;
    while k < order.len() {
        let d = order[k];
        for e in [d ^ 1, successor(sk, d, f)] {
            if num[e] == usize::MAX {
                num[e] = order.len();
                order.push(e);
            }
        }
        k += 1;
    }
    let mut out = Vec::with_capacity(order.len() * 10);
    for &d in &order {
        let e = &sk.edges[d / 2];
        out.push(num[d ^ 1] as i64);
        out.push(num[successor(sk, d, f)] as i64);
        out.push(label_code(sk.nodes[sk.tail(d)].label, f));
        out.push(kind_code(e.kind));
        let dir = sk.dart_direction(d) as i64;
        out.push(if f.reverse { -dir } else { dir });
        face_code(sk, dart_face(sk, d, f), f, &mut out);
    }
    out
}

/// Code of a nested component: an isolated node is its label, anything
/// larger is minimised over start darts.
fn component_code(sk: &Skeleton, comp: usize, f: Frame) -> Vec<i64> {
    let darts: Vec<usize> = (0..sk.rotation.len()).filter(|&d| sk.component_of_node[sk.tail(d)] == comp).collect();
    if darts.is_empty() {
        let mut labels: Vec<i64> = (0..sk.nodes.len())
            .filter(|&i| sk.component_of_node[i] == comp)
            .map(|i| label_code(sk.nodes[i].label, f))
            .collect();
        labels.sort();
        let mut out = vec![-2];
        out.extend(labels);
        return out;
    }
    darts.iter().map(|&d| encode_from(sk, d, f)).min().unwrap()
}

fn canonical(sk: &Skeleton, reverse: bool) -> Vec<i64> {
    let starts: Vec<usize> = (0..sk.rotation.len()).filter(|&d| sk.edges[d / 2].kind == EdgeKind::BoundaryArc).collect();
    let mut best: Option<Vec<i64>> = None;
    for mirror in [false, true] {
        let f = Frame { mirror, reverse };
        for &d in &starts {
            let c = encode_from(sk, d, f);
            if best.as_ref().is_none_or(|b| c < *b) {
                best = Some(c);
            }
        }
    }
    best.unwrap_or_default()
}

pub fn signature(sk: &Skeleton) -> TopoSignature {
    let (s, r) = super::skeleton::count_sr(sk).unwrap_or((0, 0));
    TopoSignature { code: canonical(sk, false), reversed: canonical(sk, true), s, r }
}

/// Which equivalence, if any, carries one configuration onto the other.
/// Flow-preserving equivalence is checked first.
pub fn equivalence(a: &TopoSignature, b: &TopoSignature) -> Option<Variant> {
    if a.code == b.code {
        Some(Variant::FlowPreserving)
    } else if a.code == b.reversed {
        Some(Variant::TimeReversed)
    } else {
        None
    }
}

pub fn signatures_equivalent(a: &TopoSignature, b: &TopoSignature) -> bool {
    equivalence(a, b).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::skeleton::trace_separatrices;
    use crate::model::Params;

    fn sig(b: f64, c: f64) -> TopoSignature {
        signature(&trace_separatrices(&Params::new(b, c).unwrap()).unwrap())
    }

    #[test]
    fn reflexive() {
        let a = sig(1.0, 3.0);
        assert_eq!(equivalence(&a, &a), Some(Variant::FlowPreserving));
    }

    #[test]
    fn same_center_line_is_equivalent() {
        assert!(signatures_equivalent(&sig(1.0, 3.0), &sig(2.0, 5.0)));
    }

    #[test]
    fn different_counts_are_not_equivalent() {
        let (a, b) = (sig(1.0, 3.0), sig(1.0, 10.0));
        assert_ne!((a.s, a.r), (b.s, b.r));
        assert!(!signatures_equivalent(&a, &b));
    }

    #[test]
    fn reversal_is_an_involution() {
        let a = sig(-0.3, 3.0);
        let flipped = TopoSignature { code: a.reversed.clone(), reversed: a.code.clone(), ..a.clone() };
        assert_eq!(equivalence(&a, &flipped), Some(Variant::TimeReversed));
        assert_eq!(a.hash(), flipped.hash());
    }

    #[test]
    fn same_region_same_class() {
        // two samples of the region b > 0, c < 1 below the node curves
        assert!(signatures_equivalent(&sig(1.0, 0.5), &sig(0.6, 0.3)));
    }
}
