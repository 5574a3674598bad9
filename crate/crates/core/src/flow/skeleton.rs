//! Separatrix skeleton: traced separatrices, boundary arcs, the planar
//! subdivision they induce, and one representative orbit per region.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::cycles::{closed_or_cycle, OrbitShape};
use super::integrator::{dopri_step, error_norm, step_factor};
use super::orbit::{default_targets, integrate_chart, Capture, Direction, FlowConfig, NodeId, Orbit, Target, Termination};
use crate::compactify::{
    disc_to_chart, infinite_singular_points, plane_to_chart, plane_to_disc, ChartId, ChartPoint, DiscPoint,
    InfiniteKind,
};
use crate::localanalysis::{classify_finite, DirRole, PointKind, STRATUM_TOL};
use crate::model::{eval_field, Params, PlanePoint};

pub const SEED_OFFSET: f64 = 1e-7;
pub const CENTER_OFFSET: f64 = 1e-3;
pub const NILPOTENT_OFFSET: f64 = 1e-4;
pub const SNAP_RADIUS: f64 = 1e-5;
/// Transverse error below which a pass by a saddle counts as a connection.
pub const SADDLE_MISS: f64 = 1e-9;
/// Largest section gap (relative to 1 + |point|) between a forward unstable
/// branch and a backward stable branch that is read as one orbit.
pub const CONNECTION_GAP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SkeletonError {
    #[error("separatrix {origin} did not reach a singular point ({termination:?})")]
    Unresolved { origin: String, termination: Termination },
    #[error("face count mismatch: rotation system {rotation}, Euler {euler}, region fill {fill}")]
    FaceMismatch { rotation: usize, euler: usize, fill: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum NodeLabel {
    Attractor,
    Repeller,
    Saddle,
    SaddleNode,
    Center,
    InfNilpotent,
    InfAttractor,
    InfRepeller,
    InfSaddle,
    InfSaddleNode,
    LinePoint,
}

impl NodeLabel {
    pub fn time_reversed(self) -> Self {
        match self {
            NodeLabel::Attractor => NodeLabel::Repeller,
            NodeLabel::Repeller => NodeLabel::Attractor,
            NodeLabel::InfAttractor => NodeLabel::InfRepeller,
            NodeLabel::InfRepeller => NodeLabel::InfAttractor,
            l => l,
        }
    }

    fn of_finite(k: PointKind) -> Self {
        match k {
            PointKind::StableNode | PointKind::StableFocus => NodeLabel::Attractor,
            PointKind::UnstableNode | PointKind::UnstableFocus => NodeLabel::Repeller,
            PointKind::Saddle => NodeLabel::Saddle,
            PointKind::SaddleNode => NodeLabel::SaddleNode,
            PointKind::Center => NodeLabel::Center,
            PointKind::NonIsolated => NodeLabel::LinePoint,
        }
    }

    fn of_infinite(k: InfiniteKind) -> Self {
        match k {
            InfiniteKind::EllipticHyperbolic => NodeLabel::InfNilpotent,
            InfiniteKind::Saddle => NodeLabel::InfSaddle,
            InfiniteKind::StableNode => NodeLabel::InfAttractor,
            InfiniteKind::UnstableNode => NodeLabel::InfRepeller,
            InfiniteKind::SaddleNode => NodeLabel::InfSaddleNode,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SkelNode {
    pub id: NodeId,
    pub name: String,
    pub disc: DiscPoint<f64>,
    pub label: NodeLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EdgeKind {
    BoundaryArc,
    Separatrix,
    /// piece of the line of singular points (q1)
    SingularLine,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkelEdge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    /// false for pieces of the singular line, which carry no flow
    pub directed: bool,
    /// from `from` to `to`, along the flow when directed
    pub polyline: Vec<DiscPoint<f64>>,
    pub origin: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum LimitSet {
    Node(usize),
    /// the line of singular points (q1)
    Line,
    /// closed orbit of a period annulus
    Closed,
    /// isolated periodic orbit
    Cycle,
    Unknown,
}

#[derive(Debug, Clone, Serialize)]
pub struct FaceRep {
    pub point: DiscPoint<f64>,
    pub alpha: LimitSet,
    pub omega: LimitSet,
    pub orbit: Vec<DiscPoint<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Face {
    pub darts: Vec<usize>,
    pub outer: bool,
    pub component: usize,
    pub rep: Option<FaceRep>,
    /// components (other than the one bounding this face) lying inside it
    pub nested: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub origin: String,
    pub node: usize,
    pub direction: Direction,
    pub termination: Termination,
    pub duplicate_of: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Skeleton {
    pub b: f64,
    pub c: f64,
    pub nodes: Vec<SkelNode>,
    pub edges: Vec<SkelEdge>,
    /// finite singular points; the singular line counts as one at q1
    pub finite_points: usize,
    pub limit_cycles: usize,
    /// darts 2e (along the edge) and 2e+1 (against); counter-clockwise successor at the tail
    pub rotation: Vec<usize>,
    pub dart_face: Vec<usize>,
    pub faces: Vec<Face>,
    pub component_of_node: Vec<usize>,
    pub components: usize,
    pub main_component: usize,
    pub rotation_regions: usize,
    pub euler_regions: usize,
    pub fill_regions: usize,
    pub traces: Vec<TraceRecord>,
    pub degenerate_line: bool,
    pub diagnostics: Vec<String>,
}

impl Skeleton {
    pub fn separatrices(&self) -> usize {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Separatrix).count()
    }

    pub fn boundary_arcs(&self) -> usize {
        self.edges.iter().filter(|e| e.kind == EdgeKind::BoundaryArc).count()
    }

    pub fn infinite_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.id, NodeId::Inf(_))).count()
    }

    pub fn tail(&self, d: usize) -> usize {
        let e = &self.edges[d / 2];
        if d.is_multiple_of(2) {
            e.from
        } else {
            e.to
        }
    }

    /// +1 along the flow, -1 against, 0 for undirected edges.
    pub fn dart_direction(&self, d: usize) -> i8 {
        if !self.edges[d / 2].directed {
            0
        } else if d.is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    pub fn dart_points(&self, d: usize) -> Vec<DiscPoint<f64>> {
        let p = &self.edges[d / 2].polyline;
        if d.is_multiple_of(2) {
            p.clone()
        } else {
            p.iter().rev().copied().collect()
        }
    }

    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Inner face of the main component containing the point, by winding number.
    pub fn locate(&self, q: &DiscPoint<f64>) -> Option<usize> {
        let polys = self.face_polygons();
        locate_in(&polys, &self.faces, self.main_component, q)
    }

    pub fn face_polygons(&self) -> Vec<Vec<DiscPoint<f64>>> {
        self.faces.iter().map(|f| face_polygon(self, &f.darts)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig {
    pub flow: FlowConfig,
    pub rep_flow: FlowConfig,
    pub samples: usize,
    pub seed: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            flow: FlowConfig { tol: 1e-12, t_max: 1e8, ..FlowConfig::default() },
            rep_flow: FlowConfig { t_max: 200.0, max_steps: 200_000, ..FlowConfig::default() },
            samples: 600,
            seed: 0x5eed,
        }
    }
}

struct Seed {
    node: usize,
    direction: Direction,
    start: ChartPoint<f64>,
    origin: String,
}

fn is_q1(p: &Params<f64>) -> bool {
    p.b64().abs() <= STRATUM_TOL && (p.c64() - 1.0).abs() <= STRATUM_TOL
}

fn infinite_nodes(p: &Params<f64>) -> Vec<SkelNode> {
    infinite_singular_points(p)
        .into_iter()
        .map(|ip| SkelNode {
            id: NodeId::Inf(ip.chart),
            name: format!("{:?}", ip.chart),
            disc: ip.disc,
            label: NodeLabel::of_infinite(ip.kind),
        })
        .collect()
}

/// Boundary arcs along the flow on the circle: V2 -> U1 -> U2 <- V1 <- V2.
fn boundary_edges(nodes: &[SkelNode]) -> Vec<SkelEdge> {
    let idx = |ch: ChartId| nodes.iter().position(|n| n.id == NodeId::Inf(ch)).unwrap();
    let arc = |from: ChartId, to: ChartId, a0: f64, a1: f64| {
        let n = 4000;
        let polyline = (0..=n)
            .map(|k| {
                let a = a0 + (a1 - a0) * k as f64 / n as f64;
                DiscPoint::new(a.cos(), a.sin())
            })
            .collect();
        SkelEdge { from: idx(from), to: idx(to), kind: EdgeKind::BoundaryArc, directed: true, polyline, origin: format!("arc {from:?}->{to:?}") }
    };
    use std::f64::consts::{FRAC_PI_2, PI};
    vec![
        arc(ChartId::U1, ChartId::U2, 0.0, FRAC_PI_2),
        arc(ChartId::V1, ChartId::U2, PI, FRAC_PI_2),
        arc(ChartId::V2, ChartId::U1, -FRAC_PI_2, 0.0),
        arc(ChartId::V2, ChartId::V1, -FRAC_PI_2, -PI),
    ]
}

fn plane_seed(node: usize, q: PlanePoint<f64>, direction: Direction, origin: String) -> Seed {
    Seed { node, direction, start: plane_to_chart(&q, ChartId::U3).unwrap(), origin }
}

fn finite_seeds(p: &Params<f64>, nodes: &[SkelNode]) -> Vec<Seed> {
    let mut seeds = Vec::new();
    for (i, info) in classify_finite(p).iter().enumerate() {
        let node = nodes.iter().position(|n| n.id == NodeId::Fin(i)).unwrap();
        let loc = info.location;
        let at = |v: [f64; 2], s: f64, off: f64| PlanePoint::new(loc.x + s * off * v[0], loc.y + s * off * v[1]);
        let dirs = &info.separatrix_directions;
        match info.kind {
            PointKind::Saddle => {
                for d in dirs {
                    let dir = if d.role == DirRole::Unstable { Direction::Forward } else { Direction::Backward };
                    for s in [1.0, -1.0] {
                        seeds.push(plane_seed(node, at(d.vector, s, SEED_OFFSET), dir, format!("{} {:?} {s:+}", info.name(), d.role)));
                    }
                }
            }
            PointKind::SaddleNode => {
                let Some(strong) = dirs.iter().find(|d| d.role != DirRole::Center) else { continue };
                let Some(center) = dirs.iter().find(|d| d.role == DirRole::Center) else { continue };
                let lam = strong.eigenvalue;
                let sdir = if lam > 0.0 { Direction::Forward } else { Direction::Backward };
                for s in [1.0, -1.0] {
                    seeds.push(plane_seed(node, at(strong.vector, s, SEED_OFFSET), sdir, format!("{} strong {s:+}", info.name())));
                }
                // center branch: a separatrix only on the side bounding hyperbolic sectors
                let (vs, vc) = (strong.vector, center.vector);
                let det = vs[0] * vc[1] - vs[1] * vc[0];
                for s in [1.0, -1.0] {
                    let q = at(vc, s, CENTER_OFFSET);
                    let (fx, fy) = eval_field(p, &q);
                    // center coordinate of the field in the (vs, vc) basis
                    let comp = s * (vs[0] * fy - vs[1] * fx) / det;
                    let away = comp > 0.0;
                    if lam < 0.0 && away {
                        seeds.push(plane_seed(node, q, Direction::Forward, format!("{} center {s:+}", info.name())));
                    }
                    if lam > 0.0 && !away {
                        seeds.push(plane_seed(node, q, Direction::Backward, format!("{} center {s:+}", info.name())));
                    }
                }
            }
            _ => {}
        }
    }
    seeds
}

fn infinite_seeds(p: &Params<f64>, nodes: &[SkelNode]) -> Vec<Seed> {
    let (b, c) = (p.b64(), p.c64());
    let idx = |ch: ChartId| nodes.iter().position(|n| n.id == NodeId::Inf(ch)).unwrap();
    let mut seeds = Vec::new();
    let mut push = |ch: ChartId, z1: f64, z2: f64, dir: Direction, what: &str| {
        seeds.push(Seed { node: idx(ch), direction: dir, start: ChartPoint::new(ch, z1, z2), origin: format!("{ch:?} {what}") });
    };
    if b.abs() <= STRATUM_TOL {
        if c > 1.0 {
            push(ChartId::U2, 0.0, CENTER_OFFSET, Direction::Forward, "center");
        } else if c < 1.0 {
            push(ChartId::V2, 0.0, -CENTER_OFFSET, Direction::Backward, "center");
        }
    } else if b < 0.0 {
        push(ChartId::U2, 0.0, SEED_OFFSET, Direction::Forward, "unstable");
        push(ChartId::V2, 0.0, -SEED_OFFSET, Direction::Backward, "stable");
    }
    if b < -0.5 {
        // hyperbolic sector boundaries of the nilpotent point lie in the disc:
        // they leave along z2 = w* z1^2 on either side of the z2 axis
        let w = -(b + 0.5);
        let e = NILPOTENT_OFFSET;
        push(ChartId::U1, e, w * e * e, Direction::Forward, "nilpotent out");
        push(ChartId::U1, -e, w * e * e, Direction::Backward, "nilpotent in");
    }
    seeds
}

/// Point at arc-length fraction `f` of a polyline.
fn at_fraction(p: &[DiscPoint<f64>], f: f64) -> DiscPoint<f64> {
    let total: f64 = p.windows(2).map(|w| w[0].dist(&w[1])).sum();
    let target = f * total;
    let mut acc = 0.0;
    for w in p.windows(2) {
        let l = w[0].dist(&w[1]);
        if acc + l >= target && l > 0.0 {
            let s = (target - acc) / l;
            return DiscPoint::new(w[0].u + s * (w[1].u - w[0].u), w[0].v + s * (w[1].v - w[0].v));
        }
        acc += l;
    }
    *p.last().unwrap()
}

fn seg_dist(q: &DiscPoint<f64>, a: &DiscPoint<f64>, b: &DiscPoint<f64>) -> f64 {
    let (dx, dy) = (b.u - a.u, b.v - a.v);
    let l2 = dx * dx + dy * dy;
    let s = if l2 == 0.0 { 0.0 } else { (((q.u - a.u) * dx + (q.v - a.v) * dy) / l2).clamp(0.0, 1.0) };
    (q.u - a.u - s * dx).hypot(q.v - a.v - s * dy)
}

pub fn polyline_dist(q: &DiscPoint<f64>, p: &[DiscPoint<f64>]) -> f64 {
    if p.len() == 1 {
        return q.dist(&p[0]);
    }
    p.windows(2).map(|w| seg_dist(q, &w[0], &w[1])).fold(f64::INFINITY, f64::min)
}

fn same_orbit(a: &[DiscPoint<f64>], b: &[DiscPoint<f64>]) -> bool {
    [0.2, 0.35, 0.5, 0.65, 0.8].iter().all(|&f| polyline_dist(&at_fraction(a, f), b) < 1e-3)
}

/// Keeps every point within 0.05 of either end and thins the rest to a
/// spacing of about 2e-3.
fn decimate(p: &[DiscPoint<f64>]) -> Vec<DiscPoint<f64>> {
    if p.len() < 3 {
        return p.to_vec();
    }
    let (first, last) = (p[0], *p.last().unwrap());
    let mut out = vec![first];
    for (i, q) in p.iter().enumerate().skip(1) {
        let near_end = q.dist(&first) < 0.05 || q.dist(&last) < 0.05;
        if i == p.len() - 1 || near_end || q.dist(out.last().unwrap()) >= 2e-3 {
            out.push(*q);
        }
    }
    out
}

/// Nodes absorb a polyline that passes within [`SNAP_RADIUS`] of them. This
/// is how saddle connections are closed: the transverse error of a traced
/// separatrix is amplified on the way into a saddle, so the orbit usually
/// misses the much smaller termination radius and runs on along the
/// outgoing branch.
///
/// Finite saddles get a wider gate. An orbit entering a saddle with transverse
/// error `e` passes it at a distance of about `e^(a / (a + d))`, with `a` and
/// `d` the arrival and departure rates, so with `e` near round-off a true
/// connection still misses a fixed radius whenever `d > a`.
#[derive(Debug, Clone, Copy)]
struct SaddleGate {
    node: usize,
    at: PlanePoint<f64>,
    /// plane radius for forward and backward traces
    radius: [f64; 2],
}

fn saddle_gates(info: &[crate::localanalysis::SingularPointInfo]) -> Vec<SaddleGate> {
    info.iter()
        .enumerate()
        .filter(|(_, i)| i.kind == PointKind::Saddle)
        .map(|(k, i)| {
            let (mut ls, mut lu) = (0.0f64, 0.0f64);
            for d in &i.separatrix_directions {
                match d.role {
                    DirRole::Stable => ls = d.eigenvalue.abs(),
                    DirRole::Unstable => lu = d.eigenvalue.abs(),
                    _ => {}
                }
            }
            let r = |a: f64, d: f64| SADDLE_MISS.powf(a / (a + d)).min(0.05);
            SaddleGate { node: k, at: i.location, radius: [r(ls, lu), r(lu, ls)] }
        })
        .collect()
}

fn snap(o: &mut Orbit, start: usize, dir: Direction, nodes: &[SkelNode], targets: &[Target], gates: &[SaddleGate]) -> Option<usize> {
    let gi = if dir == Direction::Forward { 0 } else { 1 };
    let p0 = o.samples.first()?.plane();
    let mut gate_armed: Vec<bool> = gates.iter().map(|g| g.node != start).collect();
    let gate_arm: Vec<f64> = gates
        .iter()
        .map(|g| 2.0 * g.radius[gi].max(p0.map(|q| (q.x - g.at.x).hypot(q.y - g.at.y)).unwrap_or(0.0)))
        .collect();
    let snappable: Vec<usize> = (0..nodes.len())
        .filter(|&j| targets.iter().any(|t| t.id == nodes[j].id && t.capture == Capture::Always))
        .collect();
    let first = o.samples.first()?.disc;
    let arm_at: Vec<f64> = snappable.iter().map(|&j| 2.0 * first.dist(&nodes[j].disc).max(SNAP_RADIUS)).collect();
    let mut armed: Vec<bool> = snappable.iter().map(|&j| j != start && first.dist(&nodes[j].disc) > SNAP_RADIUS).collect();
    for k in 1..o.samples.len() {
        if let Some(q) = o.samples[k].plane() {
            for (i, g) in gates.iter().enumerate() {
                let d = (q.x - g.at.x).hypot(q.y - g.at.y);
                if !gate_armed[i] {
                    gate_armed[i] = d >= gate_arm[i];
                    continue;
                }
                if d < g.radius[gi] {
                    o.samples.truncate(k + 1);
                    o.termination = Termination::SingularPoint(nodes[g.node].id);
                    return Some(g.node);
                }
            }
        }
        let (a, b) = (o.samples[k - 1].disc, o.samples[k].disc);
        for (i, &j) in snappable.iter().enumerate() {
            let q = nodes[j].disc;
            if !armed[i] {
                if b.dist(&q) >= arm_at[i] {
                    armed[i] = true;
                }
                continue;
            }
            if seg_dist(&q, &a, &b) < SNAP_RADIUS {
                o.samples.truncate(k + 1);
                o.termination = match nodes[j].id {
                    NodeId::Inf(_) => Termination::InfinityPoint(nodes[j].id),
                    id => Termination::SingularPoint(id),
                };
                return Some(j);
            }
        }
    }
    None
}

/// Offset of `start`'s orbit from `m`, measured on the line through `m`
/// normal to the flow.
fn section_gap(p: &Params<f64>, m: [f64; 2], start: [f64; 2]) -> Option<f64> {
    let field = |z: &[f64; 2]| {
        let (a, b) = eval_field(p, &PlanePoint::new(z[0], z[1]));
        [a, b]
    };
    let fm = field(&m);
    let nf = fm[0].hypot(fm[1]);
    if nf == 0.0 {
        return None;
    }
    let t = [fm[0] / nf, fm[1] / nf];
    let along = |v: &[f64; 2]| (v[0] - m[0]) * t[0] + (v[1] - m[1]) * t[1];
    let sgn = if along(&start) < 0.0 { 1.0 } else { -1.0 };
    let g = |z: &[f64; 2]| {
        let f = field(z);
        [sgn * f[0], sgn * f[1]]
    };
    let (mut y, mut fy) = (start, g(&start));
    // a short hop only: orbits passing a saddle on the way can land anywhere
    let reach = 2.0 * (start[0] - m[0]).hypot(start[1] - m[1]);
    let mut h = 0.1 * reach / nf;
    for _ in 0..20_000 {
        let (y1, f1, err) = dopri_step(&g, &y, &fy, h);
        let en = error_norm(&err, &y, &y1, 1e-13);
        if en > 1.0 {
            h *= step_factor(en);
            continue;
        }
        if (along(&y) < 0.0) != (along(&y1) < 0.0) || along(&y1) == 0.0 {
            let (mut lo, mut hi, mut q) = (0.0, h, y1);
            let side = along(&y) < 0.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let (ym, _, _) = dopri_step(&g, &y, &fy, mid);
                if (along(&ym) < 0.0) == side {
                    lo = mid;
                } else {
                    hi = mid;
                    q = ym;
                }
            }
            return Some((q[0] - m[0]) * -t[1] + (q[1] - m[1]) * t[0]);
        }
        if (y1[0] - m[0]).hypot(y1[1] - m[1]) > reach {
            return None;
        }
        y = y1;
        fy = f1;
        h = (h * step_factor(en)).min(0.25 * reach / nf);
    }
    None
}

/// Sample indices (on `fw`, on `bw`) where the two orbits coincide, away
/// from both saddles.
fn branch_match(p: &Params<f64>, fw: &Orbit, bw: &Orbit, a: PlanePoint<f64>, b: PlanePoint<f64>) -> Option<(usize, usize)> {
    let pts = |o: &Orbit| -> Vec<Option<[f64; 2]>> {
        o.samples.iter().map(|s| s.plane().filter(|q| q.x.hypot(q.y) < 1e3).map(|q| [q.x, q.y])).collect()
    };
    let (pf, pb) = (pts(fw), pts(bw));
    let r0 = if a == b { 0.05 } else { (0.25 * (a.x - b.x).hypot(a.y - b.y)).max(0.05) };
    let clear = |q: &[f64; 2]| (q[0] - a.x).hypot(q[1] - a.y) >= r0 && (q[0] - b.x).hypot(q[1] - b.y) >= r0;
    let mut best: Option<(f64, usize, usize)> = None;
    for (k, q) in pf.iter().enumerate() {
        let Some(q) = q.filter(|q| clear(q)) else { continue };
        for (l, w) in pb.iter().enumerate() {
            let Some(w) = w.filter(|w| clear(w)) else { continue };
            let d = (q[0] - w[0]).hypot(q[1] - w[1]);
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, k, l));
            }
        }
    }
    let (d, k, l) = best?;
    // nearest samples of one orbit lie within a step of each other
    let step = |v: &[Option<[f64; 2]>], i: usize| {
        [i.saturating_sub(1), i + 1]
            .iter()
            .filter_map(|&j| Some((v.get(j).copied()??, v[i]?)))
            .map(|(x, y)| (x[0] - y[0]).hypot(x[1] - y[1]))
            .fold(0.0, f64::max)
    };
    if d > step(&pf, k).max(step(&pb, l)) {
        return None;
    }
    let m = pf[k]?;
    let gap = section_gap(p, m, pb[l]?)?;
    (gap.abs() < CONNECTION_GAP * (1.0 + m[0].hypot(m[1]))).then_some((k, l))
}

/// Saddle connections that shooting from one end cannot close: the miss
/// at the far saddle grows like e^(a/(a+d)) for transverse error e. The
/// unstable branch of one saddle and the stable branch of the other are
/// compared on a section between them, where both carry only round-off.
fn match_connections(p: &Params<f64>, seeds: &[Seed], nodes: &[SkelNode], info: &[crate::localanalysis::SingularPointInfo], traced: &mut [(Orbit, Option<usize>)]) {
    let saddle = |s: &Seed| match nodes[s.node].id {
        NodeId::Fin(i) => info[i].kind == PointKind::Saddle,
        _ => false,
    };
    let loc = |n: usize| match nodes[n].id {
        NodeId::Fin(i) => info[i].location,
        _ => unreachable!(),
    };
    for i in 0..seeds.len() {
        if seeds[i].direction != Direction::Forward || !saddle(&seeds[i]) {
            continue;
        }
        for j in 0..seeds.len() {
            if seeds[j].direction != Direction::Backward || !saddle(&seeds[j]) {
                continue;
            }
            let (a, b) = (seeds[i].node, seeds[j].node);
            if traced[i].1 == Some(b) && traced[j].1 == Some(a) {
                continue;
            }
            let Some((k, l)) = branch_match(p, &traced[i].0, &traced[j].0, loc(a), loc(b)) else { continue };
            let (fw, bw) = (traced[i].0.clone(), traced[j].0.clone());
            let splice = |head: &Orbit, n: usize, tail: &Orbit, m: usize, end: usize| {
                let mut o = head.clone();
                o.samples.truncate(n + 1);
                o.samples.extend(tail.samples[..=m].iter().rev().copied());
                o.termination = Termination::SingularPoint(nodes[end].id);
                (o, Some(end))
            };
            traced[i] = splice(&fw, k, &bw, l, b);
            traced[j] = splice(&bw, l, &fw, k, a);
        }
    }
}

fn trace_all(p: &Params<f64>, seeds: &[Seed], nodes: &[SkelNode], targets: &[Target], gates: &[SaddleGate], cfg: &FlowConfig) -> Vec<(Orbit, Option<usize>)> {
    seeds
        .par_iter()
        .map(|s| {
            let mut o = integrate_chart(p, s.start, s.direction, cfg, targets);
            let end = snap(&mut o, s.node, s.direction, nodes, targets, gates)
                .or_else(|| o.termination.node().and_then(|id| nodes.iter().position(|n| n.id == id)));
            (o, end)
        })
        .collect()
}

/// Traces every separatrix and assembles the skeleton with its faces.
pub fn trace_separatrices(p: &Params<f64>) -> Result<Skeleton, SkeletonError> {
    trace_separatrices_with(p, &TraceConfig::default())
}

pub fn trace_separatrices_with(p: &Params<f64>, cfg: &TraceConfig) -> Result<Skeleton, SkeletonError> {
    if is_q1(p) {
        return line_skeleton(p, cfg);
    }
    let info = classify_finite(p);
    let mut nodes: Vec<SkelNode> = info
        .iter()
        .enumerate()
        .map(|(i, inf)| SkelNode {
            id: NodeId::Fin(i),
            name: inf.name(),
            disc: plane_to_disc(&inf.location),
            label: NodeLabel::of_finite(inf.kind),
        })
        .collect();
    let finite_points = nodes.len();
    nodes.extend(infinite_nodes(p));
    let mut edges = boundary_edges(&nodes);

    let mut seeds = finite_seeds(p, &nodes);
    seeds.extend(infinite_seeds(p, &nodes));
    let targets = default_targets(p);
    let mut traced = trace_all(p, &seeds, &nodes, &targets, &saddle_gates(&info), &cfg.flow);
    match_connections(p, &seeds, &nodes, &info, &mut traced);

    let mut traces = Vec::new();
    let mut polys: Vec<(usize, usize, Vec<DiscPoint<f64>>, usize)> = Vec::new();
    for (k, (s, (o, end))) in seeds.iter().zip(&traced).enumerate() {
        let mut rec = TraceRecord { origin: s.origin.clone(), node: s.node, direction: s.direction, termination: o.termination, duplicate_of: None };
        let Some(end) = *end else {
            traces.push(rec);
            return Err(SkeletonError::Unresolved { origin: s.origin.clone(), termination: o.termination });
        };
        let mut pts = vec![nodes[s.node].disc];
        pts.extend(o.samples.iter().map(|x| x.disc));
        pts.push(nodes[end].disc);
        let (from, to) = match s.direction {
            Direction::Forward => (s.node, end),
            Direction::Backward => {
                pts.reverse();
                (end, s.node)
            }
        };
        if let Some(&(_, _, _, first)) = polys.iter().find(|(f, t, q, _)| *f == from && *t == to && same_orbit(&pts, q)) {
            rec.duplicate_of = Some(first);
        } else {
            polys.push((from, to, pts, k));
        }
        traces.push(rec);
    }
    for (from, to, pts, k) in polys {
        edges.push(SkelEdge { from, to, kind: EdgeKind::Separatrix, directed: true, polyline: pts, origin: seeds[k].origin.clone() });
    }
    assemble(p, nodes, edges, finite_points, traces, false, &targets, cfg)
}

/// q1: the line x = 0 is singular; off it orbits are the parabolas
/// x = C + y - y^2/2, and the one tangent to the line at (0,1) is the only
/// orbit separating behaviours in x < 0.
fn line_skeleton(p: &Params<f64>, cfg: &TraceConfig) -> Result<Skeleton, SkeletonError> {
    let mut nodes = infinite_nodes(p);
    nodes.push(SkelNode { id: NodeId::Tangency, name: "T(0,1)".into(), disc: plane_to_disc(&PlanePoint::new(0.0, 1.0)), label: NodeLabel::LinePoint });
    let t = nodes.len() - 1;
    let idx = |ch: ChartId| nodes.iter().position(|n| n.id == NodeId::Inf(ch)).unwrap();
    let mut edges = boundary_edges(&nodes);
    let ray = |f: &dyn Fn(f64) -> PlanePoint<f64>| -> Vec<DiscPoint<f64>> {
        let mut v: Vec<DiscPoint<f64>> = (0..=2000).map(|k| plane_to_disc(&f(10f64.powf(-6.0 + 14.0 * k as f64 / 2000.0)))).collect();
        v.insert(0, plane_to_disc(&f(0.0)));
        v
    };
    let mut up = ray(&|s| PlanePoint::new(0.0, 1.0 + s));
    up.push(nodes[idx(ChartId::U2)].disc);
    let mut down = ray(&|s| PlanePoint::new(0.0, 1.0 - s));
    down.push(nodes[idx(ChartId::V2)].disc);
    let mut upper = ray(&|s| PlanePoint::new(-s * s / 2.0, 1.0 + s));
    upper.push(nodes[idx(ChartId::V1)].disc);
    let mut lower = ray(&|s| PlanePoint::new(-s * s / 2.0, 1.0 - s));
    lower.push(nodes[idx(ChartId::V1)].disc);
    // in x < 0 the flow runs downwards (dy/dt = x), so the upper branch enters T
    upper.reverse();
    edges.push(SkelEdge { from: t, to: idx(ChartId::U2), kind: EdgeKind::SingularLine, directed: false, polyline: up, origin: "singular line y>1".into() });
    edges.push(SkelEdge { from: t, to: idx(ChartId::V2), kind: EdgeKind::SingularLine, directed: false, polyline: down, origin: "singular line y<1".into() });
    edges.push(SkelEdge { from: idx(ChartId::V1), to: t, kind: EdgeKind::Separatrix, directed: true, polyline: upper, origin: "tangent parabola upper".into() });
    edges.push(SkelEdge { from: t, to: idx(ChartId::V1), kind: EdgeKind::Separatrix, directed: true, polyline: lower, origin: "tangent parabola lower".into() });
    let mut targets: Vec<Target> = default_targets(p).into_iter().filter(|tg| matches!(tg.id, NodeId::Inf(_))).collect();
    targets.push(Target { id: NodeId::Tangency, disc: DiscPoint::new(0.0, 0.0), capture: Capture::LineX0 });
    assemble(p, nodes, edges, 1, Vec::new(), true, &targets, cfg)
}

/// Polar angle, seen from the tail, where the dart first leaves radius `rho`.
fn departure_angle(pts: &[DiscPoint<f64>], rho: f64) -> f64 {
    let c = pts[0];
    for w in pts.windows(2) {
        let (d0, d1) = (w[0].dist(&c), w[1].dist(&c));
        if d1 >= rho {
            let s = if d1 > d0 { ((rho - d0) / (d1 - d0)).clamp(0.0, 1.0) } else { 1.0 };
            let q = DiscPoint::new(w[0].u + s * (w[1].u - w[0].u), w[0].v + s * (w[1].v - w[0].v));
            return (q.v - c.v).atan2(q.u - c.u);
        }
    }
    let q = pts.last().unwrap();
    (q.v - c.v).atan2(q.u - c.u)
}

fn face_polygon(sk: &Skeleton, darts: &[usize]) -> Vec<DiscPoint<f64>> {
    let mut out = Vec::new();
    for &d in darts {
        out.extend(decimate(&sk.dart_points(d)));
    }
    out
}

fn signed_area(p: &[DiscPoint<f64>]) -> f64 {
    let n = p.len();
    (0..n).map(|i| p[i].u * p[(i + 1) % n].v - p[(i + 1) % n].u * p[i].v).sum::<f64>() / 2.0
}

/// Winding number of a closed polygon around `q`.
pub fn winding(poly: &[DiscPoint<f64>], q: &DiscPoint<f64>) -> i32 {
    let n = poly.len();
    let mut wn = 0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let cross = (b.u - a.u) * (q.v - a.v) - (q.u - a.u) * (b.v - a.v);
        if a.v <= q.v {
            if b.v > q.v && cross > 0.0 {
                wn += 1;
            }
        } else if b.v <= q.v && cross < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn locate_in(polys: &[Vec<DiscPoint<f64>>], faces: &[Face], main: usize, q: &DiscPoint<f64>) -> Option<usize> {
    faces
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.outer && f.component == main)
        .find(|(i, _)| winding(&polys[*i], q) != 0)
        .map(|(i, _)| i)
}

fn limit_of(o: &Orbit, nodes: &[SkelNode], start: &DiscPoint<f64>, p: &Params<f64>) -> LimitSet {
    match o.termination {
        Termination::SingularPoint(id) | Termination::InfinityPoint(id) => {
            nodes.iter().position(|n| n.id == id).map(LimitSet::Node).unwrap_or(LimitSet::Unknown)
        }
        Termination::SingularLine => LimitSet::Line,
        _ => match closed_or_cycle(p, o, start) {
            OrbitShape::Closed => LimitSet::Closed,
            OrbitShape::Cycle => LimitSet::Cycle,
            OrbitShape::Open => LimitSet::Unknown,
        },
    }
}

/// Representative orbit in one direction. Orbits still undecided after the
/// short budget (slow approach to a weakly hyperbolic node, long periods
/// near a separatrix loop) are continued with the separatrix time budget.
fn rep_orbit(
    p: &Params<f64>,
    start: ChartPoint<f64>,
    dir: Direction,
    nodes: &[SkelNode],
    q: &DiscPoint<f64>,
    cfg: &TraceConfig,
    targets: &[Target],
) -> (Orbit, LimitSet) {
    let mut o = integrate_chart(p, start, dir, &cfg.rep_flow, targets);
    let mut lim = limit_of(&o, nodes, q, p);
    if lim == LimitSet::Unknown && o.termination == Termination::TMax {
        let end = o.end().chart_point();
        let more = FlowConfig { t_max: cfg.flow.t_max, ..cfg.rep_flow };
        let tail = integrate_chart(p, end, dir, &more, targets);
        let l = limit_of(&tail, nodes, q, p);
        if l != LimitSet::Unknown {
            lim = l;
            o.samples.extend(tail.samples.into_iter().skip(1));
            o.termination = tail.termination;
        }
    }
    (o, lim)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    p: &Params<f64>,
    nodes: Vec<SkelNode>,
    edges: Vec<SkelEdge>,
    finite_points: usize,
    traces: Vec<TraceRecord>,
    degenerate_line: bool,
    targets: &[Target],
    cfg: &TraceConfig,
) -> Result<Skeleton, SkeletonError> {
    let nv = nodes.len();
    let nd = 2 * edges.len();
    let tail = |d: usize| if d.is_multiple_of(2) { edges[d / 2].from } else { edges[d / 2].to };
    let pts = |d: usize| -> Vec<DiscPoint<f64>> {
        let p = &edges[d / 2].polyline;
        if d.is_multiple_of(2) {
            p.clone()
        } else {
            p.iter().rev().copied().collect()
        }
    };

    // rotation system from departure angles at radius rho around each vertex
    let rho: Vec<f64> = (0..nv)
        .map(|i| {
            let near = (0..nv).filter(|&j| j != i).map(|j| nodes[i].disc.dist(&nodes[j].disc)).fold(f64::INFINITY, f64::min);
            0.02f64.min(0.3 * near)
        })
        .collect();
    let dart_pts: Vec<Vec<DiscPoint<f64>>> = (0..nd).map(pts).collect();
    let mut at_vertex: Vec<Vec<(f64, usize)>> = vec![Vec::new(); nv];
    for d in 0..nd {
        let v = tail(d);
        let e = &edges[d / 2];
        let a = if e.kind == EdgeKind::BoundaryArc {
            // exact tangent: every interior edge then sorts strictly inside,
            // however flat it leaves the circle
            let (c, q) = (dart_pts[d][0], dart_pts[d][1]);
            let turn = (c.u * (q.v - c.v) - c.v * (q.u - c.u)).signum();
            (turn * c.u).atan2(-turn * c.v)
        } else {
            departure_angle(&dart_pts[d], rho[v])
        };
        at_vertex[v].push((a, d));
    }
    for (v, list) in at_vertex.iter_mut().enumerate() {
        // at infinity measure from the inward normal so the branch cut lies outside
        let c = nodes[v].disc;
        let base = if c.norm() > 0.5 { (-c.v).atan2(-c.u) } else { 0.0 };
        let wrap = |a: f64| {
            let x = (a - base).rem_euclid(std::f64::consts::TAU);
            if x > std::f64::consts::PI { x - std::f64::consts::TAU } else { x }
        };
        for x in list.iter_mut() {
            x.0 = wrap(x.0);
        }
        // edges leaving along a common tangent are ordered where they have separated
        let pts_ref = &dart_pts;
        list.sort_by(|a, b| {
            if (a.0 - b.0).abs() > 1e-6 {
                return a.0.total_cmp(&b.0);
            }
            let mut r = 2.0 * rho[v];
            let mut diff = 0.0;
            while r < 1.0 {
                let da = departure_angle(&pts_ref[a.1], r);
                let db = departure_angle(&pts_ref[b.1], r);
                diff = (db - da + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
                if diff.abs() > 1e-3 {
                    break;
                }
                r *= 2.0;
            }
            0.0f64.total_cmp(&diff)
        });
    }
    let mut rotation = vec![0; nd];
    let mut rotation_cw = vec![0; nd];
    for list in at_vertex.iter_mut() {
        let n = list.len();
        for k in 0..n {
            rotation[list[k].1] = list[(k + 1) % n].1;
            rotation_cw[list[k].1] = list[(k + n - 1) % n].1;
        }
    }

    // faces: leftmost turn at each head keeps the face on the left
    let mut dart_face = vec![usize::MAX; nd];
    let mut face_darts: Vec<Vec<usize>> = Vec::new();
    for d0 in 0..nd {
        if dart_face[d0] != usize::MAX {
            continue;
        }
        let f = face_darts.len();
        let mut walk = Vec::new();
        let mut d = d0;
        while dart_face[d] == usize::MAX {
            dart_face[d] = f;
            walk.push(d);
            d = rotation_cw[d ^ 1];
        }
        face_darts.push(walk);
    }

    // components
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(par: &mut [usize], mut a: usize) -> usize {
        while par[a] != a {
            par[a] = par[par[a]];
            a = par[a];
        }
        a
    }
    for e in &edges {
        let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
        parent[a] = b;
    }
    let mut roots: Vec<usize> = (0..nv).map(|i| find(&mut parent, i)).collect();
    let mut uniq = roots.clone();
    uniq.sort();
    uniq.dedup();
    for r in roots.iter_mut() {
        *r = uniq.iter().position(|u| u == r).unwrap();
    }
    let component_of_node = roots;
    let components = uniq.len();
    let u1 = nodes.iter().position(|n| n.id == NodeId::Inf(ChartId::U1)).unwrap();
    let main_component = component_of_node[u1];

    let mut sk = Skeleton {
        b: p.b64(),
        c: p.c64(),
        nodes,
        edges,
        finite_points,
        limit_cycles: 0,
        rotation,
        dart_face,
        faces: Vec::new(),
        component_of_node,
        components,
        main_component,
        rotation_regions: 0,
        euler_regions: 0,
        fill_regions: 0,
        traces,
        degenerate_line,
        diagnostics: Vec::new(),
    };
    let mut faces: Vec<Face> = face_darts
        .into_iter()
        .map(|darts| {
            let component = sk.component_of_node[sk.tail(darts[0])];
            Face { darts, outer: false, component, rep: None, nested: Vec::new() }
        })
        .collect();
    // outer face: the side of a boundary arc with negative (clockwise) area
    let polys: Vec<Vec<DiscPoint<f64>>> = faces.iter().map(|f| face_polygon(&sk, &f.darts)).collect();
    for d in [0usize, 1] {
        let f = sk.dart_face[d];
        if signed_area(&polys[f]) < 0.0 {
            faces[f].outer = true;
        }
    }

    let nontrivial_other = (0..components)
        .filter(|&c| c != main_component)
        .filter(|&c| sk.edges.iter().any(|e| sk.component_of_node[e.from] == c))
        .count();
    sk.rotation_regions = faces.len() - 1 - nontrivial_other;
    sk.euler_regions = sk.edges.len() + components - nv;

    // nested components
    for comp in 0..components {
        if comp == main_component {
            continue;
        }
        let v = (0..nv).find(|&i| sk.component_of_node[i] == comp).unwrap();
        if let Some(f) = locate_in(&polys, &faces, main_component, &sk.nodes[v].disc) {
            faces[f].nested.push(comp);
        }
    }

    // region fill: seeded samples, best clearance per face, then offsets off
    // boundary edges for faces no sample reached
    let geom: Vec<Vec<DiscPoint<f64>>> = sk.edges.iter().map(|e| decimate(&e.polyline)).collect();
    let clearance = |q: &DiscPoint<f64>| geom.iter().map(|g| polyline_dist(q, g)).fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Vec<Option<(f64, DiscPoint<f64>)>> = vec![None; faces.len()];
    for _ in 0..cfg.samples {
        let r = 0.995 * rng.gen::<f64>().sqrt();
        let a = rng.gen::<f64>() * std::f64::consts::TAU;
        let q = DiscPoint::new(r * a.cos(), r * a.sin());
        if let Some(f) = locate_in(&polys, &faces, main_component, &q) {
            let cl = clearance(&q);
            if best[f].is_none_or(|(c0, _)| cl > c0) {
                best[f] = Some((cl, q));
            }
        }
    }
    for (f, face) in faces.iter().enumerate() {
        if face.outer || face.component != main_component || best[f].is_some() {
            continue;
        }
        'search: for &d in &face.darts {
            let pp = sk.dart_points(d);
            for frac in [0.5, 0.3, 0.7] {
                let m = at_fraction(&pp, frac);
                let m2 = at_fraction(&pp, frac + 1e-3);
                let (tu, tv) = (m2.u - m.u, m2.v - m.v);
                let n = tu.hypot(tv);
                if n == 0.0 {
                    continue;
                }
                for off in [1e-2, 3e-3, 1e-3, 3e-4] {
                    // left normal
                    let q = DiscPoint::new(m.u - off * tv / n, m.v + off * tu / n);
                    if q.norm() < 1.0 && locate_in(&polys, &faces, main_component, &q) == Some(f) {
                        best[f] = Some((clearance(&q), q));
                        break 'search;
                    }
                }
            }
        }
    }

    let rep_targets = targets.to_vec();
    let reps: Vec<Option<FaceRep>> = best
        .par_iter()
        .map(|b| {
            let (_, q) = (*b)?;
            let start = disc_to_chart(&q);
            let (fw, omega) = rep_orbit(p, start, Direction::Forward, &sk.nodes, &q, cfg, &rep_targets);
            let (bw, alpha) = rep_orbit(p, start, Direction::Backward, &sk.nodes, &q, cfg, &rep_targets);
            let mut orbit: Vec<DiscPoint<f64>> = bw.samples.iter().rev().map(|s| s.disc).collect();
            orbit.extend(fw.samples.iter().skip(1).map(|s| s.disc));
            Some(FaceRep { point: q, alpha, omega, orbit: decimate(&orbit) })
        })
        .collect();
    for (f, r) in reps.into_iter().enumerate() {
        faces[f].rep = r;
    }
    sk.fill_regions = faces.iter().filter(|f| f.rep.is_some()).count()
        + (0..components).filter(|&c| c != main_component).map(|c| inner_regions(&sk, c)).sum::<usize>();
    sk.limit_cycles = faces
        .iter()
        .filter_map(|f| f.rep.as_ref())
        .filter(|r| r.alpha == LimitSet::Cycle || r.omega == LimitSet::Cycle)
        .count();
    sk.faces = faces;

    if sk.rotation_regions != sk.euler_regions || sk.fill_regions != sk.euler_regions {
        let e = SkeletonError::FaceMismatch { rotation: sk.rotation_regions, euler: sk.euler_regions, fill: sk.fill_regions };
        sk.diagnostics.push(e.to_string());
        return Err(e);
    }
    Ok(sk)
}

/// Regions enclosed by a nested component (zero for trees and isolated points).
fn inner_regions(sk: &Skeleton, comp: usize) -> usize {
    let v = (0..sk.nodes.len()).filter(|&i| sk.component_of_node[i] == comp).count();
    let e = sk.edges.iter().filter(|e| sk.component_of_node[e.from] == comp).count();
    (e + 1).saturating_sub(v)
}

/// (S, R): S = 4 boundary arcs + 4 infinite points + finite singular points
/// + limit cycles + traced separatrices; R from the planar subdivision.
pub fn count_sr(sk: &Skeleton) -> Result<(usize, usize), SkeletonError> {
    if sk.rotation_regions != sk.euler_regions {
        return Err(SkeletonError::FaceMismatch { rotation: sk.rotation_regions, euler: sk.euler_regions, fill: sk.fill_regions });
    }
    let s = sk.boundary_arcs() + sk.infinite_nodes() + sk.finite_points + sk.limit_cycles + sk.separatrices();
    Ok((s, sk.euler_regions))
}
