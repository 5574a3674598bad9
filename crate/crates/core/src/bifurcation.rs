//! Parameter-plane arrangement.
//!
//! The curves b = 0, c = 1, c = b + 1, c = 2b + 1 and D1 = 0 cut the domain
//! c > 0, b > -1 into regions, curve segments and points. Curve intersections
//! are computed exactly; D1 = 0 is handled through its rational
//! parametrisation (c, b) = ((u^2 + 1)/2, (u + 3)(u - 1)/4), so splitting an
//! arc is a matter of sorting parameter values. Regions come from a raster.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::OnceLock;

use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::flow::signature::{equivalence, signature, TopoSignature, Variant};
use crate::flow::skeleton::{count_sr, trace_separatrices_with, SkeletonError, TraceConfig};
use crate::localanalysis::{BifurcationValues, Sign, SignVector, STRATUM_TOL};
use crate::model::Params;
use crate::{rat, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Curve {
    G0,
    G1,
    G2,
    G3,
    D1,
}

impl Curve {
    pub const ALL: [Curve; 5] = [Curve::G0, Curve::G1, Curve::G2, Curve::G3, Curve::D1];

    pub fn name(self) -> &'static str {
        SignVector::NAMES[self as usize]
    }

    /// `(a, beta, gamma)` with the line written `a c + beta b + gamma = 0`.
    fn line(self) -> Option<[i64; 3]> {
        match self {
            Curve::G0 => Some([0, 1, 0]),
            Curve::G1 => Some([1, 0, -1]),
            Curve::G2 => Some([-1, 1, 1]),
            Curve::G3 => Some([-1, 2, 1]),
            Curve::D1 => None,
        }
    }

    /// Value of the defining function at (c, b).
    pub fn value(self, c: f64, b: f64) -> f64 {
        match self {
            Curve::G0 => b,
            Curve::G1 => c - 1.0,
            Curve::G2 => b - c + 1.0,
            Curve::G3 => 2.0 * b - c + 1.0,
            Curve::D1 => c * c - 4.0 * c * b + 4.0 * b * b - 6.0 * c + 8.0 * b + 5.0,
        }
    }

    fn gradient(self, c: f64, b: f64) -> [f64; 2] {
        match self {
            Curve::G0 => [0.0, 1.0],
            Curve::G1 => [1.0, 0.0],
            Curve::G2 => [-1.0, 1.0],
            Curve::G3 => [-1.0, 2.0],
            Curve::D1 => [2.0 * c - 4.0 * b - 6.0, -4.0 * c + 8.0 * b + 8.0],
        }
    }

    /// First-order distance estimate from (c, b) to the curve.
    pub fn distance(self, c: f64, b: f64) -> f64 {
        let g = self.gradient(c, b);
        let n = g[0].hypot(g[1]);
        if n == 0.0 {
            self.value(c, b).abs().sqrt()
        } else {
            self.value(c, b).abs() / n
        }
    }

    /// Natural parameter along the curve: c on b = 0, u on D1 = 0, b elsewhere.
    pub fn param(self, c: f64, b: f64) -> f64 {
        match self {
            Curve::G0 => c,
            Curve::D1 => 2.0 - c + 2.0 * b,
            _ => b,
        }
    }

    /// Point of the curve at parameter `t`, as (c, b).
    pub fn point(self, t: f64) -> (f64, f64) {
        match self {
            Curve::G0 => (t, 0.0),
            Curve::G1 => (1.0, t),
            Curve::G2 => (t + 1.0, t),
            Curve::G3 => (2.0 * t + 1.0, t),
            Curve::D1 => ((t * t + 1.0) / 2.0, (t + 3.0) * (t - 1.0) / 4.0),
        }
    }

    fn param_exact(self, c: &Rat, b: &Rat) -> Rat {
        match self {
            Curve::G0 => c.clone(),
            Curve::D1 => rat(2, 1) - c + rat(2, 1) * b,
            _ => b.clone(),
        }
    }
}

/// Parameter window (c_min, c_max] x (b_min, b_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub c_min: f64,
    pub c_max: f64,
    pub b_min: f64,
    pub b_max: f64,
}

impl Default for Window {
    fn default() -> Self {
        Self { c_min: 0.0, c_max: 8.0, b_min: -1.0, b_max: 4.0 }
    }
}

impl Window {
    fn contains_strictly(&self, c: f64, b: f64) -> bool {
        c > self.c_min && c < self.c_max && b > self.b_min && b < self.b_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Intersection {
    #[serde(serialize_with = "ser_rat")]
    pub c: Rat,
    #[serde(serialize_with = "ser_rat")]
    pub b: Rat,
    pub curves: Vec<Curve>,
}

fn ser_rat<S: serde::Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

impl Intersection {
    pub fn c64(&self) -> f64 {
        self.c.to_f64().unwrap()
    }

    pub fn b64(&self) -> f64 {
        self.b.to_f64().unwrap()
    }
}

fn in_domain(c: &Rat, b: &Rat) -> bool {
    c.is_positive() && *b > rat(-1, 1)
}

/// Exact rational square root, if there is one.
fn rat_sqrt(r: &Rat) -> Option<Rat> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    (&n * &n == *r.numer() && &d * &d == *r.denom()).then(|| Rat::new(n, d))
}

/// All meeting points of the five curves inside the open domain, exactly.
/// Tangential contacts count as meetings.
pub fn intersections() -> Vec<Intersection> {
    let mut pts: Vec<(Rat, Rat)> = Vec::new();
    let lines: Vec<(Curve, [Rat; 3])> =
        Curve::ALL.iter().filter_map(|&k| k.line().map(|l| (k, l.map(|x| rat(x, 1))))).collect();
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let ([a1, b1, g1], [a2, b2, g2]) = (&lines[i].1, &lines[j].1);
            let det = a1 * b2 - a2 * b1;
            if det.is_zero() {
                continue;
            }
            let c = (b1 * g2 - b2 * g1) / &det;
            let b = (a2 * g1 - a1 * g2) / &det;
            pts.push((c, b));
        }
    }
    // line through the D1 parametrisation: quadratic in u
    for (_, [a, be, g]) in &lines {
        let q2 = a / rat(2, 1) + be / rat(4, 1);
        let q1 = be / rat(2, 1);
        let q0 = a / rat(2, 1) - be * rat(3, 4) + g;
        let roots: Vec<Rat> = if q2.is_zero() {
            if q1.is_zero() {
                vec![]
            } else {
                vec![-&q0 / &q1]
            }
        } else {
            let disc = &q1 * &q1 - rat(4, 1) * &q2 * &q0;
            match rat_sqrt(&disc) {
                Some(s) => vec![(-&q1 + &s) / (rat(2, 1) * &q2), (-&q1 - &s) / (rat(2, 1) * &q2)],
                None => {
                    assert!(disc.is_negative(), "irrational meeting point");
                    vec![]
                }
            }
        };
        for u in roots {
            let c = (&u * &u + rat(1, 1)) / rat(2, 1);
            let b = (&u + rat(3, 1)) * (&u - rat(1, 1)) / rat(4, 1);
            pts.push((c, b));
        }
    }
    pts.retain(|(c, b)| in_domain(c, b));
    pts.sort();
    pts.dedup();
    pts.into_iter()
        .map(|(c, b)| {
            let p = Params::new(b.clone(), c.clone()).unwrap();
            let v = BifurcationValues::new(&p);
            let vals = [&v.g0, &v.g1, &v.g2, &v.g3, &v.d1];
            let curves = Curve::ALL.iter().zip(vals).filter(|(_, x)| x.is_zero()).map(|(k, _)| *k).collect();
            Intersection { c, b, curves }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CellKind {
    Region,
    Segment,
    Point,
}

#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub kind: CellKind,
    pub sign_vector: SignVector,
    pub sample: Params<f64>,
    pub canonical_id: String,
    /// carrying curve of a segment
    pub curve: Option<Curve>,
    /// parameter interval of a segment along its curve (clipped to the window)
    pub span: Option<(f64, f64)>,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at (c={}, b={})", self.canonical_id, self.sample.c64(), self.sample.b64())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BifurcationError {
    #[error("window too small; missing points (c, b): {missing:?}")]
    WindowTooSmall { missing: Vec<(f64, f64)> },
    #[error("expected {expected} cells of kind {kind:?}, found {found}")]
    CellCount { kind: CellKind, expected: usize, found: usize },
    #[error("cell {cell}: {source}")]
    Skeleton { cell: String, source: SkeletonError },
    #[error("census mismatch:\n{0}")]
    Census(Box<CensusDiff>),
}

#[derive(Debug, Clone, Serialize)]
pub struct Arrangement {
    pub window: Window,
    pub cells: Vec<Cell>,
    pub intersections: Vec<Intersection>,
    #[serde(skip)]
    pub raster: Raster,
}

/// Pixel grid behind the region cells; `label` indexes `cells` (regions come
/// first) or is `u32::MAX` on a curve or a discarded speck.
#[derive(Debug, Clone, Default)]
pub struct Raster {
    pub c0: f64,
    pub b0: f64,
    pub step: f64,
    pub nc: usize,
    pub nb: usize,
    pub label: Vec<u32>,
}

impl Raster {
    pub fn center(&self, k: usize) -> (f64, f64) {
        (self.c0 + ((k / self.nb) as f64 + 0.5) * self.step, self.b0 + ((k % self.nb) as f64 + 0.5) * self.step)
    }

    pub fn pixels_of(&self, region: usize) -> Vec<usize> {
        (0..self.label.len()).filter(|&k| self.label[k] == region as u32).collect()
    }
}

pub const REGIONS: usize = 12;
pub const SEGMENTS: usize = 13;
pub const POINTS: usize = 2;
/// Region samples keep at least this distance from every curve.
pub const CLEARANCE: f64 = 1e-3;

fn sign_vector(c: f64, b: f64) -> SignVector {
    SignVector(Curve::ALL.map(|k| Sign::of(k.value(c, b), 0.0)))
}

fn clearance(c: f64, b: f64) -> f64 {
    Curve::ALL.iter().map(|k| k.distance(c, b)).fold(f64::INFINITY, f64::min)
}

/// The line b = -1/2 is not one of the curves, but the point at infinity on
/// the x-axis changes type there and portraits on it are degenerate.
const HIDDEN_LINE_CLEARANCE: f64 = 0.02;

fn sample_ok(c: f64, b: f64) -> bool {
    clearance(c, b) >= CLEARANCE && (b + 0.5).abs() >= HIDDEN_LINE_CLEARANCE
}

/// Parameter intervals of a curve inside the domain and window.
fn curve_spans(k: Curve, w: &Window) -> Vec<(f64, f64)> {
    let (cl, bl) = (w.c_min.max(0.0), w.b_min.max(-1.0));
    match k {
        Curve::G0 => vec![(cl, w.c_max)],
        Curve::G1 => vec![(bl, w.b_max)],
        Curve::G2 => vec![(bl.max(cl - 1.0), w.b_max.min(w.c_max - 1.0))],
        Curve::G3 => vec![(bl.max((cl - 1.0) / 2.0), w.b_max.min((w.c_max - 1.0) / 2.0))],
        Curve::D1 => {
            // c <= c_max and b <= b_max bound u; c > c_min and b > b_min cut out bands
            let lo = (-(2.0 * w.c_max - 1.0).sqrt()).max(-1.0 - 2.0 * (w.b_max + 1.0).sqrt());
            let hi = (2.0 * w.c_max - 1.0).sqrt().min(-1.0 + 2.0 * (w.b_max + 1.0).sqrt());
            let mut bands = vec![(-1.0 - 2.0 * (bl + 1.0).sqrt(), -1.0 + 2.0 * (bl + 1.0).sqrt())];
            if 2.0 * cl - 1.0 > 0.0 {
                let r = (2.0 * cl - 1.0).sqrt();
                bands.push((-r, r));
            }
            let mut spans = vec![(lo, hi)];
            for (a, bnd) in bands {
                spans = spans
                    .into_iter()
                    .flat_map(|(s, e)| {
                        let mut out = Vec::new();
                        if s < a.min(e) {
                            out.push((s, a.min(e)));
                        }
                        if bnd.max(s) < e {
                            out.push((bnd.max(s), e));
                        }
                        out
                    })
                    .collect();
            }
            spans
        }
    }
}

fn segment_cells(w: &Window, inter: &[Intersection]) -> Vec<Cell> {
    let mut out = Vec::new();
    for k in Curve::ALL {
        let cuts: Vec<f64> = inter
            .iter()
            .filter(|i| i.curves.contains(&k))
            .map(|i| k.param_exact(&i.c, &i.b).to_f64().unwrap())
            .collect();
        let mut pieces = Vec::new();
        for (s, e) in curve_spans(k, w) {
            let mut bounds = vec![s];
            bounds.extend(cuts.iter().copied().filter(|&t| t > s && t < e));
            bounds.push(e);
            bounds.sort_by(f64::total_cmp);
            pieces.extend(bounds.windows(2).map(|x| (x[0], x[1])));
        }
        let samples: Vec<(f64, f64, (f64, f64))> = pieces
            .iter()
            .map(|&(s, e)| {
                let (mut c, mut b) = k.point(0.5 * (s + e));
                if (b + 0.5).abs() < HIDDEN_LINE_CLEARANCE {
                    (c, b) = k.point(0.25 * s + 0.75 * e);
                }
                (c, b, (s, e))
            })
            .collect();
        // b's sign names a segment when it tells this curve's pieces apart
        let b_signs: Vec<bool> = samples.iter().map(|x| x.1 > 0.0).collect();
        let by_b = k != Curve::G0 && (0..b_signs.len()).all(|i| (0..i).all(|j| b_signs[i] != b_signs[j]));
        for (c, b, span) in samples {
            let mut sv = sign_vector(c, b);
            sv.0[k as usize] = Sign::Zero;
            let tail = if by_b {
                if b > 0.0 { "b>0".to_string() } else { "b<0".to_string() }
            } else {
                Curve::ALL
                    .iter()
                    .filter(|&&o| o != k)
                    .map(|&o| format!("{}{}", o.name(), sv.0[o as usize].symbol()))
                    .collect::<Vec<_>>()
                    .join(",")
            };
            out.push(Cell {
                kind: CellKind::Segment,
                sign_vector: sv,
                sample: Params::new(b, c).unwrap(),
                canonical_id: format!("S[{}=0,{tail}]", k.name()),
                curve: Some(k),
                span: Some(span),
            });
        }
    }
    out
}

fn point_cells(w: &Window, inter: &[Intersection]) -> Vec<Cell> {
    inter
        .iter()
        .filter(|i| w.contains_strictly(i.c64(), i.b64()))
        .map(|i| {
            let p = Params::new(i.b.clone(), i.c.clone()).unwrap();
            let zeros: Vec<String> = i.curves.iter().map(|k| format!("{}=0", k.name())).collect();
            Cell {
                kind: CellKind::Point,
                sign_vector: SignVector::of_exact(&p),
                sample: p.to_f64(),
                canonical_id: format!("P[{}]", zeros.join(",")),
                curve: None,
                span: None,
            }
        })
        .collect()
}

/// Connected components of equal sign vector on a pixel raster; pixels on a
/// curve are skipped. Each component's sample is its centroid when that is
/// inside and clear of the curves, otherwise the nearest clear pixel.
fn region_cells(w: &Window, step: f64) -> (Vec<Cell>, Raster) {
    let (c0, b0) = (w.c_min.max(0.0), w.b_min.max(-1.0));
    let nc = ((w.c_max - c0) / step).ceil() as usize;
    let nb = ((w.b_max - b0) / step).ceil() as usize;
    let at = |i: usize, j: usize| (c0 + (i as f64 + 0.5) * step, b0 + (j as f64 + 0.5) * step);
    let sv: Vec<Option<SignVector>> = (0..nc * nb)
        .into_par_iter()
        .map(|k| {
            let (c, b) = at(k / nb, k % nb);
            let s = sign_vector(c, b);
            (s.zeros() == 0).then_some(s)
        })
        .collect();
    let mut comp = vec![usize::MAX; nc * nb];
    let mut comps: Vec<(SignVector, Vec<usize>)> = Vec::new();
    for start in 0..nc * nb {
        let Some(s) = sv[start] else { continue };
        if comp[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![];
        let mut q = VecDeque::from([start]);
        comp[start] = id;
        while let Some(k) = q.pop_front() {
            members.push(k);
            let (i, j) = (k / nb, k % nb);
            let mut nbr = Vec::with_capacity(4);
            if i > 0 {
                nbr.push(k - nb);
            }
            if i + 1 < nc {
                nbr.push(k + nb);
            }
            if j > 0 {
                nbr.push(k - 1);
            }
            if j + 1 < nb {
                nbr.push(k + 1);
            }
            for m in nbr {
                if comp[m] == usize::MAX && sv[m] == Some(s) {
                    comp[m] = id;
                    q.push_back(m);
                }
            }
        }
        comps.push((s, members));
    }
    // isolated specks where a curve grazes the pixel grid are not regions
    comps.retain(|(_, m)| m.len() >= 8);
    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    let cells: Vec<Cell> = comps
        .iter()
        .map(|(s, members)| {
            let (s, members) = (*s, members);
            let n = members.len() as f64;
            let (sc, sb) = members.iter().fold((0.0, 0.0), |(x, y), &k| {
                let (c, b) = at(k / nb, k % nb);
                (x + c, y + b)
            });
            let (cc, cb) = (sc / n, sb / n);
            let (c, b) = if sign_vector(cc, cb) == s && sample_ok(cc, cb) {
                (cc, cb)
            } else {
                members
                    .iter()
                    .map(|&k| at(k / nb, k % nb))
                    .filter(|&(c, b)| sample_ok(c, b))
                    .min_by(|x, y| (x.0 - cc).hypot(x.1 - cb).total_cmp(&(y.0 - cc).hypot(y.1 - cb)))
                    .unwrap_or((cc, cb))
            };
            let base = format!("R[{}]", s.label());
            let dup = ids.entry(base.clone()).or_insert(0);
            *dup += 1;
            let canonical_id = if *dup == 1 { base } else { format!("{base}#{dup}") };
            Cell { kind: CellKind::Region, sign_vector: s, sample: Params::new(b, c).unwrap(), canonical_id, curve: None, span: None }
        })
        .collect();
    // label pixels by the final position of their region after sorting by id
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&x, &y| cells[x].canonical_id.cmp(&cells[y].canonical_id));
    let mut label = vec![u32::MAX; nc * nb];
    for (rank, &ci) in order.iter().enumerate() {
        for &k in &comps[ci].1 {
            label[k] = rank as u32;
        }
    }
    let cells = order.into_iter().map(|i| cells[i].clone()).collect();
    (cells, Raster { c0, b0, step, nc, nb, label })
}

/// Points that any admissible window must contain: the curve meetings, the
/// vertex of the D1 parabola and the domain corner where c = b + 1 starts.
pub fn required_points() -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = intersections().iter().map(|i| (i.c64(), i.b64())).collect();
    v.push((0.5, -0.75));
    v
}

pub fn build_arrangement(w: &Window) -> Result<Arrangement, BifurcationError> {
    build_arrangement_with(w, 0.01)
}

pub fn build_arrangement_with(w: &Window, step: f64) -> Result<Arrangement, BifurcationError> {
    let mut missing: Vec<(f64, f64)> = required_points().into_iter().filter(|&(c, b)| !w.contains_strictly(c, b)).collect();
    if w.c_min > 0.0 || w.b_min > -1.0 {
        missing.push((0.0, -1.0));
    }
    if !missing.is_empty() {
        return Err(BifurcationError::WindowTooSmall { missing });
    }
    let inter = intersections();
    let (regions, raster) = region_cells(w, step);
    let mut segments = segment_cells(w, &inter);
    let mut points = point_cells(w, &inter);
    for (kind, v, n) in [(CellKind::Region, &regions, REGIONS), (CellKind::Segment, &segments, SEGMENTS), (CellKind::Point, &points, POINTS)] {
        if v.len() != n {
            return Err(BifurcationError::CellCount { kind, expected: n, found: v.len() });
        }
    }
    segments.sort_by(|a, b| a.canonical_id.cmp(&b.canonical_id));
    points.sort_by(|a, b| a.canonical_id.cmp(&b.canonical_id));
    let mut cells = regions;
    cells.extend(segments);
    cells.extend(points);
    Ok(Arrangement { window: *w, cells, intersections: inter, raster })
}

impl Arrangement {
    /// Cell containing `p`, with stratum tolerance 1e-12.
    pub fn locate(&self, p: &Params<f64>) -> Option<&Cell> {
        let (b, c) = (p.b64(), p.c64());
        let v = BifurcationValues::new(p);
        let zero: Vec<Curve> = Curve::ALL
            .iter()
            .zip([v.g0, v.g1, v.g2, v.g3, v.d1])
            .filter(|(_, x)| x.abs() <= STRATUM_TOL)
            .map(|(k, _)| *k)
            .collect();
        match zero.len() {
            0 => {
                let s = sign_vector(c, b);
                self.cells.iter().find(|x| x.kind == CellKind::Region && x.sign_vector == s)
            }
            // D1 touches c = b + 1 only at q1, so two zeros always mean a point
            1 => {
                let k = zero[0];
                let t = k.param(c, b);
                self.cells
                    .iter()
                    .filter(|x| x.curve == Some(k))
                    .find(|x| x.span.is_some_and(|(s, e)| t > s - STRATUM_TOL && t <= e + STRATUM_TOL))
            }
            _ => self
                .cells
                .iter()
                .filter(|x| x.kind == CellKind::Point)
                .min_by(|x, y| dist(&x.sample, p).total_cmp(&dist(&y.sample, p))),
        }
    }

    pub fn count(&self, kind: CellKind) -> usize {
        self.cells.iter().filter(|c| c.kind == kind).count()
    }
}

fn dist(a: &Params<f64>, b: &Params<f64>) -> f64 {
    (a.b64() - b.b64()).hypot(a.c64() - b.c64())
}

/// Arrangement over the default window, built once.
pub fn default_arrangement() -> &'static Arrangement {
    static A: OnceLock<Arrangement> = OnceLock::new();
    A.get_or_init(|| build_arrangement(&Window::default()).expect("default window is admissible"))
}

/// Cell of the default arrangement containing `p`.
pub fn locate(p: &Params<f64>) -> Option<Cell> {
    default_arrangement().locate(p).cloned()
}

/// Polyline pieces of a curve inside the window, for drawing.
pub fn curve_polylines(k: Curve, w: &Window, n: usize) -> Vec<Vec<(f64, f64)>> {
    curve_spans(k, w)
        .into_iter()
        .map(|(s, e)| (0..=n).map(|i| k.point(s + (e - s) * i as f64 / n as f64)).collect())
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CellAnalysis {
    pub cell: String,
    pub s: usize,
    pub r: usize,
    pub signature: TopoSignature,
}

#[derive(Debug, Clone, Serialize)]
pub struct TopoClass {
    pub members: Vec<String>,
    /// how each member matched the first one
    pub variants: Vec<Variant>,
    pub s: usize,
    pub r: usize,
    pub signature: TopoSignature,
}

impl TopoClass {
    pub fn hash(&self) -> String {
        self.signature.hash()
    }
}

/// Runs the flow pipeline on every cell sample.
pub fn analyze_cells(cells: &[Cell]) -> Result<Vec<CellAnalysis>, BifurcationError> {
    analyze_cells_with(cells, &TraceConfig::default())
}

pub fn analyze_cells_with(cells: &[Cell], cfg: &TraceConfig) -> Result<Vec<CellAnalysis>, BifurcationError> {
    cells
        .par_iter()
        .map(|cell| {
            let err = |source| BifurcationError::Skeleton { cell: cell.canonical_id.clone(), source };
            let sk = trace_separatrices_with(&cell.sample, cfg).map_err(err)?;
            let (s, r) = count_sr(&sk).map_err(err)?;
            Ok(CellAnalysis { cell: cell.canonical_id.clone(), s, r, signature: signature(&sk) })
        })
        .collect()
}

/// Groups analysed cells by signature equivalence, in cell order.
pub fn group(analyses: &[CellAnalysis]) -> Vec<TopoClass> {
    let mut classes: Vec<TopoClass> = Vec::new();
    for a in analyses {
        match classes.iter_mut().find_map(|k| equivalence(&k.signature, &a.signature).map(|v| (k, v))) {
            Some((k, v)) => {
                k.members.push(a.cell.clone());
                k.variants.push(v);
            }
            None => classes.push(TopoClass {
                members: vec![a.cell.clone()],
                variants: vec![Variant::FlowPreserving],
                s: a.s,
                r: a.r,
                signature: a.signature.clone(),
            }),
        }
    }
    classes
}

/// The census stated for the full diagram: classes other than q1's, by
/// (S, R) and multiplicity.
pub const EXPECTED_SR: [((usize, usize), usize); 8] =
    [((14, 3), 1), ((15, 4), 1), ((16, 3), 1), ((17, 4), 1), ((17, 6), 1), ((16, 5), 3), ((18, 5), 4), ((19, 6), 2)];
pub const EXPECTED_CLASSES: usize = 15;
/// Class sizes over the 27 cells, largest first.
pub const EXPECTED_SIZES: [usize; 15] = [4, 3, 3, 3, 3, 2, 1, 1, 1, 1, 1, 1, 1, 1, 1];
/// Canonical id of q1.
pub const Q1_ID: &str = "P[g0=0,g1=0,g2=0,g3=0,D1=0]";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusDiff {
    pub classes: (usize, usize),
    /// (S, R): (expected, found), for pairs where they differ
    pub sr: Vec<((usize, usize), usize, usize)>,
    pub sizes: (Vec<usize>, Vec<usize>),
    pub q1: Option<(usize, usize)>,
}

impl CensusDiff {
    pub fn is_match(&self) -> bool {
        self.classes.0 == self.classes.1 && self.sr.is_empty() && self.sizes.0 == self.sizes.1
    }
}

impl fmt::Display for CensusDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "  classes: expected {}, found {}", self.classes.0, self.classes.1)?;
        for ((s, r), e, g) in &self.sr {
            writeln!(f, "  (S,R)=({s},{r}): expected {e} classes, found {g}")?;
        }
        writeln!(f, "  class sizes: expected {:?}, found {:?}", self.sizes.0, self.sizes.1)?;
        match self.q1 {
            Some((s, r)) => write!(f, "  q1 class: ({s},{r})"),
            None => write!(f, "  q1 class: absent"),
        }
    }
}

pub fn census_diff(classes: &[TopoClass]) -> CensusDiff {
    let q1 = classes.iter().find(|k| k.members.iter().any(|m| m == Q1_ID));
    let mut found: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for k in classes.iter().filter(|k| !k.members.iter().any(|m| m == Q1_ID)) {
        *found.entry((k.s, k.r)).or_default() += 1;
    }
    let expected: BTreeMap<(usize, usize), usize> = EXPECTED_SR.iter().copied().collect();
    let mut keys: Vec<(usize, usize)> = expected.keys().chain(found.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    let sr = keys
        .into_iter()
        .filter_map(|k| {
            let (e, g) = (expected.get(&k).copied().unwrap_or(0), found.get(&k).copied().unwrap_or(0));
            (e != g).then_some((k, e, g))
        })
        .collect();
    let mut sizes: Vec<usize> = classes.iter().map(|k| k.members.len()).collect();
    sizes.sort_by(|a, b| b.cmp(a));
    CensusDiff { classes: (EXPECTED_CLASSES, classes.len()), sr, sizes: (EXPECTED_SIZES.to_vec(), sizes), q1: q1.map(|k| (k.s, k.r)) }
}

/// Analyses, groups and checks the census; a mismatch is an error carrying
/// the diff.
pub fn classify_all(cells: &[Cell]) -> Result<Vec<TopoClass>, BifurcationError> {
    let classes = group(&analyze_cells(cells)?);
    let diff = census_diff(&classes);
    if diff.is_match() {
        Ok(classes)
    } else {
        Err(BifurcationError::Census(Box::new(diff)))
    }
}
