//! Poincare compactification: charts, disc projection, chart vector fields
//! and the infinite singular points.
//!
//! Charts cover the northern hemisphere of the sphere `(y1, y2, y3)`:
//! U1/V1 where `y1 > 0` / `y1 < 0`, U2/V2 where `y2 > 0` / `y2 < 0`, and
//! U3 (the plane itself). In U1 and V1 `(x, y) = (1/z2, z1/z2)`, in U2 and
//! V2 `(x, y) = (z1/z2, 1/z2)`; V charts carry `z2 <= 0`. The chart fields
//! are the polynomial fields with the common factor dropped; in the V charts
//! they are multiplied by -1 (degree two). Time relation: `dt/dtau = |z2|`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactpoly::BiPoly;
use crate::model::{eval_field, Params, PlanePoint};
use crate::{Real, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("point at infinity has no finite plane coordinates")]
    PointAtInfinity,
    #[error("point is outside chart {0:?}")]
    OutsideChart(ChartId),
    #[error("disc point outside the closed unit disc")]
    OutsideDisc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChartId {
    U1,
    U2,
    U3,
    V1,
    V2,
    V3,
}

impl ChartId {
    pub const NORTH: [ChartId; 5] = [ChartId::U3, ChartId::U1, ChartId::V1, ChartId::U2, ChartId::V2];

    /// Sphere coordinate index and required sign of the chart domain.
    fn domain(self) -> (usize, f64) {
        match self {
            ChartId::U1 => (0, 1.0),
            ChartId::V1 => (0, -1.0),
            ChartId::U2 => (1, 1.0),
            ChartId::V2 => (1, -1.0),
            ChartId::U3 => (2, 1.0),
            ChartId::V3 => (2, -1.0),
        }
    }

    pub fn is_infinity_chart(self) -> bool {
        !matches!(self, ChartId::U3 | ChartId::V3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint<T> {
    pub chart: ChartId,
    pub z1: T,
    pub z2: T,
}

impl<T> ChartPoint<T> {
    pub fn new(chart: ChartId, z1: T, z2: T) -> Self {
        Self { chart, z1, z2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscPoint<T> {
    pub u: T,
    pub v: T,
}

impl<T: Real> DiscPoint<T> {
    pub fn new(u: T, v: T) -> Self {
        Self { u, v }
    }

    pub fn norm(&self) -> T {
        self.u.hypot(self.v)
    }

    pub fn dist(&self, o: &DiscPoint<T>) -> T {
        (self.u - o.u).hypot(self.v - o.v)
    }
}

pub fn plane_to_disc<T: Real>(q: &PlanePoint<T>) -> DiscPoint<T> {
    let n = (T::one() + q.x * q.x + q.y * q.y).sqrt();
    DiscPoint::new(q.x / n, q.y / n)
}

pub fn disc_to_plane<T: Real>(d: &DiscPoint<T>) -> Result<PlanePoint<T>, ChartError> {
    let r2 = d.u * d.u + d.v * d.v;
    if r2 > T::one() {
        return Err(ChartError::OutsideDisc);
    }
    if r2 == T::one() {
        return Err(ChartError::PointAtInfinity);
    }
    let s = (T::one() - r2).sqrt();
    Ok(PlanePoint::new(d.u / s, d.v / s))
}

/// Point of the closed northern hemisphere.
pub fn to_sphere<T: Real>(cp: &ChartPoint<T>) -> [T; 3] {
    let (z1, z2) = (cp.z1, cp.z2);
    let one = T::one();
    let raw = match cp.chart {
        ChartId::U1 => [one, z1, z2],
        ChartId::V1 => [-one, -z1, -z2],
        ChartId::U2 => [z1, one, z2],
        ChartId::V2 => [-z1, -one, -z2],
        ChartId::U3 => [z1, z2, one],
        ChartId::V3 => [-z1, -z2, -one],
    };
    let n = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
    raw.map(|v| v / n)
}

/// Chart coordinates of a sphere point; fails outside the chart domain.
pub fn from_sphere<T: Real>(y: &[T; 3], chart: ChartId) -> Result<ChartPoint<T>, ChartError> {
    let (idx, sign) = chart.domain();
    if y[idx] * T::from_f64(sign).unwrap() <= T::zero() {
        return Err(ChartError::OutsideChart(chart));
    }
    let d = y[idx];
    let (z1, z2) = match idx {
        0 => (y[1] / d, y[2] / d),
        1 => (y[0] / d, y[2] / d),
        _ => (y[0] / d, y[1] / d),
    };
    Ok(ChartPoint::new(chart, z1, z2))
}

pub fn chart_transition<T: Real>(cp: &ChartPoint<T>, target: ChartId) -> Result<ChartPoint<T>, ChartError> {
    if cp.chart == target {
        return Ok(*cp);
    }
    from_sphere(&to_sphere(cp), target)
}

pub fn chart_to_disc<T: Real>(cp: &ChartPoint<T>) -> DiscPoint<T> {
    let y = to_sphere(cp);
    DiscPoint::new(y[0], y[1])
}

/// Lifts a closed-disc point to the hemisphere.
pub fn disc_to_sphere<T: Real>(d: &DiscPoint<T>) -> [T; 3] {
    let r2 = d.u * d.u + d.v * d.v;
    let y3 = if r2 >= T::one() { T::zero() } else { (T::one() - r2).sqrt() };
    [d.u, d.v, y3]
}

/// Chart of the given set in which the point has the smallest `|z|`.
pub fn best_chart<T: Real>(y: &[T; 3], allowed: &[ChartId]) -> ChartPoint<T> {
    let mut best: Option<(T, ChartPoint<T>)> = None;
    for &ch in allowed {
        if let Ok(cp) = from_sphere(y, ch) {
            let r = cp.z1.hypot(cp.z2);
            if best.as_ref().is_none_or(|(b, _)| r < *b) {
                best = Some((r, cp));
            }
        }
    }
    best.map(|b| b.1).expect("every hemisphere point lies in some chart")
}

pub fn disc_to_chart<T: Real>(d: &DiscPoint<T>) -> ChartPoint<T> {
    best_chart(&disc_to_sphere(d), &ChartId::NORTH)
}

/// `(z2 + (b+1) z1^2 - c z1 z2, z2 (z1 - z2))` with `x -> z1`, `y -> z2`.
pub fn field_u1<C: Scalar>(p: &Params<C>) -> (BiPoly<C>, BiPoly<C>) {
    let one = C::one();
    let f1 = BiPoly::from_terms([
        ((0, 1), one.clone()),
        ((2, 0), p.b().clone() + one.clone()),
        ((1, 1), -p.c().clone()),
    ]);
    let f2 = BiPoly::from_terms([((1, 1), one.clone()), ((0, 2), -one)]);
    (f1, f2)
}

/// `(z1 (c z2 - z1 z2 - b - 1), z2 (c z2 - z1 z2 - z2 - b))`.
pub fn field_u2<C: Scalar>(p: &Params<C>) -> (BiPoly<C>, BiPoly<C>) {
    let one = C::one();
    let b = p.b().clone();
    let c = p.c().clone();
    let f1 = BiPoly::from_terms([
        ((1, 1), c.clone()),
        ((2, 1), -one.clone()),
        ((1, 0), -(b.clone() + one.clone())),
    ]);
    let f2 = BiPoly::from_terms([((0, 2), c - one.clone()), ((1, 2), -one), ((0, 1), -b)]);
    (f1, f2)
}

/// Vector field in chart coordinates (U3 is the plane field itself).
pub fn chart_field<T: Real>(b: T, c: T, chart: ChartId, z1: T, z2: T) -> [T; 2] {
    let one = T::one();
    match chart {
        ChartId::U3 | ChartId::V3 => [z1 * (one - z2), b * z2 * z2 + (one - c) * z2 + z1],
        ChartId::U1 | ChartId::V1 => {
            let f = [z2 + (b + one) * z1 * z1 - c * z1 * z2, z2 * (z1 - z2)];
            if chart == ChartId::U1 {
                f
            } else {
                [-f[0], -f[1]]
            }
        }
        ChartId::U2 | ChartId::V2 => {
            let f = [z1 * (c * z2 - z1 * z2 - b - one), z2 * (c * z2 - z1 * z2 - z2 - b)];
            if chart == ChartId::U2 {
                f
            } else {
                [-f[0], -f[1]]
            }
        }
    }
}

/// Plane time per unit of chart time.
pub fn dt_dtau<T: Real>(chart: ChartId, z2: T) -> T {
    if chart.is_infinity_chart() {
        z2.abs()
    } else {
        T::one()
    }
}

/// Jacobian of the chart field.
pub fn chart_jacobian(b: f64, c: f64, chart: ChartId, z1: f64, z2: f64) -> [[f64; 2]; 2] {
    let (m, s) = match chart {
        ChartId::U3 | ChartId::V3 => {
            return [[1.0 - z2, -z1], [1.0, 2.0 * b * z2 + 1.0 - c]];
        }
        ChartId::U1 | ChartId::V1 => (
            [[2.0 * (b + 1.0) * z1 - c * z2, 1.0 - c * z1], [z2, z1 - 2.0 * z2]],
            if chart == ChartId::U1 { 1.0 } else { -1.0 },
        ),
        ChartId::U2 | ChartId::V2 => (
            [
                [c * z2 - 2.0 * z1 * z2 - b - 1.0, z1 * (c - z1)],
                [-z2 * z2, 2.0 * c * z2 - 2.0 * z1 * z2 - 2.0 * z2 - b],
            ],
            if chart == ChartId::U2 { 1.0 } else { -1.0 },
        ),
    };
    m.map(|r| r.map(|v| v * s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InfiniteKind {
    /// nilpotent; union of one hyperbolic and one elliptic sector
    EllipticHyperbolic,
    Saddle,
    StableNode,
    UnstableNode,
    SaddleNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfinitePoint {
    pub chart: ChartId,
    pub disc: DiscPoint<f64>,
    pub kind: InfiniteKind,
    /// linearization eigenvalues in the chart (both zero for the nilpotent points)
    pub eigenvalues: [f64; 2],
}

/// Exactly four points: the origins of U1, V1, U2, V2.
pub fn infinite_singular_points(p: &Params<f64>) -> Vec<InfinitePoint> {
    let b = p.b64();
    let u2 = match b {
        b if b > 0.0 => InfiniteKind::StableNode,
        b if b < 0.0 => InfiniteKind::Saddle,
        _ => InfiniteKind::SaddleNode,
    };
    let v2 = match u2 {
        InfiniteKind::StableNode => InfiniteKind::UnstableNode,
        k => k,
    };
    vec![
        InfinitePoint {
            chart: ChartId::U1,
            disc: DiscPoint::new(1.0, 0.0),
            kind: InfiniteKind::EllipticHyperbolic,
            eigenvalues: [0.0, 0.0],
        },
        InfinitePoint {
            chart: ChartId::V1,
            disc: DiscPoint::new(-1.0, 0.0),
            kind: InfiniteKind::EllipticHyperbolic,
            eigenvalues: [0.0, 0.0],
        },
        InfinitePoint { chart: ChartId::U2, disc: DiscPoint::new(0.0, 1.0), kind: u2, eigenvalues: [-b - 1.0, -b] },
        InfinitePoint { chart: ChartId::V2, disc: DiscPoint::new(0.0, -1.0), kind: v2, eigenvalues: [b + 1.0, b] },
    ]
}

/// Zeros of the U1 and U2 fields on the infinity line `z2 = 0`, found from
/// the restricted polynomials: `(b+1) z1^2` and `-(b+1) z1`.
pub fn infinity_line_zeros(p: &Params<f64>) -> (Vec<f64>, Vec<f64>) {
    let bp1 = p.b64() + 1.0;
    let u1 = if bp1 != 0.0 { vec![0.0] } else { vec![] };
    let u2 = if bp1 != 0.0 { vec![0.0] } else { vec![] };
    (u1, u2)
}

/// Plane velocity transported into chart coordinates (plane time).
pub fn transported_velocity(p: &Params<f64>, cp: &ChartPoint<f64>) -> Result<[f64; 2], ChartError> {
    let q = chart_to_plane(cp)?;
    let (dx, dy) = eval_field(p, &q);
    let (x, y) = (q.x, q.y);
    let v = match cp.chart {
        ChartId::U3 | ChartId::V3 => [dx, dy],
        ChartId::U1 | ChartId::V1 => [(dy * x - y * dx) / (x * x), -dx / (x * x)],
        ChartId::U2 | ChartId::V2 => [(dx * y - x * dy) / (y * y), -dy / (y * y)],
    };
    Ok(v)
}

pub fn chart_to_plane(cp: &ChartPoint<f64>) -> Result<PlanePoint<f64>, ChartError> {
    let (z1, z2) = (cp.z1, cp.z2);
    match cp.chart {
        ChartId::U3 => Ok(PlanePoint::new(z1, z2)),
        ChartId::V3 => Err(ChartError::OutsideChart(ChartId::V3)),
        _ if z2 == 0.0 => Err(ChartError::PointAtInfinity),
        ChartId::U1 | ChartId::V1 => Ok(PlanePoint::new(1.0 / z2, z1 / z2)),
        ChartId::U2 | ChartId::V2 => Ok(PlanePoint::new(z1 / z2, 1.0 / z2)),
    }
}

pub fn plane_to_chart(q: &PlanePoint<f64>, chart: ChartId) -> Result<ChartPoint<f64>, ChartError> {
    from_sphere(&to_sphere(&ChartPoint::new(ChartId::U3, q.x, q.y)), chart)
}
