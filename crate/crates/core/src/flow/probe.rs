//! Sector structure of an isolated singular point by ring seeding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::integrator::{dopri_step, error_norm, step_factor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SectorKind {
    Hyperbolic,
    Elliptic,
    Parabolic,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbeError {
    #[error("sector structure did not stabilize over radii {radii:?}: {seen:?}")]
    NotStable { radii: Vec<f64>, seen: Vec<Vec<SectorKind>> },
    #[error("{0} ring seeds neither entered nor left the probe annulus")]
    Unresolved(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub seeds: usize,
    pub radii: [f64; 3],
    pub tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { seeds: 720, radii: [1e-2, 1e-3, 1e-4], tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fate {
    In,
    /// left the outer radius at this polar angle
    Out(f64),
    Stuck,
}

/// Follows the normalized field (arc length) from `z0` until the orbit falls
/// inside `r_in`, leaves `r_out`, or runs `len_max` of arc length.
fn follow<F: Fn([f64; 2]) -> [f64; 2]>(f: &F, center: [f64; 2], z0: [f64; 2], sign: f64, r_in: f64, r_out: f64, len_max: f64, tol: f64) -> Fate {
    let g = |v: &[f64; 2]| {
        let w = f(*v);
        let n = w[0].hypot(w[1]);
        if n == 0.0 {
            [0.0, 0.0]
        } else {
            [sign * w[0] / n, sign * w[1] / n]
        }
    };
    let dist = |v: &[f64; 2]| (v[0] - center[0]).hypot(v[1] - center[1]);
    let mut y = z0;
    let mut fy = g(&y);
    let mut s = 0.0;
    let mut h = 0.05 * dist(&y);
    let mut steps = 0;
    while s < len_max && steps < 200_000 {
        steps += 1;
        if fy == [0.0, 0.0] {
            return Fate::Stuck;
        }
        h = h.min(0.1 * dist(&y)).max(1e-16);
        let (y1, f1, err) = dopri_step(&g, &y, &fy, h);
        let en = error_norm(&err, &[0.0; 2], &[0.0; 2], tol * dist(&y).max(1e-300));
        if en > 1.0 {
            h *= step_factor(en);
            continue;
        }
        s += h;
        y = y1;
        fy = f1;
        h *= step_factor(en);
        let d = dist(&y);
        if d < r_in {
            return Fate::In;
        }
        if d > r_out {
            return Fate::Out((y[1] - center[1]).atan2(y[0] - center[0]));
        }
    }
    Fate::Stuck
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

/// Cyclic sector list at one radius.
pub fn sectors_at<F: Fn([f64; 2]) -> [f64; 2]>(f: &F, center: [f64; 2], r: f64, seeds: usize, tol: f64) -> Result<Vec<SectorKind>, ProbeError> {
    // quasi-homogeneous points have loops of size ~sqrt(r); keep them inside
    let r_out = (3.0 * r.sqrt()).max(10.0 * r);
    let r_in = r / 10.0;
    let len_max = 50.0 * r_out;
    let mut fates = Vec::with_capacity(seeds);
    let mut stuck = 0;
    for k in 0..seeds {
        let th = std::f64::consts::TAU * (k as f64 + 0.5) / seeds as f64;
        let z0 = [center[0] + r * th.cos(), center[1] + r * th.sin()];
        let fw = follow(f, center, z0, 1.0, r_in, r_out, len_max, tol);
        let bw = follow(f, center, z0, -1.0, r_in, r_out, len_max, tol);
        if fw == Fate::Stuck || bw == Fate::Stuck {
            stuck += 1;
        }
        fates.push((fw, bw));
    }
    if stuck > 0 {
        return Err(ProbeError::Unresolved(stuck));
    }
    let kind = |(fw, bw): (Fate, Fate)| match (fw, bw) {
        (Fate::Out(_), Fate::Out(_)) => SectorKind::Hyperbolic,
        (Fate::In, Fate::In) => SectorKind::Elliptic,
        _ => SectorKind::Parabolic,
    };
    // a new sector starts where the kind changes or, inside hyperbolic runs,
    // where either exit angle jumps (a separatrix lies between the seeds)
    let breaks: Vec<bool> = (0..seeds)
        .map(|k| {
            let prev = fates[(k + seeds - 1) % seeds];
            let cur = fates[k];
            if kind(prev) != kind(cur) {
                return true;
            }
            match (prev, cur) {
                ((Fate::Out(a1), Fate::Out(b1)), (Fate::Out(a2), Fate::Out(b2))) => {
                    angle_gap(a1, a2) > 0.5 || angle_gap(b1, b2) > 0.5
                }
                _ => false,
            }
        })
        .collect();
    let Some(first) = breaks.iter().position(|&b| b) else {
        return Ok(vec![kind(fates[0])]);
    };
    let mut out = Vec::new();
    for i in 0..seeds {
        let k = (first + i) % seeds;
        if breaks[k] {
            out.push(kind(fates[k]));
        }
    }
    Ok(out)
}

fn rotations_equal(a: &[SectorKind], b: &[SectorKind]) -> bool {
    a.len() == b.len() && (a.is_empty() || (0..a.len()).any(|r| (0..a.len()).all(|i| a[(i + r) % a.len()] == b[i])))
}

/// Probes at each radius of the schedule and returns the first structure that
/// repeats at two consecutive radii.
pub fn sector_probe<F: Fn([f64; 2]) -> [f64; 2]>(f: F, center: [f64; 2], cfg: &ProbeConfig) -> Result<Vec<SectorKind>, ProbeError> {
    let mut seen: Vec<Vec<SectorKind>> = Vec::new();
    for &r in &cfg.radii {
        let s = sectors_at(&f, center, r, cfg.seeds, cfg.tol)?;
        if let Some(prev) = seen.last() {
            if rotations_equal(prev, &s) {
                return Ok(s);
            }
        }
        seen.push(s);
    }
    Err(ProbeError::NotStable { radii: cfg.radii.to_vec(), seen })
}

pub fn count(s: &[SectorKind], k: SectorKind) -> usize {
    s.iter().filter(|&&x| x == k).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compactify::{chart_field, ChartId};

    fn quick() -> ProbeConfig {
        ProbeConfig { seeds: 180, ..ProbeConfig::default() }
    }

    #[test]
    fn linear_saddle_has_four_hyperbolic_sectors() {
        let s = sector_probe(|z| [z[0], -z[1]], [0.0, 0.0], &quick()).unwrap();
        assert_eq!(s, vec![SectorKind::Hyperbolic; 4]);
    }

    #[test]
    fn stable_node_is_parabolic() {
        let s = sector_probe(|z| [-z[0], -2.0 * z[1]], [0.0, 0.0], &quick()).unwrap();
        assert_eq!(s, vec![SectorKind::Parabolic]);
    }

    #[test]
    fn off_origin_saddle() {
        let s = sector_probe(|z| [z[1] - 1.0, z[0] - 2.0], [2.0, 1.0], &quick()).unwrap();
        assert_eq!(count(&s, SectorKind::Hyperbolic), 4);
    }

    #[test]
    fn u1_origin_is_hyperbolic_plus_elliptic() {
        for b in [-0.5, 0.0, 1.0] {
            let s = sector_probe(|z| chart_field(b, 2.0, ChartId::U1, z[0], z[1]), [0.0, 0.0], &quick()).unwrap();
            assert_eq!(count(&s, SectorKind::Hyperbolic), 1, "b={b}: {s:?}");
            assert_eq!(count(&s, SectorKind::Elliptic), 1, "b={b}: {s:?}");
        }
    }
}
