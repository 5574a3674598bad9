//! Periodic orbits: recurrence detection and the isolation test that tells a
//! limit cycle from a member of a period annulus.

use rayon::prelude::*;
use serde::Serialize;

use super::integrator::{dopri_step, error_norm, step_factor};
use super::orbit::{default_targets, integrate_chart, Direction, FlowConfig, Orbit, Termination};
use crate::compactify::{disc_to_chart, DiscPoint};
use crate::model::{eval_field, Params, PlanePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrbitShape {
    /// returns to itself and so do its neighbours: period annulus
    Closed,
    /// isolated periodic orbit
    Cycle,
    Open,
}

/// Polar-form oscillator with an attracting limit cycle at r = 1.
pub fn polar_oscillator(z: [f64; 2]) -> [f64; 2] {
    let r2 = z[0] * z[0] + z[1] * z[1];
    [z[0] - z[1] - z[0] * r2, z[0] + z[1] - z[1] * r2]
}

/// Finds an earlier crossing of the section through the end point (normal
/// to the final direction of motion) that lands close to the end point,
/// relative to the size of the loop in between. Returns the loop's first index.
pub fn recurrence(pts: &[[f64; 2]]) -> Option<usize> {
    let n = pts.len();
    if n < 10 {
        return None;
    }
    let z = pts[n - 1];
    let w = pts[n - 2];
    let tn = (z[0] - w[0]).hypot(z[1] - w[1]);
    if tn == 0.0 {
        return None;
    }
    let t = [(z[0] - w[0]) / tn, (z[1] - w[1]) / tn];
    let along = |a: [f64; 2]| (a[0] - z[0]) * t[0] + (a[1] - z[1]) * t[1];
    let mut size: f64 = 0.0;
    for j in (0..n - 2).rev() {
        let (a, b) = (pts[j], pts[j + 1]);
        size = size.max((a[0] - z[0]).hypot(a[1] - z[1]));
        let (a0, a1) = (along(a), along(b));
        if a0 < 0.0 && a1 >= 0.0 {
            let s = -a0 / (a1 - a0);
            let q = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let d = (q[0] - z[0]).hypot(q[1] - z[1]);
            if d < 1e-3 * size && size > 10.0 * tn {
                return Some(j);
            }
        }
    }
    None
}

/// Signed displacement along the section after one return, starting at
/// `z + s n`, with the section the line through `z` normal to the flow.
pub fn return_displacement<F: Fn([f64; 2]) -> [f64; 2]>(f: &F, z: [f64; 2], s: f64, t_cap: f64) -> Option<f64> {
    let fz = f(z);
    let nf = fz[0].hypot(fz[1]);
    if nf == 0.0 {
        return None;
    }
    let n = [-fz[1] / nf, fz[0] / nf];
    let tdir = [fz[0] / nf, fz[1] / nf];
    let g = |v: &[f64; 2]| f(*v);
    let mut y = [z[0] + s * n[0], z[1] + s * n[1]];
    let mut fy = g(&y);
    let along = |v: [f64; 2]| (v[0] - z[0]) * tdir[0] + (v[1] - z[1]) * tdir[1];
    let mut t = 0.0;
    let mut h = 1e-3;
    let mut left = false;
    while t < t_cap {
        let (y1, f1, err) = dopri_step(&g, &y, &fy, h);
        let en = error_norm(&err, &y, &y1, 1e-12);
        if en > 1.0 {
            h *= step_factor(en);
            if h < 1e-14 {
                return None;
            }
            continue;
        }
        let (a0, a1) = (along(y), along(y1));
        if (y1[0] - z[0]).hypot(y1[1] - z[1]) > 10.0 * s.abs() {
            left = true;
        }
        // crossings of the section line far from z are not returns
        let near = (y1[0] - z[0]).hypot(y1[1] - z[1]) < 20.0 * s.abs();
        if left && near && a0 < 0.0 && a1 >= 0.0 {
            // bisect the step length onto the section
            let (mut lo, mut hi) = (0.0, h);
            let mut q = y1;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let (ym, _, _) = dopri_step(&g, &y, &fy, mid);
                if along(ym) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                    q = ym;
                }
            }
            let sn = (q[0] - z[0]) * n[0] + (q[1] - z[1]) * n[1];
            return Some(sn - s);
        }
        t += h;
        y = y1;
        fy = f1;
        h = (h * step_factor(en)).min(0.05);
    }
    None
}

/// Isolation test around a recurrent point: neighbours at radius ratio 1.01
/// (relative to the loop centroid) either return to themselves (annulus) or
/// drift (isolated cycle). Loops close to a separatrix cycle may have a
/// neighbour on its far side; smaller offsets are tried before giving up.
pub fn loop_shape<F: Fn([f64; 2]) -> [f64; 2]>(f: &F, loop_pts: &[[f64; 2]]) -> OrbitShape {
    let z = *loop_pts.last().unwrap();
    let n = loop_pts.len() as f64;
    let cx = loop_pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = loop_pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let r = (z[0] - cx).hypot(z[1] - cy);
    if r == 0.0 {
        return OrbitShape::Open;
    }
    let t_cap = 1e3;
    for ratio in [1e-2, 1e-3, 1e-4] {
        let delta = ratio * r;
        let d: Vec<Option<f64>> = [delta, -delta].iter().map(|&s| return_displacement(f, z, s, t_cap)).collect();
        if let (Some(a), Some(b)) = (d[0], d[1]) {
            return if a.abs().max(b.abs()) > 1e-4 * delta { OrbitShape::Cycle } else { OrbitShape::Closed };
        }
    }
    OrbitShape::Open
}

/// Shape of an orbit that did not reach a singular point.
pub fn closed_or_cycle(p: &Params<f64>, o: &Orbit, _start: &DiscPoint<f64>) -> OrbitShape {
    let pts: Vec<[f64; 2]> = o.samples.iter().filter_map(|s| s.plane()).map(|q| [q.x, q.y]).collect();
    if pts.len() != o.samples.len() {
        return OrbitShape::Open;
    }
    let Some(j) = recurrence(&pts) else {
        return OrbitShape::Open;
    };
    let f = |z: [f64; 2]| {
        let (a, b) = eval_field(p, &PlanePoint::new(z[0], z[1]));
        [a, b]
    };
    loop_shape(&f, &pts[j..])
}

#[derive(Debug, Clone, Serialize)]
pub struct CycleFinding {
    pub seed: DiscPoint<f64>,
    pub point: [f64; 2],
    pub direction: Direction,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitCycleReport {
    pub seeds: usize,
    /// ends of both time directions that reached a singular point
    pub resolved: usize,
    pub closed_orbits: usize,
    pub unresolved: usize,
    pub cycles: Vec<CycleFinding>,
}

/// Roughly `n` seeds on a square grid clipped to the disc of radius 0.95.
pub fn seed_grid(n: usize) -> Vec<DiscPoint<f64>> {
    let k = ((n as f64) * 4.0 / std::f64::consts::PI).sqrt().ceil() as usize;
    let mut out = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let u = -0.95 + 1.9 * (i as f64 + 0.5) / k as f64;
            let v = -0.95 + 1.9 * (j as f64 + 0.5) / k as f64;
            if u * u + v * v < 0.95 * 0.95 {
                out.push(DiscPoint::new(u, v));
            }
        }
    }
    out.truncate(n);
    out
}

pub fn limit_cycle_scan(p: &Params<f64>, seeds: usize) -> LimitCycleReport {
    let grid = seed_grid(seeds);
    let targets = default_targets(p);
    let cfg = FlowConfig { t_max: 200.0, max_steps: 200_000, ..FlowConfig::default() };
    let results: Vec<Vec<(Termination, OrbitShape, Option<[f64; 2]>)>> = grid
        .par_iter()
        .map(|d| {
            [Direction::Forward, Direction::Backward]
                .iter()
                .map(|&dir| {
                    let o = integrate_chart(p, disc_to_chart(d), dir, &cfg, &targets);
                    if o.termination.node().is_some() {
                        (o.termination, OrbitShape::Open, None)
                    } else {
                        let shape = closed_or_cycle(p, &o, d);
                        (o.termination, shape, o.end().plane().map(|q| [q.x, q.y]))
                    }
                })
                .collect()
        })
        .collect();
    let mut rep = LimitCycleReport { seeds: grid.len(), resolved: 0, closed_orbits: 0, unresolved: 0, cycles: Vec::new() };
    for (d, r) in grid.iter().zip(results) {
        for ((term, shape, end), dir) in r.into_iter().zip([Direction::Forward, Direction::Backward]) {
            match (term.node(), shape) {
                (Some(_), _) => rep.resolved += 1,
                (None, OrbitShape::Closed) => rep.closed_orbits += 1,
                (None, OrbitShape::Cycle) => rep.cycles.push(CycleFinding { seed: *d, point: end.unwrap_or([f64::NAN; 2]), direction: dir }),
                (None, OrbitShape::Open) => rep.unresolved += 1,
            }
        }
    }
    rep
}

/// The same scan for an arbitrary plane field (detector self-test).
pub fn scan_field<F: Fn([f64; 2]) -> [f64; 2] + Sync>(f: F, seeds: &[[f64; 2]], t_max: f64) -> Vec<OrbitShape> {
    seeds
        .par_iter()
        .map(|&s| {
            let (pts, _) = super::integrator::solve(|v: &[f64; 2]| f(*v), s, t_max, 1e-10, 500_000);
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(_, y)| y).collect();
            match recurrence(&pts) {
                Some(j) => loop_shape(&f, &pts[j..]),
                None => OrbitShape::Open,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_polar_cycle() {
        let shapes = scan_field(polar_oscillator, &[[0.1, 0.0], [2.0, 1.0], [0.0, -0.5]], 60.0);
        assert!(shapes.iter().all(|&s| s == OrbitShape::Cycle), "{shapes:?}");
    }

    #[test]
    fn harmonic_center_is_not_a_cycle() {
        let shapes = scan_field(|z| [-z[1], z[0]], &[[1.0, 0.0], [0.3, 0.2]], 30.0);
        assert!(shapes.iter().all(|&s| s == OrbitShape::Closed), "{shapes:?}");
    }

    #[test]
    fn no_cycles_at_center_parameters() {
        let r = limit_cycle_scan(&Params::new(1.0, 3.0).unwrap(), 40);
        assert!(r.cycles.is_empty(), "{:?}", r.cycles);
        assert!(r.closed_orbits > 0);
    }

    #[test]
    fn no_cycles_at_negative_b() {
        let r = limit_cycle_scan(&Params::new(-0.5, 3.0).unwrap(), 40);
        assert!(r.cycles.is_empty());
    }

    #[test]
    fn grid_size() {
        let g = seed_grid(100);
        assert_eq!(g.len(), 100);
        assert!(g.iter().all(|d| d.norm() < 0.95));
    }
}
