//! Phase portrait on the Poincare disc as SVG 1.1.

use std::fmt::Write;

use brlab_core::compactify::{infinite_singular_points, plane_to_disc, DiscPoint, InfiniteKind};
use brlab_core::flow::cycles::recurrence;
use brlab_core::flow::skeleton::{count_sr, trace_separatrices_with, EdgeKind, LimitSet, NodeLabel, Skeleton, TraceConfig};
use brlab_core::flow::{integrate, Direction};
use brlab_core::localanalysis::{classify_finite, PointKind};
use brlab_core::Params64;

use crate::output::{escape, num};

const VIEW: f64 = 1.15;

fn header(out: &mut String, title: &str) {
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="600" height="600" viewBox="{} {} {} {}">"#,
        num(-VIEW),
        num(-VIEW),
        num(2.0 * VIEW),
        num(2.0 * VIEW)
    )
    .unwrap();
    writeln!(out, "<title>{}</title>", escape(title)).unwrap();
    writeln!(out, r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#ffffff"/>"##, num(-VIEW), num(-VIEW), num(2.0 * VIEW), num(2.0 * VIEW))
        .unwrap();
}

/// Drops points closer than `eps` to the last kept one.
fn thin(pts: &[DiscPoint<f64>], eps: f64) -> Vec<DiscPoint<f64>> {
    let mut out: Vec<DiscPoint<f64>> = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let keep = match out.last() {
            None => true,
            Some(q) => i + 1 == pts.len() || q.dist(p) >= eps,
        };
        if keep {
            out.push(*p);
        }
    }
    out
}

// y is flipped so that the plane's y axis points up
fn polyline(out: &mut String, pts: &[DiscPoint<f64>], attrs: &str) {
    let pts = thin(pts, 2e-3);
    if pts.len() < 2 {
        return;
    }
    let coords: Vec<String> = pts.iter().map(|p| format!("{},{}", num(p.u), num(-p.v))).collect();
    writeln!(out, r#"<polyline points="{}" {attrs}/>"#, coords.join(" ")).unwrap();
}

fn glyph(out: &mut String, d: &DiscPoint<f64>, label: NodeLabel) {
    let (x, y) = (num(d.u), num(-d.v));
    let r = 0.025;
    let body = match label {
        NodeLabel::Attractor | NodeLabel::InfAttractor => format!(r##"<circle cx="{x}" cy="{y}" r="{r}" fill="#1f4e9c"/>"##),
        NodeLabel::Repeller | NodeLabel::InfRepeller => {
            format!(r##"<circle cx="{x}" cy="{y}" r="{r}" fill="#ffffff" stroke="#c0392b" stroke-width="0.008"/>"##)
        }
        NodeLabel::Saddle | NodeLabel::InfSaddle => format!(
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#2d2d2d"/>"##,
            num(d.u - r),
            num(-d.v - r),
            num(2.0 * r),
            num(2.0 * r)
        ),
        NodeLabel::SaddleNode | NodeLabel::InfSaddleNode => format!(
            r##"<polygon points="{},{} {},{} {},{}" fill="#8e44ad"/>"##,
            num(d.u),
            num(-d.v - r),
            num(d.u - r),
            num(-d.v + r),
            num(d.u + r),
            num(-d.v + r)
        ),
        NodeLabel::Center => format!(
            r##"<circle cx="{x}" cy="{y}" r="{r}" fill="none" stroke="#27ae60" stroke-width="0.008"/><circle cx="{x}" cy="{y}" r="0.006" fill="#27ae60"/>"##
        ),
        NodeLabel::InfNilpotent => format!(
            r##"<polygon points="{},{} {},{} {},{} {},{}" fill="#e67e22"/>"##,
            num(d.u),
            num(-d.v - r),
            num(d.u + r),
            num(-d.v),
            num(d.u),
            num(-d.v + r),
            num(d.u - r),
            num(-d.v)
        ),
        NodeLabel::LinePoint => format!(r##"<circle cx="{x}" cy="{y}" r="0.012" fill="#7f8c8d"/>"##),
    };
    writeln!(out, r#"<g class="point" data-type="{label:?}">{body}</g>"#).unwrap();
}

fn boundary(out: &mut String) {
    writeln!(out, r##"<g id="boundary"><circle cx="0" cy="0" r="1" fill="none" stroke="#000000" stroke-width="0.006"/></g>"##).unwrap();
}

fn legend(out: &mut String, lines: &[String]) {
    writeln!(out, r#"<g id="legend" font-family="sans-serif" font-size="0.05">"#).unwrap();
    for (i, l) in lines.iter().enumerate() {
        writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, num(-1.12), num(-1.08 + 0.06 * i as f64), escape(l)).unwrap();
    }
    writeln!(out, "</g>").unwrap();
}

/// Closed orbits through points between a center and the representative
/// point of its period annulus.
fn closed_family(p: &Params64, sk: &Skeleton, cfg: &TraceConfig) -> Vec<Vec<DiscPoint<f64>>> {
    let mut out = Vec::new();
    for n in sk.nodes.iter().filter(|n| n.label == NodeLabel::Center) {
        let Some(rep) = sk
            .faces
            .iter()
            .filter_map(|f| f.rep.as_ref())
            .filter(|r| r.alpha == LimitSet::Closed || r.omega == LimitSet::Closed)
            .min_by(|a, b| a.point.dist(&n.disc).total_cmp(&b.point.dist(&n.disc)))
        else {
            continue;
        };
        for s in [0.2, 0.4, 0.6, 0.8] {
            let start = DiscPoint::new(n.disc.u + s * (rep.point.u - n.disc.u), n.disc.v + s * (rep.point.v - n.disc.v));
            let o = integrate(p, start, Direction::Forward, 100.0, cfg.rep_flow.tol);
            let pts = o.disc_points();
            let arr: Vec<[f64; 2]> = pts.iter().map(|d| [d.u, d.v]).collect();
            match recurrence(&arr) {
                Some(j) => out.push(pts[j..].to_vec()),
                None => out.push(pts),
            }
        }
    }
    out
}

pub struct Portrait {
    pub svg: String,
    /// diagnostic when the skeleton could not be completed
    pub warning: Option<String>,
}

pub fn render(p: &Params64, cfg: &TraceConfig) -> Portrait {
    let mut out = String::new();
    header(&mut out, &format!("phase portrait b={} c={}", p.b64(), p.c64()));
    boundary(&mut out);
    let result = trace_separatrices_with(p, cfg).and_then(|sk| count_sr(&sk).map(|sr| (sk, sr)));
    match result {
        Ok((sk, (s, r))) => {
            writeln!(out, r##"<g id="orbits" fill="none" stroke="#9aa5b1" stroke-width="0.003">"##).unwrap();
            for f in &sk.faces {
                if let Some(rep) = &f.rep {
                    polyline(&mut out, &rep.orbit, r#"class="orbit""#);
                }
            }
            for o in closed_family(p, &sk, cfg) {
                polyline(&mut out, &o, r#"class="closed-orbit""#);
            }
            writeln!(out, "</g>").unwrap();
            writeln!(out, r##"<g id="separatrices" fill="none" stroke="#c0392b" stroke-width="0.008">"##).unwrap();
            for e in sk.edges.iter().filter(|e| e.kind != EdgeKind::BoundaryArc) {
                let attrs = match e.kind {
                    EdgeKind::SingularLine => r#"class="singular-line" stroke-dasharray="0.03 0.02""#,
                    _ => r#"class="separatrix""#,
                };
                polyline(&mut out, &e.polyline, attrs);
            }
            writeln!(out, "</g>").unwrap();
            writeln!(out, r#"<g id="points">"#).unwrap();
            for n in &sk.nodes {
                glyph(&mut out, &n.disc, n.label);
            }
            writeln!(out, "</g>").unwrap();
            legend(&mut out, &[format!("b = {}, c = {}", p.b64(), p.c64()), format!("S = {s}, R = {r}")]);
            writeln!(out, "</svg>").unwrap();
            Portrait { svg: out, warning: None }
        }
        Err(e) => {
            // singular points only, from the local analysis
            writeln!(out, r#"<g id="points">"#).unwrap();
            for f in classify_finite(p) {
                let label = match f.kind {
                    PointKind::StableNode | PointKind::StableFocus => NodeLabel::Attractor,
                    PointKind::UnstableNode | PointKind::UnstableFocus => NodeLabel::Repeller,
                    PointKind::Saddle => NodeLabel::Saddle,
                    PointKind::SaddleNode => NodeLabel::SaddleNode,
                    PointKind::Center => NodeLabel::Center,
                    PointKind::NonIsolated => NodeLabel::LinePoint,
                };
                glyph(&mut out, &plane_to_disc(&f.location), label);
            }
            for q in infinite_singular_points(p) {
                let label = match q.kind {
                    InfiniteKind::EllipticHyperbolic => NodeLabel::InfNilpotent,
                    InfiniteKind::Saddle => NodeLabel::InfSaddle,
                    InfiniteKind::StableNode => NodeLabel::InfAttractor,
                    InfiniteKind::UnstableNode => NodeLabel::InfRepeller,
                    InfiniteKind::SaddleNode => NodeLabel::InfSaddleNode,
                };
                glyph(&mut out, &q.disc, label);
            }
            writeln!(out, "</g>").unwrap();
            let msg = e.to_string();
            writeln!(
                out,
                r##"<g id="warning" font-family="sans-serif" font-size="0.05" fill="#c0392b"><text x="{}" y="{}">skeleton incomplete: {}</text></g>"##,
                num(-1.12),
                num(1.12),
                escape(&msg)
            )
            .unwrap();
            legend(&mut out, &[format!("b = {}, c = {}", p.b64(), p.c64())]);
            writeln!(out, "</svg>").unwrap();
            Portrait { svg: out, warning: Some(msg) }
        }
    }
}
