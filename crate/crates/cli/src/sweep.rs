//! Bifurcation diagram and class census over a parameter window.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use brlab_core::bifurcation::{
    analyze_cells_with, build_arrangement, census_diff, curve_polylines, group, Arrangement, BifurcationError, CellKind,
    Curve, Window,
};
use brlab_core::flow::skeleton::TraceConfig;
use brlab_core::Params64;

use crate::output::{escape, num};
use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowOut {
    pub c_min: f64,
    pub c_max: f64,
    pub b_min: f64,
    pub b_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOut {
    pub id: String,
    pub kind: String,
    pub b: f64,
    pub c: f64,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassOut {
    pub index: usize,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub hash: String,
    pub members: Vec<String>,
    /// how each member matched the first: FlowPreserving or TimeReversed
    pub variants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusDocument {
    pub tool_version: String,
    pub seed: u64,
    pub window: WindowOut,
    pub cells: usize,
    pub classes: Vec<ClassOut>,
    pub samples: Vec<SampleOut>,
    pub expected_classes: usize,
    pub matches_expected: bool,
    /// differences from the expected census, one per line
    pub diff: Vec<String>,
}

pub struct Sweep {
    pub census: CensusDocument,
    pub svg: String,
}

fn window_error(e: BifurcationError) -> Failure {
    match e {
        BifurcationError::WindowTooSmall { .. } => Failure::Usage(e.to_string()),
        e => Failure::Analysis(e.to_string()),
    }
}

pub fn census(a: &Arrangement, cfg: &TraceConfig) -> Result<CensusDocument, Failure> {
    let analyses = analyze_cells_with(&a.cells, cfg).map_err(window_error)?;
    let classes = group(&analyses);
    let diff = census_diff(&classes);
    let class_of: BTreeMap<&str, usize> =
        classes.iter().enumerate().flat_map(|(i, k)| k.members.iter().map(move |m| (m.as_str(), i))).collect();
    let samples = a
        .cells
        .iter()
        .zip(&analyses)
        .map(|(cell, an)| SampleOut {
            id: cell.canonical_id.clone(),
            kind: format!("{:?}", cell.kind),
            b: cell.sample.b64(),
            c: cell.sample.c64(),
            s: an.s,
            r: an.r,
            class: class_of[cell.canonical_id.as_str()],
        })
        .collect();
    let w = a.window;
    Ok(CensusDocument {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        window: WindowOut { c_min: w.c_min, c_max: w.c_max, b_min: w.b_min, b_max: w.b_max },
        cells: a.cells.len(),
        classes: classes
            .iter()
            .enumerate()
            .map(|(i, k)| ClassOut {
                index: i,
                s: k.s,
                r: k.r,
                hash: k.hash(),
                members: k.members.clone(),
                variants: k.variants.iter().map(|v| format!("{v:?}")).collect(),
            })
            .collect(),
        samples,
        expected_classes: diff.classes.0,
        matches_expected: diff.is_match(),
        diff: if diff.is_match() { vec![] } else { diff.to_string().lines().map(|l| l.trim().to_string()).collect() },
    })
}

// qualitative palette (Tableau 20 order), evenly spread hues beyond it
const PALETTE: [&str; 20] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
];

fn color(i: usize) -> String {
    if let Some(c) = PALETTE.get(i) {
        return c.to_string();
    }
    let h = (i as f64 * 137.508) % 360.0;
    format!("hsl({h:.1},60%,60%)")
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 560.0;
const MARGIN: f64 = 60.0;

pub fn diagram(a: &Arrangement, doc: &CensusDocument, grid: usize) -> String {
    let w = a.window;
    let (c0, c1) = (w.c_min.max(0.0), w.c_max);
    let (b0, b1) = (w.b_min.max(-1.0), w.b_max);
    let sx = (WIDTH - 2.0 * MARGIN) / (c1 - c0);
    let sy = (HEIGHT - 2.0 * MARGIN) / (b1 - b0);
    let px = |c: f64| MARGIN + (c - c0) * sx;
    let py = |b: f64| HEIGHT - MARGIN - (b - b0) * sy;
    let class_of: BTreeMap<&str, usize> = doc.samples.iter().map(|s| (s.id.as_str(), s.class)).collect();

    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(out, "<title>bifurcation diagram</title>").unwrap();
    writeln!(out, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##).unwrap();

    let (dc, db) = ((c1 - c0) / grid as f64, (b1 - b0) / grid as f64);
    writeln!(out, r#"<g id="shading" stroke="none" shape-rendering="crispEdges">"#).unwrap();
    for i in 0..grid {
        for j in 0..grid {
            let (c, b) = (c0 + (i as f64 + 0.5) * dc, b0 + (j as f64 + 0.5) * db);
            let Ok(p) = Params64::new(b, c) else { continue };
            let Some(cell) = a.locate(&p).filter(|x| x.kind == CellKind::Region) else { continue };
            let k = class_of[cell.canonical_id.as_str()];
            writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                num(px(c - dc / 2.0)),
                num(py(b + db / 2.0)),
                num(dc * sx),
                num(db * sy),
                color(k)
            )
            .unwrap();
        }
    }
    writeln!(out, "</g>").unwrap();

    writeln!(out, r##"<g id="curves" fill="none" stroke="#222222" stroke-width="1.5">"##).unwrap();
    for k in Curve::ALL {
        writeln!(out, r#"<g class="curve-family" id="curve-{}">"#, k.name()).unwrap();
        for piece in curve_polylines(k, &w, 400) {
            let pts: Vec<String> = piece.iter().map(|&(c, b)| format!("{},{}", num(px(c)), num(py(b)))).collect();
            writeln!(out, r#"<polyline points="{}"/>"#, pts.join(" ")).unwrap();
        }
        writeln!(out, "</g>").unwrap();
    }
    writeln!(out, "</g>").unwrap();

    writeln!(out, r##"<g id="points" fill="#000000" font-family="sans-serif" font-size="12">"##).unwrap();
    for (i, q) in a.intersections.iter().enumerate() {
        let (x, y) = (px(q.c64()), py(q.b64()));
        writeln!(out, r#"<circle cx="{}" cy="{}" r="4"/><text x="{}" y="{}">q{}</text>"#, num(x), num(y), num(x + 6.0), num(y - 6.0), i + 1)
            .unwrap();
    }
    writeln!(out, "</g>").unwrap();

    writeln!(out, r##"<g id="axes" stroke="#000000" font-family="sans-serif" font-size="12">"##).unwrap();
    writeln!(
        out,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none"/>"#,
        num(MARGIN),
        num(MARGIN),
        num(WIDTH - 2.0 * MARGIN),
        num(HEIGHT - 2.0 * MARGIN)
    )
    .unwrap();
    writeln!(out, r#"<text x="{}" y="{}" stroke="none">c</text>"#, num(WIDTH / 2.0), num(HEIGHT - 20.0)).unwrap();
    writeln!(out, r#"<text x="20" y="{}" stroke="none">b</text>"#, num(HEIGHT / 2.0)).unwrap();
    for (v, x) in [(c0, px(c0)), (c1, px(c1))] {
        writeln!(out, r#"<text x="{}" y="{}" stroke="none">{}</text>"#, num(x - 8.0), num(HEIGHT - MARGIN + 16.0), v).unwrap();
    }
    for (v, y) in [(b0, py(b0)), (b1, py(b1))] {
        writeln!(out, r#"<text x="{}" y="{}" stroke="none">{}</text>"#, num(MARGIN - 30.0), num(y + 4.0), v).unwrap();
    }
    writeln!(out, "</g>").unwrap();

    writeln!(out, r#"<g id="legend" font-family="sans-serif" font-size="11">"#).unwrap();
    for (i, k) in doc.classes.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        writeln!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            num(WIDTH - MARGIN + 4.0),
            num(y),
            color(i),
            num(WIDTH - MARGIN + 18.0),
            num(y + 9.0),
            escape(&format!("({},{})", k.s, k.r))
        )
        .unwrap();
    }
    writeln!(out, "</g>").unwrap();
    writeln!(out, "</svg>").unwrap();
    out
}

pub fn run(w: &Window, grid: usize, cfg: &TraceConfig) -> Result<Sweep, Failure> {
    if grid == 0 {
        return Err(Failure::Usage("grid must be positive".into()));
    }
    if !(w.c_min < w.c_max && w.b_min < w.b_max) {
        return Err(Failure::Usage("empty window".into()));
    }
    let a = build_arrangement(w).map_err(window_error)?;
    let census = census(&a, cfg)?;
    let svg = diagram(&a, &census, grid);
    Ok(Sweep { census, svg })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors_are_distinct() {
        let c: std::collections::BTreeSet<String> = (0..15).map(color).collect();
        assert_eq!(c.len(), 15);
    }

    #[test]
    fn small_window_is_usage_error() {
        let w = Window { c_max: 4.0, ..Window::default() };
        let e = run(&w, 10, &TraceConfig::default()).err().unwrap();
        assert_eq!(e.exit_code(), 2);
    }
}
