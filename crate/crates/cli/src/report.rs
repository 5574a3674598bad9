use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use brlab_core::bifurcation::locate;
use brlab_core::compactify::infinite_singular_points;
use brlab_core::darboux::available;
use brlab_core::flow::skeleton::{count_sr, trace_separatrices_with, TraceConfig};
use brlab_core::flow::signature;
use brlab_core::localanalysis::{classify_finite, BifurcationValues, SignVector, STRATUM_TOL};
use brlab_core::Params64;

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsOut {
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitePointOut {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub kind: String,
    /// `[re, im]` pairs
    pub eigenvalues: [[f64; 2]; 2],
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfinitePointOut {
    pub chart: String,
    pub u: f64,
    pub v: f64,
    pub kind: String,
    pub eigenvalues: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOut {
    pub method: String,
    pub tol: f64,
    pub t_max: f64,
    pub region_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool_version: String,
    pub seed: u64,
    pub params: ParamsOut,
    pub bifurcation_values: BTreeMap<String, f64>,
    pub sign_vector: String,
    /// bifurcation values that vanish, plus degenerate singular points
    pub degeneracies: Vec<String>,
    pub cell_id: Option<String>,
    pub finite_points: Vec<FinitePointOut>,
    pub infinite_points: Vec<InfinitePointOut>,
    pub darboux: Vec<String>,
    #[serde(rename = "S")]
    pub s: Option<usize>,
    #[serde(rename = "R")]
    pub r: Option<usize>,
    pub signature_hash: Option<String>,
    pub diagnostic: Option<String>,
    pub integrator: IntegratorOut,
}

pub fn params(b: f64, c: f64) -> Result<Params64, Failure> {
    Params64::new(b, c).map_err(|e| Failure::Usage(format!("parameters outside the domain b > -1, c > 0: {e}")))
}

/// Full report. A skeleton failure still yields a report, with the counts
/// left empty and the diagnostic filled in.
pub fn build(p: &Params64, cfg: &TraceConfig) -> ReportDocument {
    let v = BifurcationValues::new(p);
    let values: BTreeMap<String, f64> =
        [("g0", v.g0), ("g1", v.g1), ("g2", v.g2), ("g3", v.g3), ("g4", v.g4), ("D1", v.d1)]
            .into_iter()
            .map(|(k, x)| (k.to_string(), x))
            .collect();
    let finite = classify_finite(p);
    let mut degeneracies: Vec<String> =
        values.iter().filter(|(_, x)| x.abs() <= STRATUM_TOL).map(|(k, _)| format!("{k}=0")).collect();
    degeneracies.extend(finite.iter().filter(|f| f.degenerate).map(|f| format!("{} degenerate", f.name())));
    let finite_points = finite
        .iter()
        .map(|f| FinitePointOut {
            name: f.name(),
            x: f.location.x,
            y: f.location.y,
            kind: f.kind.name().to_string(),
            eigenvalues: f.eigenvalues.map(|z| [z.re, z.im]),
            degenerate: f.degenerate,
        })
        .collect();
    let infinite_points = infinite_singular_points(p)
        .iter()
        .map(|q| InfinitePointOut {
            chart: format!("{:?}", q.chart),
            u: q.disc.u,
            v: q.disc.v,
            kind: format!("{:?}", q.kind),
            eigenvalues: q.eigenvalues,
        })
        .collect();
    let (mut s, mut r, mut hash, mut diagnostic) = (None, None, None, None);
    match trace_separatrices_with(p, cfg).and_then(|sk| count_sr(&sk).map(|sr| (sk, sr))) {
        Ok((sk, (ss, rr))) => {
            s = Some(ss);
            r = Some(rr);
            hash = Some(signature(&sk).hash());
        }
        Err(e) => diagnostic = Some(e.to_string()),
    }
    ReportDocument {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        params: ParamsOut { b: p.b64(), c: p.c64() },
        bifurcation_values: values,
        sign_vector: SignVector::of(p, STRATUM_TOL).label(),
        degeneracies,
        cell_id: locate(p).map(|c| c.canonical_id),
        finite_points,
        infinite_points,
        darboux: available(p).into_iter().map(|d| d.name).collect(),
        s,
        r,
        signature_hash: hash,
        diagnostic,
        integrator: IntegratorOut {
            method: "dopri5(4)".into(),
            tol: cfg.flow.tol,
            t_max: cfg.flow.t_max,
            region_samples: cfg.samples,
        },
    }
}
