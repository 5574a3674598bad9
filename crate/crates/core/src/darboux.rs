//! Catalog of invariant algebraic curves with their cofactors, the Darboux
//! first integral `H` and the Darboux invariants `I1`, `I2`, `I3`.

use num_traits::ToPrimitive;
use serde::Serialize;
use thiserror::Error;

use crate::exactpoly::{cofactor_of, darboux_combination, lie_derivative, BiPoly, Combination, CombinationMode};
use crate::model::{Params, PlanePoint};
use crate::{rat, Poly, Rat, Scalar};

/// Absolute tolerance for locus membership of float parameters.
pub const LOCUS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DarbouxError {
    #[error("no catalog first integral at these parameters (requires c = 2b + 1)")]
    NoFirstIntegral,
    #[error("the invariants I1, I2 exist only at (b, c) = (-1/4, 1/2)")]
    NotAtI12Point,
    #[error("I3 requires b = (1 - c)/(2c - 3) with c != 3/2")]
    NotOnI3Locus,
    #[error("factor {factor} is not evaluable at ({x}, {y})")]
    Domain { factor: usize, x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CurveId {
    F1,
    F2,
    F3,
    F4,
    F5,
}

impl CurveId {
    pub const ALL: [CurveId; 5] = [CurveId::F1, CurveId::F2, CurveId::F3, CurveId::F4, CurveId::F5];

    pub fn name(self) -> &'static str {
        match self {
            CurveId::F1 => "f1",
            CurveId::F2 => "f2",
            CurveId::F3 => "f3",
            CurveId::F4 => "f4",
            CurveId::F5 => "f5",
        }
    }

    /// Exact locus test.
    pub fn valid_at<C: Scalar>(self, p: &Params<C>) -> bool {
        let (b, c) = (p.b().clone(), p.c().clone());
        let one = C::one();
        let two = one.clone() + one.clone();
        let three = two.clone() + one.clone();
        let four = two.clone() + two.clone();
        match self {
            CurveId::F1 => true,
            CurveId::F2 => c == two * b + one,
            CurveId::F3 | CurveId::F4 => b * four.clone() == -one && c * two == C::one(),
            CurveId::F5 => {
                let d = two * c.clone() - three;
                !d.is_zero() && b * d == one - c
            }
        }
    }

    /// Locus test for floats, to `LOCUS_TOL`. Exactness needs rational input.
    pub fn valid_at_f64(self, p: &Params<f64>) -> bool {
        let (b, c) = (p.b64(), p.c64());
        match self {
            CurveId::F1 => true,
            CurveId::F2 => (c - 2.0 * b - 1.0).abs() <= LOCUS_TOL,
            CurveId::F3 | CurveId::F4 => (b + 0.25).abs() <= LOCUS_TOL && (c - 0.5).abs() <= LOCUS_TOL,
            CurveId::F5 => {
                let d = 2.0 * c - 3.0;
                d.abs() > LOCUS_TOL && (b * d - (1.0 - c)).abs() <= LOCUS_TOL
            }
        }
    }

    pub fn curve<C: Scalar>(self, p: &Params<C>) -> BiPoly<C> {
        let one = C::one();
        let two = one.clone() + one.clone();
        let three = two.clone() + one.clone();
        let four = two.clone() + two.clone();
        let (b, c) = (p.b().clone(), p.c().clone());
        match self {
            CurveId::F1 => BiPoly::x(),
            CurveId::F2 => {
                let h = (two.clone() * b + one.clone()) / two;
                BiPoly::from_terms([((0, 2), h.clone()), ((0, 1), -(h.clone() + h)), ((1, 0), one)])
            }
            CurveId::F3 => BiPoly::from_terms([((0, 2), one), ((1, 0), four)]),
            CurveId::F4 => {
                BiPoly::from_terms([((0, 2), one), ((0, 1), -four.clone()), ((0, 0), four.clone()), ((1, 0), four)])
            }
            CurveId::F5 => {
                // 2(3-2c) x + (y - 3 + 2c)^2
                let m = three.clone() - two.clone() * c;
                BiPoly::from_terms([
                    ((1, 0), two.clone() * m.clone()),
                    ((0, 2), one),
                    ((0, 1), -(two * m.clone())),
                    ((0, 0), m.clone() * m),
                ])
            }
        }
    }

    pub fn cofactor<C: Scalar>(self, p: &Params<C>) -> BiPoly<C> {
        let one = C::one();
        let two = one.clone() + one.clone();
        let three = two.clone() + one.clone();
        let (b, c) = (p.b().clone(), p.c().clone());
        match self {
            CurveId::F1 => BiPoly::from_terms([((0, 0), one.clone()), ((0, 1), -one)]),
            CurveId::F2 => {
                let k = two * b;
                BiPoly::from_terms([((0, 1), k.clone()), ((0, 0), -k)])
            }
            CurveId::F3 => BiPoly::from_terms([((0, 0), one), ((0, 1), -(C::one() / two))]),
            CurveId::F4 => BiPoly::from_terms([((0, 1), -(one / two))]),
            CurveId::F5 => {
                let k = two * (c.clone() - one) / (three - (C::one() + C::one()) * c);
                BiPoly::monomial(0, 1, k)
            }
        }
    }
}

/// Exact check `X f - K f == 0`; returns the residual polynomial.
pub fn curve_residual(id: CurveId, p: &Params<Rat>) -> Poly {
    let f = id.curve(p);
    let k = id.cofactor(p);
    &lie_derivative(p, &f) - &(&k * &f)
}

/// Representative rational parameters on each curve's locus.
pub fn representative_params(id: CurveId) -> Params<Rat> {
    let (b, c) = match id {
        CurveId::F1 => (rat(1, 3), rat(7, 5)),
        CurveId::F2 => (rat(1, 1), rat(3, 1)),
        CurveId::F3 | CurveId::F4 => (rat(-1, 4), rat(1, 2)),
        CurveId::F5 => (rat(1, 3), rat(6, 5)),
    };
    Params::new(b, c).expect("catalog parameters are in the domain")
}

/// One of the four cofactor identities `sum lambda_i K_i = value`.
#[derive(Debug, Clone, Serialize)]
pub struct CombinationCheck {
    pub name: String,
    pub curves: Vec<CurveId>,
    pub expected_lambdas: Vec<Rat>,
    pub expected_value: Rat,
    pub found: Option<Combination<Rat>>,
    pub residual: Poly,
    pub pass: bool,
}

pub fn combination_identities() -> Vec<CombinationCheck> {
    let half = rat(1, 2);
    let c5 = rat(6, 5);
    let l5 = rat(2, 1) * (rat(1, 1) - c5.clone()) / (rat(2, 1) * c5.clone() - rat(3, 1));
    let v5 = rat(2, 1) * (c5.clone() - rat(1, 1)) / (rat(3, 1) - rat(2, 1) * c5);
    let f2p = representative_params(CurveId::F2);
    let b2 = f2p.b().clone();
    let cases = vec![
        ("2b K1 + K2 = 0", vec![CurveId::F1, CurveId::F2], f2p, vec![rat(2, 1) * b2, rat(1, 1)], rat(0, 1)),
        (
            "-1/2 K1 + K3 = 1/2",
            vec![CurveId::F1, CurveId::F3],
            representative_params(CurveId::F3),
            vec![-half.clone(), rat(1, 1)],
            half.clone(),
        ),
        (
            "-1/2 K1 + K4 = -1/2",
            vec![CurveId::F1, CurveId::F4],
            representative_params(CurveId::F4),
            vec![-half.clone(), rat(1, 1)],
            -half,
        ),
        (
            "2(1-c)/(2c-3) K1 + K5 = 2(c-1)/(3-2c)",
            vec![CurveId::F1, CurveId::F5],
            representative_params(CurveId::F5),
            vec![l5, rat(1, 1)],
            v5,
        ),
    ];
    cases
        .into_iter()
        .map(|(name, curves, p, lambdas, value)| {
            let ks: Vec<Poly> = curves.iter().map(|id| id.cofactor(&p)).collect();
            let mode = if value == rat(0, 1) { CombinationMode::FirstIntegral } else { CombinationMode::Invariant };
            let found = darboux_combination(&ks, mode).ok().flatten();
            // expected identity as a polynomial: sum lambda K - value
            let mut residual = Poly::constant(-value.clone());
            for (l, k) in lambdas.iter().zip(&ks) {
                residual = &residual + &k.scale(l);
            }
            let pass = residual.is_zero()
                && found.as_ref().is_some_and(|f| projectively_equal(f, &lambdas, &(-value.clone())));
            CombinationCheck {
                name: name.to_string(),
                curves,
                expected_lambdas: lambdas,
                expected_value: value,
                found,
                residual,
                pass,
            }
        })
        .collect()
}

/// `(lambdas, s)` equal up to one nonzero scalar.
pub fn projectively_equal(found: &Combination<Rat>, lambdas: &[Rat], s: &Rat) -> bool {
    let zero = rat(0, 1);
    let Some(i) = lambdas.iter().position(|l| *l != zero) else {
        return false;
    };
    if found.lambdas[i] == zero {
        return false;
    }
    let k = lambdas[i].clone() / found.lambdas[i].clone();
    found.lambdas.iter().zip(lambdas).all(|(f, l)| f.clone() * k.clone() == *l) && found.s.clone() * k == *s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Factor {
    pub poly: Poly,
    pub exponent: f64,
}

/// `prod f_i^{lambda_i} * exp(s t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DarbouxExpr {
    pub name: String,
    pub factors: Vec<Factor>,
    pub exp_rate: f64,
}

impl DarbouxExpr {
    pub fn constant(name: &str) -> Self {
        Self { name: name.into(), factors: vec![], exp_rate: 0.0 }
    }

    /// `log |F(x, y)|` of the time-free part.
    pub fn log_abs_spatial(&self, q: &PlanePoint<f64>) -> Result<f64, DarbouxError> {
        let mut acc = 0.0;
        for (i, f) in self.factors.iter().enumerate() {
            let v = f.poly.eval_f64(q.x, q.y);
            let integral = f.exponent.fract() == 0.0;
            if v == 0.0 || (v < 0.0 && !integral) {
                return Err(DarbouxError::Domain { factor: i, x: q.x, y: q.y });
            }
            acc += f.exponent * v.abs().ln();
        }
        Ok(acc)
    }

    pub fn eval(&self, q: &PlanePoint<f64>, t: f64) -> Result<f64, DarbouxError> {
        let mut val = (self.exp_rate * t).exp();
        for (i, f) in self.factors.iter().enumerate() {
            let v = f.poly.eval_f64(q.x, q.y);
            if f.exponent.fract() == 0.0 {
                val *= v.powi(f.exponent as i32);
            } else if v > 0.0 {
                val *= v.powf(f.exponent);
            } else {
                return Err(DarbouxError::Domain { factor: i, x: q.x, y: q.y });
            }
        }
        Ok(val)
    }

    /// Closest factor value to a forbidden zero (factors with non-positive
    /// or fractional exponents only).
    fn singular_margin(&self, q: &PlanePoint<f64>) -> f64 {
        self.factors
            .iter()
            .filter(|f| f.exponent <= 0.0 || f.exponent.fract() != 0.0)
            .map(|f| {
                let v = f.poly.eval_f64(q.x, q.y);
                if f.exponent.fract() != 0.0 && v < 0.0 {
                    0.0
                } else {
                    v.abs()
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn to_f(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `H = x^{2b} ((2b+1) y^2 - 2(2b+1) y + 2x) = 2 f1^{2b} f2` on `c = 2b + 1`.
pub fn first_integral_h(p: &Params<Rat>) -> Result<DarbouxExpr, DarbouxError> {
    if !CurveId::F2.valid_at(p) {
        return Err(DarbouxError::NoFirstIntegral);
    }
    Ok(h_expr(p))
}

pub fn first_integral_h_f64(p: &Params<f64>) -> Result<DarbouxExpr, DarbouxError> {
    if !CurveId::F2.valid_at_f64(p) {
        return Err(DarbouxError::NoFirstIntegral);
    }
    // build from exact images; the locus holds to LOCUS_TOL
    let exact = p.to_exact().map_err(|_| DarbouxError::NoFirstIntegral)?;
    Ok(h_expr(&exact))
}

fn h_expr(p: &Params<Rat>) -> DarbouxExpr {
    let two_b = rat(2, 1) * p.b().clone();
    let f2 = CurveId::F2.curve(p).scale(&rat(2, 1));
    let mut factors = vec![Factor { poly: Poly::x(), exponent: to_f(&two_b) }];
    factors.push(Factor { poly: f2, exponent: 1.0 });
    DarbouxExpr { name: "H".into(), factors, exp_rate: 0.0 }
}

/// `I1 = x^{-1/2} (y^2 + 4x) e^{-t/2}`, `I2 = x^{-1/2} ((y-2)^2 + 4x) e^{t/2}` at `(b, c) = (-1/4, 1/2)`.
pub fn invariants_i1_i2() -> (DarbouxExpr, DarbouxExpr) {
    let p = representative_params(CurveId::F3);
    let i1 = DarbouxExpr {
        name: "I1".into(),
        factors: vec![
            Factor { poly: Poly::x(), exponent: -0.5 },
            Factor { poly: CurveId::F3.curve(&p), exponent: 1.0 },
        ],
        exp_rate: -0.5,
    };
    let i2 = DarbouxExpr {
        name: "I2".into(),
        factors: vec![
            Factor { poly: Poly::x(), exponent: -0.5 },
            Factor { poly: CurveId::F4.curve(&p), exponent: 1.0 },
        ],
        exp_rate: 0.5,
    };
    (i1, i2)
}

pub fn invariants_i1_i2_at(p: &Params<f64>) -> Result<(DarbouxExpr, DarbouxExpr), DarbouxError> {
    if !CurveId::F3.valid_at_f64(p) {
        return Err(DarbouxError::NotAtI12Point);
    }
    Ok(invariants_i1_i2())
}

/// `I3 = x^{2(1-c)/(2c-3)} ((y - (3-2c))^2 + 2(3-2c) x) e^{2(1-c)/(3-2c) t}`.
pub fn invariant_i3(p: &Params<Rat>) -> Result<DarbouxExpr, DarbouxError> {
    if !CurveId::F5.valid_at(p) {
        return Err(DarbouxError::NotOnI3Locus);
    }
    let c = p.c().clone();
    let lam = rat(2, 1) * (rat(1, 1) - c.clone()) / (rat(2, 1) * c.clone() - rat(3, 1));
    let s = rat(2, 1) * (rat(1, 1) - c.clone()) / (rat(3, 1) - rat(2, 1) * c);
    Ok(DarbouxExpr {
        name: "I3".into(),
        factors: vec![
            Factor { poly: Poly::x(), exponent: to_f(&lam) },
            Factor { poly: CurveId::F5.curve(p), exponent: 1.0 },
        ],
        exp_rate: to_f(&s),
    })
}

pub fn invariant_i3_f64(p: &Params<f64>) -> Result<DarbouxExpr, DarbouxError> {
    if !CurveId::F5.valid_at_f64(p) {
        return Err(DarbouxError::NotOnI3Locus);
    }
    // evaluate with the exact c and the b implied by the locus
    let c = Rat::from_float(p.c64()).ok_or(DarbouxError::NotOnI3Locus)?;
    let b = (rat(1, 1) - c.clone()) / (rat(2, 1) * c.clone() - rat(3, 1));
    let exact = Params::new(b, c).map_err(|_| DarbouxError::NotOnI3Locus)?;
    invariant_i3(&exact)
}

/// Darboux objects available at `p`.
pub fn available(p: &Params<f64>) -> Vec<DarbouxExpr> {
    let mut out = Vec::new();
    if let Ok(h) = first_integral_h_f64(p) {
        out.push(h);
    }
    if let Ok((i1, i2)) = invariants_i1_i2_at(p) {
        out.push(i1);
        out.push(i2);
    }
    if let Ok(i3) = invariant_i3_f64(p) {
        out.push(i3);
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftReport {
    /// max |log|expr(t)| - log|expr(t0)||, the exponential factor included
    pub max_log_drift: f64,
    /// exponential rate recovered from the time-free part by least squares
    pub measured_rate: f64,
    pub nominal_rate: f64,
    pub samples_used: usize,
    /// index ranges `[start, end)` dropped for touching a factor zero
    pub excluded: Vec<(usize, usize)>,
}

/// Drift of `expr` along a timed plane orbit. Samples within `1e-8` of a
/// forbidden factor zero are excluded and reported.
pub fn verify_along_flow(expr: &DarbouxExpr, orbit: &[(f64, PlanePoint<f64>)]) -> DriftReport {
    let mut excluded: Vec<(usize, usize)> = Vec::new();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (k, (t, q)) in orbit.iter().enumerate() {
        let ok = q.x.is_finite() && q.y.is_finite() && expr.singular_margin(q) > 1e-8;
        match (ok, expr.log_abs_spatial(q)) {
            (true, Ok(l)) => pts.push((*t, l)),
            _ => match excluded.last_mut() {
                Some(r) if r.1 == k => r.1 = k + 1,
                _ => excluded.push((k, k + 1)),
            },
        }
    }
    if pts.is_empty() {
        return DriftReport {
            max_log_drift: f64::NAN,
            measured_rate: f64::NAN,
            nominal_rate: expr.exp_rate,
            samples_used: 0,
            excluded,
        };
    }
    let (t0, l0) = pts[0];
    let max_log_drift = pts
        .iter()
        .map(|&(t, l)| (l + expr.exp_rate * t - l0 - expr.exp_rate * t0).abs())
        .fold(0.0, f64::max);
    // least squares slope of log F against t; the rate is its negative
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let measured_rate = if sxx > 0.0 { -sxy / sxx } else { f64::NAN };
    DriftReport { max_log_drift, measured_rate, nominal_rate: expr.exp_rate, samples_used: pts.len(), excluded }
}

/// Verifies every catalog curve at its representative parameters.
pub fn catalog_residuals() -> Vec<(CurveId, Params<Rat>, Poly)> {
    CurveId::ALL
        .iter()
        .map(|&id| {
            let p = representative_params(id);
            let r = curve_residual(id, &p);
            (id, p, r)
        })
        .collect()
}

/// Cofactor recomputed from scratch, independent of the catalog formula.
pub fn derived_cofactor(id: CurveId, p: &Params<Rat>) -> Option<Poly> {
    cofactor_of(p, &id.curve(p)).ok().flatten()
}
