//! Parameters, the reduced vector field and its Jacobian.
//!
//! The original three-parameter model
//! `x' = x(1-y), y' = (h-1) y^2 + (1-c) y + (c/k) x`
//! reduces to the two-parameter field by `b = h - 1` and the coordinate
//! scaling `X = (c/k) x`. No time rescaling is needed.

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Rat, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("parameter {0} is not a finite number and has no exact rational value")]
    NotExact(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullParams<T> {
    pub c: T,
    pub k: T,
    pub h: T,
}

impl<T: Scalar> FullParams<T> {
    pub fn new(c: T, k: T, h: T) -> Result<Self, ModelError> {
        let zero = T::zero();
        for (name, v) in [("c", &c), ("k", &k), ("h", &h)] {
            if *v <= zero {
                return Err(ModelError::Domain(format!("{name} must be positive, got {v:?}")));
            }
        }
        Ok(Self { c, k, h })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params<T> {
    b: T,
    c: T,
}

impl<T: Scalar> Params<T> {
    /// Rejects `b <= -1` and `c <= 0`.
    pub fn new(b: T, c: T) -> Result<Self, ModelError> {
        if b <= -T::one() {
            return Err(ModelError::Domain(format!("b must exceed -1, got {b:?}")));
        }
        if c <= T::zero() {
            return Err(ModelError::Domain(format!("c must be positive, got {c:?}")));
        }
        Ok(Self { b, c })
    }

    pub fn b(&self) -> &T {
        &self.b
    }

    pub fn c(&self) -> &T {
        &self.c
    }
}

impl Params<f64> {
    pub fn b64(&self) -> f64 {
        self.b
    }

    pub fn c64(&self) -> f64 {
        self.c
    }

    /// Exact rational image of the binary floats.
    pub fn to_exact(&self) -> Result<Params<Rat>, ModelError> {
        let b = Rat::from_float(self.b).ok_or(ModelError::NotExact("b"))?;
        let c = Rat::from_float(self.c).ok_or(ModelError::NotExact("c"))?;
        Ok(Params { b, c })
    }
}

impl Params<Rat> {
    pub fn to_f64(&self) -> Params<f64> {
        Params {
            b: self.b.to_f64().unwrap_or(f64::NAN),
            c: self.c.to_f64().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint<T> {
    pub x: T,
    pub y: T,
}

impl<T> PlanePoint<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }
}

/// Maps the full model to reduced parameters; returns the x scale `s = c/k`.
pub fn reduce<T: Scalar>(fp: &FullParams<T>) -> (Params<T>, T) {
    let b = fp.h.clone() - T::one();
    let scale = fp.c.clone() / fp.k.clone();
    (Params { b, c: fp.c.clone() }, scale)
}

/// Right-hand side of the full model.
pub fn eval_full_field<T: Scalar>(fp: &FullParams<T>, q: &PlanePoint<T>) -> (T, T) {
    let one = T::one();
    let (x, y) = (q.x.clone(), q.y.clone());
    let dx = x.clone() * (one.clone() - y.clone());
    let dy = (fp.h.clone() - one.clone()) * y.clone() * y.clone()
        + (one - fp.c.clone()) * y
        + fp.c.clone() / fp.k.clone() * x;
    (dx, dy)
}

pub fn eval_field<T: Scalar>(p: &Params<T>, q: &PlanePoint<T>) -> (T, T) {
    let one = T::one();
    let (x, y) = (q.x.clone(), q.y.clone());
    let dx = x.clone() * (one.clone() - y.clone());
    let dy = p.b.clone() * y.clone() * y.clone() + (one - p.c.clone()) * y + x;
    (dx, dy)
}

pub fn jacobian<T: Scalar>(p: &Params<T>, q: &PlanePoint<T>) -> [[T; 2]; 2] {
    let one = T::one();
    let two = one.clone() + one.clone();
    [
        [one.clone() - q.y.clone(), -q.x.clone()],
        [one.clone(), two * p.b.clone() * q.y.clone() + one - p.c.clone()],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;
    use proptest::prelude::*;

    #[test]
    fn reduce_examples() {
        let (p, s) = reduce(&FullParams::new(1.0, 1.0, 1.0).unwrap());
        assert_eq!((*p.b(), *p.c(), s), (0.0, 1.0, 1.0));

        // exact symbolic check of the scaling for (c,k,h) = (2,4,1/2)
        let fp = FullParams::new(rat(2, 1), rat(4, 1), rat(1, 2)).unwrap();
        let (p, s) = reduce(&fp);
        assert_eq!((p.b().clone(), p.c().clone(), s.clone()), (rat(-1, 2), rat(2, 1), rat(1, 2)));
        let q = PlanePoint::new(rat(3, 7), rat(-5, 3));
        let (fx, fy) = eval_full_field(&fp, &q);
        let (rx, ry) = eval_field(&p, &PlanePoint::new(s.clone() * q.x.clone(), q.y.clone()));
        assert_eq!(rx, s * fx);
        assert_eq!(ry, fy);

        let (p, s) = reduce(&FullParams::new(3.0, 1.0, 2.0).unwrap());
        assert_eq!((*p.b(), *p.c(), s), (1.0, 3.0, 3.0));
    }

    #[test]
    fn domain_is_enforced() {
        assert!(Params::new(-1.0, 1.0).is_err());
        assert!(Params::new(0.0, 0.0).is_err());
        assert!(Params::new(-0.999, 1e-9).is_ok());
        assert!(FullParams::new(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn field_examples() {
        let p = Params::new(1.0, 3.0).unwrap();
        assert_eq!(eval_field(&p, &PlanePoint::new(0.0, 0.0)), (0.0, 0.0));
        assert_eq!(eval_field(&p, &PlanePoint::new(1.0, 1.0)), (0.0, 0.0));
        let q1 = Params::new(0.0, 1.0).unwrap();
        assert_eq!(eval_field(&q1, &PlanePoint::new(2.0, 3.0)), (-4.0, 2.0));
    }

    #[test]
    fn jacobian_examples() {
        let p = Params::new(0.3, 0.7).unwrap();
        assert_eq!(jacobian(&p, &PlanePoint::new(0.0, 0.0)), [[1.0, 0.0], [1.0, 1.0 - 0.7]]);
        let p = Params::new(0.0, 5.0).unwrap();
        assert_eq!(jacobian(&p, &PlanePoint::new(4.0, 1.0)), [[0.0, -4.0], [1.0, -4.0]]);
        let p = Params::new(1.0, 3.0).unwrap();
        assert_eq!(jacobian(&p, &PlanePoint::new(0.0, 2.0)), [[-1.0, 0.0], [1.0, 2.0]]);
    }

    #[test]
    fn exact_conversion_roundtrip() {
        let p = Params::new(-0.25, 0.5).unwrap();
        let q = p.to_exact().unwrap();
        assert_eq!(q.b().clone(), rat(-1, 4));
        assert_eq!(q.to_f64(), p);
    }

    proptest! {
        #[test]
        fn line_x0_is_invariant(b in -0.99f64..5.0, c in 0.01f64..8.0, y in -50.0f64..50.0) {
            let p = Params::new(b, c).unwrap();
            prop_assert_eq!(eval_field(&p, &PlanePoint::new(0.0, y)).0, 0.0);
        }

        #[test]
        fn jacobian_matches_central_differences(
            b in -0.99f64..5.0, c in 0.01f64..8.0, x in -10.0f64..10.0, y in -10.0f64..10.0
        ) {
            let p = Params::new(b, c).unwrap();
            let j = jacobian(&p, &PlanePoint::new(x, y));
            let h = 1e-5;
            let f = |x: f64, y: f64| eval_field(&p, &PlanePoint::new(x, y));
            let (ax, ay) = f(x + h, y);
            let (bx, by) = f(x - h, y);
            let (cx, cy) = f(x, y + h);
            let (dx, dy) = f(x, y - h);
            let fd = [[(ax - bx) / (2.0 * h), (cx - dx) / (2.0 * h)],
                      [(ay - by) / (2.0 * h), (cy - dy) / (2.0 * h)]];
            for i in 0..2 {
                for k in 0..2 {
                    let scale = j[i][k].abs().max(1.0);
                    prop_assert!((fd[i][k] - j[i][k]).abs() <= 1e-6 * scale);
                }
            }
        }

        #[test]
        fn reduction_reproduces_full_model(
            c in 0.1f64..5.0, k in 0.1f64..5.0, h in 0.05f64..4.0, x in -3.0f64..3.0, y in -3.0f64..3.0
        ) {
            let fp = FullParams::new(c, k, h).unwrap();
            let (p, s) = reduce(&fp);
            prop_assert!(*p.b() > -1.0);
            let (fx, fy) = eval_full_field(&fp, &PlanePoint::new(x, y));
            let (rx, ry) = eval_field(&p, &PlanePoint::new(s * x, y));
            prop_assert!((s * fx - rx).abs() < 1e-12 * (1.0 + rx.abs()));
            prop_assert!((fy - ry).abs() < 1e-12 * (1.0 + ry.abs()));
        }
    }
}
