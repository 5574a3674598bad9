//! Qualitative analysis of the planar quadratic system
//!
//! ```text
//! x' = x (1 - y)
//! y' = b y^2 + (1 - c) y + x          b > -1, c > 0
//! ```
//!
//! The crate covers exact Darboux verification, local analysis of finite and
//! infinite singular points, compactified numerical flow on the Poincare
//! disc, separatrix skeletons with (S, R) counts, and the parameter-plane
//! bifurcation arrangement.

use std::fmt::Debug;
use std::ops::Neg;

use num_traits::{Float, FromPrimitive, Num, NumCast};

pub mod bifurcation;
pub mod compactify;
pub mod darboux;
pub mod exactpoly;
pub mod flow;
pub mod linalg;
pub mod localanalysis;
pub mod model;

/// Anything the model formulas can be evaluated in: exact rationals or floats.
pub trait Scalar: Num + Clone + PartialOrd + Neg<Output = Self> + Debug + Send + Sync {}

impl<T> Scalar for T where T: Num + Clone + PartialOrd + Neg<Output = T> + Debug + Send + Sync {}

/// Floating point scalar: f32 or f64.
pub trait Real: Float + FromPrimitive + NumCast + Debug + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

pub type Rat = num::BigRational;
pub type Poly = exactpoly::BiPoly<Rat>;
pub type Params64 = model::Params<f64>;
pub type ParamsQ = model::Params<Rat>;
pub type Point64 = model::PlanePoint<f64>;

pub use exactpoly::BiPoly;
pub use model::{FullParams, Params, PlanePoint};

/// Exact rational from a numerator/denominator pair.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(n.into(), d.into())
}
