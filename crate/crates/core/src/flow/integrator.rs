//! Dormand-Prince 5(4) with an embedded error estimate, generic over the scalar.

use crate::Real;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn k<T: Real>(v: f64) -> T {
    T::from_f64(v).unwrap()
}

fn axpy<T: Real, const N: usize>(y: &[T; N], h: T, terms: &[(f64, &[T; N])]) -> [T; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = T::zero();
        for (c, kv) in terms {
            s = s + k::<T>(*c) * kv[i];
        }
        *o = *o + h * s;
    }
    out
}

/// One step of size `h` from `y` with derivative `f0 = f(y)` already known.
/// Returns the fifth-order solution, its derivative (for FSAL reuse) and the
/// error estimate vector.
pub fn dopri_step<T, F, const N: usize>(f: &F, y: &[T; N], f0: &[T; N], h: T) -> ([T; N], [T; N], [T; N])
where
    T: Real,
    F: Fn(&[T; N]) -> [T; N],
{
    let k1 = *f0;
    let k2 = f(&axpy(y, h, &[(A21, &k1)]));
    let k3 = f(&axpy(y, h, &[(A31, &k1), (A32, &k2)]));
    let k4 = f(&axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(&axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(&axpy(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y5 = axpy(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(&y5);
    let zero = [T::zero(); N];
    let err = axpy(&zero, h, &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)]);
    (y5, k7, err)
}

/// Scaled error norm: max over components of `|e| / (tol (1 + |y|))`.
pub fn error_norm<T: Real, const N: usize>(err: &[T; N], y0: &[T; N], y1: &[T; N], tol: T) -> T {
    let mut m = T::zero();
    for i in 0..N {
        let sc = tol * (T::one() + y0[i].abs().max(y1[i].abs()));
        m = m.max(err[i].abs() / sc);
    }
    m
}

/// Step-size factor from an error norm (order-5 controller with safety 0.9).
pub fn step_factor<T: Real>(en: T) -> T {
    if en == T::zero() {
        return k(5.0);
    }
    let f = k::<T>(0.9) * en.powf(k(-0.2));
    f.max(k(0.2)).min(k(5.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveEnd {
    Reached,
    Underflow,
    StepCap,
}

/// Plain adaptive integration of an autonomous system over `[0, t_end]`
/// (negative `t_end` integrates backward). Returns accepted (t, y) samples.
pub fn solve<T, F, const N: usize>(f: F, y0: [T; N], t_end: T, tol: T, max_steps: usize) -> (Vec<(T, [T; N])>, SolveEnd)
where
    T: Real,
    F: Fn(&[T; N]) -> [T; N],
{
    let dir = if t_end < T::zero() { -T::one() } else { T::one() };
    let total = t_end.abs();
    let mut t = T::zero();
    let mut y = y0;
    let mut fy = f(&y);
    let mut h = (total * k(1e-3)).max(k(1e-6)).min(total);
    let mut out = vec![(t, y)];
    let floor: T = k(1e-14);
    for _ in 0..max_steps {
        if t >= total {
            return (out, SolveEnd::Reached);
        }
        if h < floor {
            return (out, SolveEnd::Underflow);
        }
        let hh = h.min(total - t);
        let (y1, f1, err) = dopri_step(&f, &y, &fy, dir * hh);
        let en = error_norm(&err, &y, &y1, tol);
        if en <= T::one() {
            t = t + hh;
            y = y1;
            fy = f1;
            out.push((dir * t, y));
        }
        h = hh * step_factor(en);
    }
    (out, SolveEnd::StepCap)
}
