//! Finite singular points P0, P1, P2, their eigenvalues and types, and the
//! bifurcation values g0..g4, D1.

use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{jacobian, Params, PlanePoint};
use crate::{Rat, Scalar};

/// Default zero tolerance for stratum tests on float parameters.
pub const STRATUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationValues<T> {
    pub g0: T,
    pub g1: T,
    pub g2: T,
    pub g3: T,
    pub g4: T,
    pub d1: T,
}

impl<T: Scalar> BifurcationValues<T> {
    pub fn new(p: &Params<T>) -> Self {
        let (b, c) = (p.b().clone(), p.c().clone());
        let one = T::one();
        let two = one.clone() + one.clone();
        let four = two.clone() + two.clone();
        let five = four.clone() + one.clone();
        let six = five.clone() + one.clone();
        let eight = four.clone() + four.clone();
        let d1 = c.clone() * c.clone() - four.clone() * c.clone() * b.clone() + four * b.clone() * b.clone()
            - six * c.clone()
            + eight * b.clone()
            + five;
        Self {
            g0: b.clone(),
            g1: c.clone() - one.clone(),
            g2: b.clone() - c.clone() + one.clone(),
            g3: two * b.clone() - c + one.clone(),
            g4: b + one,
            d1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Neg,
    Zero,
    Pos,
}

impl Sign {
    pub fn of(v: f64, tol: f64) -> Sign {
        if v.abs() <= tol {
            Sign::Zero
        } else if v > 0.0 {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }

    pub fn of_exact(v: &Rat) -> Sign {
        use num_traits::Signed;
        if v.is_positive() {
            Sign::Pos
        } else if v.is_negative() {
            Sign::Neg
        } else {
            Sign::Zero
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Neg => "-",
            Sign::Zero => "=0",
            Sign::Pos => "+",
        }
    }
}

/// Signs of (g0, g1, g2, g3, D1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignVector(pub [Sign; 5]);

impl SignVector {
    pub const NAMES: [&'static str; 5] = ["g0", "g1", "g2", "g3", "D1"];

    pub fn of(p: &Params<f64>, tol: f64) -> Self {
        let v = BifurcationValues::new(p);
        SignVector([v.g0, v.g1, v.g2, v.g3, v.d1].map(|x| Sign::of(x, tol)))
    }

    pub fn of_exact(p: &Params<Rat>) -> Self {
        let v = BifurcationValues::new(p);
        SignVector([&v.g0, &v.g1, &v.g2, &v.g3, &v.d1].map(Sign::of_exact))
    }

    pub fn zeros(&self) -> usize {
        self.0.iter().filter(|s| **s == Sign::Zero).count()
    }

    pub fn label(&self) -> String {
        let parts: Vec<String> =
            self.0.iter().zip(Self::NAMES).map(|(s, n)| format!("{n}{}", s.symbol())).collect();
        parts.join(",")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PointId {
    P0,
    P1,
    P2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointKind {
    UnstableNode,
    StableNode,
    Saddle,
    UnstableFocus,
    StableFocus,
    Center,
    SaddleNode,
    /// the whole line x = 0 is singular (b = 0, c = 1)
    NonIsolated,
}

impl PointKind {
    pub fn name(self) -> &'static str {
        match self {
            PointKind::UnstableNode => "unstable node",
            PointKind::StableNode => "stable node",
            PointKind::Saddle => "saddle",
            PointKind::UnstableFocus => "unstable focus",
            PointKind::StableFocus => "stable focus",
            PointKind::Center => "center",
            PointKind::SaddleNode => "semi-hyperbolic saddle-node",
            PointKind::NonIsolated => "non-isolated (line of singular points)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirRole {
    Stable,
    Unstable,
    /// zero eigenvalue of a semi-hyperbolic point
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenDirection {
    pub vector: [f64; 2],
    pub eigenvalue: f64,
    pub role: DirRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularPointInfo {
    /// more than one id when points coincide
    pub ids: Vec<PointId>,
    pub location: PlanePoint<f64>,
    pub eigenvalues: [Complex64; 2],
    pub kind: PointKind,
    /// eigen-directions of saddles and saddle-nodes
    pub separatrix_directions: Vec<EigenDirection>,
    pub degenerate: bool,
}

impl SingularPointInfo {
    pub fn name(&self) -> String {
        let v: Vec<String> = self.ids.iter().map(|i| format!("{i:?}")).collect();
        v.join("=")
    }

    pub fn primary(&self) -> PointId {
        self.ids[0]
    }
}

/// Locations only; coincident points merged, P1 absent when b = 0.
pub fn finite_singular_points(p: &Params<f64>) -> Vec<(Vec<PointId>, PlanePoint<f64>)> {
    let (b, c) = (p.b64(), p.c64());
    let v = BifurcationValues::new(p);
    let zero = |x: f64| x.abs() <= STRATUM_TOL;
    let mut out = Vec::new();
    let p2 = PlanePoint::new(c - b - 1.0, 1.0);
    if zero(v.g0) {
        out.push((vec![PointId::P0], PlanePoint::new(0.0, 0.0)));
        out.push((vec![PointId::P2], p2));
        return out;
    }
    let p1 = PlanePoint::new(0.0, (c - 1.0) / b);
    if zero(v.g1) {
        out.push((vec![PointId::P0, PointId::P1], PlanePoint::new(0.0, 0.0)));
        out.push((vec![PointId::P2], p2));
    } else if zero(v.g2) {
        out.push((vec![PointId::P0], PlanePoint::new(0.0, 0.0)));
        out.push((vec![PointId::P1, PointId::P2], PlanePoint::new(0.0, 1.0)));
    } else {
        out.push((vec![PointId::P0], PlanePoint::new(0.0, 0.0)));
        out.push((vec![PointId::P1], p1));
        out.push((vec![PointId::P2], p2));
    }
    out
}

/// `(g3 +- sqrt(D1)) / 2`, the `+` root first.
pub fn p2_eigenvalues(p: &Params<f64>) -> [Complex64; 2] {
    let v = BifurcationValues::new(p);
    let s = Complex64::new(v.d1, 0.0).sqrt();
    let g3 = Complex64::new(v.g3, 0.0);
    [(g3 + s) / 2.0, (g3 - s) / 2.0]
}

/// Eigenvalues of a real 2x2 matrix, larger real part first.
pub fn eigenvalues2(m: &[[f64; 2]; 2]) -> [Complex64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        // x^2 + B x + C with B = -tr, C = det; stable form of the roots
        let bq = -tr;
        let sg = if bq >= 0.0 { 1.0 } else { -1.0 };
        let q = -0.5 * (bq + sg * disc.sqrt());
        let (l1, l2) = if q == 0.0 { (0.0, 0.0) } else { (q, det / q) };
        let (a, b) = if l1 >= l2 { (l1, l2) } else { (l2, l1) };
        [Complex64::new(a, 0.0), Complex64::new(b, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex64::new(tr / 2.0, s / 2.0), Complex64::new(tr / 2.0, -s / 2.0)]
    }
}

/// Unit eigenvector for a real eigenvalue.
pub fn eigenvector2(m: &[[f64; 2]; 2], lambda: f64) -> [f64; 2] {
    let a = [m[0][1], lambda - m[0][0]];
    let b = [lambda - m[1][1], m[1][0]];
    let na = a[0].hypot(a[1]);
    let nb = b[0].hypot(b[1]);
    let v = if na >= nb { a } else { b };
    let n = v[0].hypot(v[1]);
    if n == 0.0 {
        // scalar matrix: any direction works
        [1.0, 0.0]
    } else {
        [v[0] / n, v[1] / n]
    }
}

/// Eigen-directions of a hyperbolic saddle or a semi-hyperbolic point.
pub fn directions(m: &[[f64; 2]; 2], zero_tol: f64) -> Vec<EigenDirection> {
    let ev = eigenvalues2(m);
    if ev[0].im != 0.0 {
        return vec![];
    }
    ev.iter()
        .map(|l| {
            let role = if l.re.abs() <= zero_tol {
                DirRole::Center
            } else if l.re > 0.0 {
                DirRole::Unstable
            } else {
                DirRole::Stable
            };
            let lam = if role == DirRole::Center { 0.0 } else { l.re };
            EigenDirection { vector: eigenvector2(m, lam), eigenvalue: lam, role }
        })
        .collect()
}

fn kind_from_eigen(ev: &[Complex64; 2], tol: f64) -> PointKind {
    let (a, b) = (ev[0], ev[1]);
    if a.im != 0.0 {
        return if a.re.abs() <= tol {
            PointKind::Center
        } else if a.re > 0.0 {
            PointKind::UnstableFocus
        } else {
            PointKind::StableFocus
        };
    }
    let z = |x: f64| x.abs() <= tol;
    if z(a.re) || z(b.re) {
        return PointKind::SaddleNode;
    }
    match (a.re > 0.0, b.re > 0.0) {
        (true, true) => PointKind::UnstableNode,
        (false, false) => PointKind::StableNode,
        _ => PointKind::Saddle,
    }
}

/// Full classification following the case analysis in terms of the signs of
/// b, g1, g2, g3 and D1. Eigenvalues come from the closed forms.
pub fn classify_finite(p: &Params<f64>) -> Vec<SingularPointInfo> {
    let (b, c) = (p.b64(), p.c64());
    let v = BifurcationValues::new(p);
    let s = |x: f64| Sign::of(x, STRATUM_TOL);
    let real = |x: f64| Complex64::new(x, 0.0);
    let sort = |mut e: [Complex64; 2]| {
        if e[0].re < e[1].re {
            e.swap(0, 1);
        }
        e
    };
    let q1 = s(v.g0) == Sign::Zero && s(v.g1) == Sign::Zero;

    finite_singular_points(p)
        .into_iter()
        .map(|(ids, loc)| {
            let jac = jacobian(p, &loc);
            let (eigenvalues, kind) = if q1 {
                let e = sort(eigenvalues2(&jac));
                (e, PointKind::NonIsolated)
            } else if ids.len() == 2 {
                let e = if ids[0] == PointId::P0 { [real(1.0), real(0.0)] } else { sort([real(b), real(0.0)]) };
                (e, PointKind::SaddleNode)
            } else {
                match ids[0] {
                    PointId::P0 => {
                        let e = sort([real(1.0), real(1.0 - c)]);
                        let k = if s(v.g1) == Sign::Neg { PointKind::UnstableNode } else { PointKind::Saddle };
                        (e, k)
                    }
                    PointId::P1 => {
                        let l1 = c - 1.0;
                        let l2 = v.g2 / b;
                        let k = match (l1 > 0.0, l2 > 0.0) {
                            (true, true) => PointKind::UnstableNode,
                            (false, false) => PointKind::StableNode,
                            _ => PointKind::Saddle,
                        };
                        (sort([real(l1), real(l2)]), k)
                    }
                    PointId::P2 => {
                        let e = p2_eigenvalues(p);
                        let k = if s(v.d1) != Sign::Neg {
                            match s(v.g2) {
                                Sign::Pos => PointKind::Saddle,
                                Sign::Zero => PointKind::SaddleNode,
                                Sign::Neg => {
                                    if v.g3 > 0.0 {
                                        PointKind::UnstableNode
                                    } else {
                                        PointKind::StableNode
                                    }
                                }
                            }
                        } else {
                            match s(v.g3) {
                                Sign::Pos => PointKind::UnstableFocus,
                                Sign::Neg => PointKind::StableFocus,
                                Sign::Zero => PointKind::Center,
                            }
                        };
                        (e, k)
                    }
                }
            };
            let separatrix_directions = match kind {
                PointKind::Saddle | PointKind::SaddleNode => directions(&jac, 1e-9),
                _ => vec![],
            };
            let degenerate = ids.len() > 1 || q1 || s(v.d1) == Sign::Zero || kind == PointKind::Center;
            SingularPointInfo { ids, location: loc, eigenvalues, kind, separatrix_directions, degenerate }
        })
        .collect()
}

/// Classification derived purely from numeric Jacobian eigenvalues; used as
/// an independent cross-check of `classify_finite`.
pub fn classify_numeric(p: &Params<f64>) -> Vec<(Vec<PointId>, PointKind)> {
    finite_singular_points(p)
        .into_iter()
        .map(|(ids, loc)| {
            let ev = eigenvalues2(&jacobian(p, &loc));
            (ids, kind_from_eigen(&ev, 1e-9))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p(b: f64, c: f64) -> Params<f64> {
        Params::new(b, c).unwrap()
    }

    fn kinds(p: &Params<f64>) -> Vec<(Vec<PointId>, PointKind)> {
        classify_finite(p).into_iter().map(|i| (i.ids, i.kind)).collect()
    }

    #[test]
    fn locations() {
        let pts = finite_singular_points(&p(1.0, 3.0));
        assert_eq!(pts[1].1, PlanePoint::new(0.0, 2.0));
        assert_eq!(pts[2].1, PlanePoint::new(1.0, 1.0));
        let pts = finite_singular_points(&p(0.0, 2.0));
        assert_eq!(pts.len(), 2);
        assert!(pts.iter().all(|(ids, _)| !ids.contains(&PointId::P1)));
        let pts = finite_singular_points(&p(1.0, 1.0));
        assert_eq!(pts[0].0, vec![PointId::P0, PointId::P1]);
    }

    #[test]
    fn p2_eigen_examples() {
        let e = p2_eigenvalues(&p(0.0, 5.0));
        assert_abs_diff_eq!(e[0].re, -2.0);
        assert_abs_diff_eq!(e[1].re, -2.0);
        let e = p2_eigenvalues(&p(1.0, 3.0));
        assert_abs_diff_eq!(e[0].re, 0.0);
        assert_abs_diff_eq!(e[0].im.abs(), 1.0);
        let e = p2_eigenvalues(&p(1.0, 2.0));
        assert_abs_diff_eq!(e[0].re, 1.0);
        assert_abs_diff_eq!(e[1].re, 0.0);
    }

    #[test]
    fn classification_examples() {
        assert_eq!(
            kinds(&p(1.0, 3.0)),
            vec![
                (vec![PointId::P0], PointKind::Saddle),
                (vec![PointId::P1], PointKind::Saddle),
                (vec![PointId::P2], PointKind::Center)
            ]
        );
        let k = kinds(&p(-0.5, 0.25));
        assert_eq!(k[0].1, PointKind::UnstableNode);
        assert_eq!(k[1].1, PointKind::StableNode);
        let info = classify_finite(&p(-0.5, 0.25));
        assert_eq!(info[1].location, PlanePoint::new(0.0, 1.5));
        let k = kinds(&p(0.0, 5.0));
        assert_eq!(k[1], (vec![PointId::P2], PointKind::StableNode));
        assert_eq!(classify_finite(&p(0.0, 5.0))[1].location, PlanePoint::new(4.0, 1.0));
    }

    #[test]
    fn collisions_are_saddle_nodes() {
        let k = kinds(&p(1.0, 1.0));
        assert_eq!(k[0], (vec![PointId::P0, PointId::P1], PointKind::SaddleNode));
        let k = kinds(&p(0.5, 1.5));
        assert_eq!(k[1], (vec![PointId::P1, PointId::P2], PointKind::SaddleNode));
        let info = classify_finite(&p(0.5, 1.5));
        let dirs = &info[1].separatrix_directions;
        assert_eq!(dirs.len(), 2);
        assert!(dirs.iter().any(|d| d.role == DirRole::Center));
        let k = kinds(&p(0.0, 1.0));
        assert!(k.iter().any(|(_, k)| *k == PointKind::NonIsolated));
    }

    #[test]
    fn p1_sign_table() {
        // (sign b, sign g1, sign g2) -> kind, sampled off the other strata
        let cases = [
            (1.0, 3.0, PointKind::Saddle),      // b+ g1+ g2-
            (3.0, 2.0, PointKind::UnstableNode), // b+ g1+ g2+
            (1.0, 0.5, PointKind::Saddle),      // b+ g1- g2+
            (-0.3, 3.0, PointKind::UnstableNode), // b- g1+ g2-
            (-0.2, 0.5, PointKind::StableNode), // b- g1- g2+
            (-0.6, 0.5, PointKind::Saddle),     // b- g1- g2-
        ];
        for (b, c, want) in cases {
            let info = classify_finite(&p(b, c));
            let p1 = info.iter().find(|i| i.ids == vec![PointId::P1]).unwrap();
            assert_eq!(p1.kind, want, "b={b} c={c}");
        }
    }

    #[test]
    fn eigen_helpers() {
        let m = [[2.0, 0.0], [0.0, -3.0]];
        let e = eigenvalues2(&m);
        assert_eq!((e[0].re, e[1].re), (2.0, -3.0));
        assert_eq!(eigenvector2(&m, -3.0).map(f64::abs), [0.0, 1.0]);
        let e = eigenvalues2(&[[0.0, -1.0], [1.0, 0.0]]);
        assert_abs_diff_eq!(e[0].im.abs(), 1.0);
    }

    #[test]
    fn sign_vectors() {
        let sv = SignVector::of(&p(1.0, 10.0), STRATUM_TOL);
        assert_eq!(sv.0, [Sign::Pos, Sign::Pos, Sign::Neg, Sign::Neg, Sign::Pos]);
        let exact = crate::ParamsQ::new(crate::rat(1, 1), crate::rat(3, 1)).unwrap();
        assert_eq!(SignVector::of_exact(&exact).0[3], Sign::Zero);
        assert_eq!(sv.label(), "g0+,g1+,g2-,g3-,D1+");
    }

    fn off_strata(b: f64, c: f64, margin: f64) -> bool {
        let v = BifurcationValues::new(&p(b, c));
        [v.g0, v.g1, v.g2, v.g3, v.d1].iter().all(|x| x.abs() > margin)
    }

    proptest! {
        #[test]
        fn closed_forms_match_numeric_eigenvalues(b in -0.99f64..4.0, c in 0.01f64..8.0) {
            prop_assume!(off_strata(b, c, 1e-3));
            let pp = p(b, c);
            for info in classify_finite(&pp) {
                let num = eigenvalues2(&jacobian(&pp, &info.location));
                let mut a = info.eigenvalues.to_vec();
                let mut n = num.to_vec();
                let key = |z: &Complex64| (z.re, z.im);
                a.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
                n.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
                for (x, y) in a.iter().zip(&n) {
                    prop_assert!((x - y).norm() < 1e-10, "{:?} vs {:?}", a, n);
                }
            }
        }

        #[test]
        fn product_identity(b in -0.99f64..4.0, c in 0.01f64..8.0) {
            let pp = p(b, c);
            let e = p2_eigenvalues(&pp);
            let v = BifurcationValues::new(&pp);
            prop_assert!(((e[0] * e[1]).re + v.g2).abs() < 1e-12 * (1.0 + v.g2.abs()));
            prop_assert!((e[0] * e[1]).im.abs() < 1e-12 * (1.0 + v.g2.abs()));
        }

        #[test]
        fn classification_is_locally_constant(b in -0.99f64..4.0, c in 0.01f64..8.0, db in -1e-9f64..1e-9, dc in -1e-9f64..1e-9) {
            prop_assume!(off_strata(b, c, 1e-6));
            prop_assert_eq!(kinds(&p(b, c)), kinds(&p(b + db, c + dc)));
        }

        #[test]
        fn table_agrees_with_numeric_types(b in -0.99f64..4.0, c in 0.01f64..8.0) {
            prop_assume!(off_strata(b, c, 1e-3));
            prop_assert_eq!(kinds(&p(b, c)), classify_numeric(&p(b, c)));
        }

        #[test]
        fn collision_is_continuous(b in 0.05f64..3.0, eps in 1e-9f64..1e-3) {
            // approach g2 = 0 from c = b + 1 + eps
            let pts = finite_singular_points(&p(b, b + 1.0 + eps));
            let p1 = pts[1].1;
            let p2 = pts[2].1;
            prop_assert!(((p1.x - p2.x).powi(2) + (p1.y - p2.y).powi(2)).sqrt() < 10.0 * eps / b.min(1.0));
        }
    }
}
