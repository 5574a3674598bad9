//! Gauss-Jordan elimination over an exact field (rationals in practice).


use crate::Scalar;

/// Reduces `m` in place to reduced row echelon form; returns pivot columns.
pub fn rref<C: Scalar>(m: &mut [Vec<C>]) -> Vec<usize> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..cols {
        if r == rows {
            break;
        }
        let Some(sel) = (r..rows).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(r, sel);
        let inv = C::one() / m[r][col].clone();
        for v in m[r].iter_mut() {
            *v = v.clone() * inv.clone();
        }
        for i in 0..rows {
            if i != r && !m[i][col].is_zero() {
                let f = m[i][col].clone();
                for j in 0..cols {
                    let t = m[r][j].clone() * f.clone();
                    m[i][j] = m[i][j].clone() - t;
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    pivots
}

/// A particular solution of `a x = rhs` (free variables set to zero), if consistent.
pub fn solve<C: Scalar>(a: &[Vec<C>], rhs: &[C]) -> Option<Vec<C>> {
    let n = a.first().map_or(0, |r| r.len());
    let mut aug: Vec<Vec<C>> = a
        .iter()
        .zip(rhs)
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(b.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.last() == Some(&n) {
        return None;
    }
    let mut x = vec![C::zero(); n];
    for (i, &pc) in pivots.iter().enumerate() {
        x[pc] = aug[i][n].clone();
    }
    Some(x)
}

/// Basis of the null space, one vector per free column, in column order.
pub fn kernel<C: Scalar>(a: &[Vec<C>], n: usize) -> Vec<Vec<C>> {
    let mut m: Vec<Vec<C>> = a.to_vec();
    let pivots = rref(&mut m);
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut v = vec![C::zero(); n];
            v[fc] = C::one();
            for (i, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[i][fc].clone();
            }
            v
        })
        .collect()
}

pub fn is_zero_vec<C: Scalar>(v: &[C]) -> bool {
    v.iter().all(|c| c.is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{rat, Rat};
    use num_traits::Zero;

    fn r(n: i64) -> Rat {
        rat(n, 1)
    }

    #[test]
    fn solves_square_system() {
        let a = vec![vec![r(2), r(1)], vec![r(1), r(3)]];
        let x = solve(&a, &[r(3), r(5)]).unwrap();
        assert_eq!(x, vec![rat(4, 5), rat(7, 5)]);
    }

    #[test]
    fn detects_inconsistency() {
        let a = vec![vec![r(1), r(1)], vec![r(2), r(2)]];
        assert!(solve(&a, &[r(1), r(3)]).is_none());
    }

    #[test]
    fn kernel_of_rank_one() {
        let a = vec![vec![r(1), r(2), r(3)]];
        let k = kernel(&a, 3);
        assert_eq!(k.len(), 2);
        for v in &k {
            let s = v[0].clone() + r(2) * v[1].clone() + r(3) * v[2].clone();
            assert!(s.is_zero());
        }
    }
}
