//! Fraction-exact Gaussian elimination.

use num_integer::Integer;
use num_traits::{One, Zero};

use super::Exponent;

/// Reduces `rows` in place to reduced row echelon form and returns the pivot
/// column of each nonzero row, in order.
pub fn rref(rows: &mut [Vec<Exponent>]) -> Vec<usize> {
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..n_cols {
        if r == n_rows {
            break;
        }
        let Some(p) = (r..n_rows).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].recip();
        for v in rows[r].iter_mut() {
            *v *= inv;
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c];
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(rows: &[Vec<Exponent>]) -> usize {
    let mut work = rows.to_vec();
    rref(&mut work).len()
}

/// Rational nullspace basis of `rows` (each row has the same length). One
/// vector per free column, with that column set to 1.
pub(crate) fn nullspace(rows: &[Vec<Exponent>], n_cols: usize) -> Vec<Vec<Exponent>> {
    let mut work = rows.to_vec();
    let pivots = rref(&mut work);
    (0..n_cols)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![Exponent::zero(); n_cols];
            v[free] = Exponent::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -work[row][free];
            }
            v
        })
        .collect()
}

/// Scales a rational vector to coprime integers with the first nonzero entry
/// positive. The zero vector is returned unchanged.
pub(crate) fn canonicalize(v: &[Exponent]) -> Vec<Exponent> {
    let lcm = v.iter().filter(|e| !e.is_zero()).fold(1i64, |acc, e| acc.lcm(e.denom()));
    let ints: Vec<i64> = v.iter().map(|e| (*e * Exponent::from_integer(lcm)).to_integer()).collect();
    let g = ints.iter().fold(0i64, |acc, &x| acc.gcd(&x));
    if g == 0 {
        return v.to_vec();
    }
    let sign = ints.iter().find(|&&x| x != 0).map_or(1, |&x| if x < 0 { -1 } else { 1 });
    ints.iter().map(|&x| Exponent::from_integer(sign * x / g)).collect()
}

/// Solves `a · x = b` exactly where `a` has full column rank. Returns `None`
/// when the system is inconsistent or `a` is rank deficient.
pub(crate) fn solve_full_column_rank(a: &[Vec<Exponent>], b: &[Exponent]) -> Option<Vec<Exponent>> {
    let n = a.first().map_or(0, Vec::len);
    let mut aug: Vec<Vec<Exponent>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.len() != n || pivots.iter().enumerate().any(|(i, &c)| i != c) {
        // either rank deficient or the augmented column became a pivot
        return None;
    }
    if aug[n..].iter().any(|row| !row[n].is_zero()) {
        return None;
    }
    Some((0..n).map(|i| aug[i][n]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> Exponent {
        Exponent::from_integer(n)
    }

    #[test]
    fn rank_of_small_matrices() {
        assert_eq!(rank(&[vec![r(1), r(2)], vec![r(2), r(4)]]), 1);
        assert_eq!(rank(&[vec![r(0), r(0)], vec![r(0), r(0)]]), 0);
        assert_eq!(rank(&[vec![r(1), r(0)], vec![r(0), r(1)]]), 2);
        assert_eq!(rank(&[]), 0);
    }

    #[test]
    fn nullspace_vectors_annihilate() {
        let m = vec![
            vec![r(0), r(0), r(1), r(1)],
            vec![r(1), r(1), r(1), r(0)],
            vec![r(0), r(-1), r(-2), r(0)],
        ];
        let ns = nullspace(&m, 4);
        assert_eq!(ns.len(), 4 - rank(&m));
        for v in &ns {
            for row in &m {
                let dot: Exponent = row.iter().zip(v).map(|(a, b)| a * b).sum();
                assert!(dot.is_zero());
            }
        }
    }

    #[test]
    fn canonical_form() {
        let v = vec![Exponent::new(-1, 2), r(0), Exponent::new(3, 4)];
        assert_eq!(canonicalize(&v), vec![r(2), r(0), r(-3)]);
        assert_eq!(canonicalize(&[r(0), r(0)]), vec![r(0), r(0)]);
        assert_eq!(canonicalize(&[r(0), r(-4), r(6)]), vec![r(0), r(2), r(-3)]);
    }

    #[test]
    fn solve_detects_inconsistency() {
        // x = 1, x = 2
        assert!(solve_full_column_rank(&[vec![r(1)], vec![r(1)]], &[r(1), r(2)]).is_none());
        let x = solve_full_column_rank(&[vec![r(2), r(0)], vec![r(0), r(3)], vec![r(0), r(0)]], &[r(1), r(1), r(0)]).unwrap();
        assert_eq!(x, vec![Exponent::new(1, 2), Exponent::new(1, 3)]);
    }
}
