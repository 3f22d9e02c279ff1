//! Exact sparse Gauss-Jordan elimination over the rationals.

use std::collections::BTreeMap;

use crate::meadow::Rational;

pub(crate) type Row = BTreeMap<usize, Rational>;

/// Solves `A·X = B` for nonsingular square `A` given as sparse rows; `B` has
/// one sparse row per equation with arbitrary column indices. Returns the rows
/// of `X`.
pub(crate) fn solve(mut a: Vec<Row>, mut b: Vec<Row>) -> Vec<Row> {
    let n = a.len();
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| a[r].contains_key(&col))
            .min_by_key(|&r| a[r].len())
            .expect("system is nonsingular");
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][&col].minv();
        scale(&mut a[col], &inv);
        scale(&mut b[col], &inv);
        let (pa, pb) = (a[col].clone(), b[col].clone());
        for r in 0..n {
            if r == col {
                continue;
            }
            let Some(f) = a[r].get(&col).cloned() else { continue };
            axpy(&mut a[r], &f, &pa);
            axpy(&mut b[r], &f, &pb);
        }
    }
    b
}

fn scale(row: &mut Row, by: &Rational) {
    for v in row.values_mut() {
        *v = &*v * by;
    }
}

/// `row -= f · other`, dropping cancelled entries.
fn axpy(row: &mut Row, f: &Rational, other: &Row) {
    for (&c, v) in other {
        let entry = row.entry(c).or_insert_with(Rational::zero);
        *entry = &*entry - &(f * v);
        if entry.is_zero() {
            row.remove(&c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(entries: &[(usize, Rational)]) -> Row {
        entries.iter().cloned().collect()
    }

    #[test]
    fn two_by_two() {
        // x + y = 3, x - y = 1
        let a = vec![
            row(&[(0, 1.into()), (1, 1.into())]),
            row(&[(0, 1.into()), (1, Rational::from(-1))]),
        ];
        let b = vec![row(&[(0, 3.into())]), row(&[(0, 1.into())])];
        let x = solve(a, b);
        assert_eq!(x[0][&0], Rational::from(2));
        assert_eq!(x[1][&0], Rational::from(1));
    }

    #[test]
    fn needs_pivoting_and_multiple_columns() {
        // y = 1/2, x = 1/3 (columns 5 and 9 on the right)
        let a = vec![row(&[(1, 1.into())]), row(&[(0, 1.into())])];
        let b = vec![row(&[(5, Rational::new(1, 2))]), row(&[(9, Rational::new(1, 3))])];
        let x = solve(a, b);
        assert_eq!(x[0], row(&[(9, Rational::new(1, 3))]));
        assert_eq!(x[1], row(&[(5, Rational::new(1, 2))]));
    }
}
