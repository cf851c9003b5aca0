//! Small dense solves used by the plant and filter design.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Solves `a · x = b` by Gaussian elimination with partial pivoting.
///
/// `a` is row-major `n × n`. A pivot smaller than `1e-12 · max|a|` is treated as singular.
pub fn solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::Structural(format!("expected a {n}x{n} system")));
    }
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(T::zero(), |m, v| m.max(v.abs()));
    let tol = scale * lit(1e-12);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if !(a[pivot][col].abs() > tol) {
            return Err(Error::Singular(format!("zero pivot in column {col}")));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] = a[row][k] - f * v;
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc = acc - a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Inverts an `n × n` matrix column by column.
pub fn invert<T: Scalar>(a: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        cols.push(solve(a.to_vec(), e)?);
    }
    Ok((0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect())
}

pub fn mat_vec<T: Scalar>(a: &[Vec<T>], x: &[T]) -> Vec<T> {
    a.iter()
        .map(|row| row.iter().zip(x).fold(T::zero(), |acc, (&m, &v)| acc + m * v))
        .collect()
}

pub fn mat_mul<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>> {
    let n = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..n)
                .map(|j| row.iter().zip(b).fold(T::zero(), |acc, (&m, r)| acc + m * r[j]))
                .collect()
        })
        .collect()
}
