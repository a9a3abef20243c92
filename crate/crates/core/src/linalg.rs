//! Linear solvers over any [`Scalar`] field.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: {rows}x{cols} matrix with right-hand side of length {rhs}")]
    Dimension { rows: usize, cols: usize, rhs: usize },
}

/// Solves `a * x = b` for square `a` (row-major).
///
/// Exact scalars take the first nonzero pivot in each column; inexact ones use
/// partial pivoting on magnitude.
pub fn solve<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Result<Vec<S>, SolveError> {
    let n = a.len();
    if b.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(SolveError::Dimension {
            rows: n,
            cols: a.first().map_or(0, Vec::len),
            rhs: b.len(),
        });
    }
    for col in 0..n {
        let pivot = if S::is_exact() {
            (col..n).find(|&r| !a[r][col].is_zero())
        } else {
            (col..n).filter(|&r| !a[r][col].is_zero()).max_by(|&r, &s| {
                a[r][col]
                    .abs_value()
                    .partial_cmp(&a[s][col].abs_value())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        }
        .ok_or(SolveError::Singular)?;
        a.swap(col, pivot);
        b.swap(col, pivot);

        let inv = S::one() / a[col][col].clone();
        for x in &mut a[col][col..] {
            *x = x.clone() * inv.clone();
        }
        b[col] = b[col].clone() * inv;

        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            let factor = row[col].clone();
            if factor.is_zero() {
                continue;
            }
            for k in col..n {
                row[k] = row[k].clone() - factor.clone() * pivot_row[k].clone();
            }
            let r = col + 1 + offset;
            b[r] = b[r].clone() - factor * b[col].clone();
        }
    }
    for col in (0..n).rev() {
        for r in 0..col {
            let factor = a[r][col].clone();
            if !factor.is_zero() {
                a[r][col] = S::zero();
                b[r] = b[r].clone() - factor * b[col].clone();
            }
        }
    }
    Ok(b)
}

/// Solves the fixpoint system `x = a * x + b` for sparse `a`, given as
/// `(column, coefficient)` lists per row, where `I - a` is regular.
pub fn solve_fixpoint<S: Scalar>(a: Vec<Vec<(usize, S)>>, b: Vec<S>) -> Result<Vec<S>, SolveError> {
    if a.len() != b.len() {
        return Err(SolveError::Dimension {
            rows: a.len(),
            cols: a.len(),
            rhs: b.len(),
        });
    }
    Ok(FixpointFactors::new(a)?.solve(b))
}

/// One eliminated unknown, its scaling, and the rows it was substituted into.
type Step<S> = (usize, S, Vec<(usize, S)>);

/// Sparse elimination of `x = a * x + b`, reusable for many `b`.
///
/// Unknowns are eliminated one at a time, cheapest first by the product of
/// row and column lengths, which keeps fill-in low on the loosely coupled
/// systems Markov chains produce. The recorded steps are replayed on each
/// right-hand side before back substitution.
#[derive(Debug, Clone)]
pub struct FixpointFactors<S> {
    steps: Vec<Step<S>>,
    /// Remaining dependencies of each unknown at its elimination.
    rows: Vec<Vec<(usize, S)>>,
}

impl<S: Scalar> FixpointFactors<S> {
    pub fn new(a: Vec<Vec<(usize, S)>>) -> Result<Self, SolveError> {
        let n = a.len();
        if a.iter().flatten().any(|(c, _)| *c >= n) {
            return Err(SolveError::Dimension {
                rows: n,
                cols: n,
                rhs: n,
            });
        }
        let mut rows: Vec<BTreeMap<usize, S>> = vec![BTreeMap::new(); n];
        let mut cols: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (r, row) in a.into_iter().enumerate() {
            for (c, v) in row {
                if v.is_zero() {
                    continue;
                }
                let entry = rows[r].entry(c).or_insert_with(S::zero);
                *entry = entry.clone() + v;
                cols[c].insert(r);
            }
        }

        let mut eliminated = vec![false; n];
        let mut steps = Vec::with_capacity(n);
        for _ in 0..n {
            let v = (0..n)
                .filter(|&v| !eliminated[v])
                .min_by_key(|&v| (rows[v].len() * cols[v].len(), v))
                .expect("unknowns remain");
            eliminated[v] = true;

            let self_loop = rows[v].remove(&v).unwrap_or_else(S::zero);
            cols[v].remove(&v);
            let pivot = S::one() - self_loop;
            if pivot.is_zero() {
                return Err(SolveError::Singular);
            }
            let inv = S::one() / pivot;
            for coeff in rows[v].values_mut() {
                *coeff = coeff.clone() * inv.clone();
            }

            let pivot_row: Vec<(usize, S)> = rows[v].iter().map(|(c, s)| (*c, s.clone())).collect();
            for (c, _) in &pivot_row {
                cols[*c].remove(&v);
            }
            let mut substituted = Vec::new();
            for u in std::mem::take(&mut cols[v]) {
                let factor = rows[u].remove(&v).expect("column index matches rows");
                for (c, s) in &pivot_row {
                    let entry = rows[u].entry(*c).or_insert_with(S::zero);
                    *entry = entry.clone() + factor.clone() * s.clone();
                    if entry.is_zero() {
                        rows[u].remove(c);
                        cols[*c].remove(&u);
                    } else {
                        cols[*c].insert(u);
                    }
                }
                substituted.push((u, factor));
            }
            steps.push((v, inv, substituted));
        }
        let rows = rows.into_iter().map(|r| r.into_iter().collect()).collect();
        Ok(FixpointFactors { steps, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Solution for right-hand side `b`, which must have [`Self::len`] entries.
    pub fn solve(&self, mut b: Vec<S>) -> Vec<S> {
        assert_eq!(b.len(), self.len(), "right-hand side length");
        for (v, inv, substituted) in &self.steps {
            b[*v] = b[*v].clone() * inv.clone();
            for (u, factor) in substituted {
                b[*u] = b[*u].clone() + factor.clone() * b[*v].clone();
            }
        }
        let mut x: Vec<S> = vec![S::zero(); b.len()];
        for (v, _, _) in self.steps.iter().rev() {
            let mut value = b[*v].clone();
            for (c, s) in &self.rows[*v] {
                value = value + s.clone() * x[*c].clone();
            }
            x[*v] = value;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        ratio(n, d)
    }

    #[test]
    fn exact_two_by_two() {
        // x + 2y = 5, 3x + 4y = 6  =>  x = -4, y = 9/2
        let a = vec![vec![q(1, 1), q(2, 1)], vec![q(3, 1), q(4, 1)]];
        let x = solve(a, vec![q(5, 1), q(6, 1)]).unwrap();
        assert_eq!(x, vec![q(-4, 1), q(9, 2)]);
    }

    #[test]
    fn needs_row_swap() {
        let a = vec![vec![q(0, 1), q(1, 1)], vec![q(1, 1), q(0, 1)]];
        assert_eq!(solve(a, vec![q(2, 1), q(3, 1)]).unwrap(), vec![q(3, 1), q(2, 1)]);
    }

    #[test]
    fn running_example_loop() {
        // q = 1/2 * (3/10 + 7/10 q)  <=>  (1 - 7/20) q = 3/20
        let a = vec![vec![q(13, 20)]];
        assert_eq!(solve(a, vec![q(3, 20)]).unwrap(), vec![q(3, 13)]);
    }

    #[test]
    fn singular_is_reported() {
        let a = vec![vec![q(1, 1), q(2, 1)], vec![q(2, 1), q(4, 1)]];
        assert_eq!(solve(a, vec![q(1, 1), q(2, 1)]), Err(SolveError::Singular));
    }

    #[test]
    fn float_matches_exact() {
        let a = vec![vec![2.0, 1.0, -1.0], vec![-3.0, -1.0, 2.0], vec![-2.0, 1.0, 2.0]];
        let x = solve(a, vec![8.0, -11.0, -3.0]).unwrap();
        for (got, want) in x.iter().zip([2.0f64, 3.0, -1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let af = vec![vec![2.0f32, 0.0], vec![0.0, 4.0]];
        assert_eq!(solve(af, vec![1.0, 1.0]).unwrap(), vec![0.5, 0.25]);
    }

    #[test]
    fn fixpoint_matches_dense() {
        // x0 = 1/2 x1 + 1/4, x1 = 1/3 x0 + 1/3 x2, x2 = 1/2 x2 + 1/2 x0 + 0
        let a = vec![
            vec![(1, q(1, 2))],
            vec![(0, q(1, 3)), (2, q(1, 3))],
            vec![(2, q(1, 2)), (0, q(1, 2))],
        ];
        let b = vec![q(1, 4), q(0, 1), q(0, 1)];
        let dense = vec![
            vec![q(1, 1), q(-1, 2), q(0, 1)],
            vec![q(-1, 3), q(1, 1), q(-1, 3)],
            vec![q(-1, 2), q(0, 1), q(1, 2)],
        ];
        assert_eq!(solve_fixpoint(a, b.clone()).unwrap(), solve(dense, b).unwrap());
    }

    #[test]
    fn fixpoint_loop_and_singularity() {
        assert_eq!(
            solve_fixpoint(vec![vec![(0, q(7, 20))]], vec![q(3, 20)]).unwrap(),
            vec![q(3, 13)]
        );
        assert_eq!(
            solve_fixpoint(vec![vec![(0, q(1, 1))]], vec![q(0, 1)]),
            Err(SolveError::Singular)
        );
        let f = solve_fixpoint(vec![vec![(0, 0.35f64)]], vec![0.15]).unwrap();
        assert!((f[0] - 3.0 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn factors_are_reusable() {
        let a = vec![vec![(1, q(1, 2))], vec![(0, q(1, 2))]];
        let f = FixpointFactors::new(a).unwrap();
        assert_eq!(f.solve(vec![q(1, 2), q(0, 1)]), vec![q(2, 3), q(1, 3)]);
        assert_eq!(f.solve(vec![q(0, 1), q(1, 2)]), vec![q(1, 3), q(2, 3)]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            solve(vec![vec![q(1, 1)]], vec![]),
            Err(SolveError::Dimension { .. })
        ));
    }
}
