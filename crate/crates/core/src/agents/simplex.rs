//! Dense two-phase simplex for small programs over the unit box.
//!
//! Solves `max c·x` subject to a handful of equality rows and `0 ≤ x ≤ 1`.
//! Upper bounds become explicit slack rows, so the tableau has `m + e` rows
//! and `2m + e` columns. Bland's rule guarantees termination on degenerate
//! vertices, which are common here because every corner of the cube sits on
//! several bound constraints at once.

use crate::error::{ensure_len, Error, Result};

const PIVOT_EPS: f64 = 1e-12;
const FEAS_EPS: f64 = 1e-9;

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= p;
        }
        self.rhs[row] /= p;
        let pivot_row = self.rows[row].clone();
        let pivot_rhs = self.rhs[row];
        for r in 0..self.rows.len() {
            if r == row {
                continue;
            }
            let f = self.rows[r][col];
            if f != 0.0 {
                for (v, pv) in self.rows[r].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.rhs[r] -= f * pivot_rhs;
            }
        }
        self.basis[row] = col;
    }

    /// Maximizes `cost` over the current basis, only letting columns in
    /// `0..allowed` enter.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<()> {
        let cap = 50 * (self.rows.len() + cost.len()) * (self.rows.len() + cost.len());
        for _ in 0..cap {
            let entering = (0..allowed).find(|&j| {
                let reduced = cost[j]
                    - self
                        .basis
                        .iter()
                        .zip(&self.rows)
                        .map(|(&b, row)| cost[b] * row[j])
                        .sum::<f64>();
                reduced > FEAS_EPS && !self.basis.contains(&j)
            });
            let Some(col) = entering else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][col];
                if a > PIVOT_EPS {
                    let ratio = self.rhs[r] / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - PIVOT_EPS
                                || (ratio <= bratio + PIVOT_EPS && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            match best {
                Some((row, _)) => self.pivot(row, col),
                // every variable is boxed, so this would be a numerical breakdown
                None => return Err(Error::NonFinite("simplex ray in a bounded program".into())),
            }
        }
        Err(Error::NonFinite("simplex iteration cap reached".into()))
    }

    fn value(&self, col: usize) -> f64 {
        self.basis.iter().position(|&b| b == col).map_or(0.0, |r| self.rhs[r])
    }
}

/// Maximizes `objective·x` over `{x ∈ [0,1]^m : A x = b}` for the given
/// equality rows. Returns some optimal vertex.
pub fn solve_box_lp(objective: &[f64], equalities: &[(Vec<f64>, f64)]) -> Result<Vec<f64>> {
    let m = objective.len();
    for (a, _) in equalities {
        ensure_len(m, a.len())?;
    }
    let e = equalities.len();
    let cols = 2 * m + e;
    let mut rows = Vec::with_capacity(m + e);
    let mut rhs = Vec::with_capacity(m + e);
    let mut basis = Vec::with_capacity(m + e);
    for i in 0..m {
        let mut row = vec![0.0; cols];
        row[i] = 1.0;
        row[m + i] = 1.0;
        rows.push(row);
        rhs.push(1.0);
        basis.push(m + i);
    }
    for (k, (a, b)) in equalities.iter().enumerate() {
        let sign = if *b < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; cols];
        for (dst, src) in row.iter_mut().zip(a) {
            *dst = sign * src;
        }
        row[2 * m + k] = 1.0;
        rows.push(row);
        rhs.push(sign * b);
        basis.push(2 * m + k);
    }
    let mut tab = Tableau { rows, rhs, basis };

    // Phase I: drive the artificials to zero.
    let mut phase1 = vec![0.0; cols];
    for c in phase1.iter_mut().skip(2 * m) {
        *c = -1.0;
    }
    tab.optimize(&phase1, 2 * m)?;
    let scale = 1.0 + equalities.iter().map(|(_, b)| b.abs()).fold(0.0, f64::max);
    let residual: f64 = (2 * m..cols).map(|j| tab.value(j)).sum();
    if residual > FEAS_EPS * scale {
        return Err(Error::Infeasible(format!(
            "equality constraints leave a residual of {residual:e}"
        )));
    }
    for r in 0..tab.rows.len() {
        if tab.basis[r] >= 2 * m {
            if let Some(col) = (0..2 * m).find(|&j| tab.rows[r][j].abs() > 1e-9) {
                tab.pivot(r, col);
            }
        }
    }

    // Phase II
    let mut phase2 = vec![0.0; cols];
    phase2[..m].copy_from_slice(objective);
    tab.optimize(&phase2, 2 * m)?;
    Ok((0..m).map(|j| tab.value(j).clamp(0.0, 1.0)).collect())
}

/// Maximizes `objective·x` subject to `coeffs·x = rhs` and `x ∈ [0,1]^m`.
///
/// Among several optimal vertices the lexicographically smallest one is
/// returned: the optimum is pinned as an extra equality and `x₁, x₂, …` are
/// minimized in turn.
pub fn simplex_solve(objective: &[f64], coeffs: &[f64], rhs: f64) -> Result<Vec<f64>> {
    ensure_len(objective.len(), coeffs.len())?;
    if objective.iter().chain(coeffs).any(|v| !v.is_finite()) || !rhs.is_finite() {
        return Err(Error::NonFinite("linear program coefficients".into()));
    }
    let lo: f64 = coeffs.iter().map(|a| a.min(0.0)).sum();
    let hi: f64 = coeffs.iter().map(|a| a.max(0.0)).sum();
    let tol = FEAS_EPS * (1.0 + rhs.abs());
    if rhs < lo - tol || rhs > hi + tol {
        return Err(Error::Infeasible(format!(
            "rhs {rhs} outside the reachable range [{lo}, {hi}]"
        )));
    }

    let m = objective.len();
    let mut rows = vec![(coeffs.to_vec(), rhs)];
    let x = solve_box_lp(objective, &rows)?;
    let best = dot(objective, &x);
    rows.push((objective.to_vec(), best));
    let mut x = x;
    for i in 0..m {
        let mut minimize = vec![0.0; m];
        minimize[i] = -1.0;
        x = solve_box_lp(&minimize, &rows)?;
        let mut pin = vec![0.0; m];
        pin[i] = 1.0;
        rows.push((pin, x[i]));
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// All vertices of `{x ∈ [0,1]^m : a·x = b}`: fix every coordinate but one
    /// at a bound and solve for the free one.
    fn vertices(a: &[f64], b: f64) -> Vec<Vec<f64>> {
        let m = a.len();
        let mut out = Vec::new();
        for free in 0..m {
            for mask in 0..(1u32 << (m - 1)) {
                let mut x = vec![0.0; m];
                let mut bit = 0;
                for (i, xi) in x.iter_mut().enumerate() {
                    if i != free {
                        *xi = f64::from((mask >> bit) & 1);
                        bit += 1;
                    }
                }
                let rest: f64 = (0..m).filter(|&i| i != free).map(|i| a[i] * x[i]).sum();
                if a[free].abs() < 1e-12 {
                    if (rest - b).abs() < 1e-9 {
                        for v in [0.0, 1.0] {
                            x[free] = v;
                            out.push(x.clone());
                        }
                    }
                    continue;
                }
                let v = (b - rest) / a[free];
                if (-1e-12..=1.0 + 1e-12).contains(&v) {
                    x[free] = v.clamp(0.0, 1.0);
                    out.push(x);
                }
            }
        }
        out
    }

    #[test]
    fn picks_single_best_issue() {
        let x = simplex_solve(&[1.0, 0.0, 0.0], &[1.0, 1.0, 1.0], 1.0).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn weighted_constraint() {
        let x = simplex_solve(&[3.0, 2.0, 1.0], &[1.0, 2.0, 3.0], 3.0).unwrap();
        for (got, want) in x.iter().zip([1.0, 1.0, 0.0]) {
            assert!((got - want).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn infeasible_rhs() {
        assert!(matches!(
            simplex_solve(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], 6.5),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            simplex_solve(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], -0.1),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn ties_prefer_lexicographically_smallest_vertex() {
        // flat objective: every feasible vertex is optimal
        let x = simplex_solve(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], 1.0).unwrap();
        assert_eq!(x, vec![0.0, 0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn matches_vertex_enumeration(
            obj in prop::array::uniform3(-3i32..=3),
            a in prop::array::uniform3(-3i32..=3),
            frac in 0.0f64..=1.0,
        ) {
            let obj: Vec<f64> = obj.iter().map(|&v| f64::from(v)).collect();
            let a: Vec<f64> = a.iter().map(|&v| f64::from(v)).collect();
            let lo: f64 = a.iter().map(|v| v.min(0.0)).sum();
            let hi: f64 = a.iter().map(|v| v.max(0.0)).sum();
            let b = lo + frac * (hi - lo);
            let vs = vertices(&a, b);
            prop_assume!(!vs.is_empty());
            let x = simplex_solve(&obj, &a, b).unwrap();
            prop_assert!((dot(&a, &x) - b).abs() < 1e-9);
            let best = vs.iter().map(|v| dot(&obj, v)).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((dot(&obj, &x) - best).abs() < 1e-9, "{x:?} vs best {best}");
            // lexicographically smallest optimal vertex
            let mut optimal: Vec<_> = vs
                .into_iter()
                .filter(|v| (dot(&obj, v) - best).abs() < 1e-9)
                .collect();
            optimal.sort_by(|p, q| p.partial_cmp(q).unwrap());
            for (got, want) in x.iter().zip(&optimal[0]) {
                prop_assert!((got - want).abs() < 1e-9, "{x:?} vs {:?}", optimal[0]);
            }
        }
    }
}
