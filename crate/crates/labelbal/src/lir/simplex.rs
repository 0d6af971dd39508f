//! Dense two-phase primal simplex with Bland's pivoting rule.
//!
//! Problem form: maximize `c . x` subject to `A x = b`, `x >= 0`, with
//! `b >= 0`. Sized for the small, well-scaled programs produced by the
//! feasibility audit; Bland's rule guarantees termination under degeneracy.

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// m x (n_total + 1); last column is the right-hand side.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_total: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.n_total]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= p;
        }
        for i in 0..self.rows.len() {
            if i == row {
                continue;
            }
            let factor = self.rows[i][col];
            if factor == 0.0 {
                continue;
            }
            let pivot_row = self.rows[row].clone();
            for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex minimizing `cost . x` over columns where `allowed` holds.
    /// Returns false on unboundedness.
    fn minimize(&mut self, cost: &[f64], allowed: &[bool]) -> bool {
        loop {
            // Reduced costs d_j = c_j - c_B . (B^-1 A_j). Entering variable is
            // the lowest-index column with d_j < -tol (Bland).
            let mut entering = None;
            for j in 0..self.n_total {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j];
                for (i, &bi) in self.basis.iter().enumerate() {
                    if cost[bi] != 0.0 {
                        d -= cost[bi] * self.rows[i][j];
                    }
                }
                if d < -COST_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else { return true };

            // Ratio test; ties broken by smallest basis variable index (Bland).
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][j];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    match leaving {
                        None => leaving = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - PIVOT_TOL
                                || ((ratio - lr).abs() <= PIVOT_TOL
                                    && self.basis[i] < self.basis[li])
                            {
                                leaving = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return false;
            };
            self.pivot(row, j);
        }
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &bi)| cost[bi] * self.rhs(i))
            .sum()
    }
}

pub(crate) fn solve_max(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> LpOutcome {
    let m = a.len();
    let n = c.len();
    debug_assert!(b.iter().all(|&v| v >= 0.0), "rhs must be non-negative");
    debug_assert!(a.iter().all(|row| row.len() == n));

    // Phase 1 tableau: [A | I | b], basis = artificials.
    let n_total = n + m;
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = vec![0.0; n_total + 1];
        row[..n].copy_from_slice(&a[i]);
        row[n + i] = 1.0;
        row[n_total] = b[i];
        rows.push(row);
    }
    let mut t = Tableau {
        rows,
        basis: (n..n_total).collect(),
        n_total,
    };

    let mut phase1_cost = vec![0.0; n_total];
    for cj in phase1_cost.iter_mut().skip(n) {
        *cj = 1.0;
    }
    let allowed_all = vec![true; n_total];
    if !t.minimize(&phase1_cost, &allowed_all) {
        // Phase 1 is bounded below by 0; reaching here means numerical trouble.
        return LpOutcome::Infeasible;
    }
    if t.objective(&phase1_cost) > 1e-7 {
        return LpOutcome::Infeasible;
    }

    // Drive any artificial still in the basis (at level 0) out of it, or drop
    // its row as redundant.
    let mut drop_rows = Vec::new();
    for i in 0..t.rows.len() {
        if t.basis[i] < n {
            continue;
        }
        let mut pivot_col = None;
        for j in 0..n {
            if t.rows[i][j].abs() > PIVOT_TOL {
                pivot_col = Some(j);
                break;
            }
        }
        match pivot_col {
            Some(j) => t.pivot(i, j),
            None => drop_rows.push(i),
        }
    }
    for &i in drop_rows.iter().rev() {
        t.rows.remove(i);
        t.basis.remove(i);
    }

    // Phase 2: minimize -c over original columns only.
    let mut phase2_cost = vec![0.0; n_total];
    for j in 0..n {
        phase2_cost[j] = -c[j];
    }
    let mut allowed = vec![false; n_total];
    for aj in allowed.iter_mut().take(n) {
        *aj = true;
    }
    if !t.minimize(&phase2_cost, &allowed) {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![0.0; n];
    for (i, &bi) in t.basis.iter().enumerate() {
        if bi < n {
            // Clamp the tiny negative residue a pivot can leave behind.
            x[bi] = t.rhs(i).max(0.0);
        }
    }
    let objective = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    LpOutcome::Optimal { x, objective }
}
