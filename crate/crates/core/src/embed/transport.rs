//! Exact balanced transportation problem.
//!
//! Transportation simplex (MODI): a least-cost starting basis, then pivots on
//! the most negative reduced cost. The basis is kept as a spanning tree over
//! the `m + n` row/column nodes, so degenerate (zero-flow) basic cells are
//! represented explicitly. After a run of degenerate pivots the pricing
//! switches to Bland's rule, which cannot cycle.

use crate::error::{Error, Result};

/// Consecutive zero-step pivots tolerated before switching to Bland's rule.
const DEGENERATE_PIVOT_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    pub cost: f64,
    /// Basic cells `(row, col, flow)`; cells not listed carry no flow.
    pub plan: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

impl TransportSolution {
    pub fn row_sums(&self, rows: usize) -> Vec<f64> {
        let mut out = vec![0.0; rows];
        for &(i, _, f) in &self.plan {
            out[i] += f;
        }
        out
    }

    pub fn col_sums(&self, cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; cols];
        for &(_, j, f) in &self.plan {
            out[j] += f;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    /// A known lower bound on the optimum. When the starting basis already
    /// attains it the pivoting phase is skipped.
    pub lower_bound: Option<f64>,
}

struct Problem<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
}

impl Problem<'_> {
    #[inline]
    fn c(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j]
    }
}

/// Minimizes `sum cost[i][j] * x[i][j]` subject to row sums `supply`, column
/// sums `demand` and `x >= 0`. `cost` is row-major `supply.len() x demand.len()`.
/// Supply and demand must have equal totals (relative tolerance 1e-9).
pub fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportSolution> {
    solve_with(supply, demand, cost, SolveOptions::default())
}

pub fn solve_with(
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
    opts: SolveOptions,
) -> Result<TransportSolution> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::invalid("transport problem with no rows or columns"));
    }
    if cost.len() != m * n {
        return Err(Error::DimensionMismatch {
            expected: m * n,
            actual: cost.len(),
        });
    }
    if supply.iter().chain(demand).any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("transport masses must be finite and non-negative"));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("transport costs must be finite"));
    }
    let (ts, td) = (supply.iter().sum::<f64>(), demand.iter().sum::<f64>());
    if (ts - td).abs() > 1e-9 * ts.max(td).max(1.0) {
        return Err(Error::invalid(format!(
            "unbalanced transport problem: supply {ts} vs demand {td}"
        )));
    }

    let p = Problem { m, n, cost };
    let mut basis = initial_basis(&p, supply, demand);
    let start_cost = basis.cost(&p);
    let tol = 1e-12 * (1.0 + cost.iter().fold(0.0f64, |a, &c| a.max(c.abs())));

    let already_optimal = opts
        .lower_bound
        .is_some_and(|lb| start_cost <= lb + tol);
    let pivots = if already_optimal {
        0
    } else {
        basis.optimize(&p, tol)
    };

    Ok(TransportSolution {
        cost: basis.cost(&p),
        plan: basis
            .cells
            .iter()
            .zip(&basis.flow)
            .map(|(&(i, j), &f)| (i, j, f))
            .collect(),
        pivots,
    })
}

/// Spanning-tree basis with exactly `m + n - 1` cells.
struct Basis {
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    in_basis: Vec<bool>,
}

/// Least-cost rule. Every allocation retires exactly one row or column (both
/// on the last one), which yields `m + n - 1` cells forming a tree.
fn initial_basis(p: &Problem<'_>, supply: &[f64], demand: &[f64]) -> Basis {
    let (m, n) = (p.m, p.n);
    let mut order: Vec<usize> = (0..m * n).collect();
    order.sort_by(|&a, &b| p.cost[a].total_cmp(&p.cost[b]).then(a.cmp(&b)));

    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let mut row_alive = vec![true; m];
    let mut col_alive = vec![true; n];
    let (mut rows_left, mut cols_left) = (m, n);

    let mut basis = Basis {
        cells: Vec::with_capacity(m + n - 1),
        flow: Vec::with_capacity(m + n - 1),
        in_basis: vec![false; m * n],
    };

    for idx in order {
        let (i, j) = (idx / n, idx % n);
        if !row_alive[i] || !col_alive[j] {
            continue;
        }
        let amount = s[i].min(d[j]);
        s[i] -= amount;
        d[j] -= amount;
        basis.cells.push((i, j));
        basis.flow.push(amount);
        basis.in_basis[idx] = true;

        if rows_left == 1 && cols_left == 1 {
            break;
        }
        let retire_row = if rows_left == 1 {
            false
        } else if cols_left == 1 {
            true
        } else {
            s[i] <= d[j]
        };
        if retire_row {
            row_alive[i] = false;
            rows_left -= 1;
        } else {
            col_alive[j] = false;
            cols_left -= 1;
        }
    }
    debug_assert_eq!(basis.cells.len(), m + n - 1);
    basis
}

impl Basis {
    fn cost(&self, p: &Problem<'_>) -> f64 {
        self.cells
            .iter()
            .zip(&self.flow)
            .map(|(&(i, j), &f)| f * p.c(i, j))
            .sum()
    }

    /// Node ids: rows `0..m`, columns `m..m+n`. Adjacency entries are
    /// `(neighbor node, basis cell index)`.
    fn adjacency(&self, p: &Problem<'_>) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); p.m + p.n];
        for (k, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((p.m + j, k));
            adj[p.m + j].push((i, k));
        }
        adj
    }

    fn potentials(&self, p: &Problem<'_>, adj: &[Vec<(usize, usize)>]) -> (Vec<f64>, Vec<f64>) {
        let mut pot = vec![f64::NAN; p.m + p.n];
        pot[0] = 0.0;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            for &(next, k) in &adj[node] {
                if pot[next].is_nan() {
                    let (i, j) = self.cells[k];
                    // u_i + v_j = c_ij
                    pot[next] = p.c(i, j) - pot[node];
                    stack.push(next);
                }
            }
        }
        let v = pot.split_off(p.m);
        (pot, v)
    }

    /// Basis cell indices on the tree path from row `i` to column `j`.
    fn path(&self, p: &Problem<'_>, adj: &[Vec<(usize, usize)>], i: usize, j: usize) -> Vec<usize> {
        let target = p.m + j;
        let mut via: Vec<Option<(usize, usize)>> = vec![None; p.m + p.n];
        let mut seen = vec![false; p.m + p.n];
        seen[i] = true;
        let mut queue = std::collections::VecDeque::from([i]);
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &(next, k) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    via[next] = Some((node, k));
                    queue.push_back(next);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = target;
        while let Some((prev, k)) = via[node] {
            cells.push(k);
            node = prev;
        }
        cells.reverse();
        cells
    }

    fn optimize(&mut self, p: &Problem<'_>, tol: f64) -> usize {
        let mut pivots = 0;
        let mut degenerate_run = 0;
        loop {
            let adj = self.adjacency(p);
            let (u, v) = self.potentials(p, &adj);
            let bland = degenerate_run >= DEGENERATE_PIVOT_LIMIT;

            let mut entering = None;
            let mut best = -tol;
            'scan: for i in 0..p.m {
                for j in 0..p.n {
                    if self.in_basis[i * p.n + j] {
                        continue;
                    }
                    let reduced = p.c(i, j) - u[i] - v[j];
                    if reduced < best {
                        entering = Some((i, j));
                        if bland {
                            break 'scan;
                        }
                        best = reduced;
                    }
                }
            }
            let Some((ei, ej)) = entering else {
                return pivots;
            };

            // Path cells alternate -, +, -, ... starting next to row `ei`.
            let path = self.path(p, &adj, ei, ej);
            let mut leave: Option<usize> = None;
            for &k in path.iter().step_by(2) {
                let better = match leave {
                    None => true,
                    Some(l) => {
                        self.flow[k] < self.flow[l]
                            || (self.flow[k] == self.flow[l] && self.cells[k] < self.cells[l])
                    }
                };
                if better {
                    leave = Some(k);
                }
            }
            let leave = leave.expect("cycle has at least one decreasing cell");
            let theta = self.flow[leave];
            for (pos, &k) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    self.flow[k] -= theta;
                } else {
                    self.flow[k] += theta;
                }
            }
            let (li, lj) = self.cells[leave];
            self.in_basis[li * p.n + lj] = false;
            self.in_basis[ei * p.n + ej] = true;
            self.cells[leave] = (ei, ej);
            self.flow[leave] = theta;

            pivots += 1;
            if theta == 0.0 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one() {
        let s = solve(&[1.0], &[1.0], &[3.5]).unwrap();
        assert_eq!(s.cost, 3.5);
        assert_eq!(s.plan, vec![(0, 0, 1.0)]);
    }

    #[test]
    fn textbook_instance() {
        // Supplies 20/30/25, demands 10/35/30.
        let cost = [8.0, 6.0, 10.0, 9.0, 12.0, 13.0, 14.0, 9.0, 16.0];
        let s = solve(&[20.0, 30.0, 25.0], &[10.0, 35.0, 30.0], &cost).unwrap();
        assert_eq!(s.plan.len(), 5);
        assert!((s.row_sums(3)[1] - 30.0).abs() < 1e-12);
        assert!((s.col_sums(3)[2] - 30.0).abs() < 1e-12);
        let brute = tiny_brute(&[20.0, 30.0, 25.0], &[10.0, 35.0, 30.0], &cost);
        assert!((s.cost - brute).abs() < 1e-9, "{} vs {}", s.cost, brute);
    }

    #[test]
    fn degenerate_masses() {
        let s = solve(&[0.5, 0.5], &[0.5, 0.5], &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(s.cost, 0.0);
        assert_eq!(s.plan.len(), 3);
        let s = solve(&[1.0, 0.0], &[0.0, 1.0], &[2.0, 1.0, 0.0, 5.0]).unwrap();
        assert_eq!(s.cost, 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve(&[1.0], &[0.5], &[1.0]).is_err());
        assert!(solve(&[1.0], &[1.0], &[1.0, 2.0]).is_err());
        assert!(solve(&[], &[1.0], &[]).is_err());
        assert!(solve(&[-1.0, 2.0], &[1.0], &[1.0, 1.0]).is_err());
    }

    /// Grid search over the four free cells of a 3x3 plan with integral
    /// masses.
    fn tiny_brute(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
        let n = demand.len();
        let mut best = f64::INFINITY;
        // 3x3 with integral masses: enumerate x00, x01, x10, x11 over 0..=35.
        for a in 0..=35 {
            for b in 0..=35 {
                for c in 0..=35 {
                    for d in 0..=35 {
                        let x = [
                            a as f64,
                            b as f64,
                            supply[0] - a as f64 - b as f64,
                            c as f64,
                            d as f64,
                            supply[1] - c as f64 - d as f64,
                            demand[0] - a as f64 - c as f64,
                            demand[1] - b as f64 - d as f64,
                            0.0,
                        ];
                        let mut x = x;
                        x[8] = supply[2] - x[6] - x[7];
                        if x.iter().any(|&v| v < 0.0) || (x[2] + x[5] + x[8] - demand[2]).abs() > 1e-9 {
                            continue;
                        }
                        let c: f64 = (0..9).map(|k| x[k] * cost[(k / n) * n + k % n]).sum();
                        best = best.min(c);
                    }
                }
            }
        }
        best
    }
}
