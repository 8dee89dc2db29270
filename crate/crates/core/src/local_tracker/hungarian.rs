//! Minimum-cost rectangular assignment (Kuhn-Munkres with potentials).

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// (row, col) pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

/// Solves a square problem. Returns row -> col and the dual potentials.
fn solve_square(cost: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.len();
    // 1-indexed working arrays; index 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    (row_to_col, u[1..].to_vec(), v[1..].to_vec())
}

/// Optimal assignment of every row when rows <= cols, padding with zero
/// rows to keep the duals of the square problem.
fn solve_wide(cost: &[Vec<f64>], cols: usize) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let rows = cost.len();
    let mut square = cost.to_vec();
    square.resize(cols, vec![0.0; cols]);
    let (sol, u, v) = solve_square(&square);
    (sol[..rows].to_vec(), u, v)
}

fn sub_cost(cost: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> (Vec<usize>, f64) {
    if rows.is_empty() {
        return (Vec::new(), 0.0);
    }
    let sub: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| cost[r][c]).collect())
        .collect();
    let (sol, _, _) = solve_wide(&sub, cols.len());
    let total = sol.iter().enumerate().map(|(i, &j)| sub[i][j]).sum();
    (sol.into_iter().map(|j| cols[j]).collect(), total)
}

/// Rows <= cols. Returns row -> col, lexicographically smallest among the
/// optimal assignments (up to a relative float tolerance).
fn solve_lexicographic(cost: &[Vec<f64>], cols: usize) -> Vec<usize> {
    let rows = cost.len();
    let (mut sol, u, v) = solve_wide(cost, cols);
    let scale = cost.iter().flatten().fold(1.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-10 * scale * (rows as f64 + 1.0);
    let total: f64 = sol.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();

    let mut taken = vec![false; cols];
    let mut fixed_sum = 0.0;
    for r in 0..rows {
        let current = sol[r];
        // Every optimal assignment uses only edges with zero reduced cost,
        // so only those can replace the current column.
        let candidates: Vec<usize> = (0..current)
            .filter(|&c| !taken[c] && (cost[r][c] - u[r] - v[c]).abs() <= tol)
            .collect();
        for c in candidates {
            let rest_rows: Vec<usize> = (r + 1..rows).collect();
            let rest_cols: Vec<usize> = (0..cols).filter(|&k| !taken[k] && k != c).collect();
            let (rest, rest_cost) = sub_cost(cost, &rest_rows, &rest_cols);
            if fixed_sum + cost[r][c] + rest_cost <= total + tol {
                sol[r] = c;
                sol[r + 1..].copy_from_slice(&rest);
                break;
            }
        }
        taken[sol[r]] = true;
        fixed_sum += cost[r][sol[r]];
    }
    sol
}

/// Minimum-cost assignment of `min(rows, cols)` pairs.
///
/// Ties are broken toward the lexicographically smallest assignment of
/// the shorter side, which makes the result independent of solver
/// internals. Costs must be finite.
pub fn hungarian(cost: &[Vec<f64>]) -> Assignment {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Assignment { pairs: Vec::new(), total_cost: 0.0 };
    }
    debug_assert!(cost.iter().all(|r| r.len() == cols));
    let mut pairs: Vec<(usize, usize)> = if rows <= cols {
        solve_lexicographic(cost, cols).into_iter().enumerate().collect()
    } else {
        let transposed: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| cost[r][c]).collect()).collect();
        solve_lexicographic(&transposed, rows)
            .into_iter()
            .enumerate()
            .map(|(c, r)| (r, c))
            .collect()
    };
    pairs.sort_unstable();
    let total_cost = pairs.iter().map(|&(r, c)| cost[r][c]).sum();
    Assignment { pairs, total_cost }
}
