//! Optimal one-to-one assignment and the matching-based earth mover distance.

use crate::error::{check_dim, Error, Result};
use crate::linalg::dist;

pub const MAX_ASSIGNMENT: usize = 2000;

/// Minimum-cost perfect matching on a dense `n x n` row-major cost matrix by
/// shortest augmenting paths with potentials. Returns the column assigned to
/// each row and the total cost.
pub fn solve_assignment(cost: &[f64], n: usize) -> Result<(Vec<usize>, f64)> {
    check_dim(n * n, cost.len())?;
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("assignment costs must be finite".into()));
    }
    // 1-based arrays with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
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
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0usize; n];
    for j in 1..=n {
        col_of_row[row_of[j] - 1] = j - 1;
    }
    let total = col_of_row
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    Ok((col_of_row, total))
}

/// Mean Euclidean distance under the optimal one-to-one matching of two
/// equally sized point sets.
pub fn emd(generated: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64> {
    let n = generated.len();
    if n == 0 {
        return Err(Error::Empty("point set"));
    }
    if reference.len() != n {
        return Err(Error::InvalidArgument(format!(
            "EMD needs equal-size sets, got {n} and {}",
            reference.len()
        )));
    }
    if n > MAX_ASSIGNMENT {
        return Err(Error::AssignmentTooLarge {
            n,
            cap: MAX_ASSIGNMENT,
        });
    }
    let m = generated[0].len();
    for p in generated.iter().chain(reference) {
        check_dim(m, p.len())?;
    }
    let mut cost = Vec::with_capacity(n * n);
    for a in generated {
        for b in reference {
            cost.push(dist(a, b));
        }
    }
    let (_, total) = solve_assignment(&cost, n)?;
    Ok(total / n as f64)
}
