//! Vertex enumeration for low-dimensional polytopes.
//!
//! A vertex is the solution of `dim` linearly independent tight constraints
//! that satisfies all the others. Enumeration is brute force over constraint
//! subsets, so callers cap it with a combination budget and fall back to LPs
//! when the budget would be exceeded. After a new halfspace is added, only the
//! subsets containing it need to be solved.

use super::body::ConvexBody;
use super::dot;

const FEAS_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-12;
const DEDUP_TOL: f64 = 1e-10;

fn rows(body: &ConvexBody) -> Vec<(Vec<f64>, f64)> {
    let n = body.dim();
    let mut rows = Vec::with_capacity(2 * n + body.halfspaces().len());
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e.clone(), body.upper()[j]));
        e[j] = -1.0;
        rows.push((e, -body.lower()[j]));
    }
    rows.extend(body.halfspaces().iter().map(|h| (h.normal.clone(), h.offset)));
    rows
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Solves the square system given by the selected rows (Gaussian elimination
/// with partial pivoting). `None` when singular.
fn solve_square(rows: &[(Vec<f64>, f64)], pick: &[usize]) -> Option<Vec<f64>> {
    let n = pick.len();
    let mut a: Vec<Vec<f64>> = pick
        .iter()
        .map(|&r| {
            let mut row = rows[r].0.clone();
            row.push(rows[r].1);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < SINGULAR_TOL {
            return None;
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

fn feasible(rows: &[(Vec<f64>, f64)], x: &[f64]) -> bool {
    rows.iter().all(|(a, b)| dot(a, x) - b <= FEAS_TOL)
}

fn insert_unique(out: &mut Vec<Vec<f64>>, v: Vec<f64>) {
    let dup = out
        .iter()
        .any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() <= DEDUP_TOL));
    if !dup {
        out.push(v);
    }
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All vertices of the polytope, or `None` when more than `budget` constraint
/// subsets would have to be solved.
pub fn enumerate(body: &ConvexBody, budget: f64) -> Option<Vec<Vec<f64>>> {
    let rows = rows(body);
    let n = body.dim();
    if binomial(rows.len(), n) > budget {
        return None;
    }
    let mut out = Vec::new();
    for_each_subset(rows.len(), n, |pick| {
        if let Some(x) = solve_square(&rows, pick) {
            if feasible(&rows, &x) {
                insert_unique(&mut out, x);
            }
        }
    });
    Some(out)
}

/// Updates the vertex list of `body` minus its last halfspace to the vertex
/// list of `body`. `None` when over budget.
pub fn clip(body: &ConvexBody, previous: &[Vec<f64>], budget: f64) -> Option<Vec<Vec<f64>>> {
    let rows = rows(body);
    let n = body.dim();
    let last = rows.len() - 1;
    if body.halfspaces().is_empty() || binomial(last, n - 1) > budget {
        return None;
    }
    let (a, b) = &rows[last];
    let mut out: Vec<Vec<f64>> = previous
        .iter()
        .filter(|v| dot(a, v) - b <= FEAS_TOL)
        .cloned()
        .collect();
    let mut pick = vec![0usize; n];
    for_each_subset(last, n - 1, |others| {
        pick[..n - 1].copy_from_slice(others);
        pick[n - 1] = last;
        if let Some(x) = solve_square(&rows, &pick) {
            if feasible(&rows, &x) {
                insert_unique(&mut out, x);
            }
        }
    });
    Some(out)
}

/// `max ⟨direction, v⟩` over a vertex list.
pub fn support(vertices: &[Vec<f64>], direction: &[f64]) -> Option<f64> {
    vertices
        .iter()
        .map(|v| dot(direction, v))
        .max_by(f64::total_cmp)
}
