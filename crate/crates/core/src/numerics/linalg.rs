//! Dense LU factorization with partial pivoting.

/// `P A = L U` of a square row-major matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factors the `n × n` row-major matrix `a`. Returns `None` when a pivot
    /// falls below `1e-13` times the largest entry.
    pub fn factor(mut a: Vec<f64>, n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n, "matrix size");
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
            if a[pivot * n + col].abs() <= 1e-13 * scale {
                return None;
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot * n + k);
                }
                perm.swap(col, pivot);
            }
            let p = a[col * n + col];
            for row in col + 1..n {
                let f = a[row * n + col] / p;
                a[row * n + col] = f;
                if f != 0.0 {
                    for k in col + 1..n {
                        a[row * n + k] -= f * a[col * n + k];
                    }
                }
            }
        }
        Some(Self { n, lu: a, perm })
    }

    /// Solves `A x = b`, returning `x`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for row in 0..n {
            let s: f64 = (0..row).map(|k| self.lu[row * n + k] * x[k]).sum();
            x[row] -= s;
        }
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|k| self.lu[row * n + k] * x[k]).sum();
            x[row] = (x[row] - s) / self.lu[row * n + row];
        }
        x
    }
}

/// Solves `a x = b` for a square matrix given as rows; `None` when singular.
pub fn solve_linear(a: Vec<Vec<f64>>, b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let flat: Vec<f64> = a.into_iter().flatten().collect();
    Some(Lu::factor(flat, n)?.solve(&b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_systems() {
        let x = solve_linear(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        let x = solve_linear(
            vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 2.0]],
            vec![1.0, 2.0, 4.0],
        )
        .unwrap();
        assert_eq!(x, vec![2.0, 1.0, 2.0]);
        assert!(solve_linear(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }
}
