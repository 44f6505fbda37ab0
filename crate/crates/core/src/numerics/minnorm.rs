//! Euclidean distance from a point to the convex hull of finitely many
//! points, by Wolfe's minimum-norm-point algorithm.

use super::linalg::solve_linear;
use super::{dot, norm};
use crate::error::{check_dim, Error, Result};

const MAJOR_CAP: usize = 10_000;

/// Affine minimizer of `‖Σ α_i y_i‖` with `Σ α_i = 1` over the given points.
fn affine_minimizer(ys: &[&[f64]]) -> Option<Vec<f64>> {
    let n = ys.len();
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = dot(ys[i], ys[j]);
        }
        a[i][n] = 1.0;
        a[n][i] = 1.0;
    }
    let mut b = vec![0.0; n + 1];
    b[n] = 1.0;
    let mut x = solve_linear(a, b)?;
    x.truncate(n);
    Some(x)
}

/// Distance from `q` to the convex hull of `points`, with the nearest hull
/// point.
pub fn distance_to_hull(points: &[Vec<f64>], q: &[f64]) -> Result<(f64, Vec<f64>)> {
    if points.is_empty() {
        return Err(Error::Input("convex hull of no points".into()));
    }
    for p in points {
        check_dim("hull point", q.len(), p.len())?;
    }
    let ys: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(q).map(|(a, b)| a - b).collect())
        .collect();
    let scale = ys.iter().map(|y| dot(y, y)).fold(0.0f64, f64::max).max(1e-300);
    let tol = 1e-12 * scale;
    let start = (0..ys.len())
        .min_by(|&i, &j| dot(&ys[i], &ys[i]).total_cmp(&dot(&ys[j], &ys[j])))
        .expect("nonempty");
    let mut active = vec![start];
    let mut weights = vec![1.0];
    let mut x = ys[start].clone();
    for _ in 0..MAJOR_CAP {
        let xx = dot(&x, &x);
        if xx <= tol {
            break;
        }
        let j = (0..ys.len())
            .min_by(|&i, &k| dot(&x, &ys[i]).total_cmp(&dot(&x, &ys[k])))
            .expect("nonempty");
        if xx - dot(&x, &ys[j]) <= tol || active.contains(&j) {
            break;
        }
        active.push(j);
        weights.push(0.0);
        loop {
            let refs: Vec<&[f64]> = active.iter().map(|&i| ys[i].as_slice()).collect();
            let Some(alpha) = affine_minimizer(&refs) else {
                // Affinely dependent active set: drop the newest point.
                active.pop();
                weights.pop();
                break;
            };
            if alpha.iter().all(|&a| a > 1e-14) {
                weights = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (w, a) in weights.iter().zip(&alpha) {
                if *a <= 1e-14 {
                    let denom = w - a;
                    if denom > 0.0 {
                        theta = theta.min(w / denom);
                    }
                }
            }
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w += theta * (a - *w);
            }
            let mut keep = 0;
            for idx in 0..active.len() {
                if weights[idx] > 1e-14 {
                    active[keep] = active[idx];
                    weights[keep] = weights[idx];
                    keep += 1;
                }
            }
            active.truncate(keep);
            weights.truncate(keep);
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
        }
        let mut next = vec![0.0; q.len()];
        for (&i, &w) in active.iter().zip(&weights) {
            for (n, y) in next.iter_mut().zip(&ys[i]) {
                *n += w * y;
            }
        }
        if dot(&next, &next) >= xx * (1.0 - 1e-15) && active.len() > 1 {
            x = next;
            break;
        }
        x = next;
    }
    let nearest: Vec<f64> = x.iter().zip(q).map(|(a, b)| a + b).collect();
    Ok((norm(&x), nearest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sampling::rng_from;
    use rand::Rng;

    #[test]
    fn segment_distance() {
        let pts = vec![vec![0.0, 0.0], vec![2.0, 0.0]];
        let (d, x) = distance_to_hull(&pts, &[1.0, 1.0]).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
        let (d, _) = distance_to_hull(&pts, &[3.0, 4.0]).unwrap();
        assert!((d - 17f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn inside_square_is_zero() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ];
        let (d, _) = distance_to_hull(&pts, &[0.3, 0.6]).unwrap();
        assert!(d < 1e-9);
    }

    #[test]
    fn cube_face_distance_matches_closed_form() {
        // Hull of the unit cube corners; distance is the box distance.
        let mut pts = Vec::new();
        for m in 0..8u32 {
            pts.push((0..3).map(|b| ((m >> b) & 1) as f64).collect::<Vec<f64>>());
        }
        let mut rng = rng_from(4);
        for _ in 0..200 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..3.0)).collect();
            let exact = q
                .iter()
                .map(|x: &f64| (-x).max(x - 1.0).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt();
            let (d, _) = distance_to_hull(&pts, &q).unwrap();
            assert!((d - exact).abs() < 1e-9, "{d} vs {exact}");
        }
    }
}
