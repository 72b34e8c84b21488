//! Distances between traces.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::loewner::Trace;
use crate::scalar::Real;

/// Minimax alignment of two sample sequences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentResult<T> {
    pub distance: T,
    /// Monotone pairing `(i, j)` covering both index ranges.
    pub warp: Vec<(usize, usize)>,
}

/// `max_k |a(t_k) - b(t_k)|` on a shared grid.
pub fn sup_distance<T: Real>(a: &Trace<T>, b: &Trace<T>) -> Result<T> {
    let tol = a.grid().knot_tol().max(b.grid().knot_tol());
    if a.len() != b.len() || a.times().iter().zip(b.times()).any(|(x, y)| (*x - *y).abs() > tol) {
        return Err(Error::invalid("traces are sampled on different grids"));
    }
    Ok(sup_distance_points(a.points(), b.points()))
}

pub(crate) fn sup_distance_points<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    a.iter().zip(b).fold(T::zero(), |m, (p, q)| m.max((*p - *q).norm()))
}

/// Discrete Fréchet distance of the sample sequences of `a` and `b`.
///
/// An upper bound on the infimum over increasing reparametrisations; it
/// approaches that infimum as the samples are refined.
pub fn strong_distance<T: Real>(a: &Trace<T>, b: &Trace<T>) -> AlignmentResult<T> {
    frechet(a.points(), b.points())
}

/// Discrete Fréchet distance of two point sequences with the optimal warp.
pub fn frechet<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> AlignmentResult<T> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return AlignmentResult {
            distance: T::zero(),
            warp: Vec::new(),
        };
    }
    // 0: diagonal, 1: advance a only, 2: advance b only.
    let mut from = vec![0u8; n * m];
    let mut prev = vec![T::zero(); m];
    let mut cur = vec![T::zero(); m];
    for i in 0..n {
        for j in 0..m {
            let d = (a[i] - b[j]).norm();
            let (best, dir) = match (i, j) {
                (0, 0) => (T::zero(), 0),
                (0, _) => (cur[j - 1], 2),
                (_, 0) => (prev[0], 1),
                _ => {
                    let (diag, up, left) = (prev[j - 1], prev[j], cur[j - 1]);
                    if diag <= up && diag <= left {
                        (diag, 0)
                    } else if up <= left {
                        (up, 1)
                    } else {
                        (left, 2)
                    }
                }
            };
            cur[j] = best.max(d);
            from[i * m + j] = dir;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let distance = prev[m - 1];
    let mut warp = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n - 1, m - 1);
    loop {
        warp.push((i, j));
        if i == 0 && j == 0 {
            break;
        }
        match from[i * m + j] {
            0 => {
                i -= 1;
                j -= 1;
            }
            1 => i -= 1,
            _ => j -= 1,
        }
    }
    warp.reverse();
    AlignmentResult { distance, warp }
}

/// Hausdorff distance between two finite point sets.
pub fn hausdorff<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    let one_sided = |x: &[Complex<T>], y: &[Complex<T>]| {
        x.iter().fold(T::zero(), |m, p| {
            let near = y.iter().fold(T::infinity(), |d, q| d.min((*p - *q).norm()));
            m.max(near)
        })
    };
    if a.is_empty() || b.is_empty() {
        return T::zero();
    }
    one_sided(a, b).max(one_sided(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::TimeGrid;

    fn slit(times: Vec<f64>, shift: f64) -> Trace<f64> {
        let g = TimeGrid::new(times).unwrap();
        let pts = g.times().iter().map(|&t| Complex::new(shift, 2.0 * t.sqrt())).collect();
        Trace::new(g, pts).unwrap()
    }

    #[test]
    fn translation_and_identity() {
        let g: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        let a = slit(g.clone(), 0.0);
        let b = slit(g, 0.3);
        assert_eq!(sup_distance(&a, &a).unwrap(), 0.0);
        assert!((sup_distance(&a, &b).unwrap() - 0.3).abs() < 1e-15);
        let r = strong_distance(&a, &a);
        assert_eq!(r.distance, 0.0);
        assert!(r.warp.iter().enumerate().all(|(k, &(i, j))| i == k && j == k));
    }

    #[test]
    fn reparametrisation_is_absorbed() {
        let a = slit((0..=400).map(|k| k as f64 / 400.0).collect(), 0.0);
        let b = slit((0..=400).map(|k| (k as f64 / 400.0).powi(3)).collect(), 0.0);
        let step = 2.0 * (1.0f64 / 400.0).sqrt();
        assert!(strong_distance(&a, &b).distance <= step);
        assert!(sup_distance(&a, &b).is_err());
    }

    #[test]
    fn warp_is_monotone_and_attains_distance() {
        let a: Vec<Complex<f64>> = (0..30).map(|k| Complex::new((k as f64 * 0.7).sin(), k as f64 * 0.1)).collect();
        let b: Vec<Complex<f64>> = (0..17).map(|k| Complex::new((k as f64 * 0.3).cos(), k as f64 * 0.2)).collect();
        let r = frechet(&a, &b);
        assert_eq!(r.warp.first(), Some(&(0, 0)));
        assert_eq!(r.warp.last(), Some(&(29, 16)));
        for w in r.warp.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            assert!(di <= 1 && dj <= 1 && di + dj >= 1);
        }
        let worst = r.warp.iter().fold(0.0f64, |m, &(i, j)| m.max((a[i] - b[j]).norm()));
        assert_eq!(worst, r.distance);
    }

    #[test]
    fn hausdorff_ignores_order_and_backtracking() {
        let a: Vec<Complex<f64>> = (0..=10).map(|k| Complex::new(0.0, k as f64 / 10.0)).collect();
        let mut b = a.clone();
        b.reverse();
        b.push(Complex::new(0.0, 0.5));
        assert_eq!(hausdorff(&a, &b), 0.0);
        assert!(frechet(&a, &b).distance > 0.9);
        let c: Vec<Complex<f64>> = a.iter().map(|p| p + Complex::new(0.25, 0.0)).collect();
        assert!((hausdorff(&a, &c) - 0.25).abs() < 1e-15);
    }
}
