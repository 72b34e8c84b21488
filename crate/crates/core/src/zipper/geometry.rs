use std::collections::HashMap;

use num_complex::Complex;

use crate::scalar::Real;

fn orient<T: Real>(a: Complex<T>, b: Complex<T>, c: Complex<T>) -> T {
    (b - a).re * (c - a).im - (b - a).im * (c - a).re
}

fn on_segment<T: Real>(a: Complex<T>, b: Complex<T>, p: Complex<T>) -> bool {
    p.re >= a.re.min(b.re) && p.re <= a.re.max(b.re) && p.im >= a.im.min(b.im) && p.im <= a.im.max(b.im)
}

/// Closed segments `ab` and `cd` share a point.
pub(crate) fn segments_meet<T: Real>(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    let z = T::zero();
    if ((o1 > z && o2 < z) || (o1 < z && o2 > z)) && ((o3 > z && o4 < z) || (o3 < z && o4 > z)) {
        return true;
    }
    (o1 == z && on_segment(a, b, c))
        || (o2 == z && on_segment(a, b, d))
        || (o3 == z && on_segment(c, d, a))
        || (o4 == z && on_segment(c, d, b))
}

/// Index of the first vertex whose incoming segment meets an earlier non-adjacent one.
pub(crate) fn first_crossing<T: Real>(pts: &[Complex<T>]) -> Option<usize> {
    let n = pts.len();
    if n < 4 {
        return None;
    }
    let total: T = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in pts {
        lo = Complex::new(lo.re.min(p.re), lo.im.min(p.im));
        hi = Complex::new(hi.re.max(p.re), hi.im.max(p.im));
    }
    let diag = (hi - lo).norm();
    let cell = (total / T::from_count(n - 1)).max(diag / T::lit(2048.0)).max(T::min_positive_value());
    let key = |x: T| (x / cell).floor().to_i64().unwrap_or(0);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for i in 1..n {
        let (a, b) = (pts[i - 1], pts[i]);
        let (x0, x1) = (key(a.re.min(b.re) - lo.re), key(a.re.max(b.re) - lo.re));
        let (y0, y1) = (key(a.im.min(b.im) - lo.im), key(a.im.max(b.im) - lo.im));
        for gx in x0..=x1 {
            for gy in y0..=y1 {
                let bucket = buckets.entry((gx, gy)).or_default();
                for &j in bucket.iter() {
                    // Segment j runs from pts[j-1] to pts[j]; j == i-1 shares a vertex.
                    if j + 1 < i && segments_meet(pts[j - 1], pts[j], a, b) {
                        return Some(i);
                    }
                }
            }
        }
        for gx in x0..=x1 {
            for gy in y0..=y1 {
                buckets.entry((gx, gy)).or_default().push(i);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn crossing_and_touching() {
        assert!(segments_meet(c(0., 0.), c(1., 1.), c(0., 1.), c(1., 0.)));
        assert!(segments_meet(c(0., 0.), c(1., 0.), c(0.5, 0.), c(0.5, 1.)));
        assert!(!segments_meet(c(0., 0.), c(1., 0.), c(0., 1.), c(1., 1.)));
        let zig = [c(0., 0.), c(0., 1.), c(1., 1.), c(1., 2.), c(0.5, 0.5)];
        assert_eq!(first_crossing(&zig), Some(4));
        let simple = [c(0., 0.), c(0., 1.), c(1., 1.), c(1., 2.), c(2., 2.)];
        assert_eq!(first_crossing(&simple), None);
    }

    #[test]
    fn matches_brute_force() {
        let mut state = 7u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let pts: Vec<Complex<f64>> = (0..12).map(|_| c(rnd(), rnd())).collect();
            let mut brute = None;
            'outer: for i in 1..pts.len() {
                for j in 1..i - 1 {
                    if segments_meet(pts[j - 1], pts[j], pts[i - 1], pts[i]) {
                        brute = Some(i);
                        break 'outer;
                    }
                }
            }
            assert_eq!(first_crossing(&pts), brute);
        }
    }
}
