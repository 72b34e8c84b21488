//! Raster test of mutual hull containment after dilation.

use std::collections::VecDeque;

use num_complex::Complex;
use serde::Serialize;

use super::{hcap, RawCurve};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest raster the check will allocate.
const MAX_CELLS: f64 = 6.0e7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuityReport {
    /// `K1` lies in the filled `delta`-dilation of `K2`.
    pub first_in_second: bool,
    /// `K2` lies in the filled `delta`-dilation of `K1`.
    pub second_in_first: bool,
    pub contained_mutually: bool,
    pub hcap_first: f64,
    pub hcap_second: f64,
    pub hcap_gap: f64,
    /// Raster cell size used.
    pub resolution: f64,
}

struct Raster {
    x0: f64,
    y0: f64,
    h: f64,
    w: usize,
    rows: usize,
}

impl Raster {
    fn centre(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x0 + (i as f64 + 0.5) * self.h, self.y0 + (j as f64 + 0.5) * self.h)
    }

    fn index(&self, x: f64) -> isize {
        ((x - self.x0) / self.h).floor() as isize
    }

    fn row(&self, y: f64) -> isize {
        ((y - self.y0) / self.h).floor() as isize
    }

    /// Marks cells whose centre lies within `r` of the polyline.
    fn mark(&self, pts: &[(f64, f64)], r: f64, out: &mut [bool]) {
        for s in pts.windows(2) {
            let (a, b) = (s[0], s[1]);
            let i0 = self.index(a.0.min(b.0) - r).max(0) as usize;
            let i1 = (self.index(a.0.max(b.0) + r).max(0) as usize).min(self.w - 1);
            let j0 = self.row(a.1.min(b.1) - r).max(0) as usize;
            let j1 = (self.row(a.1.max(b.1) + r).max(0) as usize).min(self.rows - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let p = self.centre(i, j);
                    if dist_to_segment(p, a, b) <= r {
                        out[j * self.w + i] = true;
                    }
                }
            }
        }
    }

    /// Complement of the component of the unmarked cells reaching the top or the sides.
    fn filled(&self, blocked: &[bool]) -> Vec<bool> {
        let mut outside = vec![false; blocked.len()];
        let mut queue = VecDeque::new();
        let seed = |i: usize, j: usize, outside: &mut Vec<bool>, q: &mut VecDeque<(usize, usize)>| {
            let k = j * self.w + i;
            if !blocked[k] && !outside[k] {
                outside[k] = true;
                q.push_back((i, j));
            }
        };
        for i in 0..self.w {
            seed(i, self.rows - 1, &mut outside, &mut queue);
        }
        for j in 0..self.rows {
            seed(0, j, &mut outside, &mut queue);
            seed(self.w - 1, j, &mut outside, &mut queue);
        }
        while let Some((i, j)) = queue.pop_front() {
            if i > 0 {
                seed(i - 1, j, &mut outside, &mut queue);
            }
            if i + 1 < self.w {
                seed(i + 1, j, &mut outside, &mut queue);
            }
            if j > 0 {
                seed(i, j - 1, &mut outside, &mut queue);
            }
            if j + 1 < self.rows {
                seed(i, j + 1, &mut outside, &mut queue);
            }
        }
        outside.iter().map(|o| !o).collect()
    }
}

fn dist_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let s = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + s * dx - p.0, a.1 + s * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

fn to_pairs<T: Real>(c: &RawCurve<T>) -> Vec<(f64, f64)> {
    c.points().iter().map(|p: &Complex<T>| (p.re.as_f64(), p.im.as_f64())).collect()
}

/// Checks `K1 ⊂ fill(K2^delta)` and `K2 ⊂ fill(K1^delta)` on a raster of cell size
/// `delta / 8`, and reports both capacities.
pub fn hcap_continuity_check<T: Real>(
    c1: &RawCurve<T>,
    c2: &RawCurve<T>,
    delta: T,
) -> Result<ContinuityReport> {
    let delta = delta.as_f64();
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid("delta must be positive"));
    }
    let (p1, p2) = (to_pairs(c1), to_pairs(c2));
    let (mut xmin, mut xmax, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(x, y) in p1.iter().chain(&p2) {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymax = ymax.max(y);
    }
    let pad = 2.0 * delta;
    let (width, height) = (xmax - xmin + 2.0 * pad, ymax + pad);
    let mut h = delta / 8.0;
    if width * height / (h * h) > MAX_CELLS {
        h = (width * height / MAX_CELLS).sqrt();
    }
    if h > delta {
        return Err(Error::OutOfRange(format!(
            "raster resolution {h} coarser than delta {delta}"
        )));
    }
    let raster = Raster {
        x0: xmin - pad,
        y0: 0.0,
        h,
        w: (width / h).ceil() as usize + 1,
        rows: (height / h).ceil() as usize + 1,
    };
    let cells = raster.w * raster.rows;
    let touch = h * std::f64::consts::FRAC_1_SQRT_2;
    let contained = |inner: &[(f64, f64)], outer: &[(f64, f64)]| {
        let mut dil = vec![false; cells];
        raster.mark(outer, delta, &mut dil);
        let fill = raster.filled(&dil);
        let mut curve = vec![false; cells];
        raster.mark(inner, touch, &mut curve);
        curve.iter().zip(&fill).all(|(&c, &f)| !c || f)
    };
    let first_in_second = contained(&p1, &p2);
    let second_in_first = contained(&p2, &p1);
    let (a, b) = (hcap(c1)?.as_f64(), hcap(c2)?.as_f64());
    Ok(ContinuityReport {
        first_in_second,
        second_in_first,
        contained_mutually: first_in_second && second_in_first,
        hcap_first: a,
        hcap_second: b,
        hcap_gap: (a - b).abs(),
        resolution: h,
    })
}
