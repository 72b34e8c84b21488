//! Curve-to-driver inversion by successive elementary slit maps.

mod fill;
mod geometry;

use num_complex::Complex;
use rayon::prelude::*;

pub use fill::{hcap_continuity_check, ContinuityReport};

use crate::driver::{Driver, Interpolation, TimeGrid};
use crate::error::{Error, Result};
use crate::loewner::{SlitElement, Trace};
use crate::scalar::Real;

/// A polyline starting on the real line and running in the closed upper half-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCurve<T> {
    points: Vec<Complex<T>>,
    simple_flag: bool,
}

impl<T: Real> RawCurve<T> {
    /// `simple_flag` asserts the polyline is simple and skips the crossing scan.
    pub fn new(points: Vec<Complex<T>>, simple_flag: bool) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("curve needs at least two points"));
        }
        if let Some(i) = points.iter().position(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::invalid(format!("non-finite curve point {i}")));
        }
        if points[0].im != T::zero() {
            return Err(Error::invalid("curve must start on the real line"));
        }
        if let Some(i) = points.iter().position(|p| p.im < T::zero()) {
            return Err(Error::invalid(format!("curve point {i} lies below the real line")));
        }
        if let Some(i) = points.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("curve points {i} and {} coincide", i + 1)));
        }
        Ok(RawCurve {
            points,
            simple_flag,
        })
    }

    pub fn from_trace(tr: &Trace<T>) -> Result<Self> {
        let mut pts: Vec<Complex<T>> = Vec::with_capacity(tr.len());
        for &p in tr.points() {
            if pts.last() != Some(&p) {
                pts.push(p);
            }
        }
        Self::new(pts, false)
    }

    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn simple_flag(&self) -> bool {
        self.simple_flag
    }

    pub fn scaled(&self, r: T) -> Result<Self> {
        Self::new(self.points.iter().map(|&p| p * r).collect(), self.simple_flag)
    }

    /// Splits every segment into pieces no longer than `max_len`.
    pub fn densified(&self, max_len: T) -> Result<Self> {
        if !(max_len > T::zero()) {
            return Err(Error::invalid("segment length must be positive"));
        }
        let mut out = vec![self.points[0]];
        for w in self.points.windows(2) {
            let len = (w[1] - w[0]).norm();
            let pieces = (len / max_len).ceil().to_usize().unwrap_or(1).max(1);
            for m in 1..=pieces {
                let s = T::from_count(m) / T::from_count(pieces);
                let p = if m == pieces { w[1] } else { w[0] + (w[1] - w[0]) * s };
                out.push(p);
            }
        }
        Self::new(out, self.simple_flag)
    }

    /// Largest distance from the origin.
    pub fn radius(&self) -> T {
        self.points.iter().fold(T::zero(), |m, p| m.max(p.norm()))
    }
}

/// Elementary map used per vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZipMethod {
    /// Vertical slit at the real part of the vertex image (piecewise-constant driver).
    #[default]
    Vertical,
    /// Straight slit from the previous tip image (piecewise-sqrt driver).
    Tilted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZipOptions<T> {
    pub method: ZipMethod,
    /// Stop once the accumulated capacity time reaches this value.
    pub max_capacity: Option<T>,
    /// Give vertices whose capacity increment is below time resolution
    /// (`256 eps` relative) a zero increment instead of a knot, and accept
    /// images within the tolerance of the real line (deep fjords and valleys).
    pub skip_degenerate: bool,
}

impl<T> Default for ZipOptions<T> {
    fn default() -> Self {
        ZipOptions {
            method: ZipMethod::Vertical,
            max_capacity: None,
            skip_degenerate: false,
        }
    }
}

/// Output of the zipper.
#[derive(Debug, Clone, PartialEq)]
pub struct ZipResult<T> {
    /// Driver on the distinct values of `capacity_times`.
    pub driver: Driver<T>,
    /// Capacity time of every processed vertex, starting with 0.
    pub capacity_times: Vec<T>,
    /// Number of vertices processed (including the start point).
    pub vertices: usize,
    /// Vertices given a zero increment under `skip_degenerate`.
    pub skipped: Vec<usize>,
}

impl<T: Real> ZipResult<T> {
    pub fn hcap(&self) -> T {
        T::lit(2.0) * self.capacity_times[self.capacity_times.len() - 1]
    }
}

/// Vertical slit map `u + sqrt((z - u)^2 + 4 dt)` on the upper branch.
#[inline]
fn unzip_vertical<T: Real>(z: Complex<T>, u: T, dt: T) -> Complex<T> {
    let zeta = z - u;
    if zeta.norm_sqr() == T::zero() {
        return Complex::new(u, T::zero());
    }
    let w = zeta * (Complex::from(T::one()) + Complex::from(T::lit(4.0) * dt) / (zeta * zeta)).sqrt();
    w + u
}

/// Solves `M(w) = z` for the tilted slit map by damped Newton steps on `log M`.
fn unzip_tilted<T: Real>(el: &SlitElement<T>, z: Complex<T>) -> Complex<T> {
    let tip = el.tip();
    let mut w = unzip_vertical(z - tip.re, T::zero(), el.dt()) + el.dlambda();
    if w.im < T::zero() {
        w.im = T::zero();
    }
    let target = z.ln();
    let tol = T::epsilon() * T::lit(64.0) * (T::one() + z.norm());
    for _ in 0..200 {
        let (m, dm) = el.slit_map(w);
        if m.norm_sqr() == T::zero() || dm.norm_sqr() == T::zero() {
            break;
        }
        let r = m.ln() - target;
        let r = Complex::new(r.re, remainder_pi(r.im));
        let step = r * m / dm;
        let mut lambda = T::one();
        let mut next = w - step;
        while next.im < T::zero() && lambda > T::lit(1e-6) {
            lambda = lambda * T::lit(0.5);
            next = w - step * lambda;
        }
        if next.im < T::zero() {
            next.im = T::zero();
        }
        let moved = (next - w).norm();
        w = next;
        if moved <= tol {
            break;
        }
    }
    w
}

/// Tilted element whose tip image is `rel`, with no jump.
fn tilted_for<T: Real>(rel: Complex<T>) -> SlitElement<T> {
    let alpha = T::one() - rel.arg() / T::PI();
    let s = alpha + alpha - T::one();
    let c = T::lit(4.0) * s / (T::one() - s * s).max(T::min_positive_value()).sqrt();
    let unit = SlitElement::tilted(T::one(), T::zero(), c).tip().norm();
    let dt = (rel.norm() / unit).powi(2);
    SlitElement::tilted(dt, T::zero(), c * dt.sqrt())
}

fn remainder_pi<T: Real>(x: T) -> T {
    let two_pi = T::PI() + T::PI();
    x - two_pi * (x / two_pi).round()
}

/// Zips `c` with default options, returning the driver and capacity times.
pub fn zip_curve<T: Real>(c: &RawCurve<T>) -> Result<(Driver<T>, Vec<T>)> {
    let r = zip_curve_with(c, &ZipOptions::default())?;
    Ok((r.driver, r.capacity_times))
}

pub fn zip_curve_with<T: Real>(c: &RawCurve<T>, opts: &ZipOptions<T>) -> Result<ZipResult<T>> {
    if !c.simple_flag {
        if let Some(i) = geometry::first_crossing(c.points()) {
            return Err(Error::SelfIntersection { index: i });
        }
    }
    let origin = c.points[0].re;
    let scale = c.radius().max(T::min_positive_value());
    let tol = T::epsilon().powf(T::lit(0.75)) * scale;
    let mut pts: Vec<Complex<T>> = c.points[1..].iter().map(|&p| p - origin).collect();
    let mut times = vec![T::zero()];
    let mut knots = vec![T::zero()];
    let mut values = vec![T::zero()];
    let mut skipped = Vec::new();
    let mut tip = T::zero();
    let mut total = T::zero();
    let n = pts.len();
    for j in 0..n {
        let w = pts[j];
        if w.im <= tol {
            let original = c.points[j + 1];
            if opts.skip_degenerate && w.im >= -tol && original.im > tol {
                skipped.push(j + 1);
                times.push(total);
                continue;
            }
            return Err(if w.im >= -tol && original.im <= tol {
                Error::PrematureTip { index: j + 1 }
            } else {
                Error::SelfIntersection { index: j + 1 }
            });
        }
        if opts.skip_degenerate && ZipMethod::Vertical == opts.method && w.im * w.im / T::lit(4.0) <= T::epsilon() * T::lit(256.0) * total.max(T::one()) {
            skipped.push(j + 1);
            times.push(total);
            continue;
        }
        let rest = &mut pts[j + 1..];
        let (dt, value) = match opts.method {
            ZipMethod::Vertical => {
                let u = w.re;
                let dt = w.im * w.im / T::lit(4.0);
                apply_all(rest, |z| unzip_vertical(z, u, dt));
                (dt, u)
            }
            ZipMethod::Tilted => {
                let el = tilted_for(w - tip);
                let base = tip;
                apply_all(rest, |z| unzip_tilted(&el, z - base) + base);
                (el.dt(), tip + el.dlambda())
            }
        };
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::Numerical(format!("degenerate zipper cell at vertex {}", j + 1)));
        }
        total += dt;
        tip = value;
        times.push(total);
        knots.push(total);
        values.push(value);
        if opts.max_capacity.is_some_and(|m| total >= m) {
            break;
        }
    }
    let interpolation = match opts.method {
        ZipMethod::Vertical => Interpolation::PiecewiseConstant,
        ZipMethod::Tilted => Interpolation::PiecewiseSqrt,
    };
    let vertices = times.len();
    let grid = TimeGrid::new(knots)?;
    Ok(ZipResult {
        driver: Driver::new(grid, values, interpolation)?,
        capacity_times: times,
        vertices,
        skipped,
    })
}

fn apply_all<T: Real, F: Fn(Complex<T>) -> Complex<T> + Sync>(pts: &mut [Complex<T>], f: F) {
    const PAR: usize = 4096;
    if pts.len() >= PAR {
        pts.par_chunks_mut(1024).for_each(|ch| ch.iter_mut().for_each(|p| *p = f(*p)));
    } else {
        pts.iter_mut().for_each(|p| *p = f(*p));
    }
}

/// Half-plane capacity `sum 2 dt` of the zipped curve.
pub fn hcap<T: Real>(c: &RawCurve<T>) -> Result<T> {
    Ok(zip_curve_with(c, &ZipOptions::default())?.hcap())
}

/// Resamples `c` at the points where its capacity time equals each grid time.
///
/// Within segment `j` the capacity of `p_{j-1} + s (p_j - p_{j-1})` is
/// `T_{j-1} + Im(g(q))^2 / 4` with `g` the composed maps of the earlier vertices,
/// which is exact for vertical segments; `s` is found by safeguarded secant steps.
pub fn reparam_by_hcap<T: Real>(c: &RawCurve<T>, out_grid: &TimeGrid<T>) -> Result<Trace<T>> {
    let zr = zip_curve_with(c, &ZipOptions::default())?;
    let caps = &zr.capacity_times;
    let t_total = caps[caps.len() - 1];
    let tol_t = out_grid.knot_tol().max(t_total * T::epsilon() * T::lit(64.0));
    if out_grid.t_end() > t_total + tol_t {
        return Err(Error::OutOfRange(format!(
            "requested time {} beyond the curve's capacity time {t_total}",
            out_grid.t_end()
        )));
    }
    let origin = c.points[0].re;
    let pts: Vec<Complex<T>> = c.points.iter().map(|&p| p - origin).collect();
    // Cell j spans (caps[j], caps[j + 1]] with vertical slit at values[j + 1].
    let cells: Vec<(T, T)> = zr.driver.values()[1..]
        .iter()
        .zip(caps.windows(2))
        .map(|(&u, w)| (u, w[1] - w[0]))
        .collect();
    let points: Vec<Complex<T>> = out_grid
        .times()
        .par_iter()
        .map(|&t| {
            if t <= T::zero() {
                return Complex::new(origin, T::zero());
            }
            let t = t.min(t_total);
            let j = caps.partition_point(|&x| x < t).clamp(1, caps.len() - 1);
            if (caps[j] - t).abs() <= tol_t {
                return pts[j] + origin;
            }
            let (a, b) = (pts[j - 1], pts[j]);
            let prior = &cells[..j - 1];
            let cap_at = |s: T| {
                let mut z = a + (b - a) * s;
                for &(u, dt) in prior {
                    z = unzip_vertical(z, u, dt);
                }
                caps[j - 1] + z.im.max(T::zero()) * z.im.max(T::zero()) / T::lit(4.0)
            };
            let target = t;
            let (mut lo, mut hi) = (T::zero(), T::one());
            let (mut f_lo, mut f_hi) = (caps[j - 1] - target, caps[j] - target);
            let mut s = (target - caps[j - 1]) / (caps[j] - caps[j - 1]);
            for _ in 0..60 {
                let f = cap_at(s) - target;
                if f.abs() <= tol_t {
                    break;
                }
                if f < T::zero() {
                    lo = s;
                    f_lo = f;
                } else {
                    hi = s;
                    f_hi = f;
                }
                let secant = lo - f_lo * (hi - lo) / (f_hi - f_lo);
                let mid = (lo + hi) * T::lit(0.5);
                s = if secant > lo && secant < hi && (hi - lo) > T::lit(1e-3) {
                    // Blend towards the midpoint to avoid one-sided stalls.
                    (secant * T::lit(3.0) + mid) / T::lit(4.0)
                } else {
                    mid
                };
                if hi - lo <= T::epsilon() * T::lit(4.0) {
                    break;
                }
            }
            a + (b - a) * s + origin
        })
        .collect();
    Trace::new(out_grid.clone(), points)
}

/// Cuts the zipped driver and the vertex list at capacity time `t_max`.
pub fn truncate_at_capacity<T: Real>(
    c: &RawCurve<T>,
    zr: &ZipResult<T>,
    t_max: T,
) -> Result<(RawCurve<T>, Driver<T>)> {
    let caps = &zr.capacity_times;
    let j = caps.partition_point(|&x| x < t_max).min(caps.len() - 1);
    let curve = RawCurve::new(c.points[..=j].to_vec(), c.simple_flag)?;
    let driver = zr.driver.truncated(t_max.min(zr.driver.t_end()))?;
    Ok((curve, driver))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loewner::compute_trace;

    fn slit(h: f64, n: usize) -> RawCurve<f64> {
        RawCurve::new(
            (0..=n).map(|k| Complex::new(0.0, h * k as f64 / n as f64)).collect(),
            true,
        )
        .unwrap()
    }

    #[test]
    fn vertical_segment_gives_zero_driver() {
        let (d, caps) = zip_curve(&slit(2.0, 10)).unwrap();
        assert!(d.values().iter().all(|v| v.abs() < 1e-12));
        assert!((caps.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_curve_is_one_cell() {
        let c = RawCurve::new(vec![Complex::new(0.0f64, 0.0), Complex::new(0.0, 0.3)], false).unwrap();
        let (d, caps) = zip_curve(&c).unwrap();
        assert_eq!(caps.len(), 2);
        assert!((caps[1] - 0.09 / 4.0).abs() < 1e-15);
        assert_eq!(d.values()[1], 0.0);
    }

    #[test]
    fn hcap_closed_form_and_scaling() {
        for h in [0.5, 2.0, 3.0] {
            assert!((hcap(&slit(h, 7)).unwrap() - h * h / 2.0).abs() < 1e-12 * h * h);
        }
        let c = RawCurve::new(
            vec![Complex::new(0.0, 0.0), Complex::new(0.2, 0.5), Complex::new(-0.1, 0.9), Complex::new(0.3, 1.2)],
            false,
        )
        .unwrap();
        let base = hcap(&c).unwrap();
        for r in [0.5f64, 3.0] {
            let scaled = hcap(&c.scaled(r).unwrap()).unwrap();
            assert!((scaled - r * r * base).abs() < 1e-12 * scaled);
        }
    }

    #[test]
    fn round_trip_is_exact_for_constant_drivers() {
        let g = TimeGrid::uniform(32, 1.0).unwrap();
        let vals: Vec<f64> = (0..33).map(|k| if k == 0 { 0.0 } else { 0.3 * (k as f64 * 0.4).sin() }).collect();
        let d = Driver::new(g.clone(), vals, Interpolation::PiecewiseConstant).unwrap();
        // Tip errors are amplified by the square-root behaviour of the zipper near the tip.
        let tr = compute_trace(&d, &g, Some(1e-6)).unwrap();
        let (z, caps) = zip_curve(&RawCurve::from_trace(&tr).unwrap()).unwrap();
        for k in 0..33 {
            assert!((caps[k] - g.times()[k]).abs() < 1e-9);
            assert!((z.values()[k] - d.values()[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn tilted_zipper_inverts_one_tilted_cell() {
        for c in [-2.0f64, 0.4, 1.1, 3.0] {
            let d = Driver::new(TimeGrid::new(vec![0.0, 0.7]).unwrap(), vec![0.0, c], Interpolation::PiecewiseSqrt)
                .unwrap();
            let tr = compute_trace(&d, &TimeGrid::new(vec![0.0, 0.7]).unwrap(), Some(1e-7)).unwrap();
            let curve = RawCurve::new(tr.points().to_vec(), false).unwrap();
            let opts = ZipOptions {
                method: ZipMethod::Tilted,
                ..ZipOptions::default()
            };
            let zr = zip_curve_with(&curve, &opts).unwrap();
            assert!((zr.capacity_times[1] - 0.7).abs() < 1e-12, "c={c}: {:?}", zr.capacity_times);
            assert!((zr.driver.values()[1] - c).abs() < 1e-12);
        }
    }

    #[test]
    fn both_zippers_recover_a_smooth_driver() {
        let g = TimeGrid::uniform(512, 1.0).unwrap();
        let d = Driver::from_fn(g.clone(), Interpolation::PiecewiseLinear, |t: f64| 0.8 * (3.0 * t).sin());
        let tr = compute_trace(&d, &g, Some(1e-6)).unwrap();
        let curve = RawCurve::from_trace(&tr).unwrap();
        for method in [ZipMethod::Vertical, ZipMethod::Tilted] {
            let zr = zip_curve_with(&curve, &ZipOptions { method, ..ZipOptions::default() }).unwrap();
            let err = zr
                .capacity_times
                .iter()
                .zip(zr.driver.values())
                .fold(0.0f64, |m, (&t, &v)| m.max((v - d.eval(t.min(1.0))).abs()));
            assert!(err < 1e-2, "{method:?}: {err}");
            assert!((zr.hcap() - 2.0).abs() < 1e-3, "{method:?}: {}", zr.hcap());
        }
    }

    #[test]
    fn detects_crossings_and_touching() {
        let cross = RawCurve::new(
            vec![
                Complex::new(0.0, 0.0),
                Complex::new(0.0, 1.0),
                Complex::new(0.5, 0.5),
                Complex::new(-0.5, 0.5),
            ],
            false,
        )
        .unwrap();
        assert!(matches!(zip_curve(&cross), Err(Error::SelfIntersection { .. })));
        let touch = RawCurve::new(
            vec![Complex::new(0.0, 0.0), Complex::new(0.0, 1.0), Complex::new(1.0, 0.0)],
            false,
        )
        .unwrap();
        assert!(matches!(zip_curve(&touch), Err(Error::PrematureTip { index: 2 })));
    }

    #[test]
    fn reparam_of_uniform_slit_is_two_i_sqrt_t() {
        let c = slit(2.0, 200);
        let out = TimeGrid::uniform(50, 1.0).unwrap();
        let tr = reparam_by_hcap(&c, &out).unwrap();
        for (&t, p) in tr.times().iter().zip(tr.points()) {
            assert!((p - Complex::new(0.0, 2.0 * t.sqrt())).norm() < 1e-9, "t={t}: {p}");
        }
        // Idempotent: reparametrising the output again changes nothing.
        let again = reparam_by_hcap(&RawCurve::from_trace(&tr).unwrap(), &out).unwrap();
        for (a, b) in tr.points().iter().zip(again.points()) {
            assert!((a - b).norm() < 1e-9);
        }
        assert!(reparam_by_hcap(&c, &TimeGrid::uniform(4, 1.5).unwrap()).is_err());
    }
}
