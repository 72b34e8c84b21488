//! Elementary slit maps and their compositions.

use num_complex::Complex;

use crate::driver::{Driver, Interpolation};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Shape of one elementary map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlitKind<T> {
    /// Vertical slit of capacity `2 dt` (constant driver on the cell).
    Vertical,
    /// Straight slit generated by `s + c sqrt(t - t0)`; `rise = c sqrt(dt)`.
    Tilted { rise: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tilt<T> {
    alpha: T,
    x0: T,
    x1: T,
}

impl<T: Real> Tilt<T> {
    fn new(dt: T, rise: T) -> Self {
        let c = rise / dt.sqrt();
        let root = (T::lit(16.0) + c * c).sqrt();
        let s = c / root;
        let alpha = (T::one() + s) * T::lit(0.5);
        let d = dt.sqrt() * root;
        Tilt {
            alpha,
            x0: -(T::one() - alpha) * d,
            x1: alpha * d,
        }
    }
}

/// One elementary map `zeta -> M(zeta + rise) + jump` of an inverse Loewner chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlitElement<T> {
    kind: SlitKind<T>,
    dt: T,
    jump: T,
    tilt: Option<Tilt<T>>,
}

/// Lifts `-0.0` and tiny negative imaginary parts onto the upper side of the real line.
#[inline]
pub(crate) fn upper<T: Real>(w: Complex<T>) -> Complex<T> {
    if w.im <= T::zero() {
        Complex::new(w.re, T::zero())
    } else {
        w
    }
}

impl<T: Real> SlitElement<T> {
    /// Vertical slit over a cell of length `dt`; `dlambda` is the driver jump into the cell.
    pub fn vertical(dt: T, dlambda: T) -> Self {
        SlitElement {
            kind: SlitKind::Vertical,
            dt,
            jump: dlambda,
            tilt: None,
        }
    }

    /// Straight slit: driver jumps by `jump`, then moves by `rise` along a square-root profile.
    pub fn tilted(dt: T, jump: T, rise: T) -> Self {
        SlitElement {
            kind: SlitKind::Tilted { rise },
            dt,
            jump,
            tilt: Some(Tilt::new(dt, rise)),
        }
    }

    pub fn kind(&self) -> SlitKind<T> {
        self.kind
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Net driver change across the element.
    pub fn dlambda(&self) -> T {
        self.jump + self.rise()
    }

    fn rise(&self) -> T {
        match self.kind {
            SlitKind::Vertical => T::zero(),
            SlitKind::Tilted { rise } => rise,
        }
    }

    /// Angle of the slit with the positive real axis.
    pub fn angle(&self) -> T {
        match self.tilt {
            None => T::FRAC_PI_2(),
            Some(p) => (T::one() - p.alpha) * T::PI(),
        }
    }

    /// Applies the centred slit map only (no translations); the flag marks a branch point.
    #[inline]
    fn slit(&self, w: Complex<T>) -> (Complex<T>, bool) {
        let w = upper(w);
        match self.tilt {
            None => {
                let r = T::lit(2.0) * self.dt.sqrt();
                let at_branch = w.im == T::zero() && w.re.abs() == r;
                ((w - r).sqrt() * (w + r).sqrt(), at_branch)
            }
            Some(p) => {
                let a = w - p.x0;
                let b = w - p.x1;
                if a == Complex::new(T::zero(), T::zero()) || b == Complex::new(T::zero(), T::zero())
                {
                    return (Complex::new(T::zero(), T::zero()), true);
                }
                let l = a.ln() * p.alpha + b.ln() * (T::one() - p.alpha);
                (l.exp(), false)
            }
        }
    }

    #[inline]
    fn slit_derivative(&self, w: Complex<T>, value: Complex<T>) -> Complex<T> {
        let w = upper(w);
        match self.tilt {
            None => w / value,
            Some(p) => value * (Complex::from(p.alpha) / (w - p.x0) + Complex::from(T::one() - p.alpha) / (w - p.x1)),
        }
    }

    /// `zeta -> M(zeta + rise) + jump`.
    #[inline]
    pub fn apply(&self, zeta: Complex<T>) -> Complex<T> {
        self.slit(zeta + self.rise()).0 + self.jump
    }

    /// Centred slit map `M` and its derivative.
    pub(crate) fn slit_map(&self, w: Complex<T>) -> (Complex<T>, Complex<T>) {
        let (v, _) = self.slit(w);
        (v, self.slit_derivative(w, v))
    }

    /// Image of the slit tip, `M(rise)`.
    pub fn tip(&self) -> Complex<T> {
        self.slit(Complex::from(self.rise())).0
    }
}

/// Inverse Loewner map `f_t` as a composition of elementary maps, newest innermost.
///
/// With end values `e_0 = 0, e_k = e_{k-1} + dlambda_k`, the chain represents
/// `f(e_k + zeta) = phi_1(phi_2(... phi_k(zeta)))`. The centred map evaluates
/// `f(z + centre)` where `centre` is the driver value at the chain's end time.
#[derive(Debug, Clone, PartialEq)]
pub struct SlitMapChain<T> {
    elements: Vec<SlitElement<T>>,
    ends: Vec<T>,
    centre: T,
}

impl<T: Real> SlitMapChain<T> {
    pub fn empty() -> Self {
        SlitMapChain {
            elements: Vec::new(),
            ends: vec![T::zero()],
            centre: T::zero(),
        }
    }

    /// Chain from explicit elements; the centre defaults to the last end value.
    pub fn new(elements: Vec<SlitElement<T>>) -> Result<Self> {
        let mut ends = Vec::with_capacity(elements.len() + 1);
        ends.push(T::zero());
        for (i, e) in elements.iter().enumerate() {
            if !(e.dt > T::zero()) || !e.dt.is_finite() || !e.dlambda().is_finite() {
                return Err(Error::invalid(format!("element {i} has invalid parameters")));
            }
            ends.push(ends[i] + e.dlambda());
        }
        let centre = ends[ends.len() - 1];
        Ok(SlitMapChain {
            elements,
            ends,
            centre,
        })
    }

    /// Chain for `f_t` of `d` on its own knots up to `t`.
    pub fn from_driver(d: &Driver<T>, t: T) -> Result<Self> {
        let times = d.grid().merged(&[], t)?;
        let mut chain = Self::new(build_elements(d, times.times())?)?;
        chain.centre = d.eval(t);
        Ok(chain)
    }

    pub fn with_centre(mut self, centre: T) -> Self {
        self.centre = centre;
        self
    }

    pub fn elements(&self) -> &[SlitElement<T>] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Half-plane capacity `sum 2 dt`.
    pub fn total_capacity(&self) -> T {
        self.elements.iter().map(|e| e.dt + e.dt).sum()
    }

    pub fn centre(&self) -> T {
        self.centre
    }

    /// Discrete end value `e_k` after the first `k` elements.
    pub fn end_value(&self, k: usize) -> T {
        self.ends[k]
    }

    /// `phi_1(... phi_k(zeta))`.
    pub fn eval_prefix(&self, k: usize, zeta: Complex<T>) -> Complex<T> {
        self.elements[..k]
            .iter()
            .rev()
            .fold(zeta, |w, e| e.apply(w))
    }

    fn eval_prefix_flagged(&self, k: usize, zeta: Complex<T>) -> (Complex<T>, bool) {
        self.elements[..k]
            .iter()
            .rev()
            .fold((zeta, false), |(w, f), e| {
                let (v, hit) = e.slit(w + e.rise());
                (v + e.jump, f || hit)
            })
    }

    /// Uncentred inverse map `f_t(z)`.
    pub fn eval_uncentred(&self, z: Complex<T>) -> Complex<T> {
        let k = self.len();
        self.eval_prefix(k, z - self.ends[k])
    }

    /// Centred map `f_t(z + centre)`.
    pub fn eval(&self, z: Complex<T>) -> Complex<T> {
        self.eval_uncentred(z + self.centre)
    }

    /// Centred evaluation, flagging inputs that hit a branch point exactly.
    pub fn eval_flagged(&self, z: Complex<T>) -> (Complex<T>, bool) {
        let k = self.len();
        self.eval_prefix_flagged(k, z + self.centre - self.ends[k])
    }

    /// Centred value and complex derivative.
    pub fn eval_with_derivative(&self, z: Complex<T>) -> (Complex<T>, Complex<T>) {
        let k = self.len();
        let mut w = z + self.centre - self.ends[k];
        let mut der = Complex::new(T::one(), T::zero());
        for e in self.elements.iter().rev() {
            let arg = w + e.rise();
            let (v, _) = e.slit(arg);
            der = der * e.slit_derivative(arg, v);
            w = v + e.jump;
        }
        (w, der)
    }

    /// The first `k` elements, centred at their own end value.
    pub fn prefix(&self, k: usize) -> Self {
        SlitMapChain {
            elements: self.elements[..k].to_vec(),
            ends: self.ends[..=k].to_vec(),
            centre: self.ends[k],
        }
    }
}

/// Free-function form of [`SlitMapChain::eval`].
pub fn eval_chain<T: Real>(chain: &SlitMapChain<T>, z: Complex<T>) -> Complex<T> {
    chain.eval(z)
}

/// One elementary map per cell of `times`, which must refine `d`'s knots up to `times.last()`.
pub(crate) fn build_elements<T: Real>(d: &Driver<T>, times: &[T]) -> Result<Vec<SlitElement<T>>> {
    let grid = d.grid();
    let tol = grid.knot_tol();
    let mut out = Vec::with_capacity(times.len().saturating_sub(1));
    let mut end = T::zero();
    for w in times.windows(2) {
        let (a, b) = (w[0], w[1]);
        let k = grid.cell_of(b);
        let starts_at_knot = (a - grid.times()[k]).abs() <= tol;
        let dt = b - a;
        let el = if d.interpolation() == Interpolation::PiecewiseSqrt && starts_at_knot {
            let start = d.values()[k];
            let stop = d.eval_in_cell(k, b);
            SlitElement::tilted(dt, start - end, stop - start)
        } else {
            let u = d.eval_in_cell(k, (a + b) * T::lit(0.5));
            SlitElement::vertical(dt, u - end)
        };
        let next = end + el.dlambda();
        if !next.is_finite() || !(dt > T::zero()) {
            return Err(Error::invalid(format!(
                "driver cell [{a}, {b}] has a non-finite increment"
            )));
        }
        end = next;
        out.push(el);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::TimeGrid;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn empty_chain_is_identity() {
        let ch = SlitMapChain::<f64>::empty();
        let z = c(0.3, 0.7);
        assert_eq!(eval_chain(&ch, z), z);
    }

    #[test]
    fn single_vertical_cell_closed_form() {
        let ch = SlitMapChain::new(vec![SlitElement::vertical(0.3, 0.0)]).unwrap();
        for y in [0.01, 0.5, 3.0] {
            let v = ch.eval(c(0.0, y));
            assert!((v - c(0.0, (y * y + 1.2f64).sqrt())).norm() < 1e-14);
        }
        // Off-axis: sqrt(z^2 - 4 dt) with the upper branch.
        let z = c(-0.4, 0.2);
        let want = (z * z - 1.2).sqrt();
        let want = if want.im < 0.0 { -want } else { want };
        assert!((ch.eval(z) - want).norm() < 1e-14);
    }

    #[test]
    fn boundary_values_are_continuous() {
        let ch = SlitMapChain::new(vec![SlitElement::vertical(0.25, 0.0)]).unwrap();
        // Real points inside (-1, 1) land on the slit; outside they stay real.
        let inside = ch.eval(c(0.6, 0.0));
        assert!(inside.re.abs() < 1e-15 && (inside.im - 0.8).abs() < 1e-15);
        let neg_zero = ch.eval(c(0.6, -0.0));
        assert_eq!(inside, neg_zero);
        let outside = ch.eval(c(-2.0, 0.0));
        assert!((outside - c(-3.0f64.sqrt(), 0.0)).norm() < 1e-15);
        let (_, flagged) = ch.eval_flagged(c(1.0, 0.0));
        assert!(flagged);
    }

    #[test]
    fn zero_increment_cells_collapse() {
        let n = 37;
        let dt = 0.01;
        let ch = SlitMapChain::new(vec![SlitElement::vertical(dt, 0.0); n]).unwrap();
        let one = SlitMapChain::new(vec![SlitElement::vertical(n as f64 * dt, 0.0)]).unwrap();
        for z in [c(0.0, 0.1), c(0.3, 0.05), c(-1.2, 0.4), c(2.0, 0.0)] {
            assert!((ch.eval(z) - one.eval(z)).norm() < 1e-13);
        }
        assert!((ch.total_capacity() - 2.0 * n as f64 * dt).abs() < 1e-14);
    }

    #[test]
    fn tilted_slit_geometry() {
        // Driver c sqrt(t) on [0, dt]: tip at angle (1 - alpha) pi.
        let (dt, cc) = (0.5f64, 1.7f64);
        let e = SlitElement::tilted(dt, 0.0, cc * dt.sqrt());
        let alpha = (1.0 + cc / (16.0 + cc * cc).sqrt()) / 2.0;
        let d = dt.sqrt() * (16.0 + cc * cc).sqrt();
        let len = d * alpha.powf(alpha) * (1.0 - alpha).powf(1.0 - alpha);
        let tip = e.tip();
        assert!((tip.norm() - len).abs() < 1e-13);
        assert!((tip.arg() - (1.0 - alpha) * std::f64::consts::PI).abs() < 1e-13);
        // Hydrodynamic normalisation: f(z) = z - 2 dt / z + O(z^-2).
        let gap = |r: f64| {
            let z = c(0.6 * r, 0.8 * r);
            ((e.apply(z - cc * dt.sqrt()) - z) * z + 2.0 * dt).norm()
        };
        assert!(gap(1e3) < 0.05);
        assert!(gap(1e4) < gap(1e3) / 5.0);
        // Zero rise reduces to the vertical map.
        let flat = SlitElement::tilted(dt, 0.0, 0.0);
        let vert = SlitElement::vertical(dt, 0.0);
        let w = c(0.2, 0.3);
        assert!((flat.apply(w) - vert.apply(w)).norm() < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let d = Driver::from_fn(
            TimeGrid::uniform(20, 1.0).unwrap(),
            Interpolation::PiecewiseLinear,
            |t: f64| (3.0 * t).sin(),
        );
        let ch = SlitMapChain::from_driver(&d, 0.8).unwrap();
        let z = c(0.1, 0.3);
        let (v, der) = ch.eval_with_derivative(z);
        let h = 1e-6;
        let fd = (ch.eval(z + h) - ch.eval(z - h)) / (2.0 * h);
        assert!((v - ch.eval(z)).norm() < 1e-15);
        assert!((der - fd).norm() < 1e-6 * der.norm());
    }
}
