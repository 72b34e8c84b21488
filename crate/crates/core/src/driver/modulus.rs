//! Empirical uniform-continuity modulus of the inverse maps `f_t` on a box.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Driver;
use crate::error::{Error, Result};
use crate::loewner::{build_elements, SlitMapChain};
use crate::scalar::Real;

/// Axis-aligned rectangle in the closed upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBox<T> {
    pub re_min: T,
    pub re_max: T,
    pub im_min: T,
    pub im_max: T,
}

impl<T: Real> ProbeBox<T> {
    pub fn new(re_min: T, re_max: T, im_min: T, im_max: T) -> Result<Self> {
        let b = ProbeBox {
            re_min,
            re_max,
            im_min,
            im_max,
        };
        if !(re_min < re_max) || !(im_min < im_max) || im_min < T::zero() {
            return Err(Error::invalid("probe box must be a nondegenerate rectangle in the closed upper half-plane"));
        }
        if ![re_min, re_max, im_min, im_max].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("probe box must be bounded"));
        }
        Ok(b)
    }

    /// `[min d - margin, max d + margin] x [0, margin]`.
    pub fn around(d: &Driver<T>, margin: T) -> Result<Self> {
        Self::new(d.min_value() - margin, d.max_value() + margin, T::zero(), margin)
    }

    pub fn diameter(&self) -> T {
        (self.re_max - self.re_min).hypot(self.im_max - self.im_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModulusConfig {
    pub nx: usize,
    pub ny: usize,
    /// Use every `time_stride`-th knot as a probe time.
    pub time_stride: usize,
}

impl Default for ModulusConfig {
    fn default() -> Self {
        ModulusConfig {
            nx: 64,
            ny: 64,
            time_stride: 1,
        }
    }
}

/// Cached lattice images under `f_t` at the probe times; queried for any `epsilon`.
#[derive(Debug, Clone)]
pub struct DeltaModulus<T> {
    probe: ProbeBox<T>,
    nx: usize,
    ny: usize,
    hx: T,
    hy: T,
    images: Vec<Vec<Complex<T>>>,
    image_diameter: T,
}

impl<T: Real> DeltaModulus<T> {
    pub fn new(d: &Driver<T>, probe: ProbeBox<T>, cfg: &ModulusConfig) -> Result<Self> {
        if cfg.nx < 2 || cfg.ny < 2 || cfg.time_stride == 0 {
            return Err(Error::invalid("probe budget must be at least 2 x 2 points and one time"));
        }
        let (nx, ny) = (cfg.nx, cfg.ny);
        let hx = (probe.re_max - probe.re_min) / T::from_count(nx - 1);
        let hy = (probe.im_max - probe.im_min) / T::from_count(ny - 1);
        let lattice: Vec<Complex<T>> = (0..ny)
            .flat_map(|j| {
                (0..nx).map(move |i| {
                    Complex::new(
                        probe.re_min + hx * T::from_count(i),
                        probe.im_min + hy * T::from_count(j),
                    )
                })
            })
            .collect();
        let chain = SlitMapChain::new(build_elements(d, d.grid().times())?)?;
        let mut ks: Vec<usize> = (1..=chain.len()).step_by(cfg.time_stride).collect();
        if ks.last() != Some(&chain.len()) {
            ks.push(chain.len());
        }
        let images: Vec<Vec<Complex<T>>> = ks
            .par_iter()
            .map(|&k| {
                let e = chain.end_value(k);
                lattice.iter().map(|&z| chain.eval_prefix(k, z - e)).collect()
            })
            .collect();
        let mut image_diameter = probe.diameter();
        for img in &images {
            let (mut lo, mut hi) = (img[0], img[0]);
            for p in img {
                lo = Complex::new(lo.re.min(p.re), lo.im.min(p.im));
                hi = Complex::new(hi.re.max(p.re), hi.im.max(p.im));
            }
            image_diameter = image_diameter.max((hi - lo).norm());
        }
        Ok(DeltaModulus {
            probe,
            nx,
            ny,
            hx,
            hy,
            images,
            image_diameter,
        })
    }

    pub fn probe(&self) -> &ProbeBox<T> {
        &self.probe
    }

    /// Upper bound on the diameter of every probed image set (including time 0).
    pub fn image_diameter(&self) -> T {
        self.image_diameter
    }

    /// Largest probed separation `r` such that every lattice pair at distance `<= r`
    /// has images within `epsilon` at every probe time; 0 when even neighbours fail.
    pub fn delta(&self, epsilon: T) -> Result<T> {
        if !(epsilon > T::zero()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if epsilon >= self.image_diameter {
            return Ok(self.probe.diameter());
        }
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let mut offsets: Vec<(T, isize, isize)> = Vec::new();
        for dj in 0..ny {
            for di in -(nx - 1)..nx {
                if dj == 0 && di <= 0 {
                    continue;
                }
                let r = (self.hx * T::lit(di as f64)).hypot(self.hy * T::lit(dj as f64));
                offsets.push((r, di, dj));
            }
        }
        offsets.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then((a.1, a.2).cmp(&(b.1, b.2))));
        // The identity at time 0 bounds the answer by epsilon itself.
        let mut best = T::zero();
        let mut idx = 0;
        while idx < offsets.len() {
            let r = offsets[idx].0;
            let mut end = idx;
            while end < offsets.len() && offsets[end].0 == r {
                end += 1;
            }
            let ok = r <= epsilon
                && offsets[idx..end]
                    .iter()
                    .all(|&(_, di, dj)| self.offset_ok(di, dj, epsilon));
            if !ok {
                break;
            }
            best = r;
            idx = end;
        }
        Ok(best)
    }

    fn offset_ok(&self, di: isize, dj: isize, epsilon: T) -> bool {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let i_lo = 0.max(-di);
        let i_hi = nx.min(nx - di);
        let e2 = epsilon * epsilon;
        self.images.iter().all(|img| {
            (0..ny - dj).all(|j| {
                let row_a = (j * nx) as usize;
                let row_b = ((j + dj) * nx) as usize;
                (i_lo..i_hi).all(|i| {
                    let a = img[row_a + i as usize];
                    let b = img[row_b + (i + di) as usize];
                    (a - b).norm_sqr() <= e2
                })
            })
        })
    }
}

/// One-shot [`DeltaModulus::delta`] with the default probe density.
pub fn delta_modulus<T: Real>(d: &Driver<T>, epsilon: T, probe: ProbeBox<T>) -> Result<T> {
    DeltaModulus::new(d, probe, &ModulusConfig::default())?.delta(epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{Interpolation, TimeGrid};

    fn small() -> ModulusConfig {
        ModulusConfig {
            nx: 24,
            ny: 12,
            time_stride: 1,
        }
    }

    #[test]
    fn huge_epsilon_gives_box_diameter() {
        let d = Driver::zero(TimeGrid::uniform(8, 1.0).unwrap());
        let b = ProbeBox::new(-0.5, 0.5, 0.0, 0.5).unwrap();
        let m = DeltaModulus::new(&d, b, &small()).unwrap();
        assert_eq!(m.delta(100.0).unwrap(), b.diameter());
        assert!(m.delta(0.0).is_err());
    }

    #[test]
    fn zero_driver_satisfies_square_law() {
        // f_t(z) = sqrt(z^2 - 4t) is half-Hölder on the box, uniformly in t:
        // |f(z1) - f(z2)| <= C |z1 - z2|^(1/2) gives delta(eps) >= (eps / C)^2.
        let d = Driver::zero(TimeGrid::uniform(8, 1.0).unwrap());
        let b = ProbeBox::new(-0.5, 0.5, 0.0, 0.5).unwrap();
        let cfg = small();
        let m = DeltaModulus::new(&d, b, &cfg).unwrap();
        // Direct measurement of C over the same lattice and times.
        let mut c = 0.0f64;
        let hx = 1.0 / 23.0;
        let hy = 0.5 / 11.0;
        let pts: Vec<Complex<f64>> = (0..12)
            .flat_map(|j| (0..24).map(move |i| Complex::new(-0.5 + hx * i as f64, hy * j as f64)))
            .collect();
        for k in 0..=8 {
            let t = k as f64 / 8.0;
            let f = |z: Complex<f64>| {
                let w = (z * z - 4.0 * t).sqrt();
                if w.im < 0.0 || (w.im == 0.0 && z.re < 0.0) { -w } else { w }
            };
            for a in &pts {
                for b2 in &pts {
                    let dz = (a - b2).norm();
                    if dz > 0.0 {
                        c = c.max((f(*a) - f(*b2)).norm() / dz.sqrt());
                    }
                }
            }
        }
        for eps in [0.05, 0.1, 0.3] {
            let delta = m.delta(eps).unwrap();
            let lower = (eps / c).powi(2);
            // Below the lattice spacing nothing is probed.
            if lower >= hx.min(hy) {
                assert!(delta >= lower, "eps {eps}: {delta} < {lower}");
            }
        }
    }

    #[test]
    fn monotone_in_epsilon() {
        let d = Driver::from_fn(TimeGrid::uniform(16, 1.0).unwrap(), Interpolation::PiecewiseLinear, |t: f64| (4.0 * t).sin() * 0.3);
        let b = ProbeBox::around(&d, 0.5).unwrap();
        let m = DeltaModulus::new(&d, b, &small()).unwrap();
        let mut prev = 0.0;
        for eps in [0.02, 0.05, 0.1, 0.2, 0.4, 0.8] {
            let v = m.delta(eps).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        // Neighbours straddling the preimage of the slit base separate by about
        // 2 sqrt(h sqrt(t)) ~ 0.4, so only larger epsilon resolve at this spacing.
        assert_eq!(m.delta(0.1).unwrap(), 0.0);
        assert!(m.delta(0.8).unwrap() > 0.0);
    }
}
