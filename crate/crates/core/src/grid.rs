//! Radial grids. Scattering uses piecewise-uniform sectors whose step adapts to
//! the local wavenumber; every step occurs in an equal pair so three-point
//! sector rules apply, and halving every step keeps that structure.

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    r: Vec<f64>,
}

impl RadialGrid {
    pub fn uniform(r_wall: f64, r_infinity: f64, n_points: usize) -> Result<Self> {
        check_bounds(r_wall, r_infinity)?;
        if n_points < 2 {
            return Err(Error::invalid("n_points", "need at least 2 points"));
        }
        let h = (r_infinity - r_wall) / (n_points - 1) as f64;
        let mut r: Vec<f64> = (0..n_points).map(|i| r_wall + h * i as f64).collect();
        r[n_points - 1] = r_infinity;
        Ok(Self { r })
    }

    /// Steps are `h_max / 2^j`, the largest with `h · k(R) ≤ phase_step`, where
    /// `k` is an upper bound of the local wavenumber [a0⁻¹], assumed to vary
    /// slowly on the scale of one step pair.
    pub fn graded(r_wall: f64, r_infinity: f64, h_max: f64, phase_step: f64, k: impl Fn(f64) -> f64) -> Result<Self> {
        check_bounds(r_wall, r_infinity)?;
        if !(h_max > 0.0 && phase_step > 0.0) {
            return Err(Error::invalid("h_max", "step controls must be positive"));
        }
        let mut r = Vec::new();
        r.push(r_wall);
        let mut x = r_wall;
        loop {
            let kx = k(x).abs().max(1e-300);
            let mut h = h_max;
            while h * kx > phase_step {
                h *= 0.5;
                if h < 1e-9 * (r_infinity - r_wall) {
                    return Err(Error::NumericalAt { r: x, reason: "graded grid step underflow".into() });
                }
            }
            let left = r_infinity - x;
            if left <= 2.0 * h * (1.0 + 1e-12) {
                // close with one equal pair
                let hh = 0.5 * left;
                r.push(x + hh);
                r.push(r_infinity);
                break;
            }
            x += h;
            r.push(x);
            x += h;
            r.push(x);
        }
        Ok(Self { r })
    }

    /// Grid with every step split in two.
    pub fn refined(&self) -> Self {
        let mut r = Vec::with_capacity(2 * self.r.len() - 1);
        for w in self.r.windows(2) {
            r.push(w[0]);
            r.push(0.5 * (w[0] + w[1]));
        }
        r.push(*self.r.last().unwrap());
        Self { r }
    }

    /// Every `stride`-th point; the last point must be included.
    pub fn coarsened(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !(self.r.len() - 1).is_multiple_of(stride) {
            return Err(Error::Domain("stride does not divide the grid".into()));
        }
        Ok(Self { r: self.r.iter().step_by(stride).copied().collect() })
    }

    pub fn points(&self) -> &[f64] {
        &self.r
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r_wall(&self) -> f64 {
        self.r[0]
    }

    pub fn r_infinity(&self) -> f64 {
        *self.r.last().unwrap()
    }

    /// True when consecutive steps come in equal pairs.
    pub fn is_paired(&self) -> bool {
        if self.r.len().is_multiple_of(2) {
            return false;
        }
        self.r.chunks(2).zip(self.r[1..].chunks(2)).all(|(a, b)| {
            if b.len() < 2 {
                return true;
            }
            let h1 = b[0] - a[0];
            let h2 = b[1] - b[0];
            (h1 - h2).abs() <= 1e-9 * h1.abs().max(h2.abs())
        })
    }
}

fn check_bounds(r_wall: f64, r_infinity: f64) -> Result<()> {
    if !(r_wall > 0.0 && r_wall < r_infinity && r_infinity.is_finite()) {
        return Err(Error::invalid("r_wall", "need 0 < r_wall < r_infinity"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_ends() {
        let g = RadialGrid::uniform(200.0, 20_000.0, 16_384).unwrap();
        assert_eq!(g.len(), 16_384);
        assert_eq!(g.r_wall(), 200.0);
        assert_eq!(g.r_infinity(), 20_000.0);
        assert!(RadialGrid::uniform(10.0, 5.0, 8).is_err());
        assert!(RadialGrid::uniform(1.0, 5.0, 1).is_err());
    }

    #[test]
    fn graded_respects_phase_and_pairs() {
        let k = |r: f64| 2.0 * (200.0 / r).powf(1.5) + 0.1;
        let g = RadialGrid::graded(200.0, 20_000.0, 1.0, 0.1, k).unwrap();
        assert!(g.is_paired());
        assert_eq!(g.r_infinity(), 20_000.0);
        for w in g.points().windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0]) * k(w[0]) <= 0.1 + 1e-12);
        }
        let f = g.refined();
        assert_eq!(f.len(), 2 * g.len() - 1);
        assert!(f.is_paired());
        assert_eq!(f.coarsened(2).unwrap(), g);
    }
}
