//! Quasibound resonances (σ peaks and complex zeros of det F) and true bound
//! states (real zeros of det F below the lowest threshold).

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::numerics::{levenberg_marquardt, linear_lsq, mad, median};
use crate::scattering::Propagator;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResonanceKind {
    PeakFit,
    ComplexPole,
    Unfitted,
}

impl ResonanceKind {
    pub fn name(self) -> &'static str {
        match self {
            ResonanceKind::PeakFit => "peak-fit",
            ResonanceKind::ComplexPole => "complex-pole",
            ResonanceKind::Unfitted => "unfitted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    /// Centre [rad/s, relative to ω_A].
    pub e_r: f64,
    /// Full width Γ_R [rad/s].
    pub gamma_r: f64,
    pub kind: ResonanceKind,
    pub pole: Option<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundState {
    pub e_b: f64,
}

/// Fitted line shape: background b₀ + b₁(E − E_r) plus (A + Bε)/(1 + ε²),
/// ε = 2(E − E_r)/Γ, i.e. a Lorentzian with a dispersive (Fano) admixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub e_r: f64,
    pub gamma: f64,
    pub b0: f64,
    pub b1: f64,
    pub amp: f64,
    pub disp: f64,
    pub rms: f64,
}

impl LineFit {
    pub fn eval(&self, e: f64) -> f64 {
        let eps = 2.0 * (e - self.e_r) / self.gamma;
        self.b0 + self.b1 * (e - self.e_r) + (self.amp + self.disp * eps) / (1.0 + eps * eps)
    }
}

fn linear_part(e: &[f64], y: &[f64], e_r: f64, gamma: f64, with_disp: bool) -> Option<(DVector<f64>, Vec<f64>)> {
    if !(e_r.is_finite() && gamma.is_finite() && gamma > 0.0) {
        return None;
    }
    let m = e.len();
    let nc = if with_disp { 4 } else { 3 };
    let a = DMatrix::from_fn(m, nc, |i, j| {
        let eps = 2.0 * (e[i] - e_r) / gamma;
        let l = 1.0 / (1.0 + eps * eps);
        match j {
            0 => 1.0,
            1 => (e[i] - e_r) / gamma,
            2 => l,
            _ => eps * l,
        }
    });
    let yv = DVector::from_column_slice(y);
    let c = linear_lsq(&a, &yv)?;
    let r = &a * &c - yv;
    Some((c, r.iter().copied().collect()))
}

/// Fits one line to (e, y) starting from a centre/width guess.
pub fn fit_line(e: &[f64], y: &[f64], e_guess: f64, gamma_guess: f64, with_disp: bool) -> Option<LineFit> {
    if e.len() < 6 || !(gamma_guess > 0.0) {
        return None;
    }
    let (lo, hi) = (e[0], e[e.len() - 1]);
    let scale = gamma_guess;
    let res = levenberg_marquardt(
        |q| {
            let e_r = e_guess + q[0] * scale;
            let gamma = scale * q[1].exp();
            linear_part(e, y, e_r, gamma, with_disp).map(|(_, r)| r)
        },
        &[0.0, 0.0],
        200,
        1e-12,
    )?;
    let e_r = e_guess + res.x[0] * scale;
    let gamma = scale * res.x[1].exp();
    if !(e_r > lo && e_r < hi && gamma.is_finite() && gamma > 0.0 && gamma < 2.0 * (hi - lo)) {
        return None;
    }
    let (c, r) = linear_part(e, y, e_r, gamma, with_disp)?;
    let rms = (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt();
    Some(LineFit { e_r, gamma, b0: c[0], b1: c[1] / gamma, amp: c[2], disp: if with_disp { c[3] } else { 0.0 }, rms })
}

fn running_median(y: &[f64], half: usize) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + half + 1).min(y.len());
            median(&y[a..b])
        })
        .collect()
}

/// Noise scale: MAD of the curve about its running median.
pub fn background_noise(y: &[f64]) -> f64 {
    let half = (y.len() / 40).max(3);
    let bg = running_median(y, half);
    let d: Vec<f64> = y.iter().zip(&bg).map(|(a, b)| a - b).collect();
    mad(&d)
}

/// Height of the plateau `y[i..=j]` above the higher of its two bases.
fn prominence(y: &[f64], i: usize, j: usize) -> f64 {
    let lmin = y[..i].iter().rev().take_while(|&&v| v <= y[i]).fold(y[i], |m, &v| m.min(v));
    let rmin = y[j + 1..].iter().take_while(|&&v| v <= y[i]).fold(y[i], |m, &v| m.min(v));
    y[i] - lmin.max(rmin)
}

/// Local maxima with topographic prominence above `3 × background_noise`.
/// Returns (index, prominence).
pub fn find_peaks(y: &[f64]) -> Vec<(usize, f64)> {
    let n = y.len();
    if n < 3 {
        return Vec::new();
    }
    let thr = 3.0 * background_noise(y);
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            // allow plateaus
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                let peak = (i + j) / 2;
                let prom = prominence(y, i, j);
                if prom > thr && prom > 0.0 {
                    out.push((peak, prom));
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Half-maximum width estimate around peak `i` measured from its base.
fn half_width_guess(e: &[f64], y: &[f64], i: usize, prominence: f64) -> f64 {
    let half = y[i] - 0.5 * prominence;
    let mut l = i;
    while l > 0 && y[l] > half {
        l -= 1;
    }
    let mut r = i;
    while r + 1 < y.len() && y[r] > half {
        r += 1;
    }
    let spacing = if i + 1 < e.len() { e[i + 1] - e[i] } else { e[i] - e[i - 1] };
    (e[r] - e[l]).max(spacing)
}

/// Peaks of a (possibly non-uniformly sampled) curve, each fitted with
/// [`LineFit`] on a window of ±`span` widths bounded by the neighbouring peaks.
pub fn scan_and_fit(e: &[f64], y: &[f64]) -> Vec<(Resonance, Option<LineFit>)> {
    let peaks = find_peaks(y);
    let mut out: Vec<(usize, Resonance, Option<LineFit>)> = Vec::new();
    for (pi, &(i, prom)) in peaks.iter().enumerate() {
        let left_bound = if pi > 0 { 0.5 * (e[peaks[pi - 1].0] + e[i]) } else { e[0] };
        let right_bound = if pi + 1 < peaks.len() { 0.5 * (e[peaks[pi + 1].0] + e[i]) } else { e[e.len() - 1] };
        let mut gamma = half_width_guess(e, y, i, prom);
        let mut centre = e[i];
        let mut fit = None;
        for _ in 0..3 {
            let lo = (centre - 6.0 * gamma).max(left_bound);
            let hi = (centre + 6.0 * gamma).min(right_bound);
            let idx: Vec<usize> = (0..e.len()).filter(|&k| e[k] >= lo && e[k] <= hi).collect();
            let xs: Vec<f64> = idx.iter().map(|&k| e[k]).collect();
            let ys: Vec<f64> = idx.iter().map(|&k| y[k]).collect();
            match fit_line(&xs, &ys, centre, gamma, true) {
                Some(f) => {
                    let done = (f.gamma / gamma - 1.0).abs() < 0.05;
                    centre = f.e_r;
                    gamma = f.gamma;
                    fit = Some(f);
                    if done {
                        break;
                    }
                }
                None => break,
            }
        }
        // features as broad as a tenth of the scan are background, not lines
        let width = fit.map_or(half_width_guess(e, y, i, prom), |f| f.gamma);
        if width > 0.1 * (e[e.len() - 1] - e[0]) {
            continue;
        }
        let res = match fit {
            Some(f) => Resonance { e_r: f.e_r, gamma_r: f.gamma, kind: ResonanceKind::PeakFit, pole: None },
            None => Resonance { e_r: e[i], gamma_r: half_width_guess(e, y, i, prom), kind: ResonanceKind::Unfitted, pole: None },
        };
        out.push((i, res, fit));
    }
    // A narrow Fano line's dispersive wing returns to the background slowly
    // and can leave a broad local maximum; keep a candidate only if it is
    // still prominent once narrower fitted lines are subtracted.
    let thr = 3.0 * background_noise(y);
    let keep: Vec<bool> = out
        .iter()
        .enumerate()
        .map(|(ci, (i, res, _))| {
            let narrower: Vec<&LineFit> = out
                .iter()
                .enumerate()
                .filter(|(di, (_, d, f))| *di != ci && f.is_some() && d.gamma_r < res.gamma_r)
                .map(|(_, (_, _, f))| f.as_ref().unwrap())
                .collect();
            if narrower.is_empty() {
                return true;
            }
            let yr: Vec<f64> = e
                .iter()
                .zip(y)
                .map(|(&x, &v)| {
                    v - narrower
                        .iter()
                        .map(|f| {
                            let eps = 2.0 * (x - f.e_r) / f.gamma;
                            (f.amp + f.disp * eps) / (1.0 + eps * eps)
                        })
                        .sum::<f64>()
                })
                .collect();
            prominence(&yr, *i, *i) > thr
        })
        .collect();
    out.into_iter().zip(keep).filter(|(_, k)| *k).map(|((_, r, f), _)| (r, f)).collect()
}

/// Controls for [`adaptive_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    pub coarse_points: usize,
    /// Points added around each peak per refinement round.
    pub refine_points: usize,
    pub rounds: usize,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self { coarse_points: 2000, refine_points: 48, rounds: 2 }
    }
}

/// Coarse uniform scan followed by local refinement around every detected
/// peak. `eval` maps a batch of energies to curve values (it may run in
/// parallel); returned samples are sorted by energy.
pub fn adaptive_scan(
    window: (f64, f64),
    settings: ScanSettings,
    mut eval: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (a, b) = window;
    if !(b > a) || settings.coarse_points < 3 {
        return Err(Error::Domain("empty scan window".into()));
    }
    let n = settings.coarse_points;
    let mut e: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    let mut y = eval(&e)?;
    for _ in 0..settings.rounds {
        let fits = scan_and_fit(&e, &y);
        let mut extra = Vec::new();
        for (res, _) in &fits {
            let i = e.partition_point(|&x| x < res.e_r).min(e.len() - 1);
            let spacing = if i > 0 { e[i] - e[i - 1] } else { e[1] - e[0] };
            let span = (4.0 * res.gamma_r).max(2.0 * spacing).min(0.05 * (b - a));
            let m = settings.refine_points;
            for k in 0..m {
                let x = res.e_r - span + 2.0 * span * (k as f64 + 0.5) / m as f64;
                if x > a && x < b {
                    extra.push(x);
                }
            }
        }
        if extra.is_empty() {
            break;
        }
        extra.sort_by(f64::total_cmp);
        extra.dedup();
        let ye = eval(&extra)?;
        let mut merged: Vec<(f64, f64)> = e.iter().copied().zip(y.iter().copied()).chain(extra.into_iter().zip(ye)).collect();
        merged.sort_by(|p, q| p.0.total_cmp(&q.0));
        merged.dedup_by(|p, q| p.0 == q.0);
        e = merged.iter().map(|p| p.0).collect();
        y = merged.iter().map(|p| p.1).collect();
    }
    Ok((e, y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoleOutcome {
    Converged(Resonance),
    Unconverged { seed: f64, last: C64 },
}

/// Secant iteration on det F(E) continued to complex energy, started at
/// `e_seed − iΓ/2`. Converges when the step falls below `1e-9·Γ` (or a few
/// ulps of |E| for lines narrower than the energy resolution) and |det F| has
/// dropped below 1e-8 of its value at the seed.
pub fn find_pole(prop: &Propagator, e_seed: f64, gamma_seed: f64, max_iter: usize) -> Result<PoleOutcome> {
    let z0 = C64::new(e_seed, -0.5 * gamma_seed.abs());
    let shift = prop.log_det_jost(z0)?.re;
    let f = |z: C64| prop.det_jost(z, shift);
    let scale = f(C64::new(e_seed, 0.0))?.norm().max(f(z0)?.norm());
    let mut za = z0;
    let mut zb = z0 + C64::new(0.05, 0.05) * gamma_seed.abs();
    let mut fa = f(za)?;
    let mut fb = f(zb)?;
    let tol = 1e-9 * gamma_seed.abs().max(1e-300);
    for _ in 0..max_iter {
        let den = fb - fa;
        if den.norm() == 0.0 {
            break;
        }
        let zc = zb - fb * (zb - za) / den;
        if !(zc.re.is_finite() && zc.im.is_finite()) {
            break;
        }
        let fc = f(zc)?;
        za = zb;
        fa = fb;
        zb = zc;
        fb = fc;
        if (zb - za).norm() < tol.max(8.0 * f64::EPSILON * zb.norm()) {
            if zb.im < 0.0 && fb.norm() < 1e-8 * scale {
                return Ok(PoleOutcome::Converged(Resonance {
                    e_r: zb.re,
                    gamma_r: -2.0 * zb.im,
                    kind: ResonanceKind::ComplexPole,
                    pole: Some(zb),
                }));
            }
            break;
        }
    }
    Ok(PoleOutcome::Unconverged { seed: e_seed, last: zb })
}

/// Real zeros of det F in `window` (below the lowest threshold) from a sign
/// scan with `n_scan` intervals and bisection refinement.
pub fn find_bound_states(prop: &Propagator, window: (f64, f64), n_scan: usize) -> Result<Vec<BoundState>> {
    let lowest = prop.thresholds.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(window.1 < lowest && window.0 < window.1) || n_scan < 1 {
        return Err(Error::Domain("bound-state window must lie below the lowest threshold".into()));
    }
    let sign = |e: f64| -> Result<f64> {
        let z = C64::new(e, 0.0);
        let shift = prop.log_det_jost(z)?.re;
        Ok(prop.det_jost(z, shift)?.re.signum())
    };
    let xs: Vec<f64> = (0..=n_scan).map(|i| window.0 + (window.1 - window.0) * i as f64 / n_scan as f64).collect();
    let mut signs = Vec::with_capacity(xs.len());
    for &x in &xs {
        signs.push(sign(x)?);
    }
    let mut out = Vec::new();
    for k in 0..n_scan {
        if signs[k] * signs[k + 1] < 0.0 {
            let (mut lo, mut hi, slo) = (xs[k], xs[k + 1], signs[k]);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if sign(mid)? == slo {
                    lo = mid
                } else {
                    hi = mid
                }
                if hi - lo <= 1e-13 * mid.abs().max(1.0) {
                    break;
                }
            }
            out.push(BoundState { e_b: 0.5 * (lo + hi) });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lorentz(e: f64, e0: f64, g: f64) -> f64 {
        let x = 2.0 * (e - e0) / g;
        1.0 / (1.0 + x * x)
    }

    #[test]
    fn synthetic_lorentzian_recovered() {
        let g = 2.0 * core::f64::consts::PI * 2e6;
        let e: Vec<f64> = (0..801).map(|i| -4e8 + 1e6 * i as f64).collect();
        let y: Vec<f64> = e.iter().map(|&x| 3.0 * lorentz(x, 1.23e7, g) + 0.5 + 1e-9 * x).collect();
        let res = scan_and_fit(&e, &y);
        assert_eq!(res.len(), 1);
        let r = res[0].0;
        assert_eq!(r.kind, ResonanceKind::PeakFit);
        assert!((r.gamma_r / g - 1.0).abs() < 0.01);
        assert!((r.e_r - 1.23e7).abs() < 0.01 * g);
    }

    #[test]
    fn fano_profile_recovered() {
        let (e0, g) = (0.3, 0.02);
        let e: Vec<f64> = (0..2001).map(|i| -1.0 + 1e-3 * i as f64).collect();
        let y: Vec<f64> = e
            .iter()
            .map(|&x| {
                let eps = 2.0 * (x - e0) / g;
                2.0 + 0.1 * x + (1.0 + 1.5 * eps) / (1.0 + eps * eps)
            })
            .collect();
        let res = scan_and_fit(&e, &y);
        assert_eq!(res.len(), 1, "{res:?}");
        let f = res[0].1.unwrap();
        assert!((f.gamma / g - 1.0).abs() < 1e-6 && (f.e_r - e0).abs() < 1e-6 * g.max(1.0));
    }

    #[test]
    fn flat_curve_has_no_peaks() {
        let e: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert!(scan_and_fit(&e, &[1.0; 100]).is_empty());
        let slope: Vec<f64> = e.iter().map(|x| 3.0 - 0.01 * x).collect();
        assert!(scan_and_fit(&e, &slope).is_empty());
    }

    #[test]
    fn adaptive_scan_resolves_narrow_line() {
        let (e0, g) = (0.4137, 2e-4);
        let f = |x: f64| lorentz(x, e0, g) + 0.1;
        let (e, y) = adaptive_scan((0.0, 1.0), ScanSettings { coarse_points: 1000, ..Default::default() }, |xs| {
            Ok(xs.iter().map(|&x| f(x)).collect())
        })
        .unwrap();
        assert!(e.windows(2).all(|w| w[1] > w[0]));
        let res = scan_and_fit(&e, &y);
        assert_eq!(res.len(), 1);
        assert!((res[0].0.gamma_r / g - 1.0).abs() < 1e-3, "{:?}", res[0]);
    }
}
