//! Small numerical kernels: least squares, robust statistics, tridiagonal
//! eigenvalues, special functions.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::C64;

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Median absolute deviation from the median.
pub fn mad(v: &[f64]) -> f64 {
    let m = median(v);
    let d: Vec<f64> = v.iter().map(|x| (x - m).abs()).collect();
    median(&d)
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub x: Vec<f64>,
    pub rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Levenberg–Marquardt on residuals `f(x) -> r` with a central-difference
/// Jacobian. Stops when the step is below `xtol·max(|x|, 1)` in every
/// component or no damping yields a decrease.
pub fn levenberg_marquardt(
    mut f: impl FnMut(&[f64]) -> Option<Vec<f64>>,
    x0: &[f64],
    max_iter: usize,
    xtol: f64,
) -> Option<LmResult> {
    let np = x0.len();
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    let m = r.len();
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let mut jac = DMatrix::<f64>::zeros(m, np);
        for j in 0..np {
            let step = 1e-6 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += step;
            let rp = f(&xp)?;
            xp[j] = x[j] - step;
            let rm = f(&xp)?;
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * step);
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_vec(r.clone());
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for j in 0..np {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-300);
            }
            let Some(dx) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + b).collect();
            if let Some(rn) = f(&xn) {
                let cn: f64 = rn.iter().map(|v| v * v).sum();
                if cn.is_finite() && cn <= cost {
                    let small = dx.iter().zip(&x).all(|(d, xv)| d.abs() <= xtol * xv.abs().max(1.0));
                    x = xn;
                    r = rn;
                    cost = cn;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    if small {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Some(LmResult { x, rms: (cost / m as f64).sqrt(), iterations: it, converged })
}

/// Linear least squares min ‖A c − y‖ via SVD.
pub fn linear_lsq(a: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    if !a.iter().chain(y.iter()).all(|v| v.is_finite()) {
        return None;
    }
    a.clone().svd(true, true).solve(y, 1e-14).ok()
}

/// Ascending eigenvalues below `limit` of the symmetric tridiagonal matrix
/// (diag `d`, off-diagonal `e`) by Sturm-sequence bisection.
pub fn tridiagonal_eigenvalues_below(d: &[f64], e: &[f64], limit: f64) -> Vec<f64> {
    let count = |x: f64| -> usize {
        let mut c = 0;
        let mut q = d[0] - x;
        if q < 0.0 {
            c += 1;
        }
        for i in 1..d.len() {
            let qq = if q == 0.0 { 1e-300 } else { q };
            q = d[i] - x - e[i - 1] * e[i - 1] / qq;
            if q < 0.0 {
                c += 1;
            }
        }
        c
    };
    let bound = d.iter().zip(e.iter().chain(core::iter::once(&0.0))).fold(0.0f64, |m, (a, b)| m.max(a.abs() + 2.0 * b.abs()));
    let lo0 = -bound - 1.0;
    let n = count(limit);
    (0..n)
        .map(|k| {
            let (mut lo, mut hi) = (lo0, limit);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count(mid) > k {
                    hi = mid
                } else {
                    lo = mid
                }
                if hi - lo <= 1e-15 * (lo.abs() + hi.abs()) {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Eigenvalues below `limit` of −c d²/dR² + V(R) with Dirichlet ends on a
/// uniform grid (second-order finite differences).
pub fn grid_levels(r_lo: f64, r_hi: f64, n: usize, c: f64, v: impl Fn(f64) -> f64, limit: f64) -> Vec<f64> {
    let h = (r_hi - r_lo) / (n + 1) as f64;
    let t = c / (h * h);
    let d: Vec<f64> = (1..=n).map(|i| 2.0 * t + v(r_lo + h * i as f64)).collect();
    let e = alloc::vec![-t; n - 1];
    tridiagonal_eigenvalues_below(&d, &e, limit)
}

/// ln Γ(z) for Re z > 0 (Lanczos, g = 7).
pub fn ln_gamma(z: C64) -> C64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let z = z - 1.0;
    let mut x = C64::new(COEF[0], 0.0);
    for (i, c) in COEF.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + G + 0.5;
    let half_ln_2pi = 0.918_938_533_204_672_8;
    (z + 0.5) * t.ln() - t + half_ln_2pi + x.ln()
}

/// Spherical Bessel j₁(x), with the series near zero.
pub fn spherical_j1(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        return x / 3.0 * (1.0 - x2 / 10.0 + x2 * x2 / 280.0);
    }
    x.sin() / (x * x) - x.cos() / x
}

/// Generalised Laguerre L_n^{(α)}(x) by the three-term recurrence.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut l0, mut l1) = (1.0, 1.0 + alpha - x);
    for k in 1..n {
        let kf = k as f64;
        let l2 = ((2.0 * kf + 1.0 + alpha - x) * l1 - (kf + alpha) * l0) / (kf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn robust_stats() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mad(&[1.0, 1.0, 2.0, 2.0, 4.0, 6.0, 9.0]), 1.0);
    }

    #[test]
    fn lm_fits_exponential() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * (-1.3 * x).exp() + 0.2).collect();
        let res = levenberg_marquardt(
            |p| Some(xs.iter().zip(&ys).map(|(x, y)| p[0] * (-p[1] * x).exp() + p[2] - y).collect()),
            &[1.0, 1.0, 0.0],
            200,
            1e-14,
        )
        .unwrap();
        assert!(res.converged && res.rms < 1e-10, "{res:?}");
        assert!((res.x[0] - 2.5).abs() < 1e-8 && (res.x[1] - 1.3).abs() < 1e-8 && (res.x[2] - 0.2).abs() < 1e-8);
    }

    #[test]
    fn harmonic_oscillator_levels() {
        // −φ'' + x² φ: levels 1, 3, 5, ...
        let lv = grid_levels(-10.0, 10.0, 4000, 1.0, |x| x * x, 8.0);
        assert_eq!(lv.len(), 4);
        for (k, e) in lv.iter().enumerate() {
            assert!((e - (2 * k + 1) as f64).abs() < 1e-3, "{e}");
        }
    }

    #[test]
    fn gamma_function() {
        // Γ(5) = 24, Γ(1/2) = √π, |Γ(iy)|² = π/(y sinh πy) via Γ(1+iy) = iy Γ(iy)
        assert!((ln_gamma(C64::new(5.0, 0.0)).re - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(C64::new(0.5, 0.0)).re - 0.5 * core::f64::consts::PI.ln()).abs() < 1e-13);
        let y = 0.7;
        let lg = ln_gamma(C64::new(1.0, y));
        let exact = (core::f64::consts::PI * y / (core::f64::consts::PI * y).sinh()).ln() * 0.5;
        assert!((lg.re - exact).abs() < 1e-13);
        // arg Γ(1 + iy) ≈ −γ y for small y
        let s = ln_gamma(C64::new(1.0, 1e-4));
        assert!((s.im + 0.577_215_664_901_532_9e-4).abs() < 1e-11);
    }

    #[test]
    fn bessel_and_laguerre() {
        assert!((spherical_j1(1e-4) / (1e-4 / 3.0) - 1.0).abs() < 1e-8);
        let x = 4.493_409_457_909_064; // first zero of j₁
        assert!(spherical_j1(x).abs() < 1e-14);
        assert!((spherical_j1(2.0) - 0.435_397_774_979_992).abs() < 1e-14);
        assert!((laguerre(2, 0.5, 1.3) - (0.5 * 1.3 * 1.3 - 2.5 * 1.3 + 0.5 * 2.5 * 1.5)).abs() < 1e-13);
    }
}
