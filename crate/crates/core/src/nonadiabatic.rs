//! Derivative couplings τᵢⱼ = ⟨χᵢ|d/dR|χⱼ⟩, the transformation T(R) and the
//! coupling matrix W(R) entering the scattering equations.

use alloc::vec::Vec;
use nalgebra::Matrix3;
#[allow(unused_imports)]
use num_traits::Float;

use crate::adiabatic::AdiabaticCurves;
use crate::error::{Error, Result};
use crate::params::SystemParams;

#[derive(Debug, Clone)]
pub struct CouplingTables {
    pub tau: Vec<Matrix3<f64>>,
    pub t: Vec<Matrix3<f64>>,
    /// [a0⁻²]
    pub w: Vec<Matrix3<f64>>,
}

impl CouplingTables {
    pub fn build(curves: &AdiabaticCurves) -> Result<Self> {
        let tau = compute_tau(curves, &curves.params)?;
        let t = compute_t(&tau, &curves.r);
        let w = compute_w(curves, &t, &curves.params);
        Ok(Self { tau, t, w })
    }
}

/// Hellmann–Feynman: τᵢⱼ = ⟨χᵢ|H'|χⱼ⟩/(ωⱼ − ωᵢ), with H' = −3C₃/R⁴ on (1,2).
pub fn compute_tau(curves: &AdiabaticCurves, p: &SystemParams) -> Result<Vec<Matrix3<f64>>> {
    let scale = p.kappa_a.abs() + p.kappa_b.abs() + (p.omega_c - p.omega_a).abs() + (p.omega_b - p.omega_a).abs();
    let mut out = Vec::with_capacity(curves.r.len());
    for ((&r, w), chi) in curves.r.iter().zip(&curves.omega).zip(&curves.chi) {
        let dv = -3.0 * p.c3 / (r * r * r * r);
        let mut tau = Matrix3::zeros();
        let local = scale + p.c3 / (r * r * r);
        for i in 0..3 {
            for j in (i + 1)..3 {
                let gap = w[j] - w[i];
                let num = dv * (chi[(0, i)] * chi[(1, j)] + chi[(1, i)] * chi[(0, j)]);
                if gap.abs() <= 1e-6 * local {
                    if num == 0.0 {
                        continue;
                    }
                    return Err(Error::NumericalAt { r, reason: alloc::format!("curves {} and {} degenerate", i + 1, j + 1) });
                }
                tau[(i, j)] = num / gap;
                tau[(j, i)] = -tau[(i, j)];
            }
        }
        out.push(tau);
    }
    Ok(out)
}

/// exp(A) for antisymmetric 3×3 `A` (Rodrigues).
pub fn expm_antisymmetric(a: &Matrix3<f64>) -> Matrix3<f64> {
    let th2 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    let (s, c) = if th2 < 1e-8 {
        // series through fourth order
        (1.0 - th2 / 6.0 + th2 * th2 / 120.0, 0.5 - th2 / 24.0 + th2 * th2 / 720.0)
    } else {
        let th = libm::sqrt(th2);
        (libm::sin(th) / th, (1.0 - libm::cos(th)) / th2)
    };
    Matrix3::identity() + a * s + a * a * c
}

/// Path-ordered T with T(R_∞) = 1 and T(R_k) = T(R_{k+1}) exp(−τ̄ h).
pub fn compute_t(tau: &[Matrix3<f64>], r: &[f64]) -> Vec<Matrix3<f64>> {
    let n = r.len();
    let mut t = alloc::vec![Matrix3::identity(); n];
    for k in (0..n.saturating_sub(1)).rev() {
        let h = r[k + 1] - r[k];
        let step = expm_antisymmetric(&((tau[k] + tau[k + 1]) * (-0.5 * h)));
        t[k] = t[k + 1] * step;
    }
    t
}

/// W = (T U T⁻¹ − diag ωᵢ(∞)) / c.
pub fn compute_w(curves: &AdiabaticCurves, t: &[Matrix3<f64>], p: &SystemParams) -> Vec<Matrix3<f64>> {
    let c = p.kinetic_constant();
    let thr = Matrix3::from_diagonal(&curves.thresholds.into());
    curves
        .omega
        .iter()
        .zip(t)
        .map(|(w, tk)| {
            let u = Matrix3::from_diagonal(&(*w).into());
            let inv = tk.try_inverse().unwrap_or_else(|| tk.transpose());
            (tk * u * inv - thr) / c
        })
        .collect()
}

/// T(R) = χ(R_∞)ᵀ χ(R), the exact solution of T' = Tτ for a complete basis.
pub fn closed_form_t(curves: &AdiabaticCurves) -> Vec<Matrix3<f64>> {
    let outer = curves.chi.last().unwrap().transpose();
    curves.chi.iter().map(|c| outer * c).collect()
}

/// Central-difference τ from phase-continuous eigenvectors (test oracle).
pub fn finite_difference_tau(curves: &AdiabaticCurves) -> Vec<Matrix3<f64>> {
    let n = curves.r.len();
    (0..n)
        .map(|k| {
            if k == 0 || k + 1 == n {
                return Matrix3::zeros();
            }
            let d = (curves.chi[k + 1] - curves.chi[k - 1]) / (curves.r[k + 1] - curves.r[k - 1]);
            curves.chi[k].transpose() * d
        })
        .collect()
}

/// max ‖[τ(R_a), τ(R_b)]‖ over sampled pairs: nonzero means ordering matters.
pub fn commutator_diagnostic(tau: &[Matrix3<f64>]) -> f64 {
    let step = (tau.len() / 64).max(1);
    let sample: Vec<_> = tau.iter().step_by(step).collect();
    let mut best = 0.0f64;
    for a in &sample {
        for b in &sample {
            best = best.max((*a * *b - *b * *a).abs().max());
        }
    }
    best
}
