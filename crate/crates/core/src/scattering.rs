//! Three-channel s-wave scattering on the transformed equations
//! −φ'' + W φ = P² φ, with the regular solution vanishing at the wall.
//!
//! Primary propagator: trapezoidal march of the Volterra equation
//! Φ(x) = sin(Px)/P + ∫₀ˣ sin(P(x−x'))/P · W Φ dx' (x = R − r_wall), written
//! through the rebased amplitudes Gₚ = e^{−iPx}F(P;x), Gₘ = e^{iPx}F(−P;x) so
//! that Φ = (2iP)⁻¹(Gₘ − Gₚ). Columns are re-orthonormalised (QR) whenever
//! closed-channel growth gets large; the discarded determinant is kept in a
//! log ledger. Results on nested grids (h, h/2, h/4) are Richardson-extrapolated.
//!
//! Secondary propagator: Johnson's log-derivative method on the finest grid.

use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, Matrix3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::units::BOHR2_CM2;
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Energy, thresholds and channel momenta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelContext {
    /// Energy relative to ω_A [rad/s]; complex only during pole searches.
    pub energy: C64,
    pub thresholds: [f64; 3],
    /// Momenta [a0⁻¹]; open channels Re P > 0, closed channels i|P|.
    pub p: [C64; 3],
    pub open: [bool; 3],
}

impl ChannelContext {
    pub fn n_open(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    pub fn open_indices(&self) -> Vec<usize> {
        (0..3).filter(|&i| self.open[i]).collect()
    }
}

/// Channel momenta at real energy `e`; `c` is the kinetic constant.
pub fn make_channels(e: f64, thresholds: [f64; 3], c: f64) -> Result<ChannelContext> {
    let scale = thresholds.iter().fold(1.0f64, |m, t| m.max(t.abs()));
    for (n, &t) in thresholds.iter().enumerate() {
        if (e - t).abs() <= 1e-14 * scale {
            return Err(Error::ThresholdEnergy { channel: n + 1 });
        }
    }
    Ok(make_channels_complex(C64::new(e, 0.0), thresholds, c))
}

/// Continuation to complex energy: open channels (Re E above threshold) take
/// the principal root, closed ones i·√((ω − E)/c), which is the branch
/// adjacent to the physical sheet for narrow resonances.
pub fn make_channels_complex(e: C64, thresholds: [f64; 3], c: f64) -> ChannelContext {
    let mut p = [C64::new(0.0, 0.0); 3];
    let mut open = [false; 3];
    for n in 0..3 {
        let d = e - thresholds[n];
        if d.re > 0.0 {
            open[n] = true;
            p[n] = (d / c).sqrt();
        } else {
            p[n] = I * (-d / c).sqrt();
        }
    }
    ChannelContext { energy: e, thresholds, p, open }
}

/// Output of one Volterra march, in a gauge fixed by the renormalisations.
#[derive(Debug, Clone)]
pub struct JostMatrices {
    pub p: [C64; 3],
    pub open: [bool; 3],
    /// x_N = R_∞ − r_wall.
    pub x_end: f64,
    /// e^{−iPx_N} F(P) C and e^{iPx_N} F(−P) C for the accumulated gauge C.
    pub gp: Matrix3<C64>,
    pub gm: Matrix3<C64>,
    /// ln det C.
    pub log_gauge: f64,
    /// C⁻¹ = inv_gauge · e^{inv_gauge_log}.
    pub inv_gauge: Matrix3<C64>,
    pub inv_gauge_log: f64,
}

impl JostMatrices {
    /// ln det F(P) (principal branch of the gauge-fixed part).
    pub fn log_det(&self) -> C64 {
        let phase: C64 = self.p.iter().map(|p| I * p * self.x_end).sum();
        phase + self.gp.determinant().ln() - self.log_gauge
    }

    fn dense(&self, g: &Matrix3<C64>, sign: f64) -> Matrix3<C64> {
        let core = g * self.inv_gauge;
        Matrix3::from_fn(|n, m| {
            let z = core[(n, m)];
            if z == C64::new(0.0, 0.0) {
                return z;
            }
            (z.ln() + I * self.p[n] * (sign * self.x_end) + self.inv_gauge_log).exp()
        })
    }

    /// F(P) = 1 + ∫ e^{iPx} W Φ dx as a plain matrix (may overflow for
    /// strongly closed channels).
    pub fn f_plus(&self) -> Matrix3<C64> {
        self.dense(&self.gp, 1.0)
    }

    /// F(−P): open rows reflected, closed rows keep the decaying branch F(P).
    pub fn f_minus(&self) -> Matrix3<C64> {
        let fp = self.f_plus();
        let fm = self.dense(&self.gm, -1.0);
        Matrix3::from_fn(|n, m| if self.open[n] { fm[(n, m)] } else { fp[(n, m)] })
    }

    /// Open block of P^{−1/2} F(−P) F(P)⁻¹ P^{1/2}, formed without the
    /// overflowing closed-channel exponentials.
    pub fn s_open(&self) -> Result<DMatrix<C64>> {
        let inv = self.gp.try_inverse().ok_or(Error::JostSingular)?;
        let m = self.gm * inv;
        let o: Vec<usize> = (0..3).filter(|&i| self.open[i]).collect();
        let ph: Vec<C64> = o.iter().map(|&i| (-I * self.p[i] * self.x_end).exp()).collect();
        let sq: Vec<C64> = o.iter().map(|&i| self.p[i].sqrt()).collect();
        Ok(DMatrix::from_fn(o.len(), o.len(), |a, b| ph[a] * m[(o[a], o[b])] * ph[b] * sq[b] / sq[a]))
    }
}

#[derive(Debug, Clone)]
pub struct ScatteringMatrices {
    pub channels: ChannelContext,
    /// Open-open block of S.
    pub s: DMatrix<C64>,
    /// Open-open reaction matrix.
    pub k: DMatrix<f64>,
    /// Open-open cross sections [cm²].
    pub sigma: DMatrix<f64>,
}

impl ScatteringMatrices {
    pub fn from_s(channels: ChannelContext, s: DMatrix<C64>) -> Result<Self> {
        let k = k_from_s(&s)?;
        let sigma = cross_section(&channels, &s)?;
        Ok(Self { channels, s, k, sigma })
    }

    pub fn unitarity_defect(&self) -> f64 {
        let n = self.s.nrows();
        (self.s.adjoint() * &self.s - DMatrix::identity(n, n)).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.s - self.s.transpose()).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn s11(&self) -> C64 {
        self.s[(0, 0)]
    }

    pub fn sigma11(&self) -> f64 {
        self.sigma[(0, 0)]
    }
}

/// K = i(1 − S)(1 + S)⁻¹; the imaginary remainder must be round-off.
pub fn k_from_s(s: &DMatrix<C64>) -> Result<DMatrix<f64>> {
    let n = s.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    let inv = (&id + s).try_inverse().ok_or_else(|| Error::Numerical("1 + S singular (K infinite)".into()))?;
    let k = (&id - s) * inv * I;
    Ok(k.map(|z| z.re))
}

/// S = (1 + iK)(1 − iK)⁻¹.
pub fn s_from_k(k: &DMatrix<f64>) -> Result<DMatrix<C64>> {
    let n = k.nrows();
    let ik = k.map(|x| I * x);
    let id = DMatrix::<C64>::identity(n, n);
    let inv = (&id - &ik).try_inverse().ok_or_else(|| Error::Numerical("1 − iK singular".into()))?;
    Ok((&id + ik) * inv)
}

/// σᵢⱼ = (π/Pᵢ²)|δᵢⱼ − Sᵢⱼ|² in cm² over the open block.
pub fn cross_section(ch: &ChannelContext, s: &DMatrix<C64>) -> Result<DMatrix<f64>> {
    let o = ch.open_indices();
    if o.len() != s.nrows() {
        return Err(Error::Domain("S block does not match open channels".into()));
    }
    Ok(DMatrix::from_fn(o.len(), o.len(), |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        let p2 = ch.p[o[i]].norm_sqr();
        core::f64::consts::PI / p2 * (C64::new(d, 0.0) - s[(i, j)]).norm_sqr() * BOHR2_CM2
    }))
}

/// s-wave unitarity limit 4π/P² [cm²].
pub fn unitarity_limit(p: f64) -> f64 {
    4.0 * core::f64::consts::PI / (p * p) * BOHR2_CM2
}

struct MarchState {
    gp: Matrix3<C64>,
    gm: Matrix3<C64>,
    g: Matrix3<C64>,
    log_gauge: f64,
    inv_gauge: Matrix3<C64>,
    inv_gauge_log: f64,
}

impl MarchState {
    /// Modified Gram–Schmidt on the stacked columns [Gₚ; Gₘ]; everything
    /// linear in the solution is right-multiplied by R⁻¹.
    fn renormalise(&mut self) -> Result<Matrix3<C64>> {
        let mut q = [[C64::new(0.0, 0.0); 6]; 3];
        for j in 0..3 {
            for i in 0..3 {
                q[j][i] = self.gp[(i, j)];
                q[j][i + 3] = self.gm[(i, j)];
            }
        }
        let mut r = Matrix3::<C64>::zeros();
        for j in 0..3 {
            for k in 0..j {
                let mut d = C64::new(0.0, 0.0);
                for i in 0..6 {
                    d += q[k][i].conj() * q[j][i];
                }
                r[(k, j)] = d;
                for i in 0..6 {
                    let t = q[k][i] * d;
                    q[j][i] -= t;
                }
            }
            let nrm = q[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !(nrm > 0.0 && nrm.is_finite()) {
                return Err(Error::Numerical("regular solution lost rank".into()));
            }
            r[(j, j)] = C64::new(nrm, 0.0);
            for z in q[j].iter_mut() {
                *z /= nrm;
            }
        }
        let rinv = r.try_inverse().ok_or_else(|| Error::Numerical("singular renormalisation".into()))?;
        self.gp *= rinv;
        self.gm *= rinv;
        self.g *= rinv;
        self.log_gauge -= (0..3).map(|j| r[(j, j)].re.ln()).sum::<f64>();
        self.inv_gauge = r * self.inv_gauge;
        let s = self.inv_gauge.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        self.inv_gauge /= C64::new(s, 0.0);
        self.inv_gauge_log += s.ln();
        Ok(rinv)
    }
}

/// Volterra march over `r` (every `stride`-th point) with coupling `w`.
/// When `keep` is set the regular solution Φ(R) (with Φ'(r_wall) = 1) is returned.
pub fn march(
    ch: &ChannelContext,
    r: &[f64],
    w: &[Matrix3<f64>],
    stride: usize,
    keep: bool,
) -> Result<(JostMatrices, Option<Vec<Matrix3<C64>>>)> {
    if r.len() != w.len() || r.len() < 2 || stride == 0 || !(r.len() - 1).is_multiple_of(stride) {
        return Err(Error::Domain("grid/coupling tables inconsistent with stride".into()));
    }
    let p = ch.p;
    let inv2ip: [C64; 3] = core::array::from_fn(|n| C64::new(1.0, 0.0) / (2.0 * I * p[n]));
    let mut st = MarchState {
        gp: Matrix3::identity(),
        gm: Matrix3::identity(),
        g: Matrix3::zeros(),
        log_gauge: 0.0,
        inv_gauge: Matrix3::identity(),
        inv_gauge_log: 0.0,
    };
    let mut phis: Vec<Matrix3<C64>> = Vec::new();
    let mut gauges: Vec<(usize, Matrix3<C64>)> = Vec::new();
    if keep {
        phis.push(Matrix3::zeros());
    }
    let mut last_h = f64::NAN;
    let (mut ep, mut em) = ([C64::new(0.0, 0.0); 3], [C64::new(0.0, 0.0); 3]);
    // row-major working copies: x[n][j]
    let z = C64::new(0.0, 0.0);
    let mut gp = [[z; 3]; 3];
    let mut gm = [[z; 3]; 3];
    let mut gg = [[z; 3]; 3];
    for n in 0..3 {
        gp[n][n] = C64::new(1.0, 0.0);
        gm[n][n] = C64::new(1.0, 0.0);
    }
    let n_steps = (r.len() - 1) / stride;
    for s in 1..=n_steps {
        let k = s * stride;
        let h = r[k] - r[k - stride];
        if h != last_h {
            last_h = h;
            for n in 0..3 {
                ep[n] = (I * p[n] * h).exp();
                em[n] = (-I * p[n] * h).exp();
            }
        }
        let hh = 0.5 * h;
        let wk = &w[k];
        let mut phi = [[z; 3]; 3];
        let mut pp = [[z; 3]; 3];
        let mut pm = [[z; 3]; 3];
        for n in 0..3 {
            for j in 0..3 {
                let gv = gg[n][j] * hh;
                let a = gp[n][j] + gv;
                let b = gm[n][j] + gv;
                pp[n][j] = a;
                pm[n][j] = b;
                phi[n][j] = inv2ip[n] * (ep[n] * b - em[n] * a);
            }
        }
        for n in 0..3 {
            let (w0, w1, w2) = (wk[(n, 0)], wk[(n, 1)], wk[(n, 2)]);
            for j in 0..3 {
                let gv = phi[0][j] * w0 + phi[1][j] * w1 + phi[2][j] * w2;
                gg[n][j] = gv;
                let gvh = gv * hh;
                gp[n][j] = em[n] * pp[n][j] + gvh;
                gm[n][j] = ep[n] * pm[n][j] + gvh;
            }
        }
        if keep {
            phis.push(Matrix3::from_fn(|n, j| phi[n][j]));
        }
        if s % 4 == 0 {
            let mut big = 0.0f64;
            for n in 0..3 {
                for j in 0..3 {
                    big = big.max(gp[n][j].norm_sqr()).max(gm[n][j].norm_sqr());
                }
            }
            if !big.is_finite() {
                return Err(Error::NumericalAt { r: r[k], reason: "overflow despite renormalisation".into() });
            }
            // growth beyond ~1e4 starts to wash out the smaller solutions
            if !(1e-8..=1e8).contains(&big) {
                st.gp = Matrix3::from_fn(|n, j| gp[n][j]);
                st.gm = Matrix3::from_fn(|n, j| gm[n][j]);
                st.g = Matrix3::from_fn(|n, j| gg[n][j]);
                let c = st.renormalise()?;
                for n in 0..3 {
                    for j in 0..3 {
                        gp[n][j] = st.gp[(n, j)];
                        gm[n][j] = st.gm[(n, j)];
                        gg[n][j] = st.g[(n, j)];
                    }
                }
                if keep {
                    gauges.push((s, c));
                }
            }
        }
    }
    st.gp = Matrix3::from_fn(|n, j| gp[n][j]);
    st.gm = Matrix3::from_fn(|n, j| gm[n][j]);
    let jost = JostMatrices {
        p,
        open: ch.open,
        x_end: r[r.len() - 1] - r[0],
        gp: st.gp,
        gm: st.gm,
        log_gauge: st.log_gauge,
        inv_gauge: st.inv_gauge,
        inv_gauge_log: st.inv_gauge_log,
    };
    if !keep {
        return Ok((jost, None));
    }
    // undo the renormalisations: Φ(x_s) = Φ_stored · (C₁⋯C_j)⁻¹ for gauges applied before s
    let mut acc = Matrix3::<C64>::identity();
    let mut gi = 0;
    for (s, phi) in phis.iter_mut().enumerate() {
        while gi < gauges.len() && gauges[gi].0 < s {
            let r = gauges[gi].1.try_inverse().ok_or_else(|| Error::Numerical("singular gauge".into()))?;
            acc = r * acc;
            gi += 1;
        }
        *phi *= acc;
        if phi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NumericalAt { r: r[s * stride], reason: "regular solution overflows".into() });
        }
    }
    Ok((jost, Some(phis)))
}

/// Real-energy march. Φ is real, so per channel only two real amplitude rows
/// are needed: open channels carry Gₚ = u + iv (Gₘ = ū), closed ones carry
/// Gₚ = u and Gₘ = v directly. Agrees with [`march`] to round-off.
pub fn march_real(ch: &ChannelContext, r: &[f64], w: &[Matrix3<f64>], stride: usize) -> Result<JostMatrices> {
    if ch.energy.im != 0.0 {
        return Err(Error::Domain("real march needs a real energy".into()));
    }
    if r.len() != w.len() || r.len() < 2 || stride == 0 || !(r.len() - 1).is_multiple_of(stride) {
        return Err(Error::Domain("grid/coupling tables inconsistent with stride".into()));
    }
    let open = ch.open;
    let q: [f64; 3] = core::array::from_fn(|n| if open[n] { ch.p[n].re } else { ch.p[n].im });
    let mut u = [[0.0f64; 3]; 3];
    let mut v = [[0.0f64; 3]; 3];
    for n in 0..3 {
        u[n][n] = 1.0;
        v[n][n] = if open[n] { 0.0 } else { 1.0 };
    }
    let mut gg = [[0.0f64; 3]; 3];
    let mut log_gauge = 0.0;
    let mut inv_gauge = nalgebra::Matrix3::<f64>::identity();
    let mut inv_gauge_log = 0.0;
    let mut last_h = f64::NAN;
    // open: (cos, sin) of Ph; closed: (e^{κh}, e^{−κh})
    let mut a = [0.0f64; 3];
    let mut b = [0.0f64; 3];
    let n_steps = (r.len() - 1) / stride;
    for s in 1..=n_steps {
        let k = s * stride;
        let h = r[k] - r[k - stride];
        if h != last_h {
            last_h = h;
            for n in 0..3 {
                if open[n] {
                    a[n] = (q[n] * h).cos();
                    b[n] = (q[n] * h).sin();
                } else {
                    a[n] = (q[n] * h).exp();
                    b[n] = (-q[n] * h).exp();
                }
            }
        }
        let hh = 0.5 * h;
        let mut phi = [[0.0f64; 3]; 3];
        for n in 0..3 {
            if open[n] {
                // q = e^{−iPh}(u + iv + hh g)
                let inv = 1.0 / q[n];
                for j in 0..3 {
                    let pu = u[n][j] + hh * gg[n][j];
                    let pv = v[n][j];
                    let qu = a[n] * pu + b[n] * pv;
                    let qv = a[n] * pv - b[n] * pu;
                    u[n][j] = qu;
                    v[n][j] = qv;
                    phi[n][j] = -qv * inv;
                }
            } else {
                let inv = 0.5 / q[n];
                for j in 0..3 {
                    let g = hh * gg[n][j];
                    let q1 = a[n] * (u[n][j] + g);
                    let q2 = b[n] * (v[n][j] + g);
                    u[n][j] = q1;
                    v[n][j] = q2;
                    phi[n][j] = (q1 - q2) * inv;
                }
            }
        }
        let wk = &w[k];
        for n in 0..3 {
            let (w0, w1, w2) = (wk[(n, 0)], wk[(n, 1)], wk[(n, 2)]);
            let closed = !open[n];
            for j in 0..3 {
                let g = phi[0][j] * w0 + phi[1][j] * w1 + phi[2][j] * w2;
                gg[n][j] = g;
                u[n][j] += hh * g;
                if closed {
                    v[n][j] += hh * g;
                }
            }
        }
        if s % 4 == 0 {
            let mut big = 0.0f64;
            for n in 0..3 {
                for j in 0..3 {
                    big = big.max(u[n][j].abs()).max(v[n][j].abs());
                }
            }
            if !big.is_finite() {
                return Err(Error::NumericalAt { r: r[k], reason: "overflow despite renormalisation".into() });
            }
            if !(1e-4..=1e4).contains(&big) {
                // Gram–Schmidt on the 6×3 stack [u; v]
                let mut rr = nalgebra::Matrix3::<f64>::zeros();
                let mut cols = [[0.0f64; 6]; 3];
                for j in 0..3 {
                    for n in 0..3 {
                        cols[j][n] = u[n][j];
                        cols[j][n + 3] = v[n][j];
                    }
                }
                for j in 0..3 {
                    for l in 0..j {
                        let d: f64 = (0..6).map(|i| cols[l][i] * cols[j][i]).sum();
                        rr[(l, j)] = d;
                        for i in 0..6 {
                            cols[j][i] -= d * cols[l][i];
                        }
                    }
                    let nrm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
                    if !(nrm > 0.0 && nrm.is_finite()) {
                        return Err(Error::NumericalAt { r: r[k], reason: "regular solution lost rank".into() });
                    }
                    rr[(j, j)] = nrm;
                    for x in cols[j].iter_mut() {
                        *x /= nrm;
                    }
                }
                let c = rr.try_inverse().ok_or_else(|| Error::Numerical("singular renormalisation".into()))?;
                let apply = |m: &mut [[f64; 3]; 3]| {
                    let old = *m;
                    for n in 0..3 {
                        for j in 0..3 {
                            m[n][j] = (0..3).map(|l| old[n][l] * c[(l, j)]).sum();
                        }
                    }
                };
                apply(&mut u);
                apply(&mut v);
                apply(&mut gg);
                log_gauge -= (0..3).map(|j| rr[(j, j)].ln()).sum::<f64>();
                inv_gauge = rr * inv_gauge;
                let sc = inv_gauge.abs().max();
                inv_gauge /= sc;
                inv_gauge_log += sc.ln();
            }
        }
    }
    let gp = Matrix3::from_fn(|n, j| if open[n] { C64::new(u[n][j], v[n][j]) } else { C64::new(u[n][j], 0.0) });
    let gm = Matrix3::from_fn(|n, j| if open[n] { C64::new(u[n][j], -v[n][j]) } else { C64::new(v[n][j], 0.0) });
    Ok(JostMatrices {
        p: ch.p,
        open,
        x_end: r[r.len() - 1] - r[0],
        gp,
        gm,
        log_gauge,
        inv_gauge: inv_gauge.map(|x| C64::new(x, 0.0)),
        inv_gauge_log,
    })
}

/// Johnson log-derivative propagation of ψ'' = (W − P²)ψ on a paired grid;
/// returns the open-block K matrix.
pub fn log_derivative_k(ch: &ChannelContext, r: &[f64], w: &[Matrix3<f64>]) -> Result<DMatrix<f64>> {
    if r.len() != w.len() || r.len() < 3 || r.len().is_multiple_of(2) {
        return Err(Error::Domain("log-derivative needs a paired grid".into()));
    }
    if ch.energy.im != 0.0 {
        return Err(Error::Domain("log-derivative oracle works on the real axis".into()));
    }
    let p2: [f64; 3] = core::array::from_fn(|n| {
        let q = ch.p[n] * ch.p[n];
        q.re
    });
    let q = |k: usize| -> Matrix3<f64> {
        let mut m = w[k];
        for n in 0..3 {
            m[(n, n)] -= p2[n];
        }
        m
    };
    let id = Matrix3::<f64>::identity();
    let mut y = id * 1e20;
    let mut k = 0;
    while k + 2 < r.len() {
        let h = r[k + 1] - r[k];
        y += q(k) * (h / 3.0);
        y = (id + y * h).try_inverse().ok_or_else(|| Error::NumericalAt { r: r[k], reason: "log-derivative pole".into() })? * y;
        let qm = q(k + 1);
        let u = (id - qm * (h * h / 6.0))
            .try_inverse()
            .ok_or_else(|| Error::NumericalAt { r: r[k + 1], reason: "singular midpoint".into() })?
            * qm;
        y += u * (4.0 * h / 3.0);
        y = (id + y * h).try_inverse().ok_or_else(|| Error::NumericalAt { r: r[k + 1], reason: "log-derivative pole".into() })?
            * y;
        y += q(k + 2) * (h / 3.0);
        k += 2;
    }
    let x = r[r.len() - 1] - r[0];
    let (mut f, mut fd, mut g, mut gd) = ([0.0; 3], [0.0; 3], [0.0; 3], [0.0; 3]);
    for n in 0..3 {
        if ch.open[n] {
            let pn = ch.p[n].re;
            let sp = pn.sqrt();
            let (s, c) = ((pn * x).sin(), (pn * x).cos());
            f[n] = s / sp;
            fd[n] = sp * c;
            g[n] = c / sp;
            gd[n] = -sp * s;
        } else {
            let kap = ch.p[n].im;
            f[n] = 1.0;
            fd[n] = kap;
            g[n] = 1.0;
            gd[n] = -kap;
        }
    }
    let a = Matrix3::from_fn(|i, j| y[(i, j)] * g[j] - if i == j { gd[i] } else { 0.0 });
    let b = Matrix3::from_fn(|i, j| (if i == j { fd[i] } else { 0.0 }) - y[(i, j)] * f[j]);
    let m = a.try_inverse().ok_or_else(|| Error::Numerical("log-derivative matching singular".into()))? * b;
    let o = ch.open_indices();
    Ok(DMatrix::from_fn(o.len(), o.len(), |i, j| m[(o[i], o[j])]))
}

/// Scattering engine on a fixed coupling table. `levels` nested grids
/// (stride 2^{levels−1} … 1) are combined by Richardson extrapolation in h².
#[derive(Debug, Clone)]
pub struct Propagator {
    pub r: Vec<f64>,
    pub w: Vec<Matrix3<f64>>,
    pub thresholds: [f64; 3],
    pub kinetic: f64,
    pub levels: usize,
}

impl Propagator {
    pub fn new(r: Vec<f64>, w: Vec<Matrix3<f64>>, thresholds: [f64; 3], kinetic: f64, levels: usize) -> Result<Self> {
        if levels == 0 || levels > 4 {
            return Err(Error::invalid("levels", "1 to 4 extrapolation levels"));
        }
        let stride = 1usize << (levels - 1);
        if r.len() != w.len() || r.len() < 3 || !(r.len() - 1).is_multiple_of(2 * stride) {
            return Err(Error::Domain("grid length incompatible with extrapolation levels".into()));
        }
        Ok(Self { r, w, thresholds, kinetic, levels })
    }

    pub fn channels(&self, e: f64) -> Result<ChannelContext> {
        make_channels(e, self.thresholds, self.kinetic)
    }

    pub fn r_wall(&self) -> f64 {
        self.r[0]
    }

    /// Largest |W| at R_∞ relative to the smallest |P|² at this energy.
    pub fn tail_ratio(&self, ch: &ChannelContext) -> f64 {
        let wt = self.w.last().unwrap().abs().max();
        let pmin = ch.p.iter().map(|p| p.norm_sqr()).fold(f64::INFINITY, f64::min);
        wt / pmin
    }

    pub fn jost_level(&self, ch: &ChannelContext, level: usize) -> Result<JostMatrices> {
        let stride = 1usize << (self.levels - 1 - level);
        if ch.energy.im == 0.0 {
            march_real(ch, &self.r, &self.w, stride)
        } else {
            Ok(march(ch, &self.r, &self.w, stride, false)?.0)
        }
    }

    /// Regular solution on the finest grid.
    pub fn regular_solution(&self, ch: &ChannelContext) -> Result<Vec<Matrix3<C64>>> {
        Ok(march(ch, &self.r, &self.w, 1, true)?.1.unwrap())
    }

    /// Per level (coarsest first): N = [F(−P) adj F(P)]ₒₒ e^{−shift} and
    /// D = det F(P) e^{−shift}, with the shift taken from the finest level.
    /// Both are entire in E, so unlike S they extrapolate cleanly even across
    /// resonances narrower than the level-to-level position error.
    fn numerator_denominator(&self, ch: &ChannelContext) -> Result<Vec<(DMatrix<C64>, C64)>> {
        let jl: Vec<JostMatrices> = (0..self.levels).map(|l| self.jost_level(ch, l)).collect::<Result<_>>()?;
        let shift = jl[self.levels - 1].log_det().re;
        jl.iter()
            .map(|j| {
                let d = (j.log_det() - shift).exp();
                let x = j.s_open()?;
                Ok((x * d, d))
            })
            .collect()
    }

    /// Open-block S on every level, coarsest first (no extrapolation).
    pub fn s_levels(&self, ch: &ChannelContext) -> Result<Vec<DMatrix<C64>>> {
        (0..self.levels).map(|l| self.jost_level(ch, l)?.s_open()).collect()
    }

    pub fn scatter(&self, e: f64) -> Result<ScatteringMatrices> {
        let ch = self.channels(e)?;
        if self.tail_ratio(&ch) > 1.0 {
            return Err(Error::Numerical(alloc::format!("coupling not flat at R_inf for E = {e:e} rad/s; increase r_infinity")));
        }
        let nd = self.numerator_denominator(&ch)?;
        let d = richardson(nd.iter().map(|(_, d)| DMatrix::from_element(1, 1, *d)).collect())[(0, 0)];
        if d.norm() == 0.0 {
            return Err(Error::JostSingular);
        }
        let n = richardson(nd.into_iter().map(|(n, _)| n).collect());
        ScatteringMatrices::from_s(ch, n / d)
    }

    /// Log-derivative oracle on the finest grid.
    pub fn scatter_log_derivative(&self, e: f64) -> Result<ScatteringMatrices> {
        let ch = self.channels(e)?;
        let k = log_derivative_k(&ch, &self.r, &self.w)?;
        let s = s_from_k(&k)?;
        ScatteringMatrices::from_s(ch, s)
    }

    /// ln det F(P) on the finest grid.
    pub fn log_det_jost(&self, e: C64) -> Result<C64> {
        let ch = make_channels_complex(e, self.thresholds, self.kinetic);
        Ok(self.jost_level(&ch, self.levels - 1)?.log_det())
    }

    /// det F(P)·e^{−shift}, extrapolated over the grid levels; analytic in E.
    pub fn det_jost(&self, e: C64, shift: f64) -> Result<C64> {
        let ch = make_channels_complex(e, self.thresholds, self.kinetic);
        let vals = (0..self.levels)
            .map(|l| Ok(DMatrix::from_element(1, 1, (self.jost_level(&ch, l)?.log_det() - shift).exp())))
            .collect::<Result<Vec<_>>>()?;
        Ok(richardson(vals)[(0, 0)])
    }
}

/// Richardson table for errors in even powers of h; inputs coarsest first.
pub fn richardson(mut t: Vec<DMatrix<C64>>) -> DMatrix<C64> {
    let mut factor = 4.0;
    while t.len() > 1 {
        t = t.windows(2).map(|w| (&w[1] * C64::new(factor, 0.0) - &w[0]) / C64::new(factor - 1.0, 0.0)).collect();
        factor *= 4.0;
    }
    t.pop().unwrap()
}

/// Upper bound of the local wavenumber for energies in `window` (used to grade
/// the scattering grid).
pub fn local_wavenumber(p: &crate::SystemParams, window: (f64, f64), r: f64) -> f64 {
    let w = crate::adiabatic::curves_at(p, r);
    let c = p.kinetic_constant();
    let mut m = 0.0f64;
    for e in [window.0, window.1] {
        for wn in w {
            m = m.max((e - wn).abs());
        }
    }
    (m / c).sqrt()
}

/// Graded base grid refined `levels − 1` times.
pub fn scattering_grid(
    p: &crate::SystemParams,
    spec: &crate::params::GridSpec,
    window: (f64, f64),
    levels: usize,
) -> Result<RadialGrid> {
    let mut g =
        RadialGrid::graded(spec.r_wall, spec.r_infinity, spec.h_max, spec.phase_step, |r| local_wavenumber(p, window, r))?;
    for _ in 1..levels {
        g = g.refined();
    }
    Ok(g)
}

/// Convolution with a unit-area Lorentzian of FWHM `gamma` on a uniform grid.
/// The curve is mirrored at both ends, which keeps the sum exactly invariant.
pub fn lossy_convolve(e: &[f64], y: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if !(gamma >= 0.0) {
        return Err(Error::Domain("cavity linewidth must be non-negative".into()));
    }
    if e.len() != y.len() {
        return Err(Error::Domain("energy and value arrays differ in length".into()));
    }
    if gamma == 0.0 || y.len() < 2 {
        return Ok(y.to_vec());
    }
    let n = e.len();
    let de = (e[n - 1] - e[0]) / (n - 1) as f64;
    if e.windows(2).any(|w| ((w[1] - w[0]) - de).abs() > 1e-6 * de.abs()) {
        return Err(Error::Domain("lossy convolution needs a uniform energy grid".into()));
    }
    let hw = 0.5 * gamma;
    // reach of the kernel: whole span plus many half-widths
    let reach = n as isize + (200.0 * hw / de).ceil() as isize;
    let reach = reach.min(20 * n as isize + 2000);
    let kern: Vec<f64> = (-reach..=reach)
        .map(|j| {
            let x = j as f64 * de;
            hw / (x * x + hw * hw)
        })
        .collect();
    let norm: f64 = kern.iter().sum();
    let mut out = alloc::vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (jj, kv) in kern.iter().enumerate() {
            let src = i as isize + jj as isize - reach;
            let period = 2 * n as isize;
            let mut idx = src.rem_euclid(period);
            if idx >= n as isize {
                idx = period - 1 - idx;
            }
            let idx = idx as usize;
            acc += kv * y[idx];
        }
        *o = acc / norm;
    }
    Ok(out)
}

/// ∫ y(x)·L(x − c) dx over the sampled range, with y piecewise linear and L
/// the unit-area Lorentzian of half-width `hw`; exact per segment.
fn lorentz_integral(e: &[f64], y: &[f64], c: f64, hw: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..e.len() - 1 {
        let (x0, x1) = (e[k], e[k + 1]);
        if x1 == x0 {
            continue;
        }
        let s = (y[k + 1] - y[k]) / (x1 - x0);
        let (u0, u1) = (x0 - c, x1 - c);
        let datan = (u1 / hw).atan() - (u0 / hw).atan();
        let dlog = ((u1 * u1 + hw * hw) / (u0 * u0 + hw * hw)).ln();
        acc += (y[k] - s * u0) * datan / PI + s * hw * dlog / (2.0 * PI);
    }
    acc
}

/// Convolution with a unit-area Lorentzian of FWHM `gamma` for samples on an
/// arbitrary increasing grid (e.g. an adaptively refined scan), evaluated at
/// `at`. The curve is taken piecewise linear and mirrored at both ends.
pub fn lossy_convolve_onto(e: &[f64], y: &[f64], at: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::Domain("cavity linewidth must be positive".into()));
    }
    if e.len() != y.len() || e.len() < 2 {
        return Err(Error::Domain("need at least two samples of equal length".into()));
    }
    if e.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Domain("sample energies must be increasing".into()));
    }
    let (a, b) = (e[0], e[e.len() - 1]);
    let hw = 0.5 * gamma;
    Ok(at
        .iter()
        .map(|&c| {
            lorentz_integral(e, y, c, hw) + lorentz_integral(e, y, 2.0 * a - c, hw) + lorentz_integral(e, y, 2.0 * b - c, hw)
        })
        .collect())
}

impl Propagator {
    /// Curves, couplings and extrapolation grids for `params` in one go.
    pub fn for_params(
        p: &crate::SystemParams,
        spec: &crate::params::GridSpec,
        window: (f64, f64),
        levels: usize,
    ) -> Result<Self> {
        let grid = scattering_grid(p, spec, window, levels)?;
        let curves = crate::adiabatic::diagonalize_curves(p, &grid)?;
        let tables = crate::nonadiabatic::CouplingTables::build(&curves)?;
        Self::new(curves.r, tables.w, curves.thresholds, p.kinetic_constant(), levels)
    }
}
