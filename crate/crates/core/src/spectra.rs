//! Momentum-space amplitudes of the beam families and the Poisson-like
//! frequency spectrum used for polychromatic packets.
//!
//! Radial spectra are real functions of `k_perp`; the azimuthal factor
//! `exp(i l phi)` is carried separately. Averages use the cylindrical measure
//! `k_perp dk_perp` over the propagating disk `k_perp <= k` with the exact
//! longitudinal wavenumber `k_z = sqrt(k^2 - k_perp^2)`. The radial integral is
//! done in the polar angle `theta` (`k_perp = k sin theta`), which removes the
//! square-root endpoint singularity at `k_perp = k`.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, laguerre_poly};

/// Relative amplitude below which a spectrum is treated as zero.
pub const AMPLITUDE_FLOOR: f64 = 1e-9;
/// Budget for propagating spectral mass lost to truncation.
pub const TAIL_BUDGET: f64 = 1e-9;
/// Default radial quadrature order.
pub const DEFAULT_ORDER: usize = 256;
/// Default ring width of the regularized Bessel spectrum, relative to `k_perp0`.
pub const DEFAULT_RING_WIDTH: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    PlaneWave,
    Gaussian,
    LaguerreGauss,
    BesselRing,
}

/// Parametric momentum-space amplitude of a monochromatic mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralModel {
    pub kind: ModeKind,
    /// Carrier wavenumber.
    pub k: f64,
    /// Waist (Gaussian and Laguerre–Gauss).
    pub w0: f64,
    pub l: i32,
    pub p: u32,
    /// Ring radius (Bessel ring).
    pub kperp0: f64,
    /// Absolute rms width of the ring in `|psi|^2` (Bessel ring).
    pub ring_width: f64,
}

impl SpectralModel {
    pub fn plane_wave(k: f64) -> Result<Self> {
        check_k(k)?;
        Ok(SpectralModel {
            kind: ModeKind::PlaneWave,
            k,
            w0: f64::INFINITY,
            l: 0,
            p: 0,
            kperp0: 0.0,
            ring_width: 0.0,
        })
    }

    pub fn gaussian(k: f64, w0: f64) -> Result<Self> {
        let mut m = Self::laguerre_gauss(k, w0, 0, 0)?;
        m.kind = ModeKind::Gaussian;
        Ok(m)
    }

    pub fn laguerre_gauss(k: f64, w0: f64, l: i32, p: u32) -> Result<Self> {
        check_k(k)?;
        if !(w0 > 0.0) || !w0.is_finite() {
            return Err(Error::invalid(format!("waist must be positive, got {w0}")));
        }
        if k * w0 < 3.0 {
            log::warn!("k w0 = {:.3} < 3: outside the paraxial regime", k * w0);
        }
        Ok(SpectralModel {
            kind: ModeKind::LaguerreGauss,
            k,
            w0,
            l,
            p,
            kperp0: 0.0,
            ring_width: 0.0,
        })
    }

    pub fn bessel_ring(k: f64, kperp0: f64, l: i32) -> Result<Self> {
        check_k(k)?;
        if !(kperp0 > 0.0 && kperp0 < k) {
            return Err(Error::invalid(format!(
                "ring radius must satisfy 0 < k_perp0 < k (got {kperp0}, k = {k})"
            )));
        }
        Ok(SpectralModel {
            kind: ModeKind::BesselRing,
            k,
            w0: f64::INFINITY,
            l,
            p: 0,
            kperp0,
            ring_width: DEFAULT_RING_WIDTH * kperp0,
        })
    }

    /// Overrides the ring width as a fraction of `k_perp0`.
    pub fn with_relative_ring_width(mut self, eps: f64) -> Result<Self> {
        if self.kind != ModeKind::BesselRing || !(eps > 0.0) {
            return Err(Error::invalid(
                "ring width applies to Bessel rings and must be > 0",
            ));
        }
        self.ring_width = eps * self.kperp0;
        Ok(self)
    }

    /// Same mode at another carrier wavenumber.
    pub fn with_k(&self, k: f64) -> Result<Self> {
        check_k(k)?;
        let mut m = self.clone();
        m.k = k;
        Ok(m)
    }

    /// Mode order `N = |l| + 2p`.
    pub fn order(&self) -> u32 {
        self.l.unsigned_abs() + 2 * self.p
    }

    /// `z_R = k w0^2 / 2`, for waisted modes.
    pub fn rayleigh_range(&self) -> Option<f64> {
        match self.kind {
            ModeKind::Gaussian | ModeKind::LaguerreGauss => Some(0.5 * self.k * self.w0 * self.w0),
            _ => None,
        }
    }

    pub fn kw0(&self) -> Option<f64> {
        self.rayleigh_range().map(|_| self.k * self.w0)
    }

    /// Unchecked real radial amplitude (no azimuthal factor).
    pub fn amplitude(&self, kperp: f64) -> f64 {
        match self.kind {
            ModeKind::PlaneWave => {
                if kperp == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ModeKind::Gaussian | ModeKind::LaguerreGauss => {
                let x = self.w0 * kperp / SQRT_2;
                let la = self.l.unsigned_abs();
                x.powi(la as i32) * laguerre_poly(self.p, la, x * x) * (-0.5 * x * x).exp()
            }
            ModeKind::BesselRing => {
                let d = kperp - self.kperp0;
                (-d * d / (4.0 * self.ring_width * self.ring_width)).exp()
            }
        }
    }

    /// `k_perp` interval outside which the amplitude is below
    /// [`AMPLITUDE_FLOOR`] of its peak (not clipped to `k`).
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            ModeKind::PlaneWave => (0.0, 0.0),
            ModeKind::BesselRing => {
                let half = 2.0 * self.ring_width * (1.0 / AMPLITUDE_FLOOR).ln().sqrt();
                ((self.kperp0 - half).max(0.0), self.kperp0 + half)
            }
            ModeKind::Gaussian | ModeKind::LaguerreGauss => {
                let scale = SQRT_2 / self.w0;
                let x_max = 2.0 * (((self.order() + 1) as f64).sqrt() + 7.0);
                let n = 4096;
                let xs: Vec<f64> = (0..=n).map(|i| x_max * i as f64 / n as f64).collect();
                let amps: Vec<f64> = xs
                    .iter()
                    .map(|&x| self.amplitude(x * scale).abs())
                    .collect();
                let peak = amps.iter().cloned().fold(0.0, f64::max);
                let last = amps
                    .iter()
                    .rposition(|&a| a >= AMPLITUDE_FLOOR * peak)
                    .unwrap_or(n);
                (0.0, xs[(last + 1).min(n)] * scale)
            }
        }
    }
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!(
            "wavenumber must be positive, got {k}"
        )));
    }
    Ok(())
}

/// Radial amplitude at `k_perp`, restricted to propagating waves.
pub fn eval_radial_spectrum(model: &SpectralModel, kperp: f64) -> Result<f64> {
    if !(0.0..=model.k).contains(&kperp) {
        return Err(Error::OutOfDomain { kperp, k: model.k });
    }
    Ok(model.amplitude(kperp))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    KPerp2,
    Kz,
    /// The spectral norm `int |psi|^2 k_perp dk_perp`.
    One,
}

/// `|psi|^2`-weighted averages over the propagating disk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Moments {
    pub norm: f64,
    pub mean_kperp2: f64,
    pub mean_kz: f64,
    /// Propagating mass dropped by the amplitude cutoff, relative to `norm`.
    pub truncated_fraction: f64,
    /// Mass beyond `k_perp = k`, relative to the full (untruncated) mass.
    pub evanescent_fraction: f64,
}

/// Radial quadrature in the polar angle over `[k_perp_lo, k_perp_hi]`.
/// Returns `(k_perp, k_z, weight)` with `weight` absorbing `k_perp dk_perp`.
pub(crate) fn polar_nodes(k: f64, lo: f64, hi: f64, order: usize) -> Result<Vec<(f64, f64, f64)>> {
    let t0 = (lo / k).clamp(0.0, 1.0).asin();
    let t1 = if hi >= k { FRAC_PI_2 } else { (hi / k).asin() };
    if !(t1 > t0) {
        return Ok(Vec::new());
    }
    let q = gauss_legendre(order, t0, t1)?;
    Ok(q.iter()
        .map(|(t, w)| {
            let (s, c) = t.sin_cos();
            (k * s, k * c, w * k * k * s * c)
        })
        .collect())
}

/// Spectral moments with an explicit radial quadrature order.
pub fn moments_with_order(model: &SpectralModel, order: usize) -> Result<Moments> {
    let k = model.k;
    if model.kind == ModeKind::PlaneWave {
        return Ok(Moments {
            norm: 1.0,
            mean_kperp2: 0.0,
            mean_kz: k,
            truncated_fraction: 0.0,
            evanescent_fraction: 0.0,
        });
    }
    let (lo, hi) = model.support();
    let mass = |a: f64, b: f64, n: usize| -> Result<f64> {
        Ok(polar_nodes(k, a, b, n)?
            .into_iter()
            .map(|(kp, _, w)| w * model.amplitude(kp).powi(2))
            .sum())
    };
    let (mut norm, mut s_kp2, mut s_kz) = (0.0, 0.0, 0.0);
    for (kp, kz, w) in polar_nodes(k, lo, hi.min(k), order)? {
        let d = w * model.amplitude(kp).powi(2);
        norm += d;
        s_kp2 += d * kp * kp;
        s_kz += d * kz;
    }
    if !(norm > 0.0) {
        return Err(Error::Degenerate("spectrum has no propagating mass".into()));
    }
    let mut dropped = 0.0;
    if lo > 0.0 {
        dropped += mass(0.0, lo.min(k), 64)?;
    }
    if hi < k {
        dropped += mass(hi, k, 64)?;
    }
    let truncated_fraction = dropped / norm;
    if truncated_fraction > TAIL_BUDGET {
        return Err(Error::AccuracyLoss {
            tail: truncated_fraction,
            budget: TAIL_BUDGET,
        });
    }
    let evanescent = if hi > k {
        let q = gauss_legendre(128, k, hi)?;
        q.integrate(|kp| kp * model.amplitude(kp).powi(2))
    } else {
        0.0
    };
    Ok(Moments {
        norm,
        mean_kperp2: s_kp2 / norm,
        mean_kz: s_kz / norm,
        truncated_fraction,
        evanescent_fraction: evanescent / (norm + evanescent),
    })
}

pub fn moments(model: &SpectralModel) -> Result<Moments> {
    moments_with_order(model, DEFAULT_ORDER)
}

pub fn spectral_moment(model: &SpectralModel, observable: Observable) -> Result<f64> {
    let m = moments(model)?;
    Ok(match observable {
        Observable::KPerp2 => m.mean_kperp2,
        Observable::Kz => m.mean_kz,
        Observable::One => m.norm,
    })
}

/// Sampled frequency spectrum: nodes `omega_m` with real amplitudes `a_m`,
/// normalized to `sum a_m^2 = 1`.
///
/// `a_m^2` is the spectral weight carried by node `m`. A field synthesized as
/// a quadrature of `int A(omega) ... d omega` uses the coefficients
/// `sqrt(quad_weight_m) a_m` instead, see [`FrequencySpectrum::field_coefficients`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencySpectrum {
    pub s: f64,
    pub omega0: f64,
    pub nodes: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Quadrature weights of the nodes (`1` for a single carrier).
    pub quad_weights: Vec<f64>,
}

impl FrequencySpectrum {
    pub fn monochromatic(omega0: f64) -> Result<Self> {
        check_k(omega0)?;
        Ok(FrequencySpectrum {
            s: f64::INFINITY,
            omega0,
            nodes: vec![omega0],
            amplitudes: vec![1.0],
            quad_weights: vec![1.0],
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// `w_m A(omega_m)`, with `|A|^2` the spectral density.
    pub fn field_coefficients(&self) -> Vec<f64> {
        self.amplitudes
            .iter()
            .zip(&self.quad_weights)
            .map(|(a, w)| a * w.sqrt())
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes
            .iter()
            .copied()
            .zip(self.amplitudes.iter().copied())
    }

    /// `sum a_m^2 omega_m^n`.
    pub fn moment(&self, n: i32) -> f64 {
        self.iter().map(|(w, a)| a * a * w.powi(n)).sum()
    }

    pub fn mean_frequency(&self) -> f64 {
        self.moment(1)
    }

    pub fn rms_width(&self) -> f64 {
        let m = self.mean_frequency();
        (self.moment(2) - m * m).max(0.0).sqrt()
    }
}

/// Gauss–Legendre sampling of the `omega^s exp(-s omega / omega0)` spectrum on
/// `[omega0 max(0, 1 - 8/sqrt(s)), omega0 (1 + 8/sqrt(s))]`.
///
/// `m == 1` returns the monochromatic carrier.
pub fn poisson_nodes(s: f64, omega0: f64, m: usize) -> Result<FrequencySpectrum> {
    let half = 8.0 / s.sqrt();
    poisson_nodes_on(s, omega0, m, (1.0 - half).max(0.0), 1.0 + half)
}

/// As [`poisson_nodes`] on `[lo * omega0, hi * omega0]`.
pub fn poisson_nodes_on(
    s: f64,
    omega0: f64,
    m: usize,
    lo: f64,
    hi: f64,
) -> Result<FrequencySpectrum> {
    if !(s > 0.0) {
        return Err(Error::invalid(format!(
            "spectral shape s must be > 0, got {s}"
        )));
    }
    check_k(omega0)?;
    match m {
        0 => return Err(Error::invalid("need at least one frequency node")),
        1 => return FrequencySpectrum::monochromatic(omega0),
        _ => {}
    }
    let q = gauss_legendre(m, lo * omega0, hi * omega0)?;
    // log of omega^s exp(-s omega/omega0), relative to its peak at omega0
    let log_density = |w: f64| {
        if w <= 0.0 {
            f64::NEG_INFINITY
        } else {
            s * (w / omega0).ln() - s * (w / omega0 - 1.0)
        }
    };
    let mut nodes = Vec::with_capacity(m);
    let mut amps = Vec::with_capacity(m);
    let mut quad_weights = Vec::with_capacity(m);
    for (w, qw) in q.iter() {
        let ld = log_density(w);
        if ld < (1e-12f64).ln() {
            continue;
        }
        nodes.push(w);
        amps.push((qw * ld.exp()).sqrt());
        quad_weights.push(qw);
    }
    let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Degenerate("frequency spectrum is empty".into()));
    }
    amps.iter_mut().for_each(|a| *a /= norm);
    Ok(FrequencySpectrum {
        s,
        omega0,
        nodes,
        amplitudes: amps,
        quad_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gaussian_peak_and_lg_reduction() {
        let g = SpectralModel::gaussian(1.0, 5.0).unwrap();
        assert_eq!(eval_radial_spectrum(&g, 0.0).unwrap(), 1.0);
        let lg = SpectralModel::laguerre_gauss(1.0, 5.0, 0, 0).unwrap();
        for kp in [0.0, 0.1, 0.3, 0.77, 1.0] {
            assert_eq!(lg.amplitude(kp), g.amplitude(kp));
        }
    }

    #[test]
    fn lg_l1_at_sqrt2_over_w0() {
        let w0 = 5.0;
        let lg = SpectralModel::laguerre_gauss(1.0, w0, 1, 0).unwrap();
        let v = eval_radial_spectrum(&lg, SQRT_2 / w0).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
        assert!((v - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn evanescent_rejected() {
        let g = SpectralModel::gaussian(1.0, 5.0).unwrap();
        assert!(matches!(
            eval_radial_spectrum(&g, 1.2),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn gaussian_mean_kperp2() {
        for kw0 in [20.0, 50.0] {
            let g = SpectralModel::gaussian(1.0, kw0).unwrap();
            let v = spectral_moment(&g, Observable::KPerp2).unwrap();
            let exact = 2.0 / (kw0 * kw0);
            assert!((v / exact - 1.0).abs() < 1e-10, "kw0={kw0}: {v} vs {exact}");
        }
    }

    /// Oracle: dense midpoint sum in k_perp, independent of the polar-angle
    /// Gauss–Legendre path.
    fn brute_mean_kperp2(m: &SpectralModel) -> f64 {
        let hi = 30.0 / m.w0;
        let n = 400_000;
        let h = hi / n as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let kp = (i as f64 + 0.5) * h;
            let d = kp * m.amplitude(kp).powi(2);
            num += d * kp * kp;
            den += d;
        }
        num / den
    }

    #[test]
    fn lg_mean_kperp2() {
        let w0 = 60.0;
        for (l, p) in [(1, 0), (2, 1), (0, 2), (-3, 1), (6, 0)] {
            let m = SpectralModel::laguerre_gauss(1.0, w0, l, p).unwrap();
            let v = spectral_moment(&m, Observable::KPerp2).unwrap();
            let oracle = brute_mean_kperp2(&m);
            let closed = 2.0 * (m.order() + 1) as f64 / (w0 * w0);
            assert!(
                (oracle / closed - 1.0).abs() < 1e-8,
                "oracle {oracle} closed {closed}"
            );
            assert!(
                (v / closed - 1.0).abs() < 1e-8,
                "l={l} p={p}: {v} vs {closed}"
            );
        }
    }

    #[test]
    fn bessel_ring_mean_kperp2() {
        let m = SpectralModel::bessel_ring(1.0, 0.1, 0).unwrap();
        let v = spectral_moment(&m, Observable::KPerp2).unwrap();
        let eps = m.ring_width;
        assert!((v - 0.01).abs() < 5.0 * eps * eps, "{v}");
    }

    #[test]
    fn small_waist_reports_evanescent_mass() {
        let g = SpectralModel::gaussian(1.0, 5.0).unwrap();
        let m = moments(&g).unwrap();
        // analytic: exp(-k^2 w0^2 / 2)
        assert!((m.evanescent_fraction / (-12.5f64).exp() - 1.0).abs() < 1e-6);
        assert!(m.truncated_fraction < TAIL_BUDGET);
    }

    #[test]
    fn poisson_mean_frequency() {
        let f = poisson_nodes(20.0, 1.0, 64).unwrap();
        assert!((f.mean_frequency() / 1.05 - 1.0).abs() < 1e-6);
        let sum: f64 = f.amplitudes.iter().map(|a| a * a).sum();
        assert!((sum - 1.0).abs() < 1e-14);
        let narrow = poisson_nodes(1e6, 2.0, 64).unwrap();
        assert!((narrow.mean_frequency() - 2.0).abs() < 1e-5 * 2.0);
    }

    #[test]
    fn poisson_width_matches_riemann_oracle() {
        for s in [20.0, 100.0] {
            let f = poisson_nodes(s, 1.0, 64).unwrap();
            // oracle: 1e6-point Riemann sum of omega^s exp(-s omega)
            let n = 1_000_000;
            let hi = 4.0;
            let h = hi / n as f64;
            let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
            for i in 1..n {
                let w = i as f64 * h;
                let d = (s * w.ln() - s * (w - 1.0)).exp();
                m0 += d;
                m1 += d * w;
                m2 += d * w * w;
            }
            let mean = m1 / m0;
            let rms = (m2 / m0 - mean * mean).sqrt();
            assert!((f.rms_width() / rms - 1.0).abs() < 1e-6, "s={s}");
            // Gamma(s+1) closed form: rms / mean = 1/sqrt(s+1)
            assert!((rms / mean - 1.0 / (s + 1.0).sqrt()).abs() < 1e-6);
        }
    }

    #[test]
    fn single_node_is_monochromatic() {
        let f = poisson_nodes(20.0, 1.5, 1).unwrap();
        assert_eq!(f.nodes, vec![1.5]);
        assert_eq!(f.amplitudes, vec![1.0]);
        assert!(poisson_nodes(20.0, 1.0, 0).is_err());
        assert!(poisson_nodes(-1.0, 1.0, 8).is_err());
    }

    #[test]
    fn kz_below_k_and_monotone_in_order() {
        let mut prev = f64::INFINITY;
        for l in 0..7 {
            let m = SpectralModel::laguerre_gauss(1.0, 8.0, l, 0).unwrap();
            let kz = spectral_moment(&m, Observable::Kz).unwrap();
            assert!(kz < 1.0);
            assert!(kz < prev);
            prev = kz;
        }
        let pw = SpectralModel::plane_wave(1.0).unwrap();
        assert_eq!(spectral_moment(&pw, Observable::Kz).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn moments_are_scale_invariant(kw0 in 5.0f64..80.0, l in -4i32..5, p in 0u32..3, k in 0.5f64..3.0) {
            let m = SpectralModel::laguerre_gauss(k, kw0 / k, l, p).unwrap();
            let a = moments(&m).unwrap();
            // rescaling psi by alpha changes only the norm
            let alpha2 = 7.3f64;
            let kz_scaled = {
                let (lo, hi) = m.support();
                let nodes = polar_nodes(k, lo, hi.min(k), DEFAULT_ORDER).unwrap();
                let (mut n, mut s) = (0.0, 0.0);
                for (kp, kz, w) in nodes {
                    let d = alpha2 * w * m.amplitude(kp).powi(2);
                    n += d;
                    s += d * kz;
                }
                s / n
            };
            prop_assert!((kz_scaled - a.mean_kz).abs() < 1e-14 * k);
            prop_assert!(a.mean_kz < k);
        }
    }
}
