//! Vector packets assembled from finite plane-wave sets, their energy and
//! momentum densities, and the conserved integrals built from them.
//!
//! Fields are analytic signals, `E(r, t) = sum_j mu_j e_j exp(i(k_j.r - w_j t))`
//! with `H` likewise and `h_j = k_j/|k_j| x e_j`. The physical fields are the
//! real parts. With `c = 1` the densities are `U = (E^2 + H^2)/2`, `P = E x H`.
//!
//! Generated sets sample the transverse spectrum on rings: Gauss–Legendre
//! nodes in `k_perp`, shared by every frequency, times `n_phi` uniform
//! azimuths. The spectral energy per `d omega d^2 k_perp` is
//! `|A(omega) psi(k_perp)|^2`, so a single-frequency set has the energy
//! velocity `<k_z>/k` of the scalar model.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    cross, dot, gauss_legendre, integrate_grid, integrate_grid_vec, norm, Axis, Complex3, CylGrid,
    Vec3,
};
use crate::par;
use crate::spectra::{poisson_nodes, FrequencySpectrum, ModeKind, SpectralModel};

/// Budget on energy in the outer 5% of the integration window.
pub const LEAK_BUDGET: f64 = 1e-6;
const EDGE_FRACTION: f64 = 0.05;
/// Time step of the virial finite difference, in units of `1/omega0`.
pub const VIRIAL_STEP: f64 = 0.01;
/// Slack of the pointwise `|P| <= U` check, relative to the peak of `U`.
pub const NULL_SLACK: f64 = 1e-12;
/// Azimuthal harmonics kept per ring on either side of `l`: the polarization
/// triad and `k x e` are trigonometric polynomials of degree 3 in the azimuth.
const HARMONIC_SPAN: i32 = 3;

const C0: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    /// `x` before rotation into the plane transverse to `k`.
    Linear,
    /// `(x + i y)/sqrt 2`, positive helicity.
    Circular,
}

impl Polarization {
    pub fn vector(self) -> Complex3 {
        match self {
            Polarization::Linear => Complex3::from_real([1.0, 0.0, 0.0]),
            Polarization::Circular => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                Complex3::new(Complex64::new(s, 0.0), Complex64::new(0.0, s), C0)
            }
        }
    }
}

/// Minimal rotation taking `z` onto the unit vector `n`, applied to `v`.
fn rotate_from_z(n: Vec3, v: &Complex3) -> Complex3 {
    let u = [-n[1], n[0], 0.0];
    let uv = v.dot_real(u) / (1.0 + n[2]);
    let uxv = Complex3::from_real(u).cross(v);
    let mut out = v.scale_re(n[2]) + uxv;
    for c in 0..3 {
        out.0[c] += uv * u[c];
    }
    out
}

fn real_cross(a: Vec3, b: &Complex3) -> Complex3 {
    Complex3::from_real(a).cross(b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    pub k: Vec3,
    pub omega: f64,
    /// Spectral amplitude; the field coefficient is `measure * e`.
    pub e: Complex3,
    pub h: Complex3,
    pub measure: f64,
}

impl PlaneWave {
    /// Plane wave along `k` whose amplitude is `pol` (given in the frame where
    /// `k` points along `z`) rotated into the plane transverse to `k`.
    pub fn along(k: Vec3, pol: Complex3, measure: f64) -> Result<Self> {
        let omega = norm(k);
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::invalid(
                "plane wave needs a finite nonzero wavevector",
            ));
        }
        let n = k.map(|x| x / omega);
        if n[2] <= -1.0 + 1e-12 {
            return Err(Error::invalid("wavevector antiparallel to z"));
        }
        if pol.0[2].norm() > 0.0 {
            return Err(Error::invalid("polarization must lie in the xy plane"));
        }
        let e = rotate_from_z(n, &pol);
        Ok(PlaneWave {
            k,
            omega,
            e,
            h: real_cross(n, &e),
            measure,
        })
    }

    pub fn direction(&self) -> Vec3 {
        self.k.map(|x| x / self.omega)
    }
}

/// Frequency ring of a generated set, with the azimuthal harmonics of its
/// field coefficients: `coef[m][c]` for `E_x, E_y, E_z, H_x, H_y, H_z`.
#[derive(Debug, Clone)]
struct Ring {
    ik: usize,
    omega: f64,
    kz: f64,
    coef: Vec<[Complex64; 6]>,
}

#[derive(Debug, Clone)]
pub struct PlaneWaveSet {
    pub polarization: Option<Polarization>,
    pub l: i32,
    pub omega0: f64,
    /// Waist of the generating model, used to size integration grids.
    pub w0: Option<f64>,
    /// Rms width in `omega` of the spectral energy.
    pub sigma_omega: f64,
    pub components: Vec<PlaneWave>,
    /// Spectral energy dropped with samples at `k_perp >= omega`.
    pub dropped_fraction: f64,
    kperps: Vec<f64>,
    rings: Vec<Ring>,
    m_lo: i32,
    n_m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EmSampling {
    pub n_kperp: usize,
    pub n_phi: usize,
}

impl Default for EmSampling {
    fn default() -> Self {
        EmSampling {
            n_kperp: 64,
            n_phi: 16,
        }
    }
}

impl PlaneWaveSet {
    /// Hand-built set. Grid evaluation falls back to direct summation.
    pub fn from_components(components: Vec<PlaneWave>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("plane-wave set is empty"));
        }
        let wsum: f64 = components.iter().map(|c| c.measure.abs()).sum();
        let omega0 = components
            .iter()
            .map(|c| c.omega * c.measure.abs())
            .sum::<f64>()
            / wsum;
        Ok(PlaneWaveSet {
            polarization: None,
            l: 0,
            omega0,
            w0: None,
            sigma_omega: 0.0,
            components,
            dropped_fraction: 0.0,
            kperps: Vec::new(),
            rings: Vec::new(),
            m_lo: 0,
            n_m: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Spectral energy weight `mu |e|^2` of every component.
    pub fn energy_weights(&self) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.measure * c.e.norm_sqr())
            .collect()
    }

    /// `sum mu |e|^2 k_hat / sum mu |e|^2`: the energy velocity of the
    /// continuum field the set samples.
    pub fn spectral_energy_velocity(&self) -> Result<Vec3> {
        let mut num = [0.0; 3];
        let mut den = 0.0;
        for (c, w) in self.components.iter().zip(self.energy_weights()) {
            let n = c.direction();
            for i in 0..3 {
                num[i] += w * n[i];
            }
            den += w;
        }
        if !(den > 0.0) {
            return Err(Error::Degenerate("plane-wave set carries no energy".into()));
        }
        Ok(num.map(|x| x / den))
    }
}

/// Spectral shape `s` and node count of the default vector packet.
pub const PACKET_S: f64 = 100.0;
pub const PACKET_NODES: usize = 48;

/// Default vector Gaussian packet: waist `kw0 / omega0` at `omega0 = 1`,
/// Poisson-like spectrum with [`PACKET_S`] on [`PACKET_NODES`] nodes.
pub fn gaussian_packet(kw0: f64, polarization: Polarization) -> Result<PlaneWaveSet> {
    synthesize_em(
        &SpectralModel::gaussian(1.0, kw0)?,
        &poisson_nodes(PACKET_S, 1.0, PACKET_NODES)?,
        polarization,
        EmSampling::default(),
    )
}

/// Vector packet whose transverse spectrum is `model` (scaled with the
/// model's `w0`, independent of frequency) and frequency content `spectrum`.
pub fn synthesize_em(
    model: &SpectralModel,
    spectrum: &FrequencySpectrum,
    polarization: Polarization,
    sampling: EmSampling,
) -> Result<PlaneWaveSet> {
    let pol = polarization.vector();
    let coeffs = spectrum.field_coefficients();
    let base = PlaneWaveSet {
        polarization: Some(polarization),
        l: model.l,
        omega0: spectrum.omega0,
        w0: model.rayleigh_range().map(|_| model.w0),
        sigma_omega: spectrum.rms_width(),
        components: Vec::new(),
        dropped_fraction: 0.0,
        kperps: Vec::new(),
        rings: Vec::new(),
        m_lo: 0,
        n_m: 1,
    };

    if model.kind == ModeKind::PlaneWave {
        let mut set = PlaneWaveSet {
            kperps: vec![0.0],
            ..base
        };
        for (iw, (&omega, &c)) in spectrum.nodes.iter().zip(&coeffs).enumerate() {
            let w = spectrum.quad_weights[iw];
            let e = pol.scale_re(c / w);
            let pw = PlaneWave::along([0.0, 0.0, omega], e, w)?;
            let mut coef = [C0; 6];
            for i in 0..3 {
                coef[i] = pw.e.0[i] * w;
                coef[3 + i] = pw.h.0[i] * w;
            }
            set.rings.push(Ring {
                ik: 0,
                omega,
                kz: omega,
                coef: vec![coef],
            });
            set.components.push(pw);
        }
        return Ok(set);
    }

    if sampling.n_kperp < 2 || sampling.n_phi < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 k_perp and 2 azimuth samples, got {} x {}",
            sampling.n_kperp, sampling.n_phi
        )));
    }
    let (lo, hi) = model.support();
    let q = gauss_legendre(sampling.n_kperp, lo, hi)?;
    let n_phi = sampling.n_phi;
    let m_lo = model.l - HARMONIC_SPAN;
    let n_m = (2 * HARMONIC_SPAN + 1) as usize;
    // Harmonics are exact only when the azimuth sampling resolves them.
    let with_rings = n_phi >= n_m;
    let mut set = PlaneWaveSet {
        kperps: q.nodes.clone(),
        m_lo,
        n_m,
        ..base
    };
    let phases: Vec<(f64, Complex64)> = (0..n_phi)
        .map(|p| {
            let phi = 2.0 * PI * p as f64 / n_phi as f64;
            (phi, Complex64::from_polar(1.0, model.l as f64 * phi))
        })
        .collect();
    let mut total = 0.0;
    let mut dropped = 0.0;
    for (iw, (&omega, &c)) in spectrum.nodes.iter().zip(&coeffs).enumerate() {
        let w_omega = spectrum.quad_weights[iw];
        let a = c / w_omega;
        for (ik, (kp, wk)) in q.iter().enumerate() {
            let amp = a * model.amplitude(kp);
            let energy = w_omega * wk * kp * 2.0 * PI * amp * amp;
            total += energy;
            if kp >= omega {
                dropped += energy;
                continue;
            }
            let kz = (omega * omega - kp * kp).sqrt();
            let ring_measure = w_omega * wk * kp * 2.0 * PI * omega / kz;
            let scal = amp * (kz / omega).sqrt();
            let start = set.components.len();
            for &(phi, twist) in &phases {
                let (s, co) = phi.sin_cos();
                let n = [kp * co / omega, kp * s / omega, kz / omega];
                let e = rotate_from_z(n, &pol).scale(twist * scal);
                set.components.push(PlaneWave {
                    k: n.map(|x| x * omega),
                    omega,
                    e,
                    h: real_cross(n, &e),
                    measure: ring_measure / n_phi as f64,
                });
            }
            if with_rings {
                let comps = &set.components[start..];
                let coef = (0..n_m)
                    .map(|im| {
                        let m = m_lo + im as i32;
                        let im_pow = Complex64::i().powi(m);
                        let mut acc = [C0; 6];
                        for (pw, &(phi, _)) in comps.iter().zip(&phases) {
                            let f = Complex64::from_polar(1.0, -(m as f64) * phi);
                            for i in 0..3 {
                                acc[i] += pw.e.0[i] * f;
                                acc[3 + i] += pw.h.0[i] * f;
                            }
                        }
                        acc.map(|x| x * im_pow * (ring_measure / n_phi as f64))
                    })
                    .collect();
                set.rings.push(Ring {
                    ik,
                    omega,
                    kz,
                    coef,
                });
            }
        }
    }
    if set.components.is_empty() {
        return Err(Error::Degenerate(
            "no propagating plane waves in the sampled spectrum".into(),
        ));
    }
    set.dropped_fraction = if total > 0.0 { dropped / total } else { 0.0 };
    if !with_rings {
        set.kperps.clear();
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmSample {
    pub r: Vec3,
    pub t: f64,
    pub e: Complex3,
    pub h: Complex3,
}

impl EmSample {
    pub fn real_e(&self) -> Vec3 {
        self.e.re()
    }

    pub fn real_h(&self) -> Vec3 {
        self.h.re()
    }
}

/// Direct summation over the components.
pub fn eval_fields(set: &PlaneWaveSet, r: Vec3, t: f64) -> EmSample {
    let mut e = Complex3::ZERO;
    let mut h = Complex3::ZERO;
    for c in &set.components {
        let ph = Complex64::from_polar(c.measure, dot(c.k, r) - c.omega * t);
        c.e.mul_add_to(ph, &mut e);
        c.h.mul_add_to(ph, &mut h);
    }
    EmSample { r, t, e, h }
}

/// `(U, P)` from the instantaneous real fields.
pub fn energy_momentum_densities(sample: &EmSample) -> (f64, Vec3) {
    densities(sample.real_e(), sample.real_h())
}

pub fn densities(e: Vec3, h: Vec3) -> (f64, Vec3) {
    (0.5 * (dot(e, e) + dot(h, h)), cross(e, h))
}

/// Integration grid of a [`PlaneWaveSet`]: a cylinder of radius
/// `radial_widths * w(z_max)` around the `z` window
/// `[ct - rear_factor * L, ct + L]`, `L = window_sigmas * sigma_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmGridSpec {
    /// Minimum radial sample count.
    pub n_r: usize,
    pub n_phi: usize,
    pub n_z: usize,
    pub radial_widths: f64,
    pub window_sigmas: f64,
    /// Extra room behind the packet for the trailing tail far from focus.
    /// `n_z` counts samples over `2 L` and is scaled with the window.
    pub rear_factor: f64,
    /// Largest radial step, in waists.
    pub max_dr: f64,
}

impl Default for EmGridSpec {
    fn default() -> Self {
        EmGridSpec {
            n_r: 64,
            n_phi: 16,
            n_z: 256,
            radial_widths: 5.0,
            window_sigmas: 10.0,
            rear_factor: 1.0,
            max_dr: 1.0 / 16.0,
        }
    }
}

impl EmGridSpec {
    /// Doubles every sampling density.
    pub fn refined(&self) -> Self {
        EmGridSpec {
            n_r: 2 * self.n_r,
            n_phi: 2 * self.n_phi,
            n_z: 2 * self.n_z - 1,
            max_dr: 0.5 * self.max_dr,
            ..*self
        }
    }

    /// Rms length of the energy density along `z` for a transform-limited
    /// packet, `1 / (2 sigma_omega)`.
    pub fn sigma_z(set: &PlaneWaveSet) -> Result<f64> {
        if !(set.sigma_omega > 0.0) {
            return Err(Error::Degenerate(
                "a single-frequency set is not localized along z".into(),
            ));
        }
        Ok(0.5 / set.sigma_omega)
    }

    pub fn grid_for(&self, set: &PlaneWaveSet, t: f64) -> Result<CylGrid> {
        let w0 = set
            .w0
            .ok_or_else(|| Error::invalid("set has no waist to size the grid"))?;
        let half = self.window_sigmas * Self::sigma_z(set)?;
        let zr = 0.5 * set.omega0 * w0 * w0;
        if !(self.rear_factor >= 1.0) {
            return Err(Error::invalid("rear_factor must be >= 1"));
        }
        let z_max = t.abs() + half;
        let rmax = self.radial_widths * w0 * (1.0 + z_max * z_max / (zr * zr)).sqrt();
        let n_r = self
            .n_r
            .max((rmax / (self.max_dr * w0)).ceil() as usize + 1);
        let n_z = ((self.n_z - 1) as f64 * 0.5 * (1.0 + self.rear_factor)).round() as usize + 1;
        CylGrid::new(
            Axis::new(0.0, rmax, n_r)?,
            Axis::new(t - self.rear_factor * half, t + half, n_z)?,
            Some(self.n_phi),
        )
    }
}

/// Analytic-signal fields on every point of a grid.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    pub t: f64,
    pub grid: CylGrid,
    pub e: Vec<Complex3>,
    pub h: Vec<Complex3>,
}

impl FieldGrid {
    pub fn position(&self, i: usize) -> Vec3 {
        let g = &self.grid;
        let np = g.n_phi();
        let (iz, rest) = (i / (g.r.n * np), i % (g.r.n * np));
        let (ir, ip) = (rest / np, rest % np);
        let (r, phi) = (g.r.at(ir), g.phi_at(ip));
        [r * phi.cos(), r * phi.sin(), g.z.at(iz)]
    }

    pub fn sample(&self, i: usize) -> EmSample {
        EmSample {
            r: self.position(i),
            t: self.t,
            e: self.e[i],
            h: self.h[i],
        }
    }

    pub fn densities(&self) -> (Vec<f64>, Vec<Vec3>) {
        self.e
            .iter()
            .zip(&self.h)
            .map(|(e, h)| densities(e.re(), h.re()))
            .unzip()
    }
}

fn bessel_j(m: i32, x: f64) -> f64 {
    let v = libm::jn(m.abs(), x);
    if m < 0 && m % 2 != 0 {
        -v
    } else {
        v
    }
}

/// Fields of the set at time `t` on `grid`.
///
/// Generated sets are evaluated ring by ring: the azimuthal sum of a ring is
/// replaced by its exact integral `2 pi sum_m i^m J_m(k_perp r) X_m e^{i m phi}`
/// over the harmonics `X_m` of the sampled amplitudes, and the frequency sum
/// is done once per `z` plane and `k_perp` node.
pub fn eval_grid(set: &PlaneWaveSet, grid: &CylGrid, t: f64) -> Result<FieldGrid> {
    let (e, h) = if set.rings.is_empty() {
        eval_grid_direct(set, grid, t)
    } else {
        eval_grid_rings(set, grid, t)
    };
    if e.iter().chain(&h).any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "field evaluation produced a non-finite sample".into(),
        ));
    }
    Ok(FieldGrid {
        t,
        grid: grid.clone(),
        e,
        h,
    })
}

fn eval_grid_direct(set: &PlaneWaveSet, grid: &CylGrid, t: f64) -> (Vec<Complex3>, Vec<Complex3>) {
    let np = grid.n_phi();
    let rows = par::map_indexed(grid.z.n, |iz| {
        let z = grid.z.at(iz);
        let mut row = Vec::with_capacity(grid.r.n * np);
        for ir in 0..grid.r.n {
            let r = grid.r.at(ir);
            for ip in 0..np {
                let phi = grid.phi_at(ip);
                let s = eval_fields(set, [r * phi.cos(), r * phi.sin(), z], t);
                row.push((s.e, s.h));
            }
        }
        row
    });
    rows.into_iter().flatten().unzip()
}

fn eval_grid_rings(set: &PlaneWaveSet, grid: &CylGrid, t: f64) -> (Vec<Complex3>, Vec<Complex3>) {
    let nk = set.kperps.len();
    let nm = set.n_m;
    let np = grid.n_phi();
    let nr = grid.r.n;
    let jt: Vec<f64> = (0..nr * nk * nm)
        .map(|i| {
            let im = i % nm;
            let ik = (i / nm) % nk;
            let ir = i / (nm * nk);
            bessel_j(set.m_lo + im as i32, set.kperps[ik] * grid.r.at(ir))
        })
        .collect();
    let eim: Vec<Complex64> = (0..np * nm)
        .map(|i| {
            let m = set.m_lo + (i % nm) as i32;
            Complex64::from_polar(1.0, m as f64 * grid.phi_at(i / nm))
        })
        .collect();
    let rows = par::map_indexed(grid.z.n, |iz| {
        let z = grid.z.at(iz);
        let mut g = vec![[C0; 6]; nk * nm];
        for ring in &set.rings {
            let ph = Complex64::from_polar(1.0, ring.kz * z - ring.omega * t);
            let base = ring.ik * nm;
            for (im, coef) in ring.coef.iter().enumerate() {
                let slot = &mut g[base + im];
                for c in 0..6 {
                    slot[c] += coef[c] * ph;
                }
            }
        }
        let mut row = Vec::with_capacity(nr * np);
        let mut s = vec![[C0; 6]; nm];
        for ir in 0..nr {
            s.iter_mut().for_each(|v| *v = [C0; 6]);
            let jrow = &jt[ir * nk * nm..(ir + 1) * nk * nm];
            for ik in 0..nk {
                for im in 0..nm {
                    let j = jrow[ik * nm + im];
                    let gv = &g[ik * nm + im];
                    for c in 0..6 {
                        s[im][c] += gv[c] * j;
                    }
                }
            }
            for ip in 0..np {
                let mut v = [C0; 6];
                for im in 0..nm {
                    let f = eim[ip * nm + im];
                    for c in 0..6 {
                        v[c] += s[im][c] * f;
                    }
                }
                row.push((Complex3([v[0], v[1], v[2]]), Complex3([v[3], v[4], v[5]])));
            }
        }
        row
    });
    rows.into_iter().flatten().unzip()
}

/// Spatial integrals of one field snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldIntegrals {
    pub t: f64,
    pub energy: f64,
    pub momentum: Vec3,
    /// `int (r U - t P)`.
    pub boost: Vec3,
    /// `int r . P`.
    pub r_dot_p: f64,
    /// Fraction of the energy in the outer 5% of the window.
    pub leaked: f64,
    /// `max(|P| - U) / max U` over the samples.
    pub null_excess: f64,
    pub points: usize,
}

pub fn field_integrals(fields: &FieldGrid) -> Result<FieldIntegrals> {
    let g = &fields.grid;
    let (u, p) = fields.densities();
    let energy = integrate_grid(g, &u)?;
    if !(energy > 0.0) {
        return Err(Error::Degenerate("field carries no energy".into()));
    }
    let momentum = integrate_grid_vec(g, &p)?;
    let t = fields.t;
    let n = u.len();
    let mut ru = Vec::with_capacity(n);
    let mut rp = Vec::with_capacity(n);
    let mut u_max = 0.0f64;
    let mut excess = f64::NEG_INFINITY;
    for i in 0..n {
        let r = fields.position(i);
        ru.push([0, 1, 2].map(|c| r[c] * u[i] - t * p[i][c]));
        rp.push(dot(r, p[i]));
        u_max = u_max.max(u[i]);
        excess = excess.max(norm(p[i]) - u[i]);
    }
    let boost = integrate_grid_vec(g, &ru)?;
    let r_dot_p = integrate_grid(g, &rp)?;

    let np = g.n_phi();
    let nz_edge = ((g.z.n as f64 * EDGE_FRACTION).ceil() as usize).max(1);
    let nr_edge = ((g.r.n as f64 * EDGE_FRACTION).ceil() as usize).max(1);
    let mut edge = 0.0;
    for iz in 0..g.z.n {
        let z_edge = iz < nz_edge || iz >= g.z.n - nz_edge;
        for ir in 0..g.r.n {
            if z_edge || ir >= g.r.n - nr_edge {
                let base = g.index(iz, ir, 0);
                edge += g.cell_weight(iz, ir).abs() * u[base..base + np].iter().sum::<f64>();
            }
        }
    }
    Ok(FieldIntegrals {
        t,
        energy,
        momentum,
        boost,
        r_dot_p,
        leaked: edge / energy,
        null_excess: excess / u_max,
        points: n,
    })
}

fn checked_integrals(set: &PlaneWaveSet, grid: &CylGrid, t: f64) -> Result<FieldIntegrals> {
    let fi = field_integrals(&eval_grid(set, grid, t)?)?;
    if fi.leaked > LEAK_BUDGET {
        return Err(Error::Truncation {
            leaked: fi.leaked,
            budget: LEAK_BUDGET,
            what: format!("field window at t = {t}"),
        });
    }
    Ok(fi)
}

/// `int P / int U` at time `t`.
pub fn energy_velocity(set: &PlaneWaveSet, t: f64, spec: &EmGridSpec) -> Result<Vec3> {
    let fi = checked_integrals(set, &spec.grid_for(set, t)?, t)?;
    Ok(fi.momentum.map(|x| x / fi.energy))
}

/// `v_P,z` by the two routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumVelocity {
    /// `int U / int P_z`.
    pub direct: f64,
    /// `(d/dt int r . P) / int P_z`, central difference.
    pub virial: f64,
    pub virial_lhs: f64,
    pub virial_rhs: f64,
}

pub fn momentum_velocity(
    set: &PlaneWaveSet,
    t: f64,
    dt: f64,
    spec: &EmGridSpec,
) -> Result<MomentumVelocity> {
    let grid = spec.grid_for(set, t)?;
    let now = checked_integrals(set, &grid, t)?;
    momentum_velocity_on(set, &grid, &now, dt)
}

fn momentum_velocity_on(
    set: &PlaneWaveSet,
    grid: &CylGrid,
    now: &FieldIntegrals,
    dt: f64,
) -> Result<MomentumVelocity> {
    if !(dt > 0.0) {
        return Err(Error::invalid("time step must be positive"));
    }
    let pz = now.momentum[2];
    if pz.abs() <= 1e-14 * now.energy {
        return Err(Error::Degenerate("int P_z vanishes (standing wave)".into()));
    }
    let t = now.t;
    let plus = field_integrals(&eval_grid(set, grid, t + dt)?)?;
    let minus = field_integrals(&eval_grid(set, grid, t - dt)?)?;
    let lhs = (plus.r_dot_p - minus.r_dot_p) / (2.0 * dt);
    Ok(MomentumVelocity {
        direct: now.energy / pz,
        virial: lhs / pz,
        virial_lhs: lhs,
        virial_rhs: now.energy,
    })
}

pub fn boost_momentum(set: &PlaneWaveSet, t: f64, spec: &EmGridSpec) -> Result<Vec3> {
    Ok(checked_integrals(set, &spec.grid_for(set, t)?, t)?.boost)
}

/// `(v_E, v_P)` of a set whose components all share one wavevector along
/// `z`, integrated over one period.
pub fn cell_velocities(set: &PlaneWaveSet, t: f64, n: usize) -> Result<(f64, f64)> {
    let k0 = set.components[0].k;
    if k0[0] != 0.0 || k0[1] != 0.0 || set.components.iter().any(|c| c.k != k0) {
        return Err(Error::invalid(
            "periodic cell needs a single wavevector along z",
        ));
    }
    if n < 2 {
        return Err(Error::invalid("need at least 2 cell samples"));
    }
    let lambda = 2.0 * PI / k0[2];
    let (mut u, mut pz) = (0.0, 0.0);
    for i in 0..n {
        let s = eval_fields(set, [0.0, 0.0, lambda * i as f64 / n as f64], t);
        let (ui, pi) = energy_momentum_densities(&s);
        u += ui;
        pz += pi[2];
    }
    if !(u > 0.0) || pz == 0.0 {
        return Err(Error::Degenerate("cell carries no energy flux".into()));
    }
    Ok((pz / u, u / pz))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub t: f64,
    pub integrals: FieldIntegrals,
    pub v_e: Vec3,
    pub v_p: MomentumVelocity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditCheck {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationAudit {
    pub grid: EmGridSpec,
    pub rows: Vec<AuditRow>,
    pub checks: Vec<AuditCheck>,
}

/// Drift limit on energy, momentum and boost momentum.
pub const DRIFT_LIMIT: f64 = 1e-3;
/// Relative agreement of the virial and direct momentum velocities.
pub const VIRIAL_LIMIT: f64 = 1e-2;
pub const RECIPROCITY_LIMIT: f64 = 1e-10;

impl ConservationAudit {
    pub const COLUMNS: [&'static str; 8] = [
        "t",
        "E_tot",
        "P_z",
        "B_z",
        "virial_lhs",
        "virial_rhs",
        "v_E",
        "v_P",
    ];

    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.t,
                    r.integrals.energy,
                    r.integrals.momentum[2],
                    r.integrals.boost[2],
                    r.v_p.virial_lhs,
                    r.v_p.virial_rhs,
                    r.v_e[2],
                    r.v_p.direct,
                ]
            })
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&AuditCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Energy, momentum, boost momentum and both momentum velocities at each
/// time, with pass/fail checks.
///
/// Drifts are taken against the first time. The boost drift is
/// `max |B_z(t) - B_z(t_0)|` over `int U * (t_last - t_0)`, the scale of the
/// two terms that cancel in `B_z`.
pub fn conservation_audit(
    set: &PlaneWaveSet,
    times: &[f64],
    spec: &EmGridSpec,
) -> Result<ConservationAudit> {
    if times.is_empty() {
        return Err(Error::invalid("audit needs at least one time"));
    }
    let dt = VIRIAL_STEP / set.omega0;
    let rows = times
        .iter()
        .map(|&t| {
            let grid = spec.grid_for(set, t)?;
            let fi = checked_integrals(set, &grid, t)?;
            let v_p = momentum_velocity_on(set, &grid, &fi, dt)?;
            Ok(AuditRow {
                t,
                integrals: fi,
                v_e: fi.momentum.map(|x| x / fi.energy),
                v_p,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let first = &rows[0].integrals;
    let span = (times[times.len() - 1] - times[0]).abs();
    let boost_scale = first.energy * if span > 0.0 { span } else { 1.0 };
    let max_of = |f: &dyn Fn(&AuditRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let energy_drift = max_of(&|r| (r.integrals.energy - first.energy).abs() / first.energy);
    let momentum_drift =
        max_of(&|r| (r.integrals.momentum[2] - first.momentum[2]).abs() / first.momentum[2].abs());
    let boost_drift = max_of(&|r| (r.integrals.boost[2] - first.boost[2]).abs() / boost_scale);
    let virial = max_of(&|r| (r.v_p.virial / r.v_p.direct - 1.0).abs());
    let reciprocity = max_of(&|r| (r.v_p.direct * r.v_e[2] - 1.0).abs());
    let null_excess = rows
        .iter()
        .map(|r| r.integrals.null_excess)
        .fold(f64::NEG_INFINITY, f64::max);
    let speed = max_of(&|r| norm(r.v_e));
    let points = rows.iter().map(|r| r.integrals.points).min().unwrap_or(0) as f64;

    let check = |name, value: f64, limit: f64, pass: bool| AuditCheck {
        name,
        value,
        limit,
        pass,
    };
    let checks = vec![
        check(
            "energy_drift",
            energy_drift,
            DRIFT_LIMIT,
            energy_drift < DRIFT_LIMIT,
        ),
        check(
            "momentum_drift",
            momentum_drift,
            DRIFT_LIMIT,
            momentum_drift < DRIFT_LIMIT,
        ),
        check(
            "boost_drift",
            boost_drift,
            DRIFT_LIMIT,
            boost_drift < DRIFT_LIMIT,
        ),
        check(
            "virial_vs_direct",
            virial,
            VIRIAL_LIMIT,
            virial < VIRIAL_LIMIT,
        ),
        check(
            "reciprocity",
            reciprocity,
            RECIPROCITY_LIMIT,
            reciprocity <= RECIPROCITY_LIMIT,
        ),
        check(
            "null_inequality",
            null_excess,
            NULL_SLACK,
            null_excess <= NULL_SLACK,
        ),
        check("subluminal_energy_velocity", speed, 1.0, speed < 1.0),
        check("sampled_points", points, 1e4, points >= 1e4),
    ];
    Ok(ConservationAudit {
        grid: *spec,
        rows,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocimetry::group_velocity;
    use proptest::prelude::*;

    fn x_wave(k: Vec3, measure: f64) -> PlaneWave {
        PlaneWave::along(k, Polarization::Linear.vector(), measure).unwrap()
    }

    fn y_pol() -> Complex3 {
        Complex3::from_real([0.0, 1.0, 0.0])
    }

    fn close3(a: &Complex3, b: &Complex3, tol: f64) -> bool {
        (0..3).all(|i| (a.0[i] - b.0[i]).norm() <= tol)
    }

    fn small_packet() -> PlaneWaveSet {
        gaussian_packet(10.0, Polarization::Linear).unwrap()
    }

    fn small_grid() -> EmGridSpec {
        EmGridSpec {
            n_z: 192,
            max_dr: 0.125,
            ..EmGridSpec::default()
        }
    }

    #[test]
    fn single_wave_along_z() {
        let set = PlaneWaveSet::from_components(vec![x_wave([0.0, 0.0, 1.0], 1.0)]).unwrap();
        let s = eval_fields(&set, [0.0; 3], 0.0);
        assert_eq!(s.real_e(), [1.0, 0.0, 0.0]);
        assert_eq!(s.real_h(), [0.0, 1.0, 0.0]);
        let (u, p) = energy_momentum_densities(&s);
        assert_eq!(u, 1.0);
        assert_eq!(p, [0.0, 0.0, 1.0]);
        for (r, t) in [([0.3, -2.0, 5.1], 0.7), ([10.0, 1.0, -3.0], -4.2)] {
            assert!((eval_fields(&set, r, t).e.norm() - 1.0).abs() < 1e-15);
        }
        assert_eq!(cell_velocities(&set, 0.3, 64).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn parallel_fields_carry_no_momentum() {
        let (u, p) = densities([0.2, -1.0, 0.5], [0.4, -2.0, 1.0]);
        assert!(u > 0.0);
        assert!(norm(p) < 1e-15);
    }

    #[test]
    fn counter_phased_pair_cancels_on_symmetry_plane() {
        let (s, c) = 0.3f64.sin_cos();
        let a = PlaneWave::along([s, 0.0, c], y_pol(), 1.0).unwrap();
        let b = PlaneWave::along([-s, 0.0, c], y_pol(), -1.0).unwrap();
        let set = PlaneWaveSet::from_components(vec![a, b]).unwrap();
        for (y, z, t) in [(0.0, 0.0, 0.0), (2.5, -1.0, 0.3), (-7.0, 4.0, 9.0)] {
            assert!(eval_fields(&set, [0.0, y, z], t).e.norm() < 1e-15);
        }
        assert!(eval_fields(&set, [1.0, 0.0, 0.0], 0.0).e.norm() > 0.1);
    }

    #[test]
    fn generated_components_are_transverse() {
        for pol in [Polarization::Linear, Polarization::Circular] {
            let m = SpectralModel::laguerre_gauss(1.0, 3.0, 2, 1).unwrap();
            let spectrum = poisson_nodes(20.0, 1.0, 8).unwrap();
            let set = synthesize_em(&m, &spectrum, pol, EmSampling::default()).unwrap();
            for c in &set.components {
                let n = c.direction();
                assert!(c.e.dot_real(n).norm() < 1e-14 * c.e.norm());
                assert!(close3(&c.h, &real_cross(n, &c.e), 1e-15 * c.e.norm()));
                assert!((c.h.norm() - c.e.norm()).abs() < 1e-14 * c.e.norm());
            }
        }
    }

    #[test]
    fn superposition_is_linear() {
        let a = small_packet();
        let b = PlaneWaveSet::from_components(vec![
            x_wave([0.1, 0.2, 0.9], 0.7),
            PlaneWave::along([0.0, -0.3, 1.2], y_pol(), 1.3).unwrap(),
        ])
        .unwrap();
        let (alpha, beta) = (0.75, -2.0);
        let scaled = |s: &PlaneWaveSet, f: f64| -> Vec<PlaneWave> {
            s.components
                .iter()
                .map(|c| PlaneWave {
                    measure: c.measure * f,
                    ..*c
                })
                .collect()
        };
        let mut comps = scaled(&a, alpha);
        comps.extend(scaled(&b, beta));
        let both = PlaneWaveSet::from_components(comps).unwrap();
        for (r, t) in [([0.0, 0.0, 0.0], 0.0), ([3.0, -1.0, 2.0], 1.5)] {
            let sa = eval_fields(&a, r, t);
            let sb = eval_fields(&b, r, t);
            let s = eval_fields(&both, r, t);
            let want = sa.e.scale_re(alpha) + sb.e.scale_re(beta);
            let scale = sa.e.norm() + sb.e.norm();
            assert!(close3(&s.e, &want, 1e-14 * scale));
        }
    }

    #[test]
    fn ring_evaluation_matches_direct_sum_near_axis() {
        let g = SpectralModel::laguerre_gauss(1.0, 10.0, 1, 0).unwrap();
        let spectrum = poisson_nodes(100.0, 1.0, 12).unwrap();
        let sampling = EmSampling {
            n_kperp: 24,
            n_phi: 48,
        };
        let set = synthesize_em(&g, &spectrum, Polarization::Circular, sampling).unwrap();
        let grid = CylGrid::new(
            Axis::new(0.0, 6.0, 4).unwrap(),
            Axis::new(-3.0, 5.0, 3).unwrap(),
            Some(5),
        )
        .unwrap();
        let f = eval_grid(&set, &grid, 1.0).unwrap();
        let peak = f.e.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for i in 0..grid.len() {
            let s = eval_fields(&set, f.position(i), 1.0);
            assert!(close3(&s.e, &f.e[i], 1e-10 * peak));
            assert!(close3(&s.h, &f.h[i], 1e-10 * peak));
        }
    }

    #[test]
    fn focal_profile_matches_scalar_beam() {
        let g = SpectralModel::gaussian(1.0, 10.0).unwrap();
        let set = synthesize_em(
            &g,
            &FrequencySpectrum::monochromatic(1.0).unwrap(),
            Polarization::Linear,
            EmSampling::default(),
        )
        .unwrap();
        let grid = CylGrid::new(
            Axis::new(0.0, 20.0, 41).unwrap(),
            Axis::new(-1.0, 1.0, 3).unwrap(),
            Some(8),
        )
        .unwrap();
        let f = eval_grid(&set, &grid, 0.0).unwrap();
        let i0 = f.e[grid.index(1, 0, 0)].norm_sqr();
        for ir in 0..grid.r.n {
            let r = grid.r.at(ir);
            let mean: f64 = (0..8)
                .map(|ip| f.e[grid.index(1, ir, ip)].norm_sqr())
                .sum::<f64>()
                / 8.0;
            let scalar = (-2.0 * r * r / 100.0).exp();
            assert!((mean / i0 - scalar).abs() < 0.02, "r = {r}");
        }
    }

    #[test]
    fn divergence_free_on_stencil() {
        let set = small_packet();
        let h = 0.01;
        for r in [[0.0, 0.0, 0.0], [4.0, -3.0, 1.0], [-8.0, 2.0, -5.0]] {
            let mut div = C0;
            for axis in 0..3 {
                let at = |d: f64| {
                    let mut p = r;
                    p[axis] += d;
                    eval_fields(&set, p, 0.0).e.0[axis]
                };
                div += (at(-2.0 * h) - at(2.0 * h) + (at(h) - at(-h)) * 8.0) / (12.0 * h);
            }
            let e = eval_fields(&set, r, 0.0).e.norm();
            assert!(div.norm() < 1e-8 * e, "{} vs {e}", div.norm());
        }
    }

    #[test]
    fn spectral_velocity_matches_scalar_model() {
        let g = SpectralModel::gaussian(1.0, 10.0).unwrap();
        let set = synthesize_em(
            &g,
            &FrequencySpectrum::monochromatic(1.0).unwrap(),
            Polarization::Circular,
            EmSampling::default(),
        )
        .unwrap();
        let v = set.spectral_energy_velocity().unwrap();
        assert!((v[2] - group_velocity(&g).unwrap()).abs() < 1e-10);
        assert!(v[0].abs() < 1e-15 && v[1].abs() < 1e-15);
    }

    #[test]
    fn packet_velocities_and_conservation() {
        let set = small_packet();
        let spec = small_grid();
        let zr = 50.0;
        let audit = conservation_audit(&set, &[0.0, zr], &spec).unwrap();
        for c in &audit.checks {
            assert!(c.pass, "{c:?}");
        }
        let v0 = audit.rows[0].v_e;
        let v1 = audit.rows[1].v_e;
        assert!((v0[2] - v1[2]).abs() < 1e-6, "{} {}", v0[2], v1[2]);
        let spectral = set.spectral_energy_velocity().unwrap()[2];
        assert!((v0[2] - spectral).abs() < 1e-6, "{} {spectral}", v0[2]);
        let vg = group_velocity(&SpectralModel::gaussian(1.0, 10.0).unwrap()).unwrap();
        assert!((v0[2] - vg).abs() < 0.01);
        assert!(v0[0].abs() < 1e-8 && v0[1].abs() < 1e-8);
    }

    #[test]
    fn narrow_window_is_rejected() {
        let set = small_packet();
        let spec = EmGridSpec {
            window_sigmas: 2.0,
            ..small_grid()
        };
        assert!(matches!(
            energy_velocity(&set, 0.0, &spec),
            Err(Error::Truncation { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn null_inequality_holds_pointwise(
            waves in prop::collection::vec(
                ((-0.8f64..0.8), (-0.8f64..0.8), (0.2f64..2.0), (-2.0f64..2.0), (-1.0f64..1.0)), 1..12),
            pts in prop::collection::vec(((-20.0f64..20.0), (-20.0f64..20.0), (-20.0f64..20.0), (-5.0f64..5.0)), 700),
            circular in any::<bool>(),
        ) {
            let pol = if circular { Polarization::Circular } else { Polarization::Linear };
            let comps = waves
                .iter()
                .map(|&(kx, ky, kz, m, tilt)| {
                    let p = pol.vector() + y_pol().scale_re(tilt);
                    PlaneWave::along([kx, ky, kz], p, m).unwrap()
                })
                .collect();
            let set = PlaneWaveSet::from_components(comps).unwrap();
            for &(x, y, z, t) in &pts {
                let (u, p) = energy_momentum_densities(&eval_fields(&set, [x, y, z], t));
                prop_assert!(norm(p) <= u * (1.0 + 1e-12) + 1e-300);
            }
        }
    }
}
