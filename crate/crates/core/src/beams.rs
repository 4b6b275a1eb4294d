//! Monochromatic Gaussian and Laguerre–Gauss beams in real space, their phase
//! split into plane, curvature and Gouy parts, and phase-front maps.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, laguerre_poly, Axis, CylGrid};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamParams {
    pub k: f64,
    pub w0: f64,
    pub l: i32,
    pub p: u32,
}

impl BeamParams {
    pub fn new(k: f64, w0: f64, l: i32, p: u32) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) || !(w0 > 0.0 && w0.is_finite()) {
            return Err(Error::invalid(format!(
                "need k > 0 and w0 > 0 (k={k}, w0={w0})"
            )));
        }
        Ok(BeamParams { k, w0, l, p })
    }

    pub fn gaussian(k: f64, w0: f64) -> Result<Self> {
        Self::new(k, w0, 0, 0)
    }

    pub fn rayleigh_range(&self) -> f64 {
        0.5 * self.k * self.w0 * self.w0
    }

    pub fn order(&self) -> u32 {
        self.l.unsigned_abs() + 2 * self.p
    }

    pub fn width(&self, z: f64) -> f64 {
        let zr = self.rayleigh_range();
        self.w0 * (1.0 + z * z / (zr * zr)).sqrt()
    }

    pub fn omega(&self) -> f64 {
        self.k
    }

    /// Overall constant: unit focal amplitude for `l = 0`, unit power otherwise.
    fn normalization(&self) -> f64 {
        if self.l == 0 {
            return 1.0;
        }
        let la = self.l.unsigned_abs();
        // p! / (p + |l|)!
        let ratio: f64 = (1..=la).map(|j| 1.0 / (self.p + j) as f64).product();
        (2.0 * ratio / (PI * self.w0 * self.w0)).sqrt()
    }

    /// Real envelope (signed through the Laguerre factor).
    fn envelope(&self, r: f64, z: f64) -> f64 {
        let w = self.width(z);
        let u = 2.0 * r * r / (w * w);
        let la = self.l.unsigned_abs();
        self.normalization()
            * (self.w0 / w)
            * u.sqrt().powi(la as i32)
            * laguerre_poly(self.p, la, u)
            * (-0.5 * u).exp()
    }
}

/// Longitudinal phase contributions at `(r_perp, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseParts {
    pub plane: f64,
    pub curvature: f64,
    pub gouy: f64,
}

impl PhaseParts {
    pub fn total(&self) -> f64 {
        self.plane + self.curvature + self.gouy
    }
}

pub fn phase_decompose(params: &BeamParams, r: f64, z: f64) -> PhaseParts {
    let zr = params.rayleigh_range();
    PhaseParts {
        plane: params.k * z,
        curvature: params.k * r * r * z / (2.0 * (zr * zr + z * z)),
        gouy: -((params.order() + 1) as f64) * (z / zr).atan(),
    }
}

/// Complex field `psi(r_perp, phi, z, t)`.
pub fn eval_beam(params: &BeamParams, r: f64, phi: f64, z: f64, t: f64) -> Complex64 {
    let phase = phase_decompose(params, r, z).total() + params.l as f64 * phi - params.omega() * t;
    Complex64::from_polar(params.envelope(r, z), phase)
}

/// The `r`-independent factors of a beam in one plane, for sampling many radii.
#[derive(Debug, Clone, Copy)]
pub struct PlaneFactors {
    la: u32,
    p: u32,
    l: f64,
    inv_w2: f64,
    amp: f64,
    phase0: f64,
    curv: f64,
}

impl PlaneFactors {
    pub fn new(params: &BeamParams, z: f64, t: f64) -> Self {
        let w = params.width(z);
        let zr = params.rayleigh_range();
        let parts = phase_decompose(params, 0.0, z);
        PlaneFactors {
            la: params.l.unsigned_abs(),
            p: params.p,
            l: params.l as f64,
            inv_w2: 1.0 / (w * w),
            amp: params.normalization() * params.w0 / w,
            phase0: parts.plane + parts.gouy - params.omega() * t,
            curv: params.k * z / (2.0 * (zr * zr + z * z)),
        }
    }

    /// Same value as [`eval_beam`] at `(r, phi)` in this plane.
    pub fn at(&self, r: f64, phi: f64) -> Complex64 {
        let r2 = r * r;
        let u = 2.0 * r2 * self.inv_w2;
        let mut a = self.amp * (-0.5 * u).exp();
        if self.la > 0 {
            a *= u.sqrt().powi(self.la as i32);
        }
        if self.p > 0 {
            a *= laguerre_poly(self.p, self.la, u);
        }
        Complex64::from_polar(a, self.phase0 + self.curv * r2 + self.l * phi)
    }
}

/// Complex samples of a field on a cylindrical grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSlice {
    pub t: f64,
    pub grid: CylGrid,
    /// Laid out as [`CylGrid::index`].
    pub values: Vec<Complex64>,
}

impl FieldSlice {
    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }
}

/// Samples a monochromatic beam on `grid` at time `t`.
pub fn sample_beam(params: &BeamParams, grid: &CylGrid, t: f64) -> FieldSlice {
    let np = grid.n_phi();
    let rows = par::map_indexed(grid.z.n, |iz| {
        let f = PlaneFactors::new(params, grid.z.at(iz), t);
        let mut row = Vec::with_capacity(grid.r.n * np);
        for ir in 0..grid.r.n {
            for ip in 0..np {
                row.push(f.at(grid.r.at(ir), grid.phi_at(ip)));
            }
        }
        row
    });
    FieldSlice {
        t,
        grid: grid.clone(),
        values: rows.into_iter().flatten().collect(),
    }
}

/// Upper limit of `u = 2 r^2 / w^2` beyond which the mode carries no weight.
fn u_max(params: &BeamParams) -> f64 {
    2.0 * (params.order() + 1) as f64 + 80.0
}

/// Transverse power `int |psi|^2 r dr dphi` in the plane `z`.
pub fn power(params: &BeamParams, z: f64) -> Result<f64> {
    let rmax = params.width(z) * (0.5 * u_max(params)).sqrt();
    let q = gauss_legendre(256, 0.0, rmax)?;
    Ok(TAU * q.integrate(|r| r * params.envelope(r, z).powi(2)))
}

/// Intensity-weighted `<r_perp^2>` in the focal plane.
pub fn mean_rperp2(params: &BeamParams) -> Result<f64> {
    let q = gauss_legendre(256, 0.0, u_max(params))?;
    let la = params.l.unsigned_abs();
    let weight = |u: f64| u.powi(la as i32) * laguerre_poly(params.p, la, u).powi(2) * (-u).exp();
    let m0 = q.integrate(weight);
    let m1 = q.integrate(|u| u * weight(u));
    // r^2 = w0^2 u / 2
    Ok(0.5 * params.w0 * params.w0 * m1 / m0)
}

/// `omega / (k + d<Phi_G + Phi_R>/dz)` at the focus, from the analytic phase.
pub fn realspace_phase_velocity(params: &BeamParams) -> Result<f64> {
    let kw0 = params.k * params.w0;
    if kw0 < 3.0 {
        log::warn!("real-space phase velocity at k w0 = {kw0:.3} is outside the paraxial regime");
    }
    let zr = params.rayleigh_range();
    let gouy_slope = -((params.order() + 1) as f64) / zr;
    let curvature_slope = params.k * mean_rperp2(params)? / (2.0 * zr * zr);
    let keff = params.k + gouy_slope + curvature_slope;
    if !(keff > 0.0) {
        return Err(Error::Degenerate(format!(
            "effective wavenumber {keff} is not positive"
        )));
    }
    Ok(params.omega() / keff)
}

/// Sampling window for [`phase_map`]: `x` spans `[-x_max, x_max]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseMapGrid {
    pub x_max: f64,
    pub nx: usize,
    pub z: Axis,
}

impl PhaseMapGrid {
    /// `z` over `[-2 z_R, 2 z_R]` at `dz = pi / (8k)` (capped at 2001 samples),
    /// `x` out to three beam widths at the window edge.
    pub fn default_for(params: &BeamParams) -> Result<Self> {
        let zr = params.rayleigh_range();
        let zmax = 2.0 * zr;
        let nz = ((2.0 * zmax * 8.0 * params.k / PI).ceil() as usize + 1).clamp(201, 2001) | 1;
        Ok(PhaseMapGrid {
            x_max: 3.0 * params.width(zmax),
            nx: 201,
            z: Axis::new(-zmax, zmax, nz)?,
        })
    }

    pub fn x_at(&self, i: usize) -> f64 {
        -self.x_max + 2.0 * self.x_max * i as f64 / (self.nx - 1) as f64
    }
}

/// Phase-front data along one line of constant `r_perp` (on the `x >= 0` side).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WavefrontLine {
    pub r: f64,
    /// `z` where the unwrapped phase crosses a multiple of `2 pi`.
    pub crossings: Vec<f64>,
    /// `d Phi / dz` at the focal plane, by central difference.
    pub local_k_focus: f64,
    pub focal_intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseMap {
    pub params: BeamParams,
    pub grid: PhaseMapGrid,
    /// `psi` at `t = 0`, indexed `iz * nx + ix`.
    #[serde(skip)]
    pub field: Vec<Complex64>,
    pub lines: Vec<WavefrontLine>,
    /// Lines passing through a field node, where the phase is undefined.
    pub dark_lines: Vec<f64>,
    pub on_axis_k: Option<f64>,
    /// Focal intensity-weighted mean of `d Phi / dz` over the lines.
    pub mean_local_k: f64,
    /// `k / mean_local_k`: mean phase-front spacing over `2 pi / k`.
    pub spacing_ratio: f64,
    /// Phase-front spacing of the `exp(i k z)` reference, from its crossings.
    pub plane_wave_spacing: f64,
}

enum Unwrap {
    Ok(Vec<f64>),
    Dark,
}

/// Unwraps `arg(values)` along the line, seeded at index `seed`.
fn unwrap_line(values: &[Complex64], seed: usize) -> Result<Unwrap> {
    let n = values.len();
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut out = vec![0.0; n];
    out[seed] = values[seed].arg();
    let step = |from: usize, to: usize, out: &mut [f64]| -> Result<bool> {
        let d = (values[to] / values[from]).arg();
        if !d.is_finite() || d.abs() > 0.9 * PI {
            let dim = values[to].norm().min(values[from].norm());
            if dim <= 1e-3 * peak {
                return Ok(false);
            }
            return Err(Error::Resolution(format!(
                "phase step {d:.3} rad between z samples exceeds 0.9 pi; refine the z grid"
            )));
        }
        out[to] = out[from] + d;
        Ok(true)
    };
    for i in seed + 1..n {
        if !step(i - 1, i, &mut out)? {
            return Ok(Unwrap::Dark);
        }
    }
    for i in (0..seed).rev() {
        if !step(i + 1, i, &mut out)? {
            return Ok(Unwrap::Dark);
        }
    }
    Ok(Unwrap::Ok(out))
}

fn crossings(z: &Axis, phase: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..phase.len() - 1 {
        let (a, b) = (phase[i] / TAU, phase[i + 1] / TAU);
        let lo = a.min(b);
        let hi = a.max(b);
        let mut n = lo.ceil();
        while n <= hi {
            if n < hi || i + 2 == phase.len() {
                let f = if b != a { (n - a) / (b - a) } else { 0.0 };
                out.push(z.at(i) + f * z.step());
            }
            n += 1.0;
        }
    }
    out.dedup();
    out
}

fn mean_spacing(c: &[f64]) -> f64 {
    if c.len() < 2 {
        return f64::NAN;
    }
    (c[c.len() - 1] - c[0]) / (c.len() - 1) as f64
}

/// Samples the beam on the `(x, z)` plane and measures phase-front spacings.
pub fn phase_map(params: &BeamParams, grid: &PhaseMapGrid) -> Result<PhaseMap> {
    let dz = grid.z.step();
    if dz >= PI / (2.0 * params.k) {
        return Err(Error::Resolution(format!(
            "dz = {dz:.4} must be below pi/(2k) = {:.4}",
            PI / (2.0 * params.k)
        )));
    }
    if grid.nx < 3 {
        return Err(Error::invalid("phase map needs at least 3 x samples"));
    }
    let nx = grid.nx;
    let rows = par::map_indexed(grid.z.n, |iz| {
        let z = grid.z.at(iz);
        (0..nx)
            .map(|ix| {
                let x = grid.x_at(ix);
                let phi = if x < 0.0 { PI } else { 0.0 };
                eval_beam(params, x.abs(), phi, z, 0.0)
            })
            .collect::<Vec<_>>()
    });
    let field: Vec<Complex64> = rows.into_iter().flatten().collect();

    // seed at the sample nearest the focal plane
    let seed = ((0.0 - grid.z.start) / dz)
        .round()
        .clamp(1.0, (grid.z.n - 2) as f64) as usize;
    let first_x = (0..nx)
        .find(|&ix| grid.x_at(ix) >= -1e-12 * grid.x_max)
        .unwrap_or(nx / 2);
    let mut lines = Vec::new();
    let mut dark = Vec::new();
    for ix in first_x..nx {
        let r = grid.x_at(ix).abs();
        let column: Vec<Complex64> = (0..grid.z.n).map(|iz| field[iz * nx + ix]).collect();
        match unwrap_line(&column, seed)? {
            Unwrap::Dark => dark.push(r),
            Unwrap::Ok(phase) => {
                let local_k = (phase[seed + 1] - phase[seed - 1]) / (2.0 * dz);
                lines.push(WavefrontLine {
                    r,
                    crossings: crossings(&grid.z, &phase),
                    local_k_focus: local_k,
                    focal_intensity: column[seed].norm_sqr(),
                });
            }
        }
    }
    if lines.is_empty() {
        return Err(Error::Degenerate(
            "no line of the phase map carries a defined phase".into(),
        ));
    }
    let on_axis_k = lines
        .first()
        .filter(|l| l.r == 0.0)
        .map(|l| l.local_k_focus);

    // trapezoid in r with weight |psi|^2 r
    let h = grid.x_max / (nx - first_x - 1).max(1) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for l in &lines {
        let w = l.focal_intensity * l.r * h;
        num += w * l.local_k_focus;
        den += w;
    }
    if !(den > 0.0) {
        return Err(Error::Degenerate(
            "phase map carries no focal intensity".into(),
        ));
    }
    let mean_local_k = num / den;

    let reference: Vec<Complex64> = (0..grid.z.n)
        .map(|iz| Complex64::from_polar(1.0, params.k * grid.z.at(iz)))
        .collect();
    let plane_wave_spacing = match unwrap_line(&reference, seed)? {
        Unwrap::Ok(phase) => mean_spacing(&crossings(&grid.z, &phase)),
        Unwrap::Dark => f64::NAN,
    };

    Ok(PhaseMap {
        params: *params,
        grid: grid.clone(),
        field,
        lines,
        dark_lines: dark,
        on_axis_k,
        mean_local_k,
        spacing_ratio: params.k / mean_local_k,
        plane_wave_spacing,
    })
}

impl PhaseMap {
    /// Rows `x, z, Re psi, Im psi, |psi|^2, phase mod 2 pi`.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        let nx = self.grid.nx;
        self.field
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (iz, ix) = (i / nx, i % nx);
                vec![
                    self.grid.x_at(ix),
                    self.grid.z.at(iz),
                    v.re,
                    v.im,
                    v.norm_sqr(),
                    v.arg().rem_euclid(TAU),
                ]
            })
            .collect()
    }

    /// The `exp(i k z)` reference on the same grid.
    pub fn plane_wave_rows(&self) -> Vec<Vec<f64>> {
        let k = self.params.k;
        let mut out = Vec::with_capacity(self.field.len());
        for iz in 0..self.grid.z.n {
            let z = self.grid.z.at(iz);
            let v = Complex64::from_polar(1.0, k * z);
            for ix in 0..self.grid.nx {
                out.push(vec![
                    self.grid.x_at(ix),
                    z,
                    v.re,
                    v.im,
                    1.0,
                    v.arg().rem_euclid(TAU),
                ]);
            }
        }
        out
    }
}

pub const PHASE_MAP_COLUMNS: [&str; 6] =
    ["x", "z", "re_psi", "im_psi", "abs_psi_sq", "phase_mod_2pi"];
