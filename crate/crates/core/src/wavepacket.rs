//! Polychromatic packets built from beams with a common Rayleigh range, and
//! their probability and energy centroids.
//!
//! Each frequency component `omega_m` is a beam with waist
//! `w0(omega) = sqrt(2 z_R / omega)` focused at the origin and advanced with
//! `exp(-i omega_m t)`. The sum over components is a Gauss–Legendre quadrature
//! of the frequency integral, so component `m` enters with `w_m A(omega_m)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::beams::{power, BeamParams, FieldSlice, PlaneFactors};
use crate::error::{Error, Result};
use crate::numerics::{integrate_grid, linear_fit, Axis, CylGrid};
use crate::par;
use crate::spectra::{poisson_nodes, FrequencySpectrum, SpectralModel};
use crate::velocimetry::group_velocity;

/// Budget on probability in the outer 5% of the sampling window.
pub const LEAK_BUDGET: f64 = 1e-6;
const EDGE_FRACTION: f64 = 0.05;
/// Frequency nodes of the default packet. The discrete frequency comb repeats
/// the packet at delays of order `pi M / (omega_max - omega_min)`; 128 nodes
/// keep those copies outside the default window.
pub const DEFAULT_NODES: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WavepacketSpec {
    pub zr: f64,
    pub spectrum: FrequencySpectrum,
    pub l: i32,
    pub p: u32,
    pub n_r: usize,
    pub n_z: usize,
    /// Extent of the `z` window ahead of `ct`.
    pub half_window: f64,
    /// The window reaches `rear_factor * half_window` behind `ct`, to hold the
    /// trailing tail left by the curved pulse front far from focus.
    pub rear_factor: f64,
    /// Radial extent in carrier beam widths, see [`WavepacketSpec::grid_at`].
    pub radial_widths: f64,
    pub times: Vec<f64>,
}

impl WavepacketSpec {
    /// Packet with carrier `omega0 = 1`, the given `k0 z_R`, spectral shape `s`
    /// and `m` frequency nodes, on the default grid and times `ct = j z_R`,
    /// `j = 0..=6`.
    pub fn new(k0zr: f64, s: f64, m: usize) -> Result<Self> {
        Self::with_nodes(k0zr, s, m)
    }

    /// Default packet: `k0 z_R` and `s` with [`DEFAULT_NODES`] frequency nodes.
    pub fn standard(k0zr: f64, s: f64) -> Result<Self> {
        Self::with_nodes(k0zr, s, DEFAULT_NODES)
    }

    fn with_nodes(k0zr: f64, s: f64, m: usize) -> Result<Self> {
        if !(k0zr > 0.0) {
            return Err(Error::invalid(format!(
                "k0 z_R must be positive, got {k0zr}"
            )));
        }
        let spectrum = poisson_nodes(s, 1.0, m)?;
        Ok(WavepacketSpec {
            zr: k0zr,
            spectrum,
            l: 0,
            p: 0,
            n_r: 128,
            n_z: 1024,
            half_window: 10.0 * s.sqrt(),
            rear_factor: 2.0,
            radial_widths: 4.0,
            times: (0..=6).map(|j| j as f64 * k0zr).collect(),
        })
    }

    pub fn omega0(&self) -> f64 {
        self.spectrum.omega0
    }

    pub fn k0zr(&self) -> f64 {
        self.omega0() * self.zr
    }

    pub fn component(&self, m: usize) -> Result<BeamParams> {
        let w = self.spectrum.nodes[m];
        BeamParams::new(w, (2.0 * self.zr / w).sqrt(), self.l, self.p)
    }

    pub fn components(&self) -> Result<Vec<BeamParams>> {
        (0..self.spectrum.len())
            .map(|m| self.component(m))
            .collect()
    }

    /// Sampling grid for time `t`: `z` in `[ct - rear_factor * half_window,
    /// ct + half_window]`, `r` out to `radial_widths` carrier beam widths taken
    /// at `|ct| + half_window / 2`. The packet carries no weight near the window
    /// ends, so sizing the radius there would only coarsen the radial step.
    pub fn grid_at(&self, t: f64) -> Result<CylGrid> {
        if !(self.rear_factor >= 1.0) {
            return Err(Error::invalid("rear_factor must be >= 1"));
        }
        let z = Axis::new(
            t - self.rear_factor * self.half_window,
            t + self.half_window,
            self.n_z,
        )?;
        let zref = t.abs() + 0.5 * self.half_window;
        let w0 = (2.0 * self.zr / self.omega0()).sqrt();
        let rmax = self.radial_widths * w0 * (1.0 + zref * zref / (self.zr * self.zr)).sqrt();
        CylGrid::new(Axis::new(0.0, rmax, self.n_r)?, z, None)
    }

    pub fn is_monochromatic(&self) -> bool {
        self.spectrum.len() == 1
    }

    /// Per-component probability weights `a_m^2 P_m` (`P_m` the beam power).
    pub fn probability_weights(&self) -> Result<Vec<f64>> {
        let comps = self.components()?;
        comps
            .iter()
            .zip(&self.spectrum.amplitudes)
            .map(|(c, a)| Ok(a * a * power(c, 0.0)?))
            .collect()
    }

    /// Exact-dispersion group velocity of every component.
    pub fn component_group_velocities(&self) -> Result<Vec<f64>> {
        self.components()?
            .iter()
            .map(|c| group_velocity(&SpectralModel::laguerre_gauss(c.k, c.w0, c.l, c.p)?))
            .collect()
    }
}

/// Samples the packet on an explicit grid without the window check.
pub fn synthesize_on(spec: &WavepacketSpec, grid: &CylGrid, t: f64) -> Result<FieldSlice> {
    let comps = spec.components()?;
    let amps = spec.spectrum.field_coefficients();
    let np = grid.n_phi();
    let rows = par::map_indexed(grid.z.n, |iz| {
        let z = grid.z.at(iz);
        let planes: Vec<PlaneFactors> = comps.iter().map(|c| PlaneFactors::new(c, z, t)).collect();
        let mut row = vec![Complex64::new(0.0, 0.0); grid.r.n * np];
        for ir in 0..grid.r.n {
            let r = grid.r.at(ir);
            for ip in 0..np {
                let phi = grid.phi_at(ip);
                let mut acc = Complex64::new(0.0, 0.0);
                for (f, a) in planes.iter().zip(&amps) {
                    acc += f.at(r, phi) * *a;
                }
                row[ir * np + ip] = acc;
            }
        }
        row
    });
    let values: Vec<Complex64> = rows.into_iter().flatten().collect();
    if values
        .iter()
        .any(|v| !v.re.is_finite() || !v.im.is_finite())
    {
        return Err(Error::Numeric(
            "packet synthesis produced a non-finite sample".into(),
        ));
    }
    Ok(FieldSlice {
        t,
        grid: grid.clone(),
        values,
    })
}

/// Samples the packet at time `t` on its default window.
///
/// Fails with a truncation error if more than [`LEAK_BUDGET`] of the
/// probability sits in the outer 5% of the window (axially or radially).
/// A single-node spectrum is a monochromatic beam, which is not localized in
/// `z`; the window check is skipped for it.
pub fn synthesize(spec: &WavepacketSpec, t: f64) -> Result<FieldSlice> {
    let slice = synthesize_on(spec, &spec.grid_at(t)?, t)?;
    if !spec.is_monochromatic() {
        let leaked = leaked_fraction(&slice)?;
        if leaked > LEAK_BUDGET {
            return Err(Error::Truncation {
                leaked,
                budget: LEAK_BUDGET,
                what: format!("packet window at t = {t}"),
            });
        }
    }
    Ok(slice)
}

/// Fraction of `int |psi|^2` in the outer 5% of the window.
pub fn leaked_fraction(slice: &FieldSlice) -> Result<f64> {
    let g = &slice.grid;
    let intensity = slice.intensity();
    let total = integrate_grid(g, &intensity)?;
    if !(total > 0.0) {
        return Err(Error::Degenerate("field has zero norm".into()));
    }
    let nz_edge = ((g.z.n as f64 * EDGE_FRACTION).ceil() as usize).max(1);
    let nr_edge = ((g.r.n as f64 * EDGE_FRACTION).ceil() as usize).max(1);
    let np = g.n_phi();
    let mut edge = 0.0;
    for iz in 0..g.z.n {
        let z_edge = iz < nz_edge || iz >= g.z.n - nz_edge;
        for ir in 0..g.r.n {
            if z_edge || ir >= g.r.n - nr_edge {
                let w = g.cell_weight(iz, ir).abs();
                let base = g.index(iz, ir, 0);
                edge += w * intensity[base..base + np].iter().sum::<f64>();
            }
        }
    }
    Ok(edge / total)
}

pub fn norm(slice: &FieldSlice) -> Result<f64> {
    integrate_grid(&slice.grid, &slice.intensity())
}

/// `int z |psi|^2 / int |psi|^2` over the slice window.
pub fn probability_centroid(slice: &FieldSlice) -> Result<f64> {
    let g = &slice.grid;
    let intensity = slice.intensity();
    let n = integrate_grid(g, &intensity)?;
    if !(n > 0.0) {
        return Err(Error::Degenerate("field has zero norm".into()));
    }
    let np = g.n_phi();
    let zi: Vec<f64> = intensity
        .iter()
        .enumerate()
        .map(|(i, v)| g.z.at(i / (g.r.n * np)) * v)
        .collect();
    Ok(integrate_grid(g, &zi)? / n)
}

/// Rms length of `|psi|^2` along `z`.
pub fn rms_length(slice: &FieldSlice) -> Result<f64> {
    let g = &slice.grid;
    let intensity = slice.intensity();
    let n = integrate_grid(g, &intensity)?;
    let zc = probability_centroid(slice)?;
    let np = g.n_phi();
    let dz2: Vec<f64> = intensity
        .iter()
        .enumerate()
        .map(|(i, v)| (g.z.at(i / (g.r.n * np)) - zc).powi(2) * v)
        .collect();
    Ok((integrate_grid(g, &dz2)? / n).sqrt())
}

fn weighted_mean(weights: &[f64], values: &[f64]) -> Result<f64> {
    let den: f64 = weights.iter().sum();
    if !(den > 0.0) {
        return Err(Error::Degenerate("spectral weights vanish".into()));
    }
    Ok(weights.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / den)
}

/// Centroid velocity of the energy density, from the momentum representation:
/// each component moves at its exact-dispersion group velocity and carries
/// energy `omega_m a_m^2 P_m`.
pub fn energy_velocity(spec: &WavepacketSpec) -> Result<f64> {
    let p = spec.probability_weights()?;
    let e: Vec<f64> = p
        .iter()
        .zip(&spec.spectrum.nodes)
        .map(|(p, w)| p * w)
        .collect();
    weighted_mean(&e, &spec.component_group_velocities()?)
}

/// Probability-centroid velocity in the momentum representation.
pub fn probability_velocity(spec: &WavepacketSpec) -> Result<f64> {
    weighted_mean(
        &spec.probability_weights()?,
        &spec.component_group_velocities()?,
    )
}

/// `Z_E(t)`. The spectral amplitudes are real, so `Z_E(0) = 0`.
pub fn energy_centroid(spec: &WavepacketSpec, t: f64) -> Result<f64> {
    Ok(t * energy_velocity(spec)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentroidSample {
    pub t: f64,
    pub ct: f64,
    pub z_c: f64,
    pub z_e: f64,
    pub ret_prob: f64,
    pub ret_energy: f64,
    pub ret_theory: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentroidTrace {
    pub k0zr: f64,
    pub s: f64,
    pub nodes: usize,
    /// `grid` or `momentum` (single-node spectra).
    pub z_c_method: &'static str,
    pub samples: Vec<CentroidSample>,
    pub slope_prob: f64,
    pub slope_energy: f64,
    pub slope_theory: f64,
}

impl CentroidTrace {
    pub const COLUMNS: [&'static str; 7] = [
        "t",
        "ct",
        "Z_c",
        "Z_E",
        "ret_prob",
        "ret_energy",
        "ret_theory",
    ];

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| {
                vec![
                    s.t,
                    s.ct,
                    s.z_c,
                    s.z_e,
                    s.ret_prob,
                    s.ret_energy,
                    s.ret_theory,
                ]
            })
            .collect()
    }
}

/// Probability centroid at `t`: sampled on the grid, or from the momentum
/// representation for a single-node spectrum.
pub fn centroid_at(spec: &WavepacketSpec, t: f64) -> Result<(f64, f64)> {
    if spec.is_monochromatic() {
        return Ok((t * probability_velocity(spec)?, f64::NAN));
    }
    let slice = synthesize(spec, t)?;
    Ok((probability_centroid(&slice)?, norm(&slice)?))
}

/// Centroid retardations at `spec.times`, with the straight-line theory
/// `-t / (2 k0 z_R)`.
pub fn retardation_curve(spec: &WavepacketSpec) -> Result<CentroidTrace> {
    if spec.times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("sample times must increase strictly"));
    }
    let v_e = energy_velocity(spec)?;
    let slope_theory = -1.0 / (2.0 * spec.k0zr());
    let samples = spec
        .times
        .iter()
        .map(|&t| {
            let (z_c, n) = centroid_at(spec, t)?;
            let z_e = t * v_e;
            Ok(CentroidSample {
                t,
                ct: t,
                z_c,
                z_e,
                ret_prob: z_c - t,
                ret_energy: z_e - t,
                ret_theory: slope_theory * t,
                norm: n,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ct: Vec<f64> = samples.iter().map(|s| s.ct).collect();
    let rp: Vec<f64> = samples.iter().map(|s| s.ret_prob).collect();
    let re: Vec<f64> = samples.iter().map(|s| s.ret_energy).collect();
    let (slope_prob, slope_energy) = if samples.len() >= 2 {
        (linear_fit(&ct, &rp)?.0, linear_fit(&ct, &re)?.0)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(CentroidTrace {
        k0zr: spec.k0zr(),
        s: spec.spectrum.s,
        nodes: spec.spectrum.len(),
        z_c_method: if spec.is_monochromatic() {
            "momentum"
        } else {
            "grid"
        },
        samples,
        slope_prob,
        slope_energy,
        slope_theory,
    })
}
