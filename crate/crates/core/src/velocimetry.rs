//! Group and phase velocities from spectral averages, with the closed-form
//! paraxial predictions alongside.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectra::{moments_with_order, ModeKind, SpectralModel, DEFAULT_ORDER};

/// Tolerance on `v_g v_ph = 1`.
pub const PRODUCT_TOLERANCE: f64 = 1e-12;

pub fn group_velocity(model: &SpectralModel) -> Result<f64> {
    group_velocity_with_order(model, DEFAULT_ORDER)
}

pub fn group_velocity_with_order(model: &SpectralModel, order: usize) -> Result<f64> {
    Ok(moments_with_order(model, order)?.mean_kz / model.k)
}

pub fn phase_velocity(model: &SpectralModel) -> Result<f64> {
    let kz = moments_with_order(model, DEFAULT_ORDER)?.mean_kz;
    phase_from_kz(model.k, kz)
}

fn phase_from_kz(k: f64, kz: f64) -> Result<f64> {
    if !(kz > 0.0) {
        return Err(Error::Degenerate(format!("<k_z> = {kz} is not positive")));
    }
    Ok(k / kz)
}

/// Leading-order deficit `1 - v_g`.
pub fn paraxial_deficit(model: &SpectralModel) -> f64 {
    match model.kind {
        ModeKind::PlaneWave => 0.0,
        ModeKind::Gaussian | ModeKind::LaguerreGauss => {
            let zr = model.rayleigh_range().unwrap_or(f64::INFINITY);
            (model.order() + 1) as f64 / (2.0 * model.k * zr)
        }
        ModeKind::BesselRing => model.kperp0 * model.kperp0 / (2.0 * model.k * model.k),
    }
}

/// Paraxial `(v_g, v_ph)`.
pub fn paraxial_prediction(model: &SpectralModel) -> (f64, f64) {
    if let Some(kw0) = model.kw0() {
        if kw0 < 3.0 {
            log::warn!("paraxial prediction at k w0 = {kw0:.3} is unreliable");
        }
    }
    let d = paraxial_deficit(model);
    (1.0 - d, 1.0 + d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityReport {
    pub model: SpectralModel,
    pub kw0: Option<f64>,
    pub kzr: Option<f64>,
    pub order: u32,
    pub v_g_numeric: f64,
    pub v_ph_numeric: f64,
    pub product_over_c2: f64,
    pub v_g_paraxial: f64,
    pub v_ph_paraxial: f64,
    pub deficit_numeric: f64,
    pub deficit_paraxial: f64,
    /// `deficit_numeric / deficit_paraxial - 1` (0 when both vanish).
    pub relative_disagreement: f64,
    pub truncated_fraction: f64,
    pub evanescent_fraction: f64,
}

pub fn velocity_report(model: &SpectralModel) -> Result<VelocityReport> {
    let m = moments_with_order(model, DEFAULT_ORDER)?;
    let v_g = m.mean_kz / model.k;
    let v_ph = phase_from_kz(model.k, m.mean_kz)?;
    let product = v_g * v_ph;
    if (product - 1.0).abs() > PRODUCT_TOLERANCE {
        return Err(Error::Invariant(format!("v_g v_ph = {product:.17}")));
    }
    let (pg, pp) = paraxial_prediction(model);
    let deficit_numeric = 1.0 - v_g;
    let deficit_paraxial = 1.0 - pg;
    let relative_disagreement = if deficit_paraxial == 0.0 {
        deficit_numeric
    } else {
        deficit_numeric / deficit_paraxial - 1.0
    };
    Ok(VelocityReport {
        model: model.clone(),
        kw0: model.kw0(),
        kzr: model.rayleigh_range().map(|z| z * model.k),
        order: model.order(),
        v_g_numeric: v_g,
        v_ph_numeric: v_ph,
        product_over_c2: product,
        v_g_paraxial: pg,
        v_ph_paraxial: pp,
        deficit_numeric,
        deficit_paraxial,
        relative_disagreement,
        truncated_fraction: m.truncated_fraction,
        evanescent_fraction: m.evanescent_fraction,
    })
}
