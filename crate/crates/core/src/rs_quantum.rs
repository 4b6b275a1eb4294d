//! Riemann–Silberstein form of the Maxwell field: spin-1 matrices, the
//! Hamiltonian `c (S . p)`, velocity expectations and the two competing
//! momentum velocities.
//!
//! Spectral components are `F = (E + i H)/sqrt 2` per plane wave of an
//! [`emfield`](crate::emfield) set, weighted by the set's quadrature measure.
//! With `h = k_hat x e` every component satisfies `(S . k) F = omega F`.

use num_complex::Complex64;
use serde::Serialize;

use crate::emfield::{FieldGrid, PlaneWave, PlaneWaveSet, Polarization};
use crate::error::{Error, Result};
use crate::numerics::{dot, gauss_legendre, integrate_grid, integrate_grid_vec, Complex3, Vec3};

const C0: Complex64 = Complex64::new(0.0, 0.0);

pub type Matrix3 = [[Complex64; 3]; 3];

/// `(S_i)_{jk} = -i eps_{ijk}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinMatrices(pub [Matrix3; 3]);

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn mat_mul(a: &Matrix3, b: &Matrix3) -> Matrix3 {
    let mut out = [[C0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn mat_vec(a: &Matrix3, v: &Complex3) -> Complex3 {
    let mut out = Complex3::ZERO;
    for i in 0..3 {
        out.0[i] = (0..3).map(|k| a[i][k] * v.0[k]).sum();
    }
    out
}

fn max_entry_diff(a: &Matrix3, b: &Matrix3) -> f64 {
    let mut m = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            m = m.max((a[i][j] - b[i][j]).norm());
        }
    }
    m
}

impl Default for SpinMatrices {
    fn default() -> Self {
        Self::new()
    }
}

impl SpinMatrices {
    pub fn new() -> Self {
        let mut s = [[[C0; 3]; 3]; 3];
        for (i, si) in s.iter_mut().enumerate() {
            for (j, row) in si.iter_mut().enumerate() {
                for (k, x) in row.iter_mut().enumerate() {
                    *x = Complex64::new(0.0, -levi_civita(i, j, k));
                }
            }
        }
        SpinMatrices(s)
    }

    /// `S . n`.
    pub fn along(&self, n: Vec3) -> Matrix3 {
        let mut out = [[C0; 3]; 3];
        for (i, si) in self.0.iter().enumerate() {
            for j in 0..3 {
                for k in 0..3 {
                    out[j][k] += si[j][k] * n[i];
                }
            }
        }
        out
    }

    /// `F* . S F` for each axis.
    pub fn expectation(&self, f: &Complex3) -> Vec3 {
        [0, 1, 2].map(|i| f.hdot(&mat_vec(&self.0[i], f)).re)
    }

    /// Largest entry of `[S_i, S_j] - i eps_ijk S_k` over all pairs.
    pub fn commutator_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let ab = mat_mul(&self.0[i], &self.0[j]);
                let ba = mat_mul(&self.0[j], &self.0[i]);
                let mut lhs = [[C0; 3]; 3];
                let mut rhs = [[C0; 3]; 3];
                for r in 0..3 {
                    for c in 0..3 {
                        lhs[r][c] = ab[r][c] - ba[r][c];
                        rhs[r][c] = (0..3)
                            .map(|k| Complex64::new(0.0, levi_civita(i, j, k)) * self.0[k][r][c])
                            .sum();
                    }
                }
                worst = worst.max(max_entry_diff(&lhs, &rhs));
            }
        }
        worst
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for s in &self.0 {
            for r in 0..3 {
                for c in 0..3 {
                    worst = worst.max((s[r][c] - s[c][r].conj()).norm());
                }
            }
        }
        worst
    }

    /// Largest entry of `(S . n)^3 - S . n`.
    pub fn cube_residual(&self, n: Vec3) -> f64 {
        let a = self.along(n);
        max_entry_diff(&mat_mul(&a, &mat_mul(&a, &a)), &a)
    }
}

/// `c (S . k) F`, which is `i k x F`.
pub fn hamiltonian_apply(f: &Complex3, k: Vec3) -> Complex3 {
    mat_vec(&SpinMatrices::new().along(k), f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsComponent {
    pub k: Vec3,
    pub omega: f64,
    pub f: Complex3,
    pub weight: f64,
}

impl RsComponent {
    pub fn from_plane_wave(pw: &PlaneWave) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        RsComponent {
            k: pw.k,
            omega: pw.omega,
            f: (pw.e + pw.h.scale(Complex64::i())).scale_re(s),
            weight: pw.measure,
        }
    }

    /// `||(S . k) F - omega F|| / ||F||`.
    pub fn eigen_residual(&self) -> f64 {
        let hf = hamiltonian_apply(&self.f, self.k);
        (hf - self.f.scale_re(self.omega)).norm() / self.f.norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsSpectralField {
    pub components: Vec<RsComponent>,
}

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den == 0.0 || !den.is_finite() {
        return Err(Error::Degenerate(format!("{what} vanishes")));
    }
    Ok(num / den)
}

impl RsSpectralField {
    pub fn from_set(set: &PlaneWaveSet) -> Self {
        RsSpectralField {
            components: set
                .components
                .iter()
                .map(RsComponent::from_plane_wave)
                .collect(),
        }
    }

    /// `sum w |F|^2`.
    pub fn norm(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.f.norm_sqr())
            .sum()
    }

    pub fn max_eigen_residual(&self) -> f64 {
        self.components
            .iter()
            .map(RsComponent::eigen_residual)
            .fold(0.0, f64::max)
    }

    /// Largest `|k . F| / (|k| |F|)`.
    pub fn max_transversality_residual(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.f.dot_real(c.k).norm() / (c.omega * c.f.norm()))
            .fold(0.0, f64::max)
    }

    /// `<v> = sum w F* S F / sum w |F|^2`.
    pub fn spin_expectation(&self) -> Result<Vec3> {
        let s = SpinMatrices::new();
        let mut num = [0.0; 3];
        for c in &self.components {
            let e = s.expectation(&c.f);
            for i in 0..3 {
                num[i] += c.weight * e[i];
            }
        }
        let n = self.norm();
        Ok([ratio(num[0], n, "norm")?, num[1] / n, num[2] / n])
    }

    /// `<v'>` with `v' = k_hat (k_hat . S)` per component.
    pub fn primed_velocity_expectation(&self) -> Result<Vec3> {
        let s = SpinMatrices::new();
        let mut num = [0.0; 3];
        for c in &self.components {
            let n = c.k.map(|x| x / c.omega);
            let proj = c.f.hdot(&mat_vec(&s.along(n), &c.f)).re;
            for i in 0..3 {
                num[i] += c.weight * n[i] * proj;
            }
        }
        let n = self.norm();
        Ok([ratio(num[0], n, "norm")?, num[1] / n, num[2] / n])
    }

    /// `v_P1,z = sum w omega |F|^2 / sum w k_z |F|^2`.
    pub fn momentum_velocity_v1(&self) -> Result<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for c in &self.components {
            let w = c.weight * c.f.norm_sqr();
            num += w * c.omega;
            den += w * c.k[2];
        }
        ratio(num, den, "sum w k_z |F|^2")
    }

    /// `v_P,z = sum w |F|^2 / sum w (k_z/k) |F|^2`.
    pub fn momentum_velocity_proper(&self) -> Result<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for c in &self.components {
            let w = c.weight * c.f.norm_sqr();
            num += w;
            den += w * c.k[2] / c.omega;
        }
        ratio(num, den, "sum w (k_z/k) |F|^2")
    }

    /// `<H> = sum w omega |F|^2 / sum w |F|^2`.
    pub fn mean_energy(&self) -> Result<f64> {
        let num: f64 = self
            .components
            .iter()
            .map(|c| c.weight * c.omega * c.f.norm_sqr())
            .sum();
        ratio(num, self.norm(), "norm")
    }

    /// `<r . p>(t)`. The spectra carry no phase beyond `e^{i l phi}`, whose
    /// gradient is azimuthal and orthogonal to `k`, so only the analytic
    /// `e^{-i omega t}` dependence contributes: `k . i grad_k` of it gives
    /// `omega t`.
    pub fn rp_expectation(&self, t: f64) -> Result<f64> {
        Ok(t * self.mean_energy()?)
    }

    pub fn to_photon_wavefunction(&self) -> Result<PhotonWavefunction> {
        if self.components.iter().any(|c| !(c.omega > 0.0)) {
            return Err(Error::invalid("photon wavefunction needs omega > 0"));
        }
        Ok(PhotonWavefunction {
            components: self
                .components
                .iter()
                .map(|c| RsComponent {
                    f: c.f.scale_re(1.0 / c.omega.sqrt()),
                    ..*c
                })
                .collect(),
        })
    }
}

/// Central-difference rate of `<r . p>` and the mean energy it should equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RpRate {
    pub rate: f64,
    pub mean_energy: f64,
}

pub fn rp_product_rate(field: &RsSpectralField, t: f64, dt: f64) -> Result<RpRate> {
    if !(dt > 0.0) {
        return Err(Error::invalid("time step must be positive"));
    }
    let rate = (field.rp_expectation(t + dt)? - field.rp_expectation(t - dt)?) / (2.0 * dt);
    Ok(RpRate {
        rate,
        mean_energy: field.mean_energy()?,
    })
}

/// Momentum-space photon wavefunction `psi = F / sqrt(omega)`, stored in the
/// `f` slot of each component.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonWavefunction {
    pub components: Vec<RsComponent>,
}

impl PhotonWavefunction {
    /// `sum w omega |psi|^2`.
    pub fn energy(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.omega * c.f.norm_sqr())
            .sum()
    }

    /// Scalar-packet group velocity `sum w k |psi|^2 / sum w omega |psi|^2`.
    pub fn group_velocity(&self) -> Result<Vec3> {
        let mut num = [0.0; 3];
        for c in &self.components {
            let w = c.weight * c.f.norm_sqr();
            for i in 0..3 {
                num[i] += w * c.k[i];
            }
        }
        let e = self.energy();
        Ok([ratio(num[0], e, "energy")?, num[1] / e, num[2] / e])
    }

    /// Scalar-packet phase velocity `sum w omega |psi|^2 / sum w k_z |psi|^2`.
    pub fn phase_velocity(&self) -> Result<f64> {
        let den: f64 = self
            .components
            .iter()
            .map(|c| c.weight * c.k[2] * c.f.norm_sqr())
            .sum();
        ratio(self.energy(), den, "sum w k_z |psi|^2")
    }
}

/// `c Im int F* x F / int |F|^2` with `F = (E + i H)/sqrt 2` built from the
/// instantaneous real fields on the grid.
pub fn spin_expectation(fields: &FieldGrid) -> Result<Vec3> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (dens, flux): (Vec<f64>, Vec<Vec3>) = fields
        .e
        .iter()
        .zip(&fields.h)
        .map(|(e, h)| {
            let f = real_rs_vector(e.re(), h.re(), s);
            (f.norm_sqr(), f.conj().cross(&f).im())
        })
        .unzip();
    let n = integrate_grid(&fields.grid, &dens)?;
    let v = integrate_grid_vec(&fields.grid, &flux)?;
    Ok([ratio(v[0], n, "int |F|^2")?, v[1] / n, v[2] / n])
}

fn real_rs_vector(e: Vec3, h: Vec3, s: f64) -> Complex3 {
    Complex3([0, 1, 2].map(|i| Complex64::new(e[i] * s, h[i] * s)))
}

/// Largest `|Im(F* x F) - E x H|` over the pairs, relative to the largest
/// `(E^2 + H^2)/2`.
pub fn real_field_identity_residual(pairs: &[(Vec3, Vec3)]) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for &(e, h) in pairs {
        let f = real_rs_vector(e, h, s);
        let lhs = f.conj().cross(&f).im();
        let rhs = crate::numerics::cross(e, h);
        let d = [0, 1, 2].map(|i| lhs[i] - rhs[i]);
        worst = worst.max(dot(d, d).sqrt());
        scale = scale.max(0.5 * (dot(e, e) + dot(h, h)));
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Local densities `F* . S F` and `F* . k_hat (k_hat . S) F` of the analytic
/// signal at one point; they differ pointwise but have equal integrals.
pub fn local_velocity_densities(set: &PlaneWaveSet, r: Vec3, t: f64) -> (Vec3, Vec3) {
    let spin = SpinMatrices::new();
    let mut f = Complex3::ZERO;
    let mut g = [Complex3::ZERO; 3];
    for pw in &set.components {
        let c = RsComponent::from_plane_wave(pw);
        let ph = Complex64::from_polar(pw.measure, dot(pw.k, r) - pw.omega * t);
        let n = pw.direction();
        c.f.mul_add_to(ph, &mut f);
        let sf = mat_vec(&spin.along(n), &c.f);
        for (i, gi) in g.iter_mut().enumerate() {
            sf.mul_add_to(ph * n[i], gi);
        }
    }
    (spin.expectation(&f), [0, 1, 2].map(|i| f.hdot(&g[i]).re))
}

/// Two frequency groups `omega0` and `2 omega0`, each with angular density
/// `exp(-theta^2 / theta_rms^2)` (rms polar angles 0.2 and 0.05) and equal
/// total `sum w |F|^2`.
pub fn vp1_demo_fixture(omega0: f64, n_theta: usize, n_phi: usize) -> Result<RsSpectralField> {
    let mut components = Vec::new();
    for (omega, theta_rms) in [(omega0, 0.2), (2.0 * omega0, 0.05)] {
        let group = angular_group(omega, theta_rms, n_theta, n_phi, Polarization::Linear)?;
        let norm: f64 = group.iter().map(|c| c.weight * c.f.norm_sqr()).sum();
        components.extend(group.into_iter().map(|c| RsComponent {
            weight: c.weight * 0.5 / norm,
            ..c
        }));
    }
    Ok(RsSpectralField { components })
}

/// Plane waves of one frequency with `|F|^2` density `exp(-theta^2/theta_rms^2)`
/// on the direction sphere, polar angle cut at `min(8 theta_rms, pi/2)`.
pub fn angular_group(
    omega: f64,
    theta_rms: f64,
    n_theta: usize,
    n_phi: usize,
    pol: Polarization,
) -> Result<Vec<RsComponent>> {
    let q = gauss_legendre(
        n_theta,
        0.0,
        (8.0 * theta_rms).min(std::f64::consts::FRAC_PI_2),
    )?;
    let mut out = Vec::with_capacity(n_theta * n_phi);
    for (theta, wt) in q.iter() {
        let (st, ct) = theta.sin_cos();
        let density = (-(theta * theta) / (theta_rms * theta_rms)).exp();
        for p in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * p as f64 / n_phi as f64;
            let k = [omega * st * phi.cos(), omega * st * phi.sin(), omega * ct];
            let pw = PlaneWave::along(k, pol.vector(), 1.0)?;
            let c = RsComponent::from_plane_wave(&pw);
            let w = wt * st * 2.0 * std::f64::consts::PI / n_phi as f64 * density / c.f.norm_sqr();
            out.push(RsComponent { weight: w, ..c });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RsReport {
    pub components: usize,
    pub spin_expectation: Vec3,
    pub primed_velocity: Vec3,
    pub momentum_velocity_v1: f64,
    pub momentum_velocity_proper: f64,
    pub v1_minus_proper: f64,
    /// `v_P,z <v>_z`.
    pub duality_product: f64,
    pub wavefunction_group_velocity: f64,
    pub wavefunction_phase_velocity: f64,
    pub eigen_residual_max: f64,
    pub transversality_residual_max: f64,
    pub commutator_residual: f64,
    pub rp_rate: RpRate,
}

pub fn rs_report(field: &RsSpectralField, omega0: f64) -> Result<RsReport> {
    let spin = field.spin_expectation()?;
    let v1 = field.momentum_velocity_v1()?;
    let vp = field.momentum_velocity_proper()?;
    let psi = field.to_photon_wavefunction()?;
    Ok(RsReport {
        components: field.components.len(),
        spin_expectation: spin,
        primed_velocity: field.primed_velocity_expectation()?,
        momentum_velocity_v1: v1,
        momentum_velocity_proper: vp,
        v1_minus_proper: v1 - vp,
        duality_product: vp * spin[2],
        wavefunction_group_velocity: psi.group_velocity()?[2],
        wavefunction_phase_velocity: psi.phase_velocity()?,
        eigen_residual_max: field.max_eigen_residual(),
        transversality_residual_max: field.max_transversality_residual(),
        commutator_residual: SpinMatrices::new().commutator_residual(),
        rp_rate: rp_product_rate(field, 0.0, 0.01 / omega0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emfield::{synthesize_em, EmSampling};
    use crate::spectra::{poisson_nodes, FrequencySpectrum, SpectralModel};
    use crate::velocimetry::{group_velocity, phase_velocity};
    use proptest::prelude::*;

    fn gaussian_field(kw0: f64, pol: Polarization) -> (PlaneWaveSet, RsSpectralField) {
        let g = SpectralModel::gaussian(1.0, kw0).unwrap();
        let set = synthesize_em(
            &g,
            &FrequencySpectrum::monochromatic(1.0).unwrap(),
            pol,
            EmSampling::default(),
        )
        .unwrap();
        let f = RsSpectralField::from_set(&set);
        (set, f)
    }

    #[test]
    fn printed_spin_matrices() {
        let s = SpinMatrices::new();
        let i = Complex64::i();
        assert_eq!(s.0[0][1][2], -i);
        assert_eq!(s.0[0][2][1], i);
        assert_eq!(s.0[1][0][2], i);
        assert_eq!(s.0[1][2][0], -i);
        assert_eq!(s.0[2][0][1], -i);
        assert_eq!(s.0[2][1][0], i);
        assert_eq!(s.commutator_residual(), 0.0);
        assert_eq!(s.hermiticity_residual(), 0.0);
    }

    #[test]
    fn circular_vector_is_sz_eigenvector() {
        let s = 0.5f64.sqrt();
        let f = Complex3::new(Complex64::new(s, 0.0), Complex64::new(0.0, s), C0);
        let out = mat_vec(&SpinMatrices::new().0[2], &f);
        assert!((out - f).norm() < 1e-16);
        let hf = hamiltonian_apply(&f, [0.0, 0.0, 3.0]);
        assert!((hf - f.scale_re(3.0)).norm() < 1e-15);
    }

    #[test]
    fn longitudinal_input_fails_eigenrelation() {
        let k = [0.3, -0.2, 0.9];
        let c = RsComponent {
            k,
            omega: dot(k, k).sqrt(),
            f: Complex3::from_real(k),
            weight: 1.0,
        };
        assert!(c.eigen_residual() > 0.5);
    }

    #[test]
    fn generated_components_are_eigenvectors() {
        for pol in [Polarization::Linear, Polarization::Circular] {
            let m = SpectralModel::laguerre_gauss(1.0, 4.0, 3, 1).unwrap();
            let set = synthesize_em(
                &m,
                &poisson_nodes(20.0, 1.0, 6).unwrap(),
                pol,
                EmSampling::default(),
            )
            .unwrap();
            let f = RsSpectralField::from_set(&set);
            assert!(f.max_eigen_residual() < 1e-12);
            assert!(f.max_transversality_residual() < 1e-14);
        }
    }

    #[test]
    fn plane_wave_velocities() {
        let pw = PlaneWave::along([0.0, 0.0, 2.0], Polarization::Linear.vector(), 1.0).unwrap();
        let f = RsSpectralField::from_set(&PlaneWaveSet::from_components(vec![pw]).unwrap());
        assert_eq!(f.spin_expectation().unwrap(), [0.0, 0.0, 1.0]);
        assert_eq!(f.primed_velocity_expectation().unwrap(), [0.0, 0.0, 1.0]);
        assert_eq!(f.momentum_velocity_proper().unwrap(), 1.0);
        assert_eq!(f.momentum_velocity_v1().unwrap(), 1.0);
        let r = rp_product_rate(&f, 0.0, 0.005).unwrap();
        assert!((r.rate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_velocities_agree() {
        let g = SpectralModel::gaussian(1.0, 10.0).unwrap();
        let (set, f) = gaussian_field(10.0, Polarization::Linear);
        let v = f.spin_expectation().unwrap();
        let vp = f.primed_velocity_expectation().unwrap();
        for i in 0..3 {
            assert!((v[i] - vp[i]).abs() < 1e-10);
        }
        assert!((v[2] - set.spectral_energy_velocity().unwrap()[2]).abs() < 1e-12);
        assert!((v[2] - group_velocity(&g).unwrap()).abs() < 1e-10);
        let p = f.momentum_velocity_proper().unwrap();
        assert!((p * v[2] - 1.0).abs() < 1e-12);
        assert!((f.momentum_velocity_v1().unwrap() - p).abs() < 1e-12);
    }

    #[test]
    fn kw0_5_phase_velocity() {
        let (_, f) = gaussian_field(5.0, Polarization::Circular);
        let p = f.momentum_velocity_proper().unwrap();
        assert!((p - 1.04).abs() < 0.01, "{p}");
        let want = phase_velocity(&SpectralModel::gaussian(1.0, 5.0).unwrap()).unwrap();
        assert!((p - want).abs() < 1e-6, "{p} {want}");
    }

    #[test]
    fn wavefunction_conversion() {
        let set = synthesize_em(
            &SpectralModel::gaussian(1.0, 8.0).unwrap(),
            &poisson_nodes(30.0, 1.0, 16).unwrap(),
            Polarization::Circular,
            EmSampling::default(),
        )
        .unwrap();
        let f = RsSpectralField::from_set(&set);
        let psi = f.to_photon_wavefunction().unwrap();
        assert!((psi.energy() / f.norm() - 1.0).abs() < 1e-14);
        assert!(
            (psi.group_velocity().unwrap()[2] - f.spin_expectation().unwrap()[2]).abs() < 1e-10
        );
        assert!(
            (psi.phase_velocity().unwrap() - f.momentum_velocity_proper().unwrap()).abs() < 1e-10
        );
        let r = rp_product_rate(&f, 3.0, 0.01).unwrap();
        assert!((r.rate / r.mean_energy - 1.0).abs() < 1e-6);
    }

    #[test]
    fn primed_and_canonical_densities_differ_locally() {
        let (set, _) = gaussian_field(3.0, Polarization::Linear);
        let (v, vp) = local_velocity_densities(&set, [1.5, 0.7, 0.4], 0.0);
        let d = [0, 1, 2].map(|i| v[i] - vp[i]);
        assert!(dot(d, d).sqrt() > 1e-6 * dot(v, v).sqrt());
    }

    #[test]
    fn vp1_fixture_discrepancy() {
        let f = vp1_demo_fixture(1.0, 48, 16).unwrap();
        let d = f.momentum_velocity_v1().unwrap() - f.momentum_velocity_proper().unwrap();
        assert!(d.abs() > 1e-3, "{d}");
        let r = rp_product_rate(&f, 0.0, 0.01).unwrap();
        let num: f64 = f
            .components
            .iter()
            .map(|c| c.weight * c.omega * c.f.norm_sqr())
            .sum();
        assert!((r.rate * f.norm() - num).abs() < 1e-12);
        assert!((r.rate * f.norm() - f.norm()).abs() > 1e-3);
    }

    #[test]
    fn spin_expectation_equals_energy_velocity_on_grid() {
        use crate::emfield::{eval_grid, field_integrals, EmGridSpec};
        let set = synthesize_em(
            &SpectralModel::gaussian(1.0, 10.0).unwrap(),
            &poisson_nodes(100.0, 1.0, 48).unwrap(),
            Polarization::Linear,
            EmSampling::default(),
        )
        .unwrap();
        let spec = EmGridSpec {
            n_z: 129,
            max_dr: 0.25,
            ..EmGridSpec::default()
        };
        let fields = eval_grid(&set, &spec.grid_for(&set, 20.0).unwrap(), 20.0).unwrap();
        let fi = field_integrals(&fields).unwrap();
        let v = spin_expectation(&fields).unwrap();
        for i in 0..3 {
            assert!((v[i] - fi.momentum[i] / fi.energy).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn real_field_identity(
            pairs in prop::collection::vec(
                (prop::array::uniform3(-10.0f64..10.0), prop::array::uniform3(-10.0f64..10.0)), 1..64)
        ) {
            prop_assert!(real_field_identity_residual(&pairs) < 1e-12);
        }

        #[test]
        fn cube_of_spin_projection(theta in 0.0..std::f64::consts::PI, phi in 0.0..std::f64::consts::TAU) {
            let n = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            prop_assert!(SpinMatrices::new().cube_residual(n) < 1e-14);
        }
    }
}
