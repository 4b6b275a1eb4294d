//! Packet centroid trace against a transverse-analytic line-density oracle,
//! plus the trace invariants and the grid/node convergence gate.

use num_complex::Complex64;
use photovel::wavepacket::{
    norm, probability_centroid, retardation_curve, rms_length, synthesize, WavepacketSpec,
};

/// `int |psi|^2 d^2 r` as a function of `z` at time `t`, from the closed-form
/// overlap of two Gaussians with a common Rayleigh range:
/// `pi A^2 / (1/w_m^2 + 1/w_n^2 - i (k_m - k_n) z / (2 (z_R^2 + z^2)))`.
fn line_density(spec: &WavepacketSpec, z: f64, t: f64) -> f64 {
    let zr = spec.zr;
    let ks = &spec.spectrum.nodes;
    let c = spec.spectrum.field_coefficients();
    let grow = 1.0 + z * z / (zr * zr);
    let curv = z / (2.0 * (zr * zr + z * z));
    let inv_w2: Vec<f64> = ks.iter().map(|k| k / (2.0 * zr * grow)).collect();
    let mut acc = 0.0;
    for m in 0..ks.len() {
        for n in 0..ks.len() {
            let dk = ks[m] - ks[n];
            let a = Complex64::new(inv_w2[m] + inv_w2[n], -dk * curv);
            let ph = Complex64::from_polar(1.0, dk * (z - t));
            acc += (c[m] * c[n] * std::f64::consts::PI / grow * ph / a).re;
        }
    }
    acc
}

/// `(norm, centroid, rms length)` of the oracle line density over the window.
fn oracle_moments(spec: &WavepacketSpec, t: f64) -> (f64, f64, f64) {
    let g = spec.grid_at(t).unwrap();
    let n = 4001;
    let h = (g.z.end - g.z.start) / (n - 1) as f64;
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let z = g.z.start + i as f64 * h;
        let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
        let d = line_density(spec, z, t) * w;
        s0 += d;
        s1 += d * z;
        s2 += d * z * z;
    }
    let zc = s1 / s0;
    (s0, zc, (s2 / s0 - zc * zc).sqrt())
}

#[test]
fn grid_moments_match_line_density_oracle() {
    let spec = WavepacketSpec::standard(10.0, 20.0).unwrap();
    for t in [0.0, 20.0, 60.0] {
        let slice = synthesize(&spec, t).unwrap();
        let (n0, zc0, rms0) = oracle_moments(&spec, t);
        let n = norm(&slice).unwrap();
        let zc = probability_centroid(&slice).unwrap();
        let rms = rms_length(&slice).unwrap();
        assert!((n / n0 - 1.0).abs() < 1e-5, "t={t} norm {n} vs {n0}");
        assert!((zc - zc0).abs() < 1e-3, "t={t} centroid {zc} vs {zc0}");
        assert!((rms / rms0 - 1.0).abs() < 1e-4, "t={t} rms {rms} vs {rms0}");
        if t == 0.0 {
            // transform-limited length 1/(2 sigma_omega) ~ sqrt(s)/(2 k0)
            let want = 20f64.sqrt() / 2.0;
            assert!((rms / want - 1.0).abs() < 0.2, "rms {rms} vs {want}");
        }
    }
}

#[test]
fn default_packet_trace_properties() {
    let spec = WavepacketSpec::standard(10.0, 20.0).unwrap();
    let tr = retardation_curve(&spec).unwrap();
    let s = &tr.samples;
    assert!(s[0].ret_prob.abs() < 1e-3);
    assert!(
        (tr.slope_prob / -0.05 - 1.0).abs() < 0.15,
        "{}",
        tr.slope_prob
    );
    let last = s.last().unwrap();
    assert_eq!(last.ct, 60.0);
    assert!(
        (last.ret_prob / -3.0 - 1.0).abs() < 0.15,
        "{}",
        last.ret_prob
    );
    for w in s.windows(2) {
        assert!(w[1].z_c - w[0].z_c < w[1].t - w[0].t);
    }
    let n0 = s[0].norm;
    for x in s {
        assert!((x.norm / n0 - 1.0).abs() < 1e-4, "norm drift at t={}", x.t);
    }
    let gap = (tr.slope_energy - tr.slope_prob).abs() / tr.slope_prob.abs();
    assert!(gap < 0.2, "{gap}");
    assert!((tr.slope_energy / -0.05 - 1.0).abs() < 0.1);
}

#[test]
fn paraxiality_improves_with_rayleigh_range() {
    let tr = retardation_curve(&WavepacketSpec::standard(40.0, 20.0).unwrap()).unwrap();
    assert!(
        (tr.slope_prob / -0.0125 - 1.0).abs() < 0.1,
        "{}",
        tr.slope_prob
    );
}

#[test]
fn retardations_converged_under_doubling() {
    let mut base = WavepacketSpec::standard(10.0, 20.0).unwrap();
    base.times = vec![20.0, 60.0];
    let mut fine = WavepacketSpec::new(10.0, 20.0, 2 * base.spectrum.len()).unwrap();
    fine.n_r = 2 * base.n_r;
    fine.n_z = 2 * base.n_z;
    fine.times = base.times.clone();
    let a = retardation_curve(&base).unwrap();
    let b = retardation_curve(&fine).unwrap();
    for (x, y) in a.samples.iter().zip(&b.samples) {
        let rel = (x.ret_prob / y.ret_prob - 1.0).abs();
        assert!(rel < 0.02, "t={} {} vs {}", x.t, x.ret_prob, y.ret_prob);
    }
}
