//! Conservation audit of the vector packet out to six Rayleigh ranges.
//!
//! Far from focus the default sampling is not enough: 64 Gauss–Legendre
//! `k_perp` nodes put ghost rings inside the widened window, and the trailing
//! tail needs room behind the packet.

use photovel::emfield::{conservation_audit, synthesize_em, EmGridSpec, EmSampling, Polarization};
use photovel::spectra::{poisson_nodes, SpectralModel};

#[test]
fn conserved_to_six_rayleigh_ranges() {
    let set = synthesize_em(
        &SpectralModel::gaussian(1.0, 10.0).unwrap(),
        &poisson_nodes(100.0, 1.0, 96).unwrap(),
        Polarization::Linear,
        EmSampling {
            n_kperp: 128,
            n_phi: 16,
        },
    )
    .unwrap();
    let spec = EmGridSpec {
        rear_factor: 1.5,
        ..EmGridSpec::default()
    };
    let zr = 50.0;
    let times: Vec<f64> = (0..=3).map(|j| 2.0 * j as f64 * zr).collect();
    let audit = conservation_audit(&set, &times, &spec).unwrap();
    for c in &audit.checks {
        assert!(c.pass, "{c:?}");
    }
    let v0 = audit.rows[0].v_e[2];
    for r in &audit.rows {
        assert!((r.v_e[2] - v0).abs() < 1e-6, "t={} {}", r.t, r.v_e[2]);
    }
}
