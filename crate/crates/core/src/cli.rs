//! `photovel` command line: configuration merging, dispatch and artifacts.
//!
//! Parameters come from an optional flat JSON file (`--config`) and from
//! `--key value` flags, which win. Every number written to JSON is an object
//! `{"value": x, "method": "numeric" | "paraxial" | "identity"}`.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::beams::{phase_map, BeamParams, PhaseMapGrid, PHASE_MAP_COLUMNS};
use crate::emfield::{
    conservation_audit, gaussian_packet, ConservationAudit, EmGridSpec, Polarization,
};
use crate::error::Error;
use crate::io::{write_csv, write_json};
use crate::rs_quantum::{rs_report, vp1_demo_fixture, RsSpectralField};
use crate::selftest;
use crate::spectra::SpectralModel;
use crate::velocimetry::velocity_report;
use crate::wavepacket::{retardation_curve, CentroidTrace, WavepacketSpec};

/// Environment variable naming the output directory.
pub const OUT_ENV: &str = "PHOTOVEL_OUT";
pub const DEFAULT_OUT: &str = "photovel-out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ACCURACY: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "photovel",
    version,
    about = "Velocities of confined light beams and wavepackets"
)]
pub struct Cli {
    /// Run the acceptance suite and print a pass/fail matrix.
    #[arg(long)]
    pub selftest: bool,
    /// Flat JSON file with parameters; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub params: Params,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Spectral group and phase velocities of a beam.
    Velocity,
    /// Centroid retardation of a polychromatic packet.
    Propagate,
    /// Phase fronts on the x-z plane.
    Phasemap,
    /// Conservation audit of the vector field, or the spinor-formalism report.
    Audit {
        #[arg(value_enum)]
        target: AuditTarget,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditTarget {
    Em,
    Rs,
}

/// Every physical and sampling parameter, all optional until merged.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// gaussian, lg or bessel.
    #[arg(long, global = true)]
    pub beam: Option<String>,
    #[arg(long, global = true)]
    pub kw0: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub l: Option<i32>,
    #[arg(long, global = true)]
    pub p: Option<u32>,
    /// Bessel ring radius `k_perp0 / k`.
    #[arg(long, global = true)]
    pub ktr: Option<f64>,
    #[arg(long, global = true)]
    pub k0zr: Option<f64>,
    #[arg(long, global = true)]
    pub s: Option<f64>,
    /// Frequency nodes.
    #[arg(long = "M", global = true)]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    /// linear or circular.
    #[arg(long, global = true)]
    pub polarization: Option<String>,
    /// Named spinor fixture (`vp1-demo`).
    #[arg(long, global = true)]
    pub fixture: Option<String>,
    #[arg(long, global = true)]
    pub n_r: Option<usize>,
    #[arg(long, global = true)]
    pub n_z: Option<usize>,
    #[arg(long, global = true)]
    pub n_phi: Option<usize>,
    /// Output directory (default: $PHOTOVEL_OUT, then `photovel-out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Params {
    /// Field-wise `self` over `base`.
    pub fn or(self, base: Params) -> Params {
        Params {
            beam: self.beam.or(base.beam),
            kw0: self.kw0.or(base.kw0),
            l: self.l.or(base.l),
            p: self.p.or(base.p),
            ktr: self.ktr.or(base.ktr),
            k0zr: self.k0zr.or(base.k0zr),
            s: self.s.or(base.s),
            m: self.m.or(base.m),
            polarization: self.polarization.or(base.polarization),
            fixture: self.fixture.or(base.fixture),
            n_r: self.n_r.or(base.n_r),
            n_z: self.n_z.or(base.n_z),
            n_phi: self.n_phi.or(base.n_phi),
            out: self.out.or(base.out),
        }
    }
}

/// Parameters plus the command named in the config file, if any.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    pub command: Option<Command>,
    pub params: Params,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(Error),
    /// Computation finished but a check failed; the report is written.
    Check {
        code: i32,
        message: String,
    },
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
            CliError::Check { message, .. } => write!(f, "{message}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Check { code, .. } => *code,
            CliError::Run(e) => match e {
                Error::InvalidArgument(_) | Error::OutOfDomain { .. } => EXIT_CONFIG,
                Error::Invariant(_) => EXIT_INVARIANT,
                _ => EXIT_ACCURACY,
            },
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses a flat JSON config. `command` and `target` select the subcommand;
/// every other key must be a known parameter.
pub fn parse_config(text: &str) -> Result<FileConfig, CliError> {
    let mut map: serde_json::Map<String, Value> = serde_json::from_str(text)
        .map_err(|e| config_err(format!("config is not a flat JSON object: {e}")))?;
    let command = map.remove("command");
    let target = map.remove("target");
    let command = match command {
        None => {
            if target.is_some() {
                return Err(config_err("`target` given without `command`"));
            }
            None
        }
        Some(Value::String(c)) => Some(match c.as_str() {
            "velocity" => Command::Velocity,
            "propagate" => Command::Propagate,
            "phasemap" => Command::Phasemap,
            "audit" => {
                let t = target.ok_or_else(|| config_err("audit needs `target`: em or rs"))?;
                let target = AuditTarget::deserialize(t)
                    .map_err(|e| config_err(format!("bad audit target: {e}")))?;
                Command::Audit { target }
            }
            other => return Err(config_err(format!("unknown command `{other}`"))),
        }),
        Some(v) => return Err(config_err(format!("`command` must be a string, got {v}"))),
    };
    let params = Params::deserialize(Value::Object(map)).map_err(|e| config_err(e.to_string()))?;
    Ok(FileConfig { command, params })
}

/// Output directory: flag or config value, then `$PHOTOVEL_OUT`, then the
/// default.
pub fn resolve_out(params: &Params, env: Option<String>) -> PathBuf {
    params
        .out
        .clone()
        .or(env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn tagged(value: f64, method: &str) -> Value {
    json!({ "value": value, "method": method })
}

fn numeric(v: f64) -> Value {
    tagged(v, "numeric")
}

fn paraxial(v: f64) -> Value {
    tagged(v, "paraxial")
}

fn identity(v: f64) -> Value {
    tagged(v, "identity")
}

fn vec_tagged(v: [f64; 3], method: &str) -> Value {
    Value::Array(v.iter().map(|&x| tagged(x, method)).collect())
}

/// Result of one command: JSON summary plus text for standard output.
pub struct Report {
    pub json: Value,
    pub text: String,
}

fn polarization(p: &Params) -> Result<Polarization, CliError> {
    match p.polarization.as_deref().unwrap_or("linear") {
        "linear" => Ok(Polarization::Linear),
        "circular" => Ok(Polarization::Circular),
        other => Err(config_err(format!(
            "polarization must be linear or circular, got `{other}`"
        ))),
    }
}

fn beam_model(p: &Params) -> Result<SpectralModel, CliError> {
    let kw0 = p.kw0.unwrap_or(10.0);
    let l = p.l.unwrap_or(0);
    match p.beam.as_deref().unwrap_or("gaussian") {
        "gaussian" => Ok(SpectralModel::gaussian(1.0, kw0)?),
        "lg" => Ok(SpectralModel::laguerre_gauss(
            1.0,
            kw0,
            l,
            p.p.unwrap_or(0),
        )?),
        "bessel" => Ok(SpectralModel::bessel_ring(1.0, p.ktr.unwrap_or(0.1), l)?),
        other => Err(config_err(format!(
            "beam must be gaussian, lg or bessel, got `{other}`"
        ))),
    }
}

pub fn cmd_velocity(p: &Params) -> Result<Report, CliError> {
    let model = beam_model(p)?;
    let r = velocity_report(&model)?;
    let json = json!({
        "command": "velocity",
        "model": r.model,
        "order": r.order,
        "kw0": r.kw0,
        "kzr": r.kzr,
        "v_g": numeric(r.v_g_numeric),
        "v_ph": numeric(r.v_ph_numeric),
        "v_g_v_ph": identity(r.product_over_c2),
        "v_g_paraxial": paraxial(r.v_g_paraxial),
        "v_ph_paraxial": paraxial(r.v_ph_paraxial),
        "deficit": numeric(r.deficit_numeric),
        "deficit_paraxial": paraxial(r.deficit_paraxial),
        "relative_disagreement": numeric(r.relative_disagreement),
        "truncated_fraction": numeric(r.truncated_fraction),
        "evanescent_fraction": numeric(r.evanescent_fraction),
    });
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<12} {:>20} {:>20}",
        "quantity", "numeric", "paraxial"
    );
    for (name, a, b) in [
        ("v_g / c", r.v_g_numeric, r.v_g_paraxial),
        ("v_ph / c", r.v_ph_numeric, r.v_ph_paraxial),
        ("1 - v_g / c", r.deficit_numeric, r.deficit_paraxial),
    ] {
        let _ = writeln!(text, "{name:<12} {a:>20.15} {b:>20.15}");
    }
    let _ = writeln!(text, "v_g v_ph / c^2 = {:.17}", r.product_over_c2);
    Ok(Report { json, text })
}

pub fn packet_spec(p: &Params) -> Result<WavepacketSpec, CliError> {
    let k0zr = p.k0zr.unwrap_or(10.0);
    let s = p.s.unwrap_or(20.0);
    let mut spec = match p.m {
        Some(m) => WavepacketSpec::new(k0zr, s, m)?,
        None => WavepacketSpec::standard(k0zr, s)?,
    };
    spec.l = p.l.unwrap_or(0);
    spec.p = p.p.unwrap_or(0);
    if let Some(n) = p.n_r {
        spec.n_r = n;
    }
    if let Some(n) = p.n_z {
        spec.n_z = n;
    }
    if p.n_phi.is_some() {
        return Err(config_err(
            "propagate samples the axisymmetric |psi|^2; n_phi does not apply",
        ));
    }
    Ok(spec)
}

pub fn cmd_propagate(p: &Params) -> Result<(Report, CentroidTrace), CliError> {
    let spec = packet_spec(p)?;
    let tr = retardation_curve(&spec)?;
    let json = json!({
        "command": "propagate",
        "k0zr": tr.k0zr,
        "s": tr.s,
        "nodes": tr.nodes,
        "z_c_method": tr.z_c_method,
        "slope_probability": numeric(tr.slope_prob),
        "slope_energy": numeric(tr.slope_energy),
        "slope_theory": paraxial(tr.slope_theory),
        "final_retardation": numeric(tr.samples.last().map(|s| s.ret_prob).unwrap_or(f64::NAN)),
    });
    let text = format!(
        "retardation slope: probability {:.6e}, energy {:.6e}, paraxial {:.6e}\n",
        tr.slope_prob, tr.slope_energy, tr.slope_theory
    );
    Ok((Report { json, text }, tr))
}

pub fn cmd_phasemap(p: &Params) -> Result<(Report, Vec<Vec<f64>>), CliError> {
    let kw0 = p.kw0.unwrap_or(5.0);
    let (l, radial) = match p.beam.as_deref().unwrap_or("gaussian") {
        "gaussian" => (0, 0),
        "lg" => (p.l.unwrap_or(0), p.p.unwrap_or(0)),
        other => {
            return Err(config_err(format!(
                "phasemap supports gaussian and lg beams, got `{other}`"
            )))
        }
    };
    let b = BeamParams::new(1.0, kw0, l, radial)?;
    let mut grid = PhaseMapGrid::default_for(&b)?;
    if let Some(n) = p.n_z {
        grid.z = crate::numerics::Axis::new(grid.z.start, grid.z.end, n)?;
    }
    if let Some(n) = p.n_r {
        grid.nx = n;
    }
    let map = phase_map(&b, &grid)?;
    let zr = b.rayleigh_range();
    let axis = grid.nx / 2;
    let on_axis_peak = (0..grid.z.n)
        .map(|iz| map.field[iz * grid.nx + axis].norm_sqr())
        .fold(0.0, f64::max);
    let json = json!({
        "command": "phasemap",
        "beam": b,
        "spacing_ratio": numeric(map.spacing_ratio),
        "mean_local_k": numeric(map.mean_local_k),
        "on_axis_k": map.on_axis_k.map(numeric),
        "on_axis_k_gouy": paraxial(b.k - (b.order() as f64 + 1.0) / zr),
        "on_axis_peak_intensity": numeric(on_axis_peak),
        "plane_wave_spacing": numeric(map.plane_wave_spacing),
        "plane_wave_spacing_exact": identity(TAU / b.k),
        "dark_lines": map.dark_lines.len(),
    });
    let plane = map.plane_wave_rows();
    let rows = map
        .rows()
        .into_iter()
        .zip(plane)
        .map(|(mut r, pw)| {
            r.push(pw[5]);
            r
        })
        .collect();
    let text = format!(
        "mean wavefront spacing / (2 pi / k) = {:.6}\n",
        map.spacing_ratio
    );
    Ok((Report { json, text }, rows))
}

pub fn em_grid(p: &Params) -> EmGridSpec {
    let mut g = EmGridSpec::default();
    if let Some(n) = p.n_r {
        g.n_r = n;
    }
    if let Some(n) = p.n_z {
        g.n_z = n;
    }
    if let Some(n) = p.n_phi {
        g.n_phi = n;
    }
    g
}

pub fn cmd_audit_em(p: &Params) -> Result<(Report, ConservationAudit), CliError> {
    let kw0 = p.kw0.unwrap_or(10.0);
    let set = gaussian_packet(kw0, polarization(p)?)?;
    let zr = 0.5 * kw0 * kw0;
    let audit = conservation_audit(&set, &[0.0, zr, 2.0 * zr], &em_grid(p))?;
    let checks: Vec<Value> = audit
        .checks
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "value": numeric(c.value),
                "limit": c.limit,
                "pass": c.pass,
            })
        })
        .collect();
    let json = json!({
        "command": "audit",
        "target": "em",
        "kw0": kw0,
        "components": set.len(),
        "spectral_energy_velocity": vec_tagged(set.spectral_energy_velocity()?, "numeric"),
        "grid": audit.grid,
        "checks": checks,
        "passed": audit.passed(),
    });
    let mut text = String::new();
    for c in &audit.checks {
        let _ = writeln!(
            text,
            "{:<28} {:>12.4e} (limit {:.1e}) {}",
            c.name,
            c.value,
            c.limit,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    Ok((Report { json, text }, audit))
}

pub fn cmd_audit_rs(p: &Params) -> Result<Report, CliError> {
    let (field, label) = match p.fixture.as_deref() {
        Some("vp1-demo") => (vp1_demo_fixture(1.0, 48, 16)?, "vp1-demo".to_string()),
        Some(other) => return Err(config_err(format!("unknown fixture `{other}`"))),
        None => {
            let kw0 = p.kw0.unwrap_or(10.0);
            let set = gaussian_packet(kw0, polarization(p)?)?;
            (
                RsSpectralField::from_set(&set),
                format!("gaussian kw0={kw0}"),
            )
        }
    };
    let r = rs_report(&field, 1.0)?;
    let group_gap = (r.wavefunction_group_velocity - r.spin_expectation[2]).abs();
    let phase_gap = (r.wavefunction_phase_velocity - r.momentum_velocity_proper).abs();
    let json = json!({
        "command": "audit",
        "target": "rs",
        "field": label,
        "components": r.components,
        "spin_expectation": vec_tagged(r.spin_expectation, "numeric"),
        "primed_velocity": vec_tagged(r.primed_velocity, "numeric"),
        "momentum_velocity_v1": numeric(r.momentum_velocity_v1),
        "momentum_velocity_proper": numeric(r.momentum_velocity_proper),
        "v1_minus_proper": numeric(r.v1_minus_proper),
        "duality_product": identity(r.duality_product),
        "wavefunction_group_velocity": numeric(r.wavefunction_group_velocity),
        "wavefunction_phase_velocity": numeric(r.wavefunction_phase_velocity),
        "conversion_gap_group": identity(group_gap),
        "conversion_gap_phase": identity(phase_gap),
        "eigen_residual_max": identity(r.eigen_residual_max),
        "transversality_residual_max": identity(r.transversality_residual_max),
        "commutator_residual": identity(r.commutator_residual),
        "rp_rate": numeric(r.rp_rate.rate),
        "mean_energy": numeric(r.rp_rate.mean_energy),
    });
    let text = format!(
        "<v>_z = {:.12}\nv_P = {:.12}\nv_P1 = {:.12}\nv_P1 - v_P = {:.6e}\nv_P <v>_z = {:.15}\neigenrelation residual max = {:.2e}\n",
        r.spin_expectation[2],
        r.momentum_velocity_proper,
        r.momentum_velocity_v1,
        r.v1_minus_proper,
        r.duality_product,
        r.eigen_residual_max
    );
    if r.eigen_residual_max > 1e-12 || (r.duality_product - 1.0).abs() > 1e-12 {
        return Err(CliError::Check {
            code: EXIT_INVARIANT,
            message: format!("spinor identities violated:\n{text}"),
        });
    }
    Ok(Report { json, text })
}

fn save_json(dir: &Path, name: &str, v: &Value) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    write_json(&path, v)?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

fn save_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let path = dir.join(name);
    write_csv(&path, &[], header, rows)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Runs one command, writes its artifacts under `out` and returns the text
/// for standard output.
pub fn execute(command: Command, p: &Params, out: &Path) -> Result<String, CliError> {
    match command {
        Command::Velocity => {
            let r = cmd_velocity(p)?;
            save_json(out, "velocity.json", &r.json)?;
            Ok(r.text)
        }
        Command::Propagate => {
            let (r, tr) = cmd_propagate(p)?;
            save_csv(out, "centroid.csv", &CentroidTrace::COLUMNS, &tr.rows())?;
            save_json(out, "propagate.json", &r.json)?;
            Ok(r.text)
        }
        Command::Phasemap => {
            let (r, rows) = cmd_phasemap(p)?;
            let mut header = PHASE_MAP_COLUMNS.to_vec();
            header.push("plane_wave_phase_mod_2pi");
            save_csv(out, "phasemap.csv", &header, &rows)?;
            save_json(out, "phasemap.json", &r.json)?;
            Ok(r.text)
        }
        Command::Audit {
            target: AuditTarget::Em,
        } => {
            let (r, audit) = cmd_audit_em(p)?;
            save_csv(
                out,
                "audit_em.csv",
                &ConservationAudit::COLUMNS,
                &audit.csv_rows(),
            )?;
            save_json(out, "audit_em.json", &r.json)?;
            if !audit.passed() {
                let null_broken = audit.check("null_inequality").is_some_and(|c| !c.pass);
                return Err(CliError::Check {
                    code: if null_broken {
                        EXIT_INVARIANT
                    } else {
                        EXIT_ACCURACY
                    },
                    message: format!("conservation audit failed:\n{}", r.text),
                });
            }
            Ok(r.text)
        }
        Command::Audit {
            target: AuditTarget::Rs,
        } => {
            let r = cmd_audit_rs(p)?;
            save_json(out, "audit_rs.json", &r.json)?;
            Ok(r.text)
        }
    }
}

pub fn run_selftest() -> (bool, String) {
    let mut text = String::new();
    let mut ok = true;
    for o in selftest::run_all() {
        ok &= o.pass;
        let _ = writeln!(text, "{}", o.line());
    }
    (ok, text)
}

/// Full entry point; returns the process exit code.
pub fn main_with(cli: Cli, env_out: Option<String>) -> i32 {
    let file = match &cli.config {
        None => FileConfig::default(),
        Some(path) => match std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))
            .and_then(|t| parse_config(&t))
        {
            Ok(f) => f,
            Err(e) => {
                eprintln!("{e}");
                return e.exit_code();
            }
        },
    };
    if cli.selftest {
        let (ok, text) = run_selftest();
        print!("{text}");
        return if ok { EXIT_OK } else { EXIT_ACCURACY };
    }
    let params = cli.params.or(file.params);
    let Some(command) = cli.command.or(file.command) else {
        eprintln!("configuration error: no command given (velocity, propagate, phasemap, audit em|rs or --selftest)");
        return EXIT_CONFIG;
    };
    let out = resolve_out(&params, env_out);
    match execute(command, &params, &out) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("photovel").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_after_subcommand() {
        let c = parse(&[
            "velocity", "--beam", "lg", "--l", "-2", "--p", "1", "--kw0", "10",
        ]);
        assert_eq!(c.command, Some(Command::Velocity));
        assert_eq!(c.params.l, Some(-2));
        assert_eq!(c.params.beam.as_deref(), Some("lg"));
        let c = parse(&["audit", "rs", "--fixture", "vp1-demo"]);
        assert_eq!(
            c.command,
            Some(Command::Audit {
                target: AuditTarget::Rs
            })
        );
        let c = parse(&["propagate", "--M", "1"]);
        assert_eq!(c.params.m, Some(1));
    }

    #[test]
    fn config_keys_and_precedence() {
        let f = parse_config(r#"{"command": "audit", "target": "em", "kw0": 12, "M": 3}"#).unwrap();
        assert_eq!(
            f.command,
            Some(Command::Audit {
                target: AuditTarget::Em
            })
        );
        let cli = Params {
            kw0: Some(5.0),
            ..Params::default()
        };
        let merged = cli.or(f.params);
        assert_eq!(merged.kw0, Some(5.0));
        assert_eq!(merged.m, Some(3));
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = parse_config(r#"{"kw0": 5, "waist": 3}"#).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_CONFIG);
        assert!(parse_config(r#"{"command": "fly"}"#).is_err());
        assert!(parse_config(r#"[1, 2]"#).is_err());
        assert!(parse_config(r#"{"kw0": "five"}"#).is_err());
    }

    #[test]
    fn output_directory_order() {
        let mut p = Params::default();
        assert_eq!(resolve_out(&p, None), PathBuf::from(DEFAULT_OUT));
        assert_eq!(resolve_out(&p, Some("e".into())), PathBuf::from("e"));
        p.out = Some("f".into());
        assert_eq!(resolve_out(&p, Some("e".into())), PathBuf::from("f"));
    }

    #[test]
    fn error_exit_codes() {
        let bad = Params {
            kw0: Some(-1.0),
            ..Params::default()
        };
        assert_eq!(cmd_velocity(&bad).err().unwrap().exit_code(), EXIT_CONFIG);
        let bad = Params {
            beam: Some("airy".into()),
            ..Params::default()
        };
        assert_eq!(cmd_velocity(&bad).err().unwrap().exit_code(), EXIT_CONFIG);
        assert_eq!(
            CliError::Run(Error::Invariant("x".into())).exit_code(),
            EXIT_INVARIANT
        );
        assert_eq!(
            CliError::Run(Error::AccuracyLoss {
                tail: 1.0,
                budget: 1e-9
            })
            .exit_code(),
            EXIT_ACCURACY
        );
    }

    #[test]
    fn velocity_examples() {
        let v = |args: &[&str]| {
            let c = parse(args);
            cmd_velocity(&c.params).unwrap().json["v_g"]["value"]
                .as_f64()
                .unwrap()
        };
        assert!((v(&["velocity", "--beam", "gaussian", "--kw0", "5"]) - 0.96).abs() < 0.01);
        assert!(
            (v(&["velocity", "--beam", "lg", "--l", "2", "--p", "1", "--kw0", "10"]) - 0.95).abs()
                < 0.01
        );
        let b5 = v(&["velocity", "--beam", "bessel", "--ktr", "0.1", "--l", "5"]);
        let b0 = v(&["velocity", "--beam", "bessel", "--ktr", "0.1"]);
        assert_eq!(b5, b0);
    }

    #[test]
    fn every_number_is_tagged() {
        let r = cmd_velocity(&Params::default()).unwrap();
        for key in ["v_g", "v_ph", "v_g_v_ph", "v_g_paraxial", "deficit"] {
            let m = r.json[key]["method"].as_str().unwrap();
            assert!(["numeric", "paraxial", "identity"].contains(&m));
        }
    }

    #[test]
    fn phasemap_examples() {
        let (r, rows) =
            cmd_phasemap(&parse(&["phasemap", "--beam", "gaussian", "--kw0", "5"]).params).unwrap();
        let ratio = r.json["spacing_ratio"]["value"].as_f64().unwrap();
        assert!((ratio - 1.04).abs() <= 0.005, "{ratio}");
        let pw = r.json["plane_wave_spacing"]["value"].as_f64().unwrap();
        assert!((pw - TAU).abs() < 1e-9, "{pw}");
        assert_eq!(rows[0].len(), PHASE_MAP_COLUMNS.len() + 1);
        let (r, _) =
            cmd_phasemap(&parse(&["phasemap", "--beam", "lg", "--l", "3", "--p", "0"]).params)
                .unwrap();
        assert!(r.json["on_axis_peak_intensity"]["value"].as_f64().unwrap() < 1e-20);
    }

    #[test]
    fn rs_fixture_report() {
        let r = cmd_audit_rs(&parse(&["audit", "rs", "--fixture", "vp1-demo"]).params).unwrap();
        assert!(r.json["v1_minus_proper"]["value"].as_f64().unwrap().abs() > 1e-3);
        assert!(r.json["conversion_gap_phase"]["value"].as_f64().unwrap() < 1e-12);
        assert!(r.json["conversion_gap_group"]["value"].as_f64().unwrap() < 1e-12);
    }
}
