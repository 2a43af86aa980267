//! Batch sweeps: energy, angle, barrier length, broadening and LDOS maps,
//! written as CSV files.
//!
//! Every output file starts with `# ribbon-klein v<version>`, followed by the
//! resolved configuration as `# key = value` lines, a column header and the
//! data rows. Energies are written with nine significant digits. Energy
//! points are evaluated in parallel on a pool of `workers` threads and
//! collected in grid order, so the bytes written do not depend on the pool
//! size.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::observables::{conductance, TransmissionCurve};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Marker written in place of a value that failed to compute.
pub const ERROR_MARKER: &str = "error";

/// What to scan. List values are in interface units: degrees, multiples of
/// a0, eV.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepKind {
    Energy,
    Angle(Vec<f64>),
    Length(Vec<f64>),
    Broadening(Vec<f64>),
    LdosMap,
}

impl SweepKind {
    /// Tilt angles studied in the reference figures (degrees).
    pub const DEFAULT_ANGLES: [f64; 3] = [0.0, 15.0, 45.0];
    /// Barrier lengths studied in the reference figures (multiples of a0).
    pub const DEFAULT_LENGTHS: [f64; 3] = [40.0, 60.0, 80.0];
    /// Level broadenings studied in the reference figures (eV).
    pub const DEFAULT_BROADENINGS: [f64; 4] = [0.0, 1e-4, 1e-3, 1e-2];

    /// Sweep by CLI name; list sweeps use `values` or their defaults.
    pub fn from_name(name: &str, values: Option<Vec<f64>>) -> Result<Self> {
        let list = |default: &[f64]| values.clone().unwrap_or_else(|| default.to_vec());
        let kind = match name {
            "energy" => Self::Energy,
            "angle" => Self::Angle(list(&Self::DEFAULT_ANGLES)),
            "length" => Self::Length(list(&Self::DEFAULT_LENGTHS)),
            "broadening" => Self::Broadening(list(&Self::DEFAULT_BROADENINGS)),
            "ldos" => Self::LdosMap,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown sweep {other:?}; expected energy, angle, length, broadening or ldos"
                )))
            }
        };
        if values.is_some() && matches!(kind, Self::Energy | Self::LdosMap) {
            return Err(Error::InvalidArgument(format!(
                "the {name} sweep takes no value list"
            )));
        }
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Angle(v) | Self::Length(v) | Self::Broadening(v) => {
                if v.is_empty() {
                    return Err(Error::InvalidArgument("sweep list must not be empty".into()));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidArgument("sweep values must be finite".into()));
                }
                Ok(())
            }
            Self::Energy | Self::LdosMap => Ok(()),
        }
    }

    /// One configuration per sweep point, with the manifest column value.
    pub fn points(&self, base: &RunConfig) -> Vec<(Option<f64>, RunConfig)> {
        let vary = |values: &[f64], set: fn(&mut RunConfig, f64)| {
            values
                .iter()
                .map(|&v| {
                    let mut c = base.clone();
                    set(&mut c, v);
                    (Some(v), c)
                })
                .collect()
        };
        match self {
            Self::Energy | Self::LdosMap => vec![(None, base.clone())],
            Self::Angle(v) => vary(v, |c, x| c.theta_deg = x),
            Self::Length(v) => vary(v, |c, x| c.barrier_length_a0 = x),
            Self::Broadening(v) => vary(v, |c, x| c.eta_ev = x),
        }
    }

    /// Manifest column naming the swept parameter.
    pub fn parameter(&self) -> Option<&'static str> {
        match self {
            Self::Angle(_) => Some("theta_deg"),
            Self::Length(_) => Some("D_a0"),
            Self::Broadening(_) => Some("eta_eV"),
            Self::Energy | Self::LdosMap => None,
        }
    }

    fn file_name(&self, value: Option<f64>) -> String {
        match (self, value) {
            (Self::Angle(_), Some(v)) => format!("T_theta_{v}.csv"),
            (Self::Length(_), Some(v)) => format!("T_D_{v}a0.csv"),
            (Self::Broadening(_), Some(v)) => format!("T_eta_{v:e}.csv"),
            (Self::LdosMap, _) => "ldos.csv".into(),
            _ => "transmission.csv".into(),
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Energy => "energy",
            Self::Angle(_) => "angle",
            Self::Length(_) => "length",
            Self::Broadening(_) => "broadening",
            Self::LdosMap => "ldos",
        })
    }
}

/// Outcome of one energy point: the value(s) or the failure message.
pub type PointResult<T> = std::result::Result<T, String>;

/// Transmission over the configured grid, one result per energy.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveResult {
    pub energies: Vec<f64>,
    pub transmission: Vec<PointResult<f64>>,
}

impl CurveResult {
    pub fn failures(&self) -> usize {
        self.transmission.iter().filter(|t| t.is_err()).count()
    }

    /// Successful points as a curve.
    pub fn curve(&self) -> TransmissionCurve {
        TransmissionCurve::new(
            self.energies
                .iter()
                .zip(&self.transmission)
                .filter_map(|(&e, t)| t.as_ref().ok().map(|&t| (e, t)))
                .collect(),
        )
    }
}

/// LDOS per row over the configured grid, one result per energy.
#[derive(Clone, Debug, PartialEq)]
pub struct LdosResult {
    pub energies: Vec<f64>,
    pub rows: usize,
    pub ldos: Vec<PointResult<Vec<f64>>>,
}

impl LdosResult {
    pub fn failures(&self) -> usize {
        self.ldos.iter().filter(|t| t.is_err()).count()
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
}

/// Transmission over the energy grid of `config`.
pub fn compute_curve(config: &RunConfig) -> Result<CurveResult> {
    let energies = config.energy_grid();
    let transmission = pool(config.workers)?.install(|| -> Result<_> {
        let device = config.device()?;
        Ok(energies
            .par_iter()
            .map(|&e| {
                device
                    .solve(e, config.eta_ev, false)
                    .map(|p| p.transmission)
                    .map_err(|err| err.to_string())
            })
            .collect::<Vec<_>>())
    })?;
    Ok(CurveResult {
        energies,
        transmission,
    })
}

/// Row-resolved LDOS over the energy grid of `config`.
pub fn compute_ldos(config: &RunConfig) -> Result<LdosResult> {
    let energies = config.energy_grid();
    let (rows, ldos) = pool(config.workers)?.install(|| -> Result<_> {
        let device = config.device()?;
        let ldos = energies
            .par_iter()
            .map(|&e| {
                device
                    .solve(e, config.eta_ev, true)
                    .map(|p| p.ldos.expect("LDOS requested"))
                    .map_err(|err| err.to_string())
            })
            .collect::<Vec<_>>();
        Ok((device.geometry.rows, ldos))
    })?;
    Ok(LdosResult {
        energies,
        rows,
        ldos,
    })
}

fn format_energy(e: f64) -> String {
    format!("{e:.8e}")
}

fn format_value(v: f64) -> String {
    format!("{v:.12e}")
}

fn header(config: &RunConfig) -> String {
    format!("# ribbon-klein v{VERSION}\n{}", config.echo("# "))
}

/// CSV text of a transmission curve (`E_eV,T`).
pub fn transmission_csv(config: &RunConfig, result: &CurveResult) -> String {
    let mut out = header(config);
    out.push_str("E_eV,T\n");
    for (&e, t) in result.energies.iter().zip(&result.transmission) {
        let value = match t {
            Ok(t) => format_value(*t),
            Err(_) => ERROR_MARKER.to_string(),
        };
        let _ = writeln!(out, "{},{value}", format_energy(e));
    }
    out
}

/// CSV text of an LDOS map: one line per row `m`, one column per energy.
pub fn ldos_csv(config: &RunConfig, result: &LdosResult) -> String {
    let mut out = header(config);
    out.push('m');
    for &e in &result.energies {
        let _ = write!(out, ",E={}", format_energy(e));
    }
    out.push('\n');
    for m in 0..result.rows {
        let _ = write!(out, "{m}");
        for column in &result.ldos {
            match column {
                Ok(values) => {
                    let _ = write!(out, ",{}", format_value(values[m]));
                }
                Err(_) => {
                    let _ = write!(out, ",{ERROR_MARKER}");
                }
            }
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Files produced by a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    /// Data files, in sweep order.
    pub files: Vec<PathBuf>,
    pub manifest: Option<PathBuf>,
    /// Energy points that failed (written with the error marker).
    pub failures: usize,
    /// Conductance (2e²/h) at `mu_eV`/`temperature_K` for each transmission
    /// file, when the curve supports it.
    pub conductance: Vec<Option<f64>>,
}

/// Run a sweep and write its CSV files (plus a manifest for list sweeps)
/// into `out_dir`, which is created if needed.
pub fn run_sweep(config: &RunConfig, kind: &SweepKind, out_dir: &Path) -> Result<SweepReport> {
    kind.validate()?;
    let points = kind.points(config);
    for (_, point) in &points {
        point.validate()?;
    }
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let mut report = SweepReport {
        files: Vec::new(),
        manifest: None,
        failures: 0,
        conductance: Vec::new(),
    };
    let mut manifest_rows = Vec::new();
    for (value, point) in &points {
        let name = kind.file_name(*value);
        let path = out_dir.join(&name);
        info!("{kind} sweep: computing {name}");
        let (text, failures) = if matches!(kind, SweepKind::LdosMap) {
            let result = compute_ldos(point)?;
            (ldos_csv(point, &result), result.failures())
        } else {
            let result = compute_curve(point)?;
            let sigma = conductance(&result.curve(), &point.thermal(), &point.consts());
            if let Err(e) = &sigma {
                info!("{name}: conductance unavailable: {e}");
            }
            report.conductance.push(sigma.ok());
            (transmission_csv(point, &result), result.failures())
        };
        if failures > 0 {
            warn!("{name}: {failures} energy point(s) failed");
        }
        report.failures += failures;
        write_file(&path, &text)?;
        report.files.push(path);
        if let Some(v) = value {
            manifest_rows.push(format!("{v},{name}"));
        }
    }

    if let Some(parameter) = kind.parameter() {
        let mut text = format!("# ribbon-klein v{VERSION}\n{parameter},file\n");
        for row in manifest_rows {
            text.push_str(&row);
            text.push('\n');
        }
        let path = out_dir.join("manifest.csv");
        write_file(&path, &text)?;
        report.manifest = Some(path);
    }
    Ok(report)
}
