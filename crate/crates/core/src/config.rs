//! Run configuration: a line-oriented `key = value` format.
//!
//! ```text
//! # metallic ribbon, tilted barrier
//! N = 197
//! theta_deg = 45
//! ```
//!
//! Keys are exactly the names in [`KEYS`]; missing keys keep their defaults.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::barrier::BarrierSpec;
use crate::device::Device;
use crate::error::{Error, Result};
use crate::observables::ThermalSpec;
use crate::ribbon::{enumerate_modes_with, ModeSpace, PhysicalConstants, RibbonGeometry};

/// Recognized keys, in the order they are echoed.
pub const KEYS: [&str; 16] = [
    "N",
    "n_modes",
    "delta_A",
    "total_length_a0",
    "D_a0",
    "d_a0",
    "V0_eV",
    "theta_deg",
    "eta_eV",
    "E_min_eV",
    "E_max_eV",
    "E_steps",
    "mu_eV",
    "temperature_K",
    "quad_pts_per_a0",
    "workers",
];

/// Number of pristine rows required between the barrier footprint and each lead.
pub const MARGIN_ROWS: usize = 5;

/// A fully resolved run configuration, in interface units (Å, multiples of
/// a0, eV, degrees, kelvin).
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub width_index: usize,
    pub n_modes: usize,
    pub delta_a: f64,
    pub total_length_a0: f64,
    pub barrier_length_a0: f64,
    pub transition_a0: f64,
    pub v0_ev: f64,
    pub theta_deg: f64,
    pub eta_ev: f64,
    pub e_min_ev: f64,
    pub e_max_ev: f64,
    pub e_steps: usize,
    pub mu_ev: f64,
    pub temperature_k: f64,
    pub quad_pts_per_a0: usize,
    /// Worker threads; 0 picks the number of available cores.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            width_index: 198,
            n_modes: 100,
            delta_a: 2.0,
            total_length_a0: 260.0,
            barrier_length_a0: 60.0,
            transition_a0: 30.0,
            v0_ev: 0.5,
            theta_deg: 0.0,
            eta_ev: 0.0,
            e_min_ev: 0.0,
            e_max_ev: 0.4,
            e_steps: 400,
            mu_ev: 0.05,
            temperature_k: 0.0,
            quad_pts_per_a0: 4,
            workers: 0,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid value {value:?} for {key}"),
    })
}

impl RunConfig {
    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        match key {
            "N" => self.width_index = parse_value(key, value, line)?,
            "n_modes" => self.n_modes = parse_value(key, value, line)?,
            "delta_A" => self.delta_a = parse_value(key, value, line)?,
            "total_length_a0" => self.total_length_a0 = parse_value(key, value, line)?,
            "D_a0" => self.barrier_length_a0 = parse_value(key, value, line)?,
            "d_a0" => self.transition_a0 = parse_value(key, value, line)?,
            "V0_eV" => self.v0_ev = parse_value(key, value, line)?,
            "theta_deg" => self.theta_deg = parse_value(key, value, line)?,
            "eta_eV" => self.eta_ev = parse_value(key, value, line)?,
            "E_min_eV" => self.e_min_ev = parse_value(key, value, line)?,
            "E_max_eV" => self.e_max_ev = parse_value(key, value, line)?,
            "E_steps" => self.e_steps = parse_value(key, value, line)?,
            "mu_eV" => self.mu_ev = parse_value(key, value, line)?,
            "temperature_K" => self.temperature_k = parse_value(key, value, line)?,
            "quad_pts_per_a0" => self.quad_pts_per_a0 = parse_value(key, value, line)?,
            "workers" => self.workers = parse_value(key, value, line)?,
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key {key:?}"),
                })
            }
        }
        Ok(())
    }

    /// Textual value of one key; floats use the shortest exact representation.
    pub fn get(&self, key: &str) -> Option<String> {
        let text = match key {
            "N" => self.width_index.to_string(),
            "n_modes" => self.n_modes.to_string(),
            "delta_A" => self.delta_a.to_string(),
            "total_length_a0" => self.total_length_a0.to_string(),
            "D_a0" => self.barrier_length_a0.to_string(),
            "d_a0" => self.transition_a0.to_string(),
            "V0_eV" => self.v0_ev.to_string(),
            "theta_deg" => self.theta_deg.to_string(),
            "eta_eV" => self.eta_ev.to_string(),
            "E_min_eV" => self.e_min_ev.to_string(),
            "E_max_eV" => self.e_max_ev.to_string(),
            "E_steps" => self.e_steps.to_string(),
            "mu_eV" => self.mu_ev.to_string(),
            "temperature_K" => self.temperature_k.to_string(),
            "quad_pts_per_a0" => self.quad_pts_per_a0.to_string(),
            "workers" => self.workers.to_string(),
            _ => return None,
        };
        Some(text)
    }

    /// `key = value` lines for every key, each prefixed with `prefix`.
    pub fn echo(&self, prefix: &str) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = self.get(key).expect("every listed key has a value");
            let _ = writeln!(out, "{prefix}{key} = {value}");
        }
        out
    }

    pub fn consts(&self) -> PhysicalConstants {
        PhysicalConstants::default()
    }

    pub fn geometry(&self) -> Result<RibbonGeometry> {
        let consts = self.consts();
        RibbonGeometry::with_length(
            self.width_index,
            self.delta_a,
            self.total_length_a0 * consts.a0,
            consts,
        )
    }

    pub fn modes(&self) -> Result<ModeSpace> {
        enumerate_modes_with(self.width_index, self.n_modes, &self.consts())
    }

    pub fn barrier(&self) -> BarrierSpec {
        let a0 = self.consts().a0;
        BarrierSpec {
            v0: self.v0_ev,
            length: self.barrier_length_a0 * a0,
            transition: self.transition_a0 * a0,
            theta: self.theta_deg.to_radians(),
        }
    }

    pub fn thermal(&self) -> ThermalSpec {
        ThermalSpec {
            mu: self.mu_ev,
            temperature: self.temperature_k,
        }
    }

    /// Uniform grid from `E_min_eV` to `E_max_eV`, both included.
    pub fn energy_grid(&self) -> Vec<f64> {
        let span = self.e_max_ev - self.e_min_ev;
        let last = (self.e_steps - 1) as f64;
        (0..self.e_steps)
            .map(|k| {
                if k + 1 == self.e_steps {
                    self.e_max_ev
                } else {
                    self.e_min_ev + span * k as f64 / last
                }
            })
            .collect()
    }

    /// Check the configuration invariants, including that the barrier
    /// footprint leaves [`MARGIN_ROWS`] pristine rows next to each lead.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if self.e_steps < 2 {
            return fail(format!("E_steps must be at least 2, got {}", self.e_steps));
        }
        if !(self.e_min_ev.is_finite() && self.e_max_ev.is_finite() && self.e_min_ev < self.e_max_ev) {
            return fail(format!(
                "energy window must satisfy E_min_eV < E_max_eV, got [{}, {}]",
                self.e_min_ev, self.e_max_ev
            ));
        }
        if !(self.eta_ev >= 0.0 && self.eta_ev.is_finite()) {
            return fail(format!("eta_eV must be non-negative, got {}", self.eta_ev));
        }
        if !(self.temperature_k >= 0.0 && self.temperature_k.is_finite()) {
            return fail(format!(
                "temperature_K must be non-negative, got {}",
                self.temperature_k
            ));
        }
        if !self.mu_ev.is_finite() {
            return fail("mu_eV must be finite".into());
        }
        if self.quad_pts_per_a0 < 2 {
            return fail(format!(
                "quad_pts_per_a0 must be at least 2, got {}",
                self.quad_pts_per_a0
            ));
        }
        let to_validation = |e: Error| Error::Validation(e.to_string());
        let geometry = self.geometry().map_err(to_validation)?;
        self.modes().map_err(to_validation)?;
        let barrier = self.barrier();
        barrier.validate().map_err(to_validation)?;

        let consts = geometry.consts;
        let reach = barrier.reach(geometry.width(), consts.a0);
        let lower = -geometry.row_position(MARGIN_ROWS);
        let upper = geometry.row_position(geometry.rows.saturating_sub(1 + MARGIN_ROWS));
        let room = lower.min(upper);
        if reach > room {
            return fail(format!(
                "barrier footprint reaches |y| = {reach:.3} A but the {MARGIN_ROWS}-row lead margin starts at |y| = {room:.3} A; increase total_length_a0"
            ));
        }
        Ok(())
    }

    /// Validated device for this configuration.
    pub fn device(&self) -> Result<Device> {
        self.validate()?;
        Device::new(self.geometry()?, self.modes()?, self.barrier(), self.quad_pts_per_a0)
    }
}

/// Parse a configuration; missing keys keep their defaults. The result is
/// not validated (see [`RunConfig::validate`]).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, got {content:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Parse {
                line,
                message: format!("expected `key = value`, got {content:?}"),
            });
        }
        config.set(key, value, line)?;
    }
    Ok(config)
}

/// Recover the configuration echoed at the top of an output CSV.
pub fn config_from_header(csv: &str) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    for (index, raw) in csv.lines().enumerate() {
        let Some(comment) = raw.strip_prefix('#') else {
            break;
        };
        if let Some((key, value)) = comment.split_once('=') {
            config.set(key.trim(), value.trim(), index + 1)?;
        }
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
        assert_eq!(parse_config("# only a comment\n\n   \n").unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_and_comments() {
        let c = parse_config("V0_eV = 0.5\ntheta_deg = 45").unwrap();
        assert_eq!(c.v0_ev, 0.5);
        assert_eq!(c.barrier().theta, std::f64::consts::FRAC_PI_4);
        assert_eq!(
            RunConfig { theta_deg: 45.0, ..RunConfig::default() },
            c
        );
        let c = parse_config("N=197 # metallic\n  E_steps =  10  \n").unwrap();
        assert_eq!((c.width_index, c.e_steps), (197, 10));
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_config("V0 = 0.5") {
            Err(Error::Parse { line: 1, message }) => assert!(message.contains("unknown key")),
            other => panic!("{other:?}"),
        }
        match parse_config("N = 197\n\nE_steps 10") {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_config("N = -4") {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(parse_config("theta_deg =").is_err());
    }

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
        for theta in [15.0, 45.0, -45.0] {
            RunConfig { theta_deg: theta, ..RunConfig::default() }.validate().unwrap();
        }
        let geometry = RunConfig::default().geometry().unwrap();
        assert_eq!(geometry.rows, 320);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let base = RunConfig::default();
        let bad = [
            RunConfig { e_steps: 1, ..base.clone() },
            RunConfig { e_max_ev: 0.0, ..base.clone() },
            RunConfig { eta_ev: -1e-3, ..base.clone() },
            RunConfig { n_modes: 0, ..base.clone() },
            RunConfig { n_modes: 199, ..base.clone() },
            RunConfig { theta_deg: 90.0, ..base.clone() },
            RunConfig { quad_pts_per_a0: 1, ..base.clone() },
            RunConfig { barrier_length_a0: 230.0, ..base.clone() },
            RunConfig { theta_deg: 60.0, ..base.clone() },
            RunConfig { total_length_a0: 100.0, theta_deg: 45.0, ..base.clone() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Validation(_))), "{c:?}");
        }
    }

    #[test]
    fn footprint_margin_is_enforced() {
        // θ = 0: the footprint is (D + d)/2 = 45 a0 = 110.7 A on each side.
        // 100 a0 → 123 rows, margins start at -113 A and +111 A.
        RunConfig { total_length_a0: 100.0, ..RunConfig::default() }.validate().unwrap();
        // 98 a0 → 121 rows, the upper margin starts at +109 A.
        let tight = RunConfig { total_length_a0: 98.0, ..RunConfig::default() };
        assert!(matches!(tight.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn energy_grid_includes_endpoints() {
        let c = RunConfig { e_min_ev: 0.001, e_max_ev: 0.4, e_steps: 7, ..RunConfig::default() };
        let grid = c.energy_grid();
        assert_eq!(grid.len(), 7);
        assert_eq!(grid[0], 0.001);
        assert_eq!(grid[6], 0.4);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig {
            v0_ev: 0.1 + 0.2,
            theta_deg: 45.0,
            eta_ev: 1e-4,
            mu_ev: -0.0123456789012345,
            workers: 3,
            ..RunConfig::default()
        };
        let text = c.echo("# ");
        assert_eq!(config_from_header(&text).unwrap(), c);
        assert_eq!(parse_config(&c.echo("")).unwrap(), c);
        assert_eq!(text.lines().count(), KEYS.len());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn any_config_echo_round_trips(
                n in 1usize..400,
                v0 in -2.0f64..2.0,
                theta in -80.0f64..80.0,
                eta in 0.0f64..0.1,
                lo in -1.0f64..1.0,
                span in 1e-6f64..1.0,
                steps in 2usize..5000,
                delta in 0.1f64..5.0,
            ) {
                let c = RunConfig {
                    width_index: n,
                    v0_ev: v0,
                    theta_deg: theta,
                    eta_ev: eta,
                    e_min_ev: lo,
                    e_max_ev: lo + span,
                    e_steps: steps,
                    delta_a: delta,
                    ..RunConfig::default()
                };
                let header = format!("# ribbon-klein v0\n{}E_eV,T\n1,1\n", c.echo("# "));
                prop_assert_eq!(config_from_header(&header).unwrap(), c);
            }
        }
    }
}
