//! Armchair ribbon geometry and the transverse subband structure of the
//! continuum Dirac model.
//!
//! Transverse momenta are quantized as `q_n = (2π/a0)(n/(N+1) + 1/3)`. All
//! momenta are evaluated through the integer form `(2π/a0)(3n+N+1)/(3(N+1))`
//! so that the metallic zero mode is exactly zero and `±q` pairs are exactly
//! degenerate in floating point.

use std::f64::consts::PI;

use faer::c64;

use crate::error::{invalid, Result};

/// Material constants in the units used throughout the crate (eV, Å, K).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants {
    /// Graphene lattice constant (Å).
    pub a0: f64,
    /// ħ·v_F (eV·Å).
    pub hbar_vf: f64,
    /// Boltzmann constant (eV/K).
    pub kb: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            a0: 2.46,
            hbar_vf: 6.582,
            kb: 8.617e-5,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0 && self.hbar_vf > 0.0 && self.kb > 0.0) {
            return Err(invalid(format!(
                "physical constants must be positive, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Classification {
    Metallic,
    Semiconducting,
}

/// Metallic iff `N + 1` is a multiple of three.
pub fn classify_ribbon(width_index: usize) -> Classification {
    if (width_index + 1).is_multiple_of(3) {
        Classification::Metallic
    } else {
        Classification::Semiconducting
    }
}

/// Numerator `3n + N + 1` of the reduced transverse momentum.
fn momentum_numerator(n: i64, width_index: usize) -> i64 {
    3 * n + width_index as i64 + 1
}

fn momentum_from_numerator(numerator: i64, width_index: usize, a0: f64) -> f64 {
    2.0 * PI / a0 * numerator as f64 / (3.0 * (width_index as f64 + 1.0))
}

/// Transverse momentum `q_n` (Å⁻¹) of subband `n` for width index `N`,
/// using the default lattice constant.
pub fn subband_momentum(n: i64, width_index: usize) -> f64 {
    subband_momentum_with(n, width_index, &PhysicalConstants::default())
}

pub fn subband_momentum_with(n: i64, width_index: usize, consts: &PhysicalConstants) -> f64 {
    momentum_from_numerator(momentum_numerator(n, width_index), width_index, consts.a0)
}

/// Discretized armchair ribbon: width index, grid spacing and device rows.
#[derive(Clone, Debug, PartialEq)]
pub struct RibbonGeometry {
    pub width_index: usize,
    pub consts: PhysicalConstants,
    /// Grid spacing Δ along the ribbon axis (Å).
    pub delta: f64,
    /// Number of device rows M.
    pub rows: usize,
}

impl RibbonGeometry {
    pub fn new(
        width_index: usize,
        delta: f64,
        rows: usize,
        consts: PhysicalConstants,
    ) -> Result<Self> {
        consts.validate()?;
        if width_index < 1 {
            return Err(invalid("width index N must be at least 1"));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid(format!("grid spacing must be positive, got {delta}")));
        }
        if rows < 3 {
            return Err(invalid(format!("device needs at least 3 rows, got {rows}")));
        }
        Ok(Self {
            width_index,
            consts,
            delta,
            rows,
        })
    }

    /// Device of (approximately) `length` Å; the row count is `round(length/Δ)`.
    pub fn with_length(
        width_index: usize,
        delta: f64,
        length: f64,
        consts: PhysicalConstants,
    ) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(invalid(format!("device length must be positive, got {length}")));
        }
        let rows = (length / delta).round() as usize;
        Self::new(width_index, delta, rows, consts)
    }

    /// Ribbon width W = N·a0/2 (Å).
    pub fn width(&self) -> f64 {
        self.width_index as f64 * self.consts.a0 / 2.0
    }

    /// Normalization width W + a0/2 = (N+1)·a0/2 of the transverse basis.
    pub fn effective_width(&self) -> f64 {
        self.width() + self.consts.a0 / 2.0
    }

    /// Device length M·Δ (Å).
    pub fn total_length(&self) -> f64 {
        self.rows as f64 * self.delta
    }

    pub fn classification(&self) -> Classification {
        classify_ribbon(self.width_index)
    }

    /// Axial coordinate of device row `m`; rows span `[-L/2, L/2 - Δ]`.
    pub fn row_position(&self, m: usize) -> f64 {
        -self.total_length() / 2.0 + m as f64 * self.delta
    }
}

/// Band index γ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Band {
    Conduction,
    Valence,
}

impl Band {
    pub fn sign(self) -> f64 {
        match self {
            Band::Conduction => 1.0,
            Band::Valence => -1.0,
        }
    }
}

/// One transverse channel `(n, γ)` with its momentum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub n: i64,
    pub band: Band,
    pub q: f64,
}

/// Ordered set of `(n, γ)` channels defining the block layout.
///
/// Subbands are ordered by `|q|` (ties: smaller `n` first) and each subband
/// contributes two consecutive entries, conduction then valence. Block index
/// of subband `i` is `2i` for γ=+1 and `2i+1` for γ=−1.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSpace {
    modes: Vec<Mode>,
}

impl ModeSpace {
    /// Build a mode space from explicit subbands `(n, q)`, kept in the given order.
    pub fn from_subbands(subbands: &[(i64, f64)]) -> Self {
        let modes = subbands
            .iter()
            .flat_map(|&(n, q)| {
                [Band::Conduction, Band::Valence]
                    .into_iter()
                    .map(move |band| Mode { n, band, q })
            })
            .collect();
        Self { modes }
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Number of distinct subbands `n`.
    pub fn n_modes(&self) -> usize {
        self.modes.len() / 2
    }

    pub fn block_dim(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Subband momenta in block order (one entry per `n`).
    pub fn momenta(&self) -> Vec<f64> {
        self.modes.iter().step_by(2).map(|m| m.q).collect()
    }

    pub fn subband_indices(&self) -> Vec<i64> {
        self.modes.iter().step_by(2).map(|m| m.n).collect()
    }

    /// Number of propagating subbands at energy `e`.
    ///
    /// A subband is open when `ħv_F|q| < |E|` (strict: exactly at an onset the
    /// subband is still closed); zero modes are counted as open at every energy.
    pub fn open_channels(&self, energy: f64, consts: &PhysicalConstants) -> usize {
        self.momenta()
            .into_iter()
            .filter(|&q| q == 0.0 || consts.hbar_vf * q.abs() < energy.abs())
            .count()
    }
}

/// Selects the `n_modes` subbands with the smallest `|q_n|`.
pub fn enumerate_modes(width_index: usize, n_modes: usize) -> Result<ModeSpace> {
    enumerate_modes_with(width_index, n_modes, &PhysicalConstants::default())
}

pub fn enumerate_modes_with(
    width_index: usize,
    n_modes: usize,
    consts: &PhysicalConstants,
) -> Result<ModeSpace> {
    if width_index < 1 {
        return Err(invalid("width index N must be at least 1"));
    }
    if n_modes < 1 || n_modes > width_index {
        return Err(invalid(format!(
            "n_modes must satisfy 1 <= n_modes <= N = {width_index}, got {n_modes}"
        )));
    }
    // |3n + N + 1| is minimized near n = -(N+1)/3; a window of ±(N+1) around it
    // contains more than N candidates on each side.
    let centre = -((width_index as i64 + 1) / 3);
    let reach = width_index as i64 + 1;
    let mut candidates: Vec<i64> = (centre - reach..=centre + reach).collect();
    candidates.sort_by_key(|&n| (momentum_numerator(n, width_index).abs(), n));
    let subbands: Vec<(i64, f64)> = candidates
        .into_iter()
        .take(n_modes)
        .map(|n| {
            let q = momentum_from_numerator(momentum_numerator(n, width_index), width_index, consts.a0);
            (n, q)
        })
        .collect();
    Ok(ModeSpace::from_subbands(&subbands))
}

/// Continuum dispersion `E = γ ħv_F sqrt(q² + k²)`.
pub fn dispersion(mode: &Mode, k: f64, consts: &PhysicalConstants) -> f64 {
    mode.band.sign() * consts.hbar_vf * mode.q.hypot(k)
}

/// Sorted, de-duplicated subband edges `ħv_F|q_n|`.
pub fn mode_onsets(space: &ModeSpace, consts: &PhysicalConstants) -> Vec<f64> {
    let mut onsets: Vec<f64> = space
        .momenta()
        .into_iter()
        .map(|q| consts.hbar_vf * q.abs())
        .collect();
    onsets.sort_by(f64::total_cmp);
    onsets.dedup();
    onsets
}

/// Phase factor `z = sqrt(q - ik) / sqrt(q + ik)` of the lead eigenstates.
pub fn z_factor(q: f64, k: f64) -> Result<c64> {
    if q == 0.0 && k == 0.0 {
        return Err(invalid("z factor is undefined at q = k = 0"));
    }
    Ok(c64::new(q, -k).sqrt() / c64::new(q, k).sqrt())
}
