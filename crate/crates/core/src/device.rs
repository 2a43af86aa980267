//! A complete two-terminal device: ribbon, truncated mode space, barrier table
//! and pristine leads, solvable at any energy.
//!
//! Besides the generic block solve ([`Device::green`]), the device offers a
//! split solve ([`Device::solve`]). Every diagonal block is diagonal in the
//! band index and `b` only couples opposite bands, so the lattice equation
//! falls apart into two independent chains: chain `c` holds band `+1` on rows
//! with `m + c` even and band `-1` on the others. Each chain is a
//! block-tridiagonal system of half the block size whose couplings are
//! multiples of the identity.

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat, Scale};
use log::warn;

use crate::barrier::{BarrierSpec, PotentialTable};
use crate::error::{invalid, numerical, Result};
use crate::observables;
use crate::rgf::{
    assemble_block, gamma_matrix, rgf_solve, surface_pair, surface_self_energy_analytic,
    CouplingBlock, DeviceGreen, DiagonalBlock, LeadSide, SurfaceSelfEnergy, ETA_FLOOR,
};
use crate::ribbon::{ModeSpace, RibbonGeometry};

/// Transport quantities at one energy.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyPoint {
    pub energy: f64,
    pub transmission: f64,
    /// `-(1/π) Im Tr G(m,m)` per row, when requested.
    pub ldos: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Device {
    pub geometry: RibbonGeometry,
    pub modes: ModeSpace,
    pub barrier: BarrierSpec,
    table: PotentialTable,
    coupling: CouplingBlock,
}

impl Device {
    pub fn new(
        geometry: RibbonGeometry,
        modes: ModeSpace,
        barrier: BarrierSpec,
        quad_pts_per_a0: usize,
    ) -> Result<Self> {
        let table = PotentialTable::build(&modes, &barrier, &geometry, quad_pts_per_a0)?;
        Self::with_table(geometry, modes, barrier, table)
    }

    pub fn with_table(
        geometry: RibbonGeometry,
        modes: ModeSpace,
        barrier: BarrierSpec,
        table: PotentialTable,
    ) -> Result<Self> {
        if modes.is_empty() {
            return Err(invalid("mode space is empty"));
        }
        if table.len() != geometry.rows {
            return Err(invalid(format!(
                "potential table has {} rows, device has {}",
                table.len(),
                geometry.rows
            )));
        }
        let edge = table.edge_potential();
        if edge > 1e-6 * barrier.v0.abs() {
            warn!(
                "barrier reaches the lead-adjacent rows (|V| = {edge:e} eV); leads are treated as pristine"
            );
        }
        let coupling = CouplingBlock::new(&modes, geometry.delta, &geometry.consts);
        Ok(Self {
            geometry,
            modes,
            barrier,
            table,
            coupling,
        })
    }

    pub fn table(&self) -> &PotentialTable {
        &self.table
    }

    pub fn coupling(&self) -> &CouplingBlock {
        &self.coupling
    }

    /// Broadening used for the lead self-energies at a requested η.
    ///
    /// The floor keeps the closed form away from its subband-edge
    /// singularities and selects the retarded branch. The device rows use the
    /// requested η unchanged: a floor there would act as an absorber and cost
    /// each channel a fraction ~2ηL/(ħv_g) of its transmission. Above the
    /// floor, leads and device share the same η, so a pristine device stays
    /// exactly translation invariant.
    pub fn effective_eta(eta: f64) -> f64 {
        eta.max(ETA_FLOOR)
    }

    /// Diagonal blocks `a_m` for all rows at `E + iη` (η used as given).
    pub fn blocks(&self, energy: f64, eta: f64) -> Result<Vec<DiagonalBlock>> {
        (0..self.geometry.rows)
            .map(|m| assemble_block(energy, eta, m, &self.modes, &self.table, &self.geometry.consts))
            .collect()
    }

    /// Closed-form self-energies of the pristine lower and upper leads.
    pub fn lead_self_energies(
        &self,
        energy: f64,
        eta: f64,
    ) -> Result<(SurfaceSelfEnergy, SurfaceSelfEnergy)> {
        let g = &self.geometry;
        let lower =
            surface_self_energy_analytic(energy, eta, &self.modes, g.delta, &g.consts, LeadSide::Lower)?;
        let upper = SurfaceSelfEnergy {
            side: LeadSide::Upper,
            sigma: lower.sigma.clone(),
        };
        Ok((lower, upper))
    }

    /// Full-block recursive solve (η floor applied to the leads).
    pub fn green(&self, energy: f64, eta: f64) -> Result<DeviceGreen> {
        let blocks = self.blocks(energy, eta)?;
        let (lower, upper) = self.lead_self_energies(energy, Self::effective_eta(eta))?;
        rgf_solve(&blocks, &self.coupling, &lower, &upper, energy, eta)
    }

    /// Transmission and LDOS from the full-block solve.
    pub fn solve_full(&self, energy: f64, eta: f64, with_ldos: bool) -> Result<EnergyPoint> {
        let green = self.green(energy, eta)?;
        let (lower, upper) = self.lead_self_energies(energy, Self::effective_eta(eta))?;
        let transmission =
            observables::transmission(&green, &gamma_matrix(&lower), &gamma_matrix(&upper))?;
        let ldos = with_ldos.then(|| {
            (0..self.geometry.rows)
                .map(|m| observables::ldos(&green, m))
                .collect::<Result<Vec<f64>>>()
        });
        Ok(EnergyPoint {
            energy,
            transmission,
            ldos: ldos.transpose()?,
        })
    }

    /// Transmission (and optionally LDOS) via the two decoupled chains.
    pub fn solve(&self, energy: f64, eta: f64, with_ldos: bool) -> Result<EnergyPoint> {
        let shifted = c64::new(energy, eta);
        let lead_shifted = c64::new(energy, Self::effective_eta(eta));
        let consts = &self.geometry.consts;
        let momenta = self.modes.momenta();
        let sigma: Vec<(c64, c64)> = momenta
            .iter()
            .map(|&q| surface_pair(lead_shifted, q, self.geometry.delta, consts.hbar_vf))
            .collect::<Result<_>>()?;

        let mut trace = 0.0;
        let mut ldos = with_ldos.then(|| vec![0.0; self.geometry.rows]);
        for chain in 0..2 {
            trace += self.solve_chain(chain, shifted, &momenta, &sigma, ldos.as_deref_mut())?;
        }
        Ok(EnergyPoint {
            energy,
            transmission: 0.5 * trace,
            ldos,
        })
    }

    /// One staggered chain; returns `Tr[G Γ_U G† Γ_L]` restricted to it and
    /// accumulates its LDOS contribution.
    fn solve_chain(
        &self,
        chain: usize,
        shifted: c64,
        momenta: &[f64],
        sigma: &[(c64, c64)],
        ldos: Option<&mut [f64]>,
    ) -> Result<f64> {
        let rows = self.geometry.rows;
        let n = momenta.len();
        let hbar_vf = self.geometry.consts.hbar_vf;
        let hop = hbar_vf / (2.0 * self.geometry.delta);
        let hop2 = c64::new(hop * hop, 0.0);
        let conduction = |m: usize| (m + chain).is_multiple_of(2);
        let lead_sigma = |m: usize, i: usize| if conduction(m) { sigma[i].0 } else { sigma[i].1 };
        // A(m, m+1) = A(m+1, m) = -hop when row m holds band +1, +hop otherwise.
        let link = |m: usize| if conduction(m) { -hop } else { hop };

        let mut stored: Vec<Mat<c64>> = Vec::new();
        let mut previous: Option<Mat<c64>> = None;
        let mut column: Option<Mat<c64>> = None;
        for m in 0..rows {
            let v = &self.table.rows()[m];
            let sign = if conduction(m) { 1.0 } else { -1.0 };
            let mut pivot = Mat::from_fn(n, n, |i, j| {
                let mut value = c64::new(-v[(i, j)], 0.0);
                if i == j {
                    value += shifted + sign * hbar_vf * momenta[i];
                }
                value
            });
            if let Some(g) = &previous {
                pivot -= Scale(hop2) * g;
            }
            for i in 0..n {
                if m == 0 {
                    pivot[(i, i)] -= lead_sigma(0, i);
                }
                if m == rows - 1 {
                    pivot[(i, i)] -= lead_sigma(m, i);
                }
            }
            let g = pivot.partial_piv_lu().inverse();
            if !(0..n).all(|j| (0..n).all(|i| g[(i, j)].re.is_finite() && g[(i, j)].im.is_finite())) {
                return Err(numerical(format!("singular block at row {m} (chain {chain})")));
            }
            column = Some(match column {
                None => g.clone(),
                Some(col) => Scale(c64::new(-link(m - 1), 0.0)) * (&g * &col),
            });
            if ldos.is_some() {
                stored.push(g.clone());
            }
            previous = Some(g);
        }

        // G(M-1, 0) = column; G(0, M-1) is its transpose (the system is complex symmetric).
        let column = column.expect("at least one row");
        let gamma = |m: usize, i: usize| -2.0 * lead_sigma(m, i).im;
        let mut trace = 0.0;
        for i in 0..n {
            let gamma_lower = gamma(0, i);
            for j in 0..n {
                trace += column[(j, i)].norm_sqr() * gamma(rows - 1, j) * gamma_lower;
            }
        }

        if let Some(ldos) = ldos {
            let mut full = stored.pop().expect("at least one row");
            accumulate_ldos(&mut ldos[rows - 1], &full);
            for m in (0..rows - 1).rev() {
                let g = &stored[m];
                full = g + Scale(hop2) * (g * &full * g);
                accumulate_ldos(&mut ldos[m], &full);
            }
        }
        Ok(trace)
    }
}

fn accumulate_ldos(slot: &mut f64, block: &Mat<c64>) {
    let trace_im: f64 = (0..block.nrows()).map(|i| block[(i, i)].im).sum();
    *slot -= trace_im / std::f64::consts::PI;
}
