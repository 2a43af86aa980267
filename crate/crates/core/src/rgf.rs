//! Block-tridiagonal lattice equation, lead self-energies and the recursive
//! Green function solver.
//!
//! Device rows `m = 0..M` carry blocks `a_m = (E+iη)·1 + D(y_m)` on the
//! diagonal, `+b` on the super-diagonal and `-b` on the sub-diagonal. The
//! semi-infinite leads enter as `a_0 - Σ_L` and `a_{M-1} - Σ_U`.

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat};

use crate::barrier::PotentialTable;
use crate::error::{invalid, numerical, Result};
use crate::ribbon::{ModeSpace, PhysicalConstants};

/// Broadening always added on top of the requested η (eV).
pub const ETA_FLOOR: f64 = 1e-9;

/// Largest `M·block_dim` accepted by [`dense_solve`].
pub const DENSE_LIMIT: usize = 4000;

const DECIMATION_TOL: f64 = 1e-12;
const DECIMATION_MAX_ITER: usize = 10_000;

/// Inter-row coupling `b = b̃/(2Δ)`.
#[derive(Clone, Debug)]
pub struct CouplingBlock {
    matrix: Mat<c64>,
}

impl CouplingBlock {
    /// `b̃_{nγ,n'γ'} = ħv_F (γ'-γ)/2 δ_{nn'}` divided by `2Δ`.
    pub fn new(space: &ModeSpace, delta: f64, consts: &PhysicalConstants) -> Self {
        let dim = space.block_dim();
        let hop = consts.hbar_vf / (2.0 * delta);
        let mut matrix = Mat::zeros(dim, dim);
        for i in 0..space.n_modes() {
            // (γ=+1, γ'=-1) -> -ħv_F ; (γ=-1, γ'=+1) -> +ħv_F
            matrix[(2 * i, 2 * i + 1)] = c64::new(-hop, 0.0);
            matrix[(2 * i + 1, 2 * i)] = c64::new(hop, 0.0);
        }
        Self { matrix }
    }

    pub fn from_matrix(matrix: Mat<c64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(invalid("coupling block must be square"));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Coupling seen by the row-reversed device.
    pub fn negated(&self) -> Self {
        Self {
            matrix: Mat::from_fn(self.dim(), self.dim(), |i, j| -self.matrix[(i, j)]),
        }
    }
}

/// Diagonal block `a_m` of the lattice equation.
#[derive(Clone, Debug)]
pub struct DiagonalBlock {
    pub matrix: Mat<c64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeadSide {
    Lower,
    Upper,
}

#[derive(Clone, Debug)]
pub struct SurfaceSelfEnergy {
    pub side: LeadSide,
    pub sigma: Mat<c64>,
}

/// Device Green function blocks at one energy.
#[derive(Clone, Debug)]
pub struct DeviceGreen {
    /// `G(0, M-1)`.
    pub corner: Mat<c64>,
    /// `G(m, m)` for every row.
    pub diag: Vec<Mat<c64>>,
    pub energy: f64,
    pub eta: f64,
}

/// `a_m[(n,γ),(n',γ')] = (E+iη)δ + ħv_F (γ+γ')/2 q_n δ_{nn'} - δ_{γγ'} V_{nn'}(y_m)`.
pub fn assemble_block(
    energy: f64,
    eta: f64,
    row: usize,
    space: &ModeSpace,
    table: &PotentialTable,
    consts: &PhysicalConstants,
) -> Result<DiagonalBlock> {
    let potential = table
        .row(row)
        .ok_or_else(|| invalid(format!("potential table has no row {row}")))?;
    let n = space.n_modes();
    if potential.nrows() != n {
        return Err(invalid(format!(
            "potential table has {} subbands, mode space has {n}",
            potential.nrows()
        )));
    }
    let shifted = c64::new(energy, eta);
    let q = space.momenta();
    let matrix = Mat::from_fn(2 * n, 2 * n, |r, c| {
        let (i, gi) = (r / 2, r % 2);
        let (j, gj) = (c / 2, c % 2);
        if gi != gj {
            return c64::new(0.0, 0.0);
        }
        let mut value = c64::new(-potential[(i, j)], 0.0);
        if i == j {
            let gamma = if gi == 0 { 1.0 } else { -1.0 };
            value += shifted + gamma * consts.hbar_vf * q[i];
        }
        value
    });
    Ok(DiagonalBlock { matrix })
}

/// Diagonal lead self-energy per subband, `(Σ_{γ=+1}, Σ_{γ=-1})`.
///
/// `Σ = ½(1 - s)(Ẽ + γħv_F q)` with `s = ±sqrt(1 - 1/(Δ²(Ẽ²/(ħv_F)² - q²)))`.
/// Both band entries share the root; the sign is chosen so that the trace of
/// the pair has the smaller imaginary part, which is the decaying (retarded)
/// solution since the two candidate traces sum to `2Ẽ`.
pub(crate) fn surface_pair(
    shifted: c64,
    q: f64,
    delta: f64,
    hbar_vf: f64,
) -> Result<(c64, c64)> {
    let kinetic = shifted * shifted / (hbar_vf * hbar_vf) - q * q;
    let denom = kinetic * (delta * delta);
    if denom.norm() == 0.0 {
        return Err(numerical(format!(
            "lead self-energy is singular at the subband edge E = {} (q = {q})",
            shifted.re
        )));
    }
    let root = (c64::new(1.0, 0.0) - denom.inv()).sqrt();
    let up = shifted + hbar_vf * q;
    let down = shifted - hbar_vf * q;
    let branch = |s: c64| {
        let f = (c64::new(1.0, 0.0) - s) * 0.5;
        (f * up, f * down)
    };
    let (a, b) = branch(root);
    let (c, d) = branch(-root);
    if (a + b).im <= (c + d).im {
        Ok((a, b))
    } else {
        Ok((c, d))
    }
}

/// Closed-form self-energy of a pristine semi-infinite lead.
pub fn surface_self_energy_analytic(
    energy: f64,
    eta: f64,
    space: &ModeSpace,
    delta: f64,
    consts: &PhysicalConstants,
    side: LeadSide,
) -> Result<SurfaceSelfEnergy> {
    if !(delta > 0.0) {
        return Err(invalid(format!("grid spacing must be positive, got {delta}")));
    }
    let shifted = c64::new(energy, eta);
    let dim = space.block_dim();
    let mut sigma = Mat::zeros(dim, dim);
    for (i, q) in space.momenta().into_iter().enumerate() {
        let (up, down) = surface_pair(shifted, q, delta, consts.hbar_vf)?;
        sigma[(2 * i, 2 * i)] = up;
        sigma[(2 * i + 1, 2 * i + 1)] = down;
    }
    Ok(SurfaceSelfEnergy { side, sigma })
}

fn invert(matrix: &Mat<c64>, what: &str) -> Result<Mat<c64>> {
    let inverse = matrix.partial_piv_lu().inverse();
    let finite = (0..inverse.ncols())
        .all(|j| (0..inverse.nrows()).all(|i| inverse[(i, j)].re.is_finite() && inverse[(i, j)].im.is_finite()));
    if !finite {
        return Err(numerical(format!("singular block at {what}")));
    }
    Ok(inverse)
}

fn max_abs(m: &Mat<c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

/// Self-energy of a semi-infinite lead built from repeated `a_lead` rows,
/// obtained by solving `G = [a + b G b]⁻¹`, `Σ = -b G b` with layer
/// decimation (each sweep doubles the number of eliminated layers).
pub fn surface_self_energy_iterative(
    eta: f64,
    a_lead: &DiagonalBlock,
    b: &CouplingBlock,
    side: LeadSide,
) -> Result<SurfaceSelfEnergy> {
    if !(eta > 0.0) {
        return Err(invalid(format!(
            "iterative self-energy needs a positive broadening, got {eta}"
        )));
    }
    let dim = b.dim();
    if a_lead.matrix.nrows() != dim {
        return Err(invalid("lead block and coupling block dimensions differ"));
    }
    let plus = b.matrix().clone();
    let minus = b.negated().matrix;
    // Coupling from the lead surface layer to the next layer into the lead,
    // and back. Lower lead: A(-1,-2) = -b, A(-2,-1) = +b. Upper lead:
    // A(M,M+1) = +b, A(M+1,M) = -b.
    let (inward, outward) = match side {
        LeadSide::Lower => (minus, plus.clone()),
        LeadSide::Upper => (plus.clone(), minus),
    };
    // Decimate in cells of two layers. A single layer's block is nearly
    // singular at subband edges and at E = 0 for q = 0 (its entries are
    // E + iη ± ħv_F q), and eliminating it loses accuracy roughly like
    // ε·(ħv_F/Δ)²/|E + iη ± ħv_F q|²; a two-layer cell is only singular where E² = (ħv_F q)² + (ħv_F/2Δ)².
    let a = &a_lead.matrix;
    let cell = 2 * dim;
    let cell_block = Mat::from_fn(cell, cell, |i, j| match (i < dim, j < dim) {
        (true, true) => a[(i, j)],
        (false, false) => a[(i - dim, j - dim)],
        (true, false) => inward[(i, j - dim)],
        (false, true) => outward[(i - dim, j)],
    });
    // Cell k couples to cell k+1 only through its deeper layer.
    let mut out = Mat::from_fn(cell, cell, |i, j| {
        if i >= dim && j < dim {
            inward[(i - dim, j)]
        } else {
            c64::new(0.0, 0.0)
        }
    });
    let mut back = Mat::from_fn(cell, cell, |i, j| {
        if i < dim && j >= dim {
            outward[(i, j - dim)]
        } else {
            c64::new(0.0, 0.0)
        }
    });
    let mut surface = cell_block.clone();
    let mut bulk = cell_block;
    let self_energy = |surface: &Mat<c64>| -> Result<Mat<c64>> {
        let g = invert(surface, "lead surface")?;
        let g_surface = g.submatrix(0, 0, dim, dim).to_owned();
        Ok(-(&plus * &g_surface * &plus))
    };
    let mut sigma = self_energy(&surface)?;
    let coupling_scale = max_abs(b.matrix()).max(f64::MIN_POSITIVE);
    let mut last_change = f64::INFINITY;
    for _ in 0..DECIMATION_MAX_ITER {
        let g = invert(&bulk, "lead decimation")?;
        let g_back = &g * &back;
        let g_out = &g * &out;
        let out_g_back = &out * &g_back;
        let back_g_out = &back * &g_out;
        surface -= &out_g_back;
        bulk = &bulk - &out_g_back - &back_g_out;
        out = -(&out * &g_out);
        back = -(&back * &g_back);
        let next = self_energy(&surface)?;
        last_change = max_abs(&(&next - &sigma));
        sigma = next;
        let residual_coupling = max_abs(&out).max(max_abs(&back));
        if last_change < DECIMATION_TOL && residual_coupling < 1e-8 * coupling_scale {
            return Ok(SurfaceSelfEnergy { side, sigma });
        }
    }
    Err(numerical(format!(
        "lead decimation did not converge after {DECIMATION_MAX_ITER} sweeps (last change {last_change:e})"
    )))
}

/// `Γ = i(Σ - Σ†)`.
pub fn gamma_matrix(sigma: &SurfaceSelfEnergy) -> Mat<c64> {
    let s = &sigma.sigma;
    let i = c64::new(0.0, 1.0);
    Mat::from_fn(s.nrows(), s.ncols(), |r, c| i * (s[(r, c)] - s[(c, r)].conj()))
}

fn check_system(
    blocks: &[DiagonalBlock],
    b: &CouplingBlock,
    sigma_l: &SurfaceSelfEnergy,
    sigma_u: &SurfaceSelfEnergy,
) -> Result<usize> {
    if blocks.len() < 3 {
        return Err(invalid(format!("device needs at least 3 rows, got {}", blocks.len())));
    }
    let dim = b.dim();
    let shapes_ok = blocks
        .iter()
        .all(|a| a.matrix.nrows() == dim && a.matrix.ncols() == dim)
        && sigma_l.sigma.nrows() == dim
        && sigma_u.sigma.nrows() == dim;
    if !shapes_ok {
        return Err(invalid("block dimensions are inconsistent"));
    }
    Ok(dim)
}

/// Recursive Green function solve of the block-tridiagonal device matrix.
///
/// Forward sweep from row 0 builds the left-connected blocks
/// `g_m = [a_m + b g_{m-1} b]⁻¹`; the backward sweep turns them in place into
/// `G(m,m) = g_m - g_m b G(m+1,m+1) b g_m` and carries the corner
/// `G(m, M-1) = -g_m b G(m+1, M-1)`.
pub fn rgf_solve(
    blocks: &[DiagonalBlock],
    b: &CouplingBlock,
    sigma_l: &SurfaceSelfEnergy,
    sigma_u: &SurfaceSelfEnergy,
    energy: f64,
    eta: f64,
) -> Result<DeviceGreen> {
    check_system(blocks, b, sigma_l, sigma_u)?;
    let rows = blocks.len();
    let coupling = b.matrix();
    let mut left: Vec<Mat<c64>> = Vec::with_capacity(rows);
    for (m, block) in blocks.iter().enumerate() {
        let mut pivot = block.matrix.clone();
        if m == 0 {
            pivot -= &sigma_l.sigma;
        } else {
            pivot += coupling * &left[m - 1] * coupling;
        }
        if m == rows - 1 {
            pivot -= &sigma_u.sigma;
        }
        left.push(invert(&pivot, &format!("row {m}"))?);
    }

    let mut corner = left[rows - 1].clone();
    for m in (0..rows - 1).rev() {
        let g = &left[m];
        let g_b = g * coupling;
        corner = -(&g_b * &corner);
        let next = &left[m + 1];
        let full = g - &g_b * next * coupling * g;
        left[m] = full;
    }
    Ok(DeviceGreen {
        corner,
        diag: left,
        energy,
        eta,
    })
}

/// Assemble the full device matrix and invert it densely (test oracle).
pub fn dense_solve(
    blocks: &[DiagonalBlock],
    b: &CouplingBlock,
    sigma_l: &SurfaceSelfEnergy,
    sigma_u: &SurfaceSelfEnergy,
    energy: f64,
    eta: f64,
) -> Result<DeviceGreen> {
    let dim = check_system(blocks, b, sigma_l, sigma_u)?;
    let rows = blocks.len();
    let total = rows * dim;
    if total > DENSE_LIMIT {
        return Err(invalid(format!(
            "dense solve limited to {DENSE_LIMIT} unknowns, got {total}"
        )));
    }
    let mut full = Mat::<c64>::zeros(total, total);
    for (m, block) in blocks.iter().enumerate() {
        let at = m * dim;
        for j in 0..dim {
            for i in 0..dim {
                full[(at + i, at + j)] = block.matrix[(i, j)];
                if m + 1 < rows {
                    full[(at + i, at + dim + j)] = b.matrix()[(i, j)];
                    full[(at + dim + i, at + j)] = -b.matrix()[(i, j)];
                }
            }
        }
    }
    let last = (rows - 1) * dim;
    for j in 0..dim {
        for i in 0..dim {
            full[(i, j)] -= sigma_l.sigma[(i, j)];
            full[(last + i, last + j)] -= sigma_u.sigma[(i, j)];
        }
    }
    let inverse = invert(&full, "dense device matrix")?;
    let diag = (0..rows)
        .map(|m| inverse.submatrix(m * dim, m * dim, dim, dim).to_owned())
        .collect();
    let corner = inverse.submatrix(0, last, dim, dim).to_owned();
    Ok(DeviceGreen {
        corner,
        diag,
        energy,
        eta,
    })
}
