//! Smoothed oblique gate barrier and its projection onto the transverse basis.

use std::f64::consts::PI;

use faer::Mat;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::ribbon::{ModeSpace, RibbonGeometry};

/// Barrier height, plateau length, transition length and tilt angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierSpec {
    /// Height (eV).
    pub v0: f64,
    /// Barrier length D (Å), measured between the half-height points.
    pub length: f64,
    /// Width d (Å) of the sine-shaped transition region.
    pub transition: f64,
    /// Tilt θ (radians) relative to the ribbon cross-section.
    pub theta: f64,
}

impl BarrierSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.v0.is_finite() {
            return Err(invalid("barrier height must be finite"));
        }
        if !(self.length >= 0.0 && self.transition >= 0.0) {
            return Err(invalid(format!(
                "barrier lengths must be non-negative, got D={} d={}",
                self.length, self.transition
            )));
        }
        if !(self.theta.abs() < PI / 2.0) {
            return Err(invalid(format!(
                "tilt angle must satisfy |theta| < pi/2, got {}",
                self.theta
            )));
        }
        Ok(())
    }

    /// Largest `|y|` where the barrier is nonzero for a ribbon of width `width`
    /// sampled over `[0, width + a0/2]`.
    pub fn reach(&self, width: f64, a0: f64) -> f64 {
        (self.length + self.transition) / 2.0 + (width / 2.0 + a0 / 2.0) * self.theta.tan().abs()
    }
}

/// Axial profile: flat top, sine-shaped shoulders of width `d`, zero outside.
pub fn profile_1d(y: f64, spec: &BarrierSpec) -> f64 {
    let y = y.abs();
    let (big, small) = (spec.length, spec.transition);
    if y <= (big - small) / 2.0 {
        spec.v0
    } else if y >= (big + small) / 2.0 {
        0.0
    } else {
        spec.v0 * 0.5 * (1.0 - (PI * (2.0 * y - big) / (2.0 * small)).sin())
    }
}

/// Tilted barrier `V(y - (x - W/2) tan θ)`.
pub fn oblique_value(x: f64, y: f64, spec: &BarrierSpec, width: f64) -> f64 {
    profile_1d(y - (x - width / 2.0) * spec.theta.tan(), spec)
}

const GAUSS_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Points in `(0, span)` where the tilted profile has a kink.
fn breakpoints(y: f64, spec: &BarrierSpec, width: f64, span: f64) -> Vec<f64> {
    let slope = spec.theta.tan();
    if slope == 0.0 {
        return Vec::new();
    }
    let half_inner = (spec.length - spec.transition) / 2.0;
    let half_outer = (spec.length + spec.transition) / 2.0;
    let mut points: Vec<f64> = [0.0, half_inner, -half_inner, half_outer, -half_outer]
        .into_iter()
        .map(|u| width / 2.0 + (y - u) / slope)
        .filter(|&x| x > 0.0 && x < span)
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

/// Quadrature rule for `∫_0^span f(x) dx` with a profile kink-free integrand on
/// every piece: composite 4-point Gauss–Legendre, panels no longer than
/// `a0 / quad_pts_per_a0`.
fn quadrature_rule(
    y: f64,
    spec: &BarrierSpec,
    geom: &RibbonGeometry,
    quad_pts_per_a0: usize,
) -> (Vec<f64>, Vec<f64>) {
    let span = geom.effective_width();
    let panel = geom.consts.a0 / quad_pts_per_a0 as f64;
    let mut edges = vec![0.0];
    edges.extend(breakpoints(y, spec, geom.width(), span));
    edges.push(span);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for piece in edges.windows(2) {
        let (lo, hi) = (piece[0], piece[1]);
        let count = ((hi - lo) / panel).ceil().max(1.0) as usize;
        let h = (hi - lo) / count as f64;
        for p in 0..count {
            let mid = lo + (p as f64 + 0.5) * h;
            for (t, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                nodes.push(mid + 0.5 * h * t);
                weights.push(0.5 * h * w);
            }
        }
    }
    (nodes, weights)
}

/// `V_{nn'}(y) = (1/W̃) ∫_0^W̃ V(x,y) cos((q_n - q_n') x) dx`, evaluated as
/// `C diag(wV) Cᵀ + S diag(wV) Sᵀ` with `C = cos(q x)`, `S = sin(q x)`.
fn project_row(
    y: f64,
    momenta: &[f64],
    spec: &BarrierSpec,
    geom: &RibbonGeometry,
    quad_pts_per_a0: usize,
) -> (Mat<f64>, f64) {
    let n = momenta.len();
    let width = geom.width();
    if y.abs() > spec.reach(width, geom.consts.a0) || spec.v0 == 0.0 {
        return (Mat::zeros(n, n), 0.0);
    }
    if spec.theta == 0.0 {
        let v = profile_1d(y, spec);
        return (Mat::from_fn(n, n, |i, j| if i == j { v } else { 0.0 }), v.abs());
    }
    project_sampled(y, momenta, spec, geom, quad_pts_per_a0)
}

fn project_sampled(
    y: f64,
    momenta: &[f64],
    spec: &BarrierSpec,
    geom: &RibbonGeometry,
    quad_pts_per_a0: usize,
) -> (Mat<f64>, f64) {
    let n = momenta.len();
    let width = geom.width();
    let span = geom.effective_width();
    let (nodes, weights) = quadrature_rule(y, spec, geom, quad_pts_per_a0);
    let values: Vec<f64> = nodes.iter().map(|&x| oblique_value(x, y, spec, width)).collect();
    let peak = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak == 0.0 {
        return (Mat::zeros(n, n), 0.0);
    }
    let k = nodes.len();
    let cos = Mat::from_fn(n, k, |i, p| (momenta[i] * nodes[p]).cos());
    let sin = Mat::from_fn(n, k, |i, p| (momenta[i] * nodes[p]).sin());
    let scale: Vec<f64> = weights.iter().zip(&values).map(|(w, v)| w * v / span).collect();
    let scaled_cos = Mat::from_fn(n, k, |i, p| cos[(i, p)] * scale[p]);
    let scaled_sin = Mat::from_fn(n, k, |i, p| sin[(i, p)] * scale[p]);
    let raw = &scaled_cos * cos.transpose() + &scaled_sin * sin.transpose();
    let sym = Mat::from_fn(n, n, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        0.5 * (raw[(a, b)] + raw[(b, a)])
    });
    (sym, peak)
}

/// Potential matrix `V_{nn'}(y)` between the transverse basis functions.
///
/// Indexed by subband only; the same matrix enters both band blocks.
pub fn project_potential(
    y: f64,
    space: &ModeSpace,
    spec: &BarrierSpec,
    geom: &RibbonGeometry,
    quad_pts_per_a0: usize,
) -> Result<Mat<f64>> {
    if quad_pts_per_a0 < 2 {
        return Err(invalid(format!(
            "need at least 2 quadrature points per lattice constant, got {quad_pts_per_a0}"
        )));
    }
    spec.validate()?;
    Ok(project_row(y, &space.momenta(), spec, geom, quad_pts_per_a0).0)
}

/// Projected potential for every device row, computed once per geometry.
#[derive(Clone, Debug)]
pub struct PotentialTable {
    rows: Vec<Mat<f64>>,
    /// Largest sampled `|V(x, y_m)|` across the width, per row.
    peak: Vec<f64>,
    pub quad_pts_per_a0: usize,
}

impl PotentialTable {
    pub fn build(
        space: &ModeSpace,
        spec: &BarrierSpec,
        geom: &RibbonGeometry,
        quad_pts_per_a0: usize,
    ) -> Result<Self> {
        if quad_pts_per_a0 < 2 {
            return Err(invalid(format!(
                "need at least 2 quadrature points per lattice constant, got {quad_pts_per_a0}"
            )));
        }
        spec.validate()?;
        let momenta = space.momenta();
        let (rows, peak) = (0..geom.rows)
            .into_par_iter()
            .map(|m| project_row(geom.row_position(m), &momenta, spec, geom, quad_pts_per_a0))
            .unzip();
        Ok(Self {
            rows,
            peak,
            quad_pts_per_a0,
        })
    }

    /// Table with no potential on any row.
    pub fn zeros(space: &ModeSpace, rows: usize) -> Self {
        let n = space.n_modes();
        Self {
            rows: vec![Mat::zeros(n, n); rows],
            peak: vec![0.0; rows],
            quad_pts_per_a0: 0,
        }
    }

    /// Build directly from per-row matrices; the peak is taken from the
    /// largest diagonal entry magnitude.
    pub fn from_rows(rows: Vec<Mat<f64>>) -> Self {
        let peak = rows
            .iter()
            .map(|r| (0..r.nrows()).map(|i| r[(i, i)].abs()).fold(0.0, f64::max))
            .collect();
        Self {
            rows,
            peak,
            quad_pts_per_a0: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, m: usize) -> Option<&Mat<f64>> {
        self.rows.get(m)
    }

    pub fn rows(&self) -> &[Mat<f64>] {
        &self.rows
    }

    /// Largest barrier value seen on the two lead-adjacent rows.
    pub fn edge_potential(&self) -> f64 {
        match (self.peak.first(), self.peak.last()) {
            (Some(&a), Some(&b)) => a.max(b),
            _ => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ribbon::{enumerate_modes, PhysicalConstants};

    fn spec(theta: f64) -> BarrierSpec {
        BarrierSpec {
            v0: 0.5,
            length: 60.0 * 2.46,
            transition: 30.0 * 2.46,
            theta,
        }
    }

    fn geom(n: usize) -> RibbonGeometry {
        RibbonGeometry::with_length(n, 2.0, 260.0 * 2.46, PhysicalConstants::default()).unwrap()
    }

    #[test]
    fn profile_values() {
        let s = spec(0.0);
        assert_eq!(profile_1d(0.0, &s), 0.5);
        assert_eq!(profile_1d((s.length + s.transition) / 2.0, &s), 0.0);
        assert_eq!(profile_1d(-(s.length + s.transition) / 2.0 - 1.0, &s), 0.0);
        assert!((profile_1d(s.length / 2.0, &s) - 0.25).abs() < 1e-15);
        assert!((profile_1d(-s.length / 2.0, &s) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn profile_is_continuous() {
        let s = spec(0.0);
        for edge in [(s.length - s.transition) / 2.0, (s.length + s.transition) / 2.0] {
            let gap = (profile_1d(edge - 1e-9, &s) - profile_1d(edge + 1e-9, &s)).abs();
            assert!(gap < 1e-9, "jump {gap} at {edge}");
        }
    }

    #[test]
    fn step_profile_without_transition() {
        let s = BarrierSpec { transition: 0.0, ..spec(0.0) };
        assert_eq!(profile_1d(s.length / 2.0 - 1e-6, &s), 0.5);
        assert_eq!(profile_1d(s.length / 2.0 + 1e-6, &s), 0.0);
    }

    #[test]
    fn oblique_examples() {
        let w = 99.0 * 2.46;
        let flat = spec(0.0);
        for x in [0.0, 13.0, w] {
            assert_eq!(oblique_value(x, 80.0, &flat, w), profile_1d(80.0, &flat));
        }
        let tilted = spec(PI / 4.0);
        assert_eq!(oblique_value(w / 2.0, 0.0, &tilted, w), 0.5);
        assert!((oblique_value(0.0, -w / 2.0, &tilted, w) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn flat_barrier_projects_to_scaled_identity() {
        let g = geom(198);
        let space = enumerate_modes(198, 12).unwrap();
        let v = project_potential(0.0, &space, &spec(0.0), &g, 4).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let expect = if i == j { 0.5 } else { 0.0 };
                assert!((v[(i, j)] - expect).abs() < 1e-10 * 0.5, "({i},{j}) = {}", v[(i, j)]);
            }
        }
    }

    #[test]
    fn zero_height_gives_zero_matrix() {
        let g = geom(198);
        let space = enumerate_modes(198, 6).unwrap();
        let s = BarrierSpec { v0: 0.0, ..spec(0.3) };
        let v = project_potential(10.0, &space, &s, &g, 4).unwrap();
        assert!(v.norm_max() == 0.0);
    }

    #[test]
    fn rows_beyond_reach_are_zero() {
        let g = geom(198);
        let space = enumerate_modes(198, 6).unwrap();
        let s = spec(PI / 4.0);
        let y = s.reach(g.width(), 2.46) + 1e-6;
        for y in [y, -y] {
            let v = project_potential(y, &space, &s, &g, 4).unwrap();
            assert_eq!(v.norm_max(), 0.0);
        }
        let inside = project_potential(s.reach(g.width(), 2.46) - 5.0, &space, &s, &g, 4).unwrap();
        assert!(inside.norm_max() > 0.0);
    }

    #[test]
    fn rejects_coarse_quadrature() {
        let g = geom(20);
        let space = enumerate_modes(20, 2).unwrap();
        assert!(project_potential(0.0, &space, &spec(0.0), &g, 1).is_err());
    }

    #[test]
    fn oblique_projection_symmetric_and_bounded() {
        let g = geom(198);
        let space = enumerate_modes(198, 20).unwrap();
        let table = PotentialTable::build(&space, &spec(PI / 4.0), &g, 4).unwrap();
        for v in table.rows() {
            for i in 0..20 {
                for j in 0..20 {
                    assert_eq!(v[(i, j)], v[(j, i)]);
                    assert!(v[(i, j)].abs() <= 0.5 + 1e-12);
                }
            }
        }
        assert!(table.edge_potential() < 1e-6 * 0.5);
    }

    #[test]
    fn mirror_symmetry() {
        // V(-y; θ) equals V(+y; -θ) because the profile is even in its argument
        // and the tilt offset flips sign with θ about the ribbon centre.
        let g = geom(50);
        let space = enumerate_modes(50, 8).unwrap();
        let s = BarrierSpec {
            v0: 0.7,
            length: 30.0,
            transition: 12.0,
            theta: 0.4,
        };
        let mirrored = BarrierSpec { theta: -s.theta, ..s };
        for y in [3.0, 17.5, 40.0] {
            let a = project_potential(-y, &space, &s, &g, 8).unwrap();
            let b = project_potential(y, &space, &mirrored, &g, 8).unwrap();
            assert!((&a - &b).norm_max() < 1e-12);
        }
    }

    #[test]
    fn quadrature_converges() {
        let g = geom(198);
        let space = enumerate_modes(198, 100).unwrap();
        let s = spec(PI / 12.0);
        for y in [-90.0, -40.0, 0.0, 65.0] {
            let coarse = project_potential(y, &space, &s, &g, 4).unwrap();
            let fine = project_potential(y, &space, &s, &g, 8).unwrap();
            let diff = (&coarse - &fine).norm_max();
            assert!(diff < 1e-8 * 0.5, "y={y} diff={diff}");
        }
    }

    #[test]
    fn flat_barrier_quadrature_stays_diagonal() {
        // Bypass the exact θ = 0 shortcut and integrate the constant row numerically.
        let g = geom(198);
        let space = enumerate_modes(198, 100).unwrap();
        let (v, _) = project_sampled(0.0, &space.momenta(), &spec(0.0), &g, 4);
        for i in 0..100 {
            for j in 0..100 {
                let expect = if i == j { 0.5 } else { 0.0 };
                assert!((v[(i, j)] - expect).abs() < 1e-10 * 0.5, "({i},{j}) = {}", v[(i, j)]);
            }
        }
    }

    /// Independent fine composite trapezoid over the raw definition.
    fn trapezoid_oracle(y: f64, qa: f64, qb: f64, s: &BarrierSpec, g: &RibbonGeometry) -> f64 {
        let span = g.effective_width();
        let panels = 200_000;
        let h = span / panels as f64;
        let f = |x: f64| oblique_value(x, y, s, g.width()) * ((qa - qb) * x).cos();
        let inner: f64 = (1..panels).map(|k| f(k as f64 * h)).sum();
        h * (inner + 0.5 * (f(0.0) + f(span))) / span
    }

    #[test]
    fn matches_fine_trapezoid() {
        let g = geom(60);
        let space = enumerate_modes(60, 7).unwrap();
        let q = space.momenta();
        let s = BarrierSpec { theta: 0.6, ..spec(0.0) };
        for y in [-120.0, -30.0, 0.0, 12.5, 99.0] {
            let v = project_potential(y, &space, &s, &g, 4).unwrap();
            for i in 0..7 {
                for j in 0..7 {
                    let oracle = trapezoid_oracle(y, q[i], q[j], &s, &g);
                    assert!((v[(i, j)] - oracle).abs() < 1e-8, "y={y} ({i},{j}) {} vs {oracle}", v[(i, j)]);
                }
            }
        }
    }
}
