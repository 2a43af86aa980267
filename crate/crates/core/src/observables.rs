//! Transmission, local density of states, conductance and curve analysis.

use std::f64::consts::PI;

use faer::{c64, Mat};

use crate::barrier::BarrierSpec;
use crate::error::{invalid, numerical, Result};
use crate::rgf::DeviceGreen;
use crate::ribbon::PhysicalConstants;

/// Parameters a curve was computed with.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveMeta {
    pub width_index: usize,
    pub n_modes: usize,
    pub barrier: BarrierSpec,
    pub eta: f64,
}

/// `T(E)` sampled on an energy grid, ascending in energy.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionCurve {
    pub points: Vec<(f64, f64)>,
    pub meta: Option<CurveMeta>,
}

impl TransmissionCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        Self { points, meta: None }
    }

    pub fn energies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }
}

/// `DOS(m, E)` per device row (outer index) and energy (inner index).
#[derive(Clone, Debug, PartialEq)]
pub struct LdosMap {
    pub energies: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl LdosMap {
    /// LDOS of one row as a function of energy.
    pub fn row(&self, m: usize) -> Option<&[f64]> {
        self.values.get(m).map(Vec::as_slice)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalSpec {
    /// Chemical potential (eV).
    pub mu: f64,
    /// Temperature (K).
    pub temperature: f64,
}

/// Channel transmission `½ Re Tr[G(0,M-1) Γ_U G†(0,M-1) Γ_L]`.
///
/// The central-difference lattice carries two decoupled copies of every
/// channel, so the trace counts each one twice; the factor ½ makes a clean
/// ribbon transmit exactly one per open subband.
pub fn transmission(green: &DeviceGreen, gamma_lower: &Mat<c64>, gamma_upper: &Mat<c64>) -> Result<f64> {
    let dim = green.corner.nrows();
    if gamma_lower.nrows() != dim || gamma_upper.nrows() != dim {
        return Err(invalid(format!(
            "broadening matrices must be {dim}x{dim}, got {} and {}",
            gamma_lower.nrows(),
            gamma_upper.nrows()
        )));
    }
    let g = &green.corner;
    let product = g * gamma_upper * g.adjoint() * gamma_lower;
    let trace: c64 = (0..dim).map(|i| product[(i, i)]).sum();
    if trace.im.abs() > 1e-9 * (1.0 + trace.re.abs()) {
        return Err(numerical(format!(
            "transmission trace has imaginary part {:e} (real part {:e})",
            trace.im, trace.re
        )));
    }
    Ok(0.5 * trace.re)
}

/// `-(1/π) Im Tr G(m,m)`.
pub fn ldos(green: &DeviceGreen, row: usize) -> Result<f64> {
    let block = green.diag.get(row).ok_or_else(|| {
        invalid(format!("row {row} outside device of {} rows", green.diag.len()))
    })?;
    let im: f64 = (0..block.nrows()).map(|i| block[(i, i)].im).sum();
    Ok(-im / PI)
}

/// Thermal kernel `-∂f/∂E = sech²((E-μ)/(2k_BT)) / (4k_BT)`.
fn thermal_kernel(energy: f64, mu: f64, kt: f64) -> f64 {
    let x = (energy - mu) / (2.0 * kt);
    let sech = 1.0 / x.cosh();
    sech * sech / (4.0 * kt)
}

/// Linear interpolation of `T` at `energy` (curve ascending in energy).
pub fn interpolate(curve: &TransmissionCurve, energy: f64) -> Result<f64> {
    let pts = &curve.points;
    let (first, last) = match (pts.first(), pts.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => return Err(invalid("empty transmission curve")),
    };
    if energy < first || energy > last {
        return Err(invalid(format!(
            "energy {energy} outside curve range [{first}, {last}]"
        )));
    }
    let idx = pts.partition_point(|p| p.0 < energy);
    if idx < pts.len() && pts[idx].0 == energy {
        return Ok(pts[idx].1);
    }
    let (e0, t0) = pts[idx - 1];
    let (e1, t1) = pts[idx];
    Ok(t0 + (t1 - t0) * (energy - e0) / (e1 - e0))
}

/// Linear-response conductance in units of `2e²/h`.
///
/// The curve must cover `μ ± 10 k_BT` with spacing at most `k_BT/4`. The
/// thermal average is taken with the trapezoid rule over that window and
/// normalized by the quadrature of the kernel itself, so a constant
/// transmission is reproduced exactly.
pub fn conductance(
    curve: &TransmissionCurve,
    thermal: &ThermalSpec,
    consts: &PhysicalConstants,
) -> Result<f64> {
    if !(thermal.temperature >= 0.0) {
        return Err(invalid(format!(
            "temperature must be non-negative, got {}",
            thermal.temperature
        )));
    }
    if thermal.temperature == 0.0 {
        return interpolate(curve, thermal.mu);
    }
    let kt = consts.kb * thermal.temperature;
    let (lo, hi) = (thermal.mu - 10.0 * kt, thermal.mu + 10.0 * kt);
    let pts = &curve.points;
    let covered = matches!((pts.first(), pts.last()), (Some(a), Some(b)) if a.0 <= lo && b.0 >= hi);
    if !covered {
        return Err(invalid(format!(
            "transmission curve must cover [{lo}, {hi}] eV for the thermal window"
        )));
    }
    let start = pts.partition_point(|p| p.0 < lo).saturating_sub(1);
    let end = (pts.partition_point(|p| p.0 <= hi) + 1).min(pts.len());
    let window = &pts[start..end];
    let coarsest = window
        .windows(2)
        .map(|w| w[1].0 - w[0].0)
        .fold(0.0f64, f64::max);
    if coarsest > kt / 4.0 * (1.0 + 1e-9) {
        return Err(invalid(format!(
            "energy spacing {coarsest:e} eV exceeds k_BT/4 = {:e} eV",
            kt / 4.0
        )));
    }
    let (mut weighted, mut norm) = (0.0, 0.0);
    for w in window.windows(2) {
        let ((e0, t0), (e1, t1)) = (w[0], w[1]);
        let (k0, k1) = (thermal_kernel(e0, thermal.mu, kt), thermal_kernel(e1, thermal.mu, kt));
        let h = 0.5 * (e1 - e0);
        weighted += h * (k0 * t0 + k1 * t1);
        norm += h * (k0 + k1);
    }
    Ok(weighted / norm)
}

/// Transmission of a massless Dirac particle through a square barrier in an
/// unbounded sheet: `cos²θ / (1 - cos²(kD) sin²θ)`.
pub fn klein_2d(theta: f64, k: f64, length: f64) -> f64 {
    let c = theta.cos();
    let kd = (k * length).cos();
    c * c / (1.0 - kd * kd * theta.sin().powi(2))
}

/// Level spacing `ħv_F / max(D, W)` of a Dirac quantum well.
pub fn peak_spacing_estimate(length: f64, width: f64, consts: &PhysicalConstants) -> f64 {
    consts.hbar_vf / length.max(width)
}

/// A local maximum and its topographic prominence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub prominence: f64,
}

/// Local maxima (plateaus reported at their centre) with prominence at least
/// `min_prominence`, in ascending index order.
///
/// Prominence is the height above the higher of the two lowest points found
/// on each side before reaching a strictly higher sample or the curve end.
pub fn find_peaks(values: &[f64], min_prominence: f64) -> Vec<Peak> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                let height = values[i];
                let mut left_min = height;
                for &v in values[..i].iter().rev() {
                    if v > height {
                        break;
                    }
                    left_min = left_min.min(v);
                }
                let mut right_min = height;
                for &v in &values[j + 1..] {
                    if v > height {
                        break;
                    }
                    right_min = right_min.min(v);
                }
                let prominence = height - left_min.max(right_min);
                if prominence >= min_prominence {
                    peaks.push(Peak {
                        index: (i + j) / 2,
                        prominence,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// `Σ |T_{k+1} - T_k|`.
pub fn total_variation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
        (0..steps).map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64).collect()
    }

    #[test]
    fn klein_examples() {
        assert_eq!(klein_2d(0.0, 0.37, 11.0), 1.0);
        for m in 0..5 {
            let t = klein_2d(0.9, m as f64 * PI, 1.0);
            assert!((t - 1.0).abs() < 1e-15, "m={m} t={t}");
        }
        assert!((klein_2d(PI / 4.0, PI / 2.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spacing_estimate() {
        let c = PhysicalConstants::default();
        let e = peak_spacing_estimate(147.6, 243.5, &c);
        assert!((e - 6.582 / 243.5).abs() < 1e-15);
        assert!((e - 0.0270).abs() < 1e-4);
        assert_eq!(peak_spacing_estimate(10.0, 10.0, &c), 0.6582);
        assert!(peak_spacing_estimate(1e300, 1.0, &c) < 1e-290);
    }

    #[test]
    fn conductance_of_constant_transmission() {
        let c = PhysicalConstants::default();
        let curve = TransmissionCurve::new(grid(-0.3, 0.4, 70001).into_iter().map(|e| (e, 1.0)).collect());
        for (mu, t) in [(0.0, 20.0), (0.05, 77.0), (0.1, 300.0)] {
            let s = conductance(&curve, &ThermalSpec { mu, temperature: t }, &c).unwrap();
            assert!((s - 1.0).abs() < 1e-6, "mu={mu} T={t} s={s}");
        }
    }

    #[test]
    fn zero_temperature_conductance_reads_the_curve() {
        let c = PhysicalConstants::default();
        let curve = TransmissionCurve::new(vec![(0.0, 0.2), (0.1, 0.7), (0.2, 0.4)]);
        assert_eq!(conductance(&curve, &ThermalSpec { mu: 0.1, temperature: 0.0 }, &c).unwrap(), 0.7);
        let mid = conductance(&curve, &ThermalSpec { mu: 0.15, temperature: 0.0 }, &c).unwrap();
        assert!((mid - 0.55).abs() < 1e-12);
        assert!(conductance(&curve, &ThermalSpec { mu: 0.3, temperature: 0.0 }, &c).is_err());
    }

    #[test]
    fn conductance_on_a_step() {
        let c = PhysicalConstants::default();
        let mu = 0.05;
        let curve = TransmissionCurve::new(
            grid(0.0, 0.1, 4001)
                .into_iter()
                .map(|e| (e, if e < mu { 1.0 } else if e > mu { 3.0 } else { 2.0 }))
                .collect(),
        );
        let s = conductance(&curve, &ThermalSpec { mu, temperature: 20.0 }, &c).unwrap();
        assert!((s - 2.0).abs() < 1e-3, "s={s}");
    }

    #[test]
    fn conductance_rejects_poor_coverage() {
        let c = PhysicalConstants::default();
        let narrow = TransmissionCurve::new(grid(0.0, 0.01, 100).into_iter().map(|e| (e, 1.0)).collect());
        let thermal = ThermalSpec { mu: 0.005, temperature: 300.0 };
        assert!(conductance(&narrow, &thermal, &c).is_err());
        let coarse = TransmissionCurve::new(grid(-0.5, 0.5, 11).into_iter().map(|e| (e, 1.0)).collect());
        assert!(conductance(&coarse, &thermal, &c).is_err());
        let cold = ThermalSpec { mu: 0.0, temperature: -1.0 };
        assert!(conductance(&coarse, &cold, &c).is_err());
    }

    #[test]
    fn peaks_and_prominence() {
        let v = [0.0, 1.0, 0.2, 0.5, 0.4, 2.0, 2.0, 0.0];
        let peaks = find_peaks(&v, 0.0);
        assert_eq!(peaks.len(), 3);
        assert_eq!(peaks[0], Peak { index: 1, prominence: 0.8 });
        assert_eq!(peaks[1].index, 3);
        assert!((peaks[1].prominence - 0.1).abs() < 1e-15);
        assert_eq!(peaks[2], Peak { index: 5, prominence: 2.0 });
        assert_eq!(find_peaks(&v, 0.5).len(), 2);
        assert!(find_peaks(&[1.0, 1.0, 1.0], 0.0).is_empty());
        assert!(find_peaks(&[0.0, 1.0, 2.0], 0.0).is_empty());
    }

    #[test]
    fn variation() {
        assert_eq!(total_variation(&[0.0, 1.0, 0.5, 0.5, 2.0]), 3.0);
        assert_eq!(total_variation(&[]), 0.0);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn klein_bounded_and_periodic(theta in -1.5f64..1.5, kd in -50.0f64..50.0) {
                let t = klein_2d(theta, kd, 1.0);
                prop_assert!(t > 0.0 && t <= 1.0 + 1e-15);
                let shifted = klein_2d(theta, kd + PI, 1.0);
                prop_assert!((t - shifted).abs() < 1e-9);
            }

            #[test]
            fn conductance_within_curve_bounds(
                values in proptest::collection::vec(0.0f64..3.0, 40),
                temp in 1.0f64..50.0,
            ) {
                let c = PhysicalConstants::default();
                let kt = c.kb * temp;
                let step = kt / 4.0;
                let lo = -10.5 * kt;
                let n = (21.0 * kt / step).ceil() as usize + 2;
                let curve = TransmissionCurve::new(
                    (0..n).map(|k| (lo + k as f64 * step, values[k % values.len()])).collect(),
                );
                let s = conductance(&curve, &ThermalSpec { mu: 0.0, temperature: temp }, &c).unwrap();
                let max = values.iter().cloned().fold(0.0, f64::max);
                prop_assert!(s >= -1e-12 && s <= max + 1e-12);
            }
        }
    }
}
