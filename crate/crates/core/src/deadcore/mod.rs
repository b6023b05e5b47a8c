//! Coincidence sets, the exponents of the dead-core estimate, radial energy
//! profiles of the absorption problem, and scaling fits.

mod exponents;
mod profile;

pub use exponents::{exponents_degenerate, exponents_nondegenerate, fit_m, predicted_radius, ExponentPack};
pub use profile::{deadcore_radius, energy_profile, pointwise_core_radius, EnergyProfile};

use crate::error::{Error, Result};
use crate::mesh::ScalarField;

#[derive(Clone, Debug)]
pub struct CoincidenceReport {
    pub tau_c: f64,
    /// Vertices with `a - u ≤ τ_c`.
    pub mask: Vec<bool>,
    /// Lumped-mass measure of the mask.
    pub measure: f64,
    /// `W = sup{dist(x, ∂Ω) : a - u > τ_c}`.
    pub width: f64,
    /// `min (a - u)` over `Ω_κ`, with `κ = interior_kappa`.
    pub min_interior_gap: f64,
    pub interior_kappa: f64,
}

impl CoincidenceReport {
    pub fn is_empty(&self) -> bool {
        self.measure == 0.0 && self.min_interior_gap > self.tau_c
    }
}

/// Coincidence report of `u` below `a`.
pub fn detect_coincidence(u: &ScalarField, a: &ScalarField, tau_c: f64) -> Result<CoincidenceReport> {
    if !u.same_mesh(a) {
        return Err(Error::invalid("fields live on different meshes"));
    }
    let gap: Vec<f64> = a.values().iter().zip(u.values()).map(|(a, u)| a - u).collect();
    detect_coincidence_gap(&ScalarField::new(u.mesh().clone(), gap)?, tau_c)
}

/// As [`detect_coincidence`] from the gap `a - u` directly, which avoids the
/// cancellation in forming it.
pub fn detect_coincidence_gap(gap: &ScalarField, tau_c: f64) -> Result<CoincidenceReport> {
    if !(tau_c >= 0.0) {
        return Err(Error::invalid(format!("tau_c must be nonnegative, got {tau_c}")));
    }
    let m = gap.mesh();
    let g = gap.values();
    let mask: Vec<bool> = g.iter().map(|&v| v <= tau_c).collect();
    let mass = m.lumped_mass();
    let measure = (0..g.len()).filter(|&i| mask[i]).fold(0.0, |s, i| s + mass[i]);
    let width = (0..g.len()).filter(|&i| !mask[i]).map(|i| m.dist_to_boundary(i)).fold(0.0, f64::max);
    let kappa = 0.1 * m.diameter();
    let min_interior_gap = (0..g.len())
        .filter(|&i| m.dist_to_boundary(i) >= kappa)
        .map(|i| g[i])
        .fold(f64::INFINITY, f64::min);
    Ok(CoincidenceReport { tau_c, mask, measure, width, min_interior_gap, interior_kappa: kappa })
}

#[derive(Clone, Debug)]
pub struct HarnackReport {
    pub kappa: f64,
    pub min: f64,
    pub pass: bool,
}

/// Strict positivity `min_{Ω_κ} v > τ_c`.
pub fn harnack_positivity_check(v: &ScalarField, kappa: f64, tau_c: f64) -> HarnackReport {
    let m = v.mesh();
    let min = (0..m.n_vertices())
        .filter(|&i| m.dist_to_boundary(i) >= kappa)
        .map(|i| v.values()[i])
        .fold(f64::INFINITY, f64::min);
    HarnackReport { kappa, min, pass: min > tau_c }
}

#[derive(Clone, Debug)]
pub struct ScalingFit {
    /// Samples that entered the regression.
    pub samples: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares `log W = slope · log ε + intercept` over all samples.
pub fn fit_scaling(samples: &[(f64, f64)]) -> Result<ScalingFit> {
    fit_scaling_resolved(samples, 0.0)
}

/// As [`fit_scaling`], keeping only layers wider than `min_width`
/// (two mesh spacings in practice).
pub fn fit_scaling_resolved(samples: &[(f64, f64)], min_width: f64) -> Result<ScalingFit> {
    let used: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(e, w)| e > 0.0 && w > 0.0 && w >= min_width && e.is_finite() && w.is_finite())
        .collect();
    if used.len() < 4 {
        return Err(Error::InsufficientData(format!("{} resolved samples, need at least 4", used.len())));
    }
    let lo = used.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = used.iter().map(|s| s.0).fold(0.0, f64::max);
    if (hi / lo).log10() < 1.5 - 1e-12 {
        return Err(Error::InsufficientData(format!("samples span {:.2} decades, need 1.5", (hi / lo).log10())));
    }
    let xs: Vec<f64> = used.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|s| s.1.ln()).collect();
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Ok(ScalingFit { samples: used, slope, intercept, r2 })
}

pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { slope * sxy / syy };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rect_mesh;
    use std::sync::Arc;

    #[test]
    fn coincidence_extremes() {
        let m = Arc::new(build_rect_mesh(1.0, 1.0, 10, 10).unwrap());
        let a = ScalarField::from_fn(m.clone(), |x| 1.0 + 0.1 * x[0]).unwrap();
        let full = detect_coincidence(&a, &a, 1e-6).unwrap();
        assert!(full.mask.iter().all(|&b| b));
        assert_eq!(full.width, 0.0);
        assert!((full.measure - 1.0).abs() < 1e-12);

        let tau = 1e-6;
        let shifted = ScalarField::new(m.clone(), a.values().iter().map(|v| v - 2.0 * tau).collect()).unwrap();
        let none = detect_coincidence(&shifted, &a, tau).unwrap();
        assert_eq!(none.measure, 0.0);
        assert_eq!(none.width, m.max_interior_distance());
        assert!(none.is_empty());
    }

    #[test]
    fn harnack_on_constant() {
        let m = Arc::new(build_rect_mesh(1.0, 1.0, 6, 6).unwrap());
        let one = ScalarField::constant(m, 1.0);
        assert!(harnack_positivity_check(&one, 0.1, 1e-6).pass);
    }

    #[test]
    fn exact_power_law_fit() {
        let s: Vec<(f64, f64)> = [1e-4, 1e-3, 1e-2, 3e-2, 1e-1].iter().map(|&e: &f64| (e, 3.0 * e.sqrt())).collect();
        let f = fit_scaling(&s).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-10);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_needs_data() {
        let few = [(1e-3, 0.1), (1e-2, 0.3), (1e-1, 0.9)];
        assert!(matches!(fit_scaling(&few), Err(Error::InsufficientData(_))));
        let narrow: Vec<(f64, f64)> = (0..6).map(|k| (1e-3 * (1.0 + k as f64), 0.1)).collect();
        assert!(matches!(fit_scaling(&narrow), Err(Error::InsufficientData(_))));
        let s = [(1e-4, 0.001), (1e-3, 0.05), (1e-2, 0.15), (3e-2, 0.3), (1e-1, 0.5)];
        assert!(matches!(fit_scaling_resolved(&s, 0.1), Err(Error::InsufficientData(_))));
    }
}
