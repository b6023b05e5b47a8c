use crate::error::{Error, Result};

/// Exponents of the dead-core estimate `(1 - Mδ^{(1+θ)γ})^{1/τ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentPack {
    pub theta: f64,
    pub n: usize,
    /// Set for the constant-coefficient case only.
    pub p: Option<f64>,
    pub p_star: Option<f64>,
    pub gamma: f64,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ExponentPack {
    /// Conjugate exponent used by the identities (2 in the `∇a ≠ 0` case).
    pub fn conjugate(&self) -> f64 {
        self.p_star.unwrap_or(2.0)
    }

    /// Largest violation of `τ = 1 + p*αβ` and `γ = p*(1-β)κ`.
    pub fn identity_defect(&self) -> f64 {
        let ps = self.conjugate();
        let p = self.p.unwrap_or(2.0);
        let kappa = 1.0 / (1.0 + self.theta) - 1.0 / p;
        let d1 = (self.tau - (1.0 + ps * self.alpha * self.beta)).abs();
        let d2 = (self.gamma - ps * (1.0 - self.beta) * kappa).abs();
        d1.max(d2)
    }
}

fn pack(theta: f64, n: usize, p: f64, degenerate: bool) -> ExponentPack {
    let nf = n as f64;
    let kappa = 1.0 / (1.0 + theta) - 1.0 / p;
    let ps = p / (p - 1.0);
    ExponentPack {
        theta,
        n,
        p: degenerate.then_some(p),
        p_star: degenerate.then_some(ps),
        gamma: kappa / (nf * kappa + 1.0),
        tau: nf * ps * kappa + ps,
        alpha: nf * kappa + 1.0,
        beta: (nf * kappa + 1.0 / p) / (nf * kappa + 1.0),
    }
}

/// Exponents for `∇a ≠ 0`; requires `0 < θ < 1`.
pub fn exponents_nondegenerate(theta: f64, n: usize) -> Result<ExponentPack> {
    if !(theta > 0.0) || n < 2 {
        return Err(Error::invalid(format!("need theta > 0 and N >= 2, got {theta}, {n}")));
    }
    if theta >= 1.0 {
        return Err(Error::OutOfRegime(format!("dead-core exponents need theta < 1, got {theta}")));
    }
    Ok(pack(theta, n, 2.0, false))
}

/// Exponents for constant `a`; requires `0 < θ < p - 1`.
pub fn exponents_degenerate(theta: f64, n: usize, p: f64) -> Result<ExponentPack> {
    if !(theta > 0.0 && p > 1.0) || n < 2 {
        return Err(Error::invalid(format!("need theta > 0, p > 1, N >= 2, got {theta}, {p}, {n}")));
    }
    if theta >= p - 1.0 {
        return Err(Error::OutOfRegime(format!("dead-core exponents need theta < p - 1 = {}, got {theta}", p - 1.0)));
    }
    Ok(pack(theta, n, p, true))
}

/// `(1 - M δ^{(1+θ)γ})^{1/τ}`.
pub fn predicted_radius(delta: f64, m: f64, theta: f64, gamma: f64, tau: f64) -> Result<f64> {
    let x = m * delta.powf((1.0 + theta) * gamma);
    if !(x < 1.0) {
        return Err(Error::OutOfRegime(format!("M delta^((1+theta) gamma) = {x:.4} is not below 1")));
    }
    Ok((1.0 - x.max(0.0)).powf(1.0 / tau))
}

/// Least-squares `M` from `(δ, radius)` pairs, fitting `1 - r^τ = M δ^{(1+θ)γ}`.
pub fn fit_m(samples: &[(f64, f64)], theta: f64, gamma: f64, tau: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no (delta, radius) samples".into()));
    }
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(d, r) in samples {
        let x = d.powf((1.0 + theta) * gamma);
        let y = 1.0 - r.clamp(0.0, 1.0).powf(tau);
        sxy += x * y;
        sxx += x * x;
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        let e = exponents_nondegenerate(0.5, 2).unwrap();
        assert!((e.gamma - 0.125).abs() < 1e-15);
        assert!((e.tau - 8.0 / 3.0).abs() < 1e-15);
        assert!((e.alpha - 4.0 / 3.0).abs() < 1e-15);
        assert!((e.beta - 0.625).abs() < 1e-15);
        let d = exponents_degenerate(1.0, 2, 3.0).unwrap();
        assert_eq!(d.p_star, Some(1.5));
        assert!((d.gamma - 0.125).abs() < 1e-15);
        assert!((d.tau - 2.0).abs() < 1e-15);
        assert!((d.alpha - 4.0 / 3.0).abs() < 1e-15);
        assert!((d.beta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn regime_errors() {
        assert!(matches!(exponents_nondegenerate(1.0, 2), Err(Error::OutOfRegime(_))));
        assert!(matches!(exponents_degenerate(2.0, 2, 3.0), Err(Error::OutOfRegime(_))));
        assert!(exponents_nondegenerate(0.5, 1).is_err());
    }

    #[test]
    fn endpoint_limits() {
        let e = exponents_nondegenerate(1.0 - 1e-12, 2).unwrap();
        assert!(e.gamma.abs() < 1e-11 && (e.tau - 2.0).abs() < 1e-11);
    }

    #[test]
    fn radius_formula() {
        let r = predicted_radius(0.01, 1.0, 0.5, 0.125, 8.0 / 3.0).unwrap();
        // 1 - 0.01^{0.1875} = 0.57830..., to the power 3/8 = 0.81434...
        assert!((r - 0.814345).abs() < 1e-6, "{r}");
        assert!(predicted_radius(1e-30, 1.0, 0.5, 0.125, 8.0 / 3.0).unwrap() > 0.99);
        assert!(matches!(predicted_radius(0.5, 2.0, 0.5, 0.125, 8.0 / 3.0), Err(Error::OutOfRegime(_))));
    }

    #[test]
    fn m_fit_recovers_exact_m() {
        let (th, g, t) = (0.5, 0.125, 8.0 / 3.0);
        let s: Vec<(f64, f64)> = [1e-4, 1e-3, 1e-2].iter().map(|&d| (d, predicted_radius(d, 1.7, th, g, t).unwrap())).collect();
        assert!((fit_m(&s, th, g, t).unwrap() - 1.7).abs() < 1e-12);
    }
}
