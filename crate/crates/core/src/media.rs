//! Physical parameters of the cell model and the complex admittivities derived from them.
//!
//! All frequencies are angular frequencies in rad/s. The membrane thickness
//! `delta` is expressed in the length unit of whatever geometry it is paired
//! with; callers rescale it together with the geometry.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Vacuum permittivity used by the reference parameter set [F/m].
pub const VACUUM_PERMITTIVITY: f64 = 8.85e-12;

/// Conductivities and permittivities of the medium/cytoplasm and of the thin membrane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembraneModel {
    /// Conductivity of medium and cytoplasm [S/m].
    pub sigma0: f64,
    /// Permittivity of medium and cytoplasm [F/m].
    pub eps0: f64,
    /// Membrane conductivity [S/m].
    pub sigma_m: f64,
    /// Membrane permittivity [F/m].
    pub eps_m: f64,
    /// Membrane thickness in geometry length units.
    pub delta: f64,
}

impl MembraneModel {
    pub fn new(sigma0: f64, eps0: f64, sigma_m: f64, eps_m: f64, delta: f64) -> Result<Self> {
        let model = Self {
            sigma0,
            eps0,
            sigma_m,
            eps_m,
            delta,
        };
        model.validate()?;
        Ok(model)
    }

    /// Eukaryotic cell suspension: sigma0 = 0.5 S/m, eps0 = 90 eps_vac,
    /// sigma_m = 1e-8 S/m, eps_m = 3.5 eps_vac.
    pub fn eukaryote(delta: f64) -> Result<Self> {
        Self::new(
            0.5,
            90.0 * VACUUM_PERMITTIVITY,
            1e-8,
            3.5 * VACUUM_PERMITTIVITY,
            delta,
        )
    }

    /// Same membrane, background normalised to sigma0 = 1 and eps0 = 0.
    pub fn normalized_background(&self) -> Self {
        Self {
            sigma0: 1.0,
            eps0: 0.0,
            ..*self
        }
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.sigma0, self.eps0, self.sigma_m, self.eps_m, self.delta]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return invalid("membrane model has non-finite entries");
        }
        if self.sigma0 <= 0.0 {
            return invalid(format!("sigma0 must be positive, got {}", self.sigma0));
        }
        if self.eps0 < 0.0 {
            return invalid(format!("eps0 must be non-negative, got {}", self.eps0));
        }
        if self.sigma_m <= 0.0 {
            return invalid(format!("sigma_m must be positive, got {}", self.sigma_m));
        }
        if self.eps_m < 0.0 {
            return invalid(format!("eps_m must be non-negative, got {}", self.eps_m));
        }
        if self.delta <= 0.0 {
            return invalid(format!("delta must be positive, got {}", self.delta));
        }
        Ok(())
    }

    /// k0 = sigma0 + i omega eps0.
    pub fn admittivity_k0(&self, omega: f64) -> Complex64 {
        Complex64::new(self.sigma0, omega * self.eps0)
    }

    /// k_m = sigma_m + i omega eps_m.
    pub fn admittivity_km(&self, omega: f64) -> Complex64 {
        Complex64::new(self.sigma_m, omega * self.eps_m)
    }

    /// beta = delta / k_m.
    pub fn beta(&self, omega: f64) -> Result<Complex64> {
        let denom = self.sigma_m * self.sigma_m + omega * omega * self.eps_m * self.eps_m;
        if denom == 0.0 {
            return Err(Error::DegenerateMembrane);
        }
        Ok(Complex64::new(
            self.delta * self.sigma_m / denom,
            -self.delta * omega * self.eps_m / denom,
        ))
    }

    /// Coercivity constant Re(beta k0) = delta (sigma0 sigma_m + omega^2 eps0 eps_m) / |k_m|^2.
    pub fn beta_prime(&self, omega: f64) -> Result<f64> {
        let denom = self.sigma_m * self.sigma_m + omega * omega * self.eps_m * self.eps_m;
        if denom == 0.0 {
            return Err(Error::DegenerateMembrane);
        }
        Ok(self.delta * (self.sigma0 * self.sigma_m + omega * omega * self.eps0 * self.eps_m) / denom)
    }

    /// The product beta k0 that multiplies the hypersingular operator.
    pub fn beta_k0(&self, omega: f64) -> Result<Complex64> {
        Ok(self.beta(omega)? * self.admittivity_k0(omega))
    }
}

/// Strictly increasing list of positive angular frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return invalid("frequency grid is empty");
        }
        if omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return invalid("frequencies must be finite and positive");
        }
        if omegas.windows(2).any(|p| p[1] <= p[0]) {
            return invalid("frequencies must be strictly increasing");
        }
        Ok(Self { omegas })
    }

    pub fn log_spaced(omega_min: f64, omega_max: f64, points: usize) -> Result<Self> {
        if points == 0 {
            return invalid("frequency grid needs at least one point");
        }
        if !(omega_min > 0.0 && omega_max > omega_min && omega_max.is_finite()) {
            return invalid(format!(
                "need 0 < omega_min < omega_max, got [{omega_min}, {omega_max}]"
            ));
        }
        if points == 1 {
            return Self::new(vec![omega_min]);
        }
        let (a, b) = (omega_min.ln(), omega_max.ln());
        let step = (b - a) / (points - 1) as f64;
        let mut omegas: Vec<f64> = (0..points).map(|k| (a + step * k as f64).exp()).collect();
        omegas[0] = omega_min;
        omegas[points - 1] = omega_max;
        Self::new(omegas)
    }

    /// 200 log-spaced points over [1e4, 1e9] rad/s.
    pub fn default_sweep() -> Self {
        Self::log_spaced(1e4, 1e9, 200).expect("static grid is valid")
    }

    /// Inserts `points` extra log-spaced samples within a factor `span` of each centre.
    pub fn densified_around(&self, centers: &[f64], span: f64, points: usize) -> Result<Self> {
        if !(span > 1.0) {
            return invalid("densification span must exceed 1");
        }
        let mut all = self.omegas.clone();
        for &c in centers {
            if !(c > 0.0 && c.is_finite()) {
                return invalid("densification centre must be positive");
            }
            if points > 1 {
                let (a, b) = ((c / span).ln(), (c * span).ln());
                all.extend((0..points).map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp()));
            }
        }
        all.sort_by(|x, y| x.total_cmp(y));
        all.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs());
        Self::new(all)
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.omegas[0]
    }

    pub fn max(&self) -> f64 {
        self.omegas[self.omegas.len() - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn k0_examples() {
        let m = MembraneModel::new(0.5, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(m.admittivity_k0(1e6), Complex64::new(0.5, 0.0));

        let m = MembraneModel::new(0.5, 90.0 * 8.85e-12, 1.0, 1.0, 1.0).unwrap();
        let k0 = m.admittivity_k0(1e6);
        assert_eq!(k0.re, 0.5);
        assert!(close(k0.im, 7.965e-4, 1e-12));

        let m = MembraneModel::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(m.admittivity_k0(1.0), Complex64::new(1.0, 1.0));
    }

    #[test]
    fn beta_examples() {
        let m = MembraneModel::new(1.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        for w in [1.0, 1e3, 1e9] {
            assert_eq!(m.beta(w).unwrap(), Complex64::new(1.0, 0.0));
        }
        let m = MembraneModel::new(1.0, 0.0, 1.0, 1.0, 2.0).unwrap();
        let b = m.beta(1.0).unwrap();
        assert!((b - Complex64::new(1.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn beta_reference_parameters() {
        // delta/(sigma_m + i w eps_m) evaluated by hand at w = 1e7:
        // |k_m|^2 = 1e-16 + (1e7 * 3.0975e-11)^2 = 9.59450625e-8
        let m = MembraneModel::eukaryote(0.7e-3).unwrap();
        let b = m.beta(1e7).unwrap();
        let denom = 1e-16 + 9.594_506_25e-8;
        assert!(close(b.re, 0.7e-3 * 1e-8 / denom, 1e-12));
        assert!(close(b.im, -0.7e-3 * 1e7 * 3.0975e-11 / denom, 1e-12));
        assert!(close(b.im, -2.259_887_003_294, 1e-11));
    }

    #[test]
    fn degenerate_membrane_is_rejected() {
        let m = MembraneModel {
            sigma0: 1.0,
            eps0: 0.0,
            sigma_m: 0.0,
            eps_m: 0.0,
            delta: 1.0,
        };
        assert_eq!(m.beta(1.0), Err(Error::DegenerateMembrane));
        assert_eq!(m.beta_prime(1.0), Err(Error::DegenerateMembrane));
        assert!(m.validate().is_err());
    }

    #[test]
    fn beta_prime_examples() {
        let m = MembraneModel::new(1.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(m.beta_prime(3.0).unwrap(), 1.0);
        let m = MembraneModel::new(1.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(m.beta_prime(3.0).unwrap(), 1.0);
        let m = MembraneModel::eukaryote(0.7e-3).unwrap();
        let bp = m.beta_prime(1e6).unwrap();
        assert!(bp > 0.0);
        assert!(close(bp, m.beta_k0(1e6).unwrap().re, 1e-12));
    }

    #[test]
    fn beta_limits() {
        let m = MembraneModel::eukaryote(0.7e-3).unwrap();
        let low = m.beta(1e-6).unwrap();
        assert!(close(low.re, m.delta / m.sigma_m, 1e-9));
        let corner = 10.0 * m.sigma_m / m.eps_m;
        let mut prev = f64::INFINITY;
        for k in 0..60 {
            let w = corner * 10f64.powf(k as f64 / 6.0);
            let mag = m.beta(w).unwrap().norm();
            assert!(mag < prev);
            prev = mag;
            if k > 12 {
                assert!(close(mag * w * m.eps_m / m.delta, 1.0, 1e-3));
            }
        }
    }

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(vec![]).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![-1.0, 1.0]).is_err());
        assert!(FrequencyGrid::log_spaced(1e4, 1e9, 0).is_err());
        let g = FrequencyGrid::default_sweep();
        assert_eq!(g.len(), 200);
        assert_eq!(g.min(), 1e4);
        assert_eq!(g.max(), 1e9);
        let d = g.densified_around(&[1.8e7], 1.5, 21).unwrap();
        assert!(d.len() > 200 && d.len() <= 221);
        assert!(d.omegas().windows(2).all(|p| p[1] > p[0]));
    }

    proptest! {
        #[test]
        fn beta_prime_positive(
            s0 in 1e-3f64..10.0, e0 in 0.0f64..1e-9, sm in 1e-10f64..1.0,
            em in 0.0f64..1e-10, d in 1e-6f64..1e-2, lw in 3.0f64..10.0,
        ) {
            let m = MembraneModel::new(s0, e0, sm, em, d).unwrap();
            let w = 10f64.powf(lw);
            let bp = m.beta_prime(w).unwrap();
            prop_assert!(bp > 0.0);
            let re = m.beta_k0(w).unwrap().re;
            prop_assert!((bp - re).abs() <= 1e-12 * bp.abs());
        }
    }
}
