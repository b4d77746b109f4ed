use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kinematic regime of a collision model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Classical,
    Relativistic,
}

/// An angular factor `F(theta)` tabulated at equispaced angles on `[0, pi]`,
/// linearly interpolated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularTable {
    values: Vec<f64>,
}

impl AngularTable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Config("angular table needs at least two samples".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("angular table must be finite and nonnegative".into()));
        }
        Ok(AngularTable { values })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(vec![c, c])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let m = self.values.len() - 1;
        let s = (theta.clamp(0.0, std::f64::consts::PI) / std::f64::consts::PI) * m as f64;
        let i = (s.floor() as usize).min(m - 1);
        let t = s - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

/// Collision model selector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum KernelSpec {
    /// `B = n . (v - w)` on the hemisphere where it is nonnegative.
    ClassicalHardSphere,
    /// Relativistic hard spheres: constant cross section `sigma0`.
    RelativisticConstantSigma { sigma0: f64 },
    /// Relativistic Maxwellian molecules, `sigma = g^-1 (1 + g^2)^(1/2) F(theta)`.
    RelativisticMaxwellian { angular: AngularTable },
}

impl KernelSpec {
    pub fn constant_sigma(sigma0: f64) -> Result<Self> {
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::Config(format!("cross section must be positive, got {sigma0}")));
        }
        Ok(KernelSpec::RelativisticConstantSigma { sigma0 })
    }

    pub fn maxwellian(angular: AngularTable) -> Self {
        KernelSpec::RelativisticMaxwellian { angular }
    }

    pub fn regime(&self) -> Regime {
        match self {
            KernelSpec::ClassicalHardSphere => Regime::Classical,
            _ => Regime::Relativistic,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::ClassicalHardSphere => "classical-hard-sphere",
            KernelSpec::RelativisticConstantSigma { .. } => "relativistic-constant-sigma",
            KernelSpec::RelativisticMaxwellian { .. } => "relativistic-maxwellian",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::RelativisticConstantSigma { sigma0 } if !(*sigma0 > 0.0) => {
                Err(Error::Config(format!("cross section must be positive, got {sigma0}")))
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn require(&self, regime: Regime) -> Result<()> {
        if self.regime() == regime {
            Ok(())
        } else {
            Err(Error::WrongRegime {
                kernel: self.name(),
                expected: match regime {
                    Regime::Classical => "classical",
                    Regime::Relativistic => "relativistic",
                },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_interpolates() {
        let t = AngularTable::new(vec![0.0, 1.0, 4.0]).unwrap();
        assert_eq!(t.eval(0.0), 0.0);
        assert_eq!(t.eval(std::f64::consts::PI), 4.0);
        assert!((t.eval(std::f64::consts::FRAC_PI_4) - 0.5).abs() < 1e-15);
        assert!(AngularTable::new(vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn sigma_must_be_positive() {
        assert!(KernelSpec::constant_sigma(0.0).is_err());
        assert!(KernelSpec::constant_sigma(1.0).is_ok());
        assert_eq!(KernelSpec::ClassicalHardSphere.regime(), Regime::Classical);
    }
}
