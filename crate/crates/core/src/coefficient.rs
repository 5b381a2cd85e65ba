//! Coefficient presets.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, NodalField, Point};

/// Values below this are set to zero so the support stays compact.
pub const CLIP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude * exp(-|x - center|^2 / (2 width^2))`.
    Gaussian {
        amplitude: f64,
        center: [f64; 2],
        width: f64,
    },
}

impl Coefficient {
    pub fn gaussian(amplitude: f64, center: [f64; 2], width: f64) -> Self {
        Coefficient::Gaussian { amplitude, center, width }
    }

    /// Default bump used by the demos and the acceptance suite.
    pub fn default_bump() -> Self {
        Self::gaussian(1.0, [0.5, 0.5], 0.1)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Coefficient::Zero => true,
            Coefficient::Constant { value } => *value >= 0.0 && value.is_finite(),
            Coefficient::Gaussian { amplitude, center, width } => {
                *amplitude >= 0.0
                    && amplitude.is_finite()
                    && center.iter().all(|c| c.is_finite())
                    && *width > 0.0
                    && width.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid coefficient {self:?}")))
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        match self {
            Coefficient::Zero => 0.0,
            Coefficient::Constant { value } => *value,
            Coefficient::Gaussian { amplitude, center, width } => {
                let r2 = (x.x - center[0]).powi(2) + (x.y - center[1]).powi(2);
                let v = amplitude * (-r2 / (2.0 * width * width)).exp();
                if v < CLIP {
                    0.0
                } else {
                    v
                }
            }
        }
    }

    pub fn to_field(&self, mesh: Arc<Mesh>) -> Result<NodalField> {
        self.validate()?;
        Ok(NodalField::from_fn(mesh, |x| self.eval(x)))
    }
}

/// Nodal coefficient from explicit values, rejecting negative entries.
pub fn from_values(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<NodalField> {
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidInput(format!("coefficient value {v} is not a nonnegative number")));
    }
    NodalField::new(mesh, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;

    #[test]
    fn gaussian_is_clipped_and_peaked() {
        let c = Coefficient::gaussian(2.0, [0.5, 0.5], 0.1);
        assert_eq!(c.eval(&Point::new(0.5, 0.5)), 2.0);
        assert_eq!(c.eval(&Point::new(5.0, 5.0)), 0.0);
        assert!(Coefficient::gaussian(1.0, [0.0, 0.0], 0.0).validate().is_err());
    }

    #[test]
    fn values_must_be_nonnegative() {
        let m = Mesh::uniform(2, 2, Domain::unit_square()).unwrap();
        assert!(from_values(m.clone(), vec![-1.0; 9]).is_err());
        assert!(from_values(m, vec![1.0; 9]).is_ok());
    }

    #[test]
    fn serde_round_trip() {
        let c = Coefficient::default_bump();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<Coefficient>(&s).unwrap(), c);
    }
}
