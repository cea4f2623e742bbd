//! Product ratio and activation free-energy difference.

use crate::error::{ChemError, Result};

/// Gas constant in kcal/(mol K).
pub const GAS_CONSTANT: f64 = 1.987204e-3;
pub const DEFAULT_TEMPERATURE: f64 = 298.15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectivityTarget {
    /// kcal/mol.
    pub ddg: f64,
    /// Kelvin.
    pub temperature: f64,
    /// r_A / r_B.
    pub ratio: f64,
}

impl SelectivityTarget {
    pub fn from_ratio(ratio: f64, temperature: f64) -> Result<Self> {
        Ok(SelectivityTarget {
            ddg: ratio_to_ddg(ratio, temperature)?,
            temperature,
            ratio,
        })
    }

    pub fn from_ddg(ddg: f64, temperature: f64) -> Result<Self> {
        Ok(SelectivityTarget {
            ddg,
            temperature,
            ratio: ddg_to_ratio(ddg, temperature)?,
        })
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(ChemError::Selectivity(format!("temperature must be positive, got {t}")))
    }
}

/// `R T ln(ratio)`.
pub fn ratio_to_ddg(ratio: f64, temperature: f64) -> Result<f64> {
    check_temperature(temperature)?;
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(ChemError::Selectivity(format!("ratio must be positive, got {ratio}")));
    }
    Ok(GAS_CONSTANT * temperature * ratio.ln())
}

/// `exp(ddg / (R T))`.
pub fn ddg_to_ratio(ddg: f64, temperature: f64) -> Result<f64> {
    check_temperature(temperature)?;
    if !ddg.is_finite() {
        return Err(ChemError::Selectivity(format!("energy must be finite, got {ddg}")));
    }
    Ok((ddg / (GAS_CONSTANT * temperature)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ratio_is_zero() {
        for t in [100.0, 298.15, 400.0] {
            assert_eq!(ratio_to_ddg(1.0, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn ratio_e_gives_rt() {
        let rt = ratio_to_ddg(std::f64::consts::E, 298.15).unwrap();
        // 1.987204e-3 * 298.15 = 0.5924848...
        assert!((rt - 0.592_484_87).abs() < 1e-8, "{rt}");
    }

    #[test]
    fn invalid_inputs() {
        assert!(ratio_to_ddg(0.0, 298.15).is_err());
        assert!(ratio_to_ddg(-1.0, 298.15).is_err());
        assert!(ratio_to_ddg(2.0, 0.0).is_err());
        assert!(ddg_to_ratio(1.0, -5.0).is_err());
    }
}
