use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EnergyError;

/// Grid carbon intensity per region code, in gCO2/kWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CarbonIntensityTable(BTreeMap<String, f64>);

impl Default for CarbonIntensityTable {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        m.insert("GR".to_string(), 430.0);
        m.insert("CN".to_string(), 650.0);
        m.insert("DE".to_string(), 380.0);
        Self(m)
    }
}

impl CarbonIntensityTable {
    pub fn empty() -> Self {
        Self(BTreeMap::new())
    }

    pub fn set(&mut self, region: &str, g_per_kwh: f64) -> Result<(), EnergyError> {
        if !(g_per_kwh > 0.0 && g_per_kwh.is_finite()) {
            return Err(EnergyError::InvalidIntensity(g_per_kwh));
        }
        self.0.insert(region.to_ascii_uppercase(), g_per_kwh);
        Ok(())
    }

    pub fn intensity(&self, region: &str) -> Result<f64, EnergyError> {
        self.0
            .get(&region.to_ascii_uppercase())
            .copied()
            .ok_or_else(|| EnergyError::UnknownRegion(region.to_string()))
    }

    pub fn regions(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Reject tables with non-positive entries (e.g. after deserializing).
    pub fn validate(&self) -> Result<(), EnergyError> {
        for (_, v) in self.regions() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EnergyError::InvalidIntensity(v));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let t = CarbonIntensityTable::default();
        assert_eq!(t.intensity("GR").unwrap(), 430.0);
        assert_eq!(t.intensity("cn").unwrap(), 650.0);
        assert_eq!(t.intensity("DE").unwrap(), 380.0);
        assert!(matches!(t.intensity("XX"), Err(EnergyError::UnknownRegion(_))));
    }

    #[test]
    fn rejects_non_positive() {
        let mut t = CarbonIntensityTable::empty();
        assert!(t.set("FR", 0.0).is_err());
        assert!(t.set("FR", -1.0).is_err());
        t.set("fr", 56.0).unwrap();
        assert_eq!(t.intensity("FR").unwrap(), 56.0);
    }
}
