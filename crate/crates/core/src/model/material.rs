use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bulk material properties, SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// S/m; zero for insulators.
    pub conductivity: f64,
    pub relative_permittivity: f64,
    /// W/(m·K)
    pub thermal_conductivity: f64,
    /// J/(m³·K)
    pub heat_capacity: f64,
}

impl Material {
    pub fn new(
        name: impl Into<String>,
        conductivity: f64,
        relative_permittivity: f64,
        thermal_conductivity: f64,
        heat_capacity: f64,
    ) -> Result<Self> {
        let m = Material {
            name: name.into(),
            conductivity,
            relative_permittivity,
            thermal_conductivity,
            heat_capacity,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("relative_permittivity", self.relative_permittivity),
            ("thermal_conductivity", self.thermal_conductivity),
            ("heat_capacity", self.heat_capacity),
        ];
        for (what, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Input(format!(
                    "material `{}`: {what} must be > 0 (got {v})",
                    self.name
                )));
            }
        }
        if !(self.conductivity >= 0.0 && self.conductivity.is_finite()) {
            return Err(Error::Input(format!(
                "material `{}`: conductivity must be >= 0 (got {})",
                self.name, self.conductivity
            )));
        }
        Ok(())
    }

    /// Charge relaxation ratio σ/ε used for coupling conductance.
    pub fn sigma_over_eps(&self) -> f64 {
        self.conductivity / (self.relative_permittivity * crate::EPS0)
    }
}

/// Named material table. Iteration order is alphabetical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialDb {
    materials: BTreeMap<String, Material>,
}

impl Default for MaterialDb {
    fn default() -> Self {
        Self::builtin()
    }
}

impl MaterialDb {
    pub fn empty() -> Self {
        Self {
            materials: BTreeMap::new(),
        }
    }

    /// Handbook values: copper, tungsten, silicon, silicon dioxide.
    pub fn builtin() -> Self {
        let mut db = Self::empty();
        let entries = [
            ("copper", 5.8e7, 1.0, 400.0, 3.45e6),
            ("tungsten", 1.8e7, 1.0, 173.0, 2.58e6),
            ("silicon", 0.0, 11.7, 148.0, 1.66e6),
            ("sio2", 0.0, 3.9, 1.4, 1.65e6),
            ("vacuum", 0.0, 1.0, 0.026, 1.2e3),
        ];
        for (name, s, e, k, c) in entries {
            db.insert(Material::new(name, s, e, k, c).expect("builtin material"));
        }
        db
    }

    pub fn insert(&mut self, m: Material) {
        self.materials.insert(m.name.clone(), m);
    }

    pub fn get(&self, name: &str) -> Result<&Material> {
        self.materials
            .get(name)
            .ok_or_else(|| Error::Reference(format!("material `{name}` is not defined")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.materials.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Material> {
        self.materials.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values() {
        let db = MaterialDb::builtin();
        assert_eq!(db.get("copper").unwrap().conductivity, 5.8e7);
        assert_eq!(db.get("tungsten").unwrap().thermal_conductivity, 173.0);
        assert_eq!(db.get("silicon").unwrap().conductivity, 0.0);
        assert_eq!(db.get("sio2").unwrap().relative_permittivity, 3.9);
        assert!(db.get("unobtainium").is_err());
    }

    #[test]
    fn validation() {
        assert!(Material::new("x", 0.0, 1.0, 1.0, 1.0).is_ok());
        assert!(Material::new("x", -1.0, 1.0, 1.0, 1.0).is_err());
        assert!(Material::new("x", 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(Material::new("x", 1.0, 1.0, f64::NAN, 1.0).is_err());
    }
}
