//! Lumped series impedance of a whole via from per-unit-length solves.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::filament::{discretize_filaments, sweep_frequency, ImpedanceTable};
use crate::error::{Error, Result};
use crate::model::{build_cross_section, CrossSection, MaskOptions, MaterialDb, ViaGeometry};

/// Total impedance (Ω) per frequency: every via segment and every connection
/// and metallization sub-layer contributes `Z'(f) · length` in series.
/// Sub-layers use the via's top cross-section.
pub fn via_impedance(
    geometry: &ViaGeometry,
    materials: &MaterialDb,
    frequencies: &[f64],
    mask: &MaskOptions,
    reference_radius: f64,
) -> Result<Vec<Complex64>> {
    let top = match &geometry.via_cross_section {
        CrossSection::Circle { radius } => 2.0 * radius,
        _ => {
            return Err(Error::Input(
                "lumped via impedance supports round vias only".into(),
            ))
        }
    };
    let mut pieces: Vec<(f64, String, f64)> = geometry
        .segments
        .iter()
        .map(|s| (s.diameter, s.material.clone(), s.length))
        .collect();
    for s in geometry.connection.iter().chain(&geometry.metallization) {
        pieces.push((top, s.material.clone(), s.thickness));
    }
    // identical cross-sections share one sweep
    let mut cache: BTreeMap<(u64, String), ImpedanceTable> = BTreeMap::new();
    let mut total = vec![Complex64::new(0.0, 0.0); frequencies.len()];
    for (d, material, len) in pieces {
        let key = (d.to_bits(), material.clone());
        if !cache.contains_key(&key) {
            let sigma = materials.get(&material)?.conductivity;
            let m = build_cross_section(&CrossSection::circle_diameter(d), mask)?;
            let sys = discretize_filaments(&m, &[sigma], reference_radius)?;
            cache.insert(key.clone(), sweep_frequency(&sys, frequencies)?);
        }
        let t = &cache[&key];
        for (k, z) in total.iter_mut().enumerate() {
            *z += t.impedance[k][0].expect("group 0 is driven") * len;
        }
    }
    Ok(total)
}
