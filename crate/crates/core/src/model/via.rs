//! Single-via geometry at three levels of detail.
//!
//! Level 1 is a uniform prism with one homogeneous connection region and one
//! homogeneous metallization region. Level 2 splits the via into tapered
//! sub-segments and each region into two sub-layers. Level 3 doubles the via
//! segments again and uses the full metallization and connection stacks.
//! Every level only splits the boundaries of the level below.

use serde::{Deserialize, Serialize};

use super::cross_section::CrossSection;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sublayer {
    pub thickness: f64,
    pub material: String,
}

impl Sublayer {
    pub fn new(thickness: f64, material: impl Into<String>) -> Self {
        Self {
            thickness,
            material: material.into(),
        }
    }
}

/// Vertical prism piece of the via body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViaSegment {
    pub length: f64,
    pub diameter: f64,
    pub material: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViaParams {
    pub diameter: f64,
    /// Bottom diameter of a tapered via; levels 2 and 3 only.
    pub bottom_diameter: Option<f64>,
    pub length: f64,
    pub material: String,
    /// Number of body segments at level 2.
    pub taper_segments: usize,
    /// Connection region to the next die, top to bottom.
    pub connection: Vec<Sublayer>,
    /// Metallization on top of the substrate, top to bottom.
    pub metallization: Vec<Sublayer>,
}

impl ViaParams {
    pub fn uniform(diameter: f64, length: f64, material: &str) -> Self {
        Self {
            diameter,
            bottom_diameter: None,
            length,
            material: material.to_string(),
            taper_segments: 2,
            connection: vec![Sublayer::new(5e-6, material)],
            metallization: vec![Sublayer::new(2e-6, material)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViaGeometry {
    pub detail_level: u8,
    /// Cross-section at the top of the via.
    pub via_cross_section: CrossSection,
    pub segments: Vec<ViaSegment>,
    pub connection: Vec<Sublayer>,
    pub metallization: Vec<Sublayer>,
}

impl ViaGeometry {
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub fn total_height(&self) -> f64 {
        self.length()
            + self.connection.iter().map(|s| s.thickness).sum::<f64>()
            + self.metallization.iter().map(|s| s.thickness).sum::<f64>()
    }

    /// True if every boundary of `coarser` appears here and this model has
    /// strictly more pieces.
    pub fn refines(&self, coarser: &ViaGeometry) -> bool {
        let seg = |g: &ViaGeometry| g.segments.iter().map(|s| s.length).collect::<Vec<_>>();
        let th = |v: &[Sublayer]| v.iter().map(|s| s.thickness).collect::<Vec<_>>();
        let pieces = |g: &ViaGeometry| g.segments.len() + g.connection.len() + g.metallization.len();
        splits(&seg(coarser), &seg(self))
            && splits(&th(&coarser.connection), &th(&self.connection))
            && splits(&th(&coarser.metallization), &th(&self.metallization))
            && pieces(self) > pieces(coarser)
    }
}

fn cumulative(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

fn splits(coarse: &[f64], fine: &[f64]) -> bool {
    let cf = cumulative(fine);
    let total = cf.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    cumulative(coarse)
        .iter()
        .all(|b| cf.iter().any(|f| (f - b).abs() <= 1e-9 * total))
}

fn merge(layers: &[Sublayer]) -> Sublayer {
    let thickness = layers.iter().map(|s| s.thickness).sum();
    // homogeneous stand-in takes the material of the thickest sub-layer
    let material = layers
        .iter()
        .fold(None::<&Sublayer>, |best, s| match best {
            Some(b) if b.thickness >= s.thickness => Some(b),
            _ => Some(s),
        })
        .map(|s| s.material.clone())
        .unwrap_or_default();
    Sublayer {
        thickness,
        material,
    }
}

fn split_two(layers: &[Sublayer]) -> Vec<Sublayer> {
    if layers.len() == 1 {
        let s = &layers[0];
        vec![
            Sublayer::new(0.5 * s.thickness, s.material.clone()),
            Sublayer::new(0.5 * s.thickness, s.material.clone()),
        ]
    } else {
        vec![layers[0].clone(), merge(&layers[1..])]
    }
}

fn full_stack(layers: &[Sublayer]) -> Vec<Sublayer> {
    if layers.len() == 1 {
        split_two(layers)
    } else {
        layers.to_vec()
    }
}

fn body(p: &ViaParams, n: usize) -> Vec<ViaSegment> {
    let bottom = p.bottom_diameter.unwrap_or(p.diameter);
    (0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) / n as f64;
            ViaSegment {
                length: p.length / n as f64,
                diameter: p.diameter + t * (bottom - p.diameter),
                material: p.material.clone(),
            }
        })
        .collect()
}

fn check_layers(what: &str, layers: &[Sublayer]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::config(format!("via model needs at least one {what} sub-layer")));
    }
    for s in layers {
        if !(s.thickness > 0.0) {
            return Err(Error::config(format!(
                "{what} sub-layer thickness must be > 0 (got {})",
                s.thickness
            )));
        }
    }
    Ok(())
}

pub fn via_detail_model(level: u8, p: &ViaParams) -> Result<ViaGeometry> {
    if !(1..=3).contains(&level) {
        return Err(Error::config(format!("detail level must be 1, 2 or 3 (got {level})")));
    }
    if !(p.diameter > 0.0) || !(p.length > 0.0) {
        return Err(Error::config("via model needs positive `diameter` and `length`"));
    }
    if let Some(b) = p.bottom_diameter {
        if !(b > 0.0) {
            return Err(Error::config("`bottom_diameter` must be > 0"));
        }
    }
    check_layers("connection", &p.connection)?;
    check_layers("metallization", &p.metallization)?;
    let taper = p.taper_segments.max(2);
    let (segments, connection, metallization) = match level {
        1 => {
            let d = 0.5 * (p.diameter + p.bottom_diameter.unwrap_or(p.diameter));
            (
                vec![ViaSegment {
                    length: p.length,
                    diameter: d,
                    material: p.material.clone(),
                }],
                vec![merge(&p.connection)],
                vec![merge(&p.metallization)],
            )
        }
        2 => (
            body(p, taper),
            split_two(&p.connection),
            split_two(&p.metallization),
        ),
        _ => {
            if p.metallization.len() < 2 {
                return Err(Error::config(
                    "detail level 3 needs an explicit metallization stack with >= 2 sub-layers",
                ));
            }
            (
                body(p, 2 * taper),
                full_stack(&p.connection),
                full_stack(&p.metallization),
            )
        }
    };
    Ok(ViaGeometry {
        detail_level: level,
        via_cross_section: CrossSection::circle_diameter(p.diameter),
        segments,
        connection,
        metallization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const UM: f64 = 1e-6;

    fn params() -> ViaParams {
        let mut p = ViaParams::uniform(10.0 * UM, 50.0 * UM, "copper");
        p.bottom_diameter = Some(8.0 * UM);
        p.metallization = vec![
            Sublayer::new(0.5 * UM, "copper"),
            Sublayer::new(0.3 * UM, "tungsten"),
            Sublayer::new(1.0 * UM, "copper"),
        ];
        p
    }

    #[test]
    fn level1_is_homogeneous() {
        let p = ViaParams::uniform(10.0 * UM, 50.0 * UM, "copper");
        let g = via_detail_model(1, &p).unwrap();
        assert_eq!(g.segments.len(), 1);
        assert_eq!(g.connection.len(), 1);
        assert_eq!(g.metallization.len(), 1);
        assert!((g.length() - 50.0 * UM).abs() < 1e-18);
    }

    #[test]
    fn level2_tapers() {
        let g = via_detail_model(2, &params()).unwrap();
        assert!(g.segments.len() >= 2);
        assert!(g.segments[0].diameter > g.segments.last().unwrap().diameter);
        assert!(g.connection.len() >= 2 && g.metallization.len() >= 2);
    }

    #[test]
    fn level3_keeps_metallization_stack() {
        let g = via_detail_model(3, &params()).unwrap();
        assert_eq!(g.metallization.len(), 3);
    }

    #[test]
    fn levels_refine() {
        let p = params();
        let l1 = via_detail_model(1, &p).unwrap();
        let l2 = via_detail_model(2, &p).unwrap();
        let l3 = via_detail_model(3, &p).unwrap();
        assert!(l2.refines(&l1));
        assert!(l3.refines(&l2));
        assert!(!l1.refines(&l2));
        assert!((l1.total_height() - l3.total_height()).abs() < 1e-15);
    }

    #[test]
    fn missing_parameters() {
        let p = ViaParams::uniform(10.0 * UM, 50.0 * UM, "copper");
        assert!(matches!(via_detail_model(3, &p), Err(Error::Config { .. })));
        assert!(via_detail_model(4, &p).is_err());
        let mut q = p.clone();
        q.metallization.clear();
        assert!(via_detail_model(1, &q).is_err());
    }
}
