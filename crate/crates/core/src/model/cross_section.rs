//! Conductor cross-sections and their rasterization onto square cells.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default limit on `nx * ny` for one mask.
pub const DEFAULT_CELL_BUDGET: usize = 250_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Circle { radius: f64 },
    Rectangle { width: f64, height: f64 },
    /// Vertices relative to the placement center, counter-clockwise or clockwise.
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedShape {
    pub primitive: Primitive,
    pub center: [f64; 2],
    pub group: usize,
    /// +1 or -1: default direction of the group's current.
    pub current_sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CrossSection {
    Circle { radius: f64 },
    Rectangle { width: f64, height: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
    Composite(Vec<PlacedShape>),
}

impl Primitive {
    pub fn area(&self) -> f64 {
        match self {
            Primitive::Circle { radius } => PI * radius * radius,
            Primitive::Rectangle { width, height } => width * height,
            Primitive::Polygon { vertices } => polygon_area(vertices).abs(),
        }
    }

    /// Strict interior test, point relative to the shape center.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Primitive::Circle { radius } => x * x + y * y < radius * radius,
            Primitive::Rectangle { width, height } => {
                x.abs() < 0.5 * width && y.abs() < 0.5 * height
            }
            Primitive::Polygon { vertices } => point_in_polygon(vertices, x, y),
        }
    }

    fn half_extent(&self) -> [f64; 4] {
        match self {
            Primitive::Circle { radius } => [-radius, *radius, -radius, *radius],
            Primitive::Rectangle { width, height } => {
                [-0.5 * width, 0.5 * width, -0.5 * height, 0.5 * height]
            }
            Primitive::Polygon { vertices } => {
                let mut b = [f64::MAX, f64::MIN, f64::MAX, f64::MIN];
                for v in vertices {
                    b[0] = b[0].min(v[0]);
                    b[1] = b[1].max(v[0]);
                    b[2] = b[2].min(v[1]);
                    b[3] = b[3].max(v[1]);
                }
                b
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Primitive::Circle { radius } if !(*radius > 0.0) => {
                Err(Error::Geometry(format!("circle radius must be > 0 (got {radius})")))
            }
            Primitive::Rectangle { width, height } if !(*width > 0.0 && *height > 0.0) => Err(
                Error::Geometry(format!("rectangle {width} x {height} must have positive sides")),
            ),
            Primitive::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::Geometry("polygon needs at least 3 vertices".into()));
                }
                if polygon_area(vertices).abs() == 0.0 {
                    return Err(Error::Geometry("polygon has zero area".into()));
                }
                if !polygon_is_simple(vertices) {
                    return Err(Error::Geometry("polygon is self-intersecting".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl PlacedShape {
    pub fn new(primitive: Primitive, center: [f64; 2], group: usize) -> Self {
        Self {
            primitive,
            center,
            group,
            current_sign: 1,
        }
    }

    pub fn with_sign(mut self, sign: i8) -> Self {
        self.current_sign = sign;
        self
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.primitive.contains(x - self.center[0], y - self.center[1])
    }

    /// `[xmin, xmax, ymin, ymax]`
    pub fn bbox(&self) -> [f64; 4] {
        let h = self.primitive.half_extent();
        [
            h[0] + self.center[0],
            h[1] + self.center[0],
            h[2] + self.center[1],
            h[3] + self.center[1],
        ]
    }

    fn outline(&self) -> Outline {
        match &self.primitive {
            Primitive::Circle { radius } => Outline::Circle(self.center, *radius),
            Primitive::Rectangle { width, height } => {
                let (cx, cy, w, h) = (self.center[0], self.center[1], 0.5 * width, 0.5 * height);
                Outline::Poly(vec![
                    [cx - w, cy - h],
                    [cx + w, cy - h],
                    [cx + w, cy + h],
                    [cx - w, cy + h],
                ])
            }
            Primitive::Polygon { vertices } => Outline::Poly(
                vertices
                    .iter()
                    .map(|v| [v[0] + self.center[0], v[1] + self.center[1]])
                    .collect(),
            ),
        }
    }
}

impl CrossSection {
    pub fn circle_diameter(d: f64) -> Self {
        CrossSection::Circle { radius: 0.5 * d }
    }

    /// The placed parts; a plain shape becomes one part of group 0 at the origin.
    pub fn parts(&self) -> Vec<PlacedShape> {
        let single = |p: Primitive| vec![PlacedShape::new(p, [0.0, 0.0], 0)];
        match self {
            CrossSection::Circle { radius } => single(Primitive::Circle { radius: *radius }),
            CrossSection::Rectangle { width, height } => single(Primitive::Rectangle {
                width: *width,
                height: *height,
            }),
            CrossSection::Polygon { vertices } => single(Primitive::Polygon {
                vertices: vertices.clone(),
            }),
            CrossSection::Composite(parts) => parts.clone(),
        }
    }

    pub fn group_count(&self) -> usize {
        self.parts().iter().map(|p| p.group + 1).max().unwrap_or(0)
    }

    pub fn group_area(&self, group: usize) -> f64 {
        self.parts()
            .iter()
            .filter(|p| p.group == group)
            .map(|p| p.primitive.area())
            .sum()
    }

    /// Sign of each group's default current (taken from its first part).
    pub fn group_signs(&self) -> Vec<i8> {
        let parts = self.parts();
        (0..self.group_count())
            .map(|g| {
                parts
                    .iter()
                    .find(|p| p.group == g)
                    .map_or(1, |p| p.current_sign)
            })
            .collect()
    }

    pub fn bbox(&self) -> [f64; 4] {
        let mut b = [f64::MAX, f64::MIN, f64::MAX, f64::MIN];
        for p in self.parts() {
            let pb = p.bbox();
            b[0] = b[0].min(pb[0]);
            b[1] = b[1].max(pb[1]);
            b[2] = b[2].min(pb[2]);
            b[3] = b[3].max(pb[3]);
        }
        b
    }

    /// Checks primitive validity, non-overlap and contiguous group ids.
    pub fn validate(&self) -> Result<()> {
        let parts = self.parts();
        if parts.is_empty() {
            return Err(Error::Geometry("cross-section has no parts".into()));
        }
        for p in &parts {
            p.primitive.validate()?;
            if p.current_sign != 1 && p.current_sign != -1 {
                return Err(Error::Geometry(format!(
                    "current sign must be +1 or -1 (got {})",
                    p.current_sign
                )));
            }
        }
        let ng = self.group_count();
        for g in 0..ng {
            if !parts.iter().any(|p| p.group == g) {
                return Err(Error::Geometry(format!(
                    "group ids must be contiguous from 0; group {g} is unused"
                )));
            }
        }
        let outlines: Vec<Outline> = parts.iter().map(PlacedShape::outline).collect();
        for i in 0..outlines.len() {
            for j in i + 1..outlines.len() {
                if outlines[i].overlaps(&outlines[j]) {
                    return Err(Error::Geometry(format!("parts {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }
}

enum Outline {
    Circle([f64; 2], f64),
    Poly(Vec<[f64; 2]>),
}

impl Outline {
    fn overlaps(&self, other: &Outline) -> bool {
        // touching is allowed; a small relative slack absorbs rounding
        match (self, other) {
            (Outline::Circle(c1, r1), Outline::Circle(c2, r2)) => {
                let d = ((c1[0] - c2[0]).powi(2) + (c1[1] - c2[1]).powi(2)).sqrt();
                d < (r1 + r2) * (1.0 - 1e-12)
            }
            (Outline::Circle(c, r), Outline::Poly(p)) | (Outline::Poly(p), Outline::Circle(c, r)) => {
                if point_in_polygon(p, c[0], c[1]) {
                    return true;
                }
                let n = p.len();
                (0..n).any(|k| seg_point_dist(p[k], p[(k + 1) % n], *c) < r * (1.0 - 1e-12))
            }
            (Outline::Poly(a), Outline::Poly(b)) => {
                let (na, nb) = (a.len(), b.len());
                for i in 0..na {
                    for j in 0..nb {
                        if segments_cross(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb]) {
                            return true;
                        }
                    }
                }
                // containment: test an interior point of each
                let ca = interior_probe(a);
                let cb = interior_probe(b);
                point_in_polygon(b, ca[0], ca[1]) || point_in_polygon(a, cb[0], cb[1])
            }
        }
    }
}

fn interior_probe(p: &[[f64; 2]]) -> [f64; 2] {
    // centroid works for convex outlines; fall back to a nudged vertex
    let n = p.len() as f64;
    let c = p
        .iter()
        .fold([0.0, 0.0], |acc, v| [acc[0] + v[0] / n, acc[1] + v[1] / n]);
    if point_in_polygon(p, c[0], c[1]) {
        c
    } else {
        [0.99 * p[0][0] + 0.01 * c[0], 0.99 * p[0][1] + 0.01 * c[1]]
    }
}

pub(crate) fn polygon_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

pub(crate) fn point_in_polygon(v: &[[f64; 2]], x: f64, y: f64) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (v[i][0], v[i][1]);
        let (xj, yj) = (v[j][0], v[j][1]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Proper crossing (interiors intersect transversally).
fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn seg_point_dist(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((a[0] + t * dx - p[0]).powi(2) + (a[1] + t * dy - p[1]).powi(2)).sqrt()
}

fn polygon_is_simple(v: &[[f64; 2]]) -> bool {
    let n = v.len();
    for i in 0..n {
        for j in i + 1..n {
            // skip adjacent edges
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Rasterization options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskOptions {
    pub cell_size: f64,
    pub cell_budget: usize,
    /// Rescale cell areas of each part so they sum to the part's exact area.
    pub preserve_area: bool,
}

impl MaskOptions {
    pub fn new(cell_size: f64) -> Self {
        Self {
            cell_size,
            cell_budget: DEFAULT_CELL_BUDGET,
            preserve_area: false,
        }
    }
}

/// Cell-center rasterization of a cross-section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionMask {
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
    /// Lower-left corner of cell (0, 0).
    pub origin: [f64; 2],
    /// Part index per cell, row-major (`iy * nx + ix`), `None` when empty.
    pub cells: Vec<Option<u32>>,
    pub part_groups: Vec<usize>,
    /// Area of one cell belonging to each part.
    pub part_cell_area: Vec<f64>,
    pub group_signs: Vec<i8>,
}

impl CrossSectionMask {
    pub fn group_count(&self) -> usize {
        self.group_signs.len()
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.origin[0] + (ix as f64 + 0.5) * self.cell_size,
            self.origin[1] + (iy as f64 + 0.5) * self.cell_size,
        ]
    }

    pub fn label(&self, ix: usize, iy: usize) -> Option<usize> {
        self.cells[iy * self.nx + ix].map(|p| self.part_groups[p as usize])
    }

    /// Labeled cells as `(ix, iy, group, area)`, row-major order.
    pub fn labeled(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.cells.iter().enumerate().filter_map(move |(k, c)| {
            c.map(|p| {
                let p = p as usize;
                (k % self.nx, k / self.nx, self.part_groups[p], self.part_cell_area[p])
            })
        })
    }

    pub fn labeled_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn group_area(&self, group: usize) -> f64 {
        self.labeled()
            .filter(|&(_, _, g, _)| g == group)
            .map(|(_, _, _, a)| a)
            .sum()
    }
}

/// Labels each cell by the part whose shape contains the cell center.
pub fn build_cross_section(section: &CrossSection, opts: &MaskOptions) -> Result<CrossSectionMask> {
    let h = opts.cell_size;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Geometry(format!("cell size must be > 0 (got {h})")));
    }
    section.validate()?;
    let parts = section.parts();
    let b = section.bbox();
    let (w, hgt) = (b[1] - b[0], b[3] - b[2]);
    let nx = ((w / h) - 1e-9).ceil().max(1.0) as usize;
    let ny = ((hgt / h) - 1e-9).ceil().max(1.0) as usize;
    if nx.saturating_mul(ny) > opts.cell_budget {
        return Err(Error::Resource(format!(
            "mask of {nx} x {ny} cells exceeds budget of {} cells; use a coarser cell size",
            opts.cell_budget
        )));
    }
    let origin = [
        0.5 * (b[0] + b[1]) - 0.5 * nx as f64 * h,
        0.5 * (b[2] + b[3]) - 0.5 * ny as f64 * h,
    ];
    let mut cells = vec![None; nx * ny];
    let mut counts = vec![0usize; parts.len()];
    for iy in 0..ny {
        let y = origin[1] + (iy as f64 + 0.5) * h;
        for ix in 0..nx {
            let x = origin[0] + (ix as f64 + 0.5) * h;
            let mut hit = None;
            for (k, p) in parts.iter().enumerate() {
                if p.contains(x, y) {
                    if hit.is_some() {
                        return Err(Error::Geometry(format!(
                            "parts overlap at ({x:e}, {y:e})"
                        )));
                    }
                    hit = Some(k as u32);
                }
            }
            if let Some(k) = hit {
                counts[k as usize] += 1;
            }
            cells[iy * nx + ix] = hit;
        }
    }
    let mut part_cell_area = Vec::with_capacity(parts.len());
    for (k, p) in parts.iter().enumerate() {
        if counts[k] == 0 {
            return Err(Error::Geometry(format!(
                "part {k} is smaller than one cell of size {h:e}"
            )));
        }
        let raster = counts[k] as f64 * h * h;
        part_cell_area.push(if opts.preserve_area {
            h * h * p.primitive.area() / raster
        } else {
            h * h
        });
    }
    Ok(CrossSectionMask {
        cell_size: h,
        nx,
        ny,
        origin,
        cells,
        part_groups: parts.iter().map(|p| p.group).collect(),
        part_cell_area,
        group_signs: section.group_signs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const UM: f64 = 1e-6;

    #[test]
    fn circle_area_within_two_percent() {
        let cs = CrossSection::Circle { radius: 5.0 * UM };
        let m = build_cross_section(&cs, &MaskOptions::new(0.25 * UM)).unwrap();
        let exact = PI * 25.0 * UM * UM;
        assert!((m.group_area(0) / exact - 1.0).abs() < 0.02);
        assert!((exact / (UM * UM) - 78.54).abs() < 0.01);
    }

    #[test]
    fn rectangle_rasterizes_exactly() {
        let cs = CrossSection::Rectangle {
            width: 7.0 * UM,
            height: 7.0 * UM,
        };
        let m = build_cross_section(&cs, &MaskOptions::new(0.5 * UM)).unwrap();
        assert_eq!(m.labeled_count(), 196);
        assert!((m.group_area(0) - 49.0 * UM * UM).abs() < 1e-24);
    }

    fn structure3(center_sign: i8) -> CrossSection {
        let s = 2.5 * UM;
        let sq = Primitive::Rectangle { width: s, height: s };
        let c = 2.25 * UM;
        let mut parts: Vec<PlacedShape> = [[-c, -c], [c, -c], [-c, c], [c, c]]
            .iter()
            .map(|&p| PlacedShape::new(sq.clone(), p, 0))
            .collect();
        parts.push(
            PlacedShape::new(
                Primitive::Rectangle {
                    width: 1.5 * UM,
                    height: 1.5 * UM,
                },
                [0.0, 0.0],
                1,
            )
            .with_sign(center_sign),
        );
        CrossSection::Composite(parts)
    }

    #[test]
    fn five_via_composite_has_two_groups() {
        let cs = structure3(-1);
        cs.validate().unwrap();
        let m = build_cross_section(&cs, &MaskOptions::new(0.25 * UM)).unwrap();
        assert_eq!(m.group_count(), 2);
        assert_eq!(m.group_signs, vec![1, -1]);
        assert!(m.group_area(0) > 0.0 && m.group_area(1) > 0.0);
    }

    #[test]
    fn overlap_is_rejected() {
        let c = Primitive::Circle { radius: 2.0 * UM };
        let cs = CrossSection::Composite(vec![
            PlacedShape::new(c.clone(), [0.0, 0.0], 0),
            PlacedShape::new(c, [3.0 * UM, 0.0], 0),
        ]);
        assert!(matches!(cs.validate(), Err(Error::Geometry(_))));
        let r = Primitive::Rectangle {
            width: 2.0 * UM,
            height: 2.0 * UM,
        };
        let cs = CrossSection::Composite(vec![
            PlacedShape::new(r.clone(), [0.0, 0.0], 0),
            PlacedShape::new(Primitive::Circle { radius: 1.0 * UM }, [1.5 * UM, 0.0], 0),
        ]);
        assert!(cs.validate().is_err());
        // touching squares are fine
        let cs = CrossSection::Composite(vec![
            PlacedShape::new(r.clone(), [0.0, 0.0], 0),
            PlacedShape::new(r, [2.0 * UM, 0.0], 0),
        ]);
        assert!(cs.validate().is_ok());
    }

    #[test]
    fn non_contiguous_groups_rejected() {
        let c = Primitive::Circle { radius: 1.0 * UM };
        let cs = CrossSection::Composite(vec![
            PlacedShape::new(c.clone(), [0.0, 0.0], 0),
            PlacedShape::new(c, [5.0 * UM, 0.0], 2),
        ]);
        assert!(cs.validate().is_err());
    }

    #[test]
    fn self_intersecting_polygon_rejected() {
        let bow = CrossSection::Polygon {
            vertices: vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]],
        };
        assert!(bow.validate().is_err());
        let tri = CrossSection::Polygon {
            vertices: vec![[0.0, 0.0], [4.0 * UM, 0.0], [0.0, 4.0 * UM]],
        };
        let m = build_cross_section(&tri, &MaskOptions::new(0.1 * UM)).unwrap();
        assert!((m.group_area(0) / (8.0 * UM * UM) - 1.0).abs() < 0.03);
    }

    #[test]
    fn budget_enforced() {
        let cs = CrossSection::Circle { radius: 5.0 * UM };
        let mut o = MaskOptions::new(0.01 * UM);
        o.cell_budget = 1000;
        assert!(matches!(build_cross_section(&cs, &o), Err(Error::Resource(_))));
    }

    #[test]
    fn preserve_area_is_exact() {
        let cs = CrossSection::Circle { radius: 5.0 * UM };
        let mut o = MaskOptions::new(0.3 * UM);
        o.preserve_area = true;
        let m = build_cross_section(&cs, &o).unwrap();
        assert!((m.group_area(0) / (PI * 25.0 * UM * UM) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refinement_halves_circle_error() {
        // averaged over a few radii, halving the cell at least halves the error
        let mut coarse = 0.0;
        let mut fine = 0.0;
        for k in 0..6 {
            let r = (4.0 + 0.37 * k as f64) * UM;
            let cs = CrossSection::Circle { radius: r };
            let exact = PI * r * r;
            let e = |h: f64| {
                let m = build_cross_section(&cs, &MaskOptions::new(h)).unwrap();
                (m.group_area(0) - exact).abs() / exact
            };
            coarse += e(0.4 * UM);
            fine += e(0.1 * UM);
        }
        assert!(fine <= 0.5 * coarse, "{fine} vs {coarse}");
    }
}
