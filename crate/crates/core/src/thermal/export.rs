use std::fmt::Write;

use super::grid::VoxelGrid;

/// `x_m,y_m,z_m,t_k` per voxel center in linear index order.
pub fn temperature_csv(grid: &VoxelGrid, temperature: &[f64]) -> String {
    let mut s = String::from("x_m,y_m,z_m,t_k\n");
    for (i, t) in temperature.iter().enumerate() {
        let c = grid.center(i);
        let _ = writeln!(s, "{:e},{:e},{:e},{:e}", c[0], c[1], c[2], t);
    }
    s
}

fn heat_color(u: f64) -> (u8, u8, u8) {
    // blue → cyan → yellow → red
    let u = u.clamp(0.0, 1.0);
    let stops = [(0.0, (49, 54, 149)), (0.35, (116, 173, 209)), (0.65, (254, 224, 144)), (1.0, (215, 48, 39))];
    for w in stops.windows(2) {
        let ((a, ca), (b, cb)) = (w[0], w[1]);
        if u <= b {
            let s = (u - a) / (b - a);
            let lerp = |p: u8, q: u8| (p as f64 + s * (q as f64 - p as f64)).round() as u8;
            return (lerp(ca.0, cb.0), lerp(ca.1, cb.1), lerp(ca.2, cb.2));
        }
    }
    (215, 48, 39)
}

/// Heat map of slice `z`, one rectangle per voxel, hottest voxel outlined.
pub fn slice_svg(grid: &VoxelGrid, temperature: &[f64], z: usize, title: &str) -> String {
    let cell = (480.0 / grid.nx.max(grid.ny) as f64).max(1.0);
    let (w, h) = (grid.nx as f64 * cell, grid.ny as f64 * cell);
    let plane = &temperature[z * grid.nx * grid.ny..(z + 1) * grid.nx * grid.ny];
    let lo = plane.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = plane.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        w + 20.0,
        h + 60.0,
        w + 20.0,
        h + 60.0
    );
    let _ = writeln!(s, r#"<text x="10" y="20" font-family="sans-serif" font-size="14">{}</text>"#, escape(title));
    let mut hot = (0, lo);
    for y in 0..grid.ny {
        for x in 0..grid.nx {
            let t = plane[y * grid.nx + x];
            if t > hot.1 || (x == 0 && y == 0) {
                hot = (y * grid.nx + x, t);
            }
            let (r, g, b) = heat_color((t - lo) / span);
            // y grows upward in the stack, downward in SVG
            let _ = writeln!(
                s,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="rgb({r},{g},{b})"/>"#,
                10.0 + x as f64 * cell,
                30.0 + (grid.ny - 1 - y) as f64 * cell,
                cell,
                cell
            );
        }
    }
    let (hx, hy) = (hot.0 % grid.nx, hot.0 / grid.nx);
    let _ = writeln!(
        s,
        r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="black" stroke-width="1.5"/>"#,
        10.0 + hx as f64 * cell,
        30.0 + (grid.ny - 1 - hy) as f64 * cell,
        cell,
        cell
    );
    let _ = writeln!(
        s,
        r#"<text x="10" y="{:.0}" font-family="sans-serif" font-size="12">T min {:.3} K, T max {:.3} K</text>"#,
        h + 50.0,
        lo,
        hi
    );
    s.push_str("</svg>\n");
    s
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
